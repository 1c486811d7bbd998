//! Undirected weighted communication graphs between agents.

use std::collections::VecDeque;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matcore::DenseMatrix;

/// A connected undirected graph with positive symmetric edge weights.
///
/// Connectivity is checked once at construction, so every `Network` value
/// satisfies it.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    weights: DenseMatrix,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl Network {
    pub fn new(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("network needs at least one agent".into()));
        }
        let mut weights = DenseMatrix::zeros(n, n);
        for &(i, j, w) in edges {
            for k in [i, j] {
                if k >= n {
                    return Err(Error::IndexOutOfRange {
                        what: "agent",
                        index: k,
                        count: n,
                    });
                }
            }
            if i == j {
                return Err(Error::Validation(format!("self-loop at agent {i}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Validation(format!("edge ({i}, {j}) has nonpositive weight {w}")));
            }
            if weights[(i, j)] != 0.0 {
                return Err(Error::Validation(format!("duplicate edge ({i}, {j})")));
            }
            weights[(i, j)] = w;
            weights[(j, i)] = w;
        }
        let neighbors: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| weights[(i, j)] > 0.0)
                    .map(|j| (j, weights[(i, j)]))
                    .collect()
            })
            .collect();
        let net = Self { weights, neighbors };
        let components = net.components();
        if components.len() > 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(net)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j, 1.0)))
            .collect();
        Self::new(n, &edges)
    }

    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i, 1.0)).collect();
        Self::new(n, &edges)
    }

    /// Cycle through all agents; for `n < 3` this is the path graph.
    pub fn ring(n: usize) -> Result<Self> {
        if n < 3 {
            return Self::path(n);
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
        Self::new(n, &edges)
    }

    /// G(n, p) with unit weights, redrawn until connected.
    pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Validation(format!("edge probability {p} outside [0, 1]")));
        }
        const BUDGET: usize = 1000;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..BUDGET {
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random::<f64>() < p {
                        edges.push((i, j, 1.0));
                    }
                }
            }
            match Self::new(n, &edges) {
                Ok(net) => return Ok(net),
                Err(Error::Disconnected { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::Generation {
            attempts: BUDGET,
            reason: format!("no connected G({n}, {p}) sample"),
        })
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn weights(&self) -> &DenseMatrix {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    /// `(j, a_ij)` for each neighbor `j` of `i`, in increasing `j`.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.neighbors[i].iter().map(|&(_, w)| w).sum()
    }

    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n())
            .flat_map(|i| {
                self.neighbors[i]
                    .iter()
                    .filter(move |&&(j, _)| j > i)
                    .map(move |&(j, w)| (i, j, w))
            })
            .collect()
    }

    fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &(v, _) in &self.neighbors[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// `L = D - A`.
    pub fn laplacian(&self) -> DenseMatrix {
        let n = self.n();
        DenseMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.degree(i)
            } else {
                -self.weights[(i, j)]
            }
        })
    }

    /// `Σ_j a_ij (blocks[i] - blocks[j])`, reading only `i` and its neighbors.
    pub fn neighbor_sum(&self, blocks: &[DenseMatrix], i: usize) -> Result<DenseMatrix> {
        self.neighbor_sum_by(i, |k| &blocks[k])
    }

    /// Like [`Network::neighbor_sum`] but with blocks fetched through `get`,
    /// which is only ever called with `i` or a neighbor of `i`.
    pub fn neighbor_sum_by<'a>(
        &self,
        i: usize,
        get: impl Fn(usize) -> &'a DenseMatrix,
    ) -> Result<DenseMatrix> {
        if i >= self.n() {
            return Err(Error::IndexOutOfRange {
                what: "agent",
                index: i,
                count: self.n(),
            });
        }
        let own = get(i);
        let mut out = DenseMatrix::zeros(own.rows(), own.cols());
        for &(j, w) in &self.neighbors[i] {
            let other = get(j);
            if other.shape() != own.shape() {
                return Err(Error::dim("neighbor_sum", own.shape(), other.shape()));
            }
            let o = out.as_mut_slice();
            for ((acc, a), b) in o.iter_mut().zip(own.as_slice()).zip(other.as_slice()) {
                *acc += w * (a - b);
            }
        }
        Ok(out)
    }

    /// Text form: `n`, then one `i j weight` line per edge.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.n());
        for (i, j, w) in self.edges() {
            s.push_str(&format!("{i} {j} {w:.16e}\n"));
        }
        s
    }

    pub fn parse_text(text: &str, source_name: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let n: usize = lines
            .next()
            .ok_or_else(|| Error::parse(source_name, "empty graph file"))?
            .parse()
            .map_err(|e| Error::parse(source_name, format!("bad agent count: {e}")))?;
        let mut edges = Vec::new();
        for line in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            let [i, j, w] = toks[..] else {
                return Err(Error::parse(source_name, format!("edge line must be `i j weight`: {line:?}")));
            };
            let bad = |e: &dyn std::fmt::Display| Error::parse(source_name, format!("{line:?}: {e}"));
            edges.push((
                i.parse::<usize>().map_err(|e| bad(&e))?,
                j.parse::<usize>().map_err(|e| bad(&e))?,
                w.parse::<f64>().map_err(|e| bad(&e))?,
            ));
        }
        Self::new(n, &edges)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text, &path.display().to_string())
    }
}

/// Named topology generators used by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    Complete,
    Ring,
    Path,
    /// Erdős–Rényi with edge probability `p`, reseeded until connected.
    ErdosRenyi { p: f64 },
}

impl Topology {
    pub fn build(&self, n: usize, seed: u64) -> Result<Network> {
        match *self {
            Topology::Complete => Network::complete(n),
            Topology::Ring => Network::ring(n),
            Topology::Path => Network::path(n),
            Topology::ErdosRenyi { p } => Network::erdos_renyi(n, p, seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge() {
        let net = Network::new(2, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(
            net.weights(),
            &DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap()
        );
        assert_eq!(
            net.laplacian(),
            DenseMatrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]).unwrap()
        );
    }

    #[test]
    fn disconnected_is_rejected() {
        match Network::new(3, &[(0, 1, 1.0)]) {
            Err(Error::Disconnected { components }) => {
                assert_eq!(components, vec![vec![0, 1], vec![2]]);
            }
            other => panic!("expected disconnection error, got {other:?}"),
        }
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(Network::new(2, &[(0, 0, 1.0)]), Err(Error::Validation(_))));
        assert!(matches!(Network::new(2, &[(0, 1, 0.0)]), Err(Error::Validation(_))));
        assert!(matches!(Network::new(2, &[(0, 1, -2.0)]), Err(Error::Validation(_))));
        assert!(matches!(
            Network::new(2, &[(0, 5, 1.0)]),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(Network::new(2, &[(0, 1, 1.0), (1, 0, 2.0)]).is_err());
        assert!(Network::new(0, &[]).is_err());
        assert!(Network::new(1, &[]).is_ok());
    }

    #[test]
    fn complete_graph_k8() {
        let net = Network::complete(8).unwrap();
        assert_eq!(net.edges().len(), 28);
        for i in 0..8 {
            for j in 0..8 {
                let expect = if i == j { 0.0 } else { 1.0 };
                assert_eq!(net.weight(i, j), expect);
                assert_eq!(net.weight(i, j), net.weight(j, i));
            }
        }
    }

    #[test]
    fn k3_laplacian() {
        let l = Network::complete(3).unwrap().laplacian();
        let expect =
            DenseMatrix::from_rows(&[[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]]).unwrap();
        assert_eq!(l, expect);
    }

    #[test]
    fn neighbor_sum_examples() {
        let net = Network::path(2).unwrap();
        let blocks = vec![DenseMatrix::column(&[1.0]), DenseMatrix::column(&[3.0])];
        assert_eq!(net.neighbor_sum(&blocks, 0).unwrap().as_slice(), &[-2.0]);

        let same = vec![DenseMatrix::identity(2); 2];
        assert_eq!(net.neighbor_sum(&same, 1).unwrap(), DenseMatrix::zeros(2, 2));

        let bad = vec![DenseMatrix::zeros(1, 1), DenseMatrix::zeros(2, 1)];
        assert!(net.neighbor_sum(&bad, 0).is_err());
        assert!(net.neighbor_sum(&blocks, 4).is_err());
    }

    #[test]
    fn topologies() {
        assert_eq!(Network::ring(5).unwrap().edges().len(), 5);
        assert_eq!(Network::path(5).unwrap().edges().len(), 4);
        let er = Network::erdos_renyi(6, 0.4, 11).unwrap();
        assert_eq!(er, Network::erdos_renyi(6, 0.4, 11).unwrap());
        assert!(Network::erdos_renyi(3, 0.0, 1).is_err());
    }

    #[test]
    fn text_roundtrip() {
        let net = Network::new(4, &[(0, 1, 0.5), (1, 2, 2.0), (2, 3, 1.25), (0, 3, 3.0)]).unwrap();
        let back = Network::parse_text(&net.to_text(), "t").unwrap();
        assert_eq!(back, net);
        assert!(Network::parse_text("3\n0 1 1\n", "t").is_err());
        assert!(Network::parse_text("2\n0 1\n", "t").is_err());
    }
}
