//! Sylvester problem instances split across agents, instance generators and
//! centralized reference solvers.

mod bundle;
mod kkt;
mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use bundle::{read_bundle, write_bundle, BUNDLE_FILES};
pub use kkt::{
    kkt_blocks_exact, kkt_blocks_ls, kkt_blocks_reg, kkt_point_exact, kkt_point_ls, kkt_point_reg,
    kkt_residual_exact, kkt_residual_ls, kkt_residual_reg, KktBlocks,
};
pub use oracle::{
    distributed_objective_reg, lasso_stationarity, oracle_least_squares, oracle_regularized,
    OracleSolution, ISTA_MAX_ITERATIONS, RANK_CUTOFF,
};

use crate::error::{Error, Result};
use crate::matcore::{BlockPartition, DenseMatrix};
use crate::network::Network;
use crate::penalty::PenaltySpec;

/// Minimum pairwise distance between `spec(A)` and `spec(-B)` for an
/// instance to count as uniquely solvable.
pub const SPECTRUM_GAP: f64 = 1e-6;

const RESAMPLE_BUDGET: usize = 200;

/// What agent `i` knows: its row band of `A` and column bands of `B`, `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentData {
    /// `A_i`, `m_i × m`
    pub a: DenseMatrix,
    /// `B_i`, `r × r_i`
    pub b: DenseMatrix,
    /// `C_i`, `m × r_i`
    pub c: DenseMatrix,
    pub a_t: DenseMatrix,
    pub b_t: DenseMatrix,
    pub row_offset: usize,
    pub row_size: usize,
    pub col_offset: usize,
    pub col_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SylvesterProblem {
    a: DenseMatrix,
    b: DenseMatrix,
    c: DenseMatrix,
    partition: BlockPartition,
    network: Network,
    penalty: PenaltySpec,
    agents: Vec<AgentData>,
}

impl SylvesterProblem {
    pub fn new(
        a: DenseMatrix,
        b: DenseMatrix,
        c: DenseMatrix,
        partition: BlockPartition,
        network: Network,
        penalty: PenaltySpec,
    ) -> Result<Self> {
        let (m, r) = (partition.m(), partition.r());
        if a.shape() != (m, m) {
            return Err(Error::dim("problem A", a.shape(), (m, m)));
        }
        if b.shape() != (r, r) {
            return Err(Error::dim("problem B", b.shape(), (r, r)));
        }
        if c.shape() != (m, r) {
            return Err(Error::dim("problem C", c.shape(), (m, r)));
        }
        if partition.n() != network.n() {
            return Err(Error::Validation(format!(
                "partition has {} agents but network has {}",
                partition.n(),
                network.n()
            )));
        }
        for mat in [&a, &b, &c] {
            if !mat.is_finite() {
                return Err(Error::Validation("problem data must be finite".into()));
            }
        }
        let agents = (0..partition.n())
            .map(|i| {
                let (row_offset, row_size) = partition.row_range(i)?;
                let (col_offset, col_size) = partition.col_range(i)?;
                let ai = a.row_band(row_offset, row_size)?;
                let bi = b.col_band(col_offset, col_size)?;
                let ci = c.col_band(col_offset, col_size)?;
                Ok(AgentData {
                    a_t: ai.transpose(),
                    b_t: bi.transpose(),
                    a: ai,
                    b: bi,
                    c: ci,
                    row_offset,
                    row_size,
                    col_offset,
                    col_size,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            a,
            b,
            c,
            partition,
            network,
            penalty,
            agents,
        })
    }

    pub fn with_penalty(mut self, penalty: PenaltySpec) -> Self {
        self.penalty = penalty;
        self
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn b(&self) -> &DenseMatrix {
        &self.b
    }

    pub fn c(&self) -> &DenseMatrix {
        &self.c
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn penalty(&self) -> PenaltySpec {
        self.penalty
    }

    pub fn n(&self) -> usize {
        self.partition.n()
    }

    pub fn m(&self) -> usize {
        self.partition.m()
    }

    pub fn r(&self) -> usize {
        self.partition.r()
    }

    pub fn agent(&self, i: usize) -> Result<&AgentData> {
        self.agents.get(i).ok_or(Error::IndexOutOfRange {
            what: "agent",
            index: i,
            count: self.agents.len(),
        })
    }

    pub fn agents(&self) -> &[AgentData] {
        &self.agents
    }

    /// `(A_i, B_i, C_i)`
    pub fn agent_data(&self, i: usize) -> Result<(&DenseMatrix, &DenseMatrix, &DenseMatrix)> {
        let ag = self.agent(i)?;
        Ok((&ag.a, &ag.b, &ag.c))
    }

    /// `AX + XB − C`
    pub fn residual_matrix(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.shape() != (self.m(), self.r()) {
            return Err(Error::dim("residual", x.shape(), (self.m(), self.r())));
        }
        let mut res = self.a.matmul(x)?;
        res.axpy(1.0, &x.matmul(&self.b)?)?;
        res.axpy(-1.0, &self.c)?;
        Ok(res)
    }

    /// `‖AX + XB − C‖_F`
    pub fn residual(&self, x: &DenseMatrix) -> Result<f64> {
        Ok(self.residual_matrix(x)?.frobenius_norm())
    }

    /// `I_r ⊗ A + Bᵀ ⊗ I_m`, acting on column-major `vec(X)`.
    pub fn sylvester_operator(&self) -> DenseMatrix {
        let mut op = DenseMatrix::identity(self.r()).kron(&self.a);
        op.axpy(1.0, &self.b.transpose().kron(&DenseMatrix::identity(self.m())))
            .expect("kron shapes agree");
        op
    }

    /// `ℓ_ii` of the graph Laplacian, maximized over agents.
    pub fn max_degree(&self) -> f64 {
        (0..self.n()).map(|i| self.network.degree(i)).fold(0.0, f64::max)
    }
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..=1.0))
}

fn eigenvalues(m: &DenseMatrix) -> Vec<nalgebra::Complex<f64>> {
    m.to_nalgebra().complex_eigenvalues().iter().copied().collect()
}

/// `min |λ + μ|` over `λ ∈ spec(A)`, `μ ∈ spec(B)`: the distance between
/// `spec(A)` and `spec(−B)`.
pub fn spectrum_separation(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    let ea = eigenvalues(a);
    let eb = eigenvalues(b);
    ea.iter()
        .flat_map(|la| eb.iter().map(move |mb| (la + mb).norm()))
        .fold(f64::INFINITY, f64::min)
}

/// A seeded instance with disjoint `spec(A)`, `spec(−B)` and
/// `C = A·X* + X*·B`, returned together with `X*`.
pub fn gen_exact_instance(
    partition: BlockPartition,
    network: Network,
    seed: u64,
) -> Result<(SylvesterProblem, DenseMatrix)> {
    let (m, r) = (partition.m(), partition.r());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RESAMPLE_BUDGET {
        let a = uniform_matrix(&mut rng, m, m);
        let b = uniform_matrix(&mut rng, r, r);
        if spectrum_separation(&a, &b) <= SPECTRUM_GAP {
            continue;
        }
        let x_star = uniform_matrix(&mut rng, m, r);
        let mut c = a.matmul(&x_star)?;
        c.axpy(1.0, &x_star.matmul(&b)?)?;
        let prob = SylvesterProblem::new(a, b, c, partition, network, PenaltySpec::None)?;
        return Ok((prob, x_star));
    }
    Err(Error::Generation {
        attempts: RESAMPLE_BUDGET,
        reason: "could not draw A, B with separated spectra".into(),
    })
}

fn real_eigenvalue(m: &DenseMatrix) -> Option<f64> {
    eigenvalues(m)
        .into_iter()
        .filter(|z| z.im.abs() <= 1e-12 * (1.0 + z.re.abs()))
        .map(|z| z.re)
        .next()
}

/// Draws `A`, `B` and shifts `B` by a multiple of the identity so that a
/// real eigenvalue of `A` also lies in `spec(−B)`, which makes the
/// Sylvester operator singular.
fn singular_pair(rng: &mut ChaCha8Rng, m: usize, r: usize) -> Option<(DenseMatrix, DenseMatrix)> {
    let a = uniform_matrix(rng, m, m);
    let b = uniform_matrix(rng, r, r);
    let la = real_eigenvalue(&a)?;
    let mb = real_eigenvalue(&b)?;
    let mut shifted = b;
    shifted.axpy(-(la + mb), &DenseMatrix::identity(r)).ok()?;
    Some((a, shifted))
}

fn left_null_vector(op: &DenseMatrix) -> Option<Vec<f64>> {
    let svd = op.to_nalgebra().svd(true, false);
    let u = svd.u?;
    let s = &svd.singular_values;
    let smax = s.max();
    let (k, smin) = s.iter().enumerate().fold((0, f64::INFINITY), |acc, (k, &v)| {
        if v < acc.1 {
            (k, v)
        } else {
            acc
        }
    });
    (smin <= RANK_CUTOFF * smax).then(|| u.column(k).iter().copied().collect())
}

/// A seeded instance with no exact solution: the operator is singular and
/// `vec(C)` has a component of norm ½ outside its range.
pub fn gen_inconsistent_instance(partition: BlockPartition, network: Network, seed: u64) -> Result<SylvesterProblem> {
    let (m, r) = (partition.m(), partition.r());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RESAMPLE_BUDGET {
        let Some((a, b)) = singular_pair(&mut rng, m, r) else {
            continue;
        };
        let x0 = uniform_matrix(&mut rng, m, r);
        let probe = SylvesterProblem::new(
            a.clone(),
            b.clone(),
            DenseMatrix::zeros(m, r),
            partition.clone(),
            network.clone(),
            PenaltySpec::None,
        )?;
        let Some(u) = left_null_vector(&probe.sylvester_operator()) else {
            continue;
        };
        let mut c = a.matmul(&x0)?;
        c.axpy(1.0, &x0.matmul(&b)?)?;
        c.axpy(0.5, &DenseMatrix::unvec(&u, m, r)?)?;
        let prob = SylvesterProblem::new(a, b, c, partition.clone(), network.clone(), PenaltySpec::None)?;
        if oracle_least_squares(&prob)?.residual > 1e-3 {
            return Ok(prob);
        }
    }
    Err(Error::Generation {
        attempts: RESAMPLE_BUDGET,
        reason: "could not build an inconsistent instance".into(),
    })
}

/// A seeded consistent instance whose operator is singular, so the solution
/// set is an affine subspace of positive dimension. Returns one solution.
pub fn gen_singular_consistent_instance(
    partition: BlockPartition,
    network: Network,
    seed: u64,
) -> Result<(SylvesterProblem, DenseMatrix)> {
    let (m, r) = (partition.m(), partition.r());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RESAMPLE_BUDGET {
        let Some((a, b)) = singular_pair(&mut rng, m, r) else {
            continue;
        };
        let x0 = uniform_matrix(&mut rng, m, r);
        let mut c = a.matmul(&x0)?;
        c.axpy(1.0, &x0.matmul(&b)?)?;
        let prob = SylvesterProblem::new(a, b, c, partition.clone(), network.clone(), PenaltySpec::None)?;
        if !oracle_least_squares(&prob)?.unique {
            return Ok((prob, x0));
        }
    }
    Err(Error::Generation {
        attempts: RESAMPLE_BUDGET,
        reason: "could not build a rank-deficient instance".into(),
    })
}
