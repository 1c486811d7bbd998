//! Dense real matrices, Frobenius geometry, Kronecker/vec utilities and the
//! band embeddings that place an agent's row or column block on the full
//! `m × r` canvas.

use std::fmt::Write as _;
use std::ops::{Index, IndexMut};
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major dense `f64` matrix.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Validation(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row slices; all rows must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (k, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::dim("from_rows", (k, row.len()), (k, cols)));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Column vector with the given entries.
    pub fn column(values: &[f64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    fn same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::dim(op, self.shape(), other.shape()));
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::dim("matmul", self.shape(), other.shape()));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        let n = other.cols;
        for i in 0..self.rows {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * n..(k + 1) * n];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other, "add")?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { data, ..*self })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_shape(other, "sub")?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { data, ..*self })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            data: self.data.iter().map(|v| v * s).collect(),
            ..*self
        }
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        self.same_shape(other, "axpy")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn frobenius_inner(&self, other: &Self) -> Result<f64> {
        self.same_shape(other, "frobenius_inner")?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn norm_squared(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Entrywise sum of absolute values.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    /// Column-major stacking into an `(rows*cols) × 1` vector.
    pub fn vec(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self[(i, j)]);
            }
        }
        Self {
            rows: self.data.len(),
            cols: 1,
            data,
        }
    }

    /// Inverse of [`DenseMatrix::vec`].
    pub fn unvec(v: &[f64], rows: usize, cols: usize) -> Result<Self> {
        if v.len() != rows * cols {
            return Err(Error::dim("unvec", (v.len(), 1), (rows, cols)));
        }
        Ok(Self::from_fn(rows, cols, |i, j| v[j * rows + i]))
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (p, q) = other.shape();
        Self::from_fn(self.rows * p, self.cols * q, |i, j| {
            self[(i / p, j / q)] * other[(i % p, j % q)]
        })
    }

    /// Rows `[start, start + len)`.
    pub fn row_band(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.rows {
            return Err(Error::dim("row_band", self.shape(), (start + len, self.cols)));
        }
        Ok(Self {
            rows: len,
            cols: self.cols,
            data: self.data[start * self.cols..(start + len) * self.cols].to_vec(),
        })
    }

    /// Columns `[start, start + len)`.
    pub fn col_band(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.cols {
            return Err(Error::dim("col_band", self.shape(), (self.rows, start + len)));
        }
        Ok(Self::from_fn(self.rows, len, |i, j| self[(i, start + j)]))
    }

    /// Adds `block` onto the sub-matrix whose top-left corner is `(row, col)`.
    pub fn add_block(&mut self, row: usize, col: usize, block: &Self) -> Result<()> {
        if row + block.rows > self.rows || col + block.cols > self.cols {
            return Err(Error::dim("add_block", self.shape(), (row + block.rows, col + block.cols)));
        }
        for i in 0..block.rows {
            for j in 0..block.cols {
                self.data[(row + i) * self.cols + col + j] += block[(i, j)];
            }
        }
        Ok(())
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    /// Text form: `rows cols` header, then one line per row with 17
    /// significant digits per entry.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.rows, self.cols);
        for i in 0..self.rows {
            let line: Vec<String> = (0..self.cols).map(|j| format!("{:.16e}", self[(i, j)])).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn parse_text(text: &str, source_name: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(source_name, "empty matrix file"))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(source_name, format!("bad header {header:?}: {e}")))?;
        let [rows, cols] = dims[..] else {
            return Err(Error::parse(source_name, format!("header must be `rows cols`, got {header:?}")));
        };
        if rows == 0 || cols == 0 {
            return Err(Error::parse(source_name, "matrix dimensions must be positive"));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for k in 0..rows {
            let line = lines
                .next()
                .ok_or_else(|| Error::parse(source_name, format!("expected {rows} rows, found {k}")))?;
            let before = data.len();
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|e| Error::parse(source_name, format!("row {k}: bad number {tok:?}: {e}")))?;
                if !v.is_finite() {
                    return Err(Error::parse(source_name, format!("row {k}: non-finite entry {tok:?}")));
                }
                data.push(v);
            }
            if data.len() - before != cols {
                return Err(Error::parse(
                    source_name,
                    format!("row {k} has {} entries, expected {cols}", data.len() - before),
                ));
            }
        }
        if lines.next().is_some() {
            return Err(Error::parse(source_name, "trailing data after last row"));
        }
        Self::new(rows, cols, data)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text, &path.display().to_string())
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of {:?}", self.shape());
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of {:?}", self.shape());
        &mut self.data[i * self.cols + j]
    }
}

pub fn frobenius_inner(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    a.frobenius_inner(b)
}

pub fn frobenius_norm(a: &DenseMatrix) -> f64 {
    a.frobenius_norm()
}

/// Row sizes `m_i` (split of `A` by rows) and column sizes `r_i` (split of
/// `B` and `C` by columns), one pair per agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    row_sizes: Vec<usize>,
    col_sizes: Vec<usize>,
    row_offsets: Vec<usize>,
    col_offsets: Vec<usize>,
}

fn offsets(sizes: &[usize]) -> Vec<usize> {
    let mut acc = 0;
    let mut out = Vec::with_capacity(sizes.len() + 1);
    out.push(0);
    for s in sizes {
        acc += s;
        out.push(acc);
    }
    out
}

impl BlockPartition {
    pub fn new(row_sizes: Vec<usize>, col_sizes: Vec<usize>) -> Result<Self> {
        if row_sizes.is_empty() {
            return Err(Error::Validation("partition needs at least one agent".into()));
        }
        if row_sizes.len() != col_sizes.len() {
            return Err(Error::Validation(format!(
                "partition has {} row blocks but {} column blocks",
                row_sizes.len(),
                col_sizes.len()
            )));
        }
        if row_sizes.iter().chain(&col_sizes).any(|&s| s == 0) {
            return Err(Error::Validation("partition block sizes must be positive".into()));
        }
        Ok(Self {
            row_offsets: offsets(&row_sizes),
            col_offsets: offsets(&col_sizes),
            row_sizes,
            col_sizes,
        })
    }

    /// Equal blocks with the remainder going to the last agent.
    pub fn equal(m: usize, r: usize, n: usize) -> Result<Self> {
        if n == 0 || m < n || r < n {
            return Err(Error::Validation(format!(
                "cannot split m={m}, r={r} into {n} nonempty blocks"
            )));
        }
        let split = |total: usize| {
            let base = total / n;
            let mut sizes = vec![base; n];
            sizes[n - 1] += total - base * n;
            sizes
        };
        Self::new(split(m), split(r))
    }

    pub fn n(&self) -> usize {
        self.row_sizes.len()
    }

    pub fn m(&self) -> usize {
        self.row_offsets[self.n()]
    }

    pub fn r(&self) -> usize {
        self.col_offsets[self.n()]
    }

    pub fn row_sizes(&self) -> &[usize] {
        &self.row_sizes
    }

    pub fn col_sizes(&self) -> &[usize] {
        &self.col_sizes
    }

    fn check_agent(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return Err(Error::IndexOutOfRange {
                what: "agent",
                index: i,
                count: self.n(),
            });
        }
        Ok(())
    }

    /// `(offset, size)` of agent `i`'s row band.
    pub fn row_range(&self, i: usize) -> Result<(usize, usize)> {
        self.check_agent(i)?;
        Ok((self.row_offsets[i], self.row_sizes[i]))
    }

    /// `(offset, size)` of agent `i`'s column band.
    pub fn col_range(&self, i: usize) -> Result<(usize, usize)> {
        self.check_agent(i)?;
        Ok((self.col_offsets[i], self.col_sizes[i]))
    }

    /// `m_1 … m_n / r_1 … r_n`
    pub fn to_line(&self) -> String {
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
        format!("{} / {}", join(&self.row_sizes), join(&self.col_sizes))
    }

    pub fn parse_line(line: &str, source_name: &str) -> Result<Self> {
        let (rows, cols) = line
            .trim()
            .split_once('/')
            .ok_or_else(|| Error::parse(source_name, "partition must read `m_1 ... m_n / r_1 ... r_n`"))?;
        let parse = |s: &str| -> Result<Vec<usize>> {
            s.split_whitespace()
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|e| Error::parse(source_name, format!("bad block size {t:?}: {e}")))
                })
                .collect()
        };
        Self::new(parse(rows)?, parse(cols)?)
    }
}

/// Places `yi` (`m_i × r`) on agent `i`'s row band of a zero `m × r` matrix.
pub fn embed_row_block(yi: &DenseMatrix, i: usize, p: &BlockPartition) -> Result<DenseMatrix> {
    let (offset, size) = p.row_range(i)?;
    if yi.shape() != (size, p.r()) {
        return Err(Error::dim("embed_row_block", yi.shape(), (size, p.r())));
    }
    let mut out = DenseMatrix::zeros(p.m(), p.r());
    out.add_block(offset, 0, yi)?;
    Ok(out)
}

/// Places `zi` (`m × r_i`) on agent `i`'s column band of a zero `m × r` matrix.
pub fn embed_col_block(zi: &DenseMatrix, i: usize, p: &BlockPartition) -> Result<DenseMatrix> {
    let (offset, size) = p.col_range(i)?;
    if zi.shape() != (p.m(), size) {
        return Err(Error::dim("embed_col_block", zi.shape(), (p.m(), size)));
    }
    let mut out = DenseMatrix::zeros(p.m(), p.r());
    out.add_block(0, offset, zi)?;
    Ok(out)
}

/// The `m_i × m` selector: left-multiplying an `m × r` matrix extracts agent
/// `i`'s rows.
pub fn row_band_selector(i: usize, p: &BlockPartition) -> Result<DenseMatrix> {
    let (offset, size) = p.row_range(i)?;
    Ok(DenseMatrix::from_fn(size, p.m(), |a, b| {
        if b == offset + a {
            1.0
        } else {
            0.0
        }
    }))
}

/// The `r × r_i` selector: right-multiplying an `m × r` matrix extracts agent
/// `i`'s columns.
pub fn col_band_selector(i: usize, p: &BlockPartition) -> Result<DenseMatrix> {
    let (offset, size) = p.col_range(i)?;
    Ok(DenseMatrix::from_fn(p.r(), size, |a, b| {
        if a == offset + b {
            1.0
        } else {
            0.0
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn inner_product_examples() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(a.frobenius_inner(&DenseMatrix::identity(2)).unwrap(), 5.0);
        assert_eq!(a.frobenius_inner(&DenseMatrix::zeros(2, 2)).unwrap(), 0.0);
        assert_eq!(m(&[&[1.0, 2.0]]).frobenius_inner(&m(&[&[3.0, 5.0]])).unwrap(), 13.0);
        assert!(matches!(
            a.frobenius_inner(&DenseMatrix::zeros(2, 3)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(m(&[&[3.0, 4.0]]).frobenius_norm(), 5.0);
        assert_eq!(DenseMatrix::zeros(2, 3).frobenius_norm(), 0.0);
        assert!((DenseMatrix::identity(3).frobenius_norm() - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn vec_stacks_columns() {
        let v = m(&[&[1.0, 2.0], &[3.0, 4.0]]).vec();
        assert_eq!(v.shape(), (4, 1));
        assert_eq!(v.as_slice(), &[1.0, 3.0, 2.0, 4.0]);
        let col = DenseMatrix::column(&[7.0, 8.0, 9.0]);
        assert_eq!(col.vec(), col);
        assert_eq!(m(&[&[5.0, 6.0]]).vec().as_slice(), &[5.0, 6.0]);
        let back = DenseMatrix::unvec(v.as_slice(), 2, 2).unwrap();
        assert_eq!(back, m(&[&[1.0, 2.0], &[3.0, 4.0]]));
    }

    #[test]
    fn kron_examples() {
        let k = DenseMatrix::identity(2).kron(&m(&[&[5.0]]));
        assert_eq!(k, m(&[&[5.0, 0.0], &[0.0, 5.0]]));
        let k = m(&[&[1.0, 2.0]]).kron(&m(&[&[0.0, 1.0]]));
        assert_eq!(k, m(&[&[0.0, 1.0, 0.0, 2.0]]));
    }

    #[test]
    fn matmul_shape_error() {
        let a = DenseMatrix::zeros(2, 3);
        assert!(a.matmul(&DenseMatrix::zeros(2, 3)).is_err());
        assert_eq!(a.matmul(&DenseMatrix::zeros(3, 4)).unwrap().shape(), (2, 4));
        assert!(a.add(&DenseMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn embedding_examples() {
        let p = BlockPartition::new(vec![1, 1], vec![1, 1]).unwrap();
        let e = embed_row_block(&m(&[&[5.0, 6.0]]), 1, &p).unwrap();
        assert_eq!(e, m(&[&[0.0, 0.0], &[5.0, 6.0]]));
        let e = embed_col_block(&m(&[&[7.0], &[8.0]]), 0, &p).unwrap();
        assert_eq!(e, m(&[&[7.0, 0.0], &[8.0, 0.0]]));
        assert_eq!(row_band_selector(0, &p).unwrap(), m(&[&[1.0, 0.0]]));

        let single = BlockPartition::new(vec![2], vec![3]).unwrap();
        let y = DenseMatrix::from_fn(2, 3, |i, j| (i * 3 + j) as f64);
        assert_eq!(embed_row_block(&y, 0, &single).unwrap(), y);
        assert_eq!(embed_col_block(&y, 0, &single).unwrap(), y);
    }

    #[test]
    fn embedding_errors() {
        let p = BlockPartition::new(vec![1, 1], vec![1, 1]).unwrap();
        assert!(matches!(
            embed_row_block(&DenseMatrix::zeros(1, 2), 2, &p),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            embed_row_block(&DenseMatrix::zeros(2, 2), 0, &p),
            Err(Error::Dimension { .. })
        ));
        assert!(embed_col_block(&DenseMatrix::zeros(2, 2), 1, &p).is_err());
        assert!(col_band_selector(3, &p).is_err());
    }

    #[test]
    fn selectors_invert_embeddings() {
        let p = BlockPartition::new(vec![2, 1, 3], vec![1, 3, 2]).unwrap();
        for i in 0..3 {
            let (_, mi) = p.row_range(i).unwrap();
            let (_, ri) = p.col_range(i).unwrap();
            let y = DenseMatrix::from_fn(mi, p.r(), |a, b| (a * 7 + b) as f64 + 0.5);
            let sel = row_band_selector(i, &p).unwrap();
            assert_eq!(sel.matmul(&embed_row_block(&y, i, &p).unwrap()).unwrap(), y);

            let z = DenseMatrix::from_fn(p.m(), ri, |a, b| (a * 5 + b) as f64 - 1.5);
            let sel = col_band_selector(i, &p).unwrap();
            assert_eq!(embed_col_block(&z, i, &p).unwrap().matmul(&sel).unwrap(), z);

            // Theta * selector keeps only agent i's columns.
            let theta = DenseMatrix::from_fn(p.m(), p.r(), |a, b| (a + 10 * b) as f64 + 1.0);
            let picked = embed_col_block(&theta.matmul(&sel).unwrap(), i, &p).unwrap();
            let (off, size) = p.col_range(i).unwrap();
            for a in 0..p.m() {
                for b in 0..p.r() {
                    let expect = if b >= off && b < off + size { theta[(a, b)] } else { 0.0 };
                    assert_eq!(picked[(a, b)], expect);
                }
            }
            // band helpers agree with selector products
            assert_eq!(
                row_band_selector(i, &p).unwrap().matmul(&theta).unwrap(),
                theta.row_band(p.row_range(i).unwrap().0, mi).unwrap()
            );
            assert_eq!(theta.matmul(&sel).unwrap(), theta.col_band(off, size).unwrap());
        }
    }

    #[test]
    fn embeddings_reassemble() {
        let p = BlockPartition::new(vec![1, 2], vec![2, 1]).unwrap();
        let full = DenseMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64);
        let mut rows = DenseMatrix::zeros(3, 3);
        let mut cols = DenseMatrix::zeros(3, 3);
        for i in 0..2 {
            let (ro, rs) = p.row_range(i).unwrap();
            let (co, cs) = p.col_range(i).unwrap();
            rows.axpy(1.0, &embed_row_block(&full.row_band(ro, rs).unwrap(), i, &p).unwrap())
                .unwrap();
            cols.axpy(1.0, &embed_col_block(&full.col_band(co, cs).unwrap(), i, &p).unwrap())
                .unwrap();
        }
        assert_eq!(rows, full);
        assert_eq!(cols, full);
    }

    #[test]
    fn partition_validation() {
        assert!(BlockPartition::new(vec![1, 2], vec![3]).is_err());
        assert!(BlockPartition::new(vec![0, 2], vec![1, 1]).is_err());
        let p = BlockPartition::equal(20, 20, 10).unwrap();
        assert!(p.row_sizes().iter().all(|&s| s == 2));
        let p = BlockPartition::equal(7, 5, 3).unwrap();
        assert_eq!(p.row_sizes(), &[2, 2, 3]);
        assert_eq!(p.col_sizes(), &[1, 1, 3]);
        assert!(BlockPartition::equal(2, 5, 3).is_err());
        let line = p.to_line();
        assert_eq!(line, "2 2 3 / 1 1 3");
        assert_eq!(BlockPartition::parse_line(&line, "t").unwrap(), p);
        assert!(BlockPartition::parse_line("1 2 3", "t").is_err());
    }

    #[test]
    fn text_format_roundtrip_and_errors() {
        let a = m(&[&[0.1, -1.0 / 3.0], &[1e-300, 12345.678901234567]]);
        let back = DenseMatrix::parse_text(&a.to_text(), "t").unwrap();
        assert_eq!(
            back.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            a.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert!(DenseMatrix::parse_text("2 2\n1 2\n3\n", "t").is_err());
        assert!(DenseMatrix::parse_text("1 1\nnan\n", "t").is_err());
        assert!(DenseMatrix::parse_text("1 1\n1\n2\n", "t").is_err());
        assert!(DenseMatrix::parse_text("0 1\n", "t").is_err());
        assert!(DenseMatrix::parse_text("", "t").is_err());
    }
}
