use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::DenseMatrix;
use crate::problem::SylvesterProblem;

/// Which of the three distributed flows a state belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    /// Least-squares flow; every agent carries all seven blocks.
    #[serde(rename = "ls")]
    LeastSquares,
    /// Exact-solution flow; no `Λ`, `Υ` blocks.
    #[serde(rename = "exact")]
    Exact,
    /// L1-regularized flow with derivative feedback.
    #[serde(rename = "reg")]
    Regularized,
}

impl Algorithm {
    pub fn has_multipliers(self) -> bool {
        !matches!(self, Algorithm::Exact)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::LeastSquares => "ls",
            Algorithm::Exact => "exact",
            Algorithm::Regularized => "reg",
        }
    }
}

/// One agent's primal and dual blocks.
///
/// Shapes: `x, w, lambda, theta` are `m × r`; `y, upsilon` are `m_i × r`;
/// `z` is `m × r_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub x: DenseMatrix,
    pub y: DenseMatrix,
    pub z: DenseMatrix,
    pub w: DenseMatrix,
    pub lambda: Option<DenseMatrix>,
    pub upsilon: Option<DenseMatrix>,
    pub theta: DenseMatrix,
}

impl AgentState {
    fn zeros(m: usize, r: usize, mi: usize, ri: usize, multipliers: bool) -> Self {
        Self {
            x: DenseMatrix::zeros(m, r),
            y: DenseMatrix::zeros(mi, r),
            z: DenseMatrix::zeros(m, ri),
            w: DenseMatrix::zeros(m, r),
            lambda: multipliers.then(|| DenseMatrix::zeros(m, r)),
            upsilon: multipliers.then(|| DenseMatrix::zeros(mi, r)),
            theta: DenseMatrix::zeros(m, r),
        }
    }

    /// Present blocks in the fixed order `X, Y, Z, W, [Λ, Υ,] Θ`.
    pub fn blocks(&self) -> impl Iterator<Item = &DenseMatrix> {
        [Some(&self.x), Some(&self.y), Some(&self.z), Some(&self.w)]
            .into_iter()
            .chain([self.lambda.as_ref(), self.upsilon.as_ref(), Some(&self.theta)])
            .flatten()
    }

    pub fn blocks_mut(&mut self) -> impl Iterator<Item = &mut DenseMatrix> {
        [Some(&mut self.x), Some(&mut self.y), Some(&mut self.z), Some(&mut self.w)]
            .into_iter()
            .chain([self.lambda.as_mut(), self.upsilon.as_mut(), Some(&mut self.theta)])
            .flatten()
    }

    pub fn lambda(&self) -> Result<&DenseMatrix> {
        self.lambda
            .as_ref()
            .ok_or_else(|| Error::Validation("state carries no Λ block".into()))
    }

    pub fn upsilon(&self) -> Result<&DenseMatrix> {
        self.upsilon
            .as_ref()
            .ok_or_else(|| Error::Validation("state carries no Υ block".into()))
    }
}

/// The stacked state of all agents.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    agents: Vec<AgentState>,
}

impl NetworkState {
    pub fn from_agents(agents: Vec<AgentState>) -> Self {
        Self { agents }
    }

    pub fn zeros(prob: &SylvesterProblem, algorithm: Algorithm) -> Self {
        let (m, r) = (prob.m(), prob.r());
        let agents = prob
            .agents()
            .iter()
            .map(|ag| AgentState::zeros(m, r, ag.row_size, ag.col_size, algorithm.has_multipliers()))
            .collect();
        Self { agents }
    }

    /// Entries i.i.d. uniform in `[−scale, scale]`.
    pub fn random(prob: &SylvesterProblem, algorithm: Algorithm, scale: f64, seed: u64) -> Self {
        let mut state = Self::zeros(prob, algorithm);
        if scale == 0.0 {
            return state;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for block in state.blocks_mut() {
            for v in block.as_mut_slice() {
                *v = rng.random_range(-scale..=scale);
            }
        }
        state
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn agents_mut(&mut self) -> &mut [AgentState] {
        &mut self.agents
    }

    pub fn agent(&self, i: usize) -> &AgentState {
        &self.agents[i]
    }

    pub fn has_multipliers(&self) -> bool {
        self.agents.first().is_some_and(|a| a.lambda.is_some())
    }

    pub fn blocks(&self) -> impl Iterator<Item = &DenseMatrix> {
        self.agents.iter().flat_map(AgentState::blocks)
    }

    pub fn blocks_mut(&mut self) -> impl Iterator<Item = &mut DenseMatrix> {
        self.agents.iter_mut().flat_map(AgentState::blocks_mut)
    }

    pub fn x_blocks(&self) -> Vec<DenseMatrix> {
        self.agents.iter().map(|a| a.x.clone()).collect()
    }

    fn check_layout(&self, other: &Self, op: &'static str) -> Result<()> {
        let shapes = |s: &Self| s.blocks().map(DenseMatrix::shape).collect::<Vec<_>>();
        if self.n() != other.n() || shapes(self) != shapes(other) {
            return Err(Error::dim(op, (self.n(), self.dim()), (other.n(), other.dim())));
        }
        Ok(())
    }

    /// Total number of scalar entries.
    pub fn dim(&self) -> usize {
        self.blocks().map(|b| b.as_slice().len()).sum()
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        self.check_layout(other, "state axpy")?;
        for (a, b) in self.blocks_mut().zip(other.blocks()) {
            a.axpy(alpha, b)?;
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    pub fn norm_squared(&self) -> f64 {
        self.blocks().map(DenseMatrix::norm_squared).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().all(DenseMatrix::is_finite)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.blocks().flat_map(|b| b.as_slice().iter().copied()).collect()
    }

    /// Overwrites all entries from `flat`, in [`NetworkState::to_flat`] order.
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.dim() {
            return Err(Error::dim("set_flat", (flat.len(), 1), (self.dim(), 1)));
        }
        let mut offset = 0;
        for block in self.blocks_mut() {
            let len = block.as_slice().len();
            block.as_mut_slice().copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        }
        Ok(())
    }

    /// Average of the agents' `X_i`.
    pub fn mean_x(&self) -> DenseMatrix {
        let mut acc = DenseMatrix::zeros(self.agents[0].x.rows(), self.agents[0].x.cols());
        for a in &self.agents {
            acc.axpy(1.0, &a.x).expect("all X blocks share a shape");
        }
        acc.scale(1.0 / self.n() as f64)
    }
}
