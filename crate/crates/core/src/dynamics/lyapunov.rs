use super::fields::smooth_x_rate_reg;
use super::state::{Algorithm, NetworkState};
use crate::error::{Error, Result};
use crate::matcore::DenseMatrix;
use crate::problem::{kkt_residual_exact, kkt_residual_ls, kkt_residual_reg, SylvesterProblem};

/// Default KKT tolerance for accepting a reference equilibrium.
pub const EQUILIBRIUM_TOLERANCE: f64 = 1e-9;

/// A validated equilibrium against which Lyapunov values are measured.
#[derive(Debug, Clone, PartialEq)]
pub enum LyapunovReference {
    /// `½‖P − P*‖²` for the two smooth flows.
    Quadratic { state: NetworkState },
    /// `V_1 + V_2` for the regularized flow, with `h_i* ∈ ∂g(X_i*)`.
    Regularized {
        state: NetworkState,
        h_star: Vec<DenseMatrix>,
        alpha: f64,
    },
}

impl LyapunovReference {
    pub fn quadratic(prob: &SylvesterProblem, algorithm: Algorithm, s_star: &NetworkState, tol: f64) -> Result<Self> {
        let residual = match algorithm {
            Algorithm::LeastSquares => kkt_residual_ls(prob, s_star)?,
            Algorithm::Exact => kkt_residual_exact(prob, s_star)?,
            Algorithm::Regularized => {
                return Err(Error::Validation("use LyapunovReference::regularized for the regularized flow".into()))
            }
        };
        if residual.is_nan() || residual > tol {
            return Err(Error::NotEquilibrium { residual, tolerance: tol });
        }
        Ok(Self::Quadratic { state: s_star.clone() })
    }

    /// Recovers `h_i*` from the stationarity line at `s_star` and projects it
    /// onto `∂g(X_i*)`.
    pub fn regularized(prob: &SylvesterProblem, s_star: &NetworkState, alpha: f64, tol: f64) -> Result<Self> {
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(Error::Validation(format!("regularized reference needs alpha > 0, got {alpha}")));
        }
        let g = prob
            .penalty()
            .regularizer()
            .ok_or_else(|| Error::Validation("problem has no penalty".into()))?;
        let h_star = (0..prob.n())
            .map(|i| {
                let raw = smooth_x_rate_reg(prob, s_star, i)?.scale(1.0 / alpha);
                Ok(g.project_subdifferential(&raw, &s_star.agent(i).x))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_subgradient(prob, s_star, h_star, alpha, tol)
    }

    pub fn with_subgradient(
        prob: &SylvesterProblem,
        s_star: &NetworkState,
        h_star: Vec<DenseMatrix>,
        alpha: f64,
        tol: f64,
    ) -> Result<Self> {
        let residual = kkt_residual_reg(prob, s_star, alpha)?;
        if residual.is_nan() || residual > tol {
            return Err(Error::NotEquilibrium { residual, tolerance: tol });
        }
        if h_star.len() != prob.n() {
            return Err(Error::Validation(format!("expected {} subgradients, got {}", prob.n(), h_star.len())));
        }
        Ok(Self::Regularized {
            state: s_star.clone(),
            h_star,
            alpha,
        })
    }

    pub fn state(&self) -> &NetworkState {
        match self {
            Self::Quadratic { state } | Self::Regularized { state, .. } => state,
        }
    }

    pub fn value(&self, prob: &SylvesterProblem, s: &NetworkState) -> Result<f64> {
        match self {
            Self::Quadratic { state } => Ok(0.5 * s.sub(state)?.norm_squared()),
            Self::Regularized { state, h_star, alpha } => regularized_value(prob, s, state, h_star, *alpha),
        }
    }
}

fn regularized_value(
    prob: &SylvesterProblem,
    s: &NetworkState,
    s_star: &NetworkState,
    h_star: &[DenseMatrix],
    alpha: f64,
) -> Result<f64> {
    let g = prob
        .penalty()
        .regularizer()
        .ok_or_else(|| Error::Validation("problem has no penalty".into()))?;
    let net = prob.network();
    let mut v1 = 0.0;
    let mut v2 = 0.5 * s.sub(s_star)?.norm_squared();
    for (i, h) in h_star.iter().enumerate() {
        let ag = prob.agent(i)?;
        let x = &s.agent(i).x;
        let dx = x.sub(&s_star.agent(i).x)?;
        v1 += alpha * (g.value(x) - g.value(&s_star.agent(i).x) - h.frobenius_inner(&dx)?);
        for &(j, a) in net.neighbors(i) {
            v1 += 0.25 * a * x.sub(&s.agent(j).x)?.norm_squared();
        }
        v2 += 0.5 * ag.a.matmul(&dx)?.norm_squared();
        v2 += 0.5 * dx.matmul(&ag.b)?.norm_squared();
    }
    Ok(v1 + v2)
}

/// `½‖P − P*‖²`, after checking `s_star` against the least-squares KKT system.
pub fn lyapunov_ls(prob: &SylvesterProblem, s: &NetworkState, s_star: &NetworkState) -> Result<f64> {
    LyapunovReference::quadratic(prob, Algorithm::LeastSquares, s_star, EQUILIBRIUM_TOLERANCE)?.value(prob, s)
}

/// `½‖P − P*‖²`, after checking `s_star` against the exact-solution KKT system.
pub fn lyapunov_exact(prob: &SylvesterProblem, s: &NetworkState, s_star: &NetworkState) -> Result<f64> {
    LyapunovReference::quadratic(prob, Algorithm::Exact, s_star, EQUILIBRIUM_TOLERANCE)?.value(prob, s)
}

/// `V_1 + V_2` of the regularized flow.
pub fn lyapunov_reg(
    prob: &SylvesterProblem,
    s: &NetworkState,
    s_star: &NetworkState,
    h_star: &[DenseMatrix],
    alpha: f64,
) -> Result<f64> {
    LyapunovReference::with_subgradient(prob, s_star, h_star.to_vec(), alpha, EQUILIBRIUM_TOLERANCE)?.value(prob, s)
}
