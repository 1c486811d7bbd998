//! Agent states and the continuous-time flows that drive them.

mod fields;
mod lyapunov;
mod state;


pub use fields::{
    feedback_phase, smooth_x_rate_reg, vector_field, vf_exact, vf_exact_with, vf_least_squares,
    vf_least_squares_with, vf_regularized, vf_regularized_with, NetworkDerivative, Selection,
};
pub use lyapunov::{lyapunov_exact, lyapunov_ls, lyapunov_reg, LyapunovReference, EQUILIBRIUM_TOLERANCE};
pub use state::{AgentState, Algorithm, NetworkState};

use crate::error::Result;
use crate::matcore::DenseMatrix;
use crate::problem::SylvesterProblem;

/// `(1/n) Σ_i Σ_j ‖X_i − X_j‖²` over all ordered pairs.
pub fn consensus_error(s: &NetworkState) -> Result<f64> {
    let n = s.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += s.agent(i).x.sub(&s.agent(j).x)?.norm_squared();
            }
        }
    }
    Ok(total / n as f64)
}

/// `(1/n) Σ_i ‖X_i − X_ref‖²`
pub fn estimation_error(s: &NetworkState, x_ref: &DenseMatrix) -> Result<f64> {
    let mut total = 0.0;
    for a in s.agents() {
        total += a.x.sub(x_ref)?.norm_squared();
    }
    Ok(total / s.n() as f64)
}

/// Augmented Lagrangian whose saddle-point flow is the least-squares
/// algorithm. Reported as a diagnostic only.
pub fn augmented_lagrangian_ls(prob: &SylvesterProblem, s: &NetworkState) -> Result<f64> {
    let net = prob.network();
    let mut total = 0.0;
    for (i, ag) in prob.agents().iter().enumerate() {
        let st = s.agent(i);
        let lambda = st.lambda()?;
        let upsilon = st.upsilon()?;
        let mut cfit = st.x.matmul(&ag.b)?;
        cfit.axpy(-1.0, &ag.c)?;
        cfit.axpy(1.0, &st.z)?;
        let mut rfit = ag.a.matmul(&st.x)?;
        rfit.axpy(-1.0, &st.y)?;
        let lap_x = net.neighbor_sum_by(i, |k| &s.agent(k).x)?;
        let lap_w = net.neighbor_sum_by(i, |k| &s.agent(k).w)?;
        let lap_theta = net.neighbor_sum_by(i, |k| &s.agent(k).theta)?;
        let mut coupling = lap_w.scale(-1.0);
        coupling.add_block(ag.row_offset, 0, &st.y)?;
        coupling.add_block(0, ag.col_offset, &st.z.scale(-1.0))?;

        total += 0.5 * cfit.norm_squared();
        total += lambda.frobenius_inner(&lap_x)?;
        total += upsilon.frobenius_inner(&rfit)?;
        total += st.theta.frobenius_inner(&coupling)?;
        total -= 0.5 * st.theta.frobenius_inner(&lap_theta)?;
        total += 0.5 * st.x.frobenius_inner(&lap_x)?;
        total += 0.5 * rfit.norm_squared();
    }
    Ok(total)
}
