//! Vector fields of the three distributed flows.
//!
//! Agent `i`'s rate is assembled from its own blocks, its local data
//! `A_i, B_i, C_i`, and the blocks of its graph neighbors only; every
//! neighbor term goes through [`Network::neighbor_sum_by`].

use rayon::prelude::*;

use super::state::{AgentState, Algorithm, NetworkState};
use crate::error::{Error, Result};
use crate::matcore::DenseMatrix;
use crate::network::Network;
use crate::penalty::Regularizer;
use crate::problem::{AgentData, SylvesterProblem};

/// How the regularized flow picks `h ∈ ∂g(X)` in its `Ẋ` line.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// The fixed selection `h = sign(X)` with `sign(0) = 0`.
    #[default]
    Sign,
    /// The `h` that makes `‖Ẋ_i‖` smallest; zero exactly at equilibria of
    /// the inclusion.
    MinNorm,
}

/// A state-shaped rate, plus the subgradients used for `Ẋ` when the flow is
/// the regularized one.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDerivative {
    pub rates: NetworkState,
    pub subgradients: Option<Vec<DenseMatrix>>,
}

impl NetworkDerivative {
    pub fn norm(&self) -> f64 {
        self.rates.norm()
    }

    /// The `Ẋ_i` blocks.
    pub fn x_rates(&self) -> Vec<DenseMatrix> {
        self.rates.x_blocks()
    }
}

pub(crate) fn collect_agents<T: Send>(
    n: usize,
    parallel: bool,
    f: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

fn laplacian_term(net: &Network, s: &NetworkState, i: usize, pick: impl Fn(&AgentState) -> &DenseMatrix) -> Result<DenseMatrix> {
    net.neighbor_sum_by(i, |k| pick(s.agent(k)))
}

fn multiplier_laplacian(net: &Network, s: &NetworkState, i: usize) -> Result<DenseMatrix> {
    // every state either has Λ on all agents or on none
    s.agent(i).lambda()?;
    net.neighbor_sum_by(i, |k| s.agent(k).lambda.as_ref().expect("Λ present on all agents"))
}

/// `X_i B_i − C_i + Z_i`
fn column_fit(ag: &AgentData, x: &DenseMatrix, z: &DenseMatrix) -> Result<DenseMatrix> {
    let mut fit = x.matmul(&ag.b)?;
    fit.axpy(-1.0, &ag.c)?;
    fit.axpy(1.0, z)?;
    Ok(fit)
}

/// `A_i X_i − Y_i`
fn row_fit(ag: &AgentData, x: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix> {
    let mut fit = ag.a.matmul(x)?;
    fit.axpy(-1.0, y)?;
    Ok(fit)
}

/// `[Y_i]_R − [Z_i]_C − Σ_j a_ij (W_i − W_j) − Σ_j a_ij (Θ_i − Θ_j)`
fn theta_rate(ag: &AgentData, st: &AgentState, lap_w: &DenseMatrix, lap_theta: &DenseMatrix) -> Result<DenseMatrix> {
    let mut out = lap_w.scale(-1.0);
    out.axpy(-1.0, lap_theta)?;
    out.add_block(ag.row_offset, 0, &st.y)?;
    out.add_block(0, ag.col_offset, &st.z.scale(-1.0))?;
    Ok(out)
}

fn check_shapes(prob: &SylvesterProblem, s: &NetworkState, multipliers: bool) -> Result<()> {
    if s.n() != prob.n() {
        return Err(Error::Validation(format!("state has {} agents, problem has {}", s.n(), prob.n())));
    }
    if s.has_multipliers() != multipliers {
        return Err(Error::Validation(if multipliers {
            "this flow needs Λ and Υ blocks".into()
        } else {
            "the exact-solution flow carries no Λ, Υ blocks".into()
        }));
    }
    let (m, r) = (prob.m(), prob.r());
    for (ag, st) in prob.agents().iter().zip(s.agents()) {
        let expect = [
            (m, r),
            (ag.row_size, r),
            (m, ag.col_size),
            (m, r),
        ];
        let got = [st.x.shape(), st.y.shape(), st.z.shape(), st.w.shape()];
        for (e, g) in expect.iter().zip(got.iter()) {
            if e != g {
                return Err(Error::dim("agent state", *g, *e));
            }
        }
        if st.theta.shape() != (m, r) {
            return Err(Error::dim("agent state", st.theta.shape(), (m, r)));
        }
        if let (Some(l), Some(u)) = (&st.lambda, &st.upsilon) {
            if l.shape() != (m, r) || u.shape() != (ag.row_size, r) {
                return Err(Error::dim("agent multipliers", l.shape(), (m, r)));
            }
        }
    }
    Ok(())
}

fn agent_rate_ls(prob: &SylvesterProblem, s: &NetworkState, i: usize) -> Result<AgentState> {
    let ag = prob.agent(i)?;
    let st = s.agent(i);
    let net = prob.network();
    let upsilon = st.upsilon()?;

    let cfit = column_fit(ag, &st.x, &st.z)?;
    let rfit = row_fit(ag, &st.x, &st.y)?;
    let lap_x = laplacian_term(net, s, i, |a| &a.x)?;
    let lap_w = laplacian_term(net, s, i, |a| &a.w)?;
    let lap_theta = laplacian_term(net, s, i, |a| &a.theta)?;
    let lap_lambda = multiplier_laplacian(net, s, i)?;

    let mut x = cfit.matmul(&ag.b_t)?.scale(-1.0);
    x.axpy(-1.0, &ag.a_t.matmul(&rfit)?)?;
    x.axpy(-1.0, &ag.a_t.matmul(upsilon)?)?;
    x.axpy(-1.0, &lap_lambda)?;
    x.axpy(-1.0, &lap_x)?;

    let mut y = upsilon.sub(&st.theta.row_band(ag.row_offset, ag.row_size)?)?;
    y.axpy(1.0, &rfit)?;

    let mut z = st.theta.col_band(ag.col_offset, ag.col_size)?;
    z.axpy(-1.0, &cfit)?;

    Ok(AgentState {
        x,
        y,
        z,
        w: lap_theta.clone(),
        lambda: Some(lap_x),
        theta: theta_rate(ag, st, &lap_w, &lap_theta)?,
        upsilon: Some(rfit),
    })
}

fn agent_rate_exact(prob: &SylvesterProblem, s: &NetworkState, i: usize) -> Result<AgentState> {
    let ag = prob.agent(i)?;
    let st = s.agent(i);
    let net = prob.network();

    let cfit = column_fit(ag, &st.x, &st.z)?;
    let rfit = row_fit(ag, &st.x, &st.y)?;
    let lap_x = laplacian_term(net, s, i, |a| &a.x)?;
    let lap_w = laplacian_term(net, s, i, |a| &a.w)?;
    let lap_theta = laplacian_term(net, s, i, |a| &a.theta)?;

    let mut x = cfit.matmul(&ag.b_t)?.scale(-1.0);
    x.axpy(-1.0, &ag.a_t.matmul(&rfit)?)?;
    x.axpy(-1.0, &lap_x)?;

    let y = rfit.sub(&st.theta.row_band(ag.row_offset, ag.row_size)?)?;

    let mut z = st.theta.col_band(ag.col_offset, ag.col_size)?;
    z.axpy(-1.0, &cfit)?;

    Ok(AgentState {
        x,
        y,
        z,
        w: lap_theta.clone(),
        lambda: None,
        upsilon: None,
        theta: theta_rate(ag, st, &lap_w, &lap_theta)?,
    })
}

/// The part of the regularized `Ẋ_i` line that excludes `−α h_i`.
pub fn smooth_x_rate_reg(prob: &SylvesterProblem, s: &NetworkState, i: usize) -> Result<DenseMatrix> {
    let ag = prob.agent(i)?;
    let st = s.agent(i);
    let net = prob.network();
    let cfit = column_fit(ag, &st.x, &st.z)?;
    let rfit = row_fit(ag, &st.x, &st.y)?;

    let mut x = cfit.matmul(&ag.b_t)?.scale(-1.0);
    x.axpy(-1.0, &ag.a_t.matmul(st.upsilon()?)?)?;
    x.axpy(-1.0, &multiplier_laplacian(net, s, i)?)?;
    x.axpy(-1.0, &ag.a_t.matmul(&rfit)?)?;
    x.axpy(-1.0, &laplacian_term(net, s, i, |a| &a.x)?)?;
    Ok(x)
}

/// Second phase of the regularized flow: every block except `X`, driven by
/// the already-fixed `Ẋ` of agent `i` and its neighbors.
fn feedback_rate_reg(prob: &SylvesterProblem, s: &NetworkState, x_rates: &[DenseMatrix], i: usize) -> Result<AgentState> {
    let ag = prob.agent(i)?;
    let st = s.agent(i);
    let net = prob.network();
    let upsilon = st.upsilon()?;
    let xdot = &x_rates[i];

    let lap_x = laplacian_term(net, s, i, |a| &a.x)?;
    let lap_xdot = net.neighbor_sum_by(i, |k| &x_rates[k])?;
    let lap_w = laplacian_term(net, s, i, |a| &a.w)?;
    let lap_theta = laplacian_term(net, s, i, |a| &a.theta)?;

    // Ẏ_i = Υ_i − [I]_C Θ_i + A_i (X_i − Ẋ_i) − Y_i
    let x_minus = st.x.sub(xdot)?;
    let mut y = upsilon.sub(&st.theta.row_band(ag.row_offset, ag.row_size)?)?;
    y.axpy(1.0, &row_fit(ag, &x_minus, &st.y)?)?;

    // Ż_i = −((X_i − Ẋ_i) B_i − C_i + Z_i) + Θ_i [I]_R
    let mut z = st.theta.col_band(ag.col_offset, ag.col_size)?;
    z.axpy(-1.0, &column_fit(ag, &x_minus, &st.z)?)?;

    // Λ̇_i = Σ_j a_ij (X_i − X_j + Ẋ_i − Ẋ_j)
    let mut lambda = lap_x;
    lambda.axpy(1.0, &lap_xdot)?;

    // Υ̇_i = A_i (X_i + Ẋ_i) − Y_i
    let x_plus = st.x.add(xdot)?;
    let upsilon_rate = row_fit(ag, &x_plus, &st.y)?;

    Ok(AgentState {
        x: xdot.clone(),
        y,
        z,
        w: lap_theta.clone(),
        lambda: Some(lambda),
        upsilon: Some(upsilon_rate),
        theta: theta_rate(ag, st, &lap_w, &lap_theta)?,
    })
}

/// Least-squares flow, all seven lines per agent.
pub fn vf_least_squares(prob: &SylvesterProblem, s: &NetworkState) -> Result<NetworkDerivative> {
    vf_least_squares_with(prob, s, false)
}

pub fn vf_least_squares_with(prob: &SylvesterProblem, s: &NetworkState, parallel: bool) -> Result<NetworkDerivative> {
    check_shapes(prob, s, true)?;
    let agents = collect_agents(prob.n(), parallel, |i| agent_rate_ls(prob, s, i))?;
    Ok(NetworkDerivative {
        rates: NetworkState::from_agents(agents),
        subgradients: None,
    })
}

/// Exact-solution flow (five lines per agent, no `Λ`, `Υ`).
pub fn vf_exact(prob: &SylvesterProblem, s: &NetworkState) -> Result<NetworkDerivative> {
    vf_exact_with(prob, s, false)
}

pub fn vf_exact_with(prob: &SylvesterProblem, s: &NetworkState, parallel: bool) -> Result<NetworkDerivative> {
    check_shapes(prob, s, false)?;
    let agents = collect_agents(prob.n(), parallel, |i| agent_rate_exact(prob, s, i))?;
    Ok(NetworkDerivative {
        rates: NetworkState::from_agents(agents),
        subgradients: None,
    })
}

fn regularizer(prob: &SylvesterProblem) -> Result<&'static dyn Regularizer> {
    prob.penalty()
        .regularizer()
        .ok_or_else(|| Error::Validation("the regularized flow needs a penalty in the problem".into()))
}

/// Regularized flow with derivative feedback and the given per-agent
/// penalty weight `alpha`.
///
/// Phase one computes every `Ẋ_i`; phase two starts only after all of them
/// are known, since `Λ̇_i` reads the neighbors' `Ẋ_j`.
pub fn vf_regularized(prob: &SylvesterProblem, s: &NetworkState, alpha: f64, selection: Selection) -> Result<NetworkDerivative> {
    vf_regularized_with(prob, s, alpha, selection, false)
}

pub fn vf_regularized_with(
    prob: &SylvesterProblem,
    s: &NetworkState,
    alpha: f64,
    selection: Selection,
    parallel: bool,
) -> Result<NetworkDerivative> {
    check_shapes(prob, s, true)?;
    let g = regularizer(prob)?;
    let phase1 = collect_agents(prob.n(), parallel, |i| {
        let smooth = smooth_x_rate_reg(prob, s, i)?;
        let x = &s.agent(i).x;
        let (xdot, h) = match selection {
            Selection::Sign => {
                let h = g.subgradient(x);
                let mut xdot = smooth;
                xdot.axpy(-alpha, &h)?;
                (xdot, h)
            }
            Selection::MinNorm => {
                let xdot = g.min_norm_residual(&smooth, x, alpha);
                let h = if alpha > 0.0 {
                    smooth.sub(&xdot)?.scale(1.0 / alpha)
                } else {
                    g.subgradient(x)
                };
                (xdot, h)
            }
        };
        Ok((xdot, h))
    })?;
    let (x_rates, subgradients): (Vec<_>, Vec<_>) = phase1.into_iter().unzip();
    let mut out = feedback_phase(prob, s, &x_rates, parallel)?;
    out.subgradients = Some(subgradients);
    Ok(out)
}

/// Phase two of the regularized flow for externally supplied `Ẋ` blocks.
pub fn feedback_phase(
    prob: &SylvesterProblem,
    s: &NetworkState,
    x_rates: &[DenseMatrix],
    parallel: bool,
) -> Result<NetworkDerivative> {
    check_shapes(prob, s, true)?;
    if x_rates.len() != prob.n() {
        return Err(Error::Validation(format!("expected {} Ẋ blocks, got {}", prob.n(), x_rates.len())));
    }
    let agents = collect_agents(prob.n(), parallel, |i| feedback_rate_reg(prob, s, x_rates, i))?;
    Ok(NetworkDerivative {
        rates: NetworkState::from_agents(agents),
        subgradients: None,
    })
}

/// Dispatches on `algorithm`; `alpha` is ignored by the smooth flows.
pub fn vector_field(
    prob: &SylvesterProblem,
    s: &NetworkState,
    algorithm: Algorithm,
    alpha: f64,
    selection: Selection,
    parallel: bool,
) -> Result<NetworkDerivative> {
    match algorithm {
        Algorithm::LeastSquares => vf_least_squares_with(prob, s, parallel),
        Algorithm::Exact => vf_exact_with(prob, s, parallel),
        Algorithm::Regularized => vf_regularized_with(prob, s, alpha, selection, parallel),
    }
}
