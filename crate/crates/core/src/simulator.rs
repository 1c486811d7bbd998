//! Time integration of the distributed flows, stopping rules, metric traces
//! and convergence-rate fits.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    consensus_error, estimation_error, feedback_phase, smooth_x_rate_reg, vector_field, Algorithm,
    LyapunovReference, NetworkState, Selection,
};
use crate::error::{Error, Result};
use crate::matcore::DenseMatrix;
use crate::penalty::AlphaMode;
use crate::problem::{kkt_residual_exact, kkt_residual_ls, kkt_residual_reg, SylvesterProblem};

/// Estimation errors at or below this are treated as exact zeros by
/// [`fit_rate`].
pub const RATE_FLOOR: f64 = 1e-14;
pub const RATE_MIN_SAMPLES: usize = 10;
/// Leading share of the valid samples dropped as transient by [`fit_rate`].
pub const RATE_TRANSIENT: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    Euler,
    Rk4,
    /// Explicit step on the smooth part of `Ẋ`, then the L1 prox; the
    /// resulting difference quotient is fed back to the other blocks.
    /// Regularized flow only.
    ProxEuler,
    /// Exact flow map of the affine smooth flows over one step, built once
    /// per run from the dense Jacobian. Not a local update: every agent's
    /// next state depends on the whole network.
    Exponential,
}

impl Integrator {
    pub fn default_for(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::Regularized => Integrator::ProxEuler,
            _ => Integrator::Euler,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Init {
    Zeros,
    Random { scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub algorithm: Algorithm,
    /// `None` picks [`default_step`].
    pub step: Option<f64>,
    pub max_time: f64,
    pub integrator: Integrator,
    /// Stop once the field norm is at or below this. A non-finite value
    /// disables the check.
    pub stop_tol: f64,
    pub record_every: usize,
    pub seed: u64,
    pub init: Init,
    pub alpha_mode: AlphaMode,
    /// Subgradient selection for the Euler step of the regularized flow.
    pub selection: Selection,
    /// Worker threads for per-agent evaluation; `None` or 1 is sequential.
    pub threads: Option<usize>,
}

impl SimConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            step: None,
            max_time: 100.0,
            integrator: Integrator::default_for(algorithm),
            stop_tol: 1e-10,
            record_every: 100,
            seed: 0,
            init: Init::Zeros,
            alpha_mode: AlphaMode::AsWritten,
            selection: Selection::Sign,
            threads: None,
        }
    }

    pub fn step_size(&self, prob: &SylvesterProblem) -> f64 {
        self.step.unwrap_or_else(|| default_step(prob))
    }

    /// Per-agent penalty weight for this run (zero for the smooth flows).
    pub fn agent_alpha(&self, prob: &SylvesterProblem) -> f64 {
        match (self.algorithm, prob.penalty().alpha()) {
            (Algorithm::Regularized, Some(a)) => self.alpha_mode.agent_alpha(a, prob.n()),
            _ => 0.0,
        }
    }

    pub fn validate(&self, prob: &SylvesterProblem) -> Result<()> {
        let h = self.step_size(prob);
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Validation(format!("step must be positive, got {h}")));
        }
        if !(self.max_time.is_finite() && h < self.max_time) {
            return Err(Error::Validation(format!("need step < max_time, got {h} and {}", self.max_time)));
        }
        if self.record_every == 0 {
            return Err(Error::Validation("record_every must be at least 1".into()));
        }
        if self.stop_tol.is_nan() || self.stop_tol <= 0.0 {
            return Err(Error::Validation(format!("stop_tol must be positive, got {}", self.stop_tol)));
        }
        if let Init::Random { scale } = self.init {
            if !(scale >= 0.0 && scale.is_finite()) {
                return Err(Error::Validation(format!("init scale must be nonnegative, got {scale}")));
            }
        }
        match (self.algorithm, self.integrator) {
            (Algorithm::Regularized, Integrator::Rk4) => {
                return Err(Error::Validation("RK4 is not available for the regularized flow".into()))
            }
            (Algorithm::LeastSquares | Algorithm::Exact, Integrator::ProxEuler) => {
                return Err(Error::Validation("prox-euler applies to the regularized flow only".into()))
            }
            (Algorithm::Regularized, Integrator::Exponential) => {
                return Err(Error::Validation("the exponential integrator needs an affine flow".into()))
            }
            _ => {}
        }
        if self.algorithm == Algorithm::Regularized && prob.penalty().regularizer().is_none() {
            return Err(Error::Validation("the regularized flow needs a penalty line in the problem".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Validation("threads must be at least 1".into()));
        }
        Ok(())
    }

    fn parallel(&self) -> bool {
        self.threads.is_some_and(|t| t > 1)
    }
}

/// `0.1 / (1 + ‖A‖_F² + ‖B‖_F² + 2·max_i L_ii)`
pub fn default_step(prob: &SylvesterProblem) -> f64 {
    0.1 / (1.0 + prob.a().norm_squared() + prob.b().norm_squared() + 2.0 * prob.max_degree())
}

pub fn init_state(prob: &SylvesterProblem, cfg: &SimConfig) -> NetworkState {
    match cfg.init {
        Init::Zeros => NetworkState::zeros(prob, cfg.algorithm),
        Init::Random { scale } => NetworkState::random(prob, cfg.algorithm, scale, cfg.seed),
    }
}

/// The field norm used for stopping: the regularized flow is measured with
/// the least-norm subgradient, which vanishes exactly at its equilibria.
pub fn field_norm(prob: &SylvesterProblem, s: &NetworkState, cfg: &SimConfig) -> Result<f64> {
    let selection = match cfg.algorithm {
        Algorithm::Regularized => Selection::MinNorm,
        _ => cfg.selection,
    };
    Ok(vector_field(prob, s, cfg.algorithm, cfg.agent_alpha(prob), selection, cfg.parallel())?.norm())
}

pub fn kkt_residual(prob: &SylvesterProblem, s: &NetworkState, cfg: &SimConfig) -> Result<f64> {
    match cfg.algorithm {
        Algorithm::LeastSquares => kkt_residual_ls(prob, s),
        Algorithm::Exact => kkt_residual_exact(prob, s),
        Algorithm::Regularized => kkt_residual_reg(prob, s, cfg.agent_alpha(prob)),
    }
}

fn rate(prob: &SylvesterProblem, s: &NetworkState, cfg: &SimConfig) -> Result<NetworkState> {
    Ok(vector_field(prob, s, cfg.algorithm, cfg.agent_alpha(prob), cfg.selection, cfg.parallel())?.rates)
}

fn shifted(s: &NetworkState, h: f64, k: &NetworkState) -> Result<NetworkState> {
    let mut out = s.clone();
    out.axpy(h, k)?;
    Ok(out)
}

fn prox_euler_step(prob: &SylvesterProblem, s: &NetworkState, cfg: &SimConfig, h: f64) -> Result<NetworkState> {
    let g = prob
        .penalty()
        .regularizer()
        .ok_or_else(|| Error::Validation("prox-euler needs a penalty".into()))?;
    let alpha = cfg.agent_alpha(prob);
    let x_rates = (0..prob.n())
        .map(|i| {
            let x = &s.agent(i).x;
            let mut trial = x.clone();
            trial.axpy(h, &smooth_x_rate_reg(prob, s, i)?)?;
            Ok(g.prox(&trial, h * alpha).sub(x)?.scale(1.0 / h))
        })
        .collect::<Result<Vec<DenseMatrix>>>()?;
    let rates = feedback_phase(prob, s, &x_rates, cfg.parallel())?.rates;
    shifted(s, h, &rates)
}

/// The exact step map `s ↦ E s + g` of an affine flow `ṡ = J s + f₀`, with
/// `E = e^{hJ}` and `g = h φ₁(hJ) f₀`.
#[derive(Debug, Clone)]
pub struct AffinePropagator {
    e: nalgebra::DMatrix<f64>,
    g: nalgebra::DVector<f64>,
}

const EXPM_NORM_TARGET: f64 = 0.25;
const EXPM_TAYLOR_ORDER: usize = 10;

impl AffinePropagator {
    pub fn new(prob: &SylvesterProblem, algorithm: Algorithm, h: f64) -> Result<Self> {
        if algorithm == Algorithm::Regularized {
            return Err(Error::Validation("the regularized flow is not affine".into()));
        }
        let field = |s: &NetworkState| -> Result<Vec<f64>> {
            Ok(vector_field(prob, s, algorithm, 0.0, Selection::Sign, false)?.rates.to_flat())
        };
        let mut probe = NetworkState::zeros(prob, algorithm);
        let d = probe.dim();
        let f0 = field(&probe)?;
        // augmented generator [[hJ, h f₀], [0, 0]]
        let mut aug = nalgebra::DMatrix::<f64>::zeros(d + 1, d + 1);
        let mut unit = vec![0.0; d];
        for k in 0..d {
            unit[k] = 1.0;
            probe.set_flat(&unit)?;
            unit[k] = 0.0;
            for (row, (a, b)) in field(&probe)?.iter().zip(&f0).enumerate() {
                aug[(row, k)] = h * (a - b);
            }
        }
        for (row, v) in f0.iter().enumerate() {
            aug[(row, d)] = h * v;
        }
        let full = expm(aug);
        Ok(Self {
            e: full.view((0, 0), (d, d)).into_owned(),
            g: full.view((0, d), (d, 1)).column(0).into_owned(),
        })
    }

    pub fn apply(&self, s: &NetworkState) -> Result<NetworkState> {
        let x = nalgebra::DVector::from_vec(s.to_flat());
        let next = &self.e * x + &self.g;
        let mut out = s.clone();
        out.set_flat(next.as_slice())?;
        Ok(out)
    }
}

/// Matrix exponential by scaling and squaring around a Taylor polynomial.
fn expm(a: nalgebra::DMatrix<f64>) -> nalgebra::DMatrix<f64> {
    let n = a.nrows();
    let norm1 = (0..n).map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm1 > EXPM_NORM_TARGET {
        (norm1 / EXPM_NORM_TARGET).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * 0.5f64.powi(squarings);
    let identity = nalgebra::DMatrix::<f64>::identity(n, n);
    let mut acc = identity.clone();
    for k in (1..=EXPM_TAYLOR_ORDER).rev() {
        acc = &identity + &scaled * acc * (1.0 / k as f64);
    }
    for _ in 0..squarings {
        acc = &acc * &acc;
    }
    acc
}

/// `k1` is the rate at `s` if the caller already has it.
fn raw_step(
    prob: &SylvesterProblem,
    s: &NetworkState,
    cfg: &SimConfig,
    h: f64,
    k1: Option<NetworkState>,
    propagator: Option<&AffinePropagator>,
) -> Result<NetworkState> {
    let first = |k1: Option<NetworkState>| k1.map_or_else(|| rate(prob, s, cfg), Ok);
    match cfg.integrator {
        Integrator::Euler => shifted(s, h, &first(k1)?),
        Integrator::Rk4 => {
            let k1 = first(k1)?;
            let k2 = rate(prob, &shifted(s, 0.5 * h, &k1)?, cfg)?;
            let k3 = rate(prob, &shifted(s, 0.5 * h, &k2)?, cfg)?;
            let k4 = rate(prob, &shifted(s, h, &k3)?, cfg)?;
            let mut out = s.clone();
            out.axpy(h / 6.0, &k1)?;
            out.axpy(h / 3.0, &k2)?;
            out.axpy(h / 3.0, &k3)?;
            out.axpy(h / 6.0, &k4)?;
            Ok(out)
        }
        Integrator::ProxEuler => prox_euler_step(prob, s, cfg, h),
        Integrator::Exponential => match propagator {
            Some(p) => p.apply(s),
            None => AffinePropagator::new(prob, cfg.algorithm, h)?.apply(s),
        },
    }
}

/// One synchronous round from `s`; fails with [`Error::Divergence`] if the
/// result is not finite. `time` is only used in that error.
pub fn step(prob: &SylvesterProblem, s: &NetworkState, cfg: &SimConfig, time: f64) -> Result<NetworkState> {
    checked_step(prob, s, cfg, time, None, None)
}

fn checked_step(
    prob: &SylvesterProblem,
    s: &NetworkState,
    cfg: &SimConfig,
    time: f64,
    k1: Option<NetworkState>,
    propagator: Option<&AffinePropagator>,
) -> Result<NetworkState> {
    let h = cfg.step_size(prob);
    let next = raw_step(prob, s, cfg, h, k1, propagator)?;
    if !next.is_finite() {
        return Err(Error::Divergence { time, step: h });
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    HorizonReached,
    Diverged,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::HorizonReached => "horizon_reached",
            RunStatus::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub estimation_error: Option<f64>,
    pub consensus_error: f64,
    pub kkt_residual: f64,
    pub lyapunov: Option<f64>,
    pub field_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub times: Vec<f64>,
    pub records: Vec<TraceRecord>,
}

pub const TRACE_HEADER: &str = "t,E,consensus,kkt,lyapunov,fieldnorm";

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

impl Trace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, t: f64, rec: TraceRecord) {
        self.times.push(t);
        self.records.push(rec);
    }

    pub fn last(&self) -> Option<(f64, &TraceRecord)> {
        Some((*self.times.last()?, self.records.last()?))
    }

    pub fn estimation_errors(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.estimation_error).collect()
    }

    pub fn lyapunov_values(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.lyapunov).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{TRACE_HEADER}\n");
        for (t, r) in self.times.iter().zip(&self.records) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                cell(Some(*t)),
                cell(r.estimation_error),
                cell(Some(r.consensus_error)),
                cell(Some(r.kkt_residual)),
                cell(r.lyapunov),
                cell(Some(r.field_norm)),
            );
        }
        out
    }

    pub fn parse_csv(text: &str, source_name: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == TRACE_HEADER => {}
            other => {
                return Err(Error::parse(source_name, format!("expected header {TRACE_HEADER:?}, got {other:?}")))
            }
        }
        let mut trace = Trace::default();
        for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != 6 {
                return Err(Error::parse(source_name, format!("row {}: expected 6 cells", k + 1)));
            }
            let opt = |c: &str| -> Result<Option<f64>> {
                if c.is_empty() {
                    return Ok(None);
                }
                c.parse::<f64>()
                    .map(Some)
                    .map_err(|e| Error::parse(source_name, format!("row {}: {c:?}: {e}", k + 1)))
            };
            let req = |c: &str| -> Result<f64> {
                opt(c)?.ok_or_else(|| Error::parse(source_name, format!("row {}: missing required cell", k + 1)))
            };
            let t = req(cells[0])?;
            if trace.times.last().is_some_and(|&prev| t <= prev) {
                return Err(Error::parse(source_name, format!("row {}: times must increase", k + 1)));
            }
            trace.push(
                t,
                TraceRecord {
                    estimation_error: opt(cells[1])?,
                    consensus_error: req(cells[2])?,
                    kkt_residual: req(cells[3])?,
                    lyapunov: opt(cells[4])?,
                    field_norm: req(cells[5])?,
                },
            );
        }
        Ok(trace)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, &path.display().to_string())
    }
}

/// What a run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Final state (the last finite one if the run diverged).
    pub state: NetworkState,
    pub trace: Trace,
    pub status: RunStatus,
    pub steps: usize,
    pub final_time: f64,
    pub step_size: f64,
}

impl RunOutcome {
    pub fn mean_x(&self) -> DenseMatrix {
        self.state.mean_x()
    }
}

/// Optional measurements attached to every trace record.
#[derive(Debug, Clone, Copy, Default)]
pub struct Probes<'a> {
    pub x_ref: Option<&'a DenseMatrix>,
    pub lyapunov: Option<&'a LyapunovReference>,
}

fn measure(
    prob: &SylvesterProblem,
    s: &NetworkState,
    cfg: &SimConfig,
    probes: Probes<'_>,
    field: f64,
) -> Result<TraceRecord> {
    Ok(TraceRecord {
        estimation_error: probes.x_ref.map(|x| estimation_error(s, x)).transpose()?,
        consensus_error: consensus_error(s)?,
        kkt_residual: kkt_residual(prob, s, cfg)?,
        lyapunov: probes.lyapunov.map(|v| v.value(prob, s)).transpose()?,
        field_norm: field,
    })
}

/// Integrates from [`init_state`].
pub fn run(prob: &SylvesterProblem, cfg: &SimConfig, probes: Probes<'_>) -> Result<RunOutcome> {
    run_from(prob, cfg, init_state(prob, cfg), probes)
}

/// Integrates from `s0` until the field norm drops to `stop_tol`, the
/// horizon `max_time` is reached, or the state stops being finite.
pub fn run_from(prob: &SylvesterProblem, cfg: &SimConfig, s0: NetworkState, probes: Probes<'_>) -> Result<RunOutcome> {
    cfg.validate(prob)?;
    let work = || run_loop(prob, cfg, s0, probes);
    match cfg.threads {
        Some(t) if t > 1 => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Validation(format!("cannot build thread pool: {e}")))?
            .install(work),
        _ => work(),
    }
}

fn run_loop(prob: &SylvesterProblem, cfg: &SimConfig, s0: NetworkState, probes: Probes<'_>) -> Result<RunOutcome> {
    let h = cfg.step_size(prob);
    let total_steps = (cfg.max_time / h * (1.0 - 1e-12)).ceil() as usize;
    let check_stop = cfg.stop_tol.is_finite();
    let propagator = match cfg.integrator {
        Integrator::Exponential => Some(AffinePropagator::new(prob, cfg.algorithm, h)?),
        _ => None,
    };
    let mut s = s0;
    let mut trace = Trace::default();
    let mut k = 0;
    let status = loop {
        let t = k as f64 * h;
        // the smooth flows reuse the stopping-rule evaluation as the first stage
        let (field, k1) = match cfg.algorithm {
            Algorithm::Regularized => (field_norm(prob, &s, cfg)?, None),
            _ => {
                let r = rate(prob, &s, cfg)?;
                (r.norm(), Some(r))
            }
        };
        let converged = check_stop && field <= cfg.stop_tol;
        let done = converged || k >= total_steps;
        if k % cfg.record_every == 0 || done {
            trace.push(t, measure(prob, &s, cfg, probes, field)?);
        }
        if converged {
            break RunStatus::Converged;
        }
        if k >= total_steps {
            break RunStatus::HorizonReached;
        }
        match checked_step(prob, &s, cfg, t, k1, propagator.as_ref()) {
            Ok(next) => s = next,
            Err(Error::Divergence { .. }) => break RunStatus::Diverged,
            Err(e) => return Err(e),
        }
        k += 1;
    };
    Ok(RunOutcome {
        state: s,
        trace,
        status,
        steps: k,
        final_time: k as f64 * h,
        step_size: h,
    })
}

/// Least-squares line through `(t, ln E)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Samples used after the floor and transient cut.
    pub samples: usize,
}

/// Fits `ln E(t)` against `t` over the samples with `E > 1e-14`, after
/// dropping the leading 20% of them.
pub fn fit_rate(trace: &Trace) -> Result<RateFit> {
    let valid: Vec<(f64, f64)> = trace
        .times
        .iter()
        .zip(&trace.records)
        .filter_map(|(&t, r)| r.estimation_error.filter(|e| *e > RATE_FLOOR && e.is_finite()).map(|e| (t, e.ln())))
        .collect();
    if valid.len() < RATE_MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: RATE_MIN_SAMPLES,
            found: valid.len(),
        });
    }
    let skip = (valid.len() as f64 * RATE_TRANSIENT).floor() as usize;
    let window = &valid[skip..];
    let n = window.len() as f64;
    let mean_t = window.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = window.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = window.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    let sty: f64 = window.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_y)).sum();
    let syy: f64 = window.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let slope = if stt > 0.0 { sty / stt } else { 0.0 };
    let intercept = mean_y - slope * mean_t;
    let ss_res: f64 = window.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        samples: window.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::BlockPartition;
    use crate::network::Network;
    use crate::penalty::PenaltySpec;
    use crate::problem::{gen_exact_instance, kkt_point_ls};

    fn instance() -> (SylvesterProblem, DenseMatrix) {
        let p = BlockPartition::equal(3, 3, 3).unwrap();
        gen_exact_instance(p, Network::complete(3).unwrap(), 21).unwrap()
    }

    fn synthetic(f: impl Fn(f64) -> f64, n: usize) -> Trace {
        let mut tr = Trace::default();
        for k in 0..n {
            let t = k as f64 * 0.1;
            tr.push(
                t,
                TraceRecord {
                    estimation_error: Some(f(t)),
                    consensus_error: 0.0,
                    kkt_residual: 0.0,
                    lyapunov: None,
                    field_norm: 0.0,
                },
            );
        }
        tr
    }

    #[test]
    fn zero_init_metrics_are_finite() {
        let (prob, x) = instance();
        let cfg = SimConfig::new(Algorithm::LeastSquares);
        let s = init_state(&prob, &cfg);
        let r = measure(&prob, &s, &cfg, Probes { x_ref: Some(&x), lyapunov: None }, 1.0).unwrap();
        assert!(r.consensus_error == 0.0 && r.kkt_residual.is_finite());
        assert!(r.estimation_error.unwrap() > 0.0);
    }

    #[test]
    fn random_init_is_deterministic() {
        let (prob, _) = instance();
        let mut cfg = SimConfig::new(Algorithm::Exact);
        cfg.init = Init::Random { scale: 1.0 };
        cfg.seed = 9;
        assert_eq!(init_state(&prob, &cfg), init_state(&prob, &cfg));
        cfg.init = Init::Random { scale: 0.0 };
        assert_eq!(init_state(&prob, &cfg), NetworkState::zeros(&prob, Algorithm::Exact));
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let (prob, _) = instance();
        let s = kkt_point_ls(&prob).unwrap();
        let mut cfg = SimConfig::new(Algorithm::LeastSquares);
        for integrator in [Integrator::Euler, Integrator::Rk4] {
            cfg.integrator = integrator;
            let next = step(&prob, &s, &cfg, 0.0).unwrap();
            assert!(next.sub(&s).unwrap().norm() <= 1e-12);
        }
    }

    #[test]
    fn euler_step_is_affine() {
        let (prob, _) = instance();
        let cfg = SimConfig::new(Algorithm::LeastSquares);
        let s1 = NetworkState::random(&prob, Algorithm::LeastSquares, 1.0, 1);
        let s2 = NetworkState::random(&prob, Algorithm::LeastSquares, 1.0, 2);
        let zero = NetworkState::zeros(&prob, Algorithm::LeastSquares);
        let mut sum = s1.clone();
        sum.axpy(1.0, &s2).unwrap();
        let mut lhs = step(&prob, &s1, &cfg, 0.0).unwrap();
        lhs.axpy(1.0, &step(&prob, &s2, &cfg, 0.0).unwrap()).unwrap();
        lhs.axpy(-1.0, &step(&prob, &zero, &cfg, 0.0).unwrap()).unwrap();
        assert!(lhs.sub(&step(&prob, &sum, &cfg, 0.0).unwrap()).unwrap().norm() <= 1e-10);
    }

    #[test]
    fn euler_and_rk4_agree_to_second_order() {
        let (prob, _) = instance();
        let s = NetworkState::random(&prob, Algorithm::Exact, 1.0, 5);
        for h in [1e-2, 5e-3] {
            let mut cfg = SimConfig::new(Algorithm::Exact);
            cfg.step = Some(h);
            let e = step(&prob, &s, &cfg, 0.0).unwrap();
            cfg.integrator = Integrator::Rk4;
            let r = step(&prob, &s, &cfg, 0.0).unwrap();
            assert!(e.sub(&r).unwrap().norm() <= 10.0 * h * h * (1.0 + s.norm()));
        }
    }

    #[test]
    fn exponential_step_matches_fine_rk4() {
        let (prob, _) = instance();
        let s = NetworkState::random(&prob, Algorithm::LeastSquares, 1.0, 5);
        let mut cfg = SimConfig::new(Algorithm::LeastSquares);
        cfg.integrator = Integrator::Exponential;
        cfg.step = Some(0.5);
        let exact = step(&prob, &s, &cfg, 0.0).unwrap();
        cfg.integrator = Integrator::Rk4;
        cfg.step = Some(0.5 / 200.0);
        let mut fine = s.clone();
        for _ in 0..200 {
            fine = step(&prob, &fine, &cfg, 0.0).unwrap();
        }
        assert!(exact.sub(&fine).unwrap().norm() <= 1e-9 * (1.0 + s.norm()));
    }

    #[test]
    fn expm_of_rotation() {
        let a = nalgebra::DMatrix::from_row_slice(2, 2, &[0.0, -3.0, 3.0, 0.0]);
        let e = expm(a);
        assert!((e[(0, 0)] - 3f64.cos()).abs() < 1e-13);
        assert!((e[(1, 0)] - 3f64.sin()).abs() < 1e-13);
    }

    #[test]
    fn infinite_stop_tol_runs_to_horizon() {
        let (prob, _) = instance();
        let mut cfg = SimConfig::new(Algorithm::Exact);
        cfg.step = Some(0.01);
        cfg.max_time = 0.255;
        cfg.stop_tol = f64::INFINITY;
        let out = run(&prob, &cfg, Probes::default()).unwrap();
        assert_eq!(out.steps, 26);
        assert_eq!(out.status, RunStatus::HorizonReached);
    }

    #[test]
    fn exact_run_converges() {
        let (prob, x) = instance();
        let mut cfg = SimConfig::new(Algorithm::Exact);
        cfg.max_time = 2000.0;
        cfg.stop_tol = 1e-9;
        let out = run(&prob, &cfg, Probes { x_ref: Some(&x), lyapunov: None }).unwrap();
        assert_eq!(out.status, RunStatus::Converged);
        let last = out.trace.last().unwrap().1;
        assert!(last.consensus_error <= 1e-10);
        assert!(last.estimation_error.unwrap() <= 1e-10);
        assert!(out.trace.times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn divergence_is_reported() {
        let (prob, _) = instance();
        let mut cfg = SimConfig::new(Algorithm::LeastSquares);
        cfg.step = Some(50.0);
        cfg.max_time = 1e6;
        cfg.stop_tol = f64::INFINITY;
        let out = run(&prob, &cfg, Probes::default()).unwrap();
        assert_eq!(out.status, RunStatus::Diverged);
        assert!(out.state.is_finite());
        let err = step(&prob, &out.state, &cfg, 1.0).unwrap_err();
        assert!(err.to_string().contains("halving"));
    }

    #[test]
    fn config_validation() {
        let (prob, _) = instance();
        let mut cfg = SimConfig::new(Algorithm::Regularized);
        assert!(cfg.validate(&prob).is_err(), "no penalty");
        let prob = prob.with_penalty(PenaltySpec::l1(0.1).unwrap());
        cfg.validate(&prob).unwrap();
        cfg.integrator = Integrator::Rk4;
        assert!(cfg.validate(&prob).is_err());
        let mut cfg = SimConfig::new(Algorithm::Exact);
        cfg.step = Some(200.0);
        assert!(cfg.validate(&prob).is_err());
        cfg.step = Some(-1.0);
        assert!(cfg.validate(&prob).is_err());
    }

    #[test]
    fn fit_rate_exact_exponential() {
        let f = fit_rate(&synthetic(|t| (-3.0 * t).exp(), 50)).unwrap();
        assert!((f.slope + 3.0).abs() <= 1e-6);
        assert!(f.r_squared >= 0.999999);
        assert_eq!(f.samples, 40);
    }

    #[test]
    fn fit_rate_constant() {
        let f = fit_rate(&synthetic(|_| 0.5, 20)).unwrap();
        assert_eq!(f.slope, 0.0);
    }

    #[test]
    fn fit_rate_needs_samples() {
        assert!(matches!(
            fit_rate(&synthetic(|t| if t < 0.5 { 1.0 } else { 0.0 }, 40)),
            Err(Error::TooFewSamples { found: 5, .. })
        ));
    }

    #[test]
    fn csv_roundtrip() {
        let (prob, x) = instance();
        let mut cfg = SimConfig::new(Algorithm::LeastSquares);
        cfg.max_time = 0.5;
        cfg.record_every = 10;
        let out = run(&prob, &cfg, Probes { x_ref: Some(&x), lyapunov: None }).unwrap();
        let csv = out.trace.to_csv();
        assert!(csv.starts_with("t,E,consensus,kkt,lyapunov,fieldnorm\n"));
        assert!(csv.lines().nth(1).unwrap().contains(",,"));
        assert_eq!(Trace::parse_csv(&csv, "mem").unwrap(), out.trace);
    }

    #[test]
    fn threaded_run_matches_sequential() {
        let (prob, _) = instance();
        let mut cfg = SimConfig::new(Algorithm::LeastSquares);
        cfg.max_time = 0.2;
        cfg.init = Init::Random { scale: 1.0 };
        let a = run(&prob, &cfg, Probes::default()).unwrap();
        cfg.threads = Some(3);
        let b = run(&prob, &cfg, Probes::default()).unwrap();
        assert_eq!(a.state, b.state);
    }
}
