//! C ABI over `sylnet`.
//!
//! Every entry point returns a [`SylnetStatus`]; on failure the message is
//! kept per thread and read back with [`sylnet_last_error`]. Problems and run
//! outcomes are opaque heap handles released with their `_free` function.
//! Matrices cross the boundary as row-major `double` buffers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use sylnet::dynamics::Algorithm;
use sylnet::network::Topology;
use sylnet::problem::{gen_exact_instance, gen_inconsistent_instance, oracle_least_squares, read_bundle};
use sylnet::simulator::{self, Init, Integrator, Probes, RunOutcome, RunStatus, SimConfig};
use sylnet::{AlphaMode, BlockPartition, DenseMatrix, Error, Network, PenaltySpec, SylvesterProblem};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SylnetStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Disconnected = 4,
    Parse = 5,
    Io = 6,
    Generation = 7,
    OracleNonconvergence = 8,
    NotEquilibrium = 9,
    Diverged = 10,
    TooFewSamples = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SylnetAlgorithm {
    LeastSquares = 0,
    Exact = 1,
    Regularized = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SylnetIntegrator {
    /// Euler for the smooth flows, prox-Euler for the regularized one.
    Default = 0,
    Euler = 1,
    Rk4 = 2,
    ProxEuler = 3,
    Exponential = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SylnetAlphaMode {
    AsWritten = 0,
    Centralized = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SylnetTopology {
    Complete = 0,
    Ring = 1,
    Path = 2,
    ErdosRenyi = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SylnetInstanceKind {
    Exact = 0,
    Inconsistent = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SylnetRunStatus {
    Converged = 0,
    HorizonReached = 1,
    Diverged = 2,
}

/// Trace columns; absent values read back as NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SylnetTraceColumn {
    Time = 0,
    EstimationError = 1,
    Consensus = 2,
    Kkt = 3,
    Lyapunov = 4,
    FieldNorm = 5,
}

/// Simulation settings. Start from [`sylnet_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SylnetConfig {
    pub algorithm: SylnetAlgorithm,
    pub integrator: SylnetIntegrator,
    pub alpha_mode: SylnetAlphaMode,
    /// Step size; zero selects the default rule.
    pub step: f64,
    pub max_time: f64,
    /// Field-norm stop threshold; `INFINITY` never stops early.
    pub stop_tol: f64,
    pub record_every: usize,
    pub seed: u64,
    /// Scale of the random initial state; zero starts from all zeros.
    pub init_scale: f64,
    /// Worker threads; 0 or 1 runs sequentially.
    pub threads: usize,
}

/// Opaque problem handle.
pub struct SylnetProblem(SylvesterProblem);

/// Opaque run outcome handle.
pub struct SylnetRun(RunOutcome);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(SylnetStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Dimension { .. } | Error::IndexOutOfRange { .. } => SylnetStatus::Dimension,
            Error::Validation(_) => SylnetStatus::InvalidArgument,
            Error::Disconnected { .. } => SylnetStatus::Disconnected,
            Error::Parse { .. } => SylnetStatus::Parse,
            Error::Io { .. } => SylnetStatus::Io,
            Error::Generation { .. } => SylnetStatus::Generation,
            Error::OracleNonconvergence { .. } => SylnetStatus::OracleNonconvergence,
            Error::NotEquilibrium { .. } => SylnetStatus::NotEquilibrium,
            Error::Divergence { .. } => SylnetStatus::Diverged,
            Error::TooFewSamples { .. } => SylnetStatus::TooFewSamples,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SylnetStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SylnetStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            SylnetStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(SylnetStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(SylnetStatus::InvalidArgument, msg.into())
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn matrix(p: *const f64, rows: usize, cols: usize, what: &str) -> Result<DenseMatrix, Failure> {
    let data = slice(p, rows * cols, what)?.to_vec();
    Ok(DenseMatrix::new(rows, cols, data)?)
}

unsafe fn copy_out(values: &[f64], out: *mut f64, len: usize) -> Result<(), Failure> {
    if len < values.len() {
        return Err(Failure(
            SylnetStatus::BufferTooSmall,
            format!("buffer holds {len} values, need {}", values.len()),
        ));
    }
    if values.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(null("output buffer"));
    }
    std::ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn algorithm(a: SylnetAlgorithm) -> Algorithm {
    match a {
        SylnetAlgorithm::LeastSquares => Algorithm::LeastSquares,
        SylnetAlgorithm::Exact => Algorithm::Exact,
        SylnetAlgorithm::Regularized => Algorithm::Regularized,
    }
}

fn sim_config(c: &SylnetConfig) -> SimConfig {
    let alg = algorithm(c.algorithm);
    let mut cfg = SimConfig::new(alg);
    cfg.integrator = match c.integrator {
        SylnetIntegrator::Default => Integrator::default_for(alg),
        SylnetIntegrator::Euler => Integrator::Euler,
        SylnetIntegrator::Rk4 => Integrator::Rk4,
        SylnetIntegrator::ProxEuler => Integrator::ProxEuler,
        SylnetIntegrator::Exponential => Integrator::Exponential,
    };
    cfg.alpha_mode = match c.alpha_mode {
        SylnetAlphaMode::AsWritten => AlphaMode::AsWritten,
        SylnetAlphaMode::Centralized => AlphaMode::Centralized,
    };
    cfg.step = (c.step != 0.0).then_some(c.step);
    cfg.max_time = c.max_time;
    cfg.stop_tol = c.stop_tol;
    cfg.record_every = c.record_every;
    cfg.seed = c.seed;
    cfg.init = if c.init_scale == 0.0 {
        Init::Zeros
    } else {
        Init::Random { scale: c.init_scale }
    };
    cfg.threads = (c.threads > 1).then_some(c.threads);
    cfg
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sylnet_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn sylnet_clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sylnet_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn sylnet_config_default(algorithm: SylnetAlgorithm) -> SylnetConfig {
    SylnetConfig {
        algorithm,
        integrator: SylnetIntegrator::Default,
        alpha_mode: SylnetAlphaMode::AsWritten,
        step: 0.0,
        max_time: 100.0,
        stop_tol: 1e-10,
        record_every: 100,
        seed: 0,
        init_scale: 0.0,
        threads: 0,
    }
}

/// Builds a problem from row-major `A` (m×m), `B` (r×r), `C` (m×r), the
/// per-agent row and column block sizes (`n` each) and `n_edges` weighted
/// undirected edges. A negative or NaN `l1_alpha` means no penalty.
///
/// # Safety
/// Every pointer must be valid for the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn sylnet_problem_new(
    a: *const f64,
    b: *const f64,
    c: *const f64,
    row_sizes: *const usize,
    col_sizes: *const usize,
    n: usize,
    edge_from: *const usize,
    edge_to: *const usize,
    edge_weight: *const f64,
    n_edges: usize,
    l1_alpha: f64,
    out: *mut *mut SylnetProblem,
) -> SylnetStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let partition = BlockPartition::new(
            slice(row_sizes, n, "row_sizes")?.to_vec(),
            slice(col_sizes, n, "col_sizes")?.to_vec(),
        )?;
        let (m, r) = (partition.m(), partition.r());
        let from = slice(edge_from, n_edges, "edge_from")?;
        let to = slice(edge_to, n_edges, "edge_to")?;
        let w = slice(edge_weight, n_edges, "edge_weight")?;
        let edges: Vec<_> = (0..n_edges).map(|k| (from[k], to[k], w[k])).collect();
        let network = Network::new(n, &edges)?;
        let penalty = if l1_alpha >= 0.0 {
            PenaltySpec::l1(l1_alpha)?
        } else {
            PenaltySpec::None
        };
        let prob = SylvesterProblem::new(
            matrix(a, m, m, "a")?,
            matrix(b, r, r, "b")?,
            matrix(c, m, r, "c")?,
            partition,
            network,
            penalty,
        )?;
        out.write(Box::into_raw(Box::new(SylnetProblem(prob))));
        Ok(())
    })
}

/// Seeded random instance on equal blocks. `edge_prob` is used only for
/// Erdős–Rényi graphs; a negative or NaN `l1_alpha` means no penalty.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sylnet_problem_generate(
    kind: SylnetInstanceKind,
    m: usize,
    r: usize,
    n: usize,
    topology: SylnetTopology,
    edge_prob: f64,
    seed: u64,
    l1_alpha: f64,
    out: *mut *mut SylnetProblem,
) -> SylnetStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let partition = BlockPartition::equal(m, r, n)?;
        let topology = match topology {
            SylnetTopology::Complete => Topology::Complete,
            SylnetTopology::Ring => Topology::Ring,
            SylnetTopology::Path => Topology::Path,
            SylnetTopology::ErdosRenyi => Topology::ErdosRenyi { p: edge_prob },
        };
        let network = topology.build(n, seed)?;
        let prob = match kind {
            SylnetInstanceKind::Exact => gen_exact_instance(partition, network, seed)?.0,
            SylnetInstanceKind::Inconsistent => gen_inconsistent_instance(partition, network, seed)?,
        };
        let prob = if l1_alpha >= 0.0 {
            prob.with_penalty(PenaltySpec::l1(l1_alpha)?)
        } else {
            prob
        };
        out.write(Box::into_raw(Box::new(SylnetProblem(prob))));
        Ok(())
    })
}

/// Reads a bundle directory.
///
/// # Safety
/// `dir` must be a NUL-terminated UTF-8 path and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sylnet_problem_load(dir: *const c_char, out: *mut *mut SylnetProblem) -> SylnetStatus {
    guard(|| {
        if dir.is_null() {
            return Err(null("dir"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let dir = CStr::from_ptr(dir).to_str().map_err(|_| invalid("path is not UTF-8"))?;
        let (prob, _) = read_bundle(Path::new(dir))?;
        out.write(Box::into_raw(Box::new(SylnetProblem(prob))));
        Ok(())
    })
}

/// # Safety
/// `problem` must come from this library (or be NULL) and is not used after.
#[no_mangle]
pub unsafe extern "C" fn sylnet_problem_free(problem: *mut SylnetProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// # Safety
/// `problem` must be a live handle; the outputs valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sylnet_problem_dims(
    problem: *const SylnetProblem,
    m: *mut usize,
    r: *mut usize,
    n: *mut usize,
) -> SylnetStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.0;
        write(m, p.m(), "m")?;
        write(r, p.r(), "r")?;
        write(n, p.n(), "n")
    })
}

/// `‖AX + XB − C‖_F` for a row-major `m × r` buffer `x`.
///
/// # Safety
/// `x` must hold `m·r` values and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sylnet_problem_residual(
    problem: *const SylnetProblem,
    x: *const f64,
    out: *mut f64,
) -> SylnetStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.0;
        let x = matrix(x, p.m(), p.r(), "x")?;
        write(out, p.residual(&x)?, "out")
    })
}

/// Minimum-norm least-squares solution into `x_out` (`len ≥ m·r`).
///
/// # Safety
/// `x_out` must hold `len` values; the other outputs may be NULL.
#[no_mangle]
pub unsafe extern "C" fn sylnet_oracle_least_squares(
    problem: *const SylnetProblem,
    x_out: *mut f64,
    len: usize,
    residual: *mut f64,
    unique: *mut bool,
) -> SylnetStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.0;
        let sol = oracle_least_squares(p)?;
        copy_out(sol.x.as_slice(), x_out, len)?;
        if !residual.is_null() {
            residual.write(sol.residual);
        }
        if !unique.is_null() {
            unique.write(sol.unique);
        }
        Ok(())
    })
}

/// Simulates one flow. `x_ref` (row-major `m × r`) is optional and enables
/// the estimation-error column. A run that diverges still succeeds; query
/// [`sylnet_run_status`].
///
/// # Safety
/// Pointers must be valid; `x_ref` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn sylnet_run(
    problem: *const SylnetProblem,
    config: *const SylnetConfig,
    x_ref: *const f64,
    out: *mut *mut SylnetRun,
) -> SylnetStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.0;
        let cfg = sim_config(deref(config, "config")?);
        if out.is_null() {
            return Err(null("out"));
        }
        let reference = if x_ref.is_null() {
            None
        } else {
            Some(matrix(x_ref, p.m(), p.r(), "x_ref")?)
        };
        let outcome = simulator::run(
            p,
            &cfg,
            Probes {
                x_ref: reference.as_ref(),
                lyapunov: None,
            },
        )?;
        out.write(Box::into_raw(Box::new(SylnetRun(outcome))));
        Ok(())
    })
}

/// # Safety
/// `run` must come from this library (or be NULL) and is not used after.
#[no_mangle]
pub unsafe extern "C" fn sylnet_run_free(run: *mut SylnetRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `run` must be a live handle; the outputs may be NULL.
#[no_mangle]
pub unsafe extern "C" fn sylnet_run_summary(
    run: *const SylnetRun,
    status: *mut SylnetRunStatus,
    steps: *mut usize,
    final_time: *mut f64,
    step_size: *mut f64,
) -> SylnetStatus {
    guard(|| {
        let o = &deref(run, "run")?.0;
        if !status.is_null() {
            status.write(match o.status {
                RunStatus::Converged => SylnetRunStatus::Converged,
                RunStatus::HorizonReached => SylnetRunStatus::HorizonReached,
                RunStatus::Diverged => SylnetRunStatus::Diverged,
            });
        }
        if !steps.is_null() {
            steps.write(o.steps);
        }
        if !final_time.is_null() {
            final_time.write(o.final_time);
        }
        if !step_size.is_null() {
            step_size.write(o.step_size);
        }
        Ok(())
    })
}

/// Agent average of the final `X_i` into `x_out` (`len ≥ m·r`).
///
/// # Safety
/// `x_out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sylnet_run_mean_x(run: *const SylnetRun, x_out: *mut f64, len: usize) -> SylnetStatus {
    guard(|| {
        let o = &deref(run, "run")?.0;
        copy_out(o.mean_x().as_slice(), x_out, len)
    })
}

/// Number of recorded trace rows.
///
/// # Safety
/// `run` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sylnet_run_trace_len(run: *const SylnetRun, out: *mut usize) -> SylnetStatus {
    guard(|| {
        let o = &deref(run, "run")?.0;
        write(out, o.trace.len(), "out")
    })
}

/// One trace column into `values` (`len ≥` trace length).
///
/// # Safety
/// `values` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sylnet_run_trace_column(
    run: *const SylnetRun,
    column: SylnetTraceColumn,
    values: *mut f64,
    len: usize,
) -> SylnetStatus {
    guard(|| {
        let t = &deref(run, "run")?.0.trace;
        let col: Vec<f64> = match column {
            SylnetTraceColumn::Time => t.times.clone(),
            _ => t
                .records
                .iter()
                .map(|rec| match column {
                    SylnetTraceColumn::EstimationError => rec.estimation_error.unwrap_or(f64::NAN),
                    SylnetTraceColumn::Consensus => rec.consensus_error,
                    SylnetTraceColumn::Kkt => rec.kkt_residual,
                    SylnetTraceColumn::Lyapunov => rec.lyapunov.unwrap_or(f64::NAN),
                    _ => rec.field_norm,
                })
                .collect(),
        };
        copy_out(&col, values, len)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_status() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, SylnetStatus::Panic);
        let msg = unsafe { CStr::from_ptr(sylnet_last_error()) }.to_str().unwrap();
        assert_eq!(msg, "panic: boom");
        sylnet_clear_error();
        assert!(sylnet_last_error().is_null());
    }

    #[test]
    fn config_mapping() {
        let mut c = sylnet_config_default(SylnetAlgorithm::Regularized);
        let cfg = sim_config(&c);
        assert_eq!(cfg.integrator, Integrator::ProxEuler);
        assert_eq!(cfg.init, Init::Zeros);
        assert_eq!(cfg.step, None);
        c.step = 0.5;
        c.init_scale = 2.0;
        c.threads = 1;
        let cfg = sim_config(&c);
        assert_eq!(cfg.step, Some(0.5));
        assert_eq!(cfg.init, Init::Random { scale: 2.0 });
        assert_eq!(cfg.threads, None);
    }
}
