//! Primal-dual Bregman splitting solvers: the primal and dual Condat-Vu
//! variants, PD3O, the backtracking line-search variant of the dual solver,
//! and the iteration driver with ergodic averaging.
//!
//! Every step evaluates one primal and one dual Bregman prox plus one forward
//! and one adjoint operator application; the variants differ only in where
//! the extrapolation and the gradient correction sit.

use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::kernel::{BregmanKernel, KernelError, SmoothTerm};
use crate::linop::{LinearOperator, NormTag};
use crate::merit::{pd_distance, LagrangianSpec, PdVariant, PrimalDualDistance};
use crate::prox::ProxOperator;
use crate::vec::{dist2_sq, is_finite, sub};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("inconsistent problem: {0}")]
    BadProblem(String),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("starting point rejected: {0}")]
    BadStart(String),
    #[error("iterate became non-finite at iteration {iteration}")]
    NonFinite { iteration: u64 },
    #[error(
        "line search exhausted {max_backtracks} backtracks at iteration {iteration}: \
         last theta {last_theta:.6e}, condition {lhs:.6e} > {rhs:.6e}"
    )]
    BacktrackExhausted {
        iteration: u64,
        max_backtracks: u32,
        last_theta: f64,
        lhs: f64,
        rhs: f64,
    },
    #[error("line search needs the equality-constrained form (b) and a Euclidean dual kernel")]
    LineSearchUnsupported,
    #[error("PD3O needs a primal kernel that is 1-strongly convex in the Euclidean norm")]
    Pd3oKernel,
    #[error("diagnostic distance failed at iteration {iteration}: {source}")]
    Diagnostics {
        iteration: u64,
        #[source]
        source: KernelError,
    },
}

/// Extended-value evaluator (`f64::INFINITY` encodes points outside a domain).
pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// The composite problem `minimize f(x) + g(Ax) + h(x)`, described by the
/// proxes of `f` and `g*`, their kernels, the smooth term, and the operator.
/// `b` is present only for the equality-constrained form `g = delta_{{b}}`
/// used by the line-search solver.
///
/// Immutable during solves; distinct runs may share one instance.
#[derive(Clone)]
pub struct CompositeProblem {
    pub f_prox: Arc<dyn ProxOperator>,
    pub primal_kernel: Arc<dyn BregmanKernel>,
    pub gstar_prox: Arc<dyn ProxOperator>,
    pub dual_kernel: Arc<dyn BregmanKernel>,
    pub h: Option<Arc<dyn SmoothTerm>>,
    pub op: Arc<dyn LinearOperator>,
    pub b: Option<Vec<f64>>,
    /// `psi` for reporting.
    pub objective: ValueFn,
    pub f_value: ValueFn,
    pub gstar_value: ValueFn,
}

impl CompositeProblem {
    pub fn primal_dim(&self) -> usize {
        self.op.cols()
    }

    pub fn dual_dim(&self) -> usize {
        self.op.rows()
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.primal_kernel.dim() != self.op.cols() {
            return Err(SolverError::BadProblem(format!(
                "primal kernel dimension {} != operator cols {}",
                self.primal_kernel.dim(),
                self.op.cols()
            )));
        }
        if self.dual_kernel.dim() != self.op.rows() {
            return Err(SolverError::BadProblem(format!(
                "dual kernel dimension {} != operator rows {}",
                self.dual_kernel.dim(),
                self.op.rows()
            )));
        }
        if let Some(b) = &self.b {
            if b.len() != self.op.rows() {
                return Err(SolverError::BadProblem(format!(
                    "b has length {}, operator rows {}",
                    b.len(),
                    self.op.rows()
                )));
            }
        }
        Ok(())
    }

    pub fn h_value(&self, x: &[f64]) -> f64 {
        self.h.as_ref().map_or(0.0, |h| h.value(x))
    }

    pub fn lagrangian_spec(&self) -> LagrangianSpec<'_> {
        LagrangianSpec {
            f_value: &*self.f_value,
            h: self.h.as_deref(),
            gstar_value: &*self.gstar_value,
            op: &*self.op,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    CvPrimal,
    CvDual,
    Pd3o,
}

/// Fixed stepsizes `(sigma, tau)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSizes {
    pub sigma: f64,
    pub tau: f64,
}

/// Allowance for representation rounding at the stepsize-condition boundary.
/// Boundary setups land within a few ulps of 1 in double precision; this is
/// not a tolerance knob.
pub const STEPSIZE_BOUNDARY_ULPS: f64 = 8.0;

/// Checks the stepsize condition of the selected algorithm:
/// `sigma tau ||A||^2 + tau L <= 1` for the Condat-Vu variants,
/// `sigma tau ||A||^2 <= 1` and `tau L <= 1` for PD3O.
///
/// `op_norm` must be measured in the norm matching the primal kernel's
/// strong-convexity declaration, and `smoothness` is the matching constant of
/// `h` (zero when `h` is absent).
pub fn validate_stepsizes(
    algorithm: Algorithm,
    s: StepSizes,
    op_norm: f64,
    smoothness: f64,
) -> bool {
    if !(s.sigma > 0.0 && s.tau > 0.0) {
        return false;
    }
    let cushion = STEPSIZE_BOUNDARY_ULPS * f64::EPSILON;
    let quad = s.sigma * s.tau * op_norm * op_norm;
    match algorithm {
        Algorithm::CvPrimal | Algorithm::CvDual => quad + s.tau * smoothness <= 1.0 + cushion,
        Algorithm::Pd3o => quad <= 1.0 + cushion && s.tau * smoothness <= 1.0 + cushion,
    }
}

/// Backtracking line-search configuration for the dual Condat-Vu solver on
/// equality-constrained problems.
#[derive(Clone, Copy, Debug)]
pub struct LineSearchConfig {
    /// `tau_{-1}`.
    pub tau_init: f64,
    /// Fixed stepsize ratio `beta = sigma_k / tau_k`.
    pub beta: f64,
    /// Trial growth factor `theta_bar >= 1`, constant across iterations.
    pub theta_bar: f64,
    /// Backtracking constant `delta` in `(0, 1]`; values below 1 also give
    /// convergence of the iterates.
    pub delta: f64,
    pub max_backtracks: u32,
}

impl LineSearchConfig {
    // negated comparisons double as NaN rejection
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tau_init > 0.0) {
            return Err(SolverError::BadConfig("tau_init must be positive".into()));
        }
        if !(self.beta > 0.0) {
            return Err(SolverError::BadConfig("beta must be positive".into()));
        }
        if !(self.theta_bar >= 1.0) {
            return Err(SolverError::BadConfig("theta_bar must be >= 1".into()));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(SolverError::BadConfig("delta must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn sigma_init(&self) -> f64 {
        self.beta * self.tau_init
    }

    /// Lower bound on accepted primal stepsizes,
    /// `min(tau_init, (-L + sqrt(L^2 + 4 delta^2 beta ||A||^2)) / (4 beta ||A||^2))`.
    pub fn tau_min(&self, op_norm: f64, smoothness: f64) -> f64 {
        let a2 = op_norm * op_norm;
        let l = smoothness;
        let root = (-l + (l * l + 4.0 * self.delta * self.delta * self.beta * a2).sqrt())
            / (4.0 * self.beta * a2);
        self.tau_init.min(root)
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Method {
    Fixed {
        algorithm: Algorithm,
        steps: StepSizes,
    },
    LineSearch(LineSearchConfig),
}

/// Primal/dual iterates plus the ergodic accumulators.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    /// `z^{(k-1)}`, used by the line-search extrapolation; equals `z` at
    /// start (`z^{(-1)} = z^{(0)}`).
    pub z_prev: Vec<f64>,
    x_avg_num: Vec<f64>,
    z_avg_num: Vec<f64>,
    avg_weight: f64,
    pub k: u64,
    pub sigma_k: f64,
    pub tau_k: f64,
}

impl SolverState {
    pub fn new(x0: Vec<f64>, z0: Vec<f64>) -> Self {
        let xn = x0.len();
        let zn = z0.len();
        SolverState {
            x: x0,
            z_prev: z0.clone(),
            z: z0,
            x_avg_num: vec![0.0; xn],
            z_avg_num: vec![0.0; zn],
            avg_weight: 0.0,
            k: 0,
            sigma_k: 0.0,
            tau_k: 0.0,
        }
    }

    pub fn avg_weight(&self) -> f64 {
        self.avg_weight
    }

    /// Ergodic primal average; `None` before the first step.
    pub fn x_avg(&self) -> Option<Vec<f64>> {
        (self.avg_weight > 0.0)
            .then(|| self.x_avg_num.iter().map(|v| v / self.avg_weight).collect())
    }

    /// Ergodic dual average (`z` for fixed-step solvers, the extrapolated
    /// `zbar` for line search); `None` before the first step.
    pub fn z_avg(&self) -> Option<Vec<f64>> {
        (self.avg_weight > 0.0)
            .then(|| self.z_avg_num.iter().map(|v| v / self.avg_weight).collect())
    }

    fn advance(&mut self, x_new: Vec<f64>, z_new: Vec<f64>, z_sample: Option<&[f64]>, w: f64) {
        for (acc, v) in self.x_avg_num.iter_mut().zip(&x_new) {
            *acc += w * v;
        }
        let sample = z_sample.unwrap_or(&z_new);
        for (acc, v) in self.z_avg_num.iter_mut().zip(sample) {
            *acc += w * v;
        }
        self.avg_weight += w;
        self.x = x_new;
        self.z_prev = std::mem::replace(&mut self.z, z_new);
        self.k += 1;
    }
}

/// Per-step evaluation counts consumed by the deterministic work clock.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepWork {
    pub op_applies: u32,
    pub f_prox_evals: u32,
    pub g_prox_evals: u32,
    pub grad_evals: u32,
    pub h_value_evals: u32,
    pub distance_evals: u32,
    pub backtracks: u32,
}

fn check_finite(st: &SolverState, x: &[f64], z: &[f64]) -> Result<(), SolverError> {
    if is_finite(x) && is_finite(z) {
        Ok(())
    } else {
        Err(SolverError::NonFinite { iteration: st.k })
    }
}

/// One step of the Bregman primal Condat-Vu algorithm:
/// `x+ = prox_{tau f}(x, tau(A^T z + grad h(x)))`,
/// `z+ = prox_{sigma g*}(z, -sigma A(2x+ - x))`.
pub fn cv_primal_step(
    p: &CompositeProblem,
    st: &mut SolverState,
    s: StepSizes,
) -> Result<StepWork, SolverError> {
    let mut w = StepWork::default();
    let mut a_x = p.op.adjoint(&st.z);
    w.op_applies += 1;
    if let Some(h) = &p.h {
        let g = h.grad(&st.x);
        w.grad_evals += 1;
        for (ai, gi) in a_x.iter_mut().zip(&g) {
            *ai = s.tau * (*ai + gi);
        }
    } else {
        a_x.iter_mut().for_each(|ai| *ai *= s.tau);
    }
    let x_new = p.f_prox.evaluate(&st.x, &a_x, s.tau);
    w.f_prox_evals += 1;

    let extrap: Vec<f64> = x_new
        .iter()
        .zip(&st.x)
        .map(|(xn, xo)| 2.0 * xn - xo)
        .collect();
    let mut a_z = p.op.apply(&extrap);
    w.op_applies += 1;
    a_z.iter_mut().for_each(|v| *v *= -s.sigma);
    let z_new = p.gstar_prox.evaluate(&st.z, &a_z, s.sigma);
    w.g_prox_evals += 1;

    check_finite(st, &x_new, &z_new)?;
    st.sigma_k = s.sigma;
    st.tau_k = s.tau;
    st.advance(x_new, z_new, None, 1.0);
    Ok(w)
}

/// One step of the Bregman dual Condat-Vu algorithm:
/// `z+ = prox_{sigma g*}(z, -sigma A x)`,
/// `x+ = prox_{tau f}(x, tau A^T(2z+ - z) + tau grad h(x))`.
pub fn cv_dual_step(
    p: &CompositeProblem,
    st: &mut SolverState,
    s: StepSizes,
) -> Result<StepWork, SolverError> {
    let mut w = StepWork::default();
    let mut a_z = p.op.apply(&st.x);
    w.op_applies += 1;
    a_z.iter_mut().for_each(|v| *v *= -s.sigma);
    let z_new = p.gstar_prox.evaluate(&st.z, &a_z, s.sigma);
    w.g_prox_evals += 1;

    let extrap: Vec<f64> = z_new
        .iter()
        .zip(&st.z)
        .map(|(zn, zo)| 2.0 * zn - zo)
        .collect();
    let mut a_x = p.op.adjoint(&extrap);
    w.op_applies += 1;
    if let Some(h) = &p.h {
        let g = h.grad(&st.x);
        w.grad_evals += 1;
        for (ai, gi) in a_x.iter_mut().zip(&g) {
            *ai = s.tau * (*ai + gi);
        }
    } else {
        a_x.iter_mut().for_each(|ai| *ai *= s.tau);
    }
    let x_new = p.f_prox.evaluate(&st.x, &a_x, s.tau);
    w.f_prox_evals += 1;

    check_finite(st, &x_new, &z_new)?;
    st.sigma_k = s.sigma;
    st.tau_k = s.tau;
    st.advance(x_new, z_new, None, 1.0);
    Ok(w)
}

/// One step of Bregman PD3O. Differs from the primal Condat-Vu step only in
/// the gradient correction `tau(grad h(x) - grad h(x+))` inside the dual
/// extrapolation, which buys the looser stepsize condition.
pub fn pd3o_step(
    p: &CompositeProblem,
    st: &mut SolverState,
    s: StepSizes,
) -> Result<StepWork, SolverError> {
    let mut w = StepWork::default();
    let mut a_x = p.op.adjoint(&st.z);
    w.op_applies += 1;
    let grad = match &p.h {
        Some(h) => {
            let g = h.grad(&st.x);
            w.grad_evals += 1;
            for (ai, gi) in a_x.iter_mut().zip(&g) {
                *ai = s.tau * (*ai + gi);
            }
            Some(g)
        }
        None => {
            a_x.iter_mut().for_each(|ai| *ai *= s.tau);
            None
        }
    };
    let x_new = p.f_prox.evaluate(&st.x, &a_x, s.tau);
    w.f_prox_evals += 1;

    let mut extrap: Vec<f64> = x_new
        .iter()
        .zip(&st.x)
        .map(|(xn, xo)| 2.0 * xn - xo)
        .collect();
    if let (Some(h), Some(g)) = (&p.h, &grad) {
        let g_new = h.grad(&x_new);
        w.grad_evals += 1;
        for ((e, gi), gni) in extrap.iter_mut().zip(g).zip(&g_new) {
            *e += s.tau * (gi - gni);
        }
    }
    let mut a_z = p.op.apply(&extrap);
    w.op_applies += 1;
    a_z.iter_mut().for_each(|v| *v *= -s.sigma);
    let z_new = p.gstar_prox.evaluate(&st.z, &a_z, s.sigma);
    w.g_prox_evals += 1;

    check_finite(st, &x_new, &z_new)?;
    st.sigma_k = s.sigma;
    st.tau_k = s.tau;
    st.advance(x_new, z_new, None, 1.0);
    Ok(w)
}

/// One step of the dual Condat-Vu solver with backtracking line search on the
/// equality-constrained problem `minimize f(x) + h(x)` s.t. `Ax = b`.
///
/// Trials `theta = 2^{-i} theta_bar` scale both stepsizes off the previous
/// accepted pair; the first trial whose iterates satisfy the acceptance
/// inequality wins. Ergodic accumulators advance with weight `tau_k`,
/// averaging `x+` and the extrapolated `zbar+`.
pub fn ls_step(
    p: &CompositeProblem,
    st: &mut SolverState,
    cfg: &LineSearchConfig,
) -> Result<StepWork, SolverError> {
    let b = p.b.as_ref().ok_or(SolverError::LineSearchUnsupported)?;
    let mut w = StepWork::default();

    let grad_hx = match &p.h {
        Some(h) => {
            w.grad_evals += 1;
            Some((h.grad(&st.x), h.value(&st.x)))
        }
        None => None,
    };
    if grad_hx.is_some() {
        w.h_value_evals += 1;
    }
    let ax_cur = p.op.apply(&st.x);
    w.op_applies += 1;

    let tau_prev = st.tau_k;
    let mut last = (f64::NAN, f64::NAN, f64::NAN);
    for i in 0..=cfg.max_backtracks {
        let theta = cfg.theta_bar * 0.5f64.powi(i as i32);
        let tau = theta * tau_prev;
        // sigma_k = theta sigma_{k-1} with the ratio beta = sigma/tau fixed;
        // computing it off tau keeps sigma_k = beta tau_k exact.
        let sigma = cfg.beta * tau;

        let zbar: Vec<f64> =
            st.z.iter()
                .zip(&st.z_prev)
                .map(|(z, zp)| z + theta * (z - zp))
                .collect();
        let mut a_x = p.op.adjoint(&zbar);
        w.op_applies += 1;
        match &grad_hx {
            Some((g, _)) => {
                for (ai, gi) in a_x.iter_mut().zip(g) {
                    *ai = tau * (*ai + gi);
                }
            }
            None => a_x.iter_mut().for_each(|ai| *ai *= tau),
        }
        let x_new = p.f_prox.evaluate(&st.x, &a_x, tau);
        w.f_prox_evals += 1;
        let ax_new = p.op.apply(&x_new);
        w.op_applies += 1;
        let z_new: Vec<f64> =
            st.z.iter()
                .zip(ax_new.iter().zip(b))
                .map(|(z, (axi, bi))| z + sigma * (axi - bi))
                .collect();

        // Acceptance test: <z+ - zbar, A(x+ - x)> + h(x+) - h(x) - <grad h(x), x+ - x>
        //   <= (delta^2 / tau) d_p(x+, x) + (1 / 2 sigma) ||zbar - z+||^2.
        let cross: f64 = z_new
            .iter()
            .zip(&zbar)
            .zip(ax_new.iter().zip(&ax_cur))
            .map(|((zn, zb), (an, ac))| (zn - zb) * (an - ac))
            .sum();
        let h_term = match (&p.h, &grad_hx) {
            (Some(h), Some((g, hx))) => {
                w.h_value_evals += 1;
                let dx = sub(&x_new, &st.x);
                h.value(&x_new) - hx - crate::vec::dot(g, &dx)
            }
            _ => 0.0,
        };
        let lhs = cross + h_term;
        let dp = p.primal_kernel.bregman(&x_new, &st.x);
        w.distance_evals += 1;
        let rhs = cfg.delta * cfg.delta / tau * dp + dist2_sq(&zbar, &z_new) / (2.0 * sigma);

        if lhs <= rhs {
            check_finite(st, &x_new, &z_new)?;
            st.sigma_k = sigma;
            st.tau_k = tau;
            w.backtracks = i;
            st.advance(x_new, z_new, Some(&zbar), tau);
            return Ok(w);
        }
        last = (theta, lhs, rhs);
    }
    Err(SolverError::BacktrackExhausted {
        iteration: st.k,
        max_backtracks: cfg.max_backtracks,
        last_theta: last.0,
        lhs: last.1,
        rhs: last.2,
    })
}

/// Stops a run on the first satisfied rule. The iteration budget is the
/// default; the relative-objective-change rule is opt-in and evaluated at log
/// points only.
#[derive(Clone, Copy, Debug)]
pub struct StoppingRule {
    pub max_iters: u64,
    /// Measured against the real clock at log points; opting in makes the
    /// number of records machine-dependent.
    pub wall_clock: Option<std::time::Duration>,
    pub rel_objective_tol: Option<f64>,
}

impl StoppingRule {
    pub fn max_iters(n: u64) -> Self {
        StoppingRule {
            max_iters: n,
            wall_clock: None,
            rel_objective_tol: None,
        }
    }
}

/// Reference saddle point for convergence diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct SaddlePoint {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct DiagnosticsConfig {
    pub log_every: u64,
    /// When absent, gap and distance diagnostics are skipped, not
    /// approximated.
    pub reference: Option<SaddlePoint>,
}

impl DiagnosticsConfig {
    pub fn every(log_every: u64) -> Self {
        DiagnosticsConfig {
            log_every: log_every.max(1),
            reference: None,
        }
    }

    pub fn with_reference(mut self, saddle: SaddlePoint) -> Self {
        self.reference = Some(saddle);
        self
    }
}

/// Per-log-point diagnostics.
///
/// `time_s` comes from a deterministic work clock: evaluation counts weighted
/// by nominal flop costs, at a nominal 1 Gflop/s. Identical runs therefore
/// produce byte-identical records; the driver reports real elapsed time
/// separately in [`RunOutput`].
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRecord {
    pub k: u64,
    /// `psi(x^(k))`.
    pub objective: f64,
    /// `psi(x_avg^(k))`.
    pub objective_avg: f64,
    pub sigma: f64,
    pub tau: f64,
    pub time_s: f64,
    pub x_avg: Vec<f64>,
    pub z_avg: Vec<f64>,
    /// Ergodic denominator: `k` for fixed-step solvers, the sum of accepted
    /// `tau_i` for line search.
    pub avg_weight: f64,
    pub backtracks_total: u64,
    /// `L(x^(k), z*) - L(x*, z^(k))`, present when a reference is supplied.
    pub lagrangian_gap: Option<f64>,
    /// Algorithm-specific distance to the reference saddle point.
    pub dist_to_saddle: Option<f64>,
}

#[derive(Debug)]
pub struct RunOutput {
    pub records: Vec<ConvergenceRecord>,
    pub state: SolverState,
    /// Real elapsed time, reported outside the records to keep them
    /// deterministic.
    pub elapsed: std::time::Duration,
}

/// A failed run still surfaces the last valid state and the records gathered
/// before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: SolverError,
    pub state: SolverState,
    pub records: Vec<ConvergenceRecord>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "solver run failed at iteration {}: {}",
            self.state.k, self.error
        )
    }
}

impl std::error::Error for RunFailure {}

struct WorkMeter {
    units: u64,
    op_cost: u64,
    f_cost: u64,
    g_cost: u64,
    grad_cost: u64,
    h_value_cost: u64,
    distance_cost: u64,
}

impl WorkMeter {
    fn new(p: &CompositeProblem) -> Self {
        WorkMeter {
            units: 0,
            op_cost: p.op.apply_cost(),
            f_cost: p.f_prox.cost(p.primal_dim()),
            g_cost: p.gstar_prox.cost(p.dual_dim()),
            grad_cost: p
                .h
                .as_ref()
                .map_or(0, |h| h.grad_cost().max(2 * p.primal_dim() as u64)),
            h_value_cost: p
                .h
                .as_ref()
                .map_or(0, |h| h.value_cost().max(p.primal_dim() as u64)),
            distance_cost: p.primal_kernel.distance_cost(),
        }
    }

    fn add(&mut self, w: StepWork) {
        self.units += u64::from(w.op_applies) * self.op_cost
            + u64::from(w.f_prox_evals) * self.f_cost
            + u64::from(w.g_prox_evals) * self.g_cost
            + u64::from(w.grad_evals) * self.grad_cost
            + u64::from(w.h_value_evals) * self.h_value_cost
            + u64::from(w.distance_evals) * self.distance_cost;
    }

    fn seconds(&self) -> f64 {
        self.units as f64 / 1e9
    }
}

fn reference_diagnostics(
    p: &CompositeProblem,
    method: &Method,
    st: &SolverState,
    saddle: &SaddlePoint,
) -> Result<(f64, f64), SolverError> {
    let spec = p.lagrangian_spec();
    let gap = spec.eval(&st.x, &saddle.z) - spec.eval(&saddle.x, &st.z);
    let dist = match method {
        Method::Fixed { algorithm, steps } => {
            let variant = match algorithm {
                Algorithm::CvPrimal => PdVariant::DMinus,
                Algorithm::CvDual => PdVariant::DPlus,
                Algorithm::Pd3o => PdVariant::DPd3o,
            };
            let d = PrimalDualDistance {
                variant,
                sigma: steps.sigma,
                tau: steps.tau,
                primal_kernel: &*p.primal_kernel,
                dual_kernel: &*p.dual_kernel,
                h: p.h.as_deref(),
                op: &*p.op,
            };
            pd_distance(&d, &saddle.x, &saddle.z, &st.x, &st.z).map_err(|source| {
                SolverError::Diagnostics {
                    iteration: st.k,
                    source,
                }
            })?
        }
        Method::LineSearch(cfg) => {
            let dp =
                crate::kernel::distance(&*p.primal_kernel, &saddle.x, &st.x).map_err(|source| {
                    SolverError::Diagnostics {
                        iteration: st.k,
                        source,
                    }
                })?;
            dp + dist2_sq(&saddle.z, &st.z) / (2.0 * cfg.beta)
        }
    };
    Ok((gap, dist))
}

/// Drives one solver to the stopping rule, emitting a record every
/// `diag.log_every` iterations.
///
/// Stepsize admissibility ([`validate_stepsizes`]) is the caller's contract;
/// the driver checks what is checkable from the configuration alone: problem
/// consistency, starting points interior to the kernel domains, the PD3O
/// kernel restriction, and the line-search problem form.
pub fn run(
    p: &CompositeProblem,
    method: Method,
    init_x: Vec<f64>,
    init_z: Vec<f64>,
    stop: &StoppingRule,
    diag: &DiagnosticsConfig,
) -> Result<RunOutput, Box<RunFailure>> {
    let mut st = SolverState::new(init_x, init_z);
    let fail = |error: SolverError, st: SolverState, records: Vec<ConvergenceRecord>| {
        Box::new(RunFailure {
            error,
            state: st,
            records,
        })
    };

    if let Err(e) = p.validate() {
        return Err(fail(e, st, Vec::new()));
    }
    if !p.primal_kernel.interior_contains(&st.x) {
        let e = SolverError::BadStart("x0 outside the primal kernel domain interior".into());
        return Err(fail(e, st, Vec::new()));
    }
    if !p.dual_kernel.interior_contains(&st.z) {
        let e = SolverError::BadStart("z0 outside the dual kernel domain interior".into());
        return Err(fail(e, st, Vec::new()));
    }
    match &method {
        Method::Fixed {
            algorithm: Algorithm::Pd3o,
            ..
        } => {
            if !p.primal_kernel.euclidean_strongly_convex() {
                return Err(fail(SolverError::Pd3oKernel, st, Vec::new()));
            }
        }
        Method::LineSearch(cfg) => {
            if let Err(e) = cfg.validate() {
                return Err(fail(e, st, Vec::new()));
            }
            if p.b.is_none() || p.dual_kernel.strong_convexity_norm() != NormTag::Euclidean {
                return Err(fail(SolverError::LineSearchUnsupported, st, Vec::new()));
            }
            st.tau_k = cfg.tau_init;
            st.sigma_k = cfg.sigma_init();
        }
        Method::Fixed { steps, .. } => {
            st.sigma_k = steps.sigma;
            st.tau_k = steps.tau;
        }
    }

    let started = Instant::now();
    let mut meter = WorkMeter::new(p);
    let mut records = Vec::new();
    let mut backtracks_total = 0u64;
    let mut last_logged_obj: Option<f64> = None;

    while st.k < stop.max_iters {
        let stepped = match &method {
            Method::Fixed {
                algorithm: Algorithm::CvPrimal,
                steps,
            } => cv_primal_step(p, &mut st, *steps),
            Method::Fixed {
                algorithm: Algorithm::CvDual,
                steps,
            } => cv_dual_step(p, &mut st, *steps),
            Method::Fixed {
                algorithm: Algorithm::Pd3o,
                steps,
            } => pd3o_step(p, &mut st, *steps),
            Method::LineSearch(cfg) => ls_step(p, &mut st, cfg),
        };
        let work = match stepped {
            Ok(w) => w,
            Err(error) => return Err(fail(error, st, records)),
        };
        backtracks_total += u64::from(work.backtracks);
        meter.add(work);

        if st.k.is_multiple_of(diag.log_every) {
            let x_avg = st.x_avg().expect("averages exist after a step");
            let z_avg = st.z_avg().expect("averages exist after a step");
            let objective = (p.objective)(&st.x);
            let objective_avg = (p.objective)(&x_avg);
            let (lagrangian_gap, dist_to_saddle) = match &diag.reference {
                Some(saddle) => match reference_diagnostics(p, &method, &st, saddle) {
                    Ok((g, d)) => (Some(g), Some(d)),
                    Err(error) => return Err(fail(error, st, records)),
                },
                None => (None, None),
            };
            records.push(ConvergenceRecord {
                k: st.k,
                objective,
                objective_avg,
                sigma: st.sigma_k,
                tau: st.tau_k,
                time_s: meter.seconds(),
                x_avg,
                z_avg,
                avg_weight: st.avg_weight(),
                backtracks_total,
                lagrangian_gap,
                dist_to_saddle,
            });

            if let Some(tol) = stop.rel_objective_tol {
                if let Some(prev) = last_logged_obj {
                    if (objective - prev).abs() <= tol * objective.abs().max(1.0) {
                        break;
                    }
                }
                last_logged_obj = Some(objective);
            }
            if let Some(budget) = stop.wall_clock {
                if started.elapsed() >= budget {
                    break;
                }
            }
        }
    }

    Ok(RunOutput {
        records,
        state: st,
        elapsed: started.elapsed(),
    })
}
