//! Lagrangian evaluation, primal-dual distances, merit functions, and the
//! ergodic bound checker used in convergence certification.

use thiserror::Error;

use crate::kernel::{distance, BregmanKernel, KernelError, SmoothTerm};
use crate::linop::LinearOperator;
use crate::solver::ConvergenceRecord;
use crate::vec::{dist2_sq, dot, norm1, norm2, norm2_sq, sub};

/// Borrowed extended-value evaluator (`f64::INFINITY` encodes points outside
/// a domain).
pub type ValueRef<'a> = &'a (dyn Fn(&[f64]) -> f64 + Send + Sync);

/// `L(x, z) = f(x) + h(x) + <z, Ax> - g*(z)`, with the conventions
/// `L = +inf` when `x` is outside `dom(f + h)` and `L = -inf` when `x` is
/// inside but `z` is outside `dom g*`.
pub struct LagrangianSpec<'a> {
    pub f_value: ValueRef<'a>,
    pub h: Option<&'a dyn SmoothTerm>,
    pub gstar_value: ValueRef<'a>,
    pub op: &'a dyn LinearOperator,
}

impl LagrangianSpec<'_> {
    pub fn eval(&self, x: &[f64], z: &[f64]) -> f64 {
        let fx = (self.f_value)(x);
        if fx == f64::INFINITY {
            return f64::INFINITY;
        }
        let gz = (self.gstar_value)(z);
        if gz == f64::INFINITY {
            return f64::NEG_INFINITY;
        }
        fx + self.h.map_or(0.0, |h| h.value(x)) + dot(z, &self.op.apply(x)) - gz
    }
}

/// Checked Lagrangian evaluation.
pub fn lagrangian(spec: &LagrangianSpec<'_>, x: &[f64], z: &[f64]) -> f64 {
    spec.eval(x, z)
}

/// The five primal-dual distances appearing in the convergence analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdVariant {
    /// `(1/tau) d_p + (1/sigma) d_d + <z - z', A(x - x')>`.
    DPlus,
    /// `(1/tau) d_p + (1/sigma) d_d - <z - z', A(x - x')>`.
    DMinus,
    /// `DMinus` minus the Bregman divergence of `h`: certifies the primal
    /// Condat-Vu step.
    DPcv,
    /// `DPlus` minus the Bregman divergence of `h`: certifies the dual step.
    DDcv,
    /// The PD3O distance with `y = grad h(x)` supplied internally.
    DPd3o,
}

pub struct PrimalDualDistance<'a> {
    pub variant: PdVariant,
    pub sigma: f64,
    pub tau: f64,
    pub primal_kernel: &'a dyn BregmanKernel,
    pub dual_kernel: &'a dyn BregmanKernel,
    /// Required by `DPcv`/`DDcv`/`DPd3o` when the problem has a smooth term.
    pub h: Option<&'a dyn SmoothTerm>,
    pub op: &'a dyn LinearOperator,
}

/// Evaluates the selected distance at `(x, z)` against `(xp, zp)`. For
/// `DPd3o` the auxiliary arguments are taken as `y = grad h(x)`,
/// `y' = grad h(xp)`; use [`pd3o_distance`] to supply them explicitly.
///
/// Nonnegativity holds under the matching stepsize condition:
/// `sigma tau ||A||^2 <= 1` for `DPlus`/`DMinus`/`DPd3o`, and additionally
/// `+ tau L <= 1` for `DPcv`/`DDcv`.
pub fn pd_distance(
    d: &PrimalDualDistance<'_>,
    x: &[f64],
    z: &[f64],
    xp: &[f64],
    zp: &[f64],
) -> Result<f64, KernelError> {
    if d.variant == PdVariant::DPd3o {
        let (y, yp) = match d.h {
            Some(h) => (h.grad(x), h.grad(xp)),
            None => (vec![0.0; x.len()], vec![0.0; xp.len()]),
        };
        return pd3o_distance(
            d.primal_kernel,
            d.dual_kernel,
            d.op,
            d.sigma,
            d.tau,
            (x, &y, z),
            (xp, &yp, zp),
        );
    }
    let dp = distance(d.primal_kernel, x, xp)?;
    let dd = distance(d.dual_kernel, z, zp)?;
    let base = dp / d.tau + dd / d.sigma;
    let dx = sub(x, xp);
    let dz = sub(z, zp);
    let cross = dot(&dz, &d.op.apply(&dx));
    let h_div = |h: &dyn SmoothTerm| h.value(x) - h.value(xp) - dot(&h.grad(xp), &dx);
    Ok(match d.variant {
        PdVariant::DPlus => base + cross,
        PdVariant::DMinus => base - cross,
        PdVariant::DPcv => base - cross - d.h.map_or(0.0, h_div),
        PdVariant::DDcv => base + cross - d.h.map_or(0.0, h_div),
        PdVariant::DPd3o => unreachable!(),
    })
}

/// The PD3O primal-dual distance on triples `(x, y, z)`:
/// `(1/tau) d_p(x,x') + (1/sigma) d_d(z,z') + (tau/2)||y - y'||^2
///  - <y - y', x - x'> - <z - z', A(x - x')> + tau <z - z', A(y - y')>`.
///
/// Nonnegative whenever `sigma tau ||A||^2 <= 1`, by the half-squared-norm
/// lower bound `(1/2)||(1/sqrt tau)(x-x') - sqrt tau (y-y') - sqrt tau A^T(z-z')||^2`.
pub fn pd3o_distance(
    primal_kernel: &dyn BregmanKernel,
    dual_kernel: &dyn BregmanKernel,
    op: &dyn LinearOperator,
    sigma: f64,
    tau: f64,
    (x, y, z): (&[f64], &[f64], &[f64]),
    (xp, yp, zp): (&[f64], &[f64], &[f64]),
) -> Result<f64, KernelError> {
    let dp = distance(primal_kernel, x, xp)?;
    let dd = distance(dual_kernel, z, zp)?;
    let dx = sub(x, xp);
    let dy = sub(y, yp);
    let dz = sub(z, zp);
    Ok(
        dp / tau + dd / sigma + 0.5 * tau * norm2_sq(&dy)
            - dot(&dy, &dx)
            - dot(&dz, &op.apply(&dx))
            + tau * dot(&dz, &op.apply(&dy)),
    )
}

#[derive(Debug, Error, PartialEq)]
pub enum MeritError {
    #[error("dual iterate has negative coordinate z[{index}] = {value}, outside dom g*")]
    NegativeDual { index: usize, value: f64 },
}

/// Merit function for `minimize ||x||_1` subject to `Ax <= b`, restricted to
/// the boxes `X = {||x||_inf <= kappa}` and `Z = {||z||_inf <= lam}`:
/// `eta(x, z) = ||x||_1 + lam sum_i max(0, (Ax - b)_i) + b^T z
///              + kappa sum_i max(0, |(A^T z)_i| - 1)`.
///
/// Nonnegative with zero exactly at optima whenever optimal points exist in
/// the interiors of `X` and `Z`; choosing `kappa` and `lam` large enough for
/// that is the caller's obligation.
pub struct MeritL1Inequality<'a> {
    pub kappa: f64,
    pub lam: f64,
    pub op: &'a dyn LinearOperator,
    pub b: &'a [f64],
}

impl MeritL1Inequality<'_> {
    pub fn evaluate(&self, x: &[f64], z: &[f64]) -> Result<f64, MeritError> {
        if let Some(i) = z.iter().position(|&v| v < 0.0) {
            return Err(MeritError::NegativeDual {
                index: i,
                value: z[i],
            });
        }
        let ax = self.op.apply(x);
        let primal_pen: f64 = ax.iter().zip(self.b).map(|(a, b)| (a - b).max(0.0)).sum();
        let atz = self.op.adjoint(z);
        let dual_pen: f64 = atz.iter().map(|v| (v.abs() - 1.0).max(0.0)).sum();
        Ok(norm1(x) + self.lam * primal_pen + dot(self.b, z) + self.kappa * dual_pen)
    }
}

/// Merit value for the equality-constrained form. The dual part needs the
/// conjugate `(f + h)*(-A^T z)`, which is rarely closed-form; when no
/// evaluator is supplied it is reported as absent rather than approximated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EqualityMeritValue {
    /// `f(x) + h(x) + gamma ||Ax - b|| + b^T z`.
    pub primal_part: f64,
    /// `(f + h)*(-A^T z)` when an evaluator was supplied.
    pub conjugate_part: Option<f64>,
}

impl EqualityMeritValue {
    pub fn total(&self) -> Option<f64> {
        self.conjugate_part.map(|c| self.primal_part + c)
    }
}

/// Merit function for `minimize f(x) + h(x)` subject to `Ax = b` with the
/// dual ball `Z = {||z|| <= gamma}`: the primal objective augmented with the
/// exact penalty `gamma ||Ax - b||`.
pub struct MeritEqualityPenalty<'a> {
    pub gamma: f64,
    pub fh_value: ValueRef<'a>,
    pub op: &'a dyn LinearOperator,
    pub b: &'a [f64],
    pub conjugate: Option<ValueRef<'a>>,
}

impl MeritEqualityPenalty<'_> {
    pub fn evaluate(&self, x: &[f64], z: &[f64]) -> EqualityMeritValue {
        let r = sub(&self.op.apply(x), self.b);
        let primal_part = (self.fh_value)(x) + self.gamma * norm2(&r) + dot(self.b, z);
        let conjugate_part = self.conjugate.map(|conj| {
            let mut w = self.op.adjoint(z);
            w.iter_mut().for_each(|v| *v = -*v);
            conj(&w)
        });
        EqualityMeritValue {
            primal_part,
            conjugate_part,
        }
    }
}

/// Which ergodic bound the run is held to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErgodicBound {
    /// `(2/k) ((1/tau) d_p(x*, x0) + (1/sigma) d_d(z*, z0))`.
    CondatVu,
    /// `(3/k) ((2/tau) d_p(x*, x0) + (1/sigma) d_d(z*, z0))`.
    Pd3o,
    /// `(1/sum tau_i) (d_p(x*, x0) + (1/2 beta) ||z* - z0||^2)`.
    LineSearch,
}

/// Additive slack for all certificate checks at double precision.
pub const CERTIFICATE_SLACK: f64 = 1e-8;

pub struct ErgodicCheck<'a> {
    pub lagrangian: LagrangianSpec<'a>,
    pub primal_kernel: &'a dyn BregmanKernel,
    pub dual_kernel: &'a dyn BregmanKernel,
    pub bound: ErgodicBound,
    pub sigma: f64,
    pub tau: f64,
    /// Stepsize ratio, used by the line-search bound only.
    pub beta: f64,
    pub x0: &'a [f64],
    pub z0: &'a [f64],
}

/// Verifies `L(x_avg^(k), z*) - L(x*, z_avg^(k)) <= bound(k) + slack` at every
/// logged `k`. The records must carry the ergodic averages, which `run`
/// always stores.
pub fn ergodic_gap_bound_check(
    check: &ErgodicCheck<'_>,
    records: &[ConvergenceRecord],
    saddle_x: &[f64],
    saddle_z: &[f64],
) -> Result<bool, KernelError> {
    let dp0 = distance(check.primal_kernel, saddle_x, check.x0)?;
    let dd0 = distance(check.dual_kernel, saddle_z, check.z0)?;
    for rec in records {
        let gap = check.lagrangian.eval(&rec.x_avg, saddle_z)
            - check.lagrangian.eval(saddle_x, &rec.z_avg);
        let bound = match check.bound {
            ErgodicBound::CondatVu => 2.0 / rec.k as f64 * (dp0 / check.tau + dd0 / check.sigma),
            ErgodicBound::Pd3o => 3.0 / rec.k as f64 * (2.0 * dp0 / check.tau + dd0 / check.sigma),
            ErgodicBound::LineSearch => {
                (dp0 + dist2_sq(saddle_z, check.z0) / (2.0 * check.beta)) / rec.avg_weight
            }
        };
        // negated form also rejects NaN and +inf gaps
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(gap <= bound + CERTIFICATE_SLACK) {
            return Ok(false);
        }
    }
    Ok(true)
}
