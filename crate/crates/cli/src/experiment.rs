//! The experiment family and its constants.
//!
//! The main instance is
//! `minimize psi(x) = lam ||Ax||_1 + (1/2)||Cx - b||^2`
//! subject to `1^T x = 1, x >= 0`, with `A` the first-order difference
//! operator and `C`, `b` standard Gaussian. The primal geometry is the
//! relative entropy kernel (closed-form simplex prox), the dual geometry is
//! Euclidean (box projection).
//!
//! The equality variant keeps `f` and `h` and replaces `g` by the indicator
//! of `{b_eq}` with `b_eq = A xhat` for a sampled feasible `xhat`, which is
//! the form the line-search solver accepts.

use std::sync::Arc;

use bregsplit::*;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::CliError;

/// Flags of one benchmark run. Defaults are desk scale; larger instances are
/// reachable by flags.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub m: usize,
    pub n: usize,
    pub lam: f64,
    pub seed: u64,
    pub iters: u64,
    pub log_every: u64,
    pub delta: f64,
    pub theta_bar: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            m: 50,
            n: 500,
            lam: 0.1,
            seed: 0,
            iters: 20_000,
            log_every: 100,
            delta: 0.99,
            theta_bar: 1.2,
        }
    }
}

impl ExperimentConfig {
    // negated comparisons double as NaN rejection
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), CliError> {
        if self.m < 1 {
            return Err(CliError::Config("m must be at least 1".into()));
        }
        if self.n < 2 {
            return Err(CliError::Config("n must be at least 2".into()));
        }
        if !(self.lam > 0.0) {
            return Err(CliError::Config("lam must be positive".into()));
        }
        if self.log_every < 1 {
            return Err(CliError::Config("log-every must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(CliError::Config("delta must lie in (0, 1]".into()));
        }
        if !(self.theta_bar >= 1.0) {
            return Err(CliError::Config("theta-bar must be at least 1".into()));
        }
        Ok(())
    }
}

/// A generated main instance with its solver constants.
pub struct ExperimentInstance {
    pub problem: CompositeProblem,
    pub c: Arc<DenseOperator>,
    pub b: Vec<f64>,
    pub m: usize,
    pub n: usize,
    pub lam: f64,
    /// `max |C^T C|`: smoothness of `h` against the entropy distance.
    pub l1: f64,
    /// Inflated `||C||_2^2`: smoothness of `h` against the Euclidean
    /// distance.
    pub l2: f64,
    /// `||A||_{1,2}` of the difference operator.
    pub op_norm_1_2: f64,
    /// Upper bound on `||A||_2` of the difference operator, exact enough for
    /// the boundary stepsize setup.
    pub op_norm_spectral_bound: f64,
}

impl ExperimentInstance {
    /// Boundary Condat-Vu stepsizes `sigma = L1/2`, `tau = 1/(2 L1)`.
    pub fn cv_steps(&self) -> StepSizes {
        StepSizes {
            sigma: self.l1 / 2.0,
            tau: 1.0 / (2.0 * self.l1),
        }
    }

    /// Boundary PD3O stepsizes `sigma = L2/4`, `tau = 1/L2`.
    pub fn pd3o_steps(&self) -> StepSizes {
        StepSizes {
            sigma: self.l2 / 4.0,
            tau: 1.0 / self.l2,
        }
    }

    pub fn uniform_start(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![1.0 / self.n as f64; self.n], vec![0.0; self.n - 1])
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        (self.problem.objective)(x)
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

fn simplex_indicator(tol: f64) -> impl Fn(&[f64]) -> f64 + Send + Sync {
    move |x: &[f64]| {
        let s: f64 = x.iter().sum();
        if (s - 1.0).abs() <= tol && x.iter().all(|&v| v >= -tol) {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Samples `C` (row-major) and `b` from the seeded stream and assembles the
/// instance. The stream layout is fixed: ChaCha8 keyed by `seed`, the `m*n`
/// entries of `C` first, then the `m` entries of `b`, all standard normal.
pub fn generate_instance(cfg: &ExperimentConfig) -> ExperimentInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let c = DenseOperator::new(cfg.m, cfg.n, gaussian_vec(&mut rng, cfg.m * cfg.n));
    let b = gaussian_vec(&mut rng, cfg.m);
    instance_from_parts(c, b, cfg.lam)
}

/// Assembles an instance from explicit data; the entry point tests use to
/// force tiny or handcrafted problems.
pub fn instance_from_parts(c: DenseOperator, b: Vec<f64>, lam: f64) -> ExperimentInstance {
    let (m, n) = (c.rows(), c.cols());
    assert!(n >= 2, "instance needs n >= 2");
    assert_eq!(b.len(), m);
    let c = Arc::new(c);
    let l1 = lipschitz_l1(&c);
    let l2 = norm_spectral(&*c, 1e-10, 1_000_000)
        .expect("power iteration converges for finite data")
        .inflated
        .powi(2);
    let op = DifferenceOperator::new(n);
    let op_norm_1_2 = norm_1_2(&op);
    let h = Arc::new(QuadraticLoss::new(c.clone(), b.clone(), l1));
    let objective = {
        let h = h.clone();
        move |x: &[f64]| lam * x.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() + h.value(x)
    };
    let gstar_value = move |z: &[f64]| {
        if z.iter().all(|v| v.abs() <= lam * (1.0 + 1e-12) + 1e-12) {
            0.0
        } else {
            f64::INFINITY
        }
    };
    let problem = CompositeProblem {
        f_prox: Arc::new(EntropySimplexProx),
        primal_kernel: Arc::new(RelativeEntropyKernel::new(n)),
        gstar_prox: Arc::new(BoxProjectionProx { lam }),
        dual_kernel: Arc::new(SquaredEuclideanKernel::new(n - 1)),
        h: Some(h),
        op: Arc::new(op),
        b: None,
        objective: Arc::new(objective),
        f_value: Arc::new(simplex_indicator(1e-9)),
        gstar_value: Arc::new(gstar_value),
    };
    ExperimentInstance {
        problem,
        c,
        b,
        m,
        n,
        lam,
        l1,
        l2,
        op_norm_1_2,
        op_norm_spectral_bound: 2.0,
    }
}

/// Equality-constrained variant `minimize (1/2)||Cx - b||^2` s.t.
/// `Ax = A xhat` on the simplex, with the analytic primal-dual solution.
///
/// The difference constraints plus the unit sum pin the primal solution at
/// `xhat`; the dual solution solves `A^T z = nu 1 - grad h(xhat)` by
/// cumulative sums.
pub struct EqualityInstance {
    pub problem: CompositeProblem,
    pub m: usize,
    pub n: usize,
    pub l1: f64,
    pub b_eq: Vec<f64>,
    pub x_star: Vec<f64>,
    pub z_star: Vec<f64>,
    pub psi_star: f64,
}

impl EqualityInstance {
    pub fn cv_steps(&self) -> StepSizes {
        StepSizes {
            sigma: self.l1 / 2.0,
            tau: 1.0 / (2.0 * self.l1),
        }
    }

    pub fn ls_config(&self, theta_bar: f64, delta: f64) -> LineSearchConfig {
        LineSearchConfig {
            tau_init: 1.0 / (2.0 * self.l1),
            beta: self.l1 * self.l1,
            theta_bar,
            delta,
            max_backtracks: 60,
        }
    }

    pub fn uniform_start(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![1.0 / self.n as f64; self.n], vec![0.0; self.n - 1])
    }

    pub fn saddle(&self) -> SaddlePoint {
        SaddlePoint {
            x: self.x_star.clone(),
            z: self.z_star.clone(),
        }
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        (self.problem.objective)(x)
    }
}

/// Extends the seeded stream of [`generate_instance`] by `n` exponentials
/// normalized onto the simplex for `xhat`.
pub fn generate_equality_instance(cfg: &ExperimentConfig) -> EqualityInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let c = Arc::new(DenseOperator::new(
        cfg.m,
        cfg.n,
        gaussian_vec(&mut rng, cfg.m * cfg.n),
    ));
    let b_data = gaussian_vec(&mut rng, cfg.m);
    let mut x_star: Vec<f64> = (0..cfg.n)
        .map(|_| -rng.gen_range(1e-12..1.0f64).ln())
        .collect();
    let s: f64 = x_star.iter().sum();
    x_star.iter_mut().for_each(|v| *v /= s);

    let n = cfg.n;
    let l1 = lipschitz_l1(&c);
    let h = Arc::new(QuadraticLoss::new(c, b_data, l1));
    let op = DifferenceOperator::new(n);
    let b_eq = op.apply(&x_star);

    let g = h.grad(&x_star);
    let nu = g.iter().sum::<f64>() / n as f64;
    let w: Vec<f64> = g.iter().map(|gi| nu - gi).collect();
    let mut z_star = vec![0.0; n - 1];
    z_star[0] = -w[0];
    for j in 1..n - 1 {
        z_star[j] = z_star[j - 1] - w[j];
    }
    let psi_star = h.value(&x_star);

    let objective = {
        let h = h.clone();
        move |x: &[f64]| h.value(x)
    };
    let gstar_value = {
        let b = b_eq.clone();
        move |z: &[f64]| bregsplit::vec::dot(&b, z)
    };
    let problem = CompositeProblem {
        f_prox: Arc::new(EntropySimplexProx),
        primal_kernel: Arc::new(RelativeEntropyKernel::new(n)),
        gstar_prox: Arc::new(LinearConjugateProx { b: b_eq.clone() }),
        dual_kernel: Arc::new(SquaredEuclideanKernel::new(n - 1)),
        h: Some(h),
        op: Arc::new(op),
        b: Some(b_eq.clone()),
        objective: Arc::new(objective),
        f_value: Arc::new(simplex_indicator(1e-9)),
        gstar_value: Arc::new(gstar_value),
    };
    EqualityInstance {
        problem,
        m: cfg.m,
        n,
        l1,
        b_eq,
        x_star,
        z_star,
        psi_star,
    }
}
