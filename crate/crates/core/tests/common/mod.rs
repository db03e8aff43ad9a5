//! Shared fixtures for the integration tests: small fused-lasso-on-simplex
//! instances, an equality-constrained variant with an analytic saddle point,
//! and Euclidean test proxes with closed forms.

#![allow(dead_code)]

use std::sync::Arc;

use bregsplit::*;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| -rng.gen_range(1e-12..1.0f64).ln()).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

pub fn random_box(rng: &mut ChaCha8Rng, n: usize, lam: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-lam..lam)).collect()
}

/// Extended-value indicator of the unit-sum hyperplane.
pub fn simplex_indicator(tol: f64) -> impl Fn(&[f64]) -> f64 + Send + Sync + Clone {
    move |x: &[f64]| {
        let s: f64 = x.iter().sum();
        if (s - 1.0).abs() <= tol {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Extended-value indicator of the infinity-norm ball of radius `lam`.
pub fn box_indicator(lam: f64) -> impl Fn(&[f64]) -> f64 + Send + Sync + Clone {
    move |z: &[f64]| {
        if z.iter().all(|v| v.abs() <= lam * (1.0 + 1e-12) + 1e-12) {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Fused-lasso-over-the-simplex instance:
/// `minimize lam ||Ax||_1 + (1/2)||Cx - b||^2` s.t. `1^T x = 1, x >= 0`,
/// with `A` the difference operator, entropy primal kernel, Euclidean dual.
pub struct TvInstance {
    pub problem: CompositeProblem,
    pub m: usize,
    pub n: usize,
    pub lam: f64,
    /// `max |C^T C|`, the smoothness constant against the entropy distance.
    pub l1: f64,
    /// Inflated `||C||_2^2`, the Euclidean smoothness constant.
    pub l2: f64,
}

impl TvInstance {
    pub fn cv_steps(&self) -> StepSizes {
        StepSizes {
            sigma: self.l1 / 2.0,
            tau: 1.0 / (2.0 * self.l1),
        }
    }

    pub fn pd3o_steps(&self) -> StepSizes {
        StepSizes {
            sigma: self.l2 / 4.0,
            tau: 1.0 / self.l2,
        }
    }

    pub fn uniform_start(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![1.0 / self.n as f64; self.n], vec![0.0; self.n - 1])
    }
}

pub fn tv_instance(m: usize, n: usize, lam: f64, seed: u64) -> TvInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = Arc::new(DenseOperator::new(m, n, gaussian_vec(&mut rng, m * n)));
    let b = gaussian_vec(&mut rng, m);
    let l1 = lipschitz_l1(&c);
    let l2 = norm_spectral(&*c, 1e-10, 500_000).unwrap().inflated.powi(2);
    let h = Arc::new(QuadraticLoss::new(c, b, l1));
    let objective = {
        let h = h.clone();
        move |x: &[f64]| lam * x.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() + h.value(x)
    };
    let problem = CompositeProblem {
        f_prox: Arc::new(EntropySimplexProx),
        primal_kernel: Arc::new(RelativeEntropyKernel::new(n)),
        gstar_prox: Arc::new(BoxProjectionProx { lam }),
        dual_kernel: Arc::new(SquaredEuclideanKernel::new(n - 1)),
        h: Some(h),
        op: Arc::new(DifferenceOperator::new(n)),
        b: None,
        objective: Arc::new(objective),
        f_value: Arc::new(simplex_indicator(1e-9)),
        gstar_value: Arc::new(box_indicator(lam)),
    };
    TvInstance {
        problem,
        m,
        n,
        lam,
        l1,
        l2,
    }
}

/// Equality-constrained instance `minimize (1/2)||Cx - c0||^2` s.t.
/// `Ax = A xhat`, `x` on the simplex via the entropy kernel. The difference
/// constraints plus the unit sum pin the solution at `xhat` exactly, and the
/// dual solution solves `A^T z = nu 1 - grad h(xhat)` in closed form.
pub struct EqualityInstance {
    pub problem: CompositeProblem,
    pub n: usize,
    pub l1: f64,
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

    pub fn ls_config(&self) -> LineSearchConfig {
        LineSearchConfig {
            tau_init: 1.0 / (2.0 * self.l1),
            beta: self.l1 * self.l1,
            theta_bar: 1.2,
            delta: 0.99,
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
}

pub fn equality_instance(m: usize, n: usize, seed: u64) -> EqualityInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = Arc::new(DenseOperator::new(m, n, gaussian_vec(&mut rng, m * n)));
    let c0 = gaussian_vec(&mut rng, m);
    let l1 = lipschitz_l1(&c);
    let h = Arc::new(QuadraticLoss::new(c, c0, l1));
    let op = DifferenceOperator::new(n);
    let x_star = random_simplex(&mut rng, n);
    let b = op.apply(&x_star);

    // A^T z = nu 1 - grad h(x*), nu = mean(grad h(x*)); cumulative solve.
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
        let b = b.clone();
        move |z: &[f64]| bregsplit::vec::dot(&b, z)
    };
    let problem = CompositeProblem {
        f_prox: Arc::new(EntropySimplexProx),
        primal_kernel: Arc::new(RelativeEntropyKernel::new(n)),
        gstar_prox: Arc::new(LinearConjugateProx { b: b.clone() }),
        dual_kernel: Arc::new(SquaredEuclideanKernel::new(n - 1)),
        h: Some(h),
        op: Arc::new(op),
        b: Some(b),
        objective: Arc::new(objective),
        f_value: Arc::new(simplex_indicator(1e-9)),
        gstar_value: Arc::new(gstar_value),
    };
    EqualityInstance {
        problem,
        n,
        l1,
        x_star,
        z_star,
        psi_star,
    }
}

/// `f(x) = (1/2)||x - center||^2` with the Euclidean kernel:
/// `argmin t f + <a, .> + (1/2)||. - y||^2 = (y - a + t center) / (1 + t)`.
#[derive(Clone, Debug)]
pub struct QuadraticProx {
    pub center: Vec<f64>,
}

impl ProxOperator for QuadraticProx {
    fn evaluate(&self, y: &[f64], a: &[f64], t: f64) -> Vec<f64> {
        y.iter()
            .zip(a)
            .zip(&self.center)
            .map(|((yi, ai), ci)| (yi - ai + t * ci) / (1.0 + t))
            .collect()
    }
}

/// `g*(z) = (1/2)||z||^2` with the Euclidean kernel: `(y - a) / (1 + t)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SquaredConjProx;

impl ProxOperator for SquaredConjProx {
    fn evaluate(&self, y: &[f64], a: &[f64], t: f64) -> Vec<f64> {
        y.iter()
            .zip(a)
            .map(|(yi, ai)| (yi - ai) / (1.0 + t))
            .collect()
    }
}

/// Strongly convex 2-d saddle problem with a hand-computed solution:
/// `f(x) = (1/2)||x - cf||^2`, `h(x) = (1/2)||x - ch||^2`,
/// `g*(z) = (1/2)||z||^2`, `A = [[1, 2], [3, 4]]`. The optimality system
/// `(2I + A^T A) x* = cf + ch`, `z* = A x*` is solved by the explicit 2x2
/// inverse.
pub struct QpSaddle {
    pub problem: CompositeProblem,
    pub x_star: Vec<f64>,
    pub z_star: Vec<f64>,
}

/// Smooth term `(1/2)||x - c||^2` with Euclidean smoothness 1.
pub struct ShiftedSquare {
    pub center: Vec<f64>,
}

impl SmoothTerm for ShiftedSquare {
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * x
            .iter()
            .zip(&self.center)
            .map(|(xi, ci)| (xi - ci) * (xi - ci))
            .sum::<f64>()
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).map(|(xi, ci)| xi - ci).collect()
    }

    fn rel_smoothness(&self) -> f64 {
        1.0
    }
}

pub fn qp_saddle() -> QpSaddle {
    let a = DenseOperator::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
    let cf = vec![1.0, 0.0];
    let ch = vec![0.0, 1.0];

    // 2I + A^T A = [[12, 14], [14, 22]], det 68
    let q = [cf[0] + ch[0], cf[1] + ch[1]];
    let det = 68.0;
    let x_star = vec![
        (22.0 * q[0] - 14.0 * q[1]) / det,
        (-14.0 * q[0] + 12.0 * q[1]) / det,
    ];
    let z_star = a.apply(&x_star);

    let f_value = {
        let cf = cf.clone();
        move |x: &[f64]| {
            0.5 * x
                .iter()
                .zip(&cf)
                .map(|(xi, ci)| (xi - ci) * (xi - ci))
                .sum::<f64>()
        }
    };
    let problem = CompositeProblem {
        f_prox: Arc::new(QuadraticProx { center: cf.clone() }),
        primal_kernel: Arc::new(SquaredEuclideanKernel::new(2)),
        gstar_prox: Arc::new(SquaredConjProx),
        dual_kernel: Arc::new(SquaredEuclideanKernel::new(2)),
        h: Some(Arc::new(ShiftedSquare { center: ch })),
        op: Arc::new(a),
        b: None,
        objective: Arc::new(|x: &[f64]| bregsplit::vec::norm2_sq(x)),
        f_value: Arc::new(f_value),
        gstar_value: Arc::new(|z: &[f64]| 0.5 * bregsplit::vec::norm2_sq(z)),
    };
    QpSaddle {
        problem,
        x_star,
        z_star,
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
