//! Bregman kernels, the distances they generate, and smooth terms measured
//! against those distances.

use std::sync::Arc;

use thiserror::Error;

use crate::linop::{DenseOperator, LinearOperator, NormTag};
use crate::vec::{dist2_sq, dot, norm2_sq, sub};

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("{arg} has length {actual}, kernel dimension is {expected}")]
    DimensionMismatch {
        arg: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("{arg}[{index}] = {value} is outside the kernel domain")]
    DomainViolation {
        arg: &'static str,
        index: usize,
        value: f64,
    },
}

/// Kernel function `phi` generating the Bregman distance
/// `d(x, y) = phi(x) - phi(y) - <grad phi(y), x - y>`.
///
/// Kernels are stateless evaluators, safe for concurrent use.
pub trait BregmanKernel: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// `grad phi(x)`; defined on the domain interior.
    fn grad(&self, x: &[f64]) -> Vec<f64>;

    /// Index of the first coordinate violating `dom phi` (or its interior),
    /// `None` when the point is admissible. The default kernel domain is all
    /// of `R^n`.
    fn check_domain(&self, x: &[f64], interior: bool) -> Option<usize> {
        let _ = (x, interior);
        None
    }

    fn domain_contains(&self, x: &[f64]) -> bool {
        self.check_domain(x, false).is_none()
    }

    fn interior_contains(&self, x: &[f64]) -> bool {
        self.check_domain(x, true).is_none()
    }

    /// The norm against which the kernel is declared 1-strongly convex.
    fn strong_convexity_norm(&self) -> NormTag;

    /// Whether `d(x, y) >= (1/2)||x - y||_2^2` holds. Both shipped tags give
    /// this: the Euclidean tag directly, the l1 tag because
    /// `||v||_1 >= ||v||_2`.
    fn euclidean_strongly_convex(&self) -> bool {
        match self.strong_convexity_norm() {
            NormTag::Euclidean | NormTag::L1 => true,
        }
    }

    /// `d(x, y)` for in-domain arguments. Callers that need domain validation
    /// use [`distance`].
    fn bregman(&self, x: &[f64], y: &[f64]) -> f64 {
        let g = self.grad(y);
        self.value(x) - self.value(y) - dot(&g, &sub(x, y))
    }

    /// Nominal flop count of one `bregman` evaluation, for the work clock.
    fn distance_cost(&self) -> u64 {
        8 * self.dim() as u64
    }
}

/// Checked Bregman distance `d(x, y)` with `x` in `dom phi` and `y` in the
/// interior.
pub fn distance(kernel: &dyn BregmanKernel, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
    let n = kernel.dim();
    if x.len() != n {
        return Err(KernelError::DimensionMismatch {
            arg: "x",
            expected: n,
            actual: x.len(),
        });
    }
    if y.len() != n {
        return Err(KernelError::DimensionMismatch {
            arg: "y",
            expected: n,
            actual: y.len(),
        });
    }
    if let Some(i) = kernel.check_domain(x, false) {
        return Err(KernelError::DomainViolation {
            arg: "x",
            index: i,
            value: x[i],
        });
    }
    if let Some(i) = kernel.check_domain(y, true) {
        return Err(KernelError::DomainViolation {
            arg: "y",
            index: i,
            value: y[i],
        });
    }
    Ok(kernel.bregman(x, y))
}

/// `phi(x) = (1/2)||x||^2`; generates the squared Euclidean distance.
#[derive(Clone, Copy, Debug)]
pub struct SquaredEuclideanKernel {
    dim: usize,
}

impl SquaredEuclideanKernel {
    pub fn new(dim: usize) -> Self {
        SquaredEuclideanKernel { dim }
    }
}

impl BregmanKernel for SquaredEuclideanKernel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * norm2_sq(x)
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn strong_convexity_norm(&self) -> NormTag {
        NormTag::Euclidean
    }

    fn bregman(&self, x: &[f64], y: &[f64]) -> f64 {
        0.5 * dist2_sq(x, y)
    }

    fn distance_cost(&self) -> u64 {
        3 * self.dim as u64
    }
}

/// Negative entropy `phi(x) = sum_i x_i log x_i` on the nonnegative orthant,
/// with the convention `0 log 0 = 0`; generates the relative entropy distance
/// `d(x, y) = sum_i (x_i log(x_i / y_i) - x_i + y_i)`.
#[derive(Clone, Copy, Debug)]
pub struct RelativeEntropyKernel {
    dim: usize,
    /// Coordinates at or below this floor are treated as exact zeros when the
    /// distance is evaluated at boundary points, honoring `0 log 0 = 0`.
    /// Iterates produced by the entropy prox stay strictly positive on their
    /// own; the floor only guards user-supplied arguments.
    positivity_floor: f64,
}

impl RelativeEntropyKernel {
    pub fn new(dim: usize) -> Self {
        RelativeEntropyKernel {
            dim,
            positivity_floor: 1e-300,
        }
    }

    pub fn positivity_floor(&self) -> f64 {
        self.positivity_floor
    }
}

impl BregmanKernel for RelativeEntropyKernel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        let floor = self.positivity_floor;
        x.iter()
            .map(|&xi| if xi <= floor { 0.0 } else { xi * xi.ln() })
            .sum()
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|xi| 1.0 + xi.ln()).collect()
    }

    fn check_domain(&self, x: &[f64], interior: bool) -> Option<usize> {
        x.iter()
            .position(|&xi| if interior { xi <= 0.0 } else { xi < 0.0 })
    }

    fn strong_convexity_norm(&self) -> NormTag {
        NormTag::L1
    }

    fn bregman(&self, x: &[f64], y: &[f64]) -> f64 {
        let floor = self.positivity_floor;
        x.iter()
            .zip(y)
            .map(|(&xi, &yi)| {
                if xi <= floor {
                    yi - xi
                } else {
                    xi * (xi / yi.max(floor)).ln() - xi + yi
                }
            })
            .sum()
    }
}

/// Differentiable term `h` with a relative-smoothness constant `L`:
/// `h(x) - h(y) - <grad h(y), x - y> <= L d_p(x, y)` on the primal kernel's
/// domain.
pub trait SmoothTerm: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64]) -> Vec<f64>;
    fn rel_smoothness(&self) -> f64;

    /// Nominal flop counts for the work clock.
    fn grad_cost(&self) -> u64 {
        0
    }
    fn value_cost(&self) -> u64 {
        self.grad_cost() / 2
    }
}

/// `h(x) = (1/2)||Cx - b||^2` with a caller-supplied smoothness constant
/// (`max|C^T C|` against the entropy distance, `||C||_2^2` against the
/// Euclidean one).
#[derive(Clone)]
pub struct QuadraticLoss {
    c: Arc<DenseOperator>,
    b: Vec<f64>,
    rel_smoothness: f64,
}

impl QuadraticLoss {
    pub fn new(c: Arc<DenseOperator>, b: Vec<f64>, rel_smoothness: f64) -> Self {
        assert_eq!(b.len(), c.rows(), "offset length must match rows of C");
        assert!(rel_smoothness >= 0.0);
        QuadraticLoss {
            c,
            b,
            rel_smoothness,
        }
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.c.apply(x);
        for (ri, bi) in r.iter_mut().zip(&self.b) {
            *ri -= bi;
        }
        r
    }
}

impl SmoothTerm for QuadraticLoss {
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * norm2_sq(&self.residual(x))
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        self.c.adjoint(&self.residual(x))
    }

    fn rel_smoothness(&self) -> f64 {
        self.rel_smoothness
    }

    fn grad_cost(&self) -> u64 {
        2 * self.c.apply_cost()
    }
}
