//! Matrix-free linear operators and the operator norms used in stepsize
//! conditions.
//!
//! Operators expose forward (`apply`) and adjoint application only; nothing in
//! the solvers ever asks for an explicit matrix. The two concrete operators are
//! a dense row-major matrix and the first-order difference operator, which is
//! never materialized.

use thiserror::Error;

use crate::vec::{dot, norm2};

/// Which norm a Bregman kernel is 1-strongly convex against. Each kernel
/// declares exactly one tag; the tag selects the matching operator norm
/// (`norm_1_2` for `L1`, the spectral norm for `Euclidean`) in stepsize
/// conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormTag {
    Euclidean,
    L1,
}

#[derive(Debug, Error, PartialEq)]
pub enum OperatorError {
    #[error("dimension mismatch: expected input of length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error(
        "power iteration did not converge within {max_iters} iterations \
         (best estimate {best:.17})"
    )]
    PowerIterationStalled { max_iters: usize, best: f64 },
}

/// A linear map `A: R^cols -> R^rows` given by its forward and adjoint action.
///
/// Implementations must be immutable after construction; `apply` and `adjoint`
/// take `&self` and may run concurrently from several solver runs.
pub trait LinearOperator: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;

    /// `A x`. The input length must equal `cols`; use [`op_apply`] for a
    /// checked entry point.
    fn apply(&self, x: &[f64]) -> Vec<f64>;

    /// `A^T z`. The input length must equal `rows`; use [`op_adjoint`] for a
    /// checked entry point.
    fn adjoint(&self, z: &[f64]) -> Vec<f64>;

    /// Nominal flop count of one forward or adjoint application, consumed by
    /// the deterministic work clock in the solver driver.
    fn apply_cost(&self) -> u64 {
        2 * self.rows() as u64 * self.cols() as u64
    }
}

/// Checked forward application `A x`.
pub fn op_apply(op: &dyn LinearOperator, x: &[f64]) -> Result<Vec<f64>, OperatorError> {
    if x.len() != op.cols() {
        return Err(OperatorError::DimensionMismatch {
            expected: op.cols(),
            actual: x.len(),
        });
    }
    Ok(op.apply(x))
}

/// Checked adjoint application `A^T z`.
pub fn op_adjoint(op: &dyn LinearOperator, z: &[f64]) -> Result<Vec<f64>, OperatorError> {
    if z.len() != op.rows() {
        return Err(OperatorError::DimensionMismatch {
            expected: op.rows(),
            actual: z.len(),
        });
    }
    Ok(op.adjoint(z))
}

/// Dense operator backed by a row-major array.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl DenseOperator {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Self {
        assert_eq!(entries.len(), rows * cols, "row-major entry count");
        DenseOperator {
            rows,
            cols,
            entries,
        }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut entries = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            entries.extend_from_slice(row);
        }
        DenseOperator::new(r, c, entries)
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        DenseOperator::new(n, n, entries)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseOperator::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }
}

impl LinearOperator for DenseOperator {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    fn adjoint(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, zi) in z.iter().enumerate() {
            for (o, aij) in out.iter_mut().zip(self.row(i)) {
                *o += aij * zi;
            }
        }
        out
    }
}

/// First-order difference operator: `(A x)_i = x_{i+1} - x_i`, shape
/// `(n-1) x n`. Applied directly, never materialized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DifferenceOperator {
    n: usize,
}

impl DifferenceOperator {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "difference operator needs input dimension >= 2");
        DifferenceOperator { n }
    }
}

impl LinearOperator for DifferenceOperator {
    fn rows(&self) -> usize {
        self.n - 1
    }

    fn cols(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        x.windows(2).map(|w| w[1] - w[0]).collect()
    }

    fn adjoint(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.n - 1);
        let mut out = vec![0.0; self.n];
        for (i, zi) in z.iter().enumerate() {
            out[i] -= zi;
            out[i + 1] += zi;
        }
        out
    }

    fn apply_cost(&self) -> u64 {
        2 * self.n as u64
    }
}

/// `||A||_{1,2} = sup_{v != 0} ||A v||_2 / ||v||_1`, the largest Euclidean
/// column norm. Columns are materialized by applying the operator to standard
/// basis vectors, a one-time setup cost.
pub fn norm_1_2(op: &dyn LinearOperator) -> f64 {
    let mut e = vec![0.0; op.cols()];
    let mut best = 0.0f64;
    for j in 0..op.cols() {
        e[j] = 1.0;
        best = best.max(norm2(&op.apply(&e)));
        e[j] = 0.0;
    }
    best
}

/// Spectral-norm estimate from power iteration, always a lower bound on
/// `||A||_2`, together with the safety-inflated value used in stepsize checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralEstimate {
    /// Rayleigh-quotient estimate; a lower bound on the true norm.
    pub value: f64,
    /// `(1 + tol) * value`. An underestimated norm would admit stepsizes that
    /// violate the solver conditions, so checks use this inflated value.
    pub inflated: f64,
}

// splitmix64; fixed seed so the power-iteration start vector is deterministic.
fn deterministic_start(n: usize) -> Vec<f64> {
    let mut s: u64 = 0x9E37_79B9_7F4A_7C15;
    (0..n)
        .map(|_| {
            s = s.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = s;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

/// Power iteration on `A^T A` for the spectral norm `||A||_2`.
///
/// Stops once the Rayleigh estimate changes by less than `tol` relatively
/// between sweeps; returns an error carrying the best estimate when
/// `max_iters` sweeps are exhausted first.
pub fn norm_spectral(
    op: &dyn LinearOperator,
    tol: f64,
    max_iters: usize,
) -> Result<SpectralEstimate, OperatorError> {
    assert!(tol > 0.0, "tolerance must be positive");
    let mut v = deterministic_start(op.cols());
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut prev = f64::NAN;
    for _ in 0..max_iters {
        let w = op.adjoint(&op.apply(&v));
        let rayleigh = dot(&v, &w).max(0.0);
        let est = rayleigh.sqrt();
        let nw = norm2(&w);
        if nw == 0.0 {
            // A^T A v = 0 with ||v|| = 1: the operator annihilates v; for a
            // zero operator the norm is zero.
            return Ok(SpectralEstimate {
                value: 0.0,
                inflated: 0.0,
            });
        }
        v = w;
        v.iter_mut().for_each(|x| *x /= nw);
        if prev.is_finite() && (est - prev).abs() <= tol * est {
            return Ok(SpectralEstimate {
                value: est,
                inflated: est * (1.0 + tol),
            });
        }
        prev = est;
    }
    Err(OperatorError::PowerIterationStalled {
        max_iters,
        best: prev,
    })
}

/// `L_1 = max_{i,j} |(C^T C)_{ij}|`, the Lipschitz constant of
/// `grad (1/2)||Cx - b||^2` with respect to the l1 norm.
///
/// Works column pair by column pair so the Gram matrix is never stored.
pub fn lipschitz_l1(c: &DenseOperator) -> f64 {
    let (m, n) = (c.rows(), c.cols());
    // Column-major copy: pairwise dots then walk contiguous memory.
    let mut cols = vec![0.0; m * n];
    for i in 0..m {
        for (j, v) in c.row(i).iter().enumerate() {
            cols[j * m + i] = *v;
        }
    }
    let col = |j: usize| &cols[j * m..(j + 1) * m];
    let mut best = 0.0f64;
    for i in 0..n {
        for j in i..n {
            best = best.max(dot(col(i), col(j)).abs());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn difference_apply_matches_definition() {
        let a = DifferenceOperator::new(3);
        assert_eq!(op_apply(&a, &[1.0, 2.0, 4.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn dense_identity_apply() {
        let a = DenseOperator::identity(3);
        assert_eq!(
            op_apply(&a, &[5.0, -1.0, 2.0]).unwrap(),
            vec![5.0, -1.0, 2.0]
        );
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn dense_apply_matches_explicit_loop() {
        let a = DenseOperator::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let x = [1.0, 1.0];
        // oracle: explicit row-by-row accumulation
        let mut expected = vec![0.0; 2];
        for i in 0..2 {
            for j in 0..2 {
                expected[i] += a.entry(i, j) * x[j];
            }
        }
        assert_eq!(expected, vec![3.0, 7.0]);
        assert_eq!(op_apply(&a, &x).unwrap(), expected);
    }

    #[test]
    fn apply_rejects_wrong_length() {
        let a = DifferenceOperator::new(4);
        let err = op_apply(&a, &[1.0, 2.0]).unwrap_err();
        assert_eq!(
            err,
            OperatorError::DimensionMismatch {
                expected: 4,
                actual: 2
            }
        );
        let err = op_adjoint(&a, &[1.0, 2.0, 3.0, 4.0]).unwrap_err();
        assert_eq!(
            err,
            OperatorError::DimensionMismatch {
                expected: 3,
                actual: 4
            }
        );
    }

    #[test]
    fn adjoint_consistency_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dense = DenseOperator::new(5, 8, random_vec(&mut rng, 40));
        let ops: [&dyn LinearOperator; 2] = [&dense, &DifferenceOperator::new(9)];
        for op in ops {
            for _ in 0..100 {
                let x = random_vec(&mut rng, op.cols());
                let z = random_vec(&mut rng, op.rows());
                let lhs = dot(&z, &op.apply(&x));
                let rhs = dot(&op.adjoint(&z), &x);
                assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
            }
        }
    }

    #[test]
    fn apply_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let op = DenseOperator::new(4, 6, random_vec(&mut rng, 24));
        let x = random_vec(&mut rng, 6);
        let y = random_vec(&mut rng, 6);
        let (alpha, beta) = (0.3, -1.7);
        let combo: Vec<f64> = x
            .iter()
            .zip(&y)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        let lhs = op.apply(&combo);
        let ax = op.apply(&x);
        let ay = op.apply(&y);
        for i in 0..4 {
            assert!((lhs[i] - (alpha * ax[i] + beta * ay[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn norm_1_2_difference_is_sqrt2_from_three() {
        for n in [3usize, 10, 500] {
            let v = norm_1_2(&DifferenceOperator::new(n));
            assert_eq!(v, 2.0f64.sqrt(), "n = {n}");
        }
        // n = 2 is the 1 x 2 row (-1, 1): both columns have unit norm.
        assert_eq!(norm_1_2(&DifferenceOperator::new(2)), 1.0);
    }

    #[test]
    fn norm_1_2_identity_and_diag() {
        assert_eq!(norm_1_2(&DenseOperator::identity(3)), 1.0);
        let a = DenseOperator::from_rows(&[&[1.0, 0.0], &[0.0, 2.0]]);
        // oracle: enumerate both columns, take the larger norm
        let cols = [norm2(&a.apply(&[1.0, 0.0])), norm2(&a.apply(&[0.0, 1.0]))];
        assert_eq!(cols, [1.0, 2.0]);
        assert_eq!(norm_1_2(&a), 2.0);
    }

    #[test]
    fn spectral_norm_identity() {
        let est = norm_spectral(&DenseOperator::identity(5), 1e-10, 1000).unwrap();
        assert!((est.value - 1.0).abs() < 1e-12);
        assert!(est.inflated >= est.value);
    }

    #[test]
    fn spectral_norm_diagonal() {
        let a = DenseOperator::from_rows(&[&[3.0, 0.0], &[0.0, 1.0]]);
        // oracle: singular values of a diagonal matrix are |diagonal entries|
        let est = norm_spectral(&a, 1e-12, 10_000).unwrap();
        assert!((est.value - 3.0).abs() < 1e-9);
    }

    #[test]
    fn spectral_norm_difference_large_n() {
        let est = norm_spectral(&DifferenceOperator::new(10_000), 1e-9, 2_000_000).unwrap();
        assert!(
            est.value > 1.9999 && est.value <= 2.0,
            "estimate {}",
            est.value
        );
    }

    #[test]
    fn spectral_norm_is_upper_bounded_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let op = DenseOperator::new(6, 9, random_vec(&mut rng, 54));
        let tol = 1e-8;
        let est = norm_spectral(&op, tol, 100_000).unwrap();
        for _ in 0..50 {
            let x = random_vec(&mut rng, 9);
            assert!(norm2(&op.apply(&x)) <= est.value * (1.0 + tol) * norm2(&x) + 1e-12);
        }
    }

    #[test]
    fn spectral_norm_reports_best_estimate_on_stall() {
        let a = DenseOperator::from_rows(&[&[3.0, 0.0], &[0.0, 1.0]]);
        let err = norm_spectral(&a, 1e-15, 2).unwrap_err();
        match err {
            OperatorError::PowerIterationStalled { max_iters, best } => {
                assert_eq!(max_iters, 2);
                assert!(best > 0.0 && best <= 3.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn lipschitz_l1_examples() {
        assert_eq!(lipschitz_l1(&DenseOperator::identity(2)), 1.0);
        // C^T C = diag(4, 1): entries enumerate to a max of 4
        let c = DenseOperator::from_rows(&[&[2.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(lipschitz_l1(&c), 4.0);
        // C^T C = all-ones 2 x 2
        let c = DenseOperator::from_rows(&[&[1.0, 1.0]]);
        assert_eq!(lipschitz_l1(&c), 1.0);
    }
}
