//! Dense matrix primitives shared by every solver.
//!
//! All matrices are `nalgebra::DMatrix<f64>`. Functions here are pure and
//! policy-free: they never reinitialize or rescale anything behind the
//! caller's back.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type RealMatrix = DMatrix<f64>;

/// Power-iteration cap for [`spectral_norm`].
pub const POWER_ITERATION_CAP: usize = 1000;
pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-9;

/// Fails with [`Error::NonFinite`] if any entry is NaN or infinite.
pub fn ensure_finite(m: &RealMatrix, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub fn nonneg_project(m: &RealMatrix) -> RealMatrix {
    m.map(|v| v.max(0.0))
}

pub fn nonneg_project_mut(m: &mut RealMatrix) {
    m.apply(|v| *v = v.max(0.0));
}

/// Options for the dense least-squares solves.
#[derive(Debug, Clone, Copy)]
pub struct LstsqOptions {
    /// Largest acceptable condition estimate before the ridge path is used.
    pub condition_cap: f64,
    /// When false, an ill-conditioned system is an error instead.
    pub ridge_fallback: bool,
}

impl Default for LstsqOptions {
    fn default() -> Self {
        Self {
            condition_cap: 1e12,
            ridge_fallback: true,
        }
    }
}

/// `argmin_S ||Y - A S||^2`, i.e. `(A^T A)^{-1} A^T Y`.
pub fn least_squares_solve_s(a: &RealMatrix, y: &RealMatrix) -> Result<RealMatrix> {
    least_squares_solve_s_with(a, y, &LstsqOptions::default())
}

pub fn least_squares_solve_s_with(
    a: &RealMatrix,
    y: &RealMatrix,
    opts: &LstsqOptions,
) -> Result<RealMatrix> {
    if a.nrows() != y.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "A is {}x{} but Y has {} rows",
            a.nrows(),
            a.ncols(),
            y.nrows()
        )));
    }
    let r = a.ncols();
    if r == 0 {
        return Err(Error::EmptyInput);
    }

    if a.nrows() >= r {
        let qr = a.clone().qr();
        let rmat = qr.r();
        let diag = rmat.diagonal().map(f64::abs);
        let (dmax, dmin) = (diag.max(), diag.min());
        let condition = if dmin > 0.0 { dmax / dmin } else { f64::INFINITY };
        if condition <= opts.condition_cap {
            let qty = qr.q().tr_mul(y);
            if let Some(s) = rmat.solve_upper_triangular(&qty) {
                return Ok(s);
            }
        }
        if !opts.ridge_fallback {
            return Err(Error::RankDeficient { condition });
        }
    } else if !opts.ridge_fallback {
        return Err(Error::RankDeficient {
            condition: f64::INFINITY,
        });
    }
    Ok(ridge_solve(a, y))
}

/// Ridge-stabilized normal equations, ridge `1e-12 * trace(A^T A) / r`.
fn ridge_solve(a: &RealMatrix, y: &RealMatrix) -> RealMatrix {
    let r = a.ncols();
    let mut gram = a.tr_mul(a);
    let trace = gram.trace();
    let rhs = a.tr_mul(y);
    if trace <= 0.0 {
        return RealMatrix::zeros(r, y.ncols());
    }
    let ridge = 1e-12 * trace / r as f64;
    for i in 0..r {
        gram[(i, i)] += ridge;
    }
    match gram.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => gram
            .svd(true, true)
            .solve(&rhs, ridge)
            .unwrap_or_else(|_| RealMatrix::zeros(r, y.ncols())),
    }
}

/// `argmin_A ||Y - A S||^2`, i.e. `Y S^T (S S^T)^{-1}` (unprojected).
pub fn least_squares_solve_a(s: &RealMatrix, y: &RealMatrix) -> Result<RealMatrix> {
    least_squares_solve_a_with(s, y, &LstsqOptions::default())
}

pub fn least_squares_solve_a_with(
    s: &RealMatrix,
    y: &RealMatrix,
    opts: &LstsqOptions,
) -> Result<RealMatrix> {
    if s.ncols() != y.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "S is {}x{} but Y has {} columns",
            s.nrows(),
            s.ncols(),
            y.ncols()
        )));
    }
    least_squares_solve_s_with(&s.transpose(), &y.transpose(), opts).map(|at| at.transpose())
}

/// Scales each column of `a` to unit l2 norm.
///
/// Returns the normalized matrix and the original column norms. Zero columns
/// stay zero and get scale 0; the caller decides what to do with them.
pub fn normalize_columns(a: &RealMatrix) -> (RealMatrix, Vec<f64>) {
    let mut out = a.clone();
    let scales = normalize_columns_mut(&mut out);
    (out, scales)
}

pub fn normalize_columns_mut(a: &mut RealMatrix) -> Vec<f64> {
    let mut scales = Vec::with_capacity(a.ncols());
    for mut col in a.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
        scales.push(norm);
    }
    scales
}

/// Largest singular value of `m` by power iteration.
///
/// Symmetric inputs are iterated directly; anything else goes through
/// `M^T M`. The estimate is `||M v|| / ||v||`, which is the square root of a
/// Rayleigh quotient of `M^T M` and converges quadratically in the
/// eigenvector error.
pub fn spectral_norm(m: &RealMatrix, tol: f64) -> Result<f64> {
    let n = m.ncols();
    if n == 0 || m.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    // Iterating on M^T M (or M^2 when symmetric) keeps eigenvalues of
    // opposite sign from cancelling, and ||M v|| is then a Rayleigh quotient.
    let symmetric = m.is_square() && is_symmetric(m);

    // Low-discrepancy start vector, never orthogonal to a Perron vector.
    let mut v = DVector::from_fn(n, |j, _| 1.0 + 0.5 * ((j as f64 + 1.0) * 0.618_033_988_749_894_9).fract());
    v /= v.norm();
    let mut estimate = 0.0;
    let mut last_step = f64::INFINITY;
    for _ in 0..POWER_ITERATION_CAP {
        let mv = m * &v;
        let next_estimate = mv.norm() / v.norm();
        if next_estimate == 0.0 {
            return Ok(0.0);
        }
        if !next_estimate.is_finite() {
            return Err(Error::NonFinite("spectral norm iterate"));
        }
        let step = (next_estimate - estimate).abs();
        // Geometric tail bound: remaining error ~ step * rate / (1 - rate).
        let rate = (step / last_step).min(1.0);
        let tail = if last_step.is_finite() && rate < 1.0 { step * rate / (1.0 - rate) } else { f64::INFINITY };
        estimate = next_estimate;
        // A nearly degenerate top eigenvalue makes the rate approach 1 while
        // the estimate has long settled: stop once even the full iteration
        // budget could not move it by `tol`.
        let budget_drift = step * POWER_ITERATION_CAP as f64;
        if step <= f64::EPSILON * estimate || tail <= tol * estimate || budget_drift <= tol * estimate {
            return Ok(estimate);
        }
        last_step = step;
        v = if symmetric { m * mv } else { m.tr_mul(&mv) };
        let norm = v.norm();
        v /= norm;
    }
    Err(Error::NonConvergence {
        iterations: POWER_ITERATION_CAP,
    })
}

fn is_symmetric(m: &RealMatrix) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..i).all(|j| m[(i, j)] == m[(j, i)]))
}

/// `||a - b||_F / ||b||_F`, with the absolute change when `b` is zero.
pub fn relative_change(a: &RealMatrix, b: &RealMatrix) -> f64 {
    let diff = (a - b).norm();
    let base = b.norm();
    if base > 0.0 {
        diff / base
    } else {
        diff
    }
}

/// `1/2 ||Y - A S||_F^2`.
pub fn half_squared_residual(y: &RealMatrix, a: &RealMatrix, s: &RealMatrix) -> f64 {
    0.5 * (y - a * s).norm_squared()
}

pub fn max_abs(m: &RealMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
