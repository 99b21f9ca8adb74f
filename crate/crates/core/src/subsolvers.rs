//! Exact solvers for the two constrained sub-problems of the alternating
//! scheme:
//!
//! * `min_{S>=0} 1/2 ||Y - A S||^2 + sum_i lambda_i ||s_i||_1` (or the l0
//!   penalty in hard mode), and
//! * `min_{A>=0} 1/2 ||Y - A S||^2`.
//!
//! Both are instances of one quadratic problem over a matrix `X`
//! (`X = S`, or `X = A^T`) solved by FISTA with a monotone restart: when an
//! accelerated step would increase the objective, the momentum is reset and
//! a plain forward-backward step from the current iterate is taken instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{self, RealMatrix};
use crate::priors::{hard_threshold, prox_nonneg_l1};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Thresholding {
    #[default]
    Soft,
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubsolverOptions {
    pub max_inner_iterations: usize,
    pub rel_tol: f64,
    pub thresholding_mode: Thresholding,
}

impl Default for SubsolverOptions {
    fn default() -> Self {
        Self {
            max_inner_iterations: 80,
            rel_tol: 1e-6,
            thresholding_mode: Thresholding::Soft,
        }
    }
}

impl SubsolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_inner_iterations == 0 {
            return Err(Error::InvalidConfig("max_inner_iterations must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidConfig("rel_tol must be positive".into()));
        }
        Ok(())
    }
}

/// `1/2 tr(X^T G X) - tr(X^T B) + const + penalty(X)` with `X >= 0`.
struct Problem<'a> {
    cross: &'a RealMatrix,
    half_const: f64,
    lambda: &'a [f64],
    mode: Thresholding,
    inv_l: f64,
}

impl Problem<'_> {
    fn objective(&self, x: &RealMatrix, gx: &RealMatrix) -> f64 {
        let quad = 0.5 * x.dot(gx) - x.dot(self.cross) + self.half_const;
        let penalty: f64 = match self.mode {
            Thresholding::Soft => (0..x.nrows()).map(|i| self.lambda[i] * x.row(i).sum()).sum(),
            Thresholding::Hard => (0..x.nrows())
                .map(|i| self.lambda[i] * x.row(i).iter().filter(|v| **v != 0.0).count() as f64)
                .sum(),
        };
        quad + penalty
    }

    /// Forward-backward step from `r` (with `gr = G r`).
    fn step(&self, r: &RealMatrix, gr: &RealMatrix) -> RealMatrix {
        let mut out = RealMatrix::zeros(r.nrows(), r.ncols());
        for j in 0..r.ncols() {
            for i in 0..r.nrows() {
                let v = (r[(i, j)] - gr[(i, j)] * self.inv_l) + self.cross[(i, j)] * self.inv_l;
                let thr = self.lambda[i] * self.inv_l;
                out[(i, j)] = match self.mode {
                    Thresholding::Soft => prox_nonneg_l1(v, thr),
                    Thresholding::Hard => hard_threshold(v, thr).max(0.0),
                };
            }
        }
        out
    }
}

fn solve_quadratic(
    gram: &RealMatrix,
    cross: &RealMatrix,
    half_const: f64,
    lambda: &[f64],
    x0: &RealMatrix,
    lipschitz: f64,
    opts: &SubsolverOptions,
) -> Result<RealMatrix> {
    opts.validate()?;
    let mode = opts.thresholding_mode;
    let start = linops::nonneg_project(x0);
    if lipschitz == 0.0 {
        // Flat data term: only the penalty matters.
        let mut out = start;
        for (i, &l) in lambda.iter().enumerate() {
            if l > 0.0 {
                out.row_mut(i).fill(0.0);
            }
        }
        return Ok(out);
    }
    if !lipschitz.is_finite() || lipschitz < 0.0 {
        return Err(Error::NonFinite("Lipschitz constant"));
    }
    let problem = Problem {
        cross,
        half_const,
        lambda,
        mode,
        inv_l: 1.0 / lipschitz,
    };

    let mut s_cur = start;
    let mut gs_cur = gram * &s_cur;
    let mut f_cur = problem.objective(&s_cur, &gs_cur);
    let mut s_prev = s_cur.clone();
    let mut gs_prev = gs_cur.clone();
    let mut t = 1.0_f64;
    let mut momentum = 0.0_f64;

    for _ in 0..opts.max_inner_iterations {
        let (r, gr) = if momentum == 0.0 {
            (s_cur.clone(), gs_cur.clone())
        } else {
            (
                &s_cur + (&s_cur - &s_prev) * momentum,
                &gs_cur + (&gs_cur - &gs_prev) * momentum,
            )
        };
        let mut z = problem.step(&r, &gr);
        let mut gz = gram * &z;
        let mut fz = problem.objective(&z, &gz);
        if fz > f_cur && momentum != 0.0 {
            t = 1.0;
            z = problem.step(&s_cur, &gs_cur);
            gz = gram * &z;
            fz = problem.objective(&z, &gz);
        }
        if !fz.is_finite() {
            return Err(Error::NonFinite("sub-solver iterate"));
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        momentum = (t - 1.0) / t_next;
        t = t_next;

        let change = linops::relative_change(&z, &s_cur);
        s_prev = std::mem::replace(&mut s_cur, z);
        gs_prev = std::mem::replace(&mut gs_cur, gz);
        f_cur = fz;
        if mode == Thresholding::Soft && change <= opts.rel_tol {
            break;
        }
    }
    Ok(s_cur)
}

fn check_s_shapes(y: &RealMatrix, a: &RealMatrix, lambda: &[f64], s0: &RealMatrix) -> Result<()> {
    if a.nrows() != y.nrows() || s0.nrows() != a.ncols() || s0.ncols() != y.ncols() || lambda.len() != a.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "Y {}x{}, A {}x{}, S0 {}x{}, lambda {}",
            y.nrows(),
            y.ncols(),
            a.nrows(),
            a.ncols(),
            s0.nrows(),
            s0.ncols(),
            lambda.len()
        )));
    }
    if lambda.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::InvalidConfig("lambda entries must be non-negative".into()));
    }
    Ok(())
}

/// `||G||_s` for a Gram matrix; falls back to a dense eigensolver when the
/// power iteration stalls on a nearly degenerate top eigenvalue.
fn gram_lipschitz(gram: &RealMatrix) -> Result<f64> {
    match linops::spectral_norm(gram, linops::DEFAULT_SPECTRAL_TOL) {
        Err(Error::NonConvergence { .. }) => Ok(gram.clone().symmetric_eigenvalues().amax()),
        other => other,
    }
}

/// Sparse non-negative update of the sources for a fixed mixing matrix.
///
/// `lambda[i]` applies to every sample of source row `i`. `A` is expected
/// to have unit-norm columns. The step constant is `||A^T A||_s`.
pub fn fista_update_s(
    y: &RealMatrix,
    a: &RealMatrix,
    lambda: &[f64],
    s0: &RealMatrix,
    opts: &SubsolverOptions,
) -> Result<RealMatrix> {
    check_s_shapes(y, a, lambda, s0)?;
    let gram = a.tr_mul(a);
    let lipschitz = gram_lipschitz(&gram)?;
    let cross = a.tr_mul(y);
    solve_quadratic(&gram, &cross, 0.5 * y.norm_squared(), lambda, s0, lipschitz, opts)
}

/// [`fista_update_s`] with a caller-supplied step constant instead of the
/// computed `||A^T A||_s`. Convergence is only guaranteed when
/// `lipschitz >= ||A^T A||_s`.
pub fn fista_update_s_with_lipschitz(
    y: &RealMatrix,
    a: &RealMatrix,
    lambda: &[f64],
    s0: &RealMatrix,
    lipschitz: f64,
    opts: &SubsolverOptions,
) -> Result<RealMatrix> {
    check_s_shapes(y, a, lambda, s0)?;
    let gram = a.tr_mul(a);
    let cross = a.tr_mul(y);
    solve_quadratic(&gram, &cross, 0.5 * y.norm_squared(), lambda, s0, lipschitz, opts)
}

/// Non-negative least-squares update of the mixing matrix for fixed sources.
pub fn fista_update_a(y: &RealMatrix, s: &RealMatrix, a0: &RealMatrix, opts: &SubsolverOptions) -> Result<RealMatrix> {
    if s.ncols() != y.ncols() || a0.nrows() != y.nrows() || a0.ncols() != s.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "Y {}x{}, S {}x{}, A0 {}x{}",
            y.nrows(),
            y.ncols(),
            s.nrows(),
            s.ncols(),
            a0.nrows(),
            a0.ncols()
        )));
    }
    let gram = s * s.transpose();
    let lipschitz = gram_lipschitz(&gram)?;
    let cross = s * y.transpose();
    let lambda = vec![0.0; s.nrows()];
    let opts = SubsolverOptions {
        thresholding_mode: Thresholding::Soft,
        ..*opts
    };
    let at = solve_quadratic(
        &gram,
        &cross,
        0.5 * y.norm_squared(),
        &lambda,
        &a0.transpose(),
        lipschitz,
        &opts,
    )?;
    Ok(at.transpose())
}

/// Largest violation of the optimality conditions of the soft-mode
/// S problem, in units of `L = ||A^T A||_s`.
///
/// With `g = A^T (A S - Y)`: entries with `s > 0` need `g + lambda = 0`,
/// entries with `s = 0` need `g + lambda >= 0`.
pub fn kkt_violation(y: &RealMatrix, a: &RealMatrix, s: &RealMatrix, lambda: &[f64]) -> Result<f64> {
    let gram = a.tr_mul(a);
    let lipschitz = gram_lipschitz(&gram)?;
    let grad = &gram * s - a.tr_mul(y);
    let mut worst = 0.0_f64;
    for j in 0..s.ncols() {
        for i in 0..s.nrows() {
            let g = grad[(i, j)] + lambda[i];
            let v = if s[(i, j)] > 0.0 { g.abs() } else { (-g).max(0.0) };
            worst = worst.max(v);
        }
    }
    Ok(if lipschitz > 0.0 { worst / lipschitz } else { worst })
}

/// Soft-mode objective `1/2 ||Y - A S||^2 + sum_i lambda_i ||s_i||_1`.
pub fn sparse_objective(y: &RealMatrix, a: &RealMatrix, s: &RealMatrix, lambda: &[f64]) -> f64 {
    let l1: f64 = (0..s.nrows()).map(|i| lambda[i] * s.row(i).iter().map(|v| v.abs()).sum::<f64>()).sum();
    linops::half_squared_residual(y, a, s) + l1
}
