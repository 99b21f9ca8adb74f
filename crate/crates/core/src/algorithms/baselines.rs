use crate::error::Result;
use crate::linops::{self, RealMatrix};

use super::{check_input, initialize, scale_rows, AlgorithmConfig, DeadSourceGuard, FactorPair, FitReport};

/// MU denominators are floored at this fraction of their largest entry.
pub const MU_DENOMINATOR_FLOOR: f64 = 1e-12;
/// Entries below this fraction of the largest one count as zero in the
/// HALS sparsity rate.
pub const SPARSITY_RELATIVE_CUTOFF: f64 = 1e-6;
const HALS_BISECTION_STEPS: usize = 16;

/// Alternating projected least squares.
pub fn als(y: &RealMatrix, cfg: &AlgorithmConfig) -> Result<FitReport> {
    check_input(y, cfg)?;
    let total = cfg.iterations();
    let FactorPair { mut a, mut s } = initialize(y, cfg.rank, cfg.seed)?;
    let mut guard = DeadSourceGuard::new(cfg.seed, cfg.rank);
    let mut trace = cfg.record_objective.then(|| Vec::with_capacity(total));
    for _ in 0..total {
        s = linops::nonneg_project(&linops::least_squares_solve_s(&a, y)?);
        guard.check_sources(&mut s)?;
        a = linops::nonneg_project(&linops::least_squares_solve_a(&s, y)?);
        guard.check_mixing(&mut a)?;
        guard.settle(&a, &s);
        if let Some(t) = trace.as_mut() {
            t.push(linops::half_squared_residual(y, &a, &s));
        }
    }
    let mut report = FitReport::new(FactorPair { a, s }, total);
    report.objective_trace = trace;
    Ok(report)
}

/// `num / max(den, floor * max(den))`, entrywise, times `x`.
fn multiplicative_step(x: &mut RealMatrix, num: &RealMatrix, den: &RealMatrix) {
    let floor = MU_DENOMINATOR_FLOOR * linops::max_abs(den);
    for ((v, &n), &d) in x.iter_mut().zip(num.iter()).zip(den.iter()) {
        let d = d.max(floor);
        if d > 0.0 {
            *v *= n / d;
        }
        // Entries decaying towards zero would otherwise turn subnormal and
        // slow every later product down by orders of magnitude.
        if *v < f64::MIN_POSITIVE {
            *v = 0.0;
        }
    }
}

/// Lee-Seung multiplicative updates for the squared Euclidean loss, run on
/// the non-negative part of `Y`.
pub fn multiplicative_update(y: &RealMatrix, cfg: &AlgorithmConfig) -> Result<FitReport> {
    check_input(y, cfg)?;
    let init = initialize(y, cfg.rank, cfg.seed)?;
    // Noisy data has negative entries, which would flip signs in the ratio.
    let data = linops::nonneg_project(y);
    let mut report = multiplicative_update_from(&data, init, cfg.iterations(), cfg.record_objective);
    report.iterations_run = cfg.iterations();
    Ok(report)
}

/// Multiplicative updates from a given starting pair.
pub(crate) fn multiplicative_update_from(
    y: &RealMatrix,
    init: FactorPair,
    iterations: usize,
    record_objective: bool,
) -> FitReport {
    let FactorPair { mut a, mut s } = init;
    let (m, r, n) = (a.nrows(), a.ncols(), s.ncols());
    let mut ys_t = RealMatrix::zeros(m, r);
    let mut ss_t = RealMatrix::zeros(r, r);
    let mut a_ss_t = RealMatrix::zeros(m, r);
    let mut at_y = RealMatrix::zeros(r, n);
    let mut at_a = RealMatrix::zeros(r, r);
    let mut at_a_s = RealMatrix::zeros(r, n);
    // Explicit transposes keep every product on the fast non-transposed path.
    let mut s_t = RealMatrix::zeros(n, r);
    let mut a_t = RealMatrix::zeros(r, m);
    let mut trace = record_objective.then(|| Vec::with_capacity(iterations));
    for _ in 0..iterations {
        s.transpose_to(&mut s_t);
        ys_t.gemm(1.0, y, &s_t, 0.0);
        ss_t.gemm(1.0, &s, &s_t, 0.0);
        a_ss_t.gemm(1.0, &a, &ss_t, 0.0);
        multiplicative_step(&mut a, &ys_t, &a_ss_t);

        a.transpose_to(&mut a_t);
        at_y.gemm(1.0, &a_t, y, 0.0);
        at_a.gemm(1.0, &a_t, &a, 0.0);
        at_a_s.gemm(1.0, &at_a, &s, 0.0);
        multiplicative_step(&mut s, &at_y, &at_a_s);
        if let Some(t) = trace.as_mut() {
            t.push(linops::half_squared_residual(y, &a, &s));
        }
    }
    let mut report = FitReport::new(FactorPair { a, s }, iterations);
    report.objective_trace = trace;
    report
}

/// Fraction of entries below `SPARSITY_RELATIVE_CUTOFF * max(S)`.
pub fn sparsity_rate(s: &RealMatrix) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let cutoff = SPARSITY_RELATIVE_CUTOFF * linops::max_abs(s);
    let small = s.iter().filter(|v| v.abs() <= cutoff).count();
    small as f64 / s.len() as f64
}

/// One pass of rank-one source updates with unit-norm mixing columns:
/// `s_i <- [(A^T Y)_i - sum_{j != i} (A^T A)_ij s_j - lambda]_+`.
fn hals_source_sweep(s: &mut RealMatrix, at_y: &RealMatrix, at_a: &RealMatrix, lambda: f64) {
    let r = s.nrows();
    for i in 0..r {
        let diag = at_a[(i, i)];
        if diag <= 0.0 {
            continue;
        }
        for t in 0..s.ncols() {
            let mut v = at_y[(i, t)];
            for j in 0..r {
                if j != i {
                    v -= at_a[(i, j)] * s[(j, t)];
                }
            }
            s[(i, t)] = ((v - lambda) / diag).max(0.0);
        }
    }
}

/// One pass of rank-one mixing updates:
/// `a_i <- [(Y S^T)_i - sum_{j != i} a_j (S S^T)_ji]_+ / (S S^T)_ii`.
fn hals_mixing_sweep(a: &mut RealMatrix, ys_t: &RealMatrix, ss_t: &RealMatrix) {
    let r = a.ncols();
    for i in 0..r {
        let diag = ss_t[(i, i)];
        if diag <= 0.0 {
            continue;
        }
        for row in 0..a.nrows() {
            let mut v = ys_t[(row, i)];
            for j in 0..r {
                if j != i {
                    v -= a[(row, j)] * ss_t[(j, i)];
                }
            }
            a[(row, i)] = (v / diag).max(0.0);
        }
    }
}

/// Sparse hierarchical ALS.
///
/// Columns of `A` and rows of `S` are updated one at a time in closed form.
/// With a positive `sparsity_target`, the l1 weight of each source sweep is
/// set by bisection on `[0, ||A^T Y||_inf]` so that the fraction of
/// near-zero source entries matches the target.
pub fn hals_sparse(y: &RealMatrix, cfg: &AlgorithmConfig) -> Result<FitReport> {
    check_input(y, cfg)?;
    let target = cfg.sparsity_target.unwrap_or(0.0);
    let total = cfg.iterations();
    let FactorPair { mut a, mut s } = initialize(y, cfg.rank, cfg.seed)?;
    let mut guard = DeadSourceGuard::new(cfg.seed, cfg.rank);
    let mut trace = cfg.record_objective.then(|| Vec::with_capacity(total));
    let mut lambda = 0.0;
    for _ in 0..total {
        let norms = linops::normalize_columns_mut(&mut a);
        scale_rows(&mut s, &norms);
        let at_y = a.tr_mul(y);
        let at_a = a.tr_mul(&a);
        lambda = if target > 0.0 {
            bisect_lambda(&s, &at_y, &at_a, target)
        } else {
            0.0
        };
        hals_source_sweep(&mut s, &at_y, &at_a, lambda);
        guard.check_sources(&mut s)?;

        let ys_t = y * s.transpose();
        let ss_t = &s * s.transpose();
        hals_mixing_sweep(&mut a, &ys_t, &ss_t);
        guard.check_mixing(&mut a)?;
        guard.settle(&a, &s);
        if let Some(t) = trace.as_mut() {
            t.push(linops::half_squared_residual(y, &a, &s));
        }
    }
    let mut report = FitReport::new(FactorPair { a, s }, total);
    report.objective_trace = trace;
    report.final_lambda = Some(vec![lambda; cfg.rank]);
    Ok(report)
}

fn bisect_lambda(s: &RealMatrix, at_y: &RealMatrix, at_a: &RealMatrix, target: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = linops::max_abs(at_y);
    let mut trial = s.clone();
    for _ in 0..HALS_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        trial.copy_from(s);
        hals_source_sweep(&mut trial, at_y, at_a, mid);
        if sparsity_rate(&trial) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
