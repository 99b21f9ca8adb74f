use crate::error::{Error, Result};
use crate::linops::{self, RealMatrix};
use crate::priors::{self, ThresholdSchedule};
use crate::subsolvers::{self, SubsolverOptions, Thresholding};

use super::{check_input, initialize, scale_rows, AlgorithmConfig, DeadSourceGuard, FactorPair, FitReport};

/// Inner-iteration cap of the oracle's single sparse solve.
pub const ORACLE_INNER_ITERATIONS: usize = 5000;
const ORACLE_REL_TOL: f64 = 1e-9;
/// Noise re-estimation rounds of the oracle.
pub const ORACLE_NOISE_ROUNDS: usize = 10;
const ORACLE_NOISE_TOL: f64 = 1e-3;

/// Hard-thresholded least squares (naive nGMCA).
///
/// Each iteration normalizes `A`, computes the unconstrained least-squares
/// sources, keeps the entries above a threshold that lets the active set
/// grow linearly with the iteration count, projects, and updates `A` by
/// projected least squares.
pub fn ngmca_naive(y: &RealMatrix, cfg: &AlgorithmConfig) -> Result<FitReport> {
    check_input(y, cfg)?;
    let total = cfg.iterations();
    let FactorPair { mut a, mut s } = initialize(y, cfg.rank, cfg.seed)?;
    let mut guard = DeadSourceGuard::new(cfg.seed, cfg.rank);
    let mut trace = cfg.record_objective.then(|| Vec::with_capacity(total));

    for k in 1..=total {
        linops::normalize_columns_mut(&mut a);
        let s_all = linops::least_squares_solve_s(&a, y)?;
        let thresholds = priors::naive_threshold_select(&s_all, k, total, cfg.tau_final);
        s = s_all;
        for (i, &lambda) in thresholds.iter().enumerate() {
            for v in s.row_mut(i).iter_mut() {
                *v = priors::hard_threshold(*v, lambda).max(0.0);
            }
        }
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

/// Proximal nGMCA (soft or hard thresholding per `cfg.subsolver`).
///
/// Both sub-problems are solved by accelerated forward-backward splitting.
/// The threshold starts at `||A0^T (A0 S0 - Y)||_inf`, decreases linearly to
/// `tau_final * sigma_i` over the first `decrease_fraction` of the
/// iterations, where `sigma_i` is the MAD noise estimate of row `i` of the
/// gradient, and is then held for the refinement phase.
pub fn ngmca(y: &RealMatrix, cfg: &AlgorithmConfig) -> Result<FitReport> {
    check_input(y, cfg)?;
    let total = cfg.iterations();
    let opts = cfg.subsolver;
    let mut pair = initialize(y, cfg.rank, cfg.seed)?;
    pair.normalize();
    let lambda0 = priors::ngmca_lambda_init(&pair.a, &pair.s, y);
    let mut state = NgmcaState {
        pair,
        schedule: ThresholdSchedule::new(lambda0, cfg.rank, total, cfg.decrease_fraction, cfg.tau_final),
        guard: DeadSourceGuard::new(cfg.seed, cfg.rank),
        trace: cfg.record_objective.then(|| Vec::with_capacity(total)),
    };
    for _ in 0..total {
        state.normalize()?;
        state.step(y, &opts)?;
    }
    let mut iterations_run = total;
    state.normalize()?;

    // Soft mode: keep refining at the final thresholds until one more
    // alternation leaves the pair in place.
    if opts.thresholding_mode == Thresholding::Soft && cfg.stability_tol > 0.0 {
        for _ in 0..cfg.max_refinement_extension {
            let before = state.pair.clone();
            state.step(y, &opts)?;
            state.normalize()?;
            iterations_run += 1;
            let moved = linops::relative_change(&state.pair.a, &before.a)
                .max(linops::relative_change(&state.pair.s, &before.s));
            if moved <= cfg.stability_tol {
                break;
            }
        }
    }
    let NgmcaState {
        mut pair,
        schedule,
        mut guard,
        trace,
    } = state;
    guard.check_sources(&mut pair.s)?;
    let mut report = FitReport::new(pair, iterations_run);
    report.objective_trace = trace;
    report.final_lambda = Some(schedule.per_source_lambda.clone());
    Ok(report)
}

struct NgmcaState {
    pair: FactorPair,
    schedule: ThresholdSchedule,
    guard: DeadSourceGuard,
    trace: Option<Vec<f64>>,
}

impl NgmcaState {
    /// Unit-norm mixing columns, product unchanged.
    fn normalize(&mut self) -> Result<()> {
        self.pair.normalize();
        if self.guard.check_mixing(&mut self.pair.a)? {
            self.pair.normalize();
        }
        Ok(())
    }

    /// One outer iteration from a normalized pair. Past the decrease phase
    /// the thresholds stay where they are.
    fn step(&mut self, y: &RealMatrix, opts: &SubsolverOptions) -> Result<()> {
        let FactorPair { a, s } = &mut self.pair;
        let lambda = if self.schedule.outer_iteration >= self.schedule.decrease_iterations() {
            self.schedule.advance(&[]).to_vec()
        } else {
            let sigmas = gradient_noise_sigmas(y, a, s);
            self.schedule.advance(&sigmas).to_vec()
        };
        *s = subsolvers::fista_update_s(y, a, &lambda, s, opts)?;
        // Sources may vanish while the threshold is high; only the
        // refinement phase has to keep every source alive.
        if self.schedule.in_refinement() {
            self.guard.check_sources(s)?;
        }
        *a = subsolvers::fista_update_a(y, s, a, opts)?;
        self.guard.check_mixing(a)?;
        self.guard.settle(a, s);
        if let Some(t) = self.trace.as_mut() {
            t.push(linops::half_squared_residual(y, a, s));
        }
        Ok(())
    }
}

/// Per-row MAD noise level of the gradient `A^T (A S - Y)`.
pub(crate) fn gradient_noise_sigmas(y: &RealMatrix, a: &RealMatrix, s: &RealMatrix) -> Vec<f64> {
    let grad = a.tr_mul(&(a * s - y));
    priors::row_mad_sigmas(&grad)
}

/// Relative moves of one extra alternation at fixed thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityMove {
    pub mixing: f64,
    pub sources: f64,
}

impl StabilityMove {
    pub fn max(&self) -> f64 {
        self.mixing.max(self.sources)
    }
}

/// Re-solves both sub-problems once from `pair` with thresholds `lambda`
/// and reports how far each factor moved (relative Frobenius norm, in the
/// unit-column gauge of `A`).
pub fn stability_move(
    y: &RealMatrix,
    pair: &FactorPair,
    lambda: &[f64],
    opts: &SubsolverOptions,
) -> Result<StabilityMove> {
    let mut start = pair.clone();
    start.normalize();
    let s = subsolvers::fista_update_s(y, &start.a, lambda, &start.s, opts)?;
    let a = subsolvers::fista_update_a(y, &s, &start.a, opts)?;
    let mut next = FactorPair { a, s };
    next.normalize();
    Ok(StabilityMove {
        mixing: linops::relative_change(&next.a, &start.a),
        sources: linops::relative_change(&next.s, &start.s),
    })
}

/// Sparse non-negative sources for a known mixing matrix, with
/// `lambda_i = tau_final * sigma_i` and `sigma_i` the MAD noise level of
/// row `i` of the gradient.
///
/// The noise level is first read at `S = 0`, then re-estimated at the
/// solution (up to `ORACLE_NOISE_ROUNDS` times) until it settles.
pub fn oracle_solve(y: &RealMatrix, a_ref: &RealMatrix, tau_final: f64) -> Result<RealMatrix> {
    oracle_solve_with_thresholds(y, a_ref, tau_final).map(|(s, _)| s)
}

/// [`oracle_solve`], also returning the final thresholds (for unit-norm
/// columns of `A_ref`).
pub fn oracle_solve_with_thresholds(y: &RealMatrix, a_ref: &RealMatrix, tau_final: f64) -> Result<(RealMatrix, Vec<f64>)> {
    linops::ensure_finite(y, "Y")?;
    linops::ensure_finite(a_ref, "A_ref")?;
    if a_ref.nrows() != y.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "A_ref has {} rows, Y has {}",
            a_ref.nrows(),
            y.nrows()
        )));
    }
    if !(tau_final >= 0.0) {
        return Err(Error::InvalidConfig(format!("tau_final={tau_final} must be non-negative")));
    }
    let (a, norms) = linops::normalize_columns(a_ref);
    let zero = RealMatrix::zeros(a.ncols(), y.ncols());
    let lambda: Vec<f64> = gradient_noise_sigmas(y, &a, &zero).iter().map(|s| tau_final * s).collect();
    let opts = SubsolverOptions {
        max_inner_iterations: ORACLE_INNER_ITERATIONS,
        rel_tol: ORACLE_REL_TOL,
        thresholding_mode: Thresholding::Soft,
    };
    let mut lambda = lambda;
    let mut s = subsolvers::fista_update_s(y, &a, &lambda, &zero, &opts)?;
    // The gradient at S = 0 still carries the sources; re-estimate the
    // noise level at the solution until the thresholds settle.
    for _ in 0..ORACLE_NOISE_ROUNDS {
        let next: Vec<f64> = gradient_noise_sigmas(y, &a, &s).iter().map(|s| tau_final * s).collect();
        let settled = next
            .iter()
            .zip(&lambda)
            .all(|(n, l)| (n - l).abs() <= ORACLE_NOISE_TOL * l.max(f64::MIN_POSITIVE));
        lambda = next;
        s = subsolvers::fista_update_s(y, &a, &lambda, &s, &opts)?;
        if settled {
            break;
        }
    }
    // Back to the gauge of A_ref.
    let inverse: Vec<f64> = norms.iter().map(|&n| if n > 0.0 { 1.0 / n } else { 0.0 }).collect();
    scale_rows(&mut s, &inverse);
    Ok((s, lambda))
}
