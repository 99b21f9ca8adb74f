//! Thresholding operators, noise-scale estimation and the decreasing
//! threshold schedules of the nGMCA variants.

use crate::error::{Error, Result};
use crate::linops::RealMatrix;

/// Gaussian consistency constant: `MAD / 0.6745` estimates a standard deviation.
pub const MAD_GAUSSIAN_SCALE: f64 = 0.6745;

#[inline]
pub fn soft_threshold(x: f64, lambda: f64) -> f64 {
    let shrunk = (x.abs() - lambda).max(0.0);
    if x < 0.0 {
        -shrunk
    } else {
        shrunk
    }
}

/// Keep-or-kill: zero when `|x| < lambda`, unchanged otherwise (ties kept).
#[inline]
pub fn hard_threshold(x: f64, lambda: f64) -> f64 {
    if x.abs() < lambda {
        0.0
    } else {
        x
    }
}

/// Proximal operator of `lambda * |.| + i+`: `[Soft_lambda(x)]_+`.
#[inline]
pub fn prox_nonneg_l1(x: f64, lambda: f64) -> f64 {
    soft_threshold(x, lambda).max(0.0)
}

pub fn soft_threshold_matrix(m: &RealMatrix, lambda: f64) -> RealMatrix {
    m.map(|v| soft_threshold(v, lambda))
}

pub fn hard_threshold_matrix(m: &RealMatrix, lambda: f64) -> RealMatrix {
    m.map(|v| hard_threshold(v, lambda))
}

pub fn prox_nonneg_l1_matrix(m: &RealMatrix, lambda: f64) -> RealMatrix {
    m.map(|v| prox_nonneg_l1(v, lambda))
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (_, upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

pub fn median(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(median_in_place(&mut v.to_vec()))
}

/// Median absolute deviation scaled to a Gaussian standard deviation.
pub fn mad_sigma(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut work = v.to_vec();
    let center = median_in_place(&mut work);
    for (w, x) in work.iter_mut().zip(v) {
        *w = (x - center).abs();
    }
    Ok(median_in_place(&mut work) / MAD_GAUSSIAN_SCALE)
}

/// `mad_sigma` of every row of `m`.
pub fn row_mad_sigmas(m: &RealMatrix) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| {
            let row: Vec<f64> = m.row(i).iter().copied().collect();
            mad_sigma(&row).unwrap_or(0.0)
        })
        .collect()
}

/// Per-source thresholds for the naive variant at outer step `k` of `total`.
///
/// The floor is `tau_final * mad_sigma(row)`. Among the positive entries of
/// the row above that floor (the only ones that survive the projection after
/// hard-thresholding), the threshold keeps the `ceil(k / total * n_cand)`
/// largest, so the active set grows linearly with `k` and the last step
/// lands exactly on the floor.
pub fn naive_threshold_select(s_all: &RealMatrix, k: usize, total: usize, tau_final: f64) -> Vec<f64> {
    assert!(total >= 1 && (1..=total).contains(&k), "step {k} outside 1..={total}");
    (0..s_all.nrows())
        .map(|i| {
            let row: Vec<f64> = s_all.row(i).iter().copied().collect();
            let floor = tau_final * mad_sigma(&row).unwrap_or(0.0);
            let mut candidates: Vec<f64> = row.into_iter().filter(|&v| v > floor).collect();
            let n_cand = candidates.len();
            let keep = ((k as f64 / total as f64) * n_cand as f64).ceil() as usize;
            if n_cand == 0 || keep >= n_cand {
                return floor;
            }
            candidates.sort_unstable_by(|a, b| b.total_cmp(a));
            candidates[keep.max(1) - 1].max(floor)
        })
        .collect()
}

/// `||A0^T (A0 S0 - Y)||_inf`, the starting threshold of nGMCA.
pub fn ngmca_lambda_init(a0: &RealMatrix, s0: &RealMatrix, y: &RealMatrix) -> f64 {
    let grad = a0.tr_mul(&(a0 * s0 - y));
    crate::linops::max_abs(&grad)
}

/// Linear interpolation from `lambda0` (at k = 0) to `lambda_final` (at k = total).
pub fn ngmca_lambda_next(lambda0: f64, lambda_final: &[f64], k: usize, total: usize) -> Vec<f64> {
    assert!(total >= 1 && k <= total, "step {k} outside 0..={total}");
    if k == total {
        return lambda_final.to_vec();
    }
    let frac = k as f64 / total as f64;
    lambda_final
        .iter()
        .map(|&target| lambda0 + frac * (target - lambda0))
        .collect()
}

/// Regularization state of one nGMCA run.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSchedule {
    pub per_source_lambda: Vec<f64>,
    pub outer_iteration: usize,
    pub total_iterations: usize,
    pub tau_final: f64,
    lambda0: f64,
    /// Number of iterations over which lambda decreases; held constant afterwards.
    decrease_iterations: usize,
}

impl ThresholdSchedule {
    pub fn new(lambda0: f64, rank: usize, total_iterations: usize, decrease_fraction: f64, tau_final: f64) -> Self {
        let decrease_iterations = ((total_iterations as f64 * decrease_fraction).round() as usize)
            .clamp(1, total_iterations.max(1));
        Self {
            per_source_lambda: vec![lambda0; rank],
            outer_iteration: 0,
            total_iterations,
            tau_final,
            lambda0,
            decrease_iterations,
        }
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn decrease_iterations(&self) -> usize {
        self.decrease_iterations
    }

    pub fn in_refinement(&self) -> bool {
        self.outer_iteration > self.decrease_iterations
    }

    /// Moves to the next outer iteration. `noise_sigmas` are the current
    /// per-source noise estimates; they only matter while lambda is still
    /// decreasing; in the refinement phase the last value is held.
    pub fn advance(&mut self, noise_sigmas: &[f64]) -> &[f64] {
        self.outer_iteration += 1;
        if self.outer_iteration <= self.decrease_iterations {
            let finals: Vec<f64> = noise_sigmas.iter().map(|s| self.tau_final * s).collect();
            self.per_source_lambda =
                ngmca_lambda_next(self.lambda0, &finals, self.outer_iteration, self.decrease_iterations);
        }
        &self.per_source_lambda
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn soft_hard_prox_examples() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-2.5, 0.0), -2.5);
        assert_eq!(hard_threshold(0.5, 1.0), 0.0);
        assert_eq!(hard_threshold(1.5, 1.0), 1.5);
        assert_eq!(hard_threshold(1.0, 1.0), 1.0);
        assert_eq!(hard_threshold(-1.0, 1.0), -1.0);
        assert_eq!(prox_nonneg_l1(-2.0, 1.0), 0.0);
        assert_eq!(prox_nonneg_l1(3.0, 1.0), 2.0);
    }

    #[test]
    fn prox_matches_grid_search() {
        let lambdas = [0.0, 0.3, 1.0, 2.5];
        let xs = [-3.0, -0.4, 0.0, 0.2, 0.9, 1.7, 4.2];
        for &lambda in &lambdas {
            for &x in &xs {
                let objective = |y: f64| 0.5 * (y - x).powi(2) + lambda * y.abs();
                let (mut best, mut best_val) = (0.0, f64::INFINITY);
                for step in 0..=60_000 {
                    let y = step as f64 * 1e-4;
                    let v = objective(y);
                    if v < best_val {
                        best_val = v;
                        best = y;
                    }
                }
                assert!((prox_nonneg_l1(x, lambda) - best).abs() <= 1e-4, "x={x} lambda={lambda}");
            }
        }
    }

    #[test]
    fn ratio_amplification() {
        let (x1, x2, lambda) = (2.0, 5.0, 1.5);
        let (y1, y2) = (soft_threshold(x1, lambda), soft_threshold(x2, lambda));
        assert!(y2 / y1 > x2 / x1);
    }

    #[test]
    fn mad_examples() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((mad_sigma(&v).unwrap() - 1.0 / 0.6745).abs() < 1e-12);
        assert_eq!(mad_sigma(&[4.0; 7]).unwrap(), 0.0);
        assert!(matches!(mad_sigma(&[]), Err(Error::EmptyInput)));
        // Even length: median of [1,2,3,10] is 2.5, deviations [1.5,.5,.5,7.5] -> 1.0
        assert!((mad_sigma(&[10.0, 1.0, 3.0, 2.0]).unwrap() - 1.0 / 0.6745).abs() < 1e-12);
    }

    #[test]
    fn mad_is_consistent_for_unit_gaussian() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let v: Vec<f64> = (0..1_000_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let sigma = mad_sigma(&v).unwrap();
        assert!((sigma - 1.0).abs() < 0.02, "{sigma}");
    }

    #[test]
    fn naive_selection_endpoints() {
        let row: Vec<f64> = (0..40).map(|j| ((j * 37 % 17) as f64) - 4.0).collect();
        let s_all = RealMatrix::from_row_slice(1, row.len(), &row);
        let floor = 1.5 * mad_sigma(&row).unwrap();
        assert_eq!(naive_threshold_select(&s_all, 9, 9, 1.5), vec![floor]);
        assert_eq!(naive_threshold_select(&s_all, 9, 9, 0.0), vec![0.0]);
        for k in 1..=9 {
            assert!(naive_threshold_select(&s_all, k, 9, 1.5)[0] >= floor);
        }
    }

    #[test]
    fn naive_selection_grows_linearly() {
        let row: Vec<f64> = (1..=10).rev().map(f64::from).collect();
        let s_all = RealMatrix::from_row_slice(1, 10, &row);
        for k in 1..=10 {
            // Quantile oracle: count entries the hard threshold would keep.
            let lambda = naive_threshold_select(&s_all, k, 10, 0.0)[0];
            let kept = row.iter().filter(|&&v| v.abs() >= lambda && v > 0.0).count();
            assert!((kept as i64 - k as i64).abs() <= 1, "k={k} kept={kept}");
        }
    }

    #[test]
    fn lambda_init_examples() {
        let y = dmatrix![1.0, -4.0; 2.5, 0.5];
        let eye = RealMatrix::identity(2, 2);
        assert_eq!(ngmca_lambda_init(&eye, &RealMatrix::zeros(2, 2), &y), 4.0);

        let a = dmatrix![1.0, 0.2; 0.3, 1.0; 0.5, 0.5];
        let y = dmatrix![1.0, 2.0, 0.0; 0.0, 1.0, 3.0; 2.0, 0.1, 0.4];
        let s_ls = crate::linops::least_squares_solve_s(&a, &y).unwrap();
        assert!(ngmca_lambda_init(&a, &s_ls, &y) < 1e-12);

        let s0 = dmatrix![0.5, 0.1, 0.9; 0.2, 0.3, 0.7];
        let grad = a.transpose() * (&a * &s0 - &y);
        let brute = grad.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert_eq!(ngmca_lambda_init(&a, &s0, &y), brute);
    }

    #[test]
    fn lambda_next_endpoints_and_midpoint() {
        let finals = [0.5, 1.0, 2.0];
        assert_eq!(ngmca_lambda_next(10.0, &finals, 8, 8), finals.to_vec());
        assert_eq!(ngmca_lambda_next(10.0, &finals, 0, 8), vec![10.0; 3]);
        let mid = ngmca_lambda_next(10.0, &finals, 4, 8);
        for (m, f) in mid.iter().zip(finals) {
            assert!((m - (10.0 + f) / 2.0).abs() < 1e-12);
        }
        let mut prev = vec![10.0; 3];
        for k in 1..=8 {
            let cur = ngmca_lambda_next(10.0, &finals, k, 8);
            assert!(cur.iter().zip(&prev).all(|(c, p)| c <= p));
            prev = cur;
        }
    }

    #[test]
    fn schedule_holds_after_decrease_phase() {
        let mut sched = ThresholdSchedule::new(10.0, 2, 10, 0.8, 1.0);
        assert_eq!(sched.decrease_iterations(), 8);
        for _ in 0..8 {
            sched.advance(&[1.0, 2.0]);
        }
        assert_eq!(sched.per_source_lambda, vec![1.0, 2.0]);
        sched.advance(&[5.0, 5.0]);
        assert!(sched.in_refinement());
        assert_eq!(sched.per_source_lambda, vec![1.0, 2.0]);
    }

    proptest! {
        #[test]
        fn soft_is_odd_and_one_lipschitz(x in -50.0f64..50.0, y in -50.0f64..50.0, lambda in 0.0f64..10.0) {
            prop_assert_eq!(soft_threshold(-x, lambda), -soft_threshold(x, lambda));
            prop_assert!((soft_threshold(x, lambda) - soft_threshold(y, lambda)).abs() <= (x - y).abs() + 1e-12);
        }

        #[test]
        fn hard_dominates_soft(x in -50.0f64..50.0, lambda in 0.0f64..10.0) {
            prop_assert!(hard_threshold(x, lambda).abs() >= soft_threshold(x, lambda).abs());
        }

        #[test]
        fn mad_scale_equivariant(v in proptest::collection::vec(-100.0f64..100.0, 1..40), c in 0.01f64..100.0) {
            let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
            let a = mad_sigma(&scaled).unwrap();
            let b = c * mad_sigma(&v).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * b.max(1e-300));
        }
    }
}
