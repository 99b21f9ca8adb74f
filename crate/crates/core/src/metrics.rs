//! Separation quality: BSS decomposition and SDR, optimal pairing of
//! estimated and reference sources, Hoyer sparseness, conditioning, SNR.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::RealMatrix;

/// Finite stand-in for ±inf SDR values in persisted output.
pub const SDR_CAP_DB: f64 = 300.0;
/// Energies below this count as zero.
const ENERGY_FLOOR: f64 = 1e-300;
/// Relative singular-value cutoff for the noise subspace basis.
const NOISE_RANK_TOL: f64 = 1e-10;
/// Relative diagonal cutoff flagging dependent reference rows.
const REFERENCE_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct BssDecomposition {
    pub target: DVector<f64>,
    pub interf: DVector<f64>,
    pub noise: DVector<f64>,
    pub artifacts: DVector<f64>,
}

impl BssDecomposition {
    pub fn total(&self) -> DVector<f64> {
        &self.target + &self.interf + &self.noise + &self.artifacts
    }

    pub fn distortion(&self) -> DVector<f64> {
        &self.interf + &self.noise + &self.artifacts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingResult {
    /// `permutation[i]` is the reference index paired with estimate `i`.
    pub permutation: Vec<usize>,
    /// Per-estimate SDR, clamped to `±SDR_CAP_DB`.
    pub per_source_sdr_db: Vec<f64>,
    pub mean_sdr_db: f64,
}

pub fn cap_sdr(db: f64) -> f64 {
    if db.is_nan() {
        -SDR_CAP_DB
    } else {
        db.clamp(-SDR_CAP_DB, SDR_CAP_DB)
    }
}

/// `10 log10(signal / distortion)` with the ±inf conventions for empty energies.
fn energy_ratio_db(signal: f64, distortion: f64) -> f64 {
    if signal < ENERGY_FLOOR {
        f64::NEG_INFINITY
    } else if distortion < ENERGY_FLOOR {
        f64::INFINITY
    } else {
        10.0 * (signal / distortion).log10()
    }
}

/// Orthonormal bases for the reference span and for the part of the noise
/// span orthogonal to it; reused across every estimate of a trial.
#[derive(Debug, Clone)]
pub struct BssProjector {
    references: RealMatrix,
    reference_basis: RealMatrix,
    noise_basis: RealMatrix,
}

impl BssProjector {
    /// `references` is `r x n`, `noise_rows` is `k x n` (`k` may be 0).
    pub fn new(references: &RealMatrix, noise_rows: &RealMatrix) -> Result<Self> {
        let n = references.ncols();
        if references.nrows() == 0 {
            return Err(Error::EmptyInput);
        }
        if noise_rows.nrows() > 0 && noise_rows.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "noise rows have {} samples, references {}",
                noise_rows.ncols(),
                n
            )));
        }
        if references.nrows() > n {
            return Err(Error::DegenerateSpan);
        }
        // Modified Gram-Schmidt, twice, on the reference rows.
        let reference_basis = orthonormalize(&references.transpose()).ok_or(Error::DegenerateSpan)?;

        let noise_basis = if noise_rows.nrows() == 0 {
            RealMatrix::zeros(n, 0)
        } else {
            let mut residual = noise_rows.transpose();
            for _ in 0..2 {
                let coeffs = reference_basis.transpose() * &residual;
                residual -= &reference_basis * coeffs;
            }
            let scale = noise_rows.norm().max(f64::MIN_POSITIVE);
            let svd = residual.svd(true, false);
            let u = svd.u.expect("left singular vectors requested");
            let keep: Vec<usize> = (0..svd.singular_values.len())
                .filter(|&i| svd.singular_values[i] > NOISE_RANK_TOL * scale)
                .collect();
            let mut basis = RealMatrix::zeros(n, keep.len());
            for (c, &i) in keep.iter().enumerate() {
                basis.set_column(c, &u.column(i));
            }
            // Re-orthogonalize against the references to kill rounding drift.
            let coeffs = reference_basis.transpose() * &basis;
            basis -= &reference_basis * coeffs;
            orthonormalize(&basis).unwrap_or(basis)
        };
        Ok(Self {
            references: references.clone(),
            reference_basis,
            noise_basis,
        })
    }

    pub fn rank(&self) -> usize {
        self.references.nrows()
    }

    /// Projection of `s_est` on the paired reference row.
    pub fn target(&self, s_est: &DVector<f64>, paired_index: usize) -> Result<DVector<f64>> {
        if paired_index >= self.rank() {
            return Err(Error::ShapeMismatch(format!(
                "paired index {paired_index} out of {} references",
                self.rank()
            )));
        }
        if s_est.len() != self.references.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "estimate has {} samples, references {}",
                s_est.len(),
                self.references.ncols()
            )));
        }
        let r = self.references.row(paired_index).transpose();
        let energy = r.norm_squared();
        if energy < ENERGY_FLOOR {
            return Err(Error::DegenerateSpan);
        }
        Ok(&r * (r.dot(s_est) / energy))
    }

    pub fn decompose(&self, s_est: &DVector<f64>, paired_index: usize) -> Result<BssDecomposition> {
        let target = self.target(s_est, paired_index)?;
        let on_refs = &self.reference_basis * (self.reference_basis.transpose() * s_est);
        let on_noise = &self.noise_basis * (self.noise_basis.transpose() * s_est);
        let interf = &on_refs - &target;
        let artifacts = s_est - &on_refs - &on_noise;
        Ok(BssDecomposition {
            target,
            interf,
            noise: on_noise,
            artifacts,
        })
    }

    /// SDR of `s_est` against reference `paired_index`, uncapped.
    pub fn sdr(&self, s_est: &DVector<f64>, paired_index: usize) -> Result<f64> {
        let target = self.target(s_est, paired_index)?;
        let distortion = s_est - &target;
        Ok(energy_ratio_db(target.norm_squared(), distortion.norm_squared()))
    }

    /// `sdr_matrix[(i, j)]`: estimate row `i` against reference row `j`, capped.
    pub fn sdr_matrix(&self, s_est: &RealMatrix) -> Result<RealMatrix> {
        let r = self.rank();
        if s_est.nrows() != r || s_est.ncols() != self.references.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "estimate is {}x{}, references {}x{}",
                s_est.nrows(),
                s_est.ncols(),
                r,
                self.references.ncols()
            )));
        }
        let mut out = RealMatrix::zeros(r, r);
        for i in 0..r {
            let s = s_est.row(i).transpose();
            for j in 0..r {
                out[(i, j)] = cap_sdr(self.sdr(&s, j)?);
            }
        }
        Ok(out)
    }
}

/// Orthonormal basis of the column span, or `None` if the columns are dependent.
fn orthonormalize(cols: &RealMatrix) -> Option<RealMatrix> {
    let mut q = cols.clone();
    let scale = cols.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    for j in 0..q.ncols() {
        for _ in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let qi = q.column(i).clone_owned();
                q.column_mut(j).axpy(-proj, &qi, 1.0);
            }
        }
        let norm = q.column(j).norm();
        if !(norm > REFERENCE_RANK_TOL * scale) {
            return None;
        }
        q.column_mut(j).scale_mut(1.0 / norm);
    }
    Some(q)
}

pub fn decompose_bss(
    s_est: &DVector<f64>,
    ref_sources: &RealMatrix,
    noise_rows: &RealMatrix,
    paired_index: usize,
) -> Result<BssDecomposition> {
    BssProjector::new(ref_sources, noise_rows)?.decompose(s_est, paired_index)
}

/// Source-to-distortion ratio in dB; `+inf` for no distortion, `-inf` for no target.
pub fn sdr(d: &BssDecomposition) -> f64 {
    energy_ratio_db(d.target.norm_squared(), d.distortion().norm_squared())
}

/// Maximum-weight perfect matching on a square matrix (Hungarian method,
/// shortest augmenting paths with potentials). Returns `assignment[row] = col`.
pub fn max_weight_assignment(weights: &DMatrix<f64>) -> Vec<usize> {
    let n = weights.nrows();
    assert_eq!(n, weights.ncols(), "assignment needs a square matrix");
    if n == 0 {
        return Vec::new();
    }
    // Minimize cost = -weight. 1-based arrays, index 0 is the virtual root.
    let cost = |i: usize, j: usize| -weights[(i - 1, j - 1)];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0, j) - u[i0] - v[j];
                if reduced < min_slack[j] {
                    min_slack[j] = reduced;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[col_owner[j] - 1] = j - 1;
    }
    assignment
}

/// Pairs estimated and reference sources one-to-one, maximizing the sum of
/// SDRs in dB.
pub fn pair_sources(s_est: &RealMatrix, s_ref: &RealMatrix, noise_rows: &RealMatrix) -> Result<PairingResult> {
    if s_est.nrows() != s_ref.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "{} estimated sources vs {} references",
            s_est.nrows(),
            s_ref.nrows()
        )));
    }
    let projector = BssProjector::new(s_ref, noise_rows)?;
    pair_with(&projector, s_est)
}

pub fn pair_with(projector: &BssProjector, s_est: &RealMatrix) -> Result<PairingResult> {
    let sdrs = projector.sdr_matrix(s_est)?;
    let permutation = max_weight_assignment(&sdrs);
    let per_source_sdr_db: Vec<f64> = permutation.iter().enumerate().map(|(i, &j)| sdrs[(i, j)]).collect();
    let mean_sdr_db = per_source_sdr_db.iter().sum::<f64>() / per_source_sdr_db.len() as f64;
    Ok(PairingResult {
        permutation,
        per_source_sdr_db,
        mean_sdr_db,
    })
}

/// `(sqrt(n) - |x|_1 / |x|_2) / (sqrt(n) - 1)`.
pub fn hoyer_sparseness(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::InvalidConfig(format!("sparseness needs at least 2 entries, got {}", x.len())));
    }
    let l2 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if l2 == 0.0 {
        return Err(Error::ZeroVector);
    }
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    let root_n = (x.len() as f64).sqrt();
    Ok(((root_n - l1 / l2) / (root_n - 1.0)).clamp(0.0, 1.0))
}

/// Ratio of extreme singular values.
pub fn condition_number(a: &RealMatrix) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sv = a.singular_values();
    let max = sv.max();
    let min = sv.min();
    if a.ncols() > a.nrows() || !(min > f64::EPSILON * max * (a.nrows().max(a.ncols()) as f64)) {
        return Err(Error::SingularMatrix);
    }
    Ok(max / min)
}

/// `10 log10(|X|^2 / |Y - X|^2)`; `+inf` when `Y == X`.
pub fn measure_snr(y: &RealMatrix, x_clean: &RealMatrix) -> f64 {
    energy_ratio_db(x_clean.norm_squared(), (y - x_clean).norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::gen_factor;
    use crate::rng::{stream, StreamRole};
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> RealMatrix {
        let mut rng = stream(seed, StreamRole::Test);
        RealMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    /// Projection onto the row span of `m` by the normal equations.
    fn gram_projection(m: &RealMatrix, s: &DVector<f64>) -> DVector<f64> {
        let g = m * m.transpose();
        let coeffs = g.lu().solve(&(m * s)).unwrap();
        m.transpose() * coeffs
    }

    #[test]
    fn perfect_recovery() {
        let refs = gaussian(3, 50, 1);
        let noise = gaussian(2, 50, 2);
        let s = refs.row(1).transpose();
        let d = decompose_bss(&s, &refs, &noise, 1).unwrap();
        assert!((&d.target - &s).amax() < 1e-12);
        assert!(d.interf.amax() < 1e-12 && d.noise.amax() < 1e-12 && d.artifacts.amax() < 1e-12);
        assert!(sdr(&d) > 200.0);
    }

    #[test]
    fn orthogonal_estimate_is_all_artifact() {
        let mut refs = RealMatrix::zeros(2, 6);
        refs[(0, 0)] = 1.0;
        refs[(1, 1)] = 2.0;
        let mut noise = RealMatrix::zeros(1, 6);
        noise[(0, 2)] = 1.0;
        let s = DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0, -2.0, 0.5]);
        let d = decompose_bss(&s, &refs, &noise, 0).unwrap();
        assert_eq!(d.target.amax(), 0.0);
        assert!(d.interf.amax() < 1e-15 && d.noise.amax() < 1e-15);
        assert!((&d.artifacts - &s).amax() < 1e-15);
        assert_eq!(sdr(&d), f64::NEG_INFINITY);
    }

    #[test]
    fn matches_normal_equation_oracle() {
        let refs = gaussian(3, 40, 3);
        let noise = gaussian(2, 40, 4);
        let s = gaussian(1, 40, 5).row(0).transpose();
        let d = decompose_bss(&s, &refs, &noise, 2).unwrap();
        let r2 = refs.rows(2, 1).clone_owned();
        let both = RealMatrix::from_fn(5, 40, |i, j| if i < 3 { refs[(i, j)] } else { noise[(i - 3, j)] });
        let target = gram_projection(&r2, &s);
        let on_refs = gram_projection(&refs, &s);
        let on_all = gram_projection(&both, &s);
        let tol = 1e-8 * s.norm();
        assert!((&d.target - &target).amax() < tol);
        assert!((&d.interf - (&on_refs - &target)).amax() < tol);
        assert!((&d.noise - (&on_all - &on_refs)).amax() < tol);
        assert!((&d.artifacts - (&s - &on_all)).amax() < tol);
    }

    #[test]
    fn sdr_equal_energies_is_zero_db() {
        let d = BssDecomposition {
            target: DVector::from_vec(vec![1.0, 0.0]),
            interf: DVector::from_vec(vec![0.0, 0.5]),
            noise: DVector::from_vec(vec![0.0, 0.5]),
            artifacts: DVector::zeros(2),
        };
        assert!(sdr(&d).abs() < 1e-12);
    }

    #[test]
    fn dependent_references_are_degenerate() {
        let mut refs = gaussian(3, 10, 6);
        let row0 = refs.row(0).clone_owned();
        refs.row_mut(2).copy_from(&(row0 * 2.0));
        assert!(matches!(
            BssProjector::new(&refs, &RealMatrix::zeros(0, 10)),
            Err(Error::DegenerateSpan)
        ));
    }

    #[test]
    fn noise_span_may_fill_the_space() {
        // More noise rows than samples: the combined span is everything.
        let refs = gaussian(3, 20, 7);
        let noise = gaussian(30, 20, 8);
        let s = gaussian(1, 20, 9).row(0).transpose();
        let d = decompose_bss(&s, &refs, &noise, 0).unwrap();
        assert!(d.artifacts.norm() < 1e-10 * s.norm());
        assert!((d.total() - &s).amax() < 1e-12 * s.norm());
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for k in 0..n {
                let mut q = p.clone();
                q.insert(k, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn permuted_references_are_recovered() {
        let refs = gen_factor(4, 60, 0.4, 1.0, 10).unwrap();
        let order = [2, 0, 3, 1];
        let est = RealMatrix::from_fn(4, 60, |i, j| 3.0 * refs[(order[i], j)]);
        let p = pair_sources(&est, &refs, &RealMatrix::zeros(0, 60)).unwrap();
        assert_eq!(p.permutation, order);
        assert!(p.per_source_sdr_db.iter().all(|v| *v > 250.0));
    }

    #[test]
    fn assignment_matches_enumeration() {
        for seed in 0..30u64 {
            let r = 2 + (seed as usize % 5);
            let w = gaussian(r, r, 100 + seed);
            let best = permutations(r)
                .iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| w[(i, j)]).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            let got = max_weight_assignment(&w);
            let total: f64 = got.iter().enumerate().map(|(i, &j)| w[(i, j)]).sum();
            assert!((total - best).abs() < 1e-12, "seed {seed}");
            let mut sorted = got.clone();
            sorted.sort();
            assert_eq!(sorted, (0..r).collect::<Vec<_>>());
        }
    }

    #[test]
    fn three_source_pairing_matches_brute_force() {
        let refs = gen_factor(3, 80, 0.5, 1.0, 20).unwrap();
        let noise = gaussian(2, 80, 21);
        let est = &refs + gaussian(3, 80, 22) * 0.3;
        let projector = BssProjector::new(&refs, &noise).unwrap();
        let sdrs = projector.sdr_matrix(&est).unwrap();
        let best = permutations(3)
            .into_iter()
            .max_by(|p, q| {
                let sp: f64 = p.iter().enumerate().map(|(i, &j)| sdrs[(i, j)]).sum();
                let sq: f64 = q.iter().enumerate().map(|(i, &j)| sdrs[(i, j)]).sum();
                sp.partial_cmp(&sq).unwrap()
            })
            .unwrap();
        let p = pair_sources(&est, &refs, &noise).unwrap();
        assert_eq!(p.permutation, best);
        let mut swapped = est.clone();
        swapped.swap_rows(0, 2);
        let q = pair_sources(&swapped, &refs, &noise).unwrap();
        assert!((p.mean_sdr_db - q.mean_sdr_db).abs() < 1e-12);
    }

    #[test]
    fn hoyer_examples() {
        assert_eq!(hoyer_sparseness(&[0.0, 0.0, 5.0, 0.0]).unwrap(), 1.0);
        assert!(hoyer_sparseness(&[2.0; 9]).unwrap().abs() < 1e-15);
        assert!((hoyer_sparseness(&[1.0, 1.0, 0.0, 0.0]).unwrap() - (2.0 - 2f64.sqrt())).abs() < 1e-15);
        assert!(matches!(hoyer_sparseness(&[0.0, 0.0]), Err(Error::ZeroVector)));
    }

    #[test]
    fn condition_examples() {
        assert!((condition_number(&RealMatrix::identity(4, 4)).unwrap() - 1.0).abs() < 1e-14);
        let d = RealMatrix::from_diagonal(&DVector::from_vec(vec![10.0, 1.0]));
        assert!((condition_number(&d).unwrap() - 10.0).abs() < 1e-12);
        let a = gaussian(30, 8, 30);
        // Oracle: square roots of the extreme eigenvalues of A^T A.
        let eig = (a.transpose() * &a).symmetric_eigenvalues();
        let oracle = (eig.max() / eig.min()).sqrt();
        assert!((condition_number(&a).unwrap() / oracle - 1.0).abs() < 1e-8);
        let mut sing = gaussian(5, 3, 31);
        let c0 = sing.column(0).clone_owned();
        sing.set_column(2, &c0);
        assert!(matches!(condition_number(&sing), Err(Error::SingularMatrix)));
    }

    #[test]
    fn snr_examples() {
        let x = gaussian(5, 5, 40);
        assert!(measure_snr(&(&x * 2.0), &x).abs() < 1e-12);
        let z = gaussian(5, 5, 41);
        let z = &z * (0.1 * x.norm() / z.norm());
        assert!((measure_snr(&(&x + &z), &x) - 20.0).abs() < 1e-9);
        assert_eq!(measure_snr(&x, &x), f64::INFINITY);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn decomposition_is_complete_orthogonal_and_scale_free(seed in 0u64..10_000, scale in 1e-3f64..1e3) {
            let refs = gaussian(4, 30, seed);
            let noise = gaussian(3, 30, seed + 1);
            let s = gaussian(1, 30, seed + 2).row(0).transpose();
            let d = decompose_bss(&s, &refs, &noise, (seed % 4) as usize).unwrap();
            let norm = s.norm();
            prop_assert!((d.total() - &s).norm() <= 1e-9 * norm);
            let parts = [&d.target, &d.interf, &d.noise, &d.artifacts];
            for i in 0..4 {
                for j in (i + 1)..4 {
                    prop_assert!(parts[i].dot(parts[j]).abs() <= 1e-8 * norm * norm);
                }
            }
            let scaled = decompose_bss(&(&s * scale), &refs, &noise, (seed % 4) as usize).unwrap();
            prop_assert!((sdr(&scaled) - sdr(&d)).abs() <= 1e-9);
        }

        #[test]
        fn hoyer_is_scale_invariant(v in proptest::collection::vec(-10.0f64..10.0, 2..30), c in 0.01f64..100.0) {
            prop_assume!(v.iter().any(|x| x.abs() > 1e-6));
            let scaled: Vec<f64> = v.iter().map(|x| -c * x).collect();
            let a = hoyer_sparseness(&v).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!((a - hoyer_sparseness(&scaled).unwrap()).abs() < 1e-12);
        }
    }
}
