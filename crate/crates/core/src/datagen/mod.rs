//! Synthetic problem instances: Bernoulli-generalized-Gaussian factors,
//! Gaussian noise at a prescribed data SNR, and NMR-like sources.

mod nmr;

use std::fmt;
use std::path::PathBuf;

use rand::RngExt;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::linops::RealMatrix;
use crate::rng::{self, StreamRng, StreamRole};

pub use nmr::{bundled_corpus, gen_nmr_sources, laplacian_kernel, load_corpus, Peak, PeakList, KERNEL_TRUNCATION};

/// Maximum number of redraws when a factor comes out with a dead row/column.
pub const MAX_REDRAWS: usize = 100;

/// Noise level of an instance: an SNR in dB, or no noise at all.
///
/// Serialized as a number, or as the string `"noiseless"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    Noiseless,
    SnrDb(f64),
}

impl NoiseLevel {
    pub fn snr_db(&self) -> f64 {
        match self {
            NoiseLevel::Noiseless => f64::INFINITY,
            NoiseLevel::SnrDb(v) => *v,
        }
    }
}

impl fmt::Display for NoiseLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseLevel::Noiseless => f.write_str("noiseless"),
            NoiseLevel::SnrDb(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for NoiseLevel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NoiseLevel::Noiseless => serializer.serialize_str("noiseless"),
            NoiseLevel::SnrDb(v) => serializer.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for NoiseLevel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Label(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(v) => Ok(NoiseLevel::SnrDb(v)),
            Raw::Label(s) if s.eq_ignore_ascii_case("noiseless") || s.eq_ignore_ascii_case("inf") => {
                Ok(NoiseLevel::Noiseless)
            }
            Raw::Label(s) => Err(serde::de::Error::custom(format!("unknown noise level `{s}`"))),
        }
    }
}

/// Where the reference sources come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceModel {
    /// `|B_p G_alpha|` entries, like the mixing matrix.
    #[default]
    Synthetic,
    /// Rows rendered from peak lists; `r` must equal the number of lists.
    Nmr {
        /// Directory of `*.peaks` files; the bundled corpus when absent.
        #[serde(default)]
        corpus: Option<PathBuf>,
        #[serde(default = "default_fwhm")]
        fwhm_samples: f64,
    },
}

fn default_fwhm() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstanceSpec {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub p_a: f64,
    pub p_s: f64,
    pub alpha_a: f64,
    pub alpha_s: f64,
    pub snr_db: NoiseLevel,
    pub seed: u64,
    pub source_model: SourceModel,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            m: 200,
            n: 200,
            r: 15,
            p_a: 1.0,
            p_s: 0.1,
            alpha_a: 2.0,
            alpha_s: 1.0,
            snr_db: NoiseLevel::Noiseless,
            seed: 0,
            source_model: SourceModel::Synthetic,
        }
    }
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.m == 0 || self.n == 0 || self.r == 0 {
            return bad(format!("dimensions must be positive (m={}, n={}, r={})", self.m, self.n, self.r));
        }
        for (name, p) in [("p_a", self.p_a), ("p_s", self.p_s)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name}={p} is not in [0, 1]"));
            }
        }
        for (name, alpha) in [("alpha_a", self.alpha_a), ("alpha_s", self.alpha_s)] {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return bad(format!("{name}={alpha} must be positive"));
            }
        }
        if let NoiseLevel::SnrDb(v) = self.snr_db {
            if !v.is_finite() {
                return bad(format!("snr_db={v} must be finite (use \"noiseless\")"));
            }
        }
        Ok(())
    }
}

/// `Y = A_ref S_ref + Z` together with the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub y: RealMatrix,
    pub a_ref: RealMatrix,
    pub s_ref: RealMatrix,
    pub z: RealMatrix,
    pub spec: InstanceSpec,
}

impl ProblemInstance {
    pub fn clean(&self) -> RealMatrix {
        &self.a_ref * &self.s_ref
    }
}

/// Zero-mean, unit-variance generalized Gaussian with shape `alpha`,
/// density proportional to `exp(-|x / beta|^alpha)`.
///
/// Sampled exactly as `sign * beta * G^(1/alpha)` with `G ~ Gamma(1/alpha, 1)`
/// and `beta = sqrt(Gamma(1/alpha) / Gamma(3/alpha))`.
#[derive(Debug, Clone, Copy)]
pub struct GeneralizedGaussian {
    alpha: f64,
    beta: f64,
    gamma: Gamma<f64>,
}

impl GeneralizedGaussian {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("shape parameter {alpha} must be positive")));
        }
        let beta = (gamma(1.0 / alpha) / gamma(3.0 / alpha)).sqrt();
        let gamma = Gamma::new(1.0 / alpha, 1.0).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(Self { alpha, beta, gamma })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scale(&self) -> f64 {
        self.beta
    }

    /// Magnitude only, `|G_alpha|`.
    pub fn sample_abs<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.beta * self.gamma.sample(rng).powf(1.0 / self.alpha)
    }
}

impl Distribution<f64> for GeneralizedGaussian {
    fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let magnitude = self.sample_abs(rng);
        if rng.random::<bool>() {
            magnitude
        } else {
            -magnitude
        }
    }
}

pub fn sample_generalized_gaussian(alpha: f64, count: usize, seed: u64) -> Result<Vec<f64>> {
    let dist = GeneralizedGaussian::new(alpha)?;
    let mut rng = rng::stream(seed, StreamRole::Test);
    Ok((0..count).map(|_| dist.sample(&mut rng)).collect())
}

/// `rows x cols` matrix of i.i.d. `|B_p G_alpha|` entries, drawn in
/// row-major order (Bernoulli draw first, magnitude only when active).
pub fn gen_factor_with(rows: usize, cols: usize, p: f64, alpha: f64, rng: &mut StreamRng) -> Result<RealMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidConfig(format!("activation rate {p} is not in [0, 1]")));
    }
    let dist = GeneralizedGaussian::new(alpha)?;
    let mut out = RealMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            if rng.random::<f64>() < p {
                out[(i, j)] = dist.sample_abs(rng);
            }
        }
    }
    Ok(out)
}

pub fn gen_factor(rows: usize, cols: usize, p: f64, alpha: f64, seed: u64) -> Result<RealMatrix> {
    gen_factor_with(rows, cols, p, alpha, &mut rng::stream(seed, StreamRole::Test))
}

/// Adds i.i.d. Gaussian noise rescaled so the realized data SNR is exactly
/// `snr`. Returns `(Y, Z)`.
pub fn add_noise_snr(x: &RealMatrix, snr: NoiseLevel, seed: u64) -> Result<(RealMatrix, RealMatrix)> {
    add_noise_snr_with(x, snr, &mut rng::stream(seed, StreamRole::Noise))
}

pub fn add_noise_snr_with(x: &RealMatrix, snr: NoiseLevel, rng: &mut StreamRng) -> Result<(RealMatrix, RealMatrix)> {
    let signal = x.norm();
    if signal == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let snr_db = match snr {
        NoiseLevel::Noiseless => return Ok((x.clone(), RealMatrix::zeros(x.nrows(), x.ncols()))),
        NoiseLevel::SnrDb(v) if v.is_finite() => v,
        NoiseLevel::SnrDb(v) => return Err(Error::InvalidConfig(format!("snr_db={v}"))),
    };
    // Row-major draw order.
    let mut z = RealMatrix::zeros(x.nrows(), x.ncols());
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            z[(i, j)] = StandardNormal.sample(rng);
        }
    }
    let target = signal / 10f64.powf(snr_db / 20.0);
    z *= target / z.norm();
    Ok((x + &z, z))
}

fn has_dead_row(m: &RealMatrix) -> bool {
    m.row_iter().any(|row| row.iter().all(|v| *v == 0.0))
}

fn has_dead_column(m: &RealMatrix) -> bool {
    m.column_iter().any(|col| col.iter().all(|v| *v == 0.0))
}

fn redraw_until<F, P>(mut draw: F, dead: P, what: &str) -> Result<RealMatrix>
where
    F: FnMut() -> Result<RealMatrix>,
    P: Fn(&RealMatrix) -> bool,
{
    for _ in 0..MAX_REDRAWS {
        let m = draw()?;
        if !dead(&m) {
            return Ok(m);
        }
    }
    Err(Error::InvalidConfig(format!(
        "{what} still has an all-zero source after {MAX_REDRAWS} draws"
    )))
}

/// Builds a full instance from its spec; deterministic in `spec.seed`.
pub fn gen_instance(spec: &InstanceSpec) -> Result<ProblemInstance> {
    spec.validate()?;
    let mut rng_a = rng::stream(spec.seed, StreamRole::MixingMatrix);
    let a_ref = redraw_until(
        || gen_factor_with(spec.m, spec.r, spec.p_a, spec.alpha_a, &mut rng_a),
        has_dead_column,
        "A_ref",
    )?;
    let s_ref = match &spec.source_model {
        SourceModel::Synthetic => {
            let mut rng_s = rng::stream(spec.seed, StreamRole::Sources);
            redraw_until(
                || gen_factor_with(spec.r, spec.n, spec.p_s, spec.alpha_s, &mut rng_s),
                has_dead_row,
                "S_ref",
            )?
        }
        SourceModel::Nmr { corpus, fwhm_samples } => {
            let lists = match corpus {
                Some(dir) => load_corpus(dir)?,
                None => bundled_corpus()?,
            };
            if lists.len() != spec.r {
                return Err(Error::InvalidConfig(format!(
                    "NMR corpus has {} compounds but r = {}",
                    lists.len(),
                    spec.r
                )));
            }
            gen_nmr_sources(&lists, spec.n, *fwhm_samples)?
        }
    };
    let clean = &a_ref * &s_ref;
    let (y, z) = add_noise_snr_with(&clean, spec.snr_db, &mut rng::stream(spec.seed, StreamRole::Noise))?;
    Ok(ProblemInstance {
        y,
        a_ref,
        s_ref,
        z,
        spec: spec.clone(),
    })
}
