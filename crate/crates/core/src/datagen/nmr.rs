//! NMR-like sources: peak lists broadened by a Laplacian line shape.
//!
//! Peak-list files are plain text, one `position<TAB>amplitude` pair per
//! line, `#` starting a comment. Positions are fractions of the spectral
//! axis in `[0, 1)`; the compound name is the file stem.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linops::RealMatrix;

/// Kernel support, in units of the decay length `b`.
pub const KERNEL_TRUNCATION: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub position: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakList {
    pub compound_name: String,
    pub peaks: Vec<Peak>,
}

impl PeakList {
    pub fn parse(compound_name: &str, text: &str) -> Result<Self> {
        let mut peaks = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| Error::Format(format!("{compound_name}:{}: {what}: `{raw}`", lineno + 1));
            let mut fields = line.split('\t').map(str::trim).filter(|f| !f.is_empty());
            let (Some(pos), Some(amp), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(bad("expected `position<TAB>amplitude`"));
            };
            let position: f64 = pos.parse().map_err(|_| bad("bad position"))?;
            let amplitude: f64 = amp.parse().map_err(|_| bad("bad amplitude"))?;
            if !(amplitude > 0.0 && amplitude.is_finite()) {
                return Err(bad("amplitude must be positive"));
            }
            if !(0.0..1.0).contains(&position) {
                return Err(Error::PeakOutOfRange { position });
            }
            peaks.push(Peak { position, amplitude });
        }
        if peaks.is_empty() {
            return Err(Error::Format(format!("{compound_name}: no peaks")));
        }
        Ok(Self {
            compound_name: compound_name.to_string(),
            peaks,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# {}\n", self.compound_name);
        for p in &self.peaks {
            out.push_str(&format!("{}\t{}\n", p.position, p.amplitude));
        }
        out
    }
}

/// Loads every `*.peaks` file of `dir`, sorted by file name.
pub fn load_corpus(dir: &Path) -> Result<Vec<PeakList>> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "peaks"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Format(format!("no .peaks files in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            PeakList::parse(&name, &fs::read_to_string(p)?)
        })
        .collect()
}

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../../../corpus/nmr/", $name, ".peaks")))),*]
    };
}

const BUNDLED: &[(&str, &str)] = bundled!(
    "compound_01", "compound_02", "compound_03", "compound_04", "compound_05",
    "compound_06", "compound_07", "compound_08", "compound_09", "compound_10",
    "compound_11", "compound_12", "compound_13", "compound_14", "compound_15",
);

/// The 15-compound synthetic corpus shipped in `corpus/nmr`.
pub fn bundled_corpus() -> Result<Vec<PeakList>> {
    BUNDLED.iter().map(|(name, text)| PeakList::parse(name, text)).collect()
}

/// Unit-height Laplacian line shape `exp(-|offset| / b)`, `b = fwhm / (2 ln 2)`,
/// truncated beyond `KERNEL_TRUNCATION * b`.
pub fn laplacian_kernel(offset: f64, fwhm_samples: f64) -> f64 {
    let b = fwhm_samples / (2.0 * std::f64::consts::LN_2);
    if offset.abs() > KERNEL_TRUNCATION * b {
        0.0
    } else {
        (-offset.abs() / b).exp()
    }
}

/// One row per peak list: amplitude-weighted kernels on an `n`-sample grid.
pub fn gen_nmr_sources(peaklists: &[PeakList], n: usize, fwhm_samples: f64) -> Result<RealMatrix> {
    if !(fwhm_samples > 0.0) || (n as f64) < 2.0 * fwhm_samples {
        return Err(Error::InvalidConfig(format!(
            "grid of {n} samples is too short for a {fwhm_samples}-sample line width"
        )));
    }
    let b = fwhm_samples / (2.0 * std::f64::consts::LN_2);
    let reach = KERNEL_TRUNCATION * b;
    let mut out = RealMatrix::zeros(peaklists.len(), n);
    for (row, list) in peaklists.iter().enumerate() {
        for peak in &list.peaks {
            if !(0.0..1.0).contains(&peak.position) {
                return Err(Error::PeakOutOfRange { position: peak.position });
            }
            let center = peak.position * n as f64;
            let lo = (center - reach).ceil().max(0.0) as usize;
            let hi = ((center + reach).floor() as usize).min(n - 1);
            for t in lo..=hi {
                out[(row, t)] += peak.amplitude * laplacian_kernel(t as f64 - center, fwhm_samples);
            }
        }
    }
    Ok(out)
}
