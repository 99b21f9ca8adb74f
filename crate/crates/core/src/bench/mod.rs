//! Monte-Carlo benchmark campaigns.
//!
//! A campaign expands an instance grid into cells, draws `trials_per_cell`
//! instances per cell, runs every configured algorithm on each, and scores
//! the recovered sources by their paired SDR. Every random seed is a hash of
//! the base seed, the cell coordinates and the trial index, so a record does
//! not depend on the rest of the grid, on the execution order or on the
//! number of worker threads.

mod plot;
mod store;

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{self, sparsity_rate, AlgorithmConfig, AlgorithmId};
use crate::datagen::{gen_instance, InstanceSpec, NoiseLevel, ProblemInstance, SourceModel};
use crate::error::{Error, Result};
use crate::linops;
use crate::metrics::{self, BssProjector};
use crate::rng::mix_seed;

pub use plot::{emit_plot, PlotFiles, AXES};
pub use store::{
    read_records, read_summary, records_to_csv, summary_to_csv, write_campaign, write_records, write_summary,
    write_timings, Manifest, MANIFEST_FILE, RECORDS_FILE, SUMMARY_FILE, TIMINGS_FILE,
};

/// Role tags mixed into trial seeds.
pub const SEED_ROLE_INSTANCE: u64 = 1;
pub const SEED_ROLE_ALGORITHM: u64 = 2;

/// `algorithm_id` of the records of a conditioning-only campaign.
pub const NO_ALGORITHM: &str = "none";

/// Trials per cell restored by the paper-scale profile.
pub const PAPER_SCALE_TRIALS: usize = 48;
/// Data size restored by the paper-scale profile.
pub const PAPER_SCALE_SIZE: usize = 200;

/// Lists of values for each swept instance parameter; the grid is their
/// Cartesian product. The remaining instance parameters are fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstanceGrid {
    pub r: Vec<usize>,
    pub m: Vec<usize>,
    pub n: Vec<usize>,
    pub p_s: Vec<f64>,
    pub alpha_a: Vec<f64>,
    pub snr_db: Vec<NoiseLevel>,
    pub p_a: f64,
    pub alpha_s: f64,
    pub source_model: SourceModel,
}

impl Default for InstanceGrid {
    fn default() -> Self {
        Self {
            r: vec![15],
            m: vec![100],
            n: vec![100],
            p_s: vec![0.1],
            alpha_a: vec![2.0],
            snr_db: vec![NoiseLevel::Noiseless],
            p_a: 1.0,
            alpha_s: 1.0,
            source_model: SourceModel::Synthetic,
        }
    }
}

/// One point of the instance grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub r: usize,
    pub m: usize,
    pub n: usize,
    pub p_s: f64,
    pub alpha_a: f64,
    pub snr_db: NoiseLevel,
}

impl Cell {
    fn key(&self) -> [u64; 6] {
        [
            self.r as u64,
            self.m as u64,
            self.n as u64,
            self.p_s.to_bits(),
            self.alpha_a.to_bits(),
            self.snr_db.snr_db().to_bits(),
        ]
    }

    /// Value of a swept parameter, by name.
    pub fn axis_value(&self, axis: &str) -> Option<f64> {
        Some(match axis {
            "r" => self.r as f64,
            "m" => self.m as f64,
            "n" => self.n as f64,
            "p_s" => self.p_s,
            "alpha_a" => self.alpha_a,
            "snr_db" => self.snr_db.snr_db(),
            _ => return None,
        })
    }

    pub fn instance_spec(&self, grid: &InstanceGrid, seed: u64) -> InstanceSpec {
        InstanceSpec {
            m: self.m,
            n: self.n,
            r: self.r,
            p_a: grid.p_a,
            p_s: self.p_s,
            alpha_a: self.alpha_a,
            alpha_s: grid.alpha_s,
            snr_db: self.snr_db,
            seed,
            source_model: grid.source_model.clone(),
        }
    }
}

/// What a campaign measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Paired SDR of the sources recovered by each algorithm.
    #[default]
    Sdr,
    /// Condition number of the reference mixing matrix only; no algorithm runs.
    Condition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub grid: InstanceGrid,
    /// `rank` and `seed` are overridden per trial (true rank, derived seed).
    pub algorithms: Vec<AlgorithmConfig>,
    pub trials_per_cell: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    pub metric: Metric,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            grid: InstanceGrid::default(),
            algorithms: [AlgorithmId::NgmcaS, AlgorithmId::Als, AlgorithmId::Mu, AlgorithmId::Oracle]
                .into_iter()
                .map(|id| AlgorithmConfig::new(id, 15))
                .collect(),
            trials_per_cell: 24,
            base_seed: 0,
            output_dir: PathBuf::from("results"),
            metric: Metric::Sdr,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let g = &self.grid;
        let lengths = [
            ("r", g.r.len()),
            ("m", g.m.len()),
            ("n", g.n.len()),
            ("p_s", g.p_s.len()),
            ("alpha_a", g.alpha_a.len()),
            ("snr_db", g.snr_db.len()),
        ];
        if let Some((name, _)) = lengths.iter().find(|(_, len)| *len == 0) {
            return bad(format!("grid axis `{name}` is empty"));
        }
        if self.trials_per_cell == 0 {
            return bad("trials_per_cell must be at least 1".into());
        }
        if self.metric == Metric::Sdr && self.algorithms.is_empty() {
            return bad("an SDR campaign needs at least one algorithm".into());
        }
        for cell in self.cells() {
            cell.instance_spec(g, 0).validate()?;
            for alg in &self.algorithms {
                AlgorithmConfig { rank: cell.r, ..alg.clone() }.validate()?;
            }
        }
        Ok(())
    }

    /// Grid cells in lexicographic order of (r, m, n, p_s, alpha_a, snr_db).
    pub fn cells(&self) -> Vec<Cell> {
        let g = &self.grid;
        let mut cells = Vec::new();
        for &r in &g.r {
            for &m in &g.m {
                for &n in &g.n {
                    for &p_s in &g.p_s {
                        for &alpha_a in &g.alpha_a {
                            for &snr_db in &g.snr_db {
                                cells.push(Cell { r, m, n, p_s, alpha_a, snr_db });
                            }
                        }
                    }
                }
            }
        }
        cells
    }

    /// Restores the full-size experimental protocol: 200 x 200 synthetic data
    /// where the size is not swept, and at least 48 trials per cell.
    pub fn paper_scale(mut self) -> Self {
        if self.grid.source_model == SourceModel::Synthetic {
            if self.grid.m.len() == 1 {
                self.grid.m = vec![PAPER_SCALE_SIZE];
            }
            if self.grid.n.len() == 1 {
                self.grid.n = vec![PAPER_SCALE_SIZE];
            }
        }
        self.trials_per_cell = self.trials_per_cell.max(PAPER_SCALE_TRIALS);
        self
    }

    fn record_labels(&self) -> Vec<String> {
        match self.metric {
            Metric::Condition => vec![NO_ALGORITHM.to_string()],
            Metric::Sdr => self.algorithms.iter().map(|a| a.algorithm_id.name().to_string()).collect(),
        }
    }
}

/// Seed of one role (instance or algorithm) of one trial.
pub fn trial_seed(base_seed: u64, cell: &Cell, trial: usize, role: u64) -> u64 {
    let mut words = vec![base_seed];
    words.extend_from_slice(&cell.key());
    words.push(trial as u64);
    words.push(role);
    mix_seed(&words)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    Error,
}

/// Result of one algorithm on one trial instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub r: usize,
    pub m: usize,
    pub n: usize,
    pub p_s: f64,
    pub alpha_a: f64,
    /// `+inf` for noiseless data.
    pub snr_db: f64,
    pub algorithm_id: String,
    pub trial: usize,
    /// Seed of the instance.
    pub seed: u64,
    pub status: TrialStatus,
    pub mean_sdr_db: Option<f64>,
    pub per_source_sdr_db: Vec<f64>,
    pub final_objective: Option<f64>,
    pub iterations_run: Option<usize>,
    pub cond_a_ref: Option<f64>,
    pub error: String,
    /// Kept out of the records file, which must be reproducible byte for byte.
    pub wall_time_seconds: f64,
}

impl TrialRecord {
    fn blank(cell: &Cell, algorithm_id: &str, trial: usize, seed: u64) -> Self {
        Self {
            r: cell.r,
            m: cell.m,
            n: cell.n,
            p_s: cell.p_s,
            alpha_a: cell.alpha_a,
            snr_db: cell.snr_db.snr_db(),
            algorithm_id: algorithm_id.to_string(),
            trial,
            seed,
            status: TrialStatus::Ok,
            mean_sdr_db: None,
            per_source_sdr_db: Vec::new(),
            final_objective: None,
            iterations_run: None,
            cond_a_ref: None,
            error: String::new(),
            wall_time_seconds: 0.0,
        }
    }

    fn failed(mut self, err: &Error) -> Self {
        self.status = TrialStatus::Error;
        self.error = err.to_string();
        self
    }

    pub fn is_ok(&self) -> bool {
        self.status == TrialStatus::Ok
    }

    /// The measured quantity: condition number for conditioning records,
    /// mean SDR otherwise.
    pub fn value(&self) -> Option<f64> {
        if self.algorithm_id == NO_ALGORITHM {
            self.cond_a_ref
        } else {
            self.mean_sdr_db
        }
    }

    /// Coordinates of the grid cell, bit-exact.
    pub fn cell_key(&self) -> [u64; 6] {
        [
            self.r as u64,
            self.m as u64,
            self.n as u64,
            self.p_s.to_bits(),
            self.alpha_a.to_bits(),
            self.snr_db.to_bits(),
        ]
    }
}

fn score(
    inst: &ProblemInstance,
    projector: &BssProjector,
    cfg: &AlgorithmConfig,
    mut record: TrialRecord,
) -> TrialRecord {
    let start = Instant::now();
    let outcome = algorithms::run(&inst.y, cfg, Some(&inst.a_ref)).and_then(|report| {
        let pairing = metrics::pair_with(projector, &report.pair.s)?;
        Ok((report, pairing))
    });
    record.wall_time_seconds = start.elapsed().as_secs_f64();
    match outcome {
        Ok((report, pairing)) => {
            record.mean_sdr_db = Some(pairing.mean_sdr_db);
            record.per_source_sdr_db = pairing.per_source_sdr_db;
            record.final_objective = Some(linops::half_squared_residual(&inst.y, &report.pair.a, &report.pair.s));
            record.iterations_run = Some(report.iterations_run);
            record
        }
        Err(e) => record.failed(&e),
    }
}

/// All records of one (cell, trial), one per algorithm in configuration order.
pub fn run_trial(cfg: &BenchmarkConfig, cell: &Cell, trial: usize) -> Vec<TrialRecord> {
    let seed = trial_seed(cfg.base_seed, cell, trial, SEED_ROLE_INSTANCE);
    let labels = cfg.record_labels();
    let blanks = || labels.iter().map(|l| TrialRecord::blank(cell, l, trial, seed));

    let inst = match gen_instance(&cell.instance_spec(&cfg.grid, seed)) {
        Ok(inst) => inst,
        Err(e) => return blanks().map(|r| r.failed(&e)).collect(),
    };
    let cond = metrics::condition_number(&inst.a_ref).ok();
    if cfg.metric == Metric::Condition {
        return blanks()
            .map(|mut r| match cond {
                Some(c) => {
                    r.cond_a_ref = Some(c);
                    r
                }
                None => r.failed(&Error::SingularMatrix),
            })
            .collect();
    }

    let projector = match BssProjector::new(&inst.s_ref, &inst.z) {
        Ok(p) => p,
        Err(e) => return blanks().map(|r| r.failed(&e)).collect(),
    };
    let algorithm_seed = trial_seed(cfg.base_seed, cell, trial, SEED_ROLE_ALGORITHM);
    cfg.algorithms
        .iter()
        .zip(blanks())
        .map(|(alg, mut record)| {
            record.cond_a_ref = cond;
            let mut alg = AlgorithmConfig {
                rank: cell.r,
                seed: algorithm_seed,
                ..alg.clone()
            };
            if alg.algorithm_id == AlgorithmId::HalsSparse && alg.sparsity_target.is_none() {
                alg.sparsity_target = Some(sparsity_rate(&inst.s_ref));
            }
            score(&inst, &projector, &alg, record)
        })
        .collect()
}

/// Runs the campaign on the global thread pool.
pub fn run_campaign(cfg: &BenchmarkConfig) -> Result<Vec<TrialRecord>> {
    run_campaign_with(cfg, None)
}

/// Runs the campaign on a dedicated pool of `workers` threads (`None`: the
/// global pool). Records are ordered by (cell, algorithm, trial).
pub fn run_campaign_with(cfg: &BenchmarkConfig, workers: Option<usize>) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let cells = cfg.cells();
    let trials = cfg.trials_per_cell;
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..trials).map(move |t| (c, t)))
        .collect();
    let work = || -> Vec<Vec<TrialRecord>> {
        jobs.par_iter()
            .map(|&(c, t)| run_trial(cfg, &cells[c], t))
            .collect()
    };
    let per_job = match workers {
        Some(0) => return Err(Error::InvalidConfig("workers must be at least 1".into())),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start {w} workers: {e}")))?
            .install(work),
        None => work(),
    };

    let per_trial = cfg.record_labels().len();
    let mut records = Vec::with_capacity(per_job.len() * per_trial);
    for c in 0..cells.len() {
        #[allow(clippy::needless_range_loop)]
        for a in 0..per_trial {
            for t in 0..trials {
                records.push(per_job[c * trials + t][a].clone());
            }
        }
    }
    Ok(records)
}

/// Statistics of one (cell, algorithm) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub r: usize,
    pub m: usize,
    pub n: usize,
    pub p_s: f64,
    pub alpha_a: f64,
    pub snr_db: f64,
    pub algorithm_id: String,
    /// `mean_sdr_db` or `cond_a_ref`.
    pub metric: String,
    pub count: usize,
    pub errors: usize,
    pub mean: f64,
    pub median: f64,
    /// Standard error of the mean (sample standard deviation over sqrt(count)).
    pub sem: f64,
}

impl SummaryRow {
    pub fn axis_value(&self, axis: &str) -> Option<f64> {
        Some(match axis {
            "r" => self.r as f64,
            "m" => self.m as f64,
            "n" => self.n as f64,
            "p_s" => self.p_s,
            "alpha_a" => self.alpha_a,
            "snr_db" => self.snr_db,
            _ => return None,
        })
    }
}

/// Mean, median and standard error per (cell, algorithm), in order of first
/// appearance. Error rows are counted, not averaged.
pub fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    type Group<'a> = (([u64; 6], &'a str), Vec<&'a TrialRecord>);
    let mut groups: Vec<Group> = Vec::new();
    for rec in records {
        let key = (rec.cell_key(), rec.algorithm_id.as_str());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(rec),
            None => groups.push((key, vec![rec])),
        }
    }
    groups
        .into_iter()
        .map(|(_, members)| {
            let first = members[0];
            let values: Vec<f64> = members.iter().filter(|r| r.is_ok()).filter_map(|r| r.value()).collect();
            let (mean, median, sem) = describe(&values);
            SummaryRow {
                r: first.r,
                m: first.m,
                n: first.n,
                p_s: first.p_s,
                alpha_a: first.alpha_a,
                snr_db: first.snr_db,
                algorithm_id: first.algorithm_id.clone(),
                metric: if first.algorithm_id == NO_ALGORITHM { "cond_a_ref" } else { "mean_sdr_db" }.to_string(),
                count: values.len(),
                errors: members.len() - values.len(),
                mean,
                median,
                sem,
            }
        })
        .collect()
}

fn describe(values: &[f64]) -> (f64, f64, f64) {
    let count = values.len();
    if count == 0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / count as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if count % 2 == 1 {
        sorted[count / 2]
    } else {
        0.5 * (sorted[count / 2 - 1] + sorted[count / 2])
    };
    let sem = if count < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
        (var / count as f64).sqrt()
    };
    (mean, median, sem)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(algorithms: &[AlgorithmId]) -> BenchmarkConfig {
        BenchmarkConfig {
            grid: InstanceGrid {
                r: vec![2],
                m: vec![8],
                n: vec![20],
                p_s: vec![0.3],
                snr_db: vec![NoiseLevel::SnrDb(30.0)],
                ..Default::default()
            },
            algorithms: algorithms
                .iter()
                .map(|&id| AlgorithmConfig {
                    outer_iterations: Some(30),
                    ..AlgorithmConfig::new(id, 2)
                })
                .collect(),
            trials_per_cell: 2,
            ..Default::default()
        }
    }

    fn record_with(value: f64) -> TrialRecord {
        let cell = Cell {
            r: 1,
            m: 1,
            n: 1,
            p_s: 0.1,
            alpha_a: 2.0,
            snr_db: NoiseLevel::SnrDb(10.0),
        };
        TrialRecord {
            mean_sdr_db: Some(value),
            ..TrialRecord::blank(&cell, "als", 0, 0)
        }
    }

    #[test]
    fn one_cell_two_trials_gives_distinct_seeds() {
        let recs = run_campaign(&tiny(&[AlgorithmId::Als])).unwrap();
        assert_eq!(recs.len(), 2);
        assert_ne!(recs[0].seed, recs[1].seed);
        assert!(recs.iter().all(|r| r.is_ok() && r.mean_sdr_db.unwrap().is_finite()));
        assert_eq!(recs[0].per_source_sdr_db.len(), 2);
    }

    #[test]
    fn records_are_ordered_by_cell_algorithm_trial() {
        let mut cfg = tiny(&[AlgorithmId::Als, AlgorithmId::Oracle]);
        cfg.grid.snr_db = vec![NoiseLevel::SnrDb(10.0), NoiseLevel::SnrDb(30.0)];
        let recs = run_campaign_with(&cfg, Some(2)).unwrap();
        let keys: Vec<(f64, &str, usize)> = recs.iter().map(|r| (r.snr_db, r.algorithm_id.as_str(), r.trial)).collect();
        assert_eq!(
            keys,
            vec![
                (10.0, "als", 0),
                (10.0, "als", 1),
                (10.0, "oracle", 0),
                (10.0, "oracle", 1),
                (30.0, "als", 0),
                (30.0, "als", 1),
                (30.0, "oracle", 0),
                (30.0, "oracle", 1),
            ]
        );
    }

    #[test]
    fn trial_does_not_depend_on_the_rest_of_the_grid() {
        let mut full = tiny(&[AlgorithmId::Als]);
        full.grid.snr_db = vec![NoiseLevel::SnrDb(10.0), NoiseLevel::SnrDb(30.0)];
        let alone = tiny(&[AlgorithmId::Als]);
        let strip = |mut r: TrialRecord| {
            r.wall_time_seconds = 0.0;
            r
        };
        let a: Vec<_> = run_campaign(&full).unwrap().into_iter().filter(|r| r.snr_db == 30.0).map(strip).collect();
        let b: Vec<_> = run_campaign(&alone).unwrap().into_iter().map(strip).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn failures_become_error_rows() {
        let mut cfg = tiny(&[AlgorithmId::Als]);
        // A rank above min(m, n) passes grid validation but not the solver.
        cfg.grid.r = vec![9];
        cfg.grid.m = vec![8];
        cfg.grid.n = vec![30];
        let recs = run_campaign(&cfg).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs.iter().all(|r| !r.is_ok() && !r.error.is_empty()));
        let summary = summarize(&recs);
        assert_eq!((summary[0].count, summary[0].errors), (0, 2));
    }

    #[test]
    fn conditioning_campaign_runs_no_algorithm() {
        let cfg = BenchmarkConfig {
            metric: Metric::Condition,
            algorithms: vec![],
            grid: InstanceGrid {
                r: vec![3],
                m: vec![20],
                n: vec![10],
                alpha_a: vec![0.5, 4.0],
                ..Default::default()
            },
            trials_per_cell: 3,
            ..Default::default()
        };
        let recs = run_campaign(&cfg).unwrap();
        assert_eq!(recs.len(), 6);
        assert!(recs.iter().all(|r| r.algorithm_id == NO_ALGORITHM && r.cond_a_ref.unwrap() >= 1.0));
        let summary = summarize(&recs);
        assert_eq!(summary.len(), 2);
        assert_eq!(summary[0].metric, "cond_a_ref");
    }

    #[test]
    fn summary_of_single_and_pair() {
        let one = summarize(&[record_with(7.5)]);
        assert_eq!((one[0].mean, one[0].median, one[0].sem), (7.5, 7.5, 0.0));
        let two = summarize(&[record_with(10.0), record_with(20.0)]);
        assert_eq!(two.len(), 1);
        assert_eq!(two[0].mean, 15.0);
        assert_eq!(two[0].median, 15.0);
        assert!((two[0].sem - 5.0).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        let mut cfg = tiny(&[AlgorithmId::Als]);
        cfg.trials_per_cell = 0;
        assert!(run_campaign(&cfg).is_err());
        let mut cfg = tiny(&[AlgorithmId::Als]);
        cfg.grid.p_s = vec![];
        assert!(cfg.validate().is_err());
        let mut cfg = tiny(&[]);
        assert!(cfg.validate().is_err());
        cfg.metric = Metric::Condition;
        assert!(cfg.validate().is_ok());
        assert!(run_campaign_with(&tiny(&[AlgorithmId::Als]), Some(0)).is_err());
    }

    #[test]
    fn paper_scale_profile() {
        let cfg = tiny(&[AlgorithmId::Als]).paper_scale();
        assert_eq!((cfg.grid.m.clone(), cfg.grid.n.clone(), cfg.trials_per_cell), (vec![200], vec![200], 48));
        let mut swept = tiny(&[AlgorithmId::Als]);
        swept.grid.m = vec![20, 50];
        assert_eq!(swept.paper_scale().grid.m, vec![20, 50]);
    }

    #[test]
    fn config_json_uses_field_names() {
        let cfg: BenchmarkConfig = serde_json::from_str(
            r#"{
                "grid": {"r": [15], "snr_db": [10, 20, "noiseless"], "p_s": [0.1, 0.3]},
                "algorithms": [{"algorithm_id": "ngmca_s"}, {"algorithm_id": "mu", "outer_iterations": 100}],
                "trials_per_cell": 3,
                "base_seed": 42,
                "output_dir": "out"
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.cells().len(), 6);
        assert_eq!(cfg.algorithms[1].iterations(), 100);
        assert_eq!(cfg.grid.m, vec![100]);
        let back: BenchmarkConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
