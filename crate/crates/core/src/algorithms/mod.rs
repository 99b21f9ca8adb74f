//! Factorization algorithms: nGMCA (naive, soft, hard), ALS,
//! multiplicative updates, sparse HALS and the known-mixing oracle.

mod baselines;
mod ngmca;

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{self, RealMatrix};
use crate::rng::{self, StreamRng, StreamRole};
use crate::subsolvers::{SubsolverOptions, Thresholding};

pub use baselines::{als, hals_sparse, multiplicative_update, sparsity_rate, MU_DENOMINATOR_FLOOR, SPARSITY_RELATIVE_CUTOFF};
pub use ngmca::{ngmca, ngmca_naive, oracle_solve, oracle_solve_with_thresholds, stability_move, StabilityMove, ORACLE_INNER_ITERATIONS};

/// Fraction of the outer iterations over which the nGMCA threshold decreases.
pub const DEFAULT_DECREASE_FRACTION: f64 = 0.8;
/// Target relative move of one extra soft nGMCA alternation.
pub const DEFAULT_STABILITY_TOL: f64 = 5e-6;
/// Default cap on refinement iterations added to reach that target.
pub const DEFAULT_REFINEMENT_EXTENSION: usize = 2000;
/// Reinitializations allowed per source before a collapse is reported.
pub const REINIT_BUDGET: usize = 3;
/// Scale of a reinitialized row/column relative to the largest factor entry.
pub const REINIT_SCALE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmId {
    NgmcaNaive,
    NgmcaS,
    NgmcaH,
    Als,
    Mu,
    HalsSparse,
    Oracle,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 7] = [
        AlgorithmId::NgmcaNaive,
        AlgorithmId::NgmcaS,
        AlgorithmId::NgmcaH,
        AlgorithmId::Als,
        AlgorithmId::Mu,
        AlgorithmId::HalsSparse,
        AlgorithmId::Oracle,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmId::NgmcaNaive => "ngmca_naive",
            AlgorithmId::NgmcaS => "ngmca_s",
            AlgorithmId::NgmcaH => "ngmca_h",
            AlgorithmId::Als => "als",
            AlgorithmId::Mu => "mu",
            AlgorithmId::HalsSparse => "hals_sparse",
            AlgorithmId::Oracle => "oracle",
        }
    }

    pub fn default_outer_iterations(&self) -> usize {
        match self {
            AlgorithmId::Mu => 40_000,
            AlgorithmId::HalsSparse => 5_000,
            AlgorithmId::Oracle => 1,
            _ => 500,
        }
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AlgorithmId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlgorithmConfig {
    pub algorithm_id: AlgorithmId,
    pub rank: usize,
    /// `None` picks the per-algorithm default.
    pub outer_iterations: Option<usize>,
    pub tau_final: f64,
    pub seed: u64,
    pub subsolver: SubsolverOptions,
    /// Target fraction of near-zero source entries (HALS only). `None` or a
    /// non-positive value disables the sparsity penalty.
    pub sparsity_target: Option<f64>,
    pub decrease_fraction: f64,
    /// Soft nGMCA keeps refining past `outer_iterations` until one
    /// alternation moves both factors by at most this relative amount
    /// (0 disables).
    pub stability_tol: f64,
    /// Cap on those extra refinement iterations.
    pub max_refinement_extension: usize,
    pub record_objective: bool,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            algorithm_id: AlgorithmId::NgmcaS,
            rank: 15,
            outer_iterations: None,
            tau_final: 1.0,
            seed: 0,
            subsolver: SubsolverOptions::default(),
            sparsity_target: None,
            decrease_fraction: DEFAULT_DECREASE_FRACTION,
            stability_tol: DEFAULT_STABILITY_TOL,
            max_refinement_extension: DEFAULT_REFINEMENT_EXTENSION,
            record_objective: false,
        }
    }
}

impl AlgorithmConfig {
    pub fn new(algorithm_id: AlgorithmId, rank: usize) -> Self {
        Self {
            algorithm_id,
            rank,
            ..Default::default()
        }
    }

    pub fn iterations(&self) -> usize {
        self.outer_iterations.unwrap_or_else(|| self.algorithm_id.default_outer_iterations())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.rank == 0 {
            return bad("rank must be at least 1".into());
        }
        if self.iterations() == 0 {
            return bad("outer_iterations must be at least 1".into());
        }
        if !(self.tau_final >= 0.0 && self.tau_final.is_finite()) {
            return bad(format!("tau_final={} must be a non-negative number", self.tau_final));
        }
        if !(self.decrease_fraction > 0.0 && self.decrease_fraction <= 1.0) {
            return bad(format!("decrease_fraction={} is not in (0, 1]", self.decrease_fraction));
        }
        if !(self.stability_tol >= 0.0) {
            return bad(format!("stability_tol={} must be non-negative", self.stability_tol));
        }
        if let Some(t) = self.sparsity_target {
            if !(t <= 1.0) {
                return bad(format!("sparsity_target={t} is above 1"));
            }
        }
        self.subsolver.validate()
    }
}

/// `Y ~= A S` with `A` (m x r) and `S` (r x n) non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub a: RealMatrix,
    pub s: RealMatrix,
}

impl FactorPair {
    pub fn product(&self) -> RealMatrix {
        &self.a * &self.s
    }

    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    /// Rescales to unit-norm columns of `A`, leaving the product unchanged.
    pub fn normalize(&mut self) {
        let norms = linops::normalize_columns_mut(&mut self.a);
        scale_rows(&mut self.s, &norms);
    }
}

/// Output of one algorithm run.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub pair: FactorPair,
    pub iterations_run: usize,
    /// `1/2 ||Y - A S||^2` after each outer iteration, when requested.
    pub objective_trace: Option<Vec<f64>>,
    /// Per-source threshold in force at the end (nGMCA, oracle, HALS).
    pub final_lambda: Option<Vec<f64>>,
}

impl FitReport {
    fn new(pair: FactorPair, iterations_run: usize) -> Self {
        Self {
            pair,
            iterations_run,
            objective_trace: None,
            final_lambda: None,
        }
    }
}

pub(crate) fn scale_rows(m: &mut RealMatrix, factors: &[f64]) {
    for (i, &f) in factors.iter().enumerate() {
        m.row_mut(i).scale_mut(f);
    }
}

fn half_normal(rows: usize, cols: usize, rng: &mut StreamRng) -> RealMatrix {
    // Row-major draw order.
    let mut m = RealMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let v: f64 = StandardNormal.sample(rng);
            m[(i, j)] = v.abs();
        }
    }
    m
}

/// `A0` (m x r) and `S0` (r x n) with i.i.d. `|N(0, 1)|` entries.
pub fn initialize(y: &RealMatrix, r: usize, seed: u64) -> Result<FactorPair> {
    if r == 0 {
        return Err(Error::InvalidConfig("rank must be at least 1".into()));
    }
    let mut rng = rng::stream(seed, StreamRole::Initialization);
    let a = half_normal(y.nrows(), r, &mut rng);
    let s = half_normal(r, y.ncols(), &mut rng);
    Ok(FactorPair { a, s })
}

fn check_input(y: &RealMatrix, cfg: &AlgorithmConfig) -> Result<()> {
    cfg.validate()?;
    linops::ensure_finite(y, "Y")?;
    if y.is_empty() {
        return Err(Error::EmptyInput);
    }
    if cfg.rank > y.nrows().min(y.ncols()) {
        return Err(Error::InvalidConfig(format!(
            "rank {} exceeds min(m, n) = {}",
            cfg.rank,
            y.nrows().min(y.ncols())
        )));
    }
    Ok(())
}

/// Revives dead sources (all-zero row of `S` or column of `A`) with small
/// random values, and reports a collapse once a source has been revived
/// `REINIT_BUDGET` times in a row without surviving an iteration.
#[derive(Debug)]
pub(crate) struct DeadSourceGuard {
    rng: StreamRng,
    consecutive: Vec<usize>,
}

impl DeadSourceGuard {
    pub(crate) fn new(seed: u64, rank: usize) -> Self {
        Self {
            rng: rng::stream(seed, StreamRole::Reinitialization),
            consecutive: vec![0; rank],
        }
    }

    fn revive_row(&mut self, m: &mut RealMatrix, i: usize, scale: f64) {
        for j in 0..m.ncols() {
            let v: f64 = StandardNormal.sample(&mut self.rng);
            m[(i, j)] = scale * v.abs();
        }
    }

    fn revive_column(&mut self, m: &mut RealMatrix, j: usize, scale: f64) {
        for i in 0..m.nrows() {
            let v: f64 = StandardNormal.sample(&mut self.rng);
            m[(i, j)] = scale * v.abs();
        }
    }

    fn charge(&mut self, i: usize) -> Result<()> {
        self.consecutive[i] += 1;
        if self.consecutive[i] > REINIT_BUDGET {
            return Err(Error::RankCollapse {
                source_index: i,
                attempts: REINIT_BUDGET,
            });
        }
        Ok(())
    }

    /// Revives all-zero rows of `S`. Returns whether anything changed.
    pub(crate) fn check_sources(&mut self, s: &mut RealMatrix) -> Result<bool> {
        let scale = REINIT_SCALE * linops::max_abs(s).max(f64::MIN_POSITIVE);
        let scale = if scale > f64::MIN_POSITIVE { scale } else { REINIT_SCALE };
        let mut changed = false;
        for i in 0..s.nrows() {
            if s.row(i).iter().all(|v| *v == 0.0) {
                self.charge(i)?;
                self.revive_row(s, i, scale);
                changed = true;
            }
        }
        Ok(changed)
    }

    /// Revives all-zero columns of `A`.
    pub(crate) fn check_mixing(&mut self, a: &mut RealMatrix) -> Result<bool> {
        let top = linops::max_abs(a);
        let scale = if top > 0.0 { REINIT_SCALE * top } else { REINIT_SCALE };
        let mut changed = false;
        for j in 0..a.ncols() {
            if a.column(j).iter().all(|v| *v == 0.0) {
                self.charge(j)?;
                self.revive_column(a, j, scale);
                changed = true;
            }
        }
        Ok(changed)
    }

    /// Clears the streak of every source that is alive in both factors.
    pub(crate) fn settle(&mut self, a: &RealMatrix, s: &RealMatrix) {
        for i in 0..self.consecutive.len() {
            let alive = s.row(i).iter().any(|v| *v != 0.0) && a.column(i).iter().any(|v| *v != 0.0);
            if alive {
                self.consecutive[i] = 0;
            }
        }
    }
}

/// Runs the configured algorithm. `a_ref` is required by the oracle only.
pub fn run(y: &RealMatrix, cfg: &AlgorithmConfig, a_ref: Option<&RealMatrix>) -> Result<FitReport> {
    match cfg.algorithm_id {
        AlgorithmId::NgmcaNaive => ngmca_naive(y, cfg),
        AlgorithmId::NgmcaS | AlgorithmId::NgmcaH => {
            let mode = if cfg.algorithm_id == AlgorithmId::NgmcaS {
                Thresholding::Soft
            } else {
                Thresholding::Hard
            };
            let cfg = AlgorithmConfig {
                subsolver: SubsolverOptions {
                    thresholding_mode: mode,
                    ..cfg.subsolver
                },
                ..cfg.clone()
            };
            ngmca(y, &cfg)
        }
        AlgorithmId::Als => als(y, cfg),
        AlgorithmId::Mu => multiplicative_update(y, cfg),
        AlgorithmId::HalsSparse => hals_sparse(y, cfg),
        AlgorithmId::Oracle => {
            let a_ref = a_ref.ok_or_else(|| Error::InvalidConfig("the oracle needs the reference mixing matrix".into()))?;
            let s = oracle_solve(y, a_ref, cfg.tau_final)?;
            let mut report = FitReport::new(FactorPair { a: a_ref.clone(), s }, 1);
            if cfg.record_objective {
                report.objective_trace = Some(vec![linops::half_squared_residual(y, &report.pair.a, &report.pair.s)]);
            }
            Ok(report)
        }
    }
}
