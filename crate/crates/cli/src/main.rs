//! `ngmca`: generate instances, run factorizations, score them, and run
//! benchmark campaigns.
//!
//! Exit status: 0 on success, 1 on a usage or configuration error, 2 when
//! the work itself fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde::Serialize;

use ngmca::algorithms::{self, AlgorithmConfig, AlgorithmId};
use ngmca::bench::{self, BenchmarkConfig};
use ngmca::container;
use ngmca::datagen::{gen_instance, InstanceSpec};
use ngmca::{linops, metrics, Error};

#[derive(Parser)]
#[command(name = "ngmca", version, about = "Sparse non-negative blind source separation benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a problem instance from a JSON instance spec.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Factorize the data of an instance.
    Run {
        #[arg(long)]
        algorithm: AlgorithmId,
        #[arg(long)]
        instance: PathBuf,
        /// JSON algorithm config; `rank` defaults to the instance's rank.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a factor pair against the instance's reference sources.
    Eval {
        #[arg(long)]
        factors: PathBuf,
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a benchmark campaign.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `output_dir` of the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Full-size data and trial counts.
        #[arg(long)]
        paper_scale: bool,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Plot a campaign summary.
    Plot {
        #[arg(long)]
        summary: PathBuf,
        #[arg(long = "x")]
        x_axis: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Serialize)]
struct Evaluation {
    algorithm_id: AlgorithmId,
    mean_sdr_db: f64,
    per_source_sdr_db: Vec<f64>,
    /// `permutation[i]` is the reference source paired with estimate `i`.
    permutation: Vec<usize>,
    final_objective: f64,
    relative_residual: f64,
    measured_snr_db: Option<f64>,
    /// Hoyer sparseness of each estimated source; `null` for an all-zero row.
    sparseness: Vec<Option<f64>>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(Error::from)
        .with_context(|| format!("parsing {}", path.display()))
}

fn algorithm_config(algorithm: AlgorithmId, config: Option<&Path>, rank: usize) -> anyhow::Result<AlgorithmConfig> {
    let Some(path) = config else {
        return Ok(AlgorithmConfig::new(algorithm, rank));
    };
    let mut value: serde_json::Value = read_json(path)?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::InvalidConfig(format!("{} is not a JSON object", path.display())))?;
    obj.entry("rank").or_insert(rank.into());
    obj.insert("algorithm_id".into(), serde_json::to_value(algorithm).map_err(Error::from)?);
    Ok(serde_json::from_value(value).map_err(Error::from)?)
}

fn execute(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Generate { spec, out } => {
            let spec: InstanceSpec = read_json(&spec)?;
            let inst = gen_instance(&spec)?;
            container::save_instance(&out, &inst)?;
            eprintln!(
                "wrote {}x{} instance (r={}, measured SNR {:.2} dB) to {}",
                spec.m,
                spec.n,
                spec.r,
                metrics::measure_snr(&inst.y, &inst.clean()),
                out.display()
            );
        }
        Command::Run {
            algorithm,
            instance,
            config,
            out,
        } => {
            let inst = container::load_instance(&instance)?;
            let cfg = algorithm_config(algorithm, config.as_deref(), inst.a_ref.ncols())?;
            let report = algorithms::run(&inst.y, &cfg, Some(&inst.a_ref))?;
            container::save_factors(&out, &report.pair, &cfg)?;
            eprintln!("{algorithm}: {} iterations, wrote {}", report.iterations_run, out.display());
        }
        Command::Eval { factors, instance, out } => {
            let (pair, cfg) = container::load_factors(&factors)?;
            let inst = container::load_instance(&instance)?;
            let pairing = metrics::pair_sources(&pair.s, &inst.s_ref, &inst.z)?;
            let objective = linops::half_squared_residual(&inst.y, &pair.a, &pair.s);
            let clean = inst.clean();
            let snr = metrics::measure_snr(&inst.y, &clean);
            let eval = Evaluation {
                algorithm_id: cfg.algorithm_id,
                mean_sdr_db: pairing.mean_sdr_db,
                per_source_sdr_db: pairing.per_source_sdr_db,
                permutation: pairing.permutation,
                final_objective: objective,
                relative_residual: (2.0 * objective).sqrt() / inst.y.norm().max(f64::MIN_POSITIVE),
                measured_snr_db: snr.is_finite().then_some(snr),
                sparseness: pair
                    .s
                    .row_iter()
                    .map(|row| metrics::hoyer_sparseness(&row.iter().copied().collect::<Vec<_>>()).ok())
                    .collect(),
            };
            fs::write(&out, serde_json::to_string_pretty(&eval)? + "\n")?;
            println!("mean SDR {:.2} dB", eval.mean_sdr_db);
        }
        Command::Bench {
            config,
            out,
            paper_scale,
            workers,
        } => {
            let mut cfg: BenchmarkConfig = read_json(&config)?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            if paper_scale {
                cfg = cfg.paper_scale();
            }
            let records = bench::run_campaign_with(&cfg, workers)?;
            let summary = bench::write_campaign(&cfg, &records, &cfg.output_dir)?;
            println!("{:<12} {:>4} {:>5} {:>5} {:>6} {:>7} {:>8} {:>10} {:>8} {:>5}", "algorithm", "r", "m", "n", "p_s", "alpha_a", "snr_db", "mean", "sem", "err");
            for row in &summary {
                println!(
                    "{:<12} {:>4} {:>5} {:>5} {:>6} {:>7} {:>8} {:>10.3} {:>8.3} {:>5}",
                    row.algorithm_id, row.r, row.m, row.n, row.p_s, row.alpha_a, row.snr_db, row.mean, row.sem, row.errors
                );
            }
            eprintln!("{} records written to {}", records.len(), cfg.output_dir.display());
        }
        Command::Plot { summary, x_axis, out } => {
            let rows = bench::read_summary(&summary)?;
            let files = bench::emit_plot(&rows, &x_axis, &out)?;
            eprintln!("wrote {} and {}", files.svg.display(), files.csv.display());
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidConfig(_) | Error::UnknownAxis(_) | Error::Json(_)) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
