//! Command-line interface. Exit codes: 0 success, 1 oracle failure,
//! 2 input or runtime error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use pricing_core::csvio::{read_dataset, write_dataset};
use pricing_core::oracle::{run_all, OracleOptions, OracleRow};
use pricing_core::policy::{FixedPolicy, LinearSoftmaxPolicy, Policy};
use pricing_core::{PolicyDist, PriceLadder, Propensities};
use serde::Deserialize;

use crate::config::{ExperimentConfig, Preset};
use crate::error::{BenchError, Result};
use crate::experiments::{csv_report_rows, eval_sweep, evaluate_dataset, generate, learn_sweep, sales_regime};
use crate::results::write_rows;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "pricing-bench", version, about = "Off-policy pricing estimators: oracle checks and experiment sweeps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON config overriding the subcommand's defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Base seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Replication count (overrides `reps` and `learn_reps`).
    #[arg(long, global = true)]
    pub reps: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every brute-force oracle and report one CSV row per check.
    OracleCheck {
        /// Random instances per sweep.
        #[arg(long, default_value_t = 200)]
        instances: usize,
        /// Skip the minimax grid search.
        #[arg(long)]
        skip_minimax: bool,
        /// Test hook: corrupt every constructed estimator.
        #[arg(long, hide = true)]
        break_estimators: bool,
    },
    /// Policy evaluation MSE across sample sizes and demand qualities.
    EvalSweep,
    /// Policy learning reward across sample sizes and demand qualities.
    LearnSweep,
    /// IPS against Robust at high, medium and low sale probability.
    SalesRegime,
    /// Estimate a policy's value on an external logged dataset.
    EvalCsv {
        /// Dataset CSV (features x_*, price_index, sold, optional pi_*).
        #[arg(long)]
        data: PathBuf,
        /// Policy JSON: {"type":"fixed","probs":[..]} or
        /// {"type":"linear","m":..,"d":..,"theta":[..]}.
        #[arg(long)]
        policy: PathBuf,
        /// Propensities for every row when the file has no pi_* columns.
        #[arg(long, value_delimiter = ',')]
        propensities: Option<Vec<f64>>,
    },
    /// Emit a synthetic logged dataset as CSV.
    Gen {
        /// Number of records (overrides the config's `n`).
        #[arg(long)]
        n: Option<usize>,
    },
}

/// Policy file formats accepted by `eval-csv`.
#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PolicySpec {
    Fixed { probs: Vec<f64> },
    Linear { m: usize, d: usize, theta: Vec<f64> },
}

impl PolicySpec {
    pub fn load(path: &Path) -> Result<Box<dyn Policy>> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        let spec: PolicySpec =
            serde_json::from_str(&text).map_err(|e| BenchError::Config(format!("policy file: {e}")))?;
        Ok(match spec {
            PolicySpec::Fixed { probs } => Box::new(FixedPolicy::new(PolicyDist::new(probs)?)),
            PolicySpec::Linear { m, d, theta } => Box::new(LinearSoftmaxPolicy::from_theta(m, d, theta)?),
        })
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn preset(cmd: &Command) -> Preset {
    match cmd {
        Command::OracleCheck { .. } => Preset::OracleCheck,
        Command::EvalSweep => Preset::EvalSweep,
        Command::LearnSweep => Preset::LearnSweep,
        Command::SalesRegime => Preset::SalesRegime,
        Command::EvalCsv { .. } => Preset::EvalCsv,
        Command::Gen { .. } => Preset::Gen,
    }
}

/// Resolves the effective configuration: preset, then file, then flags.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(preset(&cli.command), cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(r) = cli.reps {
        cfg.reps = r;
        cfg.learn_reps = r;
    }
    if let Command::Gen { n: Some(n) } = cli.command {
        cfg.n = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_oracle_rows<W: Write>(rows: &[OracleRow], w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn execute(cli: &Cli) -> Result<i32> {
    let cfg = resolve_config(cli)?;
    log::info!("config hash {}", cfg.hash());
    match &cli.command {
        Command::OracleCheck {
            instances,
            skip_minimax,
            break_estimators,
        } => {
            let opts = OracleOptions {
                instances: *instances,
                minimax: !skip_minimax,
                break_estimators: *break_estimators,
                ..OracleOptions::default()
            };
            let rows = run_all(cfg.seed, &opts)?;
            write_oracle_rows(&rows, output(cli.out.as_deref())?)?;
            let failed: Vec<&OracleRow> = rows.iter().filter(|r| !r.pass).collect();
            for r in &failed {
                eprintln!("oracle check failed: {} (seed {}, max error {:e})", r.check, r.seed, r.max_error);
            }
            Ok(if failed.is_empty() { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::EvalSweep => {
            write_rows(&eval_sweep(&cfg)?, output(cli.out.as_deref())?)?;
            Ok(EXIT_OK)
        }
        Command::LearnSweep => {
            write_rows(&learn_sweep(&cfg)?, output(cli.out.as_deref())?)?;
            Ok(EXIT_OK)
        }
        Command::SalesRegime => {
            write_rows(&sales_regime(&cfg)?, output(cli.out.as_deref())?)?;
            Ok(EXIT_OK)
        }
        Command::EvalCsv {
            data,
            policy,
            propensities,
        } => {
            let ladder = PriceLadder::new(cfg.ladder.clone(), cfg.unit_cost)?;
            let fallback = propensities.clone().map(Propensities::new).transpose()?;
            let file = File::open(data)
                .map_err(|e| BenchError::Config(format!("cannot open {}: {e}", data.display())))?;
            let dataset = read_dataset(file, &ladder, fallback.as_ref())?;
            let policy = PolicySpec::load(policy)?;
            let report = evaluate_dataset(&dataset, policy.as_ref(), &cfg)?;
            for e in &report.estimates {
                eprintln!(
                    "{:<14} value {:.6} ± {:.6}{}",
                    e.method,
                    e.value,
                    e.stderr,
                    e.chosen_c.map(|c| format!(" (c = {c:.3})")).unwrap_or_default()
                );
            }
            eprintln!("rows {}, min propensity {:e}", report.rows, report.min_propensity);
            write_rows(&csv_report_rows(&report, &cfg), output(cli.out.as_deref())?)?;
            Ok(EXIT_OK)
        }
        Command::Gen { .. } => {
            let data = generate(&cfg)?;
            write_dataset(&data, output(cli.out.as_deref())?)?;
            Ok(EXIT_OK)
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}
