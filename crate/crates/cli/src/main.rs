mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use galam_core::exact::{self, AbsorptionReport};
use galam_core::experiments::{self, SweepResult, TightnessKind};
use galam_core::model::{self, DEFAULT_GRID_RESOLUTION, DEFAULT_TOLERANCE};
use galam_core::output::{format_float, to_sorted_json, write_record};
use galam_core::process::{self, ConsensusStats, TrialConfig, DEFAULT_SEED};
use galam_core::{GalamError, Result, RoomConfig, VariantSpec};
use serde::Serialize;

use crate::config::load_room_config;

#[derive(Parser)]
#[command(
    name = "galam",
    version,
    about = "Majority-rule opinion dynamics on random rooms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// Room layout: inline JSON or a path to a JSON file.
    #[arg(long, visible_alias = "config")]
    rooms: Option<String>,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    output: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long, env = "GALAM_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Record the wall-clock time in sweep metadata (breaks byte-identical reruns).
    #[arg(long)]
    timestamp: bool,
}

#[derive(Args)]
struct VariantArgs {
    /// Tie-break variant: tied seats turn positive with probability K.
    #[arg(long, value_name = "K", conflicts_with = "inflexible")]
    tie_break: Option<f64>,
    /// Inflexible variant with fractions A,B of positive / negative inflexibles.
    #[arg(long, value_name = "A,B")]
    inflexible: Option<String>,
}

impl VariantArgs {
    fn spec(&self) -> Result<VariantSpec> {
        let variant = match (&self.tie_break, &self.inflexible) {
            (Some(k), _) => VariantSpec::TieBreak { k: *k },
            (None, Some(ab)) => {
                let parts: Vec<&str> = ab.split(',').collect();
                let parse = |s: &str| {
                    s.trim().parse::<f64>().map_err(|_| {
                        GalamError::Usage(format!("--inflexible expects A,B, got {ab:?}"))
                    })
                };
                match parts.as_slice() {
                    [a, b] => VariantSpec::Inflexible {
                        a: parse(a)?,
                        b: parse(b)?,
                    },
                    _ => {
                        return Err(GalamError::Usage(format!(
                            "--inflexible expects A,B, got {ab:?}"
                        )))
                    }
                }
            }
            (None, None) => VariantSpec::Standard,
        };
        variant.validate()?;
        Ok(variant)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Interior fixed points of the expectation polynomial.
    FixedPoint {
        #[arg(long, default_value_t = DEFAULT_GRID_RESOLUTION)]
        grid_resolution: f64,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
        #[command(flatten)]
        common: Common,
    },
    /// One trial until absorption.
    Simulate {
        #[arg(long)]
        start: u64,
        #[arg(long)]
        max_rounds: Option<u64>,
        /// Emit the positive-count trajectory.
        #[arg(long)]
        trajectory: bool,
        #[arg(long, default_value_t = 0)]
        victory_slack: u64,
        #[command(flatten)]
        variant: VariantArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Aggregate statistics over independent trials.
    Ensemble {
        #[arg(long)]
        start: u64,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long)]
        max_rounds: Option<u64>,
        #[arg(long, default_value_t = 0)]
        victory_slack: u64,
        /// Also write per-trial trajectories (trial_id,t,n_plus) to this file.
        #[arg(long, value_name = "PATH")]
        trajectories: Option<String>,
        #[command(flatten)]
        variant: VariantArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Exact absorption probabilities and expected times.
    Exact {
        /// Report only this starting state.
        #[arg(long)]
        start: Option<u64>,
        /// Emit the transition matrix instead.
        #[arg(long)]
        matrix: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Absorption frequencies over a grid of starting fractions.
    Scan {
        /// Comma-separated starting fractions.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0.3,0.35,0.4,0.45,0.5,0.55,0.6,0.65,0.7"
        )]
        grid: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[command(flatten)]
        variant: VariantArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Mean consensus rounds against n for single-size layouts.
    Scaling {
        #[arg(long, default_value_t = 5)]
        size: u32,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "1000,10000,100000,1000000"
        )]
        n_list: Vec<u64>,
        #[arg(long, default_value_t = 0.7)]
        start_fraction: f64,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Finite-n tightness probes.
    Tightness {
        /// loglog or log
        #[arg(long, default_value = "loglog")]
        kind: String,
        #[arg(long, default_value_t = 3)]
        size: u32,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 1_000_000)]
        n: u64,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Thresholds of even single-size layouts.
    Monotonicity {
        #[arg(long, default_value_t = 16)]
        max_even_size: u32,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::FixedPoint { common, .. }
            | Command::Simulate { common, .. }
            | Command::Ensemble { common, .. }
            | Command::Exact { common, .. }
            | Command::Scan { common, .. }
            | Command::Scaling { common, .. }
            | Command::Tightness { common, .. }
            | Command::Monotonicity { common, .. } => common,
        }
    }
}

fn rooms(common: &Common) -> Result<RoomConfig> {
    let source = common
        .rooms
        .as_deref()
        .ok_or_else(|| GalamError::Usage("--rooms is required for this subcommand".into()))?;
    let loaded = load_room_config(source)?;
    if let Some(note) = loaded.note {
        eprintln!("{note}");
    }
    Ok(loaded.config)
}

fn stamp(sweep: &mut SweepResult, common: &Common) {
    if common.timestamp {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        sweep.metadata.timestamp = Some(secs.to_string());
    }
}

fn json_line<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    writeln!(out, "{}", to_sorted_json(value)?)?;
    Ok(())
}

fn trial_config(
    config: RoomConfig,
    start: u64,
    variant: &VariantArgs,
    max_rounds: Option<u64>,
    victory_slack: u64,
    seed: u64,
) -> Result<TrialConfig> {
    let mut tc = TrialConfig::new(config, start)
        .with_variant(variant.spec()?)
        .with_seed(seed);
    tc.max_rounds = max_rounds;
    tc.victory_slack = victory_slack;
    tc.validate()?;
    Ok(tc)
}

#[derive(Serialize)]
struct ExactPoint {
    n: u64,
    start: u64,
    #[serde(rename = "prob_S_plus")]
    prob_s_plus: f64,
    expected_time: f64,
}

#[derive(Serialize)]
struct ScalingOutput<'a> {
    sweep: &'a SweepResult,
    fit: &'a experiments::ScalingFit,
}

fn run(cmd: &Command, out: &mut dyn Write) -> Result<()> {
    let common = cmd.common();
    let format = common.format;
    match cmd {
        Command::FixedPoint {
            grid_resolution,
            tolerance,
            ..
        } => {
            let report = model::find_fixed_points(&rooms(common)?, *grid_resolution, *tolerance)?;
            match format {
                Format::Json => json_line(out, &report),
                Format::Csv => {
                    write_record(out, &["root", "bracket_lo", "bracket_hi"].map(String::from))?;
                    for (root, (lo, hi)) in report.roots.iter().zip(&report.brackets) {
                        write_record(
                            out,
                            &[format_float(*root), format_float(*lo), format_float(*hi)],
                        )?;
                    }
                    Ok(())
                }
            }
        }
        Command::Simulate {
            start,
            max_rounds,
            trajectory,
            victory_slack,
            variant,
            ..
        } => {
            let tc = trial_config(
                rooms(common)?,
                *start,
                variant,
                *max_rounds,
                *victory_slack,
                common.seed,
            )?
            .with_trajectory(*trajectory);
            let result = process::run_trial(&tc)?;
            match format {
                Format::Json => json_line(out, &result),
                Format::Csv if *trajectory => {
                    process::write_trajectories_csv(std::slice::from_ref(&result), out)
                }
                Format::Csv => {
                    write_record(
                        out,
                        &["outcome", "rounds", "final_positive"].map(String::from),
                    )?;
                    write_record(
                        out,
                        &[
                            result.outcome.as_str().to_string(),
                            result.rounds.to_string(),
                            result.final_positive.to_string(),
                        ],
                    )
                }
            }
        }
        Command::Ensemble {
            start,
            trials,
            max_rounds,
            victory_slack,
            trajectories,
            variant,
            ..
        } => {
            let tc = trial_config(
                rooms(common)?,
                *start,
                variant,
                *max_rounds,
                *victory_slack,
                common.seed,
            )?
            .with_trajectory(trajectories.is_some());
            let results = process::run_ensemble_trials(&tc, *trials, common.workers)?;
            if let Some(path) = trajectories {
                let mut file = BufWriter::new(File::create(path)?);
                process::write_trajectories_csv(&results, &mut file)?;
                file.flush()?;
            }
            let stats = ConsensusStats::from_results(&results);
            match format {
                Format::Json => json_line(out, &stats),
                Format::Csv => stats.write_csv(&tc, out),
            }
        }
        Command::Exact { start, matrix, .. } => {
            let config = rooms(common)?;
            if let Some(u) = start {
                if *u > config.n() {
                    return Err(GalamError::Domain(format!(
                        "start {u} exceeds n={}",
                        config.n()
                    )));
                }
            }
            let m = exact::transition_matrix(&config)?;
            if *matrix {
                return match format {
                    Format::Json => json_line(out, &m),
                    Format::Csv => m.write_csv(out),
                };
            }
            let report = AbsorptionReport::from_matrix(&m)?;
            match (start, format) {
                (Some(u), Format::Json) => json_line(
                    out,
                    &ExactPoint {
                        n: report.n,
                        start: *u,
                        prob_s_plus: report.prob_s_plus[*u as usize],
                        expected_time: report.expected_time[*u as usize],
                    },
                ),
                (Some(u), Format::Csv) => {
                    write_record(
                        out,
                        &["u", "prob_S_plus", "expected_time"].map(String::from),
                    )?;
                    let i = *u as usize;
                    write_record(
                        out,
                        &[
                            u.to_string(),
                            format_float(report.prob_s_plus[i]),
                            format_float(report.expected_time[i]),
                        ],
                    )
                }
                (None, Format::Json) => json_line(out, &report),
                (None, Format::Csv) => report.write_csv(&config, out),
            }
        }
        Command::Scan {
            grid,
            trials,
            variant,
            ..
        } => {
            let mut sweep = experiments::threshold_scan(
                &rooms(common)?,
                variant.spec()?,
                grid,
                *trials,
                common.seed,
                common.workers,
            )?;
            stamp(&mut sweep, common);
            emit_sweep(&sweep, format, out)
        }
        Command::Scaling {
            size,
            n_list,
            start_fraction,
            trials,
            ..
        } => {
            let family = |n| RoomConfig::uniform_with_seats(*size, n);
            let (mut sweep, fit) = experiments::consensus_scaling(
                family,
                n_list,
                *start_fraction,
                *trials,
                common.seed,
                common.workers,
            )?;
            stamp(&mut sweep, common);
            match format {
                Format::Json => json_line(
                    out,
                    &ScalingOutput {
                        sweep: &sweep,
                        fit: &fit,
                    },
                ),
                Format::Csv => {
                    sweep.write_csv(out)?;
                    fit.write_csv(out)
                }
            }
        }
        Command::Tightness {
            kind,
            size,
            eps,
            n,
            trials,
            ..
        } => {
            let kind = TightnessKind::parse(kind, *size, *eps)?;
            let mut sweep =
                experiments::tightness_probe(kind, *n, *trials, common.seed, common.workers)?;
            for warning in &sweep.metadata.warnings {
                eprintln!("warning: {warning}");
            }
            stamp(&mut sweep, common);
            emit_sweep(&sweep, format, out)
        }
        Command::Monotonicity { max_even_size, .. } => {
            let table = experiments::threshold_monotonicity(*max_even_size)?;
            match format {
                Format::Json => json_line(out, &table),
                Format::Csv => experiments::write_thresholds_csv(&table, out),
            }
        }
    }
}

fn emit_sweep(sweep: &SweepResult, format: Format, out: &mut dyn Write) -> Result<()> {
    match format {
        Format::Json => json_line(out, sweep),
        Format::Csv => sweep.write_csv(out),
    }
}

fn execute(cmd: &Command) -> Result<()> {
    match &cmd.common().output {
        Some(path) => {
            let mut file = BufWriter::new(File::create(path)?);
            run(cmd, &mut file)?;
            file.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            run(cmd, &mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = match &e {
                GalamError::Domain(m) | GalamError::Usage(m) => m.clone(),
                other => other.to_string(),
            };
            eprintln!("error: {message}");
            ExitCode::from(if matches!(e, GalamError::Usage(_)) {
                1
            } else {
                2
            })
        }
    }
}
