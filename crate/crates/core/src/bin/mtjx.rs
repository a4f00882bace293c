//! `mtjx`: run experiments, sweeps and device calibration.
//!
//! Results go to stdout as JSON. Failures print `{"error": {...}}` to stderr
//! and exit with 2 for usage or configuration problems, 1 otherwise.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use mtj_xbar::datasets::DatasetId;
use mtj_xbar::device::{calibrate_device, calibrate_direction, SwitchDirection, NOMINAL_R_AP, NOMINAL_R_P};
use mtj_xbar::harness::{emit_metrics, emit_sweep, run_experiment, sweep, ExperimentConfig, Scenario, SweepAxis};
use mtj_xbar::training::{ErrorNorm, MappingCoefficients, PhaseMode, TrainConfig};
use mtj_xbar::Error;

#[derive(Parser)]
#[command(name = "mtjx", version, about = "MTJ crossbar training simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Train(ExperimentArgs),
    /// Run one experiment per value of an axis.
    Sweep {
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// Comma-separated axis values; defaults to every allowed value.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<String>>,
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Fit switching parameters to the write-mapping anchors.
    Calibrate {
        #[arg(long, value_enum)]
        direction: Option<DirectionArg>,
        /// Write the calibrated device file here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Variation,
    Phases,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Ap2p,
    P2ap,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment file (TOML); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    dataset: Option<String>,
    /// Network preset: 1L, 2L<h> or 3L.
    #[arg(long)]
    arch: Option<String>,
    #[arg(long)]
    phases: Option<String>,
    #[arg(long)]
    variation: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    reference_epochs: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long, value_parser = ["clip", "peak"])]
    error_norm: Option<String>,
    #[arg(long)]
    train_subset: Option<usize>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Device parameter file.
    #[arg(long)]
    device: Option<PathBuf>,
    /// Output directory for traces, summary and crossbar dumps.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn build(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_toml(&std::fs::read_to_string(path)?)?,
            None => {
                let need = |v: &Option<String>, flag: &str| {
                    v.clone().ok_or_else(|| Error::Config(format!("--{flag} is required without --config")))
                };
                let scenario: Scenario = need(&self.scenario, "scenario")?.parse()?;
                let dataset: DatasetId = need(&self.dataset, "dataset")?.parse()?;
                ExperimentConfig::new(scenario, dataset)
            }
        };
        if let Some(s) = &self.scenario {
            cfg.scenario = s.parse()?;
        }
        if let Some(d) = &self.dataset {
            cfg.dataset = d.parse()?;
        }
        if let Some(a) = &self.arch {
            cfg.arch = Some(a.clone());
        }
        if let Some(p) = &self.phases {
            cfg.phases = Some(p.parse()?);
        }
        if let Some(v) = self.variation {
            cfg.variation = v;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(e) = self.epochs {
            cfg.epochs = Some(e);
        }
        if let Some(e) = self.reference_epochs {
            cfg.reference_epochs = Some(e);
        }
        if let Some(r) = self.replicates {
            cfg.replicates = r;
        }
        if let Some(e) = self.eta {
            cfg.eta = e;
        }
        if let Some(l) = self.learning_rate {
            cfg.learning_rate = l;
        }
        if let Some(n) = &self.error_norm {
            cfg.error_norm = if n == "peak" { ErrorNorm::Peak } else { ErrorNorm::Clip };
        }
        if let Some(n) = self.train_subset {
            cfg.train_subset = Some(n);
        }
        if let Some(d) = &self.data_dir {
            cfg.data_dir = d.clone();
        }
        if let Some(d) = &self.device {
            cfg.device = Some(d.clone());
        }
        Ok(cfg)
    }
}

fn parse_axis(axis: AxisArg, values: Option<&[String]>) -> Result<SweepAxis, Error> {
    Ok(match axis {
        AxisArg::Variation => SweepAxis::Variation(match values {
            Some(v) => v
                .iter()
                .map(|s| s.trim().parse().map_err(|_| Error::Config(format!("bad variation `{s}`"))))
                .collect::<Result<_, _>>()?,
            None => mtj_xbar::harness::VARIATION_LEVELS.to_vec(),
        }),
        AxisArg::Phases => SweepAxis::Phases(match values {
            Some(v) => v.iter().map(|s| s.trim().parse()).collect::<Result<_, _>>()?,
            None => vec![PhaseMode::TwoPhase, PhaseMode::FourPhase],
        }),
    })
}

fn run(cli: Cli) -> Result<serde_json::Value, Error> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.build()?;
            let result = run_experiment(&cfg)?;
            if let Some(out) = &args.out {
                emit_metrics(&result, out)?;
            }
            Ok(serde_json::to_value(&result.summary)?)
        }
        Command::Sweep { axis, values, exp } => {
            let cfg = exp.build()?;
            let axis = parse_axis(axis, values.as_deref())?;
            let result = sweep(&cfg, &axis)?;
            if let Some(out) = &exp.out {
                emit_sweep(&result, out)?;
            }
            Ok(serde_json::to_value(&result.table)?)
        }
        Command::Calibrate { direction, out } => {
            let cfg = TrainConfig::default();
            let targets = MappingCoefficients::default().anchors(cfg.p0, cfg.p_top);
            let report = calibrate_device(&targets, NOMINAL_R_P, NOMINAL_R_AP)?;
            if let Some(path) = &out {
                report.params.save(path)?;
            }
            Ok(match direction {
                Some(d) => {
                    let dir = match d {
                        DirectionArg::Ap2p => SwitchDirection::ApToP,
                        DirectionArg::P2ap => SwitchDirection::PToAp,
                    };
                    serde_json::to_value(calibrate_direction(dir, &targets[dir])?)?
                }
                None => serde_json::to_value(&report)?,
            })
        }
    }
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim(), 2),
    };
    match run(cli) {
        Ok(value) => {
            println!("{}", serde_json::to_string_pretty(&value).expect("json value serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = if matches!(e, Error::Config(_)) { 2 } else { 1 };
            fail(e.kind(), &e.to_string(), code)
        }
    }
}
