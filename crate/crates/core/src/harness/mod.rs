//! Experiment orchestration: scenarios, presets, replicates and sweeps.
//!
//! Scenario codes:
//!
//! * `rv`: real-valued baseline trained with plain gradient descent.
//! * `dp-1t1r`, `dp-1r`: binary weights trained offline, then written into a
//!   fresh crossbar with strong deterministic pulses.
//! * `st-1t1r`, `st-1r`: in-situ stochastic training on the crossbar.
//!
//! A run with nonzero device variation is the variation study of an ST run.

mod metrics;
mod sweep;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crossbar::{program_deterministic, Architecture, DeterministicDrive, ProgramReport};
use crate::datasets::{self, Dataset, DatasetId};
use crate::device::{DeviceParams, PerDirection};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream, StreamKind};
use crate::training::{
    evaluate, train_insitu, train_reference, CrossbarNetwork, ErrorNorm, PhaseMode, ReferenceMode, Shape,
    TrainConfig, TrainingTrace,
};

pub use metrics::{emit_metrics, emit_sweep, read_summary, TraceRow, SCHEMA_VERSION};
pub use sweep::{sweep, SweepAxis, SweepResult, SweepRow, SweepTable};

/// Device variation levels accepted by experiments.
pub const VARIATION_LEVELS: [f64; 5] = [0.0, 0.02, 0.05, 0.10, 0.20];

/// Switching probability the deterministic programming pulse is sized for.
pub const DP_PULSE_PROBABILITY: f64 = 0.9999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "rv")]
    Rv,
    #[serde(rename = "dp-1t1r")]
    DpOneT1R,
    #[serde(rename = "dp-1r")]
    DpOneR,
    #[serde(rename = "st-1t1r")]
    StOneT1R,
    #[serde(rename = "st-1r")]
    StOneR,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::Rv,
        Scenario::DpOneT1R,
        Scenario::DpOneR,
        Scenario::StOneT1R,
        Scenario::StOneR,
    ];

    /// Crossbar architecture, `None` for the real-valued baseline.
    pub fn arch(self) -> Option<Architecture> {
        match self {
            Scenario::Rv => None,
            Scenario::DpOneT1R | Scenario::StOneT1R => Some(Architecture::OneT1R),
            Scenario::DpOneR | Scenario::StOneR => Some(Architecture::OneR),
        }
    }

    pub fn is_in_situ(self) -> bool {
        matches!(self, Scenario::StOneT1R | Scenario::StOneR)
    }

    pub fn code(self) -> &'static str {
        match self {
            Scenario::Rv => "rv",
            Scenario::DpOneT1R => "dp-1t1r",
            Scenario::DpOneR => "dp-1r",
            Scenario::StOneT1R => "st-1t1r",
            Scenario::StOneR => "st-1r",
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.code() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}` (rv, dp-1t1r, dp-1r, st-1t1r, st-1r)")))
    }
}

/// Input and output widths of each dataset.
pub fn dataset_dims(id: DatasetId) -> (usize, usize) {
    match id {
        DatasetId::Sonar => (60, 1),
        DatasetId::Wbcd => (30, 1),
        DatasetId::Mnist => (784, 10),
    }
}

/// Per-dataset defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetPreset {
    pub arch: &'static str,
    /// Epochs of in-situ or offline binary training.
    pub epochs: usize,
    /// Epochs of the real-valued run that also supplies the weight scales.
    pub reference_epochs: usize,
}

pub fn dataset_preset(id: DatasetId) -> DatasetPreset {
    match id {
        DatasetId::Sonar => DatasetPreset {
            arch: "2L15",
            epochs: 100,
            reference_epochs: 200,
        },
        DatasetId::Wbcd => DatasetPreset {
            arch: "2L20",
            epochs: 50,
            reference_epochs: 200,
        },
        DatasetId::Mnist => DatasetPreset {
            arch: "2L100",
            epochs: 10,
            reference_epochs: 20,
        },
    }
}

/// Hidden widths of a named network: `1L` (none), `2L<h>` (one hidden layer
/// of `h`), `3L` (50 then 25).
pub fn hidden_layers(preset: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("unknown network preset `{preset}` (1L, 2L<h>, 3L)"));
    match preset.to_ascii_uppercase().as_str() {
        "1L" => Ok(vec![]),
        "3L" => Ok(vec![50, 25]),
        p => {
            let h: usize = p.strip_prefix("2L").and_then(|h| h.parse().ok()).ok_or_else(bad)?;
            if h == 0 {
                return Err(bad());
            }
            Ok(vec![h])
        }
    }
}

/// Full layer widths for a preset on a dataset.
pub fn network_shape(dataset: DatasetId, preset: &str) -> Result<Shape> {
    let (d, o) = dataset_dims(dataset);
    let mut shape = vec![d];
    shape.extend(hidden_layers(preset)?);
    shape.push(o);
    Ok(shape)
}

fn default_replicates() -> usize {
    1
}

fn default_eta() -> f64 {
    TrainConfig::default().eta
}

fn default_learning_rate() -> f64 {
    TrainConfig::default().learning_rate
}

fn default_data_dir() -> PathBuf {
    PathBuf::from("data")
}

/// One experiment as written in a config file. Unset optional fields fall
/// back to the dataset preset. Every field is echoed into the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub dataset: DatasetId,
    /// Network preset such as `1L`, `2L15` or `3L`.
    #[serde(default)]
    pub arch: Option<String>,
    /// Write schedule; in-situ scenarios only. 1T1R supports two phases.
    #[serde(default)]
    pub phases: Option<PhaseMode>,
    #[serde(default)]
    pub variation: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default)]
    pub reference_epochs: Option<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default)]
    pub error_norm: ErrorNorm,
    /// Keep only the first `n` training samples.
    #[serde(default)]
    pub train_subset: Option<usize>,
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    /// Device parameter file; calibrated defaults when absent.
    #[serde(default)]
    pub device: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario, dataset: DatasetId) -> Self {
        Self {
            scenario,
            dataset,
            arch: None,
            phases: None,
            variation: 0.0,
            seed: 0,
            epochs: None,
            reference_epochs: None,
            replicates: 1,
            eta: default_eta(),
            learning_rate: default_learning_rate(),
            error_norm: ErrorNorm::default(),
            train_subset: None,
            data_dir: default_data_dir(),
            device: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    /// Checks every field and fills in presets; no data is touched.
    pub fn plan(&self) -> Result<ExperimentPlan> {
        let preset = dataset_preset(self.dataset);
        let arch_name = self.arch.clone().unwrap_or_else(|| preset.arch.to_string());
        let shape = network_shape(self.dataset, &arch_name)?;
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if !VARIATION_LEVELS.iter().any(|v| (v - self.variation).abs() < 1e-12) {
            return Err(Error::Config(format!(
                "variation must be one of {VARIATION_LEVELS:?}, got {}",
                self.variation
            )));
        }
        if self.scenario == Scenario::Rv && self.variation != 0.0 {
            return Err(Error::Config("the rv scenario has no devices to vary".into()));
        }
        let phase_mode = match (self.scenario.arch(), self.phases) {
            (_, Some(mode)) if !self.scenario.is_in_situ() => {
                return Err(Error::Config(format!(
                    "--phases applies to in-situ scenarios only, got {mode} phases for {}",
                    self.scenario
                )))
            }
            (Some(Architecture::OneT1R), Some(PhaseMode::FourPhase)) => {
                return Err(Error::Config("four-phase writes apply to 1R crossbars only".into()))
            }
            (_, Some(mode)) => mode,
            (Some(Architecture::OneR), None) if self.scenario.is_in_situ() => PhaseMode::FourPhase,
            _ => PhaseMode::TwoPhase,
        };
        if self.train_subset == Some(0) {
            return Err(Error::Config("train_subset must be positive".into()));
        }
        let device = match &self.device {
            Some(path) => DeviceParams::load(path)?,
            None => DeviceParams::default(),
        }
        .with_variation(self.variation);
        device.validate()?;
        let train = TrainConfig {
            eta: self.eta,
            epochs: self.epochs.unwrap_or(preset.epochs),
            phase_mode,
            error_norm: self.error_norm,
            learning_rate: self.learning_rate,
            ..TrainConfig::default()
        };
        train.validate()?;
        let reference = TrainConfig {
            epochs: self.reference_epochs.unwrap_or(preset.reference_epochs),
            ..train
        };
        Ok(ExperimentPlan {
            config: self.clone(),
            arch_name,
            shape,
            device,
            train,
            reference,
        })
    }
}

/// A validated experiment with presets resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub config: ExperimentConfig,
    pub arch_name: String,
    pub shape: Shape,
    pub device: DeviceParams,
    /// Binary (in-situ or offline) training.
    pub train: TrainConfig,
    /// Real-valued training.
    pub reference: TrainConfig,
}

impl ExperimentPlan {
    /// Seed of replicate `r`.
    pub fn replicate_seed(&self, r: usize) -> u64 {
        self.config.seed.wrapping_add(r as u64)
    }

    /// Loads the dataset with the replicate's split.
    pub fn load(&self, seed: u64) -> Result<Dataset> {
        let data = datasets::load(self.config.dataset, &self.config.data_dir, seed)?;
        Ok(match self.config.train_subset {
            Some(n) => data.with_train_subset(n),
            None => data,
        })
    }
}

/// Final numbers of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub replicate: usize,
    pub seed: u64,
    /// Classification error (percent) of the final network on the test split.
    pub test_error: f64,
    pub train_mse: f64,
    /// Per-layer weight magnitude handed to the binary network.
    pub scales: Option<Vec<f64>>,
    /// Test error of the offline binary weights before programming.
    pub offline_test_error: Option<f64>,
    pub program: Option<ProgramReport>,
    /// Synapses fabricated for this run.
    pub crossbar_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub shape: Shape,
    pub phase_mode: PhaseMode,
    pub epochs: usize,
    pub reference_epochs: usize,
    pub mean_test_error: f64,
    /// Sample standard deviation over replicates; zero for one replicate.
    pub std_test_error: f64,
    pub mean_train_mse: f64,
    pub runs: Vec<RunRecord>,
}

/// Everything one experiment produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub summary: ExperimentSummary,
    /// Per-replicate training curves; for DP runs the offline curve.
    pub traces: Vec<TrainingTrace>,
    /// Final crossbars per replicate; empty for the baseline.
    pub networks: Vec<Option<CrossbarNetwork>>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs every replicate of `config`. Replicates execute in parallel but
/// results are collected in replicate order, so the outcome does not
/// depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let plan = config.plan()?;
    let outcomes: Vec<(RunRecord, TrainingTrace, Option<CrossbarNetwork>)> = (0..config.replicates)
        .into_par_iter()
        .map(|r| run_replicate(&plan, r))
        .collect::<Result<_>>()?;
    let errors: Vec<f64> = outcomes.iter().map(|o| o.0.test_error).collect();
    let mses: Vec<f64> = outcomes.iter().map(|o| o.0.train_mse).collect();
    let (mean_test_error, std_test_error) = mean_std(&errors);
    let mut runs = Vec::with_capacity(outcomes.len());
    let mut traces = Vec::with_capacity(outcomes.len());
    let mut networks = Vec::with_capacity(outcomes.len());
    for (rec, trace, net) in outcomes {
        runs.push(rec);
        traces.push(trace);
        networks.push(net);
    }
    Ok(ExperimentResult {
        summary: ExperimentSummary {
            schema_version: SCHEMA_VERSION,
            config: plan.config.clone(),
            shape: plan.shape.clone(),
            phase_mode: plan.train.phase_mode,
            epochs: plan.train.epochs,
            reference_epochs: plan.reference.epochs,
            mean_test_error,
            std_test_error,
            mean_train_mse: mean_std(&mses).0,
            runs,
        },
        traces,
        networks,
    })
}

fn cell_count(net: &CrossbarNetwork) -> usize {
    net.layers.iter().map(|l| l.xbar.rows() * l.xbar.cols()).sum()
}

/// One replicate of one scenario.
pub fn run_replicate(
    plan: &ExperimentPlan,
    replicate: usize,
) -> Result<(RunRecord, TrainingTrace, Option<CrossbarNetwork>)> {
    let seed = plan.replicate_seed(replicate);
    let data = plan.load(seed)?;
    let baseline = train_reference(&plan.shape, &data, &plan.reference, &ReferenceMode::RealValued, seed)?;
    let mut rec = RunRecord {
        replicate,
        seed,
        test_error: 0.0,
        train_mse: 0.0,
        scales: None,
        offline_test_error: None,
        program: None,
        crossbar_cells: 0,
    };
    let Some(arch) = plan.config.scenario.arch() else {
        let last = baseline.trace.last().copied().unwrap_or_default();
        rec.test_error = last.test_error;
        rec.train_mse = last.train_mse;
        return Ok((rec, baseline.trace, None));
    };
    // Binary scenarios see the baseline only through its per-layer scales.
    let scales = baseline.network.scales()?;
    drop(baseline);
    rec.scales = Some(scales.clone());

    if plan.config.scenario.is_in_situ() {
        let (net, trace) = run_in_situ(plan, arch, &scales, &data, seed)?;
        let last = trace.last().copied().unwrap_or_default();
        rec.test_error = last.test_error;
        rec.train_mse = last.train_mse;
        rec.crossbar_cells = cell_count(&net);
        return Ok((rec, trace, Some(net)));
    }

    let offline = train_reference(
        &plan.shape,
        &data,
        &plan.train,
        &ReferenceMode::OfflineStochastic { scales: scales.clone() },
        seed,
    )?;
    let states = offline.states.expect("offline stochastic runs return states");
    rec.offline_test_error = Some(offline.trace.last().map_or(0.0, |r| r.test_error));
    // A fresh chip: its own fabrication draws and initial states.
    let chip_seed = derive_seed(seed, &[StreamKind::Program as u64]);
    let mut net = CrossbarNetwork::random(&plan.shape, arch, plan.device, &scales, chip_seed)?;
    let coeff = plan.train.coeff;
    let strongest = PerDirection::new(
        coeff.i0.ap_to_p + coeff.i1.ap_to_p,
        coeff.i0.p_to_ap + coeff.i1.p_to_ap,
    );
    let drive = DeterministicDrive::new(&plan.device, strongest, DP_PULSE_PROBABILITY)?;
    let mut report = ProgramReport::default();
    for (k, (layer, target)) in net.layers.iter_mut().zip(&states).enumerate() {
        let mut rng = stream(seed, StreamKind::Program, k as u64);
        let r = program_deterministic(&mut layer.xbar, target, &drive, &mut rng)?;
        report.corrupted += r.corrupted;
        report.retries_exhausted += r.retries_exhausted;
        report.pulses += r.pulses;
    }
    let (train_mse, _) = evaluate(&net.layers, &data, &data.train)?;
    let (_, test_error) = evaluate(&net.layers, &data, &data.test)?;
    rec.test_error = test_error;
    rec.train_mse = train_mse;
    rec.program = Some(report);
    rec.crossbar_cells = cell_count(&net);
    Ok((rec, offline.trace, Some(net)))
}

/// In-situ training of a fresh crossbar network. Only the weight scales
/// cross over from the baseline.
pub fn run_in_situ(
    plan: &ExperimentPlan,
    arch: Architecture,
    scales: &[f64],
    data: &Dataset,
    seed: u64,
) -> Result<(CrossbarNetwork, TrainingTrace)> {
    let mut net = CrossbarNetwork::random(&plan.shape, arch, plan.device, scales, seed)?;
    let trace = train_insitu(&mut net, data, &plan.train, seed)?;
    Ok((net, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_and_shapes() {
        assert_eq!(network_shape(DatasetId::Sonar, "1L").unwrap(), vec![60, 1]);
        assert_eq!(network_shape(DatasetId::Sonar, "2L15").unwrap(), vec![60, 15, 1]);
        assert_eq!(network_shape(DatasetId::Mnist, "3L").unwrap(), vec![784, 50, 25, 10]);
        assert_eq!(network_shape(DatasetId::Wbcd, "2l10").unwrap(), vec![30, 10, 1]);
        for bad in ["2L", "2L0", "4L", "L15", ""] {
            assert!(hidden_layers(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn scenario_codes_round_trip() {
        for sc in Scenario::ALL {
            assert_eq!(sc.code().parse::<Scenario>().unwrap(), sc);
        }
        assert!("dv".parse::<Scenario>().is_err());
    }

    #[test]
    fn invalid_combinations_rejected() {
        let base = ExperimentConfig::new(Scenario::StOneR, DatasetId::Sonar);
        assert!(base.plan().is_ok());
        let cases = [
            ExperimentConfig { variation: 0.07, ..base.clone() },
            ExperimentConfig { scenario: Scenario::Rv, variation: 0.1, ..base.clone() },
            ExperimentConfig { scenario: Scenario::StOneT1R, phases: Some(PhaseMode::FourPhase), ..base.clone() },
            ExperimentConfig { scenario: Scenario::DpOneR, phases: Some(PhaseMode::TwoPhase), ..base.clone() },
            ExperimentConfig { replicates: 0, ..base.clone() },
            ExperimentConfig { eta: 1.5, ..base.clone() },
            ExperimentConfig { arch: Some("9L".into()), ..base.clone() },
            ExperimentConfig { train_subset: Some(0), ..base.clone() },
        ];
        for cfg in cases {
            assert!(matches!(cfg.plan(), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn default_phase_modes() {
        let plan = |sc| ExperimentConfig::new(sc, DatasetId::Sonar).plan().unwrap().train.phase_mode;
        assert_eq!(plan(Scenario::StOneR), PhaseMode::FourPhase);
        assert_eq!(plan(Scenario::StOneT1R), PhaseMode::TwoPhase);
        assert_eq!(plan(Scenario::DpOneR), PhaseMode::TwoPhase);
    }

    #[test]
    fn config_toml_round_trip() {
        let cfg = ExperimentConfig {
            arch: Some("1L".into()),
            phases: Some(PhaseMode::TwoPhase),
            variation: 0.05,
            seed: 9,
            train_subset: Some(50),
            ..ExperimentConfig::new(Scenario::StOneR, DatasetId::Wbcd)
        };
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        let minimal = ExperimentConfig::from_toml("scenario = \"rv\"\ndataset = \"sonar\"\n").unwrap();
        assert_eq!(minimal, ExperimentConfig::new(Scenario::Rv, DatasetId::Sonar));
        assert!(ExperimentConfig::from_toml("scenario = \"rv\"\ndataset = \"sonar\"\nbogus = 1\n").is_err());
    }

    #[test]
    fn mean_and_sample_std() {
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
