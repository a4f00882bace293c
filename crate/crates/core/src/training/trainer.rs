//! Online training loops and per-epoch traces.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mapping::MappingCoefficients;
use super::network::{backward, forward, predict, with_bias, CrossbarNetwork, DenseNetwork, Layer};
use super::schedule::{schedule_phases, PhaseMode};
use crate::crossbar::Architecture;
use crate::datasets::{classification_error, Dataset};
use crate::device::{DeviceParams, MtjState};
use crate::error::{check_dim, Error, Result};
use crate::rng::{stream, SimRng, StreamKind};

/// How raw error terms are brought into `[-1, 1]` before scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorNorm {
    /// `delta / max(1, max_j |delta_j|)` per layer: small errors stay small.
    #[default]
    Clip,
    /// `delta / max_j |delta_j|` per layer: the largest error is always full scale.
    Peak,
}

impl ErrorNorm {
    pub fn apply(self, delta: &[f64]) -> Vec<f64> {
        let peak = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let div = match self {
            ErrorNorm::Clip => peak.max(1.0),
            ErrorNorm::Peak if peak > 0.0 => peak,
            ErrorNorm::Peak => 1.0,
        };
        delta.iter().map(|d| d / div).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Target flip probability at full-scale input and error.
    pub eta: f64,
    pub epochs: usize,
    /// Flip probability at the edge of the mapping (zero input or error).
    pub p0: f64,
    /// Flip probability the mapping delivers at `|x| = |delta| = 1`.
    pub p_top: f64,
    pub phase_mode: PhaseMode,
    pub error_norm: ErrorNorm,
    /// Step size of the real-valued baseline.
    pub learning_rate: f64,
    pub coeff: MappingCoefficients,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta: 0.7,
            epochs: 100,
            p0: 0.05,
            p_top: 0.7,
            phase_mode: PhaseMode::FourPhase,
            error_norm: ErrorNorm::Clip,
            learning_rate: 0.05,
            coeff: MappingCoefficients::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Config(format!("eta must lie in [0, 1], got {}", self.eta)));
        }
        if !(0.0 < self.p0 && self.p0 < self.p_top && self.p_top < 1.0) {
            return Err(Error::Config(format!(
                "need 0 < p0 < p_top < 1, got p0 = {}, p_top = {}",
                self.p0, self.p_top
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        self.coeff.validate()
    }

    /// Error magnitudes handed to the pulse-width map.
    pub fn scheduled_error(&self, delta: &[f64]) -> Vec<f64> {
        let k = self.eta / self.p_top;
        self.error_norm
            .apply(delta)
            .iter()
            .map(|d| (k * d).clamp(-1.0, 1.0))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub test_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingTrace {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

/// Mean squared error per output and classification error (percent) over
/// the given samples.
pub fn evaluate<L: Layer>(layers: &[L], data: &Dataset, samples: &[usize]) -> Result<(f64, f64)> {
    let w = data.outputs();
    let mut outputs = Vec::with_capacity(samples.len() * w);
    let mut targets = Vec::with_capacity(samples.len() * w);
    let mut sq = 0.0;
    for &k in samples {
        let y = predict(layers, data.features(k))?;
        let t = data.target(k);
        sq += y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        outputs.extend_from_slice(&y);
        targets.extend_from_slice(t);
    }
    let mse = if samples.is_empty() { 0.0 } else { sq / (samples.len() * w) as f64 };
    Ok((mse, classification_error(&outputs, &targets, w)?))
}

fn check_data<L: Layer>(layers: &[L], data: &Dataset) -> Result<()> {
    super::network::check_chain(layers)?;
    check_dim("network inputs", data.dims(), layers[0].inputs())?;
    check_dim("network outputs", data.outputs(), layers[layers.len() - 1].outputs())
}

fn record<L: Layer>(layers: &[L], data: &Dataset, epoch: usize) -> Result<EpochRecord> {
    let (train_mse, _) = evaluate(layers, data, &data.train)?;
    let (_, test_error) = evaluate(layers, data, &data.test)?;
    Ok(EpochRecord {
        epoch,
        train_mse,
        test_error,
    })
}

/// Per-sample in-situ training: forward, backward, then every layer is
/// rewritten through its crossbar's write phases.
pub fn train_insitu(net: &mut CrossbarNetwork, data: &Dataset, config: &TrainConfig, seed: u64) -> Result<TrainingTrace> {
    config.validate()?;
    check_data(&net.layers, data)?;
    let mut shuffle = stream(seed, StreamKind::Shuffle, 0);
    let mut writers: Vec<SimRng> = (0..net.layers.len())
        .map(|k| stream(seed, StreamKind::Write, k as u64))
        .collect();
    let mut order = data.train.clone();
    let mut trace = TrainingTrace::default();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle);
        for &k in &order {
            insitu_step(net, data.features(k), data.target(k), config, &mut writers)?;
        }
        trace.epochs.push(record(&net.layers, data, epoch)?);
    }
    Ok(trace)
}

/// One sample's update. All error terms are computed before any layer is
/// written, so the layers update simultaneously.
pub fn insitu_step(
    net: &mut CrossbarNetwork,
    x: &[f64],
    target: &[f64],
    config: &TrainConfig,
    writers: &mut [SimRng],
) -> Result<usize> {
    let acts = forward(&net.layers, x)?;
    let deltas = backward(&net.layers, &acts, target)?;
    let mut flips = 0;
    for (k, layer) in net.layers.iter_mut().enumerate() {
        let delta = config.scheduled_error(&deltas[k]);
        if delta.iter().all(|d| *d == 0.0) {
            continue;
        }
        let xb = with_bias(&acts.inputs[k]);
        let arch = layer.xbar.arch();
        let params = *layer.xbar.params();
        let phases = schedule_phases(&xb, &delta, arch, config.phase_mode, &config.coeff, &params)?;
        for phase in phases.iter().filter(|p| !p.is_noop() && p.enabled_rows() > 0) {
            flips += layer.xbar.write_phase(phase, &mut writers[k])?.len();
        }
    }
    Ok(flips)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReferenceMode {
    /// Gradient descent on real weights.
    RealValued,
    /// The in-situ stochastic rule on ideal selector crossbars, one scale per
    /// layer; yields binary target states.
    OfflineStochastic { scales: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRun {
    pub network: DenseNetwork,
    /// Binary states per layer (`j * rows + i`) for offline stochastic runs.
    pub states: Option<Vec<Vec<MtjState>>>,
    pub trace: TrainingTrace,
}

/// Software-side training: the real-valued baseline or offline binary
/// weights destined for deterministic programming.
pub fn train_reference(
    shape: &[usize],
    data: &Dataset,
    config: &TrainConfig,
    mode: &ReferenceMode,
    seed: u64,
) -> Result<ReferenceRun> {
    config.validate()?;
    match mode {
        ReferenceMode::RealValued => {
            let mut net = DenseNetwork::random(shape, seed)?;
            check_data(&net.layers, data)?;
            let mut shuffle = stream(seed, StreamKind::Shuffle, 0);
            let mut order = data.train.clone();
            let mut trace = TrainingTrace::default();
            for epoch in 1..=config.epochs {
                order.shuffle(&mut shuffle);
                for &k in &order {
                    let acts = forward(&net.layers, data.features(k))?;
                    let deltas = backward(&net.layers, &acts, data.target(k))?;
                    net.sgd_step(&acts, &deltas, config.learning_rate);
                }
                trace.epochs.push(record(&net.layers, data, epoch)?);
            }
            Ok(ReferenceRun {
                network: net,
                states: None,
                trace,
            })
        }
        ReferenceMode::OfflineStochastic { scales } => {
            let ideal = DeviceParams::default().with_variation(0.0);
            let mut net = CrossbarNetwork::random(shape, Architecture::OneT1R, ideal, scales, seed)?;
            let cfg = TrainConfig {
                phase_mode: PhaseMode::TwoPhase,
                ..*config
            };
            let trace = train_insitu(&mut net, data, &cfg, seed)?;
            Ok(ReferenceRun {
                network: net.dense_equivalent(),
                states: Some(net.layers.iter().map(|l| l.xbar.states()).collect()),
                trace,
            })
        }
    }
}
