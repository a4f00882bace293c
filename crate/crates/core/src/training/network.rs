//! Layered tanh networks, either real-valued or stored on crossbars.
//!
//! Every layer has one extra input row clamped at `+1` that acts as the
//! bias. A crossbar cell in state P stands for weight `+b`, AP for `-b`.
//! Inputs are applied as `V_i = V_READ x_i`; the output current is mapped
//! back to a pre-activation with
//!
//! ```text
//! a_j = b / (V_READ G_half) * (I_j - V_READ G_mid sum_i x_i)
//! ```
//!
//! where `G_mid` and `G_half` are the mean and half-difference of the
//! nominal P and AP conductances. With nominal devices this is exactly
//! `sum_i W_ji x_i` for `W_ji = ±b`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::crossbar::{Architecture, Crossbar};
use crate::device::{DeviceParams, MtjState};
use crate::error::{check_dim, Error, Result};
use crate::rng::{stream, StreamKind};

/// Read voltage per unit input. Keeps every read current far below the
/// critical currents.
pub const V_READ: f64 = 0.02;

/// Operations a layer needs for forward and backward passes.
pub trait Layer {
    /// Input count, bias excluded.
    fn inputs(&self) -> usize;
    fn outputs(&self) -> usize;
    /// `W [x; 1]`.
    fn pre_activation(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// `W^T delta` restricted to the non-bias inputs.
    fn back_project(&self, delta: &[f64]) -> Result<Vec<f64>>;
}

/// Appends the bias input.
pub fn with_bias(x: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(x.len() + 1);
    v.extend_from_slice(x);
    v.push(1.0);
    v
}

/// Real-valued layer, weights row-major by output: `w[j * (inputs + 1) + i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
}

impl DenseLayer {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<f64>) -> Result<Self> {
        check_dim("dense layer weights", (inputs + 1) * outputs, weights.len())?;
        Ok(Self { inputs, outputs, weights })
    }

    /// Uniform in `±1/sqrt(inputs + 1)`.
    pub fn random<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let r = 1.0 / ((inputs + 1) as f64).sqrt();
        let weights = (0..(inputs + 1) * outputs).map(|_| rng.random_range(-r..r)).collect();
        Self { inputs, outputs, weights }
    }

    pub fn weight(&self, j: usize, i: usize) -> f64 {
        self.weights[j * (self.inputs + 1) + i]
    }
}

impl Layer for DenseLayer {
    fn inputs(&self) -> usize {
        self.inputs
    }

    fn outputs(&self) -> usize {
        self.outputs
    }

    fn pre_activation(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("layer input", self.inputs, x.len())?;
        let stride = self.inputs + 1;
        Ok(self
            .weights
            .chunks_exact(stride)
            .map(|w| w[..self.inputs].iter().zip(x).fold(w[self.inputs], |acc, (wi, xi)| acc + wi * xi))
            .collect())
    }

    fn back_project(&self, delta: &[f64]) -> Result<Vec<f64>> {
        check_dim("layer error", self.outputs, delta.len())?;
        let stride = self.inputs + 1;
        let mut out = vec![0.0; self.inputs];
        for (w, &d) in self.weights.chunks_exact(stride).zip(delta) {
            for (o, wi) in out.iter_mut().zip(w) {
                *o += wi * d;
            }
        }
        Ok(out)
    }
}

/// A crossbar holding one binary layer: `inputs + 1` rows, `outputs` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossbarLayer {
    pub xbar: Crossbar,
    b: f64,
    g_mid: f64,
    gain: f64,
}

impl CrossbarLayer {
    pub fn new(xbar: Crossbar, b: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::Contract(format!("weight scale b must be positive, got {b}")));
        }
        if xbar.rows() < 2 {
            return Err(Error::Contract("a crossbar layer needs at least one input and the bias row".into()));
        }
        let p = xbar.params();
        let (gp, gap) = (1.0 / p.r_p, 1.0 / p.r_ap);
        let g_mid = 0.5 * (gp + gap);
        let g_half = 0.5 * (gp - gap);
        Ok(Self {
            g_mid,
            gain: b / (V_READ * g_half),
            xbar,
            b,
        })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Nominal weights `±b` in dense layout.
    pub fn dense_equivalent(&self) -> DenseLayer {
        let (m, n) = (self.xbar.rows(), self.xbar.cols());
        let weights = (0..n)
            .flat_map(|j| (0..m).map(move |i| (j, i)))
            .map(|(j, i)| self.b * self.xbar.cell(j, i).state.sign())
            .collect();
        DenseLayer {
            inputs: m - 1,
            outputs: n,
            weights,
        }
    }
}

impl Layer for CrossbarLayer {
    fn inputs(&self) -> usize {
        self.xbar.rows() - 1
    }

    fn outputs(&self) -> usize {
        self.xbar.cols()
    }

    fn pre_activation(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("layer input", self.inputs(), x.len())?;
        let v: Vec<f64> = with_bias(x).iter().map(|xi| V_READ * xi).collect();
        let offset = self.g_mid * v.iter().sum::<f64>();
        let currents = self.xbar.read(&v)?;
        Ok(currents.iter().map(|i| self.gain * (i - offset)).collect())
    }

    fn back_project(&self, delta: &[f64]) -> Result<Vec<f64>> {
        check_dim("layer error", self.outputs(), delta.len())?;
        let e: Vec<f64> = delta.iter().map(|d| V_READ * d).collect();
        let offset = self.g_mid * e.iter().sum::<f64>();
        let mut currents = self.xbar.transpose_read(&e)?;
        currents.pop();
        Ok(currents.iter().map(|i| self.gain * (i - offset)).collect())
    }
}

/// Per-layer values from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    /// Input to each layer, bias excluded.
    pub inputs: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().map_or(&[], Vec::as_slice)
    }
}

pub fn check_chain<L: Layer>(layers: &[L]) -> Result<()> {
    if layers.is_empty() {
        return Err(Error::Contract("network has no layers".into()));
    }
    for w in layers.windows(2) {
        check_dim("adjacent layer sizes", w[0].outputs(), w[1].inputs())?;
    }
    Ok(())
}

pub fn forward<L: Layer>(layers: &[L], x: &[f64]) -> Result<Activations> {
    let mut acts = Activations {
        inputs: Vec::with_capacity(layers.len()),
        pre: Vec::with_capacity(layers.len()),
        outputs: Vec::with_capacity(layers.len()),
    };
    let mut current = x.to_vec();
    for layer in layers {
        let a = layer.pre_activation(&current)?;
        let y: Vec<f64> = a.iter().map(|v| v.tanh()).collect();
        acts.inputs.push(std::mem::replace(&mut current, y.clone()));
        acts.pre.push(a);
        acts.outputs.push(y);
    }
    Ok(acts)
}

/// Output of the last layer only.
pub fn predict<L: Layer>(layers: &[L], x: &[f64]) -> Result<Vec<f64>> {
    let mut current = x.to_vec();
    for layer in layers {
        current = layer.pre_activation(&current)?.iter().map(|v| v.tanh()).collect();
    }
    Ok(current)
}

/// Error terms `dE/da` for `E = 0.5 |y - target|^2`, last layer last.
pub fn backward<L: Layer>(layers: &[L], acts: &Activations, target: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_dim("target", acts.output().len(), target.len())?;
    let n = layers.len();
    let mut deltas = vec![Vec::new(); n];
    deltas[n - 1] = acts
        .output()
        .iter()
        .zip(target)
        .map(|(y, t)| (y - t) * (1.0 - y * y))
        .collect();
    for k in (0..n - 1).rev() {
        let back = layers[k + 1].back_project(&deltas[k + 1])?;
        deltas[k] = back
            .iter()
            .zip(&acts.outputs[k])
            .map(|(e, y)| e * (1.0 - y * y))
            .collect();
    }
    Ok(deltas)
}

/// `‖W‖₁ / n`.
pub fn binarize_scale(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::Contract("binarize_scale of an empty matrix".into()));
    }
    Ok(weights.iter().map(|w| w.abs()).sum::<f64>() / weights.len() as f64)
}

/// Layer widths from input to output, e.g. `[60, 15, 1]`.
pub type Shape = Vec<usize>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNetwork {
    pub layers: Vec<DenseLayer>,
}

impl DenseNetwork {
    pub fn random(shape: &[usize], seed: u64) -> Result<Self> {
        if shape.len() < 2 {
            return Err(Error::Contract(format!("shape needs at least two widths: {shape:?}")));
        }
        let mut rng = stream(seed, StreamKind::Init, 0);
        let layers = shape.windows(2).map(|w| DenseLayer::random(w[0], w[1], &mut rng)).collect();
        Ok(Self { layers })
    }

    /// One gradient step `W -= lr * delta [x; 1]^T` per layer.
    pub fn sgd_step(&mut self, acts: &Activations, deltas: &[Vec<f64>], lr: f64) {
        for ((layer, x), d) in self.layers.iter_mut().zip(&acts.inputs).zip(deltas) {
            let stride = layer.inputs + 1;
            for (w, &dj) in layer.weights.chunks_exact_mut(stride).zip(d) {
                let s = lr * dj;
                for (wi, xi) in w.iter_mut().zip(x) {
                    *wi -= s * xi;
                }
                w[layer.inputs] -= s;
            }
        }
    }

    pub fn scales(&self) -> Result<Vec<f64>> {
        self.layers.iter().map(|l| binarize_scale(&l.weights)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossbarNetwork {
    pub layers: Vec<CrossbarLayer>,
}

impl CrossbarNetwork {
    /// Fabricates one crossbar per layer with each cell P or AP with
    /// probability one half. `b` holds one scale per layer.
    pub fn random(shape: &[usize], arch: Architecture, params: DeviceParams, b: &[f64], seed: u64) -> Result<Self> {
        if shape.len() < 2 {
            return Err(Error::Contract(format!("shape needs at least two widths: {shape:?}")));
        }
        check_dim("layer scales", shape.len() - 1, b.len())?;
        let mut layers = Vec::with_capacity(b.len());
        for (k, w) in shape.windows(2).enumerate() {
            let mut rng = stream(seed, StreamKind::Init, 1 + k as u64);
            let fab_seed = crate::rng::derive_seed(seed, &[k as u64]);
            let xbar = Crossbar::fabricate(w[0] + 1, w[1], arch, params, fab_seed, |_, _| {
                if rng.random::<bool>() { MtjState::P } else { MtjState::AP }
            })?;
            layers.push(CrossbarLayer::new(xbar, b[k])?);
        }
        Ok(Self { layers })
    }

    pub fn dense_equivalent(&self) -> DenseNetwork {
        DenseNetwork {
            layers: self.layers.iter().map(CrossbarLayer::dense_equivalent).collect(),
        }
    }
}
