//! Phenomenological MTJ switching model.
//!
//! A junction is either parallel (P, low resistance) or anti-parallel (AP,
//! high resistance). Above the critical current a pulse of amplitude `I`
//! and width `t` switches it with probability
//!
//! ```text
//! P(a, t) = exp(-4 f(a) Δ exp(-2t / T(a))),   a = I / Ic0
//! f(a)    = (2a / (a - 1))^(-2 / (a + 1))
//! T(a)    = tau0 / (a - 1)
//! ```
//!
//! Every constant is indexed by [`SwitchDirection`]. Below (or at) the
//! critical current the probability is zero.

mod calibrate;

use std::ops::{Index, IndexMut};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use calibrate::{
    calibrate_device, calibrate_direction, CalibrationAnchors, CalibrationReport,
    CalibrationTargets, DirectionFit,
};

/// Nominal parallel-state resistance (V_P = 0.68 V at 140 uA).
pub const NOMINAL_R_P: f64 = 4.86e3;
/// Nominal anti-parallel-state resistance.
pub const NOMINAL_R_AP: f64 = 9.7e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchDirection {
    /// AP -> P, driven by negative (output-to-input) current.
    ApToP,
    /// P -> AP, driven by positive (input-to-output) current.
    PToAp,
}

impl SwitchDirection {
    pub const ALL: [SwitchDirection; 2] = [SwitchDirection::ApToP, SwitchDirection::PToAp];

    /// Direction a current of the given sign pushes a junction.
    pub fn from_current(current: f64) -> Option<Self> {
        if current > 0.0 {
            Some(SwitchDirection::PToAp)
        } else if current < 0.0 {
            Some(SwitchDirection::ApToP)
        } else {
            None
        }
    }

    pub fn source(self) -> MtjState {
        match self {
            SwitchDirection::ApToP => MtjState::AP,
            SwitchDirection::PToAp => MtjState::P,
        }
    }

    pub fn target(self) -> MtjState {
        match self {
            SwitchDirection::ApToP => MtjState::P,
            SwitchDirection::PToAp => MtjState::AP,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SwitchDirection::ApToP => "ap2p",
            SwitchDirection::PToAp => "p2ap",
        }
    }
}

impl std::fmt::Display for SwitchDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SwitchDirection::ApToP => "AP->P",
            SwitchDirection::PToAp => "P->AP",
        })
    }
}

impl std::str::FromStr for SwitchDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ap2p" | "ap->p" | "ap_to_p" => Ok(SwitchDirection::ApToP),
            "p2ap" | "p->ap" | "p_to_ap" => Ok(SwitchDirection::PToAp),
            other => Err(Error::Config(format!("unknown switch direction `{other}`"))),
        }
    }
}

/// A pair of values, one per switching direction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerDirection<T> {
    pub ap_to_p: T,
    pub p_to_ap: T,
}

impl<T> PerDirection<T> {
    pub fn new(ap_to_p: T, p_to_ap: T) -> Self {
        Self { ap_to_p, p_to_ap }
    }

    pub fn map<U>(self, mut f: impl FnMut(SwitchDirection, T) -> U) -> PerDirection<U> {
        PerDirection {
            ap_to_p: f(SwitchDirection::ApToP, self.ap_to_p),
            p_to_ap: f(SwitchDirection::PToAp, self.p_to_ap),
        }
    }
}

impl<T> Index<SwitchDirection> for PerDirection<T> {
    type Output = T;

    fn index(&self, dir: SwitchDirection) -> &T {
        match dir {
            SwitchDirection::ApToP => &self.ap_to_p,
            SwitchDirection::PToAp => &self.p_to_ap,
        }
    }
}

impl<T> IndexMut<SwitchDirection> for PerDirection<T> {
    fn index_mut(&mut self, dir: SwitchDirection) -> &mut T {
        match dir {
            SwitchDirection::ApToP => &mut self.ap_to_p,
            SwitchDirection::PToAp => &mut self.p_to_ap,
        }
    }
}

/// Switching physics and resistances shared by every cell of a crossbar.
///
/// Units: amperes, seconds, ohms. `variation_sigma` is the relative
/// standard deviation of per-device resistance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub ic0: PerDirection<f64>,
    pub delta: PerDirection<f64>,
    pub tau0: PerDirection<f64>,
    pub r_p: f64,
    pub r_ap: f64,
    #[serde(default)]
    pub variation_sigma: f64,
}

impl Default for DeviceParams {
    /// Parameters calibrated against the default mapping coefficients.
    fn default() -> Self {
        *calibrate::default_params()
    }
}

impl DeviceParams {
    pub fn with_variation(mut self, sigma: f64) -> Self {
        self.variation_sigma = sigma;
        self
    }

    pub fn resistance(&self, state: MtjState) -> f64 {
        match state {
            MtjState::P => self.r_p,
            MtjState::AP => self.r_ap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.r_p > 0.0 && self.r_ap > self.r_p) {
            return bad(format!(
                "resistances must satisfy r_ap > r_p > 0 (r_p={}, r_ap={})",
                self.r_p, self.r_ap
            ));
        }
        if !(self.ic0.p_to_ap > self.ic0.ap_to_p && self.ic0.ap_to_p > 0.0) {
            return bad(format!(
                "critical currents must satisfy ic0[P->AP] > ic0[AP->P] > 0 ({:?})",
                self.ic0
            ));
        }
        for dir in SwitchDirection::ALL {
            if !(self.delta[dir] > 0.0 && self.tau0[dir] > 0.0) {
                return bad(format!("delta and tau0 must be positive for {dir}"));
            }
        }
        if !(0.0..1.0 / 3.0).contains(&self.variation_sigma) {
            return bad(format!(
                "variation_sigma must lie in [0, 1/3), got {}",
                self.variation_sigma
            ));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        let mut out = String::from(
            "# MTJ device parameters. Units: ic0 [A], tau0 [s], r_p/r_ap [ohm];\n\
             # delta and variation_sigma are dimensionless.\n",
        );
        out.push_str(&toml::to_string(self).expect("device params serialize"));
        out
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let params: DeviceParams =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }

    /// Switching probability without argument validation; `pulse_width`
    /// must be non-negative.
    #[inline]
    pub(crate) fn probability(&self, current: f64, pulse_width: f64, dir: SwitchDirection) -> f64 {
        let ic0 = self.ic0[dir];
        if !(current > ic0) {
            return 0.0;
        }
        let a = current / ic0;
        let f = factor_unchecked(a);
        let decay = (-2.0 * pulse_width * (a - 1.0) / self.tau0[dir]).exp();
        (-4.0 * f * self.delta[dir] * decay).exp()
    }
}

#[inline]
fn factor_unchecked(a: f64) -> f64 {
    (-2.0 / (a + 1.0) * (2.0 * a / (a - 1.0)).ln()).exp()
}

/// `(2a/(a-1))^(-2/(a+1))`, defined for `a > 1`.
pub fn precessional_factor(a: f64) -> Result<f64> {
    if !(a > 1.0) {
        return Err(Error::Domain(format!(
            "precessional factor needs a > 1, got {a}"
        )));
    }
    Ok(factor_unchecked(a))
}

/// Mean switching time `T(a) = tau0 / (a - 1)` for the given direction's tau0.
pub fn mean_switching_time(a: f64, tau0: f64) -> Result<f64> {
    if !(a > 1.0) {
        return Err(Error::Domain(format!(
            "mean switching time needs a > 1, got {a}"
        )));
    }
    Ok(tau0 / (a - 1.0))
}

/// Probability that a pulse of magnitude `current` and width `pulse_width`
/// switches a junction in direction `dir`.
pub fn switching_probability(
    current: f64,
    pulse_width: f64,
    dir: SwitchDirection,
    params: &DeviceParams,
) -> Result<f64> {
    if !(pulse_width >= 0.0) {
        return Err(Error::Domain(format!(
            "pulse width must be non-negative, got {pulse_width}"
        )));
    }
    if !(current >= 0.0) {
        return Err(Error::Domain(format!(
            "current magnitude must be non-negative, got {current}"
        )));
    }
    Ok(params.probability(current, pulse_width, dir))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MtjState {
    P,
    AP,
}

impl MtjState {
    pub fn flipped(self) -> Self {
        match self {
            MtjState::P => MtjState::AP,
            MtjState::AP => MtjState::P,
        }
    }

    /// Weight sign encoded by the state: P is +1, AP is -1.
    pub fn sign(self) -> f64 {
        match self {
            MtjState::P => 1.0,
            MtjState::AP => -1.0,
        }
    }

    pub fn from_sign(w: f64) -> Self {
        if w >= 0.0 {
            MtjState::P
        } else {
            MtjState::AP
        }
    }
}

impl std::fmt::Display for MtjState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MtjState::P => "P",
            MtjState::AP => "AP",
        })
    }
}

/// One crossbar cell with its fabrication-sampled resistances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtjSynapse {
    pub state: MtjState,
    pub r_p_actual: f64,
    pub r_ap_actual: f64,
}

impl MtjSynapse {
    pub fn nominal(state: MtjState, params: &DeviceParams) -> Self {
        Self {
            state,
            r_p_actual: params.r_p,
            r_ap_actual: params.r_ap,
        }
    }

    pub fn resistance(&self) -> f64 {
        match self.state {
            MtjState::P => self.r_p_actual,
            MtjState::AP => self.r_ap_actual,
        }
    }

    pub fn conductance(&self) -> f64 {
        1.0 / self.resistance()
    }

    /// Applies one pulse in place; returns whether the state flipped.
    ///
    /// Exactly one uniform variate is consumed whatever the outcome.
    #[inline]
    pub(crate) fn pulse<R: Rng + ?Sized>(
        &mut self,
        current: f64,
        pulse_width: f64,
        params: &DeviceParams,
        rng: &mut R,
    ) -> bool {
        let u: f64 = rng.random();
        let Some(dir) = SwitchDirection::from_current(current) else {
            return false;
        };
        if self.state != dir.source() {
            return false;
        }
        if u < params.probability(current.abs(), pulse_width, dir) {
            self.state = dir.target();
            true
        } else {
            false
        }
    }
}

/// Applies a signed current pulse to a synapse.
///
/// Positive current drives P->AP, negative drives AP->P; a pulse whose
/// polarity cannot move the present state leaves it unchanged.
pub fn attempt_switch<R: Rng + ?Sized>(
    synapse: MtjSynapse,
    current: f64,
    pulse_width: f64,
    params: &DeviceParams,
    rng: &mut R,
) -> Result<MtjSynapse> {
    if !(pulse_width >= 0.0) || current.is_nan() {
        return Err(Error::Domain(format!(
            "invalid pulse: current {current}, width {pulse_width}"
        )));
    }
    let mut next = synapse;
    next.pulse(current, pulse_width, params, rng);
    Ok(next)
}

/// Draws `1 + eps` with `eps ~ N(0, sigma)` truncated to `|eps| <= 3 sigma`.
fn truncated_factor<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= 3.0 {
            return 1.0 + sigma * z;
        }
    }
}

/// Samples fabricated resistances `(r_p_actual, r_ap_actual)`.
///
/// Each resistance gets an independent relative Gaussian error truncated at
/// three standard deviations. Pairs with `r_ap_actual <= r_p_actual` are
/// redrawn; that only happens for sigma above roughly 0.15.
pub fn sample_fabrication<R: Rng + ?Sized>(params: &DeviceParams, rng: &mut R) -> (f64, f64) {
    let sigma = params.variation_sigma;
    if sigma == 0.0 {
        return (params.r_p, params.r_ap);
    }
    loop {
        let r_p = params.r_p * truncated_factor(sigma, rng);
        let r_ap = params.r_ap * truncated_factor(sigma, rng);
        if r_ap > r_p {
            return (r_p, r_ap);
        }
    }
}
