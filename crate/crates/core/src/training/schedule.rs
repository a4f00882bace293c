//! Splitting one weight update into write phases.
//!
//! The update `dW_ji = -eta x_i delta_j` moves a cell towards AP (weight
//! `-b`) when `x_i delta_j > 0` and towards P when `x_i delta_j < 0`:
//!
//! | x | delta | dW | switch  | row voltage |
//! |---|-------|----|---------|-------------|
//! | + | +     | -  | P -> AP | V_P         |
//! | - | +     | +  | AP -> P | V_AP        |
//! | + | -     | +  | AP -> P | V_AP        |
//! | - | -     | -  | P -> AP | V_P         |

use serde::{Deserialize, Serialize};

use super::mapping::{map_error_to_pulse_width, write_voltage, MappingCoefficients};
use crate::crossbar::{Architecture, PhaseSpec};
use crate::device::{DeviceParams, SwitchDirection};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    /// Columns split by the sign of delta; every row driven in both phases.
    TwoPhase,
    /// Rows additionally split by the sign of x, so each phase drives one
    /// polarity only.
    #[default]
    FourPhase,
}

impl PhaseMode {
    pub fn phases(self) -> usize {
        match self {
            PhaseMode::TwoPhase => 2,
            PhaseMode::FourPhase => 4,
        }
    }
}

impl std::str::FromStr for PhaseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2" | "two" | "two-phase" => Ok(PhaseMode::TwoPhase),
            "4" | "four" | "four-phase" => Ok(PhaseMode::FourPhase),
            other => Err(Error::Config(format!("unknown phase mode `{other}` (use 2 or 4)"))),
        }
    }
}

impl std::fmt::Display for PhaseMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.phases())
    }
}

/// Direction a cell moves for the given input and error signs.
pub fn update_direction(x_positive: bool, delta_positive: bool) -> SwitchDirection {
    if x_positive == delta_positive {
        SwitchDirection::PToAp
    } else {
        SwitchDirection::ApToP
    }
}

/// Builds the ordered write phases for one sample.
///
/// Rows with `x_i = 0` and columns with `delta_j = 0` are disabled
/// everywhere. Phases that enable nothing are still returned so phase ids
/// stay aligned with the mode.
pub fn schedule_phases(
    x: &[f64],
    delta: &[f64],
    arch: Architecture,
    mode: PhaseMode,
    coeff: &MappingCoefficients,
    params: &DeviceParams,
) -> Result<Vec<PhaseSpec>> {
    if mode == PhaseMode::FourPhase && arch == Architecture::OneT1R {
        return Err(Error::UnsupportedSchedule(
            "four-phase writes apply to 1R crossbars only".into(),
        ));
    }
    let (m, n) = (x.len(), delta.len());
    let widths: Vec<f64> = delta
        .iter()
        .map(|&d| map_error_to_pulse_width(d, coeff))
        .collect::<Result<_>>()?;
    let mut voltages = Vec::with_capacity(m);
    for &xi in x {
        // Both candidate voltages validate |x| <= 1 up front.
        voltages.push((
            write_voltage(xi, SwitchDirection::PToAp, coeff, params)?,
            write_voltage(xi, SwitchDirection::ApToP, coeff, params)?,
        ));
    }

    // (rows selected by sign of x, or both; columns by sign of delta)
    let plan: Vec<(Option<bool>, bool)> = match mode {
        PhaseMode::TwoPhase => vec![(None, true), (None, false)],
        PhaseMode::FourPhase => vec![
            (Some(true), true),
            (Some(false), true),
            (Some(true), false),
            (Some(false), false),
        ],
    };

    let mut phases = Vec::with_capacity(plan.len());
    for (k, &(row_sign, col_positive)) in plan.iter().enumerate() {
        let dir = update_direction(row_sign.unwrap_or(true), col_positive);
        let mut phase = PhaseSpec::idle(k as u8 + 1, m, n, dir);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 || row_sign.is_some_and(|s| s != (xi > 0.0)) {
                continue;
            }
            phase.row_enabled[i] = true;
            phase.row_voltage[i] = match update_direction(xi > 0.0, col_positive) {
                SwitchDirection::PToAp => voltages[i].0,
                SwitchDirection::ApToP => voltages[i].1,
            };
        }
        for (j, &dj) in delta.iter().enumerate() {
            if dj != 0.0 && (dj > 0.0) == col_positive {
                phase.col_enabled[j] = true;
                phase.col_pulse_width[j] = widths[j];
            }
        }
        phases.push(phase);
    }
    Ok(phases)
}
