//! Linear maps from error and input magnitudes to pulse width and current.

use serde::{Deserialize, Serialize};

use crate::device::{CalibrationAnchors, CalibrationTargets, DeviceParams, PerDirection, SwitchDirection};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingCoefficients {
    pub t0: f64,
    pub t1: f64,
    pub i0: PerDirection<f64>,
    pub i1: PerDirection<f64>,
}

impl Default for MappingCoefficients {
    fn default() -> Self {
        Self {
            t0: 1.5e-9,
            t1: 1.0e-9,
            i0: PerDirection::new(60e-6, 140e-6),
            i1: PerDirection::new(30e-6, 60e-6),
        }
    }
}

impl MappingCoefficients {
    pub fn validate(&self) -> Result<()> {
        let all = [self.t0, self.t1, self.i0.ap_to_p, self.i0.p_to_ap, self.i1.ap_to_p, self.i1.p_to_ap];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::Config(format!("mapping coefficients must be positive: {self:?}")))
        }
    }

    /// Calibration boundary conditions implied by these coefficients.
    pub fn anchors(&self, p_floor: f64, p_top: f64) -> CalibrationTargets {
        let mk = |dir| CalibrationAnchors {
            t0: self.t0,
            t1: self.t1,
            i0: self.i0[dir],
            i1: self.i1[dir],
            p_floor,
            p_top,
        };
        PerDirection::new(mk(SwitchDirection::ApToP), mk(SwitchDirection::PToAp))
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if v.abs() <= 1.0 {
        Ok(())
    } else {
        Err(Error::Contract(format!("|{name}| = {} exceeds 1", v.abs())))
    }
}

/// `t0 + t1 |delta|`.
pub fn map_error_to_pulse_width(delta: f64, coeff: &MappingCoefficients) -> Result<f64> {
    check_unit("delta", delta)?;
    Ok(coeff.t0 + coeff.t1 * delta.abs())
}

/// `I0 + I1 |x|` for the given direction.
pub fn map_input_to_current(x: f64, dir: SwitchDirection, coeff: &MappingCoefficients) -> Result<f64> {
    check_unit("x", x)?;
    Ok(coeff.i0[dir] + coeff.i1[dir] * x.abs())
}

/// Row voltage that pushes the mapped current through a nominal cell in the
/// direction's source state: `+I R_P` for P->AP, `-I R_AP` for AP->P.
pub fn write_voltage(x: f64, dir: SwitchDirection, coeff: &MappingCoefficients, params: &DeviceParams) -> Result<f64> {
    let i = map_input_to_current(x, dir, coeff)?;
    Ok(match dir {
        SwitchDirection::PToAp => i * params.r_p,
        SwitchDirection::ApToP => -i * params.r_ap,
    })
}
