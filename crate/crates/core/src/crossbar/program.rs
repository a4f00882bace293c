use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Architecture, Crossbar, PhaseSpec};
use crate::device::{precessional_factor, DeviceParams, MtjState, PerDirection, SwitchDirection};
use crate::error::{check_dim, Error, Result};

/// Maximum verify-and-rewrite attempts after the first 1T1R pulse.
pub const MAX_RETRIES: usize = 5;

/// Strong programming pulses, one per direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeterministicDrive {
    pub current: PerDirection<f64>,
    pub pulse_width: PerDirection<f64>,
    /// Signed terminal voltage sized for a nominal device in the source state.
    pub voltage: PerDirection<f64>,
}

impl DeterministicDrive {
    /// Picks, for each direction, the pulse width at which `current` switches
    /// a nominal device with probability `p_min`.
    pub fn new(params: &DeviceParams, current: PerDirection<f64>, p_min: f64) -> Result<Self> {
        if !(0.0 < p_min && p_min < 1.0) {
            return Err(Error::Contract(format!("p_min must be in (0, 1), got {p_min}")));
        }
        let mut pulse_width = PerDirection::new(0.0, 0.0);
        for dir in SwitchDirection::ALL {
            let a = current[dir] / params.ic0[dir];
            let f = precessional_factor(a)?;
            // exp(-4 f D e^{-2t(a-1)/tau0}) = p_min
            let ratio = -p_min.ln() / (4.0 * f * params.delta[dir]);
            pulse_width[dir] = (-params.tau0[dir] / (2.0 * (a - 1.0)) * ratio.ln()).max(0.0);
        }
        let voltage = PerDirection::new(
            -current.ap_to_p * params.r_ap,
            current.p_to_ap * params.r_p,
        );
        Ok(Self {
            current,
            pulse_width,
            voltage,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ProgramReport {
    /// Cells whose final state differs from the target.
    pub corrupted: usize,
    /// Cells still wrong after the last permitted 1T1R retry.
    pub retries_exhausted: usize,
    pub pulses: usize,
}

/// Writes `targets` (in `(j, i)` order) into the crossbar with strong pulses.
///
/// 1T1R cells are written one at a time with a verify loop. 1R crossbars are
/// written column by column, first every row whose target is AP, then every
/// row whose target is P; without cell selectors the pulses also reach
/// neighbouring devices through sneak paths, and nothing is re-verified.
pub fn program_deterministic<R: Rng + ?Sized>(
    xbar: &mut Crossbar,
    targets: &[MtjState],
    drive: &DeterministicDrive,
    rng: &mut R,
) -> Result<ProgramReport> {
    check_dim("program targets", xbar.rows() * xbar.cols(), targets.len())?;
    let mut report = ProgramReport::default();
    match xbar.arch() {
        Architecture::OneT1R => {
            let params = *xbar.params();
            for (cell, &target) in xbar.cells.iter_mut().zip(targets) {
                let mut attempts = 0;
                while cell.state != target && attempts <= MAX_RETRIES {
                    let dir = if target == MtjState::AP {
                        SwitchDirection::PToAp
                    } else {
                        SwitchDirection::ApToP
                    };
                    let current = drive.voltage[dir] / cell.resistance();
                    cell.pulse(current, drive.pulse_width[dir], &params, rng);
                    attempts += 1;
                    report.pulses += 1;
                }
                if cell.state != target {
                    report.retries_exhausted += 1;
                }
            }
        }
        Architecture::OneR => {
            let (m, n) = (xbar.rows(), xbar.cols());
            for j in 0..n {
                for dir in [SwitchDirection::PToAp, SwitchDirection::ApToP] {
                    let mut phase = PhaseSpec::idle(0, m, n, dir);
                    for i in 0..m {
                        if targets[j * m + i] == dir.target() {
                            phase.row_enabled[i] = true;
                            phase.row_voltage[i] = drive.voltage[dir];
                        }
                    }
                    if phase.enabled_rows() == 0 {
                        continue;
                    }
                    phase.col_enabled[j] = true;
                    phase.col_pulse_width[j] = drive.pulse_width[dir];
                    xbar.write_1r_phase(&phase, rng)?;
                    report.pulses += phase.enabled_rows();
                }
            }
        }
    }
    report.corrupted = xbar
        .cells()
        .iter()
        .zip(targets)
        .filter(|(c, &t)| c.state != t)
        .count();
    Ok(report)
}
