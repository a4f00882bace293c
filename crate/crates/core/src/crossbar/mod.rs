//! M x N MTJ crossbar: analog reads, selective 1T1R writes, transistor-less
//! (1R) writes through the full resistive network, and deterministic
//! programming.
//!
//! Cells are indexed `(j, i)`: output column `j`, input row `i`. Positive
//! current flows from the input terminal to the output terminal and drives
//! P -> AP.

mod dump;
mod network;
mod program;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::device::{sample_fabrication, DeviceParams, MtjState, MtjSynapse, SwitchDirection};
use crate::error::{check_dim, Error, Result};
use crate::rng::{stream, StreamKind};

pub use network::{solve_1r_network, solve_1r_network_with, NetworkSolution, SolverKind};
pub use program::{program_deterministic, DeterministicDrive, ProgramReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    /// One access transistor per cell.
    OneT1R,
    /// Bare junctions; only the terminals can be switched off.
    OneR,
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Architecture::OneT1R => "1T1R",
            Architecture::OneR => "1R",
        })
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1t1r" => Ok(Architecture::OneT1R),
            "1r" => Ok(Architecture::OneR),
            other => Err(Error::Config(format!("unknown architecture `{other}`"))),
        }
    }
}

/// One cell state change produced by a write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwitchEvent {
    pub col: usize,
    pub row: usize,
    pub from: MtjState,
    pub to: MtjState,
}

/// How flip chances from consecutive segments of one phase are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentCombination {
    /// Carries each cell's accumulated switching progress across segments as
    /// an equivalent pulse width at the new current, so a constant current
    /// split into segments gives exactly the unsegmented probability.
    #[default]
    EquivalentTime,
    /// Treats segments as independent trials: `1 - prod(1 - P_seg)`.
    Independent,
}

/// Electrical configuration of one write phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpec {
    pub phase_id: u8,
    pub row_enabled: Vec<bool>,
    pub col_enabled: Vec<bool>,
    /// Signed input-terminal voltage; zero on disabled rows.
    pub row_voltage: Vec<f64>,
    /// Column pulse width in seconds; zero on disabled columns.
    pub col_pulse_width: Vec<f64>,
    pub intended_direction: SwitchDirection,
}

impl PhaseSpec {
    /// A phase with every terminal disabled.
    pub fn idle(phase_id: u8, rows: usize, cols: usize, dir: SwitchDirection) -> Self {
        Self {
            phase_id,
            row_enabled: vec![false; rows],
            col_enabled: vec![false; cols],
            row_voltage: vec![0.0; rows],
            col_pulse_width: vec![0.0; cols],
            intended_direction: dir,
        }
    }

    pub fn enabled_rows(&self) -> usize {
        self.row_enabled.iter().filter(|&&e| e).count()
    }

    pub fn enabled_cols(&self) -> usize {
        self.col_enabled.iter().filter(|&&e| e).count()
    }

    pub fn is_noop(&self) -> bool {
        self.enabled_cols() == 0
    }

    fn check(&self, rows: usize, cols: usize) -> Result<()> {
        check_dim("phase rows", rows, self.row_enabled.len())?;
        check_dim("phase row voltages", rows, self.row_voltage.len())?;
        check_dim("phase columns", cols, self.col_enabled.len())?;
        check_dim("phase pulse widths", cols, self.col_pulse_width.len())?;
        for (i, (&en, &v)) in self.row_enabled.iter().zip(&self.row_voltage).enumerate() {
            if !en && v != 0.0 {
                return Err(Error::Contract(format!("disabled row {i} carries {v} V")));
            }
        }
        for (j, (&en, &t)) in self.col_enabled.iter().zip(&self.col_pulse_width).enumerate() {
            if !(t >= 0.0) || (!en && t != 0.0) {
                return Err(Error::Contract(format!("column {j} has pulse width {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crossbar {
    rows: usize,
    cols: usize,
    arch: Architecture,
    params: DeviceParams,
    /// Column-major by output: `cells[j * rows + i]`.
    cells: Vec<MtjSynapse>,
    combination: SegmentCombination,
}

impl Crossbar {
    /// Builds a crossbar whose devices are sampled from `params`' variation
    /// with per-device streams derived from `fab_seed`.
    pub fn fabricate(
        rows: usize,
        cols: usize,
        arch: Architecture,
        params: DeviceParams,
        fab_seed: u64,
        mut init: impl FnMut(usize, usize) -> MtjState,
    ) -> Result<Self> {
        params.validate()?;
        if rows == 0 || cols == 0 {
            return Err(Error::Contract("crossbar needs at least one row and column".into()));
        }
        let mut cells = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                let idx = (j * rows + i) as u64;
                let (r_p_actual, r_ap_actual) = if params.variation_sigma == 0.0 {
                    (params.r_p, params.r_ap)
                } else {
                    sample_fabrication(&params, &mut stream(fab_seed, StreamKind::Fabrication, idx))
                };
                cells.push(MtjSynapse {
                    state: init(j, i),
                    r_p_actual,
                    r_ap_actual,
                });
            }
        }
        Ok(Self {
            rows,
            cols,
            arch,
            params,
            cells,
            combination: SegmentCombination::default(),
        })
    }

    /// Nominal devices, all in the same state.
    pub fn uniform(rows: usize, cols: usize, arch: Architecture, params: DeviceParams, state: MtjState) -> Result<Self> {
        Self::fabricate(rows, cols, arch, params.with_variation(0.0), 0, |_, _| state)
    }

    pub(crate) fn from_parts(
        rows: usize,
        cols: usize,
        arch: Architecture,
        params: DeviceParams,
        cells: Vec<MtjSynapse>,
    ) -> Result<Self> {
        check_dim("crossbar cells", rows * cols, cells.len())?;
        Ok(Self {
            rows,
            cols,
            arch,
            params,
            cells,
            combination: SegmentCombination::default(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn params(&self) -> &DeviceParams {
        &self.params
    }

    pub fn combination(&self) -> SegmentCombination {
        self.combination
    }

    pub fn set_combination(&mut self, combination: SegmentCombination) {
        self.combination = combination;
    }

    pub fn cell(&self, j: usize, i: usize) -> &MtjSynapse {
        &self.cells[j * self.rows + i]
    }

    pub fn cell_mut(&mut self, j: usize, i: usize) -> &mut MtjSynapse {
        &mut self.cells[j * self.rows + i]
    }

    pub fn cells(&self) -> &[MtjSynapse] {
        &self.cells
    }

    /// States in `(j, i)` order, `j`-major.
    pub fn states(&self) -> Vec<MtjState> {
        self.cells.iter().map(|c| c.state).collect()
    }

    pub fn set_states(&mut self, states: &[MtjState]) -> Result<()> {
        check_dim("crossbar states", self.cells.len(), states.len())?;
        for (c, &s) in self.cells.iter_mut().zip(states) {
            c.state = s;
        }
        Ok(())
    }

    /// Conductances `G[j * rows + i]`.
    pub fn conductances(&self) -> Vec<f64> {
        self.cells.iter().map(MtjSynapse::conductance).collect()
    }

    /// The same devices with input and output terminals exchanged.
    pub fn transposed(&self) -> Crossbar {
        let mut cells = Vec::with_capacity(self.cells.len());
        for i in 0..self.rows {
            for j in 0..self.cols {
                cells.push(*self.cell(j, i));
            }
        }
        Crossbar {
            rows: self.cols,
            cols: self.rows,
            arch: self.arch,
            params: self.params,
            cells,
            combination: self.combination,
        }
    }

    /// Output currents `I_j = sum_i G_ji V_i` with outputs held at virtual
    /// ground.
    pub fn read(&self, input_voltages: &[f64]) -> Result<Vec<f64>> {
        check_dim("read inputs", self.rows, input_voltages.len())?;
        Ok(self
            .cells
            .chunks_exact(self.rows)
            .map(|col| {
                col.iter()
                    .zip(input_voltages)
                    .fold(0.0, |acc, (c, &v)| acc + c.conductance() * v)
            })
            .collect())
    }

    /// Input-terminal currents `I_i = sum_j G_ji E_j` with the roles of the
    /// terminals reversed.
    pub fn transpose_read(&self, error_voltages: &[f64]) -> Result<Vec<f64>> {
        check_dim("transpose read inputs", self.cols, error_voltages.len())?;
        let mut out = vec![0.0; self.rows];
        for (col, &e) in self.cells.chunks_exact(self.rows).zip(error_voltages) {
            for (acc, c) in out.iter_mut().zip(col) {
                *acc += c.conductance() * e;
            }
        }
        Ok(out)
    }

    /// Applies one 1T1R write phase: every row of every enabled column is
    /// pulsed with `V_i / R(cell)` for that column's pulse width. Disabled
    /// columns have their transistors off and see no current.
    pub fn write_1t1r_phase<R: Rng + ?Sized>(&mut self, phase: &PhaseSpec, rng: &mut R) -> Result<Vec<SwitchEvent>> {
        if self.arch != Architecture::OneT1R {
            return Err(Error::ArchMismatch(format!("1T1R write on a {} crossbar", self.arch)));
        }
        phase.check(self.rows, self.cols)?;
        let mut events = Vec::new();
        let params = self.params;
        for (j, col) in self.cells.chunks_exact_mut(self.rows).enumerate() {
            if !phase.col_enabled[j] {
                continue;
            }
            let width = phase.col_pulse_width[j];
            for (i, (cell, &v)) in col.iter_mut().zip(&phase.row_voltage).enumerate() {
                let from = cell.state;
                let current = v / cell.resistance();
                if cell.pulse(current, width, &params, rng) {
                    events.push(SwitchEvent {
                        col: j,
                        row: i,
                        from,
                        to: cell.state,
                    });
                }
            }
        }
        Ok(events)
    }

    /// Applies one 1R write phase through the resistive network.
    ///
    /// The phase lasts until the longest enabled pulse ends and is cut into
    /// segments wherever a column's pulse expires. Each segment is solved
    /// with the columns still active; every cell, selected or not,
    /// accumulates switching progress from its current. States are frozen
    /// during the phase and a single Bernoulli draw per cell decides the
    /// outcome once it completes.
    pub fn write_1r_phase<R: Rng + ?Sized>(&mut self, phase: &PhaseSpec, rng: &mut R) -> Result<Vec<SwitchEvent>> {
        let probabilities = self.phase_flip_probabilities(phase)?;
        let mut events = Vec::new();
        for (k, (cell, &p)) in self.cells.iter_mut().zip(&probabilities).enumerate() {
            let u: f64 = rng.random();
            if u < p {
                let from = cell.state;
                cell.state = from.flipped();
                events.push(SwitchEvent {
                    col: k / self.rows,
                    row: k % self.rows,
                    from,
                    to: cell.state,
                });
            }
        }
        Ok(events)
    }

    /// Per-cell flip probabilities (`j * rows + i`) that a 1R phase would
    /// apply, without drawing.
    pub fn phase_flip_probabilities(&self, phase: &PhaseSpec) -> Result<Vec<f64>> {
        if self.arch != Architecture::OneR {
            return Err(Error::ArchMismatch(format!("1R write on a {} crossbar", self.arch)));
        }
        phase.check(self.rows, self.cols)?;
        let mut widths: Vec<f64> = phase
            .col_enabled
            .iter()
            .zip(&phase.col_pulse_width)
            .filter(|(&en, &t)| en && t > 0.0)
            .map(|(_, &t)| t)
            .collect();
        widths.sort_by(f64::total_cmp);
        widths.dedup();

        let mut progress = vec![CellProgress::default(); self.cells.len()];
        if phase.enabled_rows() > 0 && !widths.is_empty() {
            let mut active = phase.clone();
            let mut start = 0.0;
            for &end in &widths {
                for j in 0..self.cols {
                    let on = phase.col_enabled[j] && phase.col_pulse_width[j] >= end;
                    active.col_enabled[j] = on;
                    active.col_pulse_width[j] = if on { phase.col_pulse_width[j] } else { 0.0 };
                }
                let solution = solve_1r_network(self, &active)?;
                let dur = end - start;
                for (k, (cell, &current)) in self.cells.iter().zip(&solution.device_currents).enumerate() {
                    let Some(dir) = SwitchDirection::from_current(current) else {
                        continue;
                    };
                    if cell.state != dir.source() {
                        continue;
                    }
                    progress[k].advance(&self.params, current.abs(), dur, dir, self.combination);
                }
                start = end;
            }
        }
        Ok(progress.iter().map(|p| p.probability).collect())
    }

    /// Dispatches to the write routine matching the architecture.
    pub fn write_phase<R: Rng + ?Sized>(&mut self, phase: &PhaseSpec, rng: &mut R) -> Result<Vec<SwitchEvent>> {
        match self.arch {
            Architecture::OneT1R => self.write_1t1r_phase(phase, rng),
            Architecture::OneR => self.write_1r_phase(phase, rng),
        }
    }
}

/// Per-cell switching progress within one 1R phase.
#[derive(Debug, Clone, Copy, Default)]
struct CellProgress {
    started: bool,
    probability: f64,
}

impl CellProgress {
    fn advance(&mut self, params: &DeviceParams, current: f64, dur: f64, dir: SwitchDirection, mode: SegmentCombination) {
        if current <= params.ic0[dir] || dur <= 0.0 {
            return;
        }
        match mode {
            SegmentCombination::Independent => {
                let p = params.probability(current, dur, dir);
                self.probability = 1.0 - (1.0 - self.probability) * (1.0 - p);
            }
            SegmentCombination::EquivalentTime => {
                let offset = if self.started {
                    equivalent_time(params, current, self.probability, dir)
                } else {
                    0.0
                };
                self.probability = params.probability(current, offset + dur, dir);
            }
        }
        self.started = true;
    }
}

/// Pulse width at `current` that reaches probability `p`, floored at zero.
fn equivalent_time(params: &DeviceParams, current: f64, p: f64, dir: SwitchDirection) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let a = current / params.ic0[dir];
    let scale = 4.0 * crate::device::precessional_factor(a).unwrap_or(0.0) * params.delta[dir];
    // exp(-2 t (a-1) / tau0) = -ln p / scale
    let ratio = -p.ln() / scale;
    let t = -params.tau0[dir] / (2.0 * (a - 1.0)) * ratio.ln();
    t.max(0.0)
}

#[cfg(test)]
mod tests;
