use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::device::{DeviceParams, MtjState};
use crate::rng::{stream, StreamKind};

const V_P: f64 = 200e-6 * 4.86e3;
const V_AP: f64 = -90e-6 * 9.7e3;

fn params() -> DeviceParams {
    DeviceParams::default()
}

fn random_xbar(rows: usize, cols: usize, arch: Architecture, sigma: f64, seed: u64) -> Crossbar {
    let mut rng = stream(seed, StreamKind::Init, 99);
    let states: Vec<MtjState> = (0..rows * cols)
        .map(|_| if rng.random::<bool>() { MtjState::P } else { MtjState::AP })
        .collect();
    Crossbar::fabricate(rows, cols, arch, params().with_variation(sigma), seed, |j, i| states[j * rows + i]).unwrap()
}

fn naive_read(x: &Crossbar, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.cols()];
    for (j, o) in out.iter_mut().enumerate() {
        for (i, vi) in v.iter().enumerate() {
            *o += vi / x.cell(j, i).resistance();
        }
    }
    out
}

#[test]
fn read_ohms_law() {
    let x = Crossbar::uniform(1, 1, Architecture::OneT1R, params(), MtjState::P).unwrap();
    let i = x.read(&[0.5]).unwrap();
    assert_relative_eq!(i[0], 102.88e-6, max_relative = 1e-4);
    assert_eq!(x.transpose_read(&[0.5]).unwrap(), i);
    assert_eq!(x.read(&[0.0]).unwrap(), vec![0.0]);
}

#[test]
fn read_matches_naive_product() {
    let x = random_xbar(2, 2, Architecture::OneR, 0.1, 3);
    let v = [0.013, -0.02];
    let got = x.read(&v).unwrap();
    for (g, e) in got.iter().zip(naive_read(&x, &v)) {
        assert_relative_eq!(*g, e, max_relative = 1e-14);
    }
    assert!(x.read(&[0.0; 3]).is_err());
    assert!(x.transpose_read(&[0.0; 3]).is_err());
}

#[test]
fn transpose_read_identity_and_selector() {
    for seed in 0..100 {
        let x = random_xbar(3, 4, Architecture::OneT1R, 0.05, seed);
        let mut rng = stream(seed, StreamKind::Init, 7);
        let e: Vec<f64> = (0..4).map(|_| rng.random_range(-0.02..0.02)).collect();
        assert_eq!(x.transpose_read(&e).unwrap(), x.transposed().read(&e).unwrap());
    }
    let x = random_xbar(3, 4, Architecture::OneT1R, 0.05, 1);
    let mut e = vec![0.0; 4];
    e[2] = 1.0;
    let col: Vec<f64> = (0..3).map(|i| x.cell(2, i).conductance()).collect();
    assert_eq!(x.transpose_read(&e).unwrap(), col);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn read_is_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let x = random_xbar(5, 4, Architecture::OneT1R, 0.1, seed);
        let mut rng = stream(seed, StreamKind::Init, 1);
        let v1: Vec<f64> = (0..5).map(|_| rng.random_range(-0.02..0.02)).collect();
        let v2: Vec<f64> = (0..5).map(|_| rng.random_range(-0.02..0.02)).collect();
        let mix: Vec<f64> = v1.iter().zip(&v2).map(|(p, q)| a * p + b * q).collect();
        let r1 = x.read(&v1).unwrap();
        let r2 = x.read(&v2).unwrap();
        let rm = x.read(&mix).unwrap();
        let scale = r1.iter().chain(&r2).fold(0.0f64, |m, v| m.max(v.abs())) * (a.abs() + b.abs()) + 1e-300;
        for j in 0..4 {
            prop_assert!((rm[j] - (a * r1[j] + b * r2[j])).abs() <= 1e-12 * scale);
        }
    }
}

fn two_phase_first(rows: usize, cols: usize) -> PhaseSpec {
    let mut phase = PhaseSpec::idle(1, rows, cols, SwitchDirection::PToAp);
    phase.row_enabled = vec![true; rows];
    phase.row_voltage = (0..rows).map(|i| if i % 2 == 0 { V_P } else { V_AP }).collect();
    phase.col_enabled[0] = true;
    phase.col_pulse_width[0] = 2.5e-9;
    phase
}

#[test]
fn disabled_columns_untouched_1t1r_exhaustive() {
    let p = params();
    for mask in 0..16u32 {
        let mut x = Crossbar::fabricate(2, 2, Architecture::OneT1R, p, 0, |j, i| {
            if mask >> (2 * j + i) & 1 == 1 { MtjState::AP } else { MtjState::P }
        })
        .unwrap();
        let before: Vec<MtjState> = (0..2).map(|i| x.cell(1, i).state).collect();
        let mut rng = stream(mask as u64, StreamKind::Write, 0);
        for _ in 0..50 {
            x.write_1t1r_phase(&two_phase_first(2, 2), &mut rng).unwrap();
        }
        let after: Vec<MtjState> = (0..2).map(|i| x.cell(1, i).state).collect();
        assert_eq!(before, after);
    }
}

#[test]
fn disabled_columns_untouched_1t1r_large() {
    let mut x = random_xbar(64, 64, Architecture::OneT1R, 0.05, 8);
    let mut rng = stream(8, StreamKind::Write, 0);
    let mut phase = two_phase_first(64, 64);
    for j in (0..64).step_by(2) {
        phase.col_enabled[j] = true;
        phase.col_pulse_width[j] = 2.5e-9;
    }
    let before = x.states();
    let mut flips = 0;
    for _ in 0..20 {
        flips += x.write_1t1r_phase(&phase, &mut rng).unwrap().len();
    }
    assert!(flips > 0);
    for j in (1..64).step_by(2) {
        for i in 0..64 {
            assert_eq!(x.cell(j, i).state, before[j * 64 + i]);
        }
    }
}

#[test]
fn all_columns_disabled_is_noop() {
    let mut x = random_xbar(4, 3, Architecture::OneT1R, 0.0, 2);
    let mut phase = two_phase_first(4, 3);
    phase.col_enabled[0] = false;
    phase.col_pulse_width[0] = 0.0;
    assert!(phase.is_noop());
    let mut rng = stream(0, StreamKind::Write, 0);
    assert!(x.write_1t1r_phase(&phase, &mut rng).unwrap().is_empty());
}

#[test]
fn malformed_phase_rejected() {
    let mut x = random_xbar(2, 2, Architecture::OneR, 0.0, 2);
    let mut rng = stream(0, StreamKind::Write, 0);
    let mut phase = PhaseSpec::idle(1, 2, 2, SwitchDirection::PToAp);
    phase.row_voltage[0] = 0.5;
    assert!(matches!(x.write_1r_phase(&phase, &mut rng), Err(Error::Contract(_))));
    assert!(matches!(x.write_1t1r_phase(&phase, &mut rng), Err(Error::ArchMismatch(_))));
    let phase = PhaseSpec::idle(1, 3, 2, SwitchDirection::PToAp);
    assert!(x.write_1r_phase(&phase, &mut rng).is_err());
}

#[test]
fn two_phase_sneak_oracle() {
    let x = Crossbar::uniform(2, 2, Architecture::OneR, params(), MtjState::P).unwrap();
    let sol = solve_1r_network(&x, &two_phase_first(2, 2)).unwrap();
    let expected = (V_P - V_AP) / (2.0 * 4.86e3);
    assert_relative_eq!(sol.current(1, 0), expected, max_relative = 1e-9);
    assert_relative_eq!(sol.current(1, 1), -expected, max_relative = 1e-9);
    assert!(expected > 180e-6 && expected > x.params().ic0.p_to_ap);
    assert_relative_eq!(sol.current(0, 0), V_P / 4.86e3, max_relative = 1e-12);

    // the sneak path can falsely switch S21
    let probs = x.phase_flip_probabilities(&two_phase_first(2, 2)).unwrap();
    assert!(probs[2] > 0.0, "{probs:?}");
}

fn single_phase(rows: usize, cols: usize, row: usize, col: usize, v: f64) -> PhaseSpec {
    let dir = SwitchDirection::from_current(v).unwrap();
    let mut phase = PhaseSpec::idle(1, rows, cols, dir);
    phase.row_enabled[row] = true;
    phase.row_voltage[row] = v;
    phase.col_enabled[col] = true;
    phase.col_pulse_width[col] = 2.5e-9;
    phase
}

#[test]
fn hand_kcl_oracle() {
    let x = Crossbar::uniform(2, 2, Architecture::OneR, params(), MtjState::P).unwrap();
    let v = 0.9;
    let r = 4.86e3;
    let sol = solve_1r_network(&x, &single_phase(2, 2, 0, 0, v)).unwrap();
    // floating row 1 sits at V/3, floating column 1 at 2V/3
    assert_relative_eq!(sol.row_voltages[1], v / 3.0, max_relative = 1e-12);
    assert_relative_eq!(sol.col_voltages[1], 2.0 * v / 3.0, max_relative = 1e-12);
    assert_relative_eq!(sol.current(0, 0), v / r, max_relative = 1e-12);
    assert_relative_eq!(sol.current(0, 1), v / (3.0 * r), max_relative = 1e-12);
    assert_relative_eq!(sol.current(1, 0), v / (3.0 * r), max_relative = 1e-12);
    assert_relative_eq!(sol.current(1, 1), -v / (3.0 * r), max_relative = 1e-12);
    assert_eq!(sol.floating_voltages().len(), 2);
}

#[test]
fn four_phase_all_p_has_no_false_flips() {
    let x = Crossbar::uniform(2, 2, Architecture::OneR, params(), MtjState::P).unwrap();
    let phase = single_phase(2, 2, 0, 0, V_P);
    let sol = solve_1r_network(&x, &phase).unwrap();
    let bound = (V_P / x.params().r_p).max(V_AP.abs() / x.params().r_ap);
    assert!(sol.max_abs_current() <= bound * (1.0 + 1e-12));
    let probs = x.phase_flip_probabilities(&phase).unwrap();
    assert!(probs[0] > 0.5);
    assert_eq!(&probs[1..], &[0.0, 0.0, 0.0]);
}

#[test]
fn singular_and_arch_errors() {
    let x = Crossbar::uniform(2, 2, Architecture::OneR, params(), MtjState::P).unwrap();
    let idle = PhaseSpec::idle(1, 2, 2, SwitchDirection::PToAp);
    assert!(matches!(solve_1r_network(&x, &idle), Err(Error::SingularNetwork(_))));
    let y = Crossbar::uniform(2, 2, Architecture::OneT1R, params(), MtjState::P).unwrap();
    assert!(matches!(solve_1r_network(&y, &single_phase(2, 2, 0, 0, 0.5)), Err(Error::ArchMismatch(_))));
    // no enabled rows: nothing is driven, nothing moves
    let mut cols_only = idle.clone();
    cols_only.col_enabled[0] = true;
    cols_only.col_pulse_width[0] = 2e-9;
    let sol = solve_1r_network(&x, &cols_only).unwrap();
    assert_eq!(sol.max_abs_current(), 0.0);
    assert!(x.phase_flip_probabilities(&cols_only).unwrap().iter().all(|&p| p == 0.0));
}

fn random_phase(rows: usize, cols: usize, rng: &mut impl Rng, sign: f64) -> PhaseSpec {
    let dir = SwitchDirection::from_current(sign).unwrap();
    let mut phase = PhaseSpec::idle(1, rows, cols, dir);
    for i in 0..rows {
        if rng.random::<f64>() < 0.4 {
            let mag: f64 = rng.random();
            phase.row_enabled[i] = true;
            phase.row_voltage[i] = if sign > 0.0 {
                (140e-6 + 60e-6 * mag) * 4.86e3
            } else {
                -(60e-6 + 30e-6 * mag) * 9.7e3
            };
        }
    }
    for j in 0..cols {
        if rng.random::<f64>() < 0.4 {
            phase.col_enabled[j] = true;
            phase.col_pulse_width[j] = 1.5e-9 + 1e-9 * rng.random::<f64>();
        }
    }
    phase.row_enabled[0] = true;
    if phase.row_voltage[0] == 0.0 {
        phase.row_voltage[0] = sign * 0.7;
    }
    phase
}

#[test]
fn kcl_residual_and_energy_bound() {
    let mut rng = stream(5, StreamKind::Init, 0);
    for trial in 0..200 {
        let x = random_xbar(12, 9, Architecture::OneR, 0.2, trial);
        let sign = if trial % 2 == 0 { 1.0 } else { -1.0 };
        let phase = random_phase(12, 9, &mut rng, sign);
        let sol = solve_1r_network(&x, &phase).unwrap();
        let imax = sol.max_abs_current();
        assert!(sol.max_kcl_residual() <= 1e-12 * imax, "trial {trial}");
        let vmax = phase.row_voltage.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let rmin = x.cells().iter().fold(f64::INFINITY, |m, c| m.min(c.resistance()));
        assert!(imax <= vmax / rmin * (1.0 + 1e-12));
    }
}

#[test]
fn solution_is_permutation_invariant() {
    let mut rng = stream(6, StreamKind::Init, 0);
    let (m, n) = (7, 5);
    let x = random_xbar(m, n, Architecture::OneR, 0.1, 6);
    let phase = random_phase(m, n, &mut rng, 1.0);
    let rp: Vec<usize> = (0..m).rev().collect();
    let cp: Vec<usize> = vec![2, 4, 0, 3, 1];
    let cells: Vec<MtjSynapse> = (0..n).flat_map(|j| (0..m).map(move |i| (j, i))).map(|(j, i)| *x.cell(cp[j], rp[i])).collect();
    let y = Crossbar::from_parts(m, n, Architecture::OneR, *x.params(), cells).unwrap();
    let mut q = phase.clone();
    for i in 0..m {
        q.row_enabled[i] = phase.row_enabled[rp[i]];
        q.row_voltage[i] = phase.row_voltage[rp[i]];
    }
    for j in 0..n {
        q.col_enabled[j] = phase.col_enabled[cp[j]];
        q.col_pulse_width[j] = phase.col_pulse_width[cp[j]];
    }
    let a = solve_1r_network(&x, &phase).unwrap();
    let b = solve_1r_network(&y, &q).unwrap();
    let scale = a.max_abs_current();
    for j in 0..n {
        for i in 0..m {
            assert!((b.current(j, i) - a.current(cp[j], rp[i])).abs() <= 1e-12 * scale);
        }
    }
}

#[test]
fn schur_matches_dense_both_orientations() {
    let mut rng = stream(12, StreamKind::Init, 0);
    for trial in 0..40 {
        let (m, n) = (1 + trial % 9, 1 + (trial * 7) % 11);
        let x = random_xbar(m, n, Architecture::OneR, 0.2, 200 + trial as u64);
        let row_p = [0.1, 0.5, 0.9][trial % 3];
        let col_p = [0.9, 0.2, 0.5][trial % 3];
        let mut phase = PhaseSpec::idle(1, m, n, SwitchDirection::PToAp);
        for i in 0..m {
            if rng.random::<f64>() < row_p {
                phase.row_enabled[i] = true;
                phase.row_voltage[i] = rng.random_range(0.6..1.0);
            }
        }
        for j in 0..n {
            if rng.random::<f64>() < col_p {
                phase.col_enabled[j] = true;
                phase.col_pulse_width[j] = 2e-9;
            }
        }
        if phase.enabled_rows() + phase.enabled_cols() == 0 {
            continue;
        }
        let d = solve_1r_network_with(&x, &phase, SolverKind::Dense).unwrap();
        let s = solve_1r_network_with(&x, &phase, SolverKind::Schur).unwrap();
        let scale = d.max_abs_current().max(1e-30);
        for (p, q) in d.device_currents.iter().zip(&s.device_currents) {
            assert!((p - q).abs() <= 1e-9 * scale, "trial {trial}");
        }
        assert!(s.max_kcl_residual() <= 1e-12 * scale);
    }
}

#[test]
fn iterative_matches_dense() {
    let mut rng = stream(9, StreamKind::Init, 0);
    for trial in 0..10 {
        let x = random_xbar(40, 30, Architecture::OneR, 0.1, 100 + trial);
        let phase = random_phase(40, 30, &mut rng, -1.0);
        let d = solve_1r_network_with(&x, &phase, SolverKind::Dense).unwrap();
        let c = solve_1r_network_with(&x, &phase, SolverKind::Iterative).unwrap();
        let s = solve_1r_network_with(&x, &phase, SolverKind::Schur).unwrap();
        let scale = d.max_abs_current();
        for (p, q) in d.device_currents.iter().zip(&c.device_currents) {
            assert!((p - q).abs() <= 1e-9 * scale);
        }
        for (p, q) in d.device_currents.iter().zip(&s.device_currents) {
            assert!((p - q).abs() <= 1e-9 * scale);
        }

    }
}

#[test]
fn equal_widths_reduce_to_single_segment() {
    let mut rng = stream(10, StreamKind::Init, 0);
    let mut x = random_xbar(6, 6, Architecture::OneR, 0.05, 10);
    let mut phase = random_phase(6, 6, &mut rng, 1.0);
    for j in 0..6 {
        if phase.col_enabled[j] {
            phase.col_pulse_width[j] = 2.1e-9;
        }
    }
    let eq = x.phase_flip_probabilities(&phase).unwrap();
    x.set_combination(SegmentCombination::Independent);
    let ind = x.phase_flip_probabilities(&phase).unwrap();
    for (a, b) in eq.iter().zip(&ind) {
        assert!((a - b).abs() <= 1e-15, "{a} {b}");
    }
    let sol = solve_1r_network(&x, &phase).unwrap();
    for (k, (&p, cell)) in eq.iter().zip(x.cells()).enumerate() {
        let i = sol.device_currents[k];
        let expected = match SwitchDirection::from_current(i) {
            Some(dir) if cell.state == dir.source() => x.params().probability(i.abs(), 2.1e-9, dir),
            _ => 0.0,
        };
        assert_eq!(p, expected);
    }
}

#[test]
fn independent_segments_underestimate_constant_current() {
    // One row, two grounded columns: each cell sees the same constant current,
    // so splitting column 1's pulse at column 0's end must not change it.
    let mut x = Crossbar::uniform(1, 2, Architecture::OneR, params(), MtjState::P).unwrap();
    let mut phase = PhaseSpec::idle(1, 1, 2, SwitchDirection::PToAp);
    phase.row_enabled[0] = true;
    phase.row_voltage[0] = V_P;
    phase.col_enabled = vec![true, true];
    phase.col_pulse_width = vec![1.5e-9, 2.5e-9];
    let direct = x.params().probability(V_P / 4.86e3, 2.5e-9, SwitchDirection::PToAp);
    let eq = x.phase_flip_probabilities(&phase).unwrap();
    assert_relative_eq!(eq[1], direct, max_relative = 1e-12);
    assert_relative_eq!(eq[1], 0.7, epsilon = 0.02);
    x.set_combination(SegmentCombination::Independent);
    let ind = x.phase_flip_probabilities(&phase).unwrap();
    assert!(ind[1] < 0.2, "{}", ind[1]);
}

#[test]
fn one_by_one_1r_equals_1t1r_probability() {
    let mut x = Crossbar::uniform(1, 1, Architecture::OneR, params(), MtjState::AP).unwrap();
    let phase = single_phase(1, 1, 0, 0, V_AP);
    let p = x.phase_flip_probabilities(&phase).unwrap()[0];
    assert_relative_eq!(p, x.params().probability(90e-6, 2.5e-9, SwitchDirection::ApToP), max_relative = 1e-12);
    let mut rng = stream(1, StreamKind::Write, 0);
    let n = 20_000;
    let mut flips = 0;
    for _ in 0..n {
        x.set_states(&[MtjState::AP]).unwrap();
        flips += x.write_phase(&phase, &mut rng).unwrap().len();
    }
    let sd = (p * (1.0 - p) / n as f64).sqrt();
    assert!((flips as f64 / n as f64 - p).abs() < 4.0 * sd);
}

#[test]
fn deterministic_programming() {
    let p = params();
    let drive = DeterministicDrive::new(&p, PerDirectionCurrents::strongest(), 0.9999).unwrap();
    for dir in SwitchDirection::ALL {
        let a = drive.current[dir];
        assert!(p.probability(a, drive.pulse_width[dir], dir) >= 0.9999 - 1e-9);
    }
    let mut rng = stream(2, StreamKind::Program, 0);
    let targets: Vec<MtjState> = (0..64).map(|_| if rng.random::<bool>() { MtjState::P } else { MtjState::AP }).collect();

    let mut x = Crossbar::uniform(8, 8, Architecture::OneT1R, p.with_variation(0.1), MtjState::P).unwrap();
    let report = program_deterministic(&mut x, &targets, &drive, &mut rng).unwrap();
    assert_eq!(report.corrupted, 0);
    assert_eq!(x.states(), targets);

    let mut one = Crossbar::uniform(1, 1, Architecture::OneR, p, MtjState::P).unwrap();
    for t in [MtjState::AP, MtjState::P, MtjState::AP] {
        let r = program_deterministic(&mut one, &[t], &drive, &mut rng).unwrap();
        assert_eq!(r.corrupted, 0);
    }
}

#[test]
fn deterministic_programming_1r_corrupts_neighbours() {
    let p = params();
    let drive = DeterministicDrive::new(&p, PerDirectionCurrents::strongest(), 0.9999).unwrap();
    let mut rng = stream(3, StreamKind::Program, 0);
    let targets: Vec<MtjState> = (0..256).map(|_| if rng.random::<bool>() { MtjState::P } else { MtjState::AP }).collect();
    let mut x = random_xbar(16, 16, Architecture::OneR, 0.0, 3);
    let report = program_deterministic(&mut x, &targets, &drive, &mut rng).unwrap();
    assert!(report.corrupted > 0, "{report:?}");
    assert!(program_deterministic(&mut x, &targets[..10], &drive, &mut rng).is_err());
}

struct PerDirectionCurrents;

impl PerDirectionCurrents {
    fn strongest() -> crate::device::PerDirection<f64> {
        crate::device::PerDirection::new(90e-6, 200e-6)
    }
}

#[test]
fn dump_round_trip() {
    let x = random_xbar(5, 3, Architecture::OneR, 0.2, 77);
    let text = x.dump();
    assert!(text.starts_with("mtj-crossbar 1\n"));
    let y = Crossbar::restore(&text).unwrap();
    assert_eq!(x, y);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.txt");
    x.save(&path).unwrap();
    assert_eq!(Crossbar::load(&path).unwrap(), x);

    assert!(Crossbar::restore(&text.replace("mtj-crossbar 1", "mtj-crossbar 9")).is_err());
    let truncated: String = text.lines().take(text.lines().count() - 1).collect::<Vec<_>>().join("\n");
    assert!(matches!(Crossbar::restore(&truncated), Err(Error::Dump { .. })));
}
