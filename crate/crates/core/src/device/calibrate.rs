//! Fitting `(ic0, delta, tau0)` to the write-mapping boundary conditions.
//!
//! For each direction the mapping `I = I0 + I1|x|`, `t = t0 + t1|delta|`
//! must give
//!
//! * `P(I0 + I1, t0)      = p_floor` (no update when the error is zero),
//! * `P(I0, t0 + t1)      = p_floor` (no update when the input is zero),
//! * `P(I0 + I1, t0 + t1) = p_top`   (full-scale update).
//!
//! Writing `L(p) = ln(-ln p)` the model reads
//! `L(P) = ln(4 Δ f(a)) - 2 t (a - 1) / tau0`, which is linear in `t`. The
//! first and third anchors share the current, so their difference fixes
//! `(a_hi - 1) / tau0` directly; the second anchor then leaves a scalar
//! equation in `ic0` alone, solved by bracketing and bisection.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{
    factor_unchecked, DeviceParams, PerDirection, SwitchDirection, NOMINAL_R_AP, NOMINAL_R_P,
};
use crate::error::{Error, Result};

/// Boundary conditions for one switching direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationAnchors {
    pub t0: f64,
    pub t1: f64,
    pub i0: f64,
    pub i1: f64,
    pub p_floor: f64,
    pub p_top: f64,
}

pub type CalibrationTargets = PerDirection<CalibrationAnchors>;

impl CalibrationTargets {
    /// Default write-mapping coefficients with `p_floor = 0.05`, `p_top = 0.7`.
    pub fn standard() -> Self {
        let base = CalibrationAnchors {
            t0: 1.5e-9,
            t1: 1.0e-9,
            i0: 0.0,
            i1: 0.0,
            p_floor: 0.05,
            p_top: 0.7,
        };
        PerDirection::new(
            CalibrationAnchors {
                i0: 60e-6,
                i1: 30e-6,
                ..base
            },
            CalibrationAnchors {
                i0: 140e-6,
                i1: 60e-6,
                ..base
            },
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionFit {
    pub ic0: f64,
    pub delta: f64,
    pub tau0: f64,
    /// Relative residuals of the three anchors, in the order listed above.
    pub residuals: [f64; 3],
}

impl DirectionFit {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub params: DeviceParams,
    pub fits: PerDirection<DirectionFit>,
}

const RESIDUAL_TOLERANCE: f64 = 1e-3;
const SCAN_POINTS: usize = 4000;

fn loglog(p: f64) -> f64 {
    (-p.ln()).ln()
}

fn model(current: f64, t: f64, ic0: f64, delta: f64, tau0: f64) -> f64 {
    if current <= ic0 {
        return 0.0;
    }
    let a = current / ic0;
    (-4.0 * factor_unchecked(a) * delta * (-2.0 * t * (a - 1.0) / tau0).exp()).exp()
}

/// Fits one direction. Among admissible roots the smallest critical current
/// is chosen; it yields a probability surface that is monotone in current
/// over the whole operating range.
pub fn calibrate_direction(dir: SwitchDirection, anchors: &CalibrationAnchors) -> Result<DirectionFit> {
    let fail = |reason: String, residual: f64| Error::Calibration {
        direction: dir.to_string(),
        reason,
        residual,
    };
    let CalibrationAnchors {
        t0,
        t1,
        i0,
        i1,
        p_floor,
        p_top,
    } = *anchors;
    if !(t0 > 0.0 && t1 > 0.0 && i0 > 0.0 && i1 > 0.0) {
        return Err(fail("mapping coefficients must be positive".into(), f64::NAN));
    }
    if !(0.0 < p_floor && p_floor < p_top && p_top < 1.0) {
        return Err(fail(
            format!("need 0 < p_floor < p_top < 1, got {p_floor}, {p_top}"),
            f64::NAN,
        ));
    }
    let i_hi = i0 + i1;
    let l_floor = loglog(p_floor);
    let l_top = loglog(p_top);
    // (a_hi - 1) / tau0, in 1/s
    let rate = (l_floor - l_top) / (2.0 * t1);
    let k = l_floor + 2.0 * t0 * rate;

    let g = |c: f64| {
        let a0 = i0 / c;
        let a_hi = i_hi / c;
        k + factor_unchecked(a0).ln() - factor_unchecked(a_hi).ln()
            - 2.0 * (t0 + t1) * rate * (a0 - 1.0) / (a_hi - 1.0)
            - l_floor
    };

    // Log-spaced scan over ic0 in (1e-4 I0, I0).
    let lo = (i0 * 1e-4).ln();
    let hi = (i0 * (1.0 - 1e-9)).ln();
    let grid = (0..=SCAN_POINTS).map(|k| (lo + (hi - lo) * k as f64 / SCAN_POINTS as f64).exp());
    let mut bracket = None;
    let mut prev: Option<(f64, f64)> = None;
    for c in grid {
        let v = g(c);
        if let Some((pc, pv)) = prev {
            if pv.is_finite() && v.is_finite() && pv.signum() != v.signum() {
                bracket = Some((pc, c));
                break;
            }
        }
        prev = Some((c, v));
    }
    let Some((mut a, mut b)) = bracket else {
        return Err(fail(
            "no critical current below I0 satisfies all three anchors".into(),
            f64::INFINITY,
        ));
    };
    let ga = g(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if g(m).signum() == ga.signum() {
            a = m;
        } else {
            b = m;
        }
        if (b - a) <= 1e-15 * b {
            break;
        }
    }
    let ic0 = 0.5 * (a + b);
    let a_hi = i_hi / ic0;
    let tau0 = (a_hi - 1.0) / rate;
    let delta = k.exp() / (4.0 * factor_unchecked(a_hi));

    let residuals = [
        (model(i_hi, t0, ic0, delta, tau0) - p_floor) / p_floor,
        (model(i0, t0 + t1, ic0, delta, tau0) - p_floor) / p_floor,
        (model(i_hi, t0 + t1, ic0, delta, tau0) - p_top) / p_top,
    ];
    let fit = DirectionFit {
        ic0,
        delta,
        tau0,
        residuals,
    };
    if fit.max_residual() > RESIDUAL_TOLERANCE || !(ic0 < i0) {
        return Err(fail("residual above tolerance".into(), fit.max_residual()));
    }
    Ok(fit)
}

/// Fits both directions and assembles device parameters around the given
/// resistances.
pub fn calibrate_device(targets: &CalibrationTargets, r_p: f64, r_ap: f64) -> Result<CalibrationReport> {
    let fits = PerDirection::new(
        calibrate_direction(SwitchDirection::ApToP, &targets.ap_to_p)?,
        calibrate_direction(SwitchDirection::PToAp, &targets.p_to_ap)?,
    );
    let params = DeviceParams {
        ic0: fits.map(|_, f| f.ic0),
        delta: fits.map(|_, f| f.delta),
        tau0: fits.map(|_, f| f.tau0),
        r_p,
        r_ap,
        variation_sigma: 0.0,
    };
    params.validate()?;
    Ok(CalibrationReport { params, fits })
}

pub(super) fn default_params() -> &'static DeviceParams {
    static PARAMS: OnceLock<DeviceParams> = OnceLock::new();
    PARAMS.get_or_init(|| {
        calibrate_device(&CalibrationTargets::standard(), NOMINAL_R_P, NOMINAL_R_AP)
            .expect("standard targets calibrate")
            .params
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::switching_probability;

    #[test]
    fn standard_targets_hit_all_anchors() {
        let targets = CalibrationTargets::standard();
        let report = calibrate_device(&targets, NOMINAL_R_P, NOMINAL_R_AP).unwrap();
        for dir in SwitchDirection::ALL {
            let a = targets[dir];
            let p = &report.params;
            let hi = a.i0 + a.i1;
            let at = |i: f64, t: f64| switching_probability(i, t, dir, p).unwrap();
            assert!((at(hi, a.t0) - 0.05).abs() / 0.05 < 1e-3);
            assert!((at(a.i0, a.t0 + a.t1) - 0.05).abs() / 0.05 < 1e-3);
            assert!((at(hi, a.t0 + a.t1) - 0.7).abs() / 0.7 < 1e-3);
            assert!(report.fits[dir].max_residual() < 1e-3);
            assert!(report.fits[dir].ic0 < a.i0);
        }
        assert!(report.params.ic0.p_to_ap > report.params.ic0.ap_to_p);
    }

    #[test]
    fn recovered_delta_moves_continuously_with_floor() {
        let base = CalibrationTargets::standard();
        for dir in SwitchDirection::ALL {
            let d0 = calibrate_direction(dir, &base[dir]).unwrap().delta;
            let mut bumped = base[dir];
            bumped.p_floor += 0.01;
            let d1 = calibrate_direction(dir, &bumped).unwrap().delta;
            assert!(((d1 - d0) / d0).abs() < 0.5, "{dir}: {d0} -> {d1}");
            assert_ne!(d0, d1);
        }
    }

    #[test]
    fn impossible_targets_fail_with_report() {
        let mut a = CalibrationTargets::standard().ap_to_p;
        a.p_top = 0.01;
        assert!(matches!(
            calibrate_direction(SwitchDirection::ApToP, &a),
            Err(Error::Calibration { .. })
        ));
    }

    #[test]
    fn default_params_are_the_standard_calibration() {
        let p = DeviceParams::default();
        p.validate().unwrap();
        assert_eq!(p.r_p, NOMINAL_R_P);
        assert!(p.ic0.ap_to_p < 60e-6 && p.ic0.p_to_ap < 140e-6);
    }
}
