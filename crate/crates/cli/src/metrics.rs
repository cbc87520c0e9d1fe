//! Detection metrics: missed-detection and false-alarm probabilities and
//! the equal-error operating point.

use covdet_core::solvers::threshold_estimate;
use nalgebra::DVector;

/// Missed-detection and false-alarm probabilities of a binary estimate.
///
/// `pm` counts active devices declared inactive over the total number of
/// active devices; `pf` counts inactive devices declared active over the
/// total number of inactive devices. A zero denominator yields NaN.
pub fn pm_pf(est: &DVector<f64>, truth: &DVector<f64>) -> (f64, f64) {
    assert_eq!(est.len(), truth.len());
    let mut missed = 0usize;
    let mut false_alarm = 0usize;
    let mut actives = 0usize;
    for i in 0..truth.len() {
        if truth[i] > 0.0 {
            actives += 1;
            if est[i] == 0.0 {
                missed += 1;
            }
        } else if est[i] > 0.0 {
            false_alarm += 1;
        }
    }
    let inactives = truth.len() - actives;
    let pm = if actives == 0 {
        f64::NAN
    } else {
        missed as f64 / actives as f64
    };
    let pf = if inactives == 0 {
        f64::NAN
    } else {
        false_alarm as f64 / inactives as f64
    };
    (pm, pf)
}

/// PM and PF of the thresholded estimate at every grid threshold.
pub fn pm_pf_curves(
    a_hat: &DVector<f64>,
    truth: &DVector<f64>,
    grid: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let mut pm = Vec::with_capacity(grid.len());
    let mut pf = Vec::with_capacity(grid.len());
    for &ell in grid {
        let est = threshold_estimate(a_hat, ell);
        let (m, f) = pm_pf(&est, truth);
        pm.push(m);
        pf.push(f);
    }
    (pm, pf)
}

/// Equal-error probability and whether a true crossing was found.
#[derive(Debug, Clone, Copy)]
pub struct EqualError {
    pub value: f64,
    /// False when no PM = PF crossing exists in the grid; the value is
    /// then the minimum over the grid of max(PM, PF).
    pub crossed: bool,
}

/// The common value of PM and PF at the threshold where they cross,
/// linearly interpolated between bracketing grid points.
pub fn equal_error_probability(
    a_hat: &DVector<f64>,
    truth: &DVector<f64>,
    grid: &[f64],
) -> EqualError {
    assert!(grid.len() >= 2, "threshold grid needs at least 2 points");
    let (pm, pf) = pm_pf_curves(a_hat, truth, grid);
    equal_error_from_curves(&pm, &pf)
}

/// Equal-error point of precomputed PM/PF curves over the same grid.
pub fn equal_error_from_curves(pm: &[f64], pf: &[f64]) -> EqualError {
    let n = pm.len();
    // PM grows and PF falls as the threshold rises; find the sign change
    // of (PM - PF).
    let diff: Vec<f64> = pm.iter().zip(pf).map(|(m, f)| m - f).collect();
    for i in 0..n {
        if diff[i] == 0.0 {
            return EqualError {
                value: pm[i],
                crossed: true,
            };
        }
        if i + 1 < n && diff[i] < 0.0 && diff[i + 1] > 0.0 {
            let t = -diff[i] / (diff[i + 1] - diff[i]);
            let value = pm[i] + t * (pm[i + 1] - pm[i]);
            return EqualError {
                value,
                crossed: true,
            };
        }
    }
    let value = pm
        .iter()
        .zip(pf)
        .map(|(m, f)| m.max(*f))
        .fold(f64::INFINITY, f64::min);
    EqualError {
        value,
        crossed: false,
    }
}
