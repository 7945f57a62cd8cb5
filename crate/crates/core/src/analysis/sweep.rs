use serde::{Deserialize, Serialize};

use crate::error::{diagnostic, invalid, Result};

/// Fraction of the best efficiency a pulse must reach to count towards the
/// bandwidth. `1.0` picks the FWHM of the best efficiency itself.
pub const DEFAULT_PLATEAU_FRACTION: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Fwhm,
    Delta,
    CloseTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub efficiencies: Vec<f64>,
    pub best_efficiency: f64,
    /// `1/FWHM*` for FWHM sweeps with a plateau.
    pub bandwidth: Option<f64>,
}

impl SweepResult {
    pub fn new(axis: SweepAxis, values: Vec<f64>, efficiencies: Vec<f64>) -> Result<Self> {
        if values.len() != efficiencies.len() || values.is_empty() {
            return Err(invalid!(
                "sweep needs matching, non-empty axis ({}) and efficiency ({}) lists",
                values.len(),
                efficiencies.len()
            ));
        }
        let best_efficiency = efficiencies
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            axis,
            values,
            efficiencies,
            best_efficiency,
            bandwidth: None,
        })
    }

    pub fn argmax(&self) -> usize {
        self.efficiencies
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bk, bv), (k, &v)| {
                if v > bv {
                    (k, v)
                } else {
                    (bk, bv)
                }
            })
            .0
    }
}

/// Bandwidth `1/FWHM*` where `FWHM*` is the smallest swept FWHM reaching
/// `plateau_fraction` of the best efficiency.
///
/// Fails with a diagnostic when the efficiency is still rising at the
/// longest pulse, since the plateau then lies outside the sweep.
pub fn bandwidth_from_sweep(
    fwhms: &[f64],
    efficiencies: &[f64],
    plateau_fraction: f64,
) -> Result<SweepResult> {
    if !(plateau_fraction > 0.0 && plateau_fraction <= 1.0) {
        return Err(invalid!(
            "plateau fraction must lie in (0, 1], got {plateau_fraction}"
        ));
    }
    let mut order: Vec<usize> = (0..fwhms.len()).collect();
    order.sort_by(|&a, &b| fwhms[a].total_cmp(&fwhms[b]));
    let values: Vec<f64> = order.iter().map(|&k| fwhms[k]).collect();
    let etas: Vec<f64> = order.iter().map(|&k| efficiencies[k]).collect();
    let mut sweep = SweepResult::new(SweepAxis::Fwhm, values, etas)?;
    let (lo, hi) = (sweep.values[0], *sweep.values.last().unwrap());
    if !(lo > 0.0) || hi / lo < 10.0 * (1.0 - 1e-9) {
        return Err(invalid!(
            "FWHM sweep must span at least a decade, got {lo:e}..{hi:e} s"
        ));
    }
    let n = sweep.values.len();
    let best = sweep.argmax();
    if best + 1 == n && n > 1 && sweep.efficiencies[n - 1] > sweep.efficiencies[n - 2] {
        return Err(diagnostic!(
            "no plateau: efficiency still rising at the longest pulse ({:e} s, eta = {:.6}); bandwidth <= {:e} Hz",
            hi,
            sweep.efficiencies[n - 1],
            1.0 / hi
        ));
    }
    let threshold = plateau_fraction * sweep.best_efficiency;
    let k = sweep
        .efficiencies
        .iter()
        .position(|&e| e >= threshold)
        .expect("the maximum itself meets the threshold");
    sweep.bandwidth = Some(1.0 / sweep.values[k]);
    Ok(sweep)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least-squares line through `(x, y)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(invalid!("linear fit needs at least two paired points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(invalid!("linear fit needs at least two distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bandwidth_uses_smallest_fwhm_at_threshold() {
        let f = [10e-9, 20e-9, 40e-9, 80e-9, 160e-9];
        let e = [0.02, 0.06, 0.095, 0.1, 0.09];
        let s = bandwidth_from_sweep(&f, &e, 1.0).unwrap();
        assert_eq!(s.bandwidth, Some(1.0 / 80e-9));
        assert_eq!(s.best_efficiency, 0.1);
        let s95 = bandwidth_from_sweep(&f, &e, 0.95).unwrap();
        assert_eq!(s95.bandwidth, Some(1.0 / 40e-9));
    }

    #[test]
    fn unsorted_input_is_ordered() {
        let f = [160e-9, 10e-9, 80e-9, 20e-9, 40e-9];
        let e = [0.09, 0.02, 0.1, 0.06, 0.095];
        let s = bandwidth_from_sweep(&f, &e, 1.0).unwrap();
        assert_eq!(s.values, vec![10e-9, 20e-9, 40e-9, 80e-9, 160e-9]);
        assert_eq!(s.bandwidth, Some(1.0 / 80e-9));
    }

    #[test]
    fn rising_sweep_has_no_plateau() {
        let f = [10e-9, 30e-9, 100e-9];
        let e = [0.01, 0.02, 0.03];
        assert!(matches!(
            bandwidth_from_sweep(&f, &e, 1.0),
            Err(crate::Error::Diagnostic(_))
        ));
    }

    #[test]
    fn narrow_sweep_is_rejected() {
        let f = [10e-9, 30e-9, 90e-9];
        let e = [0.01, 0.03, 0.02];
        assert!(matches!(
            bandwidth_from_sweep(&f, &e, 1.0),
            Err(crate::Error::InvalidArgument(_))
        ));
        assert!(bandwidth_from_sweep(&[10e-9, 1e-6], &[0.1, 0.0], 0.0).is_err());
    }

    #[test]
    fn line_fit() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let noisy = linear_fit(&x, &[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert!(noisy.r_squared < 0.5);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }
}
