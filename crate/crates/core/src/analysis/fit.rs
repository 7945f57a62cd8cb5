use serde::{Deserialize, Serialize};

use crate::error::{diagnostic, invalid, Result};

/// Relative decay over the fitted span below which the data cannot be told
/// apart from a constant.
const FLAT_DECAY: f64 = 1e-6;
/// Allowed relative rise between consecutive points of a decay curve.
const MONOTONE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "seconds")]
pub enum DecayConstant {
    Finite(f64),
    /// No decay resolved; the time constant is at least this value.
    LowerBound(f64),
}

impl DecayConstant {
    pub fn value(self) -> f64 {
        match self {
            DecayConstant::Finite(t) | DecayConstant::LowerBound(t) => t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub tau: DecayConstant,
    pub amplitude: f64,
}

/// Least-squares fit of `η(t) = η₀·exp(−t/τ)`.
///
/// A log-linear regression seeds a Gauss–Newton refinement on the linear
/// residuals.
pub fn decay_fit(times: &[f64], efficiencies: &[f64]) -> Result<DecayFit> {
    if times.len() != efficiencies.len() || times.len() < 4 {
        return Err(invalid!("decay fit needs at least four paired points"));
    }
    let mut pts: Vec<(f64, f64)> = times
        .iter()
        .copied()
        .zip(efficiencies.iter().copied())
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.iter().any(|&(t, e)| !t.is_finite() || !(e > 0.0)) {
        return Err(invalid!(
            "decay fit needs finite times and positive efficiencies"
        ));
    }
    for w in pts.windows(2) {
        if w[1].1 > w[0].1 * (1.0 + MONOTONE_TOLERANCE) {
            return Err(diagnostic!(
                "efficiency rises from {:.6e} to {:.6e} between {:e} s and {:e} s",
                w[0].1,
                w[1].1,
                w[0].0,
                w[1].0
            ));
        }
    }
    let span = pts.last().unwrap().0 - pts[0].0;
    if !(span > 0.0) {
        return Err(invalid!("decay fit needs distinct times"));
    }

    // log-linear seed
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let stl: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1.ln() - ml)).sum();
    let mut rate = -stl / stt;
    let mut amp = (ml + rate * mt).exp();

    for _ in 0..50 {
        // J columns: d/d amp = e^{-rt}, d/d rate = -t·amp·e^{-rt}
        let (mut a11, mut a12, mut a22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(t, e) in &pts {
            let x = (-rate * t).exp();
            let j1 = x;
            let j2 = -t * amp * x;
            let r = e - amp * x;
            a11 += j1 * j1;
            a12 += j1 * j2;
            a22 += j2 * j2;
            g1 += j1 * r;
            g2 += j2 * r;
        }
        let det = a11 * a22 - a12 * a12;
        if det.abs() < f64::MIN_POSITIVE {
            break;
        }
        let d_amp = (a22 * g1 - a12 * g2) / det;
        let d_rate = (a11 * g2 - a12 * g1) / det;
        amp += d_amp;
        rate += d_rate;
        if d_rate.abs() <= 1e-14 * rate.abs().max(1.0 / span) && d_amp.abs() <= 1e-14 * amp.abs() {
            break;
        }
    }

    let tau = if rate * span < FLAT_DECAY {
        DecayConstant::LowerBound(span / FLAT_DECAY)
    } else {
        DecayConstant::Finite(1.0 / rate)
    };
    Ok(DecayFit {
        tau,
        amplitude: amp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_exponential() {
        let tau = 0.51e-6;
        let t: Vec<f64> = (0..6).map(|k| 0.3e-6 + k as f64 * 0.2e-6).collect();
        let e: Vec<f64> = t.iter().map(|x| 0.2 * (-x / tau).exp()).collect();
        let fit = decay_fit(&t, &e).unwrap();
        assert!((fit.tau.value() / tau - 1.0).abs() < 1e-10);
        assert!((fit.amplitude / 0.2 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_data_gives_lower_bound() {
        let t = [0.0, 1e-6, 2e-6, 3e-6];
        let fit = decay_fit(&t, &[0.1; 4]).unwrap();
        assert!(matches!(fit.tau, DecayConstant::LowerBound(_)));
        assert!(fit.tau.value() >= 3e-6 / FLAT_DECAY);
    }

    #[test]
    fn doubling_the_rate_halves_tau() {
        let t: Vec<f64> = (0..5).map(|k| k as f64 * 0.25e-6).collect();
        let f1 = decay_fit(
            &t,
            &t.iter().map(|x| (-x / 0.8e-6).exp()).collect::<Vec<_>>(),
        )
        .unwrap();
        let f2 = decay_fit(
            &t,
            &t.iter()
                .map(|x| (-2.0 * x / 0.8e-6).exp())
                .collect::<Vec<_>>(),
        )
        .unwrap();
        assert!((f1.tau.value() / f2.tau.value() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_rising_and_short_data() {
        let t = [0.0, 1.0, 2.0, 3.0];
        assert!(matches!(
            decay_fit(&t, &[1.0, 0.5, 0.8, 0.2]),
            Err(crate::Error::Diagnostic(_))
        ));
        assert!(decay_fit(&t[..3], &[1.0, 0.5, 0.2]).is_err());
        assert!(decay_fit(&t, &[1.0, 0.5, 0.0, 0.1]).is_err());
    }
}
