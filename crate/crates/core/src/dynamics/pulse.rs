use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Gaussian coherent pulse. `fwhm` refers to the power envelope `|s_in|²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub center_time: f64,
    pub fwhm: f64,
    pub mean_photon_number: f64,
    pub phase: f64,
    #[serde(default)]
    pub carrier_detuning: f64,
}

impl Pulse {
    pub fn gaussian(center_time: f64, fwhm: f64, mean_photon_number: f64, phase: f64) -> Self {
        Self {
            center_time,
            fwhm,
            mean_photon_number,
            phase,
            carrier_detuning: 0.0,
        }
    }

    /// Standard deviation of the power envelope.
    pub fn sigma(&self) -> f64 {
        self.fwhm / (2.0 * (2.0 * LN_2).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm.is_finite() && self.fwhm > 0.0) {
            return Err(invalid!("pulse fwhm must be positive, got {}", self.fwhm));
        }
        if !(self.mean_photon_number.is_finite() && self.mean_photon_number >= 0.0) {
            return Err(invalid!(
                "mean photon number must be non-negative, got {}",
                self.mean_photon_number
            ));
        }
        if !(self.center_time.is_finite()
            && self.phase.is_finite()
            && self.carrier_detuning.is_finite())
        {
            return Err(invalid!("pulse timing, phase and carrier must be finite"));
        }
        Ok(())
    }

    /// Field amplitude in sqrt(photon flux) units.
    pub fn amplitude(&self, t: f64) -> Complex64 {
        let sigma = self.sigma();
        let x = t - self.center_time;
        let norm = (2.0 * PI * sigma * sigma).powf(-0.25);
        let envelope =
            self.mean_photon_number.sqrt() * norm * (-x * x / (4.0 * sigma * sigma)).exp();
        Complex64::from_polar(envelope, self.phase - 2.0 * PI * self.carrier_detuning * t)
    }
}

/// Sum of coherent pulses injected from the input port.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PulseTrain {
    pub pulses: Vec<Pulse>,
}

impl PulseTrain {
    pub fn single(pulse: Pulse) -> Self {
        Self {
            pulses: vec![pulse],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pulses.iter().try_for_each(Pulse::validate)
    }

    pub fn amplitude(&self, t: f64) -> Complex64 {
        self.pulses.iter().map(|p| p.amplitude(t)).sum()
    }

    pub fn total_photons(&self) -> f64 {
        self.pulses.iter().map(|p| p.mean_photon_number).sum()
    }

    pub fn min_fwhm(&self) -> Option<f64> {
        self.pulses.iter().map(|p| p.fwhm).reduce(f64::min)
    }

    /// Multiplies every pulse amplitude by `c`.
    pub fn scaled(&self, c: Complex64) -> Self {
        let pulses = self
            .pulses
            .iter()
            .map(|p| Pulse {
                mean_photon_number: p.mean_photon_number * c.norm_sqr(),
                phase: p.phase + c.arg(),
                ..p.clone()
            })
            .collect();
        Self { pulses }
    }

    pub fn first_peak(&self) -> Option<f64> {
        self.pulses.iter().map(|p| p.center_time).reduce(f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_is_normalised_to_photon_number() {
        let p = Pulse::gaussian(300e-9, 97e-9, 2.5, 0.3);
        let dt = 0.1e-9;
        let e: f64 = (0..10_000)
            .map(|k| p.amplitude(k as f64 * dt).norm_sqr() * dt)
            .sum();
        assert!((e - 2.5).abs() < 1e-9, "{e}");
    }

    #[test]
    fn fwhm_is_of_the_power_envelope() {
        let p = Pulse::gaussian(0.0, 100e-9, 1.0, 0.0);
        let half = p.amplitude(50e-9).norm_sqr() / p.amplitude(0.0).norm_sqr();
        assert!((half - 0.5).abs() < 1e-12);
    }

    #[test]
    fn carrier_and_phase_enter_the_argument() {
        let mut p = Pulse::gaussian(0.0, 50e-9, 1.0, 0.7);
        p.carrier_detuning = 1e6;
        let t = 10e-9;
        let expected = 0.7 - 2.0 * PI * 1e6 * t;
        let diff = (p.amplitude(t).arg() - expected).rem_euclid(2.0 * PI);
        assert!(diff < 1e-12 || (2.0 * PI - diff) < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(Pulse::gaussian(0.0, 0.0, 1.0, 0.0).validate().is_err());
        assert!(Pulse::gaussian(0.0, 1e-9, -1.0, 0.0).validate().is_err());
        assert!(Pulse::gaussian(0.0, 1e-9, 1.0, 0.0).validate().is_ok());
    }

    #[test]
    fn scaling_multiplies_amplitude() {
        let train = PulseTrain::single(Pulse::gaussian(100e-9, 50e-9, 1.0, 0.2));
        let c = Complex64::from_polar(3.0, 1.1);
        let scaled = train.scaled(c);
        let t = 120e-9;
        let diff = scaled.amplitude(t) - c * train.amplitude(t);
        assert!(diff.norm() < 1e-12 * scaled.amplitude(t).norm());
    }
}
