use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{
    assemble_generator, cis, simulate_with, Couplings, Port, Pulse, PulseTrain, SolverSettings,
};
use crate::error::{diagnostic, invalid, Result};
use crate::model::MemoryConfig;
use crate::schedule::{DetuningSchedule, Segment, Stage};

/// Steady-state `S21` for a probe `exp(-i·2π·ω·t)` at each detuning `ω` (Hz):
/// `S21 = 1 + f·(−(M + i·2πω))⁻¹·b`.
pub fn transmission_spectrum(
    config: &MemoryConfig,
    detunings: &[f64],
    probe_detunings: &[f64],
) -> Result<Vec<Complex64>> {
    let m = assemble_generator(config, detunings)?;
    let c = Couplings::new(config, Port::Left);
    let n = config.n_resonators;
    probe_detunings
        .iter()
        .map(|&w| {
            let shifted: DMatrix<Complex64> =
                -(&m + DMatrix::<Complex64>::identity(n, n) * Complex64::new(0.0, 2.0 * PI * w));
            let a = shifted
                .lu()
                .solve(&c.input)
                .filter(|a| a.iter().all(|z| z.is_finite()))
                .ok_or_else(|| diagnostic!("pole at probe detuning {w} Hz (lossless resonance)"))?;
            Ok(Complex64::new(1.0, 0.0) + c.forward.dot(&a))
        })
        .collect()
}

/// Time-domain estimate of the transfer function used to validate
/// [`transmission_spectrum`].
#[derive(Debug, Clone)]
pub struct FourierCheck {
    pub probe_detunings: Vec<f64>,
    pub from_time_domain: Vec<Complex64>,
    pub from_matrix: Vec<Complex64>,
}

impl FourierCheck {
    /// Largest `|S21_time − S21_matrix|` relative to `max(|S21_matrix|, floor)`.
    pub fn max_deviation(&self, floor: f64) -> f64 {
        self.from_time_domain
            .iter()
            .zip(&self.from_matrix)
            .map(|(t, m)| (t - m).norm() / m.norm().max(floor))
            .fold(0.0, f64::max)
    }
}

/// Ratio of the Fourier transforms of `s_T` and `s_in` from a static run,
/// evaluated at the probe detunings. The run is extended until the stored
/// excitation has rung down.
pub fn spectrum_via_fft_crosscheck(
    config: &MemoryConfig,
    detunings: &[f64],
    pulse: &Pulse,
    probe_detunings: &[f64],
    dt: f64,
) -> Result<FourierCheck> {
    pulse.validate()?;
    if pulse.mean_photon_number <= 0.0 {
        return Err(invalid!("probe pulse carries no photons"));
    }
    let train = PulseTrain::single(pulse.clone());
    let peak_density = spectral_density(pulse, pulse.carrier_detuning);
    for &w in probe_detunings {
        if spectral_density(pulse, w) < 1e-3 * peak_density {
            return Err(diagnostic!(
                "probe pulse (fwhm {:e} s) has too little bandwidth at {w} Hz",
                pulse.fwhm
            ));
        }
    }

    let input_energy = pulse.mean_photon_number;
    let mut t_end = pulse.center_time + 8.0 * pulse.sigma() + 2e-6;
    let settings = SolverSettings::with_dt(dt);
    let result = loop {
        let schedule = DetuningSchedule::new(vec![Segment {
            t_start: 0.0,
            t_end,
            stage: Stage::Write,
            detunings: detunings.to_vec(),
        }])?;
        let r = simulate_with(config, &schedule, &train, t_end, &settings)?;
        if r.stored_photons(r.len() - 1) < 1e-12 * input_energy {
            break r;
        }
        if t_end > 200e-6 {
            return Err(diagnostic!(
                "stored excitation does not ring down; spectrum has a pole"
            ));
        }
        t_end *= 2.0;
    };

    let ft = |field: &[Complex64], w: f64| -> Complex64 {
        let n = field.len();
        field
            .iter()
            .zip(&result.time_grid)
            .enumerate()
            .map(|(k, (z, &t))| {
                let weight = if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
                z * cis(2.0 * PI * w * t) * weight
            })
            .sum::<Complex64>()
            * dt
    };
    let from_time_domain = probe_detunings
        .iter()
        .map(|&w| ft(&result.s_t, w) / ft(&result.s_in, w))
        .collect();
    let from_matrix = transmission_spectrum(config, detunings, probe_detunings)?;
    Ok(FourierCheck {
        probe_detunings: probe_detunings.to_vec(),
        from_time_domain,
        from_matrix,
    })
}

/// Power spectral density of a Gaussian pulse at detuning `w`, up to a constant.
fn spectral_density(pulse: &Pulse, w: f64) -> f64 {
    let sigma_amp = 2.0 * pulse.sigma();
    let x = 2.0 * PI * (w - pulse.carrier_detuning);
    (-x * x * sigma_amp * sigma_amp / 2.0).exp()
}
