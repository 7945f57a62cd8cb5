//! Time-bin qubits `a_e|e⟩ + a_l·e^{iφ}|l⟩` stored as two weak coherent pulses.
//!
//! Signal and leakage are read at each bin's expected echo position. Three
//! runs (both bins, early only, late only) separate signal from leakage,
//! which is exact because the memory is linear.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{window_energy, window_peak, wrap_phase, EchoWindow};
use crate::dynamics::{
    resolving_dt, simulate_with, Pulse, PulseTrain, SimulationResult, SolverSettings,
};
use crate::error::{config_err, diagnostic, invalid, Result};
use crate::model::{build_comb, MemoryConfig};
use crate::schedule::{close_windows_schedule, DetuningSchedule, DEFAULT_CLOSE_DETUNING};

pub const TIMEBIN_HEADER: &str = "phi,storage_time_s,amp_ratio,phase_dev_rad,F_e,F_l";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBinState {
    pub a_e: f64,
    pub a_l: f64,
    pub phi: f64,
    pub bin_separation: f64,
    pub fwhm: f64,
}

impl TimeBinState {
    pub fn new(a_e: f64, a_l: f64, phi: f64, bin_separation: f64, fwhm: f64) -> Result<Self> {
        let s = Self {
            a_e,
            a_l,
            phi,
            bin_separation,
            fwhm,
        };
        s.validate()?;
        Ok(s)
    }

    /// Equal-weight superposition, `a_e = a_l = 1/√2`.
    pub fn balanced(phi: f64, bin_separation: f64, fwhm: f64) -> Result<Self> {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(a, a, phi, bin_separation, fwhm)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a_e >= 0.0 && self.a_l >= 0.0) {
            return Err(invalid!("bin amplitudes must be non-negative reals"));
        }
        if (self.a_e * self.a_e + self.a_l * self.a_l - 1.0).abs() > 1e-12 {
            return Err(invalid!(
                "a_e^2 + a_l^2 = {} is not normalised",
                self.a_e * self.a_e + self.a_l * self.a_l
            ));
        }
        if !(self.fwhm > 0.0 && self.phi.is_finite()) {
            return Err(invalid!("fwhm must be positive and phi finite"));
        }
        if !(self.bin_separation > self.fwhm) {
            return Err(invalid!(
                "bins overlap: separation {:e} s must exceed fwhm {:e} s",
                self.bin_separation,
                self.fwhm
            ));
        }
        Ok(())
    }

    pub fn amplitude(&self, bin: Bin) -> f64 {
        match bin {
            Bin::Early => self.a_e,
            Bin::Late => self.a_l,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bin {
    Early,
    Late,
}

impl Bin {
    pub fn other(self) -> Self {
        match self {
            Bin::Early => Bin::Late,
            Bin::Late => Bin::Early,
        }
    }
}

/// Early pulse at `t0`, late pulse one separation later, phases `0` and `φ`.
pub fn encode(state: &TimeBinState, t0: f64, mean_photons: f64) -> Result<PulseTrain> {
    state.validate()?;
    if !(mean_photons >= 0.0 && mean_photons.is_finite()) {
        return Err(invalid!("mean photon number must be non-negative"));
    }
    let pulse = |bin: Bin, t: f64, phase: f64| {
        let a = state.amplitude(bin);
        Pulse::gaussian(t, state.fwhm, mean_photons * a * a, phase)
    };
    Ok(PulseTrain {
        pulses: vec![
            pulse(Bin::Early, t0, 0.0),
            pulse(Bin::Late, t0 + state.bin_separation, state.phi),
        ],
    })
}

/// Pulse train with only `bin` populated.
pub fn encode_bin(
    state: &TimeBinState,
    t0: f64,
    mean_photons: f64,
    bin: Bin,
) -> Result<PulseTrain> {
    let mut train = encode(state, t0, mean_photons)?;
    let keep = match bin {
        Bin::Early => 0,
        Bin::Late => 1,
    };
    train.pulses = vec![train.pulses.swap_remove(keep)];
    Ok(train)
}

pub fn fidelity(signal: f64, noise: f64) -> Result<f64> {
    if !(signal >= 0.0 && noise >= 0.0) {
        return Err(invalid!(
            "signal and noise must be non-negative, got S = {signal}, N = {noise}"
        ));
    }
    if signal + 2.0 * noise == 0.0 {
        return Err(invalid!(
            "fidelity undefined for zero signal and zero noise"
        ));
    }
    Ok((signal + noise) / (signal + 2.0 * noise))
}

/// How a bin's echo strength is read from the output fields.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BinReadout {
    #[default]
    /// Photon flux of both ports at the expected echo sample.
    PeakIntensity,
    /// Photon number of both ports within `±half_width` of the expected echo.
    WindowEnergy { half_width: f64 },
}

impl BinReadout {
    fn half_width(self) -> f64 {
        match self {
            BinReadout::PeakIntensity => 0.0,
            BinReadout::WindowEnergy { half_width } => half_width,
        }
    }

    fn window(self, center: f64) -> EchoWindow {
        let h = self.half_width();
        EchoWindow {
            order: 1,
            t_start: center - h,
            t_end: center + h,
        }
    }

    /// Strength and phasor of the echo around `center`.
    pub fn read(self, result: &SimulationResult, center: f64) -> Result<(f64, Complex64)> {
        let dt = result.dt();
        let last = *result
            .time_grid
            .last()
            .ok_or_else(|| diagnostic!("empty simulation"))?;
        if center < 0.0 || center > last {
            return Err(diagnostic!(
                "echo position {center:e} s lies outside the run"
            ));
        }
        let forward = result.emitted_forward();
        match self {
            BinReadout::PeakIntensity => {
                let k = (center / dt).round() as usize;
                Ok((forward[k].norm_sqr() + result.s_r[k].norm_sqr(), forward[k]))
            }
            BinReadout::WindowEnergy { .. } => {
                let w = self.window(center);
                let e =
                    window_energy(result, &forward, &w)? + window_energy(result, &result.s_r, &w)?;
                let k = window_peak(result, &forward, &w)?;
                Ok((e, forward[k]))
            }
        }
    }
}

/// Protocol for storing one time-bin state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeBinProtocol {
    pub delta: f64,
    /// Early-bin peak time.
    pub t0: f64,
    pub mean_photons: f64,
    /// Close stage inserted once both bins are absorbed; 0 keeps a static comb.
    pub close_time: f64,
    pub readout: BinReadout,
    pub dt: Option<f64>,
}

impl Default for TimeBinProtocol {
    fn default() -> Self {
        Self {
            delta: 3.5e6,
            t0: 150e-9,
            mean_photons: 1.0,
            close_time: 0.0,
            readout: BinReadout::PeakIntensity,
            dt: None,
        }
    }
}

/// Signal, leakage and output-state figures for one stored state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBinReport {
    pub storage_time: f64,
    pub signal_e: f64,
    pub noise_e: f64,
    pub signal_l: f64,
    pub noise_l: f64,
    pub fidelity_e: f64,
    pub fidelity_l: f64,
    /// `sqrt(S_l/S_e)` from the two-bin run, ideally `a_l/a_e`.
    pub amp_ratio: f64,
    /// `φ_l − φ_e − φ`, ideally 0.
    pub phase_deviation: f64,
    /// Same two figures from the single-bin runs (leakage-free).
    pub clean_amp_ratio: f64,
    pub clean_phase_deviation: f64,
}

impl TimeBinReport {
    pub fn amplitude_deviation(&self, state: &TimeBinState) -> f64 {
        (self.amp_ratio / (state.a_l / state.a_e) - 1.0).abs()
    }
}

impl TimeBinProtocol {
    /// Close begins halfway between the late input peak and the early echo.
    pub fn close_start(&self, state: &TimeBinState) -> f64 {
        self.t0 + state.bin_separation + 0.5 * (1.0 / self.delta - state.bin_separation)
    }

    pub fn t_end(&self, state: &TimeBinState) -> f64 {
        self.t0 + state.bin_separation + 1.5 / self.delta + self.close_time + 20e-9
    }

    pub fn schedule(
        &self,
        config: &MemoryConfig,
        state: &TimeBinState,
    ) -> Result<DetuningSchedule> {
        state.validate()?;
        if !(self.delta > 0.0) {
            return Err(invalid!("delta must be positive"));
        }
        if !(self.close_time >= 0.0) {
            return Err(invalid!("close time must be non-negative"));
        }
        if 1.0 / self.delta <= state.bin_separation {
            return Err(config_err!(
                "bin separation {:e} s is not shorter than the echo delay 1/delta = {:e} s",
                state.bin_separation,
                1.0 / self.delta
            ));
        }
        let comb = build_comb(config.n_resonators, self.delta)?;
        let start = self.close_start(state);
        let windows = if self.close_time > 0.0 {
            vec![(start, start + self.close_time)]
        } else {
            Vec::new()
        };
        close_windows_schedule(
            &comb,
            start,
            &windows,
            self.t_end(state),
            DEFAULT_CLOSE_DETUNING,
        )
    }

    /// Expected echo positions of the early and late bins.
    pub fn echo_positions(&self, schedule: &DetuningSchedule, state: &TimeBinState) -> (f64, f64) {
        let e = schedule.advance_comb_clock(self.t0, 1.0 / self.delta);
        let l = schedule.advance_comb_clock(self.t0 + state.bin_separation, 1.0 / self.delta);
        (e, l)
    }

    fn check_disjoint(&self, e: f64, l: f64, dt: f64) -> Result<()> {
        let h = self.readout.half_width();
        if (l - e).abs() <= 2.0 * h || (l - e).abs() < dt {
            return Err(config_err!(
                "echo windows of the two bins overlap (positions {e:e} s and {l:e} s, half-width {h:e} s)"
            ));
        }
        Ok(())
    }

    fn simulate(
        &self,
        config: &MemoryConfig,
        schedule: &DetuningSchedule,
        input: &PulseTrain,
        state: &TimeBinState,
    ) -> Result<SimulationResult> {
        let dt = self
            .dt
            .unwrap_or_else(|| resolving_dt(config, schedule, input));
        simulate_with(
            config,
            schedule,
            input,
            self.t_end(state),
            &SolverSettings::with_dt(dt),
        )
    }

    /// Energy a single populated bin leaks into the other bin's echo position.
    pub fn leakage_noise(
        &self,
        config: &MemoryConfig,
        state: &TimeBinState,
        bin: Bin,
    ) -> Result<f64> {
        let schedule = self.schedule(config, state)?;
        let (e, l) = self.echo_positions(&schedule, state);
        let input = encode_bin(state, self.t0, self.mean_photons, bin)?;
        let r = self.simulate(config, &schedule, &input, state)?;
        self.check_disjoint(e, l, r.dt())?;
        let target = match bin {
            Bin::Early => l,
            Bin::Late => e,
        };
        Ok(self.readout.read(&r, target)?.0)
    }

    /// Runs the three-simulation protocol.
    pub fn evaluate(&self, config: &MemoryConfig, state: &TimeBinState) -> Result<TimeBinReport> {
        let schedule = self.schedule(config, state)?;
        let (pos_e, pos_l) = self.echo_positions(&schedule, state);
        let inputs = [
            encode(state, self.t0, self.mean_photons)?,
            encode_bin(state, self.t0, self.mean_photons, Bin::Early)?,
            encode_bin(state, self.t0, self.mean_photons, Bin::Late)?,
        ];
        let runs: Vec<SimulationResult> = inputs
            .par_iter()
            .map(|input| self.simulate(config, &schedule, input, state))
            .collect::<Result<_>>()?;
        let (both, early, late) = (&runs[0], &runs[1], &runs[2]);
        self.check_disjoint(pos_e, pos_l, both.dt())?;

        let (both_e, z_e) = self.readout.read(both, pos_e)?;
        let (both_l, z_l) = self.readout.read(both, pos_l)?;
        let noise_e = self.readout.read(late, pos_e)?.0;
        let noise_l = self.readout.read(early, pos_l)?.0;
        let signal_e = both_e - noise_e;
        let signal_l = both_l - noise_l;
        if signal_e < 0.0 || signal_l < 0.0 {
            return Err(diagnostic!(
                "leakage exceeds the two-bin echo (S_e = {signal_e:e}, S_l = {signal_l:e})"
            ));
        }
        let (clean_e, ze_clean) = self.readout.read(early, pos_e)?;
        let (clean_l, zl_clean) = self.readout.read(late, pos_l)?;
        let (amp_ratio, phase_deviation) =
            output_state_metrics(both_e, z_e, both_l, z_l, state.phi)?;
        let (clean_amp_ratio, clean_phase_deviation) =
            output_state_metrics(clean_e, ze_clean, clean_l, zl_clean, state.phi)?;
        Ok(TimeBinReport {
            storage_time: pos_e - self.t0,
            signal_e,
            noise_e,
            signal_l,
            noise_l,
            fidelity_e: fidelity(signal_e, noise_e)?,
            fidelity_l: fidelity(signal_l, noise_l)?,
            amp_ratio,
            phase_deviation,
            clean_amp_ratio,
            clean_phase_deviation,
        })
    }
}

/// `(sqrt(E_l/E_e), arg z_l − arg z_e − φ)` from the echo strengths and phasors of both bins.
pub fn output_state_metrics(
    energy_e: f64,
    phasor_e: Complex64,
    energy_l: f64,
    phasor_l: Complex64,
    phi: f64,
) -> Result<(f64, f64)> {
    if !(energy_e > 0.0 && energy_l > 0.0) || phasor_e.norm() == 0.0 || phasor_l.norm() == 0.0 {
        return Err(diagnostic!("vanishing echo in one of the bins"));
    }
    Ok((
        (energy_l / energy_e).sqrt(),
        wrap_phase(phasor_l.arg() - phasor_e.arg() - phi),
    ))
}

pub fn write_timebin_csv<W: Write>(mut w: W, rows: &[(f64, TimeBinReport)]) -> io::Result<()> {
    writeln!(w, "{TIMEBIN_HEADER}")?;
    for (phi, r) in rows {
        writeln!(
            w,
            "{:e},{:e},{:e},{:e},{:e},{:e}",
            phi, r.storage_time, r.amp_ratio, r.phase_deviation, r.fidelity_e, r.fidelity_l
        )?;
    }
    Ok(())
}
