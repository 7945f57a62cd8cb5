//! Single-pulse echo experiments assembled from a handful of protocol knobs.
//!
//! [`EchoExperiment`] places a Gaussian pulse, builds the comb and its
//! write/close/read schedule, sizes the grid to cover the requested echo
//! orders and returns the simulation together with its echo metrics. Sweeps,
//! the optimizer and the command-line tool all go through it.

use serde::{Deserialize, Serialize};

use crate::analysis::{echo_windows, storage_efficiency, window_peak, EchoMetrics, EchoWindow};
use crate::dynamics::{
    resolving_dt, simulate_with, Pulse, PulseTrain, SimulationResult, SolverSettings,
};
use crate::error::{invalid, Result};
use crate::model::{build_comb, CombConfig, MemoryConfig};
use crate::schedule::{
    close_windows_schedule, echo_suppression, DetuningSchedule, DEFAULT_CLOSE_DETUNING,
};

/// Margin added after the last echo window.
const TAIL_MARGIN: f64 = 20e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EchoExperiment {
    pub delta: f64,
    pub fwhm: f64,
    pub mean_photons: f64,
    pub phase: f64,
    /// Duration of the close stage after writing; 0 keeps a static comb.
    pub close_time: f64,
    /// Close starts this long after the input peak; defaults to `1/(2Δ)`.
    pub write_margin: Option<f64>,
    pub close_detuning: f64,
    /// Park the resonators again once the first echo window has passed.
    pub suppress_after_first: bool,
    pub orders: usize,
    /// Input peak time; defaults to six power-envelope σ after `t = 0`.
    pub input_peak: Option<f64>,
    /// Time step; defaults to the largest step resolving the run (≤ 0.5 ns).
    pub dt: Option<f64>,
    pub ramp: f64,
}

impl Default for EchoExperiment {
    fn default() -> Self {
        Self {
            delta: 3.5e6,
            fwhm: 97e-9,
            mean_photons: 1.0,
            phase: 0.0,
            close_time: 0.0,
            write_margin: None,
            close_detuning: DEFAULT_CLOSE_DETUNING,
            suppress_after_first: false,
            orders: 3,
            input_peak: None,
            dt: None,
            ramp: 0.0,
        }
    }
}

/// Output of [`EchoExperiment::run`].
#[derive(Debug, Clone)]
pub struct EchoRun {
    pub schedule: DetuningSchedule,
    pub input: PulseTrain,
    pub windows: Vec<EchoWindow>,
    pub result: SimulationResult,
    pub metrics: EchoMetrics,
}

impl EchoExperiment {
    pub fn new(delta: f64, fwhm: f64) -> Self {
        Self {
            delta,
            fwhm,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(invalid!("delta must be positive, got {}", self.delta));
        }
        if !(self.fwhm.is_finite() && self.fwhm > 0.0) {
            return Err(invalid!("fwhm must be positive, got {}", self.fwhm));
        }
        if !(self.close_time.is_finite() && self.close_time >= 0.0) {
            return Err(invalid!(
                "close time must be non-negative, got {}",
                self.close_time
            ));
        }
        if self.orders == 0 {
            return Err(invalid!("at least one echo order must be analysed"));
        }
        if let Some(m) = self.write_margin {
            if !(m.is_finite() && m > 0.0) {
                return Err(invalid!("write margin must be positive, got {m}"));
            }
        }
        Ok(())
    }

    pub fn input_peak(&self) -> f64 {
        self.input_peak.unwrap_or_else(|| 6.0 * self.pulse_sigma())
    }

    fn pulse_sigma(&self) -> f64 {
        Pulse::gaussian(0.0, self.fwhm, 1.0, 0.0).sigma()
    }

    pub fn pulse(&self) -> Pulse {
        Pulse::gaussian(self.input_peak(), self.fwhm, self.mean_photons, self.phase)
    }

    pub fn input(&self) -> PulseTrain {
        PulseTrain::single(self.pulse())
    }

    pub fn comb(&self, config: &MemoryConfig) -> Result<CombConfig> {
        build_comb(config.n_resonators, self.delta)
    }

    pub fn write_end(&self) -> f64 {
        self.input_peak() + self.write_margin.unwrap_or(0.5 / self.delta)
    }

    /// End of the run: the last analysed echo window plus a short margin.
    pub fn t_end(&self) -> f64 {
        self.input_peak() + (self.orders as f64 + 0.5) / self.delta + self.close_time + TAIL_MARGIN
    }

    pub fn schedule(&self, config: &MemoryConfig) -> Result<DetuningSchedule> {
        self.validate()?;
        let comb = self.comb(config)?;
        let t_end = self.t_end();
        let windows = if self.close_time > 0.0 {
            vec![(self.write_end(), self.write_end() + self.close_time)]
        } else {
            Vec::new()
        };
        let base = close_windows_schedule(
            &comb,
            self.write_end(),
            &windows,
            t_end,
            self.close_detuning,
        )?;
        if self.suppress_after_first {
            let first = echo_windows(&base, self.delta, self.input_peak(), 1)?;
            echo_suppression(&base, first[0].t_end)
        } else {
            Ok(base)
        }
    }

    pub fn solver_settings(
        &self,
        config: &MemoryConfig,
        schedule: &DetuningSchedule,
    ) -> SolverSettings {
        let dt = self
            .dt
            .unwrap_or_else(|| resolving_dt(config, schedule, &self.input()));
        SolverSettings {
            dt,
            ramp: self.ramp,
            ..SolverSettings::default()
        }
    }

    /// Number of solver steps [`run`](Self::run) would take.
    pub fn run_length_steps(&self, config: &MemoryConfig) -> Result<f64> {
        let schedule = self.schedule(config)?;
        Ok(self.t_end() / self.solver_settings(config, &schedule).dt)
    }

    pub fn run(&self, config: &MemoryConfig) -> Result<EchoRun> {
        let schedule = self.schedule(config)?;
        let input = self.input();
        let settings = self.solver_settings(config, &schedule);
        // windows come from the unsuppressed protocol so later orders keep their slots
        let timing = if self.suppress_after_first {
            Self {
                suppress_after_first: false,
                ..self.clone()
            }
            .schedule(config)?
        } else {
            schedule.clone()
        };
        let windows = echo_windows(&timing, self.delta, self.input_peak(), self.orders)?;
        let result = simulate_with(config, &schedule, &input, self.t_end(), &settings)?;
        let metrics = storage_efficiency(&result, &windows)?;
        Ok(EchoRun {
            schedule,
            input,
            windows,
            result,
            metrics,
        })
    }

    /// First-order storage efficiency.
    pub fn efficiency(&self, config: &MemoryConfig) -> Result<f64> {
        Ok(self.run(config)?.metrics.efficiency)
    }
}

/// Two pulses stored together and released by separate close stages.
///
/// Writing ends halfway between the second input and the first echo; the
/// first close freezes both modes, the second starts halfway between the two
/// expected echoes and holds only the second mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MultimodeExperiment {
    pub delta: f64,
    pub fwhm: f64,
    pub separation: f64,
    pub mean_photons: f64,
    pub first_close: f64,
    pub second_close: f64,
    pub dt: Option<f64>,
}

impl Default for MultimodeExperiment {
    fn default() -> Self {
        Self {
            delta: 3.5e6,
            fwhm: 50e-9,
            separation: 150e-9,
            mean_photons: 1.0,
            first_close: 0.0,
            second_close: 0.0,
            dt: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultimodeRun {
    pub schedule: DetuningSchedule,
    pub input: PulseTrain,
    pub result: SimulationResult,
    /// Predicted echo times of the two modes.
    pub expected: [f64; 2],
    /// Largest-|s_T − s_in| sample within half a separation of each
    /// prediction, in the two-pulse run.
    pub combined_peaks: [f64; 2],
    /// Same, each mode simulated on its own.
    pub mode_peaks: [f64; 2],
}

impl MultimodeExperiment {
    pub fn input_peaks(&self) -> [f64; 2] {
        let t1 = 6.0 * Pulse::gaussian(0.0, self.fwhm, 1.0, 0.0).sigma();
        [t1, t1 + self.separation]
    }

    pub fn input(&self) -> PulseTrain {
        let p = |t| Pulse::gaussian(t, self.fwhm, self.mean_photons, 0.0);
        let [t1, t2] = self.input_peaks();
        PulseTrain {
            pulses: vec![p(t1), p(t2)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.fwhm > 0.0 && self.separation > self.fwhm) {
            return Err(invalid!("need delta > 0 and separation > fwhm > 0"));
        }
        if 1.0 / self.delta <= self.separation {
            return Err(invalid!(
                "separation must be shorter than the echo delay 1/delta"
            ));
        }
        if !(self.first_close >= 0.0 && self.second_close >= 0.0) {
            return Err(invalid!("close times must be non-negative"));
        }
        Ok(())
    }

    pub fn write_end(&self) -> f64 {
        self.input_peaks()[1] + 0.5 * (1.0 / self.delta - self.separation)
    }

    pub fn close_windows(&self) -> Vec<(f64, f64)> {
        let c1 = (self.write_end(), self.write_end() + self.first_close);
        let start = c1.1 + 0.5 / self.delta;
        let mut windows = Vec::new();
        if self.first_close > 0.0 {
            windows.push(c1);
        }
        if self.second_close > 0.0 {
            windows.push((start, start + self.second_close));
        }
        windows
    }

    pub fn t_end(&self) -> f64 {
        self.input_peaks()[1]
            + 1.5 / self.delta
            + self.first_close
            + self.second_close
            + TAIL_MARGIN
    }

    pub fn schedule(&self, config: &MemoryConfig) -> Result<DetuningSchedule> {
        self.validate()?;
        let comb = build_comb(config.n_resonators, self.delta)?;
        close_windows_schedule(
            &comb,
            self.write_end(),
            &self.close_windows(),
            self.t_end(),
            DEFAULT_CLOSE_DETUNING,
        )
    }

    pub fn run(&self, config: &MemoryConfig) -> Result<MultimodeRun> {
        let schedule = self.schedule(config)?;
        let input = self.input();
        let dt = self
            .dt
            .unwrap_or_else(|| resolving_dt(config, &schedule, &input));
        let result = simulate_with(
            config,
            &schedule,
            &input,
            self.t_end(),
            &SolverSettings::with_dt(dt),
        )?;
        let [t1, t2] = self.input_peaks();
        let expected = [
            schedule.advance_comb_clock(t1, 1.0 / self.delta),
            schedule.advance_comb_clock(t2, 1.0 / self.delta),
        ];
        let h = 0.5 * self.separation;
        let peak = |r: &SimulationResult, e: f64| -> Result<f64> {
            let w = EchoWindow {
                order: 1,
                t_start: e - h,
                t_end: e + h,
            };
            Ok(r.time_grid[window_peak(r, &r.emitted_forward(), &w)?])
        };
        let single = |k: usize| {
            let train = PulseTrain::single(input.pulses[k].clone());
            simulate_with(
                config,
                &schedule,
                &train,
                self.t_end(),
                &SolverSettings::with_dt(dt),
            )
        };
        let (first, second) = rayon::join(|| single(0), || single(1));
        let combined_peaks = [peak(&result, expected[0])?, peak(&result, expected[1])?];
        let mode_peaks = [peak(&first?, expected[0])?, peak(&second?, expected[1])?];
        Ok(MultimodeRun {
            schedule,
            input,
            result,
            expected,
            combined_peaks,
            mode_peaks,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_place_pulse_and_windows_inside_run() {
        let cfg = MemoryConfig::default();
        let exp = EchoExperiment::default();
        let run = exp.run(&cfg).unwrap();
        assert_eq!(run.windows.len(), 3);
        assert!(run.windows[2].t_end <= exp.t_end());
        assert!(run.metrics.efficiency > 0.0 && run.metrics.efficiency < 1.0);
        assert!(
            run.input.amplitude(0.0).norm_sqr()
                < 1e-7 * run.input.amplitude(exp.input_peak()).norm_sqr()
        );
    }

    #[test]
    fn close_stage_shifts_the_run() {
        let exp = EchoExperiment {
            close_time: 300e-9,
            ..EchoExperiment::default()
        };
        let cfg = MemoryConfig::default();
        let s = exp.schedule(&cfg).unwrap();
        assert_eq!(s.segments().len(), 3);
        assert!((s.close_time_before(s.end()) - 300e-9).abs() < 1e-15);
    }

    #[test]
    fn multimode_static_comb_keeps_spacing() {
        let cfg = MemoryConfig::default();
        let r = MultimodeExperiment::default().run(&cfg).unwrap();
        let dt = r.result.dt();
        assert!((r.mode_peaks[1] - r.mode_peaks[0] - 150e-9).abs() <= dt);
        assert!(r.schedule.segments().len() == 1);
    }

    #[test]
    fn invalid_knobs_are_rejected() {
        let cfg = MemoryConfig::default();
        assert!(EchoExperiment {
            delta: 0.0,
            ..EchoExperiment::default()
        }
        .run(&cfg)
        .is_err());
        assert!(EchoExperiment {
            close_time: -1.0,
            ..EchoExperiment::default()
        }
        .run(&cfg)
        .is_err());
        assert!(EchoExperiment {
            orders: 0,
            ..EchoExperiment::default()
        }
        .run(&cfg)
        .is_err());
    }
}
