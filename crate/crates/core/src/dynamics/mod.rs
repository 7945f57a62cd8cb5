//! Coupled-mode dynamics of resonators sharing a waveguide.
//!
//! Mean-field amplitudes `a_n` obey `da/dt = M(t)·a + b·s_in(t)` in the frame
//! rotating at the carrier, with
//!
//! ```text
//! M_nn = -i·2π·δ_n - π(κc_n + κi_n)
//! M_nm = -π·sqrt(κc_n·κc_m)·exp(i·|θ_n - θ_m|)      (n ≠ m)
//! b_n  = -sqrt(π·κc_n)·exp(+i·θ_n)
//! s_T  = s_in + Σ sqrt(π·κc_n)·exp(-i·θ_n)·a_n
//! s_R  =        Σ sqrt(π·κc_n)·exp(+i·θ_n)·a_n
//! ```
//!
//! Rates are in Hz (`κ/2π`). For half-wavelength spacing the phase factors
//! reduce to `(-1)^(n-m)`.

mod pulse;
mod spectrum;

pub use pulse::{Pulse, PulseTrain};
pub use spectrum::{spectrum_via_fft_crosscheck, transmission_spectrum, FourierCheck};

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, invalid, Result};
use crate::model::MemoryConfig;
use crate::schedule::DetuningSchedule;

pub const DEFAULT_DT: f64 = 0.5e-9;
/// Minimum number of grid points per period of the fastest scale in a run.
pub const SAMPLES_PER_FASTEST_PERIOD: f64 = 50.0;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Port the input pulse enters from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Port {
    #[default]
    Left,
    Right,
}

/// Coupling vectors between the resonators and the two waveguide directions.
#[derive(Debug, Clone)]
pub struct Couplings {
    /// Drive of each resonator by the input field.
    pub input: DVector<Complex64>,
    /// Emission into the co-propagating (transmitted) direction.
    pub forward: DVector<Complex64>,
    /// Emission back towards the input (reflected) direction.
    pub backward: DVector<Complex64>,
}

impl Couplings {
    pub fn new(config: &MemoryConfig, port: Port) -> Self {
        let n = config.n_resonators;
        let sign = match port {
            Port::Left => 1.0,
            Port::Right => -1.0,
        };
        let amp = |k: usize| (PI * config.kappa_c[k]).sqrt();
        let phase =
            |k: usize, s: f64| Complex64::from_polar(1.0, s * sign * config.spacing_phase[k]);
        Self {
            input: DVector::from_fn(n, |k, _| -amp(k) * phase(k, 1.0)),
            forward: DVector::from_fn(n, |k, _| amp(k) * phase(k, -1.0)),
            backward: DVector::from_fn(n, |k, _| amp(k) * phase(k, 1.0)),
        }
    }
}

/// Generator `M` for the given instantaneous detunings (Hz).
pub fn assemble_generator(config: &MemoryConfig, detunings: &[f64]) -> Result<DMatrix<Complex64>> {
    config.validate()?;
    let n = config.n_resonators;
    if detunings.len() != n {
        return Err(invalid!(
            "got {} detunings for {n} resonators",
            detunings.len()
        ));
    }
    let m = DMatrix::from_fn(n, n, |r, c| {
        if r == c {
            Complex64::new(
                -PI * (config.kappa_c[r] + config.kappa_i[r]),
                -2.0 * PI * detunings[r],
            )
        } else {
            let g = PI * (config.kappa_c[r] * config.kappa_c[c]).sqrt();
            let dphi = (config.spacing_phase[r] - config.spacing_phase[c]).abs();
            -g * Complex64::from_polar(1.0, dphi)
        }
    });
    Ok(m)
}

/// Integrator controls beyond the time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub dt: f64,
    /// Duration of a linear detuning ramp at each segment boundary (0 = instantaneous).
    #[serde(default)]
    pub ramp: f64,
    #[serde(default)]
    pub port: Port,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            ramp: 0.0,
            port: Port::Left,
        }
    }
}

impl SolverSettings {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }
}

/// Fields and amplitudes on the uniform grid `t_k = k·dt`.
#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub time_grid: Vec<f64>,
    /// `N × T` resonator amplitudes.
    pub a: DMatrix<Complex64>,
    pub s_in: Vec<Complex64>,
    pub s_t: Vec<Complex64>,
    pub s_r: Vec<Complex64>,
    /// Instantaneous photon flux into internal loss, `Σ 2π·κi_n·|a_n|²`.
    pub loss_power: Vec<f64>,
}

/// Photon-number bookkeeping of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBalance {
    pub input: f64,
    pub transmitted: f64,
    pub reflected: f64,
    pub lost: f64,
    pub stored: f64,
}

impl EnergyBalance {
    /// `(input - outputs - loss - stored) / input`.
    pub fn relative_residual(&self) -> f64 {
        let out = self.transmitted + self.reflected + self.lost + self.stored;
        (self.input - out) / self.input
    }
}

impl SimulationResult {
    pub fn dt(&self) -> f64 {
        self.time_grid.get(1).map_or(0.0, |t| t - self.time_grid[0])
    }

    pub fn len(&self) -> usize {
        self.time_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_grid.is_empty()
    }

    /// Field radiated by the resonators into the transmitted direction, `s_T - s_in`.
    pub fn emitted_forward(&self) -> Vec<Complex64> {
        self.s_t
            .iter()
            .zip(&self.s_in)
            .map(|(t, i)| t - i)
            .collect()
    }

    /// Index range `[lo, hi]` of grid points inside `[t_start, t_end]`.
    pub fn index_range(&self, t_start: f64, t_end: f64) -> Option<(usize, usize)> {
        let dt = self.dt();
        let last = self.len().checked_sub(1)?;
        let lo = ((t_start / dt).ceil().max(0.0)) as usize;
        let hi = ((t_end / dt).floor().min(last as f64)) as usize;
        (lo <= hi && lo <= last).then_some((lo, hi))
    }

    pub fn stored_photons(&self, k: usize) -> f64 {
        self.a.column(k).iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn energy_balance(&self) -> EnergyBalance {
        let dt = self.dt();
        let n = self.len();
        let sq = |f: &[Complex64]| f.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>();
        EnergyBalance {
            input: trapezoid(&sq(&self.s_in), dt),
            transmitted: trapezoid(&sq(&self.s_t), dt),
            reflected: trapezoid(&sq(&self.s_r), dt),
            lost: trapezoid(&self.loss_power, dt),
            stored: if n > 0 {
                self.stored_photons(n - 1)
            } else {
                0.0
            },
        }
    }
}

/// Composite trapezoid rule over uniformly spaced samples.
pub fn trapezoid(samples: &[f64], dt: f64) -> f64 {
    match samples {
        [] | [_] => 0.0,
        [first, inner @ .., last] => dt * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

/// Fastest frequency scale (Hz) the grid must resolve for this run.
pub fn fastest_scale(
    config: &MemoryConfig,
    schedule: &DetuningSchedule,
    input: &PulseTrain,
) -> f64 {
    let detuning = schedule
        .segments()
        .iter()
        .flat_map(|s| s.detunings.iter())
        .fold(0.0f64, |m, d| m.max(d.abs()));
    let carrier = input
        .pulses
        .iter()
        .fold(0.0f64, |m, p| m.max(p.carrier_detuning.abs()));
    let bandwidth = input.min_fwhm().map_or(0.0, |w| 1.0 / w);
    detuning
        .max(config.max_kappa_c())
        .max(bandwidth)
        .max(carrier)
}

/// Largest step satisfying the resolution requirement, capped at `DEFAULT_DT`.
pub fn resolving_dt(config: &MemoryConfig, schedule: &DetuningSchedule, input: &PulseTrain) -> f64 {
    let fastest = fastest_scale(config, schedule, input);
    if fastest > 0.0 {
        DEFAULT_DT.min(1.0 / (SAMPLES_PER_FASTEST_PERIOD * fastest))
    } else {
        DEFAULT_DT
    }
}

pub fn simulate(
    config: &MemoryConfig,
    schedule: &DetuningSchedule,
    input: &PulseTrain,
    t_end: f64,
    dt: f64,
) -> Result<SimulationResult> {
    simulate_with(config, schedule, input, t_end, &SolverSettings::with_dt(dt))
}

/// Fixed-step RK4 over the uniform grid. Segment boundaries are snapped to
/// the grid so the generator is constant inside every step unless a ramp is
/// requested.
pub fn simulate_with(
    config: &MemoryConfig,
    schedule: &DetuningSchedule,
    input: &PulseTrain,
    t_end: f64,
    settings: &SolverSettings,
) -> Result<SimulationResult> {
    config.validate()?;
    input.validate()?;
    schedule.validate()?;
    let dt = settings.dt;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid!("dt must be positive, got {dt}"));
    }
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(invalid!("t_end must be positive, got {t_end}"));
    }
    if !(settings.ramp.is_finite() && settings.ramp >= 0.0) {
        return Err(invalid!(
            "ramp duration must be non-negative, got {}",
            settings.ramp
        ));
    }
    if schedule.n_resonators() != config.n_resonators {
        return Err(config_err!(
            "schedule drives {} resonators, memory has {}",
            schedule.n_resonators(),
            config.n_resonators
        ));
    }
    let fastest = fastest_scale(config, schedule, input);
    let max_dt = 1.0 / (SAMPLES_PER_FASTEST_PERIOD * fastest);
    if fastest > 0.0 && dt > max_dt * (1.0 + 1e-9) {
        return Err(config_err!(
            "dt = {dt:e} s does not resolve the fastest scale {fastest:e} Hz; need dt <= {max_dt:e} s"
        ));
    }
    let steps = (t_end / dt).round() as usize;
    if steps == 0 {
        return Err(invalid!("t_end = {t_end} is shorter than one step"));
    }
    let grid_end = steps as f64 * dt;
    if schedule.end() < grid_end - 0.5 * dt {
        return Err(config_err!(
            "schedule ends at {} but the run extends to {grid_end}",
            schedule.end()
        ));
    }
    let schedule = schedule.snapped(dt)?;
    let segments = schedule.segments();
    let generators = segments
        .iter()
        .map(|s| assemble_generator(config, &s.detunings))
        .collect::<Result<Vec<_>>>()?;

    let n = config.n_resonators;
    let couplings = Couplings::new(config, settings.port);
    let mut a = DMatrix::<Complex64>::zeros(n, steps + 1);
    let mut state = DVector::<Complex64>::zeros(n);
    let time_grid: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();

    let ramped = |t: f64, seg: usize| -> Option<DMatrix<Complex64>> {
        if settings.ramp <= 0.0 || seg == 0 {
            return None;
        }
        let s = &segments[seg];
        let x = (t - s.t_start) / settings.ramp;
        if !(0.0..1.0).contains(&x) {
            return None;
        }
        let prev = &segments[seg - 1].detunings;
        let d: Vec<f64> = prev
            .iter()
            .zip(&s.detunings)
            .map(|(p, q)| p + (q - p) * x)
            .collect();
        assemble_generator(config, &d).ok()
    };

    let mut seg = 0;
    for k in 0..steps {
        let t = time_grid[k];
        let mid = t + 0.5 * dt;
        while seg + 1 < segments.len() && mid >= segments[seg].t_end {
            seg += 1;
        }
        let u0 = input.amplitude(t);
        let u1 = input.amplitude(mid);
        let u2 = input.amplitude(t + dt);
        let rhs = |m: &DMatrix<Complex64>,
                   y: &DVector<Complex64>,
                   u: Complex64|
         -> DVector<Complex64> { m * y + &couplings.input * u };
        let m_const = &generators[seg];
        let (m0, m1, m2) = if settings.ramp > 0.0 {
            (ramped(t, seg), ramped(mid, seg), ramped(t + dt, seg))
        } else {
            (None, None, None)
        };
        let m0 = m0.as_ref().unwrap_or(m_const);
        let m1 = m1.as_ref().unwrap_or(m_const);
        let m2 = m2.as_ref().unwrap_or(m_const);
        let k1 = rhs(m0, &state, u0);
        let k2 = rhs(m1, &(&state + &k1 * Complex64::from(0.5 * dt)), u1);
        let k3 = rhs(m1, &(&state + &k2 * Complex64::from(0.5 * dt)), u1);
        let k4 = rhs(m2, &(&state + &k3 * Complex64::from(dt)), u2);
        state += (k1 + k2 * Complex64::from(2.0) + k3 * Complex64::from(2.0) + k4)
            * Complex64::from(dt / 6.0);
        a.set_column(k + 1, &state);
    }

    let s_in: Vec<Complex64> = time_grid.iter().map(|&t| input.amplitude(t)).collect();
    let mut s_t = Vec::with_capacity(steps + 1);
    let mut s_r = Vec::with_capacity(steps + 1);
    let mut loss_power = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let col = a.column(k);
        s_t.push(s_in[k] + couplings.forward.dot(&col));
        s_r.push(couplings.backward.dot(&col));
        loss_power.push(
            col.iter()
                .zip(&config.kappa_i)
                .map(|(z, ki)| 2.0 * PI * ki * z.norm_sqr())
                .sum(),
        );
    }
    Ok(SimulationResult {
        time_grid,
        a,
        s_in,
        s_t,
        s_r,
        loss_power,
    })
}

/// Phase factor `exp(i·x)`.
pub(crate) fn cis(x: f64) -> Complex64 {
    (I * x).exp()
}
