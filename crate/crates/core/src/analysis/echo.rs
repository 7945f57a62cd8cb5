use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{trapezoid, PulseTrain, SimulationResult};
use crate::error::{diagnostic, invalid, Result};
use crate::schedule::DetuningSchedule;

/// Time window attributed to echo order `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoWindow {
    pub order: usize,
    pub t_start: f64,
    pub t_end: f64,
}

impl EchoWindow {
    pub fn center(&self) -> f64 {
        0.5 * (self.t_start + self.t_end)
    }
}

/// Windows for orders `1..=m_max`.
///
/// Order `m` is centred where `m/Δ` of comb evolution has elapsed since the
/// input peak (close stages pause the clock), with half-width `1/(2Δ)`.
pub fn echo_windows(
    schedule: &DetuningSchedule,
    delta: f64,
    input_peak: f64,
    m_max: usize,
) -> Result<Vec<EchoWindow>> {
    if m_max == 0 {
        return Err(invalid!("m_max must be at least 1"));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(invalid!("comb periodicity must be positive, got {delta}"));
    }
    let half = 0.5 / delta;
    (1..=m_max)
        .map(|m| {
            let center = schedule.advance_comb_clock(input_peak, m as f64 / delta);
            let w = EchoWindow { order: m, t_start: center - half, t_end: center + half };
            if !center.is_finite() || w.t_start < 0.0 || w.t_end > schedule.end() {
                return Err(diagnostic!(
                    "echo window of order {m} ({:e}..{:e} s) lies outside the simulated range 0..{:e} s",
                    w.t_start,
                    w.t_end,
                    schedule.end()
                ));
            }
            Ok(w)
        })
        .collect()
}

/// How the phase of an echo is read out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseEstimator {
    /// Argument of the field at the sample of largest magnitude.
    #[default]
    Peak,
    /// Argument of `Σ |s|·s`, the intensity-weighted mean phasor.
    EnergyWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoMetrics {
    pub windows: Vec<EchoWindow>,
    /// Per-order photon numbers re-emitted into the transmitted direction.
    pub energies_t: Vec<f64>,
    pub energies_r: Vec<f64>,
    /// First-order storage efficiency.
    pub efficiency: f64,
    pub echo_phase: f64,
    /// Time of the largest transmitted echo sample in the first-order window.
    pub first_echo_peak: f64,
    pub input_energy: f64,
}

impl EchoMetrics {
    pub fn order_efficiency(&self, order: usize) -> Option<f64> {
        let k = self.windows.iter().position(|w| w.order == order)?;
        Some((self.energies_t[k] + self.energies_r[k]) / self.input_energy)
    }

    pub fn total_echo_energy(&self) -> f64 {
        self.energies_t.iter().chain(&self.energies_r).sum()
    }
}

fn window_slice<'a, T>(
    result: &SimulationResult,
    field: &'a [T],
    w: &EchoWindow,
) -> Result<(usize, &'a [T])> {
    let (lo, hi) = result.index_range(w.t_start, w.t_end).ok_or_else(|| {
        diagnostic!(
            "echo window {:e}..{:e} s holds no grid samples",
            w.t_start,
            w.t_end
        )
    })?;
    if w.t_end > *result.time_grid.last().unwrap() + 0.5 * result.dt() {
        return Err(diagnostic!(
            "echo window of order {} ends after the simulated range",
            w.order
        ));
    }
    Ok((lo, &field[lo..=hi]))
}

pub fn window_energy(
    result: &SimulationResult,
    field: &[Complex64],
    w: &EchoWindow,
) -> Result<f64> {
    let (_, slice) = window_slice(result, field, w)?;
    let power: Vec<f64> = slice.iter().map(|z| z.norm_sqr()).collect();
    Ok(trapezoid(&power, result.dt()))
}

/// Index of the largest `|field|` inside `w`.
pub fn window_peak(
    result: &SimulationResult,
    field: &[Complex64],
    w: &EchoWindow,
) -> Result<usize> {
    let (lo, slice) = window_slice(result, field, w)?;
    let (k, _) = slice
        .iter()
        .enumerate()
        .fold((0, -1.0), |(bk, bv), (k, z)| {
            if z.norm() > bv {
                (k, z.norm())
            } else {
                (bk, bv)
            }
        });
    Ok(lo + k)
}

pub fn window_phase(
    result: &SimulationResult,
    field: &[Complex64],
    w: &EchoWindow,
    estimator: PhaseEstimator,
) -> Result<f64> {
    match estimator {
        PhaseEstimator::Peak => Ok(field[window_peak(result, field, w)?].arg()),
        PhaseEstimator::EnergyWeighted => {
            let (_, slice) = window_slice(result, field, w)?;
            Ok(slice.iter().map(|z| z * z.norm()).sum::<Complex64>().arg())
        }
    }
}

/// First-order efficiency `(E_T + E_R)/E_in` and per-order echo energies.
///
/// The transmitted contribution is the field re-emitted by the resonators,
/// `s_T − s_in`, so that any input still arriving inside a window is not
/// counted as echo.
pub fn storage_efficiency(
    result: &SimulationResult,
    windows: &[EchoWindow],
) -> Result<EchoMetrics> {
    let dt = result.dt();
    let input_power: Vec<f64> = result.s_in.iter().map(|z| z.norm_sqr()).collect();
    let input_energy = trapezoid(&input_power, dt);
    if !(input_energy > 0.0) {
        return Err(invalid!("input carries no energy"));
    }
    let first = windows
        .iter()
        .find(|w| w.order == 1)
        .ok_or_else(|| invalid!("no first-order echo window supplied"))?;
    let forward = result.emitted_forward();
    let mut energies_t = Vec::with_capacity(windows.len());
    let mut energies_r = Vec::with_capacity(windows.len());
    for w in windows {
        energies_t.push(window_energy(result, &forward, w)?);
        energies_r.push(window_energy(result, &result.s_r, w)?);
    }
    let k1 = windows.iter().position(|w| w.order == 1).unwrap();
    let peak = window_peak(result, &forward, first)?;
    Ok(EchoMetrics {
        windows: windows.to_vec(),
        efficiency: (energies_t[k1] + energies_r[k1]) / input_energy,
        echo_phase: forward[peak].arg(),
        first_echo_peak: result.time_grid[peak],
        energies_t,
        energies_r,
        input_energy,
    })
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

/// Phase of the first echo relative to the phase of the first input pulse.
pub fn phase_difference(
    result: &SimulationResult,
    windows: &[EchoWindow],
    input: &PulseTrain,
    estimator: PhaseEstimator,
) -> Result<f64> {
    let first = windows
        .iter()
        .find(|w| w.order == 1)
        .ok_or_else(|| invalid!("no first-order echo window supplied"))?;
    let pulse = input
        .pulses
        .first()
        .ok_or_else(|| invalid!("input has no pulses"))?;
    let forward = result.emitted_forward();
    let energy = window_energy(result, &forward, first)?;
    let input_energy = trapezoid(
        &result.s_in.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>(),
        result.dt(),
    );
    if !(energy > 1e-14 * input_energy.max(f64::MIN_POSITIVE)) {
        return Err(diagnostic!(
            "first echo energy {energy:e} is below the numerical floor"
        ));
    }
    let phase = window_phase(result, &forward, first, estimator)?;
    Ok(wrap_phase(phase - pulse.phase))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_comb;
    use crate::schedule::{static_comb, write_close_read};

    #[test]
    fn window_arithmetic() {
        let comb = build_comb(4, 3.5e6).unwrap();
        let s = static_comb(&comb, 3e-6).unwrap();
        let w = echo_windows(&s, 3.5e6, 0.0, 1).unwrap();
        assert!((w[0].center() - 285.714e-9).abs() < 1e-12);
        assert!(((w[0].t_end - w[0].t_start) / 2.0 - 142.857e-9).abs() < 1e-12);

        let s6 = static_comb(&build_comb(4, 6e6).unwrap(), 1e-6).unwrap();
        let w6 = echo_windows(&s6, 6e6, 0.0, 2).unwrap();
        assert!((w6[1].center() - 333.333e-9).abs() < 1e-12);

        let c = write_close_read(&comb, 100e-9, 500e-9, 3e-6).unwrap();
        let wc = echo_windows(&c, 3.5e6, 0.0, 1).unwrap();
        assert!((wc[0].center() - 785.714e-9).abs() < 1e-12);
    }

    #[test]
    fn windows_outside_range_are_diagnosed() {
        let comb = build_comb(4, 3.5e6).unwrap();
        let s = static_comb(&comb, 0.5e-6).unwrap();
        assert!(matches!(
            echo_windows(&s, 3.5e6, 0.0, 2),
            Err(crate::Error::Diagnostic(_))
        ));
        assert!(echo_windows(&s, 3.5e6, 0.0, 0).is_err());
    }

    #[test]
    fn phase_wrapping() {
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(0.5) - 0.5).abs() < 1e-15);
        assert!((wrap_phase(-0.5 - 2.0 * PI) + 0.5).abs() < 1e-12);
    }
}
