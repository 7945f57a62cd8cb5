//! Static description of the memory: resonators, couplings and the comb.
//!
//! All rates and detunings are ordinary frequencies in Hz (the `κ/2π`
//! convention); angular factors are applied inside [`crate::dynamics`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Default external coupling `κ_c/2π` (Hz), inside the measured device range.
pub const DEFAULT_KAPPA_C: f64 = 0.55e6;
/// Default internal loss `κ_i/2π` (Hz); gives a frozen-state intensity decay of 0.51 µs.
pub const DEFAULT_KAPPA_I: f64 = 0.312e6;
pub const DEFAULT_CENTER_FREQUENCY: f64 = 4.91e9;
pub const DEFAULT_RESONATORS: usize = 4;

/// Resonators side-coupled to a common waveguide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryConfig {
    pub n_resonators: usize,
    /// Carrier `ω_c/2π` in Hz. Only used for bookkeeping; the dynamics run in
    /// the frame rotating at this frequency.
    pub center_frequency: f64,
    pub kappa_c: Vec<f64>,
    pub kappa_i: Vec<f64>,
    /// Propagation phase `θ_n` of each coupling point, in radians.
    pub spacing_phase: Vec<f64>,
}

impl MemoryConfig {
    /// Uniform couplings and half-wavelength spacing.
    pub fn uniform(n: usize, kappa_c: f64, kappa_i: f64) -> Result<Self> {
        let config = Self {
            n_resonators: n,
            center_frequency: DEFAULT_CENTER_FREQUENCY,
            kappa_c: vec![kappa_c; n],
            kappa_i: vec![kappa_i; n],
            spacing_phase: half_wavelength_phases(n),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_resonators;
        if n == 0 {
            return Err(invalid!("n_resonators must be at least 1"));
        }
        for (name, list) in [
            ("kappa_c", &self.kappa_c),
            ("kappa_i", &self.kappa_i),
            ("spacing_phase", &self.spacing_phase),
        ] {
            if list.len() != n {
                return Err(invalid!(
                    "{name} has {} entries, expected n_resonators = {n}",
                    list.len()
                ));
            }
            if list.iter().any(|v| !v.is_finite()) {
                return Err(invalid!("{name} contains a non-finite value"));
            }
        }
        if let Some(k) = self.kappa_c.iter().chain(&self.kappa_i).find(|&&k| k < 0.0) {
            return Err(invalid!("coupling and loss rates must be >= 0, got {k}"));
        }
        if !(self.center_frequency.is_finite() && self.center_frequency > 0.0) {
            return Err(invalid!(
                "center_frequency must be positive, got {}",
                self.center_frequency
            ));
        }
        Ok(())
    }

    pub fn with_kappa_i(mut self, kappa_i: f64) -> Self {
        self.kappa_i = vec![kappa_i; self.n_resonators];
        self
    }

    pub fn with_kappa_c(mut self, kappa_c: f64) -> Self {
        self.kappa_c = vec![kappa_c; self.n_resonators];
        self
    }

    pub fn max_kappa_c(&self) -> f64 {
        self.kappa_c.iter().copied().fold(0.0, f64::max)
    }
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self::uniform(DEFAULT_RESONATORS, DEFAULT_KAPPA_C, DEFAULT_KAPPA_I)
            .expect("default memory configuration is valid")
    }
}

/// `θ_n = nπ`: neighbouring resonators half a wavelength apart.
pub fn half_wavelength_phases(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 * PI).collect()
}

/// Static resonator detunings forming a frequency comb around the carrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombConfig {
    /// Comb periodicity Δ in Hz.
    pub delta: f64,
    pub detunings: Vec<f64>,
}

impl CombConfig {
    pub fn len(&self) -> usize {
        self.detunings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detunings.is_empty()
    }
}

/// Symmetric comb `δ_n = (n - (N-1)/2)·Δ`.
pub fn build_comb(n: usize, delta: f64) -> Result<CombConfig> {
    if n == 0 {
        return Err(invalid!("comb needs at least one resonator"));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(invalid!("comb periodicity must be positive, got {delta}"));
    }
    let mid = (n as f64 - 1.0) / 2.0;
    let detunings = (0..n).map(|k| (k as f64 - mid) * delta).collect();
    Ok(CombConfig { delta, detunings })
}

/// Comb spacing that impedance-matches the resonators to the waveguide,
/// `Δ = (π/2)·κ_c`, both sides in Hz.
pub fn impedance_matching_delta(kappa_c: f64) -> Result<f64> {
    if !(kappa_c.is_finite() && kappa_c >= 0.0) {
        return Err(invalid!("kappa_c must be non-negative, got {kappa_c}"));
    }
    Ok(PI / 2.0 * kappa_c)
}

pub fn spectral_span(comb: &CombConfig) -> f64 {
    let (lo, hi) = comb
        .detunings
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| {
            (lo.min(d), hi.max(d))
        });
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}
