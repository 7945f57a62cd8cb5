//! TOML run configuration with unit-suffixed keys.
//!
//! Every section and key is optional. Missing keys take the defaults below;
//! keys whose value depends on others (`dt_s`, `peak_s`, ranges in units of
//! the comb period) stay absent and are derived per run.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::Path;

use combmem::experiment::{EchoExperiment, MultimodeExperiment};
use combmem::model::{
    build_comb, impedance_matching_delta, MemoryConfig, DEFAULT_CENTER_FREQUENCY, DEFAULT_KAPPA_C,
    DEFAULT_KAPPA_I, DEFAULT_RESONATORS,
};
use combmem::timebin::{BinReadout, TimeBinProtocol};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// A rate given once for every resonator or per resonator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerResonator {
    Uniform(f64),
    List(Vec<f64>),
}

impl PerResonator {
    fn expand(&self, n: usize) -> Vec<f64> {
        match self {
            PerResonator::Uniform(v) => vec![*v; n],
            PerResonator::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemorySection {
    pub n_resonators: usize,
    pub center_frequency_hz: f64,
    pub kappa_c_hz: PerResonator,
    pub kappa_i_hz: PerResonator,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing_phase_rad: Option<Vec<f64>>,
}

impl Default for MemorySection {
    fn default() -> Self {
        Self {
            n_resonators: DEFAULT_RESONATORS,
            center_frequency_hz: DEFAULT_CENTER_FREQUENCY,
            kappa_c_hz: PerResonator::Uniform(DEFAULT_KAPPA_C),
            kappa_i_hz: PerResonator::Uniform(DEFAULT_KAPPA_I),
            spacing_phase_rad: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CombSection {
    pub delta_hz: f64,
}

impl Default for CombSection {
    fn default() -> Self {
        Self { delta_hz: 3.5e6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    /// Write stage ends this long after the input peak; default half a comb period.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub write_margin_s: Option<f64>,
    pub close_time_s: f64,
    pub close_detuning_hz: f64,
    pub suppress_after_first: bool,
    pub orders: usize,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        let e = EchoExperiment::default();
        Self {
            write_margin_s: None,
            close_time_s: e.close_time,
            close_detuning_hz: e.close_detuning,
            suppress_after_first: e.suppress_after_first,
            orders: e.orders,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseSection {
    pub fwhm_s: f64,
    pub mean_photons: f64,
    pub phase_rad: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peak_s: Option<f64>,
}

impl Default for PulseSection {
    fn default() -> Self {
        let e = EchoExperiment::default();
        Self {
            fwhm_s: e.fwhm,
            mean_photons: e.mean_photons,
            phase_rad: e.phase,
            peak_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_s: Option<f64>,
    pub ramp_s: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            dt_s: None,
            ramp_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_min_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_max_hz: Option<f64>,
    pub points: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            f_min_hz: None,
            f_max_hz: None,
            points: 2001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// FWHM range in units of the comb period `1/Δ`.
    pub fwhm_min_periods: f64,
    pub fwhm_max_periods: f64,
    pub fwhm_points: usize,
    pub delta_values_hz: Vec<f64>,
    pub plateau_fraction: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            fwhm_min_periods: 0.05,
            fwhm_max_periods: 0.6,
            fwhm_points: 28,
            delta_values_hz: vec![3.5e6, 6e6, 9e6, 12e6, 15e6, 18e6],
            plateau_fraction: combmem::analysis::DEFAULT_PLATEAU_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OnDemandSection {
    pub close_times_s: Vec<f64>,
}

impl Default for OnDemandSection {
    fn default() -> Self {
        Self {
            close_times_s: (0..=16).map(|k| k as f64 * 100e-9).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultimodeSection {
    pub fwhm_s: f64,
    pub separation_s: f64,
    pub first_close_s: f64,
    pub second_close_s: Vec<f64>,
}

impl Default for MultimodeSection {
    fn default() -> Self {
        Self {
            fwhm_s: 50e-9,
            separation_s: 150e-9,
            first_close_s: 455e-9,
            second_close_s: (0..5).map(|k| 510e-9 + k as f64 * 110e-9).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeBinSection {
    pub a_e: f64,
    pub fwhm_s: f64,
    pub separation_s: f64,
    pub phases_rad: Vec<f64>,
    pub close_times_s: Vec<f64>,
    /// Window readout instead of the echo-peak intensity.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_half_width_s: Option<f64>,
}

impl Default for TimeBinSection {
    fn default() -> Self {
        Self {
            a_e: FRAC_1_SQRT_2,
            fwhm_s: 50e-9,
            separation_s: 150e-9,
            phases_rad: (0..8).map(|k| k as f64 * PI / 4.0).collect(),
            close_times_s: vec![0.0],
            window_half_width_s: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizeTarget {
    Delta,
    Fwhm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeSection {
    pub target: OptimizeTarget,
    /// Defaults to 0.4 and 2.5 times the matching spacing `πκc/2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_min_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_max_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_tol_hz: Option<f64>,
    pub fwhm_min_s: f64,
    pub fwhm_max_s: f64,
    pub fwhm_rel_tol: f64,
    pub plateau_fraction: f64,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        Self {
            target: OptimizeTarget::Delta,
            delta_min_hz: None,
            delta_max_hz: None,
            delta_tol_hz: None,
            fwhm_min_s: 20e-9,
            fwhm_max_s: 600e-9,
            fwhm_rel_tol: 0.01,
            plateau_fraction: combmem::analysis::DEFAULT_PLATEAU_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderSection {
    pub intermediate_frequency_hz: f64,
}

impl Default for RenderSection {
    fn default() -> Self {
        Self {
            intermediate_frequency_hz: 80e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub memory: MemorySection,
    pub comb: CombSection,
    pub schedule: ScheduleSection,
    pub pulses: PulseSection,
    pub solver: SolverSection,
    pub spectrum: SpectrumSection,
    pub sweep: SweepSection,
    pub ondemand: OnDemandSection,
    pub multimode: MultimodeSection,
    pub timebin: TimeBinSection,
    pub optimize: OptimizeSection,
    pub render: RenderSection,
}

/// Parsed configuration plus the dotted keys that were filled by defaults.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub defaulted: Vec<String>,
    pub source: Vec<u8>,
}

pub fn parse_config(path: &Path) -> Result<LoadedConfig, CliError> {
    let source =
        std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(source.clone())
        .map_err(|_| CliError::Parse(format!("{}: not valid UTF-8", path.display())))?;
    let loaded = parse_str(&text).map_err(|e| match e {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })?;
    Ok(LoadedConfig { source, ..loaded })
}

pub fn parse_str(text: &str) -> Result<LoadedConfig, CliError> {
    let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    let given: toml::Table = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    let full = toml::Table::try_from(&config).map_err(|e| CliError::Parse(e.to_string()))?;
    let mut defaulted = Vec::new();
    missing_keys(&full, &given, "", &mut defaulted);
    config.validate()?;
    Ok(LoadedConfig {
        config,
        defaulted,
        source: text.as_bytes().to_vec(),
    })
}

fn missing_keys(full: &toml::Table, given: &toml::Table, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in full {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match (v, given.get(k)) {
            (toml::Value::Table(f), Some(toml::Value::Table(g))) => missing_keys(f, g, &path, out),
            (toml::Value::Table(f), None) => missing_keys(f, &toml::Table::new(), &path, out),
            (_, None) => out.push(path),
            _ => {}
        }
    }
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    pub fn memory(&self) -> Result<MemoryConfig, CliError> {
        let m = &self.memory;
        let n = m.n_resonators;
        let mut cfg = MemoryConfig::uniform(n.max(1), DEFAULT_KAPPA_C, DEFAULT_KAPPA_I)?;
        cfg.n_resonators = n;
        cfg.center_frequency = m.center_frequency_hz;
        cfg.kappa_c = m.kappa_c_hz.expand(n);
        cfg.kappa_i = m.kappa_i_hz.expand(n);
        if let Some(p) = &m.spacing_phase_rad {
            cfg.spacing_phase = p.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn experiment(&self) -> EchoExperiment {
        EchoExperiment {
            delta: self.comb.delta_hz,
            fwhm: self.pulses.fwhm_s,
            mean_photons: self.pulses.mean_photons,
            phase: self.pulses.phase_rad,
            close_time: self.schedule.close_time_s,
            write_margin: self.schedule.write_margin_s,
            close_detuning: self.schedule.close_detuning_hz,
            suppress_after_first: self.schedule.suppress_after_first,
            orders: self.schedule.orders,
            input_peak: self.pulses.peak_s,
            dt: self.solver.dt_s,
            ramp: self.solver.ramp_s,
        }
    }

    pub fn multimode(&self, second_close: f64) -> MultimodeExperiment {
        MultimodeExperiment {
            delta: self.comb.delta_hz,
            fwhm: self.multimode.fwhm_s,
            separation: self.multimode.separation_s,
            mean_photons: self.pulses.mean_photons,
            first_close: self.multimode.first_close_s,
            second_close,
            dt: self.solver.dt_s,
        }
    }

    pub fn timebin(&self, close_time: f64) -> TimeBinProtocol {
        TimeBinProtocol {
            delta: self.comb.delta_hz,
            mean_photons: self.pulses.mean_photons,
            close_time,
            readout: match self.timebin.window_half_width_s {
                Some(half_width) => BinReadout::WindowEnergy { half_width },
                None => BinReadout::PeakIntensity,
            },
            dt: self.solver.dt_s,
            ..TimeBinProtocol::default()
        }
    }

    /// Delta search range and tolerance, defaulting around the matching spacing.
    pub fn delta_range(&self) -> Result<(f64, f64, f64), CliError> {
        let kc = self.memory()?.max_kappa_c();
        let matched = if kc > 0.0 {
            impedance_matching_delta(kc)?
        } else {
            self.comb.delta_hz
        };
        let o = &self.optimize;
        Ok((
            o.delta_min_hz.unwrap_or(0.4 * matched),
            o.delta_max_hz.unwrap_or(2.5 * matched),
            o.delta_tol_hz.unwrap_or(0.005 * matched),
        ))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let memory = self.memory()?;
        self.experiment().validate()?;
        build_comb(memory.n_resonators, self.comb.delta_hz)?;
        self.experiment().pulse().validate()?;
        let invalid = |m: String| Err(CliError::Core(combmem::Error::InvalidArgument(m)));
        if let Some(dt) = self.solver.dt_s {
            if !(dt > 0.0 && dt.is_finite()) {
                return invalid(format!("solver.dt_s must be positive, got {dt}"));
            }
        }
        if !(self.solver.ramp_s >= 0.0) {
            return invalid("solver.ramp_s must be non-negative".into());
        }
        if self.spectrum.points < 2 || self.sweep.fwhm_points < 2 {
            return invalid("spectrum.points and sweep.fwhm_points need at least 2".into());
        }
        if !(self.sweep.fwhm_min_periods > 0.0
            && self.sweep.fwhm_max_periods > self.sweep.fwhm_min_periods)
        {
            return invalid(
                "sweep FWHM range must satisfy 0 < fwhm_min_periods < fwhm_max_periods".into(),
            );
        }
        if self.sweep.delta_values_hz.iter().any(|d| !(*d > 0.0)) {
            return invalid("sweep.delta_values_hz must be positive".into());
        }
        if self
            .ondemand
            .close_times_s
            .iter()
            .chain(&self.multimode.second_close_s)
            .chain(&self.timebin.close_times_s)
            .any(|t| !(*t >= 0.0))
        {
            return invalid("close times must be non-negative".into());
        }
        if !(self.render.intermediate_frequency_hz >= 0.0) {
            return invalid("render.intermediate_frequency_hz must be non-negative".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let l = parse_str("").unwrap();
        assert_eq!(l.config, RunConfig::default());
        assert!(l.defaulted.contains(&"memory.kappa_c_hz".to_string()));
        assert!(l.defaulted.contains(&"comb.delta_hz".to_string()));
    }

    #[test]
    fn given_keys_are_not_reported_as_defaulted() {
        let l = parse_str("[comb]\ndelta_hz = 6e6\n").unwrap();
        assert!(!l.defaulted.contains(&"comb.delta_hz".to_string()));
        assert_eq!(l.config.comb.delta_hz, 6e6);
    }

    #[test]
    fn per_resonator_lists() {
        let l = parse_str("[memory]\nn_resonators = 2\nkappa_c_hz = [0.5e6, 0.6e6]\n").unwrap();
        let m = l.config.memory().unwrap();
        assert_eq!(m.kappa_c, vec![0.5e6, 0.6e6]);
        assert_eq!(m.kappa_i, vec![DEFAULT_KAPPA_I; 2]);
        assert!(parse_str("[memory]\nn_resonators = 3\nkappa_c_hz = [0.5e6, 0.6e6]\n").is_err());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(
            parse_str("[comb]\ndelta = 3e6\n"),
            Err(CliError::Parse(_))
        ));
        assert!(matches!(parse_str("[combs]\n"), Err(CliError::Parse(_))));
        assert!(matches!(
            parse_str("[comb]\ndelta_hz = -1\n"),
            Err(CliError::Core(_))
        ));
        let e = parse_str("[comb]\ndelta_hz = \n").unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
    }

    #[test]
    fn resolved_config_round_trips() {
        let l =
            parse_str("[comb]\ndelta_hz = 12e6\n[pulses]\nfwhm_s = 3e-8\npeak_s = 2e-7\n").unwrap();
        let text = l.config.to_toml();
        let again = parse_str(&text).unwrap();
        assert_eq!(again.config, l.config);
        assert_eq!(again.config.to_toml(), text);
    }
}
