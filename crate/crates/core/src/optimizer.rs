//! Searches over comb spacing and pulse width, and plain grid sweeps.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{bandwidth_from_sweep, SweepAxis, SweepResult};
use crate::error::{config_err, diagnostic, invalid, Error, Result};
use crate::experiment::EchoExperiment;
use crate::model::MemoryConfig;

/// Largest number of solver steps one objective evaluation may take.
pub const MAX_STEPS_PER_EVALUATION: f64 = 2e7;
const PRESCAN_POINTS: usize = 9;
const FWHM_PRESCAN_POINTS: usize = 17;
const INV_PHI: f64 = 0.618_033_988_749_894_9;
const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub params: BTreeMap<String, f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub objective: String,
    pub best_value: f64,
    pub best_params: BTreeMap<String, f64>,
    pub evaluations: usize,
    pub trace: Vec<TracePoint>,
    /// The objective does not depend on the searched parameter.
    pub flat_objective: bool,
}

/// Quantity extracted from one echo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    FirstEchoEfficiency,
    /// Efficiency of the given echo order.
    OrderEfficiency(usize),
    TotalEchoEfficiency,
}

impl Objective {
    pub fn name(self) -> String {
        match self {
            Objective::FirstEchoEfficiency => "first_echo_efficiency".into(),
            Objective::OrderEfficiency(m) => format!("order_{m}_efficiency"),
            Objective::TotalEchoEfficiency => "total_echo_efficiency".into(),
        }
    }

    pub fn evaluate(self, config: &MemoryConfig, experiment: &EchoExperiment) -> Result<f64> {
        let mut exp = experiment.clone();
        if let Objective::OrderEfficiency(m) = self {
            if m == 0 {
                return Err(invalid!("echo orders start at 1"));
            }
            exp.orders = exp.orders.max(m);
        }
        let metrics = exp.run(config)?.metrics;
        Ok(match self {
            Objective::FirstEchoEfficiency => metrics.efficiency,
            Objective::OrderEfficiency(m) => metrics.order_efficiency(m).unwrap_or(0.0),
            Objective::TotalEchoEfficiency => metrics.total_echo_energy() / metrics.input_energy,
        })
    }
}

/// Parameter of [`EchoExperiment`] or [`MemoryConfig`] a grid axis varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridParam {
    Delta,
    Fwhm,
    CloseTime,
    KappaC,
    KappaI,
    MeanPhotons,
}

impl GridParam {
    pub fn name(self) -> &'static str {
        match self {
            GridParam::Delta => "delta_hz",
            GridParam::Fwhm => "fwhm_s",
            GridParam::CloseTime => "close_time_s",
            GridParam::KappaC => "kappa_c_hz",
            GridParam::KappaI => "kappa_i_hz",
            GridParam::MeanPhotons => "mean_photons",
        }
    }

    fn apply(self, value: f64, config: &mut MemoryConfig, exp: &mut EchoExperiment) {
        match self {
            GridParam::Delta => exp.delta = value,
            GridParam::Fwhm => exp.fwhm = value,
            GridParam::CloseTime => exp.close_time = value,
            GridParam::KappaC => *config = config.clone().with_kappa_c(value),
            GridParam::KappaI => *config = config.clone().with_kappa_i(value),
            GridParam::MeanPhotons => exp.mean_photons = value,
        }
    }

    fn sweep_axis(self) -> Option<SweepAxis> {
        match self {
            GridParam::Delta => Some(SweepAxis::Delta),
            GridParam::Fwhm => Some(SweepAxis::Fwhm),
            GridParam::CloseTime => Some(SweepAxis::CloseTime),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub param: GridParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub coords: Vec<f64>,
    pub value: std::result::Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSweep {
    pub axes: Vec<GridAxis>,
    pub objective: String,
    /// Row-major over the axes, last axis fastest.
    pub points: Vec<GridPoint>,
}

impl GridSweep {
    pub fn evaluations(&self) -> usize {
        self.points.len()
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.value.is_err()).count()
    }

    /// One sweep along the last axis for every combination of the others.
    /// Failed points are left out; FWHM sweeps get a bandwidth when one can
    /// be extracted.
    pub fn sweep_results(&self, plateau_fraction: f64) -> Result<Vec<SweepResult>> {
        let last = self
            .axes
            .last()
            .ok_or_else(|| invalid!("grid has no axes"))?;
        let axis = last
            .param
            .sweep_axis()
            .ok_or_else(|| invalid!("{} is not a sweep axis", last.param.name()))?;
        let mut out = Vec::new();
        for row in self.points.chunks(last.values.len()) {
            let (xs, ys): (Vec<f64>, Vec<f64>) = row
                .iter()
                .filter_map(|p| {
                    p.value
                        .as_ref()
                        .ok()
                        .map(|v| (*p.coords.last().unwrap(), *v))
                })
                .unzip();
            if xs.is_empty() {
                continue;
            }
            let sweep = match axis {
                SweepAxis::Fwhm => bandwidth_from_sweep(&xs, &ys, plateau_fraction)
                    .or_else(|_| SweepResult::new(axis, xs.clone(), ys.clone()))?,
                _ => SweepResult::new(axis, xs, ys)?,
            };
            out.push(sweep);
        }
        Ok(out)
    }
}

/// Evaluates `objective` on the Cartesian product of `axes`, in parallel.
/// Point failures are recorded rather than aborting the sweep.
pub fn sweep_grid(
    config: &MemoryConfig,
    base: &EchoExperiment,
    axes: &[GridAxis],
    objective: Objective,
) -> Result<GridSweep> {
    if axes.is_empty() || axes.iter().any(|a| a.values.is_empty()) {
        return Err(invalid!("every grid axis needs at least one value"));
    }
    config.validate()?;
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    let points = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut rem = flat;
            let mut coords = vec![0.0; axes.len()];
            for (k, axis) in axes.iter().enumerate().rev() {
                coords[k] = axis.values[rem % axis.values.len()];
                rem /= axis.values.len();
            }
            let mut cfg = config.clone();
            let mut exp = base.clone();
            for (axis, &v) in axes.iter().zip(&coords) {
                axis.param.apply(v, &mut cfg, &mut exp);
            }
            let value = cfg
                .validate()
                .and_then(|_| objective.evaluate(&cfg, &exp))
                .map_err(|e| e.to_string());
            GridPoint { coords, value }
        })
        .collect();
    Ok(GridSweep {
        axes: axes.to_vec(),
        objective: objective.name(),
        points,
    })
}

/// FWHM sweep with bandwidth extraction.
pub fn fwhm_sweep(
    config: &MemoryConfig,
    base: &EchoExperiment,
    fwhms: &[f64],
    plateau_fraction: f64,
) -> Result<SweepResult> {
    let axis = GridAxis {
        param: GridParam::Fwhm,
        values: fwhms.to_vec(),
    };
    let grid = sweep_grid(config, base, &[axis], Objective::FirstEchoEfficiency)?;
    let etas = grid
        .points
        .into_iter()
        .map(|p| p.value.map_err(Error::Diagnostic))
        .collect::<Result<Vec<f64>>>()?;
    bandwidth_from_sweep(fwhms, &etas, plateau_fraction)
}

struct Search<'a> {
    config: &'a MemoryConfig,
    base: &'a EchoExperiment,
    param: GridParam,
    objective: Objective,
    trace: Vec<TracePoint>,
}

impl Search<'_> {
    fn point(&self, x: f64) -> Result<f64> {
        let mut cfg = self.config.clone();
        let mut exp = self.base.clone();
        self.param.apply(x, &mut cfg, &mut exp);
        self.objective.evaluate(&cfg, &exp)
    }

    fn record(&mut self, x: f64, v: f64) {
        let params = BTreeMap::from([(self.param.name().to_string(), x)]);
        self.trace.push(TracePoint { params, value: v });
    }

    fn eval(&mut self, x: f64) -> Result<f64> {
        let v = self.point(x)?;
        self.record(x, v);
        Ok(v)
    }

    fn scan(&mut self, xs: &[f64]) -> Result<Vec<f64>> {
        let vs = xs
            .par_iter()
            .map(|&x| self.point(x))
            .collect::<Result<Vec<f64>>>()?;
        for (&x, &v) in xs.iter().zip(&vs) {
            self.record(x, v);
        }
        Ok(vs)
    }

    /// Golden-section maximisation on `[a, b]` in the coordinate `to_x(u)`.
    fn golden(
        &mut self,
        mut a: f64,
        mut b: f64,
        tol_u: f64,
        to_x: impl Fn(f64) -> f64,
    ) -> Result<()> {
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = self.eval(to_x(c))?;
        let mut fd = self.eval(to_x(d))?;
        let mut it = 0;
        while (b - a) > tol_u && it < MAX_ITERATIONS {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = self.eval(to_x(c))?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = self.eval(to_x(d))?;
            }
            it += 1;
        }
        Ok(())
    }

    fn best(&self) -> &TracePoint {
        self.trace
            .iter()
            .fold(&self.trace[0], |b, p| if p.value > b.value { p } else { b })
    }

    fn report(self, flat: bool) -> OptimizationReport {
        let best = self.best().clone();
        OptimizationReport {
            objective: self.objective.name(),
            best_value: best.value,
            best_params: best.params,
            evaluations: self.trace.len(),
            trace: self.trace,
            flat_objective: flat,
        }
    }
}

fn is_flat(values: &[f64]) -> bool {
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo <= 1e-9 * hi.abs().max(1e-300)
}

fn check_range(lo: f64, hi: f64, tol: f64, what: &str) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo) {
        return Err(invalid!(
            "{what} range must satisfy 0 < lo < hi, got [{lo:e}, {hi:e}]"
        ));
    }
    if !(tol > 0.0) {
        return Err(invalid!("tolerance must be positive"));
    }
    Ok(())
}

/// Comb spacing maximising `objective` within `[lo, hi]`, to `tol` (Hz).
///
/// A nine-point scan brackets the maximum and golden-section search refines
/// it. The best value returned is the best ever evaluated, so it never falls
/// below the best scan point.
pub fn optimize_delta(
    config: &MemoryConfig,
    base: &EchoExperiment,
    range: (f64, f64),
    tol: f64,
    objective: Objective,
) -> Result<OptimizationReport> {
    let (lo, hi) = range;
    check_range(lo, hi, tol, "delta")?;
    config.validate()?;
    // the slowest comb sets the run length
    let slowest = EchoExperiment {
        delta: lo,
        ..base.clone()
    };
    let probe = slowest.run_length_steps(config)?;
    if probe > MAX_STEPS_PER_EVALUATION {
        return Err(config_err!(
            "delta = {lo:e} Hz needs {probe:.3e} solver steps per evaluation (limit {MAX_STEPS_PER_EVALUATION:e})"
        ));
    }
    let mut search = Search {
        config,
        base,
        param: GridParam::Delta,
        objective,
        trace: Vec::new(),
    };
    let xs: Vec<f64> = (0..PRESCAN_POINTS)
        .map(|k| lo + (hi - lo) * k as f64 / (PRESCAN_POINTS - 1) as f64)
        .collect();
    let vs = search.scan(&xs)?;
    let flat = config.n_resonators < 2 || config.max_kappa_c() == 0.0 || is_flat(&vs);
    if flat {
        return Ok(search.report(true));
    }
    let k = argmax(&vs);
    let a = xs[k.saturating_sub(1)];
    let b = xs[(k + 1).min(xs.len() - 1)];
    search.golden(a, b, tol, |u| u)?;
    Ok(search.report(false))
}

/// Shortest pulse reaching `plateau_fraction` of the best efficiency within
/// `[lo, hi]`, to a relative tolerance `rel_tol`.
pub fn optimize_fwhm(
    config: &MemoryConfig,
    base: &EchoExperiment,
    range: (f64, f64),
    rel_tol: f64,
    plateau_fraction: f64,
) -> Result<OptimizationReport> {
    let (lo, hi) = range;
    check_range(lo, hi, rel_tol, "fwhm")?;
    if !(plateau_fraction > 0.0 && plateau_fraction <= 1.0) {
        return Err(invalid!(
            "plateau fraction must lie in (0, 1], got {plateau_fraction}"
        ));
    }
    config.validate()?;
    let objective = Objective::FirstEchoEfficiency;
    let mut search = Search {
        config,
        base,
        param: GridParam::Fwhm,
        objective,
        trace: Vec::new(),
    };
    let (ulo, uhi) = (lo.ln(), hi.ln());
    let us: Vec<f64> = (0..FWHM_PRESCAN_POINTS)
        .map(|k| ulo + (uhi - ulo) * k as f64 / (FWHM_PRESCAN_POINTS - 1) as f64)
        .collect();
    let xs: Vec<f64> = us.iter().map(|u| u.exp()).collect();
    let vs = search.scan(&xs)?;
    if config.max_kappa_c() == 0.0 || is_flat(&vs) {
        let mut report = search.report(true);
        report.best_params = BTreeMap::from([(GridParam::Fwhm.name().to_string(), lo)]);
        return Ok(report);
    }
    let k = argmax(&vs);
    if k == vs.len() - 1 {
        return Err(diagnostic!(
            "efficiency still rising at fwhm = {hi:e} s; the plateau lies outside the range"
        ));
    }
    search.golden(us[k.saturating_sub(1)], us[k + 1], rel_tol, f64::exp)?;
    let peak = search.best().clone();
    let threshold = plateau_fraction * peak.value;
    let x_peak = peak.params[GridParam::Fwhm.name()];
    let mut report_point = peak.clone();
    if plateau_fraction < 1.0 {
        // first scan point at or above threshold, then bisect towards shorter pulses
        let first = xs
            .iter()
            .zip(&vs)
            .position(|(&x, &v)| x <= x_peak && v >= threshold);
        if let Some(j) = first {
            let (mut a, mut b) = if j == 0 {
                (ulo, ulo)
            } else {
                (us[j - 1], us[j])
            };
            let mut best = TracePoint {
                params: BTreeMap::from([(GridParam::Fwhm.name().to_string(), xs[j])]),
                value: vs[j],
            };
            let mut it = 0;
            while b - a > rel_tol && it < MAX_ITERATIONS {
                let m = 0.5 * (a + b);
                let v = search.eval(m.exp())?;
                if v >= threshold {
                    b = m;
                    best = search.trace.last().unwrap().clone();
                } else {
                    a = m;
                }
                it += 1;
            }
            report_point = best;
        }
    }
    let mut report = search.report(false);
    report.best_value = report_point.value;
    report.best_params = report_point.params;
    report.objective = format!("shortest_fwhm_at_{plateau_fraction}_of_peak");
    Ok(report)
}

fn argmax(vs: &[f64]) -> usize {
    vs.iter()
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
