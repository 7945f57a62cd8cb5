use clap::Subcommand;
use combmem::analysis::csv::{
    write_bandwidth, write_heterodyne, write_intensity_map, write_spectrum, write_sweep,
    write_trace,
};
use combmem::analysis::{
    bandwidth_from_sweep, decay_fit, heterodyne_render, linear_fit, DecayConstant,
};
use combmem::dynamics::transmission_spectrum;
use combmem::model::build_comb;
use combmem::optimizer::{
    fwhm_sweep, optimize_delta, optimize_fwhm, sweep_grid, GridAxis, GridParam, Objective,
};
use combmem::timebin::{write_timebin_csv, TimeBinState};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{OptimizeTarget, RunConfig};
use crate::error::CliError;
use crate::output::OutputDir;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Static comb transmission |S21| versus probe detuning.
    Spectrum,
    /// Single-pulse storage: output traces, heterodyne trace and per-order efficiencies.
    Echo,
    /// Efficiency versus pulse FWHM, with the bandwidth.
    SweepFwhm,
    /// Bandwidth and best efficiency versus comb spacing.
    SweepDelta,
    /// Close-time scan: intensity map, efficiency and decay constant.
    Ondemand,
    /// Two pulses released by separate close stages.
    Multimode,
    /// Time-bin qubit fidelities and output-state deviations.
    Timebin,
    /// Optimise the comb spacing or the pulse width.
    Optimize,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Echo => "echo",
            Command::SweepFwhm => "sweep-fwhm",
            Command::SweepDelta => "sweep-delta",
            Command::Ondemand => "ondemand",
            Command::Multimode => "multimode",
            Command::Timebin => "timebin",
            Command::Optimize => "optimize",
        }
    }

    pub fn run(self, cfg: &RunConfig, out: &mut OutputDir) -> Result<Value, CliError> {
        match self {
            Command::Spectrum => spectrum(cfg, out),
            Command::Echo => echo(cfg, out),
            Command::SweepFwhm => sweep_fwhm(cfg, out),
            Command::SweepDelta => sweep_delta(cfg, out),
            Command::Ondemand => ondemand(cfg, out),
            Command::Multimode => multimode(cfg, out),
            Command::Timebin => timebin(cfg, out),
            Command::Optimize => optimize(cfg, out),
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
        .collect()
}

fn geomspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), n)
        .into_iter()
        .map(f64::exp)
        .collect()
}

fn fwhm_grid(cfg: &RunConfig, delta: f64) -> Vec<f64> {
    let s = &cfg.sweep;
    geomspace(
        s.fwhm_min_periods / delta,
        s.fwhm_max_periods / delta,
        s.fwhm_points,
    )
}

fn spectrum(cfg: &RunConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let memory = cfg.memory()?;
    let comb = build_comb(memory.n_resonators, cfg.comb.delta_hz)?;
    let half = 0.5 * (memory.n_resonators as f64 + 1.0) * cfg.comb.delta_hz;
    let lo = cfg.spectrum.f_min_hz.unwrap_or(-half);
    let hi = cfg.spectrum.f_max_hz.unwrap_or(half);
    if !(hi > lo) {
        return Err(combmem::Error::InvalidArgument(format!(
            "spectrum range [{lo}, {hi}] is empty"
        ))
        .into());
    }
    let freqs = linspace(lo, hi, cfg.spectrum.points);
    let s21 = transmission_spectrum(&memory, &comb.detunings, &freqs)?;
    out.write("spectrum.csv", |w| write_spectrum(w, &freqs, &s21))?;
    let dips = transmission_spectrum(&memory, &comb.detunings, &comb.detunings)?;
    Ok(json!({
        "resonance_detunings_hz": comb.detunings,
        "s21_abs_at_resonances": dips.iter().map(|z| z.norm()).collect::<Vec<_>>(),
    }))
}

fn echo(cfg: &RunConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let memory = cfg.memory()?;
    let exp = cfg.experiment();
    let run = exp.run(&memory)?;
    let t0 = exp.input_peak();
    let time: Vec<f64> = run.result.time_grid.iter().map(|t| t - t0).collect();
    out.write("trace_transmitted.csv", |w| {
        write_trace(w, &time, &run.result.s_t)
    })?;
    out.write("trace_reflected.csv", |w| {
        write_trace(w, &time, &run.result.s_r)
    })?;
    let het = heterodyne_render(&time, &run.result.s_t, cfg.render.intermediate_frequency_hz)?;
    out.write("heterodyne.csv", |w| write_heterodyne(w, &het))?;
    let m = &run.metrics;
    let orders: Vec<f64> = m.windows.iter().map(|w| w.order as f64).collect();
    let etas: Vec<f64> = m
        .windows
        .iter()
        .map(|w| m.order_efficiency(w.order).unwrap_or(0.0))
        .collect();
    out.write("echo_orders.csv", |w| write_sweep(w, &orders, &etas))?;
    Ok(json!({
        "dt_s": run.result.dt(),
        "input_peak_s": t0,
        "efficiency": m.efficiency,
        "order_efficiencies": etas,
        "echo_phase_rad": m.echo_phase,
        "first_echo_delay_s": m.first_echo_peak - t0,
    }))
}

fn sweep_fwhm(cfg: &RunConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let memory = cfg.memory()?;
    let fwhms = fwhm_grid(cfg, cfg.comb.delta_hz);
    let axis = GridAxis {
        param: GridParam::Fwhm,
        values: fwhms.clone(),
    };
    let grid = sweep_grid(
        &memory,
        &cfg.experiment(),
        &[axis],
        Objective::FirstEchoEfficiency,
    )?;
    let etas = grid
        .points
        .into_iter()
        .map(|p| p.value.map_err(combmem::Error::Diagnostic))
        .collect::<Result<Vec<f64>, _>>()?;
    out.write("sweep_fwhm.csv", |w| write_sweep(w, &fwhms, &etas))?;
    let bandwidth = match bandwidth_from_sweep(&fwhms, &etas, cfg.sweep.plateau_fraction) {
        Ok(s) => json!(s.bandwidth),
        Err(combmem::Error::Diagnostic(m)) => json!({ "unavailable": m }),
        Err(e) => return Err(e.into()),
    };
    Ok(json!({
        "best_efficiency": etas.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "bandwidth_hz": bandwidth,
    }))
}

fn sweep_delta(cfg: &RunConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let memory = cfg.memory()?;
    let deltas = &cfg.sweep.delta_values_hz;
    let rows = deltas
        .par_iter()
        .map(|&d| {
            let exp = combmem::experiment::EchoExperiment {
                delta: d,
                ..cfg.experiment()
            };
            let s = fwhm_sweep(
                &memory,
                &exp,
                &fwhm_grid(cfg, d),
                cfg.sweep.plateau_fraction,
            )?;
            let bw = s.bandwidth.ok_or_else(|| {
                combmem::Error::Diagnostic(format!("no bandwidth at delta = {d:e} Hz"))
            })?;
            Ok((d, bw, s.best_efficiency))
        })
        .collect::<Result<Vec<(f64, f64, f64)>, combmem::Error>>()?;
    out.write("bandwidth_vs_delta.csv", |w| write_bandwidth(w, &rows))?;
    let fit = if rows.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().map(|r| (r.0, r.1)).unzip();
        let f = linear_fit(&x, &y)?;
        json!({ "slope": f.slope, "intercept_hz": f.intercept, "r_squared": f.r_squared })
    } else {
        Value::Null
    };
    Ok(json!({ "linear_fit": fit }))
}

fn ondemand(cfg: &RunConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let memory = cfg.memory()?;
    let tcs = &cfg.ondemand.close_times_s;
    let runs = tcs
        .par_iter()
        .map(|&tc| {
            combmem::experiment::EchoExperiment {
                close_time: tc,
                ..cfg.experiment()
            }
            .run(&memory)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut map = Vec::new();
    for (&tc, run) in tcs.iter().zip(&runs) {
        let t0 = run.input.first_peak().unwrap_or(0.0);
        map.extend(
            run.result
                .time_grid
                .iter()
                .zip(&run.result.s_t)
                .map(|(t, s)| (tc, t - t0, s.norm())),
        );
    }
    let etas: Vec<f64> = runs.iter().map(|r| r.metrics.efficiency).collect();
    out.write("intensity_map.csv", |w| write_intensity_map(w, &map))?;
    out.write("ondemand_eta.csv", |w| write_sweep(w, tcs, &etas))?;
    let decay = match decay_fit(tcs, &etas) {
        Ok(f) => match f.tau {
            DecayConstant::Finite(t) => json!({ "tau_s": t, "amplitude": f.amplitude }),
            DecayConstant::LowerBound(t) => {
                json!({ "tau_lower_bound_s": t, "amplitude": f.amplitude })
            }
        },
        Err(e) => json!({ "unavailable": e.to_string() }),
    };
    Ok(json!({ "efficiencies": etas, "decay": decay }))
}

fn multimode(cfg: &RunConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let memory = cfg.memory()?;
    let closes = &cfg.multimode.second_close_s;
    let runs = closes
        .par_iter()
        .map(|&c2| cfg.multimode(c2).run(&memory))
        .collect::<Result<Vec<_>, _>>()?;
    let mut map = Vec::new();
    let mut echoes = Vec::new();
    for (&c2, run) in closes.iter().zip(&runs) {
        let t0 = run.input.first_peak().unwrap_or(0.0);
        map.extend(
            run.result
                .time_grid
                .iter()
                .zip(&run.result.s_t)
                .map(|(t, s)| (c2, t - t0, s.norm())),
        );
        echoes.push(json!({
            "second_close_s": c2,
            "expected_delays_s": run.expected.map(|t| t - t0),
            "echo_delays_s": run.combined_peaks.map(|t| t - t0),
            "mode_echo_delays_s": run.mode_peaks.map(|t| t - t0),
        }));
    }
    out.write("intensity_map.csv", |w| write_intensity_map(w, &map))?;
    Ok(json!({ "echoes": echoes }))
}

fn timebin(cfg: &RunConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let memory = cfg.memory()?;
    let tb = &cfg.timebin;
    let a_l = (1.0 - tb.a_e * tb.a_e).max(0.0).sqrt();
    let cases: Vec<(f64, f64)> = tb
        .close_times_s
        .iter()
        .flat_map(|&tc| tb.phases_rad.iter().map(move |&p| (tc, p)))
        .collect();
    let rows = cases
        .par_iter()
        .map(|&(tc, phi)| {
            let state = TimeBinState::new(tb.a_e, a_l, phi, tb.separation_s, tb.fwhm_s)?;
            Ok((phi, cfg.timebin(tc).evaluate(&memory, &state)?))
        })
        .collect::<Result<Vec<_>, combmem::Error>>()?;
    out.write("timebin.csv", |w| write_timebin_csv(w, &rows))?;
    let min_f = rows
        .iter()
        .map(|(_, r)| r.fidelity_e.min(r.fidelity_l))
        .fold(f64::INFINITY, f64::min);
    Ok(json!({ "min_fidelity": min_f, "cases": rows.len() }))
}

fn optimize(cfg: &RunConfig, out: &mut OutputDir) -> Result<Value, CliError> {
    let memory = cfg.memory()?;
    let exp = cfg.experiment();
    let o = &cfg.optimize;
    let report = match o.target {
        OptimizeTarget::Delta => {
            let (lo, hi, tol) = cfg.delta_range()?;
            optimize_delta(&memory, &exp, (lo, hi), tol, Objective::FirstEchoEfficiency)?
        }
        OptimizeTarget::Fwhm => optimize_fwhm(
            &memory,
            &exp,
            (o.fwhm_min_s, o.fwhm_max_s),
            o.fwhm_rel_tol,
            o.plateau_fraction,
        )?,
    };
    let (xs, vs): (Vec<f64>, Vec<f64>) = report
        .trace
        .iter()
        .map(|p| {
            (
                p.params.values().next().copied().unwrap_or(f64::NAN),
                p.value,
            )
        })
        .unzip();
    out.write("optimize_trace.csv", |w| write_sweep(w, &xs, &vs))?;
    Ok(json!({
        "objective": report.objective,
        "best_value": report.best_value,
        "best_params": report.best_params,
        "evaluations": report.evaluations,
        "flat_objective": report.flat_objective,
    }))
}
