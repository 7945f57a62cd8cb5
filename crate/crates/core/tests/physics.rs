use combmem::analysis::{
    echo_windows, phase_difference, storage_efficiency, window_energy, PhaseEstimator,
};
use combmem::dynamics::{
    simulate, simulate_with, spectrum_via_fft_crosscheck, transmission_spectrum, Port, Pulse,
    PulseTrain, SolverSettings,
};
use combmem::experiment::EchoExperiment;
use combmem::model::{build_comb, impedance_matching_delta, MemoryConfig};
use combmem::optimizer::{optimize_delta, Objective};
use combmem::schedule::{close_windows_schedule, static_comb, DetuningSchedule, Segment, Stage};
use combmem::timebin::{TimeBinProtocol, TimeBinState};
use num_complex::Complex64;
use proptest::prelude::*;

fn device() -> MemoryConfig {
    MemoryConfig::default()
}

#[test]
fn halving_the_step_leaves_the_echo_unchanged() {
    let cfg = device();
    let coarse = EchoExperiment {
        dt: Some(0.5e-9),
        ..EchoExperiment::default()
    };
    let fine = EchoExperiment {
        dt: Some(0.25e-9),
        ..coarse.clone()
    };
    let a = coarse.run(&cfg).unwrap().metrics;
    let b = fine.run(&cfg).unwrap().metrics;
    let rel = (a.energies_t[0] - b.energies_t[0]).abs() / b.energies_t[0];
    assert!(rel < 1e-4, "relative change {rel:e}");
}

#[test]
fn complex_scaling_scales_every_output() {
    let cfg = device();
    let exp = EchoExperiment::default();
    let schedule = exp.schedule(&cfg).unwrap();
    let c = Complex64::from_polar(3.7, 1.1);
    let base = simulate(&cfg, &schedule, &exp.input(), exp.t_end(), 0.5e-9).unwrap();
    let scaled = simulate(&cfg, &schedule, &exp.input().scaled(c), exp.t_end(), 0.5e-9).unwrap();
    let peak = base.s_t.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for (x, y) in base
        .s_t
        .iter()
        .zip(&scaled.s_t)
        .chain(base.s_r.iter().zip(&scaled.s_r))
    {
        assert!((x * c - y).norm() <= 1e-10 * c.norm() * peak);
    }
}

#[test]
fn echo_phase_follows_input_phase() {
    let cfg = device();
    let reference = EchoExperiment::default()
        .run(&cfg)
        .unwrap()
        .metrics
        .echo_phase;
    for phase in [0.5, 2.0, 4.0, 6.0] {
        let run = EchoExperiment {
            phase,
            ..EchoExperiment::default()
        }
        .run(&cfg)
        .unwrap();
        let d = phase_difference(
            &run.result,
            &run.windows,
            &run.input,
            PhaseEstimator::EnergyWeighted,
        )
        .unwrap();
        let d0 = combmem::analysis::wrap_phase(reference);
        assert!(
            (combmem::analysis::wrap_phase(d - d0)).abs() < 1e-9,
            "phase {phase}: {d} vs {d0}"
        );
    }
}

#[test]
fn close_stage_freezes_the_dark_state() {
    let cfg = MemoryConfig::uniform(4, 0.55e6, 0.0).unwrap();
    let exp = EchoExperiment {
        close_time: 1.2e-6,
        ..EchoExperiment::default()
    };
    let run = exp.run(&cfg).unwrap();
    let dt = run.result.dt();
    let k0 = ((exp.write_end() + 100e-9) / dt).round() as usize;
    let k1 = ((exp.write_end() + exp.close_time) / dt).round() as usize;
    let (a, b) = (run.result.stored_photons(k0), run.result.stored_photons(k1));
    assert!(b >= (1.0 - 1e-3) * a, "stored {a:e} -> {b:e}");
}

#[test]
fn mirrored_device_from_the_other_port_is_equivalent() {
    let mut cfg = MemoryConfig::uniform(3, 0.4e6, 0.1e6).unwrap();
    cfg.kappa_c = vec![0.3e6, 0.5e6, 0.8e6];
    cfg.kappa_i = vec![0.05e6, 0.1e6, 0.2e6];
    let mut mirrored = cfg.clone();
    mirrored.kappa_c.reverse();
    mirrored.kappa_i.reverse();
    let det = vec![-2e6, 0.5e6, 3e6];
    let rev: Vec<f64> = det.iter().rev().copied().collect();
    let seg = |d: Vec<f64>| {
        DetuningSchedule::new(vec![Segment {
            t_start: 0.0,
            t_end: 2e-6,
            stage: Stage::Write,
            detunings: d,
        }])
        .unwrap()
    };
    let input = PulseTrain::single(Pulse::gaussian(200e-9, 60e-9, 1.0, 0.0));
    let left = simulate(&cfg, &seg(det), &input, 2e-6, 0.5e-9).unwrap();
    let right = simulate_with(
        &mirrored,
        &seg(rev),
        &input,
        2e-6,
        &SolverSettings {
            port: Port::Right,
            ..SolverSettings::with_dt(0.5e-9)
        },
    )
    .unwrap();
    for k in 0..left.len() {
        assert!((left.s_t[k].norm() - right.s_t[k].norm()).abs() < 1e-9);
        assert!((left.s_r[k].norm() - right.s_r[k].norm()).abs() < 1e-9);
    }
}

#[test]
fn suppression_after_the_first_echo_holds_higher_orders() {
    let cfg = device();
    let base = EchoExperiment::default();
    let suppressed = EchoExperiment {
        suppress_after_first: true,
        ..base.clone()
    };
    let a = base.run(&cfg).unwrap().metrics;
    let b = suppressed.run(&cfg).unwrap().metrics;
    let higher = |m: &combmem::analysis::EchoMetrics| {
        (2..=3).map(|o| m.order_efficiency(o).unwrap()).sum::<f64>()
    };
    assert!(
        higher(&b) * 10.0 <= higher(&a),
        "{} vs {}",
        higher(&b),
        higher(&a)
    );
    assert!((a.efficiency - b.efficiency).abs() < 0.05 * a.efficiency);
}

#[test]
fn suppression_before_the_echo_keeps_it_stored() {
    let cfg = MemoryConfig::uniform(4, 0.55e6, 0.0).unwrap();
    let exp = EchoExperiment::default();
    let base = exp.schedule(&cfg).unwrap();
    let held = combmem::schedule::echo_suppression(&base, exp.write_end()).unwrap();
    let r = simulate(&cfg, &held, &exp.input(), exp.t_end(), 0.5e-9).unwrap();
    let windows = echo_windows(&base, exp.delta, exp.input_peak(), 1).unwrap();
    let e = window_energy(&r, &r.emitted_forward(), &windows[0]).unwrap();
    let open = exp.run(&cfg).unwrap().metrics.energies_t[0];
    assert!(e < 1e-2 * open);
    let k = (exp.write_end() / r.dt()).round() as usize;
    assert!(r.stored_photons(r.len() - 1) > 0.9 * r.stored_photons(k));
}

#[test]
fn time_domain_spectrum_matches_matrix_formula() {
    let probes: Vec<f64> = (-8..=8).map(|k| k as f64 * 0.5e6).collect();
    for n in [1, 4] {
        let cfg = MemoryConfig::uniform(n, 0.55e6, 0.312e6).unwrap();
        let comb = build_comb(n, 3.5e6).unwrap();
        let pulse = Pulse::gaussian(300e-9, 25e-9, 1.0, 0.0);
        let check =
            spectrum_via_fft_crosscheck(&cfg, &comb.detunings, &pulse, &probes, 0.25e-9).unwrap();
        assert!(
            check.max_deviation(0.05) < 0.01,
            "N = {n}: {}",
            check.max_deviation(0.05)
        );
    }
}

#[test]
fn comb_spectrum_has_one_dip_per_resonator() {
    let cfg = MemoryConfig::uniform(4, 0.2e6, 0.05e6).unwrap();
    let comb = build_comb(4, 3.5e6).unwrap();
    let s = transmission_spectrum(&cfg, &comb.detunings, &comb.detunings).unwrap();
    let between = transmission_spectrum(&cfg, &comb.detunings, &[-3.5e6, 0.0, 3.5e6]).unwrap();
    let dip = s.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let off = between
        .iter()
        .map(|z| z.norm())
        .fold(f64::INFINITY, f64::min);
    assert!(dip < 0.5 && off > 0.9, "dips {dip}, between {off}");
}

#[test]
fn static_comb_preserves_the_time_bin_ratio() {
    let cfg = device();
    for (a_e, phi) in [(0.6f64, 0.7), (0.9, 2.5)] {
        let a_l = (1.0 - a_e * a_e).sqrt();
        let state = TimeBinState::new(a_e, a_l, phi, 150e-9, 50e-9).unwrap();
        let r = TimeBinProtocol::default().evaluate(&cfg, &state).unwrap();
        assert!((r.clean_amp_ratio / (a_l / a_e) - 1.0).abs() < 1e-6);
        assert!(r.clean_phase_deviation.abs() < 1e-6);
    }
}

#[test]
fn matching_spacing_scales_with_coupling() {
    // with ki = 0 the problem is scale-free once the pulse scales as 1/kc
    let argmax = |kc: f64| {
        let base = EchoExperiment {
            fwhm: 0.165 / kc,
            orders: 1,
            ..EchoExperiment::default()
        };
        let cfg = MemoryConfig::uniform(4, kc, 0.0).unwrap();
        let m = impedance_matching_delta(kc).unwrap();
        let r = optimize_delta(
            &cfg,
            &base,
            (0.4 * m, 2.0 * m),
            0.005 * m,
            Objective::FirstEchoEfficiency,
        )
        .unwrap();
        assert!(!r.flat_objective);
        assert!((r.best_value - r.trace.iter().map(|p| p.value).fold(0.0, f64::max)).abs() == 0.0);
        r.best_params["delta_hz"]
    };
    let (a, b) = (argmax(0.3e6), argmax(0.6e6));
    assert!((b / a - 2.0).abs() < 0.02, "{a:e} -> {b:e}");
}

#[test]
fn efficiency_is_bounded_and_vanishes_without_coupling() {
    let off = MemoryConfig::uniform(4, 0.0, 0.3e6).unwrap();
    assert_eq!(EchoExperiment::default().efficiency(&off).unwrap(), 0.0);
    let eta = EchoExperiment::default().efficiency(&device()).unwrap();
    assert!(eta > 0.0 && eta < 1.0);
}

fn random_schedule(n: usize, delta: f64, closes: &[(f64, f64)], t_end: f64) -> DetuningSchedule {
    let comb = build_comb(n, delta).unwrap();
    close_windows_schedule(
        &comb,
        closes.first().map_or(0.4e-6, |c| c.0),
        closes,
        t_end,
        0.0,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn energy_is_conserved(
        n in 1usize..=5,
        kc in 0.1e6..1.2e6f64,
        ki in 0.0..0.5e6f64,
        delta in 1.0e6..6.0e6f64,
        fwhm in 40e-9..200e-9f64,
        close in 0.0..600e-9f64,
        ramp in prop_oneof![Just(0.0), Just(5e-9)],
    ) {
        let cfg = MemoryConfig::uniform(n, kc, ki).unwrap();
        let t_end = 2.0e-6;
        let closes = if close > 0.0 { vec![(0.5e-6, 0.5e-6 + close)] } else { Vec::new() };
        let s = random_schedule(n, delta, &closes, t_end);
        let input = PulseTrain::single(Pulse::gaussian(250e-9, fwhm, 1.0, 0.3));
        let r = simulate_with(&cfg, &s, &input, t_end, &SolverSettings { ramp, ..SolverSettings::with_dt(0.5e-9) }).unwrap();
        prop_assert!(r.energy_balance().relative_residual().abs() < 1e-5);
    }
}

#[test]
fn windows_feed_efficiency() {
    let cfg = device();
    let comb = build_comb(4, 3.5e6).unwrap();
    let s = static_comb(&comb, 1.2e-6).unwrap();
    let input = PulseTrain::single(Pulse::gaussian(100e-9, 80e-9, 1.0, 0.0));
    let r = simulate(&cfg, &s, &input, 1.2e-6, 0.5e-9).unwrap();
    let w = echo_windows(&s, 3.5e6, 100e-9, 2).unwrap();
    let m = storage_efficiency(&r, &w).unwrap();
    assert!(m.efficiency > 0.05 && m.order_efficiency(2).unwrap() < m.efficiency);
}
