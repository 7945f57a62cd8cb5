use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn combmem(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_combmem"))
        .args(args)
        .current_dir(dir)
        .env_remove("COMBMEM_OUT")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

const SMALL_SWEEP: &str = "[sweep]\nfwhm_points = 6\ndelta_values_hz = [3.5e6, 7e6]\n";

#[test]
fn echo_writes_traces_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let out = combmem(&["echo", "--out", "run"], tmp.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = tmp.path().join("run");
    assert_eq!(header(&run.join("trace_transmitted.csv")), "t_s,re,im,abs");
    assert_eq!(header(&run.join("heterodyne.csv")), "t_s,v_if,envelope");
    assert_eq!(header(&run.join("echo_orders.csv")), "axis,eta");

    // input peak at t = 0, first echo near 1/Δ
    let trace = rows(&run.join("trace_transmitted.csv"));
    let at = |t: f64| {
        trace
            .iter()
            .min_by(|a, b| (a[0] - t).abs().total_cmp(&(b[0] - t).abs()))
            .unwrap()[0]
    };
    assert!(at(0.0).abs() <= 0.25e-9);
    let echo = trace
        .iter()
        .filter(|r| r[0] > 150e-9 && r[0] < 430e-9)
        .max_by(|a, b| a[3].total_cmp(&b[3]))
        .unwrap();
    assert!(
        (echo[0] - 1.0 / 3.5e6).abs() < 0.1 / 3.5e6,
        "echo at {}",
        echo[0]
    );

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "echo");
    assert_eq!(manifest["resolved_config"]["memory"]["n_resonators"], 4);
    let files: Vec<&str> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["name"].as_str().unwrap())
        .collect();
    assert!(files.contains(&"trace_transmitted.csv") && files.contains(&"resolved.toml"));
    assert!(manifest["defaulted_keys"]
        .as_array()
        .unwrap()
        .iter()
        .any(|k| k == "comb.delta_hz"));
    let eta = manifest["summary"]["efficiency"].as_f64().unwrap();
    assert!(eta > 0.07 && eta < 0.17);
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", SMALL_SWEEP);
    let cfg = cfg.to_str().unwrap();
    for (jobs, dir) in [("1", "a"), ("4", "b")] {
        let out = combmem(
            &["sweep-fwhm", "--config", cfg, "--jobs", jobs, "--out", dir],
            tmp.path(),
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let a = fs::read(tmp.path().join("a/sweep_fwhm.csv")).unwrap();
    let b = fs::read(tmp.path().join("b/sweep_fwhm.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn resolved_config_reproduces_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "[comb]\ndelta_hz = 4e6\n[ondemand]\nclose_times_s = [0.0, 2e-7]\n",
    );
    let out = combmem(
        &[
            "ondemand",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "first",
        ],
        tmp.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let again = combmem(
        &[
            "ondemand",
            "--config",
            "first/resolved.toml",
            "--out",
            "second",
        ],
        tmp.path(),
    );
    assert!(
        again.status.success(),
        "{}",
        String::from_utf8_lossy(&again.stderr)
    );
    for f in ["intensity_map.csv", "ondemand_eta.csv", "resolved.toml"] {
        assert_eq!(
            fs::read(tmp.path().join("first").join(f)).unwrap(),
            fs::read(tmp.path().join("second").join(f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(
        header(&tmp.path().join("first/intensity_map.csv")),
        "t_close_s,delay_s,abs"
    );
}

#[test]
fn invalid_config_exits_with_two_and_leaves_nothing() {
    let tmp = TempDir::new().unwrap();
    let bad = write_config(tmp.path(), "bad.toml", "[comb]\ndelta_hz = -1\n");
    let out = combmem(
        &["echo", "--config", bad.to_str().unwrap(), "--out", "run"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("run").exists());

    let unknown = write_config(tmp.path(), "unknown.toml", "[pulses]\nfwhm = 1e-7\n");
    let out = combmem(
        &[
            "echo",
            "--config",
            unknown.to_str().unwrap(),
            "--out",
            "run",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fwhm"));

    let out = combmem(&["echo", "--config", "missing.toml"], tmp.path());
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn numerical_diagnostic_exits_with_three_and_removes_partial_output() {
    let tmp = TempDir::new().unwrap();
    // efficiency still rising at the longest pulse: no bandwidth
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "[sweep]\nfwhm_min_periods = 0.01\nfwhm_max_periods = 0.1\nfwhm_points = 4\ndelta_values_hz = [3.5e6]\n",
    );
    fs::create_dir(tmp.path().join("run")).unwrap();
    fs::write(tmp.path().join("run/notes.txt"), "keep").unwrap();
    let out = combmem(
        &[
            "sweep-delta",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "run",
        ],
        tmp.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let left: Vec<_> = fs::read_dir(tmp.path().join("run"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(left, vec![std::ffi::OsString::from("notes.txt")]);
}

#[test]
fn spectrum_shows_four_dips_across_the_comb() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "[comb]\ndelta_hz = 12e6\n[spectrum]\nf_min_hz = -3e7\nf_max_hz = 3e7\npoints = 6001\n",
    );
    let out = combmem(
        &["spectrum", "--config", cfg.to_str().unwrap(), "--out", "s"],
        tmp.path(),
    );
    assert!(out.status.success());
    let r = rows(&tmp.path().join("s/spectrum.csv"));
    let dips: Vec<f64> = (1..r.len() - 1)
        .filter(|&k| r[k][3] < r[k - 1][3] && r[k][3] <= r[k + 1][3] && r[k][3] < 0.9)
        .map(|k| r[k][0])
        .collect();
    assert_eq!(dips.len(), 4, "{dips:?}");
    assert!((dips[3] - dips[0] - 36e6).abs() < 0.5e6);
}

#[test]
fn output_directory_from_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "[timebin]\nphases_rad = [0.0, 1.0]\n");
    let out = Command::new(env!("CARGO_BIN_EXE_combmem"))
        .args(["timebin", "--config", cfg.to_str().unwrap()])
        .current_dir(tmp.path())
        .env("COMBMEM_OUT", "from_env")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = tmp.path().join("from_env/timebin.csv");
    assert_eq!(
        header(&csv),
        "phi,storage_time_s,amp_ratio,phase_dev_rad,F_e,F_l"
    );
    let r = rows(&csv);
    assert_eq!(r.len(), 2);
    assert!(r.iter().all(|row| row[4] > 0.99 && row[5] > 0.99));
}

#[test]
fn dt_flag_overrides_the_solver_step() {
    let tmp = TempDir::new().unwrap();
    let out = combmem(&["echo", "--dt", "2.5e-10", "--out", "run"], tmp.path());
    assert!(out.status.success());
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("run/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(m["resolved_config"]["solver"]["dt_s"], 2.5e-10);
    assert!((m["summary"]["dt_s"].as_f64().unwrap() - 2.5e-10).abs() < 1e-20);
    let out = combmem(&["echo", "--dt", "-1", "--out", "bad"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn multimode_and_optimize_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "[multimode]\nsecond_close_s = [5.1e-7, 9.5e-7]\n[memory]\nkappa_i_hz = 0.0\n[pulses]\nfwhm_s = 3e-7\n",
    );
    let c = cfg.to_str().unwrap();
    let out = combmem(&["multimode", "--config", c, "--out", "mm"], tmp.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("mm/manifest.json")).unwrap())
            .unwrap();
    let echoes = m["summary"]["echoes"].as_array().unwrap();
    let second = |k: usize| echoes[k]["echo_delays_s"][1].as_f64().unwrap();
    assert!((second(1) - second(0) - 440e-9).abs() < 1e-9);

    let out = combmem(&["optimize", "--config", c, "--out", "opt"], tmp.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("opt/manifest.json")).unwrap())
            .unwrap();
    let best = m["summary"]["best_params"]["delta_hz"].as_f64().unwrap();
    let matched = std::f64::consts::PI * 0.55e6 / 2.0;
    assert!((best / matched - 1.0).abs() < 0.15, "{best}");
}
