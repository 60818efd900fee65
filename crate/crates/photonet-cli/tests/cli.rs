//! End-to-end tests of the `photonet` binary: scenario configs, exit
//! codes, output files, and reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn photonet(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_photonet"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

#[test]
fn steady_state_summary_carries_the_intensity_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "steady.toml",
        r#"
version = 1
out_dir = "out"

[scenario.steady-state]
drive_amplitude = 1.0

[scenario.steady-state.rates]
kappa_perp_ghz = 455.0
kappa_par_ghz = 283.0
kappa_w_ghz = 322.0
"#,
    );
    let out = photonet(&["run", &config], dir.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("intensity_ratio=0.125"), "summary: {text}");
    let csv = fs::read_to_string(dir.path().join("out/steady_state.csv")).unwrap();
    assert!(csv.starts_with("# photonet v"));
    assert!(csv.contains("# config_hash="));
    assert!(csv.contains("mode,re,im,intensity"));
}

#[test]
fn g2_without_background_reports_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "g2.toml",
        r#"
version = 1
master_seed = 11
out_dir = "out"

[scenario.g2]
n_pulses = 30000

[scenario.g2.emission]
lifetime_ps = 116.0
rise_ps = 23.0
"#,
    );
    let out = photonet(&["run", &config], dir.path());
    assert!(out.status.success());
    assert!(stdout(&out).contains("g2_zero=0.000"), "summary: {}", stdout(&out));
    assert!(dir.path().join("out/g2_histogram.csv").exists());
}

#[test]
fn identical_seeds_give_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "g2.toml",
        r#"
version = 1
master_seed = 99

[scenario.g2]
n_pulses = 5000
write_record = true

[scenario.g2.emission]
lifetime_ps = 116.0

[scenario.g2.background]
mean_photons_per_pulse = 0.4
dark_rate_hz = 2000.0
"#,
    );
    let a = photonet(&["run", &config, "--out-dir", "a"], dir.path());
    let b = photonet(&["run", &config, "--out-dir", "b"], dir.path());
    assert!(a.status.success() && b.status.success());
    for name in ["g2_histogram.csv", "g2_record.csv"] {
        let fa = fs::read(dir.path().join("a").join(name)).unwrap();
        let fb = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(fa, fb, "{name} differs between identical runs");
    }
    // A different seed changes the record.
    let c = photonet(&["run", &config, "--out-dir", "c", "--seed", "100"], dir.path());
    assert!(c.status.success());
    let fa = fs::read(dir.path().join("a/g2_record.csv")).unwrap();
    let fc = fs::read(dir.path().join("c/g2_record.csv")).unwrap();
    assert_ne!(fa, fc);
}

#[test]
fn malformed_config_exits_2_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bad.toml",
        r#"
version = 1

[scenario.steady-state]
drive_amplitud = 1.0

[scenario.steady-state.rates]
preset = "system1"
"#,
    );
    let out = photonet(&["run", &config], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("drive_amplitud"), "stderr: {err}");
}

#[test]
fn missing_scenario_table_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "empty.toml", "version = 1\n");
    let out = photonet(&["run", &config], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stochastic_scenario_without_seed_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "g2.toml",
        r#"
version = 1

[scenario.g2]
n_pulses = 1000

[scenario.g2.emission]
lifetime_ps = 116.0
"#,
    );
    let out = photonet(&["run", &config], dir.path());
    assert_eq!(out.status.code(), Some(2));
    // The --seed flag satisfies the requirement.
    let out = photonet(&["run", &config, "--seed", "5"], dir.path());
    assert!(out.status.success());
}

#[test]
fn short_histogram_window_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "g2.toml",
        r#"
version = 1
master_seed = 4

[scenario.g2]
n_pulses = 2000
window_ns = 10.0

[scenario.g2.emission]
lifetime_ps = 116.0
"#,
    );
    let out = photonet(&["run", &config], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("side peaks"));
}

#[test]
fn hom_scenario_recovers_the_injected_overlap() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "hom.toml",
        r#"
version = 1
master_seed = 21
out_dir = "out"

[scenario.hom]
overlap = 0.67
visibility = 0.88
n_reps = 200000

[scenario.hom.emission]
lifetime_ps = 116.0
rise_ps = 23.0
"#,
    );
    let out = photonet(&["run", &config], dir.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let est: f64 = text
        .split("overlap_est=")
        .nth(1)
        .and_then(|s| s.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((est - 0.67).abs() < 0.05, "summary: {text}");
    let report = fs::read_to_string(dir.path().join("out/hom_report.txt")).unwrap();
    assert!(report.contains("visibility correction"));
    assert!(report.contains("multiphoton correction"));
}

#[test]
fn fit_scenario_recovers_synthesized_rates() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "fit.toml",
        r#"
version = 1
out_dir = "out"

[scenario.fit]

[scenario.fit.synthesize]
configurations = ["SS", "ST", "WG-T"]
noise_sigma = 0.0

[scenario.fit.synthesize.rates]
kappa_perp_ghz = 455.0
kappa_par_ghz = 283.0
kappa_w_ghz = 322.0

[scenario.fit.initial_guess]
kappa_perp_ghz = 600.0
kappa_par_ghz = 200.0
kappa_w_ghz = 250.0
"#,
    );
    let out = photonet(&["run", &config], dir.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("kappa_perp_ghz=455.00"), "summary: {text}");
    assert!(text.contains("converged=true"));
    let report = fs::read_to_string(dir.path().join("out/fit_report.txt")).unwrap();
    assert!(report.contains("implied transfer intensity ratio: 0.1249"), "report:\n{report}");
    // The exported spectra can be fitted again from disk.
    let refit = write_config(
        dir.path(),
        "refit.toml",
        r#"
version = 1
out_dir = "out2"

[scenario.fit]
input = "out/spectra.csv"

[scenario.fit.initial_guess]
preset = "system1"
"#,
    );
    let out = photonet(&["run", &refit], dir.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("kappa_perp_ghz=455.00"));
}

#[test]
fn drop_filter_scenario_writes_curves() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "drop.toml",
        r#"
version = 1
out_dir = "out"

[scenario.drop-filter]
bandwidth_ghz = 8000.0

[scenario.drop-filter.rates]
preset = "system1"
"#,
    );
    let out = photonet(&["run", &config], dir.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("fraction_target="));
    let csv = fs::read_to_string(dir.path().join("out/drop_filter.csv")).unwrap();
    assert!(csv.contains("detuning_ghz,target_flux,source_flux,waveguide_flux"));
}

#[test]
fn long_format_unpivots_scenario_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "evolve.toml",
        r#"
version = 1
out_dir = "out"

[scenario.evolve]
t_end_ns = 0.02

[scenario.evolve.rates]
preset = "system1"

[scenario.evolve.initial]
source = 1.0

[scenario.evolve.drive]
kind = "none"
"#,
    );
    let out = photonet(&["run", &config, "--format", "long"], dir.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    assert!(csv.contains("time_ns,series,value"));
    assert!(csv.contains(",intensity_s,"));
}

#[test]
fn exciton_scenario_reports_decay_and_regime() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "exciton.toml",
        r#"
version = 1
out_dir = "out"

[scenario.exciton]
model = "single-mode"
t_end_ns = 0.4

[scenario.exciton.rates]
preset = "system1"

[scenario.exciton.emitter]
preset = "system1"
"#,
    );
    let out = photonet(&["run", &config], dir.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("regime=weak"), "summary: {text}");
    let decay: f64 = text
        .split("decay_rate_ghz=")
        .nth(1)
        .and_then(|s| s.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((decay - 12.5).abs() / 12.5 < 0.25, "decay {decay}");
}

#[test]
fn preset_subcommands_list_and_show() {
    let dir = tempfile::tempdir().unwrap();
    let list = photonet(&["preset", "list"], dir.path());
    assert!(list.status.success());
    let text = stdout(&list);
    for name in ["system1", "best_observed", "theoretical"] {
        assert!(text.contains(name), "list output: {text}");
    }
    let show = photonet(&["preset", "show", "system1"], dir.path());
    assert!(show.status.success());
    assert!(stdout(&show).contains("kappa_w_ghz = 322.0"));
    let missing = photonet(&["preset", "show", "system9"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn preset_report_scenario_writes_toml_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "presets.toml.cfg",
        r#"
version = 1
out_dir = "out"

[scenario.preset-report]
"#,
    );
    let out = photonet(&["run", &config], dir.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc = fs::read_to_string(dir.path().join("out/presets.toml")).unwrap();
    assert!(doc.contains("schema_version = 1"));
    let report = fs::read_to_string(dir.path().join("out/preset_report.txt")).unwrap();
    assert!(report.contains("transfer ratio:         0.1376"), "report:\n{report}");
    assert!(report.contains("coupling regime:        strong"));
}

#[test]
fn reproduce_paper_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = photonet(&["reproduce-paper", "--out-dir", "rep"], dir.path());
    let text = stdout(&out);
    assert!(out.status.success(), "table:\n{text}");
    assert!(text.contains("PASS"));
    assert!(!text.contains("FAIL"));
    assert!(text.contains("transfer intensity ratio (closed)"));
    assert!(text.contains("calibrated g2(0)"));
    let report = fs::read_to_string(dir.path().join("rep/reproduce_paper.txt")).unwrap();
    assert!(report.contains("0 failed"));
}

#[test]
fn exported_record_can_be_reanalyzed() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "g2.toml",
        r#"
version = 1
master_seed = 77

[scenario.g2]
n_pulses = 20000
write_record = true

[scenario.g2.emission]
lifetime_ps = 116.0

[scenario.g2.background]
mean_photons_per_pulse = 0.25
"#,
    );
    let first = photonet(&["run", &config, "--out-dir", "sim"], dir.path());
    assert!(first.status.success());
    let g2_line = stdout(&first);
    let reanalyze = write_config(
        dir.path(),
        "reanalyze.toml",
        r#"
version = 1

[scenario.g2]
input_record = "sim/g2_record.csv"
"#,
    );
    let second = photonet(&["run", &reanalyze, "--out-dir", "ana"], dir.path());
    assert!(second.status.success(), "stderr: {}", String::from_utf8_lossy(&second.stderr));
    let first_g2 = g2_line.split("g2_zero=").nth(1).unwrap().split(' ').next().unwrap();
    let second_g2 = stdout(&second);
    assert!(
        second_g2.contains(&format!("g2_zero={first_g2}")),
        "first: {g2_line}, second: {second_g2}"
    );
}

#[test]
fn calibrated_g2_scenario_hits_the_target() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "cal.toml",
        r#"
version = 1
master_seed = 31

[scenario.g2]
n_pulses = 120000

[scenario.g2.emission]
lifetime_ps = 116.0
rise_ps = 23.0

[scenario.g2.background]
calibrate_target_g2 = 0.35
"#,
    );
    let out = photonet(&["run", &config], dir.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let g2: f64 = text
        .split("g2_zero=")
        .nth(1)
        .and_then(|s| s.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((g2 - 0.35).abs() < 0.03, "summary: {text}");
    assert!(text.contains("calibrated_mean="));
}
