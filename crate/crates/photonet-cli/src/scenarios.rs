//! Scenario execution: resolve a configuration into core calls, write the
//! declared outputs, and produce the one-line summary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use photonet_core::counting::{
    calibrate_background, correlate, g2_zero, simulate_hbt, DetectionRecord, DetectorModel,
    PulseTrainSpec,
};
use photonet_core::dynamics::{
    evolve, steady_state, transfer_ratio, DriveTerm, Mode, NetworkState, Trajectory,
};
use photonet_core::emitter::{
    classify_regime, evolve_coupled, evolve_jaynes_cummings, fit_exponential_decay,
    purcell_measured, beta_factor, ExcitonState,
};
use photonet_core::fitting::{
    auto_grid, drop_filter_response, fit_rates_with, synthesize_spectra, FitOptions,
    SpectrumConfig, SpectrumSet,
};
use photonet_core::hom::{estimate_overlap, extract_cluster, simulate_hom, InterferometerSpec};
use photonet_core::network::load_preset;
use photonet_core::rng::subseed;
use photonet_core::Complex64;

use crate::config::{
    detunings_or_matched, ConfigFile, DropFilterParams, EvolveParams, ExcitonModel,
    ExcitonParams, FitParams, G2Params, HomParams, LoadedConfig, PresetReportParams, Scenario,
    SteadyStateParams,
};
use crate::output::{read_spectra, FileStamp, OutputFormat, OutputWriter};
use crate::{presets, CliError, CliResult};

/// Cap on trajectory rows written to disk; longer runs are strided.
const MAX_TRAJECTORY_ROWS: usize = 200_000;

pub struct RunOutcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

pub fn run(
    loaded: &LoadedConfig,
    seed_override: Option<u64>,
    out_dir_override: Option<&Path>,
    format: OutputFormat,
) -> CliResult<RunOutcome> {
    let file: &ConfigFile = &loaded.file;
    let seed = seed_override.or(file.master_seed);
    if file.scenario.needs_seed() && seed.is_none() {
        return Err(CliError::validation(format!(
            "scenario '{}' is stochastic and needs a master_seed (config) or --seed",
            file.scenario.kind()
        )));
    }
    let default_dir = PathBuf::from("photonet-out");
    let out_dir = out_dir_override
        .map(Path::to_path_buf)
        .or_else(|| file.out_dir.clone())
        .unwrap_or(default_dir);
    let stamp = FileStamp { config_hash: loaded.hash.clone(), seed };
    let mut writer = OutputWriter::new(&out_dir, stamp, format)?;

    let summary = match &file.scenario {
        Scenario::SteadyState(p) => run_steady_state(p, &mut writer)?,
        Scenario::Evolve(p) => run_evolve(p, &mut writer)?,
        Scenario::Exciton(p) => run_exciton(p, &mut writer)?,
        Scenario::G2(p) => run_g2(p, seed.unwrap_or(0), &mut writer)?,
        Scenario::Hom(p) => run_hom(p, seed.unwrap_or(0), &mut writer)?,
        Scenario::Fit(p) => run_fit(p, seed.unwrap_or(0), &mut writer)?,
        Scenario::DropFilter(p) => run_drop_filter(p, &mut writer)?,
        Scenario::PresetReport(p) => run_preset_report(p, &mut writer)?,
    };
    Ok(RunOutcome { summary, files: writer.written_files().to_vec() })
}

fn fmt(v: f64) -> String {
    v.to_string()
}

fn run_steady_state(p: &SteadyStateParams, writer: &mut OutputWriter) -> CliResult<String> {
    let rates = p.rates.resolve()?;
    let det = detunings_or_matched(&p.detunings)?;
    let drive = DriveTerm::constant(p.drive_amplitude.unwrap_or(1.0));
    let state = steady_state(&rates, &det, &drive)?;
    let rows: Vec<Vec<String>> = [
        (Mode::Source, state.c_s),
        (Mode::Target, state.c_t),
        (Mode::Waveguide, state.c_w),
    ]
    .iter()
    .map(|(mode, amp)| {
        vec![mode.as_str().to_string(), fmt(amp.re), fmt(amp.im), fmt(amp.norm_sqr())]
    })
    .collect();
    writer.write_table("steady_state.csv", &["mode", "re", "im", "intensity"], &rows)?;
    let intensity_ratio = state.c_t.norm_sqr() / state.c_s.norm_sqr();
    let closed_form = transfer_ratio(&rates).map(|t| t.intensity_ratio);
    let mut summary = format!(
        "steady-state: intensity_ratio={intensity_ratio:.3} source_intensity={:.4e} target_intensity={:.4e}",
        state.c_s.norm_sqr(),
        state.c_t.norm_sqr()
    );
    if let Ok(cf) = closed_form {
        let _ = write!(summary, " closed_form_ratio={cf:.3}");
    }
    Ok(summary)
}

fn trajectory_rows(traj: &Trajectory) -> Vec<Vec<String>> {
    let stride = (traj.times.len() / MAX_TRAJECTORY_ROWS).max(1);
    let mut rows = Vec::new();
    for i in (0..traj.times.len()).step_by(stride) {
        let s = &traj.states[i];
        let c = &traj.channels[i];
        rows.push(vec![
            fmt(traj.times[i]),
            fmt(s.c_s.re),
            fmt(s.c_s.im),
            fmt(s.c_s.norm_sqr()),
            fmt(s.c_t.re),
            fmt(s.c_t.im),
            fmt(s.c_t.norm_sqr()),
            fmt(s.c_w.re),
            fmt(s.c_w.im),
            fmt(s.c_w.norm_sqr()),
            fmt(c.vertical_source),
            fmt(c.vertical_target),
            fmt(c.material),
            fmt(c.waveguide),
        ]);
    }
    rows
}

const TRAJECTORY_COLUMNS: [&str; 14] = [
    "time_ns",
    "re_cs",
    "im_cs",
    "intensity_s",
    "re_ct",
    "im_ct",
    "intensity_t",
    "re_cw",
    "im_cw",
    "intensity_w",
    "emitted_vertical_s",
    "emitted_vertical_t",
    "emitted_material",
    "emitted_waveguide",
];

fn run_evolve(p: &EvolveParams, writer: &mut OutputWriter) -> CliResult<String> {
    let rates = p.rates.resolve()?;
    let det = detunings_or_matched(&p.detunings)?;
    let drive = p
        .drive
        .as_ref()
        .map_or(Ok(DriveTerm::constant(1.0)), |d| d.resolve())?;
    let init = p.initial.unwrap_or_default();
    let initial = NetworkState::new(
        Complex64::new(init.source, 0.0),
        Complex64::new(init.target, 0.0),
        Complex64::new(init.waveguide, 0.0),
        0.0,
    );
    let max_rate = rates.max_rate().max(1e-9);
    let dt = p.dt_ns.unwrap_or(0.04 / max_rate);
    let traj = evolve(&initial, &rates, &det, &drive, p.t_end_ns, dt)?;
    writer.write_table("trajectory.csv", &TRAJECTORY_COLUMNS, &trajectory_rows(&traj))?;
    let fin = traj.final_state();
    let emitted = traj.final_channels().total();
    Ok(format!(
        "evolve: t_end_ns={} steps={} final_intensity={:.4e} emitted_total={:.4e}",
        p.t_end_ns,
        traj.times.len() - 1,
        fin.total_intensity(),
        emitted
    ))
}

fn run_exciton(p: &ExcitonParams, writer: &mut OutputWriter) -> CliResult<String> {
    let rates = p.rates.resolve()?;
    let spec = p.emitter.resolve()?;
    let det = detunings_or_matched(&p.detunings)?;
    let model = p.model.unwrap_or(ExcitonModel::Network);
    let max_rate = rates
        .max_rate()
        .max(spec.g0)
        .max(spec.leaky_rate())
        .max(1e-9);
    let dt = p.dt_ns.unwrap_or(0.04 / max_rate);
    let traj = match model {
        ExcitonModel::Network => evolve_coupled(
            &spec,
            &rates,
            &det,
            &ExcitonState::excited(),
            p.t_end_ns,
            dt,
        )?,
        ExcitonModel::SingleMode => {
            evolve_jaynes_cummings(&spec, rates.total_cavity_decay(), p.t_end_ns, dt)?
        }
    };
    let stride = (traj.times.len() / MAX_TRAJECTORY_ROWS).max(1);
    let mut rows = Vec::new();
    for i in (0..traj.times.len()).step_by(stride) {
        let s = &traj.states[i];
        let c = &traj.channels[i];
        rows.push(vec![
            fmt(traj.times[i]),
            fmt(traj.exciton[i].norm_sqr()),
            fmt(traj.exciton[i].re),
            fmt(traj.exciton[i].im),
            fmt(s.c_s.norm_sqr()),
            fmt(s.c_t.norm_sqr()),
            fmt(s.c_w.norm_sqr()),
            fmt(c.emitter_leak),
            fmt(c.vertical_source + c.vertical_target + c.material + c.waveguide),
            fmt(traj.excitation_number(i)),
        ]);
    }
    writer.write_table(
        "exciton.csv",
        &[
            "time_ns",
            "excited_population",
            "re_e",
            "im_e",
            "intensity_s",
            "intensity_t",
            "intensity_w",
            "emitted_leak",
            "emitted_photonic",
            "excitation_total",
        ],
        &rows,
    )?;
    let regime = classify_regime(&spec, &rates);
    let window = p.fit_window_ns.unwrap_or([0.1 * p.t_end_ns, 0.9 * p.t_end_ns]);
    let pop = traj.excited_population();
    let decay = fit_exponential_decay(&traj.times, &pop, window[0], window[1]);
    let oracle = 4.0 * spec.g0 * spec.g0 / rates.total_cavity_decay();
    let mut summary = format!("exciton: regime={} weak_limit_ghz={oracle:.3}", regime.as_str());
    match decay {
        Ok(rate) => {
            let _ = write!(summary, " decay_rate_ghz={rate:.3}");
        }
        Err(_) => {
            let _ = write!(summary, " decay_rate_ghz=unavailable");
        }
    }
    Ok(summary)
}

fn record_rows(record: &DetectionRecord) -> Vec<Vec<String>> {
    record
        .events()
        .iter()
        .map(|e| vec![fmt(e.time_ns), e.detector.as_str().to_string()])
        .collect()
}

fn run_g2(p: &G2Params, seed: u64, writer: &mut OutputWriter) -> CliResult<String> {
    let rep = p.rep_period_ns.unwrap_or(13.0);
    let detector = DetectorModel::default();
    let mut calibrated = None;
    let mut background_note = None;
    let record = match &p.input_record {
        Some(path) => {
            if p.emission.is_some() || p.n_pulses.is_some() {
                return Err(CliError::validation(
                    "g2: input_record and simulation parameters are mutually exclusive",
                ));
            }
            crate::output::read_record(path)?
        }
        None => {
            let emission = p
                .emission
                .as_ref()
                .ok_or_else(|| CliError::validation("g2: emission block or input_record required"))?
                .resolve()?;
            let n_pulses = p
                .n_pulses
                .ok_or_else(|| CliError::validation("g2: n_pulses or input_record required"))?;
            let bg_cfg = p.background.unwrap_or_default();
            let mut bg = bg_cfg.resolve()?;
            let train = PulseTrainSpec::single(rep, n_pulses, p.excitation_prob.unwrap_or(1.0))?;
            if let Some(target) = bg_cfg.calibrate_target_g2 {
                let cal_train =
                    PulseTrainSpec::single(rep, n_pulses.min(150_000), train.excitation_prob)?;
                let level = calibrate_background(
                    target,
                    &cal_train,
                    &emission,
                    &bg,
                    &detector,
                    p.bin_width_ns.unwrap_or(0.2),
                    subseed(seed, 0xCA11),
                )?;
                bg = bg.with_mean(level);
                calibrated = Some(level);
            }
            background_note = Some(bg.effective_mean());
            simulate_hbt(&train, &emission, &bg, &detector, seed)
        }
    };
    let bin = p.bin_width_ns.unwrap_or(0.2);
    let window = p.window_ns.unwrap_or(3.5 * rep);
    let hist = correlate(&record, bin, window)?;
    let est = g2_zero(&hist, rep)?;

    let rows: Vec<Vec<String>> = hist
        .delays()
        .iter()
        .zip(hist.counts())
        .map(|(d, c)| vec![fmt(*d), c.to_string()])
        .collect();
    writer.write_table("g2_histogram.csv", &["delay_ns", "counts"], &rows)?;
    if p.write_record {
        writer.write_table("g2_record.csv", &["time_ns", "detector"], &record_rows(&record))?;
    }
    let mut summary = format!(
        "g2: g2_zero={:.3} stderr={:.3} events={}",
        est.value,
        est.stderr,
        record.len(),
    );
    if let Some(mean) = background_note {
        let _ = write!(summary, " background_mean={mean:.4}");
    }
    if let Some(level) = calibrated {
        let _ = write!(summary, " calibrated_mean={level:.4}");
    }
    Ok(summary)
}

fn run_hom(p: &HomParams, seed: u64, writer: &mut OutputWriter) -> CliResult<String> {
    let emission = p.emission.resolve()?;
    let bg = p.background.unwrap_or_default().resolve()?;
    let delay = p.path_delay_ns.unwrap_or(2.3);
    let spec = InterferometerSpec::new(
        delay,
        p.visibility.unwrap_or(0.88),
        p.splitter_ratio.unwrap_or(0.5),
        p.dark_fraction.unwrap_or(0.0),
    )?;
    let rep = p.rep_period_ns.unwrap_or(13.0);
    let train = PulseTrainSpec::new(rep, delay, p.n_reps, 1.0)?;
    let detector = DetectorModel::default();
    let record = simulate_hom(&train, &emission, p.overlap, &spec, &bg, &detector, seed)?;
    let bin = p.bin_width_ns.unwrap_or(0.1);
    let hist = correlate(&record, bin, 3.5 * delay)?;
    let cluster = extract_cluster(&hist, &spec)?;
    let correction = p.g2_correction.unwrap_or(0.0);
    let est = estimate_overlap(&cluster, &spec, correction)?;

    let rows: Vec<Vec<String>> = hist
        .delays()
        .iter()
        .zip(hist.counts())
        .map(|(d, c)| vec![fmt(*d), c.to_string()])
        .collect();
    writer.write_table("hom_histogram.csv", &["delay_ns", "counts"], &rows)?;
    let cluster_rows: Vec<Vec<String>> = (0..5)
        .map(|i| vec![fmt(cluster.delays[i]), fmt(cluster.areas[i]), fmt(cluster.stderr[i])])
        .collect();
    writer.write_table("hom_cluster.csv", &["delay_ns", "area", "stderr"], &cluster_rows)?;
    if p.write_record {
        writer.write_table("hom_record.csv", &["time_ns", "detector"], &record_rows(&record))?;
    }

    let ratio = cluster.central_ratio();
    let v_sq = spec.visibility * spec.visibility;
    let mut report = String::new();
    let _ = writeln!(report, "Hong-Ou-Mandel mean wavepacket overlap estimate");
    let _ = writeln!(report, "repetitions:            {}", p.n_reps);
    let _ = writeln!(report, "injected overlap:       {}", p.overlap);
    for i in 0..5 {
        let _ = writeln!(
            report,
            "peak at {:>6.2} ns:       area {:.1} ± {:.1}",
            cluster.delays[i], cluster.areas[i], cluster.stderr[i]
        );
    }
    let _ = writeln!(report, "central/side ratio:     {ratio:.6}");
    let _ = writeln!(report, "visibility correction:  V^2 = {v_sq:.6} (V = {})", spec.visibility);
    let _ = writeln!(report, "multiphoton correction: +{correction:.6}");
    let _ = writeln!(
        report,
        "overlap:                {:.6} ± {:.6} (clamped: {})",
        est.overlap,
        est.stderr,
        if est.clamped { "yes" } else { "no" }
    );
    writer.write_report("hom_report.txt", &report)?;
    Ok(format!(
        "hom: overlap_est={:.3} stderr={:.3} central_ratio={:.4} events={}",
        est.overlap,
        est.stderr,
        ratio,
        record.len()
    ))
}

fn run_fit(p: &FitParams, seed: u64, writer: &mut OutputWriter) -> CliResult<String> {
    let data: SpectrumSet = match (&p.input, &p.synthesize) {
        (Some(path), None) => read_spectra(path)?,
        (None, Some(synth)) => {
            let rates = synth.rates.resolve()?;
            let det = detunings_or_matched(&synth.detunings)?;
            let configs = synth
                .configurations
                .iter()
                .map(|label| Ok(SpectrumConfig::parse(label)?))
                .collect::<CliResult<Vec<_>>>()?;
            let grid = match (synth.grid_half_span_ghz, synth.grid_points) {
                (Some(half), Some(n)) => {
                    if n < 3 {
                        return Err(CliError::validation("synthesize: grid_points must be >= 3"));
                    }
                    let step = 2.0 * half / (n - 1) as f64;
                    (0..n).map(|i| -half + i as f64 * step).collect()
                }
                (None, None) => auto_grid(&rates, &det)?,
                _ => {
                    return Err(CliError::validation(
                        "synthesize: give both grid_half_span_ghz and grid_points, or neither",
                    ))
                }
            };
            synthesize_spectra(&rates, &det, &configs, &grid, synth.noise_sigma, seed)?
        }
        _ => {
            return Err(CliError::validation(
                "fit: exactly one of 'input' or 'synthesize' must be given",
            ))
        }
    };
    let initial = p.initial_guess.resolve()?;
    let opts = FitOptions {
        free_gamma: p.free_gamma,
        fit_detunings: !p.fix_detunings,
        ..Default::default()
    };
    let fit = fit_rates_with(&data, &initial, &opts)?;

    writer.write_spectra("spectra.csv", &data)?;
    let mut report = String::new();
    let _ = writeln!(report, "Coupling-rate fit");
    let _ = writeln!(report, "curves: {}", data
        .curves
        .iter()
        .map(|(c, _)| c.as_str())
        .collect::<Vec<_>>()
        .join(", "));
    let _ = writeln!(report, "points per curve: {}", data.probe.len());
    let _ = writeln!(report, "converged: {}   iterations: {}", fit.converged, fit.iterations);
    let _ = writeln!(report, "residual norm: {:.6e}", fit.residual_norm);
    let _ = writeln!(report, "parameter            value        stderr");
    let _ = writeln!(
        report,
        "kappa_perp_ghz   {:>10.4}    {:>10.4}",
        fit.rates.kappa_perp, fit.stderr_rates[0]
    );
    let _ = writeln!(
        report,
        "kappa_par_ghz    {:>10.4}    {:>10.4}",
        fit.rates.kappa_par, fit.stderr_rates[1]
    );
    let _ = writeln!(
        report,
        "kappa_w_ghz      {:>10.4}    {:>10.4}",
        fit.rates.kappa_w, fit.stderr_rates[2]
    );
    if let Some(se) = fit.stderr_gamma {
        let _ = writeln!(report, "gamma_mat_ghz    {:>10.4}    {:>10.4}", fit.rates.gamma_mat, se);
    }
    if !p.fix_detunings {
        let _ = writeln!(
            report,
            "delta_s_ghz      {:>10.4}    {:>10.4}",
            fit.detunings.delta_s, fit.stderr_detunings[0]
        );
        let _ = writeln!(
            report,
            "delta_t_ghz      {:>10.4}    {:>10.4}",
            fit.detunings.delta_t, fit.stderr_detunings[1]
        );
        let _ = writeln!(
            report,
            "delta_w_ghz      {:>10.4}    {:>10.4}",
            fit.detunings.delta_w, fit.stderr_detunings[2]
        );
    }
    for (i, ((config, _), (scale, se))) in data
        .curves
        .iter()
        .zip(fit.scales.iter().zip(&fit.stderr_scales))
        .enumerate()
    {
        let _ = writeln!(report, "scale[{i}] ({})   {:>10.4e}  {:>10.4e}", config.as_str(), scale, se);
    }
    if let Ok(tr) = transfer_ratio(&fit.rates) {
        let _ = writeln!(report, "implied transfer intensity ratio: {:.4}", tr.intensity_ratio);
    }
    writer.write_report("fit_report.txt", &report)?;

    let summary = format!(
        "fit: kappa_perp_ghz={:.2} kappa_par_ghz={:.2} kappa_w_ghz={:.2} residual={:.3e} converged={}",
        fit.rates.kappa_perp, fit.rates.kappa_par, fit.rates.kappa_w, fit.residual_norm, fit.converged
    );
    if !fit.converged {
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), "{summary}");
        return Err(CliError::runtime(
            "fit did not converge within the iteration budget (report written)",
        ));
    }
    Ok(summary)
}

fn run_drop_filter(p: &DropFilterParams, writer: &mut OutputWriter) -> CliResult<String> {
    let rates = p.rates.resolve()?;
    let det = detunings_or_matched(&p.detunings)?;
    let resp = drop_filter_response(&rates, &det, p.bandwidth_ghz)?;
    let rows: Vec<Vec<String>> = (0..resp.probe.len())
        .map(|i| {
            vec![
                fmt(resp.probe[i]),
                fmt(resp.target_flux[i]),
                fmt(resp.source_flux[i]),
                fmt(resp.waveguide_flux[i]),
            ]
        })
        .collect();
    writer.write_table(
        "drop_filter.csv",
        &["detuning_ghz", "target_flux", "source_flux", "waveguide_flux"],
        &rows,
    )?;
    Ok(format!(
        "drop-filter: fraction_target={:.4e} fraction_waveguide={:.4e} fwhm_target_ghz={}",
        resp.fraction_target,
        resp.fraction_waveguide,
        resp.fwhm_target.map_or_else(|| "n/a".into(), |v| format!("{v:.1}")),
    ))
}

fn run_preset_report(p: &PresetReportParams, writer: &mut OutputWriter) -> CliResult<String> {
    let names: Vec<&str> = match &p.name {
        Some(name) => vec![name.as_str()],
        None => photonet_core::network::PRESET_NAMES.to_vec(),
    };
    let mut report = String::new();
    for name in &names {
        let preset = load_preset(name)?;
        let _ = writeln!(report, "[{}]", preset.name);
        let _ = writeln!(report, "provenance:             {}", preset.provenance.as_str());
        let _ = writeln!(
            report,
            "total cavity decay:     {:.2} GHz (kappa_par/kappa_perp = {:.2})",
            preset.rates.total_cavity_decay(),
            preset.rates.kappa_par / preset.rates.kappa_perp
        );
        if let Ok(budget) = photonet_core::network::loss_budget(&preset.rates) {
            let _ = writeln!(
                report,
                "loss budget:            vertical {:.3}, waveguide {:.3}, material {:.3}",
                budget.vertical, budget.waveguide, budget.material
            );
        }
        if let Ok(tr) = transfer_ratio(&preset.rates) {
            let _ = writeln!(report, "transfer ratio:         {:.4}", tr.intensity_ratio);
        }
        let regime = classify_regime(&preset.emitter, &preset.rates);
        let _ = writeln!(report, "coupling regime:        {}", regime.as_str());
        if preset.emitter.g0 > 0.0 {
            let lifetime = preset.emitter.lifetime_ps();
            if let Ok(f) = purcell_measured(preset.emitter.tau_bulk_ns, lifetime) {
                let beta = beta_factor(f, preset.emitter.f_pc).unwrap_or(f64::NAN);
                let _ = writeln!(
                    report,
                    "SE enhancement:         {f:.1} (lifetime {lifetime:.0} ps vs bulk {} ns), beta = {beta:.3}",
                    preset.emitter.tau_bulk_ns
                );
            }
        }
        if let Some(i) = preset.indistinguishability {
            let _ = writeln!(report, "indistinguishability:   {i}");
        }
        let _ = writeln!(report);
    }
    writer.write_report("preset_report.txt", &report)?;
    let doc = match &p.name {
        Some(name) => presets::show(name)?,
        None => presets::bundled_document()?,
    };
    writer.write_report("presets.toml", &doc)?;
    Ok(format!("preset-report: presets={}", names.len()))
}
