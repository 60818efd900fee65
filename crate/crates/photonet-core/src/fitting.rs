//! Pump/collect spectrum synthesis and coupling-rate extraction.
//!
//! Spectra are steady-state intensity responses of one mode while another
//! is driven by a spectrally flat source, labelled by pump-collect pairs
//! (`SS`, `ST`, `WG-T`, ...). [`fit_rates`] inverts a set of such curves
//! into the coupling rates with bounded, damped least squares (numeric
//! Jacobian), sharing the rates across curves while giving every curve its
//! own free intensity scale.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::dynamics::{frequency_response, Detunings, Mode};
use crate::linalg::solve_real;
use crate::network::CouplingRates;
use crate::rng::{standard_normal, substream};
use crate::{Error, Result};

/// A pump-collect configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SpectrumConfig {
    /// Pump the source cavity, collect from it.
    SS,
    /// Pump the target cavity, collect from it.
    TT,
    /// Pump the source cavity, collect from the target.
    ST,
    /// Pump the target cavity, collect from the source.
    TS,
    /// Pump the waveguide, collect from the target cavity.
    WgT,
    /// Pump the waveguide, collect from its terminus.
    WgWg,
}

impl SpectrumConfig {
    pub const ALL: [SpectrumConfig; 6] = [
        SpectrumConfig::SS,
        SpectrumConfig::TT,
        SpectrumConfig::ST,
        SpectrumConfig::TS,
        SpectrumConfig::WgT,
        SpectrumConfig::WgWg,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SpectrumConfig::SS => "SS",
            SpectrumConfig::TT => "TT",
            SpectrumConfig::ST => "ST",
            SpectrumConfig::TS => "TS",
            SpectrumConfig::WgT => "WG-T",
            SpectrumConfig::WgWg => "WG-WG",
        }
    }

    pub fn parse(label: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.as_str().eq_ignore_ascii_case(label))
            .ok_or(Error::Domain("unknown spectrum configuration label"))
    }

    pub fn pump(&self) -> Mode {
        match self {
            SpectrumConfig::SS | SpectrumConfig::ST => Mode::Source,
            SpectrumConfig::TT | SpectrumConfig::TS => Mode::Target,
            SpectrumConfig::WgT | SpectrumConfig::WgWg => Mode::Waveguide,
        }
    }

    pub fn collect(&self) -> Mode {
        match self {
            SpectrumConfig::SS | SpectrumConfig::TS => Mode::Source,
            SpectrumConfig::TT | SpectrumConfig::ST | SpectrumConfig::WgT => Mode::Target,
            SpectrumConfig::WgWg => Mode::Waveguide,
        }
    }
}

/// Intensity-versus-detuning curves on a shared probe grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSet {
    /// Probe detunings, lab GHz (rad/ns).
    pub probe: Vec<f64>,
    pub curves: Vec<(SpectrumConfig, Vec<f64>)>,
    /// Relative noise level the curves were synthesized or recorded with.
    pub noise_sigma: f64,
}

impl SpectrumSet {
    pub fn curve(&self, config: SpectrumConfig) -> Option<&[f64]> {
        self.curves.iter().find(|(c, _)| *c == config).map(|(_, v)| v.as_slice())
    }

    fn validate(&self) -> Result<()> {
        if self.probe.len() < 2 || self.curves.is_empty() {
            return Err(Error::InsufficientData("spectrum set needs a grid and at least one curve"));
        }
        for (_, curve) in &self.curves {
            if curve.len() != self.probe.len() {
                return Err(Error::Domain("curve length does not match the probe grid"));
            }
            if curve.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Domain("intensities must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Model curves for a set of configurations, grouped by pump so each pump
/// frequency sweep is solved once.
fn model_curves(
    rates: &CouplingRates,
    detunings: &Detunings,
    configs: &[SpectrumConfig],
    probe: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Option<Vec<f64>>> = vec![None; configs.len()];
    for pump in [Mode::Source, Mode::Target, Mode::Waveguide] {
        if !configs.iter().any(|c| c.pump() == pump) {
            continue;
        }
        let resp = frequency_response(rates, detunings, pump, probe)?;
        for (slot, config) in out.iter_mut().zip(configs) {
            if config.pump() == pump {
                *slot = Some(resp.intensities(config.collect()));
            }
        }
    }
    Ok(out.into_iter().map(|c| c.expect("every config has a pump")).collect())
}

/// Symmetric probe grid adapted to a rate set: spans the mode splitting
/// plus several linewidths and resolves the narrowest feature with ≥ 6
/// points (capped at 4001 points).
pub fn auto_grid(rates: &CouplingRates, detunings: &Detunings) -> Result<Vec<f64>> {
    let cav = rates.cavity_damping();
    let narrowest = match (cav > 0.0, rates.kappa_w > 0.0) {
        (true, true) => cav.min(rates.kappa_w),
        (true, false) => cav,
        (false, true) => rates.kappa_w,
        (false, false) => return Err(Error::DegenerateInput("all loss rates are zero")),
    };
    let splitting = (2.0 * rates.kappa_par * rates.kappa_par
        - ((cav - rates.kappa_w) / 2.0).powi(2))
    .max(0.0)
    .sqrt();
    let max_abs_det = detunings
        .delta_s
        .abs()
        .max(detunings.delta_t.abs())
        .max(detunings.delta_w.abs());
    let half_span = 1.6 * splitting + 4.0 * cav.max(rates.kappa_w) + max_abs_det;
    let step = 2.0 * narrowest / 6.0;
    let n_half = ((half_span / step).ceil() as usize).clamp(30, 2000);
    let step = half_span / n_half as f64;
    Ok((-(n_half as i64)..=n_half as i64).map(|i| i as f64 * step).collect())
}

/// Synthesize steady-state spectra for the given configurations, with
/// multiplicative Gaussian noise of relative width `noise_sigma` (clamped
/// at zero intensity). Noise streams are derived per curve, so the output
/// is deterministic per seed and independent of configuration order.
pub fn synthesize_spectra(
    rates: &CouplingRates,
    detunings: &Detunings,
    configs: &[SpectrumConfig],
    probe: &[f64],
    noise_sigma: f64,
    seed: u64,
) -> Result<SpectrumSet> {
    if configs.is_empty() {
        return Err(Error::Domain("need at least one configuration"));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::Domain("noise sigma must be >= 0"));
    }
    let clean = model_curves(rates, detunings, configs, probe)?;
    let mut curves = Vec::with_capacity(configs.len());
    for (config, mut curve) in configs.iter().zip(clean) {
        if noise_sigma > 0.0 {
            let tag = SpectrumConfig::ALL.iter().position(|c| c == config).unwrap() as u64;
            let mut rng = substream(seed, tag);
            for v in &mut curve {
                *v = (*v * (1.0 + noise_sigma * standard_normal(&mut rng))).max(0.0);
            }
        }
        curves.push((*config, curve));
    }
    Ok(SpectrumSet { probe: probe.to_vec(), curves, noise_sigma })
}

/// Options for [`fit_rates_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Fit the three mode detunings alongside the rates.
    pub fit_detunings: bool,
    /// Fit the material loss γ instead of pinning it to zero.
    pub free_gamma: bool,
    pub max_iterations: usize,
    /// Box bounds on every rate, lab GHz.
    pub rate_bounds: (f64, f64),
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            fit_detunings: true,
            free_gamma: false,
            // Shallow κ∥ valleys (κ∥ ≪ κ⊥, κ_W) can take several hundred
            // damped steps; typical fits converge in under ten.
            max_iterations: 2000,
            rate_bounds: (0.0, 1e4),
        }
    }
}

/// Outcome of a spectrum fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub rates: CouplingRates,
    pub detunings: Detunings,
    /// Fitted intensity scale per curve, in input order.
    pub scales: Vec<f64>,
    /// Weighted residual norm at the solution.
    pub residual_norm: f64,
    /// Standard errors of (κ⊥, κ∥, κ_W).
    pub stderr_rates: [f64; 3],
    pub stderr_gamma: Option<f64>,
    pub stderr_detunings: [f64; 3],
    pub stderr_scales: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

struct ParamLayout {
    free_gamma: bool,
    fit_detunings: bool,
    n_curves: usize,
}

impl ParamLayout {
    fn len(&self) -> usize {
        3 + usize::from(self.free_gamma) + if self.fit_detunings { 3 } else { 0 } + self.n_curves
    }

    fn detuning_offset(&self) -> usize {
        3 + usize::from(self.free_gamma)
    }

    fn scale_offset(&self) -> usize {
        self.detuning_offset() + if self.fit_detunings { 3 } else { 0 }
    }

    fn unpack(&self, x: &[f64]) -> (CouplingRates, Detunings, Vec<f64>) {
        let gamma = if self.free_gamma { x[3] } else { 0.0 };
        let rates = CouplingRates {
            kappa_perp: x[0].max(0.0),
            kappa_par: x[1].max(0.0),
            kappa_w: x[2].max(0.0),
            gamma_mat: gamma.max(0.0),
        };
        let det = if self.fit_detunings {
            let o = self.detuning_offset();
            Detunings { delta_s: x[o], delta_t: x[o + 1], delta_w: x[o + 2] }
        } else {
            Detunings::matched()
        };
        let scales = x[self.scale_offset()..].to_vec();
        (rates, det, scales)
    }
}

/// Fit coupling rates to a spectrum set with default options.
pub fn fit_rates(data: &SpectrumSet, initial_guess: &CouplingRates) -> Result<FitResult> {
    fit_rates_with(data, initial_guess, &FitOptions::default())
}

/// Per-curve scale minimizing the weighted misfit for fixed shapes
/// (linear subproblem of the fit, solved exactly).
fn optimal_scale(model: &[f64], data: &[f64], weights: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&m, &d), &w) in model.iter().zip(data).zip(weights) {
        let w2 = w * w;
        num += w2 * m * d;
        den += w2 * m * m;
    }
    if den > 0.0 {
        (num / den).max(0.0)
    } else {
        0.0
    }
}

/// Fit coupling rates, detunings, and per-curve scales to a spectrum set.
///
/// The scale factors are linear in the model and are projected out
/// analytically at every step; the damped least-squares iteration runs
/// over the shape parameters only, which keeps the near-degenerate
/// scale/rate directions out of the normal equations. Joint fits over
/// several configurations constrain the full rate triple; a single-curve
/// fit is accepted but leaves weakly probed rates with correspondingly
/// inflated standard errors. Failure to converge is reported through the
/// `converged` flag, not an error.
pub fn fit_rates_with(
    data: &SpectrumSet,
    initial_guess: &CouplingRates,
    opts: &FitOptions,
) -> Result<FitResult> {
    data.validate()?;
    let configs: Vec<SpectrumConfig> = data.curves.iter().map(|(c, _)| *c).collect();
    let layout = ParamLayout {
        free_gamma: opts.free_gamma,
        fit_detunings: opts.fit_detunings,
        n_curves: configs.len(),
    };
    let n_full = layout.len();
    let n_shape = layout.scale_offset();
    let m: usize = data.curves.iter().map(|(_, c)| c.len()).sum();
    if m <= n_full {
        return Err(Error::InsufficientData("fewer residuals than free parameters"));
    }

    // Relative weights with a floor so empty tails cannot dominate.
    let mut weights: Vec<Vec<f64>> = Vec::with_capacity(configs.len());
    for (_, curve) in &data.curves {
        let peak = curve.iter().cloned().fold(0.0_f64, f64::max);
        if peak <= 0.0 {
            return Err(Error::DegenerateInput("a curve is identically zero"));
        }
        weights.push(curve.iter().map(|v| 1.0 / (v + 1e-3 * peak)).collect());
    }

    let mut x0 = vec![0.0; n_shape];
    x0[0] = initial_guess.kappa_perp;
    x0[1] = initial_guess.kappa_par;
    x0[2] = initial_guess.kappa_w;
    if opts.free_gamma {
        x0[3] = initial_guess.gamma_mat;
    }

    let (lo_rate, hi_rate) = opts.rate_bounds;
    let mut lower = vec![f64::NEG_INFINITY; n_shape];
    let mut upper = vec![f64::INFINITY; n_shape];
    for j in 0..layout.detuning_offset() {
        lower[j] = lo_rate;
        upper[j] = hi_rate;
    }

    // Typical magnitudes for finite-difference steps and convergence tests.
    let rate_scale = initial_guess.max_rate().max(1.0);
    let mut typical = vec![rate_scale; n_shape];
    if opts.fit_detunings {
        let o = layout.detuning_offset();
        typical[o..o + 3].fill(rate_scale * 0.1);
    }

    let scales_for = |rates: &CouplingRates, det: &Detunings| -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let model = model_curves(rates, det, &configs, &data.probe)?;
        let scales = model
            .iter()
            .zip(&data.curves)
            .zip(&weights)
            .map(|((mv, (_, dv)), wv)| optimal_scale(mv, dv, wv))
            .collect();
        Ok((model, scales))
    };

    let shape_layout = ParamLayout { n_curves: 0, ..layout };
    let mut residual_shape = |x: &[f64], out: &mut [f64]| -> Result<()> {
        let (rates, det, _) = shape_layout.unpack(x);
        let (model, scales) = scales_for(&rates, &det)?;
        let mut k = 0;
        for (e, (_, curve)) in data.curves.iter().enumerate() {
            for (i, (&d, &mv)) in curve.iter().zip(&model[e]).enumerate() {
                out[k] = (scales[e] * mv - d) * weights[e][i];
                k += 1;
            }
        }
        Ok(())
    };

    // Acceptance level for the projected fast path: numerical floor for
    // clean data, the expected misfit for data with known relative noise.
    let data_ssq: f64 = data
        .curves
        .iter()
        .zip(&weights)
        .flat_map(|((_, dv), wv)| dv.iter().zip(wv).map(|(&d, &w)| (d * w) * (d * w)))
        .sum();
    let accept_cost = data_ssq * (1e-16_f64).max((2.0 * data.noise_sigma).powi(2));

    // Fast path: projected scales. The transfer curves scale with κ∥², so
    // the projected cost goes flat as κ∥ → 0 and a low start can wander
    // off; a short deterministic multi-start over κ∥ covers that.
    let mut lm: Option<LmOutcome> = None;
    for kappa_par_factor in [1.0, 3.0, 1.0 / 3.0] {
        let mut start = x0.clone();
        start[1] = (x0[1] * kappa_par_factor).clamp(lo_rate, hi_rate);
        let candidate = levenberg_marquardt(
            &mut residual_shape,
            m,
            &start,
            &lower,
            &upper,
            &typical,
            opts.max_iterations,
        )?;
        if lm.as_ref().is_none_or(|best| candidate.cost < best.cost) {
            lm = Some(candidate);
        }
        if lm.as_ref().unwrap().cost <= accept_cost {
            break;
        }
    }
    let mut lm = lm.expect("at least one start");

    // Slow path: when the projected fit stalls above the expected floor
    // (shallow κ∥ basins do that), grind with the scales as explicit
    // parameters, which keeps the search directed through the valley.
    if lm.cost > accept_cost {
        let n = layout.len();
        let mut lower_full = lower.clone();
        let mut upper_full = upper.clone();
        lower_full.resize(n, 1e-12);
        upper_full.resize(n, f64::INFINITY);
        let mut residual_full = |x: &[f64], out: &mut [f64]| -> Result<()> {
            let (rates, det, sc) = layout.unpack(x);
            let model = model_curves(&rates, &det, &configs, &data.probe)?;
            let mut k = 0;
            for (e, (_, curve)) in data.curves.iter().enumerate() {
                for (i, (&d, &mv)) in curve.iter().zip(&model[e]).enumerate() {
                    out[k] = (sc[e] * mv - d) * weights[e][i];
                    k += 1;
                }
            }
            Ok(())
        };
        let mut starts: Vec<Vec<f64>> = Vec::new();
        for kappa_par_factor in [1.0, 3.0, 1.0 / 3.0] {
            let mut s = x0.clone();
            s[1] = (x0[1] * kappa_par_factor).clamp(lo_rate, hi_rate);
            starts.push(s);
        }
        starts.push(lm.params.clone());
        for shape_start in starts {
            let (rates0, det0, _) = shape_layout.unpack(&shape_start);
            let (_, scales0) = scales_for(&rates0, &det0)?;
            let mut start = shape_start.clone();
            start.extend(scales0.iter().map(|s| s.max(1e-9)));
            let mut typical_full = typical.clone();
            typical_full.extend(start[n_shape..].iter().map(|s| s.abs().max(1e-6)));
            let candidate = levenberg_marquardt(
                &mut residual_full,
                m,
                &start,
                &lower_full,
                &upper_full,
                &typical_full,
                opts.max_iterations,
            )?;
            if candidate.cost < lm.cost {
                lm = LmOutcome {
                    params: candidate.params[..n_shape].to_vec(),
                    cost: candidate.cost,
                    converged: candidate.converged,
                    iterations: candidate.iterations,
                };
            }
            if lm.cost <= accept_cost {
                break;
            }
        }
    }

    let (rates, detunings, _) = shape_layout.unpack(&lm.params);
    let (_, scales) = scales_for(&rates, &detunings)?;

    // Covariance over the full parameter set (shapes and scales) at the
    // solution, with the scales now held as ordinary parameters.
    let mut x_full = lm.params.clone();
    x_full.extend_from_slice(&scales);
    let mut lower_full = lower.clone();
    let mut upper_full = upper.clone();
    let mut typical_full = lm.params.iter().zip(&typical).map(|(x, t)| x.abs().max(*t)).collect::<Vec<_>>();
    for &s in &scales {
        lower_full.push(0.0);
        upper_full.push(f64::INFINITY);
        typical_full.push(s.abs().max(1e-6));
    }
    let mut residual_full = |x: &[f64], out: &mut [f64]| -> Result<()> {
        let (rates, det, sc) = layout.unpack(x);
        let model = model_curves(&rates, &det, &configs, &data.probe)?;
        let mut k = 0;
        for (e, (_, curve)) in data.curves.iter().enumerate() {
            for (i, (&d, &mv)) in curve.iter().zip(&model[e]).enumerate() {
                out[k] = (sc[e] * mv - d) * weights[e][i];
                k += 1;
            }
        }
        Ok(())
    };
    let stderr = covariance_stderr(
        &mut residual_full,
        m,
        &x_full,
        &lower_full,
        &upper_full,
        &typical_full,
        lm.cost,
    )?;

    let o = layout.detuning_offset();
    Ok(FitResult {
        rates,
        detunings,
        scales,
        residual_norm: lm.cost.sqrt(),
        stderr_rates: [stderr[0], stderr[1], stderr[2]],
        stderr_gamma: opts.free_gamma.then(|| stderr[3]),
        stderr_detunings: if opts.fit_detunings {
            [stderr[o], stderr[o + 1], stderr[o + 2]]
        } else {
            [0.0; 3]
        },
        stderr_scales: stderr[layout.scale_offset()..].to_vec(),
        converged: lm.converged,
        iterations: lm.iterations,
    })
}

struct LmOutcome {
    params: Vec<f64>,
    cost: f64,
    converged: bool,
    iterations: usize,
}

/// Residual evaluator: fills `out` with the weighted residual vector.
type ResidualFn<'a> = &'a mut dyn FnMut(&[f64], &mut [f64]) -> Result<()>;

/// Damped least squares with numeric Jacobian and box projection.
fn levenberg_marquardt(
    residual: ResidualFn<'_>,
    m: usize,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    typical: &[f64],
    max_iterations: usize,
) -> Result<LmOutcome> {
    const REL_STEP_TOL: f64 = 1e-8;
    const COST_TOL: f64 = 1e-14;
    const JAC_REL_STEP: f64 = 1e-6;

    let n = x0.len();
    let clamp = |x: &mut [f64]| {
        for j in 0..n {
            x[j] = x[j].clamp(lower[j], upper[j]);
        }
    };
    let mut x = x0.to_vec();
    clamp(&mut x);
    let mut r = vec![0.0; m];
    residual(&x, &mut r)?;
    let mut cost: f64 = r.iter().map(|v| v * v).sum();

    let mut jac = vec![0.0; m * n];
    let mut r_plus = vec![0.0; m];
    let mut r_minus = vec![0.0; m];
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..max_iterations {
        iterations += 1;
        // Numeric Jacobian, central where bounds allow.
        for j in 0..n {
            let h = JAC_REL_STEP * x[j].abs().max(typical[j]);
            let can_minus = x[j] - h >= lower[j];
            let can_plus = x[j] + h <= upper[j];
            let mut xp = x.clone();
            let mut xm = x.clone();
            match (can_plus, can_minus) {
                (true, true) => {
                    xp[j] += h;
                    xm[j] -= h;
                    residual(&xp, &mut r_plus)?;
                    residual(&xm, &mut r_minus)?;
                    for i in 0..m {
                        jac[i * n + j] = (r_plus[i] - r_minus[i]) / (2.0 * h);
                    }
                }
                (true, false) => {
                    xp[j] += h;
                    residual(&xp, &mut r_plus)?;
                    for i in 0..m {
                        jac[i * n + j] = (r_plus[i] - r[i]) / h;
                    }
                }
                (false, true) => {
                    xm[j] -= h;
                    residual(&xm, &mut r_minus)?;
                    for i in 0..m {
                        jac[i * n + j] = (r[i] - r_minus[i]) / h;
                    }
                }
                (false, false) => {
                    for i in 0..m {
                        jac[i * n + j] = 0.0;
                    }
                }
            }
        }
        // Normal equations.
        let mut jtj = vec![0.0; n * n];
        let mut jtr = vec![0.0; n];
        for i in 0..m {
            let row = &jac[i * n..(i + 1) * n];
            for a in 0..n {
                jtr[a] += row[a] * r[i];
                for b in a..n {
                    jtj[a * n + b] += row[a] * row[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                jtj[a * n + b] = jtj[b * n + a];
            }
        }
        let max_diag = (0..n).map(|j| jtj[j * n + j]).fold(0.0_f64, f64::max);
        if max_diag == 0.0 {
            converged = true; // flat residual surface
            break;
        }

        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj.clone();
            for j in 0..n {
                let d = jtj[j * n + j].max(1e-10 * max_diag);
                a[j * n + j] += lambda * d;
            }
            let mut b: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let delta = match solve_real(n, &mut a, &mut b) {
                Ok(d) => d,
                Err(_) => {
                    lambda *= 8.0;
                    continue;
                }
            };
            // Step bound: no parameter moves by more than half its own
            // magnitude per iteration, so narrow basins are not jumped.
            let mut shrink = 1.0_f64;
            for j in 0..n {
                let cap = 0.5 * x[j].abs().max(1e-3 * typical[j]);
                if delta[j].abs() > cap {
                    shrink = shrink.min(cap / delta[j].abs());
                }
            }
            let mut x_new = x.clone();
            for j in 0..n {
                x_new[j] += delta[j] * shrink;
            }
            clamp(&mut x_new);
            let mut r_new = vec![0.0; m];
            residual(&x_new, &mut r_new)?;
            let cost_new: f64 = r_new.iter().map(|v| v * v).sum();
            if cost_new < cost {
                let rel_step = (0..n)
                    .map(|j| (x_new[j] - x[j]).abs() / x[j].abs().max(typical[j]))
                    .fold(0.0_f64, f64::max);
                let cost_drop = cost - cost_new;
                x = x_new;
                r = r_new;
                cost = cost_new;
                lambda = (lambda / 4.0).max(1e-12);
                improved = true;
                if rel_step < REL_STEP_TOL || cost_drop <= COST_TOL * cost.max(1e-300) {
                    converged = true;
                }
                break;
            }
            lambda *= 8.0;
        }
        if !improved {
            // Damping exhausted without a downhill step: stationary point.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    Ok(LmOutcome { params: x, cost, converged, iterations })
}

/// Standard errors from the ridge-stabilized normal equations at a
/// solution: `sigma² diag((JᵀJ)⁻¹)` with `sigma² = cost / (m − n)`.
/// Unresolvable directions come back as infinite.
fn covariance_stderr(
    residual: ResidualFn<'_>,
    m: usize,
    x: &[f64],
    lower: &[f64],
    upper: &[f64],
    typical: &[f64],
    cost: f64,
) -> Result<Vec<f64>> {
    const JAC_REL_STEP: f64 = 1e-6;
    let n = x.len();
    let mut r0 = vec![0.0; m];
    residual(x, &mut r0)?;
    let mut jac = vec![0.0; m * n];
    let mut r_plus = vec![0.0; m];
    let mut r_minus = vec![0.0; m];
    for j in 0..n {
        let h = JAC_REL_STEP * x[j].abs().max(typical[j]);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        let central = x[j] - h >= lower[j] && x[j] + h <= upper[j];
        let (rp, rm, denom): (&[f64], &[f64], f64) = if central {
            xp[j] += h;
            xm[j] -= h;
            residual(&xp, &mut r_plus)?;
            residual(&xm, &mut r_minus)?;
            (&r_plus, &r_minus, 2.0 * h)
        } else if x[j] + h <= upper[j] {
            xp[j] += h;
            residual(&xp, &mut r_plus)?;
            (&r_plus, &r0, h)
        } else {
            xm[j] -= h;
            residual(&xm, &mut r_minus)?;
            (&r0, &r_minus, h)
        };
        for i in 0..m {
            jac[i * n + j] = (rp[i] - rm[i]) / denom;
        }
    }
    let mut jtj = vec![0.0; n * n];
    for i in 0..m {
        let row = &jac[i * n..(i + 1) * n];
        for a in 0..n {
            for b in a..n {
                jtj[a * n + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            jtj[a * n + b] = jtj[b * n + a];
        }
    }
    let dof = m.saturating_sub(n).max(1) as f64;
    let sigma_sq = cost / dof;
    let max_diag = (0..n).map(|j| jtj[j * n + j]).fold(0.0_f64, f64::max).max(1e-300);
    let ridge = 1e-12 * max_diag;
    let mut stderr = vec![0.0; n];
    for j in 0..n {
        // Solve (JᵀJ + ridge) y = e_j to extract one inverse diagonal.
        let mut a = jtj.clone();
        for k in 0..n {
            a[k * n + k] += ridge;
        }
        let mut b = vec![0.0; n];
        b[j] = 1.0;
        match solve_real(n, &mut a, &mut b) {
            Ok(col) => stderr[j] = (sigma_sq * col[j].max(0.0)).sqrt(),
            Err(_) => stderr[j] = f64::INFINITY,
        }
    }
    Ok(stderr)
}

/// Full width at half maximum of a sampled curve (outermost half-max
/// crossings, linearly interpolated).
pub(crate) fn full_width_half_max(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return None;
    }
    let peak = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return None;
    }
    let half = peak / 2.0;
    let mut left = None;
    for i in 1..x.len() {
        if y[i - 1] < half && y[i] >= half {
            let t = (half - y[i - 1]) / (y[i] - y[i - 1]);
            left = Some(x[i - 1] + t * (x[i] - x[i - 1]));
            break;
        }
    }
    let mut right = None;
    for i in (1..x.len()).rev() {
        if y[i] < half && y[i - 1] >= half {
            let t = (half - y[i]) / (y[i - 1] - y[i]);
            right = Some(x[i] - t * (x[i] - x[i - 1]));
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) if r > l => Some(r - l),
        _ => None,
    }
}

/// Drop-filter analysis of a flat broadband source pumping the waveguide.
#[derive(Debug, Clone, PartialEq)]
pub struct DropFilterResponse {
    /// Probe detunings, lab GHz.
    pub probe: Vec<f64>,
    /// Vertical emission flux of the target cavity per unit drive.
    pub target_flux: Vec<f64>,
    /// Vertical emission flux of the source cavity.
    pub source_flux: Vec<f64>,
    /// Flux leaving through the waveguide terminus.
    pub waveguide_flux: Vec<f64>,
    /// Band-averaged fraction collected from the target's vertical channel.
    pub fraction_target: f64,
    pub fraction_source: f64,
    pub fraction_waveguide: f64,
    /// Spectral FWHM of the target channel, lab GHz.
    pub fwhm_target: Option<f64>,
}

/// Drive the waveguide with a spectrally flat source of the given
/// bandwidth and resolve where the light exits. Fractions are energies
/// per unit band, so they fall off as the band outgrows the resonances.
pub fn drop_filter_response(
    rates: &CouplingRates,
    detunings: &Detunings,
    bandwidth: f64,
) -> Result<DropFilterResponse> {
    let cavity_linewidth = 2.0 * rates.cavity_damping();
    if !(bandwidth > cavity_linewidth) {
        return Err(Error::Domain("bandwidth must exceed the cavity linewidth"));
    }
    let narrowest = if rates.kappa_w > 0.0 {
        rates.cavity_damping().min(rates.kappa_w)
    } else {
        rates.cavity_damping()
    };
    let step = (narrowest / 4.0).max(bandwidth / 4000.0);
    let n_half = (bandwidth / 2.0 / step).ceil() as i64;
    let probe: Vec<f64> = (-n_half..=n_half).map(|i| i as f64 * step).collect();

    let resp = frequency_response(rates, detunings, Mode::Waveguide, &probe)?;
    let cav = rates.cavity_damping();
    let target_flux: Vec<f64> =
        resp.target.iter().map(|a| 2.0 * cav * a.norm_sqr()).collect();
    let source_flux: Vec<f64> =
        resp.source.iter().map(|a| 2.0 * cav * a.norm_sqr()).collect();
    let waveguide_flux: Vec<f64> =
        resp.waveguide.iter().map(|a| 2.0 * rates.kappa_w * a.norm_sqr()).collect();

    let integrate = |y: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 1..y.len() {
            acc += 0.5 * (y[i] + y[i - 1]) * (probe[i] - probe[i - 1]);
        }
        acc
    };
    let fwhm_target = full_width_half_max(&probe, &target_flux);
    Ok(DropFilterResponse {
        fraction_target: integrate(&target_flux) / bandwidth,
        fraction_source: integrate(&source_flux) / bandwidth,
        fraction_waveguide: integrate(&waveguide_flux) / bandwidth,
        probe,
        target_flux,
        source_flux,
        waveguide_flux,
        fwhm_target,
    })
}
