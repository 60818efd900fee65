//! Two-level emitter coupled to the source cavity.
//!
//! In the single-excitation manifold the exciton amplitude `e(t)` and the
//! network fields form a closed linear system: the cavity drive is
//! `p(t) = −i g0 e(t)` and the exciton sees the source field back,
//!
//! ```text
//! ė = −(Γ/2) e − i g0 c_s
//! ```
//!
//! where Γ here is the decay into non-cavity (bandgap-suppressed) modes
//! only — emission into the cavity arises dynamically through `g0`, so the
//! measured, Purcell-enhanced rate is never double counted.
//!
//! Two integration front-ends are provided. [`evolve_coupled`] runs the
//! full four-mode system for transfer studies. [`evolve_jaynes_cummings`]
//! is the standard single-mode reduction used for lifetime and regime
//! analysis: the measured total cavity linewidth κ damps the field at κ/2,
//! which reproduces the textbook weak-coupling rate `4g0²/κ` and the
//! vacuum-Rabi period `π/g0` at strong coupling.

use alloc::vec::Vec;
use num_complex::Complex64;

#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;

use crate::dynamics::{check_step, rk4_step, Detunings, NetworkState};
use crate::network::{CouplingRates, EmitterSpec};
use crate::rng::exponential;
use crate::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Excited-state amplitude of the emitter at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitonState {
    pub amplitude: Complex64,
    /// ns
    pub time: f64,
}

impl ExcitonState {
    pub fn new(amplitude: Complex64, time: f64) -> Result<Self> {
        if amplitude.norm() > 1.0 + 1e-9 {
            return Err(Error::Domain("exciton amplitude cannot exceed unit norm"));
        }
        Ok(Self { amplitude, time })
    }

    /// Fully excited emitter at t = 0.
    pub fn excited() -> Self {
        Self { amplitude: Complex64::new(1.0, 0.0), time: 0.0 }
    }
}

/// Joint time derivative of exciton and network amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledDerivative {
    pub exciton: Complex64,
    pub network: [Complex64; 3],
}

/// Derivative of the closed exciton + network system.
pub fn coupled_derivative(
    exciton: &ExcitonState,
    network: &NetworkState,
    spec: &EmitterSpec,
    rates: &CouplingRates,
    detunings: &Detunings,
) -> CoupledDerivative {
    let y = [exciton.amplitude, network.c_s, network.c_t, network.c_w];
    let d = joint_deriv(&y, spec.g0, spec.leaky_rate(), rates, detunings);
    CoupledDerivative { exciton: d[0], network: [d[1], d[2], d[3]] }
}

fn joint_deriv(
    y: &[Complex64; 4],
    g0: f64,
    gamma_leak: f64,
    rates: &CouplingRates,
    det: &Detunings,
) -> [Complex64; 4] {
    let cav = rates.cavity_damping();
    let pump = -I * g0 * y[0];
    [
        -(gamma_leak / 2.0) * y[0] - I * g0 * y[1],
        (I * det.delta_s - cav) * y[1] - I * rates.kappa_par * y[3] + pump,
        (I * det.delta_t - cav) * y[2] - I * rates.kappa_par * y[3],
        (I * det.delta_w - rates.kappa_w) * y[3] - I * rates.kappa_par * (y[1] + y[2]),
    ]
}

/// Cumulative emission per channel of the coupled system.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoupledChannels {
    /// Emitter decay into leaky (non-cavity) modes.
    pub emitter_leak: f64,
    pub vertical_source: f64,
    pub vertical_target: f64,
    pub material: f64,
    pub waveguide: f64,
}

impl CoupledChannels {
    pub fn total(&self) -> f64 {
        self.emitter_leak + self.vertical_source + self.vertical_target + self.material + self.waveguide
    }
}

/// Trajectory of the joint exciton + network integration.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledTrajectory {
    pub times: Vec<f64>,
    pub exciton: Vec<Complex64>,
    pub states: Vec<NetworkState>,
    pub channels: Vec<CoupledChannels>,
}

impl CoupledTrajectory {
    /// `|e(t)|²` samples.
    pub fn excited_population(&self) -> Vec<f64> {
        self.exciton.iter().map(|e| e.norm_sqr()).collect()
    }

    /// Total excitation at sample `i`: stored plus emitted.
    pub fn excitation_number(&self, i: usize) -> f64 {
        self.exciton[i].norm_sqr() + self.states[i].total_intensity() + self.channels[i].total()
    }
}

/// Integrate the joint system from an initial exciton amplitude with the
/// network in vacuum, for a duration `t_end` with fixed step `dt`.
pub fn evolve_coupled(
    spec: &EmitterSpec,
    rates: &CouplingRates,
    detunings: &Detunings,
    initial: &ExcitonState,
    t_end: f64,
    dt: f64,
) -> Result<CoupledTrajectory> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::Config("integration time must be positive and finite"));
    }
    let gamma_leak = spec.leaky_rate();
    let max_rate = rates
        .max_rate()
        .max(spec.g0)
        .max(gamma_leak)
        .max(detunings.delta_s.abs())
        .max(detunings.delta_t.abs())
        .max(detunings.delta_w.abs());
    check_step(dt, max_rate)?;

    let n_steps = (t_end / dt).ceil().max(1.0) as usize;
    let h = t_end / n_steps as f64;
    let t0 = initial.time;

    let mut y = [initial.amplitude, Complex64::ZERO, Complex64::ZERO, Complex64::ZERO];
    let mut acc = CoupledChannels::default();

    let mut times = Vec::with_capacity(n_steps + 1);
    let mut exciton = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut channels = Vec::with_capacity(n_steps + 1);
    times.push(t0);
    exciton.push(y[0]);
    states.push(NetworkState::new(y[1], y[2], y[3], t0));
    channels.push(acc);

    for step in 0..n_steps {
        let t = t0 + step as f64 * h;
        let (y_next, emitted) = rk4_step(
            t,
            &y,
            h,
            |_, yy| joint_deriv(yy, spec.g0, gamma_leak, rates, detunings),
            |yy| {
                [
                    gamma_leak * yy[0].norm_sqr(),
                    2.0 * rates.kappa_perp * yy[1].norm_sqr(),
                    2.0 * rates.kappa_perp * yy[2].norm_sqr(),
                    2.0 * rates.gamma_mat * (yy[1].norm_sqr() + yy[2].norm_sqr()),
                    2.0 * rates.kappa_w * yy[3].norm_sqr(),
                ]
            },
        );
        y = y_next;
        acc.emitter_leak += emitted[0];
        acc.vertical_source += emitted[1];
        acc.vertical_target += emitted[2];
        acc.material += emitted[3];
        acc.waveguide += emitted[4];
        let t_next = t0 + (step + 1) as f64 * h;
        times.push(t_next);
        exciton.push(y[0]);
        states.push(NetworkState::new(y[1], y[2], y[3], t_next));
        channels.push(acc);
    }

    Ok(CoupledTrajectory { times, exciton, states, channels })
}

/// Single-mode reduction: the emitter coupled to one cavity whose measured
/// total linewidth is `kappa_total` (field damping `kappa_total / 2`).
/// The cavity emission shows up in the `vertical_source` channel.
pub fn evolve_jaynes_cummings(
    spec: &EmitterSpec,
    kappa_total: f64,
    t_end: f64,
    dt: f64,
) -> Result<CoupledTrajectory> {
    if !(kappa_total > 0.0) {
        return Err(Error::Domain("kappa_total must be positive"));
    }
    let rates = CouplingRates::new(kappa_total / 2.0, 0.0, 0.0, 0.0)?;
    evolve_coupled(spec, &rates, &Detunings::matched(), &ExcitonState::excited(), t_end, dt)
}

/// Least-squares exponential decay rate of `values` over the time window
/// `[t_min, t_max]` (log-linear fit), rad/ns.
pub fn fit_exponential_decay(times: &[f64], values: &[f64], t_min: f64, t_max: f64) -> Result<f64> {
    if times.len() != values.len() {
        return Err(Error::Domain("times and values must have equal length"));
    }
    let mut n = 0.0;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (&t, &v) in times.iter().zip(values) {
        if t < t_min || t > t_max {
            continue;
        }
        if !(v > 0.0) {
            return Err(Error::DegenerateInput("non-positive sample in fit window"));
        }
        let ln = v.ln();
        n += 1.0;
        sx += t;
        sy += ln;
        sxx += t * t;
        sxy += t * ln;
    }
    if n < 2.0 {
        return Err(Error::InsufficientData("need at least two samples in the fit window"));
    }
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(Error::DegenerateInput("degenerate time window"));
    }
    Ok(-(n * sxy - sx * sy) / denom)
}

/// Purcell and beta-factor summary for a measured lifetime pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurcellResult {
    /// SE rate enhancement `τ_bulk / τ_cav`.
    pub factor: f64,
    /// SE coupling fraction into the cavity mode.
    pub beta: f64,
    pub tau_cav_ps: f64,
    pub tau_bulk_ns: f64,
}

/// Measured Purcell factor from the bulk and cavity-coupled lifetimes.
pub fn purcell_measured(tau_bulk_ns: f64, tau_cav_ps: f64) -> Result<f64> {
    if !(tau_bulk_ns > 0.0) || !(tau_cav_ps > 0.0) {
        return Err(Error::Domain("lifetimes must be positive"));
    }
    Ok(tau_bulk_ns * 1000.0 / tau_cav_ps)
}

/// SE coupling fraction into the cavity, `β = F / (F + F_PC)`.
pub fn beta_factor(f: f64, f_pc: f64) -> Result<f64> {
    if !(f > 0.0) || !(f_pc >= 0.0) {
        return Err(Error::Domain("beta factor requires F > 0 and F_PC >= 0"));
    }
    Ok(f / (f + f_pc))
}

/// Purcell factor and beta for measured lifetimes and a leaky-mode
/// suppression factor.
pub fn purcell_summary(tau_bulk_ns: f64, tau_cav_ps: f64, f_pc: f64) -> Result<PurcellResult> {
    let factor = purcell_measured(tau_bulk_ns, tau_cav_ps)?;
    Ok(PurcellResult {
        factor,
        beta: beta_factor(factor, f_pc)?,
        tau_cav_ps,
        tau_bulk_ns,
    })
}

/// Ideal-emitter Purcell factor `(3 / 4π²) · Q / V`, with V in (λ/n)³.
/// The prefactor assumes perfect spatial and spectral alignment.
pub fn purcell_theoretical(q: f64, v_mode: f64) -> Result<f64> {
    if !(q > 0.0) || !(v_mode > 0.0) {
        return Err(Error::Domain("Q and mode volume must be positive"));
    }
    Ok(3.0 / (4.0 * core::f64::consts::PI * core::f64::consts::PI) * q / v_mode)
}

/// Emitter-cavity coupling regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingRegime {
    Weak,
    Onset,
    Strong,
}

impl CouplingRegime {
    pub fn as_str(&self) -> &'static str {
        match self {
            CouplingRegime::Weak => "weak",
            CouplingRegime::Onset => "onset",
            CouplingRegime::Strong => "strong",
        }
    }
}

/// Classify the coupling regime of an emitter against the total cavity
/// decay. Thresholds (explicit model constants, invariant under common
/// rescaling of all rates):
/// strong when `g0 > κ/4 + Γ/4`; weak when `4 g0²/κ < κ/10`.
pub fn classify_regime(spec: &EmitterSpec, rates: &CouplingRates) -> CouplingRegime {
    if spec.g0 == 0.0 {
        return CouplingRegime::Weak;
    }
    let kappa = rates.total_cavity_decay();
    if spec.g0 > kappa / 4.0 + spec.gamma_emitter / 4.0 {
        return CouplingRegime::Strong;
    }
    if 4.0 * spec.g0 * spec.g0 / kappa < kappa / 10.0 {
        return CouplingRegime::Weak;
    }
    CouplingRegime::Onset
}

/// Draw one emission time (ps): an exponential excitation-jitter stage of
/// mean `rise_ps` followed by an exponential decay stage of mean
/// `lifetime_ps`. Deterministic for a given RNG state.
pub fn sample_emission_time(rng: &mut impl Rng, rise_ps: f64, lifetime_ps: f64) -> f64 {
    assert!(lifetime_ps > 0.0, "emission lifetime must be positive");
    assert!(rise_ps >= 0.0, "rise time must be non-negative");
    exponential(rng, rise_ps) + exponential(rng, lifetime_ps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::load_preset;
    use crate::rng::stream;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn uncoupled_emitter_decays_at_leak_rate() {
        let spec = EmitterSpec::new(0.0, 10.0, 1.4, 0.3, 23.0).unwrap();
        let rates = load_preset("system1").unwrap().rates;
        let gamma = spec.leaky_rate();
        let traj = evolve_coupled(
            &spec,
            &rates,
            &Detunings::matched(),
            &ExcitonState::excited(),
            2.0,
            0.04 / rates.max_rate(),
        )
        .unwrap();
        let p = traj.excited_population();
        let want = (-gamma * 2.0).exp();
        assert_relative_eq!(*p.last().unwrap(), want, max_relative = 1e-6);
    }

    #[test]
    fn system1_weak_coupling_decay_rate() {
        let preset = load_preset("system1").unwrap();
        let kappa = preset.rates.total_cavity_decay();
        let dt = 0.04 / (kappa / 2.0);
        let traj = evolve_jaynes_cummings(&preset.emitter, kappa, 0.4, dt).unwrap();
        let pop = traj.excited_population();
        let rate = fit_exponential_decay(&traj.times, &pop, 0.05, 0.35).unwrap();

        // Weak-coupling oracle.
        let oracle = 4.0 * preset.emitter.g0.powi(2) / kappa;
        assert!((rate - oracle).abs() / oracle < 0.25, "rate {rate} vs {oracle}");

        // Exact slow eigenvalue of the 2x2 system, written independently.
        let a = preset.emitter.leaky_rate() / 2.0;
        let d = kappa / 2.0;
        let slow = (a + d) / 2.0 - (((d - a) / 2.0).powi(2) - preset.emitter.g0.powi(2)).sqrt();
        assert_relative_eq!(rate, 2.0 * slow, max_relative = 5e-3);
    }

    #[test]
    fn theoretical_preset_shows_vacuum_rabi_revival() {
        let preset = load_preset("theoretical").unwrap();
        let kappa = preset.rates.total_cavity_decay();
        let dt = 0.02 / preset.emitter.g0;
        let traj = evolve_jaynes_cummings(&preset.emitter, kappa, 0.025, dt).unwrap();
        let pop = traj.excited_population();
        // First interior local maximum of |e(t)|².
        let mut revival = None;
        for i in 1..pop.len() - 1 {
            if pop[i] > pop[i - 1] && pop[i] >= pop[i + 1] {
                revival = Some(traj.times[i]);
                break;
            }
        }
        let revival = revival.expect("oscillating population");
        let period = core::f64::consts::PI / preset.emitter.g0;
        assert!((revival - period).abs() / period < 0.05, "revival {revival} vs {period}");
    }

    #[test]
    fn excitation_number_is_conserved() {
        let preset = load_preset("system1").unwrap();
        let dt = 0.04 / preset.rates.max_rate().max(preset.emitter.g0);
        let traj = evolve_coupled(
            &preset.emitter,
            &preset.rates,
            &Detunings::matched(),
            &ExcitonState::excited(),
            1.0,
            dt,
        )
        .unwrap();
        for i in [0, traj.times.len() / 3, traj.times.len() - 1] {
            assert_relative_eq!(traj.excitation_number(i), 1.0, epsilon = 1e-4);
        }
    }

    #[test]
    fn coupled_derivative_matches_hand_expression() {
        let spec = EmitterSpec::new(50.0, 10.0, 1.4, 0.3, 23.0).unwrap();
        let rates = CouplingRates::new(455.0, 283.0, 322.0, 0.0).unwrap();
        let e = Complex64::new(0.6, -0.1);
        let cs = Complex64::new(0.2, 0.3);
        let exciton = ExcitonState::new(e, 0.0).unwrap();
        let network = NetworkState::new(cs, Complex64::ZERO, Complex64::ZERO, 0.0);
        let d = coupled_derivative(&exciton, &network, &spec, &rates, &Detunings::matched());
        let gamma = 0.3 / 1.4;
        let want_e = -(gamma / 2.0) * e - I * 50.0 * cs;
        let want_s = -455.0 * cs - I * 50.0 * e; // pump = −i g0 e
        assert_relative_eq!(d.exciton.re, want_e.re, max_relative = 1e-14);
        assert_relative_eq!(d.exciton.im, want_e.im, max_relative = 1e-14);
        assert_relative_eq!(d.network[0].re, want_s.re, max_relative = 1e-14);
        assert_relative_eq!(d.network[0].im, want_s.im, max_relative = 1e-14);
    }

    #[test]
    fn purcell_from_measured_lifetimes() {
        let f = purcell_measured(1.4, 116.0).unwrap();
        assert_relative_eq!(f, 12.07, epsilon = 5e-3);
        assert_relative_eq!(purcell_measured(1.4, 1400.0).unwrap(), 1.0);
        assert_relative_eq!(purcell_measured(1.4, 700.0).unwrap(), 2.0);
        assert!(purcell_measured(0.0, 116.0).is_err());
        assert!(purcell_measured(1.4, -1.0).is_err());
    }

    #[test]
    fn beta_factor_values() {
        assert_relative_eq!(beta_factor(12.0, 0.3).unwrap(), 0.975_61, epsilon = 1e-5);
        assert_relative_eq!(beta_factor(12.0, 0.0).unwrap(), 1.0);
        assert_relative_eq!(beta_factor(1.0, 1.0).unwrap(), 0.5);
        assert!(beta_factor(-1.0, 0.3).is_err());
        assert!(beta_factor(1.0, -0.1).is_err());
    }

    #[test]
    fn theoretical_purcell_prefactor() {
        let pi2 = core::f64::consts::PI * core::f64::consts::PI;
        assert_relative_eq!(purcell_theoretical(4.0 * pi2 / 3.0, 1.0).unwrap(), 1.0, max_relative = 1e-12);
        let base = purcell_theoretical(1000.0, 0.74).unwrap();
        assert_relative_eq!(base, 102.7, max_relative = 1e-3);
        assert_relative_eq!(purcell_theoretical(2000.0, 0.74).unwrap(), 2.0 * base, max_relative = 1e-12);
    }

    #[test]
    fn regimes_for_reported_parameter_rows() {
        let s1 = load_preset("system1").unwrap();
        assert_eq!(classify_regime(&s1.emitter, &s1.rates), CouplingRegime::Weak);
        let th = load_preset("theoretical").unwrap();
        assert_eq!(classify_regime(&th.emitter, &th.rates), CouplingRegime::Strong);
        let mut quiet = s1.emitter;
        quiet.g0 = 0.0;
        assert_eq!(classify_regime(&quiet, &s1.rates), CouplingRegime::Weak);
    }

    #[test]
    fn emission_time_sampler_means() {
        let mut rng = stream(17);
        let n = 1_000_000;
        let pure: f64 = (0..n).map(|_| sample_emission_time(&mut rng, 0.0, 116.0)).sum::<f64>() / n as f64;
        assert!((pure - 116.0).abs() / 116.0 < 0.01, "mean {pure}");
        let staged: f64 =
            (0..n).map(|_| sample_emission_time(&mut rng, 23.0, 116.0)).sum::<f64>() / n as f64;
        assert!((staged - 139.0).abs() / 139.0 < 0.01, "mean {staged}");
    }

    #[test]
    fn emission_time_sampler_is_deterministic() {
        let a: Vec<f64> = {
            let mut rng = stream(5);
            (0..32).map(|_| sample_emission_time(&mut rng, 23.0, 116.0)).collect()
        };
        let b: Vec<f64> = {
            let mut rng = stream(5);
            (0..32).map(|_| sample_emission_time(&mut rng, 23.0, 116.0)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn exciton_state_rejects_superunit_amplitude() {
        assert!(ExcitonState::new(Complex64::new(1.1, 0.0), 0.0).is_err());
        assert!(ExcitonState::new(Complex64::new(0.6, 0.8), 0.0).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn beta_monotone(f in 0.1..100.0f64, fpc in 0.0..10.0f64) {
            let b = beta_factor(f, fpc).unwrap();
            prop_assert!(beta_factor(f * 1.5, fpc).unwrap() >= b);
            prop_assert!(beta_factor(f, fpc + 0.5).unwrap() <= b);
        }

        #[test]
        fn regime_invariant_under_rescaling(scale in 0.01..100.0f64) {
            let s1 = load_preset("system1").unwrap();
            let spec = EmitterSpec::new(
                s1.emitter.g0 * scale,
                s1.emitter.gamma_emitter * scale,
                s1.emitter.tau_bulk_ns / scale,
                s1.emitter.f_pc,
                s1.emitter.rise_time_ps,
            ).unwrap();
            let rates = CouplingRates::new(
                s1.rates.kappa_perp * scale,
                s1.rates.kappa_par * scale,
                s1.rates.kappa_w * scale,
                0.0,
            ).unwrap();
            prop_assert_eq!(classify_regime(&spec, &rates), classify_regime(&s1.emitter, &s1.rates));
        }

        #[test]
        fn emission_times_non_negative(seed in 0u64..1000, rise in 0.0..50.0f64) {
            let mut rng = stream(seed);
            for _ in 0..64 {
                prop_assert!(sample_emission_time(&mut rng, rise, 116.0) >= 0.0);
            }
        }
    }
}
