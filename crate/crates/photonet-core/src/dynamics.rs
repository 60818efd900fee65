//! Coupled-mode dynamics of the source-cavity / waveguide / target-cavity
//! network.
//!
//! The field amplitudes evolve according to
//!
//! ```text
//! ċ_s = (iδ_s − κ⊥ − γ) c_s − iκ∥ c_w + p(t)
//! ċ_t = (iδ_t − κ⊥ − γ) c_t − iκ∥ c_w
//! ċ_w = (iδ_w − κ_W)    c_w − iκ∥ c_s − iκ∥ c_t
//! ```
//!
//! with equal rates for the two end cavities. At zero detunings and γ = 0
//! this is the standard three-mode model of a terminated waveguide
//! coupling two identical cavities. Detunings δ are offsets from a common
//! rotating-frame reference; |c|² is the photon-number-normalized
//! intensity of the mode and decays at twice the field rate, so the
//! instantaneous loss flux into a channel of rate κ is 2κ|c|².

use alloc::vec::Vec;
use num_complex::Complex64;

#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::solve_complex_3x3;
use crate::network::CouplingRates;
use crate::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Maximum `dt · max_rate` product accepted by the fixed-step integrator.
pub const STEP_GUARD: f64 = 0.05;

/// One of the three network modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Mode {
    Source,
    Target,
    Waveguide,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Source => "S",
            Mode::Target => "T",
            Mode::Waveguide => "WG",
        }
    }
}

/// Complex field amplitudes of the network at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkState {
    pub c_s: Complex64,
    pub c_t: Complex64,
    pub c_w: Complex64,
    /// ns
    pub time: f64,
}

impl NetworkState {
    pub fn new(c_s: Complex64, c_t: Complex64, c_w: Complex64, time: f64) -> Self {
        Self { c_s, c_t, c_w, time }
    }

    /// State with only the source cavity populated.
    pub fn source_excited() -> Self {
        Self::new(Complex64::new(1.0, 0.0), Complex64::ZERO, Complex64::ZERO, 0.0)
    }

    pub fn zero() -> Self {
        Self::new(Complex64::ZERO, Complex64::ZERO, Complex64::ZERO, 0.0)
    }

    pub fn amplitude(&self, mode: Mode) -> Complex64 {
        match mode {
            Mode::Source => self.c_s,
            Mode::Target => self.c_t,
            Mode::Waveguide => self.c_w,
        }
    }

    /// Total stored intensity `|c_s|² + |c_t|² + |c_w|²`.
    pub fn total_intensity(&self) -> f64 {
        self.c_s.norm_sqr() + self.c_t.norm_sqr() + self.c_w.norm_sqr()
    }
}

/// Mode offsets from the common reference frequency, rad/ns.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Detunings {
    pub delta_s: f64,
    pub delta_t: f64,
    pub delta_w: f64,
}

impl Detunings {
    pub fn new(delta_s: f64, delta_t: f64, delta_w: f64) -> Result<Self> {
        for d in [delta_s, delta_t, delta_w] {
            if !d.is_finite() {
                return Err(Error::Domain("detunings must be finite"));
            }
        }
        Ok(Self { delta_s, delta_t, delta_w })
    }

    /// All modes spectrally matched.
    pub fn matched() -> Self {
        Self::default()
    }

    fn shifted(&self, delta: f64) -> Self {
        Self {
            delta_s: self.delta_s - delta,
            delta_t: self.delta_t - delta,
            delta_w: self.delta_w - delta,
        }
    }

    fn max_abs(&self) -> f64 {
        self.delta_s.abs().max(self.delta_t.abs()).max(self.delta_w.abs())
    }
}

/// Dipole drive applied to the source cavity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriveTerm {
    None,
    Constant { amplitude: Complex64 },
    /// `amplitude · exp(i · detuning · t)`, detuning in rad/ns.
    Harmonic { amplitude: Complex64, detuning: f64 },
    /// Drive supplied by a coupled emitter, `p(t) = −i g0 e(t)`; integrated
    /// by [`crate::emitter::evolve_coupled`], not by [`evolve`].
    EmitterCoupled { g0: f64 },
}

impl DriveTerm {
    pub fn constant(amplitude: f64) -> Self {
        DriveTerm::Constant { amplitude: Complex64::new(amplitude, 0.0) }
    }

    fn value(&self, t: f64) -> Result<Complex64> {
        match self {
            DriveTerm::None => Ok(Complex64::ZERO),
            DriveTerm::Constant { amplitude } => Ok(*amplitude),
            DriveTerm::Harmonic { amplitude, detuning } => {
                Ok(*amplitude * (I * (*detuning * t)).exp())
            }
            DriveTerm::EmitterCoupled { .. } => Err(Error::Config(
                "emitter-coupled drive must be integrated with the emitter solver",
            )),
        }
    }

    fn max_rate(&self) -> f64 {
        match self {
            DriveTerm::Harmonic { detuning, .. } => detuning.abs(),
            _ => 0.0,
        }
    }
}

/// Cumulative emitted intensity per loss channel (integrals of 2κ|c|²).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChannelIntegrals {
    /// Vertical loss of the source cavity.
    pub vertical_source: f64,
    /// Vertical loss of the target cavity.
    pub vertical_target: f64,
    /// Material absorption of both cavities.
    pub material: f64,
    /// Intrinsic waveguide loss.
    pub waveguide: f64,
}

impl ChannelIntegrals {
    pub fn total(&self) -> f64 {
        self.vertical_source + self.vertical_target + self.material + self.waveguide
    }
}

/// Result of a time-domain integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Sample times, ns, strictly increasing.
    pub times: Vec<f64>,
    pub states: Vec<NetworkState>,
    /// Cumulative per-channel emission at each sample time.
    pub channels: Vec<ChannelIntegrals>,
}

impl Trajectory {
    pub fn final_state(&self) -> &NetworkState {
        self.states.last().expect("trajectory has at least the initial sample")
    }

    pub fn final_channels(&self) -> &ChannelIntegrals {
        self.channels.last().expect("trajectory has at least the initial sample")
    }
}

fn deriv_vec(
    y: &[Complex64; 3],
    rates: &CouplingRates,
    det: &Detunings,
    drive: Complex64,
) -> [Complex64; 3] {
    let cav = rates.cavity_damping();
    [
        (I * det.delta_s - cav) * y[0] - I * rates.kappa_par * y[2] + drive,
        (I * det.delta_t - cav) * y[1] - I * rates.kappa_par * y[2],
        (I * det.delta_w - rates.kappa_w) * y[2] - I * rates.kappa_par * (y[0] + y[1]),
    ]
}

fn flux_vec(y: &[Complex64; 3], rates: &CouplingRates) -> [f64; 4] {
    [
        2.0 * rates.kappa_perp * y[0].norm_sqr(),
        2.0 * rates.kappa_perp * y[1].norm_sqr(),
        2.0 * rates.gamma_mat * (y[0].norm_sqr() + y[1].norm_sqr()),
        2.0 * rates.kappa_w * y[2].norm_sqr(),
    ]
}

/// Classic fixed-step RK4 update of the state together with the matching
/// quadrature of the (feed-forward) channel fluxes.
pub(crate) fn rk4_step<const N: usize, const M: usize>(
    t: f64,
    y: &[Complex64; N],
    dt: f64,
    deriv: impl Fn(f64, &[Complex64; N]) -> [Complex64; N],
    flux: impl Fn(&[Complex64; N]) -> [f64; M],
) -> ([Complex64; N], [f64; M]) {
    let advance = |y: &[Complex64; N], k: &[Complex64; N], h: f64| {
        let mut out = *y;
        for i in 0..N {
            out[i] += k[i] * h;
        }
        out
    };
    let k1 = deriv(t, y);
    let y2 = advance(y, &k1, dt / 2.0);
    let k2 = deriv(t + dt / 2.0, &y2);
    let y3 = advance(y, &k2, dt / 2.0);
    let k3 = deriv(t + dt / 2.0, &y3);
    let y4 = advance(y, &k3, dt);
    let k4 = deriv(t + dt, &y4);

    let mut y_next = *y;
    for i in 0..N {
        y_next[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0);
    }
    let f1 = flux(y);
    let f2 = flux(&y2);
    let f3 = flux(&y3);
    let f4 = flux(&y4);
    let mut emitted = [0.0; M];
    for i in 0..M {
        emitted[i] = (f1[i] + 2.0 * f2[i] + 2.0 * f3[i] + f4[i]) * (dt / 6.0);
    }
    (y_next, emitted)
}

pub(crate) fn check_step(dt: f64, max_rate: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Config("step size must be positive and finite"));
    }
    if max_rate > 0.0 && dt * max_rate > STEP_GUARD * (1.0 + 1e-12) {
        return Err(Error::Config("step size violates dt <= 0.05 / max(rates)"));
    }
    Ok(())
}

/// Instantaneous time derivative of the network state.
pub fn derivative(
    state: &NetworkState,
    rates: &CouplingRates,
    detunings: &Detunings,
    drive: &DriveTerm,
) -> Result<[Complex64; 3]> {
    let p = drive.value(state.time)?;
    Ok(deriv_vec(&[state.c_s, state.c_t, state.c_w], rates, detunings, p))
}

/// Integrate the network for a duration `t_end` from `initial` with fixed
/// step `dt` (shortened so the last sample lands exactly on the end time).
///
/// The step must satisfy `dt · max(rates, |detunings|) <= 0.05`.
pub fn evolve(
    initial: &NetworkState,
    rates: &CouplingRates,
    detunings: &Detunings,
    drive: &DriveTerm,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::Config("integration time must be positive and finite"));
    }
    let max_rate = rates.max_rate().max(detunings.max_abs()).max(drive.max_rate());
    check_step(dt, max_rate)?;
    // Reject emitter-coupled drives up front.
    drive.value(initial.time)?;

    let n_steps = (t_end / dt).ceil().max(1.0) as usize;
    let h = t_end / n_steps as f64;

    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut channels = Vec::with_capacity(n_steps + 1);

    let mut y = [initial.c_s, initial.c_t, initial.c_w];
    let mut acc = ChannelIntegrals::default();
    let t0 = initial.time;
    times.push(t0);
    states.push(*initial);
    channels.push(acc);

    for step in 0..n_steps {
        let t = t0 + step as f64 * h;
        let (y_next, emitted) = rk4_step(
            t,
            &y,
            h,
            |tt, yy| {
                let p = match drive.value(tt) {
                    Ok(p) => p,
                    Err(_) => Complex64::ZERO, // unreachable: checked above
                };
                deriv_vec(yy, rates, detunings, p)
            },
            |yy| flux_vec(yy, rates),
        );
        y = y_next;
        acc.vertical_source += emitted[0];
        acc.vertical_target += emitted[1];
        acc.material += emitted[2];
        acc.waveguide += emitted[3];
        let t_next = t0 + (step + 1) as f64 * h;
        times.push(t_next);
        states.push(NetworkState::new(y[0], y[1], y[2], t_next));
        channels.push(acc);
    }

    Ok(Trajectory { times, states, channels })
}

fn system_matrix(rates: &CouplingRates, det: &Detunings) -> [[Complex64; 3]; 3] {
    let cav = rates.cavity_damping();
    [
        [I * det.delta_s - cav, Complex64::ZERO, -I * rates.kappa_par],
        [Complex64::ZERO, I * det.delta_t - cav, -I * rates.kappa_par],
        [-I * rates.kappa_par, -I * rates.kappa_par, I * det.delta_w - rates.kappa_w],
    ]
}

/// Steady state under a constant drive vector applied to `pump`.
///
/// For a harmonic drive, call with the detunings already shifted into the
/// drive frame (see [`steady_state`]). The returned amplitudes are in that
/// rotating frame; their intensities are frame-independent.
pub fn steady_state_for_pump(
    rates: &CouplingRates,
    detunings: &Detunings,
    pump: Mode,
    amplitude: Complex64,
) -> Result<NetworkState> {
    if rates.cavity_damping() == 0.0 && rates.kappa_w == 0.0 {
        return Err(Error::Singular("no loss channel: the driven network has no steady state"));
    }
    let pump_idx = match pump {
        Mode::Source => 0,
        Mode::Target => 1,
        Mode::Waveguide => 2,
    };
    if rates.kappa_par == 0.0 {
        // Decoupled modes: undriven ones sit at zero; the driven one is a
        // bare damped resonance (singular if it has neither loss nor
        // detuning).
        let a = system_matrix(rates, detunings);
        let diag = a[pump_idx][pump_idx];
        if diag.norm() < 1e-14 * rates.max_rate().max(amplitude.norm()).max(1.0) {
            return Err(Error::Singular("driven mode has no damping at resonance"));
        }
        let mut x = [Complex64::ZERO; 3];
        x[pump_idx] = -amplitude / diag;
        return Ok(NetworkState::new(x[0], x[1], x[2], 0.0));
    }
    let a = system_matrix(rates, detunings);
    let mut b = [Complex64::ZERO; 3];
    b[pump_idx] = -amplitude;
    let x = solve_complex_3x3(a, b)?;
    Ok(NetworkState::new(x[0], x[1], x[2], 0.0))
}

/// Steady state of the source-driven network.
///
/// `Constant` drives solve the static linear system; `Harmonic` drives
/// solve it in the drive's rotating frame (detunings shifted by the drive
/// detuning). A `None` drive returns the zero state.
pub fn steady_state(
    rates: &CouplingRates,
    detunings: &Detunings,
    drive: &DriveTerm,
) -> Result<NetworkState> {
    match drive {
        DriveTerm::None => Ok(NetworkState::zero()),
        DriveTerm::Constant { amplitude } => {
            steady_state_for_pump(rates, detunings, Mode::Source, *amplitude)
        }
        DriveTerm::Harmonic { amplitude, detuning } => {
            steady_state_for_pump(rates, &detunings.shifted(*detuning), Mode::Source, *amplitude)
        }
        DriveTerm::EmitterCoupled { .. } => Err(Error::Config(
            "emitter-coupled drive must be integrated with the emitter solver",
        )),
    }
}

/// Closed-form source/target transfer ratios at spectral matching.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferRatio {
    /// `|c_s / c_t| = 1 + κ⊥ κ_W / κ∥²`
    pub field_ratio: f64,
    /// `|c_t / c_s|²`, the photon transfer efficiency.
    pub intensity_ratio: f64,
}

/// Steady-state amplitude ratio between the source and target cavities.
/// Material loss adds to the vertical rate in the closed form.
pub fn transfer_ratio(rates: &CouplingRates) -> Result<TransferRatio> {
    if !(rates.kappa_par > 0.0) {
        return Err(Error::Singular("transfer ratio diverges for kappa_par = 0"));
    }
    let field_ratio =
        1.0 + rates.cavity_damping() * rates.kappa_w / (rates.kappa_par * rates.kappa_par);
    Ok(TransferRatio {
        field_ratio,
        intensity_ratio: 1.0 / (field_ratio * field_ratio),
    })
}

/// Waveguide loss rate that yields a target transfer intensity ratio for
/// the given cavity rates (inverse of [`transfer_ratio`]).
pub fn kappa_w_for_intensity_ratio(
    intensity_ratio: f64,
    kappa_perp: f64,
    kappa_par: f64,
) -> Result<f64> {
    if !(intensity_ratio > 0.0) || intensity_ratio > 1.0 {
        return Err(Error::Domain("intensity ratio must lie in (0, 1]"));
    }
    if !(kappa_par > 0.0) {
        return Err(Error::Singular("kappa_par must be positive"));
    }
    let field_ratio = 1.0 / intensity_ratio.sqrt();
    if kappa_perp == 0.0 {
        return if (field_ratio - 1.0).abs() < 1e-12 {
            Ok(0.0)
        } else {
            Err(Error::Domain("a lossless cavity always transfers fully"))
        };
    }
    Ok((field_ratio - 1.0) * kappa_par * kappa_par / kappa_perp)
}

/// Steady-state spectra of all three modes versus probe detuning.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    /// Probe detunings, rad/ns.
    pub probe: Vec<f64>,
    pub source: Vec<Complex64>,
    pub target: Vec<Complex64>,
    pub waveguide: Vec<Complex64>,
}

impl FrequencyResponse {
    pub fn intensities(&self, mode: Mode) -> Vec<f64> {
        let amps = match mode {
            Mode::Source => &self.source,
            Mode::Target => &self.target,
            Mode::Waveguide => &self.waveguide,
        };
        amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Sweep a unit-amplitude harmonic probe applied to `pump` across
/// `probe` detunings and record the steady-state response of every mode.
pub fn frequency_response(
    rates: &CouplingRates,
    detunings: &Detunings,
    pump: Mode,
    probe: &[f64],
) -> Result<FrequencyResponse> {
    if probe.iter().any(|d| !d.is_finite()) {
        return Err(Error::Domain("probe grid must be finite"));
    }
    let mut source = Vec::with_capacity(probe.len());
    let mut target = Vec::with_capacity(probe.len());
    let mut waveguide = Vec::with_capacity(probe.len());
    for &delta in probe {
        let state = steady_state_for_pump(
            rates,
            &detunings.shifted(delta),
            pump,
            Complex64::new(1.0, 0.0),
        )?;
        source.push(state.c_s);
        target.push(state.c_t);
        waveguide.push(state.c_w);
    }
    Ok(FrequencyResponse {
        probe: probe.to_vec(),
        source,
        target,
        waveguide,
    })
}
