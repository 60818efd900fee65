//! Monte Carlo photodetection: pulsed excitation of a single-photon
//! emitter with background and dark counts, Hanbury Brown-Twiss routing to
//! two detectors, coincidence histograms, and pulsed `g²(0)` estimation.
//!
//! Every simulation consumes one 64-bit master seed; pulses draw from
//! independent derived sub-streams (see [`crate::rng`]), so records are
//! bit-identical across runs and independent of any scheduling.

use alloc::vec::Vec;
use rand::Rng;

#[allow(unused_imports)]
use num_traits::Float;

use crate::emitter::sample_emission_time;
use crate::network::EmitterSpec;
use crate::rng::{exponential, poisson, substream};
use crate::{Error, Result};

/// Spectral full width of the unfiltered background chain, lab GHz.
/// A filter narrower than this passes a proportional fraction of the
/// background; the 10-nm bandpass near 915 nm is about this wide, so it
/// passes everything.
pub const UNFILTERED_BACKGROUND_WIDTH_GHZ: f64 = 3600.0;

/// Pulsed-excitation timing.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PulseTrainSpec {
    /// Repetition period, ns.
    pub rep_period_ns: f64,
    /// Separation of the two photons of one repetition (interference
    /// experiments only), ns.
    pub pair_separation_ns: f64,
    pub n_pulses: usize,
    /// Probability that a pulse produces a signal photon.
    pub excitation_prob: f64,
}

impl PulseTrainSpec {
    pub fn new(
        rep_period_ns: f64,
        pair_separation_ns: f64,
        n_pulses: usize,
        excitation_prob: f64,
    ) -> Result<Self> {
        if !(rep_period_ns > pair_separation_ns) || !(pair_separation_ns >= 0.0) {
            return Err(Error::Domain("need rep_period > pair_separation >= 0"));
        }
        if n_pulses == 0 {
            return Err(Error::Domain("need at least one pulse"));
        }
        if !(0.0..=1.0).contains(&excitation_prob) {
            return Err(Error::Domain("excitation probability must lie in [0, 1]"));
        }
        Ok(Self { rep_period_ns, pair_separation_ns, n_pulses, excitation_prob })
    }

    /// Single-photon-per-pulse train (autocorrelation experiments).
    pub fn single(rep_period_ns: f64, n_pulses: usize, excitation_prob: f64) -> Result<Self> {
        Self::new(rep_period_ns, 0.0, n_pulses, excitation_prob)
    }
}

/// Background and dark-count model.
///
/// Background photons are Poisson-distributed per pulse with an
/// exponential arrival envelope after the excitation pulse; dark counts
/// are uniform in time. An optional bandpass reduces the background to the
/// fraction `filter_width / UNFILTERED_BACKGROUND_WIDTH_GHZ` (clamped to
/// one); the spectral structure itself is not modelled.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BackgroundSpec {
    pub mean_photons_per_pulse: f64,
    /// Envelope decay time, ps.
    pub decay_time_ps: f64,
    /// Dark counts per second.
    pub dark_rate_hz: f64,
    /// Bandpass full width, lab GHz; `None` leaves the background as is.
    pub filter_width_ghz: Option<f64>,
}

impl BackgroundSpec {
    pub fn new(
        mean_photons_per_pulse: f64,
        decay_time_ps: f64,
        dark_rate_hz: f64,
        filter_width_ghz: Option<f64>,
    ) -> Result<Self> {
        if !(mean_photons_per_pulse >= 0.0)
            || !(decay_time_ps >= 0.0)
            || !(dark_rate_hz >= 0.0)
            || filter_width_ghz.is_some_and(|w| !(w >= 0.0))
        {
            return Err(Error::Domain("background parameters must be >= 0"));
        }
        Ok(Self { mean_photons_per_pulse, decay_time_ps, dark_rate_hz, filter_width_ghz })
    }

    /// No background, no dark counts.
    pub fn none() -> Self {
        Self {
            mean_photons_per_pulse: 0.0,
            decay_time_ps: 100.0,
            dark_rate_hz: 0.0,
            filter_width_ghz: None,
        }
    }

    /// Background mean after the bandpass.
    pub fn effective_mean(&self) -> f64 {
        let pass = self
            .filter_width_ghz
            .map_or(1.0, |w| (w / UNFILTERED_BACKGROUND_WIDTH_GHZ).min(1.0));
        self.mean_photons_per_pulse * pass
    }

    /// Same background with a different mean.
    pub fn with_mean(&self, mean: f64) -> Self {
        Self { mean_photons_per_pulse: mean, ..*self }
    }
}

/// Emission-time model of the source: exponential rise (excitation
/// jitter) followed by exponential decay.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EmissionModel {
    pub rise_ps: f64,
    pub lifetime_ps: f64,
}

impl EmissionModel {
    pub fn new(rise_ps: f64, lifetime_ps: f64) -> Result<Self> {
        if !(lifetime_ps > 0.0) || !(rise_ps >= 0.0) {
            return Err(Error::Domain("lifetime must be > 0 and rise >= 0"));
        }
        Ok(Self { rise_ps, lifetime_ps })
    }

    /// Jitter and lifetime implied by an emitter specification.
    pub fn from_emitter(spec: &EmitterSpec) -> Self {
        Self { rise_ps: spec.rise_time_ps, lifetime_ps: spec.lifetime_ps() }
    }
}

/// Detection chain model. Efficiency multiplies every photon (not dark
/// counts); it rescales rates and leaves normalized correlations alone.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetectorModel {
    pub efficiency: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self { efficiency: 1.0 }
    }
}

impl DetectorModel {
    pub fn new(efficiency: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&efficiency) {
            return Err(Error::Domain("efficiency must lie in [0, 1]"));
        }
        Ok(Self { efficiency })
    }
}

/// One of the two detectors behind the splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Detector {
    D1,
    D2,
}

impl Detector {
    pub fn as_str(&self) -> &'static str {
        match self {
            Detector::D1 => "D1",
            Detector::D2 => "D2",
        }
    }
}

/// A timestamped detector click.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionEvent {
    pub time_ns: f64,
    pub detector: Detector,
}

/// Time-ordered click stream of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    events: Vec<DetectionEvent>,
}

impl DetectionRecord {
    /// Build a record, sorting events by time (detector breaks ties).
    pub fn new(mut events: Vec<DetectionEvent>) -> Self {
        events.sort_by(|a, b| a.time_ns.total_cmp(&b.time_ns).then(a.detector.cmp(&b.detector)));
        Self { events }
    }

    pub fn events(&self) -> &[DetectionEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Click times of one detector, ascending.
    pub fn detector_times(&self, detector: Detector) -> Vec<f64> {
        self.events
            .iter()
            .filter(|e| e.detector == detector)
            .map(|e| e.time_ns)
            .collect()
    }
}

fn route(rng: &mut impl Rng) -> Detector {
    if rng.random::<bool>() {
        Detector::D1
    } else {
        Detector::D2
    }
}

pub(crate) fn push_background(
    events: &mut Vec<DetectionEvent>,
    rng: &mut impl Rng,
    pulse_time_ns: f64,
    rep_period_ns: f64,
    bg: &BackgroundSpec,
    detector: &DetectorModel,
) {
    let n_bg = poisson(rng, bg.effective_mean() * detector.efficiency);
    for _ in 0..n_bg {
        let t = pulse_time_ns + exponential(rng, bg.decay_time_ps) / 1000.0;
        events.push(DetectionEvent { time_ns: t, detector: route(rng) });
    }
    let n_dark = poisson(rng, bg.dark_rate_hz * rep_period_ns * 1e-9);
    for _ in 0..n_dark {
        let t = pulse_time_ns + rng.random::<f64>() * rep_period_ns;
        events.push(DetectionEvent { time_ns: t, detector: route(rng) });
    }
}

/// Simulate a pulsed Hanbury Brown-Twiss run.
///
/// Each pulse emits at most one signal photon (two-level emitter) at a
/// sampled emission time, plus Poisson background with an exponential
/// envelope and uniform dark counts; every photon is routed to one of two
/// detectors with probability 1/2. Deterministic per seed.
pub fn simulate_hbt(
    train: &PulseTrainSpec,
    emission: &EmissionModel,
    bg: &BackgroundSpec,
    detector: &DetectorModel,
    seed: u64,
) -> DetectionRecord {
    let mut events = Vec::new();
    for pulse in 0..train.n_pulses {
        let mut rng = substream(seed, pulse as u64);
        let t0 = pulse as f64 * train.rep_period_ns;
        if rng.random::<f64>() < train.excitation_prob * detector.efficiency {
            let t = t0 + sample_emission_time(&mut rng, emission.rise_ps, emission.lifetime_ps) / 1000.0;
            events.push(DetectionEvent { time_ns: t, detector: route(&mut rng) });
        }
        push_background(&mut events, &mut rng, t0, train.rep_period_ns, bg, detector);
    }
    DetectionRecord::new(events)
}

/// Coincidence counts versus signed delay `t(D2) − t(D1)`, binned
/// symmetrically around zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationHistogram {
    /// ns
    pub bin_width_ns: f64,
    half_bins: usize,
    counts: Vec<u64>,
}

impl CorrelationHistogram {
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Center of bin `i`, ns. Bin `half_bins` is centered on zero delay.
    pub fn delay_at(&self, i: usize) -> f64 {
        (i as i64 - self.half_bins as i64) as f64 * self.bin_width_ns
    }

    /// Bin centers, ascending.
    pub fn delays(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|i| self.delay_at(i)).collect()
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Largest delay magnitude covered by the histogram, ns.
    pub fn max_delay(&self) -> f64 {
        self.half_bins as f64 * self.bin_width_ns
    }

    /// Summed counts of bins whose centers lie within `half_width` of
    /// `center`.
    pub fn peak_area(&self, center_ns: f64, half_width_ns: f64) -> u64 {
        let mut area = 0;
        for i in 0..self.counts.len() {
            if (self.delay_at(i) - center_ns).abs() <= half_width_ns + 1e-12 {
                area += self.counts[i];
            }
        }
        area
    }
}

/// Histogram of all D1-D2 pair delays within `±window_ns`.
///
/// Each qualifying pair contributes one count at the signed delay
/// `t(D2) − t(D1)`; a source symmetric across detectors therefore gives a
/// histogram symmetric in delay.
pub fn correlate(
    record: &DetectionRecord,
    bin_width_ns: f64,
    window_ns: f64,
) -> Result<CorrelationHistogram> {
    if record.len() < 2 {
        return Err(Error::InsufficientData("need at least two events to correlate"));
    }
    if !(bin_width_ns > 0.0) || !(window_ns > 0.0) {
        return Err(Error::Domain("bin width and window must be positive"));
    }
    let half_bins = (window_ns / bin_width_ns).round() as usize;
    if half_bins == 0 {
        return Err(Error::Domain("window must cover at least one bin"));
    }
    let t1 = record.detector_times(Detector::D1);
    let t2 = record.detector_times(Detector::D2);
    let mut counts = alloc::vec![0u64; 2 * half_bins + 1];
    let reach = (half_bins as f64 + 0.5) * bin_width_ns;
    let mut lo = 0usize;
    for &a in &t1 {
        while lo < t2.len() && t2[lo] < a - reach {
            lo += 1;
        }
        let mut j = lo;
        while j < t2.len() && t2[j] <= a + reach {
            let idx = ((t2[j] - a) / bin_width_ns).round() as i64;
            if idx.unsigned_abs() as usize <= half_bins {
                counts[(idx + half_bins as i64) as usize] += 1;
            }
            j += 1;
        }
    }
    Ok(CorrelationHistogram { bin_width_ns, half_bins, counts })
}

/// A pulsed `g²(0)` estimate with its counting-statistics uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Pulsed `g²(0)`: the integrated central-peak area over the mean
/// side-peak area. Peaks are integrated over `rep_period / 2` wide
/// windows; the histogram must span at least three side peaks.
pub fn g2_zero(hist: &CorrelationHistogram, rep_period_ns: f64) -> Result<G2Estimate> {
    if !(rep_period_ns > 0.0) {
        return Err(Error::Domain("repetition period must be positive"));
    }
    let half_width = rep_period_ns / 4.0;
    let k_max = ((hist.max_delay() - half_width) / rep_period_ns).floor() as i64;
    let mut side_areas = Vec::new();
    for k in -k_max..=k_max {
        if k == 0 {
            continue;
        }
        side_areas.push(hist.peak_area(k as f64 * rep_period_ns, half_width));
    }
    if side_areas.len() < 3 {
        return Err(Error::InsufficientData("histogram must span at least three side peaks"));
    }
    let central = hist.peak_area(0.0, half_width) as f64;
    let side_total: u64 = side_areas.iter().sum();
    if side_total == 0 {
        return Err(Error::DegenerateInput("side peaks are empty"));
    }
    let mean_side = side_total as f64 / side_areas.len() as f64;
    let value = central / mean_side;
    // Poisson propagation through the ratio.
    let var_central = central;
    let var_mean = side_total as f64 / (side_areas.len() as f64).powi(2);
    let stderr =
        (var_central / (mean_side * mean_side) + value * value * var_mean / (mean_side * mean_side)).sqrt();
    Ok(G2Estimate { value, stderr })
}

/// Background level (mean photons per pulse) at which the simulated
/// pulsed `g²(0)` matches `target` within 0.02, found by bisection.
///
/// The same seed is reused for every trial level, making the noisy
/// objective monotone in practice. Fails with a convergence error if the
/// target cannot be bracketed or the bracket collapses without reaching
/// the tolerance.
pub fn calibrate_background(
    target_g2: f64,
    train: &PulseTrainSpec,
    emission: &EmissionModel,
    bg_template: &BackgroundSpec,
    detector: &DetectorModel,
    bin_width_ns: f64,
    seed: u64,
) -> Result<f64> {
    const TOL: f64 = 0.02;
    if !(0.0..1.0).contains(&target_g2) {
        return Err(Error::Domain("target g2 must lie in [0, 1)"));
    }
    if target_g2 == 0.0 {
        return Ok(0.0);
    }
    let window = 3.5 * train.rep_period_ns;
    let eval = |mean: f64| -> Result<f64> {
        let record = simulate_hbt(train, emission, &bg_template.with_mean(mean), detector, seed);
        let hist = correlate(&record, bin_width_ns, window)?;
        Ok(g2_zero(&hist, train.rep_period_ns)?.value)
    };

    let mut lo = 0.0;
    let mut g_lo = eval(0.0).unwrap_or(0.0);
    if (g_lo - target_g2).abs() <= TOL {
        return Ok(0.0);
    }
    if g_lo > target_g2 {
        return Err(Error::Convergence("g2 already exceeds the target with zero background"));
    }
    let mut hi = 0.25;
    let mut g_hi = eval(hi)?;
    let mut doublings = 0;
    while g_hi < target_g2 {
        doublings += 1;
        if doublings > 24 {
            return Err(Error::Convergence("target g2 not reachable by raising background"));
        }
        lo = hi;
        g_lo = g_hi;
        hi *= 2.0;
        g_hi = eval(hi)?;
    }
    if g_hi < g_lo {
        return Err(Error::Convergence("g2 is not monotone in the background level"));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let g_mid = eval(mid)?;
        if (g_mid - target_g2).abs() <= TOL {
            return Ok(mid);
        }
        if g_mid < target_g2 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) < 1e-6 * hi.max(1.0) {
            break;
        }
    }
    let mid = 0.5 * (lo + hi);
    if (eval(mid)? - target_g2).abs() <= TOL {
        Ok(mid)
    } else {
        Err(Error::Convergence("bisection did not reach the g2 tolerance"))
    }
}

/// Autocorrelation count-rate factor after transfer: collecting from the
/// far cavity scales coincidence rates by the square of the transfer
/// intensity ratio.
pub fn transfer_count_scaling(intensity_ratio: f64) -> Result<f64> {
    if !(intensity_ratio > 0.0) || intensity_ratio > 1.0 {
        return Err(Error::Domain("intensity ratio must lie in (0, 1]"));
    }
    Ok(intensity_ratio * intensity_ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ideal_train(n: usize) -> PulseTrainSpec {
        PulseTrainSpec::single(13.0, n, 1.0).unwrap()
    }

    fn emission() -> EmissionModel {
        EmissionModel::new(23.0, 116.0).unwrap()
    }

    #[test]
    fn at_most_one_signal_photon_per_pulse() {
        let train = ideal_train(20_000);
        let record = simulate_hbt(&train, &emission(), &BackgroundSpec::none(), &DetectorModel::default(), 42);
        assert!(record.len() > 19_000);
        let mut per_pulse = alloc::vec![0u32; train.n_pulses + 1];
        for e in record.events() {
            let idx = (e.time_ns / train.rep_period_ns).floor() as usize;
            per_pulse[idx.min(train.n_pulses)] += 1;
        }
        assert!(per_pulse.iter().all(|&c| c <= 1));
    }

    #[test]
    fn identical_seeds_identical_records() {
        let train = ideal_train(500);
        let bg = BackgroundSpec::new(0.4, 100.0, 200.0, None).unwrap();
        let a = simulate_hbt(&train, &emission(), &bg, &DetectorModel::default(), 7);
        let b = simulate_hbt(&train, &emission(), &bg, &DetectorModel::default(), 7);
        assert_eq!(a, b);
        let c = simulate_hbt(&train, &emission(), &bg, &DetectorModel::default(), 8);
        assert_ne!(a, c);
    }

    #[test]
    fn correlate_single_pair() {
        let record = DetectionRecord::new(alloc::vec![
            DetectionEvent { time_ns: 0.0, detector: Detector::D1 },
            DetectionEvent { time_ns: 5.0, detector: Detector::D2 },
        ]);
        let hist = correlate(&record, 1.0, 10.0).unwrap();
        assert_eq!(hist.total_counts(), 1);
        let delays = hist.delays();
        let hot: Vec<f64> = (0..delays.len())
            .filter(|&i| hist.counts()[i] > 0)
            .map(|i| delays[i])
            .collect();
        assert_eq!(hot, alloc::vec![5.0]);
    }

    #[test]
    fn correlate_requires_two_events() {
        let record = DetectionRecord::new(alloc::vec![DetectionEvent {
            time_ns: 1.0,
            detector: Detector::D1,
        }]);
        assert!(matches!(correlate(&record, 1.0, 10.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn histogram_counts_match_brute_force() {
        // Conservation of pairs against an O(n²) oracle.
        let train = PulseTrainSpec::single(13.0, 300, 0.9).unwrap();
        let bg = BackgroundSpec::new(0.8, 100.0, 1000.0, None).unwrap();
        let record = simulate_hbt(&train, &emission(), &bg, &DetectorModel::default(), 3);
        let window = 45.0;
        let bin = 0.5;
        let hist = correlate(&record, bin, window).unwrap();
        let mut brute = 0u64;
        let edge = (window / bin).round() * bin + bin / 2.0;
        for a in record.events() {
            for b in record.events() {
                if a.detector == Detector::D1 && b.detector == Detector::D2 {
                    let tau = b.time_ns - a.time_ns;
                    if tau.abs() <= edge && ((tau / bin).round() * bin).abs() <= window + 1e-9 {
                        brute += 1;
                    }
                }
            }
        }
        assert_eq!(hist.total_counts(), brute);
    }

    #[test]
    fn poisson_record_is_flat() {
        // Homogeneous Poisson clicks: every bin within 3σ of the expectation.
        let mut rng = crate::rng::stream(19);
        let span = 2.0e5;
        let n = 30_000;
        let mut events = Vec::with_capacity(n);
        for _ in 0..n {
            events.push(DetectionEvent {
                time_ns: rng.random::<f64>() * span,
                detector: route(&mut rng),
            });
        }
        let record = DetectionRecord::new(events);
        let n1 = record.detector_times(Detector::D1).len() as f64;
        let n2 = record.detector_times(Detector::D2).len() as f64;
        let hist = correlate(&record, 2.0, 40.0).unwrap();
        let expected = n1 * n2 * hist.bin_width_ns / span;
        for &c in hist.counts() {
            let dev = (c as f64 - expected).abs() / expected.sqrt();
            assert!(dev < 3.5, "bin deviates {dev} sigma from flat");
        }
    }

    #[test]
    fn pulsed_source_peaks_at_rep_period_multiples() {
        let train = ideal_train(40_000);
        let record = simulate_hbt(&train, &emission(), &BackgroundSpec::none(), &DetectorModel::default(), 11);
        let hist = correlate(&record, 0.2, 45.0).unwrap();
        for k in [1i64, 2, 3] {
            let peak = hist.peak_area(k as f64 * 13.0, 13.0 / 4.0);
            let gap = hist.peak_area(k as f64 * 13.0 - 6.5, 13.0 / 8.0);
            assert!(peak > 1000, "peak {k} too small: {peak}");
            assert!(gap < peak / 100, "gap next to peak {k} not empty: {gap}");
        }
    }

    #[test]
    fn side_peaks_are_stationary() {
        let train = ideal_train(60_000);
        let bg = BackgroundSpec::new(0.3, 100.0, 0.0, None).unwrap();
        let record = simulate_hbt(&train, &emission(), &bg, &DetectorModel::default(), 23);
        let hist = correlate(&record, 0.2, 45.0).unwrap();
        let areas: Vec<f64> = [-3i64, -2, -1, 1, 2, 3]
            .iter()
            .map(|&k| hist.peak_area(k as f64 * 13.0, 13.0 / 4.0) as f64)
            .collect();
        let mean = areas.iter().sum::<f64>() / areas.len() as f64;
        for a in &areas {
            assert!((a - mean).abs() < 4.0 * mean.sqrt(), "side peak {a} vs mean {mean}");
        }
    }

    #[test]
    fn ideal_emitter_has_zero_central_peak() {
        let train = ideal_train(50_000);
        let record = simulate_hbt(&train, &emission(), &BackgroundSpec::none(), &DetectorModel::default(), 1);
        let hist = correlate(&record, 0.2, 45.0).unwrap();
        let g2 = g2_zero(&hist, 13.0).unwrap();
        assert_eq!(g2.value, 0.0);
        assert_eq!(g2.stderr, 0.0);
    }

    #[test]
    fn poisson_background_gives_unit_g2() {
        let train = PulseTrainSpec::single(13.0, 60_000, 0.0).unwrap();
        let bg = BackgroundSpec::new(1.0, 100.0, 0.0, None).unwrap();
        let record = simulate_hbt(&train, &emission(), &bg, &DetectorModel::default(), 29);
        let hist = correlate(&record, 0.2, 45.0).unwrap();
        let g2 = g2_zero(&hist, 13.0).unwrap();
        assert!((g2.value - 1.0).abs() < 3.0 * g2.stderr, "g2 {} ± {}", g2.value, g2.stderr);
    }

    #[test]
    fn g2_requires_three_side_peaks() {
        let train = ideal_train(2_000);
        let bg = BackgroundSpec::new(0.5, 100.0, 0.0, None).unwrap();
        let record = simulate_hbt(&train, &emission(), &bg, &DetectorModel::default(), 5);
        let hist = correlate(&record, 0.2, 14.0).unwrap(); // spans only ±1 peaks
        assert!(matches!(g2_zero(&hist, 13.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn filter_scales_background_mean() {
        let bg = BackgroundSpec::new(1.0, 100.0, 0.0, Some(360.0)).unwrap();
        assert_relative_eq!(bg.effective_mean(), 0.1, max_relative = 1e-12);
        let wide = BackgroundSpec::new(1.0, 100.0, 0.0, Some(1e6)).unwrap();
        assert_relative_eq!(wide.effective_mean(), 1.0);
        let open = BackgroundSpec::new(1.0, 100.0, 0.0, None).unwrap();
        assert_relative_eq!(open.effective_mean(), 1.0);
    }

    #[test]
    fn calibration_reproduces_target_g2() {
        let train = ideal_train(60_000);
        let bg = BackgroundSpec::none();
        let det = DetectorModel::default();
        let level =
            calibrate_background(0.35, &train, &emission(), &bg, &det, 0.2, 77).unwrap();
        assert!(level > 0.0);
        // Re-simulate with an independent seed.
        let record = simulate_hbt(&train, &emission(), &bg.with_mean(level), &det, 1234);
        let hist = correlate(&record, 0.2, 45.0).unwrap();
        let g2 = g2_zero(&hist, 13.0).unwrap();
        assert!((g2.value - 0.35).abs() < 0.03, "re-simulated g2 {}", g2.value);
    }

    #[test]
    fn higher_target_needs_more_background() {
        let train = ideal_train(30_000);
        let bg = BackgroundSpec::none();
        let det = DetectorModel::default();
        let b35 = calibrate_background(0.35, &train, &emission(), &bg, &det, 0.2, 77).unwrap();
        let b50 = calibrate_background(0.50, &train, &emission(), &bg, &det, 0.2, 77).unwrap();
        assert!(b50 > b35, "b50 {b50} <= b35 {b35}");
        let zero = calibrate_background(0.0, &train, &emission(), &bg, &det, 0.2, 77).unwrap();
        assert_eq!(zero, 0.0);
        // The unfiltered transfer-collection level reproduces its target.
        let record = simulate_hbt(&train, &emission(), &bg.with_mean(b50), &det, 4242);
        let hist = correlate(&record, 0.2, 45.0).unwrap();
        let g2 = g2_zero(&hist, 13.0).unwrap();
        assert!((g2.value - 0.50).abs() < 0.15, "re-simulated g2 {}", g2.value);
    }

    #[test]
    fn central_peak_stays_empty_for_any_seed() {
        let train = ideal_train(8_000);
        for seed in [0u64, 1, 7, 0xDEAD, u64::MAX] {
            let record =
                simulate_hbt(&train, &emission(), &BackgroundSpec::none(), &DetectorModel::default(), seed);
            let hist = correlate(&record, 0.2, 45.0).unwrap();
            assert_eq!(hist.peak_area(0.0, 13.0 / 4.0), 0, "seed {seed}");
        }
    }

    #[test]
    fn transfer_scaling_squares_the_ratio() {
        assert_relative_eq!(transfer_count_scaling(0.12).unwrap(), 0.0144, max_relative = 1e-12);
        assert_relative_eq!(transfer_count_scaling(1.0).unwrap(), 1.0);
        assert_relative_eq!(transfer_count_scaling(0.49).unwrap(), 0.2401, max_relative = 1e-12);
        assert!(transfer_count_scaling(0.0).is_err());
        assert!(transfer_count_scaling(1.2).is_err());
        assert!(transfer_count_scaling(-0.1).is_err());
    }
}
