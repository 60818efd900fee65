//! Hong-Ou-Mandel two-photon interference.
//!
//! Photon pairs separated by the interferometer path delay collide on the
//! output splitter when the first photon takes the long arm and the second
//! the short arm. Interference is modelled at the outcome-probability
//! level: a colliding pair produces a coincidence with probability
//! `(1 − I·V²)/2`, a non-colliding pair with probability 1/2, which fully
//! determines the observable five-peak coincidence cluster at delays
//! `{−2Δ, −Δ, 0, +Δ, +2Δ}`.

use alloc::vec::Vec;
use rand::Rng;

#[allow(unused_imports)]
use num_traits::Float;

use crate::counting::{
    push_background, BackgroundSpec, CorrelationHistogram, DetectionEvent, DetectionRecord,
    Detector, DetectorModel, EmissionModel, PulseTrainSpec,
};
use crate::emitter::sample_emission_time;
use crate::rng::{poisson, substream};
use crate::{Error, Result};

/// Exponent with which the interferometer visibility suppresses the
/// overlap term (field-interference convention: the correction enters as
/// `I·V²`).
pub const VISIBILITY_EXPONENT: i32 = 2;

/// Unbalanced interferometer parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InterferometerSpec {
    /// Long-short path delay, ns. Must equal the pulse pair separation.
    pub path_delay_ns: f64,
    /// Classical fringe visibility of the setup, [0, 1].
    pub visibility: f64,
    /// Probability that a photon takes the long arm, (0, 1).
    pub splitter_ratio: f64,
    /// Expected dark counts per repetition window.
    pub dark_fraction: f64,
}

impl InterferometerSpec {
    pub fn new(
        path_delay_ns: f64,
        visibility: f64,
        splitter_ratio: f64,
        dark_fraction: f64,
    ) -> Result<Self> {
        if !(path_delay_ns > 0.0) {
            return Err(Error::Domain("path delay must be positive"));
        }
        if !(0.0..=1.0).contains(&visibility) {
            return Err(Error::Domain("visibility must lie in [0, 1]"));
        }
        if !(splitter_ratio > 0.0) || !(splitter_ratio < 1.0) {
            return Err(Error::Domain("splitter ratio must lie in (0, 1)"));
        }
        if !(dark_fraction >= 0.0) {
            return Err(Error::Domain("dark fraction must be >= 0"));
        }
        Ok(Self { path_delay_ns, visibility, splitter_ratio, dark_fraction })
    }

    /// The measured setup: 2.3 ns delay, 88% visibility, balanced splitter.
    pub fn reference() -> Self {
        Self { path_delay_ns: 2.3, visibility: 0.88, splitter_ratio: 0.5, dark_fraction: 0.0 }
    }

    fn v_sq(&self) -> f64 {
        self.visibility.powi(VISIBILITY_EXPONENT)
    }

    /// Side-to-central normalization of the path enumeration,
    /// `(q² + s²) / (2 q s)`; equals one for a balanced splitter.
    fn side_norm(&self) -> f64 {
        let s = self.splitter_ratio;
        let q = 1.0 - s;
        (q * q + s * s) / (2.0 * q * s)
    }
}

/// Areas of the five-peak coincidence cluster at `{−2Δ, −Δ, 0, +Δ, +2Δ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomCluster {
    /// Peak centers, ns.
    pub delays: [f64; 5],
    /// Peak areas (probabilities per emitted pair, or counts).
    pub areas: [f64; 5],
    /// Per-peak uncertainties; zero for analytic clusters.
    pub stderr: [f64; 5],
}

impl HomCluster {
    /// Central-peak area over the mean of the ±Δ peaks.
    pub fn central_ratio(&self) -> f64 {
        let side = 0.5 * (self.areas[1] + self.areas[3]);
        self.areas[2] / side
    }
}

/// Expected cluster areas (coincidence probability per emitted pair) for
/// a given mean wavepacket overlap.
///
/// Enumerating the four path pairs with long-arm probability `s` and
/// `q = 1 − s`: the SL pair coincides at ±2Δ with probability `q·s/2`,
/// the SS and LL pairs at ±Δ with probability `(q² + s²)/2`, and the
/// colliding LS pair at zero delay with probability
/// `s·q·(1 − I·V²)/2`. For a balanced splitter the relative areas are
/// `1 : 2 : 2(1 − I·V²) : 2 : 1`.
pub fn analytic_cluster(overlap: f64, spec: &InterferometerSpec) -> Result<HomCluster> {
    if !(0.0..=1.0).contains(&overlap) {
        return Err(Error::Domain("overlap must lie in [0, 1]"));
    }
    let d = spec.path_delay_ns;
    let s = spec.splitter_ratio;
    let q = 1.0 - s;
    let outer = q * s / 4.0;
    let side = (q * q + s * s) / 4.0;
    let central = s * q * (1.0 - overlap * spec.v_sq()) / 2.0;
    Ok(HomCluster {
        delays: [-2.0 * d, -d, 0.0, d, 2.0 * d],
        areas: [outer, side, central, side, outer],
        stderr: [0.0; 5],
    })
}

/// Simulate the interference experiment: per repetition two photons are
/// emitted `pair_separation` apart, routed through the long or short arm,
/// and detected; colliding pairs coincide with probability
/// `(1 − I·V²)/2`, all other pairs with probability 1/2. Background and
/// dark events are appended as in the autocorrelation simulation.
pub fn simulate_hom(
    train: &PulseTrainSpec,
    emission: &EmissionModel,
    overlap: f64,
    spec: &InterferometerSpec,
    bg: &BackgroundSpec,
    detector: &DetectorModel,
    seed: u64,
) -> Result<DetectionRecord> {
    if !(0.0..=1.0).contains(&overlap) {
        return Err(Error::Domain("overlap must lie in [0, 1]"));
    }
    if (train.pair_separation_ns - spec.path_delay_ns).abs() > 1e-9 {
        return Err(Error::Config("pulse pair separation must equal the interferometer path delay"));
    }
    let coincidence_prob = (1.0 - overlap * spec.v_sq()) / 2.0;
    let mut events = Vec::new();
    for rep in 0..train.n_pulses {
        let mut rng = substream(seed, rep as u64);
        let t0 = rep as f64 * train.rep_period_ns;

        let has_first = rng.random::<f64>() < train.excitation_prob * detector.efficiency;
        let has_second = rng.random::<f64>() < train.excitation_prob * detector.efficiency;
        let jitter_first =
            sample_emission_time(&mut rng, emission.rise_ps, emission.lifetime_ps) / 1000.0;
        let jitter_second =
            sample_emission_time(&mut rng, emission.rise_ps, emission.lifetime_ps) / 1000.0;
        let first_long = rng.random::<f64>() < spec.splitter_ratio;
        let second_long = rng.random::<f64>() < spec.splitter_ratio;

        let arm = |long: bool| if long { spec.path_delay_ns } else { 0.0 };
        let t_first = t0 + jitter_first + arm(first_long);
        let t_second = t0 + train.pair_separation_ns + jitter_second + arm(second_long);

        match (has_first, has_second) {
            (true, true) => {
                let colliding = first_long && !second_long;
                if colliding {
                    if rng.random::<f64>() < coincidence_prob {
                        // Coincidence: opposite detectors, random order.
                        let (d_first, d_second) = if rng.random::<bool>() {
                            (Detector::D1, Detector::D2)
                        } else {
                            (Detector::D2, Detector::D1)
                        };
                        events.push(DetectionEvent { time_ns: t_first, detector: d_first });
                        events.push(DetectionEvent { time_ns: t_second, detector: d_second });
                    } else {
                        // Bunched: both photons leave through one port.
                        let d = if rng.random::<bool>() { Detector::D1 } else { Detector::D2 };
                        events.push(DetectionEvent { time_ns: t_first, detector: d });
                        events.push(DetectionEvent { time_ns: t_second, detector: d });
                    }
                } else {
                    let d_first = if rng.random::<bool>() { Detector::D1 } else { Detector::D2 };
                    let d_second = if rng.random::<bool>() { Detector::D1 } else { Detector::D2 };
                    events.push(DetectionEvent { time_ns: t_first, detector: d_first });
                    events.push(DetectionEvent { time_ns: t_second, detector: d_second });
                }
            }
            (true, false) => {
                let d = if rng.random::<bool>() { Detector::D1 } else { Detector::D2 };
                events.push(DetectionEvent { time_ns: t_first, detector: d });
            }
            (false, true) => {
                let d = if rng.random::<bool>() { Detector::D1 } else { Detector::D2 };
                events.push(DetectionEvent { time_ns: t_second, detector: d });
            }
            (false, false) => {}
        }

        push_background(&mut events, &mut rng, t0, train.rep_period_ns, bg, detector);
        let n_dark = poisson(&mut rng, spec.dark_fraction);
        for _ in 0..n_dark {
            let t = t0 + rng.random::<f64>() * train.rep_period_ns;
            let d = if rng.random::<bool>() { Detector::D1 } else { Detector::D2 };
            events.push(DetectionEvent { time_ns: t, detector: d });
        }
    }
    Ok(DetectionRecord::new(events))
}

/// Integrate the five cluster peaks out of a coincidence histogram.
///
/// Bins are assigned to the nearest multiple of the path delay within
/// ±2Δ; bins with |τ| in (2.5Δ, 3.3Δ] estimate a flat baseline (dark and
/// background accidentals) that is subtracted from each peak.
pub fn extract_cluster(
    hist: &CorrelationHistogram,
    spec: &InterferometerSpec,
) -> Result<HomCluster> {
    let d = spec.path_delay_ns;
    if hist.max_delay() < 2.5 * d {
        return Err(Error::InsufficientData("histogram does not span the five-peak cluster"));
    }
    let mut areas = [0.0f64; 5];
    let mut bins_per_peak = [0usize; 5];
    let mut baseline_total = 0.0;
    let mut baseline_bins = 0usize;
    for (i, &count) in hist.counts().iter().enumerate() {
        let tau = hist.delay_at(i);
        let k = (tau / d).round() as i64;
        if k.abs() <= 2 && (tau - k as f64 * d).abs() <= d / 2.0 {
            let idx = (k + 2) as usize;
            areas[idx] += count as f64;
            bins_per_peak[idx] += 1;
        } else if tau.abs() > 2.5 * d && tau.abs() <= 3.3 * d {
            baseline_total += count as f64;
            baseline_bins += 1;
        }
    }
    let baseline_per_bin = if baseline_bins > 0 { baseline_total / baseline_bins as f64 } else { 0.0 };
    let baseline_var_per_bin =
        if baseline_bins > 0 { baseline_total / (baseline_bins as f64).powi(2) } else { 0.0 };
    let mut stderr = [0.0f64; 5];
    for i in 0..5 {
        let n = bins_per_peak[i] as f64;
        let raw = areas[i];
        areas[i] = (raw - baseline_per_bin * n).max(0.0);
        stderr[i] = (raw + n * n * baseline_var_per_bin).sqrt();
    }
    Ok(HomCluster {
        delays: [-2.0 * d, -d, 0.0, d, 2.0 * d],
        areas,
        stderr,
    })
}

/// A mean-wavepacket-overlap estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapEstimate {
    pub overlap: f64,
    pub stderr: f64,
    /// Set when the raw estimate fell outside [0, 1] and was clamped.
    pub clamped: bool,
}

/// Invert the cluster into a mean wavepacket overlap:
/// `I = (1 − R·norm + g2_correction) / V²` where `R` is the
/// central/side area ratio and `norm` the splitter normalization (one for
/// a balanced splitter). `g2_correction` compensates residual multiphoton
/// events of the source and is simply added before rescaling.
pub fn estimate_overlap(
    cluster: &HomCluster,
    spec: &InterferometerSpec,
    g2_correction: f64,
) -> Result<OverlapEstimate> {
    if !(spec.visibility > 0.0) {
        return Err(Error::Domain("visibility must be positive to invert the cluster"));
    }
    let side_mean = 0.5 * (cluster.areas[1] + cluster.areas[3]);
    if !(side_mean > 0.0) {
        return Err(Error::InsufficientData("side peaks are empty"));
    }
    let ratio = cluster.areas[2] / side_mean;
    let raw = (1.0 - ratio * spec.side_norm() + g2_correction) / spec.v_sq();
    let clamped = !(0.0..=1.0).contains(&raw);
    let overlap = raw.clamp(0.0, 1.0);

    let sigma = |i: usize| {
        if cluster.stderr[i] > 0.0 {
            cluster.stderr[i]
        } else {
            cluster.areas[i].max(1.0).sqrt()
        }
    };
    let var_central = sigma(2) * sigma(2);
    let var_side_mean = 0.25 * (sigma(1) * sigma(1) + sigma(3) * sigma(3));
    let var_ratio = (var_central + ratio * ratio * var_side_mean) / (side_mean * side_mean);
    let stderr = spec.side_norm() * var_ratio.sqrt() / spec.v_sq();
    Ok(OverlapEstimate { overlap, stderr, clamped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::correlate;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn paired_train(n: usize) -> PulseTrainSpec {
        PulseTrainSpec::new(13.0, 2.3, n, 1.0).unwrap()
    }

    fn emission() -> EmissionModel {
        EmissionModel::new(23.0, 116.0).unwrap()
    }

    #[test]
    fn analytic_perfect_interference() {
        let spec = InterferometerSpec::new(2.3, 1.0, 0.5, 0.0).unwrap();
        let c = analytic_cluster(1.0, &spec).unwrap();
        assert_eq!(c.areas[2], 0.0);
        assert_relative_eq!(c.areas[1] / c.areas[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(c.areas[3] / c.areas[4], 2.0, max_relative = 1e-12);
    }

    #[test]
    fn analytic_distinguishable_matches_path_enumeration() {
        // Independent enumeration: SS, SL, LS, LL at 1/4 weight each with
        // coincidence probabilities 1/2, 1/2, 1/2, 1/2 at overlap zero.
        let spec = InterferometerSpec::new(2.3, 0.88, 0.5, 0.0).unwrap();
        let c = analytic_cluster(0.0, &spec).unwrap();
        let per_pair: f64 = c.areas.iter().sum();
        assert_relative_eq!(per_pair, 0.5, max_relative = 1e-12);
        assert_relative_eq!(c.areas[2] / c.areas[1], 1.0, max_relative = 1e-12);
        assert_relative_eq!(c.areas[1] / c.areas[0], 2.0, max_relative = 1e-12);
    }

    #[test]
    fn analytic_reference_point() {
        let spec = InterferometerSpec::reference();
        let c = analytic_cluster(0.67, &spec).unwrap();
        // 2(1 − 0.67·0.88²) relative to the outer peaks.
        assert_relative_eq!(c.areas[2] / c.areas[0], 2.0 * (1.0 - 0.67 * 0.7744), max_relative = 1e-12);
        assert_relative_eq!(c.central_ratio(), 1.0 - 0.67 * 0.7744, max_relative = 1e-12);
        assert_relative_eq!(c.central_ratio(), 0.481, epsilon = 1e-3);
    }

    #[test]
    fn analytic_rejects_out_of_range_overlap() {
        let spec = InterferometerSpec::reference();
        assert!(analytic_cluster(-0.1, &spec).is_err());
        assert!(analytic_cluster(1.1, &spec).is_err());
    }

    #[test]
    fn estimator_reference_inversion() {
        let spec = InterferometerSpec::reference();
        let d = spec.path_delay_ns;
        let cluster = HomCluster {
            delays: [-2.0 * d, -d, 0.0, d, 2.0 * d],
            areas: [1.0, 2.0, 2.0 * 0.481152, 2.0, 1.0],
            stderr: [0.0; 5],
        };
        let est = estimate_overlap(&cluster, &spec, 0.0).unwrap();
        assert_relative_eq!(est.overlap, 0.67, epsilon = 1e-6);
        assert!(!est.clamped);
    }

    #[test]
    fn estimator_flat_cluster_means_zero_overlap() {
        let spec = InterferometerSpec::new(2.3, 1.0, 0.5, 0.0).unwrap();
        let cluster = HomCluster {
            delays: [-4.6, -2.3, 0.0, 2.3, 4.6],
            areas: [1.0, 2.0, 2.0, 2.0, 1.0],
            stderr: [0.0; 5],
        };
        let est = estimate_overlap(&cluster, &spec, 0.0).unwrap();
        assert_eq!(est.overlap, 0.0);
    }

    #[test]
    fn estimator_applies_g2_correction() {
        let spec = InterferometerSpec::new(2.3, 1.0, 0.5, 0.0).unwrap();
        let cluster = analytic_cluster(0.5, &spec).unwrap();
        let est = estimate_overlap(&cluster, &spec, 0.1).unwrap();
        assert_relative_eq!(est.overlap, 0.6, max_relative = 1e-12);
    }

    #[test]
    fn simulate_rejects_mismatched_delay() {
        let train = paired_train(10);
        let mut spec = InterferometerSpec::reference();
        spec.path_delay_ns = 2.0;
        let out = simulate_hom(&train, &emission(), 0.5, &spec, &BackgroundSpec::none(), &DetectorModel::default(), 1);
        assert!(matches!(out, Err(Error::Config(_))));
    }

    #[test]
    fn monte_carlo_matches_analytic_cluster() {
        let n = 150_000;
        let train = paired_train(n);
        let spec = InterferometerSpec::reference();
        for (seed, overlap) in [(101u64, 0.0f64), (102, 0.25), (103, 0.5), (104, 0.67), (105, 1.0)] {
            let record = simulate_hom(
                &train,
                &emission(),
                overlap,
                &spec,
                &BackgroundSpec::none(),
                &DetectorModel::default(),
                seed,
            )
            .unwrap();
            let hist = correlate(&record, 0.1, 8.0).unwrap();
            let cluster = extract_cluster(&hist, &spec).unwrap();
            let expect = analytic_cluster(overlap, &spec).unwrap();
            for i in 0..5 {
                let want = expect.areas[i] * n as f64;
                let got = cluster.areas[i];
                let sigma = want.sqrt().max(1.0);
                assert!(
                    (got - want).abs() <= 3.5 * sigma,
                    "overlap {overlap} peak {i}: got {got}, want {want} ± {sigma}"
                );
            }
        }
    }

    #[test]
    fn perfect_overlap_gives_empty_central_peak() {
        let train = paired_train(100_000);
        let spec = InterferometerSpec::new(2.3, 1.0, 0.5, 0.0).unwrap();
        let record = simulate_hom(
            &train,
            &emission(),
            1.0,
            &spec,
            &BackgroundSpec::none(),
            &DetectorModel::default(),
            9,
        )
        .unwrap();
        let hist = correlate(&record, 0.1, 8.0).unwrap();
        let cluster = extract_cluster(&hist, &spec).unwrap();
        assert_eq!(cluster.areas[2], 0.0);
    }

    #[test]
    fn estimator_round_trip_through_simulation() {
        let train = paired_train(200_000);
        let spec = InterferometerSpec::reference();
        let record = simulate_hom(
            &train,
            &emission(),
            0.67,
            &spec,
            &BackgroundSpec::none(),
            &DetectorModel::default(),
            55,
        )
        .unwrap();
        let hist = correlate(&record, 0.1, 8.0).unwrap();
        let cluster = extract_cluster(&hist, &spec).unwrap();
        let est = estimate_overlap(&cluster, &spec, 0.0).unwrap();
        assert!((est.overlap - 0.67).abs() < 0.05, "estimate {}", est.overlap);
    }

    #[test]
    fn interference_redistributes_but_conserves_colliding_outcomes() {
        // Same seed: photon times and paths are identical; an increasing
        // overlap only moves colliding pairs from the coincidence cluster
        // into bunched (same-detector) outcomes. Jitter-free emission so
        // the near-zero-delay window captures exactly the colliding pairs.
        let train = paired_train(40_000);
        let jitterless = EmissionModel::new(0.0, 1e-3).unwrap();
        let spec = InterferometerSpec::new(2.3, 1.0, 0.5, 0.0).unwrap();
        let mut outcome_totals = Vec::new();
        let mut centrals = Vec::new();
        for overlap in [0.0, 0.5, 1.0] {
            let record = simulate_hom(
                &train,
                &jitterless,
                overlap,
                &spec,
                &BackgroundSpec::none(),
                &DetectorModel::default(),
                77,
            )
            .unwrap();
            // Count near-zero-delay pairs, split by same/different detector.
            let mut coincident = 0u64;
            let mut bunched = 0u64;
            let events = record.events();
            for i in 0..events.len() {
                for j in (i + 1)..events.len() {
                    let dt = events[j].time_ns - events[i].time_ns;
                    if dt > 1.15 {
                        break;
                    }
                    if events[i].detector == events[j].detector {
                        bunched += 1;
                    } else {
                        coincident += 1;
                    }
                }
            }
            assert_eq!(record.len(), 2 * train.n_pulses);
            outcome_totals.push(coincident + bunched);
            centrals.push(coincident);
        }
        assert_eq!(outcome_totals[0], outcome_totals[1]);
        assert_eq!(outcome_totals[1], outcome_totals[2]);
        assert!(centrals[0] > centrals[1] && centrals[1] > centrals[2]);
        assert_eq!(centrals[2], 0);
    }

    #[test]
    fn dark_counts_are_subtracted_by_the_baseline() {
        let train = paired_train(60_000);
        let mut spec = InterferometerSpec::reference();
        spec.dark_fraction = 0.05;
        let record = simulate_hom(
            &train,
            &emission(),
            0.67,
            &spec,
            &BackgroundSpec::none(),
            &DetectorModel::default(),
            31,
        )
        .unwrap();
        let hist = correlate(&record, 0.1, 8.0).unwrap();
        let cluster = extract_cluster(&hist, &spec).unwrap();
        let est = estimate_overlap(&cluster, &spec, 0.0).unwrap();
        assert!((est.overlap - 0.67).abs() < 0.08, "estimate {}", est.overlap);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn estimator_inverts_analytic_exactly(
            overlap in 0.0..=1.0f64,
            visibility in 0.2..=1.0f64,
            splitter in 0.1..0.9f64,
        ) {
            let spec = InterferometerSpec::new(2.3, visibility, splitter, 0.0).unwrap();
            let cluster = analytic_cluster(overlap, &spec).unwrap();
            let est = estimate_overlap(&cluster, &spec, 0.0).unwrap();
            prop_assert!((est.overlap - overlap).abs() < 1e-9);
        }

        #[test]
        fn central_peak_decreases_with_overlap(v in 0.3..=1.0f64) {
            let spec = InterferometerSpec::new(2.3, v, 0.5, 0.0).unwrap();
            let mut last = f64::INFINITY;
            for overlap in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let c = analytic_cluster(overlap, &spec).unwrap();
                prop_assert!(c.areas[2] < last);
                last = c.areas[2];
            }
        }
    }
}
