//! Ground-truth chest displacement synthesis for the eight breathing classes.
//!
//! Displacement is expressed as a fraction of maximum rib-cage travel, so
//! every trace lives in `[0, 1]`. Regular classes are trains of raised-cosine
//! cycles; the faulty class is built from one of three artifact generators.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp;
use crate::seed::{derive_seed, rng_from_seed};

pub const DEFAULT_DURATION_S: f64 = 60.0;
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 20.0;
pub const DEFAULT_PERIOD_JITTER: f64 = 0.05;
pub const DEFAULT_AMPLITUDE_JITTER: f64 = 0.05;

/// Faulty traces must keep their breathing-band power ratio below this.
pub const FAULTY_MAX_BAND_RATIO: f64 = 0.5;
pub const FAULTY_MAX_RETRIES: usize = 10;

// Sub-stream tags for seed derivation.
const STREAM_SPEC: u64 = 1;
const STREAM_JITTER: u64 = 2;
const STREAM_FAULT: u64 = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveformError {
    #[error("invalid waveform spec: {0}")]
    InvalidSpec(String),
    #[error("could not synthesize an aperiodic faulty trace after {0} retries")]
    SynthesisFailure(usize),
    #[error("unknown breathing class id {0}")]
    UnknownClass(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum BreathingClass {
    Eupnea = 0,
    Apnea = 1,
    Tachypnea = 2,
    Bradypnea = 3,
    Hyperpnea = 4,
    Hypopnea = 5,
    Kussmaul = 6,
    Faulty = 7,
}

pub const CLASS_COUNT: usize = 8;

impl BreathingClass {
    pub const ALL: [BreathingClass; CLASS_COUNT] = [
        BreathingClass::Eupnea,
        BreathingClass::Apnea,
        BreathingClass::Tachypnea,
        BreathingClass::Bradypnea,
        BreathingClass::Hyperpnea,
        BreathingClass::Hypopnea,
        BreathingClass::Kussmaul,
        BreathingClass::Faulty,
    ];

    pub fn id(self) -> u32 {
        self as u32
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_id(id: u32) -> Result<Self, WaveformError> {
        Self::ALL
            .get(id as usize)
            .copied()
            .ok_or(WaveformError::UnknownClass(id))
    }

    pub fn name(self) -> &'static str {
        match self {
            BreathingClass::Eupnea => "Eupnea",
            BreathingClass::Apnea => "Apnea",
            BreathingClass::Tachypnea => "Tachypnea",
            BreathingClass::Bradypnea => "Bradypnea",
            BreathingClass::Hyperpnea => "Hyperpnea",
            BreathingClass::Hypopnea => "Hypopnea",
            BreathingClass::Kussmaul => "Kussmaul",
            BreathingClass::Faulty => "Faulty",
        }
    }
}

impl fmt::Display for BreathingClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl TryFrom<u32> for BreathingClass {
    type Error = WaveformError;
    fn try_from(id: u32) -> Result<Self, Self::Error> {
        Self::from_id(id)
    }
}

impl From<BreathingClass> for u32 {
    fn from(c: BreathingClass) -> u32 {
        c.id()
    }
}

/// Rate (BPM) and depth (fraction of maximum rib-cage travel) ranges of a class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassRanges {
    pub rate_min: f64,
    pub rate_max: f64,
    pub depth_min: f64,
    pub depth_max: f64,
}

impl ClassRanges {
    const fn new(rate: (f64, f64), depth_pct: (f64, f64)) -> Self {
        Self {
            rate_min: rate.0,
            rate_max: rate.1,
            depth_min: depth_pct.0 / 100.0,
            depth_max: depth_pct.1 / 100.0,
        }
    }

    pub fn contains(&self, rate: f64, depth: f64) -> bool {
        rate >= self.rate_min && rate <= self.rate_max && depth >= self.depth_min && depth <= self.depth_max
    }
}

/// Table of breathing characteristics. Faulty data has no constraint ("any").
pub fn class_ranges(class: BreathingClass) -> ClassRanges {
    match class {
        BreathingClass::Eupnea => ClassRanges::new((12.0, 20.0), (30.0, 58.0)),
        BreathingClass::Apnea => ClassRanges::new((0.0, 0.0), (0.0, 0.0)),
        BreathingClass::Tachypnea => ClassRanges::new((21.0, 50.0), (30.0, 58.0)),
        BreathingClass::Bradypnea => ClassRanges::new((1.0, 11.0), (30.0, 58.0)),
        BreathingClass::Hyperpnea => ClassRanges::new((12.0, 20.0), (59.0, 100.0)),
        BreathingClass::Hypopnea => ClassRanges::new((12.0, 20.0), (1.0, 29.0)),
        BreathingClass::Kussmaul => ClassRanges::new((21.0, 50.0), (59.0, 100.0)),
        BreathingClass::Faulty => ClassRanges {
            rate_min: 0.0,
            rate_max: f64::INFINITY,
            depth_min: 0.0,
            depth_max: 1.0,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveformSpec {
    pub class: BreathingClass,
    /// Breaths per minute.
    pub rate: f64,
    pub depth: f64,
    pub duration: f64,
    pub sample_rate: f64,
    pub period_jitter: f64,
    pub amplitude_jitter: f64,
    pub seed: u64,
}

impl WaveformSpec {
    pub fn validate(&self) -> Result<(), WaveformError> {
        let bad = |msg: String| Err(WaveformError::InvalidSpec(msg));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be > 0, got {}", self.duration));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return bad(format!("sample_rate must be > 0, got {}", self.sample_rate));
        }
        for (name, j) in [
            ("period_jitter", self.period_jitter),
            ("amplitude_jitter", self.amplitude_jitter),
        ] {
            if !(0.0..0.5).contains(&j) {
                return bad(format!("{name} must be in [0, 0.5), got {j}"));
            }
        }
        if self.class != BreathingClass::Faulty && !class_ranges(self.class).contains(self.rate, self.depth) {
            return bad(format!(
                "rate {} / depth {} outside the {} ranges",
                self.rate, self.depth, self.class
            ));
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        sample_count(self.duration, self.sample_rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChestTrace {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub label: BreathingClass,
    pub true_rate: f64,
    pub true_depth: f64,
    pub seed: u64,
}

impl ChestTrace {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

fn sample_count(duration: f64, sample_rate: f64) -> usize {
    (duration * sample_rate).round() as usize
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn symmetric_jitter<R: Rng>(rng: &mut R, width: f64) -> f64 {
    if width > 0.0 {
        rng.random_range(-width..=width)
    } else {
        0.0
    }
}

/// Draws rate and depth uniformly inside the class ranges, with default jitters.
///
/// Faulty specs carry zero rate and depth; their trace comes from [`synth_faulty_trace`].
pub fn sample_spec(class: BreathingClass, duration: f64, sample_rate: f64, seed: u64) -> WaveformSpec {
    let (rate, depth) = if class == BreathingClass::Faulty {
        (0.0, 0.0)
    } else {
        let r = class_ranges(class);
        let mut rng = rng_from_seed(derive_seed(seed, &[STREAM_SPEC]));
        let rate = uniform(&mut rng, r.rate_min, r.rate_max);
        let depth = uniform(&mut rng, r.depth_min, r.depth_max);
        (rate, depth)
    };
    WaveformSpec {
        class,
        rate,
        depth,
        duration,
        sample_rate,
        period_jitter: DEFAULT_PERIOD_JITTER,
        amplitude_jitter: DEFAULT_AMPLITUDE_JITTER,
        seed,
    }
}

/// Concatenated raised-cosine breathing cycles.
pub fn synth_chest_trace(spec: &WaveformSpec) -> Result<ChestTrace, WaveformError> {
    if spec.class == BreathingClass::Faulty {
        return Err(WaveformError::InvalidSpec(
            "faulty traces come from synth_faulty_trace".into(),
        ));
    }
    spec.validate()?;

    let n = spec.sample_count();
    let mut samples = vec![0.0; n];

    if spec.rate > 0.0 {
        let mut rng = rng_from_seed(derive_seed(spec.seed, &[STREAM_JITTER]));
        let nominal_period = 60.0 / spec.rate;
        let dt = 1.0 / spec.sample_rate;
        let mut cycle_start = 0.0;
        let mut i = 0;
        while i < n {
            let period = nominal_period * (1.0 + symmetric_jitter(&mut rng, spec.period_jitter));
            let amplitude = spec.depth * (1.0 + symmetric_jitter(&mut rng, spec.amplitude_jitter));
            let cycle_end = cycle_start + period;
            while i < n {
                let t = i as f64 * dt;
                if t >= cycle_end {
                    break;
                }
                let phase = 2.0 * PI * (t - cycle_start) / period;
                samples[i] = (amplitude * (1.0 - phase.cos()) / 2.0).clamp(0.0, 1.0);
                i += 1;
            }
            cycle_start = cycle_end;
        }
    }

    Ok(ChestTrace {
        samples,
        sample_rate: spec.sample_rate,
        label: spec.class,
        true_rate: spec.rate,
        true_depth: spec.depth,
        seed: spec.seed,
    })
}

/// Dispatches to the regular or faulty generator depending on the class.
pub fn synthesize(spec: &WaveformSpec) -> Result<ChestTrace, WaveformError> {
    match spec.class {
        BreathingClass::Faulty => synth_faulty_trace(spec.duration, spec.sample_rate, spec.seed),
        _ => synth_chest_trace(spec),
    }
}

/// Artifact families used for the faulty class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultMode {
    /// Random-walk baseline drift with a total excursion above 0.5.
    Drift,
    /// Piecewise-constant level with 3 to 8 discontinuities.
    Steps,
    /// Slow periodic sway clipped at a rail for at least half the samples.
    Saturation,
}

impl FaultMode {
    pub const ALL: [FaultMode; 3] = [FaultMode::Drift, FaultMode::Steps, FaultMode::Saturation];
}

/// Clipped raised-cosine sway: `offset ± amplitude * (1 - cos(2π f t + phase)) / 2`,
/// rising towards 1 when `clip_high`, falling towards 0 otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationParams {
    pub clip_high: bool,
    pub offset: f64,
    pub amplitude: f64,
    pub frequency_hz: f64,
    pub phase: f64,
}

pub fn saturation_samples(params: &SaturationParams, duration: f64, sample_rate: f64) -> Vec<f64> {
    let sign = if params.clip_high { 1.0 } else { -1.0 };
    (0..sample_count(duration, sample_rate))
        .map(|i| {
            let t = i as f64 / sample_rate;
            let rc = (1.0 - (2.0 * PI * params.frequency_hz * t + params.phase).cos()) / 2.0;
            (params.offset + sign * params.amplitude * rc).clamp(0.0, 1.0)
        })
        .collect()
}

fn drift_samples<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let normal = rand_distr::StandardNormal;
    let mut walk = Vec::with_capacity(n);
    let mut level = 0.0;
    for _ in 0..n {
        level += rng.sample::<f64, _>(normal);
        walk.push(level);
    }
    let lo = walk.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = walk.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let excursion = rng.random_range(0.55..=0.95);
    let base = rng.random_range(0.0..=(1.0 - excursion));
    // Step sigma is excursion / range of the unit walk.
    let scale = if hi > lo { excursion / (hi - lo) } else { 0.0 };
    walk.iter().map(|w| (base + (w - lo) * scale).clamp(0.0, 1.0)).collect()
}

fn step_samples<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let steps = rng.random_range(3..=8usize).min(n.saturating_sub(1));
    let mut edges = rand::seq::index::sample(rng, n.max(2) - 1, steps).into_vec();
    edges.iter_mut().for_each(|e| *e += 1);
    edges.sort_unstable();
    let levels: Vec<f64> = (0..=steps).map(|_| rng.random_range(0.0..=1.0)).collect();
    let mut out = Vec::with_capacity(n);
    let mut segment = 0;
    for i in 0..n {
        while segment < edges.len() && i >= edges[segment] {
            segment += 1;
        }
        out.push(levels[segment]);
    }
    out
}

fn random_saturation<R: Rng>(rng: &mut R) -> SaturationParams {
    let amplitude = rng.random_range(0.6..=1.0);
    let clipped_fraction: f64 = rng.random_range(0.5..=0.8);
    // Fraction of a raised-cosine cycle above level q is 1 - acos(1 - 2q) / π.
    let q = (1.0 - (PI * (1.0 - clipped_fraction)).cos()) / 2.0;
    let clip_high = rng.random_bool(0.5);
    let offset = if clip_high { 1.0 - q * amplitude } else { q * amplitude };
    SaturationParams {
        clip_high,
        offset,
        amplitude,
        frequency_hz: rng.random_range(1.0 / 60.0..=1.0 / 30.0),
        phase: rng.random_range(0.0..2.0 * PI),
    }
}

fn fault_samples<R: Rng>(rng: &mut R, mode: FaultMode, duration: f64, sample_rate: f64) -> Vec<f64> {
    let n = sample_count(duration, sample_rate);
    match mode {
        FaultMode::Drift => drift_samples(rng, n),
        FaultMode::Steps => step_samples(rng, n),
        FaultMode::Saturation => saturation_samples(&random_saturation(rng), duration, sample_rate),
    }
}

fn clipped_fraction(samples: &[f64]) -> f64 {
    let at_rail = samples.iter().filter(|&&v| v <= 0.0 || v >= 1.0).count();
    at_rail as f64 / samples.len().max(1) as f64
}

fn acceptable_fault(samples: &[f64], mode: FaultMode, sample_rate: f64) -> bool {
    if samples.len() < 2 {
        return true;
    }
    if mode == FaultMode::Saturation && clipped_fraction(samples) < 0.5 {
        return false;
    }
    match dsp::breathing_band_ratio(samples, sample_rate) {
        Ok(ratio) => ratio < FAULTY_MAX_BAND_RATIO,
        // Sample rates too low to contain the breathing band cannot carry a breathing component.
        Err(_) => true,
    }
}

fn faulty_trace(samples: Vec<f64>, sample_rate: f64, seed: u64) -> ChestTrace {
    ChestTrace {
        samples,
        sample_rate,
        label: BreathingClass::Faulty,
        true_rate: 0.0,
        true_depth: 0.0,
        seed,
    }
}

fn check_timing(duration: f64, sample_rate: f64) -> Result<(), WaveformError> {
    if !(duration > 0.0 && duration.is_finite() && sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(WaveformError::InvalidSpec(format!(
            "duration and sample_rate must be > 0, got {duration} s at {sample_rate} Hz"
        )));
    }
    Ok(())
}

/// Faulty-class trace: a uniformly drawn artifact mode, redrawn (mode included)
/// until it carries no breathing-band periodicity.
pub fn synth_faulty_trace(duration: f64, sample_rate: f64, seed: u64) -> Result<ChestTrace, WaveformError> {
    check_timing(duration, sample_rate)?;
    let mut rng = rng_from_seed(derive_seed(seed, &[STREAM_FAULT]));
    for _ in 0..=FAULTY_MAX_RETRIES {
        let mode = FaultMode::ALL[rng.random_range(0..FaultMode::ALL.len())];
        let samples = fault_samples(&mut rng, mode, duration, sample_rate);
        if acceptable_fault(&samples, mode, sample_rate) {
            return Ok(faulty_trace(samples, sample_rate, seed));
        }
    }
    Err(WaveformError::SynthesisFailure(FAULTY_MAX_RETRIES))
}

/// Like [`synth_faulty_trace`] but pinned to a single artifact mode.
pub fn synth_faulty_trace_with_mode(
    mode: FaultMode,
    duration: f64,
    sample_rate: f64,
    seed: u64,
) -> Result<ChestTrace, WaveformError> {
    check_timing(duration, sample_rate)?;
    let mut rng = rng_from_seed(derive_seed(seed, &[STREAM_FAULT, mode as u64]));
    for _ in 0..=FAULTY_MAX_RETRIES {
        let samples = fault_samples(&mut rng, mode, duration, sample_rate);
        if acceptable_fault(&samples, mode, sample_rate) {
            return Ok(faulty_trace(samples, sample_rate, seed));
        }
    }
    Err(WaveformError::SynthesisFailure(FAULTY_MAX_RETRIES))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::naive_dft;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn zero_jitter(class: BreathingClass, rate: f64, depth: f64) -> WaveformSpec {
        WaveformSpec {
            class,
            rate,
            depth,
            duration: 60.0,
            sample_rate: 20.0,
            period_jitter: 0.0,
            amplitude_jitter: 0.0,
            seed: 1,
        }
    }

    #[test]
    fn table_rows() {
        assert_eq!(
            class_ranges(BreathingClass::Eupnea),
            ClassRanges {
                rate_min: 12.0,
                rate_max: 20.0,
                depth_min: 0.30,
                depth_max: 0.58
            }
        );
        assert_eq!(
            class_ranges(BreathingClass::Apnea),
            ClassRanges {
                rate_min: 0.0,
                rate_max: 0.0,
                depth_min: 0.0,
                depth_max: 0.0
            }
        );
        assert_eq!(
            class_ranges(BreathingClass::Kussmaul),
            ClassRanges {
                rate_min: 21.0,
                rate_max: 50.0,
                depth_min: 0.59,
                depth_max: 1.0
            }
        );
        let brady = class_ranges(BreathingClass::Bradypnea);
        assert_eq!((brady.rate_min, brady.rate_max), (1.0, 11.0));
        let hypo = class_ranges(BreathingClass::Hypopnea);
        assert_eq!((hypo.depth_min, hypo.depth_max), (0.01, 0.29));
    }

    #[test]
    fn class_ids_are_a_bijection() {
        for (i, c) in BreathingClass::ALL.iter().enumerate() {
            assert_eq!(c.id() as usize, i);
            assert_eq!(BreathingClass::from_id(i as u32).unwrap(), *c);
        }
        assert_eq!(BreathingClass::from_id(7).unwrap().name(), "Faulty");
        assert_eq!(BreathingClass::from_id(8), Err(WaveformError::UnknownClass(8)));
    }

    #[test]
    fn apnea_spec_is_degenerate() {
        let s = sample_spec(BreathingClass::Apnea, 60.0, 20.0, 99);
        assert_eq!((s.rate, s.depth), (0.0, 0.0));
        let trace = synth_chest_trace(&s).unwrap();
        assert_eq!(trace.samples.len(), 1200);
        assert!(trace.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn eupnea_spec_in_range_and_deterministic() {
        let a = sample_spec(BreathingClass::Eupnea, 60.0, 20.0, 7);
        assert!((12.0..=20.0).contains(&a.rate));
        assert!((0.30..=0.58).contains(&a.depth));
        assert_eq!(a, sample_spec(BreathingClass::Eupnea, 60.0, 20.0, 7));
    }

    #[test]
    fn fifteen_bpm_exact_shape() {
        let trace = synth_chest_trace(&zero_jitter(BreathingClass::Eupnea, 15.0, 0.4)).unwrap();
        let peak = trace.samples.iter().cloned().fold(0.0, f64::max);
        assert!((peak - 0.4).abs() < 1e-12);
        // Period of 4 s is 80 samples.
        for i in 0..trace.samples.len() - 80 {
            assert!((trace.samples[i] - trace.samples[i + 80]).abs() < 1e-9);
        }
    }

    #[test]
    fn fifteen_bpm_dominant_dft_bin() {
        let trace = synth_chest_trace(&zero_jitter(BreathingClass::Eupnea, 15.0, 0.4)).unwrap();
        let mean = trace.samples.iter().sum::<f64>() / trace.samples.len() as f64;
        let x: Vec<Complex64> = trace.samples.iter().map(|v| Complex64::new(v - mean, 0.0)).collect();
        let spectrum = naive_dft(&x);
        let n = x.len();
        let (k, _) = spectrum[1..n / 2]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap();
        let resolution = 20.0 / n as f64;
        let freq = (k + 1) as f64 * resolution;
        assert!((freq - 0.25).abs() <= resolution, "{freq}");
    }

    #[test]
    fn peak_count_matches_rate() {
        for rate in [1.0, 4.0, 11.0, 15.0, 20.0, 33.0, 50.0] {
            let class = match rate {
                r if r < 12.0 => BreathingClass::Bradypnea,
                r if r <= 20.0 => BreathingClass::Eupnea,
                _ => BreathingClass::Tachypnea,
            };
            let trace = synth_chest_trace(&zero_jitter(class, rate, 0.4)).unwrap();
            let s = &trace.samples;
            let peaks = (1..s.len() - 1)
                .filter(|&i| s[i] > s[i - 1] && s[i] >= s[i + 1])
                .count();
            assert!((peaks as f64 - rate.round()).abs() <= 1.0, "rate {rate}: {peaks} peaks");
        }
    }

    #[test]
    fn faulty_class_rejected_by_regular_synth() {
        let s = sample_spec(BreathingClass::Faulty, 60.0, 20.0, 1);
        assert!(matches!(synth_chest_trace(&s), Err(WaveformError::InvalidSpec(_))));
        assert_eq!(synthesize(&s).unwrap().label, BreathingClass::Faulty);
    }

    #[test]
    fn invalid_specs() {
        let mut s = zero_jitter(BreathingClass::Eupnea, 15.0, 0.4);
        s.rate = 25.0;
        assert!(s.validate().is_err());
        let mut s = zero_jitter(BreathingClass::Eupnea, 15.0, 0.4);
        s.period_jitter = 0.5;
        assert!(s.validate().is_err());
        let mut s = zero_jitter(BreathingClass::Eupnea, 15.0, 0.4);
        s.duration = 0.0;
        assert!(s.validate().is_err());
        assert!(synth_faulty_trace(60.0, 0.0, 1).is_err());
    }

    #[test]
    fn full_saturation_is_constant_one() {
        let params = SaturationParams {
            clip_high: true,
            offset: 1.0,
            amplitude: 0.8,
            frequency_hz: 0.02,
            phase: 0.3,
        };
        let s = saturation_samples(&params, 60.0, 20.0);
        assert!(s.iter().all(|&v| v == 1.0));
        let low = SaturationParams {
            clip_high: false,
            offset: 0.0,
            ..params
        };
        assert!(saturation_samples(&low, 60.0, 20.0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn every_fault_mode_synthesizes() {
        for mode in FaultMode::ALL {
            for seed in 0..20 {
                let t = synth_faulty_trace_with_mode(mode, 60.0, 20.0, seed).unwrap();
                assert_eq!(t.samples.len(), 1200);
                assert!(dsp::breathing_band_ratio(&t.samples, 20.0).unwrap() < FAULTY_MAX_BAND_RATIO);
                if mode == FaultMode::Drift {
                    let hi = t.samples.iter().cloned().fold(f64::MIN, f64::max);
                    let lo = t.samples.iter().cloned().fold(f64::MAX, f64::min);
                    assert!(hi - lo > 0.5);
                }
                if mode == FaultMode::Saturation {
                    assert!(clipped_fraction(&t.samples) >= 0.5);
                }
            }
        }
    }

    #[test]
    fn drift_seed_three_below_half_of_eupnea_ratio() {
        let drift = synth_faulty_trace_with_mode(FaultMode::Drift, 60.0, 20.0, 3).unwrap();
        let eupnea = synth_chest_trace(&sample_spec(BreathingClass::Eupnea, 60.0, 20.0, 3)).unwrap();
        let r_drift = dsp::breathing_band_ratio(&drift.samples, 20.0).unwrap();
        let r_eupnea = dsp::breathing_band_ratio(&eupnea.samples, 20.0).unwrap();
        assert!(r_drift < 0.5 * r_eupnea, "{r_drift} vs {r_eupnea}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sampled_specs_stay_in_table(class_id in 0u32..7, seed in any::<u64>()) {
            let class = BreathingClass::from_id(class_id).unwrap();
            let s = sample_spec(class, 60.0, 20.0, seed);
            prop_assert!(class_ranges(class).contains(s.rate, s.depth));
        }

        #[test]
        fn traces_bounded_and_deterministic(class_id in 0u32..7, seed in any::<u64>()) {
            let class = BreathingClass::from_id(class_id).unwrap();
            let s = sample_spec(class, 30.0, 20.0, seed);
            let a = synth_chest_trace(&s).unwrap();
            let upper = (s.depth * (1.0 + s.amplitude_jitter)).min(1.0);
            prop_assert!(a.samples.iter().all(|&v| (0.0..=upper + 1e-12).contains(&v)));
            prop_assert_eq!(a, synth_chest_trace(&s).unwrap());
        }

        #[test]
        fn faulty_traces_bounded(seed in any::<u64>()) {
            let t = synth_faulty_trace(60.0, 20.0, seed).unwrap();
            prop_assert!(t.samples.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert_eq!(&t, &synth_faulty_trace(60.0, 20.0, seed).unwrap());
        }
    }
}
