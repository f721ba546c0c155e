//! Fixed-order feature vector for one processed recording.
//!
//! The conditioned signal is the detrended, low-passed trace in volts; the
//! normalized signal is that trace scaled to zero mean and unit variance.
//! Amplitude features use the conditioned signal, everything else is
//! invariant to the trace's scale.

use thiserror::Error;

use crate::channel::SensorTrace;
use crate::dsp::{self, DspConfig, DspError};

pub const FEATURE_COUNT: usize = 12;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "est_rate_bpm",
    "band_power_ratio",
    "rms_amplitude",
    "peak_to_peak",
    "variance",
    "zero_crossing_rate",
    "spectral_entropy",
    "autocorr_peak_value",
    "autocorr_peak_lag_s",
    "peaks_per_minute",
    "crest_factor",
    "near_constant_flag",
];

pub const MIN_DURATION_S: f64 = 10.0;

/// Below this band-power ratio the rate estimate is reported as 0.
pub const RATE_GATE_BAND_RATIO: f64 = 0.1;
pub const PEAK_MIN_PROMINENCE: f64 = 0.5;
pub const PEAK_MIN_SPACING_S: f64 = 0.8;
pub const AUTOCORR_LAG_RANGE_S: (f64, f64) = (1.0, 20.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("recording too short: {duration} s (need at least {MIN_DURATION_S} s)")]
    TooShort { duration: f64 },
    #[error(transparent)]
    Dsp(#[from] DspError),
}

pub fn feature_names() -> [&'static str; FEATURE_COUNT] {
    FEATURE_NAMES
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub est_rate_bpm: f64,
    pub band_power_ratio: f64,
    pub rms_amplitude: f64,
    pub peak_to_peak: f64,
    pub variance: f64,
    /// Crossings per second of the normalized signal.
    pub zero_crossing_rate: f64,
    /// Shannon entropy of the non-DC power distribution, divided by its maximum.
    pub spectral_entropy: f64,
    pub autocorr_peak_value: f64,
    pub autocorr_peak_lag_s: f64,
    pub peaks_per_minute: f64,
    pub crest_factor: f64,
    pub near_constant_flag: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.est_rate_bpm,
            self.band_power_ratio,
            self.rms_amplitude,
            self.peak_to_peak,
            self.variance,
            self.zero_crossing_rate,
            self.spectral_entropy,
            self.autocorr_peak_value,
            self.autocorr_peak_lag_s,
            self.peaks_per_minute,
            self.crest_factor,
            self.near_constant_flag,
        ]
    }

    pub fn from_array(v: [f64; FEATURE_COUNT]) -> Self {
        Self {
            est_rate_bpm: v[0],
            band_power_ratio: v[1],
            rms_amplitude: v[2],
            peak_to_peak: v[3],
            variance: v[4],
            zero_crossing_rate: v[5],
            spectral_entropy: v[6],
            autocorr_peak_value: v[7],
            autocorr_peak_lag_s: v[8],
            peaks_per_minute: v[9],
            crest_factor: v[10],
            near_constant_flag: v[11],
        }
    }
}

pub fn extract_features(sensor: &SensorTrace, config: &DspConfig) -> Result<FeatureVector, FeatureError> {
    let fs = sensor.sample_rate;
    let duration = sensor.duration();
    if !(duration >= MIN_DURATION_S) {
        return Err(FeatureError::TooShort { duration });
    }

    let detrended = dsp::detrend(&sensor.samples, fs)?;
    let conditioned = dsp::lowpass(&detrended, fs, config.cutoff_hz, config.taps)?;
    let normalized = dsp::normalize(&conditioned)?;
    let near_constant = normalized.near_constant;

    let spectrum = dsp::periodogram(&conditioned, fs, config.pad_for(conditioned.len()))?;
    let band = (config.band_hz.0, config.band_hz.1.min(spectrum.nyquist()));
    let peak = dsp::dominant_frequency(&spectrum, band)?;

    let est_rate_bpm = if near_constant || peak.zero_power || peak.band_power_ratio < RATE_GATE_BAND_RATIO {
        0.0
    } else {
        60.0 * peak.frequency
    };

    let n = conditioned.len() as f64;
    let mean = conditioned.iter().sum::<f64>() / n;
    let variance = conditioned.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let rms_amplitude = (conditioned.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let max = conditioned.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = conditioned.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_abs = conditioned.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let crest_factor = if rms_amplitude > 0.0 {
        max_abs / rms_amplitude
    } else {
        0.0
    };

    let z = &normalized.samples;
    let (autocorr_peak_value, autocorr_peak_lag) = autocorrelation_peak(z, fs, AUTOCORR_LAG_RANGE_S);
    let min_spacing = (PEAK_MIN_SPACING_S * fs).ceil() as usize;
    let peaks = find_peaks(z, PEAK_MIN_PROMINENCE, min_spacing.max(1));

    Ok(FeatureVector {
        est_rate_bpm,
        band_power_ratio: peak.band_power_ratio,
        rms_amplitude,
        peak_to_peak: max - min,
        variance,
        zero_crossing_rate: zero_crossings(z) as f64 / duration,
        spectral_entropy: normalized_spectral_entropy(&spectrum.power[1..]),
        autocorr_peak_value,
        autocorr_peak_lag_s: autocorr_peak_lag,
        peaks_per_minute: peaks.len() as f64 * 60.0 / duration,
        crest_factor,
        near_constant_flag: if near_constant { 1.0 } else { 0.0 },
    })
}

/// Sign changes, counting zero as positive. An all-zero signal has none.
pub fn zero_crossings(x: &[f64]) -> usize {
    x.windows(2).filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0)).count()
}

pub fn normalized_spectral_entropy(power: &[f64]) -> f64 {
    let total: f64 = power.iter().sum();
    if total <= 0.0 || power.len() < 2 {
        return 0.0;
    }
    let h: f64 = power
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| {
            let q = p / total;
            -q * q.ln()
        })
        .sum();
    (h / (power.len() as f64).ln()).clamp(0.0, 1.0)
}

/// Highest local maximum of the biased normalized autocorrelation inside the
/// lag window, as `(value, lag in seconds)`. `(0, 0)` when there is none.
pub fn autocorrelation_peak(x: &[f64], sample_rate: f64, lag_range_s: (f64, f64)) -> (f64, f64) {
    let n = x.len();
    let energy: f64 = x.iter().map(|v| v * v).sum();
    if energy <= 0.0 || n < 3 {
        return (0.0, 0.0);
    }
    let lo = ((lag_range_s.0 * sample_rate).round() as usize).max(1);
    let hi = ((lag_range_s.1 * sample_rate).round() as usize).min(n - 2);
    if lo > hi {
        return (0.0, 0.0);
    }
    let r = |lag: usize| -> f64 { x[..n - lag].iter().zip(&x[lag..]).map(|(a, b)| a * b).sum::<f64>() / energy };

    let values: Vec<f64> = (lo - 1..=hi + 1).map(r).collect();
    let mut best: Option<(f64, usize)> = None;
    for (offset, w) in values.windows(3).enumerate() {
        if w[1] > w[0] && w[1] >= w[2] && best.is_none_or(|(v, _)| w[1] > v) {
            best = Some((w[1], lo + offset));
        }
    }
    match best {
        Some((value, lag)) => (value, lag as f64 / sample_rate),
        None => (0.0, 0.0),
    }
}

/// Peak indices with at least `min_prominence` and `min_spacing` samples between
/// them. Taller peaks win spacing conflicts; plateaus report their middle sample.
pub fn find_peaks(x: &[f64], min_prominence: f64, min_spacing: usize) -> Vec<usize> {
    let n = x.len();
    let mut candidates = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if x[i - 1] < x[i] {
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                candidates.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }

    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| x[candidates[b]].total_cmp(&x[candidates[a]]).then(a.cmp(&b)));
    let mut keep = vec![true; candidates.len()];
    for &k in &order {
        if !keep[k] {
            continue;
        }
        let p = candidates[k];
        for (m, &q) in candidates.iter().enumerate() {
            if m != k && keep[m] && q.abs_diff(p) < min_spacing && x[q] <= x[p] {
                keep[m] = false;
            }
        }
    }

    candidates
        .into_iter()
        .zip(keep)
        .filter(|&(p, kept)| kept && prominence(x, p) >= min_prominence)
        .map(|(p, _)| p)
        .collect()
}

fn prominence(x: &[f64], peak: usize) -> f64 {
    let height = x[peak];
    let mut left_min = height;
    for &v in x[..peak].iter().rev() {
        if v > height {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = height;
    for &v in &x[peak + 1..] {
        if v > height {
            break;
        }
        right_min = right_min.min(v);
    }
    height - left_min.max(right_min)
}
