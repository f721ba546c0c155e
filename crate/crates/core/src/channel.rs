//! Infrared reflection channel: chest displacement to photodetector voltage.
//!
//! `v[i] = dc + g(d) * k * chest[i] + drift(t_i) + n[i]` with a power-law path
//! gain `g(d) = (d0 / d)^n`, a slow sinusoidal ambient drift and white Gaussian
//! sensor noise whose level does not depend on distance. An optional ADC stage
//! clamps and quantizes the result.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::{derive_seed, rng_from_seed};
use crate::waveform::{BreathingClass, ChestTrace};

/// Sensor noise level committed after calibrating the default distance sweep.
pub const DEFAULT_NOISE_SIGMA: f64 = 0.07;

const STREAM_DRIFT_PHASE: u64 = 1;
const STREAM_NOISE: u64 = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("invalid channel config: {0}")]
    InvalidConfig(String),
    #[error("length mismatch: chest trace has {chest} samples, sensor trace has {sensor}")]
    LengthMismatch { chest: usize, sensor: usize },
    #[error("quantization requested but adc_bits is not set")]
    NoAdc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    /// Sensor-to-chest distance in meters.
    pub distance: f64,
    pub reference_distance: f64,
    pub path_loss_exponent: f64,
    /// Volts per unit displacement at the reference distance.
    pub signal_gain_at_reference: f64,
    pub dc_offset: f64,
    pub noise_sigma: f64,
    pub drift_amplitude: f64,
    pub drift_frequency: f64,
    pub adc_bits: Option<u32>,
    pub adc_full_scale: f64,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            distance: 0.5,
            reference_distance: 0.5,
            path_loss_exponent: 2.0,
            signal_gain_at_reference: 1.0,
            dc_offset: 0.5,
            noise_sigma: DEFAULT_NOISE_SIGMA,
            drift_amplitude: 0.002,
            drift_frequency: 0.02,
            adc_bits: Some(12),
            adc_full_scale: 2.0,
            seed: 0,
        }
    }
}

impl ChannelConfig {
    pub fn at_distance(distance: f64) -> Self {
        Self {
            distance,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |msg: String| Err(ChannelError::InvalidConfig(msg));
        let finite = [
            self.distance,
            self.reference_distance,
            self.path_loss_exponent,
            self.signal_gain_at_reference,
            self.dc_offset,
            self.noise_sigma,
            self.drift_amplitude,
            self.drift_frequency,
            self.adc_full_scale,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("all numeric fields must be finite".into());
        }
        if self.distance <= 0.0 {
            return bad(format!("distance must be > 0, got {}", self.distance));
        }
        if self.reference_distance <= 0.0 {
            return bad(format!(
                "reference_distance must be > 0, got {}",
                self.reference_distance
            ));
        }
        if self.path_loss_exponent < 0.0 {
            return bad(format!(
                "path_loss_exponent must be >= 0, got {}",
                self.path_loss_exponent
            ));
        }
        if self.noise_sigma < 0.0 {
            return bad(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        if let Some(bits) = self.adc_bits {
            if !(1..=24).contains(&bits) {
                return bad(format!("adc_bits must be in 1..=24, got {bits}"));
            }
            if self.adc_full_scale <= 0.0 {
                return bad(format!("adc_full_scale must be > 0, got {}", self.adc_full_scale));
            }
        }
        Ok(())
    }
}

/// Where a sensor trace came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub distance: f64,
    pub channel_seed: u64,
    /// Seed of the chest trace that was transduced.
    pub source_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorTrace {
    /// Volts.
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub label: BreathingClass,
    pub true_rate: f64,
    pub true_depth: f64,
    pub provenance: Provenance,
}

impl SensorTrace {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

pub fn path_gain(config: &ChannelConfig) -> f64 {
    (config.reference_distance / config.distance).powf(config.path_loss_exponent)
}

/// Analog front end, without the ADC stage.
pub fn transduce(chest: &ChestTrace, config: &ChannelConfig) -> Result<SensorTrace, ChannelError> {
    config.validate()?;
    let gain = path_gain(config) * config.signal_gain_at_reference;
    let phase = rng_from_seed(derive_seed(config.seed, &[STREAM_DRIFT_PHASE])).random_range(0.0..2.0 * PI);
    let mut noise_rng = rng_from_seed(derive_seed(config.seed, &[STREAM_NOISE]));
    let noise = Normal::new(0.0, config.noise_sigma).map_err(|e| ChannelError::InvalidConfig(e.to_string()))?;

    let samples = chest
        .samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let t = i as f64 / chest.sample_rate;
            let mut v = config.dc_offset + gain * x;
            if config.drift_amplitude != 0.0 {
                v += config.drift_amplitude * (2.0 * PI * config.drift_frequency * t + phase).sin();
            }
            if config.noise_sigma > 0.0 {
                v += noise.sample(&mut noise_rng);
            }
            v
        })
        .collect();

    Ok(SensorTrace {
        samples,
        sample_rate: chest.sample_rate,
        label: chest.label,
        true_rate: chest.true_rate,
        true_depth: chest.true_depth,
        provenance: Provenance {
            distance: config.distance,
            channel_seed: config.seed,
            source_seed: chest.seed,
        },
    })
}

/// Clamps to `[0, full_scale]` and rounds to the nearest of `2^bits` evenly
/// spaced levels, the lowest at 0 and the highest at full scale.
pub fn quantize(trace: &SensorTrace, config: &ChannelConfig) -> Result<SensorTrace, ChannelError> {
    let bits = config.adc_bits.ok_or(ChannelError::NoAdc)?;
    config.validate()?;
    let steps = ((1u64 << bits) - 1) as f64;
    let fs = config.adc_full_scale;
    let samples = trace
        .samples
        .iter()
        .map(|&v| {
            let code = (v.clamp(0.0, fs) / fs * steps).round();
            code * fs / steps
        })
        .collect();
    Ok(SensorTrace {
        samples,
        ..trace.clone()
    })
}

/// Transduction followed by quantization when an ADC is configured.
pub fn acquire(chest: &ChestTrace, config: &ChannelConfig) -> Result<SensorTrace, ChannelError> {
    let analog = transduce(chest, config)?;
    match config.adc_bits {
        Some(_) => quantize(&analog, config),
        None => Ok(analog),
    }
}

fn variance(x: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = x.clone().count() as f64;
    let mean = x.clone().sum::<f64>() / n;
    x.map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Signal-to-noise ratio in dB of a sensor trace against its known chest input.
///
/// Returns `-inf` when the chest signal has no variance and `+inf` when the
/// residual is exactly zero.
pub fn measure_snr(chest: &ChestTrace, sensor: &SensorTrace, config: &ChannelConfig) -> Result<f64, ChannelError> {
    if chest.samples.len() != sensor.samples.len() {
        return Err(ChannelError::LengthMismatch {
            chest: chest.samples.len(),
            sensor: sensor.samples.len(),
        });
    }
    let gain = path_gain(config) * config.signal_gain_at_reference;
    let signal = chest.samples.iter().map(|&x| gain * x);
    let residual = chest
        .samples
        .iter()
        .zip(&sensor.samples)
        .map(|(&x, &v)| v - config.dc_offset - gain * x);
    let signal_var = variance(signal);
    let residual_var = variance(residual);
    if signal_var == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    // Residuals at the rounding level of the sensor values count as zero.
    let scale = sensor.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if residual_var <= (1e-12 * scale).powi(2) {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal_var / residual_var).log10())
}
