//! Labelled recordings: waveform → channel → features.
//!
//! Recording `i` of class `c` always uses the same chest trace, whatever the
//! distance; only the channel seed depends on the distance. Accuracy changes
//! across a distance sweep therefore come from the channel alone.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{acquire, ChannelConfig, ChannelError, SensorTrace};
use crate::dsp::DspConfig;
use crate::features::{extract_features, feature_names, FeatureError, FEATURE_COUNT};
use crate::ml::{Dataset, MlError};
use crate::seed::derive_seed;
use crate::waveform::{
    sample_spec, synthesize, BreathingClass, ChestTrace, WaveformError, WaveformSpec, DEFAULT_AMPLITUDE_JITTER,
    DEFAULT_DURATION_S, DEFAULT_PERIOD_JITTER, DEFAULT_SAMPLE_RATE_HZ,
};

const STREAM_CHEST: u64 = 0x11;
const STREAM_CHANNEL: u64 = 0x12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error(transparent)]
    Waveform(#[from] WaveformError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error("per_class must be >= 1")]
    EmptyRequest,
}

/// Recording parameters shared by every class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub duration: f64,
    pub sample_rate: f64,
    pub period_jitter: f64,
    pub amplitude_jitter: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            duration: DEFAULT_DURATION_S,
            sample_rate: DEFAULT_SAMPLE_RATE_HZ,
            period_jitter: DEFAULT_PERIOD_JITTER,
            amplitude_jitter: DEFAULT_AMPLITUDE_JITTER,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), WaveformError> {
        let spec = sample_spec(BreathingClass::Eupnea, self.duration, self.sample_rate, 0);
        WaveformSpec {
            period_jitter: self.period_jitter,
            amplitude_jitter: self.amplitude_jitter,
            ..spec
        }
        .validate()
    }

    /// Same timing, both jitters set to `jitter`.
    pub fn with_jitter(self, jitter: f64) -> Self {
        Self {
            period_jitter: jitter,
            amplitude_jitter: jitter,
            ..self
        }
    }
}

/// One row of the feature table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRow {
    pub features: [f64; FEATURE_COUNT],
    pub label: BreathingClass,
    pub distance_m: f64,
    /// Seed of the chest trace the row was computed from.
    pub seed: u64,
}

pub fn chest_seed(seed: u64, class: BreathingClass, index: usize) -> u64 {
    derive_seed(seed, &[STREAM_CHEST, class.id() as u64, index as u64])
}

pub fn channel_seed(seed: u64, class: BreathingClass, index: usize, distance: f64) -> u64 {
    derive_seed(
        seed,
        &[STREAM_CHANNEL, class.id() as u64, index as u64, distance.to_bits()],
    )
}

pub fn chest_trace(class: BreathingClass, generator: &GeneratorConfig, seed: u64) -> Result<ChestTrace, WaveformError> {
    let spec = sample_spec(class, generator.duration, generator.sample_rate, seed);
    synthesize(&WaveformSpec {
        period_jitter: generator.period_jitter,
        amplitude_jitter: generator.amplitude_jitter,
        ..spec
    })
}

/// `per_class` sensor traces for each class at one distance, grouped by class
/// in the order given. `channel.distance` and `channel.seed` are overridden.
pub fn generate_traces(
    classes: &[BreathingClass],
    per_class: usize,
    distance: f64,
    channel: &ChannelConfig,
    generator: &GeneratorConfig,
    seed: u64,
) -> Result<Vec<SensorTrace>, DatasetError> {
    if per_class == 0 {
        return Err(DatasetError::EmptyRequest);
    }
    generator.validate()?;
    ChannelConfig { distance, ..*channel }.validate()?;
    let jobs: Vec<(BreathingClass, usize)> = classes
        .iter()
        .flat_map(|&c| (0..per_class).map(move |i| (c, i)))
        .collect();
    jobs.into_par_iter()
        .map(|(class, i)| {
            let chest = chest_trace(class, generator, chest_seed(seed, class, i))?;
            let config = ChannelConfig {
                distance,
                seed: channel_seed(seed, class, i, distance),
                ..*channel
            };
            Ok(acquire(&chest, &config)?)
        })
        .collect()
}

pub fn feature_row(trace: &SensorTrace, dsp: &DspConfig) -> Result<FeatureRow, FeatureError> {
    Ok(FeatureRow {
        features: extract_features(trace, dsp)?.to_array(),
        label: trace.label,
        distance_m: trace.provenance.distance,
        seed: trace.provenance.source_seed,
    })
}

pub fn feature_rows(traces: &[SensorTrace], dsp: &DspConfig) -> Result<Vec<FeatureRow>, DatasetError> {
    traces.par_iter().map(|t| Ok(feature_row(t, dsp)?)).collect()
}

pub fn to_dataset(rows: &[FeatureRow]) -> Result<Dataset, DatasetError> {
    Ok(Dataset::new(
        rows.iter().map(|r| r.features.to_vec()).collect(),
        rows.iter().map(|r| r.label.index()).collect(),
        feature_names().iter().map(|s| s.to_string()).collect(),
    )?)
}
