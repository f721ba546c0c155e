//! Signal conditioning and spectral analysis.
//!
//! The conditioning chain is detrend → zero-phase low-pass → normalize. Spectra
//! are one-sided periodograms computed with an in-place radix-2 FFT over a
//! zero-padded buffer.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lower and upper edge of the breathing band in Hz (3 to 60 BPM).
pub const BREATHING_BAND_HZ: (f64, f64) = (0.05, 1.0);

/// Standard deviation below which a trace is treated as flat.
pub const NEAR_CONSTANT_STD: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("input too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("cutoff {cutoff} Hz must lie in (0, {nyquist}) Hz")]
    InvalidCutoff { cutoff: f64, nyquist: f64 },
    #[error("filter taps must be odd and >= 11, got {0}")]
    InvalidTaps(usize),
    #[error("zero-pad length {pad} must be a power of two >= signal length {len}")]
    BadPadLength { pad: usize, len: usize },
    #[error("band [{lo}, {hi}] Hz is invalid for Nyquist {nyquist} Hz")]
    InvalidBand { lo: f64, hi: f64, nyquist: f64 },
    #[error("no spectral bins inside band [{lo}, {hi}] Hz")]
    EmptyBand { lo: f64, hi: f64 },
}

/// Parameters of the conditioning and spectral stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DspConfig {
    pub cutoff_hz: f64,
    pub taps: usize,
    /// FFT length; raised to the next power of two above the trace length if smaller.
    pub zero_pad_to: usize,
    pub band_hz: (f64, f64),
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            cutoff_hz: 2.0,
            taps: 101,
            zero_pad_to: 4096,
            band_hz: BREATHING_BAND_HZ,
        }
    }
}

impl DspConfig {
    /// Checks the filter and band against a sample rate.
    pub fn validate(&self, sample_rate: f64) -> Result<(), DspError> {
        lowpass_kernel(sample_rate, self.cutoff_hz, self.taps)?;
        let (lo, hi) = self.band_hz;
        let nyquist = sample_rate / 2.0;
        if !(lo >= 0.0 && lo < hi && hi <= nyquist) {
            return Err(DspError::InvalidBand { lo, hi, nyquist });
        }
        Ok(())
    }

    pub fn pad_for(&self, len: usize) -> usize {
        self.zero_pad_to.max(len.next_power_of_two()).next_power_of_two()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub bin_frequencies: Vec<f64>,
    pub power: Vec<f64>,
    pub resolution: f64,
    pub source_length: usize,
}

impl Spectrum {
    pub fn nyquist(&self) -> f64 {
        *self.bin_frequencies.last().unwrap_or(&0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominantPeak {
    pub frequency: f64,
    pub peak_power: f64,
    pub band_power_ratio: f64,
    /// Set when the spectrum carries no non-DC power at all.
    pub zero_power: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub samples: Vec<f64>,
    pub near_constant: bool,
}

/// In-place iterative radix-2 decimation-in-time FFT (forward, unscaled).
///
/// Panics if the buffer length is not a power of two.
pub fn fft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "FFT length must be a power of two");
    if n <= 1 {
        return;
    }

    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }

    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = -2.0 * PI / len as f64;
        // Twiddles computed directly per index to avoid accumulated rotation error.
        let twiddles: Vec<Complex64> = (0..half).map(|k| Complex64::from_polar(1.0, step * k as f64)).collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = buf[start + k];
                let b = buf[start + k + half] * twiddles[k];
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

/// Removes the least-squares straight line.
pub fn detrend(samples: &[f64], _sample_rate: f64) -> Result<Vec<f64>, DspError> {
    let n = samples.len();
    if n < 2 {
        return Err(DspError::TooShort { needed: 2, got: n });
    }
    let center = (n as f64 - 1.0) / 2.0;
    let mean = samples.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &y) in samples.iter().enumerate() {
        let t = i as f64 - center;
        sxy += t * (y - mean);
        sxx += t * t;
    }
    let slope = sxy / sxx;
    let out: Vec<f64> = samples
        .iter()
        .enumerate()
        .map(|(i, &y)| y - mean - slope * (i as f64 - center))
        .collect();
    // One correction pass removes the residual mean left by rounding.
    let residual = out.iter().sum::<f64>() / n as f64;
    Ok(out.into_iter().map(|v| v - residual).collect())
}

/// Hamming-windowed sinc low-pass kernel normalized to unit DC gain.
pub fn lowpass_kernel(sample_rate: f64, cutoff: f64, taps: usize) -> Result<Vec<f64>, DspError> {
    let nyquist = sample_rate / 2.0;
    if !(cutoff > 0.0 && cutoff < nyquist) {
        return Err(DspError::InvalidCutoff { cutoff, nyquist });
    }
    if taps < 11 || taps.is_multiple_of(2) {
        return Err(DspError::InvalidTaps(taps));
    }
    let fc = cutoff / sample_rate;
    let mid = (taps - 1) as f64 / 2.0;
    let mut kernel: Vec<f64> = (0..taps)
        .map(|i| {
            let x = i as f64 - mid;
            let sinc = if x == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * x).sin() / (PI * x)
            };
            let window = 0.54 - 0.46 * (2.0 * PI * i as f64 / (taps - 1) as f64).cos();
            sinc * window
        })
        .collect();
    let sum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= sum);
    Ok(kernel)
}

fn reflect_index(j: isize, n: usize) -> usize {
    let period = 2 * (n as isize - 1);
    let mut m = j.rem_euclid(period);
    if m >= n as isize {
        m = period - m;
    }
    m as usize
}

fn convolve_valid(x: &[f64], kernel: &[f64]) -> Vec<f64> {
    x.windows(kernel.len())
        .map(|w| w.iter().zip(kernel).map(|(a, b)| a * b).sum())
        .collect()
}

/// Zero-phase windowed-sinc low-pass filter (forward then backward pass).
///
/// Edges are mirror-padded by `taps - 1` samples so the output keeps the input length.
pub fn lowpass(samples: &[f64], sample_rate: f64, cutoff: f64, taps: usize) -> Result<Vec<f64>, DspError> {
    let kernel = lowpass_kernel(sample_rate, cutoff, taps)?;
    let n = samples.len();
    if n < 2 {
        return Err(DspError::TooShort { needed: 2, got: n });
    }
    let pad = (taps - 1) as isize;
    let padded: Vec<f64> = (-pad..n as isize + pad).map(|j| samples[reflect_index(j, n)]).collect();
    let mut forward = convolve_valid(&padded, &kernel);
    forward.reverse();
    let mut out = convolve_valid(&forward, &kernel);
    out.reverse();
    debug_assert_eq!(out.len(), n);
    Ok(out)
}

/// Zero mean, unit (population) variance.
pub fn normalize(samples: &[f64]) -> Result<Normalized, DspError> {
    let n = samples.len();
    if n < 2 {
        return Err(DspError::TooShort { needed: 2, got: n });
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    if std < NEAR_CONSTANT_STD {
        return Ok(Normalized {
            samples: vec![0.0; n],
            near_constant: true,
        });
    }
    Ok(Normalized {
        samples: samples.iter().map(|v| (v - mean) / std).collect(),
        near_constant: false,
    })
}

/// One-sided periodogram `|DFT|^2 / len` at bins `0..=N/2`.
pub fn periodogram(samples: &[f64], sample_rate: f64, zero_pad_to: usize) -> Result<Spectrum, DspError> {
    let len = samples.len();
    if len == 0 {
        return Err(DspError::TooShort { needed: 1, got: 0 });
    }
    if zero_pad_to < len.max(2) || !zero_pad_to.is_power_of_two() {
        return Err(DspError::BadPadLength { pad: zero_pad_to, len });
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); zero_pad_to];
    for (b, &s) in buf.iter_mut().zip(samples) {
        b.re = s;
    }
    fft_in_place(&mut buf);

    let resolution = sample_rate / zero_pad_to as f64;
    let bins = zero_pad_to / 2 + 1;
    Ok(Spectrum {
        bin_frequencies: (0..bins).map(|k| k as f64 * resolution).collect(),
        power: buf[..bins].iter().map(|c| c.norm_sqr() / len as f64).collect(),
        resolution,
        source_length: len,
    })
}

/// Strongest bin inside `band`, refined by parabolic interpolation.
///
/// `band_power_ratio` is the in-band power over all non-DC power.
pub fn dominant_frequency(spectrum: &Spectrum, band: (f64, f64)) -> Result<DominantPeak, DspError> {
    let (lo, hi) = band;
    let nyquist = spectrum.nyquist();
    if !(lo >= 0.0 && lo < hi && hi <= nyquist + 1e-12) {
        return Err(DspError::InvalidBand { lo, hi, nyquist });
    }
    let in_band: Vec<usize> = spectrum
        .bin_frequencies
        .iter()
        .enumerate()
        .filter(|(_, &f)| f >= lo && f <= hi)
        .map(|(k, _)| k)
        .collect();
    if in_band.is_empty() {
        return Err(DspError::EmptyBand { lo, hi });
    }

    let p = &spectrum.power;
    let total: f64 = p.iter().skip(1).sum();
    if total <= 0.0 {
        return Ok(DominantPeak {
            frequency: 0.0,
            peak_power: 0.0,
            band_power_ratio: 0.0,
            zero_power: true,
        });
    }
    let band_power: f64 = in_band.iter().filter(|&&k| k > 0).map(|&k| p[k]).sum();

    let mut best = in_band[0];
    for &k in &in_band[1..] {
        if p[k] > p[best] {
            best = k;
        }
    }

    let mut offset = 0.0;
    if best > 0 && best + 1 < p.len() {
        let (a, b, c) = (p[best - 1], p[best], p[best + 1]);
        let denom = a - 2.0 * b + c;
        if denom != 0.0 {
            offset = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
        }
    }

    Ok(DominantPeak {
        frequency: (best as f64 + offset) * spectrum.resolution,
        peak_power: p[best],
        band_power_ratio: (band_power / total).clamp(0.0, 1.0),
        zero_power: false,
    })
}

/// Breathing-band power ratio of a trace after detrending, using the default spectral settings.
pub fn breathing_band_ratio(samples: &[f64], sample_rate: f64) -> Result<f64, DspError> {
    let detrended = detrend(samples, sample_rate)?;
    let config = DspConfig::default();
    let spectrum = periodogram(&detrended, sample_rate, config.pad_for(detrended.len()))?;
    let nyquist = spectrum.nyquist();
    let band = (config.band_hz.0, config.band_hz.1.min(nyquist));
    Ok(dominant_frequency(&spectrum, band)?.band_power_ratio)
}
