//! Deterministic signal utilities: test-signal generation, SNR-controlled
//! mixing, sliding windows and their overlap-average inverse, magnitude
//! spectrograms, and one-third octave band partitions.

mod stft;

pub use stft::{Dft, Spectrogram};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("signal must have at least one sample")]
    EmptySignal,
    #[error("signals have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("{0} signal has zero power")]
    ZeroPower(&'static str),
    #[error("window width {width} exceeds signal length {len}")]
    WindowTooWide { width: usize, len: usize },
    #[error("shift must be at least 1")]
    ZeroShift,
    #[error("sample {0} is covered by no window")]
    UncoveredSample(usize),
    #[error("signal of {len} samples is shorter than one frame of {frame_size}")]
    SignalTooShort { len: usize, frame_size: usize },
    #[error("frame size must be a power of two, got {0}")]
    FrameSizeNotPow2(usize),
    #[error("band {band} [{lo_hz:.1} Hz, {hi_hz:.1} Hz) exceeds the Nyquist frequency {nyquist_hz:.1} Hz")]
    BandAboveNyquist {
        band: usize,
        lo_hz: f64,
        hi_hz: f64,
        nyquist_hz: f64,
    },
    #[error("band {band} maps to an empty bin range")]
    EmptyBand { band: usize },
    #[error("f_min must be positive")]
    NonPositiveFmin,
}

pub type Result<T> = std::result::Result<T, DspError>;

/// A finite, real-valued signal of one or more samples.
pub type Signal = Vec<f64>;

/// Mean power (mean of squared samples).
pub fn power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Measured SNR of (clean, noise) in dB.
pub fn snr_db(clean: &[f64], noise: &[f64]) -> f64 {
    10.0 * (power(clean) / power(noise)).log10()
}

/// One full period of `sin(12*pi*t/T)` sampled at t = 0..T-1.
pub fn gen_sine(t_len: usize) -> Result<Signal> {
    if t_len == 0 {
        return Err(DspError::EmptySignal);
    }
    let scale = 12.0 * std::f64::consts::PI / t_len as f64;
    Ok((0..t_len).map(|t| (scale * t as f64).sin()).collect())
}

/// I.i.d. uniform samples on [-1, 1], reproducible from the seed.
pub fn gen_uniform_noise(t_len: usize, seed: u64) -> Result<Signal> {
    if t_len == 0 {
        return Err(DspError::EmptySignal);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..t_len).map(|_| rng.gen_range(-1.0..=1.0)).collect())
}

/// Scales `noise` so that `clean + scaled` has exactly the requested SNR and
/// returns `(mixture, scaled_noise)`.
pub fn mix_at_snr(clean: &[f64], noise: &[f64], snr_db: f64) -> Result<(Signal, Signal)> {
    if clean.len() != noise.len() {
        return Err(DspError::LengthMismatch(clean.len(), noise.len()));
    }
    let p_clean = power(clean);
    let p_noise = power(noise);
    if p_clean == 0.0 {
        return Err(DspError::ZeroPower("clean"));
    }
    if p_noise == 0.0 {
        return Err(DspError::ZeroPower("noise"));
    }
    let c = (p_clean / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt();
    let scaled: Signal = noise.iter().map(|v| c * v).collect();
    let mixture: Signal = clean.iter().zip(&scaled).map(|(s, n)| s + n).collect();
    Ok((mixture, scaled))
}

/// Windows `x[i..i+width]` for i = 0, shift, 2*shift, ... while they fit.
pub fn sliding_windows(x: &[f64], width: usize, shift: usize) -> Result<Vec<Vec<f64>>> {
    if shift == 0 {
        return Err(DspError::ZeroShift);
    }
    if width > x.len() || width == 0 {
        return Err(DspError::WindowTooWide {
            width,
            len: x.len(),
        });
    }
    let mut windows = Vec::with_capacity((x.len() - width) / shift + 1);
    let mut i = 0;
    while i + width <= x.len() {
        windows.push(x[i..i + width].to_vec());
        i += shift;
    }
    Ok(windows)
}

/// Inverse of [`sliding_windows`]: each output sample is the arithmetic mean
/// of every window sample covering it. Errors if some sample of `[0, t_len)`
/// is covered by no window.
pub fn overlap_average(windows: &[Vec<f64>], shift: usize, t_len: usize) -> Result<Signal> {
    if shift == 0 {
        return Err(DspError::ZeroShift);
    }
    let mut sums = vec![0.0; t_len];
    let mut counts = vec![0usize; t_len];
    for (w_idx, w) in windows.iter().enumerate() {
        let offset = w_idx * shift;
        for (j, &v) in w.iter().enumerate() {
            let pos = offset + j;
            if pos < t_len {
                sums[pos] += v;
                counts[pos] += 1;
            }
        }
    }
    sums.iter()
        .zip(&counts)
        .enumerate()
        .map(|(i, (&s, &c))| {
            if c == 0 {
                Err(DspError::UncoveredSample(i))
            } else {
                Ok(s / c as f64)
            }
        })
        .collect()
}

/// Half-open bin ranges `[p_j, q_j)` of one-third octave bands, ascending
/// and non-overlapping.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPartition {
    edges: Vec<(usize, usize)>,
}

impl BandPartition {
    /// Builds `j_bands` one-third octave bands starting at `f_min` Hz, mapped
    /// onto the bins of a `frame_size`-point DFT at sampling rate `fs`.
    /// Band j covers `[f_min * 2^(j/3), f_min * 2^((j+1)/3))` Hz.
    pub fn third_octave(fs: f64, frame_size: usize, j_bands: usize, f_min: f64) -> Result<Self> {
        if f_min <= 0.0 {
            return Err(DspError::NonPositiveFmin);
        }
        let nyquist = fs / 2.0;
        let hz_per_bin = fs / frame_size as f64;
        let k_bins = frame_size / 2 + 1;
        let mut edges = Vec::with_capacity(j_bands);
        for j in 0..j_bands {
            let lo_hz = f_min * 2f64.powf(j as f64 / 3.0);
            let hi_hz = f_min * 2f64.powf((j + 1) as f64 / 3.0);
            if hi_hz > nyquist {
                return Err(DspError::BandAboveNyquist {
                    band: j,
                    lo_hz,
                    hi_hz,
                    nyquist_hz: nyquist,
                });
            }
            let p = (lo_hz / hz_per_bin).ceil() as usize;
            let q = (hi_hz / hz_per_bin).ceil() as usize;
            if p >= q || q > k_bins {
                return Err(DspError::EmptyBand { band: j });
            }
            edges.push((p, q));
        }
        Ok(BandPartition { edges })
    }

    /// The standard 15-band partition (fs = 10 kHz, 512-point frames,
    /// lowest band at 150 Hz).
    pub fn standard_stoi() -> Self {
        Self::third_octave(10_000.0, 512, 15, 150.0).expect("standard partition is valid")
    }

    /// Builds a partition directly from bin ranges. Ranges must be
    /// ascending, non-overlapping, and non-empty.
    pub fn from_edges(edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut prev_end = 0;
        for (j, &(p, q)) in edges.iter().enumerate() {
            if p >= q || p < prev_end {
                return Err(DspError::EmptyBand { band: j });
            }
            prev_end = q;
        }
        Ok(BandPartition { edges })
    }

    pub fn bands(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Largest bin index any band touches (exclusive).
    pub fn max_bin(&self) -> usize {
        self.edges.last().map(|&(_, q)| q).unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_landmarks() {
        let s = gen_sine(600).unwrap();
        assert_eq!(s[0], 0.0);
        assert!(s[50].abs() < 1e-12, "sin(pi) at t=50, got {}", s[50]);
        assert!((s[25] - 1.0).abs() < 1e-12, "sin(pi/2) at t=25");
    }

    #[test]
    fn noise_is_seed_deterministic() {
        let a = gen_uniform_noise(128, 7).unwrap();
        let b = gen_uniform_noise(128, 7).unwrap();
        assert_eq!(a, b);
        let c = gen_uniform_noise(128, 8).unwrap();
        assert!(a.iter().zip(&c).any(|(x, y)| x != y));
    }

    #[test]
    fn noise_moments_match_uniform() {
        let x = gen_uniform_noise(100_000, 42).unwrap();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / x.len() as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0 / 3.0).abs() < 0.05 / 3.0, "variance {var}");
    }

    #[test]
    fn mix_hits_requested_snr() {
        let clean = gen_sine(600).unwrap();
        let noise = gen_uniform_noise(600, 1).unwrap();
        for &snr in &[10.0, 0.0, -10.0] {
            let (_, scaled) = mix_at_snr(&clean, &noise, snr).unwrap();
            let measured = snr_db(&clean, &scaled);
            assert!((measured - snr).abs() < 1e-10, "snr {snr} measured {measured}");
        }
        // snr 0 means equal powers
        let (_, scaled) = mix_at_snr(&clean, &noise, 0.0).unwrap();
        assert!((power(&clean) / power(&scaled) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mix_scale_for_identical_signals() {
        let clean = gen_sine(100).unwrap();
        let (_, scaled) = mix_at_snr(&clean, &clean, 6.0).unwrap();
        let c = scaled[10] / clean[10];
        assert!((c - 10f64.powf(-6.0 / 20.0)).abs() < 1e-12);
    }

    #[test]
    fn mix_rejects_zero_power() {
        let zeros = vec![0.0; 16];
        let ones = vec![1.0; 16];
        assert!(mix_at_snr(&zeros, &ones, 0.0).is_err());
        assert!(mix_at_snr(&ones, &zeros, 0.0).is_err());
    }

    #[test]
    fn window_counts() {
        let x = vec![0.0; 600];
        assert_eq!(sliding_windows(&x, 100, 1).unwrap().len(), 501);
        let x = vec![1.0; 100];
        let w = sliding_windows(&x, 100, 1).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0], x);
        let x = vec![0.0; 5];
        assert_eq!(sliding_windows(&x, 2, 2).unwrap().len(), 2);
        assert!(sliding_windows(&x, 6, 1).is_err());
    }

    #[test]
    fn overlap_average_hand_case() {
        let windows = vec![vec![2.0, 2.0], vec![4.0, 4.0]];
        let out = overlap_average(&windows, 1, 3).unwrap();
        assert_eq!(out, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn overlap_average_inverts_sliding_windows() {
        let x = gen_uniform_noise(600, 3).unwrap();
        let w = sliding_windows(&x, 100, 1).unwrap();
        let back = overlap_average(&w, 1, 600).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        // degenerate single full-length window
        let w = sliding_windows(&x, 600, 1).unwrap();
        assert_eq!(overlap_average(&w, 1, 600).unwrap(), x);
    }

    #[test]
    fn overlap_average_detects_gap() {
        // windows of 2 at offsets 0 and 2 leave sample 4 uncovered
        let windows = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let err = overlap_average(&windows, 2, 5).unwrap_err();
        assert!(matches!(err, DspError::UncoveredSample(4)));
    }

    #[test]
    fn standard_bands_are_ascending_within_nyquist() {
        let p = BandPartition::standard_stoi();
        assert_eq!(p.len(), 15);
        let mut prev_q = 0;
        for &(lo, hi) in p.bands() {
            assert!(lo < hi);
            assert!(lo >= prev_q);
            prev_q = hi;
        }
        assert!(p.max_bin() <= 257);
        // direct re-computation of the edge formula
        let hz_per_bin = 10_000.0 / 512.0;
        for (j, &(lo, hi)) in p.bands().iter().enumerate() {
            let lo_hz = 150.0 * 2f64.powf(j as f64 / 3.0);
            let hi_hz = 150.0 * 2f64.powf((j + 1) as f64 / 3.0);
            assert_eq!(lo, (lo_hz / hz_per_bin).ceil() as usize);
            assert_eq!(hi, (hi_hz / hz_per_bin).ceil() as usize);
        }
    }

    #[test]
    fn single_band_at_requested_bin() {
        // fs/frame chosen so bin 10 sits at 10 Hz; a band from 10 Hz starts there
        let p = BandPartition::third_octave(512.0, 512, 1, 10.0).unwrap();
        assert_eq!(p.bands()[0].0, 10);
    }

    #[test]
    fn f_min_above_nyquist_rejected() {
        let err = BandPartition::third_octave(10_000.0, 512, 1, 6_000.0).unwrap_err();
        assert!(matches!(err, DspError::BandAboveNyquist { .. }));
    }
}
