use std::rc::Rc;

use crate::autodiff::ConstMatrix;

use super::{DspError, Result};

/// Precomputed Hann window and one-sided DFT basis for one frame size.
///
/// The same matrices drive both the plain spectrogram below and the
/// tape-recorded spectrogram inside the spectral losses, so the two paths
/// produce bitwise-identical magnitudes for identical frames.
#[derive(Debug, Clone)]
pub struct Dft {
    frame_size: usize,
    k_bins: usize,
    hann: Vec<f64>,
    cos: Rc<ConstMatrix>,
    sin: Rc<ConstMatrix>,
}

impl Dft {
    pub fn new(frame_size: usize) -> Result<Self> {
        if frame_size < 2 || !frame_size.is_power_of_two() {
            return Err(DspError::FrameSizeNotPow2(frame_size));
        }
        let k_bins = frame_size / 2 + 1;
        let two_pi = 2.0 * std::f64::consts::PI;
        let hann: Vec<f64> = (0..frame_size)
            .map(|n| 0.5 * (1.0 - (two_pi * n as f64 / frame_size as f64).cos()))
            .collect();
        let mut cos = Vec::with_capacity(k_bins * frame_size);
        let mut sin = Vec::with_capacity(k_bins * frame_size);
        for k in 0..k_bins {
            for n in 0..frame_size {
                let phase = two_pi * (k * n) as f64 / frame_size as f64;
                cos.push(phase.cos());
                sin.push(-phase.sin());
            }
        }
        Ok(Dft {
            frame_size,
            k_bins,
            hann,
            cos: Rc::new(ConstMatrix::new(k_bins, frame_size, cos)),
            sin: Rc::new(ConstMatrix::new(k_bins, frame_size, sin)),
        })
    }

    pub fn frame_size(&self) -> usize {
        self.frame_size
    }

    pub fn k_bins(&self) -> usize {
        self.k_bins
    }

    pub fn hann(&self) -> &[f64] {
        &self.hann
    }

    pub fn cos_matrix(&self) -> &Rc<ConstMatrix> {
        &self.cos
    }

    pub fn sin_matrix(&self) -> &Rc<ConstMatrix> {
        &self.sin
    }

    /// One-sided magnitudes of one Hann-windowed frame.
    pub fn frame_magnitudes(&self, frame: &[f64]) -> Vec<f64> {
        assert_eq!(frame.len(), self.frame_size);
        let windowed: Vec<f64> = frame.iter().zip(&self.hann).map(|(x, w)| x * w).collect();
        let re = self.cos.mul_vec(&windowed);
        let im = self.sin.mul_vec(&windowed);
        re.iter()
            .zip(&im)
            .map(|(r, i)| (r * r + i * i).sqrt())
            .collect()
    }
}

/// Nonnegative magnitude spectrogram, stored frame-major
/// (`mags[m * k_bins + k]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    mags: Vec<f64>,
    k_bins: usize,
    frames: usize,
    frame_size: usize,
    hop: usize,
}

impl Spectrogram {
    /// Hann-windowed magnitude STFT. Frames start at 0, hop, 2*hop, ...
    /// while they fit inside the signal.
    pub fn stft_mag(x: &[f64], frame_size: usize, hop: usize) -> Result<Self> {
        if hop == 0 {
            return Err(DspError::ZeroShift);
        }
        if x.len() < frame_size {
            return Err(DspError::SignalTooShort {
                len: x.len(),
                frame_size,
            });
        }
        let dft = Dft::new(frame_size)?;
        Self::stft_mag_with(&dft, x, hop)
    }

    /// Same as [`Self::stft_mag`] with a caller-supplied basis.
    pub fn stft_mag_with(dft: &Dft, x: &[f64], hop: usize) -> Result<Self> {
        if hop == 0 {
            return Err(DspError::ZeroShift);
        }
        let frame_size = dft.frame_size();
        if x.len() < frame_size {
            return Err(DspError::SignalTooShort {
                len: x.len(),
                frame_size,
            });
        }
        let k_bins = dft.k_bins();
        let mut mags = Vec::new();
        let mut frames = 0;
        let mut offset = 0;
        while offset + frame_size <= x.len() {
            mags.extend(dft.frame_magnitudes(&x[offset..offset + frame_size]));
            frames += 1;
            offset += hop;
        }
        Ok(Spectrogram {
            mags,
            k_bins,
            frames,
            frame_size,
            hop,
        })
    }

    pub fn from_parts(mags: Vec<f64>, k_bins: usize, frames: usize) -> Self {
        assert_eq!(mags.len(), k_bins * frames);
        Spectrogram {
            mags,
            k_bins,
            frames,
            frame_size: 2 * (k_bins - 1),
            hop: 1,
        }
    }

    pub fn k_bins(&self) -> usize {
        self.k_bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn mag(&self, k: usize, m: usize) -> f64 {
        self.mags[m * self.k_bins + k]
    }

    /// All magnitudes of frame `m`.
    pub fn frame(&self, m: usize) -> &[f64] {
        &self.mags[m * self.k_bins..(m + 1) * self.k_bins]
    }

    /// Frame-major flat magnitudes.
    pub fn flat(&self) -> &[f64] {
        &self.mags
    }

    /// Frame-major flat powers (squared magnitudes).
    pub fn power_flat(&self) -> Vec<f64> {
        self.mags.iter().map(|m| m * m).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_signal_gives_zero_spectrogram() {
        let spec = Spectrogram::stft_mag(&vec![0.0; 64], 16, 8).unwrap();
        assert!(spec.flat().iter().all(|&m| m == 0.0));
        assert_eq!(spec.k_bins(), 9);
        assert_eq!(spec.frames(), 7);
    }

    #[test]
    fn too_short_signal_rejected() {
        let err = Spectrogram::stft_mag(&[1.0; 10], 16, 4).unwrap_err();
        assert!(matches!(err, DspError::SignalTooShort { .. }));
    }

    #[test]
    fn non_pow2_frame_rejected() {
        assert!(matches!(
            Spectrogram::stft_mag(&[1.0; 64], 12, 4),
            Err(DspError::FrameSizeNotPow2(12))
        ));
    }

    /// Direct DFT oracle for one frame: naive complex sums, no shared code
    /// with `Dft`.
    fn oracle_bin_energy(frame: &[f64], k: usize) -> f64 {
        let f = frame.len() as f64;
        let hann: Vec<f64> = (0..frame.len())
            .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / f).cos()))
            .collect();
        let (mut re, mut im) = (0.0, 0.0);
        for (n, (&x, w)) in frame.iter().zip(&hann).enumerate() {
            let phase = 2.0 * std::f64::consts::PI * (k * n) as f64 / f;
            re += x * w * phase.cos();
            im -= x * w * phase.sin();
        }
        re * re + im * im
    }

    #[test]
    fn sinusoid_at_bin_center_concentrates_energy() {
        let frame_size = 64;
        let k0 = 8;
        let x: Vec<f64> = (0..frame_size)
            .map(|n| (2.0 * std::f64::consts::PI * (k0 * n) as f64 / frame_size as f64).sin())
            .collect();
        let spec = Spectrogram::stft_mag(&x, frame_size, frame_size).unwrap();
        let energies: Vec<f64> = (0..spec.k_bins()).map(|k| spec.mag(k, 0).powi(2)).collect();
        let total: f64 = energies.iter().sum();
        // peak lands exactly at k0 and agrees with the naive DFT oracle
        let argmax = energies
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, k0);
        let oracle = oracle_bin_energy(&x, k0);
        assert!((energies[k0] - oracle).abs() < 1e-9 * oracle);
        // the Hann main lobe spans three bins: the center holds 2/3 of the
        // energy, the k0 +/- 1 neighborhood virtually all of it
        assert!((energies[k0] / total - 2.0 / 3.0).abs() < 1e-6);
        let lobe = energies[k0 - 1] + energies[k0] + energies[k0 + 1];
        assert!(lobe / total > 0.999);
    }

    #[test]
    fn parseval_on_two_sided_reconstruction() {
        let x: Vec<f64> = (0..32).map(|n| ((n * n) as f64 * 0.1).sin()).collect();
        let frame_size = 32;
        let spec = Spectrogram::stft_mag(&x, frame_size, frame_size).unwrap();
        let k = spec.k_bins();
        // two-sided energy: DC and Nyquist once, interior bins twice
        let mut two_sided = spec.mag(0, 0).powi(2) + spec.mag(k - 1, 0).powi(2);
        for bin in 1..k - 1 {
            two_sided += 2.0 * spec.mag(bin, 0).powi(2);
        }
        let dft = Dft::new(frame_size).unwrap();
        let windowed_energy: f64 = x
            .iter()
            .zip(dft.hann())
            .map(|(v, w)| (v * w) * (v * w))
            .sum();
        let lhs = two_sided / frame_size as f64;
        assert!(
            (lhs - windowed_energy).abs() <= 1e-9 * windowed_energy,
            "parseval: {lhs} vs {windowed_energy}"
        );
    }
}
