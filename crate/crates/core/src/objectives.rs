//! The five training objectives, each built on a tape as a differentiable
//! scalar to minimize: L1 and L2 on time-domain windows, Itakura-Saito on
//! power spectrograms, a negated STOI correlation on one-third octave band
//! envelopes, and a negated SDR through the delayed-reference projection.

use std::rc::Rc;

use thiserror::Error;

use crate::autodiff::{AutodiffError, ConstMatrix, Tape, Var};
use crate::bss::ToeplitzProjector;
use crate::dsp::{BandPartition, Dft, DspError, Spectrogram};

#[derive(Debug, Error)]
pub enum LossError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Bss(#[from] crate::bss::BssError),
    #[error("estimate length {got} does not match target length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("spectrogram has {frames} frames but the analysis length is {analysis_len}")]
    NotEnoughFrames { frames: usize, analysis_len: usize },
    #[error("band partition reaches bin {max_bin} but the spectrogram has {k_bins} bins")]
    BandOutOfRange { max_bin: usize, k_bins: usize },
    #[error("window of {window} samples cannot hold a {frame_size}-sample frame")]
    FrameTooLarge { window: usize, frame_size: usize },
}

pub type Result<T> = std::result::Result<T, LossError>;

/// Side-channel counters populated while a loss is recorded.
#[derive(Debug, Default, Clone, Copy, PartialEq)]
pub struct LossDiag {
    /// Entries at or below zero before flooring (Itakura-Saito).
    pub floored_entries: usize,
    /// Correlation terms replaced by 0 because a segment had no variance.
    pub degenerate_segments: usize,
    /// The epsilon floor materially entered the SDR ratio.
    pub floor_active: bool,
}

/// Configuration of the negated-SDR loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdrLossConfig {
    /// Maximum delay of the training-time projector.
    pub max_delay: usize,
    /// Ratio floor, relative to the clean-window energy.
    pub floor: f64,
}

impl Default for SdrLossConfig {
    fn default() -> Self {
        SdrLossConfig {
            max_delay: 1,
            floor: 1e-12,
        }
    }
}

/// Configuration of the negated-STOI loss.
#[derive(Debug, Clone, PartialEq)]
pub struct StoiConfig {
    /// Segment length N, in frames.
    pub analysis_len: usize,
    /// Lower SDR bound (dB) of the clipping rule.
    pub zeta_db: f64,
    pub bands: BandPartition,
    /// STFT frame used when the loss is driven from a time-domain window.
    pub frame_size: usize,
    pub hop: usize,
}

impl Default for StoiConfig {
    fn default() -> Self {
        StoiConfig {
            analysis_len: 30,
            zeta_db: -15.0,
            bands: BandPartition::standard_stoi(),
            frame_size: 512,
            hop: 256,
        }
    }
}

/// Configuration of the Itakura-Saito loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsLossConfig {
    pub frame_size: usize,
    pub hop: usize,
    /// Power floor applied to both spectrograms before the ratio.
    pub floor: f64,
}

impl Default for IsLossConfig {
    fn default() -> Self {
        // frame small enough for the 100-sample experiment windows
        IsLossConfig {
            frame_size: 32,
            hop: 16,
            floor: 1e-12,
        }
    }
}

/// Tagged choice of objective.
#[derive(Debug, Clone, PartialEq)]
pub enum LossSpec {
    L1,
    L2,
    Is(IsLossConfig),
    NegStoi(StoiConfig),
    NegSdr(SdrLossConfig),
}

impl LossSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::L1 => "l1",
            LossSpec::L2 => "l2",
            LossSpec::Is(_) => "is",
            LossSpec::NegStoi(_) => "neg_stoi",
            LossSpec::NegSdr(_) => "neg_sdr",
        }
    }
}

// ---------------------------------------------------------------------------
// the five losses over tape vars
// ---------------------------------------------------------------------------

/// Sum of squared differences.
pub fn loss_l2(tape: &mut Tape, est: Var, target: &[f64]) -> Result<Var> {
    if est.shape().len() != target.len() {
        return Err(LossError::LengthMismatch {
            expected: target.len(),
            got: est.shape().len(),
        });
    }
    let t = tape.constant(target);
    let diff = tape.sub(est, t)?;
    Ok(tape.sumsq(diff)?)
}

/// Sum of absolute differences. The subgradient of `|.|` at 0 is 0.
pub fn loss_l1(tape: &mut Tape, est: Var, target: &[f64]) -> Result<Var> {
    if est.shape().len() != target.len() {
        return Err(LossError::LengthMismatch {
            expected: target.len(),
            got: est.shape().len(),
        });
    }
    let t = tape.constant(target);
    let diff = tape.sub(est, t)?;
    let a = tape.abs(diff)?;
    Ok(tape.sum(a)?)
}

/// Itakura-Saito divergence `sum(y/x - ln(y/x) - 1)` where `x` is the
/// estimated power spectrogram (flattened) and `y` the clean one. Both sides
/// are floored before the ratio; entries at or below zero are counted in the
/// diagnostics.
pub fn loss_is(
    tape: &mut Tape,
    est_pow: Var,
    target_pow: &[f64],
    floor: f64,
) -> Result<(Var, LossDiag)> {
    if est_pow.shape().len() != target_pow.len() {
        return Err(LossError::LengthMismatch {
            expected: target_pow.len(),
            got: est_pow.shape().len(),
        });
    }
    let mut diag = LossDiag::default();
    diag.floored_entries = tape
        .value(est_pow)
        .iter()
        .chain(target_pow)
        .filter(|&&v| v <= 0.0)
        .count();

    let floored_target: Vec<f64> = target_pow.iter().map(|&v| v.max(floor)).collect();
    let y = tape.constant(&floored_target);
    let x = tape.max_scalar(est_pow, floor)?;
    let ratio = tape.div(y, x)?;
    let log_ratio = tape.ln(ratio)?;
    let diff = tape.sub(ratio, log_ratio)?;
    let total = tape.sum(diff)?;
    let value = tape.offset(total, -(target_pow.len() as f64))?;
    Ok((value, diag))
}

/// Negated STOI objective over magnitude spectrograms.
///
/// For every band j and frame m >= N-1, length-N envelope segments of the
/// estimate are rescaled to the clean segment norm, clipped at
/// `(1 + 10^(-zeta/20)) beta`, centered, and correlated with the centered
/// clean segment; the result is the negated average over the J * M' valid
/// (band, frame) pairs. Segments without variance contribute 0 and are
/// counted in the diagnostics.
pub fn loss_neg_stoi(
    tape: &mut Tape,
    est_mag: Var,
    target_mag: &Spectrogram,
    cfg: &StoiConfig,
) -> Result<(Var, LossDiag)> {
    let k = target_mag.k_bins();
    let m = target_mag.frames();
    let n = cfg.analysis_len;
    if est_mag.shape().len() != k * m {
        return Err(LossError::LengthMismatch {
            expected: k * m,
            got: est_mag.shape().len(),
        });
    }
    if m < n {
        return Err(LossError::NotEnoughFrames {
            frames: m,
            analysis_len: n,
        });
    }
    if cfg.bands.max_bin() > k {
        return Err(LossError::BandOutOfRange {
            max_bin: cfg.bands.max_bin(),
            k_bins: k,
        });
    }

    let clip_factor = 1.0 + 10f64.powf(-cfg.zeta_db / 20.0);
    let mut diag = LossDiag::default();
    let mut d_terms: Option<Var> = None;

    for &(p, q) in cfg.bands.bands() {
        // band envelopes: alpha over the estimate (taped), beta over the clean
        let mut alpha = Vec::with_capacity(m);
        let mut beta = Vec::with_capacity(m);
        for frame in 0..m {
            let col = tape.slice(est_mag, frame * k + p, q - p)?;
            let sq = tape.sumsq(col)?;
            alpha.push(tape.sqrt(sq)?);
            let b: f64 = target_mag.frame(frame)[p..q].iter().map(|v| v * v).sum();
            beta.push(b.sqrt());
        }
        let alpha_vec = tape.concat(&alpha)?;

        for last in (n - 1)..m {
            let seg_start = last + 1 - n;
            let beta_seg = &beta[seg_start..=last];

            // clean-side statistics, all plain arithmetic
            let sy: f64 = beta_seg.iter().map(|v| v * v).sum();
            let norm_y = sy.sqrt();
            let mu_y = beta_seg.iter().sum::<f64>() / n as f64;
            let yc: Vec<f64> = beta_seg.iter().map(|v| v - mu_y).collect();
            let syc: f64 = yc.iter().map(|v| v * v).sum();
            if syc <= 1e-24 * sy.max(f64::MIN_POSITIVE) {
                diag.degenerate_segments += 1;
                continue;
            }

            let x_seg = tape.slice(alpha_vec, seg_start, n)?;
            let sx = tape.sumsq(x_seg)?;
            if tape.scalar_value(sx) == 0.0 {
                diag.degenerate_segments += 1;
                continue;
            }
            let norm_x = tape.sqrt(sx)?;
            let norm_y_var = tape.constant_scalar(norm_y);
            let scale = tape.div(norm_y_var, norm_x)?;
            let scaled = tape.mul(x_seg, scale)?;
            let bounds: Vec<f64> = beta_seg.iter().map(|b| clip_factor * b).collect();
            let clipped = tape.min_elements(scaled, &bounds)?;
            let mu_x = tape.mean(clipped)?;
            let xc = tape.sub(clipped, mu_x)?;
            let sxc = tape.sumsq(xc)?;
            let sxc_val = tape.scalar_value(sxc);
            let raw_energy: f64 = tape.value(clipped).iter().map(|v| v * v).sum();
            if sxc_val <= 1e-24 * raw_energy.max(f64::MIN_POSITIVE) {
                diag.degenerate_segments += 1;
                continue;
            }

            let yc_var = tape.constant(&yc);
            let num = tape.dot(xc, yc_var)?;
            // denominator as sqrt(sxc * syc): for identical inputs the
            // numerator and the product collapse bitwise, making d exactly 1
            let prod = tape.scale(sxc, syc)?;
            let den = tape.sqrt(prod)?;
            let d = tape.div(num, den)?;
            d_terms = Some(match d_terms {
                None => d,
                Some(acc) => tape.add(acc, d)?,
            });
        }
    }

    let j = cfg.bands.len();
    let valid_frames = m - n + 1;
    let count = (j * valid_frames) as f64;
    let total = match d_terms {
        Some(t) => t,
        None => tape.constant_scalar(0.0),
    };
    let denom = tape.constant_scalar(count);
    let avg = tape.div(total, denom)?;
    let value = tape.neg(avg)?;
    Ok((value, diag))
}

/// Constant matrices of one clean window's projection, shared across every
/// tape that scores an estimate against that window.
#[derive(Debug, Clone)]
pub struct NegSdrContext {
    analysis: Rc<ConstMatrix>,
    synthesis: Rc<ConstMatrix>,
    window_len: usize,
    pad: usize,
    /// Absolute epsilon: `cfg.floor` times the clean-window energy.
    eps: f64,
}

impl NegSdrContext {
    pub fn new(projector: &ToeplitzProjector, cfg: &SdrLossConfig) -> Self {
        let ref_energy: f64 = projector.reference().iter().map(|v| v * v).sum();
        NegSdrContext {
            analysis: Rc::new(projector.analysis_matrix()),
            synthesis: Rc::new(projector.synthesis_pinv_matrix()),
            window_len: projector.reference().len(),
            pad: projector.max_delay(),
            eps: cfg.floor * ref_energy,
        }
    }

    /// Builds the projector from a clean window and then the context.
    pub fn from_clean(clean_window: &[f64], cfg: &SdrLossConfig) -> Result<Self> {
        let projector = ToeplitzProjector::new(clean_window, cfg.max_delay)?;
        Ok(Self::new(&projector, cfg))
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
}

/// Negated SDR of the estimate through the clean window's projection:
/// `-10 log10((||P s_hat||^2 + eps) / (||s_hat_pad - P s_hat||^2 + eps))`.
///
/// The projection matrix depends only on the clean window, so it enters the
/// tape as two constant matrix-vector products; the estimate is zero-padded
/// by the projector delay before projecting.
pub fn loss_neg_sdr(tape: &mut Tape, est: Var, ctx: &NegSdrContext) -> Result<(Var, LossDiag)> {
    if est.shape().len() != ctx.window_len {
        return Err(LossError::LengthMismatch {
            expected: ctx.window_len,
            got: est.shape().len(),
        });
    }
    let pad = tape.constant(&vec![0.0; ctx.pad]);
    let est_pad = tape.concat(&[est, pad])?;
    let coords = tape.matvec_const(&ctx.analysis, est_pad)?;
    let s_target = tape.matvec_const(&ctx.synthesis, coords)?;
    let residual = tape.sub(est_pad, s_target)?;
    let num = tape.sumsq(s_target)?;
    let den = tape.sumsq(residual)?;

    let mut diag = LossDiag::default();
    diag.floor_active =
        tape.scalar_value(num) <= ctx.eps || tape.scalar_value(den) <= ctx.eps;

    let num_f = tape.offset(num, ctx.eps)?;
    let den_f = tape.offset(den, ctx.eps)?;
    let ratio = tape.div(num_f, den_f)?;
    let log = tape.log10(ratio)?;
    let value = tape.scale(log, -10.0)?;
    Ok((value, diag))
}

// ---------------------------------------------------------------------------
// window-level composition used by the trainer
// ---------------------------------------------------------------------------

enum Prepared {
    L1 {
        target: Vec<f64>,
    },
    L2 {
        target: Vec<f64>,
    },
    Is {
        dft: Dft,
        hop: usize,
        target_pow: Vec<f64>,
        floor: f64,
    },
    NegStoi {
        dft: Dft,
        hop: usize,
        target_spec: Spectrogram,
        cfg: StoiConfig,
    },
    NegSdr {
        ctx: NegSdrContext,
    },
}

/// A loss bound to one clean window, with everything non-differentiable
/// (target spectrograms, projection matrices, band checks) precomputed once.
pub struct PreparedLoss {
    inner: Prepared,
    window_len: usize,
}

impl PreparedLoss {
    pub fn prepare(spec: &LossSpec, clean_window: &[f64]) -> Result<Self> {
        let window_len = clean_window.len();
        let inner = match spec {
            LossSpec::L1 => Prepared::L1 {
                target: clean_window.to_vec(),
            },
            LossSpec::L2 => Prepared::L2 {
                target: clean_window.to_vec(),
            },
            LossSpec::Is(cfg) => {
                if cfg.frame_size > window_len {
                    return Err(LossError::FrameTooLarge {
                        window: window_len,
                        frame_size: cfg.frame_size,
                    });
                }
                let dft = Dft::new(cfg.frame_size)?;
                let spec = Spectrogram::stft_mag_with(&dft, clean_window, cfg.hop)?;
                Prepared::Is {
                    dft,
                    hop: cfg.hop,
                    target_pow: spec.power_flat(),
                    floor: cfg.floor,
                }
            }
            LossSpec::NegStoi(cfg) => {
                if cfg.frame_size > window_len {
                    return Err(LossError::FrameTooLarge {
                        window: window_len,
                        frame_size: cfg.frame_size,
                    });
                }
                let dft = Dft::new(cfg.frame_size)?;
                let target_spec = Spectrogram::stft_mag_with(&dft, clean_window, cfg.hop)?;
                if target_spec.frames() < cfg.analysis_len {
                    return Err(LossError::NotEnoughFrames {
                        frames: target_spec.frames(),
                        analysis_len: cfg.analysis_len,
                    });
                }
                if cfg.bands.max_bin() > target_spec.k_bins() {
                    return Err(LossError::BandOutOfRange {
                        max_bin: cfg.bands.max_bin(),
                        k_bins: target_spec.k_bins(),
                    });
                }
                Prepared::NegStoi {
                    dft,
                    hop: cfg.hop,
                    target_spec,
                    cfg: cfg.clone(),
                }
            }
            LossSpec::NegSdr(cfg) => Prepared::NegSdr {
                ctx: NegSdrContext::from_clean(clean_window, cfg)?,
            },
        };
        Ok(PreparedLoss { inner, window_len })
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    /// Records the loss of a time-domain estimate on the tape.
    pub fn loss(&self, tape: &mut Tape, est: Var) -> Result<(Var, LossDiag)> {
        match &self.inner {
            Prepared::L1 { target } => Ok((loss_l1(tape, est, target)?, LossDiag::default())),
            Prepared::L2 { target } => Ok((loss_l2(tape, est, target)?, LossDiag::default())),
            Prepared::Is {
                dft,
                hop,
                target_pow,
                floor,
            } => {
                let est_pow = tape_spectrogram(tape, est, dft, *hop, SpectralKind::Power)?;
                loss_is(tape, est_pow, target_pow, *floor)
            }
            Prepared::NegStoi {
                dft,
                hop,
                target_spec,
                cfg,
            } => {
                let est_mag = tape_spectrogram(tape, est, dft, *hop, SpectralKind::Magnitude)?;
                loss_neg_stoi(tape, est_mag, target_spec, cfg)
            }
            Prepared::NegSdr { ctx } => loss_neg_sdr(tape, est, ctx),
        }
    }
}

#[derive(Clone, Copy)]
enum SpectralKind {
    Power,
    Magnitude,
}

/// Hann-windowed one-sided spectrogram of a taped signal, flattened
/// frame-major, mirroring [`Spectrogram::stft_mag_with`] bit for bit.
fn tape_spectrogram(
    tape: &mut Tape,
    signal: Var,
    dft: &Dft,
    hop: usize,
    kind: SpectralKind,
) -> Result<Var> {
    let frame_size = dft.frame_size();
    let len = signal.shape().len();
    if len < frame_size {
        return Err(LossError::FrameTooLarge {
            window: len,
            frame_size,
        });
    }
    let hann = tape.constant(dft.hann());
    let mut frames = Vec::new();
    let mut offset = 0;
    while offset + frame_size <= len {
        let frame = tape.slice(signal, offset, frame_size)?;
        let windowed = tape.mul(frame, hann)?;
        let re = tape.matvec_const(dft.cos_matrix(), windowed)?;
        let im = tape.matvec_const(dft.sin_matrix(), windowed)?;
        let re2 = tape.square(re)?;
        let im2 = tape.square(im)?;
        let pow = tape.add(re2, im2)?;
        let out = match kind {
            SpectralKind::Power => pow,
            SpectralKind::Magnitude => tape.sqrt(pow)?,
        };
        frames.push(out);
        offset += hop;
    }
    Ok(tape.concat(&frames)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check;

    #[test]
    fn l2_values_and_gradient() {
        let mut t = Tape::new();
        let est = t.input(&[1.0, 2.0]);
        let l = loss_l2(&mut t, est, &[0.0, 0.0]).unwrap();
        assert_eq!(t.scalar_value(l), 5.0);
        let g = t.backward(l).unwrap();
        assert_eq!(g.wrt(est), &[2.0, 4.0]);

        let mut t = Tape::new();
        let est = t.input(&[0.3, -0.7]);
        let l = loss_l2(&mut t, est, &[0.3, -0.7]).unwrap();
        assert_eq!(t.scalar_value(l), 0.0);

        let report = grad_check(
            |t, x| Ok(loss_l2(t, x, &[0.0, 0.0]).unwrap()),
            &[1.0, 2.0],
            1e-6,
            1e-6,
        )
        .unwrap();
        assert!(report.passed());
    }

    #[test]
    fn l2_is_symmetric_in_its_arguments() {
        let a = [0.4, -1.2, 2.0];
        let b = [1.0, 0.5, -0.3];
        let mut t = Tape::new();
        let av = t.input(&a);
        let l_ab = loss_l2(&mut t, av, &b).unwrap();
        let bv = t.input(&b);
        let l_ba = loss_l2(&mut t, bv, &a).unwrap();
        assert_eq!(t.scalar_value(l_ab), t.scalar_value(l_ba));
    }

    #[test]
    fn l1_values_and_gradient_off_kink() {
        let mut t = Tape::new();
        let est = t.input(&[1.0, -2.0]);
        let l = loss_l1(&mut t, est, &[0.0, 0.0]).unwrap();
        assert_eq!(t.scalar_value(l), 3.0);

        let mut t = Tape::new();
        let est = t.input(&[5.0, 5.0]);
        let l = loss_l1(&mut t, est, &[5.0, 5.0]).unwrap();
        assert_eq!(t.scalar_value(l), 0.0);

        let report = grad_check(
            |t, x| Ok(loss_l1(t, x, &[0.2, -0.4, 1.0]).unwrap()),
            &[1.0, -2.0, 0.5],
            1e-6,
            1e-6,
        )
        .unwrap();
        assert!(report.passed(), "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn is_zero_when_equal_and_analytic_for_scaled() {
        let pow = [0.5, 1.0, 2.0, 3.5];
        let mut t = Tape::new();
        let x = t.input(&pow);
        let (l, diag) = loss_is(&mut t, x, &pow, 1e-12).unwrap();
        assert_eq!(t.scalar_value(l), 0.0);
        assert_eq!(diag.floored_entries, 0);

        // y = e * x over a K x M grid of 6 entries
        let e = std::f64::consts::E;
        let y: Vec<f64> = pow.iter().map(|v| e * v).collect();
        let mut t = Tape::new();
        let x = t.input(&pow);
        let (l, _) = loss_is(&mut t, x, &y, 1e-12).unwrap();
        let expect = (e - 2.0) * pow.len() as f64;
        let got = t.scalar_value(l);
        assert!(
            (got - expect).abs() <= 1e-10 * expect,
            "{got} vs {expect}"
        );
    }

    #[test]
    fn is_matches_scalar_oracle_and_is_asymmetric() {
        let x = [0.8f64, 1.7, 0.2, 3.0];
        let y = [1.1f64, 0.6, 2.2, 0.9];
        let oracle: f64 = x
            .iter()
            .zip(&y)
            .map(|(&xv, &yv)| yv / xv - (yv / xv).ln() - 1.0)
            .sum();
        let mut t = Tape::new();
        let xv = t.input(&x);
        let (l, _) = loss_is(&mut t, xv, &y, 1e-12).unwrap();
        assert!((t.scalar_value(l) - oracle).abs() < 1e-12);

        let mut t = Tape::new();
        let yv = t.input(&y);
        let (rev, _) = loss_is(&mut t, yv, &x, 1e-12).unwrap();
        assert!((t.scalar_value(rev) - oracle).abs() > 1e-6);
    }

    #[test]
    fn is_counts_nonpositive_entries() {
        let x = [0.5, 0.0, 1.0];
        let y = [1.0, 1.0, -2.0];
        let mut t = Tape::new();
        let xv = t.input(&x);
        let (l, diag) = loss_is(&mut t, xv, &y, 1e-12).unwrap();
        assert_eq!(diag.floored_entries, 2);
        assert!(t.scalar_value(l).is_finite());
    }

    #[test]
    fn neg_sdr_floors_and_scale_invariance() {
        let clean: Vec<f64> = (0..24).map(|i| (0.3 * i as f64).sin()).collect();
        let cfg = SdrLossConfig::default();
        let ctx = NegSdrContext::from_clean(&clean, &cfg).unwrap();
        let s_energy: f64 = clean.iter().map(|v| v * v).sum();

        // exact estimate: residual 0, loss pinned by the floor
        let mut t = Tape::new();
        let est = t.input(&clean);
        let (l, diag) = loss_neg_sdr(&mut t, est, &ctx).unwrap();
        let expect = -10.0 * ((s_energy + ctx.eps()) / ctx.eps()).log10();
        assert!((t.scalar_value(l) - expect).abs() < 1e-9);
        assert!(diag.floor_active);

        // scale covariance away from the floor
        let noisy: Vec<f64> = clean
            .iter()
            .enumerate()
            .map(|(i, v)| v + 0.2 * ((7 * i + 1) as f64).sin())
            .collect();
        let base = {
            let mut t = Tape::new();
            let est = t.input(&noisy);
            let (l, _) = loss_neg_sdr(&mut t, est, &ctx).unwrap();
            t.scalar_value(l)
        };
        for c in [0.5, 2.0, 10.0] {
            let scaled: Vec<f64> = noisy.iter().map(|v| c * v).collect();
            let mut t = Tape::new();
            let est = t.input(&scaled);
            let (l, _) = loss_neg_sdr(&mut t, est, &ctx).unwrap();
            assert!(
                (t.scalar_value(l) - base).abs() < 1e-6,
                "c={c}: {} vs {base}",
                t.scalar_value(l)
            );
        }
    }

    #[test]
    fn neg_sdr_orthogonal_estimate() {
        let mut clean = vec![0.0; 16];
        clean[0] = 1.0;
        let cfg = SdrLossConfig::default();
        let ctx = NegSdrContext::from_clean(&clean, &cfg).unwrap();
        let mut est = vec![0.0; 16];
        est[8] = 2.0;
        let mut t = Tape::new();
        let ev = t.input(&est);
        let (l, diag) = loss_neg_sdr(&mut t, ev, &ctx).unwrap();
        let est_energy = 4.0;
        let expect = 10.0 * ((est_energy + ctx.eps()) / ctx.eps()).log10();
        assert!((t.scalar_value(l) - expect).abs() < 1e-9);
        assert!(diag.floor_active);
    }

    #[test]
    fn neg_sdr_gradient_matches_finite_differences() {
        let clean: Vec<f64> = (0..12).map(|i| (0.5 * i as f64).sin() + 0.1).collect();
        let ctx = NegSdrContext::from_clean(&clean, &SdrLossConfig::default()).unwrap();
        let point: Vec<f64> = (0..12).map(|i| 0.8 * (0.4 * i as f64).cos() + 0.05).collect();
        let report = grad_check(
            |t, x| Ok(loss_neg_sdr(t, x, &ctx).unwrap().0),
            &point,
            1e-6,
            1e-5,
        )
        .unwrap();
        assert!(report.passed(), "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn stoi_identical_spectrograms_give_exactly_minus_one() {
        // non-degenerate 2-bin, 5-frame magnitudes
        let mags: Vec<f64> = (0..10).map(|i| 0.5 + ((i * i) % 7) as f64 * 0.3).collect();
        let spec = Spectrogram::from_parts(mags.clone(), 2, 5);
        let cfg = StoiConfig {
            analysis_len: 3,
            zeta_db: -15.0,
            bands: BandPartition::from_edges(vec![(0, 1), (1, 2)]).unwrap(),
            frame_size: 2,
            hop: 1,
        };
        let mut t = Tape::new();
        let est = t.input(&mags);
        let (l, diag) = loss_neg_stoi(&mut t, est, &spec, &cfg).unwrap();
        assert_eq!(t.scalar_value(l), -1.0);
        assert_eq!(diag.degenerate_segments, 0);
    }

    #[test]
    fn stoi_constant_target_segment_counts_degenerate() {
        // band 0 of the target is constant across frames: every segment in
        // that band is degenerate, the other band still correlates
        let k = 2;
        let m = 4;
        let mut tgt = vec![0.0; k * m];
        let mut est = vec![0.0; k * m];
        for frame in 0..m {
            tgt[frame * k] = 1.0;
            est[frame * k] = 1.0 + frame as f64;
            tgt[frame * k + 1] = 1.0 + (frame as f64) * 0.5;
            est[frame * k + 1] = 1.5 + (frame as f64) * 0.7;
        }
        let spec = Spectrogram::from_parts(tgt, k, m);
        let cfg = StoiConfig {
            analysis_len: 2,
            zeta_db: -15.0,
            bands: BandPartition::from_edges(vec![(0, 1), (1, 2)]).unwrap(),
            frame_size: 2,
            hop: 1,
        };
        let mut t = Tape::new();
        let est_v = t.input(&est);
        let (l, diag) = loss_neg_stoi(&mut t, est_v, &spec, &cfg).unwrap();
        assert_eq!(diag.degenerate_segments, 3);
        assert!(t.scalar_value(l).is_finite());
    }

    /// Plain-f64 re-implementation of the correlation chain, textbook form
    /// (separate norms in the denominator), used as the independent oracle.
    fn stoi_oracle(
        est: &Spectrogram,
        tgt: &Spectrogram,
        bands: &BandPartition,
        n: usize,
        zeta_db: f64,
    ) -> f64 {
        let m = tgt.frames();
        let clip = 1.0 + 10f64.powf(-zeta_db / 20.0);
        let mut sum = 0.0;
        for &(p, q) in bands.bands() {
            let alpha: Vec<f64> = (0..m)
                .map(|fr| est.frame(fr)[p..q].iter().map(|v| v * v).sum::<f64>().sqrt())
                .collect();
            let beta: Vec<f64> = (0..m)
                .map(|fr| tgt.frame(fr)[p..q].iter().map(|v| v * v).sum::<f64>().sqrt())
                .collect();
            for last in (n - 1)..m {
                let s = last + 1 - n;
                let xbar = &alpha[s..=last];
                let ybar = &beta[s..=last];
                let nx = xbar.iter().map(|v| v * v).sum::<f64>().sqrt();
                let ny = ybar.iter().map(|v| v * v).sum::<f64>().sqrt();
                let xhat: Vec<f64> = xbar
                    .iter()
                    .zip(ybar)
                    .map(|(&a, &b)| (ny / nx * a).min(clip * b))
                    .collect();
                let mx = xhat.iter().sum::<f64>() / n as f64;
                let my = ybar.iter().sum::<f64>() / n as f64;
                let num: f64 = xhat
                    .iter()
                    .zip(ybar)
                    .map(|(&a, &b)| (a - mx) * (b - my))
                    .sum();
                let dx = xhat.iter().map(|&a| (a - mx) * (a - mx)).sum::<f64>().sqrt();
                let dy = ybar.iter().map(|&b| (b - my) * (b - my)).sum::<f64>().sqrt();
                sum += num / (dx * dy);
            }
        }
        let valid = m - n + 1;
        -(sum / (bands.len() * valid) as f64)
    }

    #[test]
    fn stoi_hand_case_matches_oracle() {
        // single band, two frames, N = 2: envelopes alpha = [1, 2] against
        // beta = [2, 4]; the clipping bound stays inactive
        let est = Spectrogram::from_parts(vec![1.0, 2.0], 1, 2);
        let tgt = Spectrogram::from_parts(vec![2.0, 4.0], 1, 2);
        let cfg = StoiConfig {
            analysis_len: 2,
            zeta_db: -15.0,
            bands: BandPartition::from_edges(vec![(0, 1)]).unwrap(),
            frame_size: 2,
            hop: 1,
        };
        let mut t = Tape::new();
        let est_v = t.input(est.flat());
        let (l, _) = loss_neg_stoi(&mut t, est_v, &tgt, &cfg).unwrap();
        let got = t.scalar_value(l);
        let oracle = stoi_oracle(&est, &tgt, &cfg.bands, 2, -15.0);
        assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
        // proportional envelopes correlate perfectly
        assert!((got + 1.0).abs() < 1e-12);
    }

    #[test]
    fn stoi_random_case_matches_oracle_with_active_clipping() {
        // 3 frames beyond N and shapes skewed enough that the clip binds
        let k = 3;
        let m = 6;
        let est_m: Vec<f64> = (0..k * m)
            .map(|i| 0.2 + ((i * 37 + 11) % 23) as f64 * 0.45)
            .collect();
        let tgt_m: Vec<f64> = (0..k * m)
            .map(|i| 0.1 + ((i * 17 + 5) % 19) as f64 * 0.07)
            .collect();
        let est = Spectrogram::from_parts(est_m.clone(), k, m);
        let tgt = Spectrogram::from_parts(tgt_m, k, m);
        let cfg = StoiConfig {
            analysis_len: 3,
            zeta_db: -15.0,
            bands: BandPartition::from_edges(vec![(0, 2), (2, 3)]).unwrap(),
            frame_size: 4,
            hop: 1,
        };
        let mut t = Tape::new();
        let est_v = t.input(&est_m);
        let (l, _) = loss_neg_stoi(&mut t, est_v, &tgt, &cfg).unwrap();
        let oracle = stoi_oracle(&est, &tgt, &cfg.bands, 3, -15.0);
        assert!(
            (t.scalar_value(l) - oracle).abs() < 1e-12,
            "{} vs {oracle}",
            t.scalar_value(l)
        );
        assert!(t.scalar_value(l) >= -1.0 - 1e-12);
    }

    #[test]
    fn prepared_spectral_loss_matches_plain_spectrogram_path() {
        // the taped spectrogram must agree bitwise with the plain one
        let window: Vec<f64> = (0..40).map(|i| (0.21 * i as f64).sin() * 1.3).collect();
        let cfg = IsLossConfig {
            frame_size: 16,
            hop: 8,
            floor: 1e-12,
        };
        let prepared = PreparedLoss::prepare(&LossSpec::Is(cfg), &window).unwrap();
        let mut t = Tape::new();
        let est = t.input(&window);
        let (l, diag) = prepared.loss(&mut t, est).unwrap();
        // est == clean, so the divergence collapses to zero exactly
        assert_eq!(t.scalar_value(l), 0.0);
        assert_eq!(diag.floored_entries, 0);
    }

    #[test]
    fn loss_spec_names() {
        assert_eq!(LossSpec::L1.name(), "l1");
        assert_eq!(LossSpec::L2.name(), "l2");
        assert_eq!(LossSpec::Is(IsLossConfig::default()).name(), "is");
        assert_eq!(LossSpec::NegStoi(StoiConfig::default()).name(), "neg_stoi");
        assert_eq!(LossSpec::NegSdr(SdrLossConfig::default()).name(), "neg_sdr");
    }
}
