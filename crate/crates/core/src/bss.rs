//! Evaluation-side SDR and SIR through orthogonal projection onto the
//! subspace spanned by a reference signal and its delayed copies, plus the
//! closed-form gamma-SDR curve.
//!
//! The projector never materializes the full `(T+G) x G` delay matrix `A`:
//! its Gram matrix is Toeplitz (autocorrelations of the reference), and both
//! `A^T v` and `A w` reduce to correlation loops. Rank deficiency — e.g. a
//! pure sinusoid spans only two delay directions — is handled by an
//! eigendecomposition pseudo-inverse of the Gram matrix.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::autodiff::ConstMatrix;

#[derive(Debug, Error)]
pub enum BssError {
    #[error("reference signal is all zeros")]
    ZeroReference,
    #[error("estimate length {0} does not match reference length {1}")]
    LengthMismatch(usize, usize),
    #[error("max delay must be at least 1")]
    ZeroMaxDelay,
    #[error("reference signal is empty")]
    EmptyReference,
    #[error("gamma must lie strictly inside (0, 1), got {0}")]
    GammaOutOfRange(f64),
}

pub type Result<T> = std::result::Result<T, BssError>;

/// Ratios beyond this magnitude (in dB) are reported as the cap itself.
pub const DB_CAP: f64 = 200.0;

/// Relative eigenvalue cutoff for the Gram pseudo-inverse.
pub const DEFAULT_RCOND: f64 = 1e-10;

/// Orthogonal projection of the degenerate dB ratio; `10 log10(num/den)`
/// capped to `[-DB_CAP, DB_CAP]`, with 0/0 mapping to the negative cap.
pub fn ratio_db(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        return -DB_CAP;
    }
    if den == 0.0 {
        return DB_CAP;
    }
    (10.0 * (num / den).log10()).clamp(-DB_CAP, DB_CAP)
}

/// Split of a padded estimate into its component inside the delayed-reference
/// subspace and the orthogonal remainder. `s_target + residual` reconstructs
/// the padded estimate exactly.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub s_target: Vec<f64>,
    pub residual: Vec<f64>,
}

impl Decomposition {
    pub fn target_energy(&self) -> f64 {
        self.s_target.iter().map(|v| v * v).sum()
    }

    pub fn residual_energy(&self) -> f64 {
        self.residual.iter().map(|v| v * v).sum()
    }
}

/// Projection onto the span of a reference signal delayed by 0..G-1 samples,
/// all zero-padded to length T+G.
///
/// Column g of the implicit matrix `A` is the reference delayed by g samples;
/// the Gram matrix `A^T A` is symmetric Toeplitz with the reference
/// autocorrelation on its diagonals.
#[derive(Debug, Clone)]
pub struct ToeplitzProjector {
    reference: Vec<f64>,
    max_delay: usize,
    padded_len: usize,
    gram: DMatrix<f64>,
    gram_pinv: DMatrix<f64>,
    rank: usize,
}

impl ToeplitzProjector {
    pub fn new(reference: &[f64], max_delay: usize) -> Result<Self> {
        Self::with_rcond(reference, max_delay, DEFAULT_RCOND)
    }

    pub fn with_rcond(reference: &[f64], max_delay: usize, rcond: f64) -> Result<Self> {
        if reference.is_empty() {
            return Err(BssError::EmptyReference);
        }
        if max_delay == 0 {
            return Err(BssError::ZeroMaxDelay);
        }
        if reference.iter().all(|&v| v == 0.0) {
            return Err(BssError::ZeroReference);
        }
        let t_len = reference.len();
        let g = max_delay;

        // autocorrelation r_d = sum_t ref[t] ref[t+d]; every delayed copy
        // fits fully inside the padded length, so gram[a][b] = r_|a-b|
        let mut autocorr = vec![0.0; g];
        for (d, r) in autocorr.iter_mut().enumerate() {
            if d < t_len {
                *r = reference[..t_len - d]
                    .iter()
                    .zip(&reference[d..])
                    .map(|(x, y)| x * y)
                    .sum();
            }
        }
        let gram = DMatrix::from_fn(g, g, |a, b| autocorr[a.abs_diff(b)]);

        let eig = gram.clone().symmetric_eigen();
        let lambda_max = eig
            .eigenvalues
            .iter()
            .cloned()
            .fold(0.0f64, |m, l| m.max(l.abs()));
        let cutoff = rcond * lambda_max;
        let mut rank = 0;
        let inv_lambda = DVector::from_iterator(
            g,
            eig.eigenvalues.iter().map(|&l| {
                if l > cutoff {
                    rank += 1;
                    1.0 / l
                } else {
                    0.0
                }
            }),
        );
        let q = &eig.eigenvectors;
        let gram_pinv = q * DMatrix::from_diagonal(&inv_lambda) * q.transpose();

        Ok(ToeplitzProjector {
            reference: reference.to_vec(),
            max_delay: g,
            padded_len: t_len + g,
            gram,
            gram_pinv,
            rank,
        })
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn max_delay(&self) -> usize {
        self.max_delay
    }

    pub fn padded_len(&self) -> usize {
        self.padded_len
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn gram_pinv(&self) -> &DMatrix<f64> {
        &self.gram_pinv
    }

    /// Number of Gram eigenvalues kept by the pseudo-inverse.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `A^T v` for a padded vector: correlations of v against each delay.
    fn correlate(&self, v_pad: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v_pad.len(), self.padded_len);
        (0..self.max_delay)
            .map(|g| {
                self.reference
                    .iter()
                    .zip(&v_pad[g..])
                    .map(|(r, v)| r * v)
                    .sum()
            })
            .collect()
    }

    /// `A w`: the reference filtered by delay weights w.
    fn synthesize(&self, w: &[f64]) -> Vec<f64> {
        debug_assert_eq!(w.len(), self.max_delay);
        let mut out = vec![0.0; self.padded_len];
        for (g, &wg) in w.iter().enumerate() {
            if wg == 0.0 {
                continue;
            }
            for (t, &r) in self.reference.iter().enumerate() {
                out[t + g] += wg * r;
            }
        }
        out
    }

    /// Projects a length-T estimate (zero-padded internally by G samples)
    /// onto the delayed-reference subspace.
    pub fn project(&self, est: &[f64]) -> Result<Decomposition> {
        if est.len() != self.reference.len() {
            return Err(BssError::LengthMismatch(est.len(), self.reference.len()));
        }
        let mut est_pad = est.to_vec();
        est_pad.resize(self.padded_len, 0.0);
        Ok(self.project_padded(&est_pad))
    }

    /// Projects an already padded vector of length T+G.
    pub fn project_padded(&self, est_pad: &[f64]) -> Decomposition {
        assert_eq!(est_pad.len(), self.padded_len);
        let c = DVector::from_vec(self.correlate(est_pad));
        let w = &self.gram_pinv * c;
        let s_target = self.synthesize(w.as_slice());
        let residual = est_pad
            .iter()
            .zip(&s_target)
            .map(|(e, s)| e - s)
            .collect();
        Decomposition { s_target, residual }
    }

    /// `A^T` as a dense constant matrix (`G x (T+G)`), for recording the
    /// projection on a tape.
    pub fn analysis_matrix(&self) -> ConstMatrix {
        let mut data = vec![0.0; self.max_delay * self.padded_len];
        for g in 0..self.max_delay {
            for (t, &r) in self.reference.iter().enumerate() {
                data[g * self.padded_len + g + t] = r;
            }
        }
        ConstMatrix::new(self.max_delay, self.padded_len, data)
    }

    /// `A (A^T A)^+` as a dense constant matrix (`(T+G) x G`); applying it
    /// to `A^T v` yields the projection of v.
    pub fn synthesis_pinv_matrix(&self) -> ConstMatrix {
        let mut data = vec![0.0; self.padded_len * self.max_delay];
        for h in 0..self.max_delay {
            for g in 0..self.max_delay {
                let p = self.gram_pinv[(g, h)];
                if p == 0.0 {
                    continue;
                }
                for (t, &r) in self.reference.iter().enumerate() {
                    data[(t + g) * self.max_delay + h] += r * p;
                }
            }
        }
        ConstMatrix::new(self.padded_len, self.max_delay, data)
    }
}

/// Source-to-distortion ratio of an estimate against a clean reference, in
/// dB, capped to `[-DB_CAP, DB_CAP]`.
pub fn sdr(clean: &[f64], est: &[f64], max_delay: usize) -> Result<f64> {
    let projector = ToeplitzProjector::new(clean, max_delay)?;
    let d = projector.project(est)?;
    Ok(ratio_db(d.target_energy(), d.residual_energy()))
}

/// Source-to-interference ratio: energy of the clean-subspace component of
/// the estimate over the energy of its noise-subspace component, where each
/// subspace is spanned by the corresponding signal and its delays.
pub fn sir(clean: &[f64], noise: &[f64], est: &[f64], max_delay: usize) -> Result<f64> {
    let clean_proj = ToeplitzProjector::new(clean, max_delay)?;
    let noise_proj = ToeplitzProjector::new(noise, max_delay)?;
    let s_target = clean_proj.project(est)?;
    let e_interf = noise_proj.project(est)?;
    Ok(ratio_db(s_target.target_energy(), e_interf.target_energy()))
}

/// `SDR(gamma) = 10 log10((1 - gamma^2) / gamma^2)` for a unit-norm estimate
/// split into orthogonal target and non-target parts.
pub fn sdr_gamma(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(BssError::GammaOutOfRange(gamma));
    }
    let g2 = gamma * gamma;
    Ok(10.0 * ((1.0 - g2) / g2).log10())
}

/// Pointwise evaluation of the gamma-SDR curve.
pub fn sdr_gamma_curve(gammas: &[f64]) -> Result<Vec<(f64, f64)>> {
    gammas.iter().map(|&g| Ok((g, sdr_gamma(g)?))).collect()
}

/// One scored run: the row format shared by eval reports and sweep results.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub loss_kind: String,
    pub snr_in_db: f64,
    pub seed: u64,
    pub sdr_db: f64,
    pub sir_db: f64,
    pub runtime_s: f64,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "loss,snr_in_db,seed,sdr_db,sir_db,runtime_s";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.6},{},{:.6},{:.6},{:.6}",
            self.loss_kind, self.snr_in_db, self.seed, self.sdr_db, self.sir_db, self.runtime_s
        )
    }
}
