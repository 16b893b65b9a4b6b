//! A minimal Elman recurrent network, minibatch SGD training under any of
//! the objectives, early stopping on a validation split, and full-signal
//! inference via overlap-averaged sliding windows.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::autodiff::{AutodiffError, Tape, Var};
use crate::dsp::{self, DspError};
use crate::objectives::{LossDiag, LossError, LossSpec, PreparedLoss};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("window {index} has length {got}, expected {expected}")]
    RaggedWindow {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("mixture of {len} samples is shorter than the window {width}")]
    MixtureTooShort { len: usize, width: usize },
}

pub type Result<T> = std::result::Result<T, TrainError>;

/// Elman network weights: the hidden state evolves as
/// `h_t = tanh(w_in * x_t + W_rec h_{t-1} + b_h)` with a linear readout
/// `y_t = w_out . h_t + b_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnParams {
    pub w_in: Vec<f64>,
    /// Row-major `hidden x hidden` recurrence matrix.
    pub w_rec: Vec<f64>,
    pub b_h: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: f64,
    pub hidden: usize,
}

impl RnnParams {
    pub fn zeros(hidden: usize) -> Self {
        RnnParams {
            w_in: vec![0.0; hidden],
            w_rec: vec![0.0; hidden * hidden],
            b_h: vec![0.0; hidden],
            w_out: vec![0.0; hidden],
            b_out: 0.0,
            hidden,
        }
    }

    /// Weights uniform on [-1/sqrt(H), 1/sqrt(H)], biases zero.
    pub fn init(hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(-bound..=bound)).collect()
        };
        RnnParams {
            w_in: draw(hidden),
            w_rec: draw(hidden * hidden),
            b_h: vec![0.0; hidden],
            w_out: draw(hidden),
            b_out: 0.0,
            hidden,
        }
    }

    pub fn num_params(&self) -> usize {
        self.hidden * self.hidden + 3 * self.hidden + 1
    }

    pub fn is_finite(&self) -> bool {
        self.w_in
            .iter()
            .chain(&self.w_rec)
            .chain(&self.b_h)
            .chain(&self.w_out)
            .chain(std::iter::once(&self.b_out))
            .all(|v| v.is_finite())
    }
}

/// The parameters hoisted onto a tape as differentiable leaves.
#[derive(Debug, Clone, Copy)]
pub struct RnnVars {
    pub w_in: Var,
    pub w_rec: Var,
    pub b_h: Var,
    pub w_out: Var,
    pub b_out: Var,
    pub hidden: usize,
}

impl RnnVars {
    pub fn hoist(tape: &mut Tape, params: &RnnParams) -> Self {
        RnnVars {
            w_in: tape.input(&params.w_in),
            w_rec: tape.input(&params.w_rec),
            b_h: tape.input(&params.b_h),
            w_out: tape.input(&params.w_out),
            b_out: tape.input_scalar(params.b_out),
            hidden: params.hidden,
        }
    }

    /// Views one flat leaf of length `H^2 + 3H + 1` as the parameter set,
    /// in the order w_in, w_rec, b_h, w_out, b_out. Lets a gradient checker
    /// perturb every parameter through a single input vector.
    pub fn from_flat(tape: &mut Tape, flat: Var, hidden: usize) -> Result<Self> {
        let h = hidden;
        let expected = h * h + 3 * h + 1;
        if flat.shape().len() != expected {
            return Err(TrainError::BadConfig(format!(
                "flat parameter vector has length {}, expected {expected}",
                flat.shape().len()
            )));
        }
        let w_in = tape.slice(flat, 0, h)?;
        let w_rec = tape.slice(flat, h, h * h)?;
        let b_h = tape.slice(flat, h + h * h, h)?;
        let w_out = tape.slice(flat, 2 * h + h * h, h)?;
        let b_out_v = tape.slice(flat, 3 * h + h * h, 1)?;
        let b_out = tape.sum(b_out_v)?; // scalar view of the 1-vector
        Ok(RnnVars {
            w_in,
            w_rec,
            b_h,
            w_out,
            b_out,
            hidden,
        })
    }

    /// Flattens params in the same order `from_flat` expects.
    pub fn flatten(params: &RnnParams) -> Vec<f64> {
        let mut flat =
            Vec::with_capacity(params.hidden * params.hidden + 3 * params.hidden + 1);
        flat.extend_from_slice(&params.w_in);
        flat.extend_from_slice(&params.w_rec);
        flat.extend_from_slice(&params.b_h);
        flat.extend_from_slice(&params.w_out);
        flat.push(params.b_out);
        flat
    }
}

/// Runs the recurrence over one window (h_0 = 0) and returns the
/// per-timestep outputs as one vector var of the window length.
pub fn rnn_forward(tape: &mut Tape, vars: &RnnVars, window: &[f64]) -> Result<Var> {
    let h = vars.hidden;
    let mut hidden: Option<Var> = None;
    let mut outputs = Vec::with_capacity(window.len());
    for &x_t in window {
        let drive = tape.scale(vars.w_in, x_t)?;
        let mut pre = tape.add(drive, vars.b_h)?;
        if let Some(prev) = hidden {
            let rec = tape.matvec(vars.w_rec, prev, h, h)?;
            pre = tape.add(pre, rec)?;
        }
        let state = tape.tanh(pre)?;
        let read = tape.dot(vars.w_out, state)?;
        outputs.push(tape.add(read, vars.b_out)?);
        hidden = Some(state);
    }
    Ok(tape.concat(&outputs)?)
}

/// Aligned (mixture window, clean window) pairs.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Dataset {
    pub fn from_signals(
        mixture: &[f64],
        clean: &[f64],
        width: usize,
        shift: usize,
    ) -> Result<Self> {
        if mixture.len() != clean.len() {
            return Err(TrainError::BadConfig(format!(
                "mixture has {} samples but clean has {}",
                mixture.len(),
                clean.len()
            )));
        }
        let xs = dsp::sliding_windows(mixture, width, shift)?;
        let ys = dsp::sliding_windows(clean, width, shift)?;
        Ok(Dataset {
            pairs: xs.into_iter().zip(ys).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn window_len(&self) -> usize {
        self.pairs.first().map(|(x, _)| x.len()).unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub hidden_size: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_size: 64,
            batch_size: 50,
            max_epochs: 500,
            learning_rate: 0.01,
            patience: 20,
            val_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
    /// Aggregated loss diagnostics over the whole run.
    pub diag: LossDiag,
}

/// Minibatch SGD under the given loss. A `val_fraction` share of windows is
/// held out (seeded shuffle); training stops after `patience` epochs without
/// strict validation improvement, and the parameters of the best validation
/// epoch are returned. With an empty validation split (tiny datasets) the
/// training loss stands in for the validation loss.
pub fn train(
    dataset: &Dataset,
    loss: &LossSpec,
    cfg: &TrainConfig,
) -> Result<(RnnParams, TrainHistory)> {
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if cfg.batch_size == 0 {
        return Err(TrainError::BadConfig("batch_size must be >= 1".into()));
    }
    if !(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0) {
        return Err(TrainError::BadConfig(
            "val_fraction must lie in (0, 1)".into(),
        ));
    }
    if cfg.hidden_size == 0 {
        return Err(TrainError::BadConfig("hidden_size must be >= 1".into()));
    }
    let width = dataset.window_len();
    for (i, (x, y)) in dataset.pairs.iter().enumerate() {
        if x.len() != width || y.len() != width {
            return Err(TrainError::RaggedWindow {
                index: i,
                got: x.len().min(y.len()),
                expected: width,
            });
        }
    }

    let prepared: Vec<PreparedLoss> = dataset
        .pairs
        .iter()
        .map(|(_, y)| PreparedLoss::prepare(loss, y))
        .collect::<std::result::Result<_, _>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = RnnParams::init(cfg.hidden_size, &mut rng);

    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    indices.shuffle(&mut rng);
    let val_count = (dataset.len() as f64 * cfg.val_fraction).floor() as usize;
    let (val_idx, train_idx) = indices.split_at(val_count);
    let val_idx = val_idx.to_vec();
    let mut train_idx = train_idx.to_vec();

    let mut tape = Tape::new();
    let mut history = TrainHistory {
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        stopped_early: false,
        diag: LossDiag::default(),
    };
    let mut best_params = params.clone();
    let mut bad_streak = 0usize;

    for epoch in 1..=cfg.max_epochs {
        train_idx.shuffle(&mut rng);
        let mut epoch_loss_sum = 0.0;
        for (batch_no, batch) in train_idx.chunks(cfg.batch_size).enumerate() {
            tape.clear();
            let vars = RnnVars::hoist(&mut tape, &params);
            let mut batch_sum: Option<Var> = None;
            for &idx in batch {
                let est = rnn_forward(&mut tape, &vars, &dataset.pairs[idx].0)?;
                let (lv, diag) = prepared[idx].loss(&mut tape, est)?;
                accumulate_diag(&mut history.diag, diag);
                batch_sum = Some(match batch_sum {
                    None => lv,
                    Some(acc) => tape.add(acc, lv)?,
                });
            }
            let batch_sum = batch_sum.expect("batch is non-empty");
            let batch_loss = tape.scale(batch_sum, 1.0 / batch.len() as f64)?;
            let loss_value = tape.scalar_value(batch_loss);
            if !loss_value.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: batch_no,
                });
            }
            epoch_loss_sum += loss_value * batch.len() as f64;

            let grads = tape.backward(batch_loss)?;
            let lr = cfg.learning_rate;
            apply_sgd(&mut params.w_in, grads.wrt(vars.w_in), lr);
            apply_sgd(&mut params.w_rec, grads.wrt(vars.w_rec), lr);
            apply_sgd(&mut params.b_h, grads.wrt(vars.b_h), lr);
            apply_sgd(&mut params.w_out, grads.wrt(vars.w_out), lr);
            params.b_out -= lr * grads.scalar_wrt(vars.b_out);
        }
        let train_loss = epoch_loss_sum / train_idx.len() as f64;

        let val_loss = if val_idx.is_empty() {
            train_loss
        } else {
            let mut sum = 0.0;
            tape.clear();
            let vars = RnnVars::hoist(&mut tape, &params);
            for &idx in &val_idx {
                let est = rnn_forward(&mut tape, &vars, &dataset.pairs[idx].0)?;
                let (lv, _) = prepared[idx].loss(&mut tape, est)?;
                sum += tape.scalar_value(lv);
            }
            sum / val_idx.len() as f64
        };

        history.epochs.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });

        if val_loss < history.best_val_loss {
            history.best_val_loss = val_loss;
            history.best_epoch = epoch;
            best_params = params.clone();
            bad_streak = 0;
        } else {
            bad_streak += 1;
            if bad_streak >= cfg.patience {
                history.stopped_early = true;
                break;
            }
        }
    }

    Ok((best_params, history))
}

fn apply_sgd(params: &mut [f64], grads: &[f64], lr: f64) {
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
}

fn accumulate_diag(total: &mut LossDiag, d: LossDiag) {
    total.floored_entries += d.floored_entries;
    total.degenerate_segments += d.degenerate_segments;
    total.floor_active |= d.floor_active;
}

/// Slides windows over the mixture, runs the network on each, and
/// reconstructs a full-length estimate by overlap-averaging.
pub fn infer(
    params: &RnnParams,
    mixture: &[f64],
    width: usize,
    shift: usize,
) -> Result<Vec<f64>> {
    if mixture.len() < width {
        return Err(TrainError::MixtureTooShort {
            len: mixture.len(),
            width,
        });
    }
    let windows = dsp::sliding_windows(mixture, width, shift)?;
    let mut outputs = Vec::with_capacity(windows.len());
    let mut tape = Tape::new();
    for w in &windows {
        tape.clear();
        let vars = RnnVars::hoist(&mut tape, params);
        let est = rnn_forward(&mut tape, &vars, w)?;
        outputs.push(tape.value(est).to_vec());
    }
    Ok(dsp::overlap_average(&outputs, shift, mixture.len())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::SdrLossConfig;

    fn toy_dataset(n_windows: usize, width: usize, seed: u64) -> Dataset {
        let t_len = width + n_windows - 1;
        let clean = dsp::gen_sine(t_len).unwrap();
        let noise = dsp::gen_uniform_noise(t_len, seed).unwrap();
        let (mixture, _) = dsp::mix_at_snr(&clean, &noise, 5.0).unwrap();
        Dataset::from_signals(&mixture, &clean, width, 1).unwrap()
    }

    #[test]
    fn zero_params_give_zero_output() {
        let params = RnnParams::zeros(4);
        let mut tape = Tape::new();
        let vars = RnnVars::hoist(&mut tape, &params);
        let out = rnn_forward(&mut tape, &vars, &[0.5, -0.2, 1.0]).unwrap();
        assert_eq!(tape.value(out), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn single_step_without_recurrence_is_feedforward() {
        let mut params = RnnParams::zeros(3);
        params.w_in = vec![0.4, -0.3, 0.9];
        params.b_h = vec![0.1, 0.0, -0.2];
        params.w_out = vec![1.0, 2.0, -1.0];
        params.b_out = 0.25;
        let x = 0.7;
        let mut tape = Tape::new();
        let vars = RnnVars::hoist(&mut tape, &params);
        let out = rnn_forward(&mut tape, &vars, &[x]).unwrap();
        let expect: f64 = params
            .w_in
            .iter()
            .zip(&params.b_h)
            .zip(&params.w_out)
            .map(|((wi, bh), wo)| wo * (wi * x + bh).tanh())
            .sum::<f64>()
            + params.b_out;
        assert!((tape.value(out)[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn zero_learning_rate_leaves_params_unchanged() {
        let data = toy_dataset(12, 8, 3);
        let cfg = TrainConfig {
            hidden_size: 4,
            batch_size: 4,
            max_epochs: 3,
            learning_rate: 0.0,
            patience: 10,
            val_fraction: 0.25,
            seed: 7,
        };
        let (params, _) = train(&data, &LossSpec::L2, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let initial = RnnParams::init(cfg.hidden_size, &mut rng);
        assert_eq!(params, initial);
    }

    #[test]
    fn one_window_memorization_under_l2() {
        let data = toy_dataset(1, 20, 5);
        let cfg = TrainConfig {
            hidden_size: 8,
            batch_size: 1,
            max_epochs: 200,
            learning_rate: 0.02,
            patience: 500,
            val_fraction: 0.5, // floor(1 * 0.5) = 0 held out: train on the window
            seed: 1,
        };
        let (_, history) = train(&data, &LossSpec::L2, &cfg).unwrap();
        let first = history.epochs.first().unwrap().train_loss;
        let last = history.epochs.last().unwrap().train_loss;
        assert!(
            last <= 0.1 * first,
            "loss went from {first} to {last} over {} epochs",
            history.epochs.len()
        );
    }

    #[test]
    fn early_stopping_halts_after_patience_without_improvement() {
        // lr = 0 keeps the validation loss constant: the first epoch sets
        // the best, every later epoch fails to improve strictly
        let data = toy_dataset(20, 8, 11);
        let cfg = TrainConfig {
            hidden_size: 4,
            batch_size: 8,
            max_epochs: 100,
            learning_rate: 0.0,
            patience: 5,
            val_fraction: 0.2,
            seed: 2,
        };
        let (_, history) = train(&data, &LossSpec::L2, &cfg).unwrap();
        assert!(history.stopped_early);
        assert_eq!(history.epochs.len(), 1 + cfg.patience);
        assert_eq!(history.best_epoch, 1);
    }

    #[test]
    fn training_is_bitwise_reproducible() {
        let data = toy_dataset(15, 10, 9);
        let cfg = TrainConfig {
            hidden_size: 6,
            batch_size: 5,
            max_epochs: 4,
            learning_rate: 0.05,
            patience: 10,
            val_fraction: 0.2,
            seed: 42,
        };
        let (p1, h1) = train(&data, &LossSpec::NegSdr(SdrLossConfig::default()), &cfg).unwrap();
        let (p2, h2) = train(&data, &LossSpec::NegSdr(SdrLossConfig::default()), &cfg).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(h1.epochs, h2.epochs);
    }

    #[test]
    fn infer_is_deterministic_and_zero_for_zero_params() {
        let mixture = dsp::gen_uniform_noise(40, 13).unwrap();
        let params = RnnParams::zeros(4);
        let a = infer(&params, &mixture, 10, 1).unwrap();
        let b = infer(&params, &mixture, 10, 1).unwrap();
        assert_eq!(a.len(), 40);
        assert!(a.iter().all(|&v| v == 0.0));
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert!(matches!(
            infer(&params, &mixture[..5], 10, 1),
            Err(TrainError::MixtureTooShort { .. })
        ));
    }

    #[test]
    fn full_batch_gradient_is_sum_of_window_gradients() {
        let data = toy_dataset(3, 6, 17);
        let params = {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            RnnParams::init(3, &mut rng)
        };
        // gradient of the summed loss on one tape
        let mut tape = Tape::new();
        let vars = RnnVars::hoist(&mut tape, &params);
        let mut sum: Option<Var> = None;
        for (x, y) in &data.pairs {
            let est = rnn_forward(&mut tape, &vars, x).unwrap();
            let l = crate::objectives::loss_l2(&mut tape, est, y).unwrap();
            sum = Some(match sum {
                None => l,
                Some(acc) => tape.add(acc, l).unwrap(),
            });
        }
        let total = sum.unwrap();
        let grads = tape.backward(total).unwrap();
        let combined = grads.wrt(vars.w_rec).to_vec();

        // sum of per-window gradients on separate tapes
        let mut accum = vec![0.0; combined.len()];
        for (x, y) in &data.pairs {
            let mut t = Tape::new();
            let vars = RnnVars::hoist(&mut t, &params);
            let est = rnn_forward(&mut t, &vars, x).unwrap();
            let l = crate::objectives::loss_l2(&mut t, est, y).unwrap();
            let g = t.backward(l).unwrap();
            for (a, v) in accum.iter_mut().zip(g.wrt(vars.w_rec)) {
                *a += v;
            }
        }
        for (c, a) in combined.iter().zip(&accum) {
            let denom = c.abs().max(a.abs()).max(1e-300);
            assert!((c - a).abs() / denom < 1e-10, "{c} vs {a}");
        }
    }
}
