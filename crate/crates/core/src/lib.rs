//! Monaural source enhancement by direct SDR maximization.
//!
//! The crate trains a small Elman recurrent network to pull a clean signal
//! out of a noisy mixture, optimizing the source-to-distortion ratio itself
//! (computed through an orthogonal projection onto the clean signal and its
//! delays) by reverse-mode automatic differentiation, next to conventional
//! losses (L1, L2, Itakura-Saito, a STOI-based correlation loss).
//!
//! Module map:
//! - [`autodiff`]: the tape, reverse sweep, and a finite-difference checker.
//! - [`dsp`]: signal generation, SNR mixing, windowing, STFT, band edges.
//! - [`bss`]: projection-based SDR/SIR scoring and the gamma-SDR curve.
//! - [`objectives`]: the five differentiable losses.
//! - [`rnn`]: the recurrent model, SGD training loop, and inference.
//! - [`io`]: CSV/JSON formats shared with the command-line front end.

pub mod autodiff;
pub mod bss;
pub mod dsp;
pub mod io;
pub mod objectives;
pub mod rnn;
