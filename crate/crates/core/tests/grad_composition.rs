//! End-to-end gradients: every objective composed with the recurrent
//! forward pass, differentiated with respect to the full parameter vector
//! and checked against central finite differences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sdropt::autodiff::{grad_check, GradCheckReport};
use sdropt::dsp::{self, BandPartition};
use sdropt::objectives::{
    IsLossConfig, LossSpec, PreparedLoss, SdrLossConfig, StoiConfig,
};
use sdropt::rnn::{rnn_forward, RnnParams, RnnVars};

const HIDDEN: usize = 4;
const WINDOW: usize = 10;

fn toy_losses() -> Vec<LossSpec> {
    vec![
        LossSpec::L1,
        LossSpec::L2,
        LossSpec::Is(IsLossConfig {
            frame_size: 4,
            hop: 2,
            floor: 1e-12,
        }),
        LossSpec::NegStoi(StoiConfig {
            analysis_len: 3,
            zeta_db: -15.0,
            bands: BandPartition::third_octave(8.0, 4, 1, 1.8).unwrap(),
            frame_size: 4,
            hop: 2,
        }),
        LossSpec::NegSdr(SdrLossConfig::default()),
    ]
}

fn check_composed(loss: &LossSpec, seed: u64) -> GradCheckReport {
    let t_len = WINDOW + 6;
    let clean = dsp::gen_sine(t_len).unwrap();
    let noise = dsp::gen_uniform_noise(t_len, seed).unwrap();
    let (mixture, _) = dsp::mix_at_snr(&clean, &noise, 5.0).unwrap();
    let offset = (seed as usize) % 6;
    let clean_w = &clean[offset..offset + WINDOW];
    let mixture_w = mixture[offset..offset + WINDOW].to_vec();

    let prepared = PreparedLoss::prepare(loss, clean_w).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(7));
    let params = RnnParams::init(HIDDEN, &mut rng);
    let point = RnnVars::flatten(&params);

    grad_check(
        |tape, flat| {
            let vars = RnnVars::from_flat(tape, flat, HIDDEN).unwrap();
            let est = rnn_forward(tape, &vars, &mixture_w).unwrap();
            Ok(prepared.loss(tape, est).unwrap().0)
        },
        &point,
        1e-6,
        1e-5,
    )
    .unwrap()
}

#[test]
fn all_five_losses_through_the_rnn_match_finite_differences() {
    for loss in toy_losses() {
        for seed in [1u64, 2, 3] {
            let report = check_composed(&loss, seed);
            assert!(
                report.passed(),
                "{} seed {seed}: max rel err {:.3e} over {} coords ({} skipped)",
                loss.name(),
                report.max_rel_err,
                report.checked,
                report.skipped
            );
            assert!(
                report.checked > 0,
                "{} seed {seed}: no coordinates checked",
                loss.name()
            );
        }
    }
}

#[test]
fn parameter_flattening_matches_hoisted_layout() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let params = RnnParams::init(3, &mut rng);
    let flat = RnnVars::flatten(&params);
    assert_eq!(flat.len(), params.num_params());

    // the same forward pass through hoisted leaves and through slices of the
    // flat vector must agree bitwise
    let window = [0.3, -0.8, 0.5, 0.0, 1.2];
    let mut t1 = sdropt::autodiff::Tape::new();
    let vars = RnnVars::hoist(&mut t1, &params);
    let out1 = rnn_forward(&mut t1, &vars, &window).unwrap();

    let mut t2 = sdropt::autodiff::Tape::new();
    let flat_var = t2.input(&flat);
    let vars2 = RnnVars::from_flat(&mut t2, flat_var, 3).unwrap();
    let out2 = rnn_forward(&mut t2, &vars2, &window).unwrap();

    for (a, b) in t1.value(out1).iter().zip(t2.value(out2)) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
