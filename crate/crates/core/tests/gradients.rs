mod common;

use common::*;
use flowdpo::dpo::{fm_dpo_grad, fm_dpo_loss};

#[test]
fn fm_gradient_matches_central_differences() {
    assert!(small_model(0).param_count() <= 1000);
    for seed in 0..5 {
        let err = fm_grad_error(seed);
        assert!(err < 1e-4, "batch {seed}: relative error {err:e}");
    }
}

#[test]
fn dpo_gradient_matches_central_differences() {
    for seed in 0..5 {
        for (beta, weight) in [(1.0, 0.0), (20.0, 0.0), (5.0, 0.5)] {
            let err = dpo_grad_error(seed, beta, weight);
            assert!(err < 1e-4, "batch {seed}, beta {beta}, weight {weight}: relative error {err:e}");
        }
    }
}

#[test]
fn unregularised_gradient_agrees_with_combined_entry_point() {
    let reference = small_model(3);
    let theta = jitter(&reference, 4, 0.05);
    let batch = dpo_batch(5, 4);
    let a = fm_dpo_grad(&theta, &reference, &batch, 10.0).unwrap().flat();
    let b = flowdpo::dpo::fm_dpo_loss_and_grad(&theta, &reference, &batch, 10.0, 0.0).unwrap();
    assert_eq!(a, b.1.flat());
    assert_eq!(b.0, fm_dpo_loss(&theta, &reference, &batch, 10.0).unwrap());
}

#[test]
fn reference_against_itself_is_ln2() {
    for seed in 0..100 {
        let m = small_model(seed);
        let batch = dpo_batch(seed + 1000, 1 + (seed as usize % 7));
        let beta = [0.1, 1.0, 20.0, 5000.0][seed as usize % 4];
        let loss = fm_dpo_loss(&m, &m, &batch, beta).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() <= 1e-9, "batch {seed}: {loss}");
    }
}
