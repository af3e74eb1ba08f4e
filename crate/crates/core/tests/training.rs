mod common;

use common::rng;
use proptest::prelude::*;
use ttc_core::data::generate_synthetic;
use ttc_core::head::LevelParams;
use ttc_core::numeric::Matrix;
use ttc_core::optim::{adamw_step, AdamW, OptimizerState};
use ttc_core::train::{early_stop_check, train, EpochRecord};
use ttc_core::{Dataset, HeadMode, HeadParameters, SyntheticSpec, Taxonomy, TrainConfig};

fn separable() -> (Taxonomy, Dataset) {
    let tax = Taxonomy::balanced(&[2, 2, 2]).unwrap();
    let spec = SyntheticSpec {
        feature_dim: 64,
        radii: vec![8.0, 4.0, 2.0],
        noise_sigma: 0.0,
        instances_per_leaf: 8,
    };
    let ds = generate_synthetic(&tax, &spec, 5).unwrap();
    (tax, ds)
}

fn scalar_params(w: f64, b: f64) -> HeadParameters {
    HeadParameters::new(
        1,
        vec![LevelParams {
            weights: Matrix::new(1, 1, vec![w]).unwrap(),
            bias: vec![b],
        }],
    )
    .unwrap()
}

#[test]
fn training_is_deterministic() {
    let (tax, ds) = separable();
    let cfg = TrainConfig {
        max_epochs: 5,
        seed: 9,
        ..TrainConfig::default()
    };
    for mode in [HeadMode::Ttc, HeadMode::Flat] {
        let a = train(&ds, &tax, &cfg, mode).unwrap();
        let b = train(&ds, &tax, &cfg, mode).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.history, b.history);
        assert_eq!(a.best_epoch, b.best_epoch);
    }
    let other = train(
        &ds,
        &tax,
        &TrainConfig {
            seed: 10,
            ..cfg.clone()
        },
        HeadMode::Ttc,
    )
    .unwrap();
    assert_ne!(
        other.params,
        train(&ds, &tax, &cfg, HeadMode::Ttc).unwrap().params
    );
}

#[test]
fn zero_epochs_returns_the_initialisation() {
    let (tax, ds) = separable();
    let cfg = TrainConfig {
        max_epochs: 0,
        seed: 4,
        ..TrainConfig::default()
    };
    let out = train(&ds, &tax, &cfg, HeadMode::Ttc).unwrap();
    let init = HeadParameters::init_uniform(&tax.level_sizes(), 64, &mut rng(4));
    assert_eq!(out.params, init);
    assert!(out.history.is_empty());
    assert_eq!(out.best_epoch, None);
}

#[test]
fn separable_data_is_memorised() {
    let (tax, ds) = separable();
    let cfg = TrainConfig {
        max_epochs: 500,
        early_stop_patience: 500,
        seed: 1,
        ..TrainConfig::default()
    };
    let out = train(&ds, &tax, &cfg, HeadMode::Ttc).unwrap();
    let reached = out.history.iter().find(|r| r.exact_match >= 0.99);
    assert!(reached.is_some(), "last record {:?}", out.history.last());
    let losses: Vec<f64> = out.history.iter().map(|r| r.loss).collect();
    for w in losses[5..].windows(2) {
        assert!(w[1] <= w[0] + 1e-6, "loss rose from {} to {}", w[0], w[1]);
    }
}

#[test]
fn default_patience_stops_early() {
    let (tax, ds) = separable();
    let cfg = TrainConfig {
        max_epochs: 500,
        seed: 1,
        ..TrainConfig::default()
    };
    let out = train(&ds, &tax, &cfg, HeadMode::Ttc).unwrap();
    assert!(out.history.len() < 500);
    assert!(early_stop_check(&out.history, 3));
    assert!(!early_stop_check(&out.history[..out.history.len() - 1], 3));
    let best = out.best_epoch.unwrap();
    let best_acc = out.history[best - 1].mean_accuracy();
    assert!(out.history.iter().all(|r| r.mean_accuracy() <= best_acc));
}

#[test]
fn adamw_matches_hand_rolled_updates() {
    // f(w, b) = (w - 3)² / 2 + (b + 1)² / 2
    let (lr, wd) = (0.05, 0.1);
    let opt = AdamW::new(lr, wd);
    let mut params = scalar_params(0.5, 2.0);
    let mut state = OptimizerState::new(&params);

    let mut x = [0.5f64, 2.0];
    let target = [3.0, -1.0];
    let (mut m, mut v) = ([0.0f64; 2], [0.0f64; 2]);
    for t in 1..=10 {
        let flat = params.to_flat();
        let grads = scalar_params(flat[0] - 3.0, flat[1] + 1.0);
        adamw_step(&mut params, &grads, &mut state, &opt).unwrap();

        for k in 0..2 {
            let g = x[k] - target[k];
            m[k] = 0.9 * m[k] + 0.1 * g;
            v[k] = 0.999 * v[k] + 0.001 * g * g;
            let m_hat = m[k] / (1.0 - 0.9f64.powi(t));
            let v_hat = v[k] / (1.0 - 0.999f64.powi(t));
            x[k] = x[k] * (1.0 - lr * wd) - lr * m_hat / (v_hat.sqrt() + 1e-8);
        }
        let got = params.to_flat();
        for k in 0..2 {
            assert!(
                (got[k] - x[k]).abs() <= 1e-12,
                "step {t}: {} vs {}",
                got[k],
                x[k]
            );
        }
    }
    assert_eq!(state.step, 10);
}

proptest! {
    #[test]
    fn adamw_keeps_shape_and_finiteness(seed in any::<u64>(), lr in 1e-5f64..1.0, wd in 0.0f64..1.0, scale in 0.0f64..1e3) {
        let sizes = [2, 3];
        let mut r = rng(seed);
        let mut params = HeadParameters::init_uniform(&sizes, 4, &mut r);
        let mut grads = HeadParameters::init_uniform(&sizes, 4, &mut r);
        grads.for_each_mut(|g| *g *= scale);
        let mut state = OptimizerState::new(&params);
        let opt = AdamW::new(lr, wd);
        for _ in 0..5 {
            adamw_step(&mut params, &grads, &mut state, &opt).unwrap();
        }
        prop_assert!(params.all_finite());
        prop_assert_eq!(params.level_sizes(), sizes.to_vec());
        prop_assert_eq!(params.feature_dim(), 4);
    }

    #[test]
    fn early_stop_needs_patience_stale_epochs(accs in prop::collection::vec(0u8..=4, 0..20), patience in 1usize..6) {
        let history: Vec<EpochRecord> = accs
            .iter()
            .enumerate()
            .map(|(i, &a)| EpochRecord {
                epoch: i + 1,
                loss: 0.0,
                level_accuracy: vec![f64::from(a) / 4.0],
                exact_match: 0.0,
                seconds: 0.0,
            })
            .collect();
        let stop = early_stop_check(&history, patience);
        if history.len() <= patience {
            prop_assert!(!stop);
        }
        // epochs since the first occurrence of the maximum
        let expect = match accs.iter().max() {
            None => false,
            Some(max) => {
                let first = accs.iter().position(|a| a == max).unwrap();
                accs.len() - 1 - first >= patience
            }
        };
        prop_assert_eq!(stop, expect);
    }
}
