use nnicp::data::Dataset;
use nnicp::regressors::{
    fit_residual_model, fit_residual_targets, loss_and_gradient, train_mlp, train_mlp_detailed,
    MlpConfig, ResidualModel, TrainedRegressor, MIN_RESIDUAL,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_network(rng: &mut ChaCha8Rng, d: usize, h: usize) -> TrainedRegressor {
    let mut u = |n: usize| {
        (0..n)
            .map(|_| rng.random_range(-1.5..1.5))
            .collect::<Vec<f64>>()
    };
    let (w, b, v) = (u(d * h), u(h), u(h));
    let c = u(1)[0];
    TrainedRegressor::new(d, h, &w, &b, &v, c).unwrap()
}

fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let labels = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    Dataset::from_rows(&rows, labels).unwrap()
}

fn with_params(m: &TrainedRegressor, p: &[f64]) -> TrainedRegressor {
    let (d, h) = (m.input_dim(), m.hidden_units());
    TrainedRegressor::new(
        d,
        h,
        &p[..d * h],
        &p[d * h..d * h + h],
        &p[d * h + h..d * h + 2 * h],
        p[p.len() - 1],
    )
    .unwrap()
}

fn line_dataset(n: usize, f: impl Fn(f64) -> f64) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| vec![-1.0 + 2.0 * i as f64 / (n - 1) as f64])
        .collect();
    let labels = rows.iter().map(|r| f(r[0])).collect();
    Dataset::from_rows(&rows, labels).unwrap()
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for h in 1..=5 {
        for d in [1, 3] {
            let model = random_network(&mut rng, d, h);
            let ds = random_dataset(&mut rng, 20, d);
            let (_, grad) = loss_and_gradient(&model, &ds).unwrap();
            let p = model.parameters().to_vec();
            let eps = 1e-6;
            for k in 0..p.len() {
                let (mut plus, mut minus) = (p.clone(), p.clone());
                plus[k] += eps;
                minus[k] -= eps;
                let lp = loss_and_gradient(&with_params(&model, &plus), &ds)
                    .unwrap()
                    .0;
                let lm = loss_and_gradient(&with_params(&model, &minus), &ds)
                    .unwrap()
                    .0;
                let fd = (lp - lm) / (2.0 * eps);
                let rel = (grad[k] - fd).abs() / grad[k].abs().max(fd.abs()).max(1e-8);
                assert!(
                    rel < 1e-4,
                    "h={h} d={d} param {k}: analytic {} vs fd {fd}",
                    grad[k]
                );
            }
        }
    }
}

#[test]
fn training_is_deterministic() {
    let ds = line_dataset(80, |x| (3.0 * x).sin());
    let cfg = MlpConfig {
        hidden_units: 4,
        restarts: 3,
        max_epochs: 50,
        seed: 9,
        ..MlpConfig::default()
    };
    let a = train_mlp(&ds, &cfg).unwrap();
    let b = train_mlp(&ds, &cfg).unwrap();
    let bits = |m: &TrainedRegressor| {
        m.parameters()
            .iter()
            .map(|p| p.to_bits())
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&a), bits(&b));
    let c = train_mlp(&ds, &MlpConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(bits(&a), bits(&c));
}

#[test]
fn selected_restart_has_lowest_validation_error() {
    let ds = line_dataset(120, |x| (4.0 * x).sin() + 0.3 * x);
    let cfg = MlpConfig {
        hidden_units: 3,
        restarts: 6,
        max_epochs: 40,
        seed: 1,
        ..MlpConfig::default()
    };
    let report = train_mlp_detailed(&ds, &cfg).unwrap();
    assert_eq!(report.restarts.len(), 6);
    let best = report.restarts[report.selected].validation_mse.unwrap();
    for (i, r) in report.restarts.iter().enumerate() {
        let v = r.validation_mse.unwrap();
        assert!(best <= v);
        if v == best {
            assert!(report.selected <= i);
        }
        assert!(
            r.final_loss < r.initial_loss,
            "restart {i} did not reduce training loss"
        );
    }
}

#[test]
fn fits_a_linear_function() {
    let ds = line_dataset(200, |x| 2.0 * x);
    let cfg = MlpConfig {
        hidden_units: 3,
        ..MlpConfig::default()
    };
    let report = train_mlp_detailed(&ds, &cfg).unwrap();
    let val_rmse = report.restarts[report.selected]
        .validation_mse
        .unwrap()
        .sqrt();
    let n = ds.len() as f64;
    let mean = ds.labels().iter().sum::<f64>() / n;
    let std = (ds.labels().iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt();
    assert!(
        val_rmse < 0.05 * std,
        "validation rmse {val_rmse} vs label std {std}"
    );
}

#[test]
fn constant_labels_give_constant_predictions() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ds = random_dataset(&mut rng, 60, 2);
    ds = Dataset::new(ds.attributes().to_vec(), vec![4.25; 60], 2).unwrap();
    let model = train_mlp(
        &ds,
        &MlpConfig {
            hidden_units: 4,
            restarts: 2,
            ..MlpConfig::default()
        },
    )
    .unwrap();
    for p in model.predict_all(&ds).unwrap() {
        assert!((p - 4.25).abs() < 1e-3, "prediction {p}");
    }
}

#[test]
fn too_few_examples_rejected() {
    let ds = line_dataset(9, |x| x);
    assert!(train_mlp(&ds, &MlpConfig::default()).is_err());
}

#[test]
fn residual_fit_recovers_log_linear_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 2000;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    // |y| = exp(x1) * u with u uniform: ln|y| = x1 + ln u
    let labels: Vec<f64> = rows
        .iter()
        .map(|r| {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            sign * r[0].exp() * rng.random_range(0.05..1.0)
        })
        .collect();
    let ds = Dataset::from_rows(&rows, labels).unwrap();
    let zero = TrainedRegressor::new(2, 1, &[0.0, 0.0], &[0.0], &[0.0], 0.0).unwrap();
    let rm = fit_residual_model(&ds, &zero, MIN_RESIDUAL).unwrap();
    assert!(
        (rm.weights()[0] - 1.0).abs() < 0.1,
        "weight {}",
        rm.weights()[0]
    );
    assert!(rm.weights()[1].abs() < 0.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn residual_fit_preserves_mean(
        rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 5..60),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let targets: Vec<f64> = rows.iter().map(|_| rng.random_range(-8.0..2.0)).collect();
        let ds = Dataset::from_rows(&rows, vec![0.0; rows.len()]).unwrap();
        let rm = fit_residual_targets(&ds, &targets).unwrap();
        let n = rows.len() as f64;
        let mean_pred = rows.iter().map(|r| rm.predict_mu(r).unwrap()).sum::<f64>() / n;
        let mean_t = targets.iter().sum::<f64>() / n;
        prop_assert!((mean_pred - mean_t).abs() < 1e-8, "{} vs {}", mean_pred, mean_t);
    }

    #[test]
    fn network_text_round_trip(seed in any::<u64>(), d in 1usize..6, h in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_network(&mut rng, d, h);
        let back = TrainedRegressor::from_text(&m.to_text()).unwrap();
        prop_assert_eq!(&back, &m);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        prop_assert_eq!(back.predict(&x).unwrap().to_bits(), m.predict(&x).unwrap().to_bits());
    }

    #[test]
    fn residual_text_round_trip(w in prop::collection::vec(-1e3f64..1e3, 1..8), b in -1e3f64..1e3) {
        let m = ResidualModel::new(w, b).unwrap();
        prop_assert_eq!(ResidualModel::from_text(&m.to_text()).unwrap(), m);
    }
}

#[test]
fn prediction_rejects_wrong_dimension() {
    let m = TrainedRegressor::new(2, 1, &[1.0, 1.0], &[0.0], &[1.0], 0.0).unwrap();
    assert!(m.predict(&[1.0]).is_err());
    assert!(m.predict(&[1.0, 2.0, 3.0]).is_err());
    // tanh(0.5) by hand
    let expect = (0.5f64.exp() - (-0.5f64).exp()) / (0.5f64.exp() + (-0.5f64).exp());
    assert!((m.predict(&[0.25, 0.25]).unwrap() - expect).abs() < 1e-15);
}
