//! Randomized invariants over the public API: metric axioms, estimator
//! oracles, schedule identities and serialization round-trips.

use proptest::prelude::*;

use bridgecast::config::RunConfig;
use bridgecast::data::{mean_scale, scale_values, unscale_values, MultivariateSeries};
use bridgecast::forecaster::ForecastSamples;
use bridgecast::metrics::{crps, wasserstein};
use bridgecast::schedules::{GammaKind, InterpKind, InterpolantSchedule};
use bridgecast::tensor::Tensor;

fn cloud(n: usize, d: usize) -> impl Strategy<Value = Tensor> {
    proptest::collection::vec(-50.0f64..50.0, n * d)
        .prop_map(move |v| Tensor::from_vec(&[n, d], v).unwrap())
}

proptest! {
    #[test]
    fn wasserstein_is_a_metric_on_point_clouds(
        a in cloud(12, 2),
        b in cloud(12, 2),
        c in cloud(12, 2),
    ) {
        let dab = wasserstein(&a, &b).unwrap();
        let dba = wasserstein(&b, &a).unwrap();
        let dac = wasserstein(&a, &c).unwrap();
        let dcb = wasserstein(&c, &b).unwrap();
        let daa = wasserstein(&a, &a).unwrap();
        prop_assert!(daa.abs() < 1e-9, "self distance {daa}");
        prop_assert!(dab >= 0.0);
        prop_assert!((dab - dba).abs() < 1e-9, "symmetry {dab} vs {dba}");
        prop_assert!(dab <= dac + dcb + 1e-9, "triangle {dab} > {dac} + {dcb}");
    }

    #[test]
    fn crps_matches_the_quadratic_definition_and_translates(
        samples in proptest::collection::vec(-10.0f64..10.0, 2..40),
        y in -10.0f64..10.0,
        shift in -5.0f64..5.0,
    ) {
        let fast = crps(&samples, y).unwrap();
        let m = samples.len();
        let mut naive = samples.iter().map(|x| (x - y).abs()).sum::<f64>() / m as f64;
        let mut pair = 0.0;
        for xi in &samples {
            for xj in &samples {
                pair += (xi - xj).abs();
            }
        }
        naive -= pair / (2.0 * (m * m) as f64);
        prop_assert!((fast - naive).abs() < 1e-9, "{fast} vs naive {naive}");
        prop_assert!(fast >= -1e-12);

        let shifted: Vec<f64> = samples.iter().map(|x| x + shift).collect();
        let translated = crps(&shifted, y + shift).unwrap();
        prop_assert!((fast - translated).abs() < 1e-9);
    }

    #[test]
    fn trig_interpolation_is_normalized_for_every_latent_amplitude(
        s in 0.0f64..=1.0,
        gamma in prop_oneof![
            Just(GammaKind::Sqrt),
            Just(GammaKind::Quad),
            Just(GammaKind::Trig)
        ],
    ) {
        let sched = InterpolantSchedule::new(InterpKind::Trig, gamma);
        let e = sched.eval(s).unwrap();
        let total = e.alpha * e.alpha + e.beta * e.beta + e.gamma * e.gamma;
        prop_assert!((total - 1.0).abs() < 1e-12, "s={s}: {total}");
    }

    #[test]
    fn mean_scaling_round_trips(
        rows in proptest::collection::vec(
            proptest::collection::vec(-100.0f64..100.0, 3),
            2..20
        ),
    ) {
        let values = Tensor::from_rows(&rows).unwrap();
        let series = MultivariateSeries::indexed(values.clone(), 0, "step").unwrap();
        let (scaled, stats) = mean_scale(&series).unwrap();
        let back = unscale_values(&scaled.values, &stats).unwrap();
        for (x, y) in values.data().iter().zip(back.data()) {
            prop_assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
        }
        let fwd = scale_values(&values, &stats).unwrap();
        for (x, y) in fwd.data().iter().zip(scaled.values.data()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn config_snapshots_round_trip(
        // TOML integers are signed 64-bit, so file seeds stop at i64::MAX.
        seed in 0u64..=i64::MAX as u64,
        iters in 0usize..100_000,
        batch in 1usize..5000,
        hidden in 1usize..256,
        n_runs in 1usize..10,
    ) {
        let mut cfg = RunConfig::default();
        cfg.train.seed = seed;
        cfg.train.iters = iters;
        cfg.train.batch = batch;
        cfg.train.n_runs = n_runs;
        cfg.model.hidden = hidden;
        let text = cfg.to_toml_string().unwrap();
        let back = RunConfig::from_toml_str(&text).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn forecast_quantiles_are_monotone_in_level(
        values in proptest::collection::vec(-20.0f64..20.0, 24),
        qa in 0.0f64..=1.0,
        qb in 0.0f64..=1.0,
    ) {
        let samples = Tensor::from_vec(&[8, 3, 1], values).unwrap();
        let fs = ForecastSamples {
            samples,
            targets: None,
            timestamps: vec!["1".into(), "2".into(), "3".into()],
        };
        let (lo, hi) = if qa <= qb { (qa, qb) } else { (qb, qa) };
        let q = fs.quantiles(&[lo, hi]).unwrap();
        for i in 0..3 {
            prop_assert!(q.data()[i] <= q.data()[3 + i] + 1e-12);
        }
    }
}
