use proptest::prelude::*;
use quid_lab::data::{synth_clusters, LabeledDataset, SynthSpec};
use quid_lab::encode::{encode, EncoderConfig};
use quid_lab::ess::{class_mean_distances, DistanceMetric};
use quid_lab::poison::{poison, quid_poison, split_poison_set, AttackMode, PoisonSpec};
use quid_lab::simcore::DensityMatrix;

fn small_data(seed: u64) -> LabeledDataset {
    synth_clusters(&SynthSpec::new(3, 2, 6, 0.4, seed)).unwrap()
}

fn metric_strategy() -> impl Strategy<Value = DistanceMetric> {
    prop_oneof![
        Just(DistanceMetric::Frobenius),
        Just(DistanceMetric::Trace),
        Just(DistanceMetric::HilbertSchmidt),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn output_size_and_clean_rows_are_preserved(
        data_seed in 0u64..50,
        eps in 0.0f64..=1.0,
        mode in prop_oneof![Just(AttackMode::Quid), Just(AttackMode::RandomFlip), Just(AttackMode::BilevelRandom)],
        seed: u64,
    ) {
        let ds = small_data(data_seed);
        let cfg = EncoderConfig::angle_for_dim(2, 2);
        let spec = PoisonSpec::new(mode, eps, seed);
        let Ok(out) = poison(&ds, &spec, &cfg) else {
            // Only QUID-style attacks may refuse, and only with < 2 clean classes.
            prop_assert!(mode != AttackMode::RandomFlip);
            return Ok(());
        };
        prop_assert_eq!(out.dataset.len(), ds.len());
        let (clean, poisoned) = split_poison_set(&ds, eps, seed).unwrap();
        prop_assert_eq!(&out.poisoned_indices, &poisoned);
        for &i in &clean {
            prop_assert_eq!(out.dataset.feature(i), ds.feature(i));
            prop_assert_eq!(out.dataset.label(i), ds.label(i));
        }
        if mode != AttackMode::BilevelRandom {
            prop_assert_eq!(out.dataset.features(), ds.features());
        }
        prop_assert_eq!(poison(&ds, &spec, &cfg).unwrap(), out);
    }

    /// Shuffling which clean rows sit at which clean positions leaves the
    /// poison set and its labels untouched.
    #[test]
    fn quid_ignores_clean_set_order(data_seed in 0u64..50, seed: u64, rot in 1usize..10, metric in metric_strategy()) {
        let ds = small_data(data_seed);
        let cfg = EncoderConfig::angle_for_dim(2, 2);
        let mut spec = PoisonSpec::new(AttackMode::Quid, 0.4, seed);
        spec.metric = metric;
        let (clean, _) = split_poison_set(&ds, 0.4, seed).unwrap();
        let mut features = ds.features().to_vec();
        let mut labels = ds.labels().to_vec();
        for (k, &dst) in clean.iter().enumerate() {
            let src = clean[(k + rot) % clean.len()];
            features[dst] = ds.feature(src).to_vec();
            labels[dst] = ds.label(src);
        }
        let permuted = LabeledDataset::new(features, labels, ds.class_count()).unwrap();
        let a = quid_poison(&ds, &spec, &cfg).unwrap();
        let b = quid_poison(&permuted, &spec, &cfg).unwrap();
        for &i in &a.poisoned_indices {
            prop_assert_eq!(a.dataset.label(i), b.dataset.label(i));
        }
    }

    /// The farthest class does not change when every distance is scaled by
    /// a positive constant.
    #[test]
    fn farthest_class_is_scale_invariant(data_seed in 0u64..50, scale in 0.01f64..100.0, pick in 0usize..18) {
        let ds = small_data(data_seed);
        let cfg = EncoderConfig::angle_for_dim(2, 2);
        let states: Vec<(DensityMatrix, usize)> = (0..ds.len())
            .map(|i| (encode(ds.feature(i), &cfg, None).unwrap(), ds.label(i)))
            .collect();
        let query = &states[pick % states.len()].0;
        let means = class_mean_distances(query, &states, DistanceMetric::Frobenius).unwrap();
        let argmax = |v: &[f64]| (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b });
        let plain: Vec<f64> = means.iter().map(|m| m.unwrap()).collect();
        let scaled: Vec<f64> = plain.iter().map(|m| m * scale).collect();
        prop_assert_eq!(argmax(&plain), argmax(&scaled));
    }
}
