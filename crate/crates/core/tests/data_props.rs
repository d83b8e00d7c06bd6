use std::collections::HashSet;

use bxt_core::{
    generate_synthetic, load_higgs_csv, split, write_csv, Dataset, Error, Label, LoadOptions, SplitSpec,
    SyntheticSpec,
};
use proptest::prelude::*;

fn class_totals(ds: &Dataset) -> (f64, f64) {
    ds.labels()
        .iter()
        .zip(ds.event_weights())
        .fold((0.0, 0.0), |(s, b), (l, w)| if l.is_signal() { (s + w, b) } else { (s, b + w) })
}

fn synth(n: usize, imbalance: f64, seed: u64) -> Dataset {
    generate_synthetic(&SyntheticSpec {
        n_samples: n,
        dimension: 2,
        overlap: 1.0,
        imbalance,
        seed,
    })
    .unwrap()
}

#[test]
fn open_data_proportions() {
    let n = 800_000;
    let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
    let labels = (0..n)
        .map(|i| if i % 3 == 0 { Label::Signal } else { Label::Background })
        .collect();
    let ds = Dataset::from_rows(&rows, labels, None, None).unwrap();
    let (tr, va, te) = split(&ds, &SplitSpec::default()).unwrap();
    assert_eq!((tr.len(), va.len(), te.len()), (250_000, 100_000, 450_000));
}

#[test]
fn bad_fractions_are_rejected() {
    let ds = synth(100, 0.5, 0);
    let spec = SplitSpec {
        train_fraction: 0.5,
        validation_fraction: 0.5,
        test_fraction: 0.5,
        ..SplitSpec::default()
    };
    assert!(matches!(split(&ds, &spec), Err(Error::InvalidConfig(_))));
    let tiny = synth(3, 0.5, 0);
    assert!(matches!(
        split(&tiny, &SplitSpec { stratified: false, ..SplitSpec::default() }),
        Err(Error::EmptyPartition { .. })
    ));
}

#[test]
fn synthetic_is_deterministic() {
    assert_eq!(synth(500, 0.3, 9), synth(500, 0.3, 9));
    assert_ne!(synth(500, 0.3, 9), synth(500, 0.3, 10));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_is_stratified_partition(
        n in 40usize..2_000,
        imbalance in 0.1f64..0.9,
        seed in any::<u64>(),
        stratified in any::<bool>(),
    ) {
        let ds = synth(n, imbalance, seed);
        prop_assume!(ds.has_both_classes());
        let spec = SplitSpec { seed, stratified, ..SplitSpec::default() };
        let (tr, va, te) = split(&ds, &spec).unwrap();
        let parts = [&tr, &va, &te];

        let mut seen = HashSet::new();
        for p in parts {
            for id in p.ids() {
                prop_assert!(seen.insert(id.clone()), "id {} appears twice", id);
            }
            prop_assert!((p.boost_weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        prop_assert_eq!(seen.len(), n);

        if stratified {
            let global = ds.count_signal() as f64 / n as f64;
            for p in parts {
                let expected = global * p.len() as f64;
                prop_assert!((p.count_signal() as f64 - expected).abs() <= 1.0 + 1e-9);
            }
        }

        let (s, b) = class_totals(&ds);
        for p in parts {
            let (ps, pb) = class_totals(p);
            if p.count_signal() > 0 {
                prop_assert!((ps - s).abs() <= 1e-9 * s);
            }
            if p.count_signal() < p.len() {
                prop_assert!((pb - b).abs() <= 1e-9 * b);
            }
        }

        let again = split(&ds, &spec).unwrap();
        prop_assert_eq!(&again.0, &tr);
        prop_assert_eq!(&again.2, &te);
    }

    #[test]
    fn rows_keep_their_values(n in 40usize..400, seed in any::<u64>()) {
        let ds = synth(n, 0.4, seed);
        prop_assume!(ds.has_both_classes());
        let spec = SplitSpec { seed, rescale_event_weights: false, ..SplitSpec::default() };
        let (tr, _, _) = split(&ds, &spec).unwrap();
        for i in 0..tr.len() {
            let orig: usize = tr.ids()[i].parse().unwrap();
            prop_assert_eq!(tr.row(i), ds.row(orig));
            prop_assert_eq!(tr.labels()[i], ds.labels()[orig]);
            prop_assert_eq!(tr.event_weights()[i], ds.event_weights()[orig]);
        }
    }

    #[test]
    fn csv_round_trip(
        rows in prop::collection::vec(
            (prop::collection::vec(prop_oneof![Just(-999.0), any::<f64>().prop_filter("finite", |x| x.is_finite())], 3),
             any::<bool>(),
             0.0f64..1e3),
            1..50),
    ) {
        let features: Vec<Vec<f64>> = rows.iter().map(|r| r.0.clone()).collect();
        let labels = rows.iter().map(|r| if r.1 { Label::Signal } else { Label::Background }).collect();
        let weights = rows.iter().map(|r| r.2).collect();
        let ds = Dataset::from_rows(&features, labels, Some(weights), None).unwrap();
        let file = tempfile::NamedTempFile::new().unwrap();
        write_csv(&ds, file.path()).unwrap();
        let back = load_higgs_csv(file.path(), &LoadOptions::default()).unwrap();
        prop_assert_eq!(back, ds);
    }
}
