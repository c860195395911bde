use std::sync::Arc;

use chrono::NaiveDate;
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use snapflow::dataset::{noise_labels, FeatureMatrix, RowKey};
use snapflow::model::{auc_roc, classification_report, ensemble, fit_baseline, predict, ClassifierHandle, LogisticConfig};

fn matrix(rows: &[Vec<f64>], labels: Vec<u8>) -> FeatureMatrix {
    let cols = rows[0].len();
    let sid: Arc<str> = Arc::from("s");
    let day = NaiveDate::from_ymd_opt(2021, 9, 1).unwrap();
    FeatureMatrix::new(
        (0..cols).map(|j| format!("x{j}")).collect(),
        rows.concat(),
        (0..rows.len()).map(|i| RowKey { session_id: sid.clone(), timestamp_ms: i as i64 * 500 }).collect(),
        vec![day; rows.len()],
        Some(labels),
    )
    .unwrap()
}

/// Uniform points labeled by the sign of a weighted sum, with a margin.
fn separable(n: usize, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    while rows.len() < n {
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = 2.0 * x[0] - x[1] + 0.5 * x[2];
        if s.abs() < 0.1 {
            continue;
        }
        labels.push(u8::from(s > 0.0));
        rows.push(x);
    }
    matrix(&rows, labels)
}

fn pairwise_auc(p: &[f64], y: &[u8]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..p.len() {
        for j in 0..p.len() {
            if y[i] == 1 && y[j] == 0 {
                den += 1.0;
                num += if p[i] > p[j] { 1.0 } else if p[i] == p[j] { 0.5 } else { 0.0 };
            }
        }
    }
    num / den
}

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    prop::collection::vec((0u32..=32, 0u8..=1), 2..120)
        .prop_filter("both classes", |v| v.iter().any(|x| x.1 == 1) && v.iter().any(|x| x.1 == 0))
        .prop_map(|v| v.into_iter().map(|(k, y)| (k as f64 / 32.0, y)).unzip())
}

proptest! {
    #[test]
    fn auc_equals_pairwise_concordance((p, y) in scored()) {
        prop_assert_eq!(auc_roc(&p, &y).unwrap(), pairwise_auc(&p, &y));
    }

    #[test]
    fn auc_ignores_monotone_maps((p, y) in scored()) {
        let a = auc_roc(&p, &y).unwrap();
        let cubed: Vec<f64> = p.iter().map(|v| (v - 0.3).powi(3)).collect();
        let squashed: Vec<f64> = p.iter().map(|v| 1.0 / (1.0 + (-8.0 * v).exp())).collect();
        prop_assert_eq!(auc_roc(&cubed, &y).unwrap(), a);
        prop_assert_eq!(auc_roc(&squashed, &y).unwrap(), a);
    }

    #[test]
    fn swapping_labels_reflects_auc((p, y) in scored()) {
        let a = auc_roc(&p, &y).unwrap();
        let swapped: Vec<u8> = y.iter().map(|l| 1 - l).collect();
        let reversed: Vec<f64> = p.iter().map(|v| 1.0 - v).collect();
        prop_assert!((auc_roc(&p, &swapped).unwrap() - (1.0 - a)).abs() < 1e-12);
        prop_assert!((auc_roc(&reversed, &y).unwrap() - (1.0 - a)).abs() < 1e-12);
    }

    #[test]
    fn confusion_counts_are_conserved((p, y) in scored(), threshold in 0.0f64..1.0) {
        let r = classification_report(&p, &y, threshold).unwrap();
        let c = r.confusion;
        let positives = y.iter().filter(|&&l| l == 1).count();
        prop_assert_eq!(c.total(), p.len());
        prop_assert_eq!(c.true_positive + c.false_negative, positives);
        prop_assert_eq!(c.true_negative + c.false_positive, p.len() - positives);
        prop_assert_eq!(c.true_positive + c.false_positive, p.iter().filter(|&&v| v >= threshold).count());
    }

    #[test]
    fn ensemble_stays_between_extremes(probs in prop::collection::vec(0.0f64..=1.0, 3..10), rot in 0usize..10) {
        let e = ensemble(&probs).unwrap();
        let lo = probs.iter().copied().fold(1.0, f64::min);
        let hi = probs.iter().copied().fold(0.0, f64::max);
        prop_assert!(lo <= e && e <= hi);
        let mut rotated = probs.clone();
        rotated.rotate_left(rot % probs.len());
        prop_assert_eq!(ensemble(&rotated).unwrap(), e);
    }
}

#[test]
fn separable_data_is_learned() {
    let train = separable(4_000, 1);
    let test = separable(2_000, 2);
    let (h, trace) = fit_baseline(&train, 1, &LogisticConfig::default()).unwrap();
    assert!(trace.losses.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    let p = predict(&h, &test).unwrap();
    let r = classification_report(&p, test.labels().unwrap(), 0.5).unwrap();
    assert!(r.accuracy >= 0.99, "accuracy {}", r.accuracy);
    assert!(r.auc.unwrap() > 0.995);
}

#[test]
fn noise_labels_give_chance_auc() {
    let make = |seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..10_000).map(|_| (0..5).map(|_| rng.random::<f64>()).collect()).collect();
        matrix(&rows, noise_labels(10_000, seed + 100))
    };
    let (train, test) = (make(1), make(2));
    let (h, _) = fit_baseline(&train, 1, &LogisticConfig::default()).unwrap();
    let auc = auc_roc(&predict(&h, &test).unwrap(), test.labels().unwrap()).unwrap();
    assert!((auc - 0.5).abs() < 0.05, "auc {auc}");
}

#[test]
fn saved_handle_predicts_identically() {
    let train = separable(1_000, 3);
    let (h, _) = fit_baseline(&train, 2, &LogisticConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fold2.json");
    h.save(&path).unwrap();
    let back = ClassifierHandle::load(&path).unwrap();
    let a = predict(&h, &train).unwrap();
    let b = predict(&back, &train).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_eq!(back.fold, 2);
}

#[test]
fn same_seed_same_model() {
    let train = separable(800, 4);
    let (a, _) = fit_baseline(&train, 1, &LogisticConfig::default()).unwrap();
    let (b, _) = fit_baseline(&train, 1, &LogisticConfig::default()).unwrap();
    assert_eq!(a.to_json(), b.to_json());
}
