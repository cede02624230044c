mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgqc::metrics::{confusion, f1_weighted, per_class_metrics, ClassMetrics, EvalReport};

use common::oracles::brute_force_metrics;
use common::reference_test_confusion;

fn report(truth: &[usize], pred: &[usize]) -> EvalReport {
    EvalReport::from_confusion(confusion(truth, pred).unwrap())
}

#[test]
fn thousand_random_sequences_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let n = rng.random_range(0..=50);
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let r = report(&truth, &pred);
        let o = brute_force_metrics(&truth, &pred);
        for l in 0..3 {
            assert_eq!(r.per_class[l].precision, o.precision[l]);
            assert_eq!(r.per_class[l].recall, o.recall[l]);
            assert_eq!(r.per_class[l].f1, o.f1[l]);
        }
        assert_eq!(r.f1_weighted, o.f1_weighted);
    }
}

#[test]
fn reference_ugly_triple() {
    let r = EvalReport::from_confusion(reference_test_confusion());
    let u = r.per_class[2];
    assert!((u.precision * 100.0 - 16.67).abs() < 0.01);
    assert!((u.recall * 100.0 - 100.0).abs() < 0.01);
    assert!((u.f1 * 100.0 - 28.57).abs() < 0.01);
}

#[test]
fn reference_table_reproduced_from_counts() {
    let r = EvalReport::from_confusion(reference_test_confusion());
    let pct = |v: f64| v * 100.0;
    assert!((pct(r.f1_weighted) - 93.56).abs() < 0.01);
    let expected = [(95.94, 92.73, 99.39), (86.80, 93.82, 80.76)];
    for (l, (f1, recall, precision)) in expected.into_iter().enumerate() {
        assert!((pct(r.per_class[l].f1) - f1).abs() < 0.01, "F1 class {l}");
        assert!((pct(r.per_class[l].recall) - recall).abs() < 0.01, "recall class {l}");
        assert!((pct(r.per_class[l].precision) - precision).abs() < 0.01, "precision class {l}");
    }
    assert_eq!(r.confusion.total(), 1389);
}

#[test]
fn weighted_f1_hand_example() {
    let per_class = [
        ClassMetrics { precision: 0.0, recall: 0.0, f1: 0.9 },
        ClassMetrics { precision: 0.0, recall: 0.0, f1: 0.5 },
        ClassMetrics::default(),
    ];
    assert!((f1_weighted(&per_class, &[0.8, 0.2, 0.0]) - 0.82).abs() < 1e-12);
}

#[test]
fn equal_precision_and_recall() {
    // class 0: TP 1, FP 1, FN 1
    let m = per_class_metrics(&confusion(&[0, 0, 1], &[0, 1, 0]).unwrap());
    assert_eq!((m[0].precision, m[0].recall, m[0].f1), (0.5, 0.5, 0.5));
}

#[test]
fn absent_class_scores_zero() {
    let r = report(&[0, 1, 0], &[0, 1, 1]);
    assert_eq!(r.per_class[2], ClassMetrics::default());
}

proptest! {
    #[test]
    fn weighted_f1_lies_between_class_extremes(pairs in prop::collection::vec((0usize..3, 0usize..3), 1..50)) {
        let (truth, pred): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let r = report(&truth, &pred);
        let present: Vec<f64> = (0..3).filter(|&l| truth.contains(&l)).map(|l| r.per_class[l].f1).collect();
        let lo = present.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = present.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(r.f1_weighted >= lo - 1e-12 && r.f1_weighted <= hi + 1e-12);
        for m in r.per_class {
            prop_assert!((0.0..=1.0).contains(&m.precision) && (0.0..=1.0).contains(&m.recall) && (0.0..=1.0).contains(&m.f1));
        }
        prop_assert!((r.proportions.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn order_of_samples_is_irrelevant(pairs in prop::collection::vec((0usize..3, 0usize..3), 0..50), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (t1, p1): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let (t2, p2): (Vec<_>, Vec<_>) = shuffled.into_iter().unzip();
        prop_assert_eq!(report(&t1, &p1), report(&t2, &p2));
    }

    #[test]
    fn confusion_sums_to_sample_count(pairs in prop::collection::vec((0usize..3, 0usize..3), 0..50)) {
        let (truth, pred): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let cm = confusion(&truth, &pred).unwrap();
        prop_assert_eq!(cm.total() as usize, truth.len());
        for l in 0..3 {
            prop_assert_eq!(cm.support(l) as usize, truth.iter().filter(|&&t| t == l).count());
        }
    }
}
