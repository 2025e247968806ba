use std::collections::BTreeMap;

use nephro_xai::attribution::shapley_exact;
use nephro_xai::metrics::{cosine_similarity, external_fidelity, important_set, interpretability_score, round2};
use nephro_xai::models::Predictor;
use nephro_xai::resampling::{smote_balance, stratified_kfold};
use nephro_xai::selection::{consensus_select, correlation_with_target, information_gain_ranking};
use nephro_xai::FeatureMatrix;
use proptest::prelude::*;

struct Linear(Vec<f64>);

impl Predictor for Linear {
    fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
        let p: f64 = self.0.iter().zip(row).map(|(w, x)| w * x).sum();
        [1.0 - p, p]
    }
    fn feature_importances(&self) -> Vec<f64> {
        vec![1.0 / self.0.len() as f64; self.0.len()]
    }
    fn n_features(&self) -> usize {
        self.0.len()
    }
}

struct Product;

impl Predictor for Product {
    fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
        let p = (row[0] * row[1] - row[2]).tanh();
        [1.0 - p, p]
    }
    fn feature_importances(&self) -> Vec<f64> {
        vec![1.0 / 3.0; 3]
    }
    fn n_features(&self) -> usize {
        3
    }
}

fn names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("f{j}")).collect()
}

fn row_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn important_set_ignores_positive_scale(
        imp in prop::collection::vec(0.0f64..1.0, 2..10),
        scale in 0.01f64..100.0,
    ) {
        prop_assume!(imp.iter().sum::<f64>() > 1e-6);
        let n = names(imp.len());
        let a = important_set(&n, &imp, 0.9).unwrap();
        let scaled: Vec<f64> = imp.iter().map(|x| x * scale).collect();
        let b = important_set(&n, &scaled, 0.9).unwrap();
        prop_assert_eq!(&a.members, &b.members);
        prop_assert!(a.cumulative() >= 0.9 - 1e-12);
    }

    #[test]
    fn cosine_ignores_positive_scale(
        u in row_strategy(5), v in row_strategy(5), a in 0.1f64..10.0, b in 0.1f64..10.0,
    ) {
        prop_assume!(u.iter().any(|x| x.abs() > 1e-3) && v.iter().any(|x| x.abs() > 1e-3));
        let c = cosine_similarity(&u, &v).unwrap();
        let su: Vec<f64> = u.iter().map(|x| x * a).collect();
        let sv: Vec<f64> = v.iter().map(|x| x * b).collect();
        prop_assert!((c - cosine_similarity(&su, &sv).unwrap()).abs() < 1e-9);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&c));
    }

    #[test]
    fn fidelity_and_interpretability_stay_in_unit_interval(
        truth in prop::collection::btree_set(0usize..12, 1..8),
        expl in prop::collection::btree_set(0usize..12, 1..8),
        n in 1usize..24,
    ) {
        let t: Vec<String> = truth.iter().map(|j| format!("f{j}")).collect();
        let e: Vec<String> = expl.iter().map(|j| format!("f{j}")).collect();
        let f = external_fidelity(&t, &e).unwrap();
        for x in [f.precision, f.recall, f.f1] {
            prop_assert!((0.0..=1.0).contains(&x));
        }
        prop_assert!(f.f1 <= f.precision.max(f.recall) + 1e-12);
        let i = interpretability_score(n, 24).unwrap();
        prop_assert!((i - (24 - n) as f64 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn round2_is_within_half_a_cent(x in 0.0f64..1.0) {
        let r = round2(x);
        prop_assert!((r - x).abs() <= 0.005 + 1e-9);
        prop_assert!(((r * 100.0).round() - r * 100.0).abs() < 1e-9);
    }

    #[test]
    fn shapley_is_efficient_and_exact_for_linear_models(
        w in row_strategy(4),
        row in row_strategy(4),
        bg in prop::collection::vec(row_strategy(4), 1..8),
    ) {
        let a = shapley_exact(&Linear(w.clone()), &row, &bg, 1).unwrap();
        prop_assert!(a.efficiency_gap().abs() < 1e-9);
        for j in 0..4 {
            let mean = bg.iter().map(|b| b[j]).sum::<f64>() / bg.len() as f64;
            prop_assert!((a.phi[j] - w[j] * (row[j] - mean)).abs() < 1e-9);
        }
        let b = shapley_exact(&Product, &row[..3], &bg.iter().map(|r| r[..3].to_vec()).collect::<Vec<_>>(), 1).unwrap();
        prop_assert!(b.efficiency_gap().abs() < 1e-9);
    }

    #[test]
    fn stratified_folds_partition_and_balance(
        labels in prop::collection::vec(0usize..2, 20..200),
        k in 2usize..8,
        seed in any::<u64>(),
    ) {
        let ones = labels.iter().filter(|&&l| l == 1).count();
        prop_assume!(ones >= k && labels.len() - ones >= k);
        let f = stratified_kfold(&labels, k, seed).unwrap();
        let mut seen = vec![0usize; labels.len()];
        let mut per_fold = Vec::new();
        for fold in 0..k {
            let idx = f.test_indices(fold);
            for &i in &idx {
                seen[i] += 1;
            }
            per_fold.push(idx.iter().filter(|&&i| labels[i] == 1).count());
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let (lo, hi) = (per_fold.iter().min().unwrap(), per_fold.iter().max().unwrap());
        prop_assert!(hi - lo <= 1);
    }

    #[test]
    fn smote_equalizes_classes(
        n0 in 8usize..40, n1 in 8usize..40, seed in any::<u64>(),
    ) {
        let rows: Vec<Vec<f64>> = (0..n0 + n1).map(|i| vec![i as f64, ((i * 7) % 5) as f64]).collect();
        let labels: Vec<usize> = (0..n0 + n1).map(|i| usize::from(i >= n0)).collect();
        let data = FeatureMatrix::numeric(&["a", "b"], rows, labels).unwrap();
        let s = smote_balance(&data, 3, seed).unwrap();
        let c = s.data.class_counts();
        prop_assert_eq!(c[0], c[1]);
        prop_assert_eq!(c[0], n0.max(n1));
        prop_assert_eq!(&s.data.rows[..n0 + n1], &data.rows[..]);
    }

    #[test]
    fn correlation_is_affine_invariant_up_to_sign(
        xs in prop::collection::vec(-10.0f64..10.0, 12..40),
        a in 0.1f64..5.0, b in -5.0f64..5.0, seed in 0u64..1000,
    ) {
        let labels: Vec<usize> = (0..xs.len()).map(|i| ((i as u64 * 31 + seed) % 3 == 0) as usize).collect();
        prop_assume!(labels.iter().any(|&l| l == 1) && labels.iter().any(|&l| l == 0));
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x, a * x + b, -a * x + b]).collect();
        let m = FeatureMatrix::numeric(&["x", "pos", "neg"], rows, labels).unwrap();
        let r = correlation_with_target(&m, 0.5);
        prop_assume!(r.len() == 3);
        let get = |n: &str| r.iter().find(|s| s.feature == n).unwrap().score;
        prop_assert!((get("x") - get("pos")).abs() < 1e-9);
        prop_assert!((get("x") + get("neg")).abs() < 1e-9);
    }

    #[test]
    fn information_gain_is_never_negative(
        xs in prop::collection::vec(-3.0f64..3.0, 10..60), seed in 0u64..1000,
    ) {
        let labels: Vec<usize> = (0..xs.len()).map(|i| ((i as u64 * 17 + seed) % 2) as usize).collect();
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x, x * x]).collect();
        let m = FeatureMatrix::numeric(&["x", "x2"], rows, labels).unwrap();
        for g in information_gain_ranking(&m, 2) {
            prop_assert!(g.information_gain >= -1e-12);
            prop_assert!(g.entropy >= 0.0);
        }
    }

    #[test]
    fn consensus_ignores_input_order(
        sets in prop::collection::vec(prop::collection::vec(0usize..10, 1..6), 2..5),
    ) {
        let order = names(10);
        let as_map = |s: &[Vec<usize>]| -> BTreeMap<String, Vec<String>> {
            s.iter().enumerate().map(|(i, v)| (format!("m{i}"), v.iter().map(|j| format!("f{j}")).collect())).collect()
        };
        let mut reversed = sets.clone();
        reversed.reverse();
        for v in reversed.iter_mut() {
            v.reverse();
        }
        let a = consensus_select(&as_map(&sets), &[], &order);
        let b = consensus_select(&as_map(&reversed), &[], &order);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.consensus, b.consensus),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "one ordering failed"),
        }
    }
}
