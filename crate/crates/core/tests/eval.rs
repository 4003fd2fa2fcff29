use std::collections::BTreeSet;

use nalgebra::DMatrix;
use plurisem_core::corpus::{self, Number, WordGroup, WordType};
use plurisem_core::eval::{self, EvalReport, GoldEntry, GoldIndex};
use plurisem_core::seed;
use proptest::prelude::*;
use rand::Rng;

fn textbook_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for i in 0..a.len() {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma).powi(2);
        db += (b[i] - mb).powi(2);
    }
    num / (da * db).sqrt()
}

fn random_gold(rng: &mut impl Rng, n: usize, dim: usize) -> GoldIndex {
    GoldIndex::new(
        (0..n)
            .map(|i| GoldEntry {
                type_id: format!("t{i:02}"),
                number: if i % 2 == 0 { Number::Sg } else { Number::Pl },
                lexeme_id: format!("l{}", i / 2),
                vector: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn exact_and_affine_copies_rank_first() {
    let rng = &mut seed::rng(1);
    let gold = random_gold(rng, 8, 6);
    for i in 0..8 {
        let v = gold.vectors().row(i).iter().copied().collect::<Vec<_>>();
        assert_eq!(eval::rank_candidates(&v, &gold).unwrap()[0], gold.type_ids()[i]);
        let w: Vec<f64> = v.iter().map(|x| 2.0 * x + 3.0).collect();
        assert_eq!(eval::rank_candidates(&w, &gold).unwrap()[0], gold.type_ids()[i]);
    }
}

#[test]
fn ranking_matches_textbook_correlations() {
    let rng = &mut seed::rng(2);
    let gold = random_gold(rng, 10, 7);
    for _ in 0..20 {
        let p: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut oracle: Vec<(f64, usize)> = (0..10)
            .map(|i| {
                let row: Vec<f64> = gold.vectors().row(i).iter().copied().collect();
                (textbook_pearson(&p, &row), i)
            })
            .collect();
        oracle.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let want: Vec<&str> = oracle.iter().map(|&(_, i)| gold.type_ids()[i].as_str()).collect();
        assert_eq!(eval::rank_candidates(&p, &gold).unwrap(), want);
    }
}

#[test]
fn constant_prediction_ranks_by_row_order() {
    let rng = &mut seed::rng(3);
    let gold = random_gold(rng, 6, 5);
    let preds = DMatrix::from_element(1, 5, 0.25);
    let targets = vec!["t02".to_string()];
    let acc: Vec<f64> = (1..=5)
        .map(|n| eval::top_n_accuracy(&preds, &targets, &gold, n).unwrap())
        .collect();
    assert_eq!(acc, vec![0.0, 0.0, 1.0, 1.0, 1.0]);
}

#[test]
fn top_n_matches_brute_force_enumeration() {
    let rng = &mut seed::rng(4);
    let gold = random_gold(rng, 6, 8);
    let preds = DMatrix::from_fn(20, 8, |_, _| rng.random_range(-1.0..1.0));
    let targets: Vec<String> = (0..20).map(|i| format!("t{:02}", i % 6)).collect();
    let mut prev = 0.0;
    for n in 1..=5 {
        let mut hits = 0;
        for r in 0..20 {
            let p: Vec<f64> = preds.row(r).iter().copied().collect();
            let t = gold.row(&targets[r]).unwrap();
            let tv: Vec<f64> = gold.vectors().row(t).iter().copied().collect();
            let rt = textbook_pearson(&p, &tv);
            let better = (0..6)
                .filter(|&i| {
                    let v: Vec<f64> = gold.vectors().row(i).iter().copied().collect();
                    let r = textbook_pearson(&p, &v);
                    r > rt || (r == rt && i < t)
                })
                .count();
            hits += usize::from(better < n);
        }
        let acc = eval::top_n_accuracy(&preds, &targets, &gold, n).unwrap();
        assert_eq!(acc, hits as f64 / 20.0);
        assert!(acc >= prev);
        prev = acc;
    }
    let perfect = DMatrix::from_fn(20, 8, |r, c| gold.vectors()[(gold.row(&targets[r]).unwrap(), c)]);
    for n in 1..=5 {
        assert_eq!(eval::top_n_accuracy(&perfect, &targets, &gold, n).unwrap(), 1.0);
    }
    assert!(eval::top_n_accuracy(&preds, &vec!["zz".to_string(); 20], &gold, 1).is_err());
}

#[test]
fn weighted_f1_hand_fixture() {
    let target = ["A", "A", "A", "B", "B", "C"];
    let predicted = ["A", "A", "B", "B", "C", "C"];
    // F1: A 0.8 (3 true), B 0.5 (2 true), C 2/3 (1 true).
    let f = eval::weighted_f1(&predicted, &target).unwrap();
    assert!((f - 61.0 / 90.0).abs() < 1e-12);
    assert_eq!(eval::weighted_f1(&target, &target).unwrap(), 1.0);
    assert_eq!(eval::weighted_f1(&["X", "Y"], &["A", "B"]).unwrap(), 0.0);
    assert!(eval::weighted_f1(&["A"], &["A", "B"]).is_err());
}

fn pair_gold() -> GoldIndex {
    let e = |id: &str, lex: &str, n: Number, v: [f64; 3]| GoldEntry {
        type_id: id.into(),
        number: n,
        lexeme_id: lex.into(),
        vector: v.to_vec(),
    };
    GoldIndex::new(vec![
        e("cat", "cat", Number::Sg, [1.0, 0.0, 0.0]),
        e("cats", "cat", Number::Pl, [1.0, 0.2, 0.0]),
        e("dog", "dog", Number::Sg, [0.0, 1.0, 0.0]),
        e("dogs", "dog", Number::Pl, [0.0, 1.0, 0.3]),
    ])
    .unwrap()
}

#[test]
fn number_confusion_constructed_cases() {
    let gold = pair_gold();
    let t = ["cat", "cats", "dog", "dogs"];
    let a = eval::number_confusion(&t, &t, &gold).unwrap();
    assert_eq!(a.number_match_rate, 1.0);
    assert_eq!(a.confusion.counts, [[2, 0, 0, 0], [0, 0, 2, 0]]);
    assert_eq!(a.number_match_rate_errors, None);

    let flipped = ["cats", "cat", "dogs", "dog"];
    let a = eval::number_confusion(&flipped, &t, &gold).unwrap();
    assert_eq!(a.number_match_rate, 0.0);
    assert_eq!(a.confusion.counts, [[0, 0, 2, 0], [2, 0, 0, 0]]);
    assert_eq!(a.n_errors, 4);

    let wrong_lexeme_same_number = ["dog", "dogs", "cat", "cats"];
    let a = eval::number_confusion(&wrong_lexeme_same_number, &t, &gold).unwrap();
    assert_eq!(a.number_match_rate_errors, Some(1.0));
    assert_eq!(a.confusion.counts, [[0, 2, 0, 0], [0, 0, 0, 2]]);
    assert_eq!(a.confusion.total(), 4);
}

#[test]
fn plural_biased_predictions_lose_number_matches() {
    let gold = pair_gold();
    let t = ["cat", "cat", "dog", "dog", "cats", "dogs"];
    let number_aware = ["cat", "dog", "dog", "cat", "cats", "cats"];
    let plural_biased = ["cats", "dogs", "dogs", "cats", "cats", "dogs"];
    let a = eval::number_confusion(&number_aware, &t, &gold).unwrap();
    let b = eval::number_confusion(&plural_biased, &t, &gold).unwrap();
    assert!(a.number_match_rate > b.number_match_rate);
}

#[test]
fn two_proportion_test_against_direct_formula() {
    let t = eval::two_proportion_test(80, 100, 50, 100).unwrap();
    assert!((t.chi_square - 19.78021978021978).abs() < 1e-6);
    assert!((t.p_value - 8.68771167700004e-06).abs() < 1e-6);
    assert!((t.diff - 0.3).abs() < 1e-12);
    assert!((t.ci_low - 0.1745010710609612).abs() < 1e-6);
    assert!((t.ci_high - 0.4254989289390388).abs() < 1e-6);

    let same = eval::two_proportion_test(30, 60, 15, 30).unwrap();
    assert!(same.chi_square.abs() < 1e-12);
    assert!((same.p_value - 1.0).abs() < 1e-9);

    let extreme = eval::two_proportion_test(1000, 1000, 0, 1000).unwrap();
    assert!(extreme.p_value < 1e-4);

    assert!(eval::two_proportion_test(5, 4, 1, 2).is_err());
    assert!(eval::two_proportion_test(0, 0, 1, 2).is_err());
}

fn wt(id: &str, lex: &str, number: Number) -> WordType {
    WordType {
        type_id: id.into(),
        orth: id.into(),
        lexeme_id: lex.into(),
        number,
        phones: vec![],
        semantic_class: None,
        has_embedding: true,
    }
}

#[test]
fn group_accuracy_twelve_token_fixture() {
    let types = vec![
        wt("cat", "cat", Number::Sg),
        wt("cats", "cat", Number::Pl),
        wt("dog", "dog", Number::Sg),
        wt("mice", "mouse", Number::Pl),
    ];
    let groups = corpus::pair_lexemes(&types, None);
    let target = [
        "cat", "cat", "cat", "cats", "cats", "cats", "cats", "dog", "dog", "dog", "mice", "mice",
    ];
    let predicted = [
        "cat", "cats", "cat", "cats", "cats", "cat", "dog", "dog", "dog", "dog", "cat", "mice",
    ];
    let g = eval::group_accuracy(&predicted, &target, &groups).unwrap();
    assert_eq!(g[&WordGroup::SgWithPl], Some(2.0 / 3.0));
    assert_eq!(g[&WordGroup::PlWithSg], Some(0.5));
    assert_eq!(g[&WordGroup::SgWithoutPl], Some(1.0));
    assert_eq!(g[&WordGroup::PlWithoutSg], Some(0.5));

    // Relative to a fold without "cats", "cat" counts as unpartnered.
    let reference: BTreeSet<String> = ["cat", "dog", "mice"].iter().map(|s| s.to_string()).collect();
    let fold_groups = corpus::pair_lexemes(&types, Some(&reference));
    assert_eq!(fold_groups.group_of("cat"), Some(WordGroup::SgWithoutPl));
    let g = eval::group_accuracy(&target, &target, &fold_groups).unwrap();
    assert_eq!(g[&WordGroup::SgWithPl], None);
    assert!(g.values().flatten().all(|&a| a == 1.0));
}

#[test]
fn absent_groups_serialize_as_absent() {
    let gold = pair_gold();
    let types = vec![wt("cat", "cat", Number::Sg), wt("dog", "dog", Number::Sg)];
    let groups = corpus::pair_lexemes(&types, None);
    let preds = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    let targets = vec!["cat".to_string(), "dog".to_string()];
    let r = eval::evaluate(&preds, &targets, &gold, Some(&groups)).unwrap();
    let json = serde_json::to_value(&r).unwrap();
    assert_eq!(json["group_accuracy"]["sg w pl"], "ABSENT");
    assert_eq!(json["group_accuracy"]["sg w/o pl"], 1.0);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.json");
    r.write_json(&p).unwrap();
    assert_eq!(EvalReport::read_json(&p).unwrap(), r);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reports_are_monotone_and_conserve_counts(
        n_types in 2usize..12,
        n_tokens in 1usize..40,
        dim in 2usize..10,
        s in any::<u64>(),
    ) {
        let rng = &mut seed::rng(s);
        let gold = random_gold(rng, n_types, dim);
        let preds = DMatrix::from_fn(n_tokens, dim, |_, _| rng.random_range(-1.0..1.0));
        let targets: Vec<String> = (0..n_tokens).map(|_| gold.type_ids()[rng.random_range(0..n_types)].clone()).collect();
        let r = eval::evaluate(&preds, &targets, &gold, None).unwrap();
        let acc: Vec<f64> = (1..=5).map(|n| r.top_n_accuracy[&n]).collect();
        prop_assert!(acc.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(r.confusion.total(), n_tokens);
        prop_assert!((0.0..=1.0).contains(&r.weighted_f1));
    }

    #[test]
    fn ranking_is_affine_invariant(
        scale in 0.01f64..100.0,
        shift in -50.0f64..50.0,
        s in any::<u64>(),
    ) {
        let rng = &mut seed::rng(s);
        let gold = random_gold(rng, 9, 6);
        let p: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let q: Vec<f64> = p.iter().map(|x| scale * x + shift).collect();
        let a = eval::rank_candidates(&p, &gold).unwrap();
        let b = eval::rank_candidates(&q, &gold).unwrap();
        // Correlations may differ in the last bits; compare leaders robustly.
        prop_assert_eq!(&a[0], &b[0]);
        let ca = gold.correlations(&p).unwrap();
        let cb = gold.correlations(&q).unwrap();
        for (x, y) in ca.iter().zip(&cb) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}
