mod support;

use contextspace_core::data::uniform_edges;
use contextspace_core::info::{
    conditional_mi, interaction_information, mutual_information, mutual_information_sets, DEFAULT_ORACLE_CELL_CAP,
};
use contextspace_core::selection::{greedy_rank, select_dimensionality, SplitConfig};
use contextspace_core::subspace::{build_subspace, domain_from_table, fit_loss_map, predict, DomainDistribution};
use contextspace_core::{
    discretize, empirical_loss, ContextSchema, FeatureDescriptor, RawContexts, RawTable, SampleTable, Var,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use support::*;

/// Random table parameters: seed, row count, feature cardinalities, loss support size.
fn table_params() -> impl Strategy<Value = (u64, usize, Vec<usize>, usize)> {
    (
        any::<u64>(),
        20usize..400,
        prop::collection::vec(2usize..7, 1..5),
        2usize..4,
    )
}

fn build((seed, n, cards, loss_card): &(u64, usize, Vec<usize>, usize)) -> SampleTable {
    random_table(&mut rng(*seed), *n, cards, *loss_card, 0.5)
}

fn permute_rows(t: &SampleTable, seed: u64) -> SampleTable {
    let mut rows: Vec<usize> = (0..t.n_rows()).collect();
    rows.shuffle(&mut rng(seed));
    t.select_rows(&rows).unwrap()
}

fn permute_features(t: &SampleTable, perm: &[usize]) -> SampleTable {
    let schema = ContextSchema::new(perm.iter().map(|&j| t.schema().features()[j].clone()).collect()).unwrap();
    let codes = (0..t.n_rows()).flat_map(|r| perm.iter().map(move |&j| t.code(r, j))).collect();
    SampleTable::new(schema, t.losses().to_vec(), codes).unwrap()
}

fn has_ties(scores: &[f64]) -> bool {
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    s.windows(2).any(|w| (w[1] - w[0]).abs() < 1e-9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mi_is_symmetric(p in table_params()) {
        let t = build(&p);
        for j in 0..t.n_features() {
            let ab = mutual_information(&t, Var::Loss, Var::Feature(j)).unwrap();
            let ba = mutual_information(&t, Var::Feature(j), Var::Loss).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!(ab >= -1e-12);
        }
    }

    #[test]
    fn merging_bins_never_increases_mi(p in table_params(), a in 0u32..6, b in 0u32..6) {
        let t = build(&p);
        let card = t.cardinality(0) as u32;
        let (a, b) = (a % card, b % card);
        prop_assume!(a != b);
        let merged: Vec<u32> = feature_column(&t, 0).into_iter().map(|c| if c == b { a } else { c }).collect();
        let l = loss_column(&t);
        let before = mutual_information(&t, Var::Loss, Var::Feature(0)).unwrap();
        prop_assert!(mi_eq5(&l, &merged) <= before + 1e-12);
    }

    #[test]
    fn chain_rule(p in table_params()) {
        let t = build(&p);
        prop_assume!(t.n_features() >= 2);
        let a = mutual_information(&t, Var::Loss, Var::Feature(0)).unwrap();
        let b_given_a = conditional_mi(&t, Var::Loss, Var::Feature(1), Var::Feature(0)).unwrap();
        let joint = mutual_information_sets(&t, &[Var::Loss], &[Var::Feature(0), Var::Feature(1)]).unwrap();
        prop_assert!((a + b_given_a - joint).abs() < 1e-12);
    }

    #[test]
    fn interaction_information_matches_expansion(p in table_params()) {
        let t = build(&p);
        let k = t.n_features().min(3);
        let features: Vec<usize> = (0..k).collect();
        let fast = interaction_information(&t, &features, DEFAULT_ORACLE_CELL_CAP).unwrap();
        let l = loss_column(&t);
        let cols: Vec<Vec<u32>> = features.iter().map(|&j| feature_column(&t, j)).collect();
        let mut all: Vec<&[u32]> = vec![&l];
        all.extend(cols.iter().map(Vec::as_slice));
        prop_assert!((fast - ii_expansion(&all)).abs() < 1e-12);
    }

    #[test]
    fn row_order_is_irrelevant(p in table_params(), shuffle in any::<u64>()) {
        let t = build(&p);
        let s = permute_rows(&t, shuffle);
        for j in 0..t.n_features() {
            prop_assert_eq!(
                mutual_information(&t, Var::Loss, Var::Feature(j)).unwrap().to_bits(),
                mutual_information(&s, Var::Loss, Var::Feature(j)).unwrap().to_bits()
            );
        }
        let k = t.n_features();
        prop_assert_eq!(greedy_rank(&t, k).unwrap(), greedy_rank(&s, k).unwrap());
        let sub = build_subspace(t.schema(), &(0..k).collect::<Vec<_>>()).unwrap();
        prop_assert_eq!(fit_loss_map(&t, &sub).unwrap(), fit_loss_map(&s, &sub).unwrap());
    }

    #[test]
    fn ranking_is_deterministic_and_counts_scorings(p in table_params(), k in 1usize..5) {
        let t = build(&p);
        let k = k.min(t.n_features());
        let a = greedy_rank(&t, k).unwrap();
        prop_assert_eq!(&a, &greedy_rank(&t, k).unwrap());
        let j = t.n_features();
        prop_assert_eq!(a.candidate_scorings, (0..k).map(|i| j - i).sum::<usize>());
        // iteration one is plain MI
        let mi: Vec<f64> = (0..j).map(|f| mi_eq5(&loss_column(&t), &feature_column(&t, f))).collect();
        for (c, m) in a.per_iteration_scores[0].iter().zip(&mi) {
            prop_assert!((c.score - m).abs() < 1e-12);
        }
    }

    #[test]
    fn ranking_is_permutation_equivariant(p in table_params(), seed in any::<u64>()) {
        let t = build(&p);
        let j = t.n_features();
        let mut perm: Vec<usize> = (0..j).collect();
        perm.shuffle(&mut rng(seed));
        let a = greedy_rank(&t, j).unwrap();
        prop_assume!(a.per_iteration_scores.iter().all(|it| !has_ties(&it.iter().map(|c| c.score).collect::<Vec<_>>())));
        let b = greedy_rank(&permute_features(&t, &perm), j).unwrap();
        let mapped: Vec<usize> = b.order.iter().map(|&f| perm[f]).collect();
        prop_assert_eq!(mapped, a.order);
        for (x, y) in a.scores.iter().zip(&b.scores) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn split_errors_are_bounded_and_reproducible(p in table_params(), seed in any::<u64>()) {
        let t = build(&p);
        let k = t.n_features();
        let ranked = greedy_rank(&t, k).unwrap();
        let cfg = SplitConfig { iterations: 8, split: 0.5, seed };
        let report = select_dimensionality(&t, &ranked, k, &cfg, 0.1).unwrap();
        let max_loss = t.support().max_loss();
        for errs in &report.per_iteration_errors {
            prop_assert_eq!(errs.len(), 8);
            prop_assert!(errs.iter().all(|&e| (0.0..=max_loss).contains(&e)));
        }
        let best = report.epsilon_tilde.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(report.epsilon_tilde[report.chosen_k - 1] <= best + 1e-12);
        prop_assert!(report.epsilon_tilde[..report.chosen_k - 1].iter().all(|&e| e > best + 1e-12));
        prop_assert_eq!(report, select_dimensionality(&t, &ranked, k, &cfg, 0.1).unwrap());
    }

    #[test]
    fn empirical_domain_reproduces_test_loss(p in table_params(), pick in 1usize..5) {
        let t = build(&p);
        let k = pick.min(t.n_features());
        let sub = build_subspace(t.schema(), &(0..k).collect::<Vec<_>>()).unwrap();
        let map = fit_loss_map(&t, &sub).unwrap();
        let report = predict(&map, &domain_from_table(&t, &sub, "test").unwrap()).unwrap();
        prop_assert!((report.predicted_loss - empirical_loss(&t)).abs() < 1e-12);
        prop_assert_eq!(report.untested_mass, 0.0);
    }

    #[test]
    fn prediction_is_linear_bounded_and_conservative(
        p in table_params(),
        w1 in prop::collection::vec(0.0f64..1.0, 216),
        w2 in prop::collection::vec(0.0f64..1.0, 216),
        alpha in 0.0f64..1.0,
        fill in 0.0f64..1.0,
    ) {
        let t = build(&p);
        let k = t.n_features().min(3);
        let sub = build_subspace(t.schema(), &(0..k).collect::<Vec<_>>()).unwrap();
        let n = sub.cell_count();
        let dist = |w: &[f64]| {
            let w: Vec<f64> = w[..n].iter().map(|x| x + 1e-3).collect();
            let total: f64 = w.iter().sum();
            DomainDistribution::new(sub.clone(), w.iter().map(|x| x / total).collect(), "d").unwrap()
        };
        let (d1, d2) = (dist(&w1), dist(&w2));
        let map = fit_loss_map(&t, &sub).unwrap();
        let p1 = predict(&map, &d1).unwrap().predicted_loss;
        let p2 = predict(&map, &d2).unwrap().predicted_loss;
        let mixed = predict(&map, &d1.mix(&d2, alpha, "m").unwrap()).unwrap().predicted_loss;
        prop_assert!((mixed - (alpha * p1 + (1.0 - alpha) * p2)).abs() < 1e-12);
        let (lo, hi) = (t.support().min_loss(), t.support().max_loss());
        prop_assert!(p1 >= lo - 1e-12 && p1 <= hi + 1e-12);

        // any other imputation in the support range predicts no more
        let mut alt = map.clone();
        for (g, tested) in alt.expected_loss.iter_mut().zip(&map.tested) {
            if !tested {
                *g = lo + fill * (hi - lo);
            }
        }
        prop_assert!(predict(&alt, &d1).unwrap().predicted_loss <= p1 + 1e-12);
    }

    #[test]
    fn discretization_is_idempotent(values in prop::collection::vec(-50.0f64..50.0, 12..200)) {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(max > min);
        let raw = RawTable {
            losses: (0..values.len()).map(|i| (i % 2) as f64).collect(),
            contexts: RawContexts {
                names: vec!["x".into()],
                columns: vec![values.iter().map(|v| v.to_string()).collect()],
            },
        };
        let schema = ContextSchema::new(vec![FeatureDescriptor::numerical("x", vec![min, max])]).unwrap();
        let once = discretize(&raw, &schema, 10).unwrap();
        let twice = discretize(&raw, once.schema(), 10).unwrap();
        prop_assert_eq!(once.schema(), twice.schema());
        prop_assert_eq!(
            feature_column(&once, 0),
            feature_column(&twice, 0)
        );
        prop_assert_eq!(once.schema().features()[0].clone(), FeatureDescriptor::numerical("x", uniform_edges(min, max, 10)));
    }
}
