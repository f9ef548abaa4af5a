mod common;

use vlpl_core::baselines::{greedy_layout, slot_avg_layout, sort_fixed_length};
use vlpl_core::objective::{brute_force_optimal, expected_attractiveness_exact, expected_attractiveness_mc, ranking_reward};
use vlpl_core::{ExposureTable, RankingConfig, VarRanking};

use common::{random_instance, table1_attract, theta1, theta2, A, B, C};

fn columns() -> Vec<VarRanking> {
    [
        vec![(A, 3)],
        vec![(A, 2), (B, 1)],
        vec![(A, 1), (B, 2)],
        vec![(B, 1), (A, 2)],
        vec![(B, 2), (A, 1)],
        vec![(B, 3)],
        vec![(A, 2)],
        vec![(A, 1), (B, 1), (C, 1)],
        vec![(B, 1), (A, 1), (C, 1)],
    ]
    .iter()
    .map(|p| VarRanking::from_pairs(p))
    .collect()
}

#[test]
fn table1_rewards() {
    let attract = table1_attract(0.6);
    let rows = [
        (theta1(), [0.750, 0.817, 0.800, 0.800, 0.650, 0.450, 0.667, 0.700, 0.633]),
        (theta2(), [0.895, 1.074, 1.060, 1.094, 0.920, 0.537, 0.815, 0.931, 0.879]),
    ];
    for (exposure, printed) in &rows {
        for (y, want) in columns().iter().zip(printed) {
            let got = ranking_reward(y, &attract, exposure).unwrap().value;
            assert!((got - want).abs() < 5e-4, "{y:?}: {got} vs {want}");
        }
    }
}

#[test]
fn table1_optima_and_prp_failure() {
    let c = RankingConfig::new(3, 3, 3).unwrap();
    let attract = table1_attract(0.6);
    let (y1, v1) = brute_force_optimal(&attract, &theta1(), &c).unwrap();
    assert_eq!(y1, VarRanking::from_pairs(&[(A, 2), (B, 1)]));
    assert!((v1 - 0.817).abs() < 5e-4);
    let (y2, v2) = brute_force_optimal(&attract, &theta2(), &c).unwrap();
    assert_eq!(y2, VarRanking::from_pairs(&[(B, 1), (A, 2)]));
    assert!((v2 - 1.094).abs() < 5e-4);
    // The less attractive document goes first.
    assert!((1..=3).all(|l| attract.get(A, l) > attract.get(B, l)));
    assert_eq!(y2.items[0].doc, B);
    // Neither heuristic reaches the optimum.
    let g = ranking_reward(&greedy_layout(&attract, &theta1(), &c), &attract, &theta1()).unwrap().value;
    let s = ranking_reward(&slot_avg_layout(&attract, &theta1(), &c), &attract, &theta1()).unwrap().value;
    assert!(v1 > g && v1 > s);
}

#[test]
fn optimal_length_depends_on_other_documents() {
    let c = RankingConfig::new(3, 3, 3).unwrap();
    for exposure in [theta1(), theta2()] {
        let (with_b, _) = brute_force_optimal(&table1_attract(0.6), &exposure, &c).unwrap();
        let a = with_b.items.iter().find(|p| p.doc == A).unwrap();
        assert_eq!(a.len, 2);
        let (without_b, _) = brute_force_optimal(&table1_attract(0.0), &exposure, &c).unwrap();
        assert_eq!(without_b, VarRanking::from_pairs(&[(A, 3)]));
    }
}

#[test]
fn budget_reverses_order() {
    let attract = table1_attract(0.6);
    let sub = ExposureTable::from_entries(2, 2, &[(1, 1, 0.631), (1, 2, 0.815), (2, 1, 0.500)]).unwrap();
    let c2 = RankingConfig::new(3, 2, 2).unwrap();
    let a = ranking_reward(&VarRanking::from_pairs(&[(A, 1), (B, 1)]), &attract_sub(&attract), &sub).unwrap().value;
    let b = ranking_reward(&VarRanking::from_pairs(&[(B, 1), (A, 1)]), &attract_sub(&attract), &sub).unwrap().value;
    assert!((a - 0.931).abs() < 1e-12);
    assert!((b - 0.8786).abs() < 1e-12);
    assert!((b - 0.879).abs() < 5e-4);
    let (y, _) = brute_force_optimal(&attract_sub(&attract), &sub, &c2).unwrap();
    assert_eq!(y, VarRanking::from_pairs(&[(A, 1), (B, 1)]));
    let (y3, _) = brute_force_optimal(&attract, &theta2(), &RankingConfig::new(3, 3, 3).unwrap()).unwrap();
    assert_eq!(y3.items[0].doc, B);
}

fn attract_sub(full: &vlpl_core::AttractTable) -> vlpl_core::AttractTable {
    vlpl_core::AttractTable::from_rows(&(0..3).map(|d| vec![full.get(d, 1), full.get(d, 2)]).collect::<Vec<_>>()).unwrap()
}

#[test]
fn fixed_length_sorting_values() {
    let c = RankingConfig::new(3, 3, 3).unwrap();
    let attract = table1_attract(0.6);
    let two = sort_fixed_length(&attract, 2, &c);
    assert_eq!(two, VarRanking::from_pairs(&[(A, 2)]));
    assert!((ranking_reward(&two, &attract, &theta1()).unwrap().value - 0.667).abs() < 5e-4);
    let one = sort_fixed_length(&attract, 1, &c);
    assert!((ranking_reward(&one, &attract, &theta1()).unwrap().value - 0.700).abs() < 5e-4);
}

#[test]
fn monte_carlo_agrees_with_enumeration() {
    for seed in 0..5 {
        let inst = random_instance(seed, 4, 3, 5);
        let exact = expected_attractiveness_exact(&inst.scores, &inst.attract, &inst.exposure, &inst.config).unwrap();
        let mc = expected_attractiveness_mc(&inst.scores, &inst.attract, &inst.exposure, &inst.config, 100_000, seed).unwrap();
        assert!((mc.mean - exact).abs() < 4.0 * mc.std_err + 1e-9, "{} vs {exact}", mc.mean);
    }
}
