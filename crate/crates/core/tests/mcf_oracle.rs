//! Flow solvers against exhaustive enumeration of size-bounded assignments.

use blockpf::mcf::{
    build_assignment_network, extract_assignment, quantize_costs, solve_assignment, solve_mcf,
};
use proptest::prelude::*;

mod common;
use common::brute_force;

fn instance() -> impl Strategy<Value = (usize, usize, usize, usize, Vec<f64>)> {
    (1usize..=8, 1usize..=3)
        .prop_flat_map(|(n, k)| {
            let k = k.min(n);
            let min_zeta = n.div_ceil(k);
            (
                Just(n),
                Just(k),
                1usize..=(n / k).clamp(1, 2),
                min_zeta..=n,
                prop::collection::vec(0.0f64..4.0, n * k),
            )
        })
        .prop_filter("feasible", |(n, k, xi, zeta, _)| xi * k <= *n && xi <= zeta)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn both_solvers_match_enumeration((n, k, xi, zeta, costs) in instance()) {
        let q = quantize_costs(&costs);
        let expected = brute_force(&q, n, k, xi, zeta).expect("feasible instance");

        let net = build_assignment_network(&costs, n, k, xi, zeta).unwrap();
        let sol = solve_mcf(&net).unwrap();
        sol.verify(&net).unwrap();
        prop_assert_eq!(sol.total_cost, expected);
        let labels = extract_assignment(&net, &sol, n, k).unwrap();
        let from_labels: i64 = labels.iter().enumerate().map(|(i, &l)| q[i * k + l]).sum();
        prop_assert_eq!(from_labels, expected);

        let (labels, cost) = solve_assignment(&q, n, k, xi, zeta).unwrap();
        prop_assert_eq!(cost, expected);
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        prop_assert!(counts.iter().all(|&c| c >= xi && c <= zeta));
        let from_labels: i64 = labels.iter().enumerate().map(|(i, &l)| q[i * k + l]).sum();
        prop_assert_eq!(from_labels, expected);
    }
}

#[test]
fn larger_instances_agree_between_solvers() {
    // beyond enumeration range the two independent solvers check each other
    let mut state = 0x1234_5678_u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for (n, k, zeta) in [(40, 5, 8), (100, 20, 5), (100, 10, 15), (60, 7, 60)] {
        let costs: Vec<f64> = (0..n * k).map(|_| next() * 3.0).collect();
        let net = build_assignment_network(&costs, n, k, 1, zeta).unwrap();
        let sol = solve_mcf(&net).unwrap();
        sol.verify(&net).unwrap();
        let (_, cost) = solve_assignment(&quantize_costs(&costs), n, k, 1, zeta).unwrap();
        assert_eq!(sol.total_cost, cost, "n={n} k={k} zeta={zeta}");
    }
}
