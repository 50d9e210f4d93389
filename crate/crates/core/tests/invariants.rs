//! Structural invariants on random small models.

mod common;

use pomfg::belief_engine::expand_tree;
use pomfg::mfg_solver::{
    evaluate_policy, forward_pass, nce_residual, propagate_flow, solve_pomdp, PolicyTree, StateActionFlow,
};
use pomfg::nagent_sim::random_policy;
use pomfg::risk_augmentation::{AugmentedGame, FieldModel};
use pomfg::GameSpec;
use proptest::prelude::*;

fn random_game(seed: u64) -> (GameSpec, AugmentedGame) {
    let mut rng = common::rng(seed);
    let shape = common::random_shape(&mut rng);
    let spec = common::random_spec(&mut rng, &shape);
    let field = FieldModel::Flow(common::random_field(&mut rng, &spec));
    let aug = AugmentedGame::build(&spec, field).unwrap();
    (spec, aug)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn levels_lie_in_discounted_cost_range(seed in any::<u64>()) {
        let (spec, aug) = random_game(seed);
        let k = spec.cost_sup();
        let mut cap = 0.0;
        let mut weight = 1.0;
        for t in 0..=aug.horizon() {
            for x in 0..aug.n_states_at(t) {
                let v = aug.level_value(t, x);
                prop_assert!(v >= 0.0 && v <= cap * (1.0 + 1e-12), "stage {t}: {v} > {cap}");
            }
            cap += weight * k;
            weight *= spec.beta;
        }
    }

    #[test]
    fn augmented_rows_are_distributions(seed in any::<u64>()) {
        let (spec, aug) = random_game(seed);
        for t in 0..aug.horizon() {
            for x in 0..aug.n_states_at(t) {
                for a in 0..spec.n_actions() {
                    let total: f64 = aug.transition_row(t, x, a).iter().map(|e| e.1).sum();
                    prop_assert!(close(total, 1.0, 1e-12));
                }
            }
        }
        let total: f64 = aug.initial_distribution().iter().map(|e| e.1).sum();
        prop_assert!(close(total, 1.0, 1e-12));
    }

    #[test]
    fn belief_tree_conserves_probability(seed in any::<u64>()) {
        let (_, aug) = random_game(seed);
        let tree = expand_tree(&aug).unwrap();
        let roots: f64 = tree.roots.iter().map(|r| r.prob).sum();
        prop_assert!(close(roots, 1.0, 1e-12));
        for node in &tree.nodes {
            prop_assert!(close(node.belief.total(), 1.0, 1e-12));
            prop_assert!(node.belief.mass.iter().all(|e| e.1 > 0.0));
            for branches in &node.children {
                let p: f64 = branches.iter().map(|b| b.prob).sum();
                prop_assert!(branches.iter().all(|b| b.prob > 0.0));
                prop_assert!(close(p, 1.0, 1e-12));
            }
        }
    }

    #[test]
    fn optimal_value_beats_random_policies(seed in any::<u64>()) {
        let (spec, aug) = random_game(seed);
        let sol = solve_pomdp(&aug).unwrap();
        prop_assert!(close(evaluate_policy(&aug, &sol.policy), sol.value, 1e-12));
        let mut rng = common::rng(seed ^ 0x5eed);
        for _ in 0..8 {
            let pi = random_policy(&spec, &mut rng);
            prop_assert!(evaluate_policy(&aug, &pi) >= sol.value * (1.0 - 1e-12));
        }
    }

    #[test]
    fn forward_masses_sum_to_one(seed in any::<u64>()) {
        let (spec, aug) = random_game(seed);
        let mut rng = common::rng(seed ^ 0xf10);
        let pi = random_policy(&spec, &mut rng);
        let pass = forward_pass(&aug, &pi);
        for stage in &pass.masses {
            let total: f64 = stage.iter().map(|e| e.1).sum();
            prop_assert!(close(total, 1.0, 1e-12));
        }
        let flow = propagate_flow(&aug, &pi);
        for t in 0..flow.stages.len() {
            prop_assert!(close(flow.stage_total(t), 1.0, 1e-12));
        }
        let tree = expand_tree(&aug).unwrap();
        prop_assert!(StateActionFlow::new(&tree, &pi).consistency_error(&tree) < 1e-12);
    }

    #[test]
    fn residual_is_a_metric(seed in any::<u64>(), theta in 0.0f64..=1.0) {
        let (spec, aug) = random_game(seed);
        let mut rng = common::rng(seed ^ 0xd15);
        let flows: Vec<_> = (0..3).map(|_| propagate_flow(&aug, &random_policy(&spec, &mut rng))).collect();
        let (a, b, c) = (&flows[0], &flows[1], &flows[2]);
        prop_assert_eq!(nce_residual(a, a), 0.0);
        prop_assert!(close(nce_residual(a, b), nce_residual(b, a), 1e-15));
        prop_assert!(nce_residual(a, c) <= nce_residual(a, b) + nce_residual(b, c) + 1e-12);
        prop_assert!(nce_residual(a, b) <= 2.0 + 1e-12);
        // mixing moves along a segment in every stage
        let m = a.mix(b, theta);
        prop_assert!(close(nce_residual(a, &m), theta * nce_residual(a, b), 1e-9));
    }

    #[test]
    fn policy_entries_round_trip(seed in any::<u64>()) {
        let (spec, _) = random_game(seed);
        let mut rng = common::rng(seed);
        let pi = random_policy(&spec, &mut rng);
        let back = PolicyTree::from_entries(pi.n_obs(), pi.last_stage(), pi.fallback(), pi.entries()).unwrap();
        prop_assert_eq!(back, pi);
    }
}
