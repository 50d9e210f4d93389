//! Backward induction on the belief tree.

use crate::belief_engine::{self, BeliefTree, TreeOptions};
use crate::error::Result;
use crate::par::Parallelism;
use crate::risk_augmentation::AugmentedGame;

use super::policy::{Cursor, PolicyTree};

/// Relative tolerance under which two action values count as tied.
pub const TIE_TOL: f64 = 1e-12;

/// Which minimizer to keep when several actions tie.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    #[default]
    Lowest,
    Highest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Backup {
    pub value: f64,
    /// `None` at the terminal stage.
    pub action: Option<usize>,
    /// `C_t(z, a) + sum_y H(y|z,a) V(child)` per action; empty at the terminal stage.
    pub q_values: Vec<f64>,
}

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Picks the minimizing action under the tie rule.
pub fn argmin(q: &[f64], tie: TieBreak) -> usize {
    let mut best = 0;
    for (a, &v) in q.iter().enumerate().skip(1) {
        let better = v < q[best] && !ties(v, q[best]);
        let tied = ties(v, q[best]);
        if better || (tied && tie == TieBreak::Highest) {
            best = a;
        }
    }
    best
}

fn backup_node(aug: &AugmentedGame, tree: &BeliefTree, node: usize, values: &[f64], tie: TieBreak) -> Backup {
    let n = &tree.nodes[node];
    if n.children.is_empty() {
        return Backup {
            value: belief_engine::belief_cost(aug, &n.belief, 0),
            action: None,
            q_values: Vec::new(),
        };
    }
    let q_values: Vec<f64> = n
        .children
        .iter()
        .enumerate()
        .map(|(a, branches)| {
            let running = belief_engine::belief_cost(aug, &n.belief, a);
            running + branches.iter().map(|b| b.prob * values[b.child]).sum::<f64>()
        })
        .collect();
    let a = argmin(&q_values, tie);
    Backup {
        value: q_values[a],
        action: Some(a),
        q_values,
    }
}

/// `T_t` applied to the stage-`t` nodes. `values` must hold the values of
/// every stage-`t+1` node (indexed by node id); it is ignored at the
/// terminal stage.
pub fn bellman_backup(
    aug: &AugmentedGame,
    tree: &BeliefTree,
    t: usize,
    values: &[f64],
    tie: TieBreak,
    parallelism: Parallelism,
) -> Vec<Backup> {
    let range = tree.stage_nodes(t);
    parallelism.map_range(range.len(), |i| backup_node(aug, tree, range.start + i, values, tie))
}

#[derive(Debug, Clone)]
pub struct PomdpSolution {
    pub tree: BeliefTree,
    /// `J_{*,t}` at every node.
    pub values: Vec<f64>,
    pub actions: Vec<Option<usize>>,
    pub q_values: Vec<Vec<f64>>,
    pub policy: PolicyTree,
    /// `J_{*,0} = sum_{y0} P(y0) V(root(y0))`.
    pub value: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveConfig {
    pub tie: TieBreak,
    pub tree: TreeOptions,
}

pub fn solve_pomdp(aug: &AugmentedGame) -> Result<PomdpSolution> {
    solve_pomdp_with(aug, SolveConfig::default())
}

pub fn solve_pomdp_with(aug: &AugmentedGame, cfg: SolveConfig) -> Result<PomdpSolution> {
    let tree = belief_engine::expand_tree_with(aug, cfg.tree)?;
    Ok(solve_on_tree(aug, tree, cfg.tie, cfg.tree.parallelism))
}

/// Backward induction on an already expanded tree.
pub fn solve_on_tree(aug: &AugmentedGame, tree: BeliefTree, tie: TieBreak, parallelism: Parallelism) -> PomdpSolution {
    let n = tree.len();
    let mut values = vec![0.0; n];
    let mut actions = vec![None; n];
    let mut q_values = vec![Vec::new(); n];
    for t in (0..=tree.horizon()).rev() {
        let start = tree.stage_start[t];
        for (i, b) in bellman_backup(aug, &tree, t, &values, tie, parallelism)
            .into_iter()
            .enumerate()
        {
            values[start + i] = b.value;
            actions[start + i] = b.action;
            q_values[start + i] = b.q_values;
        }
    }
    let value = tree.roots.iter().map(|r| r.prob * values[r.node]).sum();
    let policy = PolicyTree::from_tree(&tree, aug.spec().n_obs(), 0, |node| actions[node].unwrap_or(0));
    PomdpSolution {
        tree,
        values,
        actions,
        q_values,
        policy,
        value,
    }
}

/// Expected terminal cost of `policy` computed on the belief tree.
pub fn evaluate_on_tree(aug: &AugmentedGame, tree: &BeliefTree, policy: &PolicyTree) -> f64 {
    let mut total = 0.0;
    let mut stack: Vec<(usize, Cursor, f64)> = tree
        .roots
        .iter()
        .map(|r| (r.node, policy.start(r.obs), r.prob))
        .collect();
    while let Some((node, cursor, weight)) = stack.pop() {
        let n = &tree.nodes[node];
        if n.children.is_empty() {
            total += weight * belief_engine::belief_cost(aug, &n.belief, 0);
            continue;
        }
        let a = policy.action(cursor);
        for b in &n.children[a] {
            stack.push((b.child, policy.advance(cursor, b.obs), weight * b.prob));
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::risk_augmentation::FieldModel;

    #[test]
    fn argmin_tie_rules() {
        assert_eq!(argmin(&[1.0, 1.0, 2.0], TieBreak::Lowest), 0);
        assert_eq!(argmin(&[1.0, 1.0, 2.0], TieBreak::Highest), 1);
        assert_eq!(argmin(&[3.0, 1.0, 1.0 + 1e-14], TieBreak::Lowest), 1);
        assert_eq!(argmin(&[3.0, 1.0, 1.0 + 1e-14], TieBreak::Highest), 2);
        assert_eq!(argmin(&[3.0, 2.0, 1.0], TieBreak::Lowest), 2);
    }

    #[test]
    fn terminal_backup_is_cost() {
        let spec = fixtures::toy_a();
        let aug = AugmentedGame::build(&spec, FieldModel::Flow(vec![vec![1.0, 0.0]; 3])).unwrap();
        let tree = belief_engine::expand_tree(&aug).unwrap();
        let h = tree.horizon();
        let backups = bellman_backup(&aug, &tree, h, &[], TieBreak::Lowest, Parallelism::Sequential);
        for (i, b) in backups.iter().enumerate() {
            let z = &tree.nodes[tree.stage_start[h] + i].belief;
            assert_eq!(b.value, belief_engine::belief_cost(&aug, z, 0));
            assert!(b.action.is_none());
        }
    }

    #[test]
    fn toy_a_solution() {
        let spec = fixtures::toy_a();
        let aug = AugmentedGame::build(&spec, FieldModel::Flow(vec![vec![1.0, 0.0]; 3])).unwrap();
        let sol = solve_pomdp(&aug).unwrap();
        assert_eq!(sol.value, 1.0);
        for e in sol.policy.entries() {
            assert_eq!(e.action, 0);
        }
        assert_eq!(evaluate_on_tree(&aug, &sol.tree, &sol.policy), 1.0);
    }

    #[test]
    fn zero_cost_game_picks_action_zero() {
        let mut spec = fixtures::toy_b();
        spec.cost_base = vec![vec![0.0; 2]; 2];
        spec.cost_couple = None;
        let aug = AugmentedGame::build(&spec, FieldModel::SelfState).unwrap();
        let sol = solve_pomdp(&aug).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-14);
        assert!(sol.actions.iter().flatten().all(|&a| a == 0));
        let hi = solve_pomdp_with(
            &aug,
            SolveConfig {
                tie: TieBreak::Highest,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(hi.actions.iter().flatten().all(|&a| a == 1));
    }

    /// With one action there is one policy; its value is the plain
    /// trajectory expectation.
    #[test]
    fn single_action_value_matches_trajectory_sum() {
        let mut spec = fixtures::lln();
        for s in 0..3 {
            spec.transition_base[s].truncate(1);
            spec.cost_base[s].truncate(1);
        }
        spec.actions.truncate(1);
        let spec = spec.validated().unwrap();
        let aug = AugmentedGame::build(&spec, FieldModel::SelfState).unwrap();
        let sol = solve_pomdp(&aug).unwrap();
        // enumerate state paths s0..s_{T}; costs at stages 0..=T
        let t_max = spec.horizon_t;
        let mut expected = 0.0;
        let n_paths = 3usize.pow(t_max as u32 + 1);
        for code in 0..n_paths {
            let path: Vec<usize> = (0..=t_max).map(|k| (code / 3usize.pow(k as u32)) % 3).collect();
            let mut p = spec.kappa0[path[0]];
            let mut c = 0.0;
            for k in 0..=t_max {
                c += spec.beta.powi(k as i32) * spec.cost_base[path[k]][0];
                if k < t_max {
                    p *= spec.transition_base[path[k]][0][path[k + 1]];
                }
            }
            expected += p * (spec.lambda * c).exp();
        }
        assert!((sol.value - expected).abs() < 1e-12, "{} vs {}", sol.value, expected);
    }

    #[test]
    fn parallel_backup_matches_sequential() {
        let spec = fixtures::lln();
        let aug = AugmentedGame::build(&spec, FieldModel::SelfState).unwrap();
        let tree = belief_engine::expand_tree(&aug).unwrap();
        let a = solve_on_tree(&aug, tree.clone(), TieBreak::Lowest, Parallelism::Sequential);
        let b = solve_on_tree(&aug, tree, TieBreak::Lowest, Parallelism::default());
        assert_eq!(a.values, b.values);
        assert_eq!(a.actions, b.actions);
    }

    #[test]
    fn bellman_consistency_is_idempotent() {
        let spec = fixtures::toy_b();
        let aug = AugmentedGame::build(&spec, FieldModel::SelfState).unwrap();
        let sol = solve_pomdp(&aug).unwrap();
        for t in 0..=sol.tree.horizon() {
            let again = bellman_backup(&aug, &sol.tree, t, &sol.values, TieBreak::Lowest, Parallelism::Sequential);
            for (i, b) in again.iter().enumerate() {
                let id = sol.tree.stage_start[t] + i;
                assert_eq!(b.value, sol.values[id]);
                assert_eq!(b.action, sol.actions[id]);
            }
        }
    }
}
