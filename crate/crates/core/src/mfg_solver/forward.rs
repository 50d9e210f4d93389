//! Forward passes: the induced state flow (the `Lambda` map), exact policy
//! evaluation, and the state-action flow on the belief tree.

use std::collections::BTreeMap;

use crate::belief_engine::{consolidate, BeliefTree};
use crate::risk_augmentation::AugmentedGame;

use super::dp::{PomdpSolution, TIE_TOL};
use super::flow::MeasureFlow;
use super::policy::{Cursor, PolicyTree};

/// Result of the exact joint `(augmented state, policy position)` pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Per stage `0..=T+1`, mass on augmented state ids.
    pub masses: Vec<Vec<(usize, f64)>>,
    /// Expected terminal cost `E[exp(lambda level_{T+1})]`.
    pub value: f64,
}

/// Propagates `mu_0` under `policy` through the kernels of `aug`, tracking
/// each agent's position in the policy alongside its augmented state.
pub fn forward_pass(aug: &AugmentedGame, policy: &PolicyTree) -> ForwardPass {
    let n_obs = aug.spec().n_obs();
    let horizon = aug.horizon();
    let mut joint: BTreeMap<(usize, Cursor), f64> = BTreeMap::new();
    for (x, p) in aug.initial_distribution() {
        for y in 0..n_obs {
            let r = aug.obs_prob(x, y);
            if r > 0.0 {
                *joint.entry((x, policy.start(y))).or_insert(0.0) += p * r;
            }
        }
    }
    let mut masses = Vec::with_capacity(horizon + 1);
    for t in 0..horizon {
        masses.push(state_marginal(&joint));
        let mut next: BTreeMap<(usize, Cursor), f64> = BTreeMap::new();
        let last = t + 1 == horizon;
        for (&(x, cursor), &w) in &joint {
            let a = policy.action(cursor);
            aug.for_each_successor(t, x, a, |x2, p| {
                if last {
                    *next.entry((x2, Cursor::Off)).or_insert(0.0) += w * p;
                    return;
                }
                for y in 0..n_obs {
                    let r = aug.obs_prob(x2, y);
                    if r > 0.0 {
                        *next.entry((x2, policy.advance(cursor, y))).or_insert(0.0) += w * p * r;
                    }
                }
            });
        }
        joint = next;
    }
    let terminal = state_marginal(&joint);
    let value = terminal.iter().map(|&(x, w)| w * aug.cost(horizon, x)).sum();
    masses.push(terminal);
    ForwardPass { masses, value }
}

fn state_marginal(joint: &BTreeMap<(usize, Cursor), f64>) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    for (&(x, _), &w) in joint {
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 += w,
            _ => out.push((x, w)),
        }
    }
    out
}

/// `Lambda(policy)`: the state flow generated when the population follows
/// `policy` in the game built against the input flow.
pub fn propagate_flow(aug: &AugmentedGame, policy: &PolicyTree) -> MeasureFlow {
    MeasureFlow::from_augmented(aug, &forward_pass(aug, policy).masses)
}

/// Exact expected risk-sensitive cost of `policy` under the game's flow.
pub fn evaluate_policy(aug: &AugmentedGame, policy: &PolicyTree) -> f64 {
    forward_pass(aug, policy).value
}

/// Joint law of `(belief node, action)` at each stage under a policy.
#[derive(Debug, Clone)]
pub struct StateActionFlow {
    /// Per stage: `(node, action, reach probability)`. Terminal nodes carry
    /// no action.
    pub stages: Vec<Vec<(usize, Option<usize>, f64)>>,
}

impl StateActionFlow {
    pub fn new(tree: &BeliefTree, policy: &PolicyTree) -> Self {
        let horizon = tree.horizon();
        let mut stages = vec![Vec::new(); horizon + 1];
        let mut frontier: Vec<(usize, Cursor, f64)> = tree
            .roots
            .iter()
            .map(|r| (r.node, policy.start(r.obs), r.prob))
            .collect();
        for stage in stages.iter_mut() {
            let mut next = Vec::new();
            for (node, cursor, w) in frontier {
                if tree.nodes[node].children.is_empty() {
                    stage.push((node, None, w));
                    continue;
                }
                let a = policy.action(cursor);
                stage.push((node, Some(a), w));
                for b in &tree.nodes[node].children[a] {
                    next.push((b.child, policy.advance(cursor, b.obs), w * b.prob));
                }
            }
            frontier = next;
        }
        StateActionFlow { stages }
    }

    /// Mixture of the reached beliefs: the augmented-state law at stage `t`.
    pub fn state_marginal(&self, tree: &BeliefTree, t: usize) -> Vec<(usize, f64)> {
        let mut pairs = Vec::new();
        for &(node, _, w) in &self.stages[t] {
            pairs.extend(tree.nodes[node].belief.mass.iter().map(|&(x, z)| (x, w * z)));
        }
        consolidate(pairs)
    }

    /// Largest violation of `nu_{t+1, nodes} = push-forward of nu_t`.
    pub fn consistency_error(&self, tree: &BeliefTree) -> f64 {
        let mut worst: f64 = 0.0;
        for t in 0..self.stages.len() - 1 {
            let mut pushed: BTreeMap<usize, f64> = BTreeMap::new();
            for &(node, a, w) in &self.stages[t] {
                if let Some(a) = a {
                    for b in &tree.nodes[node].children[a] {
                        *pushed.entry(b.child).or_insert(0.0) += w * b.prob;
                    }
                }
            }
            let actual: BTreeMap<usize, f64> = self.stages[t + 1].iter().map(|&(n, _, w)| (n, w)).collect();
            for (n, w) in &pushed {
                worst = worst.max((w - actual.get(n).copied().unwrap_or(0.0)).abs());
            }
            for (n, w) in &actual {
                if !pushed.contains_key(n) {
                    worst = worst.max(*w);
                }
            }
        }
        worst
    }

    /// Mass placed on `(node, action)` pairs attaining the Bellman minimum.
    pub fn optimal_mass(&self, solution: &PomdpSolution) -> Vec<f64> {
        self.stages
            .iter()
            .map(|stage| {
                stage
                    .iter()
                    .filter(|&&(node, a, _)| match a {
                        None => true,
                        Some(a) => {
                            let q = solution.q_values[node][a];
                            let v = solution.values[node];
                            (q - v).abs() <= TIE_TOL * v.abs().max(1.0)
                        }
                    })
                    .map(|e| e.2)
                    .sum()
            })
            .collect()
    }
}
