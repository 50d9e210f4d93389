//! Belief-state reduction of the augmented partially observed problem.
//!
//! For a belief `z` over stage-`t` augmented states and an action `a`:
//!
//! ```text
//! pred(x')   = sum_x p_t(x'|x,a) z(x)
//! H(y|z,a)   = sum_x' r(y|x') pred(x')
//! F(z,a,y)   = r(y|.) pred(.) / H(y|z,a)
//! ```
//!
//! The belief tree enumerates every observation-action history with positive
//! probability, starting from the Bayes posterior of `mu_0` given `y(0)`.

use crate::error::{Error, Result};
use crate::par::Parallelism;
use crate::risk_augmentation::AugmentedGame;

pub const DEFAULT_NODE_CAP: usize = 10_000_000;

/// A sparse distribution over stage-`stage` augmented state ids, sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    pub stage: usize,
    pub mass: Vec<(usize, f64)>,
}

impl Belief {
    pub fn total(&self) -> f64 {
        self.mass.iter().map(|e| e.1).sum()
    }

    pub fn get(&self, id: usize) -> f64 {
        self.mass
            .binary_search_by_key(&id, |e| e.0)
            .map(|i| self.mass[i].1)
            .unwrap_or(0.0)
    }

    pub fn l1_distance(&self, other: &Belief) -> f64 {
        sparse_l1(&self.mass, &other.mass)
    }
}

pub(crate) fn sparse_l1(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    loop {
        match (a.get(i), b.get(j)) {
            (Some(&(ia, va)), Some(&(ib, vb))) => {
                if ia == ib {
                    acc += (va - vb).abs();
                    i += 1;
                    j += 1;
                } else if ia < ib {
                    acc += va.abs();
                    i += 1;
                } else {
                    acc += vb.abs();
                    j += 1;
                }
            }
            (Some(&(_, va)), None) => {
                acc += va.abs();
                i += 1;
            }
            (None, Some(&(_, vb))) => {
                acc += vb.abs();
                j += 1;
            }
            (None, None) => return acc,
        }
    }
}

/// Sums duplicate ids, keeping first-seen order of accumulation.
pub(crate) fn consolidate(mut pairs: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    pairs.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
    for (id, m) in pairs {
        match out.last_mut() {
            Some(last) if last.0 == id => last.1 += m,
            _ => out.push((id, m)),
        }
    }
    out
}

/// Posterior of `mu_0` given each `y(0)` with positive probability.
pub fn initial_beliefs(aug: &AugmentedGame) -> Vec<(usize, f64, Belief)> {
    let prior = aug.initial_distribution();
    let mut out = Vec::new();
    for y in 0..aug.spec().n_obs() {
        let joint: Vec<(usize, f64)> = prior
            .iter()
            .map(|&(x, p)| (x, p * aug.obs_prob(x, y)))
            .filter(|e| e.1 > 0.0)
            .collect();
        let h: f64 = joint.iter().map(|e| e.1).sum();
        if h > 0.0 {
            let mass = joint.into_iter().map(|(x, p)| (x, p / h)).collect();
            out.push((y, h, Belief { stage: 0, mass }));
        }
    }
    out
}

/// Pre-observation belief at `z.stage + 1`.
pub fn predict(aug: &AugmentedGame, z: &Belief, a: usize) -> Vec<(usize, f64)> {
    let mut pairs = Vec::with_capacity(z.mass.len() * aug.spec().n_states());
    for &(x, w) in &z.mass {
        aug.for_each_successor(z.stage, x, a, |x2, p| pairs.push((x2, w * p)));
    }
    consolidate(pairs)
}

fn marginal_from_prediction(aug: &AugmentedGame, pred: &[(usize, f64)]) -> Vec<f64> {
    (0..aug.spec().n_obs())
        .map(|y| pred.iter().map(|&(x, p)| p * aug.obs_prob(x, y)).sum())
        .collect()
}

fn posterior(aug: &AugmentedGame, stage: usize, pred: &[(usize, f64)], y: usize, h: f64) -> Belief {
    let mass = pred
        .iter()
        .filter_map(|&(x, p)| {
            let v = p * aug.obs_prob(x, y);
            (v > 0.0).then_some((x, v / h))
        })
        .collect();
    Belief { stage, mass }
}

/// `H_t(.|z, a)`.
pub fn observation_marginal(aug: &AugmentedGame, z: &Belief, a: usize) -> Vec<f64> {
    marginal_from_prediction(aug, &predict(aug, z, a))
}

/// `F_t(z, a, y)`.
pub fn filter_update(aug: &AugmentedGame, z: &Belief, a: usize, y: usize) -> Result<Belief> {
    let pred = predict(aug, z, a);
    let h: f64 = pred.iter().map(|&(x, p)| p * aug.obs_prob(x, y)).sum();
    if h <= 0.0 {
        return Err(Error::ZeroProbabilityObservation {
            stage: z.stage,
            action: a,
            obs: y,
        });
    }
    Ok(posterior(aug, z.stage + 1, &pred, y, h))
}

/// `C_t(z, a)`: zero before the terminal stage, `E_z[exp(lambda level)]` at it.
pub fn belief_cost(aug: &AugmentedGame, z: &Belief, _a: usize) -> f64 {
    z.mass.iter().map(|&(x, w)| w * aug.cost(z.stage, x)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub obs: usize,
    pub prob: f64,
    pub child: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefNode {
    pub belief: Belief,
    /// `(parent, action, observation)` that produced this node.
    pub parent: Option<(usize, usize, usize)>,
    /// Root observation for stage-0 nodes.
    pub root_obs: Option<usize>,
    /// `children[a]` lists the positive-probability observations after `a`.
    /// Empty at the terminal stage.
    pub children: Vec<Vec<Branch>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootBranch {
    pub obs: usize,
    pub prob: f64,
    pub node: usize,
}

#[derive(Debug, Clone)]
pub struct BeliefTree {
    pub nodes: Vec<BeliefNode>,
    /// Nodes of stage `t` occupy `stage_start[t]..stage_start[t + 1]`.
    pub stage_start: Vec<usize>,
    pub roots: Vec<RootBranch>,
    pub n_actions: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct TreeOptions {
    pub node_cap: usize,
    pub parallelism: Parallelism,
}

impl Default for TreeOptions {
    fn default() -> Self {
        TreeOptions {
            node_cap: DEFAULT_NODE_CAP,
            parallelism: Parallelism::default(),
        }
    }
}

impl BeliefTree {
    /// Terminal stage index (`T + 1`).
    pub fn horizon(&self) -> usize {
        self.stage_start.len() - 2
    }

    pub fn stage_nodes(&self, t: usize) -> std::ops::Range<usize> {
        self.stage_start[t]..self.stage_start[t + 1]
    }

    pub fn stage_of(&self, node: usize) -> usize {
        self.nodes[node].belief.stage
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `(y(0), a(0), y(1), ..., y(t))` of a node, actions interleaved.
    pub fn history(&self, node: usize) -> (Vec<usize>, Vec<usize>) {
        let mut ys = Vec::new();
        let mut acts = Vec::new();
        let mut cur = node;
        loop {
            let n = &self.nodes[cur];
            match n.parent {
                Some((p, a, y)) => {
                    ys.push(y);
                    acts.push(a);
                    cur = p;
                }
                None => {
                    ys.push(n.root_obs.expect("root carries its observation"));
                    break;
                }
            }
        }
        ys.reverse();
        acts.reverse();
        (ys, acts)
    }

    /// The child reached by `(a, y)`, if that observation is possible.
    pub fn child(&self, node: usize, a: usize, y: usize) -> Option<&Branch> {
        self.nodes[node].children.get(a)?.iter().find(|b| b.obs == y)
    }
}

struct Expansion {
    per_action: Vec<Vec<(usize, f64, Belief)>>,
}

fn expand_node(aug: &AugmentedGame, z: &Belief) -> Expansion {
    let n_obs = aug.spec().n_obs();
    let per_action = (0..aug.spec().n_actions())
        .map(|a| {
            let pred = predict(aug, z, a);
            let h = marginal_from_prediction(aug, &pred);
            (0..n_obs)
                .filter(|&y| h[y] > 0.0)
                .map(|y| (y, h[y], posterior(aug, z.stage + 1, &pred, y, h[y])))
                .collect()
        })
        .collect();
    Expansion { per_action }
}

pub fn expand_tree(aug: &AugmentedGame) -> Result<BeliefTree> {
    expand_tree_with(aug, TreeOptions::default())
}

/// Expands every reachable node through the terminal stage. Children are
/// numbered in `(parent, action, observation)` order whatever the
/// parallelism, so the tree is identical across strategies.
pub fn expand_tree_with(aug: &AugmentedGame, opts: TreeOptions) -> Result<BeliefTree> {
    let horizon = aug.horizon();
    let n_actions = aug.spec().n_actions();
    let mut nodes = Vec::new();
    let mut roots = Vec::new();
    for (y, p, z) in initial_beliefs(aug) {
        roots.push(RootBranch {
            obs: y,
            prob: p,
            node: nodes.len(),
        });
        nodes.push(BeliefNode {
            belief: z,
            parent: None,
            root_obs: Some(y),
            children: Vec::new(),
        });
    }
    let mut stage_start = vec![0, nodes.len()];
    for t in 0..horizon {
        let range = stage_start[t]..stage_start[t + 1];
        let expansions = opts
            .parallelism
            .map_slice(&nodes[range.clone()], |n| expand_node(aug, &n.belief));
        let added: usize = expansions
            .iter()
            .map(|e| e.per_action.iter().map(Vec::len).sum::<usize>())
            .sum();
        if nodes.len() + added > opts.node_cap {
            return Err(Error::NodeCap {
                stage: t + 1,
                count: nodes.len() + added,
                cap: opts.node_cap,
            });
        }
        for (parent, exp) in range.zip(expansions) {
            let mut children = Vec::with_capacity(n_actions);
            for (a, list) in exp.per_action.into_iter().enumerate() {
                let mut branches = Vec::with_capacity(list.len());
                for (y, h, z) in list {
                    branches.push(Branch {
                        obs: y,
                        prob: h,
                        child: nodes.len(),
                    });
                    nodes.push(BeliefNode {
                        belief: z,
                        parent: Some((parent, a, y)),
                        root_obs: None,
                        children: Vec::new(),
                    });
                }
                children.push(branches);
            }
            nodes[parent].children = children;
        }
        stage_start.push(nodes.len());
    }
    Ok(BeliefTree {
        nodes,
        stage_start,
        roots,
        n_actions,
    })
}
