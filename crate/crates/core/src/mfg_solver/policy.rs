//! Deterministic observation-feedback policies.
//!
//! Because the policy is deterministic, the action history along a branch
//! is a function of the observations, so a policy is a trie keyed by
//! `y(0), y(1), ..., y(t)`. Histories outside the trie (zero probability
//! under the flow the policy was computed for) map to `fallback`.

use crate::belief_engine::BeliefTree;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
struct PolicyNode {
    stage: usize,
    action: usize,
    /// Per observation; empty at the last decision stage.
    children: Vec<Option<u32>>,
}

/// Position of an agent in a [`PolicyTree`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cursor {
    Node(u32),
    Off,
}

#[derive(Debug, Clone)]
pub struct PolicyTree {
    n_obs: usize,
    /// `T`: actions are taken at stages `0..=T`.
    last_stage: usize,
    nodes: Vec<PolicyNode>,
    roots: Vec<Option<u32>>,
    fallback: usize,
}

/// Two policies are equal when they store the same decisions, whatever the
/// order their nodes were built in.
impl PartialEq for PolicyTree {
    fn eq(&self, other: &Self) -> bool {
        self.n_obs == other.n_obs
            && self.last_stage == other.last_stage
            && self.fallback == other.fallback
            && self.entries() == other.entries()
    }
}

impl Eq for PolicyTree {}

/// One decision of a policy: the observations seen, the actions the policy
/// took before, and the action it takes now.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyEntry {
    pub observations: Vec<usize>,
    pub past_actions: Vec<usize>,
    pub action: usize,
}

impl PolicyTree {
    fn empty(n_obs: usize, last_stage: usize, fallback: usize) -> Self {
        PolicyTree {
            n_obs,
            last_stage,
            nodes: Vec::new(),
            roots: vec![None; n_obs],
            fallback,
        }
    }

    fn push(&mut self, stage: usize, action: usize) -> u32 {
        let children = if stage < self.last_stage {
            vec![None; self.n_obs]
        } else {
            Vec::new()
        };
        self.nodes.push(PolicyNode {
            stage,
            action,
            children,
        });
        (self.nodes.len() - 1) as u32
    }

    /// The same action after every history.
    pub fn constant(n_obs: usize, last_stage: usize, action: usize) -> Self {
        Self::empty(n_obs, last_stage, action)
    }

    /// Defines the policy on every observation history of length `1..=T+1`.
    pub fn from_fn(n_obs: usize, last_stage: usize, fallback: usize, mut f: impl FnMut(&[usize]) -> usize) -> Self {
        let mut p = Self::empty(n_obs, last_stage, fallback);
        let mut frontier: Vec<(u32, Vec<usize>)> = Vec::new();
        for y in 0..n_obs {
            let ys = vec![y];
            let id = p.push(0, f(&ys));
            p.roots[y] = Some(id);
            frontier.push((id, ys));
        }
        for t in 1..=last_stage {
            let mut next = Vec::with_capacity(frontier.len() * n_obs);
            for (parent, ys) in frontier {
                for y in 0..n_obs {
                    let mut h = ys.clone();
                    h.push(y);
                    let id = p.push(t, f(&h));
                    p.nodes[parent as usize].children[y] = Some(id);
                    next.push((id, h));
                }
            }
            frontier = next;
        }
        p
    }

    /// Walks the belief tree from its roots, asking `choose` for the action at
    /// each node reached under the policy being built.
    pub fn from_tree(tree: &BeliefTree, n_obs: usize, fallback: usize, mut choose: impl FnMut(usize) -> usize) -> Self {
        let last_stage = tree.horizon() - 1;
        let mut p = Self::empty(n_obs, last_stage, fallback);
        let mut stack: Vec<(usize, u32)> = Vec::new();
        for root in &tree.roots {
            let a = choose(root.node);
            let id = p.push(0, a);
            p.roots[root.obs] = Some(id);
            stack.push((root.node, id));
        }
        while let Some((node, pid)) = stack.pop() {
            let stage = tree.stage_of(node);
            if stage >= last_stage {
                continue;
            }
            let a = p.nodes[pid as usize].action;
            for b in &tree.nodes[node].children[a] {
                let ca = choose(b.child);
                let cid = p.push(stage + 1, ca);
                p.nodes[pid as usize].children[b.obs] = Some(cid);
                stack.push((b.child, cid));
            }
        }
        p
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn last_stage(&self) -> usize {
        self.last_stage
    }

    pub fn fallback(&self) -> usize {
        self.fallback
    }

    pub fn start(&self, y0: usize) -> Cursor {
        match self.roots.get(y0).copied().flatten() {
            Some(id) => Cursor::Node(id),
            None => Cursor::Off,
        }
    }

    pub fn action(&self, c: Cursor) -> usize {
        match c {
            Cursor::Node(id) => self.nodes[id as usize].action,
            Cursor::Off => self.fallback,
        }
    }

    pub fn advance(&self, c: Cursor, y: usize) -> Cursor {
        match c {
            Cursor::Node(id) => match self.nodes[id as usize].children.get(y).copied().flatten() {
                Some(child) => Cursor::Node(child),
                None => Cursor::Off,
            },
            Cursor::Off => Cursor::Off,
        }
    }

    /// Action after observing `ys = (y(0), ..., y(t))`.
    pub fn action_for(&self, ys: &[usize]) -> usize {
        let mut c = self.start(ys[0]);
        for &y in &ys[1..] {
            c = self.advance(c, y);
        }
        self.action(c)
    }

    /// Every explicitly stored decision, in depth-first observation order.
    pub fn entries(&self) -> Vec<PolicyEntry> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack: Vec<(u32, Vec<usize>, Vec<usize>)> = self
            .roots
            .iter()
            .enumerate()
            .rev()
            .filter_map(|(y, r)| r.map(|id| (id, vec![y], Vec::new())))
            .collect();
        while let Some((id, ys, acts)) = stack.pop() {
            let node = &self.nodes[id as usize];
            out.push(PolicyEntry {
                observations: ys.clone(),
                past_actions: acts.clone(),
                action: node.action,
            });
            for (y, child) in node.children.iter().enumerate().rev() {
                if let Some(c) = child {
                    let mut ys2 = ys.clone();
                    ys2.push(y);
                    let mut a2 = acts.clone();
                    a2.push(node.action);
                    stack.push((*c, ys2, a2));
                }
            }
        }
        out
    }

    /// Rebuilds a policy from its decisions. Past actions in each entry must
    /// agree with the actions stored for its prefixes.
    pub fn from_entries(n_obs: usize, last_stage: usize, fallback: usize, mut entries: Vec<PolicyEntry>) -> Result<Self> {
        entries.sort_by_key(|e| e.observations.len());
        let mut p = Self::empty(n_obs, last_stage, fallback);
        for e in entries {
            let t = e.observations.len().checked_sub(1).ok_or_else(|| Error::PolicyFormat("empty history".into()))?;
            if t > last_stage {
                return Err(Error::PolicyFormat(format!("history of length {} exceeds horizon", t + 1)));
            }
            if e.past_actions.len() != t {
                return Err(Error::PolicyFormat("history must alternate observations and actions".into()));
            }
            if e.observations.iter().any(|&y| y >= n_obs) {
                return Err(Error::PolicyFormat("observation out of range".into()));
            }
            if t == 0 {
                if p.roots[e.observations[0]].is_some() {
                    return Err(Error::PolicyFormat("duplicate history".into()));
                }
                let id = p.push(0, e.action);
                p.roots[e.observations[0]] = Some(id);
                continue;
            }
            let mut c = p.start(e.observations[0]);
            for k in 0..t {
                let Cursor::Node(id) = c else {
                    return Err(Error::PolicyFormat("history has no stored prefix".into()));
                };
                if p.nodes[id as usize].action != e.past_actions[k] {
                    return Err(Error::PolicyFormat("past action disagrees with stored decision".into()));
                }
                if k + 1 == t {
                    let slot = &p.nodes[id as usize].children[e.observations[t]];
                    if slot.is_some() {
                        return Err(Error::PolicyFormat("duplicate history".into()));
                    }
                    let cid = p.push(t, e.action);
                    p.nodes[id as usize].children[e.observations[t]] = Some(cid);
                } else {
                    c = p.advance(c, e.observations[k + 1]);
                }
            }
        }
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Stage of the decision a cursor points at, if stored.
    pub fn stage(&self, c: Cursor) -> Option<usize> {
        match c {
            Cursor::Node(id) => Some(self.nodes[id as usize].stage),
            Cursor::Off => None,
        }
    }
}
