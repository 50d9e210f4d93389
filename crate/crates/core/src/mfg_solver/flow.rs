//! State-measure flows over augmented states.
//!
//! Level sets depend on the flow a game was built against, so a flow stores
//! atoms `(state, accumulated cost, mass)` rather than augmented state ids.
//! Two atoms are the same point when their states agree and their levels are
//! within [`LEVEL_TOL`].

use serde::{Deserialize, Serialize};

use crate::game_model::GameSpec;
use crate::risk_augmentation::{AugmentedGame, FieldModel, LEVEL_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowAtom {
    pub state: usize,
    pub level: f64,
    pub mass: f64,
}

/// `mu_t` for `t = 0..=T+1`, each stage sorted by `(state, level)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureFlow {
    pub stages: Vec<Vec<FlowAtom>>,
}

fn atom_order(a: &FlowAtom, b: &FlowAtom) -> std::cmp::Ordering {
    a.state.cmp(&b.state).then(a.level.total_cmp(&b.level))
}

/// Walks two sorted atom lists, pairing atoms at the same point. Unmatched
/// atoms are paired with zero mass.
fn merge_atoms(a: &[FlowAtom], b: &[FlowAtom], mut f: impl FnMut(usize, f64, f64, f64)) {
    let (mut i, mut j) = (0, 0);
    loop {
        match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => {
                if x.state == y.state && (x.level - y.level).abs() <= LEVEL_TOL {
                    f(x.state, x.level, x.mass, y.mass);
                    i += 1;
                    j += 1;
                } else if atom_order(x, y).is_lt() {
                    f(x.state, x.level, x.mass, 0.0);
                    i += 1;
                } else {
                    f(y.state, y.level, 0.0, y.mass);
                    j += 1;
                }
            }
            (Some(x), None) => {
                f(x.state, x.level, x.mass, 0.0);
                i += 1;
            }
            (None, Some(y)) => {
                f(y.state, y.level, 0.0, y.mass);
                j += 1;
            }
            (None, None) => return,
        }
    }
}

impl MeasureFlow {
    /// `kappa0 (x) delta_0` at every stage `0..=T+1`.
    pub fn initial(spec: &GameSpec) -> Self {
        let stage: Vec<FlowAtom> = spec
            .kappa0
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(s, &p)| FlowAtom {
                state: s,
                level: 0.0,
                mass: p,
            })
            .collect();
        MeasureFlow {
            stages: vec![stage; spec.horizon_t + 2],
        }
    }

    /// Sorts atoms into canonical order.
    pub fn from_stages(mut stages: Vec<Vec<FlowAtom>>) -> Self {
        stages.iter_mut().for_each(|s| s.sort_by(atom_order));
        MeasureFlow { stages }
    }

    /// Builds a flow from per-stage masses over an augmented game's state ids.
    pub fn from_augmented(aug: &AugmentedGame, masses: &[Vec<(usize, f64)>]) -> Self {
        let stages = masses
            .iter()
            .enumerate()
            .map(|(t, m)| {
                let mut atoms: Vec<FlowAtom> = m
                    .iter()
                    .filter(|e| e.1 > 0.0)
                    .map(|&(x, mass)| FlowAtom {
                        state: aug.decode(x).0,
                        level: aug.level_value(t, x),
                        mass,
                    })
                    .collect();
                atoms.sort_by(atom_order);
                atoms
            })
            .collect();
        MeasureFlow { stages }
    }

    pub fn horizon(&self) -> usize {
        self.stages.len() - 1
    }

    /// State marginal `mu_{t,1}` of every stage.
    pub fn marginals(&self, n_states: usize) -> Vec<Vec<f64>> {
        self.stages
            .iter()
            .map(|atoms| {
                let mut m = vec![0.0; n_states];
                for a in atoms {
                    m[a.state] += a.mass;
                }
                m
            })
            .collect()
    }

    pub fn field_model(&self, n_states: usize) -> FieldModel {
        FieldModel::Flow(self.marginals(n_states))
    }

    /// `(1 - theta) self + theta other`, atom-wise.
    pub fn mix(&self, other: &MeasureFlow, theta: f64) -> MeasureFlow {
        let stages = self
            .stages
            .iter()
            .zip(&other.stages)
            .map(|(a, b)| {
                let mut out = Vec::with_capacity(a.len().max(b.len()));
                merge_atoms(a, b, |state, level, ma, mb| {
                    let mass = (1.0 - theta) * ma + theta * mb;
                    if mass > 0.0 {
                        out.push(FlowAtom { state, level, mass });
                    }
                });
                out
            })
            .collect();
        MeasureFlow { stages }
    }

    pub fn stage_total(&self, t: usize) -> f64 {
        self.stages[t].iter().map(|a| a.mass).sum()
    }
}

/// `max_t ||a_t - b_t||_1` on matched atoms; unmatched atoms count in full.
pub fn nce_residual(a: &MeasureFlow, b: &MeasureFlow) -> f64 {
    let mut worst: f64 = 0.0;
    let n = a.stages.len().max(b.stages.len());
    for t in 0..n {
        let empty = Vec::new();
        let sa = a.stages.get(t).unwrap_or(&empty);
        let sb = b.stages.get(t).unwrap_or(&empty);
        let mut acc = 0.0;
        merge_atoms(sa, sb, |_, _, x, y| acc += (x - y).abs());
        worst = worst.max(acc);
    }
    worst
}
