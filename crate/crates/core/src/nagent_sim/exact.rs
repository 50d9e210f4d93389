//! Exhaustive expectation over joint outcomes of tiny games.

use crate::error::{Error, Result};
use crate::game_model::{counts_to_distribution, GameSpec};
use crate::mfg_solver::{Cursor, PolicyTree};

use super::{check_policy, Profile};

pub const DEFAULT_ENUMERATION_CAP: f64 = 1e7;

/// Upper bound on the number of joint trajectories.
fn trajectory_count(spec: &GameSpec, n: usize) -> f64 {
    let per_stage = (spec.n_obs() * spec.n_states()) as f64;
    (spec.n_states() as f64).powi(n as i32) * per_stage.powi((n * (spec.horizon_t + 1)) as i32)
}

/// Calls `f(combo, weight)` for every assignment of one outcome per agent
/// with positive product weight, `dists[i]` giving agent `i`'s law.
fn for_each_joint(dists: &[&[f64]], mut f: impl FnMut(&[usize], f64)) {
    let n = dists.len();
    let mut combo = vec![0usize; n];
    loop {
        let w: f64 = combo.iter().zip(dists).map(|(&k, d)| d[k]).product();
        if w > 0.0 {
            f(&combo, w);
        }
        let mut i = 0;
        loop {
            if i == n {
                return;
            }
            combo[i] += 1;
            if combo[i] < dists[i].len() {
                break;
            }
            combo[i] = 0;
            i += 1;
        }
    }
}

struct Enumerator<'a, F> {
    spec: &'a GameSpec,
    policies: Vec<&'a PolicyTree>,
    field: F,
    totals: Vec<f64>,
}

impl<F: Fn(usize, &[usize]) -> Vec<f64>> Enumerator<'_, F> {
    fn stage(&mut self, t: usize, states: &[usize], cursors: &[Cursor], acc: &[f64], prob: f64) {
        let spec = self.spec;
        let n = states.len();
        let d = (self.field)(t, states);
        let discount = spec.beta.powi(t as i32);
        let obs: Vec<&[f64]> = states.iter().map(|&s| spec.observation_kernel[s].as_slice()).collect();
        for_each_joint(&obs, |ys, py| {
            let mut next_cursors = Vec::with_capacity(n);
            let mut next_acc = Vec::with_capacity(n);
            let mut kernels = Vec::with_capacity(n);
            for i in 0..n {
                let p = self.policies[i];
                let c = if t == 0 { p.start(ys[i]) } else { p.advance(cursors[i], ys[i]) };
                let a = p.action(c);
                next_cursors.push(c);
                next_acc.push(acc[i] + discount * spec.cost_unchecked(states[i], a, &d));
                kernels.push(spec.transition_unchecked(states[i], a, &d));
            }
            let w = prob * py;
            if t == spec.horizon_t {
                for (total, c) in self.totals.iter_mut().zip(&next_acc) {
                    *total += w * (spec.lambda * c).exp();
                }
                return;
            }
            let rows: Vec<&[f64]> = kernels.iter().map(Vec::as_slice).collect();
            for_each_joint(&rows, |next, pq| self.stage(t + 1, next, &next_cursors, &next_acc, w * pq));
        });
    }
}

fn enumerate<F: Fn(usize, &[usize]) -> Vec<f64>>(spec: &GameSpec, policies: Vec<&PolicyTree>, field: F) -> Vec<f64> {
    let n = policies.len();
    let mut e = Enumerator {
        spec,
        policies,
        field,
        totals: vec![0.0; n],
    };
    let init: Vec<&[f64]> = vec![spec.kappa0.as_slice(); n];
    let cursors = vec![Cursor::Off; n];
    let acc = vec![0.0; n];
    for_each_joint(&init, |s0, p| e.stage(0, s0, &cursors, &acc, p));
    e.totals
}

/// Exact `E[exp(lambda * discounted cost)]` of every agent in the
/// `n`-agent game, with kernels evaluated at the realized empirical
/// distribution.
pub fn exact_cost_small(spec: &GameSpec, profile: Profile<'_>, n: usize) -> Result<Vec<f64>> {
    exact_cost_small_with_cap(spec, profile, n, DEFAULT_ENUMERATION_CAP)
}

pub fn exact_cost_small_with_cap(spec: &GameSpec, profile: Profile<'_>, n: usize, cap: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one agent".into()));
    }
    profile.check(spec, n)?;
    let count = trajectory_count(spec, n);
    if count > cap {
        return Err(Error::EnumerationCap { count, cap });
    }
    let ns = spec.n_states();
    let policies = (0..n).map(|i| profile.policy(i)).collect();
    Ok(enumerate(spec, policies, |_, states| {
        let mut counts = vec![0; ns];
        states.iter().for_each(|&s| counts[s] += 1);
        counts_to_distribution(&counts, states.len())
    }))
}

/// Exact cost of a single agent facing the given state marginals
/// `field[t]`, `t = 0..=T`, instead of a realized population.
pub fn exact_cost_frozen(spec: &GameSpec, policy: &PolicyTree, field: &[Vec<f64>]) -> Result<f64> {
    check_policy(spec, policy)?;
    if field.len() <= spec.horizon_t {
        return Err(Error::InvalidArgument(format!(
            "field covers {} stages, need {}",
            field.len(),
            spec.horizon_t + 1
        )));
    }
    let count = trajectory_count(spec, 1);
    if count > DEFAULT_ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            count,
            cap: DEFAULT_ENUMERATION_CAP,
        });
    }
    Ok(enumerate(spec, vec![policy], |t, _| field[t].clone())[0])
}
