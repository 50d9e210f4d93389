//! Unilateral-deviation gap estimates.
//!
//! The true gap is a supremum over all observation-feedback policies; the
//! estimate here is a minimum over a finite candidate set and so bounds the
//! gap from below.

use rand::Rng;

use crate::error::{Error, Result};
use crate::game_model::GameSpec;
use crate::mfg_solver::{solve_pomdp_with, PolicyTree, SolveConfig, TieBreak};
use crate::risk_augmentation::AugmentedGame;
use crate::par::Parallelism;

use super::rng::auxiliary;
use super::{mean_and_std_err, meanfield_l1, simulate, Profile};

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Optimal policy in the game built against the equilibrium flow, breaking
/// ties toward the highest action so that it differs from the equilibrium
/// policy wherever the equilibrium choice was not strict.
pub fn best_response_candidate(frozen: &AugmentedGame) -> Result<PolicyTree> {
    let sol = solve_pomdp_with(
        frozen,
        SolveConfig {
            tie: TieBreak::Highest,
            ..Default::default()
        },
    )?;
    Ok(sol.policy)
}

/// A policy assigning an independent uniform action to every observation
/// history.
pub fn random_policy(spec: &GameSpec, rng: &mut impl Rng) -> PolicyTree {
    let na = spec.n_actions();
    PolicyTree::from_fn(spec.n_obs(), spec.horizon_t, 0, |_| rng.random_range(0..na))
}

/// The frozen-flow best response, `n_random` random policies and every
/// constant policy, with display names.
pub fn candidate_set(
    frozen: &AugmentedGame,
    n_random: usize,
    seed: u64,
) -> Result<Vec<(String, PolicyTree)>> {
    let spec = frozen.spec();
    let mut out = vec![("best_response".to_string(), best_response_candidate(frozen)?)];
    let mut rng = auxiliary(seed, 2);
    for k in 0..n_random {
        out.push((format!("random_{k}"), random_policy(spec, &mut rng)));
    }
    for (a, label) in spec.actions.iter().enumerate() {
        out.push((format!("constant_{label}"), PolicyTree::constant(spec.n_obs(), spec.horizon_t, a)));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub policy: String,
    /// Agent 0's estimated cost when it follows `policy`.
    pub mean_cost: f64,
    pub std_err: f64,
    /// For the equilibrium row, the gap estimate over all candidates; for a
    /// candidate row, the equilibrium cost minus the candidate's cost.
    pub gap: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub n_agents: usize,
    pub episodes: usize,
    pub seed: u64,
    /// The equilibrium row first, then one row per candidate.
    pub rows: Vec<GapRow>,
    pub meanfield_l1: f64,
}

impl GapReport {
    pub fn epsilon(&self) -> f64 {
        self.rows[0].gap
    }

    pub fn epsilon_ci(&self) -> (f64, f64) {
        (self.rows[0].ci_lo, self.rows[0].ci_hi)
    }
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn interval(mut xs: Vec<f64>) -> (f64, f64) {
    xs.sort_by(f64::total_cmp);
    (quantile(&xs, 0.025), quantile(&xs, 0.975))
}

/// Estimates how much agent 0 gains by deviating from `equilibrium` to each
/// candidate while the other `n - 1` agents keep `equilibrium`. All runs
/// share random numbers, and confidence intervals come from a paired
/// episode-level bootstrap.
#[allow(clippy::too_many_arguments)]
pub fn nash_gap(
    spec: &GameSpec,
    equilibrium: &PolicyTree,
    candidates: &[(String, PolicyTree)],
    target: &[Vec<f64>],
    n: usize,
    episodes: usize,
    seed: u64,
    parallelism: Parallelism,
) -> Result<GapReport> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no deviation candidates".into()));
    }
    let base = simulate(spec, Profile::Shared(equilibrium), n, episodes, seed, parallelism)?;
    let mut runs = Vec::with_capacity(candidates.len());
    for (_, c) in candidates {
        let profile = Profile::Deviation {
            deviator: c,
            others: equilibrium,
        };
        runs.push(simulate(spec, profile, n, episodes, seed, parallelism)?.agent0_costs);
    }
    let (w_star, se_star) = base.agent0_mean();
    let stats: Vec<(f64, f64)> = runs.iter().map(|r| mean_and_std_err(r)).collect();
    let best = stats.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let epsilon = (w_star - best).max(0.0);

    let mut rng = auxiliary(seed, 1);
    let mut eps_boot = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut diff_boot = vec![Vec::with_capacity(BOOTSTRAP_RESAMPLES); candidates.len()];
    let mut sums = vec![0.0; candidates.len()];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let mut star = 0.0;
        sums.iter_mut().for_each(|s| *s = 0.0);
        for _ in 0..episodes {
            let e = rng.random_range(0..episodes);
            star += base.agent0_costs[e];
            for (s, r) in sums.iter_mut().zip(&runs) {
                *s += r[e];
            }
        }
        let m_star = star / episodes as f64;
        let mut m_best = f64::INFINITY;
        for (k, s) in sums.iter().enumerate() {
            let m = s / episodes as f64;
            m_best = m_best.min(m);
            diff_boot[k].push(m_star - m);
        }
        eps_boot.push((m_star - m_best).max(0.0));
    }

    let (lo, hi) = interval(eps_boot);
    let mut rows = vec![GapRow {
        policy: "equilibrium".into(),
        mean_cost: w_star,
        std_err: se_star,
        gap: epsilon,
        ci_lo: lo,
        ci_hi: hi,
    }];
    for (((name, _), (m, se)), diffs) in candidates.iter().zip(&stats).zip(diff_boot) {
        let (lo, hi) = interval(diffs);
        rows.push(GapRow {
            policy: name.clone(),
            mean_cost: *m,
            std_err: *se,
            gap: w_star - m,
            ci_lo: lo,
            ci_hi: hi,
        });
    }
    Ok(GapReport {
        n_agents: n,
        episodes,
        seed,
        rows,
        meanfield_l1: meanfield_l1(&base, target),
    })
}
