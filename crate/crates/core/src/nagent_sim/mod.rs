//! The finite-population game: Monte Carlo simulation, exact enumeration for
//! tiny instances, and unilateral-deviation gap estimates.
//!
//! Agents act on their own observation histories and move under the kernel
//! evaluated at the realized empirical distribution of the population.

mod exact;
mod gap;
pub mod rng;

pub use exact::{exact_cost_frozen, exact_cost_small, DEFAULT_ENUMERATION_CAP};
pub use gap::{BOOTSTRAP_RESAMPLES, best_response_candidate, candidate_set, nash_gap, random_policy, GapReport, GapRow};

use crate::error::{Error, Result};
use crate::game_model::{counts_to_distribution, GameSpec};
use crate::mfg_solver::{Cursor, PolicyTree};
use crate::par::Parallelism;
use crate::simplex::{self, sample_index};

use rng::AgentStream;

/// Which policy each agent follows.
#[derive(Debug, Clone, Copy)]
pub enum Profile<'a> {
    Shared(&'a PolicyTree),
    /// Agent 0 follows `deviator`, everyone else `others`.
    Deviation {
        deviator: &'a PolicyTree,
        others: &'a PolicyTree,
    },
    PerAgent(&'a [PolicyTree]),
}

impl<'a> Profile<'a> {
    pub fn policy(&self, agent: usize) -> &'a PolicyTree {
        match *self {
            Profile::Shared(p) => p,
            Profile::Deviation { deviator, others } => {
                if agent == 0 {
                    deviator
                } else {
                    others
                }
            }
            Profile::PerAgent(ps) => &ps[agent],
        }
    }

    fn distinct(&self) -> Vec<&'a PolicyTree> {
        match *self {
            Profile::Shared(p) => vec![p],
            Profile::Deviation { deviator, others } => vec![deviator, others],
            Profile::PerAgent(ps) => ps.iter().collect(),
        }
    }

    /// Every policy must be defined on every history the game can produce.
    pub fn check(&self, spec: &GameSpec, n_agents: usize) -> Result<()> {
        if let Profile::PerAgent(ps) = self {
            if ps.len() != n_agents {
                return Err(Error::InvalidArgument(format!("{} policies for {} agents", ps.len(), n_agents)));
            }
        }
        for p in self.distinct() {
            check_policy(spec, p)?;
        }
        Ok(())
    }
}

pub(crate) fn check_policy(spec: &GameSpec, p: &PolicyTree) -> Result<()> {
    if p.n_obs() != spec.n_obs() || p.last_stage() != spec.horizon_t {
        return Err(Error::InvalidArgument(format!(
            "policy covers {} observations over stages 0..={}, model has {} over 0..={}",
            p.n_obs(),
            p.last_stage(),
            spec.n_obs(),
            spec.horizon_t
        )));
    }
    let na = spec.n_actions();
    if p.fallback() >= na || p.entries().iter().any(|e| e.action >= na) {
        return Err(Error::InvalidArgument("policy uses an action outside the model".into()));
    }
    Ok(())
}

/// Monte Carlo estimates for one population configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub n_agents: usize,
    pub episodes: usize,
    pub seed: u64,
    /// Per agent: mean of `exp(lambda * discounted cost)` over episodes.
    pub agent_mean: Vec<f64>,
    pub agent_std_err: Vec<f64>,
    /// Per episode: agent 0's realized cost.
    pub agent0_costs: Vec<f64>,
    /// Per episode: the population average of realized costs.
    pub population_costs: Vec<f64>,
    /// Per episode, per stage `0..=T+1`: the empirical state distribution.
    pub fields: Vec<Vec<Vec<f64>>>,
}

impl SimReport {
    /// Mean and standard error of the population-average cost.
    pub fn population_mean(&self) -> (f64, f64) {
        mean_and_std_err(&self.population_costs)
    }

    pub fn agent0_mean(&self) -> (f64, f64) {
        mean_and_std_err(&self.agent0_costs)
    }
}

pub(crate) fn mean_and_std_err(xs: &[f64]) -> (f64, f64) {
    let mut w = Welford::default();
    xs.iter().for_each(|&x| w.push(x));
    (w.mean, w.std_err())
}

#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn std_err(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

struct Episode {
    costs: Vec<f64>,
    fields: Vec<Vec<f64>>,
}

fn state_counts(states: &[usize], n_states: usize) -> Vec<usize> {
    let mut c = vec![0; n_states];
    for &s in states {
        c[s] += 1;
    }
    c
}

fn run_episode(spec: &GameSpec, profile: Profile<'_>, n: usize, seed: u64, episode: u64) -> Episode {
    let (ns, na) = (spec.n_states(), spec.n_actions());
    let mut streams: Vec<AgentStream> = (0..n).map(|i| AgentStream::new(seed, episode, i as u64)).collect();
    let mut states: Vec<usize> = streams
        .iter_mut()
        .map(|r| sample_index(&spec.kappa0, r.uniform()))
        .collect();
    let mut cursors = vec![Cursor::Off; n];
    let mut acc = vec![0.0; n];
    let mut fields = Vec::with_capacity(spec.horizon_t + 2);
    let mut discount = 1.0;
    for t in 0..=spec.horizon_t {
        let d = counts_to_distribution(&state_counts(&states, ns), n);
        let mut cost = vec![0.0; ns * na];
        let mut kernel: Vec<Vec<f64>> = Vec::with_capacity(ns * na);
        for s in 0..ns {
            for a in 0..na {
                cost[s * na + a] = spec.cost_unchecked(s, a, &d);
                kernel.push(spec.transition_unchecked(s, a, &d));
            }
        }
        for i in 0..n {
            let policy = profile.policy(i);
            let s = states[i];
            let y = sample_index(&spec.observation_kernel[s], streams[i].uniform());
            cursors[i] = if t == 0 { policy.start(y) } else { policy.advance(cursors[i], y) };
            let a = policy.action(cursors[i]);
            acc[i] += discount * cost[s * na + a];
            states[i] = sample_index(&kernel[s * na + a], streams[i].uniform());
        }
        fields.push(d);
        discount *= spec.beta;
    }
    fields.push(counts_to_distribution(&state_counts(&states, ns), n));
    let costs = acc.iter().map(|c| (spec.lambda * c).exp()).collect();
    Episode { costs, fields }
}

/// Episodes handed to the workers at a time; bounds memory for large
/// populations.
const CHUNK: usize = 512;

/// Runs `episodes` independent plays of the `n`-agent game. The report is a
/// function of `(seed, n, episodes, profile)` only.
pub fn simulate(
    spec: &GameSpec,
    profile: Profile<'_>,
    n: usize,
    episodes: usize,
    seed: u64,
    parallelism: Parallelism,
) -> Result<SimReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one agent".into()));
    }
    if episodes == 0 {
        return Err(Error::InvalidArgument("need at least one episode".into()));
    }
    profile.check(spec, n)?;
    let mut per_agent = vec![Welford::default(); n];
    let mut agent0_costs = Vec::with_capacity(episodes);
    let mut population_costs = Vec::with_capacity(episodes);
    let mut fields = Vec::with_capacity(episodes);
    let mut start = 0;
    while start < episodes {
        let len = CHUNK.min(episodes - start);
        let batch = parallelism.map_range(len, |k| run_episode(spec, profile, n, seed, (start + k) as u64));
        for ep in batch {
            for (w, &c) in per_agent.iter_mut().zip(&ep.costs) {
                w.push(c);
            }
            agent0_costs.push(ep.costs[0]);
            population_costs.push(ep.costs.iter().sum::<f64>() / n as f64);
            fields.push(ep.fields);
        }
        start += len;
    }
    Ok(SimReport {
        n_agents: n,
        episodes,
        seed,
        agent_mean: per_agent.iter().map(|w| w.mean).collect(),
        agent_std_err: per_agent.iter().map(|w| w.std_err()).collect(),
        agent0_costs,
        population_costs,
        fields,
    })
}

/// Per stage, the mean over episodes of `||d_t - target_t||_1`.
pub fn field_deviation(report: &SimReport, target: &[Vec<f64>]) -> Vec<f64> {
    let stages = target.len().min(report.fields.first().map_or(0, |f| f.len()));
    (0..stages)
        .map(|t| {
            let total: f64 = report
                .fields
                .iter()
                .map(|ep| simplex::l1_distance(&ep[t], &target[t]))
                .sum();
            total / report.episodes as f64
        })
        .collect()
}

/// Largest per-stage mean deviation; the scalar reported in sweeps.
pub fn meanfield_l1(report: &SimReport, target: &[Vec<f64>]) -> f64 {
    field_deviation(report, target).into_iter().fold(0.0, f64::max)
}

/// Simulates everyone following `policy` and returns the per-stage mean L1
/// distance between the empirical distribution and `target`.
pub fn meanfield_deviation(
    spec: &GameSpec,
    policy: &PolicyTree,
    target: &[Vec<f64>],
    n: usize,
    episodes: usize,
    seed: u64,
    parallelism: Parallelism,
) -> Result<Vec<f64>> {
    let report = simulate(spec, Profile::Shared(policy), n, episodes, seed, parallelism)?;
    Ok(field_deviation(&report, target))
}
