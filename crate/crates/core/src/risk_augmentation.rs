//! Risk-to-additive state augmentation.
//!
//! The augmented state at stage `t` is `(s, c)` with `c` the discounted cost
//! accumulated over stages `0..t`. Transitions move `s` by `q(.|s,a,mu_t)`
//! and shift `c` deterministically by `beta^t m(s,a,mu_t)`. All stage costs
//! are zero except the terminal one, `exp(lambda c)` at stage `T+1`, so the
//! expected terminal cost equals the risk-sensitive cost of the original game.
//!
//! On finite spaces the reachable accumulated costs form a finite set per
//! stage, enumerated exactly here. A stage-`t` augmented state has id
//! `level_index * n_states + s`.

use crate::error::{Error, Result};
use crate::game_model::GameSpec;
use crate::simplex;

/// Levels closer than this are merged into the smallest of the group.
pub const LEVEL_TOL: f64 = 1e-12;

/// Default cap on the number of distinct levels at any one stage.
pub const DEFAULT_LEVEL_CAP: usize = 1_000_000;

/// The mean-field term fed to the kernels and costs at each stage.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldModel {
    /// A frozen state-marginal flow; entry `t` is used at stage `t`.
    Flow(Vec<Vec<f64>>),
    /// The single-agent game, where the empirical field is `delta_s`.
    SelfState,
}

impl FieldModel {
    /// The mean field seen at stage `t` by an agent in state `s`.
    pub fn at(&self, t: usize, s: usize, n_states: usize) -> std::borrow::Cow<'_, [f64]> {
        match self {
            FieldModel::Flow(m) => std::borrow::Cow::Borrowed(&m[t]),
            FieldModel::SelfState => std::borrow::Cow::Owned(simplex::dirac(n_states, s)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostLevelTable {
    /// Per stage `0..=T+1`, strictly increasing reachable accumulated costs.
    pub levels: Vec<Vec<f64>>,
    /// Upper bound on any accumulated cost.
    pub bound: f64,
}

impl CostLevelTable {
    /// Index of the level within [`LEVEL_TOL`] of `value` at stage `t`.
    pub fn find(&self, t: usize, value: f64) -> Option<usize> {
        let lv = &self.levels[t];
        let i = lv.partition_point(|&x| x < value - LEVEL_TOL);
        (i < lv.len() && (lv[i] - value).abs() <= LEVEL_TOL).then_some(i)
    }
}

fn stage_costs(spec: &GameSpec, field: &FieldModel) -> Result<Vec<Vec<Vec<f64>>>> {
    let (ns, na) = (spec.n_states(), spec.n_actions());
    if let FieldModel::Flow(m) = field {
        if m.len() < spec.horizon_t + 1 {
            return Err(Error::InvalidArgument(format!(
                "flow has {} stages, need at least {}",
                m.len(),
                spec.horizon_t + 1
            )));
        }
        if let Some(bad) = m.iter().position(|d| d.len() != ns) {
            return Err(Error::InvalidArgument(format!("flow stage {bad} has wrong length")));
        }
    }
    Ok((0..=spec.horizon_t)
        .map(|t| {
            (0..ns)
                .map(|s| {
                    let d = field.at(t, s, ns);
                    (0..na).map(|a| spec.cost_unchecked(s, a, &d)).collect()
                })
                .collect()
        })
        .collect())
}

/// Sorts and merges candidates within [`LEVEL_TOL`] of a group's smallest
/// member, which becomes the representative.
fn dedup_levels(mut cands: Vec<f64>) -> Vec<f64> {
    cands.sort_by(|a, b| a.total_cmp(b));
    let mut out: Vec<f64> = Vec::with_capacity(cands.len());
    for c in cands {
        match out.last() {
            Some(&rep) if c - rep <= LEVEL_TOL => {}
            _ => out.push(c),
        }
    }
    out
}

/// Reachable accumulated-cost levels for every stage `0..=T+1`.
pub fn enumerate_cost_levels(spec: &GameSpec, field: &FieldModel, cap: usize) -> Result<CostLevelTable> {
    let costs = stage_costs(spec, field)?;
    enumerate_from_costs(spec, &costs, cap)
}

fn enumerate_from_costs(spec: &GameSpec, costs: &[Vec<Vec<f64>>], cap: usize) -> Result<CostLevelTable> {
    let mut levels = vec![vec![0.0]];
    for (t, cost_t) in costs.iter().enumerate() {
        let disc = spec.beta.powi(t as i32);
        let mut incs: Vec<f64> = cost_t.iter().flatten().map(|m| disc * m).collect();
        incs = dedup_levels(incs);
        let prev = &levels[t];
        if prev.len().saturating_mul(incs.len()) > cap.saturating_mul(16) {
            return Err(Error::LevelCap {
                stage: t + 1,
                count: prev.len() * incs.len(),
                cap,
            });
        }
        let cands: Vec<f64> = prev
            .iter()
            .flat_map(|c| incs.iter().map(move |i| c + i))
            .collect();
        let next = dedup_levels(cands);
        if next.len() > cap {
            return Err(Error::LevelCap {
                stage: t + 1,
                count: next.len(),
                cap,
            });
        }
        levels.push(next);
    }
    Ok(CostLevelTable {
        levels,
        bound: spec.accumulated_cost_bound(),
    })
}

/// The additive-cost game built against one mean-field model.
#[derive(Debug, Clone)]
pub struct AugmentedGame {
    spec: GameSpec,
    field: FieldModel,
    levels: CostLevelTable,
    /// `[t][s][a]`, `t` in `0..=T`.
    stage_cost: Vec<Vec<Vec<f64>>>,
    /// `[t][s][a]` -> `q(.|s,a,field_t)`.
    kernel: Vec<Vec<Vec<Vec<f64>>>>,
    /// `[t][(level * n_s + s) * n_a + a]` -> level index at `t+1`.
    next_level: Vec<Vec<u32>>,
}

impl AugmentedGame {
    pub fn build(spec: &GameSpec, field: FieldModel) -> Result<Self> {
        Self::build_with_cap(spec, field, DEFAULT_LEVEL_CAP)
    }

    pub fn build_with_cap(spec: &GameSpec, field: FieldModel, cap: usize) -> Result<Self> {
        let (ns, na) = (spec.n_states(), spec.n_actions());
        let stage_cost = stage_costs(spec, &field)?;
        let levels = enumerate_from_costs(spec, &stage_cost, cap)?;
        let kernel: Vec<Vec<Vec<Vec<f64>>>> = (0..=spec.horizon_t)
            .map(|t| {
                (0..ns)
                    .map(|s| {
                        let d = field.at(t, s, ns);
                        (0..na).map(|a| spec.transition_unchecked(s, a, &d)).collect()
                    })
                    .collect()
            })
            .collect();
        let mut next_level = Vec::with_capacity(spec.horizon_t + 1);
        for t in 0..=spec.horizon_t {
            let disc = spec.beta.powi(t as i32);
            let mut map = Vec::with_capacity(levels.levels[t].len() * ns * na);
            for &c in &levels.levels[t] {
                for s in 0..ns {
                    for a in 0..na {
                        let target = c + disc * stage_cost[t][s][a];
                        let idx = levels.find(t + 1, target).ok_or_else(|| {
                            Error::Consistency(format!(
                                "no level at stage {} matches accumulated cost {target}",
                                t + 1
                            ))
                        })?;
                        map.push(idx as u32);
                    }
                }
            }
            next_level.push(map);
        }
        let game = AugmentedGame {
            spec: spec.clone(),
            field,
            levels,
            stage_cost,
            kernel,
            next_level,
        };
        game.check_rows()?;
        Ok(game)
    }

    fn check_rows(&self) -> Result<()> {
        for (t, kt) in self.kernel.iter().enumerate() {
            for (s, ks) in kt.iter().enumerate() {
                for (a, row) in ks.iter().enumerate() {
                    if !simplex::is_distribution(row, 1e-10) {
                        return Err(Error::Consistency(format!(
                            "p_{t} row for s={s}, a={a} is not a distribution"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> &GameSpec {
        &self.spec
    }

    pub fn field(&self) -> &FieldModel {
        &self.field
    }

    pub fn levels(&self) -> &CostLevelTable {
        &self.levels
    }

    /// Index of the terminal stage, `T + 1`.
    pub fn horizon(&self) -> usize {
        self.spec.horizon_t + 1
    }

    pub fn n_states_at(&self, t: usize) -> usize {
        self.levels.levels[t].len() * self.spec.n_states()
    }

    /// `(s, level_index)` of a stage-local augmented state id.
    pub fn decode(&self, id: usize) -> (usize, usize) {
        let ns = self.spec.n_states();
        (id % ns, id / ns)
    }

    pub fn encode(&self, s: usize, level: usize) -> usize {
        level * self.spec.n_states() + s
    }

    pub fn level_value(&self, t: usize, id: usize) -> f64 {
        self.levels.levels[t][self.decode(id).1]
    }

    /// `m(s, a, field_t)` as used by this game.
    pub fn stage_cost(&self, t: usize, s: usize, a: usize) -> f64 {
        self.stage_cost[t][s][a]
    }

    /// `q(.|s, a, field_t)` as used by this game.
    pub fn state_kernel(&self, t: usize, s: usize, a: usize) -> &[f64] {
        &self.kernel[t][s][a]
    }

    /// Visits the support of `p_t(.|x, a)` as `(x', probability)`.
    pub fn for_each_successor(&self, t: usize, x: usize, a: usize, mut f: impl FnMut(usize, f64)) {
        let ns = self.spec.n_states();
        let na = self.spec.n_actions();
        let (s, lvl) = self.decode(x);
        let next = self.next_level[t][(lvl * ns + s) * na + a] as usize;
        for (s2, &p) in self.kernel[t][s][a].iter().enumerate() {
            if p > 0.0 {
                f(next * ns + s2, p);
            }
        }
    }

    /// `p_t(.|x, a)` as a sparse row.
    pub fn transition_row(&self, t: usize, x: usize, a: usize) -> Vec<(usize, f64)> {
        let mut row = Vec::with_capacity(self.spec.n_states());
        self.for_each_successor(t, x, a, |x2, p| row.push((x2, p)));
        row
    }

    /// `r(y | x) = l(y | s)`.
    pub fn obs_prob(&self, x: usize, y: usize) -> f64 {
        self.spec.observation_kernel[self.decode(x).0][y]
    }

    /// Stage cost `c_t(x)`: zero before the terminal stage.
    pub fn cost(&self, t: usize, x: usize) -> f64 {
        if t <= self.spec.horizon_t {
            0.0
        } else {
            terminal_cost(self.level_value(t, x), self.spec.lambda)
        }
    }

    /// `mu_0 = kappa0 (x) delta_0` as `(id, mass)` pairs.
    pub fn initial_distribution(&self) -> Vec<(usize, f64)> {
        self.spec
            .kappa0
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(s, &p)| (self.encode(s, 0), p))
            .collect()
    }

    /// Level index reached at `t + 1` from `(s, level)` under action `a`.
    pub fn next_level_index(&self, t: usize, s: usize, level: usize, a: usize) -> usize {
        let ns = self.spec.n_states();
        let na = self.spec.n_actions();
        self.next_level[t][(level * ns + s) * na + a] as usize
    }
}

/// `exp(lambda * level)`.
pub fn terminal_cost(level: f64, lambda: f64) -> f64 {
    (lambda * level).exp()
}

/// Risk-sensitive cost of one `(s_t, a_t)` trajectory of length `T+1`,
/// computed directly and through the augmented level dynamics. The two must
/// agree within `1e-12` relative.
pub fn additive_cost_of_trajectory(aug: &AugmentedGame, trajectory: &[(usize, usize)]) -> Result<f64> {
    let spec = aug.spec();
    if trajectory.len() != spec.horizon_t + 1 {
        return Err(Error::InvalidArgument(format!(
            "trajectory has {} steps, expected {}",
            trajectory.len(),
            spec.horizon_t + 1
        )));
    }
    let ns = spec.n_states();
    let mut discounted = 0.0;
    let mut level = 0usize;
    for (t, &(s, a)) in trajectory.iter().enumerate() {
        let d = aug.field().at(t, s, ns);
        discounted += spec.beta.powi(t as i32) * spec.eval_cost(s, a, &d)?;
        level = aug.next_level_index(t, s, level, a);
    }
    let direct = terminal_cost(discounted, spec.lambda);
    let augmented = terminal_cost(aug.levels().levels[aug.horizon()][level], spec.lambda);
    if (direct - augmented).abs() > 1e-12 * direct.max(1.0) {
        return Err(Error::Consistency(format!(
            "direct cost {direct} differs from augmented cost {augmented}"
        )));
    }
    Ok(augmented)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn dirac_flow(spec: &GameSpec, s: usize) -> FieldModel {
        FieldModel::Flow(vec![simplex::dirac(spec.n_states(), s); spec.horizon_t + 2])
    }

    #[test]
    fn zero_cost_levels_stay_at_zero() {
        let mut spec = fixtures::toy_b();
        spec.cost_base = vec![vec![0.0; 2]; 2];
        spec.cost_couple = None;
        let table = enumerate_cost_levels(&spec, &FieldModel::SelfState, 100).unwrap();
        assert!(table.levels.iter().all(|l| l == &vec![0.0]));
        let aug = AugmentedGame::build(&spec, FieldModel::SelfState).unwrap();
        for x in 0..2 {
            for a in 0..2 {
                let row = aug.transition_row(0, x, a);
                let q = spec.eval_transition(x, a, &simplex::dirac(2, x)).unwrap();
                for (x2, p) in row {
                    assert_eq!(aug.decode(x2).1, 0);
                    assert_eq!(p, q[aug.decode(x2).0]);
                }
            }
        }
    }

    #[test]
    fn toy_a_levels_under_s0_flow() {
        let spec = fixtures::toy_a();
        let table = enumerate_cost_levels(&spec, &dirac_flow(&spec, 0), 100).unwrap();
        assert_eq!(table.levels[0], vec![0.0]);
        assert_eq!(table.levels[1], vec![0.0, 1.0]);
        assert_eq!(table.levels[2], vec![0.0, 1.0, 2.0]);
        assert_eq!(table.bound, 1.5 * 2.0);
    }

    #[test]
    fn geometric_levels() {
        let mut spec = fixtures::toy_a();
        spec.cost_base = vec![vec![1.0; 2]; 2];
        spec.cost_couple = None;
        spec.beta = 0.5;
        spec.horizon_t = 3;
        let table = enumerate_cost_levels(&spec, &FieldModel::SelfState, 100).unwrap();
        assert_eq!(table.levels, vec![vec![0.0], vec![1.0], vec![1.5], vec![1.75], vec![1.875]]);
    }

    #[test]
    fn level_cap_reports_size() {
        let mut spec = fixtures::toy_a();
        spec.cost_base = vec![vec![1.0, 2.0], vec![3.0, 7.0]];
        spec.cost_couple = None;
        spec.beta = 0.37;
        spec.horizon_t = 6;
        match enumerate_cost_levels(&spec, &FieldModel::SelfState, 50) {
            Err(Error::LevelCap { stage, count, cap }) => {
                assert_eq!(cap, 50);
                assert!(count > 50);
                assert!(stage >= 3);
            }
            other => panic!("expected level cap error, got {other:?}"),
        }
    }

    #[test]
    fn toy_a_stage0_kernel() {
        let spec = fixtures::toy_a();
        let aug = AugmentedGame::build(&spec, dirac_flow(&spec, 0)).unwrap();
        let x0 = aug.encode(0, 0);
        assert_eq!(aug.transition_row(0, x0, 1), vec![(aug.encode(1, 0), 1.0)]);
        // from s1 at stage 0, the cost 1 moves the level to 1.0
        let x1 = aug.encode(1, 0);
        let row = aug.transition_row(0, x1, 0);
        assert_eq!(row.len(), 1);
        assert_eq!(aug.decode(row[0].0), (0, 1));
        assert_eq!(aug.levels().levels[1][1], 1.0);
    }

    #[test]
    fn rows_are_distributions_with_small_support() {
        let spec = fixtures::toy_b();
        let aug = AugmentedGame::build(&spec, FieldModel::Flow(vec![vec![0.3, 0.7]; 3])).unwrap();
        for t in 0..=spec.horizon_t {
            for x in 0..aug.n_states_at(t) {
                for a in 0..2 {
                    let row = aug.transition_row(t, x, a);
                    assert!(row.len() <= spec.n_states());
                    let sum: f64 = row.iter().map(|r| r.1).sum();
                    assert!((sum - 1.0).abs() < 1e-12);
                }
            }
        }
        for t in 0..=aug.horizon() {
            let lv = &aug.levels().levels[t];
            assert!(lv.windows(2).all(|w| w[0] < w[1]));
            assert!(lv.iter().all(|&c| c >= 0.0 && c <= aug.levels().bound + 1e-12));
            if t > 0 {
                assert!(lv.len() <= aug.levels().levels[t - 1].len() * 4);
            }
        }
    }

    #[test]
    fn terminal_cost_values() {
        assert_eq!(terminal_cost(0.0, 3.0), 1.0);
        assert!((terminal_cost(2f64.ln(), 1.0) - 2.0).abs() < 1e-15);
        assert!((terminal_cost(2.0, 0.5) - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn toy_a_trajectory_cost() {
        let spec = fixtures::toy_a();
        let aug = AugmentedGame::build(&spec, dirac_flow(&spec, 0)).unwrap();
        let c = additive_cost_of_trajectory(&aug, &[(0, 1), (1, 0)]).unwrap();
        assert!((c - std::f64::consts::E).abs() < 1e-15);
        assert_eq!(additive_cost_of_trajectory(&aug, &[(0, 0), (0, 0)]).unwrap(), 1.0);
        assert!(additive_cost_of_trajectory(&aug, &[(0, 0)]).is_err());
    }

    #[test]
    fn doubling_lambda_squares_cost() {
        let spec = fixtures::toy_a();
        let mut spec2 = spec.clone();
        spec2.lambda *= 2.0;
        let a1 = AugmentedGame::build(&spec, dirac_flow(&spec, 0)).unwrap();
        let a2 = AugmentedGame::build(&spec2, dirac_flow(&spec2, 0)).unwrap();
        for traj in [[(0, 1), (1, 0)], [(1, 1), (1, 1)], [(1, 0), (0, 0)]] {
            let c1 = additive_cost_of_trajectory(&a1, &traj).unwrap();
            let c2 = additive_cost_of_trajectory(&a2, &traj).unwrap();
            assert!((c2 - c1 * c1).abs() < 1e-12 * c2);
        }
    }

    /// Every state-action sequence of a small coupled game: the augmented
    /// level equals the brute-force discounted sum.
    #[test]
    fn exhaustive_trajectory_equivalence() {
        let mut spec = fixtures::toy_b();
        spec.beta = 0.7;
        spec.horizon_t = 3;
        spec.lambda = 0.9;
        let flow = FieldModel::Flow(vec![vec![0.4, 0.6], vec![0.1, 0.9], vec![0.5, 0.5], vec![0.8, 0.2]]);
        let aug = AugmentedGame::build(&spec, flow).unwrap();
        let n = 4usize.pow(4);
        for code in 0..n {
            let traj: Vec<(usize, usize)> = (0..4).map(|t| ((code >> (2 * t)) & 1, (code >> (2 * t + 1)) & 1)).collect();
            additive_cost_of_trajectory(&aug, &traj).unwrap();
        }
        let sa = AugmentedGame::build(&spec, FieldModel::SelfState).unwrap();
        for code in 0..n {
            let traj: Vec<(usize, usize)> = (0..4).map(|t| ((code >> (2 * t)) & 1, (code >> (2 * t + 1)) & 1)).collect();
            additive_cost_of_trajectory(&sa, &traj).unwrap();
        }
    }

    /// Decoupled with action-independent cost: levels are exactly the
    /// distinct partial sums over state sequences.
    #[test]
    fn decoupled_levels_match_partial_sums() {
        let mut spec = fixtures::lln();
        spec.cost_base = vec![vec![0.0, 0.0], vec![0.5, 0.5], vec![1.0, 1.0]];
        let aug = AugmentedGame::build(&spec, FieldModel::SelfState).unwrap();
        for t in 1..=aug.horizon() {
            let mut sums = Vec::new();
            for code in 0..3usize.pow(t as u32) {
                let mut c = 0.0;
                let mut rest = code;
                for k in 0..t {
                    c += spec.beta.powi(k as i32) * spec.cost_base[rest % 3][0];
                    rest /= 3;
                }
                sums.push(c);
            }
            sums.sort_by(f64::total_cmp);
            sums.dedup_by(|a, b| (*a - *b).abs() <= LEVEL_TOL);
            assert_eq!(aug.levels().levels[t].len(), sums.len(), "stage {t}");
            for (x, y) in aug.levels().levels[t].iter().zip(&sums) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}
