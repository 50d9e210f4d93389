//! Random model generation shared by the integration tests.
#![allow(dead_code)]

use pomfg::GameSpec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random point of the simplex, with some exact zeros.
pub fn simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() })
            .collect();
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            return v.iter().map(|x| x / s).collect();
        }
    }
}

pub struct Shape {
    pub states: usize,
    pub actions: usize,
    pub observations: usize,
    pub horizon: usize,
    pub beta: f64,
    pub coupled: bool,
}

pub fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn random_spec(rng: &mut ChaCha8Rng, shape: &Shape) -> GameSpec {
    let (ns, na, ny) = (shape.states, shape.actions, shape.observations);
    let kernel = |rng: &mut ChaCha8Rng| -> Vec<Vec<Vec<f64>>> {
        (0..ns).map(|_| (0..na).map(|_| simplex(rng, ns)).collect()).collect()
    };
    let transition_base = kernel(rng);
    let transition_couple = shape.coupled.then(|| (0..ns).map(|_| kernel(rng)).collect());
    let cost_base: Vec<Vec<f64>> = (0..ns).map(|_| (0..na).map(|_| rng.random::<f64>()).collect()).collect();
    let cost_couple = shape.coupled.then(|| {
        (0..ns)
            .map(|_| (0..na).map(|_| (0..ns).map(|_| rng.random::<f64>() * 0.5).collect()).collect())
            .collect()
    });
    GameSpec {
        name: None,
        states: labels("s", ns),
        actions: labels("a", na),
        observations: labels("y", ny),
        transition_base,
        transition_couple,
        observation_kernel: (0..ns).map(|_| simplex(rng, ny)).collect(),
        cost_base,
        cost_couple,
        beta: shape.beta,
        lambda: rng.random_range(0.2..1.2),
        horizon_t: shape.horizon,
        kappa0: simplex(rng, ns),
    }
    .validated()
    .expect("generated model is valid")
}

/// Random small shape: every dimension in `1..=3`, horizon in `0..=3`.
pub fn random_shape(rng: &mut ChaCha8Rng) -> Shape {
    Shape {
        states: rng.random_range(1..=3),
        actions: rng.random_range(1..=3),
        observations: rng.random_range(1..=3),
        horizon: rng.random_range(0..=3),
        beta: if rng.random_bool(0.3) { 1.0 } else { rng.random_range(0.3..1.0) },
        coupled: rng.random_bool(0.7),
    }
}

/// Random state marginals for stages `0..=T+1`.
pub fn random_field(rng: &mut ChaCha8Rng, spec: &GameSpec) -> Vec<Vec<f64>> {
    (0..spec.horizon_t + 2).map(|_| simplex(rng, spec.n_states())).collect()
}

/// Number of observation histories a policy must cover.
pub fn history_count(spec: &GameSpec) -> usize {
    (1..=spec.horizon_t + 1).map(|k| spec.n_obs().pow(k as u32)).sum()
}

/// Every deterministic observation-feedback policy, as functions of the
/// history index in a fixed enumeration.
pub fn all_policies(spec: &GameSpec) -> Vec<pomfg::mfg_solver::PolicyTree> {
    let h = history_count(spec);
    let na = spec.n_actions();
    let ny = spec.n_obs();
    let total = na.pow(h as u32);
    (0..total)
        .map(|code| {
            pomfg::mfg_solver::PolicyTree::from_fn(ny, spec.horizon_t, 0, |ys| {
                // index of the history among all histories, shorter first
                let offset: usize = (1..ys.len()).map(|k| ny.pow(k as u32)).sum();
                let within = ys.iter().fold(0, |acc, &y| acc * ny + y);
                (code / na.pow((offset + within) as u32)) % na
            })
        })
        .collect()
}
