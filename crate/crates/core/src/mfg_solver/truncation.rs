//! Horizon selection for discounted games.

use crate::error::{Error, Result};
use crate::game_model::GameSpec;

/// `theta` with `|W_inf - W_T| <= theta * beta^(T+1)`, namely
/// `e^(lambda L) (e^(lambda L) - 1)` for `L = K / (1 - beta)`.
pub fn truncation_bound(spec: &GameSpec) -> Result<f64> {
    if spec.beta >= 1.0 {
        return Err(Error::UndiscountedHorizon);
    }
    let l = spec.cost_sup() / (1.0 - spec.beta);
    let e = (spec.lambda * l).exp();
    let theta = e * (spec.lambda * l).exp_m1();
    if !theta.is_finite() {
        return Err(Error::InvalidArgument(format!("truncation bound overflows (lambda L = {})", spec.lambda * l)));
    }
    Ok(theta)
}

/// Smallest `T` with `theta * beta^(T+1) < epsilon / 3`.
pub fn choose_horizon(spec: &GameSpec, epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let theta = truncation_bound(spec)?;
    let target = epsilon / 3.0;
    let mut t = 0;
    let mut tail = theta * spec.beta;
    while tail >= target {
        t += 1;
        tail *= spec.beta;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    /// Single state, both actions cost `k`.
    fn flat(k: f64, beta: f64, lambda: f64) -> GameSpec {
        let mut spec = fixtures::toy_a();
        spec.states.truncate(1);
        spec.kappa0 = vec![1.0];
        spec.transition_base = vec![vec![vec![1.0], vec![1.0]]];
        spec.observation_kernel = vec![vec![1.0, 0.0]];
        spec.cost_base = vec![vec![k, k]];
        spec.cost_couple = None;
        spec.beta = beta;
        spec.lambda = lambda;
        spec.validated().unwrap()
    }

    #[test]
    fn closed_form_example() {
        let spec = flat(1.0, 0.5, 1.0);
        let theta = truncation_bound(&spec).unwrap();
        let e2 = 2f64.exp();
        assert!((theta - e2 * (e2 - 1.0)).abs() < 1e-12);
        assert!((theta - 47.21).abs() < 5e-3);
        assert_eq!(choose_horizon(&spec, 3.0).unwrap(), 5);
    }

    #[test]
    fn costless_game_needs_no_horizon() {
        let spec = flat(0.0, 0.5, 1.0);
        assert_eq!(truncation_bound(&spec).unwrap(), 0.0);
        assert_eq!(choose_horizon(&spec, 1e-9).unwrap(), 0);
    }

    #[test]
    fn small_risk_factor_shrinks_bound() {
        let a = truncation_bound(&flat(1.0, 0.5, 1e-3)).unwrap();
        let b = truncation_bound(&flat(1.0, 0.5, 1e-6)).unwrap();
        assert!(b < a && b < 1e-5);
    }

    #[test]
    fn huge_epsilon_and_halving() {
        let spec = flat(1.0, 0.5, 1.0);
        let theta = truncation_bound(&spec).unwrap();
        assert_eq!(choose_horizon(&spec, 3.0 * theta * 0.5 * 1.01).unwrap(), 0);
        let step = (2f64.ln() / (1.0 / spec.beta).ln()).ceil() as usize;
        let mut eps = 3.0;
        for _ in 0..10 {
            let t1 = choose_horizon(&spec, eps).unwrap();
            let t2 = choose_horizon(&spec, eps / 2.0).unwrap();
            assert!(t2 >= t1 && t2 - t1 <= step);
            eps /= 2.0;
        }
    }

    #[test]
    fn undiscounted_is_rejected() {
        assert!(matches!(truncation_bound(&fixtures::toy_a()), Err(Error::UndiscountedHorizon)));
        assert!(matches!(choose_horizon(&fixtures::toy_a(), 1.0), Err(Error::UndiscountedHorizon)));
    }
}
