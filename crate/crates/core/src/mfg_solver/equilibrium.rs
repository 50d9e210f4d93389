//! Damped fixed-point iteration on measure flows.

use crate::belief_engine::TreeOptions;
use crate::error::{Error, Result};
use crate::game_model::GameSpec;
use crate::risk_augmentation::{AugmentedGame, DEFAULT_LEVEL_CAP};

use super::dp::{solve_pomdp_with, PomdpSolution, SolveConfig, TieBreak};
use super::flow::{nce_residual, MeasureFlow};
use super::forward::{evaluate_policy, propagate_flow};
use super::policy::PolicyTree;

#[derive(Debug, Clone, Copy)]
pub struct EquilibriumOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Weight of the new image in each damped step, in `(0, 1]`.
    pub damping: f64,
    pub level_cap: usize,
    pub tree: TreeOptions,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        EquilibriumOptions {
            tol: 1e-10,
            max_iter: 200,
            damping: 0.5,
            level_cap: DEFAULT_LEVEL_CAP,
            tree: TreeOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EquilibriumArtifact {
    pub policy: PolicyTree,
    /// The flow the policy is optimal against.
    pub flow: MeasureFlow,
    /// `J_{*,0}` against `flow`.
    pub value: f64,
    pub solution: PomdpSolution,
    pub augmented: AugmentedGame,
    /// Distance between `flow` and the flow generated by `policy`.
    pub nce_residual: f64,
    /// Forward evaluation of `policy` minus the Bellman value.
    pub optimality_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Period of an exact cycle of the iteration, if one was detected.
    pub cycle: Option<usize>,
}

/// One application of best response followed by flow propagation.
struct Image {
    augmented: AugmentedGame,
    solution: PomdpSolution,
    flow: MeasureFlow,
}

fn image(spec: &GameSpec, mu: &MeasureFlow, opts: &EquilibriumOptions) -> Result<Image> {
    let augmented = AugmentedGame::build_with_cap(spec, mu.field_model(spec.n_states()), opts.level_cap)?;
    let solution = solve_pomdp_with(
        &augmented,
        SolveConfig {
            tie: TieBreak::Lowest,
            tree: opts.tree,
        },
    )?;
    let flow = propagate_flow(&augmented, &solution.policy);
    Ok(Image {
        augmented,
        solution,
        flow,
    })
}

/// Iterates `mu <- (1 - damping) mu + damping Lambda(Psi(mu))` from the image
/// of the static flow `kappa0 (x) delta_0`, stopping once the image of the
/// current iterate is within `tol` of it. Returns the best iterate seen when
/// the iteration does not converge.
pub fn find_equilibrium(spec: &GameSpec, opts: &EquilibriumOptions) -> Result<EquilibriumArtifact> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::InvalidArgument(format!("damping must lie in (0, 1], got {}", opts.damping)));
    }
    let mut mu = image(spec, &MeasureFlow::initial(spec), opts)?.flow;
    let mut history: Vec<MeasureFlow> = Vec::new();
    let mut best: Option<(f64, MeasureFlow, Image)> = None;
    let mut iterations = 0;
    let mut converged = false;
    let mut cycle = None;

    while iterations < opts.max_iter {
        let img = image(spec, &mu, opts)?;
        let r = nce_residual(&img.flow, &mu);
        iterations += 1;
        let next = mu.mix(&img.flow, opts.damping);
        let improved = best.as_ref().is_none_or(|b| r < b.0);
        if improved {
            best = Some((r, mu.clone(), img));
        }
        if r < opts.tol {
            converged = true;
            break;
        }
        if let Some(j) = history.iter().position(|old| nce_residual(old, &next) == 0.0) {
            cycle = Some(history.len() + 1 - j);
            break;
        }
        history.push(std::mem::replace(&mut mu, next));
    }

    let (residual, flow, img) = match best {
        Some(b) => b,
        None => {
            let img = image(spec, &mu, opts)?;
            (nce_residual(&img.flow, &mu), mu, img)
        }
    };
    let forward = evaluate_policy(&img.augmented, &img.solution.policy);
    Ok(EquilibriumArtifact {
        policy: img.solution.policy.clone(),
        value: img.solution.value,
        optimality_gap: (forward - img.solution.value).abs(),
        flow,
        solution: img.solution,
        augmented: img.augmented,
        nce_residual: residual,
        iterations,
        converged,
        cycle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn toy_a_equilibrium() {
        let eq = find_equilibrium(&fixtures::toy_a(), &EquilibriumOptions::default()).unwrap();
        assert!(eq.converged);
        assert!(eq.nce_residual < 1e-12);
        assert_eq!(eq.value, 1.0);
        assert!(eq.policy.entries().iter().all(|e| e.action == 0));
        for stage in &eq.flow.stages {
            assert_eq!(stage.len(), 1);
            assert_eq!((stage[0].state, stage[0].level), (0, 0.0));
        }
    }

    #[test]
    fn decoupled_game_converges_at_once() {
        let eq = find_equilibrium(&fixtures::lln(), &EquilibriumOptions::default()).unwrap();
        assert!(eq.converged);
        assert_eq!(eq.iterations, 1);
        assert_eq!(eq.nce_residual, 0.0);
    }

    #[test]
    fn zero_iterations_is_not_converged() {
        let opts = EquilibriumOptions {
            max_iter: 0,
            ..Default::default()
        };
        let eq = find_equilibrium(&fixtures::toy_a(), &opts).unwrap();
        assert!(!eq.converged);
        assert_eq!(eq.iterations, 0);
    }

    #[test]
    fn damping_does_not_move_the_fixed_point() {
        let spec = fixtures::toy_b();
        let half = find_equilibrium(&spec, &EquilibriumOptions::default()).unwrap();
        let full = find_equilibrium(
            &spec,
            &EquilibriumOptions {
                damping: 1.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(half.converged && full.converged);
        assert!(nce_residual(&half.flow, &full.flow) < 1e-9);
        assert!((half.value - full.value).abs() < 1e-9);
        assert_eq!(half.policy, full.policy);
    }

    #[test]
    fn rejects_bad_options() {
        let spec = fixtures::toy_a();
        for opts in [
            EquilibriumOptions {
                tol: 0.0,
                ..Default::default()
            },
            EquilibriumOptions {
                damping: 1.5,
                ..Default::default()
            },
        ] {
            assert!(find_equilibrium(&spec, &opts).is_err());
        }
    }
}
