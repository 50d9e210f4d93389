//! Best response, flow propagation and the equilibrium search.

pub mod dp;
pub mod equilibrium;
pub mod flow;
pub mod forward;
pub mod policy;
pub mod truncation;

pub use dp::{argmin, bellman_backup, evaluate_on_tree, solve_pomdp, solve_pomdp_with, PomdpSolution, SolveConfig, TieBreak};
pub use equilibrium::{find_equilibrium, EquilibriumArtifact, EquilibriumOptions};
pub use flow::{nce_residual, FlowAtom, MeasureFlow};
pub use forward::{evaluate_policy, forward_pass, propagate_flow, StateActionFlow};
pub use policy::{Cursor, PolicyEntry, PolicyTree};
pub use truncation::{choose_horizon, truncation_bound};
