//! Model files shipped with the crate.

use crate::game_model::GameSpec;

pub const TOY_A_JSON: &str = include_str!("../fixtures/toy_a.json");
pub const TOY_B_JSON: &str = include_str!("../fixtures/toy_b.json");
pub const LLN_JSON: &str = include_str!("../fixtures/lln.json");

fn parse(text: &str) -> GameSpec {
    serde_json::from_str::<GameSpec>(text)
        .expect("bundled fixture parses")
        .validated()
        .expect("bundled fixture is valid")
}

/// Two states, perfect observation, deterministic moves to the chosen
/// action's index, cost `1{s = s1} + 0.5 d(s1)`, `beta = 1`, `T = 1`,
/// everyone starts in `s0`.
pub fn toy_a() -> GameSpec {
    parse(TOY_A_JSON)
}

/// TOY-A with 0.8-accurate observations, a transition coupling whose `s1`
/// vertex kernel diverts 0.2 mass to `s1`, and a uniform initial state.
pub fn toy_b() -> GameSpec {
    parse(TOY_B_JSON)
}

/// Decoupled three-state model with a nondegenerate state flow.
pub fn lln() -> GameSpec {
    parse(LLN_JSON)
}
