//! Mean-field equilibria of partially observed, risk-sensitive games on
//! finite state, action and observation spaces.
//!
//! The risk-sensitive cost is made additive by carrying the accumulated
//! discounted cost in the state ([`risk_augmentation`]), the partially
//! observed problem is solved on its belief tree ([`belief_engine`],
//! [`mfg_solver`]), and the resulting policy is checked in the finite-agent
//! game by exact enumeration and Monte Carlo ([`nagent_sim`]).

pub mod belief_engine;
pub mod cli_io;
pub mod error;
pub mod fixtures;
pub mod game_model;
pub mod mfg_solver;
pub mod nagent_sim;
pub mod par;
pub mod risk_augmentation;
pub mod simplex;

pub use error::{Error, Result};
pub use game_model::{GameSpec, MeanField, ValidationReport};
pub use par::Parallelism;
