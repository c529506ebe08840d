//! Downside risk-aware equilibria for symmetric two-player games whose
//! rewards depend on a random state.

pub mod environments;
pub mod error;
pub mod experiments;
pub mod game;
pub mod qp;
pub mod risk;
pub mod solver;

pub use error::{DraeError, Result};
pub use game::{expected_reward, validate_strategy, MixedStrategy, StateGame};
pub use qp::{solve_best_response, solve_min_risk, QpMethod, QpOptions, QpSolution};
pub use risk::{RiskConfig, RiskMatrix, Scheme, Stage};
pub use solver::{sfp_solve, Concept, EquilibriumProfile, SfpOptions};
