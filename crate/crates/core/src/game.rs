//! State-based symmetric two-player games and mixed strategies.
//!
//! Both players index the same reward tensor: the row player's reward for
//! `(i, j, s)` is `r(a_i, a_j, s)`, and the column player's reward for the
//! same joint play is `r(a_j, a_i, s)`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{DraeError, Result};
use crate::qp::project_simplex_floor;

/// Tolerance on `sum(q) == 1` for state probabilities.
pub const STATE_PROB_TOL: f64 = 1e-12;
/// Tolerance on `sum(sigma) == 1` for mixed strategies.
pub const STRATEGY_SUM_TOL: f64 = 1e-9;
/// Default probability floor used by the best-response program.
pub const DEFAULT_EPS: f64 = 1e-4;

/// A finite game `(A, S, q, r)` with a dense reward tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGame {
    n_actions: usize,
    n_states: usize,
    /// Laid out as `(i * n_actions + j) * n_states + s`.
    rewards: Vec<f64>,
    state_probs: Vec<f64>,
    mean: DMatrix<f64>,
}

impl StateGame {
    /// Builds a game from a flat tensor in `(i, j, s)` row-major order.
    pub fn new(
        n_actions: usize,
        n_states: usize,
        rewards: Vec<f64>,
        state_probs: Vec<f64>,
    ) -> Result<Self> {
        if n_actions == 0 {
            return Err(DraeError::InvalidGame("n_actions must be positive".into()));
        }
        if n_states == 0 {
            return Err(DraeError::InvalidGame("n_states must be positive".into()));
        }
        if state_probs.len() != n_states {
            return Err(DraeError::DimensionMismatch {
                context: "state_probs",
                expected: n_states,
                found: state_probs.len(),
            });
        }
        let expected = n_actions * n_actions * n_states;
        if rewards.len() != expected {
            return Err(DraeError::DimensionMismatch {
                context: "rewards",
                expected,
                found: rewards.len(),
            });
        }
        if let Some(p) = state_probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(DraeError::InvalidGame(format!(
                "state probability {p} is negative or non-finite"
            )));
        }
        let total: f64 = state_probs.iter().sum();
        if (total - 1.0).abs() > STATE_PROB_TOL {
            return Err(DraeError::InvalidGame(format!(
                "state probabilities sum to {total}, not 1"
            )));
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(DraeError::NonFinite("rewards"));
        }

        let mut mean = DMatrix::zeros(n_actions, n_actions);
        for i in 0..n_actions {
            for j in 0..n_actions {
                let base = (i * n_actions + j) * n_states;
                mean[(i, j)] = rewards[base..base + n_states]
                    .iter()
                    .zip(&state_probs)
                    .map(|(r, q)| q * r)
                    .sum();
            }
        }

        Ok(Self {
            n_actions,
            n_states,
            rewards,
            state_probs,
            mean,
        })
    }

    /// Single-state game from a payoff matrix.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(DraeError::DimensionMismatch {
                context: "payoff matrix columns",
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let n = m.nrows();
        let rewards = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)])
            .collect();
        Self::new(n, 1, rewards, vec![1.0])
    }

    /// Builds a game from per-state payoff matrices `M(s)`.
    pub fn from_state_matrices(mats: &[DMatrix<f64>], state_probs: Vec<f64>) -> Result<Self> {
        let n_states = mats.len();
        let n = mats.first().map(|m| m.nrows()).unwrap_or(0);
        for m in mats {
            if m.nrows() != n || m.ncols() != n {
                return Err(DraeError::InvalidGame(
                    "state matrices must all be square with the same size".into(),
                ));
            }
        }
        let mut rewards = vec![0.0; n * n * n_states];
        for (s, m) in mats.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    rewards[(i * n + j) * n_states + s] = m[(i, j)];
                }
            }
        }
        Self::new(n, n_states, rewards, state_probs)
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn state_probs(&self) -> &[f64] {
        &self.state_probs
    }

    /// `r(a_i, a_j, s)`.
    #[inline]
    pub fn reward(&self, i: usize, j: usize, s: usize) -> f64 {
        self.rewards[(i * self.n_actions + j) * self.n_states + s]
    }

    /// All rewards of action `i`, laid out as `(opponent action, state)`.
    #[inline]
    pub fn action_rewards(&self, i: usize) -> &[f64] {
        let len = self.n_actions * self.n_states;
        &self.rewards[i * len..(i + 1) * len]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// The state-expected reward matrix `M̄ = Σ_s q(s) M(s)`.
    pub fn mean_reward_matrix(&self) -> &DMatrix<f64> {
        &self.mean
    }

    /// Mean entry of `M̄`: the expected reward when both players pick an
    /// action uniformly at random. Used as the default LPM threshold.
    pub fn uniform_play_value(&self) -> f64 {
        let lo = self.rewards.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self
            .rewards
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        (self.mean.sum() / (self.n_actions * self.n_actions) as f64).clamp(lo, hi)
    }

    /// Returns a copy of this game with the rewards replaced by `f(r)`.
    pub fn map_rewards(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.n_actions,
            self.n_states,
            self.rewards.iter().map(|&r| f(r)).collect(),
            self.state_probs.clone(),
        )
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: GameFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(&GameFile::from(self))?)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }
}

/// On-disk game format; rewards are indexed `[i][j][s]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameFile {
    pub n_actions: usize,
    pub n_states: usize,
    pub state_probs: Vec<f64>,
    pub rewards: Vec<Vec<Vec<f64>>>,
}

impl From<&StateGame> for GameFile {
    fn from(g: &StateGame) -> Self {
        let n = g.n_actions;
        let rewards = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..g.n_states).map(|s| g.reward(i, j, s)).collect())
                    .collect()
            })
            .collect();
        Self {
            n_actions: n,
            n_states: g.n_states,
            state_probs: g.state_probs.clone(),
            rewards,
        }
    }
}

impl TryFrom<GameFile> for StateGame {
    type Error = DraeError;

    fn try_from(f: GameFile) -> Result<Self> {
        let n = f.n_actions;
        if f.rewards.len() != n {
            return Err(DraeError::InvalidGame(format!(
                "rewards has {} rows, expected {n}",
                f.rewards.len()
            )));
        }
        let mut flat = Vec::with_capacity(n * n * f.n_states);
        for (i, row) in f.rewards.iter().enumerate() {
            if row.len() != n {
                return Err(DraeError::InvalidGame(format!(
                    "rewards[{i}] has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, cell) in row.iter().enumerate() {
                if cell.len() != f.n_states {
                    return Err(DraeError::InvalidGame(format!(
                        "rewards[{i}][{j}] has {} states, expected {}",
                        cell.len(),
                        f.n_states
                    )));
                }
                flat.extend_from_slice(cell);
            }
        }
        StateGame::new(n, f.n_states, flat, f.state_probs)
    }
}

/// A probability vector over actions with every entry at or above a floor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedStrategy {
    probs: Vec<f64>,
    eps_floor: f64,
}

impl MixedStrategy {
    /// Checks the floor and simplex constraints without repairing anything.
    pub fn new(probs: Vec<f64>, eps_floor: f64) -> Result<Self> {
        check_floor(probs.len(), eps_floor)?;
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(DraeError::NonFinite("strategy"));
        }
        if probs.iter().any(|&p| p < eps_floor - STRATEGY_SUM_TOL) {
            return Err(DraeError::InvalidConfig {
                field: "strategy",
                reason: format!("entry below floor {eps_floor}"),
            });
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > STRATEGY_SUM_TOL {
            return Err(DraeError::InvalidConfig {
                field: "strategy",
                reason: format!("entries sum to {total}"),
            });
        }
        Ok(Self { probs, eps_floor })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
            eps_floor: 0.0,
        }
    }

    /// The pure strategy on action `i`, floored at `eps`.
    pub fn pure(n: usize, i: usize, eps: f64) -> Result<Self> {
        if i >= n {
            return Err(DraeError::IndexOutOfRange { index: i, n });
        }
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        validate_strategy(&v, eps)
    }

    /// Wraps a vector the caller already knows to be feasible.
    pub(crate) fn from_raw(probs: Vec<f64>, eps_floor: f64) -> Self {
        Self { probs, eps_floor }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn eps_floor(&self) -> f64 {
        self.eps_floor
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.probs)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }
}

impl AsRef<[f64]> for MixedStrategy {
    fn as_ref(&self) -> &[f64] {
        &self.probs
    }
}

pub(crate) fn check_floor(n: usize, eps: f64) -> Result<()> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(DraeError::InvalidConfig {
            field: "eps",
            reason: format!("floor must be finite and >= 0, got {eps}"),
        });
    }
    if eps * n as f64 > 1.0 + 1e-12 {
        return Err(DraeError::InfeasibleFloor { eps, n });
    }
    Ok(())
}

/// Repairs `v` into a floored mixed strategy.
///
/// A vector that already satisfies the floor and sums to one is returned
/// unchanged. Otherwise a non-negative vector is first rescaled to sum to
/// one, and any remaining floor violation is removed by Euclidean projection
/// onto `{x >= eps, sum(x) = 1}`.
pub fn validate_strategy(v: &[f64], eps: f64) -> Result<MixedStrategy> {
    check_floor(v.len(), eps)?;
    if v.is_empty() {
        return Err(DraeError::InvalidGame("empty strategy".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(DraeError::NonFinite("strategy"));
    }
    let total: f64 = v.iter().sum();
    let above_floor = v.iter().all(|&x| x >= eps);
    if above_floor && (total - 1.0).abs() <= STRATEGY_SUM_TOL {
        return Ok(MixedStrategy::from_raw(v.to_vec(), eps));
    }

    log::debug!("renormalizing strategy (sum = {total}, floor = {eps})");
    let probs = if v.iter().all(|&x| x >= 0.0) && total > 0.0 {
        let scaled: Vec<f64> = v.iter().map(|x| x / total).collect();
        if scaled.iter().all(|&x| x >= eps) {
            scaled
        } else {
            project_simplex_floor(&scaled, eps)?
        }
    } else {
        project_simplex_floor(v, eps)?
    };
    Ok(MixedStrategy::from_raw(probs, eps))
}

fn check_len(game: &StateGame, s: &MixedStrategy, context: &'static str) -> Result<()> {
    if s.len() != game.n_actions {
        return Err(DraeError::DimensionMismatch {
            context,
            expected: game.n_actions,
            found: s.len(),
        });
    }
    Ok(())
}

/// `ER(σ, ς) = σᵀ M̄ ς`.
pub fn expected_reward(
    sigma: &MixedStrategy,
    varsigma: &MixedStrategy,
    game: &StateGame,
) -> Result<f64> {
    check_len(game, sigma, "sigma")?;
    check_len(game, varsigma, "varsigma")?;
    Ok(bilinear(
        game.mean_reward_matrix(),
        sigma.probs(),
        varsigma.probs(),
    ))
}

pub(crate) fn bilinear(m: &DMatrix<f64>, x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut total = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += m[(i, j)] * y[j];
        }
        total += x[i] * row;
    }
    total
}

pub(crate) fn ensure_same_len(a: usize, b: usize, context: &'static str) -> Result<()> {
    if a != b {
        return Err(DraeError::DimensionMismatch {
            context,
            expected: a,
            found: b,
        });
    }
    Ok(())
}
