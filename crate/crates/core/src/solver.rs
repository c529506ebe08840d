//! Stochastic fictitious play for Nash, risk-aware (variance) and downside
//! risk-aware (LPM) equilibria.
//!
//! Each player best responds to the opponent's running average, with the
//! risk matrix rebuilt against that average every iteration. The quadratic
//! risk term plays the role of the smooth perturbation, so the iteration
//! itself is deterministic.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, DraeError, Result};
use crate::game::{bilinear, check_floor, ensure_same_len, MixedStrategy, StateGame, DEFAULT_EPS};
use crate::qp::{best_response_from, floored_lp, QpOptions, DEFAULT_TOL};
use crate::risk::{
    covariance_matrix, min_eigenvalue, project_pd, raw_risk_matrix, symmetrize_dual,
    symmetrize_rho, symmetrize_transpose, RiskConfig, RiskMatrix, Scheme,
};

pub const DEFAULT_DRIFT_TOL: f64 = 1e-6;
pub const DEFAULT_SFP_MAX_ITER: usize = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Concept {
    Nash,
    Rae,
    Drae,
}

impl Concept {
    pub const ALL: [Concept; 3] = [Concept::Nash, Concept::Rae, Concept::Drae];

    pub fn as_str(self) -> &'static str {
        match self {
            Concept::Nash => "nash",
            Concept::Rae => "rae",
            Concept::Drae => "drae",
        }
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Concept {
    type Err = DraeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nash" => Ok(Concept::Nash),
            "rae" => Ok(Concept::Rae),
            "drae" => Ok(Concept::Drae),
            other => Err(invalid_config(
                "concept",
                format!("unknown concept `{other}` (expected nash, rae or drae)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SfpOptions {
    pub eps: f64,
    pub max_iter: usize,
    pub drift_tol: f64,
    /// Tolerance handed to each best-response QP.
    pub qp_tol: f64,
}

impl Default for SfpOptions {
    fn default() -> Self {
        Self {
            eps: DEFAULT_EPS,
            max_iter: DEFAULT_SFP_MAX_ITER,
            drift_tol: DEFAULT_DRIFT_TOL,
            qp_tol: DEFAULT_TOL,
        }
    }
}

impl SfpOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.drift_tol.is_finite() && self.drift_tol >= 0.0) {
            return Err(invalid_config("drift_tol", "must be finite and >= 0"));
        }
        if !(self.qp_tol.is_finite() && self.qp_tol > 0.0) {
            return Err(invalid_config("tol", "must be finite and > 0"));
        }
        if !self.eps.is_finite() || self.eps < 0.0 {
            return Err(invalid_config("eps", "must be finite and >= 0"));
        }
        Ok(())
    }

    fn qp(&self) -> QpOptions {
        QpOptions {
            eps: self.eps,
            tol: self.qp_tol,
            ..QpOptions::default()
        }
    }
}

/// Iteration state: running averages of both players' best responses.
#[derive(Debug, Clone, PartialEq)]
pub struct SfpState {
    pub t: usize,
    pub z_self: MixedStrategy,
    pub z_opp: MixedStrategy,
    /// Best responses emitted at step `t` (player one, player two).
    pub last_br: (MixedStrategy, MixedStrategy),
    /// ℓ₁ change of the joint average in the last step.
    pub drift: f64,
}

/// Step-by-step fictitious play driver.
pub struct Sfp<'a> {
    game: &'a StateGame,
    cfg: RiskConfig,
    concept: Concept,
    opts: SfpOptions,
    state: SfpState,
}

impl<'a> Sfp<'a> {
    pub fn new(
        game: &'a StateGame,
        cfg: &RiskConfig,
        concept: Concept,
        opts: &SfpOptions,
    ) -> Result<Self> {
        cfg.validate()?;
        opts.validate()?;
        let n = game.n_actions();
        check_floor(n, opts.eps)?;
        let uniform = MixedStrategy::uniform(n);
        Ok(Self {
            game,
            cfg: *cfg,
            concept,
            opts: *opts,
            state: SfpState {
                t: 0,
                z_self: uniform.clone(),
                z_opp: uniform.clone(),
                last_br: (uniform.clone(), uniform),
                drift: f64::INFINITY,
            },
        })
    }

    pub fn state(&self) -> &SfpState {
        &self.state
    }

    /// One round: both players best respond to the other's average, then
    /// the averages absorb the new responses with weight `1/t`.
    pub fn step(&mut self) -> Result<&SfpState> {
        let z1 = &self.state.z_self;
        let z2 = &self.state.z_opp;
        let warm = (&self.state.last_br.0, &self.state.last_br.1);
        let br1 = best_response(
            self.game,
            &self.cfg,
            self.concept,
            z2,
            &self.opts,
            Some(warm.0),
        )?;
        // Identical averages in a symmetric game give identical responses.
        let br2 = if z1.probs() == z2.probs() && warm.0.probs() == warm.1.probs() {
            br1.clone()
        } else {
            best_response(
                self.game,
                &self.cfg,
                self.concept,
                z1,
                &self.opts,
                Some(warm.1),
            )?
        };

        let t = self.state.t + 1;
        let weight = 1.0 / t as f64;
        let (n1, d1) = running_mean(z1, &br1, weight);
        let (n2, d2) = running_mean(z2, &br2, weight);
        self.state = SfpState {
            t,
            z_self: n1,
            z_opp: n2,
            last_br: (br1, br2),
            drift: d1 + d2,
        };
        Ok(&self.state)
    }

    /// Iterates until the drift falls to `drift_tol` or `max_iter` rounds.
    pub fn run(mut self) -> Result<EquilibriumProfile> {
        let mut converged = false;
        while self.state.t < self.opts.max_iter {
            let drift = self.step()?.drift;
            if drift <= self.opts.drift_tol {
                converged = true;
                break;
            }
        }
        if !converged {
            log::warn!(
                "{} fictitious play stopped at {} iterations (drift {:e})",
                self.concept,
                self.state.t,
                self.state.drift
            );
        }
        let SfpState {
            t, z_self, z_opp, ..
        } = self.state;
        build_profile(
            self.game,
            &self.cfg,
            self.concept,
            z_self,
            z_opp,
            t,
            converged,
        )
    }
}

fn running_mean(z: &MixedStrategy, br: &MixedStrategy, weight: f64) -> (MixedStrategy, f64) {
    let mut drift = 0.0;
    let probs: Vec<f64> = z
        .probs()
        .iter()
        .zip(br.probs())
        .map(|(&a, &b)| {
            let next = a + (b - a) * weight;
            drift += (next - a).abs();
            next
        })
        .collect();
    (
        MixedStrategy::from_raw(probs, z.eps_floor().min(br.eps_floor())),
        drift,
    )
}

/// Risk matrix a player faces against `varsigma`, or `None` when the
/// concept reduces to the linear (Nash) best response. That happens for
/// Nash, for γ = 0, and when the risk is identically zero before the PD
/// jitter, as in games without reward spread.
pub fn concept_risk_matrix(
    game: &StateGame,
    cfg: &RiskConfig,
    concept: Concept,
    varsigma: &MixedStrategy,
) -> Result<Option<RiskMatrix>> {
    let rewards = game.rewards();
    if cfg.gamma == 0.0 || rewards.iter().all(|&r| r == rewards[0]) {
        return Ok(None);
    }
    let is_zero = |m: &RiskMatrix| m.values().iter().all(|&v| v == 0.0);
    match concept {
        Concept::Nash => Ok(None),
        Concept::Rae => {
            let cov = covariance_matrix(game, varsigma)?;
            if is_zero(&cov) {
                return Ok(None);
            }
            project_pd(&cov, cfg.pd_jitter).map(Some)
        }
        Concept::Drae => {
            let raw = raw_risk_matrix(game, varsigma, cfg)?;
            if is_zero(&raw) {
                return Ok(None);
            }
            let m = match cfg.scheme {
                Scheme::Transpose => symmetrize_transpose(&raw, cfg.pd_jitter)?,
                Scheme::Rho => {
                    project_pd(&symmetrize_rho(&raw, game, varsigma, cfg)?, cfg.pd_jitter)?
                }
                Scheme::Dual => project_pd(&symmetrize_dual(game, varsigma, cfg)?, cfg.pd_jitter)?,
            };
            Ok(Some(m))
        }
    }
}

/// Best response of the row player to `varsigma` under `concept`.
pub fn best_response(
    game: &StateGame,
    cfg: &RiskConfig,
    concept: Concept,
    varsigma: &MixedStrategy,
    opts: &SfpOptions,
    warm_start: Option<&MixedStrategy>,
) -> Result<MixedStrategy> {
    ensure_same_len(game.n_actions(), varsigma.len(), "varsigma")?;
    let mean = game.mean_reward_matrix();
    match concept_risk_matrix(game, cfg, concept, varsigma)? {
        None => {
            let g: Vec<f64> = (mean * varsigma.to_vector()).iter().copied().collect();
            Ok(MixedStrategy::from_raw(floored_lp(&g, opts.eps), opts.eps))
        }
        Some(risk) => {
            let sol = best_response_from(
                mean,
                varsigma,
                &risk,
                cfg.gamma,
                &opts.qp(),
                warm_start.map(MixedStrategy::probs),
            )?;
            if !sol.converged {
                log::debug!(
                    "best response QP stopped with KKT residual {:e}",
                    sol.kkt_residual
                );
            }
            Ok(sol.strategy)
        }
    }
}

/// Solves for an equilibrium profile with fictitious play.
pub fn sfp_solve(
    game: &StateGame,
    cfg: &RiskConfig,
    concept: Concept,
    opts: &SfpOptions,
) -> Result<EquilibriumProfile> {
    Sfp::new(game, cfg, concept, opts)?.run()
}

/// Equilibrium strategies with their scores and solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumProfile {
    pub concept: Concept,
    pub gamma: f64,
    pub tau: f64,
    pub degree: f64,
    pub scheme: Scheme,
    #[serde(serialize_with = "probs_only")]
    pub strategy_p1: MixedStrategy,
    #[serde(serialize_with = "probs_only")]
    pub strategy_p2: MixedStrategy,
    pub er: f64,
    pub variance: f64,
    pub lpm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn probs_only<S: serde::Serializer>(
    s: &MixedStrategy,
    ser: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.probs().serialize(ser)
}

impl EquilibriumProfile {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save_json(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()? + "\n")?;
        Ok(())
    }
}

/// Expected reward, variance and LPM of `sigma` against `varsigma`.
///
/// Variance uses the unjittered covariance matrix and LPM the raw LPM
/// matrix, so every concept is scored on the same two measures.
pub fn score(
    game: &StateGame,
    cfg: &RiskConfig,
    sigma: &MixedStrategy,
    varsigma: &MixedStrategy,
) -> Result<(f64, f64, f64)> {
    let er = crate::game::expected_reward(sigma, varsigma, game)?;
    let cov = covariance_matrix(game, varsigma)?;
    let raw = raw_risk_matrix(game, varsigma, cfg)?;
    let variance = bilinear(cov.values(), sigma.probs(), sigma.probs());
    let lpm = bilinear(raw.values(), sigma.probs(), sigma.probs());
    Ok((er, variance, lpm))
}

fn build_profile(
    game: &StateGame,
    cfg: &RiskConfig,
    concept: Concept,
    z1: MixedStrategy,
    z2: MixedStrategy,
    iterations: usize,
    converged: bool,
) -> Result<EquilibriumProfile> {
    let (er, variance, lpm) = score(game, cfg, &z1, &z2)?;
    Ok(EquilibriumProfile {
        concept,
        gamma: cfg.gamma,
        tau: cfg.tau,
        degree: cfg.degree,
        scheme: cfg.scheme,
        strategy_p1: z1,
        strategy_p2: z2,
        er,
        variance,
        lpm,
        iterations,
        converged,
    })
}

/// Outcome of the two sufficient conditions for a unique, fully mixed
/// perturbed best response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Permissibility {
    pub min_eigenvalue: f64,
    /// Risk matrix is positive definite with eigenvalues at least `delta`.
    pub strictly_concave: bool,
    /// Every action keeps positive probability (`eps > 0`).
    pub interior: bool,
}

impl Permissibility {
    pub fn passed(&self) -> bool {
        self.strictly_concave && self.interior
    }
}

pub fn permissibility_check(risk: &RiskMatrix, delta: f64, eps: f64) -> Permissibility {
    let min = min_eigenvalue(risk.values());
    Permissibility {
        min_eigenvalue: min,
        strictly_concave: min > 0.0 && min >= delta - 1e-10,
        interior: eps > 0.0,
    }
}

/// `‖σ_p − σ_q‖₂ / √2` between the player-one strategies.
pub fn strategy_distance(p: &EquilibriumProfile, q: &EquilibriumProfile) -> Result<f64> {
    distance(&p.strategy_p1, &q.strategy_p1)
}

pub fn distance(a: &MixedStrategy, b: &MixedStrategy) -> Result<f64> {
    ensure_same_len(a.len(), b.len(), "strategy")?;
    let sq: f64 = a
        .probs()
        .iter()
        .zip(b.probs())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sq.sqrt() / std::f64::consts::SQRT_2)
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
