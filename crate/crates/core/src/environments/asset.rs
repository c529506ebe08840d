use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use super::skew::MomentSkewNormal;
use super::synthetic::{RewardProfile, SyntheticSpec};
use crate::error::{invalid_config, Result};
use crate::game::StateGame;

/// Name of the low-discrepancy generator used for portfolio weights.
pub const WEIGHT_SEQUENCE: &str = "sobol (Owen-scrambled, sobol_burley)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssetSpec {
    pub n_portfolios: usize,
    pub n_assets: usize,
    pub n_states: usize,
    pub wealth: (f64, f64),
    /// Mean asset return in every state.
    pub return_mean: f64,
    /// Multiplier on the deviation of each return draw from its mean.
    pub return_scale: f64,
    pub seed: u64,
}

impl Default for AssetSpec {
    fn default() -> Self {
        Self {
            n_portfolios: 100,
            n_assets: 10,
            n_states: 5,
            wealth: (0.5, 0.5),
            return_mean: 0.0,
            return_scale: 1.0,
            seed: 0,
        }
    }
}

impl AssetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_portfolios == 0 {
            return Err(invalid_config("n_portfolios", "must be positive"));
        }
        if self.n_assets == 0 || self.n_assets > sobol_burley::NUM_DIMENSIONS as usize + 1 {
            return Err(invalid_config(
                "n_assets",
                format!("must be in 1..={}", sobol_burley::NUM_DIMENSIONS + 1),
            ));
        }
        if self.n_portfolios > u32::MAX as usize {
            return Err(invalid_config("n_portfolios", "too many portfolios"));
        }
        if self.n_states == 0 {
            return Err(invalid_config("n_states", "must be positive"));
        }
        let (a, b) = self.wealth;
        if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
            return Err(invalid_config(
                "wealth",
                "both investors need positive wealth",
            ));
        }
        if !(self.return_mean.is_finite()
            && self.return_scale.is_finite()
            && self.return_scale >= 0.0)
        {
            return Err(invalid_config("return_scale", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Portfolio weights from scrambled Sobol points, mapped to the simplex by
/// the spacings of the sorted coordinates.
pub fn sobol_portfolios(n_portfolios: usize, n_assets: usize, seed: u64) -> Vec<Vec<f64>> {
    let scramble = (seed ^ (seed >> 32)) as u32;
    (0..n_portfolios as u32)
        .map(|index| {
            let mut cuts: Vec<f64> = (0..n_assets as u32 - 1)
                .map(|dim| f64::from(sobol_burley::sample(index, dim, scramble)))
                .collect();
            cuts.sort_unstable_by(f64::total_cmp);
            let mut w = Vec::with_capacity(n_assets);
            let mut prev = 0.0;
            for c in cuts {
                w.push(c - prev);
                prev = c;
            }
            w.push(1.0 - prev);
            w
        })
        .collect()
}

/// Share of each asset that investor `i` receives: `p_i·w_i / price`, or
/// zero for assets nobody buys.
pub fn allocations(p_i: &[f64], p_j: &[f64], wealth: (f64, f64)) -> Vec<f64> {
    p_i.iter()
        .zip(p_j)
        .map(|(&a, &b)| {
            let mine = a * wealth.0;
            let price = mine + b * wealth.1;
            if price > 0.0 {
                mine / price
            } else {
                0.0
            }
        })
        .collect()
}

/// Investor `i`'s expected payoff `Σ_m Σ_s q(s)·r_m(s)·all_i^m`, with
/// `returns` laid out assets × states.
pub fn asset_payoff(
    p_i: &[f64],
    p_j: &[f64],
    returns: &DMatrix<f64>,
    q: &[f64],
    wealth: (f64, f64),
) -> Result<f64> {
    if p_i.len() != returns.nrows() || p_j.len() != returns.nrows() || q.len() != returns.ncols() {
        return Err(invalid_config(
            "returns",
            "portfolio, return and state dimensions disagree",
        ));
    }
    if p_i.iter().chain(p_j).any(|&x| x.is_nan() || x < 0.0) {
        return Err(invalid_config("portfolio", "weights must be non-negative"));
    }
    let alloc = allocations(p_i, p_j, wealth);
    Ok((0..returns.nrows())
        .map(|m| alloc[m] * (0..q.len()).map(|s| q[s] * returns[(m, s)]).sum::<f64>())
        .sum())
}

#[derive(Debug, Clone)]
pub struct AssetGame {
    pub game: StateGame,
    pub portfolios: Vec<Vec<f64>>,
    /// Asset returns, assets × states.
    pub returns: DMatrix<f64>,
    pub profiles: Vec<RewardProfile>,
}

/// Asset market game with state-resolved payoffs.
pub fn gen_asset_game(spec: &AssetSpec) -> Result<AssetGame> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let portfolios = sobol_portfolios(spec.n_portfolios, spec.n_assets, spec.seed);

    let classes = SyntheticSpec {
        mean: spec.return_mean,
        ..SyntheticSpec::scaled(spec.n_assets, spec.seed)
    };
    let profiles = classes.draw_profiles(&mut rng);
    let s = spec.n_states;
    let mut returns = DMatrix::zeros(spec.n_assets, s);
    for (m, p) in profiles.iter().enumerate() {
        let dist = MomentSkewNormal::new(p.mean, p.variance, p.kappa)?;
        for st in 0..s {
            let draw = dist.sample(&mut rng);
            returns[(m, st)] = p.mean + spec.return_scale * (draw - p.mean);
        }
    }
    let raw_q: Vec<f64> = (0..s).map(|_| rng.random::<f64>()).collect();
    let total: f64 = raw_q.iter().sum();
    let q: Vec<f64> = if total > 0.0 {
        raw_q.iter().map(|x| x / total).collect()
    } else {
        vec![1.0 / s as f64; s]
    };

    let n = spec.n_portfolios;
    let mut rewards = Vec::with_capacity(n * n * s);
    for p_i in &portfolios {
        for p_j in &portfolios {
            let alloc = allocations(p_i, p_j, spec.wealth);
            for st in 0..s {
                rewards.push(
                    alloc
                        .iter()
                        .enumerate()
                        .map(|(m, a)| a * returns[(m, st)])
                        .sum(),
                );
            }
        }
    }
    let game = StateGame::new(n, s, rewards, q)?;
    Ok(AssetGame {
        game,
        portfolios,
        returns,
        profiles,
    })
}
