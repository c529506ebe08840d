use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use super::skew::MomentSkewNormal;
use crate::error::{invalid_config, Result};
use crate::game::StateGame;

/// Reward class of an action in the synthetic game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardClass {
    HighVariance,
    HighSkew,
    Low,
}

/// Mean, variance and skew-normal shape of one action's rewards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardProfile {
    pub class: RewardClass,
    pub mean: f64,
    pub variance: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_actions: usize,
    pub n_high_var: usize,
    pub n_high_skew: usize,
    pub mean: f64,
    pub high_var_range: (f64, f64),
    pub high_skew_set: Vec<f64>,
    pub low_var_range: (f64, f64),
    pub low_skew_range: (f64, f64),
    pub n_states: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_actions: 100,
            n_high_var: 20,
            n_high_skew: 20,
            mean: 0.0,
            high_var_range: (1.5, 3.0),
            high_skew_set: vec![-8.0, -7.0, -6.0, 6.0, 7.0, 8.0],
            low_var_range: (0.5, 1.0),
            low_skew_range: (-3.0, 3.0),
            n_states: 1,
            seed: 0,
        }
    }
}

fn check_range(field: &'static str, (lo, hi): (f64, f64), positive: bool) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(invalid_config(
            field,
            format!("range ({lo}, {hi}) is not ordered"),
        ));
    }
    if positive && lo <= 0.0 {
        return Err(invalid_config(
            field,
            format!("variances must be > 0, got {lo}"),
        ));
    }
    Ok(())
}

impl SyntheticSpec {
    /// Default spec with `n_actions` actions and class counts scaled to
    /// the same 20/20/60 split.
    pub fn scaled(n_actions: usize, seed: u64) -> Self {
        let n_special = (n_actions as f64 * 0.2).round() as usize;
        Self {
            n_actions,
            n_high_var: n_special,
            n_high_skew: n_special,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_actions == 0 {
            return Err(invalid_config("n_actions", "must be positive"));
        }
        if self.n_states == 0 {
            return Err(invalid_config("n_states", "must be positive"));
        }
        if self.n_high_var + self.n_high_skew > self.n_actions {
            return Err(invalid_config(
                "n_high_var",
                format!(
                    "{} high-variance plus {} high-skew actions exceed {} actions",
                    self.n_high_var, self.n_high_skew, self.n_actions
                ),
            ));
        }
        if !self.mean.is_finite() {
            return Err(invalid_config("mean", "must be finite"));
        }
        check_range("high_var_range", self.high_var_range, true)?;
        check_range("low_var_range", self.low_var_range, true)?;
        check_range("low_skew_range", self.low_skew_range, false)?;
        if self.n_high_skew > 0 && self.high_skew_set.is_empty() {
            return Err(invalid_config("high_skew_set", "must not be empty"));
        }
        if self.high_skew_set.iter().any(|k| !k.is_finite()) {
            return Err(invalid_config("high_skew_set", "values must be finite"));
        }
        Ok(())
    }

    /// Shuffles the actions and draws a reward profile for each.
    pub fn draw_profiles<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<RewardProfile> {
        let mut order: Vec<usize> = (0..self.n_actions).collect();
        order.shuffle(rng);
        let mut classes = vec![RewardClass::Low; self.n_actions];
        for &a in &order[..self.n_high_var] {
            classes[a] = RewardClass::HighVariance;
        }
        for &a in &order[self.n_high_var..self.n_high_var + self.n_high_skew] {
            classes[a] = RewardClass::HighSkew;
        }
        let uniform = |rng: &mut R, (lo, hi): (f64, f64)| {
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..hi)
            }
        };
        classes
            .into_iter()
            .map(|class| {
                let (variance, kappa) = match class {
                    RewardClass::HighVariance => (
                        uniform(rng, self.high_var_range),
                        uniform(rng, self.low_skew_range),
                    ),
                    RewardClass::HighSkew => {
                        let v = uniform(rng, self.low_var_range);
                        (
                            v,
                            *self.high_skew_set.choose(rng).expect("validated non-empty"),
                        )
                    }
                    RewardClass::Low => (
                        uniform(rng, self.low_var_range),
                        uniform(rng, self.low_skew_range),
                    ),
                };
                RewardProfile {
                    class,
                    mean: self.mean,
                    variance,
                    kappa,
                }
            })
            .collect()
    }
}

/// Synthetic game plus the reward profile drawn for each action.
#[derive(Debug, Clone)]
pub struct SyntheticGame {
    pub game: StateGame,
    pub profiles: Vec<RewardProfile>,
}

/// Every reward `r(i, j, s)` is an independent draw from action `i`'s
/// skew-normal profile. States are equally likely.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<SyntheticGame> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let profiles = spec.draw_profiles(&mut rng);
    let n = spec.n_actions;
    let s = spec.n_states;
    let mut rewards = Vec::with_capacity(n * n * s);
    for p in &profiles {
        let dist = MomentSkewNormal::new(p.mean, p.variance, p.kappa)?;
        rewards.extend((0..n * s).map(|_| dist.sample(&mut rng)));
    }
    let game = StateGame::new(n, s, rewards, vec![1.0 / s as f64; s])?;
    Ok(SyntheticGame { game, profiles })
}

/// `n × n` single-state game with standard skew-normal entries of shape
/// `kappa` (location 0, scale 1).
pub fn gen_skew_matrix_game(n: usize, kappa: f64, seed: u64) -> Result<StateGame> {
    if n == 0 {
        return Err(invalid_config("n_actions", "must be positive"));
    }
    let dist = rand_distr::SkewNormal::new(0.0, 1.0, kappa)
        .map_err(|e| invalid_config("kappa", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rewards = (0..n * n).map(|_| dist.sample(&mut rng)).collect();
    StateGame::new(n, 1, rewards, vec![1.0])
}
