use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, DraeError, Result};
use crate::game::StateGame;

/// Largest product count whose portfolio enumeration is accepted.
pub const MAX_PRODUCTS: usize = 12;

/// Product portfolio game: `M` products, `L` market segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PpmSpec {
    pub n_products: usize,
    pub n_segments: usize,
    pub costs: Vec<f64>,
    pub segment_sizes: Vec<f64>,
    /// `utilities[m][k]` is product `m`'s utility in segment `k`.
    pub utilities: Vec<Vec<f64>>,
    pub mu: f64,
    /// Number of equally likely demand states; 1 keeps demand fixed.
    #[serde(default = "one")]
    pub demand_states: usize,
    /// Log-scale volatility of the segment sizes across demand states.
    #[serde(default)]
    pub demand_volatility: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl PpmSpec {
    /// Random instance: costs in [1, 3), utilities in [0, 5), segment sizes
    /// in [50, 150) and `mu = 1`.
    pub fn random(n_products: usize, n_segments: usize, seed: u64) -> Result<Self> {
        check_products(n_products)?;
        if n_segments == 0 {
            return Err(invalid_config("n_segments", "must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let costs = (0..n_products)
            .map(|_| rng.random_range(1.0..3.0))
            .collect();
        let segment_sizes = (0..n_segments)
            .map(|_| rng.random_range(50.0..150.0))
            .collect();
        let utilities = (0..n_products)
            .map(|_| {
                (0..n_segments)
                    .map(|_| rng.random_range(0.0..5.0))
                    .collect()
            })
            .collect();
        Ok(Self {
            n_products,
            n_segments,
            costs,
            segment_sizes,
            utilities,
            mu: 1.0,
            demand_states: 1,
            demand_volatility: 0.0,
            seed,
        })
    }

    pub fn n_actions(&self) -> usize {
        (1usize << self.n_products) - 1
    }

    pub fn validate(&self) -> Result<()> {
        check_products(self.n_products)?;
        if self.n_segments == 0 {
            return Err(invalid_config("n_segments", "must be positive"));
        }
        if self.costs.len() != self.n_products
            || self.costs.iter().any(|&c| !(c.is_finite() && c > 0.0))
        {
            return Err(invalid_config(
                "costs",
                "need one finite cost > 0 per product",
            ));
        }
        if self.segment_sizes.len() != self.n_segments
            || self
                .segment_sizes
                .iter()
                .any(|&q| !(q.is_finite() && q > 0.0))
        {
            return Err(invalid_config(
                "segment_sizes",
                "need one finite size > 0 per segment",
            ));
        }
        if self.utilities.len() != self.n_products
            || self
                .utilities
                .iter()
                .any(|row| row.len() != self.n_segments || row.iter().any(|u| !u.is_finite()))
        {
            return Err(invalid_config(
                "utilities",
                "need a finite products × segments table",
            ));
        }
        if !self.mu.is_finite() {
            return Err(invalid_config("mu", "must be finite"));
        }
        if self.demand_states == 0 {
            return Err(invalid_config("demand_states", "must be positive"));
        }
        if !(self.demand_volatility.is_finite() && self.demand_volatility >= 0.0) {
            return Err(invalid_config(
                "demand_volatility",
                "must be finite and >= 0",
            ));
        }
        Ok(())
    }

    /// Segment sizes per demand state. A single state uses the base sizes;
    /// otherwise each state scales them by mean-one log-normal factors.
    pub fn state_segment_sizes(&self) -> Vec<Vec<f64>> {
        if self.demand_states == 1 {
            return vec![self.segment_sizes.clone()];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed_0fde_3a2d);
        let v = self.demand_volatility;
        (0..self.demand_states)
            .map(|_| {
                self.segment_sizes
                    .iter()
                    .map(|q| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        q * (v * z - 0.5 * v * v).exp()
                    })
                    .collect()
            })
            .collect()
    }
}

fn check_products(m: usize) -> Result<()> {
    if m == 0 {
        return Err(invalid_config("n_products", "must be positive"));
    }
    if m > MAX_PRODUCTS {
        return Err(DraeError::TooManyProducts {
            requested: m,
            max: MAX_PRODUCTS,
        });
    }
    Ok(())
}

/// Products in portfolio `mask` (bit `m` set means product `m` is offered).
pub fn products(mask: usize, n_products: usize) -> impl Iterator<Item = usize> {
    (0..n_products).filter(move |m| mask >> m & 1 == 1)
}

/// Demand share of each competing product copy in segment `k`: a softmax of
/// `mu·u` over the multiset union of both portfolios, listed as
/// (product, share) with own products first.
pub fn demand_shares(own: usize, other: usize, spec: &PpmSpec, k: usize) -> Vec<(usize, f64)> {
    let m = spec.n_products;
    let copies: Vec<usize> = products(own, m).chain(products(other, m)).collect();
    let weights: Vec<f64> = copies
        .iter()
        .map(|&p| (spec.mu * spec.utilities[p][k]).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    copies
        .into_iter()
        .zip(weights)
        .map(|(p, w)| (p, w / total))
        .collect()
}

/// Payoff of portfolio `own` against `other` for the given segment sizes:
/// `Σ_k Σ_{p ∈ own} (u_pk / c_p)·share_pk·Q_k`.
pub fn ppm_payoff(own: usize, other: usize, spec: &PpmSpec, segment_sizes: &[f64]) -> Result<f64> {
    let limit = spec.n_actions();
    if own == 0 || own > limit || other > limit {
        return Err(invalid_config(
            "portfolio",
            format!("masks must lie in 1..={limit}"),
        ));
    }
    let n_own = products(own, spec.n_products).count();
    Ok((0..spec.n_segments)
        .map(|k| {
            demand_shares(own, other, spec, k)
                .into_iter()
                .take(n_own)
                .map(|(p, share)| spec.utilities[p][k] / spec.costs[p] * share * segment_sizes[k])
                .sum::<f64>()
        })
        .sum())
}

/// Game over all non-empty product subsets, ordered by ascending bitmask.
pub fn gen_ppm_game(spec: &PpmSpec) -> Result<StateGame> {
    spec.validate()?;
    let n = spec.n_actions();
    let sizes = spec.state_segment_sizes();
    let s = sizes.len();
    let mut rewards = Vec::with_capacity(n * n * s);
    for own in 1..=n {
        for other in 1..=n {
            for q in &sizes {
                rewards.push(ppm_payoff(own, other, spec, q)?);
            }
        }
    }
    StateGame::new(n, s, rewards, vec![1.0 / s as f64; s])
}
