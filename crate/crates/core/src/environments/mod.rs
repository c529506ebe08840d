//! Seeded generators for the synthetic, asset market and product
//! portfolio games.

pub mod asset;
pub mod ppm;
pub mod skew;
pub mod synthetic;

pub use asset::{asset_payoff, gen_asset_game, AssetGame, AssetSpec};
pub use ppm::{gen_ppm_game, ppm_payoff, PpmSpec};
pub use skew::{sample_skew_normal, MomentSkewNormal};
pub use synthetic::{
    gen_skew_matrix_game, gen_synthetic, RewardClass, SyntheticGame, SyntheticSpec,
};
