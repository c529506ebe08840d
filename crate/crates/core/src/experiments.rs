//! Parameter sweeps over the solution concepts: γ frontiers, downside-risk
//! area ratios, the skewness–distance curve and the state-count and degree
//! ablations.
//!
//! Every sweep evaluates independent grid points, optionally on a rayon
//! pool, and returns rows in a fixed order so the thread count never
//! changes the output.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environments::{gen_asset_game, gen_skew_matrix_game, AssetSpec};
use crate::error::{invalid_config, DraeError, Result};
use crate::game::StateGame;
use crate::risk::{raw_risk_matrix, RiskConfig, Scheme};
use crate::solver::{sfp_solve, strategy_distance, Concept, EquilibriumProfile, SfpOptions};

/// Header of frontier CSV files.
pub const FRONTIER_HEADER: &str =
    "concept,gamma,tau,degree,scheme,er,variance,lpm,iterations,converged,seed";

/// Degree used to score every run of a degree sweep on a common scale.
pub const REFERENCE_DEGREE: f64 = 2.0;

/// Shared settings for a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// γ, degree, scheme and jitter. `risk.tau` is used only when `tau` is
    /// set; otherwise each game's uniform-play value is the threshold.
    pub risk: RiskConfig,
    pub tau: Option<f64>,
    pub sfp: SfpOptions,
    /// Worker threads; 1 runs inline.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            risk: RiskConfig::default(),
            tau: None,
            sfp: SfpOptions::default(),
            jobs: 1,
        }
    }
}

impl ExperimentConfig {
    /// Risk configuration for `game`, resolving the threshold.
    pub fn risk_for(&self, game: &StateGame) -> RiskConfig {
        RiskConfig {
            tau: self.tau.unwrap_or_else(|| game.uniform_play_value()),
            ..self.risk
        }
    }
}

/// `n` logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) {
        return Err(invalid_config(
            "gammas",
            format!("need 0 < lo <= hi, got ({lo}, {hi})"),
        ));
    }
    if n == 0 {
        return Err(invalid_config(
            "gammas",
            "grid must have at least one point",
        ));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..n)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64))
        .collect())
}

/// Default γ grid: 16 points from 1e-2 to 1e4.
pub fn default_gamma_grid() -> Vec<f64> {
    log_grid(1e-2, 1e4, 16).expect("static grid is valid")
}

/// Maps `f` over `items` on `jobs` threads, keeping input order.
pub fn par_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| invalid_config("jobs", e.to_string()))?;
    pool.install(|| items.par_iter().map(&f).collect())
}

/// One point on an (expected return, risk) frontier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub concept: Concept,
    pub gamma: f64,
    pub tau: f64,
    pub degree: f64,
    pub scheme: Scheme,
    pub er: f64,
    pub variance: f64,
    pub lpm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
}

impl FrontierRow {
    pub fn from_profile(p: &EquilibriumProfile, seed: u64) -> Self {
        Self {
            concept: p.concept,
            gamma: p.gamma,
            tau: p.tau,
            degree: p.degree,
            scheme: p.scheme,
            er: p.er,
            variance: p.variance,
            lpm: p.lpm,
            iterations: p.iterations,
            converged: p.converged,
            seed,
        }
    }
}

/// Solves every (concept, γ) pair; rows sorted by concept then γ.
///
/// Both the variance and the LPM of each profile are reported, whatever
/// risk the concept optimised.
pub fn gamma_sweep(
    game: &StateGame,
    concepts: &[Concept],
    gammas: &[f64],
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Vec<FrontierRow>> {
    Ok(gamma_sweep_profiles(game, concepts, gammas, cfg)?
        .iter()
        .map(|p| FrontierRow::from_profile(p, seed))
        .collect())
}

/// As [`gamma_sweep`], returning the full profiles.
pub fn gamma_sweep_profiles(
    game: &StateGame,
    concepts: &[Concept],
    gammas: &[f64],
    cfg: &ExperimentConfig,
) -> Result<Vec<EquilibriumProfile>> {
    if let Some(g) = gammas.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        return Err(invalid_config(
            "gammas",
            format!("must be finite and >= 0, got {g}"),
        ));
    }
    let mut grid: Vec<(Concept, f64)> = concepts
        .iter()
        .flat_map(|&c| gammas.iter().map(move |&g| (c, g)))
        .collect();
    grid.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    grid.dedup();
    let base = cfg.risk_for(game);
    par_map(&grid, cfg.jobs, |&(concept, gamma)| {
        sfp_solve(game, &RiskConfig { gamma, ..base }, concept, &cfg.sfp)
    })
}

pub fn write_frontier_csv(rows: &[FrontierRow], path: impl AsRef<Path>) -> Result<()> {
    write_csv(rows, path)
}

/// Serialises `rows` as CSV with a header taken from the field names.
pub fn write_csv<T: Serialize>(rows: &[T], path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_frontier_csv(path: impl AsRef<Path>) -> Result<Vec<FrontierRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != FRONTIER_HEADER {
        return Err(DraeError::Frontier(format!("unexpected header `{header}`")));
    }
    r.deserialize()
        .map(|row| row.map_err(DraeError::from))
        .collect()
}

/// Frontier as (er, lpm) points sorted by er, duplicates averaged.
fn frontier_points(rows: &[FrontierRow], label: &str) -> Result<Vec<(f64, f64)>> {
    let mut pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.er, r.lpm)).collect();
    if let Some(p) = pts.iter().find(|p| !(p.0.is_finite() && p.1.is_finite())) {
        return Err(DraeError::Frontier(format!(
            "{label} frontier has a non-finite point {p:?}"
        )));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64, usize)> = Vec::new();
    for (x, y) in pts {
        match merged.last_mut() {
            Some(last) if last.0 == x => {
                last.1 += y;
                last.2 += 1;
            }
            _ => merged.push((x, y, 1)),
        }
    }
    if merged.len() < 2 {
        return Err(DraeError::Frontier(format!(
            "{label} frontier needs at least two distinct expected returns"
        )));
    }
    Ok(merged
        .into_iter()
        .map(|(x, y, k)| (x, y / k as f64))
        .collect())
}

fn interpolate(pts: &[(f64, f64)], x: f64) -> f64 {
    let k = pts.partition_point(|p| p.0 < x);
    if k == 0 {
        return pts[0].1;
    }
    if k == pts.len() {
        return pts[k - 1].1;
    }
    let (x0, y0) = pts[k - 1];
    let (x1, y1) = pts[k];
    if x1 == x {
        return y1;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Trapezoid area under the piecewise-linear curve between `lo` and `hi`.
fn area(pts: &[(f64, f64)], lo: f64, hi: f64, knots: &[f64]) -> f64 {
    let mut xs: Vec<f64> = std::iter::once(lo)
        .chain(knots.iter().copied().filter(|&x| x > lo && x < hi))
        .chain(std::iter::once(hi))
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.windows(2)
        .map(|w| 0.5 * (w[1] - w[0]) * (interpolate(pts, w[0]) + interpolate(pts, w[1])))
        .sum()
}

/// Areas under the DRAE and RAE LPM-vs-return curves over their common
/// return interval. Either area can be negative, since the reported LPM is
/// signed.
pub fn downside_areas(drae: &[FrontierRow], rae: &[FrontierRow]) -> Result<(f64, f64)> {
    let a = frontier_points(drae, "DRAE")?;
    let b = frontier_points(rae, "RAE")?;
    let lo = a[0].0.max(b[0].0);
    let hi = a[a.len() - 1].0.min(b[b.len() - 1].0);
    if hi.is_nan() || lo.is_nan() || hi <= lo {
        return Err(DraeError::Frontier(format!(
            "frontiers do not overlap: DRAE returns [{}, {}], RAE returns [{}, {}]",
            a[0].0,
            a[a.len() - 1].0,
            b[0].0,
            b[b.len() - 1].0
        )));
    }
    let knots: Vec<f64> = a.iter().chain(&b).map(|p| p.0).collect();
    Ok((area(&a, lo, hi, &knots), area(&b, lo, hi, &knots)))
}

/// Ratio of the areas from [`downside_areas`]. Values below one favour DRAE
/// when the RAE area is positive.
pub fn downside_auc_ratio(drae: &[FrontierRow], rae: &[FrontierRow]) -> Result<f64> {
    let (num, den) = downside_areas(drae, rae)?;
    if num == 0.0 && den == 0.0 {
        return Ok(1.0);
    }
    if den == 0.0 {
        return Err(DraeError::Frontier(
            "RAE frontier has zero downside area".into(),
        ));
    }
    Ok(num / den)
}

/// Distance between the RAE and DRAE equilibria of one skewed game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewRun {
    pub kappa: f64,
    pub seed: u64,
    pub distance: f64,
    pub rae_converged: bool,
    pub drae_converged: bool,
}

/// Mean and standard deviation of the distance at one skewness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewRow {
    pub kappa: f64,
    pub mean_distance: f64,
    pub std_distance: f64,
    pub n_seeds: usize,
}

/// RAE–DRAE strategy distance as the payoff skewness grows. Each seed
/// draws one game per κ from the same random stream.
pub fn skew_distance_runs(
    kappas: &[f64],
    n_actions: usize,
    seeds: &[u64],
    cfg: &ExperimentConfig,
) -> Result<Vec<SkewRun>> {
    let grid: Vec<(f64, u64)> = kappas
        .iter()
        .flat_map(|&k| seeds.iter().map(move |&s| (k, s)))
        .collect();
    par_map(&grid, cfg.jobs, |&(kappa, seed)| {
        let game = gen_skew_matrix_game(n_actions, kappa, seed)?;
        let risk = cfg.risk_for(&game);
        let rae = sfp_solve(&game, &risk, Concept::Rae, &cfg.sfp)?;
        let drae = sfp_solve(&game, &risk, Concept::Drae, &cfg.sfp)?;
        Ok(SkewRun {
            kappa,
            seed,
            distance: strategy_distance(&rae, &drae)?,
            rae_converged: rae.converged,
            drae_converged: drae.converged,
        })
    })
}

pub fn summarize_skew(kappas: &[f64], runs: &[SkewRun]) -> Vec<SkewRow> {
    kappas
        .iter()
        .map(|&kappa| {
            let d: Vec<f64> = runs
                .iter()
                .filter(|r| r.kappa == kappa)
                .map(|r| r.distance)
                .collect();
            let (mean, std) = mean_std(&d);
            SkewRow {
                kappa,
                mean_distance: mean,
                std_distance: std,
                n_seeds: d.len(),
            }
        })
        .collect()
}

pub fn skew_distance_curve(
    kappas: &[f64],
    n_actions: usize,
    seeds: &[u64],
    cfg: &ExperimentConfig,
) -> Result<Vec<SkewRow>> {
    Ok(summarize_skew(
        kappas,
        &skew_distance_runs(kappas, n_actions, seeds, cfg)?,
    ))
}

/// Population mean and standard deviation; NaN for an empty slice.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Equilibrium scores of one concept on an asset game with a given number
/// of states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRow {
    pub n_states: usize,
    pub seed: u64,
    pub concept: Concept,
    pub gamma: f64,
    pub tau: f64,
    pub er: f64,
    pub variance: f64,
    pub lpm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Regenerates the asset game for every state count and seed and solves
/// RAE and DRAE on it. Rows ordered by state count, seed, concept.
pub fn state_count_sweep(
    base: &AssetSpec,
    state_counts: &[usize],
    seeds: &[u64],
    cfg: &ExperimentConfig,
) -> Result<Vec<StateRow>> {
    let grid: Vec<(usize, u64, Concept)> = state_counts
        .iter()
        .flat_map(|&s| {
            seeds
                .iter()
                .flat_map(move |&seed| [Concept::Rae, Concept::Drae].map(|c| (s, seed, c)))
        })
        .collect();
    par_map(&grid, cfg.jobs, |&(n_states, seed, concept)| {
        let spec = AssetSpec {
            n_states,
            seed,
            ..base.clone()
        };
        let game = gen_asset_game(&spec)?.game;
        let risk = cfg.risk_for(&game);
        let p = sfp_solve(&game, &risk, concept, &cfg.sfp)?;
        Ok(StateRow {
            n_states,
            seed,
            concept,
            gamma: p.gamma,
            tau: p.tau,
            er: p.er,
            variance: p.variance,
            lpm: p.lpm,
            iterations: p.iterations,
            converged: p.converged,
        })
    })
}

/// DRAE equilibrium at one LPM degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeRow {
    pub degree: f64,
    pub gamma: f64,
    pub tau: f64,
    pub er: f64,
    pub variance: f64,
    /// LPM quadratic form at the run's own degree.
    pub lpm: f64,
    /// LPM quadratic form at the reference degree.
    pub lpm_reference: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// One DRAE solve per degree, scored at its own degree and at
/// [`REFERENCE_DEGREE`].
pub fn degree_sweep(
    game: &StateGame,
    degrees: &[f64],
    cfg: &ExperimentConfig,
) -> Result<Vec<DegreeRow>> {
    let base = cfg.risk_for(game);
    par_map(degrees, cfg.jobs, |&degree| {
        let risk = RiskConfig { degree, ..base };
        risk.validate()?;
        let p = sfp_solve(game, &risk, Concept::Drae, &cfg.sfp)?;
        let reference = raw_risk_matrix(
            game,
            &p.strategy_p2,
            &RiskConfig {
                degree: REFERENCE_DEGREE,
                ..base
            },
        )?;
        let x = p.strategy_p1.probs();
        Ok(DegreeRow {
            degree,
            gamma: p.gamma,
            tau: p.tau,
            er: p.er,
            variance: p.variance,
            lpm: p.lpm,
            lpm_reference: crate::game::bilinear(reference.values(), x, x),
            iterations: p.iterations,
            converged: p.converged,
        })
    })
}

/// Provenance written next to every experiment output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub experiment: String,
    pub tool_version: String,
    pub seeds: Vec<u64>,
    pub config: ExperimentConfig,
    /// Generator specs and sweep parameters.
    pub inputs: serde_json::Value,
    pub gamma_matching: String,
    pub weight_sequence: Option<String>,
    /// Headline numbers of the run, such as area ratios.
    pub summary: serde_json::Value,
}

impl RunMetadata {
    pub fn new(
        experiment: &str,
        seeds: Vec<u64>,
        config: ExperimentConfig,
        inputs: serde_json::Value,
    ) -> Self {
        Self {
            experiment: experiment.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seeds,
            config,
            inputs,
            gamma_matching: "same numeric gamma for every concept; no cross-concept calibration"
                .into(),
            weight_sequence: None,
            summary: serde_json::Value::Null,
        }
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        Ok(())
    }
}
