//! Lower-partial-moment risk matrices and the variance baseline.
//!
//! For an opponent strategy `ς`, threshold `τ` and degree `d`, the raw risk
//! matrix has `LPM_i` on the diagonal and `CLPM_{i,j}` off it:
//!
//! ```text
//! LPM_i    = 1/|A| Σ_s q(s) Σ_k ς_k max(0, τ - r(i,k,s))^d
//! CLPM_i,j = 1/|A| Σ_s q(s) Σ_k ς_k max(0, τ - r(i,k,s))^(d-1) (τ - r(j,k,s))
//! ```
//!
//! The raw matrix is generally asymmetric, so it is symmetrized (rho, dual or
//! transpose scheme) and projected onto the positive definite cone before it
//! is used as a quadratic penalty.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, DraeError, Result};
use crate::game::{ensure_same_len, MixedStrategy, StateGame};

pub const DEFAULT_PD_JITTER: f64 = 1e-8;

/// Symmetrization applied to the raw CLPM matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Rho,
    Dual,
    Transpose,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Rho, Scheme::Dual, Scheme::Transpose];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Rho => "rho",
            Scheme::Dual => "dual",
            Scheme::Transpose => "transpose",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = DraeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rho" => Ok(Scheme::Rho),
            "dual" => Ok(Scheme::Dual),
            "transpose" => Ok(Scheme::Transpose),
            other => Err(invalid_config(
                "scheme",
                format!("unknown scheme `{other}` (expected rho, dual or transpose)"),
            )),
        }
    }
}

/// Threshold, degree, risk aversion and symmetrization for one solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskConfig {
    pub tau: f64,
    pub degree: f64,
    pub gamma: f64,
    pub scheme: Scheme,
    pub pd_jitter: f64,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            tau: 0.0,
            degree: 2.0,
            gamma: 1.0,
            scheme: Scheme::Transpose,
            pd_jitter: DEFAULT_PD_JITTER,
        }
    }
}

impl RiskConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.tau.is_finite() {
            return Err(invalid_config("tau", "must be finite"));
        }
        if !(self.degree.is_finite() && self.degree > 1.0) {
            return Err(invalid_config(
                "degree",
                format!("must be > 1, got {}", self.degree),
            ));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(invalid_config(
                "gamma",
                format!("must be >= 0, got {}", self.gamma),
            ));
        }
        if !(self.pd_jitter.is_finite() && self.pd_jitter >= 0.0) {
            return Err(invalid_config(
                "pd_jitter",
                format!("must be >= 0, got {}", self.pd_jitter),
            ));
        }
        Ok(())
    }
}

/// Processing stage of a [`RiskMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Raw,
    Symmetrized,
    PdProjected,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RiskDiagnostics {
    /// Action pairs whose correlation was undefined (a constant reward
    /// vector) and was set to zero by the rho scheme.
    pub undefined_correlations: usize,
}

/// An `|A| × |A|` risk matrix with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskMatrix {
    values: DMatrix<f64>,
    stage: Stage,
    /// `None` for the covariance baseline, which has no threshold or degree.
    config: Option<RiskConfig>,
    diagnostics: RiskDiagnostics,
}

impl RiskMatrix {
    pub fn new(values: DMatrix<f64>, stage: Stage, config: Option<RiskConfig>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(DraeError::DimensionMismatch {
                context: "risk matrix columns",
                expected: values.nrows(),
                found: values.ncols(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DraeError::NonFinite("risk matrix"));
        }
        if stage != Stage::Raw {
            let asym = max_asymmetry(&values);
            if asym > 0.0 {
                return Err(DraeError::NotSymmetric {
                    max_asymmetry: asym,
                });
            }
        }
        Ok(Self {
            values,
            stage,
            config,
            diagnostics: RiskDiagnostics::default(),
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn config(&self) -> Option<&RiskConfig> {
        self.config.as_ref()
    }

    pub fn diagnostics(&self) -> RiskDiagnostics {
        self.diagnostics
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.values)
    }

    /// Writes the matrix as CSV (header row of action indices) and a sidecar
    /// `<stem>.meta.json` next to it.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let n = self.dim();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record((0..n).map(|i| i.to_string()))?;
        for i in 0..n {
            w.write_record((0..n).map(|j| self.values[(i, j)].to_string()))?;
        }
        w.flush()?;

        let sidecar = RiskMatrixMeta {
            stage: self.stage,
            scheme: self.config.map(|c| c.scheme),
            tau: self.config.map(|c| c.tau),
            degree: self.config.map(|c| c.degree),
            min_eigenvalue: if self.stage == Stage::Raw {
                None
            } else {
                Some(self.min_eigenvalue())
            },
        };
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }
}

/// Sidecar metadata written next to a risk matrix dump.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiskMatrixMeta {
    pub stage: Stage,
    pub scheme: Option<Scheme>,
    pub tau: Option<f64>,
    pub degree: Option<f64>,
    pub min_eigenvalue: Option<f64>,
}

pub(crate) fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

fn check_strategy(game: &StateGame, varsigma: &MixedStrategy) -> Result<()> {
    ensure_same_len(game.n_actions(), varsigma.len(), "varsigma")
}

fn check_index(game: &StateGame, i: usize) -> Result<()> {
    if i >= game.n_actions() {
        return Err(DraeError::IndexOutOfRange {
            index: i,
            n: game.n_actions(),
        });
    }
    Ok(())
}

#[inline]
fn shortfall(tau: f64, r: f64) -> f64 {
    (tau - r).max(0.0)
}

/// `x^e` for `x >= 0`, avoiding `powf` for small integer exponents.
#[inline]
fn power(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        if e == 0.0 {
            1.0
        } else {
            0.0
        }
    } else if e == 1.0 {
        x
    } else if e.fract() == 0.0 && e.abs() <= 16.0 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

/// Opponent-and-state weights `ς_k q(s)`, laid out like one action's rewards.
fn joint_weights(game: &StateGame, varsigma: &MixedStrategy) -> Vec<f64> {
    let q = game.state_probs();
    varsigma
        .probs()
        .iter()
        .flat_map(|&p| q.iter().map(move |&qs| p * qs))
        .collect()
}

/// Lower partial moment of degree `d` for action `i`.
pub fn lpm(game: &StateGame, i: usize, varsigma: &MixedStrategy, tau: f64, d: f64) -> Result<f64> {
    check_index(game, i)?;
    check_strategy(game, varsigma)?;
    if d.is_nan() || d <= 0.0 {
        return Err(invalid_config("degree", format!("must be > 0, got {d}")));
    }
    let w = joint_weights(game, varsigma);
    let total: f64 = game
        .action_rewards(i)
        .iter()
        .zip(&w)
        .map(|(&r, &w)| w * power(shortfall(tau, r), d))
        .sum();
    Ok(total / game.n_actions() as f64)
}

/// Co-lower partial moment of action `i` against action `j`.
pub fn clpm(
    game: &StateGame,
    i: usize,
    j: usize,
    varsigma: &MixedStrategy,
    tau: f64,
    d: f64,
) -> Result<f64> {
    check_index(game, i)?;
    check_index(game, j)?;
    check_strategy(game, varsigma)?;
    if d.is_nan() || d <= 1.0 {
        return Err(invalid_config("degree", format!("must be > 1, got {d}")));
    }
    let w = joint_weights(game, varsigma);
    let total: f64 = game
        .action_rewards(i)
        .iter()
        .zip(game.action_rewards(j))
        .zip(&w)
        .map(|((&ri, &rj), &w)| w * power(shortfall(tau, ri), d - 1.0) * (tau - rj))
        .sum();
    Ok(total / game.n_actions() as f64)
}

/// Builds an `(|A|·|S|) × |A|` matrix whose column `i` is `f(w, r(i,·,·))`.
fn action_columns(game: &StateGame, w: &[f64], f: impl Fn(f64, f64) -> f64) -> DMatrix<f64> {
    let rows = w.len();
    let n = game.n_actions();
    DMatrix::from_iterator(
        rows,
        n,
        game.rewards()
            .chunks_exact(rows)
            .flat_map(|col| col.iter().zip(w).map(|(&r, &w)| f(w, r))),
    )
}

/// The raw (asymmetric) LPM risk matrix.
pub fn raw_risk_matrix(
    game: &StateGame,
    varsigma: &MixedStrategy,
    cfg: &RiskConfig,
) -> Result<RiskMatrix> {
    cfg.validate()?;
    check_strategy(game, varsigma)?;
    let (tau, d) = (cfg.tau, cfg.degree);
    let n = game.n_actions() as f64;
    let w = joint_weights(game, varsigma);

    let lower = action_columns(game, &w, |w, r| w * power(shortfall(tau, r), d - 1.0));
    let gap = action_columns(game, &w, |_, r| tau - r);
    let mut values = lower.tr_mul(&gap) / n;
    for i in 0..game.n_actions() {
        // w·s^(d-1)·s with s the guarded shortfall.
        let diag: f64 = lower
            .column(i)
            .iter()
            .zip(gap.column(i).iter())
            .map(|(l, g)| l * g.max(0.0))
            .sum();
        values[(i, i)] = diag / n;
    }
    RiskMatrix::new(values, Stage::Raw, Some(*cfg))
}

/// Pearson correlation of each pair of state-expected reward rows of `M̄`.
/// Returns the matrix and the number of undefined (zero-variance) pairs.
fn reward_correlations(game: &StateGame) -> (DMatrix<f64>, usize) {
    let m = game.mean_reward_matrix();
    let n = m.nrows();
    let mut centered = m.clone();
    let mut norms = vec![0.0; n];
    for i in 0..n {
        let mean = m.row(i).mean();
        for k in 0..n {
            centered[(i, k)] -= mean;
        }
        norms[i] = centered.row(i).norm();
    }
    let mut rho = DMatrix::identity(n, n);
    let mut undefined = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let value = if norms[i] > 0.0 && norms[j] > 0.0 {
                let dot = centered.row(i).dot(&centered.row(j));
                (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0)
            } else {
                undefined += 1;
                0.0
            };
            rho[(i, j)] = value;
            rho[(j, i)] = value;
        }
    }
    (rho, undefined)
}

/// Rho scheme: `CLPM_ij = (LPM_i LPM_j)^(1/d) ρ_ij`, diagonal kept as `LPM_i`.
///
/// `ρ_ij` correlates the rows of the state-expected reward matrix. A
/// constant row has no defined correlation; those pairs get `ρ = 0` and are
/// counted in [`RiskDiagnostics::undefined_correlations`].
pub fn symmetrize_rho(
    raw: &RiskMatrix,
    game: &StateGame,
    varsigma: &MixedStrategy,
    cfg: &RiskConfig,
) -> Result<RiskMatrix> {
    require_stage(raw, Stage::Raw)?;
    check_strategy(game, varsigma)?;
    ensure_same_len(game.n_actions(), raw.dim(), "raw risk matrix")?;
    let n = raw.dim();
    let lpms: Vec<f64> = (0..n).map(|i| raw.values[(i, i)]).collect();
    let (rho, undefined) = reward_correlations(game);
    if undefined > 0 {
        log::debug!("rho scheme: {undefined} action pairs with undefined correlation");
    }
    let mut values = DMatrix::zeros(n, n);
    for i in 0..n {
        values[(i, i)] = lpms[i];
        for j in (i + 1)..n {
            let v = (lpms[i] * lpms[j]).powf(1.0 / cfg.degree) * rho[(i, j)];
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    let mut out = RiskMatrix::new(values, Stage::Symmetrized, Some(*cfg))?;
    out.diagnostics.undefined_correlations = undefined;
    Ok(out)
}

/// Dual scheme: co-movements only where both actions fall below `τ`.
///
/// `[a^(d-1) b^(d-1)]^(1/(d-1))` equals `a·b` for the non-negative shortfalls
/// `a`, `b`, so the matrix is the weighted Gram matrix of shortfalls.
pub fn symmetrize_dual(
    game: &StateGame,
    varsigma: &MixedStrategy,
    cfg: &RiskConfig,
) -> Result<RiskMatrix> {
    cfg.validate()?;
    check_strategy(game, varsigma)?;
    let tau = cfg.tau;
    let w = joint_weights(game, varsigma);
    let scaled = action_columns(game, &w, |w, r| w.sqrt() * shortfall(tau, r));
    let values = symmetric_part(&(scaled.tr_mul(&scaled) / game.n_actions() as f64));
    RiskMatrix::new(values, Stage::Symmetrized, Some(*cfg))
}

/// Transpose scheme: `½(Σ + Σᵀ)` followed by [`nearest_pd`].
pub fn symmetrize_transpose(raw: &RiskMatrix, pd_jitter: f64) -> Result<RiskMatrix> {
    require_stage(raw, Stage::Raw)?;
    let projected = nearest_pd(&symmetric_part(&raw.values), pd_jitter)?;
    let mut config = raw.config;
    if let Some(c) = config.as_mut() {
        c.pd_jitter = pd_jitter;
    }
    RiskMatrix::new(projected, Stage::PdProjected, config)
}

/// Projects an already symmetric matrix (rho, dual, covariance) onto the
/// cone of matrices with eigenvalues `>= pd_jitter`.
pub fn project_pd(sym: &RiskMatrix, pd_jitter: f64) -> Result<RiskMatrix> {
    match sym.stage {
        Stage::Raw => Err(invalid_config("stage", "expected a symmetrized matrix")),
        Stage::PdProjected => Ok(sym.clone()),
        Stage::Symmetrized => {
            let values = nearest_pd(&sym.values, pd_jitter)?;
            let mut config = sym.config;
            if let Some(c) = config.as_mut() {
                c.pd_jitter = pd_jitter;
            }
            let mut out = RiskMatrix::new(values, Stage::PdProjected, config)?;
            out.diagnostics = sym.diagnostics;
            Ok(out)
        }
    }
}

fn require_stage(m: &RiskMatrix, stage: Stage) -> Result<()> {
    if m.stage != stage {
        return Err(invalid_config(
            "stage",
            format!("expected a {stage:?} matrix, got {:?}", m.stage),
        ));
    }
    Ok(())
}

/// `½(m + mᵀ)`, exactly symmetric in floating point.
pub fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    m.clone().symmetric_eigenvalues().min()
}

/// Frobenius-nearest symmetric matrix whose eigenvalues are all `>= delta`:
/// eigenvalues below `delta` are clipped and the matrix is reassembled.
pub fn nearest_pd(m: &DMatrix<f64>, delta: f64) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(DraeError::DimensionMismatch {
            context: "nearest_pd columns",
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(invalid_config(
            "pd_jitter",
            format!("must be >= 0, got {delta}"),
        ));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(DraeError::NonFinite("nearest_pd input"));
    }
    let asym = max_asymmetry(m);
    if asym > 1e-10 {
        return Err(DraeError::NotSymmetric {
            max_asymmetry: asym,
        });
    }
    let sym = symmetric_part(m);
    let n = sym.nrows();

    // Cheap certificate first: m - δI positive definite means nothing to clip.
    let shifted = &sym - DMatrix::<f64>::identity(n, n) * delta;
    if shifted.cholesky().is_some() {
        return Ok(sym);
    }

    let eig = sym.symmetric_eigen();
    if eig.eigenvalues.iter().all(|&l| l >= delta) {
        return Ok(symmetric_part(m));
    }
    let mut scaled = eig.eigenvectors.clone();
    for (mut col, &l) in scaled.column_iter_mut().zip(eig.eigenvalues.iter()) {
        col *= l.max(delta);
    }
    let rebuilt = scaled * eig.eigenvectors.transpose();
    Ok(symmetric_part(&rebuilt))
}

/// Covariance of action rewards induced by the opponent's strategy and the
/// state draw (the RAE risk matrix), before any jitter.
pub fn covariance_matrix(game: &StateGame, varsigma: &MixedStrategy) -> Result<RiskMatrix> {
    check_strategy(game, varsigma)?;
    let w = joint_weights(game, varsigma);
    let n = game.n_actions();
    let means: Vec<f64> = (0..n)
        .map(|i| {
            let r = game.action_rewards(i);
            let lo = r.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            r.iter()
                .zip(&w)
                .map(|(r, w)| r * w)
                .sum::<f64>()
                .clamp(lo, hi)
        })
        .collect();
    let rows = w.len();
    let centered = DMatrix::from_iterator(
        rows,
        n,
        game.rewards()
            .chunks_exact(rows)
            .zip(&means)
            .flat_map(|(col, &mu)| col.iter().zip(&w).map(move |(&r, &w)| w.sqrt() * (r - mu))),
    );
    let values = symmetric_part(&centered.tr_mul(&centered));
    RiskMatrix::new(values, Stage::Symmetrized, None)
}

/// `σᵀ Σ σ`.
pub fn portfolio_risk(sigma: &MixedStrategy, risk: &RiskMatrix) -> Result<f64> {
    ensure_same_len(risk.dim(), sigma.len(), "sigma")?;
    Ok(crate::game::bilinear(
        &risk.values,
        sigma.probs(),
        sigma.probs(),
    ))
}

/// Risk matrix used by the DRAE best response: raw LPM matrix, symmetrized
/// per `cfg.scheme`, then projected to eigenvalues `>= cfg.pd_jitter`.
pub fn drae_risk_matrix(
    game: &StateGame,
    varsigma: &MixedStrategy,
    cfg: &RiskConfig,
) -> Result<RiskMatrix> {
    match cfg.scheme {
        Scheme::Transpose => {
            symmetrize_transpose(&raw_risk_matrix(game, varsigma, cfg)?, cfg.pd_jitter)
        }
        Scheme::Rho => {
            let raw = raw_risk_matrix(game, varsigma, cfg)?;
            project_pd(&symmetrize_rho(&raw, game, varsigma, cfg)?, cfg.pd_jitter)
        }
        Scheme::Dual => project_pd(&symmetrize_dual(game, varsigma, cfg)?, cfg.pd_jitter),
    }
}

/// Covariance matrix projected to eigenvalues `>= pd_jitter`.
pub fn rae_risk_matrix(
    game: &StateGame,
    varsigma: &MixedStrategy,
    pd_jitter: f64,
) -> Result<RiskMatrix> {
    project_pd(&covariance_matrix(game, varsigma)?, pd_jitter)
}
