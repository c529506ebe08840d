//! Python bindings: games, generators, risk matrices, best responses and
//! equilibrium solves.

use drae_core::environments::{
    gen_asset_game, gen_ppm_game, gen_synthetic, AssetSpec, PpmSpec, SyntheticSpec,
};
use drae_core::experiments::{downside_auc_ratio, gamma_sweep, ExperimentConfig, FrontierRow};
use drae_core::game::GameFile;
use drae_core::risk::{covariance_matrix, drae_risk_matrix, raw_risk_matrix};
use drae_core::solver::best_response as core_best_response;
use drae_core::{
    expected_reward, sfp_solve, Concept, DraeError, EquilibriumProfile, MixedStrategy, RiskConfig,
    RiskMatrix, Scheme, SfpOptions, StateGame,
};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: DraeError) -> PyErr {
    match e {
        DraeError::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn rows(m: &RiskMatrix) -> Vec<Vec<f64>> {
    let v = m.values();
    (0..v.nrows())
        .map(|i| v.row(i).iter().copied().collect())
        .collect()
}

fn strategy(probs: Vec<f64>, eps: f64) -> PyResult<MixedStrategy> {
    MixedStrategy::new(probs, eps).map_err(py_err)
}

fn risk_config(gamma: f64, tau: f64, degree: f64, scheme: &str) -> PyResult<RiskConfig> {
    let cfg = RiskConfig {
        tau,
        degree,
        gamma,
        scheme: scheme.parse::<Scheme>().map_err(py_err)?,
        ..RiskConfig::default()
    };
    cfg.validate().map_err(py_err)?;
    Ok(cfg)
}

/// Symmetric two-player game with state-dependent rewards `r[i][j][s]`.
#[pyclass(module = "drae", name = "Game", frozen)]
struct Game {
    inner: StateGame,
}

#[pymethods]
impl Game {
    #[new]
    #[pyo3(signature = (rewards, state_probs=None))]
    fn new(rewards: Vec<Vec<Vec<f64>>>, state_probs: Option<Vec<f64>>) -> PyResult<Self> {
        let n_actions = rewards.len();
        let n_states = rewards.first().and_then(|r| r.first()).map_or(0, Vec::len);
        let state_probs =
            state_probs.unwrap_or_else(|| vec![1.0 / n_states.max(1) as f64; n_states]);
        let file = GameFile {
            n_actions,
            n_states,
            state_probs,
            rewards,
        };
        Ok(Self {
            inner: StateGame::try_from(file).map_err(py_err)?,
        })
    }

    /// Single-state game from a payoff matrix.
    #[staticmethod]
    fn from_matrix(matrix: Vec<Vec<f64>>) -> PyResult<Self> {
        let rewards = matrix
            .into_iter()
            .map(|row| row.into_iter().map(|r| vec![r]).collect())
            .collect();
        Self::new(rewards, Some(vec![1.0]))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: StateGame::from_json_str(text).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: StateGame::load_json(path).map_err(py_err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json_string().map_err(py_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save_json(path).map_err(py_err)
    }

    #[getter]
    fn n_actions(&self) -> usize {
        self.inner.n_actions()
    }

    #[getter]
    fn n_states(&self) -> usize {
        self.inner.n_states()
    }

    #[getter]
    fn state_probs(&self) -> Vec<f64> {
        self.inner.state_probs().to_vec()
    }

    fn reward(&self, i: usize, j: usize, s: usize) -> PyResult<f64> {
        let n = self.inner.n_actions();
        if i >= n || j >= n || s >= self.inner.n_states() {
            return Err(PyValueError::new_err("reward index out of range"));
        }
        Ok(self.inner.reward(i, j, s))
    }

    fn mean_reward_matrix(&self) -> Vec<Vec<f64>> {
        let m = self.inner.mean_reward_matrix();
        (0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect())
            .collect()
    }

    fn uniform_play_value(&self) -> f64 {
        self.inner.uniform_play_value()
    }

    #[pyo3(signature = (sigma, varsigma, eps=0.0))]
    fn expected_reward(&self, sigma: Vec<f64>, varsigma: Vec<f64>, eps: f64) -> PyResult<f64> {
        expected_reward(
            &strategy(sigma, eps)?,
            &strategy(varsigma, eps)?,
            &self.inner,
        )
        .map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Game(n_actions={}, n_states={})",
            self.inner.n_actions(),
            self.inner.n_states()
        )
    }
}

/// Equilibrium strategies with expected reward, variance and LPM.
#[pyclass(module = "drae", name = "Profile", frozen)]
struct Profile {
    inner: EquilibriumProfile,
}

#[pymethods]
impl Profile {
    #[getter]
    fn concept(&self) -> &'static str {
        self.inner.concept.as_str()
    }
    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }
    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau
    }
    #[getter]
    fn degree(&self) -> f64 {
        self.inner.degree
    }
    #[getter]
    fn scheme(&self) -> &'static str {
        self.inner.scheme.as_str()
    }
    #[getter]
    fn strategy_p1(&self) -> Vec<f64> {
        self.inner.strategy_p1.probs().to_vec()
    }
    #[getter]
    fn strategy_p2(&self) -> Vec<f64> {
        self.inner.strategy_p2.probs().to_vec()
    }
    #[getter]
    fn er(&self) -> f64 {
        self.inner.er
    }
    #[getter]
    fn variance(&self) -> f64 {
        self.inner.variance
    }
    #[getter]
    fn lpm(&self) -> f64 {
        self.inner.lpm
    }
    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }
    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(|e| py_err(e.into()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Profile(concept={}, er={}, variance={}, lpm={}, converged={})",
            self.inner.concept,
            self.inner.er,
            self.inner.variance,
            self.inner.lpm,
            if self.inner.converged {
                "True"
            } else {
                "False"
            }
        )
    }
}

/// Synthetic skew-normal game; class counts keep the 20/20/60 split.
#[pyfunction]
#[pyo3(signature = (seed=0, n_actions=100, n_states=1))]
fn generate_synthetic(seed: u64, n_actions: usize, n_states: usize) -> PyResult<Game> {
    let spec = SyntheticSpec {
        n_states,
        ..SyntheticSpec::scaled(n_actions, seed)
    };
    Ok(Game {
        inner: gen_synthetic(&spec).map_err(py_err)?.game,
    })
}

#[pyfunction]
#[pyo3(signature = (seed=0, n_portfolios=100, n_assets=10, n_states=5))]
fn generate_asset(
    seed: u64,
    n_portfolios: usize,
    n_assets: usize,
    n_states: usize,
) -> PyResult<Game> {
    let spec = AssetSpec {
        n_portfolios,
        n_assets,
        n_states,
        seed,
        ..AssetSpec::default()
    };
    Ok(Game {
        inner: gen_asset_game(&spec).map_err(py_err)?.game,
    })
}

/// Product portfolio game with random costs, utilities and segment sizes.
#[pyfunction]
#[pyo3(signature = (seed=0, n_products=5, n_segments=3))]
fn generate_ppm(seed: u64, n_products: usize, n_segments: usize) -> PyResult<Game> {
    let spec = PpmSpec::random(n_products, n_segments, seed).map_err(py_err)?;
    Ok(Game {
        inner: gen_ppm_game(&spec).map_err(py_err)?,
    })
}

/// LPM on the diagonal, co-LPM off it.
#[pyfunction]
#[pyo3(signature = (game, varsigma, tau=None, degree=2.0))]
fn raw_lpm_matrix(
    game: &Game,
    varsigma: Vec<f64>,
    tau: Option<f64>,
    degree: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let tau = tau.unwrap_or_else(|| game.inner.uniform_play_value());
    let cfg = risk_config(0.0, tau, degree, "transpose")?;
    Ok(rows(
        &raw_risk_matrix(&game.inner, &strategy(varsigma, 0.0)?, &cfg).map_err(py_err)?,
    ))
}

/// Symmetrized, positive definite LPM matrix used by the DRAE best response.
#[pyfunction]
#[pyo3(signature = (game, varsigma, tau=None, degree=2.0, scheme="transpose"))]
fn lpm_risk_matrix(
    game: &Game,
    varsigma: Vec<f64>,
    tau: Option<f64>,
    degree: f64,
    scheme: &str,
) -> PyResult<Vec<Vec<f64>>> {
    let tau = tau.unwrap_or_else(|| game.inner.uniform_play_value());
    let cfg = risk_config(0.0, tau, degree, scheme)?;
    Ok(rows(
        &drae_risk_matrix(&game.inner, &strategy(varsigma, 0.0)?, &cfg).map_err(py_err)?,
    ))
}

#[pyfunction]
fn covariance(game: &Game, varsigma: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows(
        &covariance_matrix(&game.inner, &strategy(varsigma, 0.0)?).map_err(py_err)?,
    ))
}

#[allow(clippy::too_many_arguments)]
fn build(
    gamma: f64,
    tau: Option<f64>,
    degree: f64,
    scheme: &str,
    eps: f64,
    max_iter: usize,
    tol: f64,
    game: &StateGame,
) -> PyResult<(RiskConfig, SfpOptions)> {
    let cfg = risk_config(
        gamma,
        tau.unwrap_or_else(|| game.uniform_play_value()),
        degree,
        scheme,
    )?;
    let opts = SfpOptions {
        eps,
        max_iter,
        drift_tol: tol,
        ..SfpOptions::default()
    };
    opts.validate().map_err(py_err)?;
    Ok((cfg, opts))
}

/// Best response of the row player to `varsigma`.
#[pyfunction]
#[pyo3(signature = (game, varsigma, concept="drae", gamma=1.0, tau=None, degree=2.0, scheme="transpose", eps=1e-4))]
#[allow(clippy::too_many_arguments)]
fn best_response(
    game: &Game,
    varsigma: Vec<f64>,
    concept: &str,
    gamma: f64,
    tau: Option<f64>,
    degree: f64,
    scheme: &str,
    eps: f64,
) -> PyResult<Vec<f64>> {
    let concept: Concept = concept.parse().map_err(py_err)?;
    let defaults = SfpOptions::default();
    let (cfg, opts) = build(
        gamma,
        tau,
        degree,
        scheme,
        eps,
        defaults.max_iter,
        defaults.drift_tol,
        &game.inner,
    )?;
    let br = core_best_response(
        &game.inner,
        &cfg,
        concept,
        &strategy(varsigma, 0.0)?,
        &opts,
        None,
    )
    .map_err(py_err)?;
    Ok(br.into_vec())
}

/// Equilibrium by fictitious play. `tau` defaults to the uniform-play value.
#[pyfunction]
#[pyo3(signature = (game, concept="drae", gamma=1.0, tau=None, degree=2.0, scheme="transpose", eps=1e-4, max_iter=5000, tol=1e-6))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    game: &Game,
    concept: &str,
    gamma: f64,
    tau: Option<f64>,
    degree: f64,
    scheme: &str,
    eps: f64,
    max_iter: usize,
    tol: f64,
) -> PyResult<Profile> {
    let concept: Concept = concept.parse().map_err(py_err)?;
    let (cfg, opts) = build(gamma, tau, degree, scheme, eps, max_iter, tol, &game.inner)?;
    let inner = py
        .detach(|| sfp_solve(&game.inner, &cfg, concept, &opts))
        .map_err(py_err)?;
    Ok(Profile { inner })
}

fn row_dict<'py>(py: Python<'py>, r: &FrontierRow) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let d = pyo3::types::PyDict::new(py);
    d.set_item("concept", r.concept.as_str())?;
    d.set_item("gamma", r.gamma)?;
    d.set_item("tau", r.tau)?;
    d.set_item("degree", r.degree)?;
    d.set_item("scheme", r.scheme.as_str())?;
    d.set_item("er", r.er)?;
    d.set_item("variance", r.variance)?;
    d.set_item("lpm", r.lpm)?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("converged", r.converged)?;
    d.set_item("seed", r.seed)?;
    Ok(d)
}

/// One frontier row (as a dict) per concept and γ.
#[pyfunction]
#[pyo3(signature = (game, concepts, gammas, tau=None, degree=2.0, scheme="transpose", eps=1e-4, max_iter=5000, tol=1e-6, seed=0, jobs=1))]
#[allow(clippy::too_many_arguments)]
fn frontier<'py>(
    py: Python<'py>,
    game: &Game,
    concepts: Vec<String>,
    gammas: Vec<f64>,
    tau: Option<f64>,
    degree: f64,
    scheme: &str,
    eps: f64,
    max_iter: usize,
    tol: f64,
    seed: u64,
    jobs: usize,
) -> PyResult<Vec<Bound<'py, pyo3::types::PyDict>>> {
    let concepts: Vec<Concept> = concepts
        .iter()
        .map(|c| c.parse())
        .collect::<Result<_, _>>()
        .map_err(py_err)?;
    let (risk, sfp) = build(1.0, tau, degree, scheme, eps, max_iter, tol, &game.inner)?;
    let cfg = ExperimentConfig {
        risk,
        tau: Some(risk.tau),
        sfp,
        jobs: jobs.max(1),
    };
    let rows = py
        .detach(|| gamma_sweep(&game.inner, &concepts, &gammas, &cfg, seed))
        .map_err(py_err)?;
    rows.iter().map(|r| row_dict(py, r)).collect()
}

fn frontier_rows(concept: Concept, points: &[(f64, f64)]) -> Vec<FrontierRow> {
    points
        .iter()
        .map(|&(er, lpm)| FrontierRow {
            concept,
            gamma: 0.0,
            tau: 0.0,
            degree: 2.0,
            scheme: Scheme::Transpose,
            er,
            variance: 0.0,
            lpm,
            iterations: 0,
            converged: true,
            seed: 0,
        })
        .collect()
}

/// Area under the DRAE (er, lpm) frontier over the area under the RAE one,
/// on their common expected-return interval.
#[pyfunction]
fn auc_ratio(drae: Vec<(f64, f64)>, rae: Vec<(f64, f64)>) -> PyResult<f64> {
    downside_auc_ratio(
        &frontier_rows(Concept::Drae, &drae),
        &frontier_rows(Concept::Rae, &rae),
    )
    .map_err(py_err)
}

#[pymodule]
fn drae(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<Game>()?;
    m.add_class::<Profile>()?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(generate_asset, m)?)?;
    m.add_function(wrap_pyfunction!(generate_ppm, m)?)?;
    m.add_function(wrap_pyfunction!(raw_lpm_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(lpm_risk_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(covariance, m)?)?;
    m.add_function(wrap_pyfunction!(best_response, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(frontier, m)?)?;
    m.add_function(wrap_pyfunction!(auc_ratio, m)?)?;
    Ok(())
}
