//! `drae`: generate games, solve for equilibria, run sweeps and validate
//! game files.
//!
//! Exit codes: 0 on success, 2 for usage or validation errors, 3 when a
//! solve stops before converging, 1 for I/O failures while writing output.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use drae_core::environments::asset::WEIGHT_SEQUENCE;
use drae_core::environments::{
    gen_asset_game, gen_ppm_game, gen_synthetic, AssetSpec, PpmSpec, SyntheticSpec,
};
use drae_core::experiments::{
    default_gamma_grid, degree_sweep, downside_auc_ratio, gamma_sweep, skew_distance_runs,
    state_count_sweep, summarize_skew, write_csv, write_frontier_csv, DegreeRow, ExperimentConfig,
    FrontierRow, RunMetadata,
};
use drae_core::{sfp_solve, Concept, DraeError, RiskConfig, Scheme, StateGame};

const EXIT_IO: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "drae",
    version,
    about = "Downside risk-aware equilibria for state-based games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a game and write it as JSON.
    Generate(GenerateArgs),
    /// Solve a game for an equilibrium profile.
    Solve(SolveArgs),
    /// Run a named experiment and write CSV plus run metadata.
    Experiment(ExperimentArgs),
    /// Check that a game file is well formed.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Environment {
    Synthetic,
    Asset,
    Ppm,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(value_enum)]
    environment: Environment,
    /// JSON spec for the generator; flags override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Synthetic game: number of actions (class counts scale to 20/20/60%).
    #[arg(long)]
    actions: Option<usize>,
    /// Synthetic or asset game: number of states.
    #[arg(long)]
    states: Option<usize>,
    /// Asset game: number of portfolios.
    #[arg(long)]
    portfolios: Option<usize>,
    /// Asset game: number of assets.
    #[arg(long)]
    assets: Option<usize>,
    /// Product portfolio game: number of products.
    #[arg(long)]
    products: Option<usize>,
    /// Product portfolio game: number of market segments.
    #[arg(long)]
    segments: Option<usize>,
    /// Product portfolio game: number of demand states.
    #[arg(long)]
    demand_states: Option<usize>,
    /// Product portfolio game: log-scale volatility of segment sizes.
    #[arg(long)]
    demand_volatility: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

/// Risk and solver flags shared by `solve` and `experiment`.
#[derive(Args, Clone, Debug, Default)]
struct RiskFlags {
    #[arg(long)]
    gamma: Option<f64>,
    /// LPM threshold; defaults to the game's uniform-play value.
    #[arg(long, allow_negative_numbers = true)]
    tau: Option<f64>,
    #[arg(long)]
    degree: Option<f64>,
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<Scheme>,
    /// Probability floor on every action.
    #[arg(long)]
    eps: Option<f64>,
    /// Fictitious play iteration budget.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Fictitious play drift tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: DraeError| e.to_string())
}

fn parse_concept(s: &str) -> Result<Concept, String> {
    s.parse().map_err(|e: DraeError| e.to_string())
}

impl RiskFlags {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(g) = self.gamma {
            cfg.risk.gamma = g;
        }
        if let Some(t) = self.tau {
            cfg.tau = Some(t);
        }
        if let Some(d) = self.degree {
            cfg.risk.degree = d;
        }
        if let Some(s) = self.scheme {
            cfg.risk.scheme = s;
        }
        if let Some(e) = self.eps {
            cfg.sfp.eps = e;
        }
        if let Some(m) = self.max_iter {
            cfg.sfp.max_iter = m;
        }
        if let Some(t) = self.tol {
            cfg.sfp.drift_tol = t;
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Game JSON file.
    #[arg(long)]
    game: PathBuf,
    #[arg(long, default_value = "drae", value_parser = parse_concept)]
    concept: Concept,
    #[command(flatten)]
    risk: RiskFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ExperimentName {
    Frontier,
    Skew,
    States,
    Degree,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    name: ExperimentName,
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; multi-seed runs use consecutive seeds from here.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    risk: RiskFlags,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Game JSON file.
    game: PathBuf,
}

/// Experiment configuration file. Unset fields take per-experiment defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ExperimentFile {
    settings: ExperimentConfig,
    seed: Option<u64>,
    seeds: Option<Vec<u64>>,
    n_seeds: Option<usize>,
    environment: Option<Environment>,
    concepts: Option<Vec<Concept>>,
    gammas: Option<Vec<f64>>,
    synthetic: Option<SyntheticSpec>,
    asset: Option<AssetSpec>,
    ppm: Option<PpmSpec>,
    kappas: Option<Vec<f64>>,
    n_actions: Option<usize>,
    state_counts: Option<Vec<usize>>,
    degrees: Option<Vec<f64>>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_IO,
            message: message.into(),
        }
    }
}

impl From<DraeError> for Failure {
    fn from(e: DraeError) -> Self {
        match e {
            DraeError::Io(_) => Failure::io(e.to_string()),
            other => Failure::usage(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("DRAE_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Experiment(a) => experiment(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("invalid {what} {}: {e}", path.display())))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::io(e.to_string()))?;
    fs::write(path, text + "\n")
        .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}

fn load_game(path: &Path) -> CliResult<StateGame> {
    StateGame::load_json(path)
        .map_err(|e| Failure::usage(format!("invalid game file {}: {e}", path.display())))
}

fn sidecar(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

fn generate(a: GenerateArgs) -> CliResult<u8> {
    let (game, spec, extra) = match a.environment {
        Environment::Synthetic => {
            let mut spec: SyntheticSpec = match &a.spec {
                Some(p) => read_json(p, "synthetic spec")?,
                None => SyntheticSpec::default(),
            };
            if let Some(n) = a.actions {
                spec = SyntheticSpec {
                    n_states: spec.n_states,
                    ..SyntheticSpec::scaled(n, spec.seed)
                };
            }
            if let Some(s) = a.states {
                spec.n_states = s;
            }
            if let Some(s) = a.seed {
                spec.seed = s;
            }
            let game = gen_synthetic(&spec)?;
            let value = serde_json::to_value(&spec).expect("spec serialises");
            (game.game, value, json!({ "profiles": game.profiles }))
        }
        Environment::Asset => {
            let mut spec: AssetSpec = match &a.spec {
                Some(p) => read_json(p, "asset spec")?,
                None => AssetSpec::default(),
            };
            if let Some(n) = a.portfolios {
                spec.n_portfolios = n;
            }
            if let Some(n) = a.assets {
                spec.n_assets = n;
            }
            if let Some(s) = a.states {
                spec.n_states = s;
            }
            if let Some(s) = a.seed {
                spec.seed = s;
            }
            let game = gen_asset_game(&spec)?;
            let value = serde_json::to_value(&spec).expect("spec serialises");
            let extra = json!({
                "weight_sequence": WEIGHT_SEQUENCE,
                "portfolios": game.portfolios,
            });
            (game.game, value, extra)
        }
        Environment::Ppm => {
            let mut spec: PpmSpec = match &a.spec {
                Some(p) => {
                    if a.products.is_some() || a.segments.is_some() {
                        return Err(Failure::usage(
                            "--products and --segments cannot be combined with --spec",
                        ));
                    }
                    read_json(p, "ppm spec")?
                }
                None => PpmSpec::random(
                    a.products.unwrap_or(4),
                    a.segments.unwrap_or(3),
                    a.seed.unwrap_or(0),
                )?,
            };
            if let Some(s) = a.seed {
                spec.seed = s;
            }
            if let Some(s) = a.demand_states {
                spec.demand_states = s;
            }
            if let Some(v) = a.demand_volatility {
                spec.demand_volatility = v;
            }
            let game = gen_ppm_game(&spec)?;
            let value = serde_json::to_value(&spec).expect("spec serialises");
            (
                game,
                value,
                json!({ "action_order": "non-empty product subsets by ascending bitmask" }),
            )
        }
    };
    game.save_json(&a.out)?;
    let meta = json!({
        "generator": a.environment,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "seed": spec.get("seed"),
        "spec": spec,
        "details": extra,
    });
    write_json(&meta, &sidecar(&a.out))?;
    println!(
        "wrote {} ({} actions, {} states)",
        a.out.display(),
        game.n_actions(),
        game.n_states()
    );
    Ok(0)
}

fn solve(a: SolveArgs) -> CliResult<u8> {
    let game = load_game(&a.game)?;
    let mut cfg = ExperimentConfig::default();
    a.risk.apply(&mut cfg);
    let risk: RiskConfig = cfg.risk_for(&game);
    let profile = sfp_solve(&game, &risk, a.concept, &cfg.sfp)?;
    profile.save_json(&a.out)?;
    println!(
        "concept={} er={:.6} variance={:.6} lpm={:.6} iterations={} converged={}",
        profile.concept,
        profile.er,
        profile.variance,
        profile.lpm,
        profile.iterations,
        profile.converged
    );
    if profile.converged {
        Ok(0)
    } else {
        eprintln!(
            "warning: fictitious play did not converge within {} iterations",
            cfg.sfp.max_iter
        );
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn validate(a: ValidateArgs) -> CliResult<u8> {
    let game = load_game(&a.game)?;
    println!(
        "ok: {} actions, {} states, uniform-play value {:.6}",
        game.n_actions(),
        game.n_states(),
        game.uniform_play_value()
    );
    Ok(0)
}

/// Seeds for a run: explicit list, else `n` consecutive seeds from the base.
fn resolve_seeds(file: &ExperimentFile, base: u64, default_n: usize) -> Vec<u64> {
    match &file.seeds {
        Some(s) => s.clone(),
        None => (0..file.n_seeds.unwrap_or(default_n) as u64)
            .map(|k| base + k)
            .collect(),
    }
}

fn game_for(file: &ExperimentFile, env: Environment, seed: u64) -> CliResult<StateGame> {
    Ok(match env {
        Environment::Synthetic => {
            let spec = SyntheticSpec {
                seed,
                ..file.synthetic.clone().unwrap_or_default()
            };
            gen_synthetic(&spec)?.game
        }
        Environment::Asset => {
            let spec = AssetSpec {
                seed,
                ..file.asset.clone().unwrap_or_default()
            };
            gen_asset_game(&spec)?.game
        }
        Environment::Ppm => {
            let spec = match &file.ppm {
                Some(p) => PpmSpec { seed, ..p.clone() },
                None => default_ppm(seed)?,
            };
            gen_ppm_game(&spec)?
        }
    })
}

/// Product portfolio instance used when no spec is given: 5 products,
/// 3 segments, 5 demand states.
fn default_ppm(seed: u64) -> CliResult<PpmSpec> {
    Ok(PpmSpec {
        demand_states: 5,
        demand_volatility: 0.3,
        ..PpmSpec::random(5, 3, seed)?
    })
}

fn experiment(a: ExperimentArgs) -> CliResult<u8> {
    let mut file: ExperimentFile = match &a.config {
        Some(p) => read_json(p, "experiment config")?,
        None => ExperimentFile::default(),
    };
    a.risk.apply(&mut file.settings);
    if let Some(j) = a.jobs {
        file.settings.jobs = j;
    }
    if file.settings.jobs == 0 {
        return Err(Failure::usage("--jobs must be at least 1"));
    }
    file.settings.risk.validate()?;
    file.settings.sfp.validate()?;
    let base_seed = a.seed.or(file.seed).unwrap_or(0);
    file.seed = Some(base_seed);
    fs::create_dir_all(&a.out)
        .map_err(|e| Failure::io(format!("cannot create {}: {e}", a.out.display())))?;
    let cfg = file.settings.clone();

    let (seeds, summary, weight_sequence) = match a.name {
        ExperimentName::Frontier => {
            let seeds = resolve_seeds(&file, base_seed, 1);
            let env = file.environment.unwrap_or(Environment::Synthetic);
            let concepts = file.concepts.clone().unwrap_or(Concept::ALL.to_vec());
            let gammas = file.gammas.clone().unwrap_or_else(default_gamma_grid);
            let mut rows: Vec<FrontierRow> = Vec::new();
            let mut ratios = Vec::new();
            for &seed in &seeds {
                let game = game_for(&file, env, seed)?;
                let part = gamma_sweep(&game, &concepts, &gammas, &cfg, seed)?;
                let pick = |c| {
                    part.iter()
                        .filter(|r| r.concept == c)
                        .cloned()
                        .collect::<Vec<_>>()
                };
                let ratio = downside_auc_ratio(&pick(Concept::Drae), &pick(Concept::Rae));
                ratios.push(json!({ "seed": seed, "downside_auc_ratio": ratio.as_ref().ok(), "error": ratio.err().map(|e| e.to_string()) }));
                rows.extend(part);
            }
            report_unconverged(rows.iter().filter(|r| !r.converged).count(), rows.len());
            write_frontier_csv(&rows, a.out.join("frontier.csv"))?;
            let ws = (env == Environment::Asset).then(|| WEIGHT_SEQUENCE.to_string());
            (seeds, json!({ "rows": rows.len(), "ratios": ratios }), ws)
        }
        ExperimentName::Skew => {
            let seeds = resolve_seeds(&file, base_seed, 50);
            let kappas = file.kappas.clone().unwrap_or(vec![0.0, 2.0, 4.0, 6.0, 8.0]);
            let n = file.n_actions.unwrap_or(100);
            let runs = skew_distance_runs(&kappas, n, &seeds, &cfg)?;
            let rows = summarize_skew(&kappas, &runs);
            report_unconverged(
                runs.iter()
                    .map(|r| usize::from(!r.rae_converged) + usize::from(!r.drae_converged))
                    .sum(),
                2 * runs.len(),
            );
            write_csv(&runs, a.out.join("skew_runs.csv"))?;
            write_csv(&rows, a.out.join("skew.csv"))?;
            (seeds, json!({ "curve": rows }), None)
        }
        ExperimentName::States => {
            let seeds = resolve_seeds(&file, base_seed, 3);
            let counts = file.state_counts.clone().unwrap_or(vec![1, 3, 5, 7]);
            let base = file.asset.clone().unwrap_or_default();
            let rows = state_count_sweep(&base, &counts, &seeds, &cfg)?;
            report_unconverged(rows.iter().filter(|r| !r.converged).count(), rows.len());
            write_csv(&rows, a.out.join("states.csv"))?;
            (
                seeds,
                json!({ "rows": rows.len() }),
                Some(WEIGHT_SEQUENCE.to_string()),
            )
        }
        ExperimentName::Degree => {
            let seeds = resolve_seeds(&file, base_seed, 1);
            let env = file.environment.unwrap_or(Environment::Ppm);
            let degrees = file
                .degrees
                .clone()
                .unwrap_or(vec![1.5, 2.0, 2.5, 3.0, 3.5, 4.0]);
            let mut rows = Vec::new();
            for &seed in &seeds {
                let game = game_for(&file, env, seed)?;
                rows.extend(
                    degree_sweep(&game, &degrees, &cfg)?
                        .into_iter()
                        .map(|r| DegreeCsvRow::new(seed, r)),
                );
            }
            report_unconverged(rows.iter().filter(|r| !r.converged).count(), rows.len());
            write_csv(&rows, a.out.join("degree.csv"))?;
            let ws = (env == Environment::Asset).then(|| WEIGHT_SEQUENCE.to_string());
            (seeds, json!({ "rows": rows.len() }), ws)
        }
    };

    let inputs = serde_json::to_value(&file).expect("config serialises");
    let mut meta = RunMetadata::new(
        serde_json::to_value(a.name)
            .expect("name serialises")
            .as_str()
            .unwrap_or_default(),
        seeds,
        cfg,
        inputs,
    );
    meta.weight_sequence = weight_sequence;
    meta.summary = summary;
    meta.save_json(a.out.join("run_metadata.json"))?;
    println!("wrote results to {}", a.out.display());
    Ok(0)
}

/// Degree sweep row tagged with the instance seed.
#[derive(Serialize)]
struct DegreeCsvRow {
    seed: u64,
    degree: f64,
    gamma: f64,
    tau: f64,
    er: f64,
    variance: f64,
    lpm: f64,
    lpm_reference: f64,
    iterations: usize,
    converged: bool,
}

impl DegreeCsvRow {
    fn new(seed: u64, r: DegreeRow) -> Self {
        Self {
            seed,
            degree: r.degree,
            gamma: r.gamma,
            tau: r.tau,
            er: r.er,
            variance: r.variance,
            lpm: r.lpm,
            lpm_reference: r.lpm_reference,
            iterations: r.iterations,
            converged: r.converged,
        }
    }
}

fn report_unconverged(count: usize, total: usize) {
    if count > 0 {
        log::warn!("{count} of {total} solves stopped at the iteration budget");
    }
}
