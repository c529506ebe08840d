//! Property suites shared by `properties.rs` (one test per suite) and the
//! acceptance run. Every suite draws `CASES` inputs from a deterministic
//! proptest runner; most inputs are seeds that feed a ChaCha generator.

#![allow(dead_code)]

use drae_core::environments::asset::allocations;
use drae_core::environments::ppm::demand_shares;
use drae_core::environments::{
    gen_asset_game, gen_ppm_game, gen_synthetic, AssetSpec, MomentSkewNormal, PpmSpec,
    SyntheticSpec,
};
use drae_core::experiments::{downside_auc_ratio, gamma_sweep, ExperimentConfig, FrontierRow};
use drae_core::qp::{
    best_response_from, best_response_projected_gradient_traced, max_attainable_return,
    project_simplex_floor, projected_gradient_norm, solve_min_risk, QpMethod, QpOptions,
};
use drae_core::risk::{
    covariance_matrix, drae_risk_matrix, lpm, min_eigenvalue, nearest_pd, rae_risk_matrix,
    raw_risk_matrix, symmetric_part, symmetrize_dual, symmetrize_rho, symmetrize_transpose,
};
use drae_core::solver::{best_response, l1_distance, Sfp};
use drae_core::{
    expected_reward, sfp_solve, solve_best_response, Concept, MixedStrategy, RiskConfig, Scheme,
    SfpOptions, StateGame,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::common::{dot, face_enumeration, quad, random_game, random_strategy};

pub const CASES: u32 = 256;

type Outcome = Result<(), TestCaseError>;

fn check<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Outcome) -> Result<(), String> {
    let config = Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn fail(e: impl std::fmt::Display) -> TestCaseError {
    TestCaseError::fail(e.to_string())
}

fn mix(a: &[f64], b: &[f64], alpha: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| alpha * x + (1.0 - alpha) * y)
        .collect()
}

pub fn g_vector(game: &StateGame, opp: &MixedStrategy) -> Vec<f64> {
    (game.mean_reward_matrix() * opp.to_vector())
        .iter()
        .copied()
        .collect()
}

pub type Suite = (&'static str, fn() -> Result<(), String>);

pub const SUITES: &[Suite] = &[
    ("expected_reward_bilinear", expected_reward_bilinear),
    ("expected_reward_brute_force", expected_reward_brute_force),
    (
        "mean_matrix_reproduces_reward",
        mean_matrix_reproduces_reward,
    ),
    (
        "lpm_nonnegative_and_monotone_in_tau",
        lpm_nonnegative_and_monotone_in_tau,
    ),
    ("raw_diagonal_is_lpm", raw_diagonal_is_lpm),
    (
        "symmetrizations_are_symmetric",
        symmetrizations_are_symmetric,
    ),
    (
        "transpose_preserves_quadratic_form",
        transpose_preserves_quadratic_form,
    ),
    ("psd_certificates", psd_certificates),
    ("nearest_pd_idempotent", nearest_pd_idempotent),
    ("covariance_brute_force", covariance_brute_force),
    (
        "balanced_sign_game_matches_covariance",
        balanced_sign_game_matches_covariance,
    ),
    (
        "projection_optimal_vs_brute_force",
        projection_optimal_vs_brute_force,
    ),
    ("projected_gradient_monotone", projected_gradient_monotone),
    (
        "best_response_matches_face_oracle",
        best_response_matches_face_oracle,
    ),
    (
        "best_response_unique_from_any_start",
        best_response_unique_from_any_start,
    ),
    (
        "best_response_kkt_certificate",
        best_response_kkt_certificate,
    ),
    (
        "gamma_zero_limit_is_floored_lp",
        gamma_zero_limit_is_floored_lp,
    ),
    ("min_risk_matches_face_oracle", min_risk_matches_face_oracle),
    (
        "time_average_is_mean_of_responses",
        time_average_is_mean_of_responses,
    ),
    ("fixed_point_certificate", fixed_point_certificate),
    ("gamma_zero_drae_is_nash", gamma_zero_drae_is_nash),
    ("constant_game_equal_values", constant_game_equal_values),
    (
        "minimum_lpm_witness_at_fixed_point",
        minimum_lpm_witness_at_fixed_point,
    ),
    ("generators_deterministic", generators_deterministic),
    ("asset_wealth_conserved", asset_wealth_conserved),
    ("ppm_shares_sum_to_one", ppm_shares_sum_to_one),
    ("skew_normal_moments", skew_normal_moments),
    ("frontier_rows_reproducible", frontier_rows_reproducible),
    ("auc_ratio_scale_invariant", auc_ratio_scale_invariant),
    ("auc_ratio_self_is_one", auc_ratio_self_is_one),
];

/// Runs every suite, returning `(name, passed)` and logging failures.
pub fn run_all() -> Vec<(&'static str, bool)> {
    SUITES
        .iter()
        .map(|(name, suite)| {
            let result = suite();
            if let Err(e) = &result {
                eprintln!("{name}: {e}");
            }
            (*name, result.is_ok())
        })
        .collect()
}

pub fn expected_reward_bilinear() -> Result<(), String> {
    check(
        (any::<u64>(), 1usize..6, 1usize..4, 0.0..=1.0f64),
        |(seed, n, s, alpha)| {
            let mut r = rng(seed);
            let game = random_game(&mut r, n, s);
            let a = random_strategy(&mut r, n, 0.0);
            let b = random_strategy(&mut r, n, 0.0);
            let opp = random_strategy(&mut r, n, 0.0);
            let mixed = validate(mix(a.probs(), b.probs(), alpha))?;
            let lhs = expected_reward(&mixed, &opp, &game).map_err(fail)?;
            let rhs = alpha * expected_reward(&a, &opp, &game).map_err(fail)?
                + (1.0 - alpha) * expected_reward(&b, &opp, &game).map_err(fail)?;
            prop_assert!((lhs - rhs).abs() <= 1e-10, "{lhs} vs {rhs}");
            Ok(())
        },
    )
}

fn validate(v: Vec<f64>) -> Result<MixedStrategy, TestCaseError> {
    let total: f64 = v.iter().sum();
    MixedStrategy::new(v.iter().map(|x| x / total).collect(), 0.0).map_err(fail)
}

pub fn expected_reward_brute_force() -> Result<(), String> {
    check((any::<u64>(), 1usize..=5, 1usize..=3), |(seed, n, s)| {
        let mut r = rng(seed);
        let game = random_game(&mut r, n, s);
        let a = random_strategy(&mut r, n, 0.0);
        let b = random_strategy(&mut r, n, 0.0);
        let mut brute = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..s {
                    brute +=
                        a.probs()[i] * b.probs()[j] * game.state_probs()[k] * game.reward(i, j, k);
                }
            }
        }
        let er = expected_reward(&a, &b, &game).map_err(fail)?;
        prop_assert!((er - brute).abs() <= 1e-12, "{er} vs {brute}");
        Ok(())
    })
}

pub fn mean_matrix_reproduces_reward() -> Result<(), String> {
    check((any::<u64>(), 1usize..8, 1usize..4), |(seed, n, s)| {
        let mut r = rng(seed);
        let game = random_game(&mut r, n, s);
        let a = random_strategy(&mut r, n, 0.0);
        let b = random_strategy(&mut r, n, 0.0);
        let via_matrix = dot(a.probs(), &g_vector(&game, &b));
        let er = expected_reward(&a, &b, &game).map_err(fail)?;
        prop_assert!((er - via_matrix).abs() <= 1e-12);
        Ok(())
    })
}

pub fn lpm_nonnegative_and_monotone_in_tau() -> Result<(), String> {
    check(
        (
            any::<u64>(),
            1usize..6,
            1usize..4,
            1.0..4.0f64,
            prop::collection::vec(-3.0..3.0f64, 2..8),
        ),
        |(seed, n, s, d, mut taus)| {
            let mut r = rng(seed);
            let game = random_game(&mut r, n, s);
            let opp = random_strategy(&mut r, n, 0.0);
            taus.sort_by(f64::total_cmp);
            for i in 0..n {
                let values: Vec<f64> = taus
                    .iter()
                    .map(|&t| lpm(&game, i, &opp, t, d))
                    .collect::<Result<_, _>>()
                    .map_err(fail)?;
                prop_assert!(values.iter().all(|&v| v >= 0.0));
                prop_assert!(values.windows(2).all(|w| w[1] >= w[0]), "{values:?}");
            }
            Ok(())
        },
    )
}

pub fn raw_diagonal_is_lpm() -> Result<(), String> {
    check(
        (
            any::<u64>(),
            1usize..7,
            1usize..4,
            1.0..4.0f64,
            -2.0..2.0f64,
        ),
        |(seed, n, s, d, tau)| {
            let mut r = rng(seed);
            let game = random_game(&mut r, n, s);
            let opp = random_strategy(&mut r, n, 0.0);
            let cfg = RiskConfig {
                tau,
                degree: d,
                ..RiskConfig::default()
            };
            let raw = raw_risk_matrix(&game, &opp, &cfg).map_err(fail)?;
            for i in 0..n {
                let l = lpm(&game, i, &opp, tau, d).map_err(fail)?;
                prop_assert!((raw.values()[(i, i)] - l).abs() <= 1e-12);
            }
            Ok(())
        },
    )
}

fn risk_case(seed: u64, n: usize, s: usize) -> (StateGame, MixedStrategy, RiskConfig) {
    let mut r = rng(seed);
    let game = random_game(&mut r, n, s);
    let opp = random_strategy(&mut r, n, 1e-4);
    let cfg = RiskConfig {
        tau: r.random_range(-1.5..1.5),
        degree: r.random_range(1.5..4.0),
        ..RiskConfig::default()
    };
    (game, opp, cfg)
}

pub fn symmetrizations_are_symmetric() -> Result<(), String> {
    check((any::<u64>(), 1usize..8, 1usize..4), |(seed, n, s)| {
        let (game, opp, cfg) = risk_case(seed, n, s);
        let raw = raw_risk_matrix(&game, &opp, &cfg).map_err(fail)?;
        let outputs = [
            symmetrize_rho(&raw, &game, &opp, &cfg).map_err(fail)?,
            symmetrize_dual(&game, &opp, &cfg).map_err(fail)?,
            symmetrize_transpose(&raw, cfg.pd_jitter).map_err(fail)?,
        ];
        for m in &outputs {
            prop_assert!(m.values() == &m.values().transpose());
        }
        Ok(())
    })
}

pub fn transpose_preserves_quadratic_form() -> Result<(), String> {
    check((any::<u64>(), 1usize..8, 1usize..4), |(seed, n, s)| {
        let (game, opp, cfg) = risk_case(seed, n, s);
        let raw = raw_risk_matrix(&game, &opp, &cfg).map_err(fail)?;
        let sym = symmetric_part(raw.values());
        let proj = symmetrize_transpose(&raw, cfg.pd_jitter).map_err(fail)?;
        let gap = (&sym - proj.values()).norm();
        let mut r = rng(seed ^ 0x5eed);
        for _ in 0..20 {
            let x = random_strategy(&mut r, n, 0.0);
            let norm2 = dot(x.probs(), x.probs());
            let err = (quad(raw.values(), x.probs()) - quad(proj.values(), x.probs())).abs();
            prop_assert!(err <= gap * norm2 + 1e-10, "{err} > {gap}·{norm2}");
            prop_assert!((quad(raw.values(), x.probs()) - quad(&sym, x.probs())).abs() <= 1e-10);
        }
        Ok(())
    })
}

pub fn psd_certificates() -> Result<(), String> {
    check(
        (any::<u64>(), 1usize..8, 1usize..4, 1e-8..1e-3f64),
        |(seed, n, s, jitter)| {
            let (game, opp, cfg) = risk_case(seed, n, s);
            for scheme in [Scheme::Rho, Scheme::Dual, Scheme::Transpose] {
                let cfg = RiskConfig {
                    scheme,
                    pd_jitter: jitter,
                    ..cfg
                };
                let m = drae_risk_matrix(&game, &opp, &cfg).map_err(fail)?;
                let scale = m.values().amax().max(1.0);
                prop_assert!(
                    min_eigenvalue(m.values()) >= jitter - 1e-12 * scale,
                    "{scheme:?}"
                );
                prop_assert!(m.values().clone().cholesky().is_some());
            }
            let c = rae_risk_matrix(&game, &opp, jitter).map_err(fail)?;
            prop_assert!(min_eigenvalue(c.values()) >= jitter - 1e-12 * c.values().amax().max(1.0));
            Ok(())
        },
    )
}

pub fn nearest_pd_idempotent() -> Result<(), String> {
    check(
        (any::<u64>(), 1usize..10, 1e-8..1e-2f64),
        |(seed, n, delta)| {
            let mut r = rng(seed);
            let a = symmetric_part(&DMatrix::from_fn(n, n, |_, _| r.random_range(-2.0..2.0)));
            let once = nearest_pd(&a, delta).map_err(fail)?;
            let twice = nearest_pd(&once, delta).map_err(fail)?;
            prop_assert!((&once - &twice).amax() <= 1e-10);
            Ok(())
        },
    )
}

pub fn covariance_brute_force() -> Result<(), String> {
    check((any::<u64>(), 1usize..7), |(seed, n)| {
        let mut r = rng(seed);
        let game = random_game(&mut r, n, 1);
        let opp = random_strategy(&mut r, n, 0.0);
        let w = opp.probs();
        let cov = covariance_matrix(&game, &opp).map_err(fail)?;
        for i in 0..n {
            for j in 0..n {
                let mi: f64 = (0..n).map(|k| w[k] * game.reward(i, k, 0)).sum();
                let mj: f64 = (0..n).map(|k| w[k] * game.reward(j, k, 0)).sum();
                let c: f64 = (0..n)
                    .map(|k| w[k] * (game.reward(i, k, 0) - mi) * (game.reward(j, k, 0) - mj))
                    .sum();
                prop_assert!((cov.values()[(i, j)] - c).abs() <= 1e-12);
            }
        }
        Ok(())
    })
}

/// Symmetric circulant ±1 game whose rows each hold as many wins as
/// losses, so every action has mean 0 and variance 1 under uniform play.
fn balanced_sign_game(half: usize, seed: u64) -> StateGame {
    let n = 2 * half;
    let mut r = rng(seed);
    let mut c = vec![0.0; n];
    loop {
        for k in 0..=half {
            let v = if r.random_bool(0.5) { 1.0 } else { -1.0 };
            c[k] = v;
            c[(n - k) % n] = v;
        }
        if c.iter().sum::<f64>() == 0.0 {
            break;
        }
    }
    let m = DMatrix::from_fn(n, n, |i, j| c[(j + n - i) % n]);
    StateGame::from_matrix(&m).unwrap()
}

pub fn balanced_sign_game_matches_covariance() -> Result<(), String> {
    check((any::<u64>(), 1usize..6), |(seed, half)| {
        let game = balanced_sign_game(half, seed);
        let n = game.n_actions();
        let opp = MixedStrategy::uniform(n);
        let cfg = RiskConfig {
            tau: 0.0,
            degree: 2.0,
            ..RiskConfig::default()
        };
        let raw = raw_risk_matrix(&game, &opp, &cfg).map_err(fail)?;
        let cov = covariance_matrix(&game, &opp).map_err(fail)?;
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (raw.values()[(i, j)], cov.values()[(i, j)]);
                prop_assert!(a.signum() == b.signum() || (a.abs() < 1e-15 && b.abs() < 1e-15));
                prop_assert!((a - b / (2.0 * n as f64)).abs() <= 1e-12);
            }
        }
        if n == 2 {
            let first = raw.values()[(0, 0)].abs();
            prop_assert!(raw
                .values()
                .iter()
                .all(|v| (v.abs() - first).abs() <= 1e-15));
        }
        Ok(())
    })
}

pub fn projection_optimal_vs_brute_force() -> Result<(), String> {
    check(
        (
            prop::collection::vec(-5.0..5.0f64, 1..9),
            0.0..1.0f64,
            any::<u64>(),
        ),
        |(v, frac, seed)| {
            let n = v.len();
            let eps = frac * 0.9 / n as f64;
            let x = project_simplex_floor(&v, eps).map_err(fail)?;
            prop_assert!(x.iter().all(|&xi| xi >= eps - 1e-15));
            prop_assert!((x.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            let dist = |y: &[f64]| {
                y.iter()
                    .zip(&v)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            };
            let best = dist(&x);
            // The variational inequality at every vertex certifies optimality.
            for k in 0..n {
                let mut y = vec![eps; n];
                y[k] = 1.0 - (n - 1) as f64 * eps;
                let vi: f64 = (0..n).map(|i| (v[i] - x[i]) * (y[i] - x[i])).sum();
                prop_assert!(vi <= 1e-10, "vertex {k}: {vi}");
            }
            let mut r = rng(seed);
            for _ in 0..200 {
                let y = random_strategy(&mut r, n, eps);
                prop_assert!(dist(y.probs()) >= best - 1e-12);
            }
            Ok(())
        },
    )
}

pub fn qp_case(seed: u64, n: usize) -> (StateGame, MixedStrategy, drae_core::RiskMatrix, f64) {
    let mut r = rng(seed);
    let s = r.random_range(1..4);
    let game = random_game(&mut r, n, s);
    let opp = random_strategy(&mut r, n, 1e-4);
    let cfg = RiskConfig {
        tau: game.uniform_play_value() + r.random_range(-0.5..0.5),
        degree: r.random_range(1.5..3.5),
        scheme: [Scheme::Rho, Scheme::Dual, Scheme::Transpose][r.random_range(0..3)],
        ..RiskConfig::default()
    };
    let risk = drae_risk_matrix(&game, &opp, &cfg).unwrap();
    let gamma = 10f64.powf(r.random_range(-2.0..2.5));
    (game, opp, risk, gamma)
}

pub fn projected_gradient_monotone() -> Result<(), String> {
    check((any::<u64>(), 2usize..10), |(seed, n)| {
        let (game, opp, risk, gamma) = qp_case(seed, n);
        let opts = QpOptions {
            method: QpMethod::ProjectedGradient,
            ..QpOptions::default()
        };
        let (_, trace) = best_response_projected_gradient_traced(
            game.mean_reward_matrix(),
            &opp,
            &risk,
            gamma,
            &opts,
            None,
        )
        .map_err(fail)?;
        prop_assert!(trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        Ok(())
    })
}

pub fn best_response_matches_face_oracle() -> Result<(), String> {
    check((any::<u64>(), 2usize..=5), |(seed, n)| {
        let (game, opp, risk, gamma) = qp_case(seed, n);
        let opts = QpOptions::default();
        let g = g_vector(&game, &opp);
        let q = risk.values() * gamma;
        let (_, oracle) =
            face_enumeration(&q, &g, opts.eps, None).ok_or_else(|| fail("no candidate"))?;
        for method in [QpMethod::ActiveSet, QpMethod::ProjectedGradient] {
            let sol = solve_best_response(
                game.mean_reward_matrix(),
                &opp,
                &risk,
                gamma,
                &QpOptions { method, ..opts },
            )
            .map_err(fail)?;
            let ours = quad(&q, sol.strategy.probs()) - dot(&g, sol.strategy.probs());
            let scale = 1.0 + oracle.abs();
            prop_assert!(
                ours <= oracle + 1e-7 * scale,
                "{method:?}: {ours} vs {oracle}"
            );
        }
        Ok(())
    })
}

pub fn best_response_unique_from_any_start() -> Result<(), String> {
    check((any::<u64>(), 2usize..10), |(seed, n)| {
        let (game, opp, risk, gamma) = qp_case(seed, n);
        let opts = QpOptions::default();
        let mut r = rng(seed ^ 0xfeed);
        let a = random_strategy(&mut r, n, opts.eps);
        let b = random_strategy(&mut r, n, opts.eps);
        let m = game.mean_reward_matrix();
        let sa = best_response_from(m, &opp, &risk, gamma, &opts, Some(a.probs())).map_err(fail)?;
        let sb = best_response_from(m, &opp, &risk, gamma, &opts, Some(b.probs())).map_err(fail)?;
        let d = l1_distance(sa.strategy.probs(), sb.strategy.probs());
        prop_assert!(d <= 1e-6, "{d}");
        Ok(())
    })
}

pub fn best_response_kkt_certificate() -> Result<(), String> {
    check((any::<u64>(), 2usize..12), |(seed, n)| {
        let (game, opp, risk, gamma) = qp_case(seed, n);
        let opts = QpOptions::default();
        let m = game.mean_reward_matrix();
        let sol = solve_best_response(m, &opp, &risk, gamma, &opts).map_err(fail)?;
        let pg = projected_gradient_norm(m, &opp, &risk, gamma, &sol.strategy).map_err(fail)?;
        prop_assert!(sol.converged);
        prop_assert!(pg <= opts.tol, "{pg}");
        Ok(())
    })
}

pub fn gamma_zero_limit_is_floored_lp() -> Result<(), String> {
    check(
        (
            any::<u64>(),
            2usize..10,
            prop::sample::select(vec![0.0, 1e-12, 1e-9]),
        ),
        |(seed, n, gamma)| {
            let (game, opp, risk, _) = qp_case(seed, n);
            let opts = QpOptions::default();
            let g = g_vector(&game, &opp);
            let sol = solve_best_response(game.mean_reward_matrix(), &opp, &risk, gamma, &opts)
                .map_err(fail)?;
            let lp = max_attainable_return(&g, opts.eps);
            prop_assert!((dot(&g, sol.strategy.probs()) - lp).abs() <= 1e-6);
            Ok(())
        },
    )
}

pub fn min_risk_matches_face_oracle() -> Result<(), String> {
    check(
        (any::<u64>(), 2usize..=5, 0.0..1.0f64),
        |(seed, n, level)| {
            let (game, opp, risk, _) = qp_case(seed, n);
            let eps = 1e-4;
            let g = g_vector(&game, &opp);
            let lo = g.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = max_attainable_return(&g, eps);
            let mu_b = lo + level * (hi - lo);
            let sol = solve_min_risk(&risk, game.mean_reward_matrix(), &opp, mu_b, eps, 1e-10)
                .map_err(fail)?;
            let (_, oracle) = face_enumeration(risk.values(), &vec![0.0; n], eps, Some((&g, mu_b)))
                .ok_or_else(|| fail("no candidate"))?;
            prop_assert!(dot(&g, sol.strategy.probs()) >= mu_b - 1e-9);
            prop_assert!(
                (sol.objective - oracle).abs() <= 1e-8 * (1.0 + oracle.abs()),
                "{} vs {oracle}",
                sol.objective
            );
            Ok(())
        },
    )
}

pub fn small_sfp_case(seed: u64) -> (StateGame, RiskConfig) {
    let mut r = rng(seed);
    let n = r.random_range(2..5);
    let s = r.random_range(1..3);
    let game = random_game(&mut r, n, s);
    let cfg = RiskConfig {
        tau: game.uniform_play_value(),
        gamma: 10f64.powf(r.random_range(-1.0..2.0)),
        ..RiskConfig::default()
    };
    (game, cfg)
}

pub fn time_average_is_mean_of_responses() -> Result<(), String> {
    check(
        (
            any::<u64>(),
            1usize..30,
            prop::sample::select(Concept::ALL.to_vec()),
        ),
        |(seed, steps, concept)| {
            let (game, cfg) = small_sfp_case(seed);
            let n = game.n_actions();
            let mut sfp = Sfp::new(&game, &cfg, concept, &SfpOptions::default()).map_err(fail)?;
            let mut sums = (vec![0.0; n], vec![0.0; n]);
            for _ in 0..steps {
                let state = sfp.step().map_err(fail)?;
                for i in 0..n {
                    sums.0[i] += state.last_br.0.probs()[i];
                    sums.1[i] += state.last_br.1.probs()[i];
                }
            }
            let state = sfp.state();
            for i in 0..n {
                prop_assert!((state.z_self.probs()[i] - sums.0[i] / steps as f64).abs() <= 1e-12);
                prop_assert!((state.z_opp.probs()[i] - sums.1[i] / steps as f64).abs() <= 1e-12);
            }
            Ok(())
        },
    )
}

pub fn fixed_point_certificate() -> Result<(), String> {
    check(any::<u64>(), |seed| {
        let (game, cfg) = small_sfp_case(seed);
        let opts = SfpOptions {
            max_iter: 2000,
            ..SfpOptions::default()
        };
        let p = sfp_solve(&game, &cfg, Concept::Drae, &opts).map_err(fail)?;
        if !p.converged {
            return Ok(());
        }
        let scale = (p.iterations + 1) as f64;
        for (own, other) in [
            (&p.strategy_p1, &p.strategy_p2),
            (&p.strategy_p2, &p.strategy_p1),
        ] {
            let br = best_response(&game, &cfg, Concept::Drae, other, &opts, None).map_err(fail)?;
            let step = l1_distance(br.probs(), own.probs()) / scale;
            prop_assert!(step <= 10.0 * opts.drift_tol, "{step}");
        }
        Ok(())
    })
}

pub fn gamma_zero_drae_is_nash() -> Result<(), String> {
    check(any::<u64>(), |seed| {
        let (game, cfg) = small_sfp_case(seed);
        let cfg = RiskConfig { gamma: 0.0, ..cfg };
        let opts = SfpOptions {
            max_iter: 300,
            ..SfpOptions::default()
        };
        let drae = sfp_solve(&game, &cfg, Concept::Drae, &opts).map_err(fail)?;
        let nash = sfp_solve(&game, &cfg, Concept::Nash, &opts).map_err(fail)?;
        prop_assert!(l1_distance(drae.strategy_p1.probs(), nash.strategy_p1.probs()) <= 1e-6);
        prop_assert!(l1_distance(drae.strategy_p2.probs(), nash.strategy_p2.probs()) <= 1e-6);
        Ok(())
    })
}

pub fn constant_game_equal_values() -> Result<(), String> {
    check(
        (1usize..6, 1usize..4, -5.0..5.0f64, 0.0..50.0f64),
        |(n, s, c, gamma)| {
            let game =
                StateGame::new(n, s, vec![c; n * n * s], vec![1.0 / s as f64; s]).map_err(fail)?;
            let cfg = RiskConfig {
                tau: game.uniform_play_value(),
                gamma,
                ..RiskConfig::default()
            };
            let ers: Vec<f64> = Concept::ALL
                .iter()
                .map(|&k| sfp_solve(&game, &cfg, k, &SfpOptions::default()).map(|p| p.er))
                .collect::<Result<_, _>>()
                .map_err(fail)?;
            prop_assert!(ers.iter().all(|&e| e == ers[0]), "{ers:?}");
            Ok(())
        },
    )
}

/// The equilibrium response to the opponent's converged average is not
/// dominated in (expected reward, risk) by random feasible strategies. Risk
/// is the DRAE matrix that response minimises.
pub fn minimum_lpm_witness_at_fixed_point() -> Result<(), String> {
    check(any::<u64>(), |seed| {
        let (game, cfg) = small_sfp_case(seed);
        let opts = SfpOptions {
            max_iter: 2000,
            ..SfpOptions::default()
        };
        let p = sfp_solve(&game, &cfg, Concept::Drae, &opts).map_err(fail)?;
        if !p.converged {
            return Ok(());
        }
        let n = game.n_actions();
        let risk = drae_risk_matrix(&game, &p.strategy_p2, &cfg).map_err(fail)?;
        let sigma =
            best_response(&game, &cfg, Concept::Drae, &p.strategy_p2, &opts, None).map_err(fail)?;
        let g = g_vector(&game, &p.strategy_p2);
        let er = dot(&g, sigma.probs());
        let lpm = quad(risk.values(), sigma.probs());
        let mut r = rng(seed ^ 0xabc);
        for _ in 0..10_000 {
            let y = random_strategy(&mut r, n, opts.eps);
            let dominates = dot(&g, y.probs()) >= er && quad(risk.values(), y.probs()) < lpm - 1e-6;
            prop_assert!(!dominates, "sample {:?} dominates", y.probs());
        }
        Ok(())
    })
}

pub fn generators_deterministic() -> Result<(), String> {
    check((any::<u64>(), 3usize..12, 1usize..4), |(seed, n, s)| {
        let syn = SyntheticSpec {
            n_states: s,
            ..SyntheticSpec::scaled(n, seed)
        };
        let s1 = gen_synthetic(&syn).map_err(fail)?;
        let s2 = gen_synthetic(&syn).map_err(fail)?;
        prop_assert!(s1.game == s2.game && s1.profiles == s2.profiles);
        let asset = AssetSpec {
            n_portfolios: n,
            n_assets: 3,
            n_states: s,
            seed,
            ..AssetSpec::default()
        };
        let a1 = gen_asset_game(&asset).map_err(fail)?;
        let a2 = gen_asset_game(&asset).map_err(fail)?;
        prop_assert!(a1.game == a2.game && a1.portfolios == a2.portfolios);
        let ppm = PpmSpec {
            demand_states: s,
            demand_volatility: 0.3,
            ..PpmSpec::random(3, 2, seed).map_err(fail)?
        };
        prop_assert!(gen_ppm_game(&ppm).map_err(fail)? == gen_ppm_game(&ppm).map_err(fail)?);
        prop_assert!(
            PpmSpec::random(3, 2, seed).map_err(fail)?
                == PpmSpec::random(3, 2, seed).map_err(fail)?
        );
        Ok(())
    })
}

pub fn asset_wealth_conserved() -> Result<(), String> {
    check(
        (any::<u64>(), 1usize..12, 0.01..1.0f64, 0.01..1.0f64),
        |(seed, m, w1, w2)| {
            let mut r = rng(seed);
            let a = random_strategy(&mut r, m, 0.0);
            let b = random_strategy(&mut r, m, 0.0);
            let mut pa = a.into_vec();
            let pb = b.into_vec();
            if m > 1 {
                pa[0] += pa[1];
                pa[1] = 0.0;
            }
            let share = allocations(&pa, &pb, (w1, w2));
            for (k, &x) in share.iter().enumerate() {
                let invested = pa[k] * w1 + pb[k] * w2;
                if invested > 0.0 {
                    let other = if pb[k] * w2 > 0.0 { 1.0 - x } else { 0.0 };
                    prop_assert!((x + other - 1.0).abs() <= 1e-12);
                    prop_assert!((x - pa[k] * w1 / invested).abs() <= 1e-12);
                }
            }
            Ok(())
        },
    )
}

pub fn ppm_shares_sum_to_one() -> Result<(), String> {
    check(
        (any::<u64>(), 1usize..6, 1usize..4),
        |(seed, products, segments)| {
            let spec = PpmSpec::random(products, segments, seed).map_err(fail)?;
            let mut r = rng(seed);
            let own = r.random_range(1..(1usize << products));
            let other = r.random_range(1..(1usize << products));
            for k in 0..segments {
                for (a, b) in [(own, other), (other, own)] {
                    let total: f64 = demand_shares(a, b, &spec, k)
                        .iter()
                        .map(|(_, share)| share)
                        .sum();
                    prop_assert!((total - 1.0).abs() <= 1e-12, "{total}");
                }
            }
            Ok(())
        },
    )
}

pub fn skew_normal_moments() -> Result<(), String> {
    check(
        (any::<u64>(), -2.0..2.0f64, 0.5..3.0f64, -8.0..8.0f64),
        |(seed, mean, var, kappa)| {
            let dist = MomentSkewNormal::new(mean, var, kappa).map_err(fail)?;
            let mut r = rng(seed);
            let draws: Vec<f64> = (0..100_000).map(|_| dist.sample(&mut r)).collect();
            let m = draws.iter().sum::<f64>() / draws.len() as f64;
            let v = draws.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (draws.len() - 1) as f64;
            prop_assert!((m - mean).abs() <= 0.05 * var.sqrt(), "mean {m} vs {mean}");
            prop_assert!((v - var).abs() <= 0.05 * var, "variance {v} vs {var}");
            Ok(())
        },
    )
}

pub fn frontier_rows_reproducible() -> Result<(), String> {
    check((any::<u64>(), 1usize..4), |(seed, jobs)| {
        let game = gen_synthetic(&SyntheticSpec::scaled(5, seed))
            .map_err(fail)?
            .game;
        let cfg = ExperimentConfig {
            sfp: SfpOptions {
                max_iter: 20,
                ..SfpOptions::default()
            },
            jobs,
            ..ExperimentConfig::default()
        };
        let serial = ExperimentConfig {
            jobs: 1,
            ..cfg.clone()
        };
        let gammas = [0.1, 1.0, 10.0];
        let a = gamma_sweep(&game, &[Concept::Rae, Concept::Drae], &gammas, &cfg, seed)
            .map_err(fail)?;
        let b = gamma_sweep(
            &game,
            &[Concept::Rae, Concept::Drae],
            &gammas,
            &serial,
            seed,
        )
        .map_err(fail)?;
        prop_assert!(a == b);
        Ok(())
    })
}

fn random_frontier(r: &mut ChaCha8Rng, concept: Concept) -> Vec<FrontierRow> {
    let k = r.random_range(2..10);
    (0..k)
        .map(|i| FrontierRow {
            concept,
            gamma: i as f64,
            tau: 0.0,
            degree: 2.0,
            scheme: Scheme::Transpose,
            er: r.random_range(0.0..1.0),
            variance: 0.0,
            lpm: r.random_range(0.01..2.0),
            iterations: 1,
            converged: true,
            seed: 0,
        })
        .collect()
}

pub fn auc_ratio_scale_invariant() -> Result<(), String> {
    check((any::<u64>(), 1e-3..1e3f64), |(seed, c)| {
        let mut r = rng(seed);
        let mut drae = random_frontier(&mut r, Concept::Drae);
        let mut rae = random_frontier(&mut r, Concept::Rae);
        drae.push(FrontierRow {
            er: 0.0,
            ..drae[0].clone()
        });
        drae.push(FrontierRow {
            er: 1.0,
            ..drae[0].clone()
        });
        rae.push(FrontierRow {
            er: 0.0,
            ..rae[0].clone()
        });
        rae.push(FrontierRow {
            er: 1.0,
            ..rae[0].clone()
        });
        let base = downside_auc_ratio(&drae, &rae).map_err(fail)?;
        let scale = |rows: &[FrontierRow]| -> Vec<FrontierRow> {
            rows.iter()
                .map(|row| FrontierRow {
                    lpm: row.lpm * c,
                    ..row.clone()
                })
                .collect()
        };
        let scaled = downside_auc_ratio(&scale(&drae), &scale(&rae)).map_err(fail)?;
        prop_assert!(
            (base - scaled).abs() <= 1e-12 * base.abs().max(1.0),
            "{base} vs {scaled}"
        );
        Ok(())
    })
}

pub fn auc_ratio_self_is_one() -> Result<(), String> {
    check(any::<u64>(), |seed| {
        let mut r = rng(seed);
        let rows = random_frontier(&mut r, Concept::Drae);
        let spread = rows.iter().map(|x| x.er).fold(f64::NEG_INFINITY, f64::max)
            - rows.iter().map(|x| x.er).fold(f64::INFINITY, f64::min);
        if spread <= 0.0 {
            return Ok(());
        }
        prop_assert!(downside_auc_ratio(&rows, &rows).map_err(fail)? == 1.0);
        Ok(())
    })
}
