//! Quadratic best responses over the floored simplex
//! `{σ : σ_a >= ε, Σ_a σ_a = 1}`.
//!
//! Two programs are solved here:
//!
//! * the risk-aware best response `max σᵀM̄ς − γ σᵀΣσ`, and
//! * the minimum-risk program `min σᵀΣσ` subject to `σᵀM̄ς >= μ_b`.
//!
//! Both go through a primal active-set method that fixes floored
//! coordinates and solves the equality-constrained KKT system on the free
//! ones. A monotone projected-gradient method is kept as a fallback and as
//! an independent route for cross-checking.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid_config, DraeError, Result};
use crate::game::{check_floor, ensure_same_len, MixedStrategy, DEFAULT_EPS};
use crate::risk::{RiskMatrix, Stage};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Coordinates within this distance of the floor count as active.
const BOUND_SNAP: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpMethod {
    #[default]
    ActiveSet,
    ProjectedGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QpOptions {
    pub eps: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub method: QpMethod,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            eps: DEFAULT_EPS,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            method: QpMethod::ActiveSet,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub strategy: MixedStrategy,
    /// Utility `gᵀσ − γσᵀΣσ` for best responses, `σᵀΣσ` for minimum risk.
    pub objective: f64,
    /// Largest violation of stationarity, dual feasibility or
    /// complementarity, relative to the problem scale.
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Euclidean projection of `v` onto `{x >= eps, Σx = 1}`.
///
/// Shifting by `eps` turns this into a projection onto the simplex of
/// radius `1 − n·eps`, done with the usual sort-and-threshold rule.
pub fn project_simplex_floor(v: &[f64], eps: f64) -> Result<Vec<f64>> {
    let n = v.len();
    if n == 0 {
        return Err(invalid_config("v", "cannot project an empty vector"));
    }
    check_floor(n, eps)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(DraeError::NonFinite("projection input"));
    }
    let radius = (1.0 - eps * n as f64).max(0.0);
    if radius == 0.0 {
        return Ok(vec![eps; n]);
    }
    let mut sorted: Vec<f64> = v.iter().map(|x| x - eps).collect();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - radius) / (k + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    Ok(v.iter().map(|x| (x - eps - theta).max(0.0) + eps).collect())
}

/// `‖σ − Π(σ − ∇f(σ))‖∞` for the minimisation form `f = γσᵀΣσ − gᵀσ`.
pub fn projected_gradient_norm(
    mean_m: &DMatrix<f64>,
    varsigma: &MixedStrategy,
    risk: &RiskMatrix,
    gamma: f64,
    sigma: &MixedStrategy,
) -> Result<f64> {
    let problem = BrProblem::new(mean_m, varsigma, risk, gamma)?;
    let x = sigma.probs();
    let grad = problem.gradient(x);
    let step: Vec<f64> = x.iter().zip(&grad).map(|(x, g)| x - g).collect();
    let proj = project_simplex_floor(&step, sigma.eps_floor())?;
    Ok(x.iter()
        .zip(&proj)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// The floored linear program `max gᵀσ`. Ties share the free mass equally.
pub(crate) fn floored_lp(g: &[f64], eps: f64) -> Vec<f64> {
    let n = g.len();
    let best = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tie = 1e-12 * best.abs().max(1.0);
    let winners: Vec<usize> = (0..n).filter(|&i| g[i] >= best - tie).collect();
    let k = winners.len();
    let share = (1.0 - (n - k) as f64 * eps) / k as f64;
    let mut x = vec![eps; n];
    for i in winners {
        x[i] = share;
    }
    x
}

/// Largest `gᵀσ` attainable on the floored simplex.
pub fn max_attainable_return(g: &[f64], eps: f64) -> f64 {
    let x = floored_lp(g, eps);
    dot(&x, g)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct BrProblem {
    /// `g = M̄ ς`.
    g: Vec<f64>,
    /// Hessian of the minimisation form, `2γΣ`.
    h: DMatrix<f64>,
    gamma: f64,
    risk: DMatrix<f64>,
}

impl BrProblem {
    fn new(
        mean_m: &DMatrix<f64>,
        varsigma: &MixedStrategy,
        risk: &RiskMatrix,
        gamma: f64,
    ) -> Result<Self> {
        let n = mean_m.nrows();
        ensure_same_len(n, mean_m.ncols(), "mean reward matrix columns")?;
        ensure_same_len(n, varsigma.len(), "varsigma")?;
        ensure_same_len(n, risk.dim(), "risk matrix")?;
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(invalid_config(
                "gamma",
                format!("must be >= 0, got {gamma}"),
            ));
        }
        let g = (mean_m * varsigma.to_vector()).as_slice().to_vec();
        Ok(Self {
            g,
            h: risk.values() * (2.0 * gamma),
            gamma,
            risk: risk.values().clone(),
        })
    }

    fn utility(&self, x: &[f64]) -> f64 {
        dot(&self.g, x) - self.gamma * crate::game::bilinear(&self.risk, x, x)
    }

    /// Gradient of the minimisation form `½xᵀHx − gᵀx`.
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let hx = &self.h * DVector::from_column_slice(x);
        hx.iter().zip(&self.g).map(|(a, b)| a - b).collect()
    }

    fn scale(&self) -> f64 {
        1.0_f64.max(inf_norm(&self.g)).max(self.h.abs().max())
    }
}

fn check_risk_stage(risk: &RiskMatrix) -> Result<()> {
    match risk.stage() {
        Stage::PdProjected => Ok(()),
        Stage::Symmetrized => {
            let min = risk.min_eigenvalue();
            if min < -1e-10 {
                Err(invalid_config(
                    "risk",
                    format!("symmetrized risk matrix is indefinite (min eigenvalue {min:e})"),
                ))
            } else {
                Ok(())
            }
        }
        Stage::Raw => Err(invalid_config(
            "risk",
            "raw risk matrices must be symmetrized before optimisation",
        )),
    }
}

/// Risk-aware best response `argmax σᵀM̄ς − γσᵀΣσ` over the floored simplex.
pub fn solve_best_response(
    mean_m: &DMatrix<f64>,
    varsigma: &MixedStrategy,
    risk: &RiskMatrix,
    gamma: f64,
    opts: &QpOptions,
) -> Result<QpSolution> {
    check_risk_stage(risk)?;
    best_response_from(mean_m, varsigma, risk, gamma, opts, None)
}

/// As [`solve_best_response`], starting from `init` when given. The risk
/// matrix stage is trusted; callers hold a PD-projected matrix.
pub fn best_response_from(
    mean_m: &DMatrix<f64>,
    varsigma: &MixedStrategy,
    risk: &RiskMatrix,
    gamma: f64,
    opts: &QpOptions,
    init: Option<&[f64]>,
) -> Result<QpSolution> {
    let n = mean_m.nrows();
    check_floor(n, opts.eps)?;
    let problem = BrProblem::new(mean_m, varsigma, risk, gamma)?;
    let eps = opts.eps;

    if gamma == 0.0 || problem.h.iter().all(|&v| v == 0.0) {
        let x = floored_lp(&problem.g, eps);
        return Ok(finish_br(&problem, x, eps, 0, opts.tol));
    }

    let start = match init {
        Some(v) => {
            ensure_same_len(n, v.len(), "initial point")?;
            project_simplex_floor(v, eps)?
        }
        None => vec![1.0 / n as f64; n],
    };

    let outcome = match opts.method {
        QpMethod::ActiveSet => {
            let engine = ActiveSet {
                h: &problem.h,
                c: problem.g.iter().map(|g| -g).collect(),
                eps,
                ret: None,
                scale: problem.scale(),
            };
            match engine.run(start.clone(), opts.max_iter) {
                Ok(o) => o,
                Err(_) => {
                    log::debug!("active set hit a singular KKT system; using projected gradient");
                    projected_gradient(&problem, start, eps, opts, None)
                }
            }
        }
        QpMethod::ProjectedGradient => projected_gradient(&problem, start, eps, opts, None),
    };
    Ok(finish_br(
        &problem,
        outcome.x,
        eps,
        outcome.iterations,
        opts.tol,
    ))
}

fn finish_br(
    problem: &BrProblem,
    x: Vec<f64>,
    eps: f64,
    iterations: usize,
    tol: f64,
) -> QpSolution {
    let x = polish(x, eps);
    let grad = problem.gradient(&x);
    let kkt_residual = kkt_residual(&x, &grad, eps, None, problem.scale());
    QpSolution {
        objective: problem.utility(&x),
        strategy: MixedStrategy::from_raw(x, eps),
        kkt_residual,
        iterations,
        converged: kkt_residual <= tol,
    }
}

/// Snaps near-floor coordinates and removes rounding drift from the sum.
fn polish(mut x: Vec<f64>, eps: f64) -> Vec<f64> {
    for v in x.iter_mut() {
        if *v < eps + BOUND_SNAP {
            *v = eps;
        }
    }
    let excess: f64 = x.iter().sum::<f64>() - 1.0;
    if excess != 0.0 {
        let free: Vec<usize> = (0..x.len()).filter(|&i| x[i] > eps).collect();
        if !free.is_empty() {
            let share = excess / free.len() as f64;
            for i in free {
                x[i] = (x[i] - share).max(eps);
            }
        }
    }
    x
}

/// Return constraint `aᵀx >= b` for the minimum-risk program.
#[derive(Clone, Copy)]
struct ReturnFloor<'a> {
    a: &'a [f64],
    b: f64,
}

/// KKT violation at `x` for `min f` over the floored simplex, optionally
/// with a return floor. Multipliers are fitted by least squares on the free
/// coordinates.
fn kkt_residual(
    x: &[f64],
    grad: &[f64],
    eps: f64,
    ret: Option<ReturnFloor<'_>>,
    scale: f64,
) -> f64 {
    let n = x.len();
    let free: Vec<usize> = (0..n).filter(|&i| x[i] > eps + 1e-12).collect();
    let ret_active = ret.filter(|r| {
        let slack = dot(r.a, x) - r.b;
        slack <= 1e-9 * r.b.abs().max(1.0)
    });
    if free.is_empty() {
        return 0.0;
    }

    // Fit grad_F + ν·1 − η·a_F ≈ 0.
    let (nu, eta) = match ret_active {
        None => (
            -free.iter().map(|&i| grad[i]).sum::<f64>() / free.len() as f64,
            0.0,
        ),
        Some(r) => {
            let m = free.len() as f64;
            let sa: f64 = free.iter().map(|&i| r.a[i]).sum();
            let saa: f64 = free.iter().map(|&i| r.a[i] * r.a[i]).sum();
            let sg: f64 = free.iter().map(|&i| grad[i]).sum();
            let sag: f64 = free.iter().map(|&i| r.a[i] * grad[i]).sum();
            // Normal equations for [1, -a] [ν, η]ᵀ = -grad.
            let det = m * saa - sa * sa;
            if det.abs() <= 1e-14 * (m * saa).max(1.0) {
                (-sg / m, 0.0)
            } else {
                let nu = (-sg * saa + sa * sag) / det;
                let eta = (m * sag - sa * sg) / det;
                (nu, eta)
            }
        }
    };
    let a_at = |i: usize| ret_active.map_or(0.0, |r| r.a[i]);
    let mut worst: f64 = (-eta).max(0.0);
    for i in 0..n {
        let reduced = grad[i] + nu - eta * a_at(i);
        let violation = if x[i] > eps + 1e-12 {
            reduced.abs()
        } else {
            (-reduced).max(0.0)
        };
        worst = worst.max(violation);
    }
    worst / scale
}

struct Outcome {
    x: Vec<f64>,
    iterations: usize,
    converged: bool,
}

#[derive(Debug)]
struct SingularKkt;

/// Primal active-set method for `min ½xᵀHx + cᵀx` over the floored simplex,
/// with an optional return floor `aᵀx >= b`.
struct ActiveSet<'a> {
    h: &'a DMatrix<f64>,
    c: Vec<f64>,
    eps: f64,
    ret: Option<ReturnFloor<'a>>,
    scale: f64,
}

struct Direction {
    p: Vec<f64>,
    nu: f64,
    /// Multiplier of the return row, `None` when the row was left out.
    lambda_ret: Option<f64>,
}

impl ActiveSet<'_> {
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let hx = self.h * DVector::from_column_slice(x);
        hx.iter().zip(&self.c).map(|(a, b)| a + b).collect()
    }

    /// Solves `[H_FF Cᵀ; C 0][p; λ] = [−grad_F; 0]` with rows `C = [1; a_F]`.
    fn direction(
        &self,
        free: &[usize],
        grad: &[f64],
        use_ret: bool,
    ) -> std::result::Result<Direction, SingularKkt> {
        let m = free.len();
        let ret_row: Option<Vec<f64>> = if use_ret {
            let r = self
                .ret
                .expect("return row requested without a return floor");
            let a: Vec<f64> = free.iter().map(|&i| r.a[i]).collect();
            // A return row proportional to the sum row on the free set adds
            // nothing and would make the system singular.
            let mean = a.iter().sum::<f64>() / m as f64;
            let spread = a.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
            (spread > 1e-12 * inf_norm(r.a).max(1.0)).then_some(a)
        } else {
            None
        };
        let rows = 1 + usize::from(ret_row.is_some());
        let mut c_t = DMatrix::<f64>::from_element(m, rows, 1.0);
        if let Some(row) = &ret_row {
            c_t.set_column(1, &DVector::from_column_slice(row));
        }
        let neg_grad = DVector::from_iterator(m, free.iter().map(|&i| -grad[i]));
        let h_ff = DMatrix::from_fn(m, m, |a, b| self.h[(free[a], free[b])]);

        // Null-space solve: the trailing columns of an orthonormal basis that
        // starts with the constraint rows span the face.
        let p = if m > rows {
            let mut aug = DMatrix::<f64>::zeros(m, rows + m);
            aug.columns_mut(0, rows).copy_from(&c_t);
            aug.columns_mut(rows, m).fill_with_identity();
            let q = aug.qr().q();
            let z = q.columns(rows, m - rows).into_owned();
            let reduced = z.tr_mul(&(&h_ff * &z));
            let rhs = z.tr_mul(&neg_grad);
            let w = match reduced.clone().cholesky() {
                Some(chol) => chol.solve(&rhs),
                None => reduced.lu().solve(&rhs).ok_or(SingularKkt)?,
            };
            project_out_rows(z * w, ret_row.as_deref())
        } else {
            DVector::zeros(m)
        };

        // Multipliers from Cᵀλ = −grad − Hp in the least-squares sense.
        let resid = &neg_grad - &h_ff * &p;
        let normal = c_t.tr_mul(&c_t);
        let lambda = normal.lu().solve(&c_t.tr_mul(&resid)).ok_or(SingularKkt)?;
        if p.iter().chain(lambda.iter()).any(|v| !v.is_finite()) {
            return Err(SingularKkt);
        }
        Ok(Direction {
            p: p.iter().copied().collect(),
            nu: lambda[0],
            lambda_ret: ret_row.map(|_| lambda[1]),
        })
    }

    fn run(&self, mut x: Vec<f64>, max_iter: usize) -> std::result::Result<Outcome, SingularKkt> {
        let n = x.len();
        let eps = self.eps;
        let mut bound: Vec<bool> = x.iter().map(|&v| v <= eps + BOUND_SNAP).collect();
        for i in 0..n {
            if bound[i] {
                x[i] = eps;
            }
        }
        if bound.iter().all(|&b| b) {
            // Only possible when n·ε == 1 and the point is fully pinned.
            return Ok(Outcome {
                x,
                iterations: 0,
                converged: true,
            });
        }
        let mut ret_in_set = self
            .ret
            .is_some_and(|r| dot(r.a, &x) - r.b <= 1e-12 * r.b.abs().max(1.0));
        let mult_tol = 1e-11 * self.scale;
        // Set after an unblocked step, which lands on the minimiser of the
        // current face; what is left of the next direction is rounding.
        let mut on_face_minimum = false;

        for it in 0..max_iter {
            let free: Vec<usize> = (0..n).filter(|&i| !bound[i]).collect();
            let grad = self.gradient(&x);
            let dir = self.direction(&free, &grad, ret_in_set)?;
            let step_size = inf_norm(&dir.p);

            if on_face_minimum || step_size <= 1e-14 {
                on_face_minimum = false;
                // One refinement step on the face when it stays feasible.
                let stays_feasible = free.iter().zip(&dir.p).all(|(&i, p)| x[i] + p >= eps)
                    && self.ret.is_none_or(|r| {
                        ret_in_set || {
                            let ap: f64 = free.iter().zip(&dir.p).map(|(&i, p)| r.a[i] * p).sum();
                            dot(r.a, &x) + ap >= r.b
                        }
                    });
                if stays_feasible {
                    for (a, &i) in free.iter().enumerate() {
                        x[i] += dir.p[a];
                    }
                }
                let lam = dir.lambda_ret.unwrap_or(0.0);
                let a_at = |i: usize| self.ret.map_or(0.0, |r| r.a[i]);
                // Bound multipliers μ_i = grad_i + ν + λ·a_i, return multiplier −λ.
                let mut worst: Option<(f64, Option<usize>)> = None;
                for i in (0..n).filter(|&i| bound[i]) {
                    let mu = grad[i] + dir.nu + lam * a_at(i);
                    if mu < -mult_tol && worst.is_none_or(|(w, _)| mu < w) {
                        worst = Some((mu, Some(i)));
                    }
                }
                if ret_in_set && dir.lambda_ret.is_some() {
                    let eta = -lam;
                    if eta < -mult_tol && worst.is_none_or(|(w, _)| eta < w) {
                        worst = Some((eta, None));
                    }
                }
                match worst {
                    None => {
                        return Ok(Outcome {
                            x,
                            iterations: it,
                            converged: true,
                        })
                    }
                    Some((_, Some(i))) => bound[i] = false,
                    Some((_, None)) => ret_in_set = false,
                }
                continue;
            }

            let mut alpha = 1.0;
            let mut blocking: Option<Option<usize>> = None;
            for (a, &i) in free.iter().enumerate() {
                let p = dir.p[a];
                if p < 0.0 {
                    let t = ((eps - x[i]) / p).max(0.0);
                    if t < alpha {
                        alpha = t;
                        blocking = Some(Some(i));
                    }
                }
            }
            if let (Some(r), false) = (self.ret, ret_in_set) {
                let ap: f64 = free.iter().zip(&dir.p).map(|(&i, p)| r.a[i] * p).sum();
                if ap < 0.0 {
                    let t = ((r.b - dot(r.a, &x)) / ap).max(0.0);
                    if t < alpha {
                        alpha = t;
                        blocking = Some(None);
                    }
                }
            }
            for (a, &i) in free.iter().enumerate() {
                x[i] += alpha * dir.p[a];
            }
            match blocking {
                Some(Some(i)) => {
                    x[i] = eps;
                    bound[i] = true;
                }
                Some(None) => ret_in_set = true,
                None => on_face_minimum = true,
            }
        }
        Ok(Outcome {
            x,
            iterations: max_iter,
            converged: false,
        })
    }
}

/// Removes from `p` its components along the sum row and, when given, the
/// return row, so steps stay on the current face despite rounding.
fn project_out_rows(mut p: DVector<f64>, ret_row: Option<&[f64]>) -> DVector<f64> {
    let m = p.len() as f64;
    let mean = p.sum() / m;
    p.add_scalar_mut(-mean);
    if let Some(a) = ret_row {
        let a_mean = a.iter().sum::<f64>() / m;
        let centred: Vec<f64> = a.iter().map(|v| v - a_mean).collect();
        let norm2 = dot(&centred, &centred);
        if norm2 > 0.0 {
            let coef = p.iter().zip(&centred).map(|(x, c)| x * c).sum::<f64>() / norm2;
            for (x, c) in p.iter_mut().zip(&centred) {
                *x -= coef * c;
            }
        }
    }
    p
}

/// Monotone projected-gradient ascent on the best-response utility with
/// backtracking. Optionally records the utility after every accepted step.
fn projected_gradient(
    problem: &BrProblem,
    mut x: Vec<f64>,
    eps: f64,
    opts: &QpOptions,
    mut trace: Option<&mut Vec<f64>>,
) -> Outcome {
    let scale = problem.scale();
    // ‖H‖_F bounds the spectral norm, so 1/‖H‖_F is always a safe step.
    let lipschitz = problem.h.norm().max(1e-300);
    let mut step = 1.0 / lipschitz;
    let mut value = problem.utility(&x);
    if let Some(t) = trace.as_deref_mut() {
        t.push(value);
    }
    for it in 0..opts.max_iter {
        let grad = problem.gradient(&x);
        let unit: Vec<f64> = x.iter().zip(&grad).map(|(x, g)| x - g).collect();
        let unit = project_simplex_floor(&unit, eps).expect("floor checked by caller");
        let pg = x
            .iter()
            .zip(&unit)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if pg / scale <= opts.tol * 1e-2 {
            return Outcome {
                x,
                iterations: it,
                converged: true,
            };
        }
        step = (step * 2.0).min(1e6 / lipschitz);
        loop {
            let trial: Vec<f64> = x.iter().zip(&grad).map(|(x, g)| x - step * g).collect();
            let y = project_simplex_floor(&trial, eps).expect("floor checked by caller");
            let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            let new_value = problem.utility(&y);
            // Sufficient increase for the concave utility (descent lemma).
            let model = value - dot(&grad, &d) - dot(&d, &d) / (2.0 * step);
            if new_value >= model - 1e-15 * scale || step <= 1.0 / lipschitz {
                if new_value >= value {
                    x = y;
                    value = new_value;
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(value);
                    }
                } else {
                    // Only rounding can get here; the point is stationary.
                    return Outcome {
                        x,
                        iterations: it,
                        converged: true,
                    };
                }
                break;
            }
            step *= 0.5;
        }
    }
    Outcome {
        x,
        iterations: opts.max_iter,
        converged: false,
    }
}

/// Projected-gradient best response that also returns the utility after
/// each accepted step.
pub fn best_response_projected_gradient_traced(
    mean_m: &DMatrix<f64>,
    varsigma: &MixedStrategy,
    risk: &RiskMatrix,
    gamma: f64,
    opts: &QpOptions,
    init: Option<&[f64]>,
) -> Result<(QpSolution, Vec<f64>)> {
    let n = mean_m.nrows();
    check_floor(n, opts.eps)?;
    let problem = BrProblem::new(mean_m, varsigma, risk, gamma)?;
    let start = match init {
        Some(v) => project_simplex_floor(v, opts.eps)?,
        None => vec![1.0 / n as f64; n],
    };
    let mut trace = Vec::new();
    let outcome = projected_gradient(&problem, start, opts.eps, opts, Some(&mut trace));
    Ok((
        finish_br(&problem, outcome.x, opts.eps, outcome.iterations, opts.tol),
        trace,
    ))
}

/// Minimum-risk strategy `argmin σᵀΣσ` subject to `σᵀM̄ς >= μ_b` on the
/// floored simplex. `μ_b = −∞` drops the return constraint.
pub fn solve_min_risk(
    risk: &RiskMatrix,
    mean_m: &DMatrix<f64>,
    varsigma: &MixedStrategy,
    mu_b: f64,
    eps: f64,
    tol: f64,
) -> Result<QpSolution> {
    check_risk_stage(risk)?;
    let n = mean_m.nrows();
    check_floor(n, eps)?;
    if mu_b.is_nan() {
        return Err(invalid_config("mu_b", "must not be NaN"));
    }
    // Reuse the best-response plumbing with γ = 1 for g and Σ.
    let problem = BrProblem::new(mean_m, varsigma, risk, 1.0)?;
    let g = problem.g.clone();
    let lp = floored_lp(&g, eps);
    let max_ret = dot(&lp, &g);
    let ret_scale = inf_norm(&g).max(1.0);
    if mu_b > max_ret + 1e-12 * ret_scale {
        return Err(DraeError::InfeasibleReturn {
            requested: mu_b,
            max_attainable: max_ret,
        });
    }

    let h = risk.values() * 2.0;
    let scale = h.abs().max().max(ret_scale);
    let uniform = vec![1.0 / n as f64; n];
    let (start, ret) = if mu_b == f64::NEG_INFINITY {
        (uniform, None)
    } else {
        // Cheapest feasible start on the segment from uniform play to the
        // return-maximising vertex.
        let base = dot(&uniform, &g);
        let t = if base >= mu_b || max_ret <= base {
            0.0
        } else {
            ((mu_b - base) / (max_ret - base)).clamp(0.0, 1.0)
        };
        let x: Vec<f64> = uniform
            .iter()
            .zip(&lp)
            .map(|(u, v)| (1.0 - t) * u + t * v)
            .collect();
        (x, Some(ReturnFloor { a: &g, b: mu_b }))
    };

    let engine = ActiveSet {
        h: &h,
        c: vec![0.0; n],
        eps,
        ret,
        scale,
    };
    let outcome = engine
        .run(start, DEFAULT_MAX_ITER)
        .map_err(|_| invalid_config("risk", "minimum-risk KKT system is singular"))?;
    let x = polish(outcome.x, eps);
    let grad: Vec<f64> = (&h * DVector::from_column_slice(&x))
        .iter()
        .copied()
        .collect();
    let kkt = kkt_residual(&x, &grad, eps, ret, scale);
    let objective = crate::game::bilinear(risk.values(), &x, &x);
    Ok(QpSolution {
        strategy: MixedStrategy::from_raw(x, eps),
        objective,
        kkt_residual: kkt,
        iterations: outcome.iterations,
        converged: outcome.converged && kkt <= tol,
    })
}
