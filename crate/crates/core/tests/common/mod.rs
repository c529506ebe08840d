#![allow(dead_code)]

use drae_core::{MixedStrategy, StateGame};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn random_game<R: Rng>(rng: &mut R, n: usize, n_states: usize) -> StateGame {
    let rewards: Vec<f64> = (0..n * n * n_states)
        .map(|_| rng.random_range(-2.0..2.0))
        .collect();
    let raw: Vec<f64> = (0..n_states).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    StateGame::new(
        n,
        n_states,
        rewards,
        raw.iter().map(|p| p / total).collect(),
    )
    .unwrap()
}

/// Uniform draw from the floored simplex `{x >= eps, Σx = 1}`.
pub fn random_strategy<R: Rng>(rng: &mut R, n: usize, eps: f64) -> MixedStrategy {
    let e: Vec<f64> = (0..n)
        .map(|_| -rng.random_range(f64::MIN_POSITIVE..1.0).ln())
        .collect();
    let total: f64 = e.iter().sum();
    let free = 1.0 - n as f64 * eps;
    let mut probs: Vec<f64> = e.iter().map(|x| eps + free * x / total).collect();
    let drift: f64 = probs.iter().sum::<f64>() - 1.0;
    let k = probs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    probs[k] -= drift;
    MixedStrategy::new(probs, eps).unwrap()
}

pub fn random_symmetric_pd<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 1e-3
}

pub fn quad(h: &DMatrix<f64>, x: &[f64]) -> f64 {
    let v = DVector::from_column_slice(x);
    (v.transpose() * h * &v)[(0, 0)]
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exact minimiser of `xᵀQx − gᵀx` over `{x >= eps, Σx = 1}` and, when
/// given, `aᵀx >= b`, by enumerating every face of the feasible set.
///
/// Each face fixes some coordinates at the floor and optionally makes the
/// return row tight; the equality-constrained minimiser on the face is a
/// candidate if it is feasible. The convex objective attains its minimum at
/// one of these candidates. Only sensible for a handful of actions.
pub fn face_enumeration(
    q: &DMatrix<f64>,
    g: &[f64],
    eps: f64,
    floor: Option<(&[f64], f64)>,
) -> Option<(Vec<f64>, f64)> {
    let n = g.len();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 1u32..(1 << n) {
        let free: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let tight_options: &[bool] = if floor.is_some() {
            &[false, true]
        } else {
            &[false]
        };
        for &tight in tight_options {
            let Some(x) = face_minimiser(q, g, eps, &free, floor.filter(|_| tight)) else {
                continue;
            };
            if x.iter().any(|&v| v < eps - 1e-10) {
                continue;
            }
            if let Some((a, b)) = floor {
                if dot(a, &x) < b - 1e-9 {
                    continue;
                }
            }
            let f = quad(q, &x) - dot(g, &x);
            if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
                best = Some((x, f));
            }
        }
    }
    best
}

fn face_minimiser(
    q: &DMatrix<f64>,
    g: &[f64],
    eps: f64,
    free: &[usize],
    tight: Option<(&[f64], f64)>,
) -> Option<Vec<f64>> {
    let n = g.len();
    let k = free.len();
    let m = 1 + usize::from(tight.is_some());
    let mut base = vec![eps; n];
    for &i in free {
        base[i] = 0.0;
    }
    // Stationarity 2Q x − g − λ·1 − μ·a = 0 on the free block.
    let mut kkt = DMatrix::zeros(k + m, k + m);
    let mut rhs = DVector::zeros(k + m);
    for (r, &i) in free.iter().enumerate() {
        for (c, &j) in free.iter().enumerate() {
            kkt[(r, c)] = 2.0 * q[(i, j)];
        }
        let fixed: f64 = (0..n).map(|j| 2.0 * q[(i, j)] * base[j]).sum();
        rhs[r] = g[i] - fixed;
        kkt[(r, k)] = -1.0;
        kkt[(k, r)] = 1.0;
        if let Some((a, _)) = tight {
            kkt[(r, k + 1)] = -a[i];
            kkt[(k + 1, r)] = a[i];
        }
    }
    rhs[k] = 1.0 - (n - k) as f64 * eps;
    if let Some((a, b)) = tight {
        rhs[k + 1] = b - (0..n).map(|j| a[j] * base[j]).sum::<f64>();
    }
    let sol = kkt.lu().solve(&rhs)?;
    let mut x = base;
    for (r, &i) in free.iter().enumerate() {
        x[i] = sol[r];
    }
    Some(x)
}
