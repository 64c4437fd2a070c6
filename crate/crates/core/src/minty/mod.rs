//! One-point extension of finite monotone sets.
//!
//! Pairs `(x_i, y_i)` are monotone when `⟨x_i − x_j, y_i − y_j⟩ ≥ 0`. Given a
//! new base point `x0`, a value `y0` keeping the set monotone is a point of the
//! polyhedron `⟨x0 − x_i, y⟩ ≥ ⟨x0 − x_i, y_i⟩`, which is nonempty for every
//! `x0`. It is found by over-relaxed projections onto the most violated
//! half-space, with an exact simplex phase-1 as fallback.
//!
//! Velocity fields of contracting families are monotone *decreasing*; callers
//! negate velocities on the way in and out.

mod simplex;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::configspace::sq_dist;
use crate::error::{Error, Result};
use crate::flow::DiscretePosterior;
use crate::rng;
use simplex::{solve_standard, LpOutcome};

/// Slack allowed in the monotonicity invariant.
pub const MONOTONE_TOL: f64 = 1e-10;
/// Slack allowed in the constraints of an extension.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Smallest barycentric margin accepted as relative interior.
pub const RELINT_TOL: f64 = 1e-9;
const OVER_RELAXATION: f64 = 1.5;
const MAX_ITER: usize = 100_000;
/// Projection target, below [`FEASIBILITY_TOL`] so the result has headroom.
const TARGET_RESIDUAL: f64 = 1e-12;
const COINCIDENT: f64 = 1e-24;

/// Monotone pairs `(x_i, y_i)` in `R^n × R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonePairs {
    dim: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl MonotonePairs {
    /// Flat `xs` and `ys` of equal length, checked for monotonicity.
    pub fn new(dim: usize, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if dim == 0 || xs.is_empty() || xs.len() % dim != 0 {
            return Err(Error::InvalidArgument(
                "positions must be a nonempty multiple of the dimension".into(),
            ));
        }
        if ys.len() != xs.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                got: ys.len(),
            });
        }
        let pairs = Self { dim, xs, ys };
        let worst = pairs.min_inner();
        if worst < -MONOTONE_TOL {
            return Err(Error::InvalidArgument(format!(
                "pairs are not monotone: smallest ⟨Δx, Δy⟩ is {worst:e}"
            )));
        }
        Ok(pairs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.xs.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn y(&self, i: usize) -> &[f64] {
        &self.ys[i * self.dim..(i + 1) * self.dim]
    }

    /// `min_{i<j} ⟨x_i − x_j, y_i − y_j⟩`, or 0 for a single pair.
    pub fn min_inner(&self) -> f64 {
        let k = self.len();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in (i + 1)..k {
                worst = worst.min(inner_diff(self.x(i), self.x(j), self.y(i), self.y(j)));
            }
        }
        worst
    }

    /// The set with `(x0, y0)` appended, without re-checking.
    pub fn augmented(&self, x0: &[f64], y0: &[f64]) -> Self {
        let mut out = self.clone();
        out.xs.extend_from_slice(x0);
        out.ys.extend_from_slice(y0);
        out
    }
}

fn inner_diff(xa: &[f64], xb: &[f64], ya: &[f64], yb: &[f64]) -> f64 {
    (0..xa.len())
        .map(|d| (xa[d] - xb[d]) * (ya[d] - yb[d]))
        .sum()
}

/// Which solver produced an extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    /// `x0` coincides with a data point.
    Lookup,
    Relaxation,
    Simplex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extension {
    pub y0: Vec<f64>,
    pub solver: Solver,
    pub iterations: usize,
    /// `min_i ⟨x0 − x_i, y0 − y_i⟩`.
    pub min_residual: f64,
}

/// Largest `t` such that `x0 = Σ λ_i x_i` with `Σ λ_i = 1` and every
/// `λ_i ≥ t ≥ 0`; `−∞` if `x0` is outside the convex hull.
pub fn relative_interior_margin(pairs: &MonotonePairs, x0: &[f64]) -> Result<f64> {
    let (n, k) = (pairs.dim(), pairs.len());
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    // variables: λ (k), t, slack (k) with λ_i − t − slack_i = 0
    let width = 2 * k + 1;
    let mut a = Vec::with_capacity(n + 1 + k);
    let mut b = Vec::with_capacity(n + 1 + k);
    for (d, &x0d) in x0.iter().enumerate().take(n) {
        let mut row = vec![0.0; width];
        for (i, r) in row.iter_mut().enumerate().take(k) {
            *r = pairs.x(i)[d];
        }
        a.push(row);
        b.push(x0d);
    }
    let mut row = vec![0.0; width];
    row[..k].iter_mut().for_each(|v| *v = 1.0);
    a.push(row);
    b.push(1.0);
    for i in 0..k {
        let mut row = vec![0.0; width];
        row[i] = 1.0;
        row[k] = -1.0;
        row[k + 1 + i] = -1.0;
        a.push(row);
        b.push(0.0);
    }
    let mut c = vec![0.0; width];
    c[k] = -1.0;
    Ok(match solve_standard(&a, &b, &c) {
        LpOutcome::Optimal { value, .. } => -value,
        LpOutcome::Infeasible => f64::NEG_INFINITY,
        LpOutcome::Unbounded => unreachable!("t is bounded by 1/k"),
    })
}

/// Constraint rows `⟨a_i, y⟩ ≥ b_i` with `a_i = x0 − x_i`, skipping `a_i = 0`.
fn constraints(pairs: &MonotonePairs, x0: &[f64]) -> Vec<(Vec<f64>, f64)> {
    (0..pairs.len())
        .filter_map(|i| {
            let a: Vec<f64> = x0.iter().zip(pairs.x(i)).map(|(p, q)| p - q).collect();
            let nn: f64 = a.iter().map(|v| v * v).sum();
            (nn > COINCIDENT).then(|| {
                let b = a.iter().zip(pairs.y(i)).map(|(p, q)| p * q).sum();
                (a, b)
            })
        })
        .collect()
}

fn min_residual(pairs: &MonotonePairs, x0: &[f64], y0: &[f64]) -> f64 {
    (0..pairs.len())
        .map(|i| inner_diff(x0, pairs.x(i), y0, pairs.y(i)))
        .fold(f64::INFINITY, f64::min)
}

fn relaxation(rows: &[(Vec<f64>, f64)], start: Vec<f64>) -> (Vec<f64>, usize, bool) {
    let norms: Vec<f64> = rows
        .iter()
        .map(|(a, _)| a.iter().map(|v| v * v).sum::<f64>())
        .collect();
    let mut y = start;
    for it in 0..MAX_ITER {
        // Motzkin: the half-space at the largest normalized distance
        let mut worst: Option<(f64, usize)> = None;
        for (j, ((a, b), nn)) in rows.iter().zip(&norms).enumerate() {
            let r = a.iter().zip(&y).map(|(p, q)| p * q).sum::<f64>() - b;
            let dist = -r / nn.sqrt();
            if dist > TARGET_RESIDUAL && worst.is_none_or(|(w, _)| dist > w) {
                worst = Some((dist, j));
            }
        }
        let Some((_, j)) = worst else {
            return (y, it, true);
        };
        let (a, b) = &rows[j];
        let r = a.iter().zip(&y).map(|(p, q)| p * q).sum::<f64>() - b;
        let step = -OVER_RELAXATION * r / norms[j];
        y.iter_mut().zip(a).for_each(|(v, ai)| *v += step * ai);
    }
    (y, MAX_ITER, false)
}

fn simplex_solution(rows: &[(Vec<f64>, f64)], n: usize) -> Option<Vec<f64>> {
    // y = p − q, p, q ≥ 0; ⟨a, p − q⟩ − slack = b
    let m = rows.len();
    let width = 2 * n + m;
    let a: Vec<Vec<f64>> = rows
        .iter()
        .enumerate()
        .map(|(j, (ai, _))| {
            let mut row = vec![0.0; width];
            for d in 0..n {
                row[d] = ai[d];
                row[n + d] = -ai[d];
            }
            row[2 * n + j] = -1.0;
            row
        })
        .collect();
    let b: Vec<f64> = rows.iter().map(|(_, bi)| *bi).collect();
    match solve_standard(&a, &b, &vec![0.0; width]) {
        LpOutcome::Optimal { z, .. } => Some((0..n).map(|d| z[d] - z[n + d]).collect()),
        _ => None,
    }
}

fn solve(pairs: &MonotonePairs, x0: &[f64], force_simplex: bool) -> Result<Extension> {
    let n = pairs.dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    if let Some(i) = (0..pairs.len()).find(|&i| sq_dist(pairs.x(i), x0) <= COINCIDENT) {
        let y0 = pairs.y(i).to_vec();
        return Ok(Extension {
            min_residual: min_residual(pairs, x0, &y0),
            y0,
            solver: Solver::Lookup,
            iterations: 0,
        });
    }
    let rows = constraints(pairs, x0);
    let k = pairs.len() as f64;
    let start: Vec<f64> = (0..n)
        .map(|d| (0..pairs.len()).map(|i| pairs.y(i)[d]).sum::<f64>() / k)
        .collect();
    let (y, iterations, converged) = if force_simplex {
        (start, 0, false)
    } else {
        relaxation(&rows, start)
    };
    let (y0, solver) = if converged {
        (y, Solver::Relaxation)
    } else {
        let y = simplex_solution(&rows, n).ok_or_else(|| {
            Error::Infeasible(format!(
                "no monotone extension at {x0:?} for {} pairs",
                pairs.len()
            ))
        })?;
        (y, Solver::Simplex)
    };
    let residual = min_residual(pairs, x0, &y0);
    if residual < -FEASIBILITY_TOL {
        return Err(Error::Infeasible(format!(
            "{solver:?} returned a point with residual {residual:e} at {x0:?}"
        )));
    }
    Ok(Extension {
        y0,
        solver,
        iterations,
        min_residual: residual,
    })
}

/// Extension at `x0`, which must lie in the relative interior of the convex
/// hull of the base points unless it coincides with one of them.
pub fn extend_monotone_detailed(pairs: &MonotonePairs, x0: &[f64]) -> Result<Extension> {
    if x0.len() == pairs.dim() && (0..pairs.len()).all(|i| sq_dist(pairs.x(i), x0) > COINCIDENT) {
        let margin = relative_interior_margin(pairs, x0)?;
        if !(margin >= RELINT_TOL) {
            return Err(Error::NotInRelativeInterior { margin });
        }
    }
    solve(pairs, x0, false)
}

/// A `y0` with `⟨x0 − x_i, y0 − y_i⟩ ≥ −1e-9` for all `i`.
pub fn extend_monotone(pairs: &MonotonePairs, x0: &[f64]) -> Result<Vec<f64>> {
    Ok(extend_monotone_detailed(pairs, x0)?.y0)
}

/// Same constraints solved by the simplex fallback alone.
pub fn extend_monotone_simplex(pairs: &MonotonePairs, x0: &[f64]) -> Result<Vec<f64>> {
    Ok(solve(pairs, x0, true)?.y0)
}

/// A velocity `w` at the posterior mean `E Y` keeping
/// `⟨v(x) − v(y), x − y⟩ ≤ 0` when added to the points' velocities.
///
/// The divergence `(1/s) Σ p_i ⟨v_i − w, c_i − E Y⟩` does not depend on `w`;
/// this is checked against the posterior's own divergence, and a mismatch is
/// reported as an error. The relative-interior precondition is not enforced:
/// the finite extension exists at any point, and posterior weights that
/// underflow to zero would otherwise fail the test spuriously.
pub fn extend_velocity_at_mean(post: &DiscretePosterior) -> Result<Vec<f64>> {
    let flipped: Vec<f64> = post.velocities.iter().map(|v| -v).collect();
    let pairs = MonotonePairs::new(post.dim, post.positions.clone(), flipped)?;
    let x0 = post.mean_position();
    let w: Vec<f64> = solve(&pairs, &x0, false)?.y0.iter().map(|v| -v).collect();
    let (a, b) = (post.divergence_with(&w), post.divergence());
    let scale = 1.0 + a.abs().max(b.abs());
    if (a - b).abs() > 1e-10 * scale {
        return Err(Error::Infeasible(format!(
            "divergence depends on the substituted velocity: {a:e} vs {b:e}"
        )));
    }
    Ok(w)
}

/// Monotone pairs `y_i = A x_i + ‖x_i‖ x_i` with `A` a random positive
/// semidefinite plus skew matrix; both terms are monotone.
pub fn random_monotone_pairs(dim: usize, k: usize, seed: u64) -> MonotonePairs {
    let mut r = rng::stream(seed, u64::MAX - 2);
    let mut g = || r.sample::<f64, _>(StandardNormal);
    let b: Vec<f64> = (0..dim * dim).map(|_| g()).collect();
    let c: Vec<f64> = (0..dim * dim).map(|_| g()).collect();
    let mut a = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            let psd: f64 = (0..dim).map(|l| b[l * dim + i] * b[l * dim + j]).sum();
            a[i * dim + j] = psd / dim as f64 + c[i * dim + j] - c[j * dim + i];
        }
    }
    let xs: Vec<f64> = (0..dim * k).map(|_| 1.5 * g()).collect();
    let ys: Vec<f64> = xs
        .chunks_exact(dim)
        .flat_map(|x| {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            (0..dim)
                .map(|i| (0..dim).map(|j| a[i * dim + j] * x[j]).sum::<f64>() + norm * x[i])
                .collect::<Vec<_>>()
        })
        .collect();
    MonotonePairs::new(dim, xs, ys).expect("sum of monotone maps is monotone")
}

/// A strict convex combination of the base points with Dirichlet(1) weights.
pub fn random_interior_point(pairs: &MonotonePairs, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, u64::MAX - 3);
    let raw: Vec<f64> = (0..pairs.len())
        .map(|_| -(1.0 - r.random::<f64>()).ln() + 1e-3)
        .collect();
    let total: f64 = raw.iter().sum();
    let mut x0 = vec![0.0; pairs.dim()];
    for (i, l) in raw.iter().enumerate() {
        for (o, xi) in x0.iter_mut().zip(pairs.x(i)) {
            *o += l / total * xi;
        }
    }
    x0
}
