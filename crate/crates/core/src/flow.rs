//! Continuous contractions of finite configurations and the velocity field
//! of their Gaussian-smoothed flow.
//!
//! A [`TrajectoryFamily`] moves `k` weighted points along curves `c_i(t)`,
//! `t ∈ [0, 1]`. Adding independent `N(0, sI)` noise gives a mixture whose
//! velocity field is the posterior average of the point velocities,
//! `ṽ_t(x) = Σ p_i(x) v_i(t)` with `p_i ∝ w_i exp(−‖x − c_i(t)‖²/2s)`.
//! Since `∇p_i = p_i (c_i − c̄)/s`, its divergence is the posterior covariance
//! `(1/s) Σ p_i ⟨v_i − v̄, c_i − c̄⟩`, computed here without differentiation.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::configspace::{sq_dist, ContractionPair, PointConfiguration};
use crate::error::{Error, Result};
use crate::gaussmix::montecarlo::{cumulative_weights, draw_white};
use crate::gaussmix::{
    estimate_renyi, integrate_density_functional, EstimatorPolicy, GaussianMixture, Method,
    PolicyMode,
};
use crate::rng;

/// Central-difference step for velocities of user-defined trajectories.
pub const VELOCITY_STEP: f64 = 1e-6;
/// Central-difference step for the divergence cross-check.
pub const DIVERGENCE_STEP: f64 = 1e-4;
/// Points closer than this are treated as merged.
pub const MERGE_TOL: f64 = 1e-10;

type PathFn = Arc<dyn Fn(usize, f64) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
enum Paths {
    /// `((x+y)/2 + cos(πt)(x−y)/2, sin(πt)(x−y)/2)` with `y = T(x)`.
    Lift {
        mid: Vec<f64>,
        half: Vec<f64>,
    },
    /// `c + (1 − (1−β)t)(x − c)`.
    Homothety {
        center: Vec<f64>,
        beta: f64,
        coords: Vec<f64>,
    },
    Stationary {
        coords: Vec<f64>,
    },
    Custom(PathFn),
}

/// `k` weighted trajectories in `R^dim` over `t ∈ [0, 1]`.
#[derive(Clone)]
pub struct TrajectoryFamily {
    dim: usize,
    weights: Vec<f64>,
    paths: Paths,
}

impl std::fmt::Debug for TrajectoryFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.paths {
            Paths::Lift { .. } => "lift",
            Paths::Homothety { .. } => "homothety",
            Paths::Stationary { .. } => "stationary",
            Paths::Custom(_) => "custom",
        };
        f.debug_struct("TrajectoryFamily")
            .field("dim", &self.dim)
            .field("len", &self.weights.len())
            .field("kind", &kind)
            .finish()
    }
}

/// Trajectories carrying `(x_i, 0)` to `(T(x_i), 0)` in `R^{2n}` with
/// nonincreasing pairwise distances.
pub fn bezdek_connelly_lift(pair: &ContractionPair) -> TrajectoryFamily {
    let (x, y) = (pair.source().coords(), pair.target().coords());
    TrajectoryFamily {
        dim: 2 * pair.source().dim(),
        weights: pair.source().weights().to_vec(),
        paths: Paths::Lift {
            mid: x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect(),
            half: x.iter().zip(y).map(|(a, b)| 0.5 * (a - b)).collect(),
        },
    }
}

impl TrajectoryFamily {
    /// Straight-line shrinking towards `center`, reaching ratio `beta` at `t = 1`.
    pub fn homothety(config: &PointConfiguration, center: &[f64], beta: f64) -> Result<Self> {
        if center.len() != config.dim() {
            return Err(Error::DimensionMismatch {
                expected: config.dim(),
                got: center.len(),
            });
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidArgument(format!(
                "ratio must lie in [0, 1], got {beta}"
            )));
        }
        Ok(Self {
            dim: config.dim(),
            weights: config.weights().to_vec(),
            paths: Paths::Homothety {
                center: center.to_vec(),
                beta,
                coords: config.coords().to_vec(),
            },
        })
    }

    pub fn stationary(config: &PointConfiguration) -> Self {
        Self {
            dim: config.dim(),
            weights: config.weights().to_vec(),
            paths: Paths::Stationary {
                coords: config.coords().to_vec(),
            },
        }
    }

    /// Trajectories from `path(i, t)`; velocities by central differences.
    pub fn custom<F>(dim: usize, weights: Vec<f64>, path: F) -> Result<Self>
    where
        F: Fn(usize, f64) -> Vec<f64> + Send + Sync + 'static,
    {
        let probe = PointConfiguration::from_flat(dim, vec![0.0; dim * weights.len()], weights)?;
        Ok(Self {
            dim,
            weights: probe.weights().to_vec(),
            paths: Paths::Custom(Arc::new(path)),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn has_analytic_velocity(&self) -> bool {
        !matches!(self.paths, Paths::Custom(_))
    }

    pub fn position(&self, i: usize, t: f64) -> Vec<f64> {
        let n = self.dim;
        match &self.paths {
            Paths::Lift { mid, half } => {
                let h = n / 2;
                let (m, d) = (&mid[i * h..(i + 1) * h], &half[i * h..(i + 1) * h]);
                let (c, s) = ((PI * t).cos(), (PI * t).sin());
                m.iter()
                    .zip(d)
                    .map(|(a, b)| a + c * b)
                    .chain(d.iter().map(|b| s * b))
                    .collect()
            }
            Paths::Homothety {
                center,
                beta,
                coords,
            } => {
                let r = 1.0 - (1.0 - beta) * t;
                coords[i * n..(i + 1) * n]
                    .iter()
                    .zip(center)
                    .map(|(x, c)| c + r * (x - c))
                    .collect()
            }
            Paths::Stationary { coords } => coords[i * n..(i + 1) * n].to_vec(),
            Paths::Custom(f) => f(i, t),
        }
    }

    pub fn velocity(&self, i: usize, t: f64) -> Vec<f64> {
        let n = self.dim;
        match &self.paths {
            Paths::Lift { half, .. } => {
                let h = n / 2;
                let d = &half[i * h..(i + 1) * h];
                let (c, s) = ((PI * t).cos(), (PI * t).sin());
                d.iter()
                    .map(|b| -PI * s * b)
                    .chain(d.iter().map(|b| PI * c * b))
                    .collect()
            }
            Paths::Homothety {
                center,
                beta,
                coords,
            } => coords[i * n..(i + 1) * n]
                .iter()
                .zip(center)
                .map(|(x, c)| -(1.0 - beta) * (x - c))
                .collect(),
            Paths::Stationary { .. } => vec![0.0; n],
            Paths::Custom(f) => {
                let (a, b) = (f(i, t + VELOCITY_STEP), f(i, t - VELOCITY_STEP));
                a.iter()
                    .zip(&b)
                    .map(|(p, q)| (p - q) / (2.0 * VELOCITY_STEP))
                    .collect()
            }
        }
    }

    /// All positions at `t`, flattened.
    pub fn positions(&self, t: f64) -> Vec<f64> {
        (0..self.len()).flat_map(|i| self.position(i, t)).collect()
    }

    pub fn velocities(&self, t: f64) -> Vec<f64> {
        (0..self.len()).flat_map(|i| self.velocity(i, t)).collect()
    }

    pub fn config_at(&self, t: f64) -> Result<PointConfiguration> {
        PointConfiguration::from_flat(self.dim, self.positions(t), self.weights.clone())
    }

    /// The flow state at `t` smoothed by `N(0, sI)`.
    pub fn smoothed(&self, t: f64, s: f64) -> Result<GaussianMixture> {
        check_noise(s)?;
        GaussianMixture::isotropic(&self.config_at(t)?, s)
    }
}

fn check_noise(s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "noise variance must be positive, got {s}"
        )))
    }
}

/// `t_0 = 0, …, t_{m−1} = 1`, equispaced.
pub fn uniform_t_grid(points: usize) -> Vec<f64> {
    let m = points.max(2);
    (0..m).map(|j| j as f64 / (m - 1) as f64).collect()
}

/// The default 21-point grid.
pub fn default_t_grid() -> Vec<f64> {
    uniform_t_grid(21)
}

/// Worst-case readings of the contraction conditions on a `t` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionCheck {
    /// Largest increase of a pairwise distance between consecutive grid times.
    pub max_distance_increase: f64,
    /// Pairs that were merged at some time and later separated.
    pub merge_violations: usize,
    /// Largest `⟨v_i − v_j, c_i − c_j⟩` over pairs and grid times.
    pub max_velocity_inner: f64,
}

impl ContractionCheck {
    pub fn holds(&self, distance_tol: f64, velocity_tol: f64) -> bool {
        self.max_distance_increase <= distance_tol
            && self.merge_violations == 0
            && self.max_velocity_inner <= velocity_tol
    }
}

/// Check that pairwise distances never grow, merged points stay merged, and
/// velocities are monotone (`⟨Δv, Δc⟩ ≤ 0`) along `t_grid`.
pub fn check_contraction(fam: &TrajectoryFamily, t_grid: &[f64]) -> ContractionCheck {
    let k = fam.len();
    let pos: Vec<Vec<f64>> = t_grid.iter().map(|&t| fam.positions(t)).collect();
    let vel: Vec<Vec<f64>> = t_grid.iter().map(|&t| fam.velocities(t)).collect();
    let n = fam.dim();
    let mut out = ContractionCheck {
        max_distance_increase: f64::NEG_INFINITY,
        merge_violations: 0,
        max_velocity_inner: f64::NEG_INFINITY,
    };
    for i in 0..k {
        for j in (i + 1)..k {
            let mut merged = false;
            let mut prev: Option<f64> = None;
            for (p, v) in pos.iter().zip(&vel) {
                let (ci, cj) = (&p[i * n..(i + 1) * n], &p[j * n..(j + 1) * n]);
                let d = sq_dist(ci, cj).sqrt();
                if let Some(q) = prev {
                    out.max_distance_increase = out.max_distance_increase.max(d - q);
                }
                if merged && d > MERGE_TOL {
                    out.merge_violations += 1;
                    merged = false;
                }
                merged |= d <= MERGE_TOL;
                prev = Some(d);
                let inner: f64 = (0..n)
                    .map(|a| (v[i * n + a] - v[j * n + a]) * (ci[a] - cj[a]))
                    .sum();
                out.max_velocity_inner = out.max_velocity_inner.max(inner);
            }
        }
    }
    if k < 2 {
        out.max_distance_increase = 0.0;
        out.max_velocity_inner = 0.0;
    }
    out
}

/// The law of the point index given `X_t + Y = x`, with positions and
/// velocities of the points attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePosterior {
    pub x: Vec<f64>,
    pub t: f64,
    pub s: f64,
    pub dim: usize,
    pub probs: Vec<f64>,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
}

impl DiscretePosterior {
    fn average(&self, values: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n];
        for (p, v) in self.probs.iter().zip(values.chunks_exact(n)) {
            for (o, vi) in out.iter_mut().zip(v) {
                *o += p * vi;
            }
        }
        out
    }

    /// `E Y = Σ p_i c_i(t)`.
    pub fn mean_position(&self) -> Vec<f64> {
        self.average(&self.positions)
    }

    /// `ṽ_t(x) = Σ p_i v_i(t)`.
    pub fn mean_velocity(&self) -> Vec<f64> {
        self.average(&self.velocities)
    }

    /// `(1/s) Σ p_i ⟨v_i − w, c_i − E Y⟩`; independent of `w`.
    pub fn divergence_with(&self, w: &[f64]) -> f64 {
        let n = self.dim;
        let c = self.mean_position();
        self.probs
            .iter()
            .zip(
                self.positions
                    .chunks_exact(n)
                    .zip(self.velocities.chunks_exact(n)),
            )
            .map(|(p, (ci, vi))| p * (0..n).map(|a| (vi[a] - w[a]) * (ci[a] - c[a])).sum::<f64>())
            .sum::<f64>()
            / self.s
    }

    /// `(1/s) Σ p_i ⟨v_i − v̄, c_i − c̄⟩`.
    pub fn divergence(&self) -> f64 {
        self.divergence_with(&self.mean_velocity())
    }
}

/// Posterior over points at time `t` given the noisy observation `x`.
pub fn posterior(fam: &TrajectoryFamily, t: f64, x: &[f64], s: f64) -> Result<DiscretePosterior> {
    check_noise(s)?;
    let n = fam.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let positions = fam.positions(t);
    let logits: Vec<f64> = positions
        .chunks_exact(n)
        .zip(fam.weights())
        .map(|(c, w)| {
            if *w > 0.0 {
                w.ln() - 0.5 * sq_dist(c, x) / s
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    let mut probs: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= z);
    Ok(DiscretePosterior {
        x: x.to_vec(),
        t,
        s,
        dim: n,
        probs,
        positions,
        velocities: fam.velocities(t),
    })
}

/// `ṽ_t(x) = E[v_t(X_t) | X_t + Y = x]`.
pub fn convolved_velocity(fam: &TrajectoryFamily, t: f64, x: &[f64], s: f64) -> Result<Vec<f64>> {
    Ok(posterior(fam, t, x, s)?.mean_velocity())
}

/// `∇·ṽ_t(x)` from the posterior covariance formula.
pub fn convolved_divergence(fam: &TrajectoryFamily, t: f64, x: &[f64], s: f64) -> Result<f64> {
    Ok(posterior(fam, t, x, s)?.divergence())
}

/// `∇·ṽ_t(x)` by central differences of [`convolved_velocity`].
pub fn finite_difference_divergence(
    fam: &TrajectoryFamily,
    t: f64,
    x: &[f64],
    s: f64,
    step: f64,
) -> Result<f64> {
    let mut total = 0.0;
    let mut y = x.to_vec();
    for a in 0..x.len() {
        y[a] = x[a] + step;
        let up = convolved_velocity(fam, t, &y, s)?[a];
        y[a] = x[a] - step;
        let down = convolved_velocity(fam, t, &y, s)?[a];
        y[a] = x[a];
        total += (up - down) / (2.0 * step);
    }
    Ok(total)
}

/// `count` draws from the flow state at `t` smoothed by `N(0, sI)`.
pub fn sample_smoothed(
    fam: &TrajectoryFamily,
    t: f64,
    s: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    check_noise(s)?;
    let positions = fam.positions(t);
    let n = fam.dim();
    let cumulative = cumulative_weights(fam.weights());
    let sd = s.sqrt();
    let mut r = rng::stream(seed, 0);
    Ok((0..count)
        .map(|_| {
            let u: f64 = r.random();
            let i = cumulative.partition_point(|c| *c <= u).min(fam.len() - 1);
            positions[i * n..(i + 1) * n]
                .iter()
                .map(|c| c + sd * r.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect())
}

/// Convex `φ` with `φ(0) = 0`, integrated against a density as `∫ φ(f)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConvexFunctional {
    /// `u ↦ u^α`, `α > 1`.
    Power { alpha: f64 },
    /// `u ↦ u log u`.
    Xlogx,
    /// `u ↦ max(u − c, 0)`, `c > 0`.
    HockeyStick { c: f64 },
}

impl ConvexFunctional {
    pub fn name(&self) -> String {
        match self {
            ConvexFunctional::Power { alpha } => format!("power({alpha})"),
            ConvexFunctional::Xlogx => "xlogx".into(),
            ConvexFunctional::HockeyStick { c } => format!("hockey-stick({c})"),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ConvexFunctional::Power { alpha } if !(alpha > 1.0) => Err(Error::InvalidArgument(
                format!("power functional needs an exponent above 1, got {alpha}"),
            )),
            ConvexFunctional::HockeyStick { c } if !(c > 0.0) => Err(Error::InvalidArgument(
                format!("hockey-stick threshold must be positive, got {c}"),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalPoint {
    pub t: f64,
    pub value: f64,
    pub std_err: f64,
    pub method: Method,
}

fn hockey_stick_mc(m: &GaussianMixture, c: f64, samples: usize, seed: u64) -> (f64, f64) {
    // ∫ max(f − c, 0) = E_f[max(1 − c/f, 0)]
    let n = m.dim();
    let cumulative = cumulative_weights(m.weights());
    let ldc = m.log_det_chol();
    let values = rng::sample_values(seed, samples, |r| {
        let mut u = vec![0.0; n];
        draw_white(m, &cumulative, 1.0, r, &mut u);
        let f = (m.white_log_density(&u) - ldc).exp();
        (1.0 - c / f).max(0.0)
    });
    rng::mean_and_stderr(&values)
}

fn functional_at(
    fam: &TrajectoryFamily,
    phi: ConvexFunctional,
    s: f64,
    t: f64,
    policy: &EstimatorPolicy,
) -> Result<FunctionalPoint> {
    let m = fam.smoothed(t, s)?;
    let (value, std_err, method) = match phi {
        ConvexFunctional::Power { alpha } => {
            // ∫ f^α = exp((1 − α) h_α)
            let h = estimate_renyi(&m, alpha, policy)?;
            let v = ((1.0 - alpha) * h.value).exp();
            (v, v * (alpha - 1.0) * h.std_err, h.method)
        }
        ConvexFunctional::Xlogx => {
            let h = estimate_renyi(&m, 1.0, policy)?;
            (-h.value, h.std_err, h.method)
        }
        ConvexFunctional::HockeyStick { c } => {
            let quad = match policy.mode {
                PolicyMode::Quadrature => true,
                PolicyMode::MonteCarlo => false,
                PolicyMode::Auto => m.dim() <= 2,
            };
            if quad {
                let spec = policy.quadrature_spec(m.dim());
                let (v, _) = integrate_density_functional(&m, |f| (f - c).max(0.0), &spec)?;
                (v, 0.0, Method::Quadrature)
            } else {
                let (v, se) = hockey_stick_mc(&m, c, policy.samples, policy.seed);
                (v, se, Method::MonteCarlo)
            }
        }
    };
    Ok(FunctionalPoint {
        t,
        value,
        std_err,
        method,
    })
}

/// `∫ φ(f_t)` along `t_grid`, with `f_t` the density of the flow state
/// smoothed by `N(0, sI)`. Monte Carlo points share the policy seed across
/// `t`, so consecutive values are positively correlated.
pub fn functional_along_flow(
    fam: &TrajectoryFamily,
    phi: ConvexFunctional,
    s: f64,
    t_grid: &[f64],
    policy: &EstimatorPolicy,
) -> Result<Vec<FunctionalPoint>> {
    phi.validate()?;
    check_noise(s)?;
    if t_grid.iter().any(|t| !(0.0..=1.0).contains(t)) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "t grid must be increasing within [0, 1]".into(),
        ));
    }
    t_grid
        .par_iter()
        .map(|&t| functional_at(fam, phi, s, t, policy))
        .collect()
}

/// Largest decrease between consecutive points beyond `max(abs_tol, 3σ)`,
/// where `σ` combines both points' standard errors. Zero when the series is
/// nondecreasing within that band.
pub fn worst_decrease(series: &[FunctionalPoint], abs_tol: f64) -> f64 {
    series
        .windows(2)
        .map(|w| {
            let band = abs_tol.max(3.0 * w[0].std_err.hypot(w[1].std_err));
            (w[0].value - w[1].value - band).max(0.0)
        })
        .fold(0.0, f64::max)
}

/// Compactly supported test function `b(x)·(1 + ⟨a, x − x₀⟩)` with
/// `b(x) = exp(−1/(1 − ‖x − x₀‖²/R²))` inside the ball of radius `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpTest {
    pub center: Vec<f64>,
    pub radius: f64,
    pub slope: Vec<f64>,
}

impl BumpTest {
    /// A bump over the weighted centroid at time `t` whose support covers the
    /// points and a few noise standard deviations, with a fixed tilt so the
    /// test function is not radially symmetric.
    pub fn around(fam: &TrajectoryFamily, t: f64, s: f64) -> Self {
        let n = fam.dim();
        let pos = fam.positions(t);
        let mut center = vec![0.0; n];
        for (c, w) in pos.chunks_exact(n).zip(fam.weights()) {
            for (o, ci) in center.iter_mut().zip(c) {
                *o += w * ci;
            }
        }
        let spread = pos
            .chunks_exact(n)
            .map(|c| sq_dist(c, &center).sqrt())
            .fold(0.0, f64::max);
        let radius = spread + 3.0 * s.sqrt() + 1.0;
        let slope = (0..n).map(|a| 0.3 / (a + 1) as f64 / radius).collect();
        Self {
            center,
            radius,
            slope,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let q = sq_dist(x, &self.center) / (self.radius * self.radius);
        if q >= 1.0 {
            return 0.0;
        }
        let b = (-1.0 / (1.0 - q)).exp();
        let p = 1.0
            + x.iter()
                .zip(&self.center)
                .zip(&self.slope)
                .map(|((xi, c), a)| a * (xi - c))
                .sum::<f64>();
        b * p
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r2 = self.radius * self.radius;
        let q = sq_dist(x, &self.center) / r2;
        if q >= 1.0 {
            return vec![0.0; x.len()];
        }
        let b = (-1.0 / (1.0 - q)).exp();
        let p = 1.0
            + x.iter()
                .zip(&self.center)
                .zip(&self.slope)
                .map(|((xi, c), a)| a * (xi - c))
                .sum::<f64>();
        let db = -b / ((1.0 - q) * (1.0 - q)) * 2.0 / r2;
        x.iter()
            .zip(&self.center)
            .zip(&self.slope)
            .map(|((xi, c), a)| db * (xi - c) * p + b * a)
            .collect()
    }
}

/// Both sides of the weak continuity equation at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityCheck {
    pub t: f64,
    /// `d/dt ∫ F dμ̃_t` by central difference in `t`.
    pub lhs: f64,
    /// `∫ ⟨∇F, ṽ_t⟩ dμ̃_t`.
    pub rhs: f64,
    pub std_err: f64,
    pub consistent: bool,
}

/// Compare `d/dt ∫ F dμ̃_t` with `∫ ⟨∇F, ṽ_t⟩ dμ̃_t` by Monte Carlo.
///
/// Both sides reuse the same draws `(I, Z)`: the left side evaluates `F` at
/// `c_I(t ± dt) + √s Z`, the right side `⟨∇F, ṽ_t⟩` at `c_I(t) + √s Z`. The
/// standard error is that of the paired difference, and the check passes when
/// `|lhs − rhs| ≤ 3σ + slack` (`slack` absorbs the `O(dt²)` bias).
pub fn continuity_check(
    fam: &TrajectoryFamily,
    test: &BumpTest,
    t: f64,
    s: f64,
    dt: f64,
    samples: usize,
    seed: u64,
    slack: f64,
) -> Result<ContinuityCheck> {
    check_noise(s)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("time step must be positive".into()));
    }
    let n = fam.dim();
    let k = fam.len();
    let (now, up, down) = (
        fam.positions(t),
        fam.positions(t + dt),
        fam.positions(t - dt),
    );
    let cumulative = cumulative_weights(fam.weights());
    let sd = s.sqrt();
    let pairs: Vec<(f64, f64)> = (0..samples.div_ceil(rng::BLOCK))
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut r = rng::stream(seed, b as u64);
            let len = rng::BLOCK.min(samples - b * rng::BLOCK);
            let (now, up, down, cumulative) = (&now, &up, &down, &cumulative);
            (0..len)
                .map(move |_| {
                    let u: f64 = r.random();
                    let i = cumulative.partition_point(|c| *c <= u).min(k - 1);
                    let z: Vec<f64> = (0..n)
                        .map(|_| sd * r.sample::<f64, _>(StandardNormal))
                        .collect();
                    let at = |p: &[f64]| -> Vec<f64> {
                        p[i * n..(i + 1) * n]
                            .iter()
                            .zip(&z)
                            .map(|(c, e)| c + e)
                            .collect()
                    };
                    let y = at(now);
                    let l = (test.value(&at(up)) - test.value(&at(down))) / (2.0 * dt);
                    let v = convolved_velocity(fam, t, &y, s).expect("dimension checked");
                    let g = test.gradient(&y);
                    (l, g.iter().zip(&v).map(|(a, b)| a * b).sum())
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let lhs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let rhs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    let (l, _) = rng::mean_and_stderr(&lhs);
    let (r, _) = rng::mean_and_stderr(&rhs);
    let (_, se) = rng::mean_and_stderr(&diff);
    Ok(ContinuityCheck {
        t,
        lhs: l,
        rhs: r,
        std_err: se,
        consistent: (l - r).abs() <= 3.0 * se + slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspace::{make_contraction_pair, random_contraction, ContractionMethod};
    use crate::gaussmix::{renyi_exact_integer, DEFAULT_EXACT_BUDGET};

    fn line(points: &[f64]) -> PointConfiguration {
        let pts: Vec<Vec<f64>> = points.iter().map(|p| vec![*p]).collect();
        PointConfiguration::uniform(1, &pts).unwrap()
    }

    fn squeeze() -> ContractionPair {
        make_contraction_pair(line(&[0.0, 2.0]), line(&[0.0, 1.0])).unwrap()
    }

    #[test]
    fn lift_endpoints_and_midpoint() {
        let src = PointConfiguration::random(2, 4, 1.0, 3).unwrap();
        let pair = random_contraction(&src, ContractionMethod::Any, 3);
        let fam = bezdek_connelly_lift(&pair);
        assert_eq!(fam.dim(), 4);
        for i in 0..4 {
            let (x, y) = (pair.source().point(i), pair.target().point(i));
            let p0 = fam.position(i, 0.0);
            let p1 = fam.position(i, 1.0);
            let ph = fam.position(i, 0.5);
            for a in 0..2 {
                assert!((p0[a] - x[a]).abs() < 1e-15 && p0[a + 2] == 0.0);
                assert!((p1[a] - y[a]).abs() < 1e-15 && p1[a + 2].abs() < 1e-15);
                assert!((ph[a] - 0.5 * (x[a] + y[a])).abs() < 1e-15);
                assert!((ph[a + 2] - 0.5 * (x[a] - y[a])).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn lift_velocity_matches_finite_difference() {
        let fam = bezdek_connelly_lift(&squeeze());
        for t in [0.1, 0.37, 0.8] {
            for i in 0..2 {
                let v = fam.velocity(i, t);
                let (a, b) = (fam.position(i, t + 1e-6), fam.position(i, t - 1e-6));
                for d in 0..2 {
                    assert!((v[d] - (a[d] - b[d]) / 2e-6).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn lift_distances_shrink_for_random_pairs() {
        let grid = uniform_t_grid(101);
        for seed in 0..50 {
            let src = PointConfiguration::random(1 + (seed % 3) as usize, 5, 1.5, seed).unwrap();
            let pair = random_contraction(&src, ContractionMethod::Any, seed);
            let fam = bezdek_connelly_lift(&pair);
            let check = check_contraction(&fam, &grid);
            assert!(check.holds(1e-10, 1e-8), "seed {seed}: {check:?}");
            // d/dt of each pairwise squared distance by central differences
            for i in 0..5 {
                for j in (i + 1)..5 {
                    for &t in &grid[1..100] {
                        let d = |t: f64| sq_dist(&fam.position(i, t), &fam.position(j, t));
                        assert!((d(t + 1e-6) - d(t - 1e-6)) / 2e-6 <= 1e-7);
                    }
                }
            }
        }
    }

    #[test]
    fn expanding_family_is_flagged() {
        let fam =
            TrajectoryFamily::custom(1, vec![0.5, 0.5], |i, t| vec![if i == 0 { -t } else { t }])
                .unwrap();
        let c = check_contraction(&fam, &default_t_grid());
        assert!(c.max_distance_increase > 0.0 && c.max_velocity_inner > 0.0);
        assert!(!c.holds(1e-10, 1e-8));
        let split = TrajectoryFamily::custom(1, vec![0.5, 0.5], |i, t| {
            vec![if i == 0 || t < 0.5 { 0.0 } else { t - 0.5 }]
        })
        .unwrap();
        assert_eq!(
            check_contraction(&split, &default_t_grid()).merge_violations,
            1
        );
    }

    #[test]
    fn posterior_examples() {
        let one = TrajectoryFamily::stationary(&line(&[3.0]));
        assert_eq!(posterior(&one, 0.0, &[-2.0], 1.0).unwrap().probs, vec![1.0]);
        let two = TrajectoryFamily::stationary(&line(&[0.0, 2.0]));
        let p = posterior(&two, 0.0, &[1.0], 0.7).unwrap();
        assert!((p.probs[0] - 0.5).abs() < 1e-15);
        let p = posterior(&two, 0.0, &[0.0], 1.0).unwrap();
        let e2 = 2f64.exp();
        assert!((p.probs[0] / p.probs[1] - e2).abs() < 1e-12);
        assert!((p.probs[0] - e2 / (1.0 + e2)).abs() < 1e-15);
        assert!((p.probs[0] - 0.8808).abs() < 1e-4);
        assert!(matches!(
            posterior(&two, 0.0, &[0.0, 1.0], 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn posterior_ignores_weight_scale() {
        let cfg =
            PointConfiguration::from_flat(1, vec![0.0, 1.0, 3.0], vec![0.2, 0.3, 0.5]).unwrap();
        let fam = TrajectoryFamily::stationary(&cfg);
        let p = posterior(&fam, 0.0, &[0.7], 2.0).unwrap();
        let raw: Vec<f64> = [(0.0, 2.0), (1.0, 3.0), (3.0, 5.0)]
            .iter()
            .map(|(c, w)| w * (-(0.7f64 - c).powi(2) / 4.0).exp())
            .collect();
        let z: f64 = raw.iter().sum();
        for (a, b) in p.probs.iter().zip(&raw) {
            assert!((a - b / z).abs() < 1e-15);
        }
    }

    #[test]
    fn velocity_examples() {
        let still = TrajectoryFamily::stationary(&line(&[0.0, 1.0, 5.0]));
        assert_eq!(
            convolved_velocity(&still, 0.3, &[0.4], 1.0).unwrap(),
            vec![0.0]
        );
        assert_eq!(convolved_divergence(&still, 0.3, &[0.4], 1.0).unwrap(), 0.0);
        let single = TrajectoryFamily::homothety(&line(&[2.0]), &[0.0], 0.5).unwrap();
        for x in [-3.0, 0.0, 10.0] {
            assert_eq!(
                convolved_velocity(&single, 0.4, &[x], 1.0).unwrap(),
                vec![-1.0]
            );
            assert_eq!(convolved_divergence(&single, 0.4, &[x], 1.0).unwrap(), 0.0);
        }
        let sym = TrajectoryFamily::homothety(&line(&[-1.0, 1.0]), &[0.0], 0.2).unwrap();
        assert!(convolved_velocity(&sym, 0.6, &[0.0], 1.3).unwrap()[0].abs() < 1e-15);
    }

    #[test]
    fn divergence_of_lift_is_nonpositive_and_matches_differences() {
        let fam = bezdek_connelly_lift(&squeeze());
        let pts = sample_smoothed(&fam, 0.3, 1.0, 100, 17).unwrap();
        for x in &pts {
            let d = convolved_divergence(&fam, 0.3, x, 1.0).unwrap();
            let fd = finite_difference_divergence(&fam, 0.3, x, 1.0, DIVERGENCE_STEP).unwrap();
            assert!(d <= 1e-9);
            assert!((d - fd).abs() < 1e-6, "{d} vs {fd}");
        }
    }

    #[test]
    fn divergence_scales_inversely_with_noise() {
        let fam = TrajectoryFamily::homothety(&line(&[-1.0, 0.5, 2.0]), &[0.0], 0.3).unwrap();
        let d = convolved_divergence(&fam, 0.2, &[0.4], 2.5).unwrap();
        let fd = finite_difference_divergence(&fam, 0.2, &[0.4], 2.5, DIVERGENCE_STEP).unwrap();
        assert!((d - fd).abs() < 1e-7);
    }

    #[test]
    fn identity_lift_gives_constant_series() {
        let fam = bezdek_connelly_lift(&ContractionPair::identity(line(&[0.0, 1.5, 2.0])));
        let p = EstimatorPolicy::default();
        let grid = uniform_t_grid(5);
        for phi in [
            ConvexFunctional::Power { alpha: 2.0 },
            ConvexFunctional::Xlogx,
        ] {
            let series = functional_along_flow(&fam, phi, 1.0, &grid, &p).unwrap();
            for w in series.windows(2) {
                assert!((w[0].value - w[1].value).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn power_two_series_rises_between_closed_form_endpoints() {
        let fam = bezdek_connelly_lift(&squeeze());
        let grid = default_t_grid();
        let series = functional_along_flow(
            &fam,
            ConvexFunctional::Power { alpha: 2.0 },
            1.0,
            &grid,
            &EstimatorPolicy::default(),
        )
        .unwrap();
        assert!(series.iter().all(|x| x.method == Method::ExactInteger));
        // ∫f² for two unit Gaussians at distance d in R²: (1 + e^{−d²/4}) / (8π)
        let closed = |d: f64| (1.0 + (-d * d / 4.0).exp()) / (8.0 * PI);
        assert!((series[0].value - closed(2.0)).abs() < 1e-15);
        assert!((series[20].value - closed(1.0)).abs() < 1e-15);
        assert!(series[20].value > series[0].value);
        assert_eq!(worst_decrease(&series, 1e-8), 0.0);
        // endpoint values equal the one-dimensional mixtures times ∫φ² of the zero axis
        let m1 = GaussianMixture::isotropic(&line(&[0.0, 1.0]), 1.0).unwrap();
        let h = renyi_exact_integer(&m1, 2, DEFAULT_EXACT_BUDGET)
            .unwrap()
            .value;
        assert!((series[20].value - (-h).exp() / (2.0 * PI.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn xlogx_series_rises_along_lift() {
        let fam = bezdek_connelly_lift(&squeeze());
        let grid = uniform_t_grid(6);
        let series = functional_along_flow(
            &fam,
            ConvexFunctional::Xlogx,
            1.0,
            &grid,
            &EstimatorPolicy::default(),
        )
        .unwrap();
        assert_eq!(worst_decrease(&series, 1e-8), 0.0);
        assert!(series[5].value > series[0].value);
    }

    #[test]
    fn hockey_stick_quadrature_and_monte_carlo_agree() {
        let fam = bezdek_connelly_lift(&squeeze());
        let phi = ConvexFunctional::HockeyStick { c: 0.02 };
        let q = functional_along_flow(&fam, phi, 1.0, &[0.0, 1.0], &EstimatorPolicy::default())
            .unwrap();
        let mc_policy = EstimatorPolicy::default()
            .with_mode(PolicyMode::MonteCarlo)
            .with_samples(200_000)
            .with_seed(4);
        let m = functional_along_flow(&fam, phi, 1.0, &[0.0, 1.0], &mc_policy).unwrap();
        for (a, b) in q.iter().zip(&m) {
            assert!((a.value - b.value).abs() < 3.0 * b.std_err + 1e-9);
        }
        assert!(q[1].value > q[0].value);
    }

    #[test]
    fn hockey_stick_quadrature_refuses_high_dimension() {
        let src = PointConfiguration::random(2, 3, 1.0, 1).unwrap();
        let fam = bezdek_connelly_lift(&ContractionPair::identity(src));
        let p = EstimatorPolicy::default().with_mode(PolicyMode::Quadrature);
        let e = functional_along_flow(
            &fam,
            ConvexFunctional::HockeyStick { c: 0.1 },
            1.0,
            &[0.0],
            &p,
        )
        .unwrap_err();
        assert_eq!(e, Error::UnsupportedDimension(4));
    }

    #[test]
    fn bump_gradient_matches_differences() {
        let fam = bezdek_connelly_lift(&squeeze());
        let b = BumpTest::around(&fam, 0.4, 1.0);
        for x in [[0.3, 0.1], [1.5, -0.7], [-2.0, 1.0]] {
            let g = b.gradient(&x);
            for a in 0..2 {
                let mut u = x;
                let mut d = x;
                u[a] += 1e-6;
                d[a] -= 1e-6;
                assert!((g[a] - (b.value(&u) - b.value(&d)) / 2e-6).abs() < 1e-8);
            }
        }
        let far = [b.center[0] + b.radius, b.center[1]];
        assert_eq!(b.value(&far), 0.0);
    }

    #[test]
    fn continuity_equation_holds_weakly() {
        let fam = bezdek_connelly_lift(&squeeze());
        for t in [0.2, 0.5, 0.9] {
            let test = BumpTest::around(&fam, t, 1.0);
            let c = continuity_check(&fam, &test, t, 1.0, 1e-3, 50_000, 8, 1e-6).unwrap();
            assert!(c.consistent, "{c:?}");
        }
    }
}
