//! Gaussian mixtures with a shared covariance and their Rényi entropies.
//!
//! Every estimator works on the *whitened* mixture: with `Σ = L Lᵀ` the map
//! `u = L⁻¹x` turns the mixture into one with identity covariance and centers
//! `L⁻¹cᵢ`, and `h_α(X) = h_α(L⁻¹X) + log det L` for every order. Quadrature
//! grids, Monte Carlo proposals and mode searches therefore only ever see unit
//! covariance.

mod exact;
pub(crate) mod montecarlo;
mod quadrature;
mod sup;

pub use exact::{renyi_exact_integer, DEFAULT_EXACT_BUDGET};
pub use montecarlo::{renyi_monte_carlo, MIN_SAMPLES};
pub use quadrature::{
    integrate_density_functional, renyi_quadrature, renyi_quadrature_orders, QuadratureSpec,
};
pub use sup::renyi_sup;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::configspace::PointConfiguration;
use crate::error::{Error, Result};

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Mixture `Σ wᵢ N(cᵢ, Σ)` with one covariance shared by all components.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    dim: usize,
    centers: Vec<f64>,
    weights: Vec<f64>,
    covariance: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_det_chol: f64,
    white: Vec<f64>,
    log_weights: Vec<f64>,
}

impl GaussianMixture {
    /// Mixture with centers and weights from `config` and covariance `cov`.
    pub fn new(config: &PointConfiguration, cov: DMatrix<f64>) -> Result<Self> {
        Self::from_parts(
            config.dim(),
            config.coords().to_vec(),
            config.weights().to_vec(),
            cov,
        )
    }

    /// `X + √s Z` for `X` distributed on `config`.
    pub fn isotropic(config: &PointConfiguration, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive, got {s}"
            )));
        }
        let n = config.dim();
        Self::new(config, DMatrix::identity(n, n) * s)
    }

    pub fn from_parts(
        dim: usize,
        centers: Vec<f64>,
        weights: Vec<f64>,
        cov: DMatrix<f64>,
    ) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyConfiguration);
        }
        if centers.len() != dim * weights.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * weights.len(),
                got: centers.len(),
            });
        }
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: cov.nrows(),
            });
        }
        let scale = cov.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
        if (&cov - cov.transpose())
            .iter()
            .any(|d| d.abs() > 1e-12 * scale)
        {
            return Err(Error::NotPositiveDefinite);
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?
            .l();
        let log_det_chol = chol.diagonal().iter().map(|d| d.ln()).sum();
        let mut white = Vec::with_capacity(centers.len());
        for c in centers.chunks_exact(dim) {
            white.extend(forward_solve(&chol, c));
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self {
            dim,
            centers,
            weights,
            covariance: cov,
            chol,
            log_det_chol,
            white,
            log_weights,
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

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// `½ log det Σ`.
    pub fn log_det_chol(&self) -> f64 {
        self.log_det_chol
    }

    /// Smallest eigenvalue of the covariance.
    pub fn min_eigenvalue(&self) -> f64 {
        self.covariance
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |a, b| a.min(*b))
    }

    /// Independent product: centers `(cᵢ, dⱼ)`, weights `wᵢvⱼ`, block-diagonal
    /// covariance.
    pub fn product(&self, other: &Self) -> Result<Self> {
        let dim = self.dim + other.dim;
        let mut centers = Vec::with_capacity(self.len() * other.len() * dim);
        let mut weights = Vec::with_capacity(self.len() * other.len());
        for i in 0..self.len() {
            for j in 0..other.len() {
                centers.extend_from_slice(self.center(i));
                centers.extend_from_slice(other.center(j));
                weights.push(self.weights[i] * other.weights[j]);
            }
        }
        let mut cov = DMatrix::zeros(dim, dim);
        cov.view_mut((0, 0), (self.dim, self.dim))
            .copy_from(&self.covariance);
        cov.view_mut((self.dim, self.dim), (other.dim, other.dim))
            .copy_from(&other.covariance);
        Self::from_parts(dim, centers, weights, cov)
    }

    /// Law of `λX` where `X` has this law: centers `λcᵢ`, covariance `λ²Σ`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        Self::from_parts(
            self.dim,
            self.centers.iter().map(|c| lambda * c).collect(),
            self.weights.clone(),
            &self.covariance * (lambda * lambda),
        )
    }

    /// Log-density at `x`, evaluated with a max-shifted sum of exponentials.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let u = forward_solve(&self.chol, x);
        Ok(self.white_log_density(&u) - self.log_det_chol)
    }

    pub(crate) fn white_centers(&self) -> &[f64] {
        &self.white
    }

    pub(crate) fn white_center(&self, i: usize) -> &[f64] {
        &self.white[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Log-density of the whitened (unit covariance) mixture.
    pub(crate) fn white_log_density(&self, u: &[f64]) -> f64 {
        let mut lse = OnlineLogSumExp::default();
        for (c, lw) in self.white.chunks_exact(self.dim).zip(&self.log_weights) {
            let q: f64 = c.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum();
            lse.push(lw - 0.5 * q);
        }
        lse.value() - 0.5 * self.dim as f64 * LN_2PI
    }

    /// Map whitened coordinates back: `x = L u`.
    pub(crate) fn unwhiten(&self, u: &[f64]) -> Vec<f64> {
        (&self.chol * DVector::from_column_slice(u))
            .iter()
            .copied()
            .collect()
    }

    /// Number of distinct centers (exact comparison).
    pub fn distinct_centers(&self) -> usize {
        let mut reps: Vec<&[f64]> = Vec::new();
        for c in self.white.chunks_exact(self.dim) {
            if !reps.contains(&c) {
                reps.push(c);
            }
        }
        reps.len()
    }
}

/// Solve `L y = b` for lower-triangular `L`.
pub(crate) fn forward_solve(l: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut acc = b[i];
        for j in 0..i {
            acc -= l[(i, j)] * y[j];
        }
        y[i] = acc / l[(i, i)];
    }
    y
}

/// Streaming `log Σ exp(tᵢ)` with a running maximum.
#[derive(Debug, Clone, Copy)]
pub(crate) struct OnlineLogSumExp {
    max: f64,
    sum: f64,
}

impl Default for OnlineLogSumExp {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }
}

impl OnlineLogSumExp {
    #[inline]
    pub(crate) fn push(&mut self, t: f64) {
        if t == f64::NEG_INFINITY {
            return;
        }
        if t > self.max {
            self.sum = self.sum * (self.max - t).exp() + 1.0;
            self.max = t;
        } else {
            self.sum += (t - self.max).exp();
        }
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// How an entropy value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Closed form for a single Gaussian component.
    Analytic,
    ExactInteger,
    Quadrature,
    MonteCarlo,
    SupOptimization,
}

impl Method {
    pub fn is_deterministic(self) -> bool {
        !matches!(self, Method::MonteCarlo)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Analytic => "analytic",
            Method::ExactInteger => "exact-integer",
            Method::Quadrature => "quadrature",
            Method::MonteCarlo => "monte-carlo",
            Method::SupOptimization => "sup-optimization",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Provenance attached to an estimate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateMeta {
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub nodes_per_axis: Option<usize>,
    pub step: Option<f64>,
    /// `|h(grid) − h(grid with every other node)|`.
    pub refinement_discrepancy: Option<f64>,
    pub terms: Option<u64>,
    pub argmax: Option<Vec<f64>>,
    pub jackknife_std_err: Option<f64>,
}

/// A Rényi entropy value in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub order: f64,
    pub value: f64,
    pub std_err: f64,
    pub method: Method,
    pub meta: EstimateMeta,
}

impl EntropyEstimate {
    pub(crate) fn deterministic(
        order: f64,
        value: f64,
        method: Method,
        meta: EstimateMeta,
    ) -> Self {
        Self {
            order,
            value,
            std_err: 0.0,
            method,
            meta,
        }
    }
}

/// `h_α` of a single Gaussian with covariance `Σ` (`½ log det Σ` given).
pub fn gaussian_renyi(dim: usize, log_det_chol: f64, alpha: f64) -> f64 {
    let n = dim as f64;
    let base = 0.5 * n * LN_2PI + log_det_chol;
    if alpha == 0.0 {
        f64::INFINITY
    } else if alpha == 1.0 {
        base + 0.5 * n
    } else if alpha.is_infinite() {
        base
    } else {
        base + 0.5 * n * alpha.ln() / (alpha - 1.0)
    }
}

/// Closed-form entropy when every center coincides.
pub fn renyi_analytic(m: &GaussianMixture, alpha: f64) -> Result<EntropyEstimate> {
    if m.distinct_centers() != 1 {
        return Err(Error::InvalidArgument(
            "analytic path needs a single distinct center".into(),
        ));
    }
    Ok(EntropyEstimate::deterministic(
        alpha,
        gaussian_renyi(m.dim(), m.log_det_chol(), alpha),
        Method::Analytic,
        EstimateMeta::default(),
    ))
}

/// Estimator selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyMode {
    /// Closed form where available, quadrature for `n ≤ 2`, else Monte Carlo.
    #[default]
    Auto,
    Quadrature,
    MonteCarlo,
}

impl std::str::FromStr for PolicyMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "quadrature" => Ok(Self::Quadrature),
            "mc" | "monte-carlo" => Ok(Self::MonteCarlo),
            other => Err(Error::InvalidArgument(format!("unknown policy {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorPolicy {
    pub mode: PolicyMode,
    /// Nodes per axis; `None` uses [`QuadratureSpec::default_for`].
    pub nodes_per_axis: Option<usize>,
    pub samples: usize,
    pub seed: u64,
    pub exact_budget: u64,
}

impl Default for EstimatorPolicy {
    fn default() -> Self {
        Self {
            mode: PolicyMode::Auto,
            nodes_per_axis: None,
            samples: 100_000,
            seed: 0,
            exact_budget: DEFAULT_EXACT_BUDGET,
        }
    }
}

impl EstimatorPolicy {
    pub fn with_mode(mut self, mode: PolicyMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes_per_axis = Some(nodes);
        self
    }

    pub fn quadrature_spec(&self, dim: usize) -> QuadratureSpec {
        let mut spec = QuadratureSpec::default_for(dim);
        if let Some(n) = self.nodes_per_axis {
            spec.nodes_per_axis = n;
        }
        spec
    }
}

fn is_integer_order(alpha: f64) -> bool {
    alpha.is_finite() && alpha >= 2.0 && alpha.fract() == 0.0
}

/// The estimator `policy` picks for `h_α(m)`. `α = 0` is reported as
/// [`Method::Analytic`] since its value is `+∞` for any mixture.
pub fn select_method(m: &GaussianMixture, alpha: f64, policy: &EstimatorPolicy) -> Result<Method> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::NonPositiveAlpha(alpha));
    }
    if alpha == 0.0 {
        return Ok(Method::Analytic);
    }
    Ok(match policy.mode {
        PolicyMode::Auto => {
            if m.distinct_centers() == 1 {
                Method::Analytic
            } else if alpha.is_infinite() {
                Method::SupOptimization
            } else if is_integer_order(alpha)
                && exact::term_count(m.len(), alpha as u32)
                    .is_some_and(|t| t <= policy.exact_budget as u128)
            {
                Method::ExactInteger
            } else if m.dim() <= 2 {
                Method::Quadrature
            } else {
                Method::MonteCarlo
            }
        }
        _ if alpha.is_infinite() => Method::SupOptimization,
        PolicyMode::Quadrature => Method::Quadrature,
        PolicyMode::MonteCarlo => Method::MonteCarlo,
    })
}

/// `h_α(m)` by the estimator the policy selects. `α = 0` gives `+∞`.
pub fn estimate_renyi(
    m: &GaussianMixture,
    alpha: f64,
    policy: &EstimatorPolicy,
) -> Result<EntropyEstimate> {
    Ok(estimate_renyi_orders(m, &[alpha], policy)?.remove(0))
}

/// Like [`estimate_renyi`] for several orders; orders routed to quadrature
/// share one density grid.
pub fn estimate_renyi_orders(
    m: &GaussianMixture,
    orders: &[f64],
    policy: &EstimatorPolicy,
) -> Result<Vec<EntropyEstimate>> {
    let methods = orders
        .iter()
        .map(|&a| select_method(m, a, policy))
        .collect::<Result<Vec<_>>>()?;
    estimate_renyi_orders_with(m, orders, &methods, policy)
}

/// Evaluate each order with the given method. Sample counts, seed, grid
/// size and term budget still come from `policy`.
pub fn estimate_renyi_orders_with(
    m: &GaussianMixture,
    orders: &[f64],
    methods: &[Method],
    policy: &EstimatorPolicy,
) -> Result<Vec<EntropyEstimate>> {
    if orders.len() != methods.len() {
        return Err(Error::DimensionMismatch {
            expected: orders.len(),
            got: methods.len(),
        });
    }
    let quad_orders: Vec<f64> = orders
        .iter()
        .zip(methods)
        .filter(|(a, m)| **m == Method::Quadrature && **a != 0.0)
        .map(|(a, _)| *a)
        .collect();
    let mut quad = if quad_orders.is_empty() {
        Vec::new()
    } else {
        renyi_quadrature_orders(m, &quad_orders, &policy.quadrature_spec(m.dim()))?
    }
    .into_iter();
    orders
        .iter()
        .zip(methods)
        .map(|(&alpha, method)| {
            if alpha.is_nan() || alpha < 0.0 {
                return Err(Error::NonPositiveAlpha(alpha));
            }
            if alpha == 0.0 {
                return Ok(EntropyEstimate::deterministic(
                    0.0,
                    f64::INFINITY,
                    Method::Analytic,
                    EstimateMeta::default(),
                ));
            }
            match method {
                Method::Analytic => renyi_analytic(m, alpha),
                Method::ExactInteger if is_integer_order(alpha) => {
                    renyi_exact_integer(m, alpha as u32, policy.exact_budget)
                }
                Method::ExactInteger => Err(Error::InvalidArgument(format!(
                    "exact path needs integer order >= 2, got {alpha}"
                ))),
                Method::SupOptimization if alpha.is_infinite() => Ok(renyi_sup(m)),
                Method::SupOptimization => Err(Error::InvalidArgument(
                    "sup path is for order infinity".into(),
                )),
                Method::Quadrature => Ok(quad.next().expect("one quadrature result per order")),
                Method::MonteCarlo => renyi_monte_carlo(m, alpha, policy.samples, policy.seed),
            }
        })
        .collect()
}

/// `N = exp(2h/n)` with its propagated standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyPower {
    pub value: f64,
    pub std_err: f64,
    pub entropy: EntropyEstimate,
}

/// Entropy power from the Shannon entropy chosen by `policy`.
pub fn entropy_power(m: &GaussianMixture, policy: &EstimatorPolicy) -> Result<EntropyPower> {
    let h = estimate_renyi(m, 1.0, policy)?;
    let n = m.dim() as f64;
    let value = (2.0 * h.value / n).exp();
    Ok(EntropyPower {
        value,
        std_err: value * 2.0 * h.std_err / n,
        entropy: h,
    })
}
