//! Entropy-power experiments on Gaussian-smoothed configurations.
//!
//! `X` is a weighted point set convolved with `N(0, s0·I)`; `s0 = 0` means the
//! discrete set itself, whose entropy power `N(X) = exp(2h(X)/n)` is taken to
//! be 0 (its entropy is `−∞`). Three checks are provided:
//!
//! - concavity of `s ↦ N(X + √s Z)` through second differences on a uniform
//!   grid;
//! - monotonicity of `A(β) = N(βX + Z) − N(βX) = β²(N(X + Z/β) − N(X))`,
//!   which is the slope of the chord of that concave function from `0` to
//!   `1/β²`;
//! - `N(X + Z) ≥ N(AX + Z) + (1 − ‖A‖²) N(X)` for a linear map with
//!   operator norm `‖A‖ ≤ 1`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::configspace::PointConfiguration;
use crate::error::{Error, Result};
use crate::gaussmix::{entropy_power, EstimatorPolicy, GaussianMixture, Method};
use crate::kpverify::{classify, Verdict};

/// `2πe`, the entropy power of a unit-variance Gaussian.
pub const TWO_PI_E: f64 = 2.0 * std::f64::consts::PI * std::f64::consts::E;
/// Absolute floor for deterministic checks, where the standard error is 0.
pub const COSTA_ABS_TOL: f64 = 1e-9;
/// Allowed excess of the operator norm over 1.
pub const NORM_TOL: f64 = 1e-12;
/// Relative spacing mismatch tolerated in a "uniform" grid.
const GRID_TOL: f64 = 1e-9;

/// A point set smoothed by `N(0, s0·I)`, optionally with a linear map.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedConfig {
    base: PointConfiguration,
    s0: f64,
    map: Option<DMatrix<f64>>,
}

/// Largest singular value.
pub fn operator_norm(a: &DMatrix<f64>) -> f64 {
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |m, v| m.max(*v))
}

impl SmoothedConfig {
    pub fn new(base: PointConfiguration, s0: f64) -> Result<Self> {
        if !(s0 >= 0.0 && s0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be nonnegative, got {s0}"
            )));
        }
        Ok(Self {
            base,
            s0,
            map: None,
        })
    }

    /// Attach `A`, rejecting operator norms above `1 + 1e-12`.
    pub fn with_map(mut self, a: DMatrix<f64>) -> Result<Self> {
        let n = self.base.dim();
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.nrows().max(a.ncols()),
            });
        }
        let norm = operator_norm(&a);
        if norm > 1.0 + NORM_TOL {
            return Err(Error::OperatorNormExceeded { norm });
        }
        self.map = Some(a);
        Ok(self)
    }

    pub fn base(&self) -> &PointConfiguration {
        &self.base
    }

    pub fn bandwidth(&self) -> f64 {
        self.s0
    }

    pub fn map(&self) -> Option<&DMatrix<f64>> {
        self.map.as_ref()
    }

    fn dim(&self) -> usize {
        self.base.dim()
    }

    /// `X + √s Z`: the base points with covariance `(s0 + s)·I`.
    pub fn with_noise(&self, s: f64) -> Result<GaussianMixture> {
        GaussianMixture::isotropic(&self.base, self.s0 + s)
    }

    /// `N(X)`, with `N = 0` when `s0 = 0`.
    pub fn entropy_power(&self, policy: &EstimatorPolicy) -> Result<(f64, f64)> {
        if self.s0 == 0.0 {
            return Ok((0.0, 0.0));
        }
        let p = entropy_power(&self.with_noise(0.0)?, policy)?;
        Ok((p.value, p.std_err))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

/// `N(X + √s Z)` at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub s: f64,
    pub value: f64,
    pub std_err: f64,
    pub method: Method,
}

/// `N(s_{j+1}) − 2N(s_j) + N(s_{j−1})` centered at `s_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondDifference {
    pub s: f64,
    pub value: f64,
    pub std_err: f64,
    /// Concave within `max(3σ, 1e-9)`.
    pub concave: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostaReport {
    pub points: Vec<PowerPoint>,
    pub second_differences: Vec<SecondDifference>,
}

impl CostaReport {
    pub fn is_concave(&self) -> bool {
        self.second_differences.iter().all(|d| d.concave)
    }

    /// Every first difference `N(s_{j+1}) − N(s_j)` is positive within noise.
    pub fn is_increasing(&self) -> bool {
        self.points.windows(2).all(|w| {
            let band = COSTA_ABS_TOL.max(3.0 * w[0].std_err.hypot(w[1].std_err));
            w[1].value - w[0].value > -band
        })
    }
}

fn check_uniform(grid: &[f64]) -> Result<()> {
    let h = grid[1] - grid[0];
    let scale = grid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if grid
        .windows(2)
        .any(|w| w[1] <= w[0] || ((w[1] - w[0]) - h).abs() > GRID_TOL * scale)
    {
        return Err(Error::NonUniformGrid);
    }
    Ok(())
}

/// `N(X + √s Z)` along `s_grid` and its second differences. The grid must be
/// uniform with at least three points.
pub fn costa_concavity_report(
    x: &SmoothedConfig,
    s_grid: &[f64],
    policy: &EstimatorPolicy,
) -> Result<CostaReport> {
    if s_grid.len() < 3 {
        return Err(Error::InvalidArgument(
            "need at least three noise levels".into(),
        ));
    }
    for &s in s_grid {
        check_positive("noise variance", s)?;
    }
    check_uniform(s_grid)?;
    let points = s_grid
        .iter()
        .map(|&s| {
            let p = entropy_power(&x.with_noise(s)?, policy)?;
            Ok(PowerPoint {
                s,
                value: p.value,
                std_err: p.std_err,
                method: p.entropy.method,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let second_differences = points
        .windows(3)
        .map(|w| {
            let value = w[2].value - 2.0 * w[1].value + w[0].value;
            let std_err =
                (w[2].std_err.powi(2) + 4.0 * w[1].std_err.powi(2) + w[0].std_err.powi(2)).sqrt();
            SecondDifference {
                s: w[1].s,
                value,
                std_err,
                concave: value <= COSTA_ABS_TOL.max(3.0 * std_err),
            }
        })
        .collect();
    Ok(CostaReport {
        points,
        second_differences,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ABetaPoint {
    pub beta: f64,
    pub value: f64,
    pub std_err: f64,
}

/// `A(β) = N(βX + Z) − β² N(X)` on `beta_grid ⊂ [0, 1]`.
///
/// `βX + Z` has centers `β c_i` and covariance `(β² s0 + 1)·I`. With `s0 = 0`
/// the second term is 0 by convention, which must be requested explicitly
/// through `allow_discrete`.
pub fn a_beta_series(
    x: &SmoothedConfig,
    beta_grid: &[f64],
    allow_discrete: bool,
    policy: &EstimatorPolicy,
) -> Result<Vec<ABetaPoint>> {
    if x.bandwidth() == 0.0 && !allow_discrete {
        return Err(Error::BandwidthRequired);
    }
    if beta_grid.iter().any(|b| !(0.0..=1.0).contains(b)) {
        return Err(Error::InvalidArgument("β must lie in [0, 1]".into()));
    }
    let (nx, nx_se) = x.entropy_power(policy)?;
    beta_grid
        .iter()
        .map(|&beta| {
            let scaled = x
                .base
                .map_points(x.dim(), |p| p.iter().map(|v| beta * v).collect())?;
            let m = GaussianMixture::isotropic(&scaled, beta * beta * x.s0 + 1.0)?;
            let p = entropy_power(&m, policy)?;
            let b2 = beta * beta;
            Ok(ABetaPoint {
                beta,
                value: p.value - b2 * nx,
                std_err: p.std_err.hypot(b2 * nx_se),
            })
        })
        .collect()
}

/// Largest decrease of a series beyond `max(3σ, 1e-9)`; 0 if nondecreasing.
pub fn a_beta_worst_decrease(series: &[ABetaPoint]) -> f64 {
    series
        .windows(2)
        .map(|w| {
            let band = COSTA_ABS_TOL.max(3.0 * w[0].std_err.hypot(w[1].std_err));
            (w[0].value - w[1].value - band).max(0.0)
        })
        .fold(0.0, f64::max)
}

/// `A(β)` computed directly and as `β²(N(X + Z/β) − N(X))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceRow {
    pub beta: f64,
    pub direct: f64,
    pub chord: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub rows: Vec<EquivalenceRow>,
    /// Largest `|direct − chord|` relative to `max(1, |direct|)`.
    pub max_relative_mismatch: f64,
    /// The chord slopes `(N(X + √u Z) − N(X))/u` decrease in `u = 1/β²`.
    pub chords_decreasing: bool,
}

/// Evaluate `A(β)` both ways for `β ∈ beta_grid`; `β = 0` uses the limit
/// `2πe` for the chord form.
pub fn a_beta_equivalence(
    x: &SmoothedConfig,
    beta_grid: &[f64],
    allow_discrete: bool,
    policy: &EstimatorPolicy,
) -> Result<EquivalenceReport> {
    let direct = a_beta_series(x, beta_grid, allow_discrete, policy)?;
    let (nx, _) = x.entropy_power(policy)?;
    let rows = direct
        .iter()
        .map(|d| {
            let chord = if d.beta == 0.0 {
                TWO_PI_E
            } else {
                let u = 1.0 / (d.beta * d.beta);
                let g = entropy_power(&x.with_noise(u)?, policy)?.value;
                (g - nx) / u
            };
            Ok(EquivalenceRow {
                beta: d.beta,
                direct: d.value,
                chord,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_relative_mismatch = rows
        .iter()
        .map(|r| (r.direct - r.chord).abs() / r.direct.abs().max(1.0))
        .fold(0.0, f64::max);
    let mut by_u: Vec<&EquivalenceRow> = rows.iter().collect();
    by_u.sort_by(|a, b| b.beta.total_cmp(&a.beta));
    let chords_decreasing = by_u
        .windows(2)
        .all(|w| w[1].chord <= w[0].chord + COSTA_ABS_TOL);
    Ok(EquivalenceReport {
        rows,
        max_relative_mismatch,
        chords_decreasing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnifiedReport {
    pub n_x_plus_z: f64,
    pub n_ax_plus_z: f64,
    pub n_x: f64,
    pub lipschitz: f64,
    pub gap: f64,
    pub std_err: f64,
    pub verdict: Verdict,
    pub note: Option<String>,
}

/// `N(X + Z) − N(AX + Z) − (1 − ‖A‖²) N(X)` for the attached map `A`.
/// `AX + Z` has centers `A c_i` and covariance `A s0 Aᵀ + I`.
pub fn unified_inequality_check(
    x: &SmoothedConfig,
    policy: &EstimatorPolicy,
) -> Result<UnifiedReport> {
    let a = x
        .map()
        .ok_or_else(|| Error::InvalidArgument("a linear map is required".into()))?;
    let lipschitz = operator_norm(a);
    if lipschitz > 1.0 + NORM_TOL {
        return Err(Error::OperatorNormExceeded { norm: lipschitz });
    }
    let n = x.dim();
    let source = entropy_power(&x.with_noise(1.0)?, policy)?;
    let mapped = x.base.map_points(n, |p| {
        (a * nalgebra::DVector::from_column_slice(p))
            .as_slice()
            .to_vec()
    })?;
    let cov = a * a.transpose() * x.s0 + DMatrix::identity(n, n);
    let cov = (&cov + cov.transpose()) * 0.5;
    let target = entropy_power(&GaussianMixture::new(&mapped, cov)?, policy)?;
    let (n_x, n_x_se) = x.entropy_power(policy)?;
    let shrink = (1.0 - lipschitz * lipschitz).max(0.0);
    let gap = source.value - target.value - shrink * n_x;
    let std_err =
        (source.std_err.powi(2) + target.std_err.powi(2) + (shrink * n_x_se).powi(2)).sqrt();
    Ok(UnifiedReport {
        n_x_plus_z: source.value,
        n_ax_plus_z: target.value,
        n_x,
        lipschitz,
        gap,
        std_err,
        verdict: classify(gap, std_err, COSTA_ABS_TOL),
        note: (x.s0 == 0.0)
            .then(|| "discrete X: N(X) = 0, the inequality reduces to N(X+Z) >= N(AX+Z)".into()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussmix::{renyi_quadrature, QuadratureSpec};

    fn line(points: &[f64]) -> PointConfiguration {
        let pts: Vec<Vec<f64>> = points.iter().map(|p| vec![*p]).collect();
        PointConfiguration::uniform(1, &pts).unwrap()
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64)
            .collect()
    }

    fn policy() -> EstimatorPolicy {
        EstimatorPolicy::default()
    }

    #[test]
    fn gaussian_entropy_power_is_affine_in_noise() {
        let x = SmoothedConfig::new(line(&[1.3]), 0.4).unwrap();
        let r = costa_concavity_report(&x, &grid(0.5, 4.0, 8), &policy()).unwrap();
        for (p, s) in r.points.iter().zip(grid(0.5, 4.0, 8)) {
            assert!((p.value - TWO_PI_E * (0.4 + s)).abs() < 1e-11);
        }
        for d in &r.second_differences {
            assert!(d.value.abs() <= 1e-9);
        }
    }

    #[test]
    fn two_point_config_is_concave_and_increasing() {
        let x = SmoothedConfig::new(line(&[0.0, 2.0]), 0.0).unwrap();
        let r = costa_concavity_report(&x, &grid(0.5, 4.0, 8), &policy()).unwrap();
        assert_eq!(r.second_differences.len(), 6);
        assert!(r.is_concave(), "{:?}", r.second_differences);
        assert!(r.is_increasing());
        assert!(r.second_differences.iter().any(|d| d.value < -1e-6));
    }

    #[test]
    fn anisotropic_two_dimensional_config_is_concave() {
        let cfg = PointConfiguration::from_flat(
            2,
            vec![0.0, 0.0, 2.0, 0.5, -1.0, 1.5],
            vec![0.3, 0.3, 0.4],
        )
        .unwrap();
        let x = SmoothedConfig::new(cfg, 0.2).unwrap();
        let r = costa_concavity_report(&x, &grid(0.25, 2.0, 8), &policy()).unwrap();
        assert!(r.is_concave() && r.is_increasing());
    }

    #[test]
    fn grid_checks() {
        let x = SmoothedConfig::new(line(&[0.0, 1.0]), 0.0).unwrap();
        assert_eq!(
            costa_concavity_report(&x, &[0.5, 1.0, 2.0], &policy()).unwrap_err(),
            Error::NonUniformGrid
        );
        assert!(costa_concavity_report(&x, &[0.5, 1.0], &policy()).is_err());
        assert!(costa_concavity_report(&x, &[-1.0, 0.0, 1.0], &policy()).is_err());
    }

    #[test]
    fn a_beta_is_constant_for_a_gaussian() {
        let x = SmoothedConfig::new(line(&[-0.7]), 0.5).unwrap();
        for p in a_beta_series(&x, &grid(0.0, 1.0, 11), false, &policy()).unwrap() {
            assert!((p.value - TWO_PI_E).abs() < 1e-9, "{p:?}");
        }
    }

    #[test]
    fn a_beta_needs_bandwidth_or_convention() {
        let x = SmoothedConfig::new(line(&[0.0, 2.0]), 0.0).unwrap();
        assert_eq!(
            a_beta_series(&x, &[0.5], false, &policy()).unwrap_err(),
            Error::BandwidthRequired
        );
        let s = a_beta_series(&x, &grid(0.0, 1.0, 11), true, &policy()).unwrap();
        assert_eq!(a_beta_worst_decrease(&s), 0.0);
    }

    #[test]
    fn a_beta_rises_and_gives_epi_instance() {
        let x = SmoothedConfig::new(line(&[0.0, 2.0]), 0.5).unwrap();
        let s = a_beta_series(&x, &grid(0.0, 1.0, 11), false, &policy()).unwrap();
        assert_eq!(a_beta_worst_decrease(&s), 0.0, "{s:?}");
        assert!((s[0].value - TWO_PI_E).abs() < 1e-9);
        // A(1) ≥ A(0) is N(X + Z) ≥ N(X) + N(Z); check it from an independent grid
        let spec = QuadratureSpec::with_nodes(16_001);
        let h = |m: &GaussianMixture| renyi_quadrature(m, 1.0, &spec).unwrap().value;
        let n_xz = (2.0 * h(&x.with_noise(1.0).unwrap())).exp();
        let n_x = (2.0 * h(&x.with_noise(0.0).unwrap())).exp();
        assert!((s[10].value - (n_xz - n_x)).abs() < 1e-8);
        assert!(n_xz >= n_x + TWO_PI_E);
    }

    #[test]
    fn chord_form_matches_direct_form() {
        let x = SmoothedConfig::new(line(&[-1.0, 0.5, 2.0]), 0.3).unwrap();
        let r = a_beta_equivalence(&x, &grid(0.0, 1.0, 11), false, &policy()).unwrap();
        assert!(r.max_relative_mismatch < 1e-10, "{r:?}");
        assert!(r.chords_decreasing);
    }

    #[test]
    fn unified_inequality_examples() {
        let base = line(&[0.0, 2.0]);
        let id = SmoothedConfig::new(base.clone(), 0.5)
            .unwrap()
            .with_map(DMatrix::identity(1, 1))
            .unwrap();
        let r = unified_inequality_check(&id, &policy()).unwrap();
        assert!(r.gap.abs() < 1e-9 && (r.lipschitz - 1.0).abs() < 1e-15);
        let zero = SmoothedConfig::new(base.clone(), 0.5)
            .unwrap()
            .with_map(DMatrix::zeros(1, 1))
            .unwrap();
        let r = unified_inequality_check(&zero, &policy()).unwrap();
        assert!(r.gap > 0.0);
        assert!((r.n_ax_plus_z - TWO_PI_E).abs() < 1e-12);
        let shrink = SmoothedConfig::new(base.clone(), 0.5)
            .unwrap()
            .with_map(DMatrix::from_element(1, 1, 0.6))
            .unwrap();
        let r = unified_inequality_check(&shrink, &policy()).unwrap();
        assert_ne!(r.verdict, Verdict::Violation);
        assert!(r.gap >= -1e-9);
        let discrete = SmoothedConfig::new(base, 0.0)
            .unwrap()
            .with_map(DMatrix::from_element(1, 1, 0.6))
            .unwrap();
        assert!(unified_inequality_check(&discrete, &policy())
            .unwrap()
            .note
            .is_some());
    }

    #[test]
    fn rotation_in_the_plane_has_zero_gap() {
        let cfg = PointConfiguration::from_flat(
            2,
            vec![0.0, 0.0, 1.5, 0.5, -0.5, 1.0],
            vec![0.2, 0.5, 0.3],
        )
        .unwrap();
        let (c, s) = (0.8, 0.6);
        let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let x = SmoothedConfig::new(cfg, 0.3)
            .unwrap()
            .with_map(rot)
            .unwrap();
        let r = unified_inequality_check(&x, &policy()).unwrap();
        assert!(r.gap.abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn expanding_map_is_rejected() {
        let x = SmoothedConfig::new(line(&[0.0, 1.0]), 0.1).unwrap();
        assert!(matches!(
            x.with_map(DMatrix::from_element(1, 1, 1.5)),
            Err(Error::OperatorNormExceeded { .. })
        ));
    }
}
