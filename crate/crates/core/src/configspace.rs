//! Weighted point configurations and certified contraction pairs.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Weights must sum to 1 within this before renormalization is allowed.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;
/// Absolute slack on squared distances in the pairwise contraction check.
pub const PAIRWISE_TOL: f64 = 1e-12;

/// A weighted finite point set in `R^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointConfiguration {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

/// Validate raw points and weights into a configuration.
///
/// Weights summing to within [`WEIGHT_SUM_TOL`] of 1 are renormalized; any
/// other sum is rejected.
pub fn validate_configuration(
    dim: usize,
    points: &[Vec<f64>],
    weights: &[f64],
) -> Result<PointConfiguration> {
    if points.is_empty() {
        return Err(Error::EmptyConfiguration);
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    if weights.len() != points.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: weights.len(),
        });
    }
    let mut coords = Vec::with_capacity(points.len() * dim);
    for p in points {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        if p.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coordinate".into()));
        }
        coords.extend_from_slice(p);
    }
    PointConfiguration::from_flat(dim, coords, weights.to_vec())
}

impl PointConfiguration {
    /// Build from row-major coordinates (`k * dim` values).
    pub fn from_flat(dim: usize, coords: Vec<f64>, mut weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if coords.is_empty() || weights.is_empty() {
            return Err(Error::EmptyConfiguration);
        }
        if coords.len() != weights.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: weights.len() * dim,
                got: coords.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::NonPositiveWeightSum { sum });
        }
        weights.iter_mut().for_each(|w| *w /= sum);
        Ok(Self {
            dim,
            coords,
            weights,
        })
    }

    /// Equal weights on the given points.
    pub fn uniform(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        let k = points.len().max(1);
        validate_configuration(dim, points, &vec![1.0 / k as f64; points.len()])
    }

    /// Random configuration: coordinates uniform in `[-spread, spread]^dim`,
    /// weights uniform on `[0.2, 1]` then normalized.
    pub fn random(dim: usize, k: usize, spread: f64, seed: u64) -> Result<Self> {
        let mut r = rng::stream(seed, u64::MAX);
        let coords = (0..k * dim)
            .map(|_| r.random_range(-spread..=spread))
            .collect();
        let raw: Vec<f64> = (0..k).map(|_| r.random_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        Self::from_flat(dim, coords, raw.into_iter().map(|w| w / total).collect())
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

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same weights, new coordinates (possibly in another dimension).
    pub fn with_coords(&self, dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() != dim * self.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * self.len(),
                got: coords.len(),
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coordinate".into()));
        }
        Ok(Self {
            dim,
            coords,
            weights: self.weights.clone(),
        })
    }

    /// Apply `f` to every point.
    pub fn map_points<F>(&self, out_dim: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let coords: Vec<f64> = self.points().flat_map(f).collect();
        self.with_coords(out_dim, coords)
    }

    /// Append `extra` zero coordinates to every point.
    pub fn embed_zero(&self, extra: usize) -> Self {
        let dim = self.dim + extra;
        let coords = self
            .points()
            .flat_map(|p| p.iter().copied().chain(std::iter::repeat_n(0.0, extra)))
            .collect();
        Self {
            dim,
            coords,
            weights: self.weights.clone(),
        }
    }

    /// Cartesian product with independent weights.
    pub fn product(&self, other: &Self) -> Self {
        let dim = self.dim + other.dim;
        let mut coords = Vec::with_capacity(self.len() * other.len() * dim);
        let mut weights = Vec::with_capacity(self.len() * other.len());
        for (p, wp) in self.points().zip(&self.weights) {
            for (q, wq) in other.points().zip(&other.weights) {
                coords.extend_from_slice(p);
                coords.extend_from_slice(q);
                weights.push(wp * wq);
            }
        }
        Self {
            dim,
            coords,
            weights,
        }
    }

    /// Indices of distinct points: `groups[g]` lists the indices equal to
    /// the `g`-th distinct point (within `tol` in each coordinate).
    pub fn distinct_groups(&self, tol: f64) -> Vec<Vec<usize>> {
        let mut groups: Vec<Vec<usize>> = Vec::new();
        'outer: for i in 0..self.len() {
            for g in groups.iter_mut() {
                let rep = self.point(g[0]);
                if rep
                    .iter()
                    .zip(self.point(i))
                    .all(|(a, b)| (a - b).abs() <= tol)
                {
                    g.push(i);
                    continue 'outer;
                }
            }
            groups.push(vec![i]);
        }
        groups
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for p in self.points() {
            for d in 0..self.dim {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (lo, hi)
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// A source configuration with a pairwise-distance-nonincreasing image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionPair {
    source: PointConfiguration,
    target: PointConfiguration,
    lipschitz_bound: f64,
}

/// Certify that `target` is a contraction of `source`.
///
/// The Lipschitz bound is the largest distance ratio over pairs with distinct
/// sources; pairs with coincident sources must have coincident targets and
/// contribute nothing. A single point gets bound 0.
pub fn make_contraction_pair(
    source: PointConfiguration,
    target: PointConfiguration,
) -> Result<ContractionPair> {
    if source.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: source.len(),
            got: target.len(),
        });
    }
    if source
        .weights
        .iter()
        .zip(&target.weights)
        .any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(Error::InvalidArgument(
            "source and target weights differ".into(),
        ));
    }
    let mut ratio_sq: f64 = 0.0;
    for i in 0..source.len() {
        for j in (i + 1)..source.len() {
            let ds = sq_dist(source.point(i), source.point(j));
            let dt = sq_dist(target.point(i), target.point(j));
            if ds == 0.0 {
                if dt > PAIRWISE_TOL {
                    return Err(Error::InconsistentCollapse { i, j });
                }
                continue;
            }
            if dt > ds + PAIRWISE_TOL {
                return Err(Error::NotAContraction {
                    i,
                    j,
                    ratio: (dt / ds).sqrt(),
                });
            }
            ratio_sq = ratio_sq.max(dt / ds);
        }
    }
    Ok(ContractionPair {
        source,
        target,
        lipschitz_bound: ratio_sq.sqrt().min(1.0),
    })
}

impl ContractionPair {
    pub fn source(&self) -> &PointConfiguration {
        &self.source
    }

    pub fn target(&self) -> &PointConfiguration {
        &self.target
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    pub fn identity(source: PointConfiguration) -> Self {
        make_contraction_pair(source.clone(), source).expect("identity is a contraction")
    }

    /// Both sides embedded as `(x, 0) ∈ R^{n+extra}`.
    pub fn embed_zero(&self, extra: usize) -> Result<Self> {
        make_contraction_pair(self.source.embed_zero(extra), self.target.embed_zero(extra))
    }

    /// The pair mapped through `f` on both sides, re-certified.
    pub fn rigid_motion<F, G>(&self, f: F, g: G) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64>,
        G: Fn(&[f64]) -> Vec<f64>,
    {
        make_contraction_pair(
            self.source.map_points(self.source.dim, f)?,
            self.target.map_points(self.target.dim, g)?,
        )
    }
}

/// 1-Lipschitz maps of `R^n` used to generate contraction pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Contraction {
    /// `x ↦ center + ratio·(x − center)`, `ratio ∈ [0, 1]`.
    Scaling { center: Vec<f64>, ratio: f64 },
    /// Metric projection onto a closed ball.
    BallProjection { center: Vec<f64>, radius: f64 },
    /// Metric projection onto `{x : ⟨normal, x⟩ ≤ offset}`.
    HalfSpaceProjection { normal: Vec<f64>, offset: f64 },
    /// Reflect the side `⟨normal, x⟩ > offset` onto the other side.
    Fold { normal: Vec<f64>, offset: f64 },
    /// Apply the maps left to right.
    Compose { maps: Vec<Contraction> },
}

impl Contraction {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Contraction::Scaling { ratio, .. } if *ratio == 1.0 => x.to_vec(),
            Contraction::Scaling { center, ratio } => x
                .iter()
                .zip(center)
                .map(|(xi, ci)| ci + ratio * (xi - ci))
                .collect(),
            Contraction::BallProjection { center, radius } => {
                let d = sq_dist(x, center).sqrt();
                if d <= *radius {
                    x.to_vec()
                } else {
                    let f = radius / d;
                    x.iter()
                        .zip(center)
                        .map(|(xi, ci)| ci + f * (xi - ci))
                        .collect()
                }
            }
            Contraction::HalfSpaceProjection { normal, offset } => {
                let (excess, nn) = plane_excess(x, normal, *offset);
                if excess <= 0.0 {
                    x.to_vec()
                } else {
                    x.iter()
                        .zip(normal)
                        .map(|(xi, a)| xi - excess / nn * a)
                        .collect()
                }
            }
            Contraction::Fold { normal, offset } => {
                let (excess, nn) = plane_excess(x, normal, *offset);
                if excess <= 0.0 {
                    x.to_vec()
                } else {
                    x.iter()
                        .zip(normal)
                        .map(|(xi, a)| xi - 2.0 * excess / nn * a)
                        .collect()
                }
            }
            Contraction::Compose { maps } => maps.iter().fold(x.to_vec(), |acc, m| m.apply(&acc)),
        }
    }

    pub fn apply_config(&self, config: &PointConfiguration) -> Result<PointConfiguration> {
        config.map_points(config.dim(), |p| self.apply(p))
    }

    /// The pair `(config, self(config))`, certified.
    pub fn pair(&self, config: &PointConfiguration) -> Result<ContractionPair> {
        make_contraction_pair(config.clone(), self.apply_config(config)?)
    }
}

fn plane_excess(x: &[f64], normal: &[f64], offset: f64) -> (f64, f64) {
    let dot: f64 = x.iter().zip(normal).map(|(a, b)| a * b).sum();
    let nn: f64 = normal.iter().map(|a| a * a).sum();
    (dot - offset, nn)
}

/// Family of randomly parameterized contractions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContractionMethod {
    Scaling,
    Projection,
    Composition,
    Folding,
    /// Pick one of the others at random.
    Any,
}

impl std::str::FromStr for ContractionMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaling" => Ok(Self::Scaling),
            "projection" => Ok(Self::Projection),
            "composition" => Ok(Self::Composition),
            "folding" => Ok(Self::Folding),
            "any" => Ok(Self::Any),
            other => Err(Error::InvalidArgument(format!(
                "unknown contraction method {other}"
            ))),
        }
    }
}

/// Draw a random 1-Lipschitz map suited to `source` (parameters depend on its
/// bounding box). Deterministic in `seed`.
pub fn random_map(
    source: &PointConfiguration,
    method: ContractionMethod,
    seed: u64,
) -> Contraction {
    let mut r = rng::stream(seed, u64::MAX - 1);
    draw_map(source, method, &mut r)
}

fn draw_map<R: Rng>(
    source: &PointConfiguration,
    method: ContractionMethod,
    r: &mut R,
) -> Contraction {
    let dim = source.dim();
    let (lo, hi) = source.bounding_box();
    let point_in_box = |r: &mut R| -> Vec<f64> {
        lo.iter()
            .zip(&hi)
            .map(|(a, b)| if a < b { r.random_range(*a..=*b) } else { *a })
            .collect()
    };
    let unit = |r: &mut R| -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| r.sample(StandardNormal)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-8 {
                return v.into_iter().map(|x| x / n).collect();
            }
        }
    };
    match method {
        ContractionMethod::Scaling => Contraction::Scaling {
            center: point_in_box(r),
            ratio: r.random_range(0.0..=1.0),
        },
        ContractionMethod::Projection => {
            if r.random_bool(0.5) {
                let center = point_in_box(r);
                let reach = source
                    .points()
                    .map(|p| sq_dist(p, &center).sqrt())
                    .fold(0.0, f64::max);
                Contraction::BallProjection {
                    center,
                    radius: r.random_range(0.2..=1.0) * reach.max(1e-3),
                }
            } else {
                let normal = unit(r);
                let anchor = point_in_box(r);
                let offset = normal.iter().zip(&anchor).map(|(a, b)| a * b).sum();
                Contraction::HalfSpaceProjection { normal, offset }
            }
        }
        ContractionMethod::Folding => {
            let normal = unit(r);
            let anchor = point_in_box(r);
            let offset = normal.iter().zip(&anchor).map(|(a, b)| a * b).sum();
            Contraction::Fold { normal, offset }
        }
        ContractionMethod::Composition => {
            let n = r.random_range(2..=3);
            let maps = (0..n)
                .map(|_| {
                    let m = match r.random_range(0..3) {
                        0 => ContractionMethod::Scaling,
                        1 => ContractionMethod::Projection,
                        _ => ContractionMethod::Folding,
                    };
                    draw_map(source, m, r)
                })
                .collect();
            Contraction::Compose { maps }
        }
        ContractionMethod::Any => {
            let m = match r.random_range(0..4) {
                0 => ContractionMethod::Scaling,
                1 => ContractionMethod::Projection,
                2 => ContractionMethod::Composition,
                _ => ContractionMethod::Folding,
            };
            draw_map(source, m, r)
        }
    }
}

/// A random contraction pair for `source`.
///
/// # Panics
///
/// If the generated image fails certification, which would mean one of the
/// primitives is not 1-Lipschitz.
pub fn random_contraction(
    source: &PointConfiguration,
    method: ContractionMethod,
    seed: u64,
) -> ContractionPair {
    let map = random_map(source, method, seed);
    map.pair(source)
        .unwrap_or_else(|e| panic!("generated map {map:?} is not a contraction: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(dim: usize, pts: &[&[f64]]) -> PointConfiguration {
        let pts: Vec<Vec<f64>> = pts.iter().map(|p| p.to_vec()).collect();
        PointConfiguration::uniform(dim, &pts).unwrap()
    }

    #[test]
    fn minimal_and_symmetric_configurations_validate() {
        let c = validate_configuration(1, &[vec![0.0]], &[1.0]).unwrap();
        assert_eq!(c.len(), 1);
        let c = validate_configuration(2, &[vec![0.0, 0.0], vec![1.0, 0.0]], &[0.5, 0.5]).unwrap();
        assert_eq!(c.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn bad_weight_sum_is_rejected() {
        let e = validate_configuration(2, &[vec![0.0, 0.0]], &[0.4]).unwrap_err();
        assert!(matches!(e, Error::NonPositiveWeightSum { .. }));
    }

    #[test]
    fn near_unit_sum_is_renormalized() {
        let c = validate_configuration(1, &[vec![0.0], vec![1.0]], &[0.5, 0.5 + 5e-10]).unwrap();
        assert!((c.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn structural_errors() {
        assert_eq!(
            validate_configuration(1, &[], &[]).unwrap_err(),
            Error::EmptyConfiguration
        );
        assert!(matches!(
            validate_configuration(2, &[vec![0.0]], &[1.0]).unwrap_err(),
            Error::DimensionMismatch { .. }
        ));
    }

    #[test]
    fn identity_pair_has_unit_bound() {
        let c = cfg(2, &[&[0.0, 0.0], &[1.0, 2.0], &[-1.0, 0.5]]);
        assert_eq!(ContractionPair::identity(c).lipschitz_bound(), 1.0);
    }

    #[test]
    fn single_point_pair_has_zero_bound() {
        let c = cfg(3, &[&[1.0, 2.0, 3.0]]);
        let t = cfg(3, &[&[7.0, 0.0, 0.0]]);
        assert_eq!(make_contraction_pair(c, t).unwrap().lipschitz_bound(), 0.0);
    }

    #[test]
    fn homothety_bound() {
        let c = cfg(2, &[&[0.0, 0.0], &[1.0, 2.0], &[-1.0, 0.5]]);
        let t = c
            .map_points(2, |p| p.iter().map(|x| 0.5 * x).collect())
            .unwrap();
        let pair = make_contraction_pair(c, t).unwrap();
        assert!((pair.lipschitz_bound() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn expansion_is_reported() {
        let e = make_contraction_pair(cfg(1, &[&[0.0], &[1.0]]), cfg(1, &[&[0.0], &[2.0]]))
            .unwrap_err();
        match e {
            Error::NotAContraction { i, j, ratio } => {
                assert_eq!((i, j), (0, 1));
                assert!((ratio - 2.0).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inconsistent_collapse_is_reported() {
        let e = make_contraction_pair(cfg(1, &[&[0.0], &[0.0]]), cfg(1, &[&[0.0], &[1.0]]))
            .unwrap_err();
        assert_eq!(e, Error::InconsistentCollapse { i: 0, j: 1 });
        // coincident sources with coincident targets are fine
        let p = make_contraction_pair(
            cfg(1, &[&[0.0], &[0.0], &[1.0]]),
            cfg(1, &[&[3.0], &[3.0], &[3.5]]),
        )
        .unwrap();
        assert!((p.lipschitz_bound() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn target_may_live_in_another_dimension() {
        let s = cfg(1, &[&[0.0], &[2.0]]);
        let t = cfg(2, &[&[0.0, 0.0], &[1.0, 1.0]]);
        let p = make_contraction_pair(s, t).unwrap();
        assert!((p.lipschitz_bound() - 2f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn unit_scaling_is_identity() {
        let c = PointConfiguration::random(3, 5, 2.0, 1).unwrap();
        let map = Contraction::Scaling {
            center: vec![0.3, -0.2, 1.0],
            ratio: 1.0,
        };
        let pair = map.pair(&c).unwrap();
        assert_eq!(pair.source(), pair.target());
    }

    #[test]
    fn projection_onto_enclosing_ball_is_identity() {
        let c = PointConfiguration::random(2, 6, 1.0, 2).unwrap();
        let map = Contraction::BallProjection {
            center: vec![0.0, 0.0],
            radius: 10.0,
        };
        assert_eq!(map.apply_config(&c).unwrap(), c);
    }

    #[test]
    fn fold_across_origin() {
        let c = cfg(1, &[&[-1.0], &[1.0]]);
        let map = Contraction::Fold {
            normal: vec![1.0],
            offset: 0.0,
        };
        let pair = map.pair(&c).unwrap();
        assert_eq!(pair.target().coords(), &[-1.0, -1.0]);
        assert_eq!(pair.lipschitz_bound(), 0.0);
    }

    #[test]
    fn random_contractions_are_deterministic() {
        let c = PointConfiguration::random(2, 5, 2.0, 3).unwrap();
        for m in [
            ContractionMethod::Scaling,
            ContractionMethod::Projection,
            ContractionMethod::Composition,
            ContractionMethod::Folding,
            ContractionMethod::Any,
        ] {
            let a = random_contraction(&c, m, 11);
            let b = random_contraction(&c, m, 11);
            assert_eq!(a, b);
            assert!(a.lipschitz_bound() <= 1.0);
        }
    }

    proptest! {
        #[test]
        fn every_random_method_certifies(dim in 1usize..4, k in 1usize..9, seed in 0u64..10_000, m in 0usize..5) {
            let method = [
                ContractionMethod::Scaling,
                ContractionMethod::Projection,
                ContractionMethod::Composition,
                ContractionMethod::Folding,
                ContractionMethod::Any,
            ][m];
            let c = PointConfiguration::random(dim, k, 2.0, seed).unwrap();
            let pair = random_contraction(&c, method, seed ^ 0xabc);
            prop_assert!(pair.lipschitz_bound() <= 1.0);
        }

        #[test]
        fn chained_contractions_recertify(seed in 0u64..10_000) {
            let c = PointConfiguration::random(2, 6, 2.0, seed).unwrap();
            let first = random_contraction(&c, ContractionMethod::Any, seed);
            let second = random_contraction(first.target(), ContractionMethod::Any, seed + 1);
            let chained = make_contraction_pair(c, second.target().clone());
            prop_assert!(chained.is_ok());
        }

        #[test]
        fn bound_is_invariant_under_rigid_motions(seed in 0u64..10_000, angle in 0.0f64..std::f64::consts::TAU, tx in -3.0f64..3.0) {
            let c = PointConfiguration::random(2, 5, 2.0, seed).unwrap();
            let pair = random_contraction(&c, ContractionMethod::Any, seed);
            let (s, co) = angle.sin_cos();
            let rot = move |p: &[f64]| vec![co * p[0] - s * p[1] + tx, s * p[0] + co * p[1] - tx];
            let moved = pair.rigid_motion(rot, |p: &[f64]| vec![p[1] + 1.0, -p[0]]).unwrap();
            prop_assert!((moved.lipschitz_bound() - pair.lipschitz_bound()).abs() < 1e-9);
        }
    }
}
