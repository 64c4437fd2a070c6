//! Volume of unions of equal balls, and the volume comparison for a
//! contracted set of centers.
//!
//! The estimator draws a ball uniformly, then a point uniformly inside it,
//! and scores `k·vol(B_r) / m(x)` where `m(x)` counts the balls covering `x`.
//! Its mean is exactly the union volume, and a disjoint union is estimated
//! with zero variance.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::configspace::{sq_dist, ContractionPair, PointConfiguration};
use crate::error::{Error, Result};
use crate::rng;

pub const MIN_SAMPLES: usize = 10_000;
/// Gaps above `−GAP_ABS_TOL` count as consistent.
pub const GAP_ABS_TOL: f64 = 1e-9;

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_n = 2π/n · V_{n−2}
    let mut v = if n % 2 == 0 { 1.0 } else { 2.0 };
    let mut m = if n % 2 == 0 { 2 } else { 3 };
    while m <= n {
        v *= 2.0 * PI / m as f64;
        m += 2;
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallUnion {
    dim: usize,
    centers: Vec<f64>,
    radius: f64,
}

impl BallUnion {
    pub fn new(dim: usize, centers: Vec<f64>, radius: f64) -> Result<Self> {
        if dim == 0 || centers.is_empty() {
            return Err(Error::EmptyConfiguration);
        }
        if centers.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim * centers.len().div_ceil(dim),
                got: centers.len(),
            });
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "radius must be positive, got {radius}"
            )));
        }
        if centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(
                "non-finite center coordinate".into(),
            ));
        }
        Ok(Self {
            dim,
            centers,
            radius,
        })
    }

    /// Balls of radius `r` around the points of `config`; weights are ignored.
    pub fn from_config(config: &PointConfiguration, radius: f64) -> Result<Self> {
        Self::new(config.dim(), config.coords().to_vec(), radius)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.centers.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub fn ball_volume(&self) -> f64 {
        unit_ball_volume(self.dim) * self.radius.powi(self.dim as i32)
    }

    /// Number of balls containing `x` (closed balls).
    pub fn coverage(&self, x: &[f64]) -> usize {
        let r2 = self.radius * self.radius;
        self.centers
            .chunks_exact(self.dim)
            .filter(|c| sq_dist(c, x) <= r2)
            .count()
    }

    /// Coverage of the point at `offset` (unit-ball coordinates) in ball `j`.
    fn cover_count(&self, j: usize, offset: &[f64], buf: &mut [f64]) -> usize {
        for ((b, c), o) in buf.iter_mut().zip(self.center(j)).zip(offset) {
            *b = c + self.radius * o;
        }
        // the sampled ball always covers its own point, up to rounding
        self.coverage(buf).max(1)
    }

    fn score(&self, m: usize) -> f64 {
        self.ball_volume() * (self.len() as f64 / m as f64)
    }

    /// Mean and standard error from a histogram of coverage counts. Summing
    /// per count keeps a disjoint union exact, with zero spread.
    fn stats(&self, counts: &[usize]) -> (f64, f64) {
        let mut hist = vec![0u64; self.len() + 1];
        counts.iter().for_each(|&m| hist[m] += 1);
        let n = counts.len() as f64;
        let level = |m: usize| self.score(m);
        let mean = hist
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(m, c)| level(m) * (*c as f64 / n))
            .sum::<f64>();
        if counts.len() < 2 {
            return (mean, 0.0);
        }
        let ss: f64 = hist
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(m, c)| *c as f64 * (level(m) - mean).powi(2))
            .sum();
        (mean, (ss / (n - 1.0) / n).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub volume: f64,
    pub std_err: f64,
    pub samples: usize,
    pub seed: u64,
}

/// A ball index and a point of the unit ball, drawn from one stream.
fn draw(k: usize, n: usize, r: &mut ChaCha8Rng, offset: &mut [f64]) -> usize {
    let j = r.random_range(0..k);
    let mut norm2 = 0.0;
    for o in offset.iter_mut() {
        *o = r.sample(StandardNormal);
        norm2 += *o * *o;
    }
    let u: f64 = r.random();
    let scale = u.powf(1.0 / n as f64) / norm2.sqrt();
    offset.iter_mut().for_each(|o| *o *= scale);
    j
}

/// Per-sample coverage counts for one or more unions sharing ball count and
/// dimension; every union sees the same ball index and unit-ball offset.
fn paired_counts(unions: &[&BallUnion], samples: usize, seed: u64) -> Vec<Vec<usize>> {
    let (k, n) = (unions[0].len(), unions[0].dim());
    let blocks = samples.div_ceil(rng::BLOCK);
    let per_block: Vec<Vec<Vec<usize>>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let len = rng::BLOCK.min(samples - b * rng::BLOCK);
            let mut r = rng::stream(seed, b as u64);
            let mut offset = vec![0.0; n];
            let mut buf = vec![0.0; n];
            let mut out = vec![Vec::with_capacity(len); unions.len()];
            for _ in 0..len {
                let j = draw(k, n, &mut r, &mut offset);
                for (o, u) in out.iter_mut().zip(unions) {
                    o.push(u.cover_count(j, &offset, &mut buf));
                }
            }
            out
        })
        .collect();
    let mut scores = vec![Vec::with_capacity(samples); unions.len()];
    for block in per_block {
        for (s, b) in scores.iter_mut().zip(block) {
            s.extend(b);
        }
    }
    scores
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_SAMPLES} samples required, got {samples}"
        )));
    }
    Ok(())
}

/// Unbiased Monte Carlo estimate of the volume of `u`.
pub fn union_volume_mc(u: &BallUnion, samples: usize, seed: u64) -> Result<VolumeEstimate> {
    check_samples(samples)?;
    let counts = paired_counts(&[u], samples, seed).remove(0);
    let (volume, std_err) = u.stats(&counts);
    Ok(VolumeEstimate {
        volume,
        std_err,
        samples,
        seed,
    })
}

/// Area of the union of two unit disks whose centers are `d` apart.
pub fn two_disk_union_area(d: f64) -> f64 {
    if d >= 2.0 {
        return 2.0 * PI;
    }
    let h = d / 2.0;
    2.0 * PI - (2.0 * h.acos() - h * (4.0 - d * d).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeoVerdict {
    Consistent,
    InconsistentWithinNoise,
    Inconsistent,
}

impl GeoVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            GeoVerdict::Consistent => "consistent",
            GeoVerdict::InconsistentWithinNoise => "inconsistent-within-noise",
            GeoVerdict::Inconsistent => "INCONSISTENT",
        }
    }

    /// `gap ≥ −tol` is consistent; a deficit inside three standard errors
    /// is within noise.
    pub fn classify(gap: f64, std_err: f64) -> Self {
        if gap >= -GAP_ABS_TOL {
            GeoVerdict::Consistent
        } else if gap >= -3.0 * std_err {
            GeoVerdict::InconsistentWithinNoise
        } else {
            GeoVerdict::Inconsistent
        }
    }
}

impl fmt::Display for GeoVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether volume monotonicity is known for the instance at hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    /// Planar (or linear) centers.
    TheoremLowDimension,
    /// The pair comes from a continuous contraction.
    TheoremContinuous,
    Conjectural,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::TheoremLowDimension => "theorem (n <= 2)",
            Status::TheoremContinuous => "theorem (continuous contraction)",
            Status::Conjectural => "CONJECTURAL",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricCheck {
    pub radius: f64,
    pub vol_source: f64,
    pub vol_target: f64,
    pub std_err_source: f64,
    pub std_err_target: f64,
    pub gap: f64,
    /// Standard error of the paired difference.
    pub std_err: f64,
    pub samples: usize,
    pub seed: u64,
    pub verdict: GeoVerdict,
    pub status: Status,
}

/// Compare union volumes of radius-`r` balls around the source and target
/// centers, with both estimators driven by the same draws.
pub fn kp_geometric_check(
    pair: &ContractionPair,
    r: f64,
    samples: usize,
    seed: u64,
) -> Result<GeometricCheck> {
    kp_geometric_check_with(pair, r, samples, seed, false)
}

/// As [`kp_geometric_check`]; `continuous` records that the pair is the
/// endpoint of a continuous contraction, which only affects the status label.
pub fn kp_geometric_check_with(
    pair: &ContractionPair,
    r: f64,
    samples: usize,
    seed: u64,
    continuous: bool,
) -> Result<GeometricCheck> {
    check_samples(samples)?;
    let src = BallUnion::from_config(pair.source(), r)?;
    let tgt = BallUnion::from_config(pair.target(), r)?;
    if src.dim() != tgt.dim() {
        return Err(Error::DimensionMismatch {
            expected: src.dim(),
            got: tgt.dim(),
        });
    }
    let counts = paired_counts(&[&src, &tgt], samples, seed);
    let (vs, ss) = src.stats(&counts[0]);
    let (vt, st) = tgt.stats(&counts[1]);
    let diffs: Vec<f64> = counts[0]
        .iter()
        .zip(&counts[1])
        .map(|(a, b)| src.score(*a) - tgt.score(*b))
        .collect();
    let (gap, se) = rng::mean_and_stderr(&diffs);
    let status = if src.dim() <= 2 {
        Status::TheoremLowDimension
    } else if continuous {
        Status::TheoremContinuous
    } else {
        Status::Conjectural
    };
    Ok(GeometricCheck {
        radius: r,
        vol_source: vs,
        vol_target: vt,
        std_err_source: ss,
        std_err_target: st,
        gap,
        std_err: se,
        samples,
        seed,
        verdict: GeoVerdict::classify(gap, se),
        status,
    })
}
