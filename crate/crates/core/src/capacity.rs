//! Capacity of the additive Gaussian channel with a finite input alphabet.
//!
//! `C = sup_w I(X; X + √s Z)` over input laws `w` on the alphabet, found by
//! Blahut–Arimoto: with `D_i = KL(N(x_i, sI) ‖ Σ_j w_j N(x_j, sI))`,
//! iterate `w_i ← w_i exp(D_i) / Σ_j w_j exp(D_j)`. Each step brackets the
//! capacity as `Σ w_i D_i ≤ C ≤ max_i D_i`.
//!
//! For `n ≤ 2` the output space is a uniform grid and each row of the channel
//! is renormalized to sum to 1, so the iteration runs on a genuine discrete
//! channel and its lower bound is nondecreasing. For `n > 2` the divergences
//! use a fixed Monte Carlo sample per letter.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::configspace::{ContractionPair, PointConfiguration};
use crate::error::{Error, Result};
use crate::gaussmix::{EstimatorPolicy, PolicyMode};
use crate::kpverify::Verdict;
use crate::rng;

pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 500;
/// Alphabet points closer than this per coordinate are one letter.
const MERGE_TOL: f64 = 1e-12;
const EXTENT_SDS: f64 = 8.0;

/// Output grid nodes per axis: 4001 in one dimension, 301 in two.
pub fn default_channel_nodes(dim: usize) -> usize {
    if dim <= 1 {
        4001
    } else {
        301
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub policy: EstimatorPolicy,
}

impl Default for BaOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            policy: EstimatorPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaStep {
    /// `I(w)` at the start of the step.
    pub lower: f64,
    /// `max_i D_i − Σ w_i D_i`.
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    /// Optimal input law on the original alphabet; coincident letters share
    /// their weight equally.
    pub weights: Vec<f64>,
    /// `Σ w_i D_i` at termination, in nats.
    pub capacity: f64,
    pub lower: f64,
    pub upper: f64,
    pub history: Vec<BaStep>,
    pub s: f64,
    pub converged: bool,
    pub monte_carlo: bool,
}

impl CapacityResult {
    pub fn bracket_width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Largest drop of the lower bound between consecutive iterations.
    pub fn worst_lower_decrease(&self) -> f64 {
        self.history
            .windows(2)
            .map(|w| w[0].lower - w[1].lower)
            .fold(0.0, f64::max)
    }
}

/// Divergences `D_i(w)` for one alphabet and noise level.
enum Channel {
    /// Rows `P[i][b]` over grid cells, each summing to 1, with
    /// `Σ_b P log P` per row.
    Grid {
        rows: Vec<Vec<f64>>,
        neg_entropy: Vec<f64>,
    },
    /// `ratios[i][m·k + j] = φ_j(Y_{i,m}) / φ_i(Y_{i,m})` for samples
    /// `Y_{i,m} ~ N(x_i, sI)`.
    Sampled {
        k: usize,
        samples: usize,
        ratios: Vec<Vec<f64>>,
    },
}

impl Channel {
    fn build(letters: &[Vec<f64>], s: f64, policy: &EstimatorPolicy) -> Result<Self> {
        let n = letters[0].len();
        let grid = match policy.mode {
            PolicyMode::Quadrature => {
                if n > 2 {
                    return Err(Error::UnsupportedDimension(n));
                }
                true
            }
            PolicyMode::MonteCarlo => false,
            PolicyMode::Auto => n <= 2,
        };
        let sd = s.sqrt();
        let white: Vec<Vec<f64>> = letters
            .iter()
            .map(|x| x.iter().map(|v| v / sd).collect())
            .collect();
        if grid {
            let nodes = policy
                .nodes_per_axis
                .unwrap_or_else(|| default_channel_nodes(n));
            Ok(Self::grid(&white, nodes))
        } else {
            Ok(Self::sampled(&white, policy.samples, policy.seed))
        }
    }

    fn grid(white: &[Vec<f64>], nodes: usize) -> Self {
        let n = white[0].len();
        let axes: Vec<(f64, f64)> = (0..n)
            .map(|d| {
                let lo = white.iter().map(|c| c[d]).fold(f64::INFINITY, f64::min) - EXTENT_SDS;
                let hi = white.iter().map(|c| c[d]).fold(f64::NEG_INFINITY, f64::max) + EXTENT_SDS;
                (lo, (hi - lo) / (nodes - 1) as f64)
            })
            .collect();
        let rows: Vec<Vec<f64>> = white
            .par_iter()
            .map(|c| {
                let factor = |d: usize| -> Vec<f64> {
                    (0..nodes)
                        .map(|a| {
                            let z = axes[d].0 + a as f64 * axes[d].1 - c[d];
                            (-0.5 * z * z).exp()
                        })
                        .collect()
                };
                let mut row: Vec<f64> = if n == 1 {
                    factor(0)
                } else {
                    let (fx, fy) = (factor(0), factor(1));
                    fx.iter()
                        .flat_map(|a| fy.iter().map(move |b| a * b))
                        .collect()
                };
                let total: f64 = row.iter().sum();
                row.iter_mut().for_each(|p| *p /= total);
                row
            })
            .collect();
        let neg_entropy = rows
            .iter()
            .map(|r| r.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum())
            .collect();
        Self::Grid { rows, neg_entropy }
    }

    fn sampled(white: &[Vec<f64>], samples: usize, seed: u64) -> Self {
        let k = white.len();
        let n = white[0].len();
        let ratios = white
            .par_iter()
            .enumerate()
            .map(|(i, ci)| {
                let mut r = rng::stream(seed, i as u64);
                let mut out = Vec::with_capacity(samples * k);
                let mut y = vec![0.0; n];
                for _ in 0..samples {
                    for (yd, cd) in y.iter_mut().zip(ci) {
                        *yd = cd + r.sample::<f64, _>(StandardNormal);
                    }
                    let qi: f64 = y.iter().zip(ci).map(|(a, b)| (a - b) * (a - b)).sum();
                    for cj in white {
                        let qj: f64 = y.iter().zip(cj).map(|(a, b)| (a - b) * (a - b)).sum();
                        out.push((0.5 * (qi - qj)).exp());
                    }
                }
                out
            })
            .collect();
        Self::Sampled { k, samples, ratios }
    }

    fn divergences(&self, w: &[f64]) -> Vec<f64> {
        match self {
            Channel::Grid { rows, neg_entropy } => {
                let len = rows[0].len();
                let log_q: Vec<f64> = (0..len)
                    .into_par_iter()
                    .map(|b| {
                        let q: f64 = rows.iter().zip(w).map(|(r, wi)| wi * r[b]).sum();
                        if q > 0.0 {
                            q.ln()
                        } else {
                            0.0
                        }
                    })
                    .collect();
                rows.par_iter()
                    .zip(neg_entropy)
                    .map(|(r, ne)| ne - r.iter().zip(&log_q).map(|(p, l)| p * l).sum::<f64>())
                    .collect()
            }
            Channel::Sampled { k, samples, ratios } => ratios
                .par_iter()
                .map(|r| {
                    -r.chunks_exact(*k)
                        .map(|row| row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>().ln())
                        .sum::<f64>()
                        / *samples as f64
                })
                .collect(),
        }
    }
}

/// Distinct letters and, for each original index, its letter.
fn dedup(alphabet: &PointConfiguration) -> (Vec<Vec<f64>>, Vec<usize>) {
    let groups = alphabet.distinct_groups(MERGE_TOL);
    let mut owner = vec![0; alphabet.len()];
    for (g, members) in groups.iter().enumerate() {
        for &i in members {
            owner[i] = g;
        }
    }
    let letters = groups
        .iter()
        .map(|g| alphabet.point(g[0]).to_vec())
        .collect();
    (letters, owner)
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

/// Capacity of the channel `x ↦ x + √s Z` restricted to inputs in
/// `alphabet` (its weights are ignored). Runs until the bracket is narrower
/// than `tol` or `max_iter` steps have been taken; in the latter case the
/// result carries `converged = false`.
pub fn blahut_arimoto(
    alphabet: &PointConfiguration,
    s: f64,
    opts: &BaOptions,
) -> Result<CapacityResult> {
    check_noise(s)?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let (letters, owner) = dedup(alphabet);
    let channel = Channel::build(&letters, s, &opts.policy)?;
    let k = letters.len();
    let mut w = vec![1.0 / k as f64; k];
    let mut history = Vec::new();
    let mut converged = false;
    let (mut lower, mut upper) = (0.0, f64::INFINITY);
    for _ in 0..opts.max_iter.max(1) {
        let d = channel.divergences(&w);
        lower = w.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>();
        upper = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        history.push(BaStep {
            lower,
            width: upper - lower,
        });
        if upper - lower < opts.tol {
            converged = true;
            break;
        }
        let dmax = upper;
        let mut z = 0.0;
        for (wi, di) in w.iter_mut().zip(&d) {
            *wi *= (di - dmax).exp();
            z += *wi;
        }
        w.iter_mut().for_each(|wi| *wi /= z);
    }
    let mut counts = vec![0usize; k];
    owner.iter().for_each(|&g| counts[g] += 1);
    let weights = owner.iter().map(|&g| w[g] / counts[g] as f64).collect();
    Ok(CapacityResult {
        weights,
        capacity: lower,
        lower,
        upper,
        history,
        s,
        converged,
        monte_carlo: matches!(channel, Channel::Sampled { .. }),
    })
}

/// `I(X; X + √s Z)` for the input law `weights` on `alphabet`, evaluated on
/// the same discretized channel as [`blahut_arimoto`].
pub fn channel_information(
    alphabet: &PointConfiguration,
    weights: &[f64],
    s: f64,
    policy: &EstimatorPolicy,
) -> Result<f64> {
    check_noise(s)?;
    if weights.len() != alphabet.len() {
        return Err(Error::DimensionMismatch {
            expected: alphabet.len(),
            got: weights.len(),
        });
    }
    let (letters, owner) = dedup(alphabet);
    let mut w = vec![0.0; letters.len()];
    for (i, &g) in owner.iter().enumerate() {
        w[g] += weights[i];
    }
    let channel = Channel::build(&letters, s, policy)?;
    Ok(channel
        .divergences(&w)
        .iter()
        .zip(&w)
        .map(|(d, wi)| wi * d)
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityCheck {
    pub s: f64,
    pub c_source: f64,
    pub c_target: f64,
    pub gap: f64,
    pub bracket_source: f64,
    pub bracket_target: f64,
    pub verdict: Verdict,
    /// `I` of the source channel under the target-optimal law.
    pub pointwise_source: f64,
    /// `I` of the target channel under the same law.
    pub pointwise_target: f64,
    pub pointwise_holds: bool,
}

/// Compare capacities of the source and target alphabets. A violation needs
/// `gap < −(bracket_source + bracket_target + 1e-6)`. The pointwise check
/// evaluates both channels at the target-optimal input law: letters of the
/// source inherit the weight of their image.
pub fn capacity_contraction_check(
    pair: &ContractionPair,
    s: f64,
    opts: &BaOptions,
) -> Result<CapacityCheck> {
    let src = blahut_arimoto(pair.source(), s, opts)?;
    let tgt = blahut_arimoto(pair.target(), s, opts)?;
    let gap = src.capacity - tgt.capacity;
    let (bs, bt) = (src.bracket_width(), tgt.bracket_width());
    let verdict = if gap >= 0.0 {
        Verdict::Holds
    } else if gap < -(bs + bt + 1e-6) {
        Verdict::Violation
    } else {
        Verdict::HoldsWithinNoise
    };
    let ps = channel_information(pair.source(), &tgt.weights, s, &opts.policy)?;
    let pt = channel_information(pair.target(), &tgt.weights, s, &opts.policy)?;
    Ok(CapacityCheck {
        s,
        c_source: src.capacity,
        c_target: tgt.capacity,
        gap,
        bracket_source: bs,
        bracket_target: bt,
        verdict,
        pointwise_source: ps,
        pointwise_target: pt,
        pointwise_holds: ps >= pt - opts.tol,
    })
}
