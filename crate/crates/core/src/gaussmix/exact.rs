//! Closed form of `∫ f^α` for integer `α ≥ 2`.
//!
//! Expanding `f^α` gives a sum over `α`-tuples of components. With unit
//! covariance, the integral of a product of `α` normal densities centered at
//! `c_1..c_α` is
//!
//! ```text
//! (2π)^{-n(α-1)/2} · α^{-n/2} · exp(-½ Σ_j ‖c_j − c̄‖²)
//! ```
//!
//! and `Σ_j ‖c_j − c̄‖² = Σ_j ‖c_j‖² − ‖Σ_j c_j‖²/α`, so each tuple needs only
//! running sums.

use super::{EntropyEstimate, EstimateMeta, GaussianMixture, Method, LN_2PI};
use crate::error::{Error, Result};

pub const DEFAULT_EXACT_BUDGET: u64 = 10_000_000;

pub(crate) fn term_count(k: usize, alpha: u32) -> Option<u128> {
    (k as u128).checked_pow(alpha)
}

/// `h_α` for integer `α ≥ 2` by full tuple expansion.
pub fn renyi_exact_integer(
    m: &GaussianMixture,
    alpha: u32,
    budget: u64,
) -> Result<EntropyEstimate> {
    if alpha < 2 {
        return Err(Error::InvalidArgument(format!(
            "exact path needs integer order >= 2, got {alpha}"
        )));
    }
    let terms = term_count(m.len(), alpha).unwrap_or(u128::MAX);
    if terms > budget as u128 {
        return Err(Error::BudgetExceeded {
            terms,
            budget: budget as u128,
        });
    }
    let n = m.dim();
    let sq_norms: Vec<f64> = m
        .white_centers()
        .chunks_exact(n)
        .map(|c| c.iter().map(|x| x * x).sum())
        .collect();
    let mut walk = TupleWalk {
        m,
        alpha,
        sq_norms: &sq_norms,
        sum: vec![0.0; n * (alpha as usize + 1)],
        total: 0.0,
    };
    walk.descend(0, 0.0, 1.0);
    let af = alpha as f64;
    let nf = n as f64;
    // log ∫ f_U^α for the whitened mixture
    let log_integral = walk.total.ln() - 0.5 * nf * (af - 1.0) * LN_2PI - 0.5 * nf * af.ln();
    let value = log_integral / (1.0 - af) + m.log_det_chol();
    Ok(EntropyEstimate::deterministic(
        af,
        value,
        Method::ExactInteger,
        EstimateMeta {
            terms: Some(terms as u64),
            ..Default::default()
        },
    ))
}

struct TupleWalk<'a> {
    m: &'a GaussianMixture,
    alpha: u32,
    sq_norms: &'a [f64],
    /// Running coordinate sums, one slot of length `n` per depth.
    sum: Vec<f64>,
    total: f64,
}

impl TupleWalk<'_> {
    fn descend(&mut self, depth: usize, sq_acc: f64, w_acc: f64) {
        let n = self.m.dim();
        if depth == self.alpha as usize {
            let s = &self.sum[depth * n..(depth + 1) * n];
            let spread = sq_acc - s.iter().map(|x| x * x).sum::<f64>() / self.alpha as f64;
            self.total += w_acc * (-0.5 * spread.max(0.0)).exp();
            return;
        }
        for i in 0..self.m.len() {
            let w = self.m.weights()[i];
            if w == 0.0 {
                continue;
            }
            let c = self.m.white_center(i);
            let (head, tail) = self.sum.split_at_mut((depth + 1) * n);
            let prev = &head[depth * n..];
            for d in 0..n {
                tail[d] = prev[d] + c[d];
            }
            self.descend(depth + 1, sq_acc + self.sq_norms[i], w_acc * w);
        }
    }
}
