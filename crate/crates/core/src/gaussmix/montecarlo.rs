//! Monte Carlo Rényi entropy.
//!
//! For `α ≥ 1` samples come from the mixture itself: `h_1 = −E log f` and
//! `h_α = log E[f^{α−1}] / (1 − α)`. For `α < 1` the own-law estimator of
//! `E[f^{α−1}]` has infinite variance once `α ≤ ½` (its second moment is
//! `∫ f^{2α−1}`), so samples are drawn from the same mixture with covariance
//! inflated to `I/α` and reweighted; the weights `f^α/q` are then bounded.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{EntropyEstimate, EstimateMeta, GaussianMixture, Method, OnlineLogSumExp, LN_2PI};
use crate::error::{Error, Result};
use crate::rng;

pub const MIN_SAMPLES: usize = 1000;
const JACKKNIFE_BLOCKS: usize = 20;

/// Draw a component by cumulative weight, then a Gaussian offset scaled by
/// `sd`, in whitened coordinates.
pub(crate) fn draw_white<R: Rng>(
    m: &GaussianMixture,
    cumulative: &[f64],
    sd: f64,
    r: &mut R,
    out: &mut [f64],
) {
    let u: f64 = r.random();
    let i = cumulative.partition_point(|c| *c <= u).min(m.len() - 1);
    let c = m.white_center(i);
    for (o, ci) in out.iter_mut().zip(c) {
        let z: f64 = r.sample(StandardNormal);
        *o = ci + sd * z;
    }
}

pub(crate) fn cumulative_weights(w: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    w.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

fn white_log_density_var(m: &GaussianMixture, u: &[f64], var: f64) -> f64 {
    let n = m.dim();
    let mut lse = OnlineLogSumExp::default();
    for (c, lw) in m.white_centers().chunks_exact(n).zip(m.log_weights()) {
        let q: f64 = c.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum();
        lse.push(lw - 0.5 * q / var);
    }
    lse.value() - 0.5 * n as f64 * (LN_2PI + var.ln())
}

/// `log mean exp(v)` and its delta-method standard error.
pub(crate) fn log_mean_exp(v: &[f64]) -> (f64, f64) {
    let max = v.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    let shifted: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let (mean, se) = rng::mean_and_stderr(&shifted);
    (max + mean.ln(), se / mean)
}

fn jackknife<F: Fn(&[f64]) -> f64>(values: &[f64], stat: F) -> f64 {
    let b = JACKKNIFE_BLOCKS.min(values.len());
    let len = values.len() / b;
    let thetas: Vec<f64> = (0..b)
        .map(|k| {
            let rest: Vec<f64> = values[..k * len]
                .iter()
                .chain(&values[(k + 1) * len..])
                .copied()
                .collect();
            stat(&rest)
        })
        .collect();
    let mean = thetas.iter().sum::<f64>() / b as f64;
    let bf = b as f64;
    ((bf - 1.0) / bf * thetas.iter().map(|t| (t - mean).powi(2)).sum::<f64>()).sqrt()
}

/// `h_α` from `samples` draws, deterministic in `seed`.
pub fn renyi_monte_carlo(
    m: &GaussianMixture,
    alpha: f64,
    samples: usize,
    seed: u64,
) -> Result<EntropyEstimate> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::NonPositiveAlpha(alpha));
    }
    if alpha.is_infinite() {
        return Err(Error::InvalidArgument(
            "Monte Carlo needs a finite order; use renyi_sup".into(),
        ));
    }
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_SAMPLES} samples are required, got {samples}"
        )));
    }
    let n = m.dim();
    let cumulative = cumulative_weights(m.weights());
    let sd = if alpha < 1.0 {
        alpha.sqrt().recip()
    } else {
        1.0
    };
    let values = rng::sample_values(seed, samples, |r| {
        let mut u = [0.0f64; 16];
        let mut heap;
        let u: &mut [f64] = if n <= 16 {
            &mut u[..n]
        } else {
            heap = vec![0.0; n];
            &mut heap
        };
        draw_white(m, &cumulative, sd, r, u);
        let lf = m.white_log_density(u);
        if alpha == 1.0 {
            -lf
        } else if alpha > 1.0 {
            (alpha - 1.0) * lf
        } else {
            alpha * lf - white_log_density_var(m, u, sd * sd)
        }
    });
    let (value, std_err, jack) = if alpha == 1.0 {
        let (mean, se) = rng::mean_and_stderr(&values);
        let jack = jackknife(&values, |v| rng::mean_and_stderr(v).0);
        (mean, se, jack)
    } else {
        let scale = 1.0 / (1.0 - alpha);
        let (lme, se) = log_mean_exp(&values);
        let jack = jackknife(&values, |v| log_mean_exp(v).0);
        (scale * lme, scale.abs() * se, scale.abs() * jack)
    };
    Ok(EntropyEstimate {
        order: alpha,
        value: value + m.log_det_chol(),
        std_err,
        method: Method::MonteCarlo,
        meta: EstimateMeta {
            samples: Some(samples),
            seed: Some(seed),
            jackknife_std_err: Some(jack),
            ..Default::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspace::PointConfiguration;
    use crate::gaussmix::{gaussian_renyi, renyi_exact_integer, DEFAULT_EXACT_BUDGET};

    #[test]
    fn standard_gaussian_shannon() {
        let cfg = PointConfiguration::from_flat(1, vec![0.0], vec![1.0]).unwrap();
        let m = GaussianMixture::isotropic(&cfg, 1.0).unwrap();
        let h = renyi_monte_carlo(&m, 1.0, 1_000_000, 1).unwrap();
        assert!((h.value - 1.418_938_533_204_672_7).abs() < 3.0 * h.std_err);
        assert!(h.std_err < 1e-3);
    }

    #[test]
    fn order_two_matches_closed_form() {
        let cfg = PointConfiguration::from_flat(
            2,
            vec![0.0, 0.0, 1.0, 1.0, -1.0, 2.0],
            vec![0.2, 0.5, 0.3],
        )
        .unwrap();
        let m = GaussianMixture::isotropic(&cfg, 0.5).unwrap();
        let e = renyi_exact_integer(&m, 2, DEFAULT_EXACT_BUDGET)
            .unwrap()
            .value;
        let h = renyi_monte_carlo(&m, 2.0, 200_000, 9).unwrap();
        assert!(
            (h.value - e).abs() < 3.0 * h.std_err,
            "{} vs {e} ± {}",
            h.value,
            h.std_err
        );
        let jack = h.meta.jackknife_std_err.unwrap();
        assert!(jack > 0.3 * h.std_err && jack < 3.0 * h.std_err);
    }

    #[test]
    fn half_order_uses_bounded_weights() {
        let cfg = PointConfiguration::from_flat(1, vec![0.0], vec![1.0]).unwrap();
        let m = GaussianMixture::isotropic(&cfg, 1.0).unwrap();
        let h = renyi_monte_carlo(&m, 0.5, 100_000, 2).unwrap();
        // single Gaussian: f^α/q is constant, so the estimate is exact
        assert!((h.value - gaussian_renyi(1, 0.0, 0.5)).abs() < 1e-12);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let cfg = PointConfiguration::random(3, 4, 1.0, 5).unwrap();
        let m = GaussianMixture::isotropic(&cfg, 1.0).unwrap();
        let a = renyi_monte_carlo(&m, 1.0, 20_000, 42).unwrap();
        let b = renyi_monte_carlo(&m, 1.0, 20_000, 42).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.std_err.to_bits(), b.std_err.to_bits());
    }

    #[test]
    fn too_few_samples() {
        let cfg = PointConfiguration::from_flat(1, vec![0.0], vec![1.0]).unwrap();
        let m = GaussianMixture::isotropic(&cfg, 1.0).unwrap();
        assert!(renyi_monte_carlo(&m, 1.0, 10, 0).is_err());
    }
}
