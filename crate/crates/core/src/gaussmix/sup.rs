//! `h_∞ = −log max f` by multi-start mean-shift ascent.
//!
//! In whitened coordinates the fixed-point map `u ↦ Σ pᵢ(u) cᵢ` (posterior
//! mean of the centers) never decreases the density, so every start climbs to
//! a stationary point. Starts are all centers and all pairwise midpoints. The
//! best density found can only be below the true maximum, so the returned
//! value is an upper bound on `h_∞`.

use super::{EntropyEstimate, EstimateMeta, GaussianMixture, Method, OnlineLogSumExp};

const MAX_ITER: usize = 100_000;
const STEP_TOL: f64 = 1e-13;

pub(crate) fn posterior_mean(m: &GaussianMixture, u: &[f64], out: &mut [f64]) {
    let n = m.dim();
    let mut lse = OnlineLogSumExp::default();
    let logits: Vec<f64> = m
        .white_centers()
        .chunks_exact(n)
        .zip(m.log_weights())
        .map(|(c, lw)| {
            let q: f64 = c.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum();
            let t = lw - 0.5 * q;
            lse.push(t);
            t
        })
        .collect();
    let z = lse.value();
    out.iter_mut().for_each(|o| *o = 0.0);
    for (c, t) in m.white_centers().chunks_exact(n).zip(&logits) {
        let p = (t - z).exp();
        for (o, ci) in out.iter_mut().zip(c) {
            *o += p * ci;
        }
    }
}

fn ascend(m: &GaussianMixture, start: &[f64]) -> Vec<f64> {
    let mut u = start.to_vec();
    let mut next = vec![0.0; u.len()];
    for _ in 0..MAX_ITER {
        posterior_mean(m, &u, &mut next);
        let step: f64 = u
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        std::mem::swap(&mut u, &mut next);
        if step < STEP_TOL {
            break;
        }
    }
    u
}

/// `h_∞` with the located maximizer in `meta.argmax`.
pub fn renyi_sup(m: &GaussianMixture) -> EntropyEstimate {
    let n = m.dim();
    let k = m.len();
    let mut starts: Vec<Vec<f64>> = (0..k).map(|i| m.white_center(i).to_vec()).collect();
    for i in 0..k {
        for j in (i + 1)..k {
            starts.push(
                m.white_center(i)
                    .iter()
                    .zip(m.white_center(j))
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect(),
            );
        }
    }
    starts.dedup();
    let mut best = (f64::NEG_INFINITY, vec![0.0; n]);
    for s in &starts {
        let u = ascend(m, s);
        let (lu, ls) = (m.white_log_density(&u), m.white_log_density(s));
        let (lf, at) = if lu >= ls { (lu, u) } else { (ls, s.clone()) };
        if lf > best.0 {
            best = (lf, at);
        }
    }
    EntropyEstimate::deterministic(
        f64::INFINITY,
        -best.0 + m.log_det_chol(),
        Method::SupOptimization,
        EstimateMeta {
            argmax: Some(m.unwhiten(&best.1)),
            ..Default::default()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspace::PointConfiguration;
    use crate::gaussmix::LN_2PI;

    fn line(points: &[f64], s: f64) -> GaussianMixture {
        let pts: Vec<Vec<f64>> = points.iter().map(|p| vec![*p]).collect();
        GaussianMixture::isotropic(&PointConfiguration::uniform(1, &pts).unwrap(), s).unwrap()
    }

    fn dense_scan(m: &GaussianMixture) -> f64 {
        (0..200_001)
            .map(|i| m.log_density(&[-20.0 + i as f64 * 2e-4]).unwrap())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn single_gaussian() {
        let h = renyi_sup(&line(&[0.0], 1.0));
        assert!((h.value - 0.5 * LN_2PI).abs() < 1e-15);
    }

    #[test]
    fn close_pair_has_mode_at_midpoint() {
        let m = line(&[-0.5, 0.5], 1.0);
        let h = renyi_sup(&m);
        let expected = -((-0.125f64).exp() / (2.0 * std::f64::consts::PI).sqrt()).ln();
        assert!((h.value - expected).abs() < 1e-12);
        assert!((h.value - 1.043_939).abs() < 1e-6);
        assert!(h.meta.argmax.unwrap()[0].abs() < 1e-6);
        assert!((h.value + dense_scan(&m)).abs() < 1e-9);
    }

    #[test]
    fn far_pair_has_modes_at_centers() {
        let h = renyi_sup(&line(&[0.0, 100.0], 1.0));
        assert!((h.value - (2f64.ln() + 0.5 * LN_2PI)).abs() < 1e-12);
    }

    #[test]
    fn flat_mode_converges() {
        // ±1 with unit variance: the mode at 0 is degenerate (fourth order)
        let m = line(&[-1.0, 1.0], 1.0);
        let h = renyi_sup(&m);
        assert!((h.value + dense_scan(&m)).abs() < 1e-8);
    }

    #[test]
    fn uneven_weights_match_scan() {
        let cfg =
            PointConfiguration::from_flat(1, vec![-1.3, 0.2, 2.5], vec![0.5, 0.2, 0.3]).unwrap();
        let m = GaussianMixture::isotropic(&cfg, 0.6).unwrap();
        assert!((renyi_sup(&m).value + dense_scan(&m)).abs() < 1e-8);
    }
}
