//! Tensor-product quadrature for `n ≤ 2`.
//!
//! The whitened density is evaluated on a uniform grid covering the centers'
//! bounding box plus `extent_sds` unit standard deviations per side. The
//! composite rule is the plain node sum times the cell volume (the integrand
//! is negligible at the boundary, where the trapezoid end corrections would
//! act). The same pass also sums the sub-grid of even-indexed nodes; the gap
//! between the two is reported as the refinement discrepancy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EntropyEstimate, EstimateMeta, GaussianMixture, Method, LN_2PI};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Odd, so that the even-indexed sub-grid keeps both end points.
    pub nodes_per_axis: usize,
    pub extent_sds: f64,
}

impl QuadratureSpec {
    /// 4001 nodes per axis in one dimension, 1001 in two.
    pub fn default_for(dim: usize) -> Self {
        Self {
            nodes_per_axis: if dim <= 1 { 4001 } else { 1001 },
            extent_sds: 8.0,
        }
    }

    pub fn with_nodes(nodes_per_axis: usize) -> Self {
        Self {
            nodes_per_axis,
            extent_sds: 8.0,
        }
    }
}

pub(crate) type Integrand<'a> = &'a (dyn Fn(f64) -> f64 + Sync);

pub(crate) struct GridSums {
    pub step: f64,
    /// `∫ gⱼ(f_U)` on the full grid.
    pub full: Vec<f64>,
    /// Same on the even-indexed sub-grid.
    pub coarse: Vec<f64>,
}

pub(crate) struct Axis {
    pub lo: f64,
    pub step: f64,
    pub nodes: usize,
}

impl Axis {
    pub fn node(&self, a: usize) -> f64 {
        self.lo + a as f64 * self.step
    }
}

/// `widen` scales the margin; `f^α` with `α < 1` decays like a Gaussian of
/// standard deviation `1/√α` and needs the extra room.
pub(crate) fn axes(m: &GaussianMixture, spec: &QuadratureSpec, widen: f64) -> Result<Vec<Axis>> {
    let n = m.dim();
    if n > 2 {
        return Err(Error::UnsupportedDimension(n));
    }
    if spec.nodes_per_axis < 5 || spec.nodes_per_axis % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "nodes per axis must be odd and at least 5, got {}",
            spec.nodes_per_axis
        )));
    }
    Ok((0..n)
        .map(|d| {
            let (lo, hi) = m
                .white_centers()
                .chunks_exact(n)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                    (lo.min(c[d]), hi.max(c[d]))
                });
            let lo = lo - spec.extent_sds * widen;
            let hi = hi + spec.extent_sds * widen;
            Axis {
                lo,
                step: (hi - lo) / (spec.nodes_per_axis - 1) as f64,
                nodes: spec.nodes_per_axis,
            }
        })
        .collect())
}

/// `exp(-½(x_a − c_{i,d})²)` for every component `i` and node `a` on axis `d`.
pub(crate) fn axis_factors(m: &GaussianMixture, axis: &Axis, d: usize) -> Vec<Vec<f64>> {
    (0..m.len())
        .map(|i| {
            let c = m.white_center(i)[d];
            (0..axis.nodes)
                .map(|a| {
                    let z = axis.node(a) - c;
                    (-0.5 * z * z).exp()
                })
                .collect()
        })
        .collect()
}

/// Integrate each `g` in `funcs` against the whitened density.
pub(crate) fn grid_sums(
    m: &GaussianMixture,
    spec: &QuadratureSpec,
    widen: f64,
    funcs: &[Integrand<'_>],
) -> Result<GridSums> {
    let axes = axes(m, spec, widen)?;
    let n = m.dim();
    let norm = (-0.5 * n as f64 * LN_2PI).exp();
    let nf = funcs.len();
    let fx = axis_factors(m, &axes[0], 0);
    let row_sums = |row: &[f64], even_row: bool| -> Vec<(f64, f64)> {
        funcs
            .iter()
            .map(|g| {
                let mut full = 0.0;
                let mut coarse = 0.0;
                for (b, &f) in row.iter().enumerate() {
                    let v = g(f);
                    full += v;
                    if even_row && b % 2 == 0 {
                        coarse += v;
                    }
                }
                (full, coarse)
            })
            .collect()
    };
    let per_row: Vec<Vec<(f64, f64)>> = if n == 1 {
        let row: Vec<f64> = (0..axes[0].nodes)
            .map(|a| norm * (0..m.len()).map(|i| m.weights()[i] * fx[i][a]).sum::<f64>())
            .collect();
        vec![row_sums(&row, true)]
    } else {
        let fy = axis_factors(m, &axes[1], 1);
        let ny = axes[1].nodes;
        (0..axes[0].nodes)
            .into_par_iter()
            .map(|a| {
                let mut row = vec![0.0; ny];
                for i in 0..m.len() {
                    let coef = norm * m.weights()[i] * fx[i][a];
                    if coef == 0.0 {
                        continue;
                    }
                    for (r, e) in row.iter_mut().zip(&fy[i]) {
                        *r += coef * e;
                    }
                }
                row_sums(&row, a % 2 == 0)
            })
            .collect()
    };
    let mut full = vec![0.0; nf];
    let mut coarse = vec![0.0; nf];
    for row in per_row {
        for (j, (f, c)) in row.into_iter().enumerate() {
            full[j] += f;
            coarse[j] += c;
        }
    }
    let step = axes[0].step;
    let cell: f64 = axes.iter().map(|a| a.step).product();
    full.iter_mut().for_each(|v| *v *= cell);
    coarse
        .iter_mut()
        .for_each(|v| *v *= cell * 2f64.powi(n as i32));
    Ok(GridSums { step, full, coarse })
}

fn xlogx(f: f64) -> f64 {
    if f > 0.0 {
        f * f.ln()
    } else {
        0.0
    }
}

fn power(alpha: f64) -> Box<dyn Fn(f64) -> f64 + Sync> {
    if alpha == 0.5 {
        Box::new(|f: f64| f.sqrt())
    } else if alpha == 2.0 {
        Box::new(|f: f64| f * f)
    } else if alpha == 3.0 {
        Box::new(|f: f64| f * f * f)
    } else {
        Box::new(move |f: f64| f.powf(alpha))
    }
}

fn check_order(alpha: f64) -> Result<()> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::NonPositiveAlpha(alpha));
    }
    if alpha.is_infinite() {
        return Err(Error::InvalidArgument(
            "quadrature needs a finite order; use renyi_sup".into(),
        ));
    }
    Ok(())
}

/// `h_α` by quadrature (`n ≤ 2`, `0 < α < ∞`; `α = 1` is the Shannon entropy).
pub fn renyi_quadrature(
    m: &GaussianMixture,
    alpha: f64,
    spec: &QuadratureSpec,
) -> Result<EntropyEstimate> {
    Ok(renyi_quadrature_orders(m, &[alpha], spec)?.remove(0))
}

/// Several orders from a single density grid.
pub fn renyi_quadrature_orders(
    m: &GaussianMixture,
    orders: &[f64],
    spec: &QuadratureSpec,
) -> Result<Vec<EntropyEstimate>> {
    for &a in orders {
        check_order(a)?;
    }
    let boxed: Vec<Box<dyn Fn(f64) -> f64 + Sync>> = orders
        .iter()
        .map(|&a| {
            if a == 1.0 {
                Box::new(xlogx) as Box<dyn Fn(f64) -> f64 + Sync>
            } else {
                power(a)
            }
        })
        .collect();
    let funcs: Vec<Integrand<'_>> = boxed.iter().map(|b| b.as_ref()).collect();
    let min_order = orders.iter().copied().fold(1.0, f64::min);
    let sums = grid_sums(m, spec, min_order.sqrt().recip(), &funcs)?;
    let to_entropy = |alpha: f64, integral: f64| {
        if alpha == 1.0 {
            -integral
        } else {
            integral.ln() / (1.0 - alpha)
        }
    };
    Ok(orders
        .iter()
        .enumerate()
        .map(|(j, &alpha)| {
            let fine = to_entropy(alpha, sums.full[j]);
            let coarse = to_entropy(alpha, sums.coarse[j]);
            EntropyEstimate::deterministic(
                alpha,
                fine + m.log_det_chol(),
                Method::Quadrature,
                EstimateMeta {
                    nodes_per_axis: Some(spec.nodes_per_axis),
                    step: Some(sums.step),
                    refinement_discrepancy: Some((fine - coarse).abs()),
                    ..Default::default()
                },
            )
        })
        .collect())
}

/// `∫ φ(f(x)) dx` for the mixture density `f`, with the refinement
/// discrepancy. `φ` should satisfy `φ(0) = 0`.
pub fn integrate_density_functional<F>(
    m: &GaussianMixture,
    phi: F,
    spec: &QuadratureSpec,
) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64 + Sync,
{
    // dx = det L du and f_X = f_U / det L
    let det = m.log_det_chol().exp();
    let g = |f: f64| phi(f / det);
    let sums = grid_sums(m, spec, 1.0, &[&g])?;
    Ok((
        det * sums.full[0],
        det * (sums.full[0] - sums.coarse[0]).abs(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspace::PointConfiguration;
    use crate::gaussmix::{renyi_exact_integer, DEFAULT_EXACT_BUDGET};
    use nalgebra::DMatrix;

    fn line(points: &[f64], s: f64) -> GaussianMixture {
        let pts: Vec<Vec<f64>> = points.iter().map(|p| vec![*p]).collect();
        GaussianMixture::isotropic(&PointConfiguration::uniform(1, &pts).unwrap(), s).unwrap()
    }

    #[test]
    fn standard_gaussian_shannon() {
        let h = renyi_quadrature(&line(&[0.0], 1.0), 1.0, &QuadratureSpec::default_for(1)).unwrap();
        assert!((h.value - 1.418_938_533_204_672_7).abs() < 1e-8);
        assert!(h.meta.refinement_discrepancy.unwrap() < 1e-10);
    }

    #[test]
    fn half_order_of_standard_gaussian() {
        let h = renyi_quadrature(&line(&[0.0], 1.0), 0.5, &QuadratureSpec::default_for(1)).unwrap();
        // ∫ φ^{1/2} = (8π)^{1/4}, so h = ½ log 2π + log 2
        let expected = 0.5 * LN_2PI + 2f64.ln();
        assert!((h.value - expected).abs() < 1e-8, "{}", h.value);
        assert!((h.value - 1.612_085_713_764_613).abs() < 1e-8);
    }

    #[test]
    fn agrees_with_closed_form() {
        let m = line(&[0.0, 2.0], 1.0);
        let q = renyi_quadrature(&m, 2.0, &QuadratureSpec::default_for(1)).unwrap();
        let e = renyi_exact_integer(&m, 2, DEFAULT_EXACT_BUDGET).unwrap();
        assert!((q.value - e.value).abs() < 1e-8);
    }

    #[test]
    fn agrees_with_closed_form_in_two_dimensions_anisotropic() {
        let cfg = PointConfiguration::from_flat(
            2,
            vec![0.0, 0.0, 1.5, -0.5, -1.0, 1.0],
            vec![0.5, 0.3, 0.2],
        )
        .unwrap();
        let cov = DMatrix::from_row_slice(2, 2, &[0.8, 0.3, 0.3, 0.5]);
        let m = GaussianMixture::new(&cfg, cov).unwrap();
        for a in [2u32, 3] {
            let q = renyi_quadrature(&m, a as f64, &QuadratureSpec::default_for(2)).unwrap();
            let e = renyi_exact_integer(&m, a, DEFAULT_EXACT_BUDGET).unwrap();
            assert!((q.value - e.value).abs() < 1e-8 * e.value.abs());
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = PointConfiguration::from_flat(3, vec![0.0; 3], vec![1.0]).unwrap();
        let m3 = GaussianMixture::isotropic(&cfg, 1.0).unwrap();
        assert_eq!(
            renyi_quadrature(&m3, 1.0, &QuadratureSpec::default_for(3)).unwrap_err(),
            Error::UnsupportedDimension(3)
        );
        let m = line(&[0.0], 1.0);
        assert_eq!(
            renyi_quadrature(&m, 0.0, &QuadratureSpec::default_for(1)).unwrap_err(),
            Error::NonPositiveAlpha(0.0)
        );
        assert!(renyi_quadrature(&m, 1.0, &QuadratureSpec::with_nodes(100)).is_err());
    }

    #[test]
    fn density_integrates_to_one() {
        let cfg =
            PointConfiguration::from_flat(2, vec![0.0, 0.0, 3.0, 1.0], vec![0.25, 0.75]).unwrap();
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, -0.4, -0.4, 0.3]);
        let m = GaussianMixture::new(&cfg, cov).unwrap();
        let (mass, _) =
            integrate_density_functional(&m, |f| f, &QuadratureSpec::with_nodes(401)).unwrap();
        assert!((mass - 1.0).abs() < 1e-12);
    }
}
