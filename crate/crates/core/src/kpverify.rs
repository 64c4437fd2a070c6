//! Entropy comparison between a configuration and its contraction, both
//! smoothed by the same Gaussian noise.
//!
//! For each order `α` and noise variance `s` the report holds
//! `gap = h_α(X + √s Z) − h_α(T(X) + √s Z)`, which should never be negative.
//! Both sides of a row are always evaluated with the same estimator, and Monte
//! Carlo rows reuse the seed so the two sides share random numbers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::configspace::{ContractionPair, PointConfiguration};
use crate::error::{Error, Result};
use crate::gaussmix::{
    estimate_renyi, estimate_renyi_orders_with, select_method, EntropyEstimate, EstimatorPolicy,
    GaussianMixture, Method, LN_2PI,
};

/// Absolute floor of the violation band.
pub const ABS_TOL: f64 = 1e-6;
/// Orders of the default sweep.
pub const DEFAULT_ORDERS: [f64; 5] = [0.5, 1.0, 2.0, 3.0, f64::INFINITY];
/// Noise variances of the default sweep.
pub const DEFAULT_NOISES: [f64; 3] = [0.25, 1.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    HoldsWithinNoise,
    Violation,
    Skipped,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::HoldsWithinNoise => "holds-within-noise",
            Verdict::Violation => "VIOLATION",
            Verdict::Skipped => "skipped",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Verdict for a gap that should be nonnegative, with violation band
/// `max(abs_tol, 3σ)`.
pub fn classify(gap: f64, std_err: f64, abs_tol: f64) -> Verdict {
    if gap.is_nan() {
        Verdict::Skipped
    } else if gap >= 0.0 {
        Verdict::Holds
    } else if gap < -abs_tol.max(3.0 * std_err) {
        Verdict::Violation
    } else {
        Verdict::HoldsWithinNoise
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpRow {
    pub alpha: f64,
    pub s: f64,
    pub h_source: f64,
    pub h_target: f64,
    pub gap: f64,
    pub std_err: f64,
    pub method: Method,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub verdict: Verdict,
    /// Why a row was skipped.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpReport {
    pub pair_id: String,
    pub rows: Vec<KpRow>,
}

impl KpReport {
    pub fn violations(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.verdict == Verdict::Violation)
            .count()
    }
}

/// Method usable on both sides: the more general of the two choices.
fn common_method(a: Method, b: Method) -> Method {
    fn rank(m: Method) -> u8 {
        match m {
            Method::Analytic => 0,
            Method::ExactInteger => 1,
            Method::SupOptimization | Method::Quadrature => 2,
            Method::MonteCarlo => 3,
        }
    }
    if rank(a) >= rank(b) {
        a
    } else {
        b
    }
}

fn skipped(alpha: f64, s: f64, note: &str) -> KpRow {
    KpRow {
        alpha,
        s,
        h_source: f64::NAN,
        h_target: f64::NAN,
        gap: f64::NAN,
        std_err: f64::NAN,
        method: Method::Analytic,
        samples: None,
        seed: None,
        verdict: Verdict::Skipped,
        note: Some(note.into()),
    }
}

fn row(alpha: f64, s: f64, hs: &EntropyEstimate, ht: &EntropyEstimate) -> KpRow {
    let gap = hs.value - ht.value;
    let std_err = hs.std_err.hypot(ht.std_err);
    KpRow {
        alpha,
        s,
        h_source: hs.value,
        h_target: ht.value,
        gap,
        std_err,
        method: hs.method,
        samples: hs.meta.samples,
        seed: hs.meta.seed,
        verdict: classify(gap, std_err, ABS_TOL),
        note: None,
    }
}

fn sweep_noise(
    pair: &ContractionPair,
    orders: &[f64],
    s: f64,
    policy: &EstimatorPolicy,
) -> Result<Vec<KpRow>> {
    let ms = GaussianMixture::isotropic(pair.source(), s)?;
    let mt = GaussianMixture::isotropic(pair.target(), s)?;
    let live: Vec<f64> = orders.iter().copied().filter(|a| *a != 0.0).collect();
    let methods = live
        .iter()
        .map(|&a| {
            Ok(common_method(
                select_method(&ms, a, policy)?,
                select_method(&mt, a, policy)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let hs = estimate_renyi_orders_with(&ms, &live, &methods, policy)?;
    let ht = estimate_renyi_orders_with(&mt, &live, &methods, policy)?;
    let mut evaluated = hs.iter().zip(&ht);
    Ok(orders
        .iter()
        .map(|&a| {
            if a == 0.0 {
                skipped(a, s, "order 0 is +inf on both sides")
            } else {
                let (x, y) = evaluated.next().expect("one estimate per nonzero order");
                row(a, s, x, y)
            }
        })
        .collect())
}

/// Compare `h_α(X + √s Z)` with `h_α(T(X) + √s Z)` over all `(α, s)`.
/// Rows are ordered by `s`, then by `α` in the order given.
pub fn verify_kp_entropy(
    pair: &ContractionPair,
    orders: &[f64],
    noises: &[f64],
    policy: &EstimatorPolicy,
) -> Result<KpReport> {
    for &a in orders {
        if a.is_nan() || a < 0.0 {
            return Err(Error::NonPositiveAlpha(a));
        }
    }
    for &s in noises {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive, got {s}"
            )));
        }
    }
    let rows: Vec<Vec<KpRow>> = noises
        .par_iter()
        .map(|&s| sweep_noise(pair, orders, s, policy))
        .collect::<Result<_>>()?;
    Ok(KpReport {
        pair_id: String::new(),
        rows: rows.into_iter().flatten().collect(),
    })
}

/// `I(X; X + √s Z) = h(X + √s Z) − (n/2) log(2πe s)` in nats.
pub fn mutual_information(
    config: &PointConfiguration,
    s: f64,
    policy: &EstimatorPolicy,
) -> Result<EntropyEstimate> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be positive, got {s}"
        )));
    }
    let m = GaussianMixture::isotropic(config, s)?;
    let mut h = estimate_renyi(&m, 1.0, policy)?;
    h.value -= noise_entropy(config.dim(), s);
    Ok(h)
}

fn noise_entropy(dim: usize, s: f64) -> f64 {
    0.5 * dim as f64 * (LN_2PI + 1.0 + s.ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiComparison {
    pub s: f64,
    pub i_source: f64,
    pub i_target: f64,
    pub gap: f64,
    pub std_err: f64,
    pub method: Method,
    pub verdict: Verdict,
}

/// `I(X; X + √s Z) − I(T(X); T(X) + √s Z)`; the noise terms cancel, so this is
/// the order-1 entropy gap.
pub fn verify_mi_contraction(
    pair: &ContractionPair,
    s: f64,
    policy: &EstimatorPolicy,
) -> Result<MiComparison> {
    let report = verify_kp_entropy(pair, &[1.0], &[s], policy)?;
    let r = &report.rows[0];
    let h_noise = noise_entropy(pair.source().dim(), s);
    Ok(MiComparison {
        s,
        i_source: r.h_source - h_noise,
        i_target: r.h_target - h_noise,
        gap: r.gap,
        std_err: r.std_err,
        method: r.method,
        verdict: r.verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspace::{
        make_contraction_pair, random_contraction, Contraction, ContractionMethod,
    };
    use crate::gaussmix::{renyi_quadrature, PolicyMode, QuadratureSpec};
    use proptest::prelude::*;

    fn line(points: &[f64]) -> PointConfiguration {
        let pts: Vec<Vec<f64>> = points.iter().map(|p| vec![*p]).collect();
        PointConfiguration::uniform(1, &pts).unwrap()
    }

    fn quick() -> EstimatorPolicy {
        EstimatorPolicy::default().with_samples(20_000).with_seed(3)
    }

    #[test]
    fn classify_band() {
        assert_eq!(classify(0.0, 0.0, ABS_TOL), Verdict::Holds);
        assert_eq!(classify(-5e-7, 0.0, ABS_TOL), Verdict::HoldsWithinNoise);
        assert_eq!(classify(-2e-6, 0.0, ABS_TOL), Verdict::Violation);
        assert_eq!(classify(-0.02, 0.01, ABS_TOL), Verdict::HoldsWithinNoise);
        assert_eq!(classify(-0.04, 0.01, ABS_TOL), Verdict::Violation);
    }

    #[test]
    fn identity_pair_has_zero_gap() {
        let cfg = PointConfiguration::random(2, 4, 1.0, 11).unwrap();
        let pair = ContractionPair::identity(cfg);
        let r = verify_kp_entropy(&pair, &DEFAULT_ORDERS, &DEFAULT_NOISES, &quick()).unwrap();
        assert_eq!(r.rows.len(), 15);
        for row in &r.rows {
            assert!(row.gap.abs() < 1e-10, "{row:?}");
            assert_ne!(row.verdict, Verdict::Violation);
        }
    }

    #[test]
    fn single_point_anywhere_has_zero_gap() {
        let pair = make_contraction_pair(line(&[3.0]), line(&[-7.5])).unwrap();
        let r = verify_kp_entropy(&pair, &DEFAULT_ORDERS, &DEFAULT_NOISES, &quick()).unwrap();
        for row in &r.rows {
            assert!(row.gap.abs() < 1e-12);
            assert_eq!(row.method, Method::Analytic);
        }
    }

    #[test]
    fn two_point_order_two_closed_form() {
        let pair = make_contraction_pair(line(&[0.0, 2.0]), line(&[0.0, 1.0])).unwrap();
        let r = verify_kp_entropy(&pair, &[2.0], &[1.0], &quick()).unwrap();
        let expected = (1.0 + (-0.25f64).exp()).ln() - (1.0 + (-1.0f64).exp()).ln();
        assert!((r.rows[0].gap - expected).abs() < 1e-12);
        assert!((r.rows[0].gap - 0.2633).abs() < 1e-3);
        assert_eq!(r.rows[0].method, Method::ExactInteger);
    }

    #[test]
    fn collapsed_target_uses_same_method_on_both_sides() {
        let pair = make_contraction_pair(line(&[-1.0, 1.0]), line(&[0.5, 0.5])).unwrap();
        let r =
            verify_kp_entropy(&pair, &[0.5, 1.0, 2.0, f64::INFINITY], &[1.0], &quick()).unwrap();
        let methods: Vec<Method> = r.rows.iter().map(|x| x.method).collect();
        assert_eq!(
            methods,
            [
                Method::Quadrature,
                Method::Quadrature,
                Method::ExactInteger,
                Method::SupOptimization
            ]
        );
        assert!(r.rows.iter().all(|x| x.verdict == Verdict::Holds));
    }

    #[test]
    fn order_zero_is_skipped() {
        let pair = ContractionPair::identity(line(&[0.0, 1.0]));
        let r = verify_kp_entropy(&pair, &[0.0, 1.0], &[1.0], &quick()).unwrap();
        assert_eq!(r.rows[0].verdict, Verdict::Skipped);
        assert_eq!(r.rows[1].verdict, Verdict::Holds);
    }

    #[test]
    fn mutual_information_examples() {
        let p = quick();
        assert!(
            mutual_information(&line(&[4.0]), 2.0, &p)
                .unwrap()
                .value
                .abs()
                < 1e-12
        );
        let far = mutual_information(&line(&[0.0, 1.0]), 1e4, &p)
            .unwrap()
            .value;
        assert!((0.0..1e-2).contains(&far));
        let cfg = line(&[-1.0, 1.0]);
        let i = mutual_information(&cfg, 1.0, &p).unwrap().value;
        let m = GaussianMixture::isotropic(&cfg, 1.0).unwrap();
        // independent oracle: finer grid than the default policy
        let h = renyi_quadrature(&m, 1.0, &QuadratureSpec::with_nodes(16_001))
            .unwrap()
            .value;
        assert!((i - (h - 0.5 * (LN_2PI + 1.0))).abs() < 1e-9);
        assert!(i > 0.0);
    }

    #[test]
    fn mi_contraction_examples() {
        let p = quick();
        let id =
            verify_mi_contraction(&ContractionPair::identity(line(&[-1.0, 1.0])), 1.0, &p).unwrap();
        assert!(id.gap.abs() < 1e-12);
        let half = make_contraction_pair(line(&[-1.0, 1.0]), line(&[-0.5, 0.5])).unwrap();
        assert!(verify_mi_contraction(&half, 1.0, &p).unwrap().gap > 0.0);
        let collapsed = make_contraction_pair(line(&[-1.0, 1.0]), line(&[0.0, 0.0])).unwrap();
        let c = verify_mi_contraction(&collapsed, 1.0, &p).unwrap();
        assert!(c.i_target.abs() < 1e-9);
        assert!((c.gap - c.i_source).abs() < 1e-9 && c.gap > 0.0);
    }

    #[test]
    fn tensorization_with_zero_embedding() {
        let src = line(&[-0.7, 0.4, 1.9]);
        let pair = Contraction::Scaling {
            center: vec![0.2],
            ratio: 0.6,
        }
        .pair(&src)
        .unwrap();
        let p = quick();
        let lo = verify_kp_entropy(&pair, &[1.0, 2.0, 3.0], &[1.0], &p).unwrap();
        let hi =
            verify_kp_entropy(&pair.embed_zero(1).unwrap(), &[1.0, 2.0, 3.0], &[1.0], &p).unwrap();
        for (a, b) in lo.rows.iter().zip(&hi.rows) {
            assert!((a.gap - b.gap).abs() < 1e-7, "{a:?} {b:?}");
        }
    }

    #[test]
    fn homothety_gap_shrinks_to_zero() {
        let src = PointConfiguration::random(1, 4, 1.5, 8).unwrap();
        let p = quick();
        for alpha in [1.0, 2.0] {
            let gaps: Vec<f64> = (0..=10)
                .map(|j| {
                    let beta = j as f64 / 10.0;
                    let pair = Contraction::Scaling {
                        center: vec![0.0],
                        ratio: beta,
                    }
                    .pair(&src)
                    .unwrap();
                    verify_kp_entropy(&pair, &[alpha], &[1.0], &p).unwrap().rows[0].gap
                })
                .collect();
            for w in gaps.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{gaps:?}");
            }
            assert!(gaps[10].abs() < 1e-12);
        }
    }

    #[test]
    fn monte_carlo_rows_share_random_numbers() {
        let cfg = PointConfiguration::random(3, 3, 1.0, 2).unwrap();
        let pair = ContractionPair::identity(cfg);
        let p = quick().with_mode(PolicyMode::MonteCarlo);
        let r = verify_kp_entropy(&pair, &[1.0, 0.5], &[1.0], &p).unwrap();
        for row in &r.rows {
            assert_eq!(row.method, Method::MonteCarlo);
            assert_eq!(row.gap, 0.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn random_pairs_never_violate(seed in 0u64..1000, k in 2usize..5) {
            let src = PointConfiguration::random(1, k, 1.5, seed).unwrap();
            let pair = random_contraction(&src, ContractionMethod::Any, seed);
            let r = verify_kp_entropy(&pair, &DEFAULT_ORDERS, &[1.0], &quick()).unwrap();
            prop_assert_eq!(r.violations(), 0);
        }

        #[test]
        fn gap_is_invariant_under_rigid_motion(seed in 0u64..1000, shift in -5.0f64..5.0) {
            let src = PointConfiguration::random(1, 3, 1.0, seed).unwrap();
            let pair = random_contraction(&src, ContractionMethod::Scaling, seed);
            let moved = pair.rigid_motion(|x| vec![shift - x[0]], |x| vec![x[0] + 2.0 * shift]).unwrap();
            let p = quick();
            let a = verify_kp_entropy(&pair, &[1.0, 2.0], &[1.0], &p).unwrap();
            let b = verify_kp_entropy(&moved, &[1.0, 2.0], &[1.0], &p).unwrap();
            for (x, y) in a.rows.iter().zip(&b.rows) {
                prop_assert!((x.gap - y.gap).abs() < 1e-7);
            }
        }
    }
}
