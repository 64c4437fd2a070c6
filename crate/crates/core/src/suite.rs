//! The acceptance battery.
//!
//! Each criterion builds its instances from the suite seed, runs one of the
//! module checks over all of them and returns a pass flag together with CSV
//! tables of every row it looked at. Tables hold no timing information, so a
//! rerun with the same options reproduces them byte for byte.

use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capacity::{self, BaOptions};
use crate::configspace::{
    random_contraction, ContractionMethod, ContractionPair, PointConfiguration,
};
use crate::costa::{self, SmoothedConfig};
use crate::error::{Error, Result};
use crate::flow::{self, ConvexFunctional, TrajectoryFamily};
use crate::gaussmix::{
    renyi_exact_integer, renyi_monte_carlo, renyi_quadrature, EstimatorPolicy, GaussianMixture,
    PolicyMode, QuadratureSpec, DEFAULT_EXACT_BUDGET, LN_2PI,
};
use crate::geovol::{self, BallUnion, GeoVerdict};
use crate::kpverify::{self, Verdict};
use crate::minty;
use crate::report::{num, opt, points, Table};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Monte Carlo samples for sweeps.
    pub samples: usize,
    /// Monte Carlo samples where a criterion compares against a closed form.
    pub oracle_samples: usize,
    /// `Quadrature` keeps the entropy sweep at `n ≤ 2`.
    pub mode: PolicyMode,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 100_000,
            oracle_samples: 1_000_000,
            mode: PolicyMode::Auto,
        }
    }
}

impl SuiteOptions {
    fn policy(&self, seed: u64) -> EstimatorPolicy {
        EstimatorPolicy::default()
            .with_mode(self.mode)
            .with_samples(self.samples)
            .with_seed(seed)
    }
}

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub runtime_limit: Option<Duration>,
    /// File name and contents.
    pub tables: Vec<(String, Table)>,
}

impl CriterionOutcome {
    pub fn within_runtime(&self) -> bool {
        self.runtime_limit.is_none_or(|l| self.elapsed <= l)
    }

    pub fn line(&self) -> String {
        let runtime = match self.runtime_limit {
            Some(l) => format!(" [{:.1}s of {}s]", self.elapsed.as_secs_f64(), l.as_secs()),
            None => format!(" [{:.1}s]", self.elapsed.as_secs_f64()),
        };
        let ok = self.passed && self.within_runtime();
        format!(
            "criterion {:>2} {}: {}{} {}",
            self.id,
            if ok { "PASS" } else { "FAIL" },
            self.title,
            runtime,
            self.detail
        )
    }
}

pub const CRITERIA: [u32; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

/// Instance seed `i` of criterion `c`.
fn sub_seed(seed: u64, c: u64, i: u64) -> u64 {
    rng::stream(seed, (c << 32) | i).next_u64()
}

fn outcome(id: u32, title: &'static str, start: Instant, limit: Option<u64>) -> CriterionOutcome {
    CriterionOutcome {
        id,
        title,
        passed: false,
        detail: String::new(),
        elapsed: start.elapsed(),
        runtime_limit: limit.map(Duration::from_secs),
        tables: Vec::new(),
    }
}

fn verdict_ok(v: Verdict) -> bool {
    v != Verdict::Violation
}

/// Exact, quadrature and Monte Carlo `h_2`, `h_3` on 50 small mixtures.
pub fn oracle_agreement(o: &SuiteOptions) -> Result<CriterionOutcome> {
    const REL_TOL: f64 = 1e-6;
    let start = Instant::now();
    let rows: Vec<Vec<(Vec<String>, bool, bool)>> = (0..50u64)
        .into_par_iter()
        .map(|i| {
            let seed = sub_seed(o.seed, 1, i);
            let dim = 1 + (i % 2) as usize;
            let k = 1 + (i / 2 % 5) as usize;
            let s = [0.25, 0.5, 1.0, 2.0][(i % 4) as usize];
            let cfg = PointConfiguration::random(dim, k, 2.0, seed)?;
            let m = GaussianMixture::isotropic(&cfg, s)?;
            [2u32, 3]
                .iter()
                .map(|&alpha| {
                    let exact = renyi_exact_integer(&m, alpha, DEFAULT_EXACT_BUDGET)?.value;
                    let quad =
                        renyi_quadrature(&m, alpha as f64, &QuadratureSpec::default_for(dim))?
                            .value;
                    let mc = renyi_monte_carlo(&m, alpha as f64, o.oracle_samples, seed)?;
                    let rel = (quad - exact).abs() / exact.abs();
                    let z = (mc.value - exact) / mc.std_err;
                    let (q_ok, m_ok) =
                        (rel <= REL_TOL, (mc.value - exact).abs() <= 3.0 * mc.std_err);
                    let row = vec![
                        i.to_string(),
                        dim.to_string(),
                        k.to_string(),
                        num(s),
                        alpha.to_string(),
                        num(exact),
                        num(quad),
                        num(rel),
                        num(mc.value),
                        num(mc.std_err),
                        num(z),
                        o.oracle_samples.to_string(),
                        seed.to_string(),
                        points(cfg.coords(), dim),
                    ];
                    Ok((row, q_ok, m_ok))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&[
        "instance",
        "dim",
        "k",
        "s",
        "alpha",
        "exact",
        "quadrature",
        "quadrature_rel_err",
        "monte_carlo",
        "mc_std_err",
        "mc_z",
        "samples",
        "seed",
        "centers",
    ]);
    let (mut q_fail, mut m_fail) = (0, 0);
    for (row, q, m) in rows.into_iter().flatten() {
        q_fail += usize::from(!q);
        m_fail += usize::from(!m);
        table.push(row);
    }
    let mut out = outcome(1, "oracle agreement", start, Some(120));
    out.passed = q_fail == 0 && m_fail == 0;
    out.detail = format!(
        "{} comparisons; quadrature beyond 1e-6 relative: {q_fail}; Monte Carlo beyond 3 std_err: {m_fail}",
        table.len()
    );
    out.tables.push(("ac01_oracle_agreement.csv".into(), table));
    Ok(out)
}

fn random_pair(seed: u64, dim: usize, k: usize, spread: f64) -> Result<ContractionPair> {
    let cfg = PointConfiguration::random(dim, k, spread, seed)?;
    Ok(random_contraction(&cfg, ContractionMethod::Any, seed))
}

/// Entropy comparison over 200 random contraction pairs.
pub fn entropic_kp(o: &SuiteOptions) -> Result<CriterionOutcome> {
    let start = Instant::now();
    let dims = if o.mode == PolicyMode::Quadrature {
        2
    } else {
        3
    };
    let reports: Vec<(u64, usize, usize, kpverify::KpReport)> = (0..200u64)
        .into_par_iter()
        .map(|i| {
            let seed = sub_seed(o.seed, 2, i);
            let dim = 1 + (i % dims) as usize;
            let k = 2 + (i / dims % 7) as usize;
            let pair = random_pair(seed, dim, k, 1.5)?;
            let r = kpverify::verify_kp_entropy(
                &pair,
                &kpverify::DEFAULT_ORDERS,
                &kpverify::DEFAULT_NOISES,
                &o.policy(seed),
            )?;
            Ok((i, dim, k, r))
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&[
        "pair", "dim", "k", "alpha", "s", "h_source", "h_target", "gap", "std_err", "method",
        "samples", "seed", "verdict",
    ]);
    let (mut violations, mut within_noise, mut rows) = (0, 0, 0);
    for (i, dim, k, r) in &reports {
        for row in &r.rows {
            rows += 1;
            violations += usize::from(row.verdict == Verdict::Violation);
            within_noise += usize::from(row.verdict == Verdict::HoldsWithinNoise);
            table.push(vec![
                i.to_string(),
                dim.to_string(),
                k.to_string(),
                num(row.alpha),
                num(row.s),
                num(row.h_source),
                num(row.h_target),
                num(row.gap),
                num(row.std_err),
                row.method.as_str().into(),
                opt(row.samples),
                opt(row.seed),
                row.verdict.as_str().into(),
            ]);
        }
    }
    let limit = if o.mode == PolicyMode::Quadrature {
        300
    } else {
        1800
    };
    let mut out = outcome(2, "entropic Kneser-Poulsen", start, Some(limit));
    out.passed = violations == 0;
    out.detail = format!(
        "{rows} rows over {} pairs; violations: {violations}; within noise: {within_noise}",
        reports.len()
    );
    out.tables.push(("ac02_entropic_kp.csv".into(), table));
    Ok(out)
}

const LIFTS: u64 = 25;
const FLOW_NOISE: f64 = 1.0;

fn lift(o: &SuiteOptions, i: u64) -> Result<(u64, TrajectoryFamily)> {
    let seed = sub_seed(o.seed, 3, i);
    let dim = 1 + (i % 2) as usize;
    let k = 2 + (i / 2 % 5) as usize;
    Ok((
        seed,
        flow::bezdek_connelly_lift(&random_pair(seed, dim, k, 1.5)?),
    ))
}

/// `∫ f²` and `∫ f log f` along 25 lifted flows.
pub fn flow_monotonicity(o: &SuiteOptions) -> Result<CriterionOutcome> {
    const EXACT_TOL: f64 = 1e-8;
    let start = Instant::now();
    let grid = flow::default_t_grid();
    let series: Vec<_> = (0..LIFTS)
        .map(|i| {
            let (seed, fam) = lift(o, i)?;
            let policy = o.policy(seed);
            let sq = flow::functional_along_flow(
                &fam,
                ConvexFunctional::Power { alpha: 2.0 },
                FLOW_NOISE,
                &grid,
                &policy,
            )?;
            let ent = flow::functional_along_flow(
                &fam,
                ConvexFunctional::Xlogx,
                FLOW_NOISE,
                &grid,
                &policy,
            )?;
            Ok((i, fam.dim(), sq, ent))
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&[
        "lift",
        "dim",
        "functional",
        "t",
        "value",
        "std_err",
        "method",
    ]);
    let (mut sq_bad, mut ent_bad, mut exact_paths) = (0, 0, true);
    for (i, dim, sq, ent) in &series {
        // a band of 1e-8 for the deterministic path; 3σ for the entropy
        let sq_drop = sq
            .windows(2)
            .map(|w| w[0].value - w[1].value)
            .fold(f64::NEG_INFINITY, f64::max);
        sq_bad += usize::from(sq_drop > EXACT_TOL);
        exact_paths &= sq
            .iter()
            .all(|p| p.method.is_deterministic() && p.std_err == 0.0);
        ent_bad += usize::from(flow::worst_decrease(ent, 0.0) > 0.0);
        for (name, s) in [("power(2)", sq), ("xlogx", ent)] {
            for p in s {
                table.push(vec![
                    i.to_string(),
                    dim.to_string(),
                    name.into(),
                    num(p.t),
                    num(p.value),
                    num(p.std_err),
                    p.method.as_str().into(),
                ]);
            }
        }
    }
    let mut out = outcome(3, "flow monotonicity", start, None);
    out.passed = sq_bad == 0 && ent_bad == 0 && exact_paths;
    out.detail = format!(
        "{LIFTS} lifts on {} times; square series decreasing: {sq_bad}; entropy series decreasing beyond 3 std_err: {ent_bad}",
        grid.len()
    );
    out.tables
        .push(("ac03_flow_monotonicity.csv".into(), table));
    Ok(out)
}

/// Sign of the smoothed divergence and agreement with finite differences.
pub fn divergence(o: &SuiteOptions) -> Result<CriterionOutcome> {
    const SIGN_TOL: f64 = 1e-9;
    const FD_TOL: f64 = 1e-6;
    const POINTS: usize = 100;
    let start = Instant::now();
    let grid = flow::default_t_grid();
    let mut table = Table::new(&[
        "lift",
        "dim",
        "t",
        "points",
        "max_divergence",
        "max_fd_mismatch",
    ]);
    let (mut sign_bad, mut fd_bad) = (0, 0);
    let (mut worst_div, mut worst_fd) = (f64::NEG_INFINITY, 0.0f64);
    for i in 0..LIFTS {
        let (seed, fam) = lift(o, i)?;
        let rows: Vec<(f64, f64, f64)> = grid
            .par_iter()
            .enumerate()
            .map(|(j, &t)| {
                let xs = flow::sample_smoothed(&fam, t, FLOW_NOISE, POINTS, seed ^ j as u64)?;
                let mut max_div = f64::NEG_INFINITY;
                let mut max_fd = 0.0f64;
                for x in &xs {
                    let d = flow::convolved_divergence(&fam, t, x, FLOW_NOISE)?;
                    let fd = flow::finite_difference_divergence(
                        &fam,
                        t,
                        x,
                        FLOW_NOISE,
                        flow::DIVERGENCE_STEP,
                    )?;
                    max_div = max_div.max(d);
                    max_fd = max_fd.max((d - fd).abs());
                }
                Ok((t, max_div, max_fd))
            })
            .collect::<Result<_>>()?;
        for (t, d, fd) in rows {
            sign_bad += usize::from(d > SIGN_TOL);
            fd_bad += usize::from(fd > FD_TOL);
            worst_div = worst_div.max(d);
            worst_fd = worst_fd.max(fd);
            table.push(vec![
                i.to_string(),
                fam.dim().to_string(),
                num(t),
                POINTS.to_string(),
                num(d),
                num(fd),
            ]);
        }
    }
    let mut out = outcome(4, "divergence nonpositivity", start, None);
    out.passed = sign_bad == 0 && fd_bad == 0;
    out.detail = format!(
        "largest divergence {worst_div:.3e}; largest finite-difference mismatch {worst_fd:.3e}; cells failing sign: {sign_bad}, mismatch: {fd_bad}"
    );
    out.tables.push(("ac04_divergence.csv".into(), table));
    Ok(out)
}

/// Pairwise `⟨Δv, Δx⟩ ≤ 0` along the lifted trajectories.
pub fn velocity_monotonicity(o: &SuiteOptions) -> Result<CriterionOutcome> {
    const TOL: f64 = 1e-8;
    let start = Instant::now();
    let grid = flow::uniform_t_grid(101);
    let mut table = Table::new(&[
        "lift",
        "dim",
        "k",
        "times",
        "max_velocity_inner",
        "max_distance_increase",
        "merge_violations",
    ]);
    let mut bad = 0;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..LIFTS {
        let (_, fam) = lift(o, i)?;
        let c = flow::check_contraction(&fam, &grid);
        bad += usize::from(c.max_velocity_inner > TOL);
        worst = worst.max(c.max_velocity_inner);
        table.push(vec![
            i.to_string(),
            fam.dim().to_string(),
            fam.len().to_string(),
            grid.len().to_string(),
            num(c.max_velocity_inner),
            num(c.max_distance_increase),
            c.merge_violations.to_string(),
        ]);
    }
    let mut out = outcome(5, "velocity monotonicity", start, None);
    out.passed = bad == 0;
    out.detail = format!("largest pairwise inner product {worst:.3e}; lifts above 1e-8: {bad}");
    out.tables
        .push(("ac05_velocity_monotonicity.csv".into(), table));
    Ok(out)
}

/// Monotone extension on 100 random instances, and the constant-substitution
/// identity for the divergence on posteriors of the lifted flows.
pub fn minty_feasibility(o: &SuiteOptions) -> Result<CriterionOutcome> {
    const IDENTITY_TOL: f64 = 1e-12;
    let start = Instant::now();
    let rows: Vec<(Vec<String>, bool, bool)> = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let seed = sub_seed(o.seed, 6, i);
            let dim = 1 + (i % 4) as usize;
            let k = 2 + (i / 4 % 9) as usize;
            let pairs = minty::random_monotone_pairs(dim, k, seed);
            let x0 = minty::random_interior_point(&pairs, seed);
            let (feasible, solver, residual) = match minty::extend_monotone_detailed(&pairs, &x0) {
                Ok(e) => (
                    e.min_residual >= -minty::FEASIBILITY_TOL,
                    format!("{:?}", e.solver).to_lowercase(),
                    e.min_residual,
                ),
                Err(e) => (false, format!("error: {e}"), f64::NAN),
            };
            let (_, fam) = lift(o, i % LIFTS)?;
            let t = (i % 21) as f64 / 20.0;
            let x = flow::sample_smoothed(&fam, t, FLOW_NOISE, 1, seed)?.remove(0);
            let post = flow::posterior(&fam, t, &x, FLOW_NOISE)?;
            let w = minty::extend_velocity_at_mean(&post)?;
            let mismatch = (post.divergence_with(&w) - post.divergence()).abs();
            let row = vec![
                i.to_string(),
                dim.to_string(),
                k.to_string(),
                solver,
                num(residual),
                feasible.to_string(),
                (i % LIFTS).to_string(),
                num(t),
                num(post.divergence()),
                num(mismatch),
            ];
            Ok((row, feasible, mismatch <= IDENTITY_TOL))
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&[
        "instance",
        "dim",
        "k",
        "solver",
        "min_residual",
        "feasible",
        "lift",
        "t",
        "divergence",
        "substitution_mismatch",
    ]);
    let (mut infeasible, mut identity_bad) = (0, 0);
    for (row, f, id) in rows {
        infeasible += usize::from(!f);
        identity_bad += usize::from(!id);
        table.push(row);
    }
    let mut out = outcome(6, "Minty feasibility", start, None);
    out.passed = infeasible == 0 && identity_bad == 0;
    out.detail =
        format!("100 instances; infeasible: {infeasible}; identity beyond 1e-12: {identity_bad}");
    out.tables.push(("ac06_minty.csv".into(), table));
    Ok(out)
}

fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64)
        .collect()
}

/// Concavity of entropy power in the noise level and monotonicity of `A(β)`.
pub fn costa_concavity(o: &SuiteOptions) -> Result<CriterionOutcome> {
    const SINGLE_TOL: f64 = 1e-9;
    let start = Instant::now();
    let s_grid = uniform_grid(0.25, 3.0, 12);
    let beta_grid = uniform_grid(0.0, 1.0, 11);
    let results: Vec<_> = (0..20u64)
        .into_par_iter()
        .map(|i| {
            let seed = sub_seed(o.seed, 7, i);
            let dim = 1 + (i / 2 % 2) as usize;
            let k = if i % 5 == 0 { 1 } else { 2 + (i % 4) as usize };
            let s0 = [0.0, 0.25, 0.5, 1.0][(i % 4) as usize];
            let x = SmoothedConfig::new(PointConfiguration::random(dim, k, 1.5, seed)?, s0)?;
            let policy = o.policy(seed);
            let report = costa::costa_concavity_report(&x, &s_grid, &policy)?;
            let a = if s0 > 0.0 {
                Some(costa::a_beta_series(&x, &beta_grid, false, &policy)?)
            } else {
                None
            };
            Ok((i, dim, k, s0, report, a))
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&[
        "config", "dim", "k", "s0", "series", "x", "value", "std_err", "ok",
    ]);
    let (mut concave_bad, mut single_bad, mut a_bad) = (0, 0, 0);
    for (i, dim, k, s0, report, a) in &results {
        let head = |series: &str| {
            vec![
                i.to_string(),
                dim.to_string(),
                k.to_string(),
                num(*s0),
                series.to_string(),
            ]
        };
        for p in &report.points {
            let mut row = head("entropy-power");
            row.extend([num(p.s), num(p.value), num(p.std_err), String::new()]);
            table.push(row);
        }
        for d in &report.second_differences {
            let ok = if *k == 1 {
                d.value.abs() <= SINGLE_TOL
            } else {
                d.concave
            };
            concave_bad += usize::from(*k > 1 && !ok);
            single_bad += usize::from(*k == 1 && !ok);
            let mut row = head("second-difference");
            row.extend([num(d.s), num(d.value), num(d.std_err), ok.to_string()]);
            table.push(row);
        }
        if let Some(a) = a {
            let ok = costa::a_beta_worst_decrease(a) == 0.0;
            a_bad += usize::from(!ok);
            for p in a {
                let mut row = head("a-beta");
                row.extend([num(p.beta), num(p.value), num(p.std_err), ok.to_string()]);
                table.push(row);
            }
        }
    }
    let mut out = outcome(7, "Costa concavity", start, None);
    out.passed = concave_bad == 0 && single_bad == 0 && a_bad == 0;
    out.detail = format!(
        "20 configs; convex second differences: {concave_bad}; single-point second differences above 1e-9: {single_bad}; decreasing A(beta) series: {a_bad}"
    );
    out.tables.push(("ac07_costa.csv".into(), table));
    Ok(out)
}

fn random_map(dim: usize, norm: f64, seed: u64) -> DMatrix<f64> {
    let mut r = rng::stream(seed, 1);
    let a = DMatrix::from_fn(dim, dim, |_, _| r.sample::<f64, _>(StandardNormal));
    let scale = norm / costa::operator_norm(&a);
    // keep the norm at or below the target after rounding
    a * (scale * (1.0 - 1e-15))
}

/// `N(X + Z) ≥ N(AX + Z) + (1 − ‖A‖²) N(X)` on 20 instances.
pub fn unified_inequality(o: &SuiteOptions) -> Result<CriterionOutcome> {
    const IDENTITY_TOL: f64 = 1e-9;
    let start = Instant::now();
    let rows: Vec<(Vec<String>, bool)> = (0..20u64)
        .into_par_iter()
        .map(|i| {
            let seed = sub_seed(o.seed, 8, i);
            let dim = 1 + (i % 2) as usize;
            let k = 1 + (i / 2 % 4) as usize;
            let s0 = [0.25, 0.5, 1.0][(i % 3) as usize];
            let (kind, a) = match i {
                0 => ("zero", DMatrix::zeros(dim, dim)),
                1 => ("identity", DMatrix::identity(dim, dim)),
                _ => ("random", random_map(dim, (1 + i % 5) as f64 / 5.0, seed)),
            };
            let x = SmoothedConfig::new(PointConfiguration::random(dim, k, 1.5, seed)?, s0)?
                .with_map(a)?;
            let r = costa::unified_inequality_check(&x, &o.policy(seed))?;
            let ok = if kind == "identity" {
                r.gap.abs() <= IDENTITY_TOL
            } else {
                verdict_ok(r.verdict)
            };
            let row = vec![
                i.to_string(),
                dim.to_string(),
                k.to_string(),
                num(s0),
                kind.into(),
                num(r.lipschitz),
                num(r.n_x_plus_z),
                num(r.n_ax_plus_z),
                num(r.n_x),
                num(r.gap),
                num(r.std_err),
                r.verdict.as_str().into(),
                ok.to_string(),
            ];
            Ok((row, ok))
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&[
        "instance",
        "dim",
        "k",
        "s0",
        "map",
        "lipschitz",
        "n_x_plus_z",
        "n_ax_plus_z",
        "n_x",
        "gap",
        "std_err",
        "verdict",
        "ok",
    ]);
    let mut bad = 0;
    for (row, ok) in rows {
        bad += usize::from(!ok);
        table.push(row);
    }
    let mut out = outcome(8, "unified inequality", start, None);
    out.passed = bad == 0;
    out.detail = format!("20 instances including A = 0 and A = I; failing: {bad}");
    out.tables.push(("ac08_unified.csv".into(), table));
    Ok(out)
}

/// `max_w I(w)` over weights `j/1000` for the alphabet `{−a, a}`, from the
/// mixture entropy `h(X + √s Z) − ½ log(2πe s)` by quadrature.
pub fn binary_capacity_oracle(a: f64, s: f64) -> Result<f64> {
    let spec = QuadratureSpec::with_nodes(8001);
    let values = (1..1000)
        .into_par_iter()
        .map(|j| {
            let w = j as f64 / 1000.0;
            let cfg = PointConfiguration::from_flat(1, vec![-a, a], vec![w, 1.0 - w])?;
            let m = GaussianMixture::isotropic(&cfg, s)?;
            Ok(renyi_quadrature(&m, 1.0, &spec)?.value - 0.5 * (LN_2PI + 1.0 + s.ln()))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(values.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Blahut–Arimoto against a weight-grid oracle, and capacities of 30
/// contraction pairs.
pub fn capacity_check(o: &SuiteOptions) -> Result<CriterionOutcome> {
    const ORACLE_TOL: f64 = 1e-3;
    const MONOTONE_TOL: f64 = 1e-10;
    let start = Instant::now();
    let opts = BaOptions {
        policy: o.policy(o.seed),
        ..Default::default()
    };
    let binary = PointConfiguration::uniform(1, &[vec![-1.0], vec![1.0]])?;
    let ba = capacity::blahut_arimoto(&binary, 1.0, &opts)?;
    let oracle = binary_capacity_oracle(1.0, 1.0)?;
    let oracle_ok = (ba.capacity - oracle).abs() <= ORACLE_TOL;
    let mut history = Table::new(&["run", "iteration", "lower", "width"]);
    let mut push_history = |name: &str, r: &capacity::CapacityResult| {
        for (it, h) in r.history.iter().enumerate() {
            history.push(vec![
                name.into(),
                it.to_string(),
                num(h.lower),
                num(h.width),
            ]);
        }
    };
    push_history("binary", &ba);
    let mut monotone_bad = usize::from(ba.worst_lower_decrease() > MONOTONE_TOL);
    let results: Vec<_> = (0..30u64)
        .into_par_iter()
        .map(|i| {
            let seed = sub_seed(o.seed, 9, i);
            let dim = 1 + (i % 2) as usize;
            let k = 2 + (i / 2 % 5) as usize;
            let s = [0.5, 1.0, 2.0][(i % 3) as usize];
            let pair = random_pair(seed, dim, k, 1.5)?;
            let opts = BaOptions {
                policy: o.policy(seed),
                ..Default::default()
            };
            let src = capacity::blahut_arimoto(pair.source(), s, &opts)?;
            let tgt = capacity::blahut_arimoto(pair.target(), s, &opts)?;
            let check = capacity::capacity_contraction_check(&pair, s, &opts)?;
            Ok((i, dim, k, src, tgt, check))
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&[
        "pair",
        "dim",
        "k",
        "s",
        "c_source",
        "c_target",
        "gap",
        "bracket_source",
        "bracket_target",
        "verdict",
        "pointwise_source",
        "pointwise_target",
        "pointwise_holds",
        "converged",
    ]);
    table.push(vec![
        "binary".into(),
        "1".into(),
        "2".into(),
        num(1.0),
        num(ba.capacity),
        num(oracle),
        num(ba.capacity - oracle),
        num(ba.bracket_width()),
        String::new(),
        if oracle_ok {
            "matches-oracle"
        } else {
            "ORACLE-MISMATCH"
        }
        .into(),
        String::new(),
        String::new(),
        String::new(),
        ba.converged.to_string(),
    ]);
    let (mut violations, mut pointwise_bad) = (0, 0);
    for (i, dim, k, src, tgt, c) in &results {
        push_history(&format!("pair{i}-source"), src);
        push_history(&format!("pair{i}-target"), tgt);
        monotone_bad += usize::from(src.worst_lower_decrease() > MONOTONE_TOL);
        monotone_bad += usize::from(tgt.worst_lower_decrease() > MONOTONE_TOL);
        violations += usize::from(c.verdict == Verdict::Violation);
        pointwise_bad += usize::from(!c.pointwise_holds);
        table.push(vec![
            i.to_string(),
            dim.to_string(),
            k.to_string(),
            num(c.s),
            num(c.c_source),
            num(c.c_target),
            num(c.gap),
            num(c.bracket_source),
            num(c.bracket_target),
            c.verdict.as_str().into(),
            num(c.pointwise_source),
            num(c.pointwise_target),
            c.pointwise_holds.to_string(),
            (src.converged && tgt.converged).to_string(),
        ]);
    }
    let mut out = outcome(9, "channel capacity", start, Some(300));
    out.passed = oracle_ok && monotone_bad == 0 && violations == 0;
    out.detail = format!(
        "binary capacity {:.6} vs oracle {oracle:.6}; runs with a decreasing lower bound: {monotone_bad}; violations: {violations}; pointwise failures: {pointwise_bad}",
        ba.capacity
    );
    out.tables.push(("ac09_capacity.csv".into(), table));
    out.tables
        .push(("ac09_capacity_history.csv".into(), history));
    Ok(out)
}

/// Two-disk lens area and the volume comparison on 30 planar pairs.
pub fn geometry(o: &SuiteOptions) -> Result<CriterionOutcome> {
    let start = Instant::now();
    let lens = BallUnion::new(2, vec![0.0, 0.0, 1.0, 0.0], 1.0)?;
    let est = geovol::union_volume_mc(&lens, o.oracle_samples, o.seed)?;
    let exact = geovol::two_disk_union_area(1.0);
    let lens_ok = (est.volume - exact).abs() <= 3.0 * est.std_err;
    let samples = o.samples.max(geovol::MIN_SAMPLES);
    let checks: Vec<_> = (0..30u64)
        .into_par_iter()
        .map(|i| {
            let seed = sub_seed(o.seed, 10, i);
            let k = 2 + (i % 6) as usize;
            let pair = random_pair(seed, 2, k, 1.5)?;
            Ok((i, k, geovol::kp_geometric_check(&pair, 1.0, samples, seed)?))
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&[
        "pair",
        "k",
        "radius",
        "vol_source",
        "vol_target",
        "gap",
        "std_err",
        "samples",
        "seed",
        "verdict",
        "status",
    ]);
    table.push(vec![
        "lens".into(),
        "2".into(),
        num(1.0),
        num(est.volume),
        num(exact),
        num(est.volume - exact),
        num(est.std_err),
        est.samples.to_string(),
        est.seed.to_string(),
        if lens_ok {
            "matches-closed-form"
        } else {
            "CLOSED-FORM-MISMATCH"
        }
        .into(),
        String::new(),
    ]);
    let (mut inconsistent, mut within_noise) = (0, 0);
    for (i, k, c) in &checks {
        inconsistent += usize::from(c.verdict == GeoVerdict::Inconsistent);
        within_noise += usize::from(c.verdict == GeoVerdict::InconsistentWithinNoise);
        table.push(vec![
            i.to_string(),
            k.to_string(),
            num(c.radius),
            num(c.vol_source),
            num(c.vol_target),
            num(c.gap),
            num(c.std_err),
            c.samples.to_string(),
            c.seed.to_string(),
            c.verdict.as_str().into(),
            c.status.as_str().into(),
        ]);
    }
    let mut out = outcome(10, "union-of-balls geometry", start, None);
    out.passed = lens_ok && inconsistent == 0;
    out.detail = format!(
        "lens z = {:.2}; planar pairs INCONSISTENT: {inconsistent}, within noise: {within_noise}",
        (est.volume - exact) / est.std_err
    );
    out.tables.push(("ac10_geometry.csv".into(), table));
    Ok(out)
}

pub fn run_criterion(id: u32, o: &SuiteOptions) -> Result<CriterionOutcome> {
    match id {
        1 => oracle_agreement(o),
        2 => entropic_kp(o),
        3 => flow_monotonicity(o),
        4 => divergence(o),
        5 => velocity_monotonicity(o),
        6 => minty_feasibility(o),
        7 => costa_concavity(o),
        8 => unified_inequality(o),
        9 => capacity_check(o),
        10 => geometry(o),
        other => Err(Error::InvalidArgument(format!("no criterion {other}"))),
    }
}

/// Run the listed criteria and write their tables plus `summary.csv` into
/// `out_dir`. A criterion that errors is recorded as failed.
pub fn run_suite(o: &SuiteOptions, ids: &[u32], out_dir: &Path) -> Result<Vec<CriterionOutcome>> {
    let mut outcomes = Vec::with_capacity(ids.len());
    let mut summary = Table::new(&["criterion", "title", "passed", "detail"]);
    for &id in ids {
        let start = Instant::now();
        let o = run_criterion(id, o).unwrap_or_else(|e| {
            let mut out = outcome(id, "error", start, None);
            out.detail = e.to_string();
            out
        });
        for (name, table) in &o.tables {
            table.write(&out_dir.join(name))?;
        }
        summary.push(vec![
            o.id.to_string(),
            o.title.into(),
            o.passed.to_string(),
            o.detail.clone(),
        ]);
        outcomes.push(o);
    }
    summary.write(&out_dir.join("summary.csv"))?;
    Ok(outcomes)
}
