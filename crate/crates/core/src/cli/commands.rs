//! One function per subcommand. Each returns its tables and a count of
//! failed checks; writing files and choosing the exit code is left to the
//! caller.

use crate::capacity::{self, BaOptions, CapacityResult};
use crate::costa::{self, SmoothedConfig};
use crate::error::{Error, Result};
use crate::flow::{self, ConvexFunctional};
use crate::gaussmix::{estimate_renyi_orders, EstimatorPolicy, GaussianMixture};
use crate::geovol::{self, BallUnion, GeoVerdict};
use crate::kpverify::{self, Verdict};
use crate::minty::{self, MonotonePairs};
use crate::report::{num, opt, points, Table};

use super::config::ExperimentConfig;

/// Settings after flags have been applied over the config file.
#[derive(Debug, Clone)]
pub struct Plan {
    pub config: ExperimentConfig,
    pub policy: EstimatorPolicy,
    pub seed: u64,
    pub tol: Option<f64>,
}

#[derive(Debug, Default)]
pub struct Output {
    pub tables: Vec<(String, Table)>,
    /// Rows whose check failed.
    pub violations: usize,
    /// Rows that could not be computed.
    pub errors: usize,
}

impl Output {
    fn table(&mut self, name: &str, t: Table) {
        self.tables.push((name.to_owned(), t));
    }
}

pub fn entropy(plan: &Plan) -> Result<Output> {
    let c = &plan.config;
    let x = c.source()?;
    let orders = c.orders(&kpverify::DEFAULT_ORDERS)?;
    let mut t = Table::new(&[
        "alpha",
        "s",
        "value",
        "std_err",
        "method",
        "samples",
        "seed",
        "nodes_per_axis",
    ]);
    for s in c.noises(&[1.0]) {
        let m = GaussianMixture::isotropic(&x, s)?;
        for e in estimate_renyi_orders(&m, &orders, &plan.policy)? {
            t.push(vec![
                num(e.order),
                num(s),
                num(e.value),
                num(e.std_err),
                e.method.as_str().into(),
                opt(e.meta.samples),
                opt(e.meta.seed),
                opt(e.meta.nodes_per_axis),
            ]);
        }
    }
    let mut out = Output::default();
    out.table("entropy.csv", t);
    Ok(out)
}

pub fn kp_verify(plan: &Plan) -> Result<Output> {
    let c = &plan.config;
    let pair = c.pair(plan.seed)?;
    let orders = c.orders(&kpverify::DEFAULT_ORDERS)?;
    let noises = c.noises(&kpverify::DEFAULT_NOISES);
    let report = kpverify::verify_kp_entropy(&pair, &orders, &noises, &plan.policy)?;
    let mut t = Table::new(&[
        "alpha", "s", "h_source", "h_target", "gap", "std_err", "method", "samples", "seed",
        "verdict", "note",
    ]);
    for r in &report.rows {
        t.push(vec![
            num(r.alpha),
            num(r.s),
            num(r.h_source),
            num(r.h_target),
            num(r.gap),
            num(r.std_err),
            r.method.as_str().into(),
            opt(r.samples),
            opt(r.seed),
            r.verdict.as_str().into(),
            r.note.clone().unwrap_or_default(),
        ]);
    }
    let mut out = Output {
        violations: report.violations(),
        ..Default::default()
    };
    out.table("kp_verify.csv", t);
    Ok(out)
}

pub fn flow(plan: &Plan) -> Result<Output> {
    const DIVERGENCE_TOL: f64 = 1e-9;
    const VELOCITY_TOL: f64 = 1e-8;
    let c = &plan.config;
    let pair = c.pair(plan.seed)?;
    let fam = flow::bezdek_connelly_lift(&pair);
    let s = c.noise()?;
    let grid = flow::uniform_t_grid(c.t_points.unwrap_or(21));
    let phi = c
        .functional
        .unwrap_or(ConvexFunctional::Power { alpha: 2.0 });
    let series = flow::functional_along_flow(&fam, phi, s, &grid, &plan.policy)?;
    let band = plan.tol.unwrap_or(1e-8);
    let mut out = Output::default();
    if flow::worst_decrease(&series, band) > 0.0 {
        out.violations += 1;
    }
    let mut t = Table::new(&["functional", "t", "value", "std_err", "method"]);
    for p in &series {
        t.push(vec![
            phi.name(),
            num(p.t),
            num(p.value),
            num(p.std_err),
            p.method.as_str().into(),
        ]);
    }
    out.table("flow_functional.csv", t);

    let count = c.divergence_points.unwrap_or(20);
    let mut d = Table::new(&["t", "point", "divergence", "finite_difference", "ok"]);
    for (j, &tt) in grid.iter().enumerate() {
        let xs = flow::sample_smoothed(&fam, tt, s, count, plan.seed ^ j as u64)?;
        for (i, x) in xs.iter().enumerate() {
            let div = flow::convolved_divergence(&fam, tt, x, s)?;
            let fd = flow::finite_difference_divergence(&fam, tt, x, s, flow::DIVERGENCE_STEP)?;
            let ok = div <= DIVERGENCE_TOL;
            out.violations += usize::from(!ok);
            d.push(vec![
                num(tt),
                i.to_string(),
                num(div),
                num(fd),
                ok.to_string(),
            ]);
        }
    }
    out.table("flow_divergence.csv", d);

    let check = flow::check_contraction(&fam, &flow::uniform_t_grid(101));
    let ok = check.holds(1e-9, VELOCITY_TOL);
    out.violations += usize::from(!ok);
    let mut k = Table::new(&[
        "max_distance_increase",
        "merge_violations",
        "max_velocity_inner",
        "ok",
    ]);
    k.push(vec![
        num(check.max_distance_increase),
        check.merge_violations.to_string(),
        num(check.max_velocity_inner),
        ok.to_string(),
    ]);
    out.table("flow_contraction.csv", k);
    Ok(out)
}

fn flatten(rows: &[Vec<f64>], field: &str) -> Result<(usize, Vec<f64>)> {
    let dim = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Config(format!(
            "minty.{field}: rows differ in length"
        )));
    }
    Ok((dim, rows.concat()))
}

pub fn minty(plan: &Plan) -> Result<Output> {
    let spec = plan
        .config
        .minty
        .clone()
        .unwrap_or(super::config::MintySpec {
            xs: None,
            ys: None,
            x0: None,
            dim: None,
            k: None,
            instances: None,
        });
    let instances: Vec<(MonotonePairs, Vec<f64>)> = match (&spec.xs, &spec.ys) {
        (Some(xs), Some(ys)) => {
            let (dim, xf) = flatten(xs, "xs")?;
            let (_, yf) = flatten(ys, "ys")?;
            let pairs = MonotonePairs::new(dim, xf, yf)
                .map_err(|e| Error::Config(format!("minty: {e}")))?;
            let x0 = spec
                .x0
                .clone()
                .ok_or_else(|| Error::Config("minty: missing field `x0`".into()))?;
            vec![(pairs, x0)]
        }
        (None, None) => {
            let dim = spec.dim.unwrap_or(2);
            let k = spec.k.unwrap_or(5);
            (0..spec.instances.unwrap_or(10) as u64)
                .map(|i| {
                    let pairs = minty::random_monotone_pairs(dim, k, plan.seed.wrapping_add(i));
                    let x0 = minty::random_interior_point(&pairs, plan.seed.wrapping_add(i));
                    (pairs, x0)
                })
                .collect()
        }
        _ => {
            return Err(Error::Config(
                "minty: give both `xs` and `ys`, or neither".into(),
            ))
        }
    };
    let mut t = Table::new(&[
        "instance",
        "dim",
        "k",
        "x0",
        "y0",
        "solver",
        "iterations",
        "min_residual",
        "status",
    ]);
    let mut out = Output::default();
    for (i, (pairs, x0)) in instances.iter().enumerate() {
        let head = vec![
            i.to_string(),
            pairs.dim().to_string(),
            pairs.len().to_string(),
            points(x0, x0.len().max(1)),
        ];
        let mut row = head;
        match minty::extend_monotone_detailed(pairs, x0) {
            Ok(e) => {
                let ok = e.min_residual >= -minty::FEASIBILITY_TOL;
                out.violations += usize::from(!ok);
                row.extend([
                    points(&e.y0, e.y0.len().max(1)),
                    format!("{:?}", e.solver).to_lowercase(),
                    e.iterations.to_string(),
                    num(e.min_residual),
                    if ok { "feasible" } else { "INFEASIBLE" }.into(),
                ]);
            }
            Err(e) => {
                out.errors += 1;
                row.extend([
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    format!("error: {e}"),
                ]);
            }
        }
        t.push(row);
    }
    out.table("minty.csv", t);
    Ok(out)
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64)
        .collect()
}

pub fn costa(plan: &Plan) -> Result<Output> {
    let c = &plan.config;
    let base = c.source()?;
    let dim = base.dim();
    let s0 = c.bandwidth.unwrap_or(0.5);
    let x = SmoothedConfig::new(base, s0)?;
    let s_grid = c.s_grid.clone().unwrap_or_else(|| grid(0.25, 3.0, 12));
    let report = costa::costa_concavity_report(&x, &s_grid, &plan.policy)?;
    let mut out = Output::default();
    let mut t = Table::new(&["series", "x", "value", "std_err", "ok"]);
    for p in &report.points {
        t.push(vec![
            "entropy-power".into(),
            num(p.s),
            num(p.value),
            num(p.std_err),
            String::new(),
        ]);
    }
    for d in &report.second_differences {
        out.violations += usize::from(!d.concave);
        t.push(vec![
            "second-difference".into(),
            num(d.s),
            num(d.value),
            num(d.std_err),
            d.concave.to_string(),
        ]);
    }
    if s0 > 0.0 {
        let betas = c.beta_grid.clone().unwrap_or_else(|| grid(0.0, 1.0, 11));
        let a = costa::a_beta_series(&x, &betas, false, &plan.policy)?;
        let ok = costa::a_beta_worst_decrease(&a) == 0.0;
        out.violations += usize::from(!ok);
        for p in &a {
            t.push(vec![
                "a-beta".into(),
                num(p.beta),
                num(p.value),
                num(p.std_err),
                ok.to_string(),
            ]);
        }
    }
    out.table("costa.csv", t);
    if let Some(a) = c.map(dim)? {
        let r = costa::unified_inequality_check(&x.with_map(a)?, &plan.policy)?;
        out.violations += usize::from(r.verdict == Verdict::Violation);
        let mut u = Table::new(&[
            "lipschitz",
            "n_x_plus_z",
            "n_ax_plus_z",
            "n_x",
            "gap",
            "std_err",
            "verdict",
            "note",
        ]);
        u.push(vec![
            num(r.lipschitz),
            num(r.n_x_plus_z),
            num(r.n_ax_plus_z),
            num(r.n_x),
            num(r.gap),
            num(r.std_err),
            r.verdict.as_str().into(),
            r.note.unwrap_or_default(),
        ]);
        out.table("costa_unified.csv", u);
    }
    Ok(out)
}

fn history_rows(t: &mut Table, run: &str, r: &CapacityResult) {
    for (i, h) in r.history.iter().enumerate() {
        t.push(vec![run.into(), i.to_string(), num(h.lower), num(h.width)]);
    }
}

pub fn capacity(plan: &Plan) -> Result<Output> {
    let c = &plan.config;
    let s = c.noise()?;
    let opts = BaOptions {
        tol: plan.tol.unwrap_or(capacity::DEFAULT_TOL),
        max_iter: c.max_iter.unwrap_or(capacity::DEFAULT_MAX_ITER),
        policy: plan.policy,
    };
    let mut out = Output::default();
    let mut hist = Table::new(&["run", "iteration", "lower", "width"]);
    let mut res = Table::new(&[
        "run",
        "s",
        "capacity",
        "lower",
        "upper",
        "converged",
        "iterations",
        "weights",
    ]);
    let mut push = |name: &str, r: &CapacityResult, hist: &mut Table| {
        history_rows(hist, name, r);
        res.push(vec![
            name.into(),
            num(r.s),
            num(r.capacity),
            num(r.lower),
            num(r.upper),
            r.converged.to_string(),
            r.history.len().to_string(),
            points(&r.weights, 1).replace("; ", " "),
        ]);
    };
    if c.has_pair() {
        let pair = c.pair(plan.seed)?;
        let src = capacity::blahut_arimoto(pair.source(), s, &opts)?;
        let tgt = capacity::blahut_arimoto(pair.target(), s, &opts)?;
        push("source", &src, &mut hist);
        push("target", &tgt, &mut hist);
        let chk = capacity::capacity_contraction_check(&pair, s, &opts)?;
        out.violations += usize::from(chk.verdict == Verdict::Violation);
        let mut t = Table::new(&[
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
        ]);
        t.push(vec![
            num(chk.s),
            num(chk.c_source),
            num(chk.c_target),
            num(chk.gap),
            num(chk.bracket_source),
            num(chk.bracket_target),
            chk.verdict.as_str().into(),
            num(chk.pointwise_source),
            num(chk.pointwise_target),
            chk.pointwise_holds.to_string(),
        ]);
        out.table("capacity_check.csv", t);
    } else {
        let r = capacity::blahut_arimoto(&c.source()?, s, &opts)?;
        push("source", &r, &mut hist);
    }
    out.table("capacity.csv", res);
    out.table("capacity_history.csv", hist);
    Ok(out)
}

pub fn volume(plan: &Plan) -> Result<Output> {
    let c = &plan.config;
    let r = c.radius.unwrap_or(1.0);
    let samples = plan.policy.samples;
    let mut out = Output::default();
    if c.has_pair() {
        let pair = c.pair(plan.seed)?;
        let chk = geovol::kp_geometric_check(&pair, r, samples, plan.seed)?;
        out.violations += usize::from(chk.verdict == GeoVerdict::Inconsistent);
        let mut t = Table::new(&[
            "radius",
            "vol_source",
            "vol_target",
            "std_err_source",
            "std_err_target",
            "gap",
            "std_err",
            "samples",
            "seed",
            "verdict",
            "status",
        ]);
        t.push(vec![
            num(r),
            num(chk.vol_source),
            num(chk.vol_target),
            num(chk.std_err_source),
            num(chk.std_err_target),
            num(chk.gap),
            num(chk.std_err),
            samples.to_string(),
            plan.seed.to_string(),
            chk.verdict.as_str().into(),
            chk.status.as_str().into(),
        ]);
        out.table("volume_check.csv", t);
    } else {
        let u = BallUnion::from_config(&c.source()?, r)?;
        let e = geovol::union_volume_mc(&u, samples, plan.seed)?;
        let mut t = Table::new(&["radius", "volume", "std_err", "samples", "seed"]);
        t.push(vec![
            num(r),
            num(e.volume),
            num(e.std_err),
            samples.to_string(),
            plan.seed.to_string(),
        ]);
        out.table("volume.csv", t);
    }
    Ok(out)
}
