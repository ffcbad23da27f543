//! One function per experiment. Each turns a validated config into metric
//! rows, verdicts that can be recomputed from those rows, fitted constants
//! and optional plot series.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use spline_martingale::convergence::{
    build_limit_basis, coefficient_defect, make_martingale, points_off_support, predicted_limit, project_spline,
    singular_decay_experiment, LimitBasis, LimitConfig, Source, Thresholds,
};
use spline_martingale::functions::MeasureSpec;
use spline_martingale::gram::{fit_decay, scaled_offset_maxima, DualBasis};
use spline_martingale::projection::{
    check_maximal_inequality, default_scales, jackson_check, shadrin_probe, ModulusLattice, Projector, TREND_FACTOR,
};
use spline_martingale::{KnotProgram, Spline, SplineSpace};

use crate::config::{default_function, Experiment, PointsField, Validated};

/// One line of results.csv.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub n: Option<usize>,
    pub dim: Option<usize>,
    pub index: Option<usize>,
    pub t: Option<f64>,
    pub metric: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Cmp {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

impl Cmp {
    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Ge => ">=",
        }
    }
}

/// `value cmp threshold`, where `value` is `rule` applied to the rows of
/// `metric`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub metric: String,
    pub rule: String,
    pub value: f64,
    pub comparison: Cmp,
    pub threshold: f64,
    pub pass: bool,
}

fn verdict(name: impl Into<String>, metric: &str, rule: &str, value: f64, comparison: Cmp, threshold: f64) -> Verdict {
    let pass = match comparison {
        Cmp::Lt => value < threshold,
        Cmp::Le => value <= threshold,
        Cmp::Ge => value >= threshold,
    };
    Verdict {
        name: name.into(),
        metric: metric.into(),
        rule: rule.into(),
        value,
        comparison,
        threshold,
        pass,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub rows: Vec<Row>,
    pub verdicts: Vec<Verdict>,
    pub fitted: BTreeMap<String, Value>,
    pub plots: Vec<Plot>,
    /// Numerical failure that stopped the run.
    pub error: Option<String>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.error.is_none() && !self.verdicts.is_empty() && self.verdicts.iter().all(|v| v.pass)
    }

    fn row(&mut self, n: usize, dim: usize, metric: &'static str, value: f64) {
        self.rows.push(Row {
            n: Some(n),
            dim: Some(dim),
            index: None,
            t: None,
            metric,
            value,
        });
    }

    fn point_row(&mut self, n: usize, dim: usize, t: f64, metric: &'static str, value: f64) {
        self.rows.push(Row {
            n: Some(n),
            dim: Some(dim),
            index: None,
            t: Some(t),
            metric,
            value,
        });
    }

    fn values(&self, metric: &str) -> impl Iterator<Item = f64> + '_ {
        let metric = metric.to_string();
        self.rows.iter().filter(move |r| r.metric == metric).map(|r| r.value)
    }

    fn max(&self, metric: &str) -> f64 {
        self.values(metric).fold(f64::NEG_INFINITY, f64::max)
    }

    fn min(&self, metric: &str) -> f64 {
        self.values(metric).fold(f64::INFINITY, f64::min)
    }
}

type Run = std::result::Result<(), String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Runs the experiment. Numerical failures are kept in `Outcome::error`
/// together with the rows computed before them.
pub fn run(v: &Validated, seed: u64) -> Outcome {
    let mut out = Outcome::default();
    let result = match v.config.experiment {
        Experiment::GramDecay => gram_decay(v, &mut out),
        Experiment::Project => project(v, &mut out),
        Experiment::Jackson => jackson(v, &mut out),
        Experiment::Maximal => maximal(v, seed, &mut out),
        Experiment::TowerCheck => tower_check(v, &mut out),
        Experiment::ShadrinProbe => shadrin(v, &mut out),
        Experiment::SingularDecay => singular(v, seed, &mut out),
        Experiment::Converge => converge(v, seed, &mut out),
        Experiment::LimitConstruct => limit_construct(v, seed, &mut out),
    };
    if let Err(e) = result {
        out.error = Some(e);
    }
    out
}

fn space(program: &KnotProgram, n: usize) -> std::result::Result<SplineSpace, String> {
    Ok(SplineSpace::from_grid(&program.realize(n).map_err(err)?))
}

/// `(i + 1/2) / count` midpoints, an explicit list, or seeded draws.
fn points(field: &Option<PointsField>, seed: u64, default: impl FnOnce() -> Vec<f64>) -> Vec<f64> {
    let midpoints = |c: usize| (0..c).map(|i| (i as f64 + 0.5) / c as f64).collect();
    match field {
        None => default(),
        Some(PointsField::List(p)) => p.clone(),
        Some(PointsField::Count(c)) => midpoints(*c),
        Some(PointsField::Random { random }) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p: Vec<f64> = (0..*random).map(|_| rng.random_range(0.0..=1.0)).collect();
            p.sort_by(f64::total_cmp);
            p
        }
    }
}

/// Samples of a spline on `m + 1` equispaced points, one row `[n, t, values...]`.
fn sample(n: usize, s: &Spline, m: usize, rows: &mut Vec<Vec<f64>>) {
    for i in 0..=m {
        let t = i as f64 / m as f64;
        let mut row = vec![n as f64, t];
        row.extend(s.eval(t));
        rows.push(row);
    }
}

fn value_columns(d: usize) -> Vec<String> {
    (0..d).map(|c| format!("value_{c}")).collect()
}

fn gram_decay(v: &Validated, out: &mut Outcome) -> Run {
    let tol = &v.config.tolerances;
    let mut offsets = Vec::new();
    let mut fits = Vec::new();
    for &n in &v.config.n_schedule {
        let s = space(&v.program, n)?;
        let duals = DualBasis::new(&s).map_err(err)?;
        let fit = fit_decay(&s, &duals).map_err(err)?;
        out.row(n, s.dim(), "q_hat", fit.q_hat);
        out.row(n, s.dim(), "c_hat", fit.c_hat);
        out.row(n, s.dim(), "mesh", s.mesh_width());
        if let Some(a) = duals.dense() {
            for (m, r) in scaled_offset_maxima(&s, a).into_iter().enumerate() {
                offsets.push(vec![n as f64, m as f64, r]);
            }
        }
        fits.push(json!({"n": n, "dim": s.dim(), "q_hat": fit.q_hat, "c_hat": fit.c_hat}));
    }
    let (q_max, q_min) = (out.max("q_hat"), out.min("q_hat"));
    out.verdicts.push(verdict("q_hat below one", "q_hat", "max", q_max, Cmp::Lt, 1.0));
    out.verdicts.push(verdict(
        "q_hat stable across n",
        "q_hat",
        "max - min",
        q_max - q_min,
        Cmp::Le,
        tol.q_spread.unwrap_or(0.1),
    ));
    if let Some(expected) = tol.q_expected {
        let dev = out.values("q_hat").map(|q| (q - expected).abs()).fold(0.0, f64::max);
        out.verdicts.push(verdict(
            format!("q_hat near {expected}"),
            "q_hat",
            &format!("max |q_hat - {expected}|"),
            dev,
            Cmp::Le,
            tol.q_tol.unwrap_or(0.02),
        ));
    }
    out.fitted.insert("fits".into(), Value::Array(fits));
    out.fitted.insert("c_hat_max".into(), json!(out.max("c_hat")));
    out.fitted.insert("q_hat_max".into(), json!(q_max));
    out.plots.push(Plot {
        name: "offset_maxima".into(),
        columns: vec!["n".into(), "offset".into(), "scaled_max".into()],
        rows: offsets,
    });
    Ok(())
}

fn project(v: &Validated, out: &mut Outcome) -> Run {
    let source = v.source().expect("validated");
    let depth = v.config.quad_depth;
    let mut samples = Vec::new();
    for &n in &v.config.n_schedule {
        let s = space(&v.program, n)?;
        let projector = Projector::new(&s).map_err(err)?;
        let g = source.project(&projector, depth).map_err(err)?;
        let again = project_spline(&projector, &g).map_err(err)?;
        out.row(n, s.dim(), "idempotency", coefficient_defect(again.coeffs(), g.coeffs()));
        out.row(n, s.dim(), "l1_norm", g.l1_norm(8));
        if let Source::LimitFunction { function } = &source {
            out.row(n, s.dim(), "sup_error", g.sup_norm_of(|t| Some(function.eval(t))));
        }
        sample(n, &g, 200, &mut samples);
    }
    out.verdicts.push(verdict(
        "projection is idempotent",
        "idempotency",
        "max",
        out.max("idempotency"),
        Cmp::Le,
        v.config.tolerances.idempotency.unwrap_or(1e-10),
    ));
    let mut columns = vec!["n".into(), "t".into()];
    columns.extend(value_columns(source.dim()));
    out.plots.push(Plot {
        name: "projection".into(),
        columns,
        rows: samples,
    });
    Ok(())
}

fn spaces(v: &Validated) -> std::result::Result<Vec<(usize, SplineSpace)>, String> {
    v.config.n_schedule.iter().map(|&n| Ok((n, space(&v.program, n)?))).collect()
}

fn jackson(v: &Validated, out: &mut Outcome) -> Run {
    let f = v.config.function.clone().unwrap_or_else(default_function);
    let rows = jackson_check(&spaces(v)?, &f, v.config.quad_depth, ModulusLattice::default()).map_err(err)?;
    let dims: Vec<usize> = spaces(v)?.iter().map(|s| s.1.dim()).collect();
    for (r, &dim) in rows.iter().zip(&dims) {
        out.row(r.n, dim, "mesh", r.mesh);
        out.row(r.n, dim, "error", r.error);
        out.row(r.n, dim, "omega", r.omega);
        match r.ratio {
            Some(ratio) => out.row(r.n, dim, "ratio", ratio),
            None => out.row(r.n, dim, "reproduced_error", r.error),
        }
    }
    if out.values("ratio").next().is_some() {
        out.verdicts.push(verdict(
            "error tracks the modulus",
            "ratio",
            "max / min",
            out.max("ratio") / out.min("ratio"),
            Cmp::Le,
            v.config.tolerances.ratio_spread.unwrap_or(10.0),
        ));
    }
    if out.values("reproduced_error").next().is_some() {
        out.verdicts.push(verdict(
            "members of the space are reproduced",
            "reproduced_error",
            "max",
            out.max("reproduced_error"),
            Cmp::Le,
            v.config.tolerances.idempotency.unwrap_or(1e-9),
        ));
    }
    Ok(())
}

/// Last value over the largest of the first half, the quantity behind the
/// no-upward-trend rule.
fn trend(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let head = values[..values.len().div_ceil(2)].iter().copied().fold(0.0, f64::max);
    values[values.len() - 1] / head
}

fn maximal(v: &Validated, seed: u64, out: &mut Outcome) -> Run {
    let g = v.config.function.clone().expect("validated");
    let pts = points(&v.config.points, seed, || points(&Some(PointsField::Count(20)), 0, Vec::new));
    let spaces = spaces(v)?;
    let rep = check_maximal_inequality(&spaces, &g, &pts, &default_scales(10), 16, v.config.quad_depth).map_err(err)?;
    for r in &rep.rows {
        let dim = spaces.iter().find(|s| s.0 == r.n).map_or(0, |s| s.1.dim());
        out.point_row(r.n, dim, r.t, "projection_norm", r.projection_norm);
        out.point_row(r.n, dim, r.t, "maximal", r.maximal);
        out.point_row(r.n, dim, r.t, "ratio", r.ratio);
    }
    let per_n: Vec<f64> = rep.per_n.iter().map(|p| p.1).collect();
    out.verdicts.push(verdict(
        "no upward trend in n",
        "ratio",
        "max over t per n; last / max of first half",
        trend(&per_n),
        Cmp::Le,
        TREND_FACTOR,
    ));
    if let Some(c) = v.config.tolerances.max_constant {
        out.verdicts.push(verdict("maximal constant", "ratio", "max", rep.constant, Cmp::Le, c));
    }
    out.fitted.insert("constant".into(), json!(rep.constant));
    Ok(())
}

fn tower_check(v: &Validated, out: &mut Outcome) -> Run {
    let source = v.source().expect("validated");
    let mart = make_martingale(&v.program, source, &v.config.n_schedule, v.config.quad_depth).map_err(err)?;
    for m in &mart.members {
        out.row(m.n, m.projector.space().dim(), "l1_norm", m.g.l1_norm(8));
    }
    for c in &mart.consistency {
        let dim = mart.member(c.n).map_or(0, |m| m.projector.space().dim());
        out.rows.push(Row {
            n: Some(c.n),
            dim: Some(dim),
            index: Some(c.m),
            t: None,
            metric: "tower_defect",
            value: c.defect,
        });
    }
    out.verdicts.push(verdict(
        "P_m g_n = g_m on all pairs",
        "tower_defect",
        "max",
        out.max("tower_defect"),
        Cmp::Le,
        v.config.tolerances.tower.unwrap_or(1e-9),
    ));
    Ok(())
}

fn shadrin(v: &Validated, out: &mut Outcome) -> Run {
    let mut ratios = Vec::new();
    for &n in &v.config.n_schedule {
        let s = space(&v.program, n)?;
        let probe = shadrin_probe(&Projector::new(&s).map_err(err)?, 0.05, 16, v.config.quad_depth).map_err(err)?;
        out.row(n, s.dim(), "l1_ratio", probe.ratio);
        out.row(n, s.dim(), "worst_center", probe.center);
        ratios.push(probe.ratio);
    }
    // P_n preserves the integral, so no bump can do better than ratio 1
    out.verdicts.push(verdict("ratio at least one", "l1_ratio", "min", out.min("l1_ratio"), Cmp::Ge, 1.0 - 1e-10));
    out.verdicts.push(verdict(
        "no upward trend in n",
        "l1_ratio",
        "last / max of first half",
        trend(&ratios),
        Cmp::Le,
        TREND_FACTOR,
    ));
    if let Some(c) = v.config.tolerances.max_constant {
        out.verdicts.push(verdict("bounded ratio", "l1_ratio", "max", out.max("l1_ratio"), Cmp::Le, c));
    }
    Ok(())
}

fn singular(v: &Validated, seed: u64, out: &mut Outcome) -> Run {
    let nu = v.config.measure.clone().unwrap_or_else(|| MeasureSpec::dirac(1.0 / 3.0, vec![1.0]));
    let margin = v.config.tolerances.margin.unwrap_or(0.05);
    let pts = points(&v.config.points, seed, || points_off_support(&nu, margin, 20));
    if pts.is_empty() {
        return Err(format!("no sample points at distance {margin} from the singular support"));
    }
    let rep = singular_decay_experiment(&v.program, &nu, &v.config.n_schedule, &pts, v.config.quad_depth).map_err(err)?;
    let dims: BTreeMap<usize, usize> = v
        .config
        .n_schedule
        .iter()
        .map(|&n| Ok((n, space(&v.program, n)?.dim())))
        .collect::<std::result::Result<_, String>>()?;
    for r in &rep.rows {
        out.point_row(r.n, dims[&r.n], r.point, "value", r.value);
        out.point_row(r.n, dims[&r.n], r.point, "majorant", r.majorant);
        out.point_row(r.n, dims[&r.n], r.point, "excess", r.value - r.majorant);
    }
    out.verdicts.push(verdict(
        "decay between first and last n",
        "value",
        "min over t of value(first n) / value(last n)",
        rep.min_drop,
        Cmp::Ge,
        spline_martingale::convergence::REQUIRED_DROP,
    ));
    out.verdicts.push(verdict(
        "dominated by the decay majorant",
        "excess",
        "max",
        out.max("excess"),
        Cmp::Le,
        1e-12 * nu.total_variation(),
    ));
    out.fitted.insert("c_hat".into(), json!(rep.c_hat));
    out.fitted.insert("q_hat".into(), json!(rep.q_hat));
    Ok(())
}

fn limit_config(v: &Validated) -> LimitConfig {
    let tol = &v.config.tolerances;
    let d = LimitConfig::default();
    LimitConfig {
        schedule: v.config.n_schedule.clone(),
        tol: tol.stabilization.unwrap_or(d.tol),
        gap_tol: tol.gap.unwrap_or(d.gap_tol),
        ..d
    }
}

fn limit_bases(v: &Validated) -> std::result::Result<Vec<LimitBasis>, String> {
    let d = v.program.decompose().map_err(err)?;
    let cfg = limit_config(v);
    (0..d.components.len())
        .map(|j| build_limit_basis(&v.program, j, &cfg).map_err(err))
        .collect()
}

/// The decay ratio is 0 for k = 1, where duals do not spread at all; the
/// certificate then needs only some ratio in (0, 1).
fn usable_q(q: f64) -> f64 {
    q.max(f64::EPSILON)
}

fn converge(v: &Validated, seed: u64, out: &mut Outcome) -> Run {
    let source = v.source().expect("validated");
    let mart = make_martingale(&v.program, source, &v.config.n_schedule, v.config.quad_depth).map_err(err)?;
    let d = v.program.decompose().map_err(err)?;
    let bases = limit_bases(v)?;
    let last = &mart.last().projector;
    let fit = fit_decay(last.space(), last.duals()).map_err(err)?;
    let pl = predicted_limit(&mart, &d, &bases, fit.c_hat, usable_q(fit.q_hat)).map_err(err)?;
    let pts = points(&v.config.points, seed, || points(&Some(PointsField::Count(20)), 0, Vec::new));
    let defaults = Thresholds::default();
    let thresholds = Thresholds {
        final_gap: v.config.tolerances.final_gap.unwrap_or(defaults.final_gap),
        certificate: v.config.tolerances.certificate.unwrap_or(defaults.certificate),
    };
    let rep = pl.report(&mart, &pts, thresholds);
    let last_n = *v.config.n_schedule.last().expect("non-empty");
    for r in &rep.rows {
        let dim = mart.member(r.n).map_or(0, |m| m.projector.space().dim());
        out.point_row(r.n, dim, r.point, "gap", r.gap);
        if r.n == last_n {
            out.point_row(r.n, dim, r.point, "final_gap", r.gap);
            out.point_row(r.n, dim, r.point, "certificate", r.bound);
        }
    }
    if rep.points.is_empty() {
        return Err("the limit is undefined at every requested point".into());
    }
    out.verdicts.push(verdict("gap at the last n", "final_gap", "max", rep.max_final_gap, Cmp::Le, thresholds.final_gap));
    out.verdicts.push(verdict(
        "truncation certificate",
        "certificate",
        "max",
        rep.max_bound,
        Cmp::Le,
        thresholds.certificate,
    ));
    out.fitted.insert("c_hat".into(), json!(fit.c_hat));
    out.fitted.insert("q_hat".into(), json!(fit.q_hat));
    out.fitted.insert("skipped_points".into(), json!(rep.skipped));
    out.fitted.insert("max_tower_defect".into(), json!(mart.max_consistency_defect()));
    Ok(())
}

fn limit_construct(v: &Validated, seed: u64, out: &mut Outcome) -> Run {
    let bases = limit_bases(v)?;
    if bases.is_empty() {
        return Err("the knot sequence accumulates everywhere; there is no interval to build a limit basis on".into());
    }
    let mut summaries = Vec::new();
    for b in &bases {
        for step in &b.steps {
            let mut push = |metric, value| {
                out.rows.push(Row {
                    n: Some(step.n),
                    dim: Some(step.local_dim),
                    index: Some(b.j0),
                    t: None,
                    metric,
                    value,
                })
            };
            if let Some(d) = step.consecutive_defect {
                push("consecutive_defect", d);
            }
            push("defect_to_final", step.defect_to_final);
            push("restriction_gap", step.restriction_gap);
        }
        let dim = b.local_space.dim();
        let mut push = |metric, value| {
            out.rows.push(Row {
                n: Some(b.final_n),
                dim: Some(dim),
                index: Some(b.j0),
                t: None,
                metric,
                value,
            })
        };
        push("stabilized", if b.stabilized { 1.0 } else { 0.0 });
        push("biorthogonality", b.biorthogonality_defect());
        summaries.push(json!({
            "j0": b.j0,
            "interval": [b.component.lo, b.component.hi],
            "compact": [b.compact.0, b.compact.1],
            "stabilization_n": b.stabilization_n,
            "stabilized": b.stabilized,
            "budget_report": b.budget_report,
            "final_n": b.final_n,
        }));
    }
    out.verdicts.push(verdict("every interval stabilized", "stabilized", "min", out.min("stabilized"), Cmp::Ge, 1.0));
    out.verdicts.push(verdict(
        "limit duals are biorthogonal",
        "biorthogonality",
        "max",
        out.max("biorthogonality"),
        Cmp::Le,
        v.config.tolerances.biorthogonality.unwrap_or(1e-9),
    ));
    out.fitted.insert("intervals".into(), Value::Array(summaries));

    let source = v.source().expect("validated");
    let mart = make_martingale(&v.program, source, &v.config.n_schedule, v.config.quad_depth).map_err(err)?;
    let last = &mart.last().projector;
    let fit = fit_decay(last.space(), last.duals()).map_err(err)?;
    let d = v.program.decompose().map_err(err)?;
    let pl = predicted_limit(&mart, &d, &bases, fit.c_hat, usable_q(fit.q_hat)).map_err(err)?;
    let pts = points(&v.config.points, seed, || (0..=200).map(|i| i as f64 / 200.0).collect());
    let mut rows = Vec::new();
    for t in pts {
        if let Some((value, cert)) = pl.eval(t) {
            let mut row = vec![t, cert];
            row.extend(mart.last().g.eval(t));
            row.extend(value);
            rows.push(row);
        }
    }
    let dim = mart.source.dim();
    let mut columns = vec!["t".to_string(), "certificate".into()];
    columns.extend((0..dim).map(|c| format!("g_last_{c}")));
    columns.extend((0..dim).map(|c| format!("limit_{c}")));
    out.plots.push(Plot {
        name: "predicted_limit".into(),
        columns,
        rows,
    });
    Ok(())
}
