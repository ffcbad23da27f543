//! Catalog of the names accepted in config files.

use serde::Serialize;

use crate::config::Experiment;

#[derive(Debug, Clone, Serialize)]
pub struct Param {
    pub name: &'static str,
    #[serde(rename = "type")]
    pub ty: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub default: Option<&'static str>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Entry {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: Vec<Param>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Catalog {
    /// Tagged by `"family"` under the `knots` key.
    pub knot_families: Vec<Entry>,
    /// Tagged by `"name"`; `{"components": [...]}` makes a vector function.
    pub functions: Vec<Entry>,
    /// Fields of a `measure` record; all optional.
    pub measures: Vec<Entry>,
    pub experiments: Vec<Entry>,
}

fn p(name: &'static str, ty: &'static str) -> Param {
    Param { name, ty, default: None }
}

fn pd(name: &'static str, ty: &'static str, default: &'static str) -> Param {
    Param {
        name,
        ty,
        default: Some(default),
    }
}

fn e(name: &'static str, summary: &'static str, params: Vec<Param>) -> Entry {
    Entry { name, summary, params }
}

pub fn catalog() -> Catalog {
    let knot_families = vec![
        e("explicit-list", "finite list of knots in insertion order", vec![p("knots", "[number]")]),
        e(
            "uniform-dense",
            "n equispaced interior knots; not nested, single-grid experiments only (shorthand \"uniform\")",
            vec![],
        ),
        e("dyadic-dense", "1/2, 1/4, 3/4, 1/8, ... (shorthand \"dyadic\")", vec![]),
        e(
            "geometric-to-point",
            "knots converging geometrically to target",
            vec![
                p("target", "number in (0,1)"),
                p("ratio", "number in (0,1)"),
                pd("side", "left|right|both", "left"),
            ],
        ),
        e(
            "dense-in-subinterval",
            "dyadic enumeration mapped onto (a, b)",
            vec![p("a", "number"), p("b", "number")],
        ),
        e("concatenation", "round-robin interleaving of families", vec![p("parts", "[knot family]")]),
    ];
    let functions = vec![
        e("constant", "constant value", vec![p("value", "number")]),
        e("polynomial", "sum of coeffs[j] t^j", vec![p("coeffs", "[number]")]),
        e(
            "sin2pi",
            "amplitude sin(2 pi (freq t + phase))",
            vec![pd("freq", "number", "1"), pd("phase", "number", "0"), pd("amplitude", "number", "1")],
        ),
        e(
            "step",
            "left on [0, at), right on [at, 1]",
            vec![p("at", "number"), pd("left", "number", "0"), pd("right", "number", "1")],
        ),
        e("indicator", "indicator of [a, b)", vec![p("a", "number"), p("b", "number")]),
        e("abs-centered", "|t - center|", vec![pd("center", "number", "0.5")]),
        e(
            "bump",
            "smooth compactly supported bump",
            vec![p("center", "number"), p("width", "number"), pd("height", "number", "1")],
        ),
        e("cantor-devil-staircase", "the Cantor function", vec![]),
        e("sum", "pointwise sum", vec![p("terms", "[function]")]),
        e("spline", "explicit spline {\"spline\": {order, knots, coeffs}}", vec![p("spline", "object")]),
    ];
    let measures = vec![
        e("density", "absolutely continuous part g dt", vec![p("density", "function")]),
        e(
            "atoms",
            "point masses",
            vec![p("atoms", "[{location: number, weight: [number]}]")],
        ),
        e(
            "cantor-measure",
            "weight times the Cantor measure, under \"singular\"",
            vec![p("level", "integer"), p("weight", "[number]")],
        ),
    ];
    let experiments = Experiment::ALL
        .iter()
        .map(|x| {
            let summary = match x {
                Experiment::GramDecay => "fit q_hat, C_hat of the Gram-inverse decay for each n",
                Experiment::Project => "project a function or measure; idempotency and error per n",
                Experiment::Jackson => "approximation error against the modulus of smoothness",
                Experiment::Maximal => "pointwise |P_n g| against the maximal function",
                Experiment::TowerCheck => "P_m g_n = g_m on all schedule pairs",
                Experiment::ShadrinProbe => "lower estimate of the L1 operator norm per n",
                Experiment::SingularDecay => "decay of projections of a singular measure off its support",
                Experiment::Converge => "pointwise gaps to the predicted limit",
                Experiment::LimitConstruct => "limit B-splines and their stabilization on each interval",
            };
            e(x.name(), summary, vec![])
        })
        .collect();
    Catalog {
        knot_families,
        functions,
        measures,
        experiments,
    }
}

pub fn render_text(c: &Catalog) -> String {
    let mut out = String::new();
    let sections = [
        ("knot families", &c.knot_families),
        ("functions", &c.functions),
        ("measures", &c.measures),
        ("experiments", &c.experiments),
    ];
    for (title, entries) in sections {
        out.push_str(title);
        out.push_str(":\n");
        for entry in entries {
            out.push_str(&format!("  {:<24} {}\n", entry.name, entry.summary));
            for param in &entry.params {
                match param.default {
                    Some(d) => out.push_str(&format!("      {}: {} = {}\n", param.name, param.ty, d)),
                    None => out.push_str(&format!("      {}: {}\n", param.name, param.ty)),
                }
            }
        }
    }
    out
}
