//! Closed-form test functions, vector-valued function specs and
//! pre-decomposed finite measures on `[0, 1]`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::basis::Spline;
use crate::error::{Error, Result};
use crate::quadrature::{self, CantorRule, GaussLegendre};

/// Scalar closed forms, selected by name in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum ScalarFn {
    Constant {
        value: f64,
    },
    /// `Σ_j coeffs[j] t^j`.
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// `amplitude · sin(2π (freq t + phase))`.
    Sin2pi {
        #[serde(default = "one")]
        freq: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `left` on `[0, at)`, `right` on `[at, 1]`.
    Step {
        at: f64,
        #[serde(default)]
        left: f64,
        #[serde(default = "one")]
        right: f64,
    },
    /// Indicator of `[a, b)`.
    Indicator {
        a: f64,
        b: f64,
    },
    /// `|t - center|`.
    AbsCentered {
        #[serde(default = "half")]
        center: f64,
    },
    /// Smooth bump `height · exp(1 - 1/(1 - u²))`, `u = 2(t - center)/width`.
    Bump {
        center: f64,
        width: f64,
        #[serde(default = "one")]
        height: f64,
    },
    /// Cantor function.
    CantorDevilStaircase,
    Sum {
        terms: Vec<ScalarFn>,
    },
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

/// `∫_{-1}^{1} exp(1 - 1/(1 - u²)) du`.
fn bump_profile_integral() -> f64 {
    static VALUE: OnceLock<f64> = OnceLock::new();
    *VALUE.get_or_init(|| {
        let rule = GaussLegendre::cached(20);
        quadrature::composite(-1.0, 1.0, &[0.0], 64, rule, bump_profile)
    })
}

fn bump_profile(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

/// Depth of the discrete Cantor functional behind the devil's staircase in
/// integrals: `C` is replaced by the distribution function of the level-34
/// cell rule, which is within `2^{-34}` of `C`.
pub const STAIRCASE_DEPTH: u32 = 34;

/// Gauss–Legendre nodes per panel for integrands `f·w` with `w` polynomial
/// of degree `< degree`.
pub(crate) fn weighted_rule_nodes(degree: usize) -> usize {
    (degree + 16).min(48)
}

/// `∫_a^b F w_j dλ` for the staircase `F(x) = μ_L([0, x])`, by parts:
/// `W_j(b) F(b) − ∫_{[a,b]} W_j dμ_L` with `W_j` the primitive of `w_j`
/// vanishing at `a`. Exact for polynomial `w_j`, so integrals over adjacent
/// intervals add up.
fn staircase_against(w: &dyn Fn(f64, f64, &mut [f64]), m: usize, degree: usize, a: f64, b: f64, out: &mut [f64]) {
    let gl = GaussLegendre::cached(degree.div_ceil(2) + 1);
    let rule = CantorRule::new(degree + 1);
    let mut buf = vec![0.0; m];
    let mut primitive = |x: f64, j: usize| -> f64 {
        if x <= a {
            return 0.0;
        }
        gl.offsets(x - a)
            .map(|(u, ws)| {
                w(a + u, u, &mut buf);
                ws * buf[j]
            })
            .sum()
    };
    let below = quadrature::cantor_integral(&mut |_| 1.0, &[], 0.0, b, STAIRCASE_DEPTH, &rule);
    for (j, o) in out.iter_mut().enumerate().take(m) {
        let at_b = primitive(b, j);
        let inner = quadrature::cantor_integral(&mut |x| primitive(x, j), &[], a, b, STAIRCASE_DEPTH, &rule);
        *o += at_b * below - inner;
    }
}

impl ScalarFn {
    /// Bump with unit integral.
    pub fn unit_bump(center: f64, width: f64) -> Self {
        ScalarFn::Bump {
            center,
            width,
            height: 2.0 / (width * bump_profile_integral()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match self {
            ScalarFn::Polynomial { coeffs } if coeffs.is_empty() => {
                bad("polynomial needs at least one coefficient".into())
            }
            ScalarFn::Indicator { a, b } if !(a < b) => bad(format!("indicator [{a}, {b}) is empty")),
            ScalarFn::Bump { width, .. } if !(*width > 0.0) => {
                bad(format!("bump width {width} must be positive"))
            }
            ScalarFn::Sum { terms } => terms.iter().try_for_each(ScalarFn::validate),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ScalarFn::Constant { value } => *value,
            ScalarFn::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c),
            ScalarFn::Sin2pi {
                freq,
                phase,
                amplitude,
            } => amplitude * (2.0 * std::f64::consts::PI * (freq * t + phase)).sin(),
            ScalarFn::Step { at, left, right } => {
                if t < *at {
                    *left
                } else {
                    *right
                }
            }
            ScalarFn::Indicator { a, b } => {
                if t >= *a && t < *b {
                    1.0
                } else {
                    0.0
                }
            }
            ScalarFn::AbsCentered { center } => (t - center).abs(),
            ScalarFn::Bump {
                center,
                width,
                height,
            } => height * bump_profile(2.0 * (t - center) / width),
            ScalarFn::CantorDevilStaircase => quadrature::cantor_function(t),
            ScalarFn::Sum { terms } => terms.iter().map(|f| f.eval(t)).sum(),
        }
    }

    /// Adds `∫_a^b f w_j dλ` to `out[j]` for the `m` weights `w`, each a
    /// polynomial of degree `< degree` on `[a, b]`.
    pub fn integrate_against(
        &self,
        w: &dyn Fn(f64, f64, &mut [f64]),
        m: usize,
        degree: usize,
        a: f64,
        b: f64,
        panels: usize,
        out: &mut [f64],
    ) {
        if !(b > a) {
            return;
        }
        match self {
            ScalarFn::Sum { terms } => {
                for f in terms {
                    f.integrate_against(w, m, degree, a, b, panels, out);
                }
            }
            ScalarFn::CantorDevilStaircase => staircase_against(w, m, degree, a, b, out),
            _ => {
                let rule = GaussLegendre::cached(weighted_rule_nodes(degree));
                let mut cuts = vec![a];
                cuts.extend(self.breakpoints().into_iter().filter(|&x| x > a && x < b));
                cuts.push(b);
                cuts.sort_by(f64::total_cmp);
                let mut buf = vec![0.0; m];
                let panels = panels.max(1);
                for piece in cuts.windows(2) {
                    // offsets from `a` keep the weights accurate on tiny intervals
                    let (start, end) = (piece[0] - a, piece[1] - a);
                    let h = (end - start) / panels as f64;
                    for p in 0..panels {
                        let lo = start + h * p as f64;
                        let len = if p + 1 == panels { end - lo } else { h };
                        for (off, wx) in rule.offsets(len) {
                            let u = lo + off;
                            let v = wx * self.eval(a + u);
                            if v == 0.0 {
                                continue;
                            }
                            w(a + u, u, &mut buf);
                            for (o, b) in out.iter_mut().zip(&buf) {
                                *o += v * b;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Points where the function or one of its derivatives jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            ScalarFn::Step { at, .. } => vec![*at],
            ScalarFn::Indicator { a, b } => vec![*a, *b],
            ScalarFn::AbsCentered { center } => vec![*center],
            ScalarFn::Bump { center, width, .. } => {
                vec![center - 0.5 * width, *center, center + 0.5 * width]
            }
            ScalarFn::Sum { terms } => terms.iter().flat_map(ScalarFn::breakpoints).collect(),
            _ => Vec::new(),
        }
    }
}

/// A bounded function `[0, 1] → R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionSpec {
    Spline { spline: Spline },
    Components { components: Vec<ScalarFn> },
    Scalar(ScalarFn),
}

impl From<ScalarFn> for FunctionSpec {
    fn from(f: ScalarFn) -> Self {
        FunctionSpec::Scalar(f)
    }
}

impl From<Spline> for FunctionSpec {
    fn from(spline: Spline) -> Self {
        FunctionSpec::Spline { spline }
    }
}

impl FunctionSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            FunctionSpec::Scalar(f) => f.validate(),
            FunctionSpec::Components { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidArgument("no components".into()));
                }
                components.iter().try_for_each(ScalarFn::validate)
            }
            FunctionSpec::Spline { spline } => {
                if spline.space().range() != (0.0, 1.0) {
                    return Err(Error::InvalidArgument(
                        "spline must be defined on [0, 1]".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FunctionSpec::Scalar(_) => 1,
            FunctionSpec::Components { components } => components.len(),
            FunctionSpec::Spline { spline } => spline.value_dim(),
        }
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        match self {
            FunctionSpec::Scalar(f) => out[0] = f.eval(t),
            FunctionSpec::Components { components } => {
                for (o, f) in out.iter_mut().zip(components) {
                    *o = f.eval(t);
                }
            }
            FunctionSpec::Spline { spline } => spline.eval_into(t, out),
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, &mut out);
        out
    }

    pub fn norm_at(&self, t: f64, buf: &mut [f64]) -> f64 {
        self.eval_into(t, buf);
        buf.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Component `c` as a scalar spec.
    pub fn component(&self, c: usize) -> FunctionSpec {
        match self {
            FunctionSpec::Scalar(f) => FunctionSpec::Scalar(f.clone()),
            FunctionSpec::Components { components } => FunctionSpec::Scalar(components[c].clone()),
            FunctionSpec::Spline { spline } => FunctionSpec::Spline {
                spline: spline.component(c),
            },
        }
    }

    /// Sorted distinct breakpoints inside `(0, 1)`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = match self {
            FunctionSpec::Scalar(f) => f.breakpoints(),
            FunctionSpec::Components { components } => {
                components.iter().flat_map(ScalarFn::breakpoints).collect()
            }
            FunctionSpec::Spline { spline } => spline.space().breakpoints(),
        };
        v.retain(|&x| x > 0.0 && x < 1.0);
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Adds `∫_a^b f_c w_j dλ` to `out[j * dim + c]` for `m` weights that
    /// are polynomials of degree `< degree` on `[a, b]`.
    pub fn integrate_against(
        &self,
        w: &dyn Fn(f64, f64, &mut [f64]),
        m: usize,
        degree: usize,
        a: f64,
        b: f64,
        panels: usize,
        out: &mut [f64],
    ) {
        let d = self.dim();
        match self {
            FunctionSpec::Scalar(f) => f.integrate_against(w, m, degree, a, b, panels, out),
            FunctionSpec::Components { components } => {
                let mut part = vec![0.0; m];
                for (c, f) in components.iter().enumerate() {
                    part.iter_mut().for_each(|v| *v = 0.0);
                    f.integrate_against(w, m, degree, a, b, panels, &mut part);
                    for (j, v) in part.iter().enumerate() {
                        out[j * d + c] += v;
                    }
                }
            }
            FunctionSpec::Spline { spline } => {
                let rule = GaussLegendre::cached((spline.space().order() + degree).div_ceil(2) + 1);
                let mut cuts = vec![a];
                cuts.extend(spline.space().breakpoints().into_iter().filter(|&x| x > a && x < b));
                cuts.push(b);
                let mut wb = vec![0.0; m];
                let mut fb = vec![0.0; d];
                let knots = spline.space().knots();
                for piece in cuts.windows(2) {
                    let mu = knots.partition_point(|&x| x <= piece[0]).clamp(1, knots.len() - 1) - 1;
                    let (start, base) = (piece[0] - a, piece[0] - knots[mu]);
                    for (off, wx) in rule.offsets(piece[1] - piece[0]) {
                        w(a + start + off, start + off, &mut wb);
                        spline.eval_local_into(mu, base + off, &mut fb);
                        for (j, wj) in wb.iter().enumerate() {
                            for (c, fc) in fb.iter().enumerate() {
                                out[j * d + c] += wx * wj * fc;
                            }
                        }
                    }
                }
            }
        }
    }

    /// `∫_a^b ‖f‖_2 dλ` by composite Gauss–Legendre, split at breakpoints.
    pub fn l1_norm_on(&self, a: f64, b: f64, panels: usize) -> f64 {
        let mut buf = vec![0.0; self.dim()];
        let rule = GaussLegendre::cached(12);
        quadrature::composite(a, b, &self.breakpoints(), panels, rule, |t| {
            self.norm_at(t, &mut buf)
        })
    }
}

/// A point mass `weight · δ_location`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub weight: Vec<f64>,
}

/// Named singular continuous measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum SingularFamily {
    /// `weight · μ_C` for the middle-thirds Cantor measure, integrated by
    /// self-similar recursion down to `level`.
    CantorMeasure { level: u32, weight: Vec<f64> },
}

/// Finite `R^d`-valued measure `g dλ + Σ w_a δ_a + ν_c`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default)]
    pub density: Option<FunctionSpec>,
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub singular: Option<SingularFamily>,
}

impl MeasureSpec {
    pub fn dirac(location: f64, weight: Vec<f64>) -> Self {
        Self {
            atoms: vec![Atom { location, weight }],
            ..Self::default()
        }
    }

    pub fn cantor(level: u32, weight: Vec<f64>) -> Self {
        Self {
            singular: Some(SingularFamily::CantorMeasure { level, weight }),
            ..Self::default()
        }
    }

    pub fn with_density(density: FunctionSpec) -> Self {
        Self {
            density: Some(density),
            ..Self::default()
        }
    }

    /// Output dimension `d`.
    pub fn dim(&self) -> usize {
        if let Some(f) = &self.density {
            return f.dim();
        }
        if let Some(a) = self.atoms.first() {
            return a.weight.len();
        }
        match &self.singular {
            Some(SingularFamily::CantorMeasure { weight, .. }) => weight.len(),
            None => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::InvalidMeasure("zero-dimensional weights".into()));
        }
        if let Some(f) = &self.density {
            f.validate()?;
        }
        for a in &self.atoms {
            if !(0.0..=1.0).contains(&a.location) {
                return Err(Error::InvalidMeasure(format!(
                    "atom location {} outside [0, 1]",
                    a.location
                )));
            }
            if a.weight.len() != d || a.weight.iter().any(|w| !w.is_finite()) {
                return Err(Error::InvalidMeasure(format!(
                    "atom at {} must carry {d} finite weights",
                    a.location
                )));
            }
        }
        if let Some(SingularFamily::CantorMeasure { level, weight }) = &self.singular {
            if *level < 1 {
                return Err(Error::InvalidMeasure("cantor level must be at least 1".into()));
            }
            if weight.len() != d || weight.iter().any(|w| !w.is_finite()) {
                return Err(Error::InvalidMeasure(format!(
                    "cantor part must carry {d} finite weights"
                )));
            }
        }
        Ok(())
    }

    /// The singular part (atoms and Cantor component) alone.
    pub fn singular_part(&self) -> MeasureSpec {
        Self {
            density: None,
            ..self.clone()
        }
    }

    /// `ν` restricted to its absolutely continuous part.
    pub fn density_part(&self) -> Option<&FunctionSpec> {
        self.density.as_ref()
    }

    /// `|ν_s|([a, b])`: total variation of the singular part on a closed
    /// interval. The Cantor part uses the same level-`L` functional as the
    /// projection.
    pub fn singular_mass(&self, a: f64, b: f64, nodes: usize) -> f64 {
        let mut m: f64 = self
            .atoms
            .iter()
            .filter(|at| at.location >= a && at.location <= b)
            .map(|at| norm(&at.weight))
            .sum();
        if let Some(SingularFamily::CantorMeasure { level, weight }) = &self.singular {
            let rule = CantorRule::new(nodes);
            m += norm(weight)
                * quadrature::cantor_integral(&mut |_| 1.0, &[], a, b, *level, &rule);
        }
        m
    }

    /// `|ν|([a, b])` with the density contribution by quadrature.
    pub fn variation_on(&self, a: f64, b: f64, nodes: usize) -> f64 {
        let dens = self.density.as_ref().map_or(0.0, |f| f.l1_norm_on(a, b, 8));
        dens + self.singular_mass(a, b, nodes)
    }

    /// `|ν|([0, 1])`.
    pub fn total_variation(&self) -> f64 {
        self.variation_on(0.0, 1.0, 2)
    }

    /// `ν([0, 1])` (vector valued).
    pub fn total_mass(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        if let Some(f) = &self.density {
            let rule = GaussLegendre::cached(12);
            for (c, o) in out.iter_mut().enumerate() {
                let fc = f.component(c);
                let mut buf = [0.0];
                *o += quadrature::composite(0.0, 1.0, &fc.breakpoints(), 16, rule, |t| {
                    fc.eval_into(t, &mut buf);
                    buf[0]
                });
            }
        }
        for a in &self.atoms {
            for (o, w) in out.iter_mut().zip(&a.weight) {
                *o += w;
            }
        }
        if let Some(SingularFamily::CantorMeasure { weight, .. }) = &self.singular {
            for (o, w) in out.iter_mut().zip(weight) {
                *o += w;
            }
        }
        out
    }

    /// Locations of the point masses.
    pub fn atom_locations(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.location).collect()
    }

    /// Distance from `t` to the closed support of the singular part.
    pub fn singular_support_distance(&self, t: f64) -> f64 {
        let mut d = self
            .atoms
            .iter()
            .map(|a| (a.location - t).abs())
            .fold(f64::INFINITY, f64::min);
        if let Some(SingularFamily::CantorMeasure { level, .. }) = &self.singular {
            d = d.min(cantor_set_distance(t, *level));
        }
        d
    }

    /// Component `c` as a scalar measure.
    pub fn component(&self, c: usize) -> MeasureSpec {
        MeasureSpec {
            density: self.density.as_ref().map(|f| f.component(c)),
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    location: a.location,
                    weight: vec![a.weight[c]],
                })
                .collect(),
            singular: self.singular.as_ref().map(|s| match s {
                SingularFamily::CantorMeasure { level, weight } => SingularFamily::CantorMeasure {
                    level: *level,
                    weight: vec![weight[c]],
                },
            }),
        }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Distance from `t` to the union of the level-`level` Cantor cells (which
/// contains the Cantor set).
pub fn cantor_set_distance(t: f64, level: u32) -> f64 {
    fn rec(t: f64, a: f64, len: f64, level: u32) -> f64 {
        let b = a + len;
        if level == 0 {
            return if t < a {
                a - t
            } else if t > b {
                t - b
            } else {
                0.0
            };
        }
        let third = len / 3.0;
        // distance to [a, b] bounds the distance to any cell inside it
        let outer = if t < a { a - t } else if t > b { t - b } else { 0.0 };
        if outer > 0.0 {
            // the nearest cell touches the nearest end of [a, b]
            return outer;
        }
        rec(t, a, third, level - 1).min(rec(t, a + 2.0 * third, third, level - 1))
    }
    rec(t, 0.0, 1.0, level)
}
