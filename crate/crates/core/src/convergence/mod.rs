//! Spline martingales `(g_n)` with `P_m g_n = g_m`, the functional `T`, limit
//! B-spline bases on the accumulation-free intervals, the predicted a.e.
//! limit and the convergence reports.

mod limit;
mod report;

pub use limit::{build_limit_basis, predicted_limit, LimitBasis, LimitConfig, PredictedLimit};
pub use limit::{local_knots, StabilizationStep};
pub use report::{
    convergence_report, points_off_support, singular_decay_experiment, ConvergenceReport, ReportRow,
    SingularDecayReport, SingularRow, Thresholds, REQUIRED_DROP,
};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::basis::{Spline, SplineSpace};
use crate::error::{Error, Result};
use crate::functions::{norm, FunctionSpec, MeasureSpec, SingularFamily};
use crate::knots::KnotProgram;
use crate::projection::Projector;
use crate::quadrature::{self, CantorRule, GaussLegendre};

/// Consistency defects above this abort martingale construction.
pub const CONSISTENCY_LIMIT: f64 = 1e-7;

/// Stabilization defects of `T` above this are reported as errors.
pub const STABILIZATION_LIMIT: f64 = 1e-8;

/// What the martingale projects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Source {
    /// `g_n = P_n f`.
    LimitFunction { function: FunctionSpec },
    /// `g_n = P_n ν`.
    Measure { measure: MeasureSpec },
}

impl Source {
    pub fn function(f: impl Into<FunctionSpec>) -> Self {
        Source::LimitFunction { function: f.into() }
    }

    pub fn measure(m: MeasureSpec) -> Self {
        Source::Measure { measure: m }
    }

    pub fn dim(&self) -> usize {
        match self {
            Source::LimitFunction { function } => function.dim(),
            Source::Measure { measure } => measure.dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Source::LimitFunction { function } => function.validate(),
            Source::Measure { measure } => measure.validate(),
        }
    }

    /// Density of the absolutely continuous part.
    pub fn density(&self) -> Option<&FunctionSpec> {
        match self {
            Source::LimitFunction { function } => Some(function),
            Source::Measure { measure } => measure.density.as_ref(),
        }
    }

    /// Component `c` as a scalar source.
    pub fn component(&self, c: usize) -> Source {
        match self {
            Source::LimitFunction { function } => Source::function(function.component(c)),
            Source::Measure { measure } => Source::measure(measure.component(c)),
        }
    }

    pub fn project(&self, projector: &Projector, quad_depth: usize) -> Result<Spline> {
        match self {
            Source::LimitFunction { function } => projector.project_function(function, quad_depth),
            Source::Measure { measure } => projector.project_measure(measure, quad_depth),
        }
    }

    /// Total variation `μ([lo, hi])` of the source (density by quadrature).
    pub fn variation_on(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Source::LimitFunction { function } => function.l1_norm_on(lo, hi, 8),
            Source::Measure { measure } => measure.variation_on(lo, hi, 2),
        }
    }

    /// `∫_{[lo, hi]} φ dν` for a scalar `φ` that is polynomial of degree
    /// `< order` between consecutive `breaks`. Atoms count only where
    /// `keep_atom` holds; the Cantor part uses the level-`L` functional with
    /// an `order`-node cell rule, matching the projection.
    pub fn integrate(
        &self,
        phi: &dyn Fn(f64) -> f64,
        breaks: &[f64],
        order: usize,
        lo: f64,
        hi: f64,
        keep_atom: &dyn Fn(f64) -> bool,
        quad_depth: usize,
    ) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        if !(hi > lo) {
            return out;
        }
        if let Some(f) = self.density() {
            // span by span, as in the projection, so that T(N_i) agrees
            let mut cuts = vec![lo];
            cuts.extend(breaks.iter().copied().filter(|&x| x > lo && x < hi));
            cuts.push(hi);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let weight = |x: f64, _: f64, buf: &mut [f64]| buf[0] = phi(x);
            for piece in cuts.windows(2) {
                f.integrate_against(&weight, 1, order, piece[0], piece[1], quad_depth, &mut out);
            }
        }
        if let Source::Measure { measure } = self {
            for atom in &measure.atoms {
                if atom.location >= lo && atom.location <= hi && keep_atom(atom.location) {
                    let v = phi(atom.location);
                    out.iter_mut().zip(&atom.weight).for_each(|(o, w)| *o += v * w);
                }
            }
            if let Some(SingularFamily::CantorMeasure { level, weight }) = &measure.singular {
                let rule = CantorRule::new(order);
                let m = quadrature::cantor_integral(&mut |t| phi(t), breaks, lo, hi, *level, &rule);
                out.iter_mut().zip(weight).for_each(|(o, w)| *o += m * w);
            }
        }
        out
    }
}

/// One member `g_n` of a spline martingale.
#[derive(Debug, Clone)]
pub struct Member {
    pub n: usize,
    pub projector: Projector,
    pub g: Spline,
}

/// Consistency defect between two schedule entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyDefect {
    pub m: usize,
    pub n: usize,
    /// `max |c(P_m g_n) - c(g_m)| / max(1, max |c(g_m)|)` over coefficients.
    pub defect: f64,
}

/// `(g_n)` over a schedule, `g_n = P_n(source)`.
#[derive(Debug, Clone)]
pub struct SplineMartingale {
    pub program: KnotProgram,
    pub source: Source,
    pub quad_depth: usize,
    pub members: Vec<Member>,
    pub consistency: Vec<ConsistencyDefect>,
}

/// Relative coefficient distance used for consistency checks.
pub fn coefficient_defect(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Checks that a schedule is non-empty and strictly increasing.
pub fn validate_schedule(schedule: &[usize]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::Schedule("empty schedule".into()));
    }
    if let Some(w) = schedule.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::Schedule(format!(
            "schedule must be strictly increasing, found {} then {}",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// `P_m s` for a spline `s` on a finer space: exact, since the integrands
/// are piecewise polynomial on the finer knots.
pub fn project_spline(projector: &Projector, s: &Spline) -> Result<Spline> {
    projector.project_function(&FunctionSpec::from(s.clone()), 1)
}

/// Builds `g_n = P_n(source)` for every `n` in the schedule and checks
/// `P_m g_n = g_m` on all pairs.
pub fn make_martingale(
    program: &KnotProgram,
    source: Source,
    schedule: &[usize],
    quad_depth: usize,
) -> Result<SplineMartingale> {
    validate_schedule(schedule)?;
    if !program.family.is_sequence() {
        return Err(Error::NotNested(format!(
            "{} does not generate nested grids",
            program.family.label()
        )));
    }
    source.validate()?;
    let mut members = Vec::with_capacity(schedule.len());
    for &n in schedule {
        let space = SplineSpace::from_grid(&program.realize(n)?);
        let projector = Projector::new(&space)?;
        let g = source.project(&projector, quad_depth)?;
        members.push(Member { n, projector, g });
    }
    let mut consistency = Vec::new();
    for (a, coarse) in members.iter().enumerate() {
        for fine in &members[a + 1..] {
            let p = project_spline(&coarse.projector, &fine.g)?;
            let defect = coefficient_defect(p.coeffs(), coarse.g.coeffs());
            if defect > CONSISTENCY_LIMIT {
                return Err(Error::Consistency {
                    m: coarse.n,
                    n: fine.n,
                    defect,
                });
            }
            consistency.push(ConsistencyDefect {
                m: coarse.n,
                n: fine.n,
                defect,
            });
        }
    }
    Ok(SplineMartingale {
        program: program.clone(),
        source,
        quad_depth,
        members,
        consistency,
    })
}

/// `∫ u·v dλ` (componentwise in `u`) for splines whose knots all lie in
/// `space`: exact per-span Gauss–Legendre.
fn spline_pairing(space: &SplineSpace, u: &Spline, v: &Spline) -> Vec<f64> {
    let rule = GaussLegendre::cached(space.order() + 1);
    let d = u.value_dim();
    let mut out = vec![0.0; d];
    let mut bu = vec![0.0; d];
    let mut bv = vec![0.0; v.value_dim()];
    for (_, a, b) in space.spans() {
        for (x, w) in rule.mapped(a, b) {
            u.eval_into(x, &mut bu);
            v.eval_into(x, &mut bv);
            for (o, y) in out.iter_mut().zip(&bu) {
                *o += w * y * bv[0];
            }
        }
    }
    out
}

impl SplineMartingale {
    pub fn schedule(&self) -> Vec<usize> {
        self.members.iter().map(|m| m.n).collect()
    }

    pub fn last(&self) -> &Member {
        self.members.last().expect("non-empty schedule")
    }

    pub fn member(&self, n: usize) -> Option<&Member> {
        self.members.iter().find(|m| m.n == n)
    }

    pub fn max_consistency_defect(&self) -> f64 {
        self.consistency.iter().map(|c| c.defect).fold(0.0, f64::max)
    }

    /// `‖g_n‖_{L¹}` per schedule entry.
    pub fn l1_norms(&self) -> Vec<(usize, f64)> {
        self.members.iter().map(|m| (m.n, m.g.l1_norm(4))).collect()
    }

    /// `T(f) = ∫ g_m f dλ` for the first schedule entry `m` whose space
    /// contains the scalar spline `f`; checked against the next entry.
    pub fn functional_t(&self, f: &Spline) -> Result<Vec<f64>> {
        if f.value_dim() != 1 {
            return Err(Error::Dimension {
                expected: 1,
                found: f.value_dim(),
            });
        }
        let pos = self
            .members
            .iter()
            .position(|m| f.space().is_refined_by(m.projector.space()))
            .ok_or_else(|| {
                Error::NotNested("the spline lies in none of the scheduled spaces".into())
            })?;
        let here = &self.members[pos];
        let value = spline_pairing(here.projector.space(), &here.g, f);
        if let Some(next) = self.members.get(pos + 1) {
            let again = spline_pairing(next.projector.space(), &next.g, f);
            let scale = norm(&value).max(1.0);
            let defect = norm(&value.iter().zip(&again).map(|(a, b)| a - b).collect::<Vec<_>>()) / scale;
            if defect > STABILIZATION_LIMIT {
                return Err(Error::Stabilization {
                    m: here.n,
                    n: next.n,
                    defect,
                });
            }
        }
        Ok(value)
    }

    /// `(Σ₁, Σ₂)` at `t` for member `n`: the parts of
    /// `g_n(t) = Σ_i T(N_i) N_i*(t)` carried by `T(N_i 1_V)` and
    /// `T(N_i 1_{V^c})` for the interval `V = V_{j0}` containing `t`.
    pub fn localization_split(
        &self,
        n: usize,
        component: &crate::knots::Component,
        t: f64,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let member = self
            .member(n)
            .ok_or_else(|| Error::InvalidArgument(format!("{n} is not in the schedule")))?;
        let space = member.projector.space();
        let k = space.order();
        let d = self.source.dim();
        let duals = member.projector.duals();
        let mut s1 = vec![0.0; d];
        let mut s2 = vec![0.0; d];
        for i in 0..space.dim() {
            let dual = duals.eval_dual(i, t);
            if dual == 0.0 {
                continue;
            }
            let (lo, hi) = space.support(i);
            let breaks = &space.knots()[i..=i + k];
            let phi = |x: f64| space.basis_value(i, x);
            let inside = self.source.integrate(
                &phi,
                breaks,
                k,
                lo.max(component.lo),
                hi.min(component.hi),
                &|x| component.in_v(x),
                self.quad_depth,
            );
            let total: Vec<f64> = member
                .projector
                .measure_or_function_moment(&self.source, i, self.quad_depth)?;
            for c in 0..d {
                s1[c] += inside[c] * dual;
                s2[c] += (total[c] - inside[c]) * dual;
            }
        }
        Ok((s1, s2))
    }
}

impl Projector {
    /// `T(N_i) = ∫ N_i dν` for a single basis function.
    pub(crate) fn measure_or_function_moment(
        &self,
        source: &Source,
        i: usize,
        quad_depth: usize,
    ) -> Result<Vec<f64>> {
        let space = self.space();
        let k = space.order();
        let (lo, hi) = space.support(i);
        let breaks = &space.knots()[i..=i + k];
        Ok(source.integrate(
            &|x| space.basis_value(i, x),
            breaks,
            k,
            lo,
            hi,
            &|_| true,
            quad_depth,
        ))
    }
}
