//! Limit B-splines on an accumulation-free interval `V_{j0}` and the
//! predicted a.e. limit of a spline martingale.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Source, SplineMartingale};
use crate::basis::{Spline, SplineSpace};
use crate::error::{Error, Result};
use crate::gram::DualBasis;
use crate::knots::{Component, Decomposition, KnotProgram};
use crate::quadrature::GaussLegendre;

/// Parameters of [`build_limit_basis`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitConfig {
    /// The `n` tried, increasing; the last entry is the budget.
    pub schedule: Vec<usize>,
    /// Relative tolerance for the dual values on the compact set.
    pub tol: f64,
    /// Uniform tolerance for `N_j^{(n)} 1_V` against the limit B-spline.
    pub gap_tol: f64,
    /// Distance kept from the ends of `V_{j0}` that knots converge to.
    pub margin: f64,
    /// Lattice size on the compact set and on `V_{j0}`.
    pub lattice: usize,
}

impl Default for LimitConfig {
    fn default() -> Self {
        Self {
            schedule: (1..=8).map(|m| 5 * m).collect(),
            tol: 1e-9,
            gap_tol: 1e-9,
            margin: 0.05,
            lattice: 401,
        }
    }
}

/// Knot tuple of a B-spline, as bit patterns so that it can key a map.
type Key = Vec<u64>;

fn key(knots: &[f64]) -> Key {
    knots.iter().map(|x| x.to_bits()).collect()
}

/// `s^{(n)}`: the first `n` knots that lie in `V_{j0}`, sorted, with `k`-fold
/// padding at ends that belong to `V_{j0}`.
pub fn local_knots(program: &KnotProgram, n: usize, comp: &Component) -> Result<Vec<f64>> {
    let k = program.order;
    let mut inner: Vec<f64> = program
        .interior_knots(n)?
        .into_iter()
        .filter(|&x| comp.in_v(x) && !(x == comp.lo && comp.lo_in_v()) && !(x == comp.hi && comp.hi_in_v()))
        .collect();
    inner.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(inner.len() + 2 * k);
    if comp.lo_in_v() {
        out.extend(std::iter::repeat_n(comp.lo, k));
    }
    out.extend(inner);
    if comp.hi_in_v() {
        out.extend(std::iter::repeat_n(comp.hi, k));
    }
    Ok(out)
}

/// Per-`n` record of the stabilization sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizationStep {
    pub n: usize,
    pub local_dim: usize,
    /// Relative change of the tracked duals on the compact set against the
    /// previous step (`None` for the first usable step).
    pub consecutive_defect: Option<f64>,
    /// Relative distance of the tracked duals to those at the last step.
    pub defect_to_final: f64,
    /// `max_j sup_V |N_j^{(n)} 1_V − N̄_j|` over the tracked B-splines.
    pub restriction_gap: f64,
    /// The tracked knot tuples coincide with those at the last step.
    pub same_tracked: bool,
}

/// Limit B-splines `N̄_j` on `V_{j0}` and their duals, represented on the
/// local space at the last step of the sweep.
#[derive(Debug, Clone)]
pub struct LimitBasis {
    pub j0: usize,
    pub component: Component,
    pub order: usize,
    /// Compact subset of `U_{j0}` on which stabilization was checked.
    pub compact: (f64, f64),
    pub local_space: SplineSpace,
    pub duals: DualBasis,
    /// Local indices of the B-splines whose support meets the compact set.
    pub tracked: Vec<usize>,
    pub steps: Vec<StabilizationStep>,
    /// First `n` from which every later step is within tolerance.
    pub stabilization_n: Option<usize>,
    pub stabilized: bool,
    /// Why the sweep did not stabilize, when it did not.
    pub budget_report: Option<String>,
    pub final_n: usize,
}

fn lattice(a: f64, b: f64, m: usize) -> Vec<f64> {
    if m <= 1 || a == b {
        return vec![0.5 * (a + b)];
    }
    (0..m).map(|i| a + (b - a) * i as f64 / (m - 1) as f64).collect()
}

/// Local indices whose support meets `[c0, c1]` in positive length.
fn meeting(space: &SplineSpace, c0: f64, c1: f64) -> Vec<usize> {
    (0..space.dim())
        .filter(|&i| {
            let (lo, hi) = space.support(i);
            hi.min(c1) > lo.max(c0)
        })
        .collect()
}

struct Snapshot {
    space: SplineSpace,
    duals: DualBasis,
    tracked: Vec<usize>,
    keys: Vec<Key>,
    values: BTreeMap<Key, Vec<f64>>,
    gap: f64,
}

/// Global B-splines whose support meets `V_{j0}` in positive length and
/// contains no end point that knots converge to, in order.
fn matched_global(global: &SplineSpace, comp: &Component) -> Vec<usize> {
    let open = comp.open_ends();
    (0..global.dim())
        .filter(|&i| {
            let (lo, hi) = global.support(i);
            hi.min(comp.hi) > lo.max(comp.lo) && !open.iter().any(|&p| lo <= p && p <= hi)
        })
        .collect()
}

fn restriction_gap(
    program: &KnotProgram,
    n: usize,
    comp: &Component,
    local: &SplineSpace,
    tracked: &[usize],
    points: &[f64],
) -> Result<f64> {
    let global = SplineSpace::from_grid(&program.realize(n)?);
    let matched = matched_global(&global, comp);
    if matched.len() != local.dim() {
        return Ok(f64::INFINITY);
    }
    let mut gap: f64 = 0.0;
    for &j in tracked {
        let i = matched[j];
        for &t in points {
            let g = if comp.in_v(t) { global.basis_value(i, t) } else { 0.0 };
            gap = gap.max((g - local.basis_value(j, t)).abs());
        }
    }
    Ok(gap)
}

/// Builds the limit basis on `V_{j0}` by increasing `n` along the schedule
/// until the tracked B-splines and their duals stop changing on a compact
/// subset of `U_{j0}`. Not stabilizing is reported, not an error.
pub fn build_limit_basis(program: &KnotProgram, j0: usize, config: &LimitConfig) -> Result<LimitBasis> {
    super::validate_schedule(&config.schedule)?;
    let decomposition = program.decompose()?;
    let comp = *decomposition.components.get(j0).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "no interval with index {j0} ({} in total)",
            decomposition.components.len()
        ))
    })?;
    let k = program.order;
    let c0 = if comp.lo_in_v() { comp.lo } else { comp.lo + config.margin };
    let c1 = if comp.hi_in_v() { comp.hi } else { comp.hi - config.margin };
    if !(c1 > c0) {
        return Err(Error::InvalidArgument(format!(
            "margin {} leaves no compact subset of ({}, {})",
            config.margin, comp.lo, comp.hi
        )));
    }
    let on_compact = lattice(c0, c1, config.lattice);
    let on_v = lattice(comp.lo, comp.hi, config.lattice);

    let mut snaps: Vec<(usize, Snapshot)> = Vec::new();
    for &n in &config.schedule {
        let knots = local_knots(program, n, &comp)?;
        if knots.len() < k + 1 {
            continue;
        }
        let space = SplineSpace::new(k, knots)?;
        let (r0, r1) = space.range();
        if r0 > c0 || r1 < c1 {
            continue;
        }
        let duals = DualBasis::new(&space)?;
        let tracked = meeting(&space, c0, c1);
        let mut values = BTreeMap::new();
        let mut keys = Vec::new();
        for &j in &tracked {
            let kk = key(&space.knots()[j..=j + k]);
            values.insert(kk.clone(), on_compact.iter().map(|&t| duals.eval_dual(j, t)).collect());
            keys.push(kk);
        }
        let gap = restriction_gap(program, n, &comp, &space, &tracked, &on_v)?;
        snaps.push((
            n,
            Snapshot {
                space,
                duals,
                tracked,
                keys,
                values,
                gap,
            },
        ));
    }
    let Some((final_n, last)) = snaps.last().map(|(n, s)| (*n, s)) else {
        return Err(Error::InvalidArgument(format!(
            "no schedule entry yields local knots covering [{c0}, {c1}]"
        )));
    };

    let distance = |a: &BTreeMap<Key, Vec<f64>>, b: &BTreeMap<Key, Vec<f64>>| -> Option<f64> {
        if a.len() != b.len() || a.keys().zip(b.keys()).any(|(x, y)| x != y) {
            return None;
        }
        let scale = b.values().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let diff = a
            .values()
            .zip(b.values())
            .flat_map(|(u, v)| u.iter().zip(v).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        Some(diff / scale)
    };

    let mut steps = Vec::with_capacity(snaps.len());
    for (idx, (n, s)) in snaps.iter().enumerate() {
        let consecutive = if idx == 0 {
            None
        } else {
            Some(distance(&s.values, &snaps[idx - 1].1.values).unwrap_or(f64::INFINITY))
        };
        let to_final = distance(&s.values, &last.values);
        steps.push(StabilizationStep {
            n: *n,
            local_dim: s.space.dim(),
            consecutive_defect: consecutive,
            defect_to_final: to_final.unwrap_or(f64::INFINITY),
            restriction_gap: s.gap,
            same_tracked: s.keys == last.keys,
        });
    }
    let ok = |s: &StabilizationStep| s.same_tracked && s.defect_to_final <= config.tol && s.restriction_gap <= config.gap_tol;
    let last_step = steps.last().expect("at least one step");
    // a finite sequence that is used up cannot change any more
    let exhausted = program.family.capacity().is_some_and(|c| final_n >= c);
    let settled = exhausted || last_step.consecutive_defect.is_some_and(|d| d <= config.tol);
    let stabilized = ok(last_step) && settled;
    let stabilization_n = if stabilized {
        let first_bad_from_end = steps.iter().rposition(|s| !ok(s));
        let start = first_bad_from_end.map_or(0, |p| p + 1);
        steps.get(start).map(|s| s.n)
    } else {
        None
    };
    let budget_report = (!stabilized).then(|| {
        format!(
            "not stabilized by n = {final_n}: consecutive dual defect {:?}, restriction gap {:e} (tolerances {:e}, {:e})",
            last_step.consecutive_defect, last_step.restriction_gap, config.tol, config.gap_tol
        )
    });
    let (_, last) = snaps.pop().expect("at least one snapshot");
    Ok(LimitBasis {
        j0,
        component: comp,
        order: k,
        compact: (c0, c1),
        local_space: last.space,
        duals: last.duals,
        tracked: last.tracked,
        steps,
        stabilization_n,
        stabilized,
        budget_report,
        final_n,
    })
}

impl LimitBasis {
    /// Whether the local knot sequence continues without end to the left and
    /// to the right (ends that knots converge to).
    pub fn open_ends(&self) -> (bool, bool) {
        (!self.component.lo_in_v(), !self.component.hi_in_v())
    }

    /// `max_{i,j} |⟨N̄_j*, N̄_i⟩ − δ_ij|` by per-span quadrature of the
    /// evaluated duals.
    pub fn biorthogonality_defect(&self) -> f64 {
        let s = &self.local_space;
        let rule = GaussLegendre::cached(s.order() + 1);
        let dim = s.dim();
        let mut m = vec![vec![0.0; dim]; dim];
        let rows: Vec<Vec<f64>> = (0..dim).map(|j| self.duals.row(j)).collect();
        for (mu, a, b) in s.spans() {
            for (u, w) in rule.offsets(b - a) {
                let nz = s.nonzero_basis_local(mu, u);
                for (j, row) in rows.iter().enumerate() {
                    let dj: f64 = nz.iter().map(|&(i, v)| row[i] * v).sum();
                    if dj == 0.0 {
                        continue;
                    }
                    for &(i, v) in &nz {
                        m[j][i] += w * dj * v;
                    }
                }
            }
        }
        let mut worst: f64 = 0.0;
        for (j, row) in m.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - want).abs());
            }
        }
        worst
    }

    /// `max |N̄_j*(t)| λ(Ī(t)) / (C q^{1-k} q^{|j - ī(t)|})` over the given
    /// points in the compact set and all local `j`; values at or below 1
    /// confirm the pointwise dual bound with the Gram-inverse constants.
    pub fn dual_decay_ratio(&self, c_hat: f64, q_hat: f64, points: &[f64]) -> f64 {
        let s = &self.local_space;
        let k = s.order() as i32;
        let mut worst: f64 = 0.0;
        for &t in points {
            let ibar = s.anchor_index(t);
            let (l0, l1) = s.grid_interval(t);
            let len = l1 - l0;
            for j in 0..s.dim() {
                let bound = c_hat * q_hat.powi(1 - k) * q_hat.powi((j as i64 - ibar as i64).unsigned_abs() as i32) / len;
                let v = self.duals.eval_dual(j, t).abs();
                if v > 0.0 {
                    worst = worst.max(v / bound);
                }
            }
        }
        worst
    }

    /// `T(N̄_j) = ∫_{V_{j0}} N̄_j dν` from the source directly.
    pub fn t_values(&self, source: &Source, quad_depth: usize) -> Vec<Vec<f64>> {
        let s = &self.local_space;
        let k = s.order();
        let comp = self.component;
        (0..s.dim())
            .map(|j| {
                let (lo, hi) = s.support(j);
                source.integrate(
                    &|x| s.basis_value(j, x),
                    &s.knots()[j..=j + k],
                    k,
                    lo.max(comp.lo),
                    hi.min(comp.hi),
                    &|x| comp.in_v(x),
                    quad_depth,
                )
            })
            .collect()
    }
}

/// One accumulation-free interval of the predicted limit.
#[derive(Debug, Clone)]
struct LocalLimit {
    component: Component,
    /// `Σ_j T(N̄_j) N̄_j*` as a spline on the local space.
    u: Spline,
    open: (bool, bool),
    /// `C q^{1-k} μ(V_{j0})`.
    scale: f64,
}

/// The predicted a.e. limit
/// `g 1_{V^c} + Σ_{j0} Σ_j T(N̄_{j0,j}) N̄*_{j0,j} 1_{U_{j0}}`.
#[derive(Debug, Clone)]
pub struct PredictedLimit {
    pub decomposition: Decomposition,
    density: Option<crate::functions::FunctionSpec>,
    locals: Vec<LocalLimit>,
    q: f64,
    dim: usize,
}

impl PredictedLimit {
    /// Value at `t` and the truncation certificate: a majorant for the
    /// terms `j` beyond the free ends of the local knot sequence. `None` at
    /// exceptional points (boundary points of the `U_j`) and in intervals
    /// without a basis.
    pub fn eval(&self, t: f64) -> Option<(Vec<f64>, f64)> {
        if let Some(jc) = self.decomposition.component_of(t) {
            let comp = self.decomposition.components[jc];
            let local = self.locals.iter().find(|l| l.component == comp)?;
            let s = local.u.space();
            let (r0, r1) = s.range();
            if t < r0 || t > r1 {
                return None;
            }
            let ibar = s.anchor_index(t) as i32;
            let (l0, l1) = s.grid_interval(t);
            let q = self.q;
            let mut tail = 0.0;
            if local.open.0 {
                tail += q.powi(ibar + 1) / (1.0 - q);
            }
            if local.open.1 {
                tail += q.powi(s.dim() as i32 - ibar) / (1.0 - q);
            }
            return Some((local.u.eval(t), local.scale * tail / (l1 - l0)));
        }
        if !self.decomposition.in_v(t) {
            let v = match &self.density {
                Some(g) => g.eval(t),
                None => vec![0.0; self.dim],
            };
            return Some((v, 0.0));
        }
        None
    }
}

/// Assembles the predicted limit from one basis per interval `U_{j0}` of
/// positive length; `(c_hat, q_hat)` are the Gram-inverse decay constants
/// used for the truncation certificate.
pub fn predicted_limit(
    mart: &SplineMartingale,
    decomposition: &Decomposition,
    bases: &[LimitBasis],
    c_hat: f64,
    q_hat: f64,
) -> Result<PredictedLimit> {
    if !(q_hat > 0.0 && q_hat < 1.0) {
        return Err(Error::InvalidArgument(format!("decay ratio {q_hat} must lie in (0, 1)")));
    }
    let mut locals = Vec::new();
    for basis in bases {
        let t = basis.t_values(&mart.source, mart.quad_depth);
        let d = mart.source.dim();
        let mut b = ndarray::Array2::<f64>::zeros((t.len(), d));
        for (i, row) in t.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                b[[i, c]] = *v;
            }
        }
        let coeffs = basis.duals.apply_inverse(&b)?;
        let u = Spline::new(basis.local_space.clone(), coeffs)?;
        let comp = basis.component;
        let mass = mart.source.variation_on(comp.lo, comp.hi);
        locals.push(LocalLimit {
            component: comp,
            u,
            open: basis.open_ends(),
            scale: c_hat * q_hat.powi(1 - basis.order as i32) * mass,
        });
    }
    Ok(PredictedLimit {
        decomposition: decomposition.clone(),
        density: mart.source.density().cloned(),
        locals,
        q: q_hat,
        dim: mart.source.dim(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convergence::make_martingale;
    use crate::functions::{FunctionSpec, ScalarFn};
    use crate::knots::{KnotFamily, Side};

    fn geometric(k: usize) -> KnotProgram {
        KnotProgram::new(
            KnotFamily::GeometricToPoint {
                target: 0.5,
                ratio: 0.5,
                side: Side::Left,
            },
            k,
        )
        .unwrap()
    }

    fn config() -> LimitConfig {
        LimitConfig::default()
    }

    #[test]
    fn local_knots_pad_only_closed_ends() {
        let p = geometric(3);
        let d = p.decompose().unwrap();
        let left = local_knots(&p, 3, &d.components[0]).unwrap();
        assert_eq!(left, vec![0.0, 0.0, 0.0, 0.25, 0.375, 0.4375]);
        let right = local_knots(&p, 3, &d.components[1]).unwrap();
        assert_eq!(right, vec![0.5, 0.5, 0.5, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn finite_side_is_bernstein_and_stabilizes() {
        let basis = build_limit_basis(&geometric(3), 1, &config()).unwrap();
        assert!(basis.stabilized);
        assert_eq!(basis.local_space.dim(), 3);
        assert_eq!(basis.open_ends(), (false, false));
        assert!(basis.biorthogonality_defect() < 1e-12);
        let n = basis.stabilization_n.unwrap();
        let step = basis.steps.iter().find(|s| s.n == n).unwrap();
        assert!(step.restriction_gap <= 1e-6);
    }

    #[test]
    fn infinite_side_duals_settle() {
        let basis = build_limit_basis(&geometric(2), 0, &config()).unwrap();
        assert!(basis.stabilized, "{:?}", basis.budget_report);
        assert_eq!(basis.open_ends(), (false, true));
        assert!(basis.biorthogonality_defect() < 1e-8);
    }

    #[test]
    fn tiny_budget_is_reported_not_raised() {
        let cfg = LimitConfig {
            schedule: vec![4, 5],
            ..config()
        };
        let basis = build_limit_basis(&geometric(2), 0, &cfg).unwrap();
        assert!(!basis.stabilized);
        assert!(basis.stabilization_n.is_none());
        assert!(basis.budget_report.is_some());
    }

    #[test]
    fn bad_component_index() {
        assert!(build_limit_basis(&geometric(2), 7, &config()).is_err());
    }

    #[test]
    fn predicted_limit_matches_martingale_on_finite_side() {
        let p = geometric(3);
        let d = p.decompose().unwrap();
        let cfg = config();
        let bases: Vec<_> = (0..2).map(|j| build_limit_basis(&p, j, &cfg).unwrap()).collect();
        let f = FunctionSpec::Scalar(ScalarFn::Sin2pi {
            freq: 1.0,
            phase: 0.0,
            amplitude: 1.0,
        });
        let mart = make_martingale(&p, Source::function(f), &cfg.schedule, 2).unwrap();
        let pl = predicted_limit(&mart, &d, &bases, 10.0, 0.5).unwrap();
        let (v, cert) = pl.eval(0.75).unwrap();
        assert_eq!(cert, 0.0);
        assert!((mart.last().g.eval(0.75)[0] - v[0]).abs() < 1e-6);
        assert!(pl.eval(0.5).is_none());
    }
}
