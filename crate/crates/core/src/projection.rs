//! The orthogonal projection onto a spline space, applied to functions and
//! finite measures, plus the probes built on it: self-adjointness, the L¹
//! norm probe, maximal functions, moduli of smoothness and Jackson ratios.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::basis::{Spline, SplineSpace};
use crate::error::{Error, Result};
use crate::functions::{norm, FunctionSpec, MeasureSpec, ScalarFn, SingularFamily};
use crate::gram::DualBasis;
use crate::quadrature::{self, CantorRule, GaussLegendre};

/// A spline space together with its factorized Gram matrix.
#[derive(Debug, Clone)]
pub struct Projector {
    space: SplineSpace,
    duals: DualBasis,
}

impl Projector {
    pub fn new(space: &SplineSpace) -> Result<Self> {
        Ok(Self {
            space: space.clone(),
            duals: DualBasis::new(space)?,
        })
    }

    pub fn space(&self) -> &SplineSpace {
        &self.space
    }

    pub fn duals(&self) -> &DualBasis {
        &self.duals
    }

    /// `⟨f, N_i⟩` for every `i` (rows) and component (columns), span by span:
    /// composite Gauss–Legendre with `quad_depth` panels per span, split at
    /// the breakpoints of `f`; the devil's staircase is integrated by parts
    /// against the Cantor functional.
    pub fn inner_products(&self, f: &FunctionSpec, quad_depth: usize) -> Array2<f64> {
        let d = f.dim();
        let k = self.space.order();
        let dim = self.space.dim();
        let mut out = Array2::<f64>::zeros((dim, d));
        let mut part = vec![0.0; k * d];
        for (mu, a, b) in self.space.spans() {
            let first = mu as isize + 1 - k as isize;
            let local = |_: f64, u: f64, buf: &mut [f64]| buf.copy_from_slice(&self.space.eval_basis_local(mu, u));
            part.iter_mut().for_each(|v| *v = 0.0);
            f.integrate_against(&local, k, k, a, b, quad_depth, &mut part);
            for r in 0..k {
                let i = first + r as isize;
                if i < 0 || i >= dim as isize {
                    continue;
                }
                for c in 0..d {
                    out[[i as usize, c]] += part[r * d + c];
                }
            }
        }
        out
    }

    /// `∫ N_i dν` for every `i`: quadrature on the density, point evaluation
    /// at the atoms and self-similar recursion for the Cantor part.
    pub fn measure_moments(&self, nu: &MeasureSpec, quad_depth: usize) -> Result<Array2<f64>> {
        nu.validate()?;
        let d = nu.dim();
        let mut out = match &nu.density {
            Some(g) => self.inner_products(g, quad_depth),
            None => Array2::zeros((self.space.dim(), d)),
        };
        for atom in &nu.atoms {
            for (i, n) in self.space.nonzero_basis(atom.location) {
                for (c, w) in atom.weight.iter().enumerate() {
                    out[[i, c]] += n * w;
                }
            }
        }
        if let Some(SingularFamily::CantorMeasure { level, weight }) = &nu.singular {
            let m = self.cantor_moments(*level);
            for (i, mi) in m.iter().enumerate() {
                for (c, w) in weight.iter().enumerate() {
                    out[[i, c]] += mi * w;
                }
            }
        }
        Ok(out)
    }

    /// `∫ N_i dμ_C` at recursion depth `level`; the cell rule has `k` nodes so
    /// that uncut cells are integrated exactly.
    pub fn cantor_moments(&self, level: u32) -> Vec<f64> {
        let rule = CantorRule::new(self.space.order());
        let knots = self.space.knots();
        (0..self.space.dim())
            .map(|i| {
                let (lo, hi) = self.space.support(i);
                let breaks: Vec<f64> = knots[i..=i + self.space.order()].to_vec();
                quadrature::cantor_integral(
                    &mut |t| self.space.basis_value(i, t),
                    &breaks,
                    lo,
                    hi,
                    level,
                    &rule,
                )
            })
            .collect()
    }

    /// The spline with coefficients `G⁻¹ b`.
    pub fn from_moments(&self, b: &Array2<f64>) -> Result<Spline> {
        Spline::new(self.space.clone(), self.duals.apply_inverse(b)?)
    }

    /// `P_n f = Σ_i ⟨f, N_i⟩ N_i*`.
    pub fn project_function(&self, f: &FunctionSpec, quad_depth: usize) -> Result<Spline> {
        f.validate()?;
        self.from_moments(&self.inner_products(f, quad_depth))
    }

    /// `P_n ν = Σ_i (∫ N_i dν) N_i*`.
    pub fn project_measure(&self, nu: &MeasureSpec, quad_depth: usize) -> Result<Spline> {
        self.from_moments(&self.measure_moments(nu, quad_depth)?)
    }
}

pub fn project_function(space: &SplineSpace, f: &FunctionSpec, quad_depth: usize) -> Result<Spline> {
    Projector::new(space)?.project_function(f, quad_depth)
}

pub fn project_measure(space: &SplineSpace, nu: &MeasureSpec, quad_depth: usize) -> Result<Spline> {
    Projector::new(space)?.project_measure(nu, quad_depth)
}

/// `∫_0^1 u(t) v(t) dλ` for every pair of components, by fine composite
/// quadrature split at the knots of `space` and the given breakpoints.
fn pairing(
    u: &dyn Fn(f64, &mut [f64]),
    du: usize,
    v: &dyn Fn(f64) -> f64,
    breaks: &[f64],
) -> Vec<f64> {
    let rule = GaussLegendre::cached(16);
    let mut buf = vec![0.0; du];
    (0..du)
        .map(|c| {
            quadrature::composite(0.0, 1.0, breaks, 8, rule, |t| {
                u(t, &mut buf);
                buf[c] * v(t)
            })
        })
        .collect()
}

/// `‖∫ P_n g · f − ∫ g · P_n f‖`, both integrals by an independent fine
/// quadrature. `f` must be scalar.
pub fn check_self_adjoint(
    projector: &Projector,
    g: &FunctionSpec,
    f: &FunctionSpec,
    quad_depth: usize,
) -> Result<f64> {
    if f.dim() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            found: f.dim(),
        });
    }
    let pg = projector.project_function(g, quad_depth)?;
    let pf = projector.project_function(f, quad_depth)?;
    let mut breaks = projector.space().breakpoints();
    breaks.extend(f.breakpoints());
    breaks.extend(g.breakpoints());
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let d = g.dim();
    let left = pairing(&|t, out| pg.eval_into(t, out), d, &|t| f.eval(t)[0], &breaks);
    let right = pairing(&|t, out| g.eval_into(t, out), d, &|t| pf.eval(t)[0], &breaks);
    Ok(norm(
        &left.iter().zip(&right).map(|(a, b)| a - b).collect::<Vec<_>>(),
    ))
}

/// Result of the L¹ norm probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadrinProbe {
    /// `max_c ‖P_n b_c‖_1 / ‖b_c‖_1` over the bump centers `c`.
    pub ratio: f64,
    pub center: f64,
}

/// Lower estimate of `‖P_n‖_{L¹→L¹}` from unit bumps of the given width
/// centered on a lattice of `centers` points (plus the knot-span midpoints).
///
/// `‖b‖_1 = Σ_i ⟨b, N_i⟩` for a non-negative bump by the partition of unity,
/// which keeps numerator and denominator on the same quadrature.
pub fn shadrin_probe(
    projector: &Projector,
    bump_width: f64,
    centers: usize,
    quad_depth: usize,
) -> Result<ShadrinProbe> {
    if !(bump_width > 0.0 && bump_width < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "bump width {bump_width} must lie in (0, 1)"
        )));
    }
    let half = 0.5 * bump_width;
    let mut cs: Vec<f64> = (0..centers)
        .map(|j| half + (1.0 - bump_width) * (j as f64 + 0.5) / centers as f64)
        .collect();
    cs.extend(
        projector
            .space()
            .spans()
            .map(|(_, a, b)| 0.5 * (a + b))
            .filter(|&c| c >= half && c <= 1.0 - half),
    );
    let k = projector.space().order();
    let mut best = ShadrinProbe {
        ratio: 0.0,
        center: f64::NAN,
    };
    for c in cs {
        let bump = FunctionSpec::from(ScalarFn::unit_bump(c, bump_width));
        let b = projector.inner_products(&bump, quad_depth);
        let mass: f64 = b.column(0).sum();
        let p = projector.from_moments(&b)?;
        // piecewise polynomial of degree k-1: the norm needs panels only for
        // the sign changes
        let l1 = if k == 1 { p.l1_norm(1) } else { p.l1_norm(8) };
        let ratio = l1 / mass;
        if ratio > best.ratio {
            best = ShadrinProbe { ratio, center: c };
        }
    }
    Ok(best)
}

/// Geometric scale list `2^{-j/2}`, `j = 0..=2 levels`.
pub fn default_scales(levels: usize) -> Vec<f64> {
    (0..=2 * levels).map(|j| 2f64.powf(-(j as f64) / 2.0)).collect()
}

/// `∫_a^b ‖g‖ dλ / (b - a)`.
fn average_norm(g: &FunctionSpec, breaks: &[f64], a: f64, b: f64, buf: &mut [f64]) -> f64 {
    let rule = GaussLegendre::cached(12);
    quadrature::composite(a, b, breaks, 2, rule, |t| g.norm_at(t, buf)) / (b - a)
}

/// Lattice Hardy–Littlewood maximal function: the largest average of `‖g‖`
/// over intervals `I ∋ t`, `I ⊂ [0, 1]`, whose length is one of `scales`,
/// with `placements` positions of `I` per scale swept from `t` at the right
/// end to `t` at the left end. A lower bound for `Mg(t)`.
pub fn maximal_function(g: &FunctionSpec, t: f64, scales: &[f64], placements: usize) -> f64 {
    let breaks = g.breakpoints();
    let mut buf = vec![0.0; g.dim()];
    let mut best: f64 = 0.0;
    for &len in scales {
        if !(len > 0.0) {
            continue;
        }
        if len >= 1.0 {
            best = best.max(average_norm(g, &breaks, 0.0, 1.0, &mut buf));
            continue;
        }
        let lo = (t - len).max(0.0);
        let hi = t.min(1.0 - len);
        if lo > hi {
            continue;
        }
        let steps = placements.max(2) - 1;
        for p in 0..=steps {
            let a = if lo == hi {
                lo
            } else {
                lo + (hi - lo) * p as f64 / steps as f64
            };
            best = best.max(average_norm(g, &breaks, a, a + len, &mut buf));
            if lo == hi {
                break;
            }
        }
    }
    best
}

/// One `(n, t)` entry of the maximal-inequality sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximalRow {
    pub n: usize,
    pub t: f64,
    pub projection_norm: f64,
    pub maximal: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalReport {
    pub rows: Vec<MaximalRow>,
    /// `(n, max_t ‖P_n g(t)‖ / Mg(t))`.
    pub per_n: Vec<(usize, f64)>,
    /// `max_t max_n ‖P_n g(t)‖ / Mg(t)`.
    pub constant: f64,
    /// The last ratio does not exceed 1.25 times the largest ratio over the
    /// first half of the schedule.
    pub no_upward_trend: bool,
}

/// Growth factor tolerated between the first half of a schedule and its
/// last entry before a sequence counts as trending upward.
pub const TREND_FACTOR: f64 = 1.25;

/// Whether `values` (ordered by `n`) shows no upward trend: the last value is
/// at most [`TREND_FACTOR`] times the largest value of the first half.
pub fn no_upward_trend(values: &[f64]) -> bool {
    if values.len() < 2 {
        return true;
    }
    let head = values[..values.len().div_ceil(2)]
        .iter()
        .copied()
        .fold(0.0, f64::max);
    values[values.len() - 1] <= TREND_FACTOR * head
}

/// `max_n ‖P_n g(t)‖ / Mg(t)` over a family of spaces (tagged with `n`).
pub fn check_maximal_inequality(
    spaces: &[(usize, SplineSpace)],
    g: &FunctionSpec,
    points: &[f64],
    scales: &[f64],
    placements: usize,
    quad_depth: usize,
) -> Result<MaximalReport> {
    let maximal: Vec<f64> = points
        .iter()
        .map(|&t| maximal_function(g, t, scales, placements))
        .collect();
    let mut rows = Vec::new();
    let mut per_n = Vec::new();
    for (n, space) in spaces {
        let p = Projector::new(space)?.project_function(g, quad_depth)?;
        let mut worst: f64 = 0.0;
        for (&t, &m) in points.iter().zip(&maximal) {
            let v = norm(&p.eval(t));
            let ratio = if m > 0.0 {
                v / m
            } else if v == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(ratio);
            rows.push(MaximalRow {
                n: *n,
                t,
                projection_norm: v,
                maximal: m,
                ratio,
            });
        }
        per_n.push((*n, worst));
    }
    let constant = per_n.iter().map(|p| p.1).fold(0.0, f64::max);
    let trend: Vec<f64> = per_n.iter().map(|p| p.1).collect();
    Ok(MaximalReport {
        rows,
        per_n,
        constant,
        no_upward_trend: no_upward_trend(&trend),
    })
}

/// Resolution of the lattice used by [`modulus_of_smoothness`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulusLattice {
    /// Step sizes `h = delta · j / h_steps`, `j = 1..=h_steps`.
    pub h_steps: usize,
    /// Base points `t` equispaced on `[0, 1 - k h]`.
    pub t_steps: usize,
}

impl Default for ModulusLattice {
    fn default() -> Self {
        Self {
            h_steps: 64,
            t_steps: 2048,
        }
    }
}

/// `ω_k(f, δ) = sup_{0 < h ≤ δ} sup_t ‖Σ_j (-1)^{k-j} C(k,j) f(t + jh)‖` on a
/// lattice.
pub fn modulus_of_smoothness(
    f: &FunctionSpec,
    k: usize,
    delta: f64,
    lattice: ModulusLattice,
) -> Result<f64> {
    if k == 0 || !(delta >= 0.0) || delta * k as f64 > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "modulus needs k >= 1 and 0 <= delta <= 1/k (k = {k}, delta = {delta})"
        )));
    }
    let binom: Vec<f64> = (0..=k)
        .scan(1.0, |c, j| {
            let v = *c;
            *c = *c * (k - j) as f64 / (j + 1) as f64;
            Some(v)
        })
        .collect();
    let d = f.dim();
    let mut acc = vec![0.0; d];
    let mut buf = vec![0.0; d];
    let mut best: f64 = 0.0;
    for hj in 1..=lattice.h_steps {
        let h = delta * hj as f64 / lattice.h_steps as f64;
        let span = (1.0 - k as f64 * h).max(0.0);
        for ti in 0..=lattice.t_steps {
            let t = span * ti as f64 / lattice.t_steps as f64;
            acc.iter_mut().for_each(|a| *a = 0.0);
            for (j, c) in binom.iter().enumerate() {
                let sign = if (k - j).is_multiple_of(2) { 1.0 } else { -1.0 };
                f.eval_into((t + j as f64 * h).min(1.0), &mut buf);
                for (a, v) in acc.iter_mut().zip(&buf) {
                    *a += sign * c * v;
                }
            }
            best = best.max(norm(&acc));
        }
    }
    Ok(best)
}

/// One entry of a Jackson sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacksonRow {
    pub n: usize,
    pub mesh: f64,
    pub error: f64,
    pub omega: f64,
    /// `error / omega`; `None` when `omega` vanishes (the function lies in
    /// the spline space and is reproduced).
    pub ratio: Option<f64>,
}

/// Moduli below this are treated as exact reproduction in [`jackson_check`].
pub const OMEGA_FLOOR: f64 = 1e-13;

/// `‖f − P_n f‖_∞ / ω_k(f, |Δ_n|)` over a family of spaces.
pub fn jackson_check(
    spaces: &[(usize, SplineSpace)],
    f: &FunctionSpec,
    quad_depth: usize,
    lattice: ModulusLattice,
) -> Result<Vec<JacksonRow>> {
    spaces
        .iter()
        .map(|(n, space)| {
            let k = space.order();
            let p = Projector::new(space)?.project_function(f, quad_depth)?;
            let error = p.sup_norm_of(|t| Some(f.eval(t)));
            let mesh = space.mesh_width();
            let omega = modulus_of_smoothness(f, k, mesh.min(1.0 / k as f64), lattice)?;
            Ok(JacksonRow {
                n: *n,
                mesh,
                error,
                omega,
                ratio: (omega > OMEGA_FLOOR).then(|| error / omega),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knots::Grid;

    fn space(order: usize, interior: &[f64]) -> SplineSpace {
        SplineSpace::from_grid(&Grid::from_interior(order, interior).unwrap())
    }

    #[test]
    fn constants_are_reproduced() {
        let s = space(3, &[0.2, 0.3, 0.7]);
        let p = project_function(&s, &ScalarFn::Constant { value: 2.5 }.into(), 2).unwrap();
        for c in p.coeffs().iter() {
            assert!((c - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn piecewise_constant_projection_averages() {
        let s = space(1, &[0.25, 0.5]);
        let f: FunctionSpec = ScalarFn::Polynomial {
            coeffs: vec![0.0, 0.0, 3.0],
        }
        .into();
        let p = project_function(&s, &f, 1).unwrap();
        // averages of 3t² are (b³ - a³) / (b - a)
        let want = [1.0 / 16.0, 7.0 / 16.0, 7.0 / 4.0];
        for (c, w) in p.coeffs().iter().zip(want) {
            assert!((c - w).abs() < 1e-14, "{c} vs {w}");
        }
    }

    #[test]
    fn dirac_mass_is_preserved() {
        let s = space(3, &[0.1, 0.4, 0.45, 0.8]);
        let p = project_measure(&s, &MeasureSpec::dirac(1.0 / 3.0, vec![2.0]), 1).unwrap();
        assert!((p.integral()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cantor_mass_is_preserved() {
        let s = space(2, &[0.2, 0.5, 0.9]);
        let p = project_measure(&s, &MeasureSpec::cantor(6, vec![1.0]), 1).unwrap();
        assert!((p.integral()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn modulus_closed_forms() {
        let lat = ModulusLattice::default();
        let sq: FunctionSpec = ScalarFn::Polynomial {
            coeffs: vec![0.0, 0.0, 1.0],
        }
        .into();
        let w = modulus_of_smoothness(&sq, 2, 0.1, lat).unwrap();
        assert!((w - 0.02).abs() < 1e-12);
        let abs: FunctionSpec = ScalarFn::AbsCentered { center: 0.5 }.into();
        let w = modulus_of_smoothness(&abs, 1, 0.1, lat).unwrap();
        assert!((w - 0.1).abs() < 1e-12);
        let lin: FunctionSpec = ScalarFn::Polynomial {
            coeffs: vec![1.0, -2.0],
        }
        .into();
        assert!(modulus_of_smoothness(&lin, 2, 0.3, lat).unwrap() < 1e-14);
    }

    #[test]
    fn maximal_of_constant() {
        let c: FunctionSpec = ScalarFn::Constant { value: -3.0 }.into();
        let m = maximal_function(&c, 0.3, &default_scales(10), 9);
        assert!((m - 3.0).abs() < 1e-13);
    }

    #[test]
    fn maximal_of_half_indicator() {
        // sup over I ∋ 3/4 of |I ∩ [0, 1/2]| / |I| is attained by I = [0, 3/4]
        let g: FunctionSpec = ScalarFn::Indicator { a: 0.0, b: 0.5 }.into();
        let scales = [0.75];
        let m = maximal_function(&g, 0.75, &scales, 5);
        assert!((m - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn trend_rule() {
        assert!(no_upward_trend(&[1.0, 1.2, 1.1, 1.24]));
        assert!(!no_upward_trend(&[1.0, 1.0, 1.5, 2.0]));
    }
}
