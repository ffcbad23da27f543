//! B-spline bases over arbitrary non-decreasing knot vectors, spline
//! evaluation, basis integrals and knot insertion.

use std::sync::Arc;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knots::{self, Grid};
use crate::quadrature::GaussLegendre;

/// Spline space of order `k` spanned by the B-splines `N_i` with supports
/// `[knots[i], knots[i + k]]`, `i = 0..dim`.
///
/// The knot vector need not be padded at its ends; spaces built from a
/// [`Grid`] are, and then the basis is a partition of unity on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineSpace {
    order: usize,
    knots: Arc<[f64]>,
}

impl SplineSpace {
    pub fn new(order: usize, knots: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidOrder);
        }
        if knots.len() < order + 1 {
            return Err(Error::InvalidKnots(format!(
                "{} knots cannot carry a B-spline of order {order}",
                knots.len()
            )));
        }
        if knots.iter().any(|x| !x.is_finite()) || knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidKnots("knots must be finite and non-decreasing".into()));
        }
        if let Some(i) = (0..knots.len() - order).find(|&i| knots[i + order] <= knots[i]) {
            return Err(Error::InvalidKnots(format!(
                "B-spline {i} has a support of zero length"
            )));
        }
        Ok(Self {
            order,
            knots: knots.into(),
        })
    }

    pub fn from_grid(grid: &Grid) -> Self {
        Self::new(grid.order(), grid.knots().to_vec()).expect("grids carry valid knot vectors")
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn dim(&self) -> usize {
        self.knots.len() - self.order
    }

    /// `[knots[0], knots[last]]`.
    pub fn range(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    pub fn support(&self, i: usize) -> (f64, f64) {
        (self.knots[i], self.knots[i + self.order])
    }

    pub fn support_length(&self, i: usize) -> f64 {
        self.knots[i + self.order] - self.knots[i]
    }

    pub fn hull_length(&self, i: usize, j: usize) -> f64 {
        knots::hull_length(&self.knots, self.order, i, j)
    }

    /// `I(t)`: the leftmost positive-length knot interval containing `t`.
    pub fn grid_interval(&self, t: f64) -> (f64, f64) {
        let mu = knots::positive_span(&self.knots, t);
        (self.knots[mu], self.knots[mu + 1])
    }

    /// `i(t)`: the largest index `i` with `I(t) ⊂ supp N_i`.
    pub fn anchor_index(&self, t: f64) -> usize {
        knots::anchor_index(&self.knots, self.order, t)
    }

    pub fn mesh_width(&self) -> f64 {
        knots::mesh_width(&self.knots)
    }

    /// Distinct positive-length spans `(mu, a, b)`.
    pub fn spans(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.knots
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1] > w[0])
            .map(|(mu, w)| (mu, w[0], w[1]))
    }

    /// Distinct knot values.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v = self.knots.to_vec();
        v.dedup();
        v
    }

    /// Knot with clamped index: virtual repetitions of the first and last
    /// knot beyond the ends of the vector.
    fn knot(&self, i: isize) -> f64 {
        let last = self.knots.len() as isize - 1;
        self.knots[i.clamp(0, last) as usize]
    }

    /// Span index used for evaluation: right-continuous at interior knots and
    /// left-continuous at the right end of the range. `None` outside the range.
    fn eval_span(&self, t: f64) -> Option<usize> {
        let (lo, hi) = self.range();
        if !(t >= lo && t <= hi) {
            return None;
        }
        let len = self.knots.len();
        if t == hi {
            // last positive span
            return (0..len - 1).rev().find(|&mu| self.knots[mu + 1] > self.knots[mu]);
        }
        let m = self.knots.partition_point(|&x| x <= t);
        Some(m - 1)
    }

    /// Nonzero B-splines at `t`: returns the index of the first one and the
    /// `k` values `N_{first}(t), ..., N_{first+k-1}(t)` (some may be zero or
    /// belong to indices outside `0..dim`, which callers must skip).
    ///
    /// Uses the triangular Cox–de Boor scheme on the order-raising recursion,
    /// anchored at the order-1 indicator of the evaluation span.
    pub fn eval_basis(&self, t: f64) -> (isize, Vec<f64>) {
        let k = self.order;
        let Some(mu) = self.eval_span(t) else {
            return (0, vec![0.0; k]);
        };
        let mu = mu as isize;
        let values = self.triangle(|j| t - self.knot(mu + 1 - j), |j| self.knot(mu + j) - t);
        (mu - (k as isize - 1), values)
    }

    /// Values of `N_{mu+1-k}, ..., N_mu` at `knots[mu] + u`, with the
    /// recursion run on offsets from the left end of span `mu`. Keeps full
    /// relative accuracy on spans far below the spacing of `f64` near `t`.
    pub fn eval_basis_local(&self, mu: usize, u: f64) -> Vec<f64> {
        let a = self.knots[mu];
        let mu = mu as isize;
        self.triangle(|j| u + (a - self.knot(mu + 1 - j)), |j| (self.knot(mu + j) - a) - u)
    }

    /// `(index, value)` pairs of [`Self::eval_basis_local`] that belong to
    /// this space.
    pub fn nonzero_basis_local(&self, mu: usize, u: f64) -> Vec<(usize, f64)> {
        let first = mu as isize + 1 - self.order as isize;
        let dim = self.dim() as isize;
        self.eval_basis_local(mu, u)
            .into_iter()
            .enumerate()
            .filter_map(|(r, v)| {
                let i = first + r as isize;
                (i >= 0 && i < dim).then_some((i as usize, v))
            })
            .collect()
    }

    fn triangle(&self, left_of: impl Fn(isize) -> f64, right_of: impl Fn(isize) -> f64) -> Vec<f64> {
        let k = self.order;
        let mut values = vec![0.0; k];
        values[0] = 1.0;
        let mut left = vec![0.0; k];
        let mut right = vec![0.0; k];
        for j in 1..k {
            left[j] = left_of(j as isize);
            right[j] = right_of(j as isize);
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let term = if denom > 0.0 { values[r] / denom } else { 0.0 };
                values[r] = saved + right[r + 1] * term;
                saved = left[j - r] * term;
            }
            values[j] = saved;
        }
        values
    }

    /// `(index, value)` pairs of the B-splines of this space that are nonzero
    /// at `t`.
    pub fn nonzero_basis(&self, t: f64) -> Vec<(usize, f64)> {
        let (first, values) = self.eval_basis(t);
        let dim = self.dim() as isize;
        values
            .into_iter()
            .enumerate()
            .filter_map(|(r, v)| {
                let i = first + r as isize;
                (i >= 0 && i < dim && v != 0.0).then_some((i as usize, v))
            })
            .collect()
    }

    /// Value of a single B-spline `N_i(t)`.
    pub fn basis_value(&self, i: usize, t: f64) -> f64 {
        let (first, values) = self.eval_basis(t);
        let r = i as isize - first;
        if r >= 0 && (r as usize) < values.len() {
            values[r as usize]
        } else {
            0.0
        }
    }

    /// `∫ N_i dλ`, by Gauss–Legendre with `⌈k/2⌉ + 1` nodes per knot span.
    pub fn basis_integral(&self, i: usize) -> f64 {
        let rule = GaussLegendre::cached(self.order.div_ceil(2) + 1);
        let (lo, hi) = self.support(i);
        self.spans()
            .filter(|&(_, a, b)| a >= lo && b <= hi)
            .map(|(_, a, b)| rule.integrate(a, b, |t| self.basis_value(i, t)))
            .sum()
    }

    /// Greville abscissae `(knots[i+1] + ... + knots[i+k-1]) / (k-1)`.
    pub fn greville(&self) -> Vec<f64> {
        let k = self.order;
        (0..self.dim())
            .map(|i| {
                if k == 1 {
                    0.5 * (self.knots[i] + self.knots[i + 1])
                } else {
                    self.knots[i + 1..i + k].iter().sum::<f64>() / (k - 1) as f64
                }
            })
            .collect()
    }

    /// Whether every knot of `self` occurs in `finer` with at least the same
    /// multiplicity.
    pub fn is_refined_by(&self, finer: &SplineSpace) -> bool {
        self.order == finer.order && knots::is_submultiset(&self.knots, &finer.knots)
    }

    /// Space with `x` inserted once more into the knot vector.
    pub fn with_knot(&self, x: f64) -> Result<SplineSpace> {
        let mut v = self.knots.to_vec();
        let pos = v.partition_point(|&y| y <= x);
        v.insert(pos, x);
        SplineSpace::new(self.order, v)
    }
}

/// Largest admissible multiplicity of an interior knot: `k - 1`, and 1 for
/// piecewise constants.
pub fn max_interior_multiplicity(order: usize) -> usize {
    (order - 1).max(1)
}

/// Single B-spline value through the two-term order recursion
/// `N_{i,k} = (t-a)/|supp N_{i,k-1}| N_{i,k-1} + (b-t)/|supp N_{i+1,k-1}| N_{i+1,k-1}`
/// with `[a, b] = supp N_{i,k}`, terms with zero-length supports dropped.
///
/// Exponential in `k`; used as an independent check on [`SplineSpace::eval_basis`].
pub fn bspline_by_recursion(knots: &[f64], order: usize, i: usize, t: f64) -> f64 {
    let last = knots.len() - 1;
    let right_end = knots[last];
    if order == 1 {
        let (a, b) = (knots[i], knots[i + 1]);
        if a == b {
            return 0.0;
        }
        // right-continuous, except at the right end of the knot range
        let inside = (a <= t && t < b) || (t == right_end && b == right_end && a < b);
        return if inside { 1.0 } else { 0.0 };
    }
    let (a, b) = (knots[i], knots[i + order]);
    let len_left = knots[i + order - 1] - a;
    let len_right = b - knots[i + 1];
    let mut v = 0.0;
    if len_left > 0.0 {
        v += (t - a) / len_left * bspline_by_recursion(knots, order - 1, i, t);
    }
    if len_right > 0.0 {
        v += (b - t) / len_right * bspline_by_recursion(knots, order - 1, i + 1, t);
    }
    v
}

/// Element of a spline space with values in `R^d`: coefficient row `i`
/// multiplies `N_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spline {
    space: SplineSpace,
    coeffs: Array2<f64>,
}

impl Spline {
    pub fn new(space: SplineSpace, coeffs: Array2<f64>) -> Result<Self> {
        if coeffs.nrows() != space.dim() {
            return Err(Error::Dimension {
                expected: space.dim(),
                found: coeffs.nrows(),
            });
        }
        if coeffs.ncols() == 0 {
            return Err(Error::Dimension {
                expected: 1,
                found: 0,
            });
        }
        Ok(Self { space, coeffs })
    }

    /// Scalar spline from a coefficient vector.
    pub fn scalar(space: SplineSpace, coeffs: Vec<f64>) -> Result<Self> {
        let n = coeffs.len();
        Self::new(
            space,
            Array2::from_shape_vec((n, 1), coeffs).expect("column shape"),
        )
    }

    /// The single B-spline `N_i` as a scalar spline.
    pub fn basis_function(space: SplineSpace, i: usize) -> Self {
        let mut c = vec![0.0; space.dim()];
        c[i] = 1.0;
        Self::scalar(space, c).expect("unit coefficient vector")
    }

    pub fn space(&self) -> &SplineSpace {
        &self.space
    }

    pub fn coeffs(&self) -> &Array2<f64> {
        &self.coeffs
    }

    pub fn value_dim(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, n) in self.space.nonzero_basis(t) {
            for (o, c) in out.iter_mut().zip(self.coeffs.row(i)) {
                *o += c * n;
            }
        }
    }

    /// Value at `knots[mu] + u` for a positive span `mu`.
    pub fn eval_local_into(&self, mu: usize, u: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let first = mu as isize + 1 - self.space.order as isize;
        let dim = self.space.dim() as isize;
        for (r, n) in self.space.eval_basis_local(mu, u).into_iter().enumerate() {
            let i = first + r as isize;
            if i < 0 || i >= dim {
                continue;
            }
            for (o, c) in out.iter_mut().zip(self.coeffs.row(i as usize)) {
                *o += c * n;
            }
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.value_dim()];
        self.eval_into(t, &mut out);
        out
    }

    /// Component `c` as a scalar spline.
    pub fn component(&self, c: usize) -> Spline {
        let col = self.coeffs.column(c).to_owned();
        Spline::scalar(self.space.clone(), col.to_vec()).expect("same space")
    }

    /// Boehm's algorithm: insert `x` once into the knot vector.
    ///
    /// With `x ∈ [knots[mu], knots[mu+1])`, the new coefficients are
    /// `β_i = w_i α_i + (1 - w_i) α_{i-1}` with
    /// `w_i = (x - knots[i]) / (knots[i+k-1] - knots[i])` clamped to `[0, 1]`.
    pub fn insert_knot(&self, x: f64) -> Result<Spline> {
        let k = self.space.order;
        let old = &self.space.knots;
        let dim = self.space.dim();
        // the knot must fall where the basis is complete
        if !(x > old[k - 1] && x < old[dim]) {
            return Err(Error::Domain(x));
        }
        let mult = old.iter().filter(|&&y| y == x).count();
        let max = max_interior_multiplicity(k);
        if mult + 1 > max {
            return Err(Error::Multiplicity {
                value: x,
                count: mult + 1,
                n: old.len() + 1,
                max,
            });
        }
        let new_space = self.space.with_knot(x)?;
        let d = self.value_dim();
        let mut out = Array2::<f64>::zeros((dim + 1, d));
        for i in 0..=dim {
            let denom = old[i + k - 1] - old[i];
            let w = if denom > 0.0 {
                ((x - old[i]) / denom).clamp(0.0, 1.0)
            } else if x >= old[i] {
                1.0
            } else {
                0.0
            };
            for c in 0..d {
                out[[i, c]] = if w == 1.0 {
                    self.coeffs[[i, c]]
                } else if w == 0.0 {
                    self.coeffs[[i - 1, c]]
                } else {
                    w * self.coeffs[[i, c]] + (1.0 - w) * self.coeffs[[i - 1, c]]
                };
            }
        }
        Spline::new(new_space, out)
    }

    /// Representation in a finer space containing this one, by repeated knot
    /// insertion.
    pub fn refine(&self, finer: &SplineSpace) -> Result<Spline> {
        if !self.space.is_refined_by(finer) {
            return Err(Error::NotNested(
                "target knot vector does not contain the source knots".into(),
            ));
        }
        if self.space.range() != finer.range() {
            return Err(Error::NotNested("knot ranges differ".into()));
        }
        let mut missing = Vec::new();
        let (src, dst) = (&self.space.knots, &finer.knots);
        let mut j = 0;
        for &x in dst.iter() {
            if j < src.len() && src[j] == x {
                j += 1;
            } else {
                missing.push(x);
            }
        }
        let mut s = self.clone();
        for x in missing {
            s = s.insert_knot(x)?;
        }
        Ok(s)
    }

    /// `max_i ‖coeffs[i]‖_2`, an upper bound for the sup norm on partition of
    /// unity bases.
    pub fn max_coefficient_norm(&self) -> f64 {
        self.coeffs
            .rows()
            .into_iter()
            .map(|r: ArrayView1<f64>| r.dot(&r).sqrt())
            .fold(0.0, f64::max)
    }

    /// `∫ ‖s‖_2 dλ` estimated by composite Gauss–Legendre per span.
    pub fn l1_norm(&self, panels: usize) -> f64 {
        let rule = GaussLegendre::cached(self.space.order + 4);
        let mut buf = vec![0.0; self.value_dim()];
        let mut total = 0.0;
        for (_, a, b) in self.space.spans() {
            let h = (b - a) / panels as f64;
            for p in 0..panels {
                let lo = a + h * p as f64;
                let hi = if p + 1 == panels { b } else { lo + h };
                total += rule.integrate(lo, hi, |t| {
                    self.eval_into(t, &mut buf);
                    buf.iter().map(|v| v * v).sum::<f64>().sqrt()
                });
            }
        }
        total
    }

    /// `∫ s dλ` exactly (per-span Gauss–Legendre).
    pub fn integral(&self) -> Vec<f64> {
        let rule = GaussLegendre::cached(self.space.order.div_ceil(2) + 1);
        let d = self.value_dim();
        let mut total = vec![0.0; d];
        let mut buf = vec![0.0; d];
        for (_, a, b) in self.space.spans() {
            for (x, w) in rule.mapped(a, b) {
                self.eval_into(x, &mut buf);
                for (t, v) in total.iter_mut().zip(&buf) {
                    *t += w * v;
                }
            }
        }
        total
    }

    /// Sup norm of `‖s(t)‖_2` on a Chebyshev lattice of `4k` points per span.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm_of(|_| None)
    }

    /// Sup over the same lattice of `‖s(t) - f(t)‖_2` when `f` returns a
    /// value; the closure returns `None` to compare against zero.
    pub fn sup_norm_of(&self, mut f: impl FnMut(f64) -> Option<Vec<f64>>) -> f64 {
        let m = 4 * self.space.order;
        let mut buf = vec![0.0; self.value_dim()];
        let mut best: f64 = 0.0;
        for (_, a, b) in self.space.spans() {
            for r in 0..m {
                let x = 0.5 - 0.5 * (std::f64::consts::PI * (r as f64 + 0.5) / m as f64).cos();
                let t = a + (b - a) * x;
                self.eval_into(t, &mut buf);
                let diff = match f(t) {
                    Some(v) => buf.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
                    None => buf.iter().map(|a| a * a).sum::<f64>(),
                };
                best = best.max(diff.sqrt());
            }
        }
        best
    }
}

/// Flat serialized form `{order, knots, coeffs}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineRecord {
    pub order: usize,
    pub knots: Vec<f64>,
    pub coeffs: Vec<Vec<f64>>,
}

impl From<&Spline> for SplineRecord {
    fn from(s: &Spline) -> Self {
        Self {
            order: s.space.order,
            knots: s.space.knots.to_vec(),
            coeffs: s.coeffs.rows().into_iter().map(|r| r.to_vec()).collect(),
        }
    }
}

impl TryFrom<SplineRecord> for Spline {
    type Error = Error;

    fn try_from(r: SplineRecord) -> Result<Self> {
        let space = SplineSpace::new(r.order, r.knots)?;
        let d = r.coeffs.first().map_or(0, Vec::len);
        if r.coeffs.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidArgument("ragged coefficient rows".into()));
        }
        let flat: Vec<f64> = r.coeffs.into_iter().flatten().collect();
        let coeffs = Array2::from_shape_vec((flat.len() / d.max(1), d), flat)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Spline::new(space, coeffs)
    }
}

impl Serialize for Spline {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SplineRecord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Spline {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let record = SplineRecord::deserialize(d)?;
        Spline::try_from(record).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(order: usize, interior: &[f64]) -> SplineSpace {
        SplineSpace::from_grid(&Grid::from_interior(order, interior).unwrap())
    }

    #[test]
    fn indicator_basis() {
        let s = space(1, &[0.5]);
        assert_eq!(s.nonzero_basis(0.25), vec![(0, 1.0)]);
        assert_eq!(s.nonzero_basis(0.5), vec![(1, 1.0)]);
        assert_eq!(s.nonzero_basis(1.0), vec![(1, 1.0)]);
    }

    #[test]
    fn hat_midpoint() {
        let s = space(2, &[0.5]);
        assert_eq!(s.nonzero_basis(0.25), vec![(0, 0.5), (1, 0.5)]);
    }

    #[test]
    fn right_end_partition_of_unity() {
        for k in 1..=5 {
            let s = space(k, &[0.2, 0.7]);
            let sum: f64 = s.nonzero_basis(1.0).iter().map(|p| p.1).sum();
            assert!((sum - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn local_support_is_exact_zero() {
        let s = space(3, &[0.2, 0.4, 0.6, 0.8]);
        for i in 0..s.dim() {
            let (a, b) = s.support(i);
            for t in [0.0, 0.1, 0.3, 0.5, 0.7, 0.9] {
                if t < a || t > b {
                    assert_eq!(s.basis_value(i, t), 0.0);
                }
            }
        }
    }

    #[test]
    fn integrals() {
        let s = space(1, &[0.3]);
        assert!((s.basis_integral(0) - 0.3).abs() < 1e-15);
        let s = space(2, &[0.4]);
        assert!((s.basis_integral(1) - 0.5).abs() < 1e-15);
        assert!((s.basis_integral(0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn insert_knot_order_one_duplicates() {
        let s = Spline::scalar(space(1, &[0.5]), vec![2.0, 3.0]).unwrap();
        let r = s.insert_knot(0.25).unwrap();
        assert_eq!(r.coeffs().column(0).to_vec(), vec![2.0, 2.0, 3.0]);
        assert!(s.insert_knot(0.5).is_err());
    }

    #[test]
    fn insert_knot_multiplicity_overflow() {
        let s = Spline::scalar(space(3, &[0.5, 0.5]), vec![1.0; 5]).unwrap();
        assert!(matches!(s.insert_knot(0.5), Err(Error::Multiplicity { .. })));
        assert!(s.insert_knot(0.0).is_err());
    }

    #[test]
    fn record_roundtrip() {
        let s = Spline::scalar(space(2, &[0.5]), vec![1.0, -1.0, 0.5]).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"order\":2"));
        let back: Spline = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }
}
