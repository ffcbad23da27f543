//! Knot programs: generators of interior knot sequences in (0, 1) together
//! with an analytic description of where the sequence accumulates.

use serde::{Deserialize, Serialize};

use super::accumulation::{AccumulationSet, Piece};
use super::grid::Grid;
use crate::error::{Error, Result};

/// Side from which a geometric sequence approaches its target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Left,
    Right,
    /// Alternates between the left and the right branch.
    Both,
}

/// The families of knot sequences the harness knows how to generate.
///
/// Every family except [`KnotFamily::UniformDense`] describes a single
/// infinite (or finite) sequence `t_1, t_2, ...`, so that the grids realized
/// for increasing `n` are nested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum KnotFamily {
    /// A finite list, emitted in the given order.
    ExplicitList { knots: Vec<f64> },
    /// `n` equispaced interior knots `i/(n+1)`. Grids for different `n` are
    /// not nested, so this family is only valid for single-grid experiments.
    UniformDense,
    /// Dyadic enumeration `1/2, 1/4, 3/4, 1/8, 3/8, ...`.
    DyadicDense,
    /// `target ∓ dist · ratio^i` approaching `target` from the given side.
    GeometricToPoint {
        target: f64,
        ratio: f64,
        #[serde(default = "default_side")]
        side: Side,
    },
    /// Dyadic enumeration mapped affinely onto `(a, b)`.
    DenseInSubinterval { a: f64, b: f64 },
    /// Round-robin interleaving of the parts.
    Concatenation { parts: Vec<KnotFamily> },
}

fn default_side() -> Side {
    Side::Left
}

/// A knot family together with the spline order it is used with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotProgram {
    pub family: KnotFamily,
    pub order: usize,
}

/// `i`-th (zero based) element of the dyadic enumeration of (0, 1).
pub(crate) fn dyadic_point(i: usize) -> f64 {
    let m = i as u64 + 1;
    let level = 64 - m.leading_zeros(); // m in [2^{level-1}, 2^level)
    let offset = m - (1u64 << (level - 1));
    let numerator = 2 * offset + 1;
    numerator as f64 / (1u64 << level) as f64
}

impl KnotFamily {
    pub fn validate(&self) -> Result<()> {
        match self {
            KnotFamily::ExplicitList { knots } => {
                for &x in knots {
                    if !(x > 0.0 && x < 1.0) {
                        return Err(Error::InvalidProgram(format!(
                            "explicit knot {x} is not in the open interval (0, 1)"
                        )));
                    }
                }
                Ok(())
            }
            KnotFamily::UniformDense | KnotFamily::DyadicDense => Ok(()),
            KnotFamily::GeometricToPoint {
                target,
                ratio,
                side,
            } => {
                if !(*ratio > 0.0 && *ratio < 1.0) {
                    return Err(Error::InvalidProgram(format!(
                        "geometric ratio {ratio} must lie in (0, 1)"
                    )));
                }
                if !(0.0..=1.0).contains(target) {
                    return Err(Error::InvalidProgram(format!(
                        "geometric target {target} must lie in [0, 1]"
                    )));
                }
                let needs_left = matches!(side, Side::Left | Side::Both);
                let needs_right = matches!(side, Side::Right | Side::Both);
                if (needs_left && *target <= 0.0) || (needs_right && *target >= 1.0) {
                    return Err(Error::InvalidProgram(format!(
                        "target {target} cannot be approached from side {side:?} inside (0, 1)"
                    )));
                }
                Ok(())
            }
            KnotFamily::DenseInSubinterval { a, b } => {
                if !(0.0 <= *a && a < b && *b <= 1.0) {
                    return Err(Error::InvalidProgram(format!(
                        "dense sub-interval ({a}, {b}) must satisfy 0 <= a < b <= 1"
                    )));
                }
                Ok(())
            }
            KnotFamily::Concatenation { parts } => {
                if parts.is_empty() {
                    return Err(Error::InvalidProgram("empty concatenation".into()));
                }
                for p in parts {
                    if !p.is_sequence() {
                        return Err(Error::InvalidProgram(
                            "uniform-dense cannot be part of a concatenation".into(),
                        ));
                    }
                    p.validate()?;
                }
                Ok(())
            }
        }
    }

    /// Whether the family is a single sequence (nested grids).
    pub fn is_sequence(&self) -> bool {
        match self {
            KnotFamily::UniformDense => false,
            KnotFamily::Concatenation { parts } => parts.iter().all(KnotFamily::is_sequence),
            _ => true,
        }
    }

    /// Number of knots the family can produce, `None` if unbounded.
    pub fn capacity(&self) -> Option<usize> {
        match self {
            KnotFamily::ExplicitList { knots } => Some(knots.len()),
            KnotFamily::Concatenation { parts } => parts
                .iter()
                .map(KnotFamily::capacity)
                .try_fold(0usize, |acc, c| c.map(|c| acc + c)),
            _ => None,
        }
    }

    fn geometric_knot(target: f64, ratio: f64, side: Side, i: usize) -> f64 {
        // i is zero based; the branch index starts at 1.
        let (left, branch) = match side {
            Side::Left => (true, i + 1),
            Side::Right => (false, i + 1),
            Side::Both => (i.is_multiple_of(2), i / 2 + 1),
        };
        let scale = ratio.powi(branch as i32);
        if left {
            target - target * scale
        } else {
            target + (1.0 - target) * scale
        }
    }

    /// The first `n` interior knots in generation order.
    pub fn interior_knots(&self, n: usize) -> Result<Vec<f64>> {
        self.validate()?;
        if let Some(cap) = self.capacity() {
            if n > cap {
                return Err(Error::Exhausted {
                    available: cap,
                    requested: n,
                });
            }
        }
        let knots = match self {
            KnotFamily::ExplicitList { knots } => knots[..n].to_vec(),
            KnotFamily::UniformDense => (1..=n).map(|i| i as f64 / (n + 1) as f64).collect(),
            KnotFamily::DyadicDense => (0..n).map(dyadic_point).collect(),
            KnotFamily::DenseInSubinterval { a, b } => {
                (0..n).map(|i| a + (b - a) * dyadic_point(i)).collect()
            }
            KnotFamily::GeometricToPoint {
                target,
                ratio,
                side,
            } => {
                let mut out = Vec::with_capacity(n);
                for i in 0..n {
                    let x = Self::geometric_knot(*target, *ratio, *side, i);
                    let prev = match side {
                        Side::Both if i >= 2 => Some(out[i - 2]),
                        Side::Left | Side::Right if i >= 1 => Some(out[i - 1]),
                        _ => None,
                    };
                    if x == *target || !(x > 0.0 && x < 1.0) || prev == Some(x) {
                        return Err(Error::Resolution { index: i, value: x });
                    }
                    out.push(x);
                }
                out
            }
            KnotFamily::Concatenation { parts } => {
                let caps: Vec<Option<usize>> = parts.iter().map(KnotFamily::capacity).collect();
                let mut counts = vec![0usize; parts.len()];
                let mut out = Vec::with_capacity(n);
                while out.len() < n {
                    for (p, part) in parts.iter().enumerate() {
                        if out.len() == n {
                            break;
                        }
                        if caps[p].is_some_and(|c| counts[p] >= c) {
                            continue;
                        }
                        counts[p] += 1;
                        let generated = part.interior_knots(counts[p])?;
                        out.push(generated[counts[p] - 1]);
                    }
                }
                out
            }
        };
        Ok(knots)
    }

    /// The analytically known accumulation set of the infinite sequence.
    pub fn declared_accumulation(&self) -> AccumulationSet {
        let pieces = match self {
            KnotFamily::ExplicitList { .. } => vec![],
            KnotFamily::UniformDense | KnotFamily::DyadicDense => {
                vec![Piece::interval(0.0, 1.0)]
            }
            KnotFamily::DenseInSubinterval { a, b } => vec![Piece::interval(*a, *b)],
            KnotFamily::GeometricToPoint { target, side, .. } => {
                let from_below = matches!(side, Side::Left | Side::Both);
                let from_above = matches!(side, Side::Right | Side::Both);
                vec![Piece::point(*target, from_below, from_above)]
            }
            KnotFamily::Concatenation { parts } => parts
                .iter()
                .flat_map(|p| p.declared_accumulation().pieces().to_vec())
                .collect(),
        };
        AccumulationSet::new(pieces)
    }

    /// Short label used in CSV output.
    pub fn label(&self) -> String {
        match self {
            KnotFamily::ExplicitList { knots } => format!("explicit-list({})", knots.len()),
            KnotFamily::UniformDense => "uniform-dense".into(),
            KnotFamily::DyadicDense => "dyadic-dense".into(),
            KnotFamily::GeometricToPoint {
                target,
                ratio,
                side,
            } => format!("geometric-to-point({target};{ratio};{side:?})"),
            KnotFamily::DenseInSubinterval { a, b } => format!("dense-in-subinterval({a};{b})"),
            KnotFamily::Concatenation { parts } => {
                let inner: Vec<String> = parts.iter().map(KnotFamily::label).collect();
                format!("concatenation({})", inner.join("+"))
            }
        }
    }
}

impl KnotProgram {
    pub fn new(family: KnotFamily, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidOrder);
        }
        family.validate()?;
        Ok(Self { family, order })
    }

    pub fn interior_knots(&self, n: usize) -> Result<Vec<f64>> {
        let knots = self.family.interior_knots(n)?;
        check_multiplicity(&knots, self.order)?;
        Ok(knots)
    }

    /// The augmented grid `Δ_n`: the first `n` interior knots plus `k`
    /// copies of each endpoint, sorted.
    pub fn realize(&self, n: usize) -> Result<Grid> {
        let interior = self.interior_knots(n)?;
        Grid::from_interior(self.order, &interior)
    }

    pub fn declared_accumulation(&self) -> AccumulationSet {
        self.family.declared_accumulation()
    }

    /// Up to `n` interior knots, stopping early where the sequence runs out of
    /// `f64` resolution (every later knot would coincide with an earlier one).
    pub fn representable_prefix(&self, n: usize) -> Result<Vec<f64>> {
        match self.family.interior_knots(n) {
            Err(Error::Resolution { index, .. }) => self.family.interior_knots(index),
            other => other,
        }
    }

    /// Empirical accumulation estimate from the first `n` knots (or the
    /// representable prefix): knots with at
    /// least `K(eps) = max(3, ⌈log2(1/eps)⌉)` knots (including themselves)
    /// within distance `eps`, thinned to an `eps`-separated set.
    pub fn estimate_accumulation(&self, n: usize, eps: f64) -> Result<Vec<f64>> {
        if n == 0 || !(eps > 0.0) {
            return Err(Error::InvalidArgument(
                "estimate_accumulation needs n >= 1 and eps > 0".into(),
            ));
        }
        let mut knots = self.representable_prefix(n)?;
        knots.sort_by(f64::total_cmp);
        let threshold = ((1.0 / eps).log2().ceil() as usize).max(3);
        let mut out: Vec<f64> = Vec::new();
        let (mut lo, mut hi) = (0usize, 0usize);
        for (i, &x) in knots.iter().enumerate() {
            while knots[lo] < x - eps {
                lo += 1;
            }
            if hi < i {
                hi = i;
            }
            while hi + 1 < knots.len() && knots[hi + 1] <= x + eps {
                hi += 1;
            }
            if hi + 1 - lo >= threshold && out.last().is_none_or(|&last| x - last > eps) {
                out.push(x);
            }
        }
        Ok(out)
    }
}

/// Rejects knot lists in which an interior value repeats more than `k - 1`
/// times (more than once for `k = 1`).
pub(crate) fn check_multiplicity(knots: &[f64], order: usize) -> Result<()> {
    let mut sorted = knots.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let max = crate::basis::max_interior_multiplicity(order);
        if j - i > max {
            return Err(Error::Multiplicity {
                value: sorted[i],
                count: j - i,
                n: knots.len(),
                max,
            });
        }
        i = j;
    }
    Ok(())
}
