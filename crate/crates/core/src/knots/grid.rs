use serde::{Deserialize, Serialize};

use super::program::check_multiplicity;
use crate::error::{Error, Result};

/// Augmented grid `Δ_n`: `k` copies of 0, the sorted interior knots, `k`
/// copies of 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    order: usize,
    knots: Vec<f64>,
    n: usize,
}

impl Grid {
    pub fn from_interior(order: usize, interior: &[f64]) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidOrder);
        }
        if let Some(&x) = interior.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::InvalidKnots(format!(
                "interior knot {x} is not in (0, 1)"
            )));
        }
        check_multiplicity(interior, order)?;
        let mut knots = Vec::with_capacity(interior.len() + 2 * order);
        knots.extend(std::iter::repeat_n(0.0, order));
        let mut sorted = interior.to_vec();
        sorted.sort_by(f64::total_cmp);
        knots.extend(sorted);
        knots.extend(std::iter::repeat_n(1.0, order));
        Ok(Self {
            order,
            knots,
            n: interior.len(),
        })
    }

    /// `n` equispaced interior knots.
    pub fn uniform(order: usize, n: usize) -> Result<Self> {
        let interior: Vec<f64> = (1..=n).map(|i| i as f64 / (n + 1) as f64).collect();
        Self::from_interior(order, &interior)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of interior knots.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn interior(&self) -> &[f64] {
        &self.knots[self.order..self.knots.len() - self.order]
    }

    /// Dimension of the spline space on this grid.
    pub fn dim(&self) -> usize {
        self.knots.len() - self.order
    }

    pub fn mesh_width(&self) -> f64 {
        mesh_width(&self.knots)
    }

    pub fn grid_interval(&self, t: f64) -> (f64, f64) {
        let mu = positive_span(&self.knots, t);
        (self.knots[mu], self.knots[mu + 1])
    }

    pub fn anchor_index(&self, t: f64) -> usize {
        anchor_index(&self.knots, self.order, t)
    }

    pub fn support(&self, i: usize) -> (f64, f64) {
        (self.knots[i], self.knots[i + self.order])
    }

    pub fn hull_length(&self, i: usize, j: usize) -> f64 {
        hull_length(&self.knots, self.order, i, j)
    }

    /// Whether every knot of `self` (with multiplicity) occurs in `finer`.
    pub fn is_refined_by(&self, finer: &Grid) -> bool {
        self.order == finer.order && is_submultiset(&self.knots, &finer.knots)
    }
}

/// Whether sorted `coarse` is a sub-multiset of sorted `fine`.
pub(crate) fn is_submultiset(coarse: &[f64], fine: &[f64]) -> bool {
    let mut j = 0;
    for &x in coarse {
        while j < fine.len() && fine[j] < x {
            j += 1;
        }
        if j == fine.len() || fine[j] != x {
            return false;
        }
        j += 1;
    }
    true
}

pub(crate) fn mesh_width(knots: &[f64]) -> f64 {
    knots
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max)
}

/// Index `mu` of the leftmost positive-length span `[knots[mu], knots[mu+1]]`
/// containing `t`; points outside the knot range are clamped to the first or
/// last positive span.
pub(crate) fn positive_span(knots: &[f64], t: f64) -> usize {
    let first = knots
        .windows(2)
        .position(|w| w[1] > w[0])
        .expect("knot vector has a positive span");
    let last = knots.len()
        - 2
        - knots
            .windows(2)
            .rev()
            .position(|w| w[1] > w[0])
            .expect("knot vector has a positive span");
    if t <= knots[first + 1] {
        return first;
    }
    if t > knots[last] {
        return last;
    }
    // smallest index m with knots[m] >= t; the span to its left ends at t or beyond.
    let m = knots.partition_point(|&x| x < t);
    // knots[m-1] < t <= knots[m], so [knots[m-1], knots[m]] has positive length.
    m - 1
}

pub(crate) fn anchor_index(knots: &[f64], order: usize, t: f64) -> usize {
    let mu = positive_span(knots, t);
    let dim = knots.len() - order;
    mu.min(dim - 1)
}

pub(crate) fn hull_length(knots: &[f64], order: usize, i: usize, j: usize) -> f64 {
    knots[i + order].max(knots[j + order]) - knots[i].min(knots[j])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_width_examples() {
        let g = Grid::from_interior(2, &[0.3]).unwrap();
        assert!((g.mesh_width() - 0.7).abs() < 1e-15);
        let g = Grid::from_interior(1, &[0.5]).unwrap();
        assert_eq!(g.mesh_width(), 0.5);
    }

    #[test]
    fn grid_interval_examples() {
        let g = Grid::from_interior(2, &[0.3]).unwrap();
        assert_eq!(g.grid_interval(0.4), (0.3, 1.0));
        let g = Grid::from_interior(3, &[0.3, 0.3]).unwrap();
        assert_eq!(g.knots(), &[0.0, 0.0, 0.0, 0.3, 0.3, 1.0, 1.0, 1.0]);
        assert_eq!(g.grid_interval(0.3), (0.0, 0.3));
        let g = Grid::from_interior(1, &[0.5]).unwrap();
        assert_eq!(g.grid_interval(0.0), (0.0, 0.5));
        assert_eq!(g.grid_interval(1.0), (0.5, 1.0));
        assert_eq!(g.grid_interval(0.5), (0.0, 0.5));
    }

    #[test]
    fn anchor_index_examples() {
        let g = Grid::from_interior(1, &[0.5]).unwrap();
        assert_eq!(g.anchor_index(0.25), 0);
        let g = Grid::from_interior(2, &[0.5]).unwrap();
        assert_eq!(g.anchor_index(0.75), 2);
    }

    #[test]
    fn hull_length_examples() {
        let g = Grid::from_interior(1, &[0.5]).unwrap();
        assert_eq!(g.hull_length(0, 1), 1.0);
        assert_eq!(g.hull_length(1, 1), 0.5);
    }

    #[test]
    fn submultiset() {
        assert!(is_submultiset(&[0.0, 0.5, 0.5], &[0.0, 0.25, 0.5, 0.5, 1.0]));
        assert!(!is_submultiset(&[0.0, 0.5, 0.5], &[0.0, 0.25, 0.5, 1.0]));
    }
}
