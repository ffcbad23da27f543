//! Splitting `[0, 1]` along the accumulation set of a knot sequence.
//!
//! `U` is the complement of the accumulation set, written as a disjoint
//! union of intervals `U_j` (ordered by left endpoint). `B_j` collects the
//! boundary points of `U_j` that no knot sequence inside `U_j` converges to,
//! and `V_j = U_j ∪ B_j`.

use serde::{Deserialize, Serialize};

use super::accumulation::AccumulationSet;
use super::program::KnotProgram;
use crate::error::{Error, Result};

/// One connected component `U_j` of the accumulation-free set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub lo: f64,
    pub hi: f64,
    /// `lo` belongs to `U_j` (only possible for `lo = 0` when 0 is not an
    /// accumulation point).
    pub lo_in_u: bool,
    pub hi_in_u: bool,
    /// `lo ∈ B_j`.
    pub lo_in_b: bool,
    pub hi_in_b: bool,
}

impl Component {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn lo_in_v(&self) -> bool {
        self.lo_in_u || self.lo_in_b
    }

    pub fn hi_in_v(&self) -> bool {
        self.hi_in_u || self.hi_in_b
    }

    pub fn in_u(&self, t: f64) -> bool {
        (self.lo < t && t < self.hi) || (t == self.lo && self.lo_in_u) || (t == self.hi && self.hi_in_u)
    }

    pub fn in_v(&self, t: f64) -> bool {
        (self.lo < t && t < self.hi) || (t == self.lo && self.lo_in_v()) || (t == self.hi && self.hi_in_v())
    }

    /// Boundary points of `U_j` relative to `[0, 1]`.
    pub fn boundary(&self) -> Vec<f64> {
        let mut out = Vec::new();
        if !self.lo_in_u {
            out.push(self.lo);
        }
        if !self.hi_in_u {
            out.push(self.hi);
        }
        out
    }

    /// Boundary points outside `B_j`: knots inside `U_j` converge to them.
    pub fn open_ends(&self) -> Vec<f64> {
        let mut out = Vec::new();
        if !self.lo_in_v() {
            out.push(self.lo);
        }
        if !self.hi_in_v() {
            out.push(self.hi);
        }
        out
    }
}

/// `[0,1] = U ∪ (accumulation set)` with `U = ∪ U_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub components: Vec<Component>,
    pub accumulation: AccumulationSet,
}

impl Decomposition {
    pub fn from_accumulation(accumulation: AccumulationSet) -> Result<Self> {
        for p in accumulation.pieces() {
            if !(0.0 <= p.lo && p.lo <= p.hi && p.hi <= 1.0) {
                return Err(Error::UnsupportedAccumulation(format!(
                    "piece [{}, {}] is not inside [0, 1]",
                    p.lo, p.hi
                )));
            }
        }
        let pieces = accumulation.pieces();
        let mut components = Vec::new();
        // (position, end belongs to U, end approached from inside U)
        let mut left = (0.0, true, false);
        let mut idx = 0;
        loop {
            let (right, right_in_u, right_approached) = match pieces.get(idx) {
                Some(p) => (p.lo, false, p.from_below),
                None => (1.0, true, false),
            };
            if right > left.0 {
                components.push(Component {
                    lo: left.0,
                    hi: right,
                    lo_in_u: left.1,
                    hi_in_u: right_in_u,
                    lo_in_b: !left.1 && !left.2,
                    hi_in_b: !right_in_u && !right_approached,
                });
            }
            match pieces.get(idx) {
                Some(p) => left = (p.hi, false, p.from_above),
                None => break,
            }
            idx += 1;
        }
        Ok(Self {
            components,
            accumulation,
        })
    }

    /// Index of the component `U_j` containing `t`.
    pub fn component_of(&self, t: f64) -> Option<usize> {
        self.components.iter().position(|c| c.in_u(t))
    }

    pub fn in_v(&self, t: f64) -> bool {
        self.components.iter().any(|c| c.in_v(t))
    }

    /// `λ(V^c)`, which equals the measure of the accumulation set.
    pub fn v_complement_measure(&self) -> f64 {
        self.accumulation.measure()
    }

    /// Points where a.e. statements may fail: component boundaries.
    pub fn exceptional_points(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self.components.iter().flat_map(|c| c.boundary()).collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

impl KnotProgram {
    /// Decomposition of `[0, 1]` induced by the declared accumulation set.
    pub fn decompose(&self) -> Result<Decomposition> {
        self.family.validate()?;
        Decomposition::from_accumulation(self.declared_accumulation())
    }
}
