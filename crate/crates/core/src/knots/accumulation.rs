use serde::{Deserialize, Serialize};

/// A closed piece `[lo, hi]` of an accumulation set (`lo == hi` for a point).
///
/// The flags record whether knots lying *outside* the piece converge to its
/// ends: `from_below` for knots `< lo` converging to `lo`, `from_above` for
/// knots `> hi` converging to `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub from_below: bool,
    pub from_above: bool,
}

impl Piece {
    pub fn point(x: f64, from_below: bool, from_above: bool) -> Self {
        Self {
            lo: x,
            hi: x,
            from_below,
            from_above,
        }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            from_below: false,
            from_above: false,
        }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn distance(&self, x: f64) -> f64 {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            0.0
        }
    }
}

/// Finite union of closed pieces, normalized to be sorted and disjoint.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AccumulationSet {
    pieces: Vec<Piece>,
}

impl AccumulationSet {
    pub fn new(mut pieces: Vec<Piece>) -> Self {
        pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(b.hi.total_cmp(&a.hi)));
        let mut merged: Vec<Piece> = Vec::with_capacity(pieces.len());
        for p in pieces {
            match merged.last_mut() {
                Some(last) if p.lo <= last.hi => {
                    if p.lo == last.lo {
                        last.from_below |= p.from_below;
                    }
                    if p.hi > last.hi {
                        last.hi = p.hi;
                        last.from_above = p.from_above;
                    } else if p.hi == last.hi {
                        last.from_above |= p.from_above;
                    }
                }
                _ => merged.push(p),
            }
        }
        Self { pieces: merged }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.pieces.iter().any(|p| p.lo <= x && x <= p.hi)
    }

    /// Lebesgue measure of the set.
    pub fn measure(&self) -> f64 {
        self.pieces.iter().map(|p| p.hi - p.lo).sum()
    }

    pub fn distance(&self, x: f64) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.distance(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Hausdorff distance between this set and a finite point cloud.
    ///
    /// Interval pieces are discretized with spacing `resolution`.
    pub fn hausdorff(&self, points: &[f64], resolution: f64) -> f64 {
        if self.is_empty() && points.is_empty() {
            return 0.0;
        }
        if self.is_empty() || points.is_empty() {
            return f64::INFINITY;
        }
        let to_set = points
            .iter()
            .map(|&x| self.distance(x))
            .fold(0.0, f64::max);
        let nearest = |y: f64| {
            points
                .iter()
                .map(|&x| (x - y).abs())
                .fold(f64::INFINITY, f64::min)
        };
        let mut to_points: f64 = 0.0;
        for p in &self.pieces {
            let steps = ((p.hi - p.lo) / resolution).ceil().max(0.0) as usize;
            for s in 0..=steps {
                let y = if steps == 0 {
                    p.lo
                } else {
                    p.lo + (p.hi - p.lo) * s as f64 / steps as f64
                };
                to_points = to_points.max(nearest(y));
            }
        }
        to_set.max(to_points)
    }
}
