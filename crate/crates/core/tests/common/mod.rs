#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use spline_martingale::basis::max_interior_multiplicity;
use spline_martingale::knots::Grid;
use spline_martingale::SplineSpace;

pub use rand::SeedableRng;

pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random interior knots in (0, 1), sorted, with occasional repeats up to
/// the admissible multiplicity.
pub fn random_interior(rng: &mut ChaCha8Rng, order: usize, max_knots: usize) -> Vec<f64> {
    let n = rng.random_range(0..=max_knots);
    let mut knots: Vec<f64> = Vec::with_capacity(n);
    let mult = max_interior_multiplicity(order);
    while knots.len() < n {
        let x: f64 = rng.random_range(0.001..0.999);
        let reps = if mult > 1 && rng.random_bool(0.2) {
            rng.random_range(2..=mult)
        } else {
            1
        };
        for _ in 0..reps.min(n - knots.len()) {
            knots.push(x);
        }
    }
    knots.sort_by(f64::total_cmp);
    knots
}

pub fn random_space(rng: &mut ChaCha8Rng, order: usize, max_knots: usize) -> SplineSpace {
    let interior = random_interior(rng, order, max_knots);
    SplineSpace::from_grid(&Grid::from_interior(order, &interior).unwrap())
}

/// Dense Gauss–Jordan inverse with partial pivoting.
pub fn dense_inverse(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .unwrap();
        a.swap(col, piv);
        let d = a[col][col];
        a[col].iter_mut().for_each(|v| *v /= d);
        for row in 0..n {
            if row != col {
                let f = a[row][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        a[row][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    a.into_iter().map(|r| r[n..].to_vec()).collect()
}
