//! Banded Gram matrices, their Cholesky factors, dual B-spline coefficients
//! and the empirical fit of the off-diagonal decay of the Gram inverse.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::basis::SplineSpace;
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Dimension up to which the Gram inverse is stored densely.
pub const DENSE_LIMIT: usize = 2000;

/// Pivots at or below this value are treated as a structural failure.
const PIVOT_FLOOR: f64 = 1e-300;

/// Offsets whose scaled Gram-inverse entries fall below this level are
/// treated as rounding noise by [`fit_decay`].
pub const NOISE_FLOOR: f64 = 1e-14;

/// Symmetric positive definite band matrix, lower band stored row-wise:
/// `band[i * (bw + 1) + r] = M[i][i - r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSpd {
    dim: usize,
    bandwidth: usize,
    band: Vec<f64>,
    factor: Option<Vec<f64>>,
}

impl BandedSpd {
    pub fn zeros(dim: usize, bandwidth: usize) -> Self {
        Self {
            dim,
            bandwidth,
            band: vec![0.0; dim * (bandwidth + 1)],
            factor: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let r = hi - lo;
        (r <= self.bandwidth).then_some(hi * (self.bandwidth + 1) + r)
    }

    /// Entry `(i, j)`; exactly zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.band[s])
    }

    /// Adds `v` to entry `(i, j)` (and its mirror). Panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).expect("entry outside the band");
        self.band[s] += v;
        self.factor = None;
    }

    pub fn to_dense(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.dim, self.dim), |(i, j)| self.get(i, j))
    }

    /// `y = M x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let bw = self.bandwidth;
        let mut y = vec![0.0; self.dim];
        for i in 0..self.dim {
            for r in 0..=bw.min(i) {
                let v = self.band[i * (bw + 1) + r];
                let j = i - r;
                y[i] += v * x[j];
                if r > 0 {
                    y[j] += v * x[i];
                }
            }
        }
        y
    }

    /// Banded Cholesky `M = L Lᵀ`, computed once.
    pub fn factorize(&mut self) -> Result<()> {
        if self.factor.is_some() {
            return Ok(());
        }
        let bw = self.bandwidth;
        let w = bw + 1;
        let mut l = self.band.clone();
        for i in 0..self.dim {
            let first = i.saturating_sub(bw);
            for j in first..=i {
                // L[i][j] = (M[i][j] - Σ_{p<j} L[i][p] L[j][p]) / L[j][j]
                let mut s = l[i * w + (i - j)];
                let start = first.max(j.saturating_sub(bw));
                for p in start..j {
                    s -= l[i * w + (i - p)] * l[j * w + (j - p)];
                }
                if i == j {
                    if !(s > PIVOT_FLOOR) {
                        return Err(Error::Factorization { index: i, pivot: s });
                    }
                    l[i * w] = s.sqrt();
                } else {
                    l[i * w + (i - j)] = s / l[j * w];
                }
            }
        }
        self.factor = Some(l);
        Ok(())
    }

    pub fn is_factorized(&self) -> bool {
        self.factor.is_some()
    }

    /// Solves `M x = b` in place. Requires [`BandedSpd::factorize`].
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        let l = self
            .factor
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("matrix is not factorized".into()))?;
        if b.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: b.len(),
            });
        }
        let bw = self.bandwidth;
        let w = bw + 1;
        for i in 0..self.dim {
            let mut s = b[i];
            for p in i.saturating_sub(bw)..i {
                s -= l[i * w + (i - p)] * b[p];
            }
            b[i] = s / l[i * w];
        }
        for i in (0..self.dim).rev() {
            let mut s = b[i];
            for p in i + 1..(i + w).min(self.dim) {
                s -= l[p * w + (p - i)] * b[p];
            }
            b[i] = s / l[i * w];
        }
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    /// Solves column by column.
    pub fn solve_matrix(&self, b: &Array2<f64>) -> Result<Array2<f64>> {
        let mut out = b.clone();
        let mut col = vec![0.0; self.dim];
        for c in 0..b.ncols() {
            col.iter_mut().zip(b.column(c)).for_each(|(x, v)| *x = *v);
            self.solve_in_place(&mut col)?;
            out.column_mut(c).iter_mut().zip(&col).for_each(|(o, v)| *o = *v);
        }
        Ok(out)
    }
}

/// `G_ij = ∫ N_i N_j dλ`, exact: `k` Gauss–Legendre nodes per span integrate
/// the degree `2k - 2` products without error.
pub fn gram_matrix(space: &SplineSpace) -> BandedSpd {
    let k = space.order();
    let mut g = BandedSpd::zeros(space.dim(), k - 1);
    let rule = GaussLegendre::cached(k);
    for (mu, a, b) in space.spans() {
        for (u, w) in rule.offsets(b - a) {
            let vals = space.nonzero_basis_local(mu, u);
            for (p, &(i, vi)) in vals.iter().enumerate() {
                for &(j, vj) in &vals[..=p] {
                    g.add(i, j, w * vi * vj);
                }
            }
        }
    }
    g
}

/// The dual basis `N_i* = Σ_j a_ij N_j` of a spline space, with `A = G⁻¹`.
#[derive(Debug, Clone)]
pub struct DualBasis {
    space: SplineSpace,
    gram: BandedSpd,
    dense: Option<Array2<f64>>,
}

impl DualBasis {
    pub fn new(space: &SplineSpace) -> Result<Self> {
        let mut gram = gram_matrix(space);
        gram.factorize()?;
        let dense = if space.dim() <= DENSE_LIMIT {
            Some(gram.solve_matrix(&Array2::eye(space.dim()))?)
        } else {
            None
        };
        let mut out = Self {
            space: space.clone(),
            gram,
            dense,
        };
        if let Some(a) = out.dense.as_mut() {
            // symmetrize away rounding asymmetry
            let n = a.nrows();
            for i in 0..n {
                for j in 0..i {
                    let m = 0.5 * (a[[i, j]] + a[[j, i]]);
                    a[[i, j]] = m;
                    a[[j, i]] = m;
                }
            }
        }
        Ok(out)
    }

    pub fn space(&self) -> &SplineSpace {
        &self.space
    }

    pub fn gram(&self) -> &BandedSpd {
        &self.gram
    }

    /// Dense `A`, present for `dim ≤ DENSE_LIMIT`.
    pub fn dense(&self) -> Option<&Array2<f64>> {
        self.dense.as_ref()
    }

    /// Row `a_i·` of the Gram inverse.
    pub fn row(&self, i: usize) -> Vec<f64> {
        match &self.dense {
            Some(a) => a.row(i).to_vec(),
            None => {
                let mut e = vec![0.0; self.space.dim()];
                e[i] = 1.0;
                self.gram.solve_in_place(&mut e).expect("factorized Gram");
                e
            }
        }
    }

    /// Dense `A`, computing it when it is not stored.
    pub fn dual_coefficients(&self) -> Array2<f64> {
        match &self.dense {
            Some(a) => a.clone(),
            None => self
                .gram
                .solve_matrix(&Array2::eye(self.space.dim()))
                .expect("factorized Gram"),
        }
    }

    /// `N_i*(t) = Σ_j a_ij N_j(t)`.
    pub fn eval_dual(&self, i: usize, t: f64) -> f64 {
        let nz = self.space.nonzero_basis(t);
        match &self.dense {
            Some(a) => nz.iter().map(|&(j, v)| a[[i, j]] * v).sum(),
            None => {
                let row = self.row(i);
                nz.iter().map(|&(j, v)| row[j] * v).sum()
            }
        }
    }

    /// Solves `G c = b` for coefficient columns.
    pub fn apply_inverse(&self, b: &Array2<f64>) -> Result<Array2<f64>> {
        self.gram.solve_matrix(b)
    }
}

/// Fitted geometric decay `|a_ij| h_ij ≈ C q^{|i-j|}` of the Gram inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub q_hat: f64,
    pub c_hat: f64,
    /// `r_m / q_hat^m` for the offsets `m` above the noise floor, where
    /// `r_m = max_{|i-j|=m} |a_ij| h_ij`.
    pub residuals: Vec<(usize, f64)>,
    /// Offsets used by the regression.
    pub fit_offsets: (usize, usize),
}

impl DecayFit {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.1).fold(0.0, f64::max)
    }
}

/// `r_m = max_{|i-j|=m} |a_ij| h_ij` for `m = 0..dim`.
pub fn scaled_offset_maxima(space: &SplineSpace, a: &Array2<f64>) -> Vec<f64> {
    let n = space.dim();
    let mut r = vec![0.0f64; n];
    for i in 0..n {
        for j in i..n {
            let v = a[[i, j]].abs() * space.hull_length(i, j);
            r[j - i] = r[j - i].max(v);
        }
    }
    r
}

/// Least-squares fit of `log r_m` against `m`.
///
/// Offsets with `r_m` below [`NOISE_FLOOR`] are discarded, as are the last
/// `k` offsets (boundary pairs only). The regression
/// runs over the upper half of the remaining offsets: at small offsets the
/// boundary rows and the polynomial growth of `h_ij` bend the curve, while
/// the tail shows the asymptotic ratio. `C_hat` is the smallest constant
/// with `r_m ≤ C_hat q_hat^m` on every retained offset.
pub fn fit_decay(space: &SplineSpace, duals: &DualBasis) -> Result<DecayFit> {
    let k = space.order();
    let dim = space.dim();
    if dim <= k {
        return Err(Error::InsufficientSize { dim, order: k });
    }
    let a = duals.dual_coefficients();
    let r = scaled_offset_maxima(space, &a);
    if k == 1 {
        return Ok(DecayFit {
            q_hat: 0.0,
            c_hat: r[0],
            residuals: vec![(0, r[0])],
            fit_offsets: (0, 0),
        });
    }
    // The last k offsets only pair the first and last few B-splines, which
    // see both padded ends at once; they fall off a cliff on graded grids.
    let reach = if dim > 2 * k + 2 { dim - k } else { dim };
    let kept: Vec<usize> = (0..reach).take_while(|&m| r[m] >= NOISE_FLOOR).collect();
    let start = if kept.len() >= 4 { kept.len() / 2 } else { 0 };
    let used = &kept[start..];
    let q_hat = if used.len() < 2 {
        r[1] / r[0]
    } else {
        let xs: Vec<f64> = used.iter().map(|&m| m as f64).collect();
        let ys: Vec<f64> = used.iter().map(|&m| r[m].ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        (sxy / sxx).exp()
    };
    let residuals: Vec<(usize, f64)> = kept
        .iter()
        .map(|&m| (m, r[m] / q_hat.powi(m as i32)))
        .collect();
    let c_hat = residuals.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(DecayFit {
        q_hat,
        c_hat,
        residuals,
        fit_offsets: (used[0], used[used.len() - 1]),
    })
}

/// One CSV row `(k, n, family, q_hat, C_hat, max_residual)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub k: usize,
    pub n: usize,
    pub family: String,
    pub q_hat: f64,
    pub c_hat: f64,
    pub max_residual: f64,
}

impl DecayRow {
    pub fn new(k: usize, n: usize, family: impl Into<String>, fit: &DecayFit) -> Self {
        Self {
            k,
            n,
            family: family.into(),
            q_hat: fit.q_hat,
            c_hat: fit.c_hat,
            max_residual: fit.max_residual(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knots::Grid;

    fn space(order: usize, interior: &[f64]) -> SplineSpace {
        SplineSpace::from_grid(&Grid::from_interior(order, interior).unwrap())
    }

    #[test]
    fn piecewise_constant_gram_is_diagonal() {
        let g = gram_matrix(&space(1, &[0.5]));
        assert_eq!(g.to_dense(), ndarray::arr2(&[[0.5, 0.0], [0.0, 0.5]]));
    }

    #[test]
    fn linear_hats_on_one_span() {
        let g = gram_matrix(&space(2, &[])).to_dense();
        let want = [[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((g[[i, j]] - want[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn cholesky_solves() {
        let s = space(4, &[0.1, 0.2, 0.2, 0.55, 0.7, 0.9]);
        let mut g = gram_matrix(&s);
        g.factorize().unwrap();
        let x: Vec<f64> = (0..s.dim()).map(|i| (i as f64).sin()).collect();
        let b = g.mul_vec(&x);
        let y = g.solve(&b).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn non_spd_is_rejected() {
        let mut m = BandedSpd::zeros(2, 1);
        m.add(0, 0, 1.0);
        m.add(1, 0, 2.0);
        m.add(1, 1, 1.0);
        assert!(matches!(m.factorize(), Err(Error::Factorization { index: 1, .. })));
    }

    #[test]
    fn k1_duals_are_normalized_indicators() {
        let s = space(1, &[0.25, 0.5]);
        let d = DualBasis::new(&s).unwrap();
        assert!((d.eval_dual(0, 0.1) - 4.0).abs() < 1e-14);
        assert!((d.eval_dual(2, 0.7) - 2.0).abs() < 1e-14);
        assert_eq!(d.eval_dual(0, 0.7), 0.0);
        let fit = fit_decay(&s, &d).unwrap();
        assert_eq!(fit.q_hat, 0.0);
    }

    #[test]
    fn too_small_for_fit() {
        let s = space(3, &[]);
        let d = DualBasis::new(&s).unwrap();
        assert!(matches!(fit_decay(&s, &d), Err(Error::InsufficientSize { .. })));
    }

    #[test]
    fn uniform_linear_ratio() {
        let s = SplineSpace::from_grid(&Grid::uniform(2, 99).unwrap());
        let d = DualBasis::new(&s).unwrap();
        let a = d.dense().unwrap();
        let ratio = (a[[50, 51]] / a[[50, 50]]).abs();
        assert!((ratio - (2.0 - 3f64.sqrt())).abs() < 1e-6);
        let fit = fit_decay(&s, &d).unwrap();
        assert!((fit.q_hat - (2.0 - 3f64.sqrt())).abs() < 0.02, "{}", fit.q_hat);
    }
}
