mod common;

use common::{random_space, rng};
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;
use spline_martingale::basis::bspline_by_recursion;
use spline_martingale::knots::Grid;
use spline_martingale::{Spline, SplineSpace};

fn space(k: usize, interior: &[f64]) -> SplineSpace {
    SplineSpace::from_grid(&Grid::from_interior(k, interior).unwrap())
}

#[test]
fn eval_basis_examples() {
    let s = space(1, &[0.5]);
    assert_eq!(s.nonzero_basis(0.25), vec![(0, 1.0)]);
    assert_eq!(s.basis_value(1, 0.25), 0.0);
    let s = space(2, &[0.5]);
    assert_eq!(s.nonzero_basis(0.25), vec![(0, 0.5), (1, 0.5)]);
    // right-continuous inside, left limit at 1
    assert_eq!(space(1, &[0.5]).nonzero_basis(0.5), vec![(1, 1.0)]);
    assert_eq!(space(1, &[0.5]).nonzero_basis(1.0), vec![(1, 1.0)]);
}

#[test]
fn eval_spline_examples() {
    let mut r = rng(21);
    for _ in 0..20 {
        let k = r.random_range(1..=5);
        let s = random_space(&mut r, k, 20);
        let c = Spline::scalar(s.clone(), vec![2.5; s.dim()]).unwrap();
        let lin = Spline::scalar(s.clone(), s.greville()).unwrap();
        for i in 0..=200 {
            let t = i as f64 / 200.0;
            assert!((c.eval(t)[0] - 2.5).abs() <= 1e-14);
            if k >= 2 {
                assert!((lin.eval(t)[0] - t).abs() <= 1e-14, "k={k} t={t}");
            }
        }
        let coeffs = Array2::from_shape_fn((s.dim(), 2), |(i, c)| (i * (c + 1)) as f64);
        let v = Spline::new(s.clone(), coeffs).unwrap();
        for i in 0..=50 {
            let t = i as f64 / 50.0;
            let both = v.eval(t);
            assert_eq!(both[0], v.component(0).eval(t)[0]);
            assert_eq!(both[1], v.component(1).eval(t)[0]);
        }
    }
}

/// Adaptive Simpson oracle on each knot span.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let whole = (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
    let halves = |lo: f64, hi: f64| (hi - lo) / 6.0 * (f(lo) + 4.0 * f(0.5 * (lo + hi)) + f(hi));
    let split = halves(a, m) + halves(m, b);
    if depth == 0 || (split - whole).abs() <= 15.0 * tol {
        split + (split - whole) / 15.0
    } else {
        simpson(f, a, m, 0.5 * tol, depth - 1) + simpson(f, m, b, 0.5 * tol, depth - 1)
    }
}

#[test]
fn basis_integral_examples() {
    let s = space(1, &[0.3]);
    assert!((s.basis_integral(0) - 0.3).abs() <= 1e-15);
    let s = space(2, &[0.2, 0.6]);
    assert!((s.basis_integral(1) - 0.3).abs() <= 1e-15);
    let mut r = rng(22);
    for _ in 0..20 {
        let s = random_space(&mut r, 4, 15);
        for i in 0..s.dim() {
            let oracle: f64 = s
                .spans()
                // order 4 B-splines are continuous, so span ends need no care
                .map(|(_, a, b)| simpson(&|t| s.basis_value(i, t), a, b, 1e-15, 30))
                .sum();
            let exact = (s.support(i).1 - s.support(i).0) / 4.0;
            assert!((s.basis_integral(i) - exact).abs() <= 1e-12);
            assert!((oracle - exact).abs() <= 1e-12, "{oracle} {exact}");
        }
    }
}

#[test]
fn insert_knot_examples() {
    let s = Spline::scalar(space(1, &[0.5]), vec![2.0, 3.0]).unwrap();
    let r = s.insert_knot(0.75).unwrap();
    assert_eq!(r.coeffs().column(0).to_vec(), vec![2.0, 3.0, 3.0]);

    // k = 2: the new coefficient interpolates the control polygon at x
    let s = Spline::scalar(space(2, &[0.4]), vec![1.0, 3.0, -1.0]).unwrap();
    let r = s.insert_knot(0.7).unwrap();
    assert_eq!(r.coeffs().column(0).to_vec().len(), 4);
    assert!((r.coeffs()[[2, 0]] - s.eval(0.7)[0]).abs() <= 1e-15);
    for i in 0..1000 {
        let t = i as f64 / 999.0;
        assert!((r.eval(t)[0] - s.eval(t)[0]).abs() <= 1e-13);
    }
}

#[test]
fn refine_examples() {
    let mut r = rng(23);
    for _ in 0..30 {
        let k = r.random_range(1..=5);
        let coarse = random_space(&mut r, k, 10);
        let mut finer = coarse.clone();
        for _ in 0..r.random_range(0..15) {
            let x: f64 = r.random_range(0.01..0.99);
            if let Ok(f) = finer.with_knot(x) {
                finer = f;
            }
        }
        let i = r.random_range(0..coarse.dim());
        let single = Spline::basis_function(coarse.clone(), i);
        let refined = single.refine(&finer).unwrap();
        assert!(refined.coeffs().iter().all(|&c| (-1e-12..=1.0 + 1e-12).contains(&c)));
        for j in 0..2000 {
            let t = j as f64 / 1999.0;
            assert!((refined.eval(t)[0] - single.eval(t)[0]).abs() <= 1e-12);
        }
        assert_eq!(single.refine(&coarse).unwrap(), single);
    }
    let a = space(2, &[0.5]);
    let b = space(2, &[0.25]);
    assert!(Spline::basis_function(a, 0).refine(&b).is_err());
}

#[test]
fn splines_round_trip_through_json() {
    let s = Spline::scalar(space(3, &[0.25, 0.5]), vec![1.0, -2.0, 0.5, 4.0, 3.0]).unwrap();
    let text = serde_json::to_string(&s).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["order"], 3);
    assert_eq!(v["knots"].as_array().unwrap().len(), 8);
    assert_eq!(v["coeffs"].as_array().unwrap().len(), 5);
    let back: Spline = serde_json::from_str(&text).unwrap();
    assert_eq!(back, s);
}

#[test]
fn local_evaluation_on_tiny_spans() {
    let x = 0.5 - 2f64.powi(-40);
    let s = space(4, &[0.25, x, 0.5, 0.75]);
    let (mu, a, b) = s.spans().find(|&(_, a, _)| a == x).unwrap();
    for j in 0..=8 {
        let u = (b - a) * j as f64 / 8.0;
        let local = s.nonzero_basis_local(mu, u);
        let sum: f64 = local.iter().map(|(_, v)| v).sum();
        assert!((sum - 1.0).abs() <= 1e-14);
        assert!(local.iter().all(|&(_, v)| v >= 0.0));
    }
    // on ordinary spans both evaluations agree
    let (mu, a, b) = s.spans().find(|&(_, a, _)| a == 0.25).unwrap();
    for j in 0..=8 {
        let u = (b - a) * j as f64 / 8.0;
        let t = a + u;
        if t < b {
            for (i, v) in s.nonzero_basis_local(mu, u) {
                assert!((v - s.basis_value(i, t)).abs() <= 1e-14);
            }
        }
    }
}

fn space_strategy() -> impl Strategy<Value = SplineSpace> {
    (1usize..=5, any::<u64>()).prop_map(|(k, seed)| random_space(&mut rng(seed), k, 40))
}

proptest! {
    #[test]
    fn partition_of_unity_and_local_support(s in space_strategy(), t in 0.0..=1.0f64) {
        let (first, values) = s.eval_basis(t);
        prop_assert!(values.iter().all(|&v| v >= 0.0));
        prop_assert!((values.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for i in 0..s.dim() {
            let (lo, hi) = s.support(i);
            if t < lo || t > hi {
                prop_assert_eq!(s.basis_value(i, t), 0.0);
            }
        }
        prop_assert!(first >= 0);
    }

    #[test]
    fn cox_de_boor_matches_order_recursion(s in space_strategy(), t in 0.0..1.0f64) {
        for (i, v) in s.nonzero_basis(t) {
            let rec = bspline_by_recursion(s.knots(), s.order(), i, t);
            prop_assert!((rec - v).abs() <= 1e-13, "{} vs {}", rec, v);
        }
    }

    #[test]
    fn insertion_preserves_function_and_is_convex(
        s in space_strategy(),
        seed in any::<u64>(),
        x in 0.001..0.999f64,
    ) {
        let mut r = rng(seed);
        let coeffs: Vec<f64> = (0..s.dim()).map(|_| r.random_range(-1.0..1.0)).collect();
        let f = Spline::scalar(s.clone(), coeffs.clone()).unwrap();
        let Ok(g) = f.insert_knot(x) else {
            return Ok(());
        };
        let new = g.coeffs().column(0).to_vec();
        for (j, c) in new.iter().enumerate() {
            let (p, q) = (coeffs[j.saturating_sub(1)], coeffs[j.min(coeffs.len() - 1)]);
            prop_assert!(*c >= p.min(q) - 1e-15 && *c <= p.max(q) + 1e-15);
        }
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            prop_assert!((f.eval(t)[0] - g.eval(t)[0]).abs() <= 1e-12);
        }
        prop_assert!(f.sup_norm() <= f.max_coefficient_norm() + 1e-15);
    }
}
