mod common;

use common::{random_interior, rng};
use proptest::prelude::*;
use rand::Rng;
use spline_martingale::knots::Grid;
use spline_martingale::{Error, KnotFamily, KnotProgram, Side, SplineSpace};

fn explicit(knots: &[f64], k: usize) -> KnotProgram {
    KnotProgram::new(KnotFamily::ExplicitList { knots: knots.to_vec() }, k).unwrap()
}

#[test]
fn realize_examples() {
    assert_eq!(explicit(&[0.5], 2).realize(1).unwrap().knots(), &[0.0, 0.0, 0.5, 1.0, 1.0]);
    let dyadic = KnotProgram::new(KnotFamily::DyadicDense, 2).unwrap();
    assert_eq!(
        dyadic.realize(3).unwrap().knots(),
        &[0.0, 0.0, 0.25, 0.5, 0.75, 1.0, 1.0]
    );
    let err = KnotProgram::new(KnotFamily::ExplicitList { knots: vec![0.5; 3] }, 3)
        .and_then(|p| p.realize(3))
        .unwrap_err();
    assert!(matches!(err, Error::Multiplicity { .. }), "{err:?}");
}

#[test]
fn mesh_width_examples() {
    assert_eq!(Grid::from_interior(2, &[0.3]).unwrap().mesh_width(), 0.7);
    assert_eq!(Grid::from_interior(1, &[0.5]).unwrap().mesh_width(), 0.5);
    let dyadic = KnotProgram::new(KnotFamily::DyadicDense, 3).unwrap();
    for m in 1..8 {
        let g = dyadic.realize((1 << m) - 1).unwrap();
        assert_eq!(g.mesh_width(), 0.5f64.powi(m));
    }
}

#[test]
fn grid_interval_examples() {
    assert_eq!(Grid::from_interior(2, &[0.3]).unwrap().grid_interval(0.4), (0.3, 1.0));
    assert_eq!(Grid::from_interior(3, &[0.3, 0.3]).unwrap().grid_interval(0.3), (0.0, 0.3));
    assert_eq!(Grid::from_interior(1, &[0.5]).unwrap().grid_interval(0.0), (0.0, 0.5));
    assert_eq!(Grid::from_interior(1, &[0.5]).unwrap().grid_interval(1.0), (0.5, 1.0));
}

#[test]
fn anchor_index_examples() {
    assert_eq!(Grid::from_interior(1, &[0.5]).unwrap().anchor_index(0.25), 0);
    assert_eq!(Grid::from_interior(2, &[0.5]).unwrap().anchor_index(0.75), 2);
}

#[test]
fn anchor_index_against_index_scan() {
    let mut r = rng(11);
    for case in 0..100 {
        let k = 1 + case % 5;
        let g = Grid::from_interior(k, &random_interior(&mut r, k, 30)).unwrap();
        let t: f64 = r.random_range(0.0..=1.0);
        let (a, b) = g.grid_interval(t);
        assert!(b > a && a <= t && t <= b);
        let covers = |i: usize| {
            let (lo, hi) = g.support(i);
            lo <= a && b <= hi
        };
        let oracle = (0..g.dim()).rev().find(|&i| covers(i)).unwrap();
        let i = g.anchor_index(t);
        assert_eq!(i, oracle);
        assert!(covers(i));
        assert!(i + 1 >= g.dim() || !covers(i + 1));
    }
}

#[test]
fn hull_length_examples() {
    let g = Grid::from_interior(1, &[0.5]).unwrap();
    assert_eq!(g.hull_length(0, 1), 1.0);
    let mut r = rng(12);
    for _ in 0..50 {
        let k = r.random_range(1..=4);
        let g = Grid::from_interior(k, &random_interior(&mut r, k, 20)).unwrap();
        for i in 0..g.dim() {
            let (a, b) = g.support(i);
            assert_eq!(g.hull_length(i, i), b - a);
            for j in 0..g.dim() {
                let (c, d) = g.support(j);
                assert_eq!(g.hull_length(i, j), b.max(d) - a.min(c));
                assert_eq!(g.hull_length(i, j), g.hull_length(j, i));
            }
        }
    }
}

#[test]
fn decompose_examples() {
    let geo = KnotProgram::new(
        KnotFamily::GeometricToPoint {
            target: 0.5,
            ratio: 0.5,
            side: Side::Left,
        },
        2,
    )
    .unwrap();
    let d = geo.decompose().unwrap();
    assert_eq!(d.components.len(), 2);
    let (left, right) = (d.components[0], d.components[1]);
    assert_eq!((left.lo, left.hi), (0.0, 0.5));
    assert_eq!((right.lo, right.hi), (0.5, 1.0));
    assert!(right.lo_in_b && !left.hi_in_b);
    assert!(right.in_v(0.5) && right.in_v(1.0) && left.in_v(0.0));

    let dense = KnotProgram::new(KnotFamily::DyadicDense, 2).unwrap().decompose().unwrap();
    assert!(dense.components.is_empty());
    assert_eq!(dense.v_complement_measure(), 1.0);

    let finite = explicit(&[0.2, 0.4, 0.6], 2).decompose().unwrap();
    assert_eq!(finite.components.len(), 1);
    assert!((0..=100).all(|i| finite.in_v(i as f64 / 100.0)));
}

#[test]
fn components_are_ordered_and_disjoint() {
    let p = KnotProgram::new(
        KnotFamily::Concatenation {
            parts: vec![
                KnotFamily::GeometricToPoint {
                    target: 0.7,
                    ratio: 0.5,
                    side: Side::Both,
                },
                KnotFamily::DenseInSubinterval { a: 0.1, b: 0.3 },
            ],
        },
        3,
    )
    .unwrap();
    let d = p.decompose().unwrap();
    for w in d.components.windows(2) {
        assert!(w[0].hi <= w[1].lo);
    }
    // approached from both sides: in neither V_j
    assert!(!d.in_v(0.7));
    assert!(d.exceptional_points().contains(&0.7));
}

#[test]
fn estimate_accumulation_examples() {
    let geo = KnotProgram::new(
        KnotFamily::GeometricToPoint {
            target: 0.5,
            ratio: 0.5,
            side: Side::Left,
        },
        2,
    )
    .unwrap();
    let est = geo.estimate_accumulation(200, 1e-3).unwrap();
    assert!(!est.is_empty());
    assert!(est.iter().all(|x| (x - 0.5).abs() <= 1e-3), "{est:?}");

    let five = explicit(&[0.1, 0.3, 0.5, 0.7, 0.9], 2);
    assert!(five.estimate_accumulation(5, 0.05).unwrap().is_empty());

    let sub = KnotProgram::new(KnotFamily::DenseInSubinterval { a: 0.2, b: 0.6 }, 2).unwrap();
    let est = sub.estimate_accumulation(10_000, 1e-2).unwrap();
    // counting oracle: every estimate is near [0.2, 0.6] and the estimates
    // form a 2·eps-net of it
    assert!(est.iter().all(|&x| (0.2 - 1e-2..=0.6 + 1e-2).contains(&x)));
    for i in 0..=40 {
        let y = 0.2 + 0.01 * i as f64;
        assert!(est.iter().any(|x| (x - y).abs() <= 2e-2), "{y}");
    }
    let h = sub.declared_accumulation().hausdorff(&est, 1e-3);
    assert!(h <= 2e-2, "{h}");
}

#[test]
fn uniform_dense_is_not_a_sequence() {
    let p = KnotProgram::new(KnotFamily::UniformDense, 2).unwrap();
    assert!(!p.family.is_sequence());
    assert_eq!(p.realize(3).unwrap().interior(), &[0.25, 0.5, 0.75]);
}

#[test]
fn realize_rejects_exhausted_lists() {
    assert!(explicit(&[0.5], 2).realize(2).is_err());
}

#[test]
fn programs_round_trip_through_json() {
    let text = r#"{"family":"geometric-to-point","target":0.5,"ratio":0.5,"side":"left"}"#;
    let f: KnotFamily = serde_json::from_str(text).unwrap();
    assert_eq!(
        f,
        KnotFamily::GeometricToPoint {
            target: 0.5,
            ratio: 0.5,
            side: Side::Left
        }
    );
    let back: KnotFamily = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
    assert_eq!(back, f);
}

fn family() -> impl Strategy<Value = KnotFamily> {
    prop_oneof![
        Just(KnotFamily::DyadicDense),
        (0.05..0.95f64, 0.2..0.8f64, prop_oneof![Just(Side::Left), Just(Side::Right), Just(Side::Both)])
            .prop_map(|(target, ratio, side)| KnotFamily::GeometricToPoint { target, ratio, side }),
        (0.0..0.5f64, 0.5..1.0f64).prop_map(|(a, b)| KnotFamily::DenseInSubinterval { a, b }),
    ]
}

proptest! {
    #[test]
    fn realized_grids_are_nested_and_valid(fam in family(), k in 1usize..=5, n in 0usize..60) {
        let p = KnotProgram::new(fam, k).unwrap();
        let (Ok(g), Ok(h)) = (p.realize(n), p.realize(n + 1)) else {
            // the sequence ran out of f64 resolution
            prop_assume!(matches!(p.realize(n + 1), Err(Error::Resolution { .. })));
            return Ok(());
        };
        prop_assert!(g.is_refined_by(&h));
        let knots = g.knots();
        prop_assert!(knots.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(knots.iter().filter(|&&x| x == 0.0).count(), k);
        prop_assert_eq!(knots.iter().filter(|&&x| x == 1.0).count(), k);
        prop_assert!(g.interior().iter().all(|&x| x > 0.0 && x < 1.0));
    }

    #[test]
    fn grid_geometry_invariants(seed in any::<u64>(), k in 1usize..=5, t in 0.0..=1.0f64) {
        let mut r = rng(seed);
        let g = Grid::from_interior(k, &random_interior(&mut r, k, 25)).unwrap();
        let (a, b) = g.grid_interval(t);
        prop_assert!(b > a);
        let s = SplineSpace::from_grid(&g);
        for i in 0..s.dim() {
            for j in 0..s.dim() {
                prop_assert!(s.hull_length(i, j) >= s.support_length(i).max(s.support_length(j)));
            }
        }
    }

    #[test]
    fn decomposition_respects_realized_knots(fam in family(), k in 1usize..=4) {
        let p = KnotProgram::new(fam, k).unwrap();
        let d = p.decompose().unwrap();
        for c in &d.components {
            let inside = p.representable_prefix(300).unwrap().into_iter().filter(|&x| c.in_u(x)).count();
            // only finitely many knots may enter a component; its open ends
            // sit at accumulation points approached from outside it
            prop_assert!(inside < 300);
            for b in c.boundary() {
                prop_assert!(d.accumulation.contains(b) || b == 0.0 || b == 1.0);
            }
        }
    }
}
