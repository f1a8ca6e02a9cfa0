use horoprox::bsubdiff::{max_of_distances, weighted_cover};
use horoprox::busemann::{busemann_value, horosphere_project, BusemannDirection, Horosphere};
use horoprox::manifold::{dist, exp_map, geodesic_point, inner, log_map, parallel_transport, Point, Space};
use horoprox::solver::{prox_closed_form, prox_optimality_residual, ProxKind};
use proptest::prelude::*;

fn space() -> impl Strategy<Value = Space> {
    prop_oneof![
        Just(Space::euclidean(3).unwrap()),
        Just(Space::hyperboloid(2, 1.0).unwrap()),
        Just(Space::hyperboloid(2, 0.5).unwrap()),
        Just(Space::hyperboloid(3, 2.0).unwrap()),
    ]
}

/// A point within geodesic radius about 2 of the origin.
fn point_in(s: Space) -> impl Strategy<Value = Point> {
    prop::collection::vec(-1.5..1.5f64, s.dim()).prop_map(move |x| {
        let o = s.origin();
        let basis = s.tangent_basis(&o);
        let scale = s.kappa().map_or(1.0, |k| 1.0 / k.sqrt());
        let v = s.from_basis(&o, &basis, &x).scaled(scale);
        exp_map(&o, &v).unwrap()
    })
}

fn space_and_points(n: usize) -> impl Strategy<Value = (Space, Vec<Point>)> {
    space().prop_flat_map(move |s| (Just(s), prop::collection::vec(point_in(s), n)))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn exp_inverts_log((_s, pts) in space_and_points(2)) {
        let back = exp_map(&pts[0], &log_map(&pts[0], &pts[1]).unwrap()).unwrap();
        prop_assert!(dist(&back, &pts[1]).unwrap() < 1e-9);
    }

    #[test]
    fn distance_is_a_metric((_s, pts) in space_and_points(3)) {
        let d = |i: usize, j: usize| dist(&pts[i], &pts[j]).unwrap();
        prop_assert!((d(0, 1) - d(1, 0)).abs() < 1e-12);
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-12);
        prop_assert_eq!(d(0, 0), 0.0);
    }

    #[test]
    fn transport_preserves_inner_products((s, pts) in space_and_points(4)) {
        let (p, q) = (&pts[0], &pts[1]);
        let u = log_map(p, &pts[2]).unwrap();
        let v = log_map(p, &pts[3]).unwrap();
        let (tu, tv) = (parallel_transport(p, q, &u).unwrap(), parallel_transport(p, q, &v).unwrap());
        let before = inner(p, &u, &v).unwrap();
        let after = inner(q, &tu, &tv).unwrap();
        prop_assert!((before - after).abs() <= 1e-9 * (1.0 + u.norm() * v.norm()), "{s:?}: {before} vs {after}");
    }

    #[test]
    fn busemann_is_one_lipschitz((_s, pts) in space_and_points(4)) {
        let b = BusemannDirection::new(&pts[0], &log_map(&pts[0], &pts[1]).unwrap()).unwrap();
        prop_assume!(!b.is_zero());
        let gap = (busemann_value(&b, &pts[2]).unwrap() - busemann_value(&b, &pts[3]).unwrap()).abs();
        prop_assert!(gap <= dist(&pts[2], &pts[3]).unwrap() + 1e-10);
    }

    #[test]
    fn horosphere_projection_lands_on_the_level((_s, pts) in space_and_points(3), drop in 0.0..2.0f64) {
        let b = BusemannDirection::new(&pts[0], &log_map(&pts[0], &pts[1]).unwrap()).unwrap();
        prop_assume!(b.dir().norm() > 1e-3);
        let unit = BusemannDirection::new(&pts[0], &b.dir().normalized().unwrap()).unwrap();
        // projection is defined from outside the horoball
        let level = busemann_value(&unit, &pts[2]).unwrap() - drop;
        let h = Horosphere::new(unit.clone(), level).unwrap();
        let proj = horosphere_project(&pts[2], &h).unwrap();
        let excess = busemann_value(&unit, &pts[2]).unwrap() - level;
        prop_assert!((busemann_value(&unit, &proj).unwrap() - level).abs() <= 1e-9 * (1.0 + excess.abs()));
        prop_assert!((dist(&pts[2], &proj).unwrap() - excess.abs()).abs() <= 1e-9 * (1.0 + excess.abs()));
    }

    #[test]
    fn max_of_distances_subgradient_satisfies_busemann_inequality((_s, pts) in space_and_points(5)) {
        let f = max_of_distances(&pts[..3]).unwrap();
        let (q, p) = (&pts[3], &pts[4]);
        let s = f.b_subgradient(q).unwrap();
        let rhs = if s.is_zero() {
            f.value(q).unwrap()
        } else {
            let b = BusemannDirection::new(q, &s.scaled(-1.0)).unwrap();
            f.value(q).unwrap() + busemann_value(&b, p).unwrap()
        };
        prop_assert!(f.value(p).unwrap() >= rhs - 1e-9);
    }

    #[test]
    fn cover_value_is_max_of_shifted_distances((_s, pts) in space_and_points(3), r0 in 0.0..1.0f64, r1 in 0.0..1.0f64) {
        let f = weighted_cover(&pts[..2], &[r0, r1]).unwrap();
        let want = (dist(&pts[2], &pts[0]).unwrap() + r0).max(dist(&pts[2], &pts[1]).unwrap() + r1);
        prop_assert!((f.value(&pts[2]).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn closed_form_prox_is_optimal((_s, pts) in space_and_points(2), mu in 0.1..10.0f64, squared: bool) {
        let kind = if squared {
            ProxKind::HalfSquared { anchor: pts[0].clone() }
        } else {
            ProxKind::Distance { anchor: pts[0].clone() }
        };
        let x = prox_closed_form(&kind, &pts[1], mu).unwrap();
        prop_assert!(prox_optimality_residual(&kind, &pts[1], mu, &x).unwrap() < 1e-8);
        // the proximal point lies on the segment towards the anchor
        let d = dist(&pts[1], &pts[0]).unwrap();
        prop_assert!((dist(&pts[1], &x).unwrap() + dist(&x, &pts[0]).unwrap() - d).abs() < 1e-9);
    }

    #[test]
    fn geodesic_point_splits_distance((_s, pts) in space_and_points(2), t in 0.0..1.0f64) {
        let m = geodesic_point(&pts[0], &pts[1], t).unwrap();
        let d = dist(&pts[0], &pts[1]).unwrap();
        prop_assert!((dist(&pts[0], &m).unwrap() - t * d).abs() < 1e-9);
    }
}

#[test]
fn euclidean_horosphere_projection_is_hyperplane_projection() {
    let r2 = Space::euclidean(2).unwrap();
    let o = r2.origin();
    let b = BusemannDirection::new(&o, &r2.tangent(&o, &[1.0, 0.0]).unwrap()).unwrap();
    let h = Horosphere::new(b, 0.0).unwrap();
    let proj = horosphere_project(&r2.point(&[-3.0, 4.0]).unwrap(), &h).unwrap();
    assert_eq!(proj.to_vec(), vec![0.0, 4.0]);
}
