use partmatch::geometry::{inlier_count, rasterize};
use partmatch::{BBox, Point2, PointSetMap, RigidTransform2};
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = f64> {
    -100.0..100.0f64
}

fn points(max: usize) -> impl Strategy<Value = Vec<Point2<f64>>> {
    prop::collection::vec(
        (coord(), coord()).prop_map(|(x, y)| Point2::new(x, y)),
        1..max,
    )
}

fn bbox() -> impl Strategy<Value = BBox<f64>> {
    (coord(), coord(), 0.0..50.0f64, 0.0..50.0f64)
        .prop_map(|(x, y, w, h)| BBox::from_corner(x, y, w, h).unwrap())
}

proptest! {
    #[test]
    fn inverse_undoes_transform(theta in -7.0..7.0f64, tx in coord(), ty in coord(), x in coord(), y in coord()) {
        let t = RigidTransform2::new(theta, Point2::new(tx, ty));
        let q = t.inverse().apply(t.apply(Point2::new(x, y)));
        prop_assert!((q.x - x).abs() < 1e-9 && (q.y - y).abs() < 1e-9);
    }

    #[test]
    fn transform_is_complex_multiply_then_add(theta in -7.0..7.0f64, tx in coord(), ty in coord(), x in coord(), y in coord()) {
        // z' = e^{iθ} z + t
        let (s, c) = theta.sin_cos();
        let (re, im) = (c * x - s * y + tx, s * x + c * y + ty);
        let q = RigidTransform2::new(theta, Point2::new(tx, ty)).apply(Point2::new(x, y));
        prop_assert!((q.x - re).abs() < 1e-9 && (q.y - im).abs() < 1e-9);
    }

    #[test]
    fn quarter_turns_agree_with_angles(k in 0i32..4, tx in coord(), ty in coord(), x in coord(), y in coord()) {
        let exact = RigidTransform2::quarter_turns(k, Point2::new(tx, ty)).apply(Point2::new(x, y));
        let angle = RigidTransform2::new(f64::from(k) * std::f64::consts::FRAC_PI_2, Point2::new(tx, ty)).apply(Point2::new(x, y));
        prop_assert!((exact.x - angle.x).abs() < 1e-9 && (exact.y - angle.y).abs() < 1e-9);
    }

    #[test]
    fn map_extent_encloses_points(pts in points(60)) {
        let m = PointSetMap::new("m", pts.clone()).unwrap();
        for p in &pts {
            prop_assert!(m.extent().contains(*p));
        }
    }

    #[test]
    fn every_point_is_an_inlier_of_its_own_grid(pts in points(200), res in 0.05..1.0f64) {
        let m = PointSetMap::new("m", pts).unwrap();
        let g = rasterize(&m, res).unwrap();
        prop_assert_eq!(inlier_count(m.points(), &RigidTransform2::identity(), &g), m.len());
    }

    #[test]
    fn overlap_is_symmetric_and_inside_both(a in bbox(), b in bbox()) {
        prop_assert_eq!(a.overlap_area(&b), b.overlap_area(&a));
        prop_assert!(a.overlap_area(&b) <= a.area().min(b.area()) + 1e-9);
        if let Some(o) = a.overlap(&b) {
            prop_assert!(a.contains_box(&o) && b.contains_box(&o));
        }
    }
}
