//! Property tests for the geometric invariants.

use proptest::prelude::*;
use pushgrasp_core::geom::{
    compute_obb, dilate_polygon, polygon_overlap, Overlap, PointCloud, Polygon2, Pose, Vec3,
};

fn vec3_strategy() -> impl Strategy<Value = Vec3> {
    (-0.5f64..0.5, -0.5f64..0.5, 0.0f64..0.2).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // rigid transforms preserve pairwise distances
    #[test]
    fn transform_is_an_isometry(
        pts in prop::collection::vec(vec3_strategy(), 2..40),
        theta in -3.2f64..3.2,
        tx in -0.3f64..0.3,
        ty in -0.3f64..0.3,
    ) {
        let n = pts.len();
        let cloud = PointCloud::new(pts, vec![1; n]).unwrap();
        let moved = cloud.transformed(&Pose::planar(theta, tx, ty, 0.05));
        for i in 0..n {
            for j in (i + 1)..n {
                let before = (cloud.points[i] - cloud.points[j]).norm();
                let after = (moved.points[i] - moved.points[j]).norm();
                prop_assert!((before - after).abs() < 1e-9);
            }
        }
    }

    // every point stays inside the computed box (expanded by tolerance)
    #[test]
    fn obb_contains_its_cloud(pts in prop::collection::vec(vec3_strategy(), 1..60)) {
        let n = pts.len();
        let cloud = PointCloud::new(pts, vec![1; n]).unwrap();
        let obb = compute_obb(&cloud).unwrap();
        for &p in &cloud.points {
            prop_assert!(obb.contains(p, 1e-9));
        }
    }

    // disjointness is symmetric and the MTV actually separates
    #[test]
    fn overlap_classification_is_symmetric_and_mtv_separates(
        ax in -0.3f64..0.3, ay in -0.3f64..0.3, ar in 0.02f64..0.1,
        bx in -0.3f64..0.3, by in -0.3f64..0.3, br in 0.02f64..0.1,
        an in 3usize..9, bn in 3usize..9,
    ) {
        let a = Polygon2::regular(an, ar, ax, ay);
        let b = Polygon2::regular(bn, br, bx, by);
        let ab = polygon_overlap(&a, &b).unwrap();
        let ba = polygon_overlap(&b, &a).unwrap();
        prop_assert_eq!(
            matches!(ab, Overlap::Disjoint),
            matches!(ba, Overlap::Disjoint)
        );
        if let Overlap::Mtv { nx, ny, depth } = ab {
            // translating b by the MTV (plus a hair) must separate the pair
            let moved = b.transformed(0.0, nx * (depth + 1e-9), ny * (depth + 1e-9));
            let after = polygon_overlap(&a, &moved).unwrap();
            let still = match after {
                Overlap::Disjoint => 0.0,
                Overlap::Mtv { depth, .. } => depth,
            };
            prop_assert!(still < 1e-6, "depth after separation: {}", still);
        }
    }

    // dilation keeps every input vertex strictly inside, grows the perimeter
    // by the arc budget, and lands its vertices on the offset band
    #[test]
    fn dilation_band_and_containment(
        n in 3usize..9,
        r in 0.01f64..0.08,
        radius in 0.004f64..0.03,
    ) {
        let poly = Polygon2::regular(n, r, 0.1, 0.1);
        let fat = dilate_polygon(&poly, radius).unwrap();
        for &v in poly.vertices() {
            prop_assert!(fat.contains(v));
        }
        for &v in fat.vertices() {
            let d = poly.boundary_distance(v);
            prop_assert!((d - radius).abs() < 1e-4, "band distance {}", d);
        }
        let expected = poly.perimeter() + 2.0 * std::f64::consts::PI * radius;
        prop_assert!((fat.perimeter() - expected).abs() < 1e-3);
    }
}
