//! Candidate action sets: top-down antipodal grasp sampling on the target's
//! projected hull, push-start sampling along the dilated projection contour,
//! and point-cloud collision pre-filters for both.

use thiserror::Error;

use crate::geom::{
    compute_obb, dilate_polygon, GeomError, PointCloud, Polygon2, Pose, Rot3, Vec3,
};
use crate::sim::GripperSpec;

/// Outward dilation of the projection contour for push sampling, meters.
pub const PUSH_CONTOUR_OFFSET: f64 = 0.016;
/// Arc-length step between push start points, meters.
pub const PUSH_START_STEP: f64 = 0.03;
/// Closing-axis directions for the antipodal sampler: 5 degrees over 180.
const GRASP_DIRECTIONS: usize = 36;
/// Clearance added to the caliper width, meters.
const WIDTH_CLEARANCE: f64 = 0.01;
/// Offsets along the grasp x axis, as a fraction of the footprint extent.
const OFFSET_FRACTION: f64 = 0.25;
/// Fingertips stop this far above the table when the object is short.
const MIN_TIP_CLEARANCE: f64 = 0.002;
/// Fingers engage at most this much of the object below its top face, keeping
/// the palm clear of same-height neighbors.
const GRASP_ENGAGE_DEPTH: f64 = 0.03;
/// Extra margin around the pusher when filtering push starts, meters.
const PUSH_FILTER_MARGIN: f64 = 0.002;
/// Non-target points tolerated inside the finger boxes before a grasp
/// candidate is dropped (robustness to stray noise points).
const GRASP_FILTER_TOLERANCE: usize = 3;

#[derive(Debug, Error)]
pub enum CandidateError {
    #[error("empty target cloud")]
    EmptyCloud,
    #[error("degenerate footprint")]
    DegenerateFootprint,
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Top-down grasp proposal: y = closing axis, z = approach (world -z),
/// x = y cross z.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraspCandidate {
    pub pose: Pose,
    pub width: f64,
    pub source_score: f64,
}

/// Push proposal: z down, x toward the target centroid, y = z cross x.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PushCandidate {
    pub pose: Pose,
    pub start: Vec3,
}

/// Antipodal caliper sampler over the target's projected convex hull.
///
/// For each closing-axis direction the caliper width is measured on the hull;
/// spannable directions emit candidates at the footprint midpoint and at
/// +/-25% offsets along the grasp x axis. Scores favor contact-edge normals
/// aligned with the closing axis. Deterministic; the seed is unused today but
/// kept for interface stability.
pub fn sample_grasps(
    target_cloud: &PointCloud,
    gripper: &GripperSpec,
    n_max: usize,
    _seed: u64,
) -> Result<Vec<GraspCandidate>, CandidateError> {
    if target_cloud.is_empty() {
        return Err(CandidateError::EmptyCloud);
    }
    let xy: Vec<(f64, f64)> = target_cloud.points.iter().map(|p| p.xy()).collect();
    let hull = match Polygon2::convex_hull(&xy) {
        Ok(h) => h,
        Err(_) => return Ok(Vec::new()),
    };
    let top = target_cloud.max_z();
    let tip_z = (top - gripper.finger_length)
        .max(top - GRASP_ENGAGE_DEPTH)
        .max(MIN_TIP_CLEARANCE);
    let center_z = tip_z + gripper.finger_length / 2.0;

    let mut out = Vec::new();
    for k in 0..GRASP_DIRECTIONS {
        let phi = std::f64::consts::PI * k as f64 / GRASP_DIRECTIONS as f64;
        let closing = (phi.cos(), phi.sin());
        let lateral = (-closing.1, closing.0); // grasp x axis in the plane

        let verts = hull.vertices();
        let project = |axis: (f64, f64)| -> (f64, f64) {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for &(x, y) in verts {
                let v = x * axis.0 + y * axis.1;
                min = min.min(v);
                max = max.max(v);
            }
            (min, max)
        };
        let (vmin, vmax) = project(closing);
        let caliper = vmax - vmin;
        if caliper > gripper.max_opening {
            continue;
        }
        let width = (caliper + WIDTH_CLEARANCE).min(gripper.max_opening);
        let (umin, umax) = project(lateral);

        let dev_pos = contact_deviation(&hull, closing, 1.0);
        let dev_neg = contact_deviation(&hull, closing, -1.0);
        let score = (1.0 - (dev_pos + dev_neg) / std::f64::consts::PI).clamp(0.0, 1.0);

        let yaxis = Vec3::new(closing.0, closing.1, 0.0);
        let zaxis = Vec3::new(0.0, 0.0, -1.0);
        let xaxis = yaxis.cross(zaxis);
        let rotation = Rot3::from_cols(xaxis, yaxis, zaxis);
        let mid_u = (umin + umax) / 2.0;
        let mid_v = (vmin + vmax) / 2.0;
        for frac in [0.0, OFFSET_FRACTION, -OFFSET_FRACTION] {
            let u = mid_u + frac * (umax - umin);
            let x = u * lateral.0 + mid_v * closing.0;
            let y = u * lateral.1 + mid_v * closing.1;
            out.push(GraspCandidate {
                pose: Pose::new(rotation, Vec3::new(x, y, center_z)),
                width,
                source_score: score,
            });
        }
    }
    // stable sort keeps construction order among equal scores
    out.sort_by(|a, b| b.source_score.partial_cmp(&a.source_score).unwrap());
    out.truncate(n_max);
    Ok(out)
}

/// Deviation of the supporting contact-edge normal from the closing axis on
/// one side of the hull; vertex contacts take the friendlier adjacent edge.
fn contact_deviation(hull: &Polygon2, closing: (f64, f64), side: f64) -> f64 {
    let verts = hull.vertices();
    let n = verts.len();
    let axis = (closing.0 * side, closing.1 * side);
    let mut best = f64::NEG_INFINITY;
    let mut achieving = Vec::new();
    for (i, &(x, y)) in verts.iter().enumerate() {
        let v = x * axis.0 + y * axis.1;
        if v > best + 1e-12 {
            best = v;
            achieving.clear();
            achieving.push(i);
        } else if v > best - 1e-12 {
            achieving.push(i);
        }
    }
    let mut dev = f64::INFINITY;
    for &i in &achieving {
        for edge in [(i + n - 1) % n, i] {
            let a = verts[edge];
            let b = verts[(edge + 1) % n];
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            let len = (dx * dx + dy * dy).sqrt();
            if len < 1e-15 {
                continue;
            }
            // outward normal of a CCW hull edge
            let normal = (dy / len, -dx / len);
            let cosang = (normal.0 * axis.0 + normal.1 * axis.1).clamp(-1.0, 1.0);
            dev = dev.min(cosang.acos());
        }
    }
    dev
}

/// Push starts every 0.03 m of arc length along the target's hull dilated by
/// 0.016 m; the frame points x toward the projected centroid, z straight down,
/// and the height is the z center of the target's oriented bounding box.
pub fn sample_pushes(
    target_cloud: &PointCloud,
    _seed: u64,
) -> Result<Vec<PushCandidate>, CandidateError> {
    if target_cloud.is_empty() {
        return Err(CandidateError::EmptyCloud);
    }
    let xy: Vec<(f64, f64)> = target_cloud.points.iter().map(|p| p.xy()).collect();
    let hull = Polygon2::convex_hull(&xy).map_err(|_| CandidateError::DegenerateFootprint)?;
    let contour = dilate_polygon(&hull, PUSH_CONTOUR_OFFSET)?;
    let z = compute_obb(target_cloud)?.center.z;
    let centroid = {
        let n = xy.len() as f64;
        let (sx, sy) = xy.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
        (sx / n, sy / n)
    };

    let mut out = Vec::new();
    for (sx, sy) in walk_arc_length(&contour, PUSH_START_STEP) {
        let dir = (centroid.0 - sx, centroid.1 - sy);
        let len = (dir.0 * dir.0 + dir.1 * dir.1).sqrt();
        if len < 1e-12 {
            continue;
        }
        let xaxis = Vec3::new(dir.0 / len, dir.1 / len, 0.0);
        let zaxis = Vec3::new(0.0, 0.0, -1.0);
        let yaxis = zaxis.cross(xaxis);
        let start = Vec3::new(sx, sy, z);
        out.push(PushCandidate { pose: Pose::new(Rot3::from_cols(xaxis, yaxis, zaxis), start), start });
    }
    Ok(out)
}

/// Points along the polygon boundary at fixed arc-length steps, starting at
/// vertex 0. The wrap-around segment may be shorter than one step.
fn walk_arc_length(poly: &Polygon2, step: f64) -> Vec<(f64, f64)> {
    let verts = poly.vertices();
    let n = verts.len();
    let mut out = Vec::new();
    let mut next_emit = 0.0;
    let mut walked = 0.0;
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        let seg = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        while next_emit <= walked + seg + 1e-15 {
            let t = if seg > 0.0 { (next_emit - walked) / seg } else { 0.0 };
            if t > 1.0 + 1e-12 {
                break;
            }
            out.push((a.0 + t.min(1.0) * (b.0 - a.0), a.1 + t.min(1.0) * (b.1 - a.1)));
            next_emit += step;
        }
        walked += seg;
    }
    // drop a final point that collides with the wrap-around to vertex 0
    if let (Some(&first), Some(&last)) = (out.first(), out.last()) {
        if out.len() > 1 {
            let d = ((first.0 - last.0).powi(2) + (first.1 - last.1).powi(2)).sqrt();
            if d < 1e-9 {
                out.pop();
            }
        }
    }
    out
}

/// Keep candidates whose start-point vertical cylinder (pusher radius plus a
/// small margin, full cloud height) contains no scene point. Order preserved.
pub fn filter_push_collisions(
    candidates: &[PushCandidate],
    scene_cloud: &PointCloud,
    pusher_radius: f64,
) -> Vec<PushCandidate> {
    let clearance = pusher_radius + PUSH_FILTER_MARGIN;
    candidates
        .iter()
        .filter(|c| {
            !scene_cloud.points.iter().any(|p| {
                let dx = p.x - c.start.x;
                let dy = p.y - c.start.y;
                dx * dx + dy * dy <= clearance * clearance
            })
        })
        .copied()
        .collect()
}

/// Drop candidates whose pre-close finger boxes contain three or more points
/// not belonging to the target instance. Order preserved.
pub fn filter_grasp_collisions(
    candidates: &[GraspCandidate],
    scene_cloud: &PointCloud,
    target_id: u32,
    gripper: &GripperSpec,
) -> Vec<GraspCandidate> {
    candidates
        .iter()
        .filter(|c| {
            let inv = c.pose.inverse();
            let mut intruders = 0usize;
            for (p, &id) in scene_cloud.points.iter().zip(&scene_cloud.instance_ids) {
                if id == target_id {
                    continue;
                }
                let q = inv.apply(*p);
                let in_x = q.x.abs() <= gripper.finger_height / 2.0;
                let in_z = q.z.abs() <= gripper.finger_length / 2.0;
                let in_finger = q.y.abs() >= c.width / 2.0
                    && q.y.abs() <= c.width / 2.0 + gripper.finger_thickness;
                if in_x && in_z && in_finger {
                    intruders += 1;
                    if intruders >= GRASP_FILTER_TOLERANCE {
                        return false;
                    }
                }
            }
            true
        })
        .copied()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box_cloud(w: f64, d: f64, h: f64, cx: f64, cy: f64) -> PointCloud {
        let mut pts = Vec::new();
        for &x in &[-w / 2.0, w / 2.0] {
            for &y in &[-d / 2.0, d / 2.0] {
                for &z in &[0.0, h] {
                    pts.push(Vec3::new(cx + x, cy + y, z));
                }
            }
        }
        let n = pts.len();
        PointCloud::new(pts, vec![1; n]).unwrap()
    }

    #[test]
    fn grasp_sampler_finds_narrow_side_of_box() {
        let cloud = box_cloud(0.04, 0.08, 0.04, 0.25, 0.22);
        let g = GripperSpec::default();
        let cands = sample_grasps(&cloud, &g, 256, 0).unwrap();
        assert!(!cands.is_empty());
        let best = cands
            .iter()
            .find(|c| {
                let closing = c.pose.rotation.col(1);
                closing.x.abs() > 0.999 && (c.width - 0.05).abs() < 1e-9
            })
            .expect("candidate closing across the 0.04 m side with width 0.05");
        assert!(best.source_score > 0.99);
    }

    #[test]
    fn unspannable_disc_yields_no_candidates() {
        let cloud = {
            let mut pts = Vec::new();
            for i in 0..32 {
                let a = std::f64::consts::TAU * i as f64 / 32.0;
                pts.push(Vec3::new(0.25 + 0.06 * a.cos(), 0.22 + 0.06 * a.sin(), 0.04));
            }
            let n = pts.len();
            PointCloud::new(pts, vec![1; n]).unwrap()
        };
        let g = GripperSpec::default();
        assert!(sample_grasps(&cloud, &g, 64, 0).unwrap().is_empty());
    }

    #[test]
    fn n_max_truncates_sorted_by_score() {
        let cloud = box_cloud(0.04, 0.06, 0.04, 0.25, 0.22);
        let g = GripperSpec::default();
        let cands = sample_grasps(&cloud, &g, 3, 0).unwrap();
        assert!(cands.len() <= 3);
        for w in cands.windows(2) {
            assert!(w[0].source_score >= w[1].source_score);
        }
    }

    #[test]
    fn grasp_poses_are_valid_rotations() {
        let cloud = box_cloud(0.05, 0.05, 0.04, 0.2, 0.2);
        let g = GripperSpec::default();
        for c in sample_grasps(&cloud, &g, 64, 0).unwrap() {
            assert!(c.pose.rotation.orthonormality_error() < 1e-9);
            assert!(c.width > 0.0 && c.width <= g.max_opening + 1e-12);
        }
    }

    #[test]
    fn grasp_sampler_equivariant_under_grid_rotations() {
        let g = GripperSpec::default();
        let cloud = box_cloud(0.04, 0.07, 0.04, 0.0, 0.0);
        let base = sample_grasps(&cloud, &g, 256, 0).unwrap();
        for steps in [1usize, 9, 18] {
            let phi = std::f64::consts::PI * steps as f64 / 36.0;
            let moved = cloud.transformed(&Pose::planar(phi, 0.0, 0.0, 0.0));
            let rotated = sample_grasps(&moved, &g, 256, 0).unwrap();
            assert_eq!(base.len(), rotated.len());
            let rot = Pose::planar(phi, 0.0, 0.0, 0.0);
            // every rotated base candidate must appear in the new set, up to
            // the gripper's own two-fold symmetry (closing axis sign)
            let flip = Rot3::rot_z(std::f64::consts::PI);
            for c in &base {
                let want = rot.compose(&c.pose);
                let want_flipped = want.rotation.compose(&flip);
                let found = rotated.iter().any(|r| {
                    (r.pose.translation - want.translation).norm() < 1e-6
                        && (r.width - c.width).abs() < 1e-6
                        && (rotation_distance(&r.pose.rotation, &want.rotation) < 1e-6
                            || rotation_distance(&r.pose.rotation, &want_flipped) < 1e-6)
                });
                assert!(found, "missing rotated candidate at steps={steps}");
            }
        }
    }

    fn rotation_distance(a: &Rot3, b: &Rot3) -> f64 {
        let mut d = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                d = d.max((a.entry(i, j) - b.entry(i, j)).abs());
            }
        }
        d
    }

    #[test]
    fn push_starts_count_and_band_on_square() {
        let cloud = box_cloud(0.06, 0.06, 0.04, 0.25, 0.22);
        let cands = sample_pushes(&cloud, 0).unwrap();
        // perimeter 4*0.06 + 2*pi*0.016 = 0.3405 m at a 0.03 m step
        assert!(
            (11..=12).contains(&cands.len()),
            "expected 11-12 starts, got {}",
            cands.len()
        );
        let hull = Polygon2::rect(0.25 - 0.03, 0.22 - 0.03, 0.25 + 0.03, 0.22 + 0.03);
        for c in &cands {
            let d = hull.boundary_distance((c.start.x, c.start.y));
            assert!((0.0155..=0.0165).contains(&d), "band distance {d}");
            assert!((c.start.z - 0.02).abs() < 1e-12, "obb z center");
            assert!(c.pose.rotation.orthonormality_error() < 1e-9);
            let z = c.pose.rotation.col(2);
            assert!((z - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-9);
            assert!(c.pose.rotation.col(0).z.abs() < 1e-12, "x axis horizontal");
        }
    }

    #[test]
    fn push_frame_matches_cross_product_construction() {
        // start projection (0.25, 0.20), centroid (0.30, 0.20)
        let dir = (0.30f64 - 0.25, 0.20f64 - 0.20);
        let len = (dir.0 * dir.0 + dir.1 * dir.1).sqrt();
        let xaxis = Vec3::new(dir.0 / len, dir.1 / len, 0.0);
        let zaxis = Vec3::new(0.0, 0.0, -1.0);
        let yaxis = zaxis.cross(xaxis);
        assert!((xaxis - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
        assert!((yaxis - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
        assert!((xaxis.cross(yaxis) - zaxis).norm() < 1e-12, "right-handed");
    }

    #[test]
    fn push_spacing_is_step_sized() {
        let cloud = box_cloud(0.05, 0.07, 0.035, 0.2, 0.2);
        let cands = sample_pushes(&cloud, 0).unwrap();
        for w in cands.windows(2) {
            let d = (w[1].start - w[0].start).norm();
            // chord length can undercut arc length slightly on corners
            assert!(d <= PUSH_START_STEP * 1.1 + 1e-9 && d > PUSH_START_STEP * 0.5, "gap {d}");
        }
    }

    #[test]
    fn degenerate_projection_errors() {
        let pts = vec![
            Vec3::new(0.1, 0.1, 0.0),
            Vec3::new(0.2, 0.2, 0.01),
            Vec3::new(0.3, 0.3, 0.02),
        ];
        let cloud = PointCloud::new(pts, vec![1; 3]).unwrap();
        assert!(matches!(sample_pushes(&cloud, 0), Err(CandidateError::DegenerateFootprint)));
    }

    #[test]
    fn push_filter_examples() {
        let cloud = box_cloud(0.06, 0.06, 0.04, 0.25, 0.22);
        let cands = sample_pushes(&cloud, 0).unwrap();
        // empty scene cloud keeps everything
        let empty = PointCloud::default();
        assert_eq!(filter_push_collisions(&cands, &empty, 0.008).len(), cands.len());
        // a start buried in a dense blob is removed
        let blob_center = cands[0].start;
        let blob: Vec<Vec3> = (0..50)
            .map(|i| blob_center + Vec3::new(0.001 * (i % 5) as f64, 0.001 * (i / 5) as f64, 0.0))
            .collect();
        let n = blob.len();
        let scene = PointCloud::new(blob, vec![2; n]).unwrap();
        let kept = filter_push_collisions(&cands, &scene, 0.008);
        assert!(kept.len() < cands.len());
        assert!(!kept.iter().any(|c| (c.start - blob_center).norm() < 1e-12));
        // clearance arithmetic: a point 0.016 m away does not trigger at r=0.008
        let far = PointCloud::new(vec![cands[0].start + Vec3::new(0.016, 0.0, 0.0)], vec![2]).unwrap();
        assert_eq!(filter_push_collisions(&cands, &far, 0.008).len(), cands.len());
    }

    #[test]
    fn grasp_filter_examples() {
        let g = GripperSpec::default();
        let target = box_cloud(0.04, 0.04, 0.04, 0.25, 0.22);
        let cands = sample_grasps(&target, &g, 16, 0).unwrap();
        assert!(!cands.is_empty());
        // isolated target: everything retained
        assert_eq!(filter_grasp_collisions(&cands, &target, 1, &g).len(), cands.len());

        // a 50-point cluster inside the +y finger volume of the first candidate
        let c = cands[0];
        let finger_center_local = Vec3::new(0.0, c.width / 2.0 + g.finger_thickness / 2.0, 0.0);
        let center = c.pose.apply(finger_center_local);
        let cluster: Vec<Vec3> = (0..50)
            .map(|i| center + Vec3::new(1e-4 * (i % 7) as f64, 1e-4 * (i / 7) as f64, 0.0))
            .collect();
        let mut scene = target.clone();
        let cluster_cloud = PointCloud::new(cluster, vec![2; 50]).unwrap();
        scene.extend(&cluster_cloud);
        let kept = filter_grasp_collisions(&cands, &scene, 1, &g);
        assert!(kept.len() < cands.len(), "cluster should remove the occupied candidate");

        // two stray points are tolerated
        let strays = PointCloud::new(
            vec![center, center + Vec3::new(1e-4, 0.0, 0.0)],
            vec![2, 2],
        )
        .unwrap();
        let mut scene2 = target.clone();
        scene2.extend(&strays);
        assert_eq!(filter_grasp_collisions(&cands, &scene2, 1, &g).len(), cands.len());
    }

    #[test]
    fn filters_are_monotone_in_scene_points() {
        let g = GripperSpec::default();
        let target = box_cloud(0.04, 0.06, 0.04, 0.25, 0.22);
        let grasps = sample_grasps(&target, &g, 64, 0).unwrap();
        let pushes = sample_pushes(&target, 0).unwrap();
        let mut rng_pts = Vec::new();
        for i in 0..60 {
            rng_pts.push(Vec3::new(
                0.20 + 0.002 * (i % 10) as f64,
                0.18 + 0.002 * (i / 10) as f64,
                0.02,
            ));
        }
        let small = PointCloud::new(rng_pts[..30].to_vec(), vec![2; 30]).unwrap();
        let big = PointCloud::new(rng_pts.clone(), vec![2; 60]).unwrap();
        let kept_small = filter_grasp_collisions(&grasps, &small, 1, &g);
        let kept_big = filter_grasp_collisions(&grasps, &big, 1, &g);
        assert!(kept_big.len() <= kept_small.len());
        let p_small = filter_push_collisions(&pushes, &small, 0.008);
        let p_big = filter_push_collisions(&pushes, &big, 0.008);
        assert!(p_big.len() <= p_small.len());
    }
}
