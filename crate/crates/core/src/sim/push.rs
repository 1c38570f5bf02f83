//! Quasi-static push execution: a disc pusher advances in small steps,
//! resolving penetrations with minimum-translation vectors plus a lever-arm
//! rotation heuristic.

use super::{PushCommand, Scene, SimError, SimObject};
use crate::geom::{polygon_overlap, Overlap, Polygon2};

/// Pusher advance per integration step, meters.
const STEP: f64 = 1e-3;
/// Disc footprint approximation.
const PUSHER_SIDES: usize = 16;
/// Rotation gain in the lever-arm heuristic.
const KAPPA: f64 = 1.0;
/// Contact resolution rounds per step and at the end of the stroke.
const MAX_ROUNDS: usize = 32;
const PENETRATION_EPS: f64 = 1e-9;

/// Advance the pusher along the pose's local +x for the full stroke and
/// return the settled scene. Objects never leave the workspace.
pub fn execute_push(
    scene: &Scene,
    cmd: &PushCommand,
    pusher_radius: f64,
) -> Result<Scene, SimError> {
    let start = cmd.pose.translation;
    let dir3 = cmd.pose.rotation.col(0);
    let norm = (dir3.x * dir3.x + dir3.y * dir3.y).sqrt();
    if norm < 1e-12 {
        return Err(SimError::InvalidPushStart);
    }
    let dir = (dir3.x / norm, dir3.y / norm);
    if start.x < 0.0 || start.x > scene.workspace.0 || start.y < 0.0 || start.y > scene.workspace.1 {
        return Err(SimError::PushStartOutsideWorkspace);
    }

    let mut out = scene.clone();
    let pusher_at =
        |cx: f64, cy: f64| Polygon2::regular(PUSHER_SIDES, pusher_radius, cx, cy);

    // the pusher only engages objects whose height reaches the push plane
    let engaged: Vec<bool> =
        out.objects.iter().map(|o| start.z >= 0.0 && start.z <= o.height()).collect();

    for (i, obj) in out.objects.iter().enumerate() {
        if !engaged[i] {
            continue;
        }
        if let Ok(Overlap::Mtv { .. }) =
            polygon_overlap(&pusher_at(start.x, start.y), &obj.footprint_world())
        {
            return Err(SimError::InvalidPushStart);
        }
    }

    let n_steps = (cmd.stroke / STEP).ceil() as usize;
    let mut travelled = 0.0;
    for _ in 0..n_steps {
        let step = STEP.min(cmd.stroke - travelled);
        travelled += step;
        let cx = start.x + dir.0 * travelled;
        let cy = start.y + dir.1 * travelled;
        let pusher = pusher_at(cx, cy);
        for i in 0..out.objects.len() {
            if !engaged[i] {
                continue;
            }
            let poly = out.objects[i].footprint_world();
            if let Ok(Overlap::Mtv { nx, ny, depth }) = polygon_overlap(&pusher, &poly) {
                let (centroid, circumradius) = (poly.centroid(), poly.circumradius());
                translate_clamped(&mut out.objects[i], nx * depth, ny * depth, out.workspace);
                // lever-arm rotation about the footprint centroid
                let lever = (cx - centroid.0) * ny - (cy - centroid.1) * nx;
                let theta = KAPPA * lever * depth / (circumradius * circumradius);
                rotate_about(&mut out.objects[i], centroid, theta);
            }
        }
        resolve_object_overlaps(&mut out, MAX_ROUNDS);
    }
    resolve_object_overlaps(&mut out, MAX_ROUNDS);
    Ok(out)
}

/// Pairwise MTV translations, split between the pair, until no penetration
/// exceeds the tolerance or the round budget runs out.
fn resolve_object_overlaps(scene: &mut Scene, rounds: usize) {
    for _ in 0..rounds {
        let mut any = false;
        for i in 0..scene.objects.len() {
            for j in (i + 1)..scene.objects.len() {
                let pi = scene.objects[i].footprint_world();
                let pj = scene.objects[j].footprint_world();
                if let Ok(Overlap::Mtv { nx, ny, depth }) = polygon_overlap(&pi, &pj) {
                    if depth <= PENETRATION_EPS {
                        continue;
                    }
                    any = true;
                    let half = depth / 2.0 + PENETRATION_EPS;
                    // mtv pushes j away from i
                    let moved_j =
                        translate_clamped(&mut scene.objects[j], nx * half, ny * half, scene.workspace);
                    let moved_i = translate_clamped(
                        &mut scene.objects[i],
                        -nx * half,
                        -ny * half,
                        scene.workspace,
                    );
                    // hand any clamped remainder to the partner
                    let remainder = 2.0 * half - moved_i - moved_j;
                    if remainder > PENETRATION_EPS {
                        let r1 = translate_clamped(
                            &mut scene.objects[j],
                            nx * remainder,
                            ny * remainder,
                            scene.workspace,
                        );
                        if remainder - r1 > PENETRATION_EPS {
                            translate_clamped(
                                &mut scene.objects[i],
                                -nx * (remainder - r1),
                                -ny * (remainder - r1),
                                scene.workspace,
                            );
                        }
                    }
                }
            }
        }
        if !any {
            break;
        }
    }
}

/// Translate an object, clamping so its footprint stays inside the workspace.
/// Returns the distance actually moved.
fn translate_clamped(obj: &mut SimObject, dx: f64, dy: f64, workspace: (f64, f64)) -> f64 {
    let before = obj.footprint_world().aabb();
    let mut nx = obj.x + dx;
    let mut ny = obj.y + dy;
    // clamp using the current AABB (shape extent is translation-invariant)
    let (min, max) = before;
    let half_w = ((max.0 - min.0) / 2.0, (max.1 - min.1) / 2.0);
    let center = ((min.0 + max.0) / 2.0 + dx, (min.1 + max.1) / 2.0 + dy);
    let clamped_cx = center.0.clamp(half_w.0, workspace.0 - half_w.0);
    let clamped_cy = center.1.clamp(half_w.1, workspace.1 - half_w.1);
    nx += clamped_cx - center.0;
    ny += clamped_cy - center.1;
    let moved = ((nx - obj.x).powi(2) + (ny - obj.y).powi(2)).sqrt();
    obj.x = nx;
    obj.y = ny;
    moved
}

/// Rotate an object about a world-frame pivot, keeping it in the workspace.
fn rotate_about(obj: &mut SimObject, pivot: (f64, f64), theta: f64) {
    let (s, c) = theta.sin_cos();
    let dx = obj.x - pivot.0;
    let dy = obj.y - pivot.1;
    obj.x = pivot.0 + c * dx - s * dy;
    obj.y = pivot.1 + s * dx + c * dy;
    obj.theta += theta;
    // rotation can poke a corner out of the workspace; pull it back in
    let ((xmin, ymin), (xmax, ymax)) = obj.footprint_world().aabb();
    let mut fix = (0.0f64, 0.0f64);
    if xmin < 0.0 {
        fix.0 = -xmin;
    } else if xmax > super::WORKSPACE_W {
        fix.0 = super::WORKSPACE_W - xmax;
    }
    if ymin < 0.0 {
        fix.1 = -ymin;
    } else if ymax > super::WORKSPACE_D {
        fix.1 = super::WORKSPACE_D - ymax;
    }
    obj.x += fix.0;
    obj.y += fix.1;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Pose, Rot3, Vec3};
    use crate::sim::{builtin_shapes, generate_scene, Scene, ShapeSpec, SimObject};

    fn push_pose(x: f64, y: f64, z: f64, dir: (f64, f64)) -> Pose {
        let xaxis = Vec3::new(dir.0, dir.1, 0.0).normalized();
        let zaxis = Vec3::new(0.0, 0.0, -1.0);
        let yaxis = zaxis.cross(xaxis);
        Pose::new(Rot3::from_cols(xaxis, yaxis, zaxis), Vec3::new(x, y, z))
    }

    fn one_disc_scene() -> Scene {
        let shape = ShapeSpec {
            name: "disc".into(),
            footprint: crate::geom::Polygon2::regular(16, 0.025, 0.0, 0.0),
            height: 0.04,
        };
        Scene {
            objects: vec![SimObject { shape, id: 1, x: 0.25, y: 0.22, theta: 0.0 }],
            target_id: 1,
            workspace: (super::super::WORKSPACE_W, super::super::WORKSPACE_D),
            rng_seed: 0,
        }
    }

    #[test]
    fn push_at_centroid_moves_object_along_direction() {
        let scene = one_disc_scene();
        let cmd = PushCommand { pose: push_pose(0.18, 0.22, 0.02, (1.0, 0.0)), stroke: 0.125 };
        let out = execute_push(&scene, &cmd, 0.008).unwrap();
        let o = &out.objects[0];
        let disp = (o.x - 0.25, o.y - 0.22);
        assert!(disp.0 > 0.02, "moved {disp:?}");
        let magnitude = (disp.0 * disp.0 + disp.1 * disp.1).sqrt();
        assert!(magnitude <= 0.125 + 1e-9, "displacement exceeds stroke: {disp:?}");
        // the 16-gon contact normals quantize direction; axial must dominate
        assert!(disp.1.abs() < disp.0 * 0.35, "lateral drift {disp:?}");
    }

    #[test]
    fn push_missing_everything_leaves_scene_unchanged() {
        let scene = one_disc_scene();
        let cmd = PushCommand { pose: push_pose(0.05, 0.40, 0.02, (1.0, 0.0)), stroke: 0.125 };
        let out = execute_push(&scene, &cmd, 0.008).unwrap();
        assert_eq!(out, scene);
    }

    #[test]
    fn push_start_inside_object_is_error() {
        let scene = one_disc_scene();
        let cmd = PushCommand { pose: push_pose(0.25, 0.22, 0.02, (1.0, 0.0)), stroke: 0.125 };
        assert!(matches!(execute_push(&scene, &cmd, 0.008), Err(SimError::InvalidPushStart)));
    }

    #[test]
    fn touching_boxes_chain_without_overlap() {
        let shape = ShapeSpec {
            name: "box".into(),
            footprint: crate::geom::Polygon2::rect(-0.02, -0.02, 0.02, 0.02),
            height: 0.04,
        };
        let scene = Scene {
            objects: vec![
                SimObject { shape: shape.clone(), id: 1, x: 0.20, y: 0.22, theta: 0.0 },
                SimObject { shape, id: 2, x: 0.2401, y: 0.22, theta: 0.0 },
            ],
            target_id: 1,
            workspace: (super::super::WORKSPACE_W, super::super::WORKSPACE_D),
            rng_seed: 0,
        };
        let cmd = PushCommand { pose: push_pose(0.16, 0.22, 0.02, (1.0, 0.0)), stroke: 0.08 };
        let out = execute_push(&scene, &cmd, 0.008).unwrap();
        assert!(out.objects[0].x > 0.20 + 0.01);
        assert!(out.objects[1].x > 0.2401 + 0.01);
        assert!(out.objects[0].x < out.objects[1].x, "ordering preserved");
        assert!(out.max_penetration() <= 1e-4, "penetration {}", out.max_penetration());
    }

    #[test]
    fn push_is_deterministic_bitwise() {
        let scene = generate_scene(8, &builtin_shapes(), 21).unwrap();
        let cmd = PushCommand { pose: push_pose(0.10, 0.10, 0.02, (1.0, 0.8)), stroke: 0.125 };
        let a = execute_push(&scene, &cmd, 0.008).unwrap();
        let b = execute_push(&scene, &cmd, 0.008).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn objects_stay_inside_workspace_after_pushes() {
        let lib = builtin_shapes();
        for seed in 0..10u64 {
            let scene = generate_scene(10, &lib, 100 + seed).unwrap();
            let t = scene.target();
            let cmd = PushCommand {
                pose: push_pose(0.02, 0.02, 0.015, (t.x - 0.02, t.y - 0.02)),
                stroke: 0.30,
            };
            if let Ok(out) = execute_push(&scene, &cmd, 0.008) {
                for o in &out.objects {
                    let ((xmin, ymin), (xmax, ymax)) = o.footprint_world().aabb();
                    assert!(xmin >= -1e-9 && ymin >= -1e-9);
                    assert!(xmax <= super::super::WORKSPACE_W + 1e-9);
                    assert!(ymax <= super::super::WORKSPACE_D + 1e-9);
                }
                assert!(out.max_penetration() <= 1e-4);
            }
        }
    }
}
