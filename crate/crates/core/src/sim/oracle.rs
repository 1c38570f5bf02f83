//! Ground-truth grasp oracle: pre-close collision checks, an analytic finger
//! closing sweep, and a friction-cone test at the two target contacts.

use super::{GripperSpec, Scene};
use crate::geom::{polygon_overlap, Overlap, Polygon2, Pose};

/// Outcome taxonomy; the binary training label is `Success -> 1`, else 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraspOutcome {
    Success,
    Collision,
    Slip,
    Miss,
}

impl GraspOutcome {
    pub fn label(self) -> u8 {
        (self == GraspOutcome::Success) as u8
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GraspOutcome::Success => "success",
            GraspOutcome::Collision => "collision",
            GraspOutcome::Slip => "slip",
            GraspOutcome::Miss => "miss",
        }
    }
}

impl std::str::FromStr for GraspOutcome {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "success" => Ok(GraspOutcome::Success),
            "collision" => Ok(GraspOutcome::Collision),
            "slip" => Ok(GraspOutcome::Slip),
            "miss" => Ok(GraspOutcome::Miss),
            other => Err(format!("unknown outcome `{other}`")),
        }
    }
}

/// Polygon expressed in the grasp frame's horizontal plane, plus its height.
struct FramedObject {
    poly: Vec<(f64, f64)>,
    height: f64,
    is_target: bool,
}

/// Which check decided a non-success outcome; diagnostic only.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleStage {
    None,
    PreCloseFinger,
    PreClosePalm,
    SweepContact,
    FrictionCone,
}

/// Top-down grasp evaluation.
///
/// Success requires a collision-free pre-close pose, first closing contact on
/// the target on both sides, and both contact normals within the friction
/// cone of the closing axis. Pre-close contact with the target itself means
/// the object cannot be spanned and counts as a miss; pre-close contact with
/// any other object is a collision.
pub fn grasp_oracle(
    scene: &Scene,
    grasp: &Pose,
    width: f64,
    gripper: &GripperSpec,
) -> GraspOutcome {
    grasp_oracle_detail(scene, grasp, width, gripper).0
}

pub fn grasp_oracle_detail(
    scene: &Scene,
    grasp: &Pose,
    width: f64,
    gripper: &GripperSpec,
) -> (GraspOutcome, OracleStage) {
    let t = grasp.translation;
    let ex = grasp.rotation.col(0);
    let ey = grasp.rotation.col(1);
    let to_frame = |x: f64, y: f64| -> (f64, f64) {
        ((x - t.x) * ex.x + (y - t.y) * ex.y, (x - t.x) * ey.x + (y - t.y) * ey.y)
    };

    let fl = gripper.finger_length;
    let ft = gripper.finger_thickness;
    let fh = gripper.finger_height;
    let finger_z = (t.z - fl / 2.0, t.z + fl / 2.0);
    let palm_z = (t.z + fl / 2.0, t.z + fl / 2.0 + gripper.palm_depth);
    let z_overlaps = |h: f64, range: (f64, f64)| -> bool { h.min(range.1) - 0.0f64.max(range.0) > 1e-9 };

    let objects: Vec<FramedObject> = scene
        .objects
        .iter()
        .map(|o| {
            let poly = o
                .footprint_world()
                .vertices()
                .iter()
                .map(|&(x, y)| to_frame(x, y))
                .collect();
            FramedObject { poly, height: o.height(), is_target: o.id == scene.target_id }
        })
        .collect();

    let finger_pos = Polygon2::rect(-fh / 2.0, width / 2.0, fh / 2.0, width / 2.0 + ft);
    let finger_neg = Polygon2::rect(-fh / 2.0, -width / 2.0 - ft, fh / 2.0, -width / 2.0);
    let palm = Polygon2::rect(-fh / 2.0, -width / 2.0 - ft, fh / 2.0, width / 2.0 + ft);

    // pre-close pose checks
    for obj in &objects {
        let poly = match Polygon2::new(obj.poly.clone()) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let mut touches = OracleStage::None;
        for (part, zr, stage) in [
            (&finger_pos, finger_z, OracleStage::PreCloseFinger),
            (&finger_neg, finger_z, OracleStage::PreCloseFinger),
            (&palm, palm_z, OracleStage::PreClosePalm),
        ] {
            if z_overlaps(obj.height, zr) {
                if let Ok(Overlap::Mtv { depth, .. }) = polygon_overlap(part, &poly) {
                    if depth > 1e-9 {
                        touches = stage;
                        break;
                    }
                }
            }
        }
        if touches != OracleStage::None {
            return if obj.is_target {
                (GraspOutcome::Miss, touches)
            } else {
                (GraspOutcome::Collision, touches)
            };
        }
    }

    // closing sweep: each finger travels inward along y, up to the full width
    let strip = (-fh / 2.0, fh / 2.0);
    let max_travel = width;
    let mut slip = false;
    for side in [1.0f64, -1.0] {
        let mut best_t = f64::INFINITY;
        let mut best_is_target = false;
        let mut best_dev = 0.0f64;
        for obj in &objects {
            if !z_overlaps(obj.height, finger_z) {
                continue;
            }
            if let Some((travel, deviation)) = sweep_contact(&obj.poly, side, width / 2.0, strip) {
                if travel < best_t - 1e-12 {
                    best_t = travel;
                    best_is_target = obj.is_target;
                    best_dev = deviation;
                } else if travel < best_t + 1e-12 && obj.is_target {
                    // ties go to the target
                    best_is_target = true;
                    best_dev = deviation;
                }
            }
        }
        if best_t.is_infinite() || best_t > max_travel {
            return (GraspOutcome::Miss, OracleStage::SweepContact);
        }
        if best_t < -1e-9 {
            // inside the closing region already overlapping the inner face line:
            // can only be the target (others were caught at pre-close)
            let outcome =
                if best_is_target { GraspOutcome::Miss } else { GraspOutcome::Collision };
            return (outcome, OracleStage::SweepContact);
        }
        if !best_is_target {
            return (GraspOutcome::Collision, OracleStage::SweepContact);
        }
        if best_dev > gripper.friction_cone_half_angle {
            slip = true;
        }
    }
    if slip {
        (GraspOutcome::Slip, OracleStage::FrictionCone)
    } else {
        (GraspOutcome::Success, OracleStage::None)
    }
}

/// First-contact travel of a finger inner face closing from `y = side*open` in
/// direction `-side*y`, against a polygon restricted to the finger's x-strip.
/// Returns `(travel, normal deviation from the closing axis)`; `None` when the
/// polygon never meets the finger.
fn sweep_contact(
    poly: &[(f64, f64)],
    side: f64,
    open: f64,
    strip: (f64, f64),
) -> Option<(f64, f64)> {
    // mirror so we always sweep the +side
    let pts: Vec<(f64, f64)> =
        if side > 0.0 { poly.to_vec() } else { poly.iter().map(|&(x, y)| (x, -y)).collect() };
    let n = pts.len();
    let centroid = polygon_centroid(&pts);

    let mut y_top = f64::NEG_INFINITY;
    let mut best_edges: Vec<usize> = Vec::new();
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        if let Some((p, q)) = clip_segment_to_strip(a, b, strip) {
            let m = p.1.max(q.1);
            if m > y_top + 1e-12 {
                y_top = m;
                best_edges.clear();
                best_edges.push(i);
            } else if m > y_top - 1e-12 {
                best_edges.push(i);
            }
        }
    }
    if y_top.is_infinite() {
        return None;
    }
    let travel = open - y_top;
    // deviation: most favorable outward normal among contact-achieving edges
    let mut dev = f64::INFINITY;
    for &i in &best_edges {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len = (dx * dx + dy * dy).sqrt();
        if len < 1e-15 {
            continue;
        }
        let mut nx = dy / len;
        let mut ny = -dx / len;
        let mid = ((a.0 + b.0) / 2.0 - centroid.0, (a.1 + b.1) / 2.0 - centroid.1);
        if nx * mid.0 + ny * mid.1 < 0.0 {
            nx = -nx;
            ny = -ny;
        }
        let _ = nx;
        // contact normal should oppose the closing motion, i.e. point to +y here
        dev = dev.min(ny.clamp(-1.0, 1.0).acos());
    }
    Some((travel, dev))
}

fn polygon_centroid(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    (sx / n, sy / n)
}

/// Clip a segment to the vertical strip `x in [lo, hi]`.
fn clip_segment_to_strip(
    a: (f64, f64),
    b: (f64, f64),
    strip: (f64, f64),
) -> Option<((f64, f64), (f64, f64))> {
    let (lo, hi) = strip;
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    let dx = b.0 - a.0;
    if dx.abs() < 1e-15 {
        if a.0 < lo || a.0 > hi {
            return None;
        }
    } else {
        let ta = (lo - a.0) / dx;
        let tb = (hi - a.0) / dx;
        let (tmin, tmax) = if ta < tb { (ta, tb) } else { (tb, ta) };
        t0 = t0.max(tmin);
        t1 = t1.min(tmax);
        if t0 > t1 {
            return None;
        }
    }
    let lerp = |t: f64| (a.0 + t * dx, a.1 + t * (b.1 - a.1));
    Some((lerp(t0), lerp(t1)))
}
