//! Network input representations: the grasp state (gripper point cloud +
//! closing-region cloud + 0/1 channel, in the grasp frame) and the push state
//! (canonicalized scene + push point + one-hot labels).

use ndarray::Array2;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{Read, Write};
use thiserror::Error;

use crate::candidates::{GraspCandidate, PushCandidate};
use crate::geom::{GeomError, PointCloud, Vec3};
use crate::sim::{largest_remainder, GripperSpec};

/// Rows in a grasp state.
pub const GRASP_STATE_ROWS: usize = 345;
/// Gripper-template rows within the grasp state.
pub const GRASP_TEMPLATE_POINTS: usize = 145;
/// Closing-region rows within the grasp state.
pub const GRASP_REGION_POINTS: usize = GRASP_STATE_ROWS - GRASP_TEMPLATE_POINTS;
/// Rows in a push state (scene points + the push point row).
pub const PUSH_STATE_ROWS: usize = 1024;
/// Scene points in a push state.
pub const PUSH_SCENE_POINTS: usize = PUSH_STATE_ROWS - 1;
/// Minimum target-instance rows in a push state.
pub const PUSH_TARGET_QUOTA: usize = 256;
/// Canonical push reference position.
pub const PUSH_REF_X: f64 = 0.5;
pub const PUSH_REF_Y: f64 = 0.0;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("empty grasp state")]
    EmptyGraspState,
    #[error("scene cloud has no point with the target instance id")]
    MissingTarget,
    #[error("state shape {0}x{1} does not match the expected layout")]
    ShapeMismatch(usize, usize),
    #[error("invalid state contents: {0}")]
    Invalid(&'static str),
    #[error("bad state file magic")]
    BadMagic,
    #[error("unsupported state format version {0}")]
    BadVersion(u16),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// 345 rows of (x, y, z, flag); flag 0 = gripper point, 1 = closing region.
#[derive(Clone, Debug, PartialEq)]
pub struct GraspState {
    rows: Array2<f32>,
}

impl GraspState {
    pub fn from_rows(rows: Array2<f32>) -> Result<Self, StateError> {
        if rows.nrows() != GRASP_STATE_ROWS || rows.ncols() != 4 {
            return Err(StateError::ShapeMismatch(rows.nrows(), rows.ncols()));
        }
        for r in rows.rows() {
            if r[3] != 0.0 && r[3] != 1.0 {
                return Err(StateError::Invalid("flag channel must be 0 or 1"));
            }
        }
        Ok(GraspState { rows })
    }

    pub fn rows(&self) -> &Array2<f32> {
        &self.rows
    }

    pub fn into_rows(self) -> Array2<f32> {
        self.rows
    }
}

/// 1024 rows of (x, y, z, l1, l2, l3); row 0 is the push point `[1,0,0]`,
/// target rows `[0,1,0]`, other objects `[0,0,1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PushState {
    rows: Array2<f32>,
}

impl PushState {
    pub fn from_rows(rows: Array2<f32>) -> Result<Self, StateError> {
        if rows.nrows() != PUSH_STATE_ROWS || rows.ncols() != 6 {
            return Err(StateError::ShapeMismatch(rows.nrows(), rows.ncols()));
        }
        let mut push_rows = 0usize;
        for (i, r) in rows.rows().into_iter().enumerate() {
            let labels = [r[3], r[4], r[5]];
            let ones = labels.iter().filter(|&&v| v == 1.0).count();
            let zeros = labels.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || zeros != 2 {
                return Err(StateError::Invalid("labels must be one-hot"));
            }
            if r[3] == 1.0 {
                push_rows += 1;
                if i != 0 {
                    return Err(StateError::Invalid("push-point label must be on row 0"));
                }
            }
        }
        if push_rows != 1 {
            return Err(StateError::Invalid("exactly one push-point row required"));
        }
        Ok(PushState { rows })
    }

    pub fn rows(&self) -> &Array2<f32> {
        &self.rows
    }

    pub fn into_rows(self) -> Array2<f32> {
        self.rows
    }
}

/// Deterministic virtual gripper point cloud centered at the gripper-frame
/// origin: two finger boxes separated by `width` along y, plus the palm box
/// behind the fingers. No RNG: a quasirandom sequence samples each face, the
/// second finger mirrors the first, and the palm is sampled symmetrically, so
/// the set is symmetric about the y = 0 plane.
pub fn gripper_template(gripper: &GripperSpec, n_points: usize, width: f64) -> PointCloud {
    let fl = gripper.finger_length;
    let ft = gripper.finger_thickness;
    let fh = gripper.finger_height;
    let pd = gripper.palm_depth;
    let w2 = width / 2.0;

    let finger = BoxDims {
        min: Vec3::new(-fh / 2.0, w2, -fl / 2.0),
        max: Vec3::new(fh / 2.0, w2 + ft, fl / 2.0),
    };
    // palm sits behind the fingertips (negative z is away from the scene)
    let palm = BoxDims {
        min: Vec3::new(-fh / 2.0, -w2 - ft, -fl / 2.0 - pd),
        max: Vec3::new(fh / 2.0, w2 + ft, -fl / 2.0),
    };

    let a_f = finger.surface_area();
    let a_p = palm.surface_area();
    let q_f = ((n_points as f64 * a_f / (2.0 * a_f + a_p)).floor() as usize).max(1);
    let q_p = n_points - 2 * q_f;

    let mut points = Vec::with_capacity(n_points);
    // one finger, then its exact mirror
    let plus: Vec<Vec3> = sample_box_surface(&finger, q_f);
    points.extend(plus.iter().copied());
    points.extend(plus.iter().map(|p| Vec3::new(p.x, -p.y, p.z)));
    // palm: sample the y >= 0 half (cut face excluded) and mirror pairs
    let pairs = q_p / 2;
    let half = BoxDims { min: Vec3::new(palm.min.x, 0.0, palm.min.z), max: palm.max };
    let half_pts = sample_half_box_surface(&half, pairs);
    for p in &half_pts {
        points.push(*p);
        points.push(Vec3::new(p.x, -p.y, p.z));
    }
    if q_p % 2 == 1 {
        // odd leftover lands on the symmetry plane, on the palm back face
        points.push(Vec3::new(0.0, 0.0, palm.min.z));
    }
    debug_assert_eq!(points.len(), n_points);
    let ids = vec![0u32; points.len()];
    PointCloud::new(points, ids).expect("parallel arrays built together")
}

struct BoxDims {
    min: Vec3,
    max: Vec3,
}

impl BoxDims {
    fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    fn surface_area(&self) -> f64 {
        let e = self.extent();
        2.0 * (e.x * e.y + e.x * e.z + e.y * e.z)
    }
}

/// Low-discrepancy 2D sequence (the R2 lattice).
fn r2(i: usize) -> (f64, f64) {
    const G: f64 = 1.324_717_957_244_746;
    let a1 = 1.0 / G;
    let a2 = 1.0 / (G * G);
    let k = i as f64 + 1.0;
    ((k * a1).fract(), (k * a2).fract())
}

/// Face of an axis-aligned box: origin + s*u + t*v for s,t in [0,1].
struct Face {
    origin: Vec3,
    u: Vec3,
    v: Vec3,
}

impl Face {
    fn area(&self) -> f64 {
        self.u.cross(self.v).norm()
    }

    fn at(&self, s: f64, t: f64) -> Vec3 {
        self.origin + self.u.scaled(s) + self.v.scaled(t)
    }
}

fn box_faces(b: &BoxDims) -> Vec<Face> {
    let e = b.extent();
    let (ex, ey, ez) = (Vec3::new(e.x, 0.0, 0.0), Vec3::new(0.0, e.y, 0.0), Vec3::new(0.0, 0.0, e.z));
    vec![
        Face { origin: b.min, u: ey, v: ez },                                   // -x
        Face { origin: Vec3::new(b.max.x, b.min.y, b.min.z), u: ey, v: ez },    // +x
        Face { origin: b.min, u: ex, v: ez },                                   // -y
        Face { origin: Vec3::new(b.min.x, b.max.y, b.min.z), u: ex, v: ez },    // +y
        Face { origin: b.min, u: ex, v: ey },                                   // -z
        Face { origin: Vec3::new(b.min.x, b.min.y, b.max.z), u: ex, v: ey },    // +z
    ]
}

fn sample_faces(faces: &[Face], n: usize) -> Vec<Vec3> {
    let areas: Vec<f64> = faces.iter().map(Face::area).collect();
    let total: f64 = areas.iter().sum();
    let counts = largest_remainder(&areas, total, n);
    let mut out = Vec::with_capacity(n);
    for (face, &count) in faces.iter().zip(&counts) {
        for i in 0..count {
            let (s, t) = r2(i);
            out.push(face.at(s, t));
        }
    }
    out
}

fn sample_box_surface(b: &BoxDims, n: usize) -> Vec<Vec3> {
    sample_faces(&box_faces(b), n)
}

/// Surface of a half box cut at its minimum-y plane; the cut face is interior
/// and therefore excluded.
fn sample_half_box_surface(b: &BoxDims, n: usize) -> Vec<Vec3> {
    let faces: Vec<Face> = box_faces(b)
        .into_iter()
        .enumerate()
        .filter(|(i, _)| *i != 2) // -y face is the cut plane
        .map(|(_, f)| f)
        .collect();
    sample_faces(&faces, n)
}

/// Scene points inside the closing box, expressed in the grasp frame;
/// instance ids preserved.
pub fn extract_closing_region(
    scene_cloud: &PointCloud,
    grasp: &GraspCandidate,
    gripper: &GripperSpec,
) -> PointCloud {
    let local = scene_cloud.transformed(&grasp.pose.inverse());
    let keep: Vec<usize> = (0..local.len())
        .filter(|&i| {
            let p = local.points[i];
            p.x.abs() <= gripper.finger_height / 2.0
                && p.y.abs() <= grasp.width / 2.0
                && p.z.abs() <= gripper.finger_length / 2.0
        })
        .collect();
    local.select(&keep)
}

/// Exactly `k` rows out of a cloud by index: seeded choice without replacement
/// when long, keep-all plus replacement padding when short. Index-based so the
/// selection is invariant under rigid motions of the coordinates.
fn resize_indices(len: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if len >= k {
        return sample_indices(&mut rng, len, k).into_iter().collect();
    }
    let mut idx: Vec<usize> = (0..len).collect();
    while idx.len() < k {
        idx.push(rng.gen_range(0..len));
    }
    idx
}

/// Assemble the grasp state: 145 gripper-template rows (flag 0) followed by
/// 200 closing-region rows (flag 1), all in the grasp frame. With
/// `no_gripper_pc` the template is dropped and the closing region fills all
/// 345 rows (flag 1) for the ablation variant.
pub fn make_grasp_state(
    scene_cloud: &PointCloud,
    grasp: &GraspCandidate,
    gripper: &GripperSpec,
    seed: u64,
    no_gripper_pc: bool,
) -> Result<GraspState, StateError> {
    let region = extract_closing_region(scene_cloud, grasp, gripper);
    let mut rows = Array2::<f32>::zeros((GRASP_STATE_ROWS, 4));
    if no_gripper_pc {
        if region.is_empty() {
            return Err(StateError::EmptyGraspState);
        }
        fill_region_rows(&mut rows, 0, GRASP_STATE_ROWS, &region, seed);
    } else {
        let template = gripper_template(gripper, GRASP_TEMPLATE_POINTS, grasp.width);
        for (i, p) in template.points.iter().enumerate() {
            rows[[i, 0]] = p.x as f32;
            rows[[i, 1]] = p.y as f32;
            rows[[i, 2]] = p.z as f32;
            rows[[i, 3]] = 0.0;
        }
        fill_region_rows(&mut rows, GRASP_TEMPLATE_POINTS, GRASP_REGION_POINTS, &region, seed);
    }
    GraspState::from_rows(rows)
}

/// Empty regions leave zero rows (flag 1): a degenerate all-at-origin block
/// the evaluator can recognize as "nothing between the fingers".
fn fill_region_rows(rows: &mut Array2<f32>, offset: usize, count: usize, region: &PointCloud, seed: u64) {
    if region.is_empty() {
        for i in 0..count {
            rows[[offset + i, 3]] = 1.0;
        }
        return;
    }
    let picked = resize_indices(region.len(), count, seed);
    for (i, &idx) in picked.iter().enumerate() {
        let p = region.points[idx];
        rows[[offset + i, 0]] = p.x as f32;
        rows[[offset + i, 1]] = p.y as f32;
        rows[[offset + i, 2]] = p.z as f32;
        rows[[offset + i, 3]] = 1.0;
    }
}

/// The closing-region block of a grasp state as a standalone row matrix;
/// shared by state assembly and the batched candidate scorer so both produce
/// identical rows for identical seeds.
pub fn region_rows_block(region: &PointCloud, count: usize, seed: u64) -> Array2<f32> {
    let mut rows = Array2::<f32>::zeros((count, 4));
    fill_region_rows(&mut rows, 0, count, region, seed);
    rows
}

/// Canonicalize a push: the planar transform that moves the push pose to the
/// reference (x'=0.5, y'=0, heading along +x) is applied to the scene cloud
/// with z untouched; the scene is downsampled to 1023 points with a stratified
/// target quota, and the push point row is prepended with label [1,0,0].
pub fn canonicalize_push(
    scene_cloud: &PointCloud,
    push: &PushCandidate,
    target_id: u32,
    seed: u64,
) -> Result<PushState, StateError> {
    let target_idx = scene_cloud.indices_of(target_id);
    if target_idx.is_empty() {
        return Err(StateError::MissingTarget);
    }
    let other_idx: Vec<usize> =
        (0..scene_cloud.len()).filter(|&i| scene_cloud.instance_ids[i] != target_id).collect();

    // planar frame change: heading of the push x axis rotates to +x
    let xaxis = push.pose.rotation.col(0);
    let heading = xaxis.y.atan2(xaxis.x);
    let (s, c) = (-heading).sin_cos();
    let sx = push.start.x;
    let sy = push.start.y;
    let map = |p: Vec3| -> (f64, f64, f64) {
        let dx = p.x - sx;
        let dy = p.y - sy;
        (c * dx - s * dy + PUSH_REF_X, s * dx + c * dy + PUSH_REF_Y, p.z)
    };

    // stratified quota: proportional split, target floor at 256, upsampling as needed
    let n_t_prop = (PUSH_SCENE_POINTS as f64 * target_idx.len() as f64 / scene_cloud.len() as f64)
        .round() as usize;
    let n_t = if other_idx.is_empty() {
        PUSH_SCENE_POINTS
    } else {
        n_t_prop.max(PUSH_TARGET_QUOTA).min(PUSH_SCENE_POINTS - 1)
    };
    let n_o = PUSH_SCENE_POINTS - n_t;

    let mut rows = Array2::<f32>::zeros((PUSH_STATE_ROWS, 6));
    rows[[0, 0]] = PUSH_REF_X as f32;
    rows[[0, 1]] = PUSH_REF_Y as f32;
    rows[[0, 2]] = push.start.z as f32;
    rows[[0, 3]] = 1.0;

    let t_sel = resize_indices(target_idx.len(), n_t, crate::geom::derive_seed(seed, 1));
    let o_sel = resize_indices(other_idx.len().max(1), n_o, crate::geom::derive_seed(seed, 2));
    let mut row = 1usize;
    for &k in &t_sel {
        let (x, y, z) = map(scene_cloud.points[target_idx[k]]);
        rows[[row, 0]] = x as f32;
        rows[[row, 1]] = y as f32;
        rows[[row, 2]] = z as f32;
        rows[[row, 4]] = 1.0;
        row += 1;
    }
    for &k in &o_sel {
        let (x, y, z) = map(scene_cloud.points[other_idx[k]]);
        rows[[row, 0]] = x as f32;
        rows[[row, 1]] = y as f32;
        rows[[row, 2]] = z as f32;
        rows[[row, 5]] = 1.0;
        row += 1;
    }
    debug_assert_eq!(row, PUSH_STATE_ROWS);
    PushState::from_rows(rows)
}

// --- binary state layout -------------------------------------------------
//
// 16-byte header: magic `PGST`, version u16, rows u16, cols u16, label u16,
// 4 reserved bytes; then little-endian f32 values, row-major.

const STATE_MAGIC: &[u8; 4] = b"PGST";
const STATE_VERSION: u16 = 1;

pub fn write_state_rows(w: &mut impl Write, rows: &Array2<f32>, label: u16) -> Result<(), StateError> {
    w.write_all(STATE_MAGIC)?;
    w.write_all(&STATE_VERSION.to_le_bytes())?;
    w.write_all(&(rows.nrows() as u16).to_le_bytes())?;
    w.write_all(&(rows.ncols() as u16).to_le_bytes())?;
    w.write_all(&label.to_le_bytes())?;
    w.write_all(&[0u8; 4])?;
    for v in rows.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_state_rows(r: &mut impl Read) -> Result<(Array2<f32>, u16), StateError> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[0..4] != STATE_MAGIC {
        return Err(StateError::BadMagic);
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != STATE_VERSION {
        return Err(StateError::BadVersion(version));
    }
    let nrows = u16::from_le_bytes([header[6], header[7]]) as usize;
    let ncols = u16::from_le_bytes([header[8], header[9]]) as usize;
    let label = u16::from_le_bytes([header[10], header[11]]);
    let mut buf = vec![0u8; nrows * ncols * 4];
    r.read_exact(&mut buf)?;
    let values: Vec<f32> = buf
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let rows = Array2::from_shape_vec((nrows, ncols), values)
        .map_err(|_| StateError::ShapeMismatch(nrows, ncols))?;
    Ok((rows, label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Pose, Rot3};
    use crate::sim::{builtin_shapes, generate_scene, render_cloud};

    fn default_grasp(x: f64, y: f64, z: f64, phi: f64, width: f64) -> GraspCandidate {
        let closing = Vec3::new(phi.cos(), phi.sin(), 0.0);
        let approach = Vec3::new(0.0, 0.0, -1.0);
        let xaxis = closing.cross(approach);
        GraspCandidate {
            pose: Pose::new(Rot3::from_cols(xaxis, closing, approach), Vec3::new(x, y, z)),
            width,
            source_score: 1.0,
        }
    }

    #[test]
    fn template_is_symmetric_and_exact_count() {
        let g = GripperSpec::default();
        let t = gripper_template(&g, 145, 0.06);
        assert_eq!(t.len(), 145);
        for p in &t.points {
            let mirrored = Vec3::new(p.x, -p.y, p.z);
            let found = t.points.iter().any(|q| (*q - mirrored).norm() < 1e-9);
            assert!(found, "no mirror for {p:?}");
        }
    }

    #[test]
    fn template_finger_faces_at_half_width() {
        let g = GripperSpec::default();
        let t = gripper_template(&g, 145, 0.10);
        let fl = g.finger_length;
        let mut saw_inner_face = false;
        for p in &t.points {
            if p.z > -fl / 2.0 + 1e-9 {
                // finger region: inner faces at |y| = 0.05
                assert!(p.y.abs() >= 0.05 - 1e-9, "finger point inside the opening: {p:?}");
                assert!(p.y.abs() <= 0.05 + g.finger_thickness + 1e-9);
                if (p.y.abs() - 0.05).abs() < 1e-9 {
                    saw_inner_face = true;
                }
            }
        }
        assert!(saw_inner_face);
    }

    #[test]
    fn template_is_bit_deterministic() {
        let g = GripperSpec::default();
        let a = gripper_template(&g, 145, 0.07);
        let b = gripper_template(&g, 145, 0.07);
        assert_eq!(a, b);
    }

    #[test]
    fn closing_region_respects_box_bounds() {
        let g = GripperSpec::default();
        let grasp = default_grasp(0.25, 0.22, 0.022, std::f64::consts::FRAC_PI_2, 0.06);
        // points: one inside, one beyond the fingertips, one outside in y
        let cloud = PointCloud::new(
            vec![
                Vec3::new(0.25, 0.22, 0.022),
                Vec3::new(0.25, 0.22, 0.022 + g.finger_length),
                Vec3::new(0.25 + 0.05, 0.22, 0.022),
            ],
            vec![1, 1, 2],
        )
        .unwrap();
        let region = extract_closing_region(&cloud, &grasp, &g);
        assert_eq!(region.len(), 1);
        assert_eq!(region.instance_ids, vec![1]);
        assert!(region.points[0].norm() < 1e-9, "in grasp frame the center maps to origin");
    }

    #[test]
    fn closing_region_empty_is_fine() {
        let g = GripperSpec::default();
        let grasp = default_grasp(0.4, 0.4, 0.022, 0.0, 0.06);
        let cloud = PointCloud::new(vec![Vec3::new(0.1, 0.1, 0.02)], vec![1]).unwrap();
        assert!(extract_closing_region(&cloud, &grasp, &g).is_empty());
    }

    #[test]
    fn grasp_state_layout_and_flags() {
        let scene = generate_scene(4, &builtin_shapes(), 8).unwrap();
        let cloud = render_cloud(&scene, 200, 0.0, 1);
        let t = scene.target();
        let grasp = default_grasp(t.x, t.y, 0.022, 0.3, 0.07);
        let g = GripperSpec::default();
        let state = make_grasp_state(&cloud, &grasp, &g, 5, false).unwrap();
        let rows = state.rows();
        assert_eq!(rows.nrows(), 345);
        for i in 0..GRASP_TEMPLATE_POINTS {
            assert_eq!(rows[[i, 3]], 0.0);
        }
        for i in GRASP_TEMPLATE_POINTS..GRASP_STATE_ROWS {
            assert_eq!(rows[[i, 3]], 1.0);
        }
        // template rows match the canonical template exactly (in f32 state space)
        let template = gripper_template(&g, GRASP_TEMPLATE_POINTS, grasp.width);
        for (i, p) in template.points.iter().enumerate() {
            assert_eq!(rows[[i, 0]], p.x as f32);
            assert_eq!(rows[[i, 1]], p.y as f32);
            assert_eq!(rows[[i, 2]], p.z as f32);
        }
    }

    #[test]
    fn grasp_state_gripper_rows_scene_independent() {
        let g = GripperSpec::default();
        let grasp = default_grasp(0.25, 0.22, 0.022, 0.0, 0.06);
        let a = make_grasp_state(
            &PointCloud::new(vec![Vec3::new(0.25, 0.22, 0.02)], vec![1]).unwrap(),
            &grasp,
            &g,
            1,
            false,
        )
        .unwrap();
        let grasp2 = default_grasp(0.10, 0.40, 0.022, 0.0, 0.06);
        let b = make_grasp_state(
            &PointCloud::new(vec![Vec3::new(0.10, 0.40, 0.02)], vec![1]).unwrap(),
            &grasp2,
            &g,
            2,
            false,
        )
        .unwrap();
        for i in 0..GRASP_TEMPLATE_POINTS {
            for j in 0..4 {
                assert_eq!(a.rows()[[i, j]], b.rows()[[i, j]]);
            }
        }
    }

    #[test]
    fn ablation_state_uses_region_only() {
        let g = GripperSpec::default();
        let grasp = default_grasp(0.25, 0.22, 0.022, 0.0, 0.06);
        let cloud = PointCloud::new(vec![Vec3::new(0.25, 0.22, 0.021)], vec![1]).unwrap();
        let state = make_grasp_state(&cloud, &grasp, &g, 3, true).unwrap();
        for r in state.rows().rows() {
            assert_eq!(r[3], 1.0);
        }
        // empty region in ablation mode is an error
        let empty = PointCloud::new(vec![Vec3::new(0.0, 0.0, 0.0)], vec![1]).unwrap();
        assert!(matches!(
            make_grasp_state(&empty, &grasp, &g, 3, true),
            Err(StateError::EmptyGraspState)
        ));
    }

    #[test]
    fn grasp_state_invariant_under_rigid_motion() {
        let scene = generate_scene(5, &builtin_shapes(), 17).unwrap();
        let cloud = render_cloud(&scene, 150, 0.001, 9);
        let t = scene.target();
        let grasp = default_grasp(t.x, t.y, 0.022, 0.8, 0.07);
        let g = GripperSpec::default();
        let base = make_grasp_state(&cloud, &grasp, &g, 5, false).unwrap();

        let motion = Pose::planar(1.3, 0.05, -0.02, 0.0);
        let moved_cloud = cloud.transformed(&motion);
        let moved_grasp = GraspCandidate {
            pose: motion.compose(&grasp.pose),
            width: grasp.width,
            source_score: grasp.source_score,
        };
        let moved = make_grasp_state(&moved_cloud, &moved_grasp, &g, 5, false).unwrap();
        for (a, b) in base.rows().iter().zip(moved.rows().iter()) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    fn push_candidate(start: Vec3, heading: f64) -> PushCandidate {
        let xaxis = Vec3::new(heading.cos(), heading.sin(), 0.0);
        let zaxis = Vec3::new(0.0, 0.0, -1.0);
        let yaxis = zaxis.cross(xaxis);
        PushCandidate { pose: Pose::new(Rot3::from_cols(xaxis, yaxis, zaxis), start), start }
    }

    fn toy_scene_cloud(n_target: usize, n_other: usize, seed: u64) -> PointCloud {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        use rand::Rng as _;
        let mut pts = Vec::new();
        let mut ids = Vec::new();
        for _ in 0..n_target {
            pts.push(Vec3::new(
                0.25 + rng.gen_range(-0.02..0.02),
                0.22 + rng.gen_range(-0.02..0.02),
                rng.gen_range(0.0..0.04),
            ));
            ids.push(1);
        }
        for _ in 0..n_other {
            pts.push(Vec3::new(
                0.35 + rng.gen_range(-0.02..0.02),
                0.30 + rng.gen_range(-0.02..0.02),
                rng.gen_range(0.0..0.04),
            ));
            ids.push(2);
        }
        PointCloud::new(pts, ids).unwrap()
    }

    #[test]
    fn push_state_reference_row_and_labels() {
        let cloud = toy_scene_cloud(400, 800, 3);
        let push = push_candidate(Vec3::new(0.2, 0.1, 0.05), std::f64::consts::FRAC_PI_2);
        let state = canonicalize_push(&cloud, &push, 1, 7).unwrap();
        let rows = state.rows();
        assert_eq!(rows[[0, 0]], 0.5);
        assert_eq!(rows[[0, 1]], 0.0);
        assert_eq!(rows[[0, 2]], 0.05);
        assert_eq!((rows[[0, 3]], rows[[0, 4]], rows[[0, 5]]), (1.0, 0.0, 0.0));
        let mut target_rows = 0;
        for r in rows.rows().into_iter().skip(1) {
            assert_eq!(r[3], 0.0);
            assert_eq!(r[4] + r[5], 1.0);
            if r[4] == 1.0 {
                target_rows += 1;
            }
        }
        assert!(target_rows >= PUSH_TARGET_QUOTA, "target rows {target_rows}");
    }

    #[test]
    fn push_state_at_reference_keeps_scene() {
        let cloud = toy_scene_cloud(300, 900, 5);
        let push = push_candidate(Vec3::new(PUSH_REF_X, PUSH_REF_Y, 0.02), 0.0);
        let state = canonicalize_push(&cloud, &push, 1, 11).unwrap();
        // transform is the identity: every selected row must coincide with a
        // scene point exactly
        for r in state.rows().rows().into_iter().skip(1) {
            let found = cloud.points.iter().any(|p| {
                (p.x as f32 - r[0]).abs() < 1e-12
                    && (p.y as f32 - r[1]).abs() < 1e-12
                    && (p.z as f32 - r[2]).abs() < 1e-12
            });
            assert!(found);
        }
    }

    #[test]
    fn push_state_small_target_is_upsampled() {
        let cloud = toy_scene_cloud(40, 1500, 8);
        let push = push_candidate(Vec3::new(0.2, 0.2, 0.02), 0.3);
        let state = canonicalize_push(&cloud, &push, 1, 9).unwrap();
        let target_rows =
            state.rows().rows().into_iter().skip(1).filter(|r| r[4] == 1.0).count();
        assert_eq!(target_rows, PUSH_TARGET_QUOTA);
    }

    #[test]
    fn push_state_missing_target_errors() {
        let cloud = toy_scene_cloud(0, 100, 2);
        let push = push_candidate(Vec3::new(0.2, 0.2, 0.02), 0.0);
        assert!(matches!(canonicalize_push(&cloud, &push, 1, 4), Err(StateError::MissingTarget)));
    }

    #[test]
    fn canonicalization_is_motion_invariant() {
        let cloud = toy_scene_cloud(500, 1200, 21);
        let push = push_candidate(Vec3::new(0.2, 0.15, 0.03), 0.7);
        let base = canonicalize_push(&cloud, &push, 1, 13).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            let motion = Pose::planar(phi, rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), 0.0);
            let moved_cloud = cloud.transformed(&motion);
            let moved_push = PushCandidate {
                pose: motion.compose(&push.pose),
                start: motion.apply(push.start),
            };
            let moved = canonicalize_push(&moved_cloud, &moved_push, 1, 13).unwrap();
            for (a, b) in base.rows().iter().zip(moved.rows().iter()) {
                assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn state_file_round_trip_is_bit_exact() {
        let cloud = toy_scene_cloud(300, 700, 31);
        let push = push_candidate(Vec3::new(0.22, 0.18, 0.02), 1.1);
        let state = canonicalize_push(&cloud, &push, 1, 3).unwrap();
        let mut buf = Vec::new();
        write_state_rows(&mut buf, state.rows(), 1).unwrap();
        let (rows, label) = read_state_rows(&mut buf.as_slice()).unwrap();
        assert_eq!(label, 1);
        assert_eq!(rows, *state.rows());
        let mut buf2 = Vec::new();
        write_state_rows(&mut buf2, &rows, 1).unwrap();
        assert_eq!(buf, buf2);
    }
}
