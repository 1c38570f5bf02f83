//! Deterministic quasi-static planar simulator: scene construction, surface
//! point-cloud synthesis with instance masks, push execution with contact
//! resolution, and a ground-truth grasp oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geom::{derive_seed, GeomError, PointCloud, Polygon2, Pose, Vec3};

mod oracle;
mod push;
mod shapes;

pub use oracle::{grasp_oracle, grasp_oracle_detail, GraspOutcome, OracleStage};
pub use push::execute_push;
pub use shapes::{builtin_shapes, format_shape_library, parse_shape_library};

/// Workspace extent along x, meters.
pub const WORKSPACE_W: f64 = 0.50;
/// Workspace extent along y, meters.
pub const WORKSPACE_D: f64 = 0.45;
/// Default pusher disc radius: half the push sampling clearance.
pub const DEFAULT_PUSHER_RADIUS: f64 = 0.008;
/// Default push stroke, meters.
pub const DEFAULT_STROKE: f64 = 0.125;
/// Std-dev of the center-biased placement distribution.
const PLACEMENT_SIGMA: f64 = 0.075;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("workspace saturated")]
    WorkspaceSaturated,
    #[error("invalid push start")]
    InvalidPushStart,
    #[error("push start outside workspace")]
    PushStartOutsideWorkspace,
    #[error("shape library is empty")]
    EmptyShapeLibrary,
    #[error("unknown shape `{0}`")]
    UnknownShape(String),
    #[error("scene parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Convex extruded footprint with a height, in the object's local frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeSpec {
    pub name: String,
    pub footprint: Polygon2,
    pub height: f64,
}

/// A rigid object resting on the table: planar pose only.
#[derive(Clone, Debug, PartialEq)]
pub struct SimObject {
    pub shape: ShapeSpec,
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl SimObject {
    pub fn pose(&self) -> Pose {
        Pose::planar(self.theta, self.x, self.y, 0.0)
    }

    /// Footprint polygon in world coordinates.
    pub fn footprint_world(&self) -> Polygon2 {
        self.shape.footprint.transformed(self.theta, self.x, self.y)
    }

    pub fn height(&self) -> f64 {
        self.shape.height
    }
}

/// Immutable scene value; pushes return a new scene.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub objects: Vec<SimObject>,
    pub target_id: u32,
    pub workspace: (f64, f64),
    pub rng_seed: u64,
}

impl Scene {
    pub fn object(&self, id: u32) -> Option<&SimObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn target(&self) -> &SimObject {
        self.object(self.target_id).expect("target id present among objects")
    }

    /// Max pairwise footprint penetration depth, meters.
    pub fn max_penetration(&self) -> f64 {
        let polys: Vec<Polygon2> = self.objects.iter().map(|o| o.footprint_world()).collect();
        let mut worst = 0.0f64;
        for i in 0..polys.len() {
            for j in (i + 1)..polys.len() {
                if let Ok(crate::geom::Overlap::Mtv { depth, .. }) =
                    crate::geom::polygon_overlap(&polys[i], &polys[j])
                {
                    worst = worst.max(depth);
                }
            }
        }
        worst
    }

    /// One object per line after a small header; floats round-trip exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("pushgrasp-scene v1\n");
        s.push_str(&format!("workspace {} {}\n", self.workspace.0, self.workspace.1));
        s.push_str(&format!("seed {}\n", self.rng_seed));
        s.push_str(&format!("target {}\n", self.target_id));
        s.push_str(&format!("objects {}\n", self.objects.len()));
        for o in &self.objects {
            s.push_str(&format!("{} {} {} {} {}\n", o.id, o.shape.name, o.x, o.y, o.theta));
        }
        s
    }

    pub fn from_text(text: &str, library: &[ShapeSpec]) -> Result<Scene, SimError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| SimError::Parse("empty file".into()))?;
        if header.trim() != "pushgrasp-scene v1" {
            return Err(SimError::Parse(format!("bad header `{header}`")));
        }
        let mut workspace = (WORKSPACE_W, WORKSPACE_D);
        let mut seed = 0u64;
        let mut target = 0u32;
        let mut count = 0usize;
        for key in ["workspace", "seed", "target", "objects"] {
            let line = lines.next().ok_or_else(|| SimError::Parse(format!("missing {key}")))?;
            let mut it = line.split_whitespace();
            let k = it.next().unwrap_or("");
            if k != key {
                return Err(SimError::Parse(format!("expected `{key}`, got `{k}`")));
            }
            let mut num = |what: &str| -> Result<f64, SimError> {
                it.next()
                    .ok_or_else(|| SimError::Parse(format!("missing value for {what}")))?
                    .parse::<f64>()
                    .map_err(|e| SimError::Parse(format!("{what}: {e}")))
            };
            match key {
                "workspace" => workspace = (num("workspace w")?, num("workspace d")?),
                "seed" => seed = num("seed")? as u64,
                "target" => target = num("target")? as u32,
                "objects" => count = num("objects")? as usize,
                _ => unreachable!(),
            }
        }
        let mut objects = Vec::with_capacity(count);
        for _ in 0..count {
            let line = lines.next().ok_or_else(|| SimError::Parse("missing object line".into()))?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 5 {
                return Err(SimError::Parse(format!("bad object line `{line}`")));
            }
            let id: u32 = parts[0].parse().map_err(|e| SimError::Parse(format!("id: {e}")))?;
            let shape = library
                .iter()
                .find(|s| s.name == parts[1])
                .cloned()
                .ok_or_else(|| SimError::UnknownShape(parts[1].to_string()))?;
            let x: f64 = parts[2].parse().map_err(|e| SimError::Parse(format!("x: {e}")))?;
            let y: f64 = parts[3].parse().map_err(|e| SimError::Parse(format!("y: {e}")))?;
            let theta: f64 = parts[4].parse().map_err(|e| SimError::Parse(format!("theta: {e}")))?;
            objects.push(SimObject { shape, id, x, y, theta });
        }
        let scene = Scene { objects, target_id: target, workspace, rng_seed: seed };
        if scene.object(target).is_none() {
            return Err(SimError::Parse(format!("target {target} not among objects")));
        }
        Ok(scene)
    }
}

/// Two-finger parallel gripper dimensions, meters / radians.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GripperSpec {
    pub finger_length: f64,
    pub finger_thickness: f64,
    pub finger_height: f64,
    pub max_opening: f64,
    pub palm_depth: f64,
    pub friction_cone_half_angle: f64,
}

impl Default for GripperSpec {
    fn default() -> Self {
        GripperSpec {
            finger_length: 0.04,
            finger_thickness: 0.01,
            finger_height: 0.03,
            max_opening: 0.10,
            palm_depth: 0.02,
            friction_cone_half_angle: 20f64.to_radians(),
        }
    }
}

/// A push: start pose (frame: z down, x toward the target centroid) and stroke.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PushCommand {
    pub pose: Pose,
    pub stroke: f64,
}

/// Rejection-sample a cluttered scene biased toward the workspace center.
pub fn generate_scene(
    n_objects: usize,
    shape_library: &[ShapeSpec],
    seed: u64,
) -> Result<Scene, SimError> {
    if n_objects == 0 {
        return Err(SimError::Parse("n_objects must be >= 1".into()));
    }
    if shape_library.is_empty() {
        return Err(SimError::EmptyShapeLibrary);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cx = WORKSPACE_W / 2.0;
    let cy = WORKSPACE_D / 2.0;
    let mut objects: Vec<SimObject> = Vec::with_capacity(n_objects);
    let mut placed_polys: Vec<Polygon2> = Vec::new();
    let mut rejections = 0usize;
    while objects.len() < n_objects {
        let shape = shape_library[rng.gen_range(0..shape_library.len())].clone();
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        let gauss = rand_distr::Normal::new(0.0, PLACEMENT_SIGMA).unwrap();
        let x = cx + rand_distr::Distribution::sample(&gauss, &mut rng);
        let y = cy + rand_distr::Distribution::sample(&gauss, &mut rng);
        let candidate = SimObject { shape, id: objects.len() as u32 + 1, x, y, theta };
        let poly = candidate.footprint_world();
        let ((xmin, ymin), (xmax, ymax)) = poly.aabb();
        let inside = xmin >= 0.0 && ymin >= 0.0 && xmax <= WORKSPACE_W && ymax <= WORKSPACE_D;
        let clear = inside
            && placed_polys.iter().all(|p| {
                matches!(crate::geom::polygon_overlap(p, &poly), Ok(crate::geom::Overlap::Disjoint))
            });
        if clear {
            placed_polys.push(poly);
            objects.push(candidate);
        } else {
            rejections += 1;
            if rejections >= 10_000 {
                return Err(SimError::WorkspaceSaturated);
            }
        }
    }
    let target_id = rng.gen_range(0..n_objects) as u32 + 1;
    Ok(Scene { objects, target_id, workspace: (WORKSPACE_W, WORKSPACE_D), rng_seed: seed })
}

/// Uniform-area sampling of every object's top and side faces, instance ids
/// set per object, Gaussian noise applied at the end.
pub fn render_cloud(
    scene: &Scene,
    points_per_object: usize,
    noise_sigma: f64,
    seed: u64,
) -> PointCloud {
    let mut points = Vec::with_capacity(scene.objects.len() * points_per_object);
    let mut ids = Vec::with_capacity(scene.objects.len() * points_per_object);
    for obj in &scene.objects {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, obj.id as u64));
        let poly = obj.footprint_world();
        let verts = poly.vertices();
        let n = verts.len();
        let h = obj.height();

        // face list: top polygon + one rectangle per side edge
        let top_area = poly.area();
        let mut areas = vec![top_area];
        for i in 0..n {
            let a = verts[i];
            let b = verts[(i + 1) % n];
            let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
            areas.push(len * h);
        }
        let total: f64 = areas.iter().sum();
        let counts = largest_remainder(&areas, total, points_per_object);

        // top face: fan triangulation, area-weighted
        let mut tri_cum = Vec::with_capacity(n.saturating_sub(2));
        let mut acc = 0.0;
        for i in 1..(n - 1) {
            let a = verts[0];
            let b = verts[i];
            let c = verts[i + 1];
            let area = ((b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)).abs() / 2.0;
            acc += area;
            tri_cum.push((acc, i));
        }
        for _ in 0..counts[0] {
            let r = rng.gen_range(0.0..acc.max(f64::MIN_POSITIVE));
            let &(_, i) = tri_cum
                .iter()
                .find(|&&(c, _)| r <= c)
                .unwrap_or(tri_cum.last().expect("polygon has >= 1 triangle"));
            let a = verts[0];
            let b = verts[i];
            let c = verts[i + 1];
            let (r1, r2): (f64, f64) = (rng.gen(), rng.gen());
            let sq = r1.sqrt();
            let u = 1.0 - sq;
            let v = sq * (1.0 - r2);
            let w = sq * r2;
            points.push(Vec3::new(
                u * a.0 + v * b.0 + w * c.0,
                u * a.1 + v * b.1 + w * c.1,
                h,
            ));
            ids.push(obj.id);
        }
        // side faces
        for (i, &count) in counts.iter().enumerate().skip(1) {
            let a = verts[i - 1];
            let b = verts[i % n];
            for _ in 0..count {
                let t: f64 = rng.gen();
                let z: f64 = rng.gen_range(0.0..h);
                points.push(Vec3::new(a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1), z));
                ids.push(obj.id);
            }
        }
    }
    let cloud = PointCloud::new(points, ids).expect("parallel arrays built together");
    cloud.with_noise(noise_sigma, derive_seed(seed, 0x6e6f_6973))
}

/// Integer allocation of `total_count` proportional to `weights`.
pub(crate) fn largest_remainder(weights: &[f64], total: f64, total_count: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = Vec::with_capacity(weights.len());
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(weights.len());
    let mut assigned = 0usize;
    for (i, &w) in weights.iter().enumerate() {
        let exact = total_count as f64 * w / total;
        let floor = exact.floor() as usize;
        counts.push(floor);
        assigned += floor;
        remainders.push((exact - floor as f64, i));
    }
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for k in 0..(total_count - assigned) {
        counts[remainders[k % remainders.len()].1] += 1;
    }
    counts
}
