//! Planar oriented bounding boxes: free rotation about z only, exact z extents.

use super::{GeomError, PointCloud, Polygon2, Rot3, Vec3};

/// Oriented bounding box. `axes` columns are the box axes; the third column
/// is always the world z axis in this planar setting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Obb {
    pub center: Vec3,
    pub axes: Rot3,
    pub half_extents: Vec3,
}

impl Obb {
    /// True if `p` lies inside the box expanded by `tol` on every face.
    pub fn contains(&self, p: Vec3, tol: f64) -> bool {
        let d = p - self.center;
        for (axis, half) in
            [(self.axes.col(0), self.half_extents.x), (self.axes.col(1), self.half_extents.y), (self.axes.col(2), self.half_extents.z)]
        {
            if d.dot(axis).abs() > half + tol {
                return false;
            }
        }
        true
    }
}

/// Minimum-area bounding rectangle of the XY projection (rotating calipers
/// over hull edge directions) with exact extents in z.
pub fn compute_obb(cloud: &PointCloud) -> Result<Obb, GeomError> {
    if cloud.is_empty() {
        return Err(GeomError::EmptyCloud);
    }
    let zmin = cloud.min_z();
    let zmax = cloud.max_z();
    let xy: Vec<(f64, f64)> = cloud.points.iter().map(|p| p.xy()).collect();

    let (u, cx, cy, hx, hy) = match Polygon2::convex_hull(&xy) {
        Ok(hull) => {
            let verts = hull.vertices();
            let n = verts.len();
            let mut best = f64::INFINITY;
            let mut best_fit = (0.0, 0.0, 0.0, 0.0, 0.0); // angle, cx, cy, hx, hy
            for i in 0..n {
                let p = verts[i];
                let q = verts[(i + 1) % n];
                let ang = (q.1 - p.1).atan2(q.0 - p.0);
                let (s, c) = ang.sin_cos();
                let mut umin = f64::INFINITY;
                let mut umax = f64::NEG_INFINITY;
                let mut vmin = f64::INFINITY;
                let mut vmax = f64::NEG_INFINITY;
                for &(x, y) in verts {
                    let uc = c * x + s * y;
                    let vc = -s * x + c * y;
                    umin = umin.min(uc);
                    umax = umax.max(uc);
                    vmin = vmin.min(vc);
                    vmax = vmax.max(vc);
                }
                let area = (umax - umin) * (vmax - vmin);
                if area < best {
                    best = area;
                    let cu = (umin + umax) / 2.0;
                    let cv = (vmin + vmax) / 2.0;
                    best_fit =
                        (ang, c * cu - s * cv, s * cu + c * cv, (umax - umin) / 2.0, (vmax - vmin) / 2.0);
                }
            }
            let (ang, cx, cy, hx, hy) = best_fit;
            (ang, cx, cy, hx, hy)
        }
        Err(_) => {
            // degenerate projection: collinear or a single point
            let (mut lo, mut hi) = (xy[0], xy[0]);
            let mut dir = (1.0, 0.0);
            let mut span = 0.0;
            for &a in &xy {
                for &b in &xy {
                    let d = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
                    if d > span {
                        span = d;
                        lo = a;
                        hi = b;
                        dir = ((b.0 - a.0) / d, (b.1 - a.1) / d);
                    }
                }
            }
            let ang = if span > 0.0 { dir.1.atan2(dir.0) } else { 0.0 };
            (ang, (lo.0 + hi.0) / 2.0, (lo.1 + hi.1) / 2.0, span / 2.0, 0.0)
        }
    };

    Ok(Obb {
        center: Vec3::new(cx, cy, (zmin + zmax) / 2.0),
        axes: Rot3::rot_z(u),
        half_extents: Vec3::new(hx, hy, (zmax - zmin) / 2.0),
    })
}
