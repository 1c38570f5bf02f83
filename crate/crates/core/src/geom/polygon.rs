//! 2D polygons: construction, convex hulls, separating-axis overlap tests,
//! and disc dilation (Minkowski sum boundary).

use super::GeomError;

/// Arc discretization cap for dilation, radians (2 degrees).
const MAX_ARC_STEP: f64 = 2.0 * std::f64::consts::PI / 180.0;

/// Simple polygon with counter-clockwise vertex order.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon2 {
    vertices: Vec<(f64, f64)>,
}

/// Result of a convex overlap test. The MTV separates `b` from `a`:
/// translating `b` by `depth * (nx, ny)` resolves the overlap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Overlap {
    Disjoint,
    Mtv { nx: f64, ny: f64, depth: f64 },
}

impl Polygon2 {
    /// Validates simplicity and vertex count; normalizes orientation to CCW.
    pub fn new(mut vertices: Vec<(f64, f64)>) -> Result<Self, GeomError> {
        if vertices.len() < 3 {
            return Err(GeomError::DegeneratePolygon);
        }
        let area = signed_area(&vertices);
        if area.abs() < 1e-12 {
            return Err(GeomError::DegeneratePolygon);
        }
        if area < 0.0 {
            vertices.reverse();
        }
        if self_intersects(&vertices) {
            return Err(GeomError::SelfIntersecting);
        }
        Ok(Polygon2 { vertices })
    }

    /// For internally-constructed polygons already known to be valid CCW.
    pub(crate) fn new_unchecked(vertices: Vec<(f64, f64)>) -> Self {
        debug_assert!(vertices.len() >= 3);
        debug_assert!(signed_area(&vertices) > 0.0);
        Polygon2 { vertices }
    }

    /// Convex hull of a point set (monotone chain), CCW, collinear points dropped.
    pub fn convex_hull(points: &[(f64, f64)]) -> Result<Self, GeomError> {
        let mut pts: Vec<(f64, f64)> = points.to_vec();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        if pts.len() < 3 {
            return Err(GeomError::DegeneratePolygon);
        }
        let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
            (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
        };
        let mut lower: Vec<(f64, f64)> = Vec::new();
        for &p in &pts {
            while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
                lower.pop();
            }
            lower.push(p);
        }
        let mut upper: Vec<(f64, f64)> = Vec::new();
        for &p in pts.iter().rev() {
            while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
                upper.pop();
            }
            upper.push(p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        if lower.len() < 3 {
            return Err(GeomError::DegeneratePolygon);
        }
        Ok(Polygon2 { vertices: lower })
    }

    /// Axis-aligned rectangle helper, CCW.
    pub fn rect(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Self {
        Polygon2 { vertices: vec![(xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax)] }
    }

    /// Regular n-gon approximation of a disc.
    pub fn regular(n: usize, radius: f64, cx: f64, cy: f64) -> Self {
        let vertices = (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                (cx + radius * a.cos(), cy + radius * a.sin())
            })
            .collect();
        Polygon2 { vertices }
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn perimeter(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt()
            })
            .sum()
    }

    /// Area centroid.
    pub fn centroid(&self) -> (f64, f64) {
        let n = self.vertices.len();
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut a = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let w = p.0 * q.1 - q.0 * p.1;
            cx += (p.0 + q.0) * w;
            cy += (p.1 + q.1) * w;
            a += w;
        }
        (cx / (3.0 * a), cy / (3.0 * a))
    }

    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            let cross = (b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0);
            if cross < -1e-12 {
                return false;
            }
        }
        true
    }

    /// Convex membership test (boundary counts as inside).
    pub fn contains(&self, p: (f64, f64)) -> bool {
        let n = self.vertices.len();
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross < -1e-12 {
                return false;
            }
        }
        true
    }

    /// Minimum distance from a point to the polygon boundary.
    pub fn boundary_distance(&self, p: (f64, f64)) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| point_segment_distance(p, self.vertices[i], self.vertices[(i + 1) % n]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Planar rigid motion: rotate by `theta` about the origin, then translate.
    pub fn transformed(&self, theta: f64, tx: f64, ty: f64) -> Polygon2 {
        let (s, c) = theta.sin_cos();
        let vertices = self
            .vertices
            .iter()
            .map(|&(x, y)| (c * x - s * y + tx, s * x + c * y + ty))
            .collect();
        Polygon2 { vertices }
    }

    pub fn aabb(&self) -> ((f64, f64), (f64, f64)) {
        let mut min = (f64::INFINITY, f64::INFINITY);
        let mut max = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &self.vertices {
            min.0 = min.0.min(x);
            min.1 = min.1.min(y);
            max.0 = max.0.max(x);
            max.1 = max.1.max(y);
        }
        (min, max)
    }

    /// Max vertex distance from the area centroid.
    pub fn circumradius(&self) -> f64 {
        let (cx, cy) = self.centroid();
        self.vertices
            .iter()
            .map(|&(x, y)| ((x - cx).powi(2) + (y - cy).powi(2)).sqrt())
            .fold(0.0, f64::max)
    }
}

fn signed_area(vertices: &[(f64, f64)]) -> f64 {
    let n = vertices.len();
    let mut a = 0.0;
    for i in 0..n {
        let p = vertices[i];
        let q = vertices[(i + 1) % n];
        a += p.0 * q.1 - q.0 * p.1;
    }
    a / 2.0
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let ab = (b.0 - a.0, b.1 - a.1);
    let ap = (p.0 - a.0, p.1 - a.1);
    let len_sq = ab.0 * ab.0 + ab.1 * ab.1;
    let t = if len_sq > 0.0 { ((ap.0 * ab.0 + ap.1 * ab.1) / len_sq).clamp(0.0, 1.0) } else { 0.0 };
    let cx = a.0 + t * ab.0 - p.0;
    let cy = a.1 + t * ab.1 - p.1;
    (cx * cx + cy * cy).sqrt()
}

fn self_intersects(vertices: &[(f64, f64)]) -> bool {
    let n = vertices.len();
    for i in 0..n {
        for j in (i + 1)..n {
            // skip adjacent edges (they share an endpoint)
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            let (c, d) = (vertices[j], vertices[(j + 1) % n]);
            if segments_properly_intersect(a, b, c, d) {
                return true;
            }
        }
    }
    false
}

fn segments_properly_intersect(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let orient = |p: (f64, f64), q: (f64, f64), r: (f64, f64)| {
        (q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0)
    };
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Separating-axis test over all edge normals of two convex polygons.
///
/// Returns the minimum-translation vector that separates `b` from `a`.
pub fn polygon_overlap(a: &Polygon2, b: &Polygon2) -> Result<Overlap, GeomError> {
    if !a.is_convex() || !b.is_convex() {
        return Err(GeomError::NonConvexPolygon);
    }
    let mut min_depth = f64::INFINITY;
    let mut min_axis = (0.0, 0.0);
    for poly in [a, b] {
        let verts = poly.vertices();
        let n = verts.len();
        for i in 0..n {
            let p = verts[i];
            let q = verts[(i + 1) % n];
            let (ex, ey) = (q.0 - p.0, q.1 - p.1);
            let len = (ex * ex + ey * ey).sqrt();
            if len < 1e-15 {
                continue;
            }
            let axis = (ey / len, -ex / len);
            let (amin, amax) = project(a, axis);
            let (bmin, bmax) = project(b, axis);
            let overlap = amax.min(bmax) - amin.max(bmin);
            if overlap <= 0.0 {
                return Ok(Overlap::Disjoint);
            }
            if overlap < min_depth {
                min_depth = overlap;
                min_axis = axis;
            }
        }
    }
    // orient the axis so it pushes b away from a
    let ca = a.centroid();
    let cb = b.centroid();
    let toward_b = (cb.0 - ca.0) * min_axis.0 + (cb.1 - ca.1) * min_axis.1;
    let (nx, ny) = if toward_b >= 0.0 { min_axis } else { (-min_axis.0, -min_axis.1) };
    Ok(Overlap::Mtv { nx, ny, depth: min_depth })
}

fn project(poly: &Polygon2, axis: (f64, f64)) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &(x, y) in poly.vertices() {
        let v = x * axis.0 + y * axis.1;
        min = min.min(v);
        max = max.max(v);
    }
    (min, max)
}

/// Boundary of the Minkowski sum of a convex polygon with a disc of `radius`,
/// corner arcs discretized at steps of at most 2 degrees.
pub fn dilate_polygon(poly: &Polygon2, radius: f64) -> Result<Polygon2, GeomError> {
    if radius < 0.0 {
        return Err(GeomError::InvalidParam("radius must be >= 0"));
    }
    if !poly.is_convex() {
        return Err(GeomError::NonConvexPolygon);
    }
    if poly.area() < 1e-12 {
        return Err(GeomError::DegeneratePolygon);
    }
    if radius == 0.0 {
        return Ok(poly.clone());
    }
    let verts = poly.vertices();
    let n = verts.len();
    // outward normal angle per edge (CCW polygon: edge direction rotated -90 deg)
    let normal_angle = |i: usize| -> f64 {
        let p = verts[i];
        let q = verts[(i + 1) % n];
        (q.1 - p.1).atan2(q.0 - p.0) - std::f64::consts::FRAC_PI_2
    };
    let mut out = Vec::new();
    for i in 0..n {
        let prev = (i + n - 1) % n;
        let v = verts[i];
        let a0 = normal_angle(prev);
        let a1 = normal_angle(i);
        let mut sweep = a1 - a0;
        while sweep < 0.0 {
            sweep += 2.0 * std::f64::consts::PI;
        }
        let steps = (sweep / MAX_ARC_STEP).ceil().max(1.0) as usize;
        // arc around vertex v from the previous edge's normal to this edge's normal
        for s in 0..=steps {
            let ang = a0 + sweep * s as f64 / steps as f64;
            out.push((v.0 + radius * ang.cos(), v.1 + radius * ang.sin()));
        }
    }
    Ok(Polygon2::new_unchecked(out))
}
