//! Built-in convex shape library and a small text format for custom ones.

use super::{ShapeSpec, SimError};
use crate::geom::Polygon2;

/// Convex tabletop objects, all footprints within 0.08 m, heights 0.03-0.05 m.
pub fn builtin_shapes() -> Vec<ShapeSpec> {
    let rect = |name: &str, w: f64, d: f64, h: f64| ShapeSpec {
        name: name.into(),
        footprint: Polygon2::rect(-w / 2.0, -d / 2.0, w / 2.0, d / 2.0),
        height: h,
    };
    let ngon = |name: &str, n: usize, r: f64, h: f64| ShapeSpec {
        name: name.into(),
        footprint: Polygon2::regular(n, r, 0.0, 0.0),
        height: h,
    };
    // every footprint keeps at least one caliper direction with parallel
    // opposite edges, so every object admits an antipodal grasp in isolation
    vec![
        rect("box_small", 0.040, 0.040, 0.040),
        rect("box_wide", 0.050, 0.070, 0.035),
        rect("bar", 0.030, 0.080, 0.030),
        rect("box_tiny", 0.030, 0.030, 0.050),
        ngon("hex", 6, 0.028, 0.045),
        ngon("disc", 16, 0.026, 0.050),
        ShapeSpec {
            name: "hex_long".into(),
            footprint: Polygon2::new(vec![
                (-0.035, -0.018),
                (0.035, -0.018),
                (0.040, 0.0),
                (0.035, 0.018),
                (-0.035, 0.018),
                (-0.040, 0.0),
            ])
            .expect("valid footprint"),
            height: 0.042,
        },
        ShapeSpec {
            name: "trapezoid".into(),
            footprint: Polygon2::new(vec![
                (-0.035, -0.022),
                (0.035, -0.022),
                (0.020, 0.022),
                (-0.020, 0.022),
            ])
            .expect("valid footprint"),
            height: 0.035,
        },
    ]
}

/// One shape per line: `shape <name> <height> <n> x1 y1 ... xn yn`.
pub fn parse_shape_library(text: &str) -> Result<Vec<ShapeSpec>, SimError> {
    let mut shapes = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: String| SimError::Parse(format!("line {}: {}", lineno + 1, msg));
        if parts.len() < 4 || parts[0] != "shape" {
            return Err(err("expected `shape <name> <height> <n> x1 y1 ...`".into()));
        }
        let name = parts[1].to_string();
        let height: f64 = parts[2].parse().map_err(|e| err(format!("height: {e}")))?;
        let n: usize = parts[3].parse().map_err(|e| err(format!("n: {e}")))?;
        if height <= 0.0 {
            return Err(err("height must be > 0".into()));
        }
        if parts.len() != 4 + 2 * n {
            return Err(err(format!("expected {} coordinates, got {}", 2 * n, parts.len() - 4)));
        }
        let mut verts = Vec::with_capacity(n);
        for i in 0..n {
            let x: f64 = parts[4 + 2 * i].parse().map_err(|e| err(format!("x{i}: {e}")))?;
            let y: f64 = parts[5 + 2 * i].parse().map_err(|e| err(format!("y{i}: {e}")))?;
            verts.push((x, y));
        }
        let footprint = Polygon2::new(verts).map_err(|e| err(e.to_string()))?;
        if !footprint.is_convex() {
            return Err(err(format!("shape `{name}` must be convex")));
        }
        shapes.push(ShapeSpec { name, footprint, height });
    }
    if shapes.is_empty() {
        return Err(SimError::EmptyShapeLibrary);
    }
    Ok(shapes)
}

pub fn format_shape_library(shapes: &[ShapeSpec]) -> String {
    let mut out = String::new();
    for s in shapes {
        out.push_str(&format!("shape {} {} {}", s.name, s.height, s.footprint.vertices().len()));
        for &(x, y) in s.footprint.vertices() {
            out.push_str(&format!(" {x} {y}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_valid_and_graspable_sized() {
        for s in builtin_shapes() {
            assert!(s.footprint.is_convex(), "{}", s.name);
            assert!(s.height > 0.0);
            let ((xmin, ymin), (xmax, ymax)) = s.footprint.aabb();
            assert!(xmax - xmin <= 0.08 + 1e-12, "{} too wide", s.name);
            assert!(ymax - ymin <= 0.08 + 1e-12, "{} too deep", s.name);
        }
    }

    #[test]
    fn library_text_round_trip() {
        let lib = builtin_shapes();
        let text = format_shape_library(&lib);
        let back = parse_shape_library(&text).unwrap();
        assert_eq!(lib, back);
    }

    #[test]
    fn parse_rejects_nonconvex() {
        let text = "shape bad 0.03 6 0 0 2 0 2 1 1 1 1 2 0 2";
        assert!(parse_shape_library(text).is_err());
    }
}
