//! SVG figure emission: workspace, object footprints (target highlighted),
//! gripper glyphs for grasps, and arrows for pushes.

use pushgrasp_core::policy::{ActionRecord, EpisodeResult};
use pushgrasp_core::sim::{GripperSpec, Scene};

/// Pixels per meter.
const SCALE: f64 = 1200.0;
const MARGIN: f64 = 30.0;

struct Canvas {
    body: String,
    height_px: f64,
}

impl Canvas {
    fn new(height_m: f64) -> Canvas {
        Canvas { body: String::new(), height_px: height_m * SCALE }
    }

    // y grows upward in the workspace, downward in SVG
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (MARGIN + x * SCALE, MARGIN + self.height_px - y * SCALE)
    }

    fn polygon(&mut self, pts: &[(f64, f64)], fill: &str, stroke: &str) {
        let mapped: Vec<String> = pts
            .iter()
            .map(|&(x, y)| {
                let (px, py) = self.map(x, y);
                format!("{px:.1},{py:.1}")
            })
            .collect();
        self.body.push_str(&format!(
            "<polygon points=\"{}\" fill=\"{}\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
            mapped.join(" "),
            fill,
            stroke
        ));
    }

    fn line(&mut self, a: (f64, f64), b: (f64, f64), stroke: &str, width: f64) {
        let (x1, y1) = self.map(a.0, a.1);
        let (x2, y2) = self.map(b.0, b.1);
        self.body.push_str(&format!(
            "<line x1=\"{x1:.1}\" y1=\"{y1:.1}\" x2=\"{x2:.1}\" y2=\"{y2:.1}\" stroke=\"{stroke}\" stroke-width=\"{width}\"/>\n"
        ));
    }

    fn circle(&mut self, c: (f64, f64), r_m: f64, fill: &str) {
        let (cx, cy) = self.map(c.0, c.1);
        self.body.push_str(&format!(
            "<circle cx=\"{cx:.1}\" cy=\"{cy:.1}\" r=\"{:.1}\" fill=\"{fill}\"/>\n",
            r_m * SCALE
        ));
    }

    fn label(&mut self, c: (f64, f64), text: &str) {
        let (x, y) = self.map(c.0, c.1);
        self.body.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{y:.1}\" font-size=\"14\" font-family=\"monospace\" fill=\"#202020\">{text}</text>\n"
        ));
    }
}

/// Scene drawing shared by both render modes.
fn draw_scene(canvas: &mut Canvas, scene: &Scene) {
    let (w, d) = scene.workspace;
    canvas.polygon(
        &[(0.0, 0.0), (w, 0.0), (w, d), (0.0, d)],
        "#f8f8f4",
        "#404040",
    );
    for obj in &scene.objects {
        let poly = obj.footprint_world();
        let (fill, stroke) = if obj.id == scene.target_id {
            ("#ffd27f", "#b25900")
        } else {
            ("#c9d7e8", "#38506b")
        };
        canvas.polygon(poly.vertices(), fill, stroke);
        let (cx, cy) = poly.centroid();
        canvas.label((cx - 0.004, cy - 0.004), &obj.id.to_string());
    }
}

fn draw_grasp(canvas: &mut Canvas, pose: &pushgrasp_core::geom::Pose, width: f64, g: &GripperSpec, idx: usize) {
    let ex = pose.rotation.col(0);
    let ey = pose.rotation.col(1);
    let t = pose.translation;
    let corner = |sx: f64, sy: f64| -> (f64, f64) {
        (t.x + sx * ex.x + sy * ey.x, t.y + sx * ex.y + sy * ey.y)
    };
    for side in [1.0f64, -1.0] {
        let y0 = side * width / 2.0;
        let y1 = side * (width / 2.0 + g.finger_thickness);
        let pts = [
            corner(-g.finger_height / 2.0, y0),
            corner(g.finger_height / 2.0, y0),
            corner(g.finger_height / 2.0, y1),
            corner(-g.finger_height / 2.0, y1),
        ];
        canvas.polygon(&pts, "none", "#c02020");
    }
    // palm bar connecting the fingers
    canvas.line(
        corner(0.0, -width / 2.0 - g.finger_thickness),
        corner(0.0, width / 2.0 + g.finger_thickness),
        "#c02020",
        1.0,
    );
    canvas.label(corner(0.012, 0.0), &format!("g{idx}"));
}

fn draw_push(canvas: &mut Canvas, pose: &pushgrasp_core::geom::Pose, stroke: f64, idx: usize) {
    let dir = pose.rotation.col(0);
    let t = pose.translation;
    let end = (t.x + dir.x * stroke, t.y + dir.y * stroke);
    canvas.circle((t.x, t.y), 0.006, "#207020");
    canvas.line((t.x, t.y), end, "#207020", 2.0);
    // arrow head
    let back = 0.012;
    let side = 0.006;
    let perp = (-dir.y, dir.x);
    canvas.line(
        end,
        (end.0 - dir.x * back + perp.0 * side, end.1 - dir.y * back + perp.1 * side),
        "#207020",
        2.0,
    );
    canvas.line(
        end,
        (end.0 - dir.x * back - perp.0 * side, end.1 - dir.y * back - perp.1 * side),
        "#207020",
        2.0,
    );
    canvas.label((t.x + 0.008, t.y + 0.008), &format!("p{idx}"));
}

pub fn scene_to_svg(scene: &Scene) -> String {
    let mut canvas = Canvas::new(scene.workspace.1);
    draw_scene(&mut canvas, scene);
    wrap(scene, canvas)
}

pub fn trace_to_svg(scene: &Scene, result: &EpisodeResult, gripper: &GripperSpec) -> String {
    let mut canvas = Canvas::new(scene.workspace.1);
    draw_scene(&mut canvas, scene);
    for (i, action) in result.actions.iter().enumerate() {
        match action {
            ActionRecord::Push { pose, stroke } => draw_push(&mut canvas, pose, *stroke, i + 1),
            ActionRecord::Grasp { pose, width, .. } => {
                draw_grasp(&mut canvas, pose, *width, gripper, i + 1)
            }
        }
    }
    wrap(scene, canvas)
}

fn wrap(scene: &Scene, canvas: Canvas) -> String {
    let w = scene.workspace.0 * SCALE + 2.0 * MARGIN;
    let h = scene.workspace.1 * SCALE + 2.0 * MARGIN;
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n{}</svg>\n",
        canvas.body
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use pushgrasp_core::sim::{builtin_shapes, generate_scene, WORKSPACE_D, WORKSPACE_W};

    /// Minimal well-formedness check: tags balance and attributes are quoted.
    pub fn xml_is_well_formed(text: &str) -> bool {
        let mut stack: Vec<String> = Vec::new();
        let mut rest = text;
        while let Some(start) = rest.find('<') {
            let Some(end_rel) = rest[start..].find('>') else { return false };
            let tag = &rest[start + 1..start + end_rel];
            rest = &rest[start + end_rel + 1..];
            if tag.starts_with('?') || tag.starts_with('!') {
                continue;
            }
            if let Some(name) = tag.strip_prefix('/') {
                match stack.pop() {
                    Some(open) if open == name => {}
                    _ => return false,
                }
            } else if tag.ends_with('/') {
                continue;
            } else {
                let name = tag.split_whitespace().next().unwrap_or("");
                if tag.matches('"').count() % 2 != 0 {
                    return false;
                }
                stack.push(name.to_string());
            }
        }
        stack.is_empty()
    }

    #[test]
    fn empty_scene_renders_workspace_only() {
        let scene = pushgrasp_core::sim::Scene {
            objects: vec![],
            target_id: 0,
            workspace: (WORKSPACE_W, WORKSPACE_D),
            rng_seed: 0,
        };
        let svg = scene_to_svg(&scene);
        assert!(xml_is_well_formed(&svg));
        assert_eq!(svg.matches("<polygon").count(), 1, "workspace rectangle only");
    }

    #[test]
    fn scene_svg_is_well_formed_xml() {
        let scene = generate_scene(6, &builtin_shapes(), 4).unwrap();
        let svg = scene_to_svg(&scene);
        assert!(xml_is_well_formed(&svg));
        assert!(svg.matches("<polygon").count() >= 7);
    }
}
