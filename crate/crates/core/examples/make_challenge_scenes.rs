use pushgrasp_core::sim::{builtin_shapes, Scene, ShapeSpec, SimObject, WORKSPACE_D, WORKSPACE_W};

fn shape(lib: &[ShapeSpec], name: &str) -> ShapeSpec {
    lib.iter().find(|s| s.name == name).unwrap().clone()
}

fn main() {
    let lib = builtin_shapes();
    let cx = WORKSPACE_W / 2.0;
    let cy = WORKSPACE_D / 2.0;

    // ring: central target enclosed by five blockers with one narrow opening
    let ring = Scene {
        objects: vec![
            SimObject { shape: shape(&lib, "box_small"), id: 1, x: cx, y: cy, theta: 0.0 },
            SimObject { shape: shape(&lib, "bar"), id: 2, x: cx - 0.062, y: cy, theta: 0.0 },
            SimObject { shape: shape(&lib, "bar"), id: 3, x: cx + 0.062, y: cy, theta: 0.0 },
            SimObject { shape: shape(&lib, "box_wide"), id: 4, x: cx, y: cy + 0.062, theta: std::f64::consts::FRAC_PI_2 },
            SimObject { shape: shape(&lib, "box_wide"), id: 5, x: cx - 0.058, y: cy - 0.068, theta: std::f64::consts::FRAC_PI_2 },
            SimObject { shape: shape(&lib, "hex"), id: 6, x: cx + 0.052, y: cy - 0.074, theta: 0.2 },
        ],
        target_id: 1,
        workspace: (WORKSPACE_W, WORKSPACE_D),
        rng_seed: 9101,
    };
    assert!(ring.max_penetration() <= 1e-4, "ring overlaps: {}", ring.max_penetration());
    std::fs::write("scenes/ring.scene", ring.to_text()).unwrap();

    // pocket: target in a tight three-sided pocket of bars
    let pocket = Scene {
        objects: vec![
            SimObject { shape: shape(&lib, "box_tiny"), id: 1, x: cx, y: cy, theta: 0.0 },
            SimObject { shape: shape(&lib, "bar"), id: 2, x: cx - 0.042, y: cy, theta: 0.0 },
            SimObject { shape: shape(&lib, "bar"), id: 3, x: cx + 0.042, y: cy, theta: 0.0 },
            SimObject { shape: shape(&lib, "bar"), id: 4, x: cx, y: cy + 0.057, theta: std::f64::consts::FRAC_PI_2 },
            SimObject { shape: shape(&lib, "box_wide"), id: 5, x: cx + 0.09, y: cy - 0.09, theta: 0.5 },
            SimObject { shape: shape(&lib, "disc"), id: 6, x: cx - 0.09, y: cy - 0.095, theta: 0.0 },
        ],
        target_id: 1,
        workspace: (WORKSPACE_W, WORKSPACE_D),
        rng_seed: 9102,
    };
    assert!(pocket.max_penetration() <= 1e-4, "pocket overlaps: {}", pocket.max_penetration());
    std::fs::write("scenes/pocket.scene", pocket.to_text()).unwrap();
    println!("wrote scenes/ring.scene and scenes/pocket.scene");
}
