use pushgrasp_core::candidates::sample_grasps;
use pushgrasp_core::datagen::DatagenConfig;
use pushgrasp_core::geom::derive_seed;
use pushgrasp_core::sim::{generate_scene, grasp_oracle_detail, render_cloud, GraspOutcome, OracleStage};
use rand::{Rng, SeedableRng};

fn main() {
    let cfg = DatagenConfig { n_objects: 8, ..DatagenConfig::default() };
    let mut outcomes = [0usize; 4];
    let mut stages = std::collections::BTreeMap::<String, usize>::new();
    for i in 0..400u64 {
        let scene_seed = derive_seed(2024, i);
        let scene = generate_scene(cfg.n_objects, &cfg.shape_library, scene_seed).unwrap();
        let cloud = render_cloud(&scene, cfg.points_per_object, cfg.noise_sigma, derive_seed(scene_seed, 0x72656e64));
        let tc = cloud.select(&cloud.indices_of(scene.target_id));
        let cands = sample_grasps(&tc, &cfg.gripper, cfg.n_max_grasps, scene_seed).unwrap();
        if cands.is_empty() { continue; }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(scene_seed, 0x7069636b));
        let c = cands[rng.gen_range(0..cands.len())];
        let (outcome, stage) = grasp_oracle_detail(&scene, &c.pose, c.width, &cfg.gripper);
        let k = match outcome { GraspOutcome::Success => 0, GraspOutcome::Collision => 1, GraspOutcome::Slip => 2, GraspOutcome::Miss => 3 };
        outcomes[k] += 1;
        if outcome != GraspOutcome::Success {
            *stages.entry(format!("{:?}-{:?}", outcome, stage)).or_default() += 1;
        }
        // also measure best-candidate success availability per scene
        let _ = OracleStage::None;
    }
    println!("success={} collision={} slip={} miss={}", outcomes[0], outcomes[1], outcomes[2], outcomes[3]);
    println!("{stages:?}");
    // how many scenes have at least one successful candidate?
    let mut have_success = 0usize;
    for i in 0..100u64 {
        let scene_seed = derive_seed(2024, i);
        let scene = generate_scene(cfg.n_objects, &cfg.shape_library, scene_seed).unwrap();
        let cloud = render_cloud(&scene, cfg.points_per_object, cfg.noise_sigma, derive_seed(scene_seed, 0x72656e64));
        let tc = cloud.select(&cloud.indices_of(scene.target_id));
        let cands = sample_grasps(&tc, &cfg.gripper, cfg.n_max_grasps, scene_seed).unwrap();
        if cands.iter().any(|c| grasp_oracle_detail(&scene, &c.pose, c.width, &cfg.gripper).0 == GraspOutcome::Success) {
            have_success += 1;
        }
    }
    println!("scenes with >=1 successful candidate: {have_success}/100");
}
