use pushgrasp_core::datagen::*;
use pushgrasp_core::nets::*;
use pushgrasp_core::policy::*;
use pushgrasp_core::sim::builtin_shapes;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let cfg = DatagenConfig { n_objects: 8, ..DatagenConfig::default() };

    let t = Instant::now();
    let (grasp_data, gstats) = collect_grasp_data(4000, &cfg, 1001, |_, _| {}).unwrap();
    println!("grasp datagen: {:.1}s kept={} skipped={} pos_rate={:.3}",
        t.elapsed().as_secs_f64(), gstats.kept, gstats.skipped(), grasp_data.positive_rate());

    let t = Instant::now();
    let mut tc = TrainConfig::grasp_defaults(7);
    let rows = grasp_data.labeled_rows();
    let (grasp_net, report) = train_grasp(&rows, &tc, &LossConfig::default()).unwrap();
    let last = report.epochs.last().unwrap();
    println!("grasp train 85ep: {:.1}s train_acc={:.3} val_acc={:.3} val_loss={:.4}",
        t.elapsed().as_secs_f64(), last.train_acc, last.val_acc, last.val_loss);
    // report a few epochs
    for e in [1usize, 10, 20, 40, 41, 60, 85] {
        if let Some(m) = report.epochs.get(e - 1) {
            println!("  epoch={} lr={:.1e} train_acc={:.3} val_acc={:.3}", m.epoch, m.lr, m.train_acc, m.val_acc);
        }
    }

    let t = Instant::now();
    let (push_data, pstats) = collect_push_data(4000, &grasp_net, false, 0.8, &cfg, 2002, |_, _| {}).unwrap();
    println!("push datagen: {:.1}s kept={} discarded_graspable={} skipped_other={} pos_rate={:.3} scenes={}",
        t.elapsed().as_secs_f64(), pstats.kept, pstats.skipped_graspable,
        pstats.skipped() - pstats.skipped_graspable, push_data.positive_rate(), pstats.scenes_processed);

    let t = Instant::now();
    tc = TrainConfig::push_defaults(8);
    let prows = push_data.labeled_rows();
    let (push_net, preport) = train_push(&prows, &tc).unwrap();
    let plast = preport.epochs.last().unwrap();
    println!("push train 100ep: {:.1}s train_acc={:.3} val_acc={:.3}",
        t.elapsed().as_secs_f64(), plast.train_acc, plast.val_acc);

    let t = Instant::now();
    let ep = EpisodeConfig::default();
    let scenario = Scenario::Random { n_objects: 8, n_scenes: 30, shape_library: builtin_shapes() };
    let summary = evaluate_suite(&scenario, &grasp_net, Some(&push_net), &ep, 31415).unwrap();
    println!("eval 30 scenes: {:.1}s completion={:.3} grasp_success={:.3} mean_motion_completed={:.2} mean_motion_all={:.2} failures={}",
        t.elapsed().as_secs_f64(), summary.completion_rate(), summary.grasp_success_rate(),
        summary.mean_motion_completed(), summary.mean_motion_all(), summary.failed_count());

    // single-grasp baseline on a denser matched suite
    let t = Instant::now();
    let scenario2 = Scenario::Random { n_objects: 12, n_scenes: 30, shape_library: builtin_shapes() };
    let full = evaluate_suite(&scenario2, &grasp_net, Some(&push_net), &ep, 951).unwrap();
    let base = {
        let cfg2 = EpisodeConfig { allow_pushes: false, ..EpisodeConfig::default() };
        evaluate_suite(&scenario2, &grasp_net, None, &cfg2, 951).unwrap()
    };
    let pushes_required = base.rows.iter().filter(|r| !r.completed && r.motions == 0).count();
    println!("dominance 12obj: {:.1}s full={:.3} baseline={:.3} pushes_required={}",
        t.elapsed().as_secs_f64(), full.completion_rate(), base.completion_rate(), pushes_required);

    // calibration
    let t = Instant::now();
    let (rows, total) = calibrate_threshold(&grasp_net, false, &CALIBRATION_THRESHOLDS, 40, &cfg, 77).unwrap();
    print!("calibration ({total} candidates, {:.1}s): ", t.elapsed().as_secs_f64());
    for r in &rows { print!("{:.1}:{:.3}({}) ", r.threshold, r.success_rate(), r.candidates_above); }
    println!();
    println!("TOTAL: {:.1}s", t0.elapsed().as_secs_f64());
}
