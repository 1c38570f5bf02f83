//! The push-grasp synergy loop: score grasp candidates, execute the best
//! grasp when it clears the threshold, otherwise execute the best push;
//! track completion, grasp success rate, and motion number.

use rayon::prelude::*;
use thiserror::Error;

use crate::candidates::{
    filter_grasp_collisions, filter_push_collisions, sample_grasps, sample_pushes,
};
use crate::geom::{derive_seed, Pose, Vec3};
use crate::nets::{GraspNet, PushNet};
use crate::scoring::{score_push_candidates, GraspScorer};
use crate::sim::{
    execute_push, grasp_oracle, render_cloud, GraspOutcome, GripperSpec, PushCommand, Scene,
    ShapeSpec, SimError,
};
use crate::states::StateError;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("trace parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    State(#[from] StateError),
}

/// Episode tunables; mirrors the data-collection configuration plus the
/// action budget and score threshold.
#[derive(Clone, Debug)]
pub struct EpisodeConfig {
    pub max_actions: usize,
    pub grasp_threshold: f64,
    pub points_per_object: usize,
    pub noise_sigma: f64,
    pub gripper: GripperSpec,
    pub n_max_grasps: usize,
    pub pusher_radius: f64,
    pub stroke: f64,
    pub no_gripper_pc: bool,
    pub allow_pushes: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            max_actions: 10,
            grasp_threshold: 0.8,
            points_per_object: 256,
            noise_sigma: 0.002,
            gripper: GripperSpec::default(),
            n_max_grasps: 64,
            pusher_radius: crate::sim::DEFAULT_PUSHER_RADIUS,
            stroke: crate::sim::DEFAULT_STROKE,
            no_gripper_pc: false,
            allow_pushes: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ActionRecord {
    Push { pose: Pose, stroke: f64 },
    Grasp { pose: Pose, width: f64, outcome: GraspOutcome },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeResult {
    pub completed: bool,
    pub actions: Vec<ActionRecord>,
    pub grasp_attempts: usize,
    pub grasp_successes: usize,
}

impl EpisodeResult {
    pub fn motion_number(&self) -> usize {
        self.actions.len()
    }

    pub fn push_count(&self) -> usize {
        self.actions.iter().filter(|a| matches!(a, ActionRecord::Push { .. })).count()
    }
}

/// Deterministic argmax with ties broken by the lowest index; invariant under
/// positive scaling of the scores.
pub fn argmax_by_score(scores: &[f32]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        match best {
            None => best = Some(i),
            Some(b) if s > scores[b] => best = Some(i),
            _ => {}
        }
    }
    best
}

/// One target-extraction episode against the simulator.
pub fn run_episode(
    scene: &Scene,
    grasp_net: &GraspNet<f32>,
    push_net: Option<&PushNet<f32>>,
    cfg: &EpisodeConfig,
    seed: u64,
) -> EpisodeResult {
    let mut scene = scene.clone();
    let mut result = EpisodeResult::default();
    let mut scorer = GraspScorer::new(grasp_net, cfg.gripper, cfg.no_gripper_pc);

    for action_i in 0..cfg.max_actions {
        let step_seed = derive_seed(seed, action_i as u64);
        let cloud = render_cloud(
            &scene,
            cfg.points_per_object,
            cfg.noise_sigma,
            derive_seed(step_seed, 0x72656e64),
        );
        let target_cloud = cloud.select(&cloud.indices_of(scene.target_id));
        if target_cloud.is_empty() {
            break;
        }

        let grasps = sample_grasps(&target_cloud, &cfg.gripper, cfg.n_max_grasps, step_seed)
            .unwrap_or_default();
        let grasps = filter_grasp_collisions(&grasps, &cloud, scene.target_id, &cfg.gripper);
        let scores = if grasps.is_empty() {
            Vec::new()
        } else {
            scorer
                .score_all(&cloud, &grasps, derive_seed(step_seed, 0x67736372))
                .unwrap_or_default()
        };
        let best = argmax_by_score(&scores);

        if let Some(bi) = best {
            if scores[bi] as f64 > cfg.grasp_threshold {
                let cand = grasps[bi];
                let outcome = grasp_oracle(&scene, &cand.pose, cand.width, &cfg.gripper);
                result.actions.push(ActionRecord::Grasp {
                    pose: cand.pose,
                    width: cand.width,
                    outcome,
                });
                result.grasp_attempts += 1;
                match outcome {
                    GraspOutcome::Success => {
                        result.grasp_successes += 1;
                        result.completed = true;
                        return result;
                    }
                    // a grasp collision ends the trial as a failure
                    GraspOutcome::Collision => return result,
                    GraspOutcome::Slip | GraspOutcome::Miss => continue,
                }
            }
        }

        // no grasp clears the threshold: push, if this policy is allowed to
        let Some(push_net) = push_net.filter(|_| cfg.allow_pushes) else {
            return result;
        };
        let pushes = match sample_pushes(&target_cloud, step_seed) {
            Ok(p) => p,
            Err(_) => return result,
        };
        let pushes = filter_push_collisions(&pushes, &cloud, cfg.pusher_radius);
        if pushes.is_empty() {
            return result;
        }
        let push_scores = match score_push_candidates(
            push_net,
            &cloud,
            &pushes,
            scene.target_id,
            derive_seed(step_seed, 0x70736372),
        ) {
            Ok(s) => s,
            Err(_) => return result,
        };
        // execute the best-scoring push that is actually startable
        let mut order: Vec<usize> = (0..pushes.len()).collect();
        order.sort_by(|&a, &b| {
            push_scores[b].partial_cmp(&push_scores[a]).unwrap().then(a.cmp(&b))
        });
        let mut executed = false;
        for &pi in &order {
            let cmd = PushCommand { pose: pushes[pi].pose, stroke: cfg.stroke };
            if let Ok(after) = execute_push(&scene, &cmd, cfg.pusher_radius) {
                scene = after;
                result.actions.push(ActionRecord::Push { pose: cmd.pose, stroke: cmd.stroke });
                executed = true;
                break;
            }
        }
        if !executed {
            return result;
        }
    }
    result
}

/// Grasp-only policy: fails immediately once no grasp clears the threshold.
pub fn single_grasp_baseline(
    scene: &Scene,
    grasp_net: &GraspNet<f32>,
    cfg: &EpisodeConfig,
    seed: u64,
) -> EpisodeResult {
    let cfg = EpisodeConfig { allow_pushes: false, ..cfg.clone() };
    run_episode(scene, grasp_net, None, &cfg, seed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRow {
    pub episode: usize,
    pub scene_seed: u64,
    pub completed: bool,
    pub motions: usize,
    pub pushes: usize,
    pub grasp_attempts: usize,
    pub grasp_successes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteSummary {
    pub rows: Vec<EpisodeRow>,
}

impl SuiteSummary {
    pub fn completion_rate(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().filter(|r| r.completed).count() as f64 / self.rows.len() as f64
    }

    /// Successful grasps over executed grasps.
    pub fn grasp_success_rate(&self) -> f64 {
        let attempts: usize = self.rows.iter().map(|r| r.grasp_attempts).sum();
        if attempts == 0 {
            return 0.0;
        }
        let successes: usize = self.rows.iter().map(|r| r.grasp_successes).sum();
        successes as f64 / attempts as f64
    }

    /// Mean motion number over completed episodes.
    pub fn mean_motion_completed(&self) -> f64 {
        let completed: Vec<&EpisodeRow> = self.rows.iter().filter(|r| r.completed).collect();
        if completed.is_empty() {
            return f64::NAN;
        }
        completed.iter().map(|r| r.motions as f64).sum::<f64>() / completed.len() as f64
    }

    /// Mean motion number over all episodes, failures included.
    pub fn mean_motion_all(&self) -> f64 {
        if self.rows.is_empty() {
            return f64::NAN;
        }
        self.rows.iter().map(|r| r.motions as f64).sum::<f64>() / self.rows.len() as f64
    }

    pub fn failed_count(&self) -> usize {
        self.rows.iter().filter(|r| !r.completed).count()
    }

    /// Aligned human-readable table.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        s.push_str("episode  scene_seed            completed  motions  pushes  grasps  successes\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:<8} {:<21} {:<10} {:<8} {:<7} {:<7} {:<9}\n",
                r.episode, r.scene_seed, r.completed, r.motions, r.pushes, r.grasp_attempts,
                r.grasp_successes
            ));
        }
        s.push_str(&format!(
            "summary: completion {:.1}% | grasp success {:.1}% | mean motions (completed) {:.2} | mean motions (all) {:.2} | failures {}\n",
            100.0 * self.completion_rate(),
            100.0 * self.grasp_success_rate(),
            self.mean_motion_completed(),
            self.mean_motion_all(),
            self.failed_count(),
        ));
        s
    }

    /// Line-delimited machine-readable records.
    pub fn to_records(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            s.push_str(&format!(
                "episode={} scene_seed={} completed={} motions={} pushes={} grasp_attempts={} grasp_successes={}\n",
                r.episode, r.scene_seed, r.completed, r.motions, r.pushes, r.grasp_attempts,
                r.grasp_successes
            ));
        }
        s.push_str(&format!(
            "summary completion_rate={} grasp_success_rate={} mean_motion_completed={} mean_motion_all={} failures={}\n",
            self.completion_rate(),
            self.grasp_success_rate(),
            self.mean_motion_completed(),
            self.mean_motion_all(),
            self.failed_count(),
        ));
        s
    }
}

pub enum Scenario {
    Random { n_objects: usize, n_scenes: usize, shape_library: Vec<ShapeSpec> },
    Challenge(Vec<Scene>),
}

/// Run a suite of episodes; episodes parallelize with derived seeds and the
/// summary reduces in fixed episode order.
pub fn evaluate_suite(
    scenario: &Scenario,
    grasp_net: &GraspNet<f32>,
    push_net: Option<&PushNet<f32>>,
    cfg: &EpisodeConfig,
    seed: u64,
) -> Result<SuiteSummary, PolicyError> {
    let scenes: Vec<(u64, Scene)> = match scenario {
        Scenario::Random { n_objects, n_scenes, shape_library } => (0..*n_scenes)
            .map(|i| {
                let scene_seed = derive_seed(seed, 0x7363656e + i as u64);
                crate::sim::generate_scene(*n_objects, shape_library, scene_seed)
                    .map(|s| (scene_seed, s))
            })
            .collect::<Result<Vec<_>, _>>()?,
        Scenario::Challenge(scenes) => {
            scenes.iter().map(|s| (s.rng_seed, s.clone())).collect()
        }
    };
    let rows: Vec<EpisodeRow> = scenes
        .par_iter()
        .enumerate()
        .map(|(i, (scene_seed, scene))| {
            let r = run_episode(scene, grasp_net, push_net, cfg, derive_seed(seed, i as u64));
            EpisodeRow {
                episode: i,
                scene_seed: *scene_seed,
                completed: r.completed,
                motions: r.motion_number(),
                pushes: r.push_count(),
                grasp_attempts: r.grasp_attempts,
                grasp_successes: r.grasp_successes,
            }
        })
        .collect();
    Ok(SuiteSummary { rows })
}

// --- episode trace serialization ------------------------------------------

fn pose_to_fields(p: &Pose) -> String {
    let r = p.rotation;
    let t = p.translation;
    format!(
        "{} {} {} {} {} {} {} {} {} {} {} {}",
        r.entry(0, 0), r.entry(0, 1), r.entry(0, 2),
        r.entry(1, 0), r.entry(1, 1), r.entry(1, 2),
        r.entry(2, 0), r.entry(2, 1), r.entry(2, 2),
        t.x, t.y, t.z
    )
}

fn pose_from_fields(fields: &[&str]) -> Result<Pose, PolicyError> {
    if fields.len() != 12 {
        return Err(PolicyError::Parse(format!("expected 12 pose fields, got {}", fields.len())));
    }
    let v: Result<Vec<f64>, _> = fields.iter().map(|s| s.parse::<f64>()).collect();
    let v = v.map_err(|e| PolicyError::Parse(format!("pose: {e}")))?;
    let rotation = crate::geom::Rot3::from_cols(
        Vec3::new(v[0], v[3], v[6]),
        Vec3::new(v[1], v[4], v[7]),
        Vec3::new(v[2], v[5], v[8]),
    );
    Ok(Pose::new(rotation, Vec3::new(v[9], v[10], v[11])))
}

/// Text trace: the initial scene plus the executed actions, replayable.
pub fn trace_to_text(scene: &Scene, result: &EpisodeResult) -> String {
    let mut s = String::from("pushgrasp-trace v1\n");
    s.push_str(&scene.to_text());
    s.push_str(&format!("completed {}\n", result.completed));
    s.push_str(&format!("actions {}\n", result.actions.len()));
    for a in &result.actions {
        match a {
            ActionRecord::Push { pose, stroke } => {
                s.push_str(&format!("push {} {}\n", pose_to_fields(pose), stroke));
            }
            ActionRecord::Grasp { pose, width, outcome } => {
                s.push_str(&format!(
                    "grasp {} {} {}\n",
                    pose_to_fields(pose),
                    width,
                    outcome.as_str()
                ));
            }
        }
    }
    s
}

pub fn trace_from_text(
    text: &str,
    library: &[ShapeSpec],
) -> Result<(Scene, EpisodeResult), PolicyError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| PolicyError::Parse("empty trace".into()))?;
    if header.trim() != "pushgrasp-trace v1" {
        return Err(PolicyError::Parse(format!("bad header `{header}`")));
    }
    let rest: Vec<&str> = lines.collect();
    // the embedded scene block runs until the `completed` line
    let completed_at = rest
        .iter()
        .position(|l| l.starts_with("completed "))
        .ok_or_else(|| PolicyError::Parse("missing `completed` line".into()))?;
    let scene_text = rest[..completed_at].join("\n");
    let scene = Scene::from_text(&scene_text, library)?;
    let completed: bool = rest[completed_at]
        .split_whitespace()
        .nth(1)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| PolicyError::Parse("bad completed line".into()))?;
    let n_actions: usize = rest
        .get(completed_at + 1)
        .and_then(|l| l.strip_prefix("actions "))
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| PolicyError::Parse("bad actions line".into()))?;
    let mut result = EpisodeResult { completed, ..Default::default() };
    for i in 0..n_actions {
        let line = rest
            .get(completed_at + 2 + i)
            .ok_or_else(|| PolicyError::Parse("missing action line".into()))?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.first() {
            Some(&"push") if parts.len() == 14 => {
                let pose = pose_from_fields(&parts[1..13])?;
                let stroke = parts[13]
                    .parse()
                    .map_err(|e| PolicyError::Parse(format!("stroke: {e}")))?;
                result.actions.push(ActionRecord::Push { pose, stroke });
            }
            Some(&"grasp") if parts.len() == 15 => {
                let pose = pose_from_fields(&parts[1..13])?;
                let width = parts[13]
                    .parse()
                    .map_err(|e| PolicyError::Parse(format!("width: {e}")))?;
                let outcome: GraspOutcome =
                    parts[14].parse().map_err(PolicyError::Parse)?;
                result.actions.push(ActionRecord::Grasp { pose, width, outcome });
                result.grasp_attempts += 1;
                if outcome == GraspOutcome::Success {
                    result.grasp_successes += 1;
                }
            }
            _ => return Err(PolicyError::Parse(format!("bad action line `{line}`"))),
        }
    }
    Ok((scene, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{builtin_shapes, generate_scene};

    #[test]
    fn argmax_prefers_lowest_index_on_ties_and_scales() {
        let scores = [0.25f32, 0.5, 0.5, 0.1];
        assert_eq!(argmax_by_score(&scores), Some(1));
        let scaled: Vec<f32> = scores.iter().map(|s| s * 3.0).collect();
        assert_eq!(argmax_by_score(&scaled), Some(1));
        assert_eq!(argmax_by_score(&[]), None);
    }

    #[test]
    fn episode_respects_action_budget_and_failure_semantics() {
        let scene = generate_scene(10, &builtin_shapes(), 5).unwrap();
        let grasp_net = GraspNet::<f32>::init(1);
        let push_net = PushNet::<f32>::init(2);
        let cfg = EpisodeConfig { max_actions: 4, ..EpisodeConfig::default() };
        let r = run_episode(&scene, &grasp_net, Some(&push_net), &cfg, 3);
        assert!(r.motion_number() <= 4);
        if r.completed {
            assert!(matches!(
                r.actions.last(),
                Some(ActionRecord::Grasp { outcome: GraspOutcome::Success, .. })
            ));
        }
    }

    #[test]
    fn episode_is_deterministic() {
        let scene = generate_scene(8, &builtin_shapes(), 42).unwrap();
        let grasp_net = GraspNet::<f32>::init(1);
        let push_net = PushNet::<f32>::init(2);
        let cfg = EpisodeConfig::default();
        let a = run_episode(&scene, &grasp_net, Some(&push_net), &cfg, 7);
        let b = run_episode(&scene, &grasp_net, Some(&push_net), &cfg, 7);
        assert_eq!(a, b);
    }

    #[test]
    fn baseline_fails_immediately_without_a_confident_grasp() {
        let scene = generate_scene(8, &builtin_shapes(), 11).unwrap();
        // an untrained net scores near 0.5 everywhere, below the threshold
        let grasp_net = GraspNet::<f32>::init(1);
        let cfg = EpisodeConfig::default();
        let r = single_grasp_baseline(&scene, &grasp_net, &cfg, 5);
        assert!(!r.completed);
        assert_eq!(r.motion_number(), 0);
    }

    #[test]
    fn suite_summary_math() {
        let rows = vec![
            EpisodeRow {
                episode: 0,
                scene_seed: 1,
                completed: true,
                motions: 1,
                pushes: 0,
                grasp_attempts: 1,
                grasp_successes: 1,
            },
            EpisodeRow {
                episode: 1,
                scene_seed: 2,
                completed: true,
                motions: 3,
                pushes: 2,
                grasp_attempts: 1,
                grasp_successes: 1,
            },
            EpisodeRow {
                episode: 2,
                scene_seed: 3,
                completed: false,
                motions: 10,
                pushes: 8,
                grasp_attempts: 2,
                grasp_successes: 0,
            },
        ];
        let s = SuiteSummary { rows };
        assert!((s.completion_rate() - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.grasp_success_rate() - 0.5).abs() < 1e-12);
        assert!((s.mean_motion_completed() - 2.0).abs() < 1e-12);
        assert_eq!(s.failed_count(), 1);
        assert!(s.to_table().contains("summary"));
    }

    #[test]
    fn suite_is_deterministic() {
        let grasp_net = GraspNet::<f32>::init(1);
        let push_net = PushNet::<f32>::init(2);
        let cfg = EpisodeConfig::default();
        let scenario = Scenario::Random {
            n_objects: 6,
            n_scenes: 4,
            shape_library: builtin_shapes(),
        };
        let a = evaluate_suite(&scenario, &grasp_net, Some(&push_net), &cfg, 9).unwrap();
        let b = evaluate_suite(&scenario, &grasp_net, Some(&push_net), &cfg, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_records(), b.to_records());
    }

    #[test]
    fn trace_round_trips() {
        let scene = generate_scene(5, &builtin_shapes(), 77).unwrap();
        let grasp_net = GraspNet::<f32>::init(1);
        let push_net = PushNet::<f32>::init(2);
        let cfg = EpisodeConfig { max_actions: 3, ..EpisodeConfig::default() };
        let r = run_episode(&scene, &grasp_net, Some(&push_net), &cfg, 13);
        let text = trace_to_text(&scene, &r);
        let (scene2, r2) = trace_from_text(&text, &builtin_shapes()).unwrap();
        assert_eq!(scene, scene2);
        assert_eq!(r.completed, r2.completed);
        assert_eq!(r.actions.len(), r2.actions.len());
        assert_eq!(text, trace_to_text(&scene2, &r2));
    }
}
