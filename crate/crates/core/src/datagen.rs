//! Data collection against the in-repo simulator: oracle-labeled grasp
//! samples, push samples labeled by the trained grasp evaluator, and the
//! threshold calibration sweep. Dataset files round-trip bit-exactly.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

use crate::candidates::{
    filter_grasp_collisions, filter_push_collisions, sample_grasps, sample_pushes,
};
use crate::geom::derive_seed;
use crate::nets::{GraspNet, LabeledRows, NetError};
use crate::scoring::GraspScorer;
use crate::sim::{
    execute_push, generate_scene, grasp_oracle, render_cloud, GraspOutcome, GripperSpec,
    PushCommand, ShapeSpec, SimError,
};
use crate::states::{
    canonicalize_push, make_grasp_state, read_state_rows, write_state_rows, StateError,
};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("bad dataset magic")]
    BadMagic,
    #[error("unsupported dataset version {0}")]
    BadVersion(u16),
    #[error("unknown dataset kind {0}")]
    BadKind(u16),
    #[error("dataset kind {got:?} does not match the expected {want:?}")]
    KindMismatch { want: DatasetKind, got: DatasetKind },
    #[error("truncated dataset record")]
    Truncated,
    #[error("data collection produced no samples")]
    NoSamples,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Everything scene synthesis and state assembly need, in one place.
#[derive(Clone, Debug)]
pub struct DatagenConfig {
    pub n_objects: usize,
    pub points_per_object: usize,
    pub noise_sigma: f64,
    pub gripper: GripperSpec,
    pub n_max_grasps: usize,
    pub pusher_radius: f64,
    pub stroke: f64,
    pub no_gripper_pc: bool,
    pub shape_library: Vec<ShapeSpec>,
}

impl Default for DatagenConfig {
    fn default() -> Self {
        DatagenConfig {
            n_objects: 10,
            points_per_object: 256,
            noise_sigma: 0.002,
            gripper: GripperSpec::default(),
            n_max_grasps: 64,
            pusher_radius: crate::sim::DEFAULT_PUSHER_RADIUS,
            stroke: crate::sim::DEFAULT_STROKE,
            no_gripper_pc: false,
            shape_library: crate::sim::builtin_shapes(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    Grasp,
    Push,
    GraspNoGripperPc,
}

impl DatasetKind {
    fn to_u16(self) -> u16 {
        match self {
            DatasetKind::Grasp => 0,
            DatasetKind::Push => 1,
            DatasetKind::GraspNoGripperPc => 2,
        }
    }

    fn from_u16(v: u16) -> Result<Self, DataError> {
        match v {
            0 => Ok(DatasetKind::Grasp),
            1 => Ok(DatasetKind::Push),
            2 => Ok(DatasetKind::GraspNoGripperPc),
            other => Err(DataError::BadKind(other)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraspProvenance {
    pub scene_seed: u64,
    pub candidate_index: u32,
    pub outcome: GraspOutcome,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraspSample {
    pub rows: Array2<f32>,
    pub label: u8,
    pub provenance: GraspProvenance,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PushProvenance {
    pub scene_seed: u64,
    pub candidate_index: u32,
    pub post_best_score: f32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PushSample {
    pub rows: Array2<f32>,
    pub label: u8,
    pub provenance: PushProvenance,
}

/// In-memory dataset; `kind` fixes which sample vector is populated.
#[derive(Clone, Debug, PartialEq)]
pub enum Dataset {
    Grasp { ablated: bool, samples: Vec<GraspSample> },
    Push { samples: Vec<PushSample> },
}

impl Dataset {
    pub fn kind(&self) -> DatasetKind {
        match self {
            Dataset::Grasp { ablated: false, .. } => DatasetKind::Grasp,
            Dataset::Grasp { ablated: true, .. } => DatasetKind::GraspNoGripperPc,
            Dataset::Push { .. } => DatasetKind::Push,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Dataset::Grasp { samples, .. } => samples.len(),
            Dataset::Push { samples } => samples.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn positive_rate(&self) -> f64 {
        let (pos, n) = match self {
            Dataset::Grasp { samples, .. } => {
                (samples.iter().filter(|s| s.label == 1).count(), samples.len())
            }
            Dataset::Push { samples } => {
                (samples.iter().filter(|s| s.label == 1).count(), samples.len())
            }
        };
        if n == 0 {
            0.0
        } else {
            pos as f64 / n as f64
        }
    }

    /// Training view: states plus labels.
    pub fn labeled_rows(&self) -> LabeledRows {
        let mut out = LabeledRows::default();
        match self {
            Dataset::Grasp { samples, .. } => {
                for s in samples {
                    out.push(s.rows.clone(), s.label);
                }
            }
            Dataset::Push { samples } => {
                for s in samples {
                    out.push(s.rows.clone(), s.label);
                }
            }
        }
        out
    }

    // --- file format: magic PGDS, version, kind, count, then
    // length-prefixed records (state blob + provenance) ---

    pub fn write_to(&self, w: &mut impl Write) -> Result<(), DataError> {
        w.write_all(b"PGDS")?;
        w.write_all(&1u16.to_le_bytes())?;
        w.write_all(&self.kind().to_u16().to_le_bytes())?;
        w.write_all(&(self.len() as u32).to_le_bytes())?;
        let mut record = Vec::new();
        match self {
            Dataset::Grasp { samples, .. } => {
                for s in samples {
                    record.clear();
                    write_state_rows(&mut record, &s.rows, s.label as u16)?;
                    record.extend_from_slice(&s.provenance.scene_seed.to_le_bytes());
                    record.extend_from_slice(&s.provenance.candidate_index.to_le_bytes());
                    record.push(match s.provenance.outcome {
                        GraspOutcome::Success => 0,
                        GraspOutcome::Collision => 1,
                        GraspOutcome::Slip => 2,
                        GraspOutcome::Miss => 3,
                    });
                    w.write_all(&(record.len() as u32).to_le_bytes())?;
                    w.write_all(&record)?;
                }
            }
            Dataset::Push { samples } => {
                for s in samples {
                    record.clear();
                    write_state_rows(&mut record, &s.rows, s.label as u16)?;
                    record.extend_from_slice(&s.provenance.scene_seed.to_le_bytes());
                    record.extend_from_slice(&s.provenance.candidate_index.to_le_bytes());
                    record.extend_from_slice(&s.provenance.post_best_score.to_le_bytes());
                    w.write_all(&(record.len() as u32).to_le_bytes())?;
                    w.write_all(&record)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Dataset, DataError> {
        let mut header = [0u8; 12];
        r.read_exact(&mut header)?;
        if &header[0..4] != b"PGDS" {
            return Err(DataError::BadMagic);
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != 1 {
            return Err(DataError::BadVersion(version));
        }
        let kind = DatasetKind::from_u16(u16::from_le_bytes([header[6], header[7]]))?;
        let count = u32::from_le_bytes([header[8], header[9], header[10], header[11]]) as usize;
        let read_record = |r: &mut dyn Read| -> Result<Vec<u8>, DataError> {
            let mut len = [0u8; 4];
            r.read_exact(&mut len).map_err(|_| DataError::Truncated)?;
            let mut buf = vec![0u8; u32::from_le_bytes(len) as usize];
            r.read_exact(&mut buf).map_err(|_| DataError::Truncated)?;
            Ok(buf)
        };
        match kind {
            DatasetKind::Grasp | DatasetKind::GraspNoGripperPc => {
                let mut samples = Vec::with_capacity(count);
                for _ in 0..count {
                    let buf = read_record(r)?;
                    let mut cur = buf.as_slice();
                    let (rows, label) = read_state_rows(&mut cur)?;
                    let mut tail = [0u8; 13];
                    cur.read_exact(&mut tail).map_err(|_| DataError::Truncated)?;
                    let outcome = match tail[12] {
                        0 => GraspOutcome::Success,
                        1 => GraspOutcome::Collision,
                        2 => GraspOutcome::Slip,
                        _ => GraspOutcome::Miss,
                    };
                    samples.push(GraspSample {
                        rows,
                        label: label as u8,
                        provenance: GraspProvenance {
                            scene_seed: u64::from_le_bytes(tail[0..8].try_into().unwrap()),
                            candidate_index: u32::from_le_bytes(tail[8..12].try_into().unwrap()),
                            outcome,
                        },
                    });
                }
                Ok(Dataset::Grasp { ablated: kind == DatasetKind::GraspNoGripperPc, samples })
            }
            DatasetKind::Push => {
                let mut samples = Vec::with_capacity(count);
                for _ in 0..count {
                    let buf = read_record(r)?;
                    let mut cur = buf.as_slice();
                    let (rows, label) = read_state_rows(&mut cur)?;
                    let mut tail = [0u8; 16];
                    cur.read_exact(&mut tail).map_err(|_| DataError::Truncated)?;
                    samples.push(PushSample {
                        rows,
                        label: label as u8,
                        provenance: PushProvenance {
                            scene_seed: u64::from_le_bytes(tail[0..8].try_into().unwrap()),
                            candidate_index: u32::from_le_bytes(tail[8..12].try_into().unwrap()),
                            post_best_score: f32::from_le_bytes(tail[12..16].try_into().unwrap()),
                        },
                    });
                }
                Ok(Dataset::Push { samples })
            }
        }
    }

    pub fn write_to_path(&self, path: &Path) -> Result<(), DataError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)
    }

    pub fn read_from_path(path: &Path) -> Result<Dataset, DataError> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }
}

/// Per-scene progress and skip accounting.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CollectStats {
    pub scenes_processed: usize,
    pub kept: usize,
    pub skipped_no_candidates: usize,
    pub skipped_empty_region: usize,
    pub skipped_graspable: usize,
    pub skipped_no_pushes: usize,
    pub skipped_push_error: usize,
    pub positives: usize,
}

impl CollectStats {
    pub fn skipped(&self) -> usize {
        self.skipped_no_candidates
            + self.skipped_empty_region
            + self.skipped_graspable
            + self.skipped_no_pushes
            + self.skipped_push_error
    }
}

/// Scenes processed per parallel block; results are consumed in scene order.
const SCENE_BLOCK: usize = 64;

enum SceneOutcome<T> {
    Kept(T),
    Skipped(fn(&mut CollectStats)),
}

fn collect_loop<T: Send>(
    n_samples: usize,
    per_scene: impl Fn(usize, u64) -> SceneOutcome<T> + Sync,
    mut progress: impl FnMut(usize, &CollectStats),
    seed: u64,
) -> (Vec<T>, CollectStats) {
    let mut out = Vec::with_capacity(n_samples);
    let mut stats = CollectStats::default();
    let mut next_scene = 0usize;
    while out.len() < n_samples {
        let block: Vec<(usize, SceneOutcome<T>)> = (next_scene..next_scene + SCENE_BLOCK)
            .into_par_iter()
            .map(|i| (i, per_scene(i, derive_seed(seed, i as u64))))
            .collect();
        for (i, res) in block {
            if out.len() >= n_samples {
                break;
            }
            stats.scenes_processed += 1;
            match res {
                SceneOutcome::Kept(sample) => {
                    out.push(sample);
                    stats.kept += 1;
                }
                SceneOutcome::Skipped(bump) => bump(&mut stats),
            }
            progress(i, &stats);
        }
        next_scene += SCENE_BLOCK;
    }
    (out, stats)
}

/// Random scenes, one uniformly-chosen grasp candidate each, labeled by the
/// oracle. Deterministic given the seed.
pub fn collect_grasp_data(
    n_samples: usize,
    cfg: &DatagenConfig,
    seed: u64,
    mut progress: impl FnMut(usize, &CollectStats),
) -> Result<(Dataset, CollectStats), DataError> {
    let per_scene = |_i: usize, scene_seed: u64| -> SceneOutcome<GraspSample> {
        let scene = match generate_scene(cfg.n_objects, &cfg.shape_library, scene_seed) {
            Ok(s) => s,
            Err(_) => return SceneOutcome::Skipped(|s| s.skipped_no_candidates += 1),
        };
        let cloud = render_cloud(
            &scene,
            cfg.points_per_object,
            cfg.noise_sigma,
            derive_seed(scene_seed, 0x72656e64),
        );
        let target_cloud = cloud.select(&cloud.indices_of(scene.target_id));
        let cands = match sample_grasps(&target_cloud, &cfg.gripper, cfg.n_max_grasps, scene_seed) {
            Ok(c) if !c.is_empty() => c,
            _ => return SceneOutcome::Skipped(|s| s.skipped_no_candidates += 1),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(scene_seed, 0x7069636b));
        let idx = rng.gen_range(0..cands.len());
        let cand = cands[idx];
        let outcome = grasp_oracle(&scene, &cand.pose, cand.width, &cfg.gripper);
        let state_seed = derive_seed(scene_seed, 0x73746174);
        // skip empty closing regions in every mode so the default and the
        // ablated dataset cover identical (scene, candidate, label) triples
        if crate::states::extract_closing_region(&cloud, &cand, &cfg.gripper).is_empty() {
            return SceneOutcome::Skipped(|s| s.skipped_empty_region += 1);
        }
        match make_grasp_state(&cloud, &cand, &cfg.gripper, state_seed, cfg.no_gripper_pc) {
            Ok(state) => SceneOutcome::Kept(GraspSample {
                rows: state.into_rows(),
                label: outcome.label(),
                provenance: GraspProvenance {
                    scene_seed,
                    candidate_index: idx as u32,
                    outcome,
                },
            }),
            Err(_) => SceneOutcome::Skipped(|s| s.skipped_empty_region += 1),
        }
    };
    let (samples, mut stats) = collect_loop(n_samples, per_scene, &mut progress, seed);
    if samples.is_empty() {
        return Err(DataError::NoSamples);
    }
    stats.positives = samples.iter().filter(|s| s.label == 1).count();
    Ok((Dataset::Grasp { ablated: cfg.no_gripper_pc, samples }, stats))
}

/// Scenes that are not directly graspable get one random collision-free push;
/// the label records whether the push raised the best grasp score above the
/// threshold.
pub fn collect_push_data(
    n_samples: usize,
    grasp_net: &GraspNet<f32>,
    grasp_nopc: bool,
    threshold: f32,
    cfg: &DatagenConfig,
    seed: u64,
    mut progress: impl FnMut(usize, &CollectStats),
) -> Result<(Dataset, CollectStats), DataError> {
    let per_scene = |_i: usize, scene_seed: u64| -> SceneOutcome<PushSample> {
        let scene = match generate_scene(cfg.n_objects, &cfg.shape_library, scene_seed) {
            Ok(s) => s,
            Err(_) => return SceneOutcome::Skipped(|s| s.skipped_no_candidates += 1),
        };
        let cloud = render_cloud(
            &scene,
            cfg.points_per_object,
            cfg.noise_sigma,
            derive_seed(scene_seed, 0x72656e64),
        );
        let target_cloud = cloud.select(&cloud.indices_of(scene.target_id));
        let mut scorer = GraspScorer::new(grasp_net, cfg.gripper, grasp_nopc);
        let grasps = sample_grasps(&target_cloud, &cfg.gripper, cfg.n_max_grasps, scene_seed)
            .unwrap_or_default();
        let grasps = filter_grasp_collisions(&grasps, &cloud, scene.target_id, &cfg.gripper);
        let score_seed = derive_seed(scene_seed, 0x67736372);
        if !grasps.is_empty() {
            match scorer.any_above(&cloud, &grasps, score_seed, threshold) {
                Ok((true, _, _)) => {
                    return SceneOutcome::Skipped(|s| s.skipped_graspable += 1);
                }
                Ok((false, _, _)) => {}
                Err(_) => return SceneOutcome::Skipped(|s| s.skipped_no_candidates += 1),
            }
        }
        // not directly graspable: sample a push
        let pushes = match sample_pushes(&target_cloud, scene_seed) {
            Ok(p) => p,
            Err(_) => return SceneOutcome::Skipped(|s| s.skipped_no_pushes += 1),
        };
        let pushes = filter_push_collisions(&pushes, &cloud, cfg.pusher_radius);
        if pushes.is_empty() {
            return SceneOutcome::Skipped(|s| s.skipped_no_pushes += 1);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(scene_seed, 0x7069636b));
        let idx = rng.gen_range(0..pushes.len());
        let push = pushes[idx];
        let state = match canonicalize_push(
            &cloud,
            &push,
            scene.target_id,
            derive_seed(scene_seed, 0x73746174),
        ) {
            Ok(s) => s,
            Err(_) => return SceneOutcome::Skipped(|s| s.skipped_no_pushes += 1),
        };
        let after = match execute_push(
            &scene,
            &PushCommand { pose: push.pose, stroke: cfg.stroke },
            cfg.pusher_radius,
        ) {
            Ok(s) => s,
            Err(_) => return SceneOutcome::Skipped(|s| s.skipped_push_error += 1),
        };
        let post_cloud = render_cloud(
            &after,
            cfg.points_per_object,
            cfg.noise_sigma,
            derive_seed(scene_seed, 0x72656e32),
        );
        let post_target = post_cloud.select(&post_cloud.indices_of(after.target_id));
        let post_grasps = sample_grasps(&post_target, &cfg.gripper, cfg.n_max_grasps, scene_seed)
            .unwrap_or_default();
        let post_grasps =
            filter_grasp_collisions(&post_grasps, &post_cloud, after.target_id, &cfg.gripper);
        let post_seed = derive_seed(scene_seed, 0x67736332);
        let (hit, best_seen, _) = if post_grasps.is_empty() {
            (false, 0.0, 0)
        } else {
            match scorer.any_above(&post_cloud, &post_grasps, post_seed, threshold) {
                Ok(r) => r,
                Err(_) => (false, 0.0, 0),
            }
        };
        SceneOutcome::Kept(PushSample {
            rows: state.into_rows(),
            label: hit as u8,
            provenance: PushProvenance {
                scene_seed,
                candidate_index: idx as u32,
                post_best_score: best_seen,
            },
        })
    };
    let (samples, mut stats) = collect_loop(n_samples, per_scene, &mut progress, seed);
    if samples.is_empty() {
        return Err(DataError::NoSamples);
    }
    stats.positives = samples.iter().filter(|s| s.label == 1).count();
    Ok((Dataset::Push { samples }, stats))
}

pub const CALIBRATION_THRESHOLDS: [f64; 5] = [0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationRow {
    pub threshold: f64,
    pub candidates_above: usize,
    pub oracle_successes: usize,
}

impl CalibrationRow {
    pub fn success_rate(&self) -> f64 {
        if self.candidates_above == 0 {
            0.0
        } else {
            self.oracle_successes as f64 / self.candidates_above as f64
        }
    }
}

/// Score every candidate on `n_scenes` random scenes and, per threshold,
/// report the oracle success rate among candidates scored above it.
pub fn calibrate_threshold(
    grasp_net: &GraspNet<f32>,
    grasp_nopc: bool,
    thresholds: &[f64],
    n_scenes: usize,
    cfg: &DatagenConfig,
    seed: u64,
) -> Result<(Vec<CalibrationRow>, usize), DataError> {
    let pairs: Vec<Vec<(f32, bool)>> = (0..n_scenes)
        .into_par_iter()
        .map(|i| {
            let scene_seed = derive_seed(seed, i as u64);
            let scene = match generate_scene(cfg.n_objects, &cfg.shape_library, scene_seed) {
                Ok(s) => s,
                Err(_) => return Vec::new(),
            };
            let cloud = render_cloud(
                &scene,
                cfg.points_per_object,
                cfg.noise_sigma,
                derive_seed(scene_seed, 0x72656e64),
            );
            let target_cloud = cloud.select(&cloud.indices_of(scene.target_id));
            let cands = sample_grasps(&target_cloud, &cfg.gripper, cfg.n_max_grasps, scene_seed)
                .unwrap_or_default();
            let cands = filter_grasp_collisions(&cands, &cloud, scene.target_id, &cfg.gripper);
            if cands.is_empty() {
                return Vec::new();
            }
            let mut scorer = GraspScorer::new(grasp_net, cfg.gripper, grasp_nopc);
            let scores = match scorer.score_all(&cloud, &cands, derive_seed(scene_seed, 0x67736372))
            {
                Ok(s) => s,
                Err(_) => return Vec::new(),
            };
            cands
                .iter()
                .zip(scores)
                .map(|(c, s)| {
                    let outcome = grasp_oracle(&scene, &c.pose, c.width, &cfg.gripper);
                    (s, outcome == GraspOutcome::Success)
                })
                .collect()
        })
        .collect();
    let flat: Vec<(f32, bool)> = pairs.concat();
    let rows = thresholds
        .iter()
        .map(|&t| {
            let above: Vec<&(f32, bool)> = flat.iter().filter(|(s, _)| *s as f64 > t).collect();
            CalibrationRow {
                threshold: t,
                candidates_above: above.len(),
                oracle_successes: above.iter().filter(|(_, ok)| *ok).count(),
            }
        })
        .collect();
    Ok((rows, flat.len()))
}

/// Re-run a grasp sample's provenance and reproduce its label.
pub fn replay_grasp_sample(sample: &GraspSample, cfg: &DatagenConfig) -> Result<u8, DataError> {
    let scene_seed = sample.provenance.scene_seed;
    let scene = generate_scene(cfg.n_objects, &cfg.shape_library, scene_seed)?;
    let cloud = render_cloud(
        &scene,
        cfg.points_per_object,
        cfg.noise_sigma,
        derive_seed(scene_seed, 0x72656e64),
    );
    let target_cloud = cloud.select(&cloud.indices_of(scene.target_id));
    let cands = sample_grasps(&target_cloud, &cfg.gripper, cfg.n_max_grasps, scene_seed)
        .map_err(|_| DataError::NoSamples)?;
    let cand = cands[sample.provenance.candidate_index as usize];
    let outcome = grasp_oracle(&scene, &cand.pose, cand.width, &cfg.gripper);
    Ok(outcome.label())
}

/// Re-run a push sample's provenance and reproduce its label.
pub fn replay_push_sample(
    sample: &PushSample,
    grasp_net: &GraspNet<f32>,
    grasp_nopc: bool,
    threshold: f32,
    cfg: &DatagenConfig,
) -> Result<u8, DataError> {
    let scene_seed = sample.provenance.scene_seed;
    let scene = generate_scene(cfg.n_objects, &cfg.shape_library, scene_seed)?;
    let cloud = render_cloud(
        &scene,
        cfg.points_per_object,
        cfg.noise_sigma,
        derive_seed(scene_seed, 0x72656e64),
    );
    let target_cloud = cloud.select(&cloud.indices_of(scene.target_id));
    let pushes = sample_pushes(&target_cloud, scene_seed).map_err(|_| DataError::NoSamples)?;
    let pushes = filter_push_collisions(&pushes, &cloud, cfg.pusher_radius);
    let push = pushes[sample.provenance.candidate_index as usize];
    let after = execute_push(
        &scene,
        &PushCommand { pose: push.pose, stroke: cfg.stroke },
        cfg.pusher_radius,
    )?;
    let post_cloud = render_cloud(
        &after,
        cfg.points_per_object,
        cfg.noise_sigma,
        derive_seed(scene_seed, 0x72656e32),
    );
    let post_target = post_cloud.select(&post_cloud.indices_of(after.target_id));
    let post_grasps = sample_grasps(&post_target, &cfg.gripper, cfg.n_max_grasps, scene_seed)
        .unwrap_or_default();
    let post_grasps =
        filter_grasp_collisions(&post_grasps, &post_cloud, after.target_id, &cfg.gripper);
    let mut scorer = GraspScorer::new(grasp_net, cfg.gripper, grasp_nopc);
    let hit = if post_grasps.is_empty() {
        false
    } else {
        scorer
            .any_above(&post_cloud, &post_grasps, derive_seed(scene_seed, 0x67736332), threshold)?
            .0
    };
    Ok(hit as u8)
}
