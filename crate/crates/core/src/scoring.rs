//! Batched candidate scoring used by data collection and the policy loop.
//!
//! The grasp scorer exploits the state structure: the 145 gripper-template
//! rows depend only on the candidate width, so their pooled feature vector is
//! cached per width and combined with each candidate's closing-region rows
//! via the elementwise max (exact, since max-pooling is associative).

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use std::collections::HashMap;

use crate::candidates::{GraspCandidate, PushCandidate};
use crate::geom::{derive_seed, PointCloud};
use crate::nets::{batched_grasp_scores, batched_push_scores, GraspNet, PushNet};
use crate::sim::GripperSpec;
use crate::states::{
    canonicalize_push, extract_closing_region, gripper_template, make_grasp_state,
    region_rows_block, StateError, GRASP_REGION_POINTS, GRASP_TEMPLATE_POINTS,
};

/// Fixed chunk width for deterministic batched scoring.
const CHUNK: usize = 32;

pub struct GraspScorer<'a> {
    net: &'a GraspNet<f32>,
    gripper: GripperSpec,
    no_gripper_pc: bool,
    template_pooled: HashMap<u64, Array1<f32>>,
}

impl<'a> GraspScorer<'a> {
    pub fn new(net: &'a GraspNet<f32>, gripper: GripperSpec, no_gripper_pc: bool) -> Self {
        GraspScorer { net, gripper, no_gripper_pc, template_pooled: HashMap::new() }
    }

    /// Graspable-probability per candidate; per-candidate state seeds derive
    /// from `seed` and the candidate index, so results are independent of
    /// chunking. Equals scoring the assembled grasp states directly.
    pub fn score_all(
        &mut self,
        scene_cloud: &PointCloud,
        candidates: &[GraspCandidate],
        seed: u64,
    ) -> Result<Vec<f32>, StateError> {
        self.score_range(scene_cloud, candidates, seed, 0, candidates.len())
    }

    /// Scores candidates in descending `source_score` chunks until one clears
    /// `threshold`; returns the max seen and how many were scored. The boolean
    /// answer "does any candidate clear the threshold" matches full scoring.
    pub fn any_above(
        &mut self,
        scene_cloud: &PointCloud,
        candidates: &[GraspCandidate],
        seed: u64,
        threshold: f32,
    ) -> Result<(bool, f32, usize), StateError> {
        let mut max_seen = f32::NEG_INFINITY;
        let mut scored = 0usize;
        while scored < candidates.len() {
            let stop = (scored + CHUNK).min(candidates.len());
            let scores = self.score_range(scene_cloud, candidates, seed, scored, stop)?;
            for s in scores {
                max_seen = max_seen.max(s);
            }
            scored = stop;
            if max_seen > threshold {
                return Ok((true, max_seen, scored));
            }
        }
        Ok((false, max_seen, scored))
    }

    fn score_range(
        &mut self,
        scene_cloud: &PointCloud,
        candidates: &[GraspCandidate],
        seed: u64,
        from: usize,
        to: usize,
    ) -> Result<Vec<f32>, StateError> {
        let slice = &candidates[from..to];
        if slice.is_empty() {
            return Ok(Vec::new());
        }
        if self.no_gripper_pc {
            // ablation states have no shared structure to cache; note that an
            // empty closing region is an error for this variant, so it scores
            // as never-graspable instead of failing the whole batch
            let mut states = Vec::with_capacity(slice.len());
            let mut empty_mask = vec![false; slice.len()];
            for (i, c) in slice.iter().enumerate() {
                match make_grasp_state(
                    scene_cloud,
                    c,
                    &self.gripper,
                    derive_seed(seed, (from + i) as u64),
                    true,
                ) {
                    Ok(s) => states.push(s.into_rows()),
                    Err(StateError::EmptyGraspState) => {
                        empty_mask[i] = true;
                        states.push(Array2::zeros((crate::states::GRASP_STATE_ROWS, 4)));
                    }
                    Err(e) => return Err(e),
                }
            }
            let mut scores = batched_grasp_scores(self.net, &states);
            for (i, &empty) in empty_mask.iter().enumerate() {
                if empty {
                    scores[i] = 0.0;
                }
            }
            return Ok(scores);
        }

        // cache pooled template features per distinct width
        for c in slice {
            let key = c.width.to_bits();
            if !self.template_pooled.contains_key(&key) {
                let template = gripper_template(&self.gripper, GRASP_TEMPLATE_POINTS, c.width);
                let mut rows = Array2::<f32>::zeros((GRASP_TEMPLATE_POINTS, 4));
                for (i, p) in template.points.iter().enumerate() {
                    rows[[i, 0]] = p.x as f32;
                    rows[[i, 1]] = p.y as f32;
                    rows[[i, 2]] = p.z as f32;
                }
                let pooled = pointwise_pooled(self.net, &rows.view());
                self.template_pooled.insert(key, pooled);
            }
        }

        // region rows per candidate, stacked and pooled per candidate
        let blocks: Vec<Array2<f32>> = slice
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let region = extract_closing_region(scene_cloud, c, &self.gripper);
                region_rows_block(&region, GRASP_REGION_POINTS, derive_seed(seed, (from + i) as u64))
            })
            .collect();
        let mut scores = Vec::with_capacity(slice.len());
        for chunk_start in (0..slice.len()).step_by(CHUNK) {
            let chunk_end = (chunk_start + CHUNK).min(slice.len());
            let n = chunk_end - chunk_start;
            let mut packed = Array2::<f32>::zeros((n * GRASP_REGION_POINTS, 4));
            for (j, block) in blocks[chunk_start..chunk_end].iter().enumerate() {
                packed
                    .slice_mut(ndarray::s![j * GRASP_REGION_POINTS..(j + 1) * GRASP_REGION_POINTS, ..])
                    .assign(block);
            }
            let pooled_regions = pointwise_pooled_batch(self.net, &packed.view(), n, GRASP_REGION_POINTS);
            // combine with the cached template features and run the head
            let mut global = pooled_regions;
            for (j, c) in slice[chunk_start..chunk_end].iter().enumerate() {
                let tpl = &self.template_pooled[&c.width.to_bits()];
                let mut row = global.row_mut(j);
                for (g, &t) in row.iter_mut().zip(tpl.iter()) {
                    *g = g.max(t);
                }
            }
            let probs = head_forward(self.net, &global);
            scores.extend(probs.column(1).iter().copied());
        }
        Ok(scores)
    }
}

/// Pointwise stack + max-pool for a single row block.
fn pointwise_pooled(net: &GraspNet<f32>, rows: &ArrayView2<f32>) -> Array1<f32> {
    pointwise_pooled_batch(net, rows, 1, rows.nrows()).index_axis_move(Axis(0), 0)
}

fn pointwise_pooled_batch(
    net: &GraspNet<f32>,
    rows: &ArrayView2<f32>,
    batch: usize,
    rows_per: usize,
) -> Array2<f32> {
    let mut a1 = net.l1.forward(rows);
    a1.mapv_inplace(|v| v.max(0.0));
    let mut a2 = net.l2.forward(&a1.view());
    a2.mapv_inplace(|v| v.max(0.0));
    let mut a3 = net.l3.forward(&a2.view());
    a3.mapv_inplace(|v| v.max(0.0));
    let mut pooled = Array2::<f32>::from_elem((batch, a3.ncols()), f32::NEG_INFINITY);
    for b in 0..batch {
        let mut out = pooled.row_mut(b);
        for r in 0..rows_per {
            let row = a3.row(b * rows_per + r);
            for (o, &v) in out.iter_mut().zip(row.iter()) {
                if v > *o {
                    *o = v;
                }
            }
        }
    }
    pooled
}

fn head_forward(net: &GraspNet<f32>, global: &Array2<f32>) -> Array2<f32> {
    let mut h1 = net.h1.forward(&global.view());
    h1.mapv_inplace(|v| v.max(0.0));
    let mut h2 = net.h2.forward(&h1.view());
    h2.mapv_inplace(|v| v.max(0.0));
    let logits = net.h3.forward(&h2.view());
    crate::nets::softmax_rows(&logits)
}

/// Canonicalize every push candidate and score the batch; per-candidate seeds
/// derive from `seed` and the candidate index.
pub fn score_push_candidates(
    net: &PushNet<f32>,
    scene_cloud: &PointCloud,
    candidates: &[PushCandidate],
    target_id: u32,
    seed: u64,
) -> Result<Vec<f32>, StateError> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let states: Result<Vec<Array2<f32>>, StateError> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            canonicalize_push(scene_cloud, c, target_id, derive_seed(seed, i as u64))
                .map(|s| s.into_rows())
        })
        .collect();
    Ok(batched_push_scores(net, &states?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::sample_grasps;
    use crate::nets::batched_grasp_scores;
    use crate::sim::{builtin_shapes, generate_scene, render_cloud};

    #[test]
    fn fast_scorer_matches_assembled_states() {
        let scene = generate_scene(6, &builtin_shapes(), 44).unwrap();
        let cloud = render_cloud(&scene, 200, 0.002, 3);
        let target_cloud = cloud.select(&cloud.indices_of(scene.target_id));
        let gripper = GripperSpec::default();
        let cands = sample_grasps(&target_cloud, &gripper, 64, 0).unwrap();
        assert!(!cands.is_empty());
        let net = GraspNet::<f32>::init(7);

        let mut scorer = GraspScorer::new(&net, gripper, false);
        let fast = scorer.score_all(&cloud, &cands, 99).unwrap();

        let states: Vec<Array2<f32>> = cands
            .iter()
            .enumerate()
            .map(|(i, c)| {
                make_grasp_state(&cloud, c, &gripper, derive_seed(99, i as u64), false)
                    .unwrap()
                    .into_rows()
            })
            .collect();
        let slow = batched_grasp_scores(&net, &states);
        assert_eq!(fast.len(), slow.len());
        for (i, (a, b)) in fast.iter().zip(&slow).enumerate() {
            assert!(
                (a - b).abs() <= 1e-6,
                "candidate {i}: fast {a} vs slow {b}"
            );
        }
    }

    #[test]
    fn early_exit_agrees_with_full_max() {
        let scene = generate_scene(8, &builtin_shapes(), 11).unwrap();
        let cloud = render_cloud(&scene, 200, 0.002, 5);
        let target_cloud = cloud.select(&cloud.indices_of(scene.target_id));
        let gripper = GripperSpec::default();
        let cands = sample_grasps(&target_cloud, &gripper, 64, 0).unwrap();
        let net = GraspNet::<f32>::init(3);
        let mut scorer = GraspScorer::new(&net, gripper, false);
        let all = scorer.score_all(&cloud, &cands, 7).unwrap();
        let true_max = all.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        for threshold in [0.0f32, 0.3, 0.5, 0.9] {
            let (hit, seen_max, scored) = scorer.any_above(&cloud, &cands, 7, threshold).unwrap();
            assert_eq!(hit, true_max > threshold, "threshold {threshold}");
            assert!(scored <= cands.len());
            if !hit {
                assert!((seen_max - true_max).abs() < 1e-6);
            }
        }
    }
}
