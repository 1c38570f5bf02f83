//! Training loops (Adam/AdamW, step and plateau schedules) and deterministic
//! batched inference for both evaluators.
//!
//! Determinism: batches are split into fixed-size chunks; chunks may be
//! processed in parallel but are reduced sequentially in index order, so
//! results do not depend on the worker count.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::grasp::{pack_states, GraspNet};
use super::loss::{grasp_loss, push_loss, LossConfig};
use super::push::PushNet;
use super::{LabeledRows, NetError};
use crate::geom::derive_seed;

/// Fixed parallel chunk size; part of the deterministic reduction order.
const PAR_CHUNK: usize = 32;
const ADAM_BETA1: f32 = 0.9;
const ADAM_BETA2: f32 = 0.999;
const ADAM_EPS: f32 = 1e-8;
/// Validation loss must drop by more than this to count as an improvement.
const PLATEAU_TOL: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    StepDecay { milestones: Vec<usize>, factor: f64 },
    PlateauDecay { factor: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptimizerKind {
    AdamW { weight_decay: f64 },
    Adam,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub val_batch_size: usize,
    pub lr0: f64,
    pub schedule: Schedule,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl TrainConfig {
    /// Grasp evaluator defaults: batch 256, lr 5e-4, 85 epochs, x0.1 decay at
    /// epochs 40/55/80, AdamW.
    pub fn grasp_defaults(seed: u64) -> Self {
        TrainConfig {
            batch_size: 256,
            val_batch_size: 256,
            lr0: 5e-4,
            schedule: Schedule::StepDecay { milestones: vec![40, 55, 80], factor: 0.1 },
            epochs: 85,
            optimizer: OptimizerKind::AdamW { weight_decay: 1e-2 },
            seed,
        }
    }

    /// Push evaluator defaults: batch 128, val batch 64, lr 8e-4, 100 epochs,
    /// x0.95 decay on non-improving validation loss, Adam.
    pub fn push_defaults(seed: u64) -> Self {
        TrainConfig {
            batch_size: 128,
            val_batch_size: 64,
            lr0: 8e-4,
            schedule: Schedule::PlateauDecay { factor: 0.95 },
            epochs: 100,
            optimizer: OptimizerKind::Adam,
            seed,
        }
    }
}

/// Learning rate under a step schedule at a 1-indexed epoch.
pub fn step_lr(lr0: f64, milestones: &[usize], factor: f64, epoch: usize) -> f64 {
    let passed = milestones.iter().filter(|&&m| m < epoch).count();
    lr0 * factor.powi(passed as i32)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
}

impl TrainReport {
    pub fn final_val_acc(&self) -> f64 {
        self.epochs.last().map(|m| m.val_acc).unwrap_or(0.0)
    }

    pub fn final_val_loss(&self) -> f64 {
        self.epochs.last().map(|m| m.val_loss).unwrap_or(f64::NAN)
    }
}

struct Adam {
    m: Vec<f32>,
    v: Vec<f32>,
    t: i32,
    weight_decay: f32,
}

impl Adam {
    fn new(n: usize, kind: &OptimizerKind) -> Self {
        let weight_decay = match kind {
            OptimizerKind::AdamW { weight_decay } => *weight_decay as f32,
            OptimizerKind::Adam => 0.0,
        };
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0, weight_decay }
    }

    fn step(&mut self, params: &mut [f32], grads: &[f32], lr: f32) {
        self.t += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.t);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * g;
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            // decoupled weight decay (zero for plain Adam)
            params[i] -= lr * (mhat / (vhat.sqrt() + ADAM_EPS) + self.weight_decay * params[i]);
        }
    }
}

/// 90/10 train/validation split by seeded shuffle.
fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x73706c69));
    idx.shuffle(&mut rng);
    let val_len = (n / 10).max(usize::from(n >= 2)).min(n.saturating_sub(1));
    let train = idx[..n - val_len].to_vec();
    let val = idx[n - val_len..].to_vec();
    (train, val)
}

/// Per-chunk forward/backward results reduced sequentially.
struct ChunkOut {
    loss_sum: f64,
    correct: usize,
    grad: Vec<f32>,
}

fn accumulate_batch<FWD>(indices: &[usize], run_chunk: FWD) -> Result<(f64, usize, Vec<f32>), NetError>
where
    FWD: Fn(&[usize]) -> Result<ChunkOut, NetError> + Sync,
{
    let chunks: Vec<&[usize]> = indices.chunks(PAR_CHUNK).collect();
    let outs: Vec<Result<ChunkOut, NetError>> =
        chunks.par_iter().map(|c| run_chunk(c)).collect();
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    let mut grad: Option<Vec<f32>> = None;
    let total = indices.len() as f64;
    for (chunk, out) in chunks.iter().zip(outs) {
        let out = out?;
        loss_sum += out.loss_sum;
        correct += out.correct;
        // chunk gradients are means over the chunk; reweight to the batch mean
        let w = chunk.len() as f32 / total as f32;
        match grad.as_mut() {
            None => {
                let mut g = out.grad;
                for v in g.iter_mut() {
                    *v *= w;
                }
                grad = Some(g);
            }
            Some(acc) => {
                for (a, b) in acc.iter_mut().zip(&out.grad) {
                    *a += w * b;
                }
            }
        }
    }
    Ok((loss_sum, correct, grad.unwrap_or_default()))
}

fn gather<'a>(data: &'a LabeledRows, idx: &[usize]) -> (Vec<Array2<f32>>, Vec<u8>) {
    let xs: Vec<Array2<f32>> = idx.iter().map(|&i| data.states[i].clone()).collect();
    let ys: Vec<u8> = idx.iter().map(|&i| data.labels[i]).collect();
    (xs, ys)
}

macro_rules! train_loop {
    ($data:expr, $cfg:expr, $net:expr, $batch_fn:expr, $eval_fn:expr) => {{
        let data = $data;
        let cfg = $cfg;
        if data.is_empty() {
            return Err(NetError::EmptyDataset);
        }
        let (train_idx, val_idx) = split_indices(data.len(), cfg.seed);
        let mut report = TrainReport::default();
        let mut flat = $net.flat_params();
        let mut adam = Adam::new(flat.len(), &cfg.optimizer);
        let mut lr = cfg.lr0;
        let mut best_val = f64::INFINITY;
        for epoch in 1..=cfg.epochs {
            if let Schedule::StepDecay { ref milestones, factor } = cfg.schedule {
                lr = step_lr(cfg.lr0, milestones, factor, epoch);
            }
            let mut order = train_idx.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, epoch as u64));
            order.shuffle(&mut rng);
            let mut loss_sum = 0.0;
            let mut correct = 0usize;
            for (bi, batch) in order.chunks(cfg.batch_size).enumerate() {
                let (l, c, grad) = $batch_fn(&*$net, batch)?;
                if !l.is_finite() {
                    return Err(NetError::NanLoss { epoch, batch: bi });
                }
                loss_sum += l;
                correct += c;
                adam.step(&mut flat, &grad, lr as f32);
                $net.set_flat_params(&flat);
            }
            let train_loss = loss_sum / train_idx.len() as f64;
            let train_acc = correct as f64 / train_idx.len() as f64;
            let (val_loss, val_acc) = if val_idx.is_empty() {
                (train_loss, train_acc)
            } else {
                $eval_fn(&*$net, &val_idx, cfg.val_batch_size.max(1))?
            };
            report.epochs.push(EpochMetrics { epoch, lr, train_loss, train_acc, val_loss, val_acc });
            if let Schedule::PlateauDecay { factor } = cfg.schedule {
                if val_loss < best_val - PLATEAU_TOL {
                    best_val = val_loss;
                } else {
                    lr *= factor;
                }
            }
        }
        Ok::<TrainReport, NetError>(report)
    }};
}

/// Train a grasp evaluator from scratch; deterministic given the config seed.
pub fn train_grasp(
    data: &LabeledRows,
    cfg: &TrainConfig,
    loss_cfg: &LossConfig,
) -> Result<(GraspNet<f32>, TrainReport), NetError> {
    let mut net = GraspNet::<f32>::init(derive_seed(cfg.seed, 0x6e6574));
    let batch_fn = |net: &GraspNet<f32>, batch: &[usize]| -> Result<(f64, usize, Vec<f32>), NetError> {
        accumulate_batch(batch, |chunk| {
            let (xs, ys) = gather(data, chunk);
            let (x, rows_per) = pack_states(&xs)?;
            let (probs, trace) = net.forward_trace(x, rows_per);
            let loss = grasp_loss(&probs, &ys, loss_cfg)? as f64;
            let correct = probs
                .rows()
                .into_iter()
                .zip(ys.iter())
                .filter(|(p, &y)| (p[1] > p[0]) == (y == 1u8))
                .count();
            let grads = net.backward(&trace, &probs, &ys, loss_cfg)?;
            let grad = super::linear::flatten_grads(&grads.iter().collect::<Vec<_>>());
            Ok(ChunkOut { loss_sum: loss * ys.len() as f64, correct, grad })
        })
    };
    let eval_fn = |net: &GraspNet<f32>, idx: &[usize], chunk: usize| {
        eval_grasp(net, data, idx, chunk, loss_cfg)
    };
    let report = train_loop!(data, cfg, &mut net, batch_fn, eval_fn)?;
    Ok((net, report))
}

fn eval_grasp(
    net: &GraspNet<f32>,
    data: &LabeledRows,
    idx: &[usize],
    chunk: usize,
    loss_cfg: &LossConfig,
) -> Result<(f64, f64), NetError> {
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for block in idx.chunks(chunk) {
        let (xs, ys) = gather_ref(data, block);
        let (x, rows_per) = pack_states(&xs)?;
        let probs = net.forward_packed(&x.view(), rows_per);
        loss_sum += grasp_loss(&probs, &ys, loss_cfg)? as f64 * ys.len() as f64;
        correct += probs
            .rows()
            .into_iter()
            .zip(&ys)
            .filter(|(p, &y)| (p[1] > p[0]) == (y == 1u8))
            .count();
    }
    Ok((loss_sum / idx.len() as f64, correct as f64 / idx.len() as f64))
}

/// Train a push evaluator from scratch; deterministic given the config seed.
pub fn train_push(
    data: &LabeledRows,
    cfg: &TrainConfig,
) -> Result<(PushNet<f32>, TrainReport), NetError> {
    let mut net = PushNet::<f32>::init(derive_seed(cfg.seed, 0x6e6574));
    let batch_fn = |net: &PushNet<f32>, batch: &[usize]| -> Result<(f64, usize, Vec<f32>), NetError> {
        accumulate_batch(batch, |chunk| {
            let (xs, ys) = gather(data, chunk);
            let (x, rows_per) = pack_states(&xs)?;
            let (scores, trace) = net.forward_trace(x, rows_per);
            let preds: Vec<f32> = scores.to_vec();
            let loss = push_loss(&preds, &ys)? as f64;
            let correct =
                preds.iter().zip(&ys).filter(|&(&p, &y)| (p > 0.5) == (y == 1)).count();
            let grads = net.backward(&trace, &scores, &ys)?;
            let grad = super::linear::flatten_grads(&grads.iter().collect::<Vec<_>>());
            Ok(ChunkOut { loss_sum: loss * ys.len() as f64, correct, grad })
        })
    };
    let eval_fn =
        |net: &PushNet<f32>, idx: &[usize], chunk: usize| eval_push(net, data, idx, chunk);
    let report = train_loop!(data, cfg, &mut net, batch_fn, eval_fn)?;
    Ok((net, report))
}

fn eval_push(
    net: &PushNet<f32>,
    data: &LabeledRows,
    idx: &[usize],
    chunk: usize,
) -> Result<(f64, f64), NetError> {
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for block in idx.chunks(chunk) {
        let (xs, ys) = gather_ref(data, block);
        let (x, rows_per) = pack_states(&xs)?;
        let scores = net.forward_packed(&x.view(), rows_per);
        let preds: Vec<f32> = scores.to_vec();
        loss_sum += push_loss(&preds, &ys)? as f64 * ys.len() as f64;
        correct += preds.iter().zip(&ys).filter(|&(&p, &y)| (p > 0.5) == (y == 1)).count();
    }
    Ok((loss_sum / idx.len() as f64, correct as f64 / idx.len() as f64))
}

fn gather_ref(data: &LabeledRows, idx: &[usize]) -> (Vec<Array2<f32>>, Vec<u8>) {
    gather(data, idx)
}

/// Graspable-class probabilities for a list of states; equals per-state
/// forward passes, order preserved, chunked deterministically.
pub fn batched_grasp_scores(net: &GraspNet<f32>, states: &[Array2<f32>]) -> Vec<f32> {
    if states.is_empty() {
        return Vec::new();
    }
    let chunks: Vec<&[Array2<f32>]> = states.chunks(PAR_CHUNK).collect();
    let outs: Vec<Vec<f32>> = chunks
        .par_iter()
        .map(|chunk| {
            let (x, rows_per) = pack_states(chunk).expect("uniform state shapes");
            let probs = net.forward_packed(&x.view(), rows_per);
            probs.column(1).to_vec()
        })
        .collect();
    outs.concat()
}

/// Push-effectiveness scores for a list of states, order preserved.
pub fn batched_push_scores(net: &PushNet<f32>, states: &[Array2<f32>]) -> Vec<f32> {
    if states.is_empty() {
        return Vec::new();
    }
    let chunks: Vec<&[Array2<f32>]> = states.chunks(PAR_CHUNK).collect();
    let outs: Vec<Vec<f32>> = chunks
        .par_iter()
        .map(|chunk| {
            let (x, rows_per) = pack_states(chunk).expect("uniform state shapes");
            net.forward_packed(&x.view(), rows_per).to_vec()
        })
        .collect();
    outs.concat()
}
