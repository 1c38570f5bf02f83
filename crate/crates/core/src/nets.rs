//! The learning core: point-set encoders for the two evaluators, their
//! losses, reverse-mode gradients, optimizers, schedules, training loops,
//! and checkpoint persistence.
//!
//! Math is generic over `f32`/`f64`; production training runs in `f32`
//! (checkpoints store 32-bit weights), while gradient-check oracles
//! instantiate the same code in `f64`.

use thiserror::Error;

mod checkpoint;
mod grasp;
mod linear;
mod loss;
mod push;
mod train;

pub use checkpoint::{Checkpoint, CheckpointMeta, ARCH_GRASP, ARCH_GRASP_NOPC, ARCH_PUSH};
pub use grasp::{GraspGrads, GraspNet, GraspTrace};
pub(crate) use grasp::softmax_rows;
pub use linear::{Linear, Scalar};
pub use loss::{grasp_loss, push_loss, LossConfig};
pub use push::{PushGrads, PushNet};
pub use train::{
    batched_grasp_scores, batched_push_scores, train_grasp, train_push, EpochMetrics,
    OptimizerKind, Schedule, TrainConfig, TrainReport,
};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("length mismatch: {0}")]
    LengthMismatch(&'static str),
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    NanLoss { epoch: usize, batch: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("state shape {got:?} does not match the expected {want:?}")]
    ShapeMismatch { want: (usize, usize), got: (usize, usize) },
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod fd_tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel_err(a: f64, b: f64) -> f64 {
        let denom = a.abs().max(b.abs());
        if denom < 1e-7 {
            if (a - b).abs() < 1e-9 {
                0.0
            } else {
                1.0
            }
        } else {
            (a - b).abs() / denom
        }
    }

    // spot-check the analytic gradients with central differences in f64 on a
    // random parameter subset; the acceptance suite covers every parameter
    #[test]
    fn grasp_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let net = GraspNet::<f64>::init(3);
        let states: Vec<Array2<f64>> = (0..2)
            .map(|_| Array2::from_shape_fn((4, 4), |_| rng.gen_range(-0.5..0.5)))
            .collect();
        let labels = [1u8, 0];
        let cfg = LossConfig::default();
        let analytic = net.backward_flat(&states, &labels, &cfg).unwrap();

        let loss_at = |flat: &[f64]| -> f64 {
            let mut n = net.clone();
            n.set_flat_params(flat);
            let (x, rows_per) = {
                let mut x = Array2::<f64>::zeros((8, 4));
                x.slice_mut(ndarray::s![..4, ..]).assign(&states[0]);
                x.slice_mut(ndarray::s![4.., ..]).assign(&states[1]);
                (x, 4)
            };
            let probs = n.forward_packed(&x.view(), rows_per);
            grasp_loss(&probs, &labels, &cfg).unwrap()
        };

        let base = net.flat_params();
        let h = 1e-4;
        let n_params = base.len();
        let mut worst = 0.0f64;
        for _ in 0..600 {
            let i = rng.gen_range(0..n_params);
            let mut plus = base.clone();
            plus[i] += h;
            let mut minus = base.clone();
            minus[i] -= h;
            let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            worst = worst.max(rel_err(fd, analytic[i]));
        }
        assert!(worst <= 1e-3, "max relative error {worst}");
    }

    #[test]
    fn push_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let net = PushNet::<f64>::init(5);
        let states: Vec<Array2<f64>> = (0..2)
            .map(|_| Array2::from_shape_fn((4, 6), |_| rng.gen_range(-0.5..0.5)))
            .collect();
        let labels = [1u8, 0];
        let analytic = net.backward_flat(&states, &labels).unwrap();

        let loss_at = |flat: &[f64]| -> f64 {
            let mut n = net.clone();
            n.set_flat_params(flat);
            let mut x = Array2::<f64>::zeros((8, 6));
            x.slice_mut(ndarray::s![..4, ..]).assign(&states[0]);
            x.slice_mut(ndarray::s![4.., ..]).assign(&states[1]);
            let scores = n.forward_packed(&x.view(), 4);
            push_loss(scores.as_slice().unwrap(), &labels).unwrap()
        };

        let base = net.flat_params();
        let h = 1e-4;
        let mut worst = 0.0f64;
        for _ in 0..600 {
            let i = rng.gen_range(0..base.len());
            let mut plus = base.clone();
            plus[i] += h;
            let mut minus = base.clone();
            minus[i] -= h;
            let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            worst = worst.max(rel_err(fd, analytic[i]));
        }
        assert!(worst <= 1e-3, "max relative error {worst}");
    }

    #[test]
    fn perfect_predictions_have_zero_gradient() {
        // drive the net to saturated predictions by scaling the head, eps = 0
        let mut net = GraspNet::<f64>::init(8);
        net.h3.w.mapv_inplace(|v| v * 200.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let state = Array2::from_shape_fn((4, 4), |_| rng.gen_range(-0.5..0.5));
        let x = state.clone();
        let probs = net.forward_packed(&x.view(), 4);
        let label = if probs[[0, 1]] > probs[[0, 0]] { 1u8 } else { 0 };
        if probs[[0, label as usize]] > 1.0 - 1e-12 {
            let cfg = LossConfig { epsilon: 0.0, classes: 2 };
            let grad = net.backward_flat(&[state], &[label], &cfg).unwrap();
            let max = grad.iter().fold(0.0f64, |m, &g| m.max(g.abs()));
            assert!(max < 1e-9, "gradient should vanish at perfect predictions: {max}");
        }
    }

    #[test]
    fn duplicated_batch_has_same_mean_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let net = GraspNet::<f64>::init(21);
        let state = Array2::from_shape_fn((4, 4), |_| rng.gen_range(-0.5..0.5));
        let cfg = LossConfig::default();
        let single = net.backward_flat(&[state.clone()], &[1], &cfg).unwrap();
        let doubled = net
            .backward_flat(&[state.clone(), state], &[1, 1], &cfg)
            .unwrap();
        for (a, b) in single.iter().zip(&doubled) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

/// Uniformly-shaped labeled states, the training currency for both nets.
#[derive(Clone, Debug, Default)]
pub struct LabeledRows {
    pub states: Vec<ndarray::Array2<f32>>,
    pub labels: Vec<u8>,
}

impl LabeledRows {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn push(&mut self, state: ndarray::Array2<f32>, label: u8) {
        self.states.push(state);
        self.labels.push(label);
    }

    pub fn positive_rate(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.labels.iter().filter(|&&l| l == 1).count() as f64 / self.labels.len() as f64
    }
}
