//! Grasp evaluator: per-row MLP 4 -> 64 -> 128 -> 1024, symmetric max-pool to
//! a 1x1024 global feature, then a three-layer MLP head with softmax over
//! {non-graspable, graspable}.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::linear::{
    dense_backward, flatten_grads, flatten_layers, maxpool_rows, relu_backward_inplace,
    relu_inplace, unflatten_layers, LayerGrad, Linear, Scalar,
};
use super::loss::LossConfig;
use super::NetError;

pub const GRASP_IN: usize = 4;
const P1: usize = 64;
const P2: usize = 128;
pub const GLOBAL_FEATURE: usize = 1024;
const H1: usize = 512;
const H2: usize = 128;
pub const CLASSES: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct GraspNet<F> {
    pub l1: Linear<F>,
    pub l2: Linear<F>,
    pub l3: Linear<F>,
    pub h1: Linear<F>,
    pub h2: Linear<F>,
    pub h3: Linear<F>,
}

/// Activations retained for the backward pass. The large pre-pool feature map
/// is not stored: the max-pool gradient is sparse, so winner rows plus pooled
/// values are enough.
pub struct GraspTrace<F> {
    pub x: Array2<F>,
    rows_per: usize,
    a1: Array2<F>,
    a2: Array2<F>,
    pooled: Array2<F>,
    arg: Array2<u32>,
    ha1: Array2<F>,
    ha2: Array2<F>,
}

pub type GraspGrads<F> = [LayerGrad<F>; 6];

impl<F: Scalar> GraspNet<F> {
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GraspNet {
            l1: Linear::init(GRASP_IN, P1, &mut rng),
            l2: Linear::init(P1, P2, &mut rng),
            l3: Linear::init(P2, GLOBAL_FEATURE, &mut rng),
            h1: Linear::init(GLOBAL_FEATURE, H1, &mut rng),
            h2: Linear::init(H1, H2, &mut rng),
            h3: Linear::init(H2, CLASSES, &mut rng),
        }
    }

    pub fn layers(&self) -> [&Linear<F>; 6] {
        [&self.l1, &self.l2, &self.l3, &self.h1, &self.h2, &self.h3]
    }

    pub fn layers_mut(&mut self) -> [&mut Linear<F>; 6] {
        [&mut self.l1, &mut self.l2, &mut self.l3, &mut self.h1, &mut self.h2, &mut self.h3]
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.n_params()).sum()
    }

    pub fn flat_params(&self) -> Vec<F> {
        flatten_layers(&self.layers())
    }

    pub fn set_flat_params(&mut self, flat: &[F]) {
        unflatten_layers(&mut self.layers_mut(), flat);
    }

    /// Probabilities `[B, 2]` for a packed batch: `x` holds `batch * rows_per`
    /// rows of 4 features. Memory scales with `x.nrows() * 1024`; callers
    /// chunk large batches.
    pub fn forward_packed(&self, x: &ArrayView2<F>, rows_per: usize) -> Array2<F> {
        self.forward_trace_inner(x, rows_per, None)
    }

    pub fn forward_trace(&self, x: Array2<F>, rows_per: usize) -> (Array2<F>, GraspTrace<F>) {
        let mut slot = Some(GraspTrace {
            x,
            rows_per,
            a1: Array2::zeros((0, 0)),
            a2: Array2::zeros((0, 0)),
            pooled: Array2::zeros((0, 0)),
            arg: Array2::zeros((0, 0)),
            ha1: Array2::zeros((0, 0)),
            ha2: Array2::zeros((0, 0)),
        });
        let probs = {
            let trace = slot.as_mut().unwrap();
            let x_view = trace.x.clone();
            self.forward_trace_inner(&x_view.view(), rows_per, Some(trace))
        };
        (probs, slot.unwrap())
    }

    fn forward_trace_inner(
        &self,
        x: &ArrayView2<F>,
        rows_per: usize,
        mut trace: Option<&mut GraspTrace<F>>,
    ) -> Array2<F> {
        debug_assert_eq!(x.ncols(), GRASP_IN);
        debug_assert_eq!(x.nrows() % rows_per, 0);
        let batch = x.nrows() / rows_per;
        let mut a1 = self.l1.forward(x);
        relu_inplace(&mut a1);
        let mut a2 = self.l2.forward(&a1.view());
        relu_inplace(&mut a2);
        let mut a3 = self.l3.forward(&a2.view());
        relu_inplace(&mut a3);
        let (pooled, arg) = maxpool_rows(&a3.view(), batch, rows_per);
        drop(a3);
        let mut ha1 = self.h1.forward(&pooled.view());
        relu_inplace(&mut ha1);
        let mut ha2 = self.h2.forward(&ha1.view());
        relu_inplace(&mut ha2);
        let logits = self.h3.forward(&ha2.view());
        let probs = softmax_rows(&logits);
        if let Some(t) = trace.as_mut() {
            t.a1 = a1;
            t.a2 = a2;
            t.pooled = pooled;
            t.arg = arg;
            t.ha1 = ha1;
            t.ha2 = ha2;
        }
        probs
    }

    /// Gradients of the mean smoothed cross-entropy over the batch.
    pub fn backward(
        &self,
        trace: &GraspTrace<F>,
        probs: &Array2<F>,
        labels: &[u8],
        cfg: &LossConfig,
    ) -> Result<GraspGrads<F>, NetError> {
        let batch = probs.nrows();
        if labels.len() != batch {
            return Err(NetError::LengthMismatch("probs vs labels"));
        }
        let rows_per = trace.rows_per;
        let eps = F::from_f64c(cfg.epsilon);
        let inv_b = F::one() / F::from_f64c(batch as f64);
        let c_inv = F::from_f64c(1.0 / cfg.classes as f64);

        // smoothed-CE + softmax gradient: (p - q) / B
        let mut dlogits = probs.clone();
        for (b, mut row) in dlogits.rows_mut().into_iter().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                let target = if labels[b] as usize == c { F::one() - eps } else { F::zero() }
                    + eps * c_inv;
                *v = (*v - target) * inv_b;
            }
        }

        let (g_h3, mut dha2) = dense_backward(&trace.ha2.view(), &self.h3, &dlogits);
        relu_backward_inplace(&mut dha2, &trace.ha2);
        let (g_h2, mut dha1) = dense_backward(&trace.ha1.view(), &self.h2, &dha2);
        relu_backward_inplace(&mut dha1, &trace.ha1);
        let (g_h1, dpooled) = dense_backward(&trace.pooled.view(), &self.h1, &dha1);

        // sparse max-pool backward through l3
        let w3t = self.l3.w.t();
        let mut g_w3t = Array2::<F>::zeros((GLOBAL_FEATURE, P2));
        let mut g_b3 = Array1::<F>::zeros(GLOBAL_FEATURE);
        let mut da2 = Array2::<F>::zeros(trace.a2.dim());
        for b in 0..batch {
            for c in 0..GLOBAL_FEATURE {
                // relu' at the winner: only positive pooled values carry gradient
                if trace.pooled[[b, c]] <= F::zero() {
                    continue;
                }
                let g = dpooled[[b, c]];
                if g == F::zero() {
                    continue;
                }
                let row = b * rows_per + trace.arg[[b, c]] as usize;
                g_w3t.row_mut(c).scaled_add(g, &trace.a2.row(row));
                g_b3[c] += g;
                da2.row_mut(row).scaled_add(g, &w3t.row(c));
            }
        }
        let g_l3 = LayerGrad { w: g_w3t.t().to_owned(), b: g_b3 };

        relu_backward_inplace(&mut da2, &trace.a2);
        let (g_l2, mut da1) = dense_backward(&trace.a1.view(), &self.l2, &da2);
        relu_backward_inplace(&mut da1, &trace.a1);
        let g_w1 = trace.x.t().dot(&da1);
        let g_b1 = da1.sum_axis(Axis(0));
        let g_l1 = LayerGrad { w: g_w1, b: g_b1 };

        Ok([g_l1, g_l2, g_l3, g_h1, g_h2, g_h3])
    }

    /// Flat gradient in the canonical parameter order.
    pub fn backward_flat(
        &self,
        states: &[Array2<F>],
        labels: &[u8],
        cfg: &LossConfig,
    ) -> Result<Vec<F>, NetError> {
        let (x, rows_per) = pack_states(states)?;
        let (probs, trace) = self.forward_trace(x, rows_per);
        let grads = self.backward(&trace, &probs, labels, cfg)?;
        Ok(flatten_grads(&grads.iter().collect::<Vec<_>>()))
    }
}

pub(crate) fn softmax_rows<F: Scalar>(logits: &Array2<F>) -> Array2<F> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        let mut sum = F::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum = sum + *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    out
}

/// Stack equally-shaped states into one packed row matrix.
pub(crate) fn pack_states<F: Scalar>(states: &[Array2<F>]) -> Result<(Array2<F>, usize), NetError> {
    let first = states.first().ok_or(NetError::EmptyDataset)?;
    let (rows_per, cols) = first.dim();
    let mut x = Array2::<F>::zeros((states.len() * rows_per, cols));
    for (i, s) in states.iter().enumerate() {
        if s.dim() != (rows_per, cols) {
            return Err(NetError::ShapeMismatch { want: (rows_per, cols), got: s.dim() });
        }
        x.slice_mut(ndarray::s![i * rows_per..(i + 1) * rows_per, ..]).assign(s);
    }
    Ok((x, rows_per))
}
