//! Push evaluator: per-row MLP 6 -> 64 -> 128, max-pool to a global 128
//! feature which, concatenated with the push-point row's 64 local features,
//! forms the 192-wide row feature; a three-layer MLP head with sigmoid scores
//! the push point.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::linear::{
    dense_backward, flatten_grads, flatten_layers, maxpool_rows, relu_backward_inplace,
    relu_inplace, unflatten_layers, LayerGrad, Linear, Scalar,
};
use super::NetError;

pub const PUSH_IN: usize = 6;
const P1: usize = 64;
const P2: usize = 128;
/// Per-row feature width: 64 local + 128 broadcast global.
pub const ROW_FEATURE: usize = P1 + P2;
const H1: usize = 96;
const H2: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct PushNet<F> {
    pub l1: Linear<F>,
    pub l2: Linear<F>,
    pub h1: Linear<F>,
    pub h2: Linear<F>,
    pub h3: Linear<F>,
}

pub struct PushTrace<F> {
    pub x: Array2<F>,
    rows_per: usize,
    a1: Array2<F>,
    a2: Array2<F>,
    pooled: Array2<F>,
    arg: Array2<u32>,
    feat0: Array2<F>,
    ha1: Array2<F>,
    ha2: Array2<F>,
}

pub type PushGrads<F> = [LayerGrad<F>; 5];

impl<F: Scalar> PushNet<F> {
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PushNet {
            l1: Linear::init(PUSH_IN, P1, &mut rng),
            l2: Linear::init(P1, P2, &mut rng),
            h1: Linear::init(ROW_FEATURE, H1, &mut rng),
            h2: Linear::init(H1, H2, &mut rng),
            h3: Linear::init(H2, 1, &mut rng),
        }
    }

    pub fn layers(&self) -> [&Linear<F>; 5] {
        [&self.l1, &self.l2, &self.h1, &self.h2, &self.h3]
    }

    pub fn layers_mut(&mut self) -> [&mut Linear<F>; 5] {
        [&mut self.l1, &mut self.l2, &mut self.h1, &mut self.h2, &mut self.h3]
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

    /// Push-effectiveness scores in (0,1), one per sample of the packed batch.
    pub fn forward_packed(&self, x: &ArrayView2<F>, rows_per: usize) -> Array1<F> {
        self.forward_inner(x, rows_per, None)
    }

    pub fn forward_trace(&self, x: Array2<F>, rows_per: usize) -> (Array1<F>, PushTrace<F>) {
        let mut slot = Some(PushTrace {
            x,
            rows_per,
            a1: Array2::zeros((0, 0)),
            a2: Array2::zeros((0, 0)),
            pooled: Array2::zeros((0, 0)),
            arg: Array2::zeros((0, 0)),
            feat0: Array2::zeros((0, 0)),
            ha1: Array2::zeros((0, 0)),
            ha2: Array2::zeros((0, 0)),
        });
        let scores = {
            let trace = slot.as_mut().unwrap();
            let x_view = trace.x.clone();
            self.forward_inner(&x_view.view(), rows_per, Some(trace))
        };
        (scores, slot.unwrap())
    }

    fn forward_inner(
        &self,
        x: &ArrayView2<F>,
        rows_per: usize,
        mut trace: Option<&mut PushTrace<F>>,
    ) -> Array1<F> {
        debug_assert_eq!(x.ncols(), PUSH_IN);
        debug_assert_eq!(x.nrows() % rows_per, 0);
        let batch = x.nrows() / rows_per;
        let mut a1 = self.l1.forward(x);
        relu_inplace(&mut a1);
        let mut a2 = self.l2.forward(&a1.view());
        relu_inplace(&mut a2);
        let (pooled, arg) = maxpool_rows(&a2.view(), batch, rows_per);
        // row-0 feature: local 64 concatenated with the broadcast global 128
        let mut feat0 = Array2::<F>::zeros((batch, ROW_FEATURE));
        for b in 0..batch {
            feat0
                .slice_mut(ndarray::s![b, ..P1])
                .assign(&a1.row(b * rows_per));
            feat0.slice_mut(ndarray::s![b, P1..]).assign(&pooled.row(b));
        }
        let mut ha1 = self.h1.forward(&feat0.view());
        relu_inplace(&mut ha1);
        let mut ha2 = self.h2.forward(&ha1.view());
        relu_inplace(&mut ha2);
        let logits = self.h3.forward(&ha2.view());
        let scores = logits.column(0).mapv(|v| sigmoid(v));
        if let Some(t) = trace.as_mut() {
            t.a1 = a1;
            t.a2 = a2;
            t.pooled = pooled;
            t.arg = arg;
            t.feat0 = feat0;
            t.ha1 = ha1;
            t.ha2 = ha2;
        }
        scores
    }

    /// Full per-row 192-wide feature map of a single state (row feature =
    /// local 64 + broadcast global 128); the head consumes row 0's slice.
    pub fn row_features(&self, x: &ArrayView2<F>) -> Array2<F> {
        let rows = x.nrows();
        let mut a1 = self.l1.forward(x);
        relu_inplace(&mut a1);
        let mut a2 = self.l2.forward(&a1.view());
        relu_inplace(&mut a2);
        let (pooled, _) = maxpool_rows(&a2.view(), 1, rows);
        let mut out = Array2::<F>::zeros((rows, ROW_FEATURE));
        for r in 0..rows {
            out.slice_mut(ndarray::s![r, ..P1]).assign(&a1.row(r));
            out.slice_mut(ndarray::s![r, P1..]).assign(&pooled.row(0));
        }
        out
    }

    /// Gradients of the mean binary cross-entropy over the batch.
    pub fn backward(
        &self,
        trace: &PushTrace<F>,
        scores: &Array1<F>,
        labels: &[u8],
    ) -> Result<PushGrads<F>, NetError> {
        let batch = scores.len();
        if labels.len() != batch {
            return Err(NetError::LengthMismatch("scores vs labels"));
        }
        let rows_per = trace.rows_per;
        let inv_b = F::one() / F::from_f64c(batch as f64);

        // BCE + sigmoid: dlogit = (score - y) / B
        let mut dlogits = Array2::<F>::zeros((batch, 1));
        for b in 0..batch {
            dlogits[[b, 0]] = (scores[b] - F::from_f64c(labels[b] as f64)) * inv_b;
        }

        let (g_h3, mut dha2) = dense_backward(&trace.ha2.view(), &self.h3, &dlogits);
        relu_backward_inplace(&mut dha2, &trace.ha2);
        let (g_h2, mut dha1) = dense_backward(&trace.ha1.view(), &self.h2, &dha2);
        relu_backward_inplace(&mut dha1, &trace.ha1);
        let (g_h1, dfeat0) = dense_backward(&trace.feat0.view(), &self.h1, &dha1);

        let mut da1 = Array2::<F>::zeros(trace.a1.dim());
        // global path: sparse through the max-pool into l2
        let w2t = self.l2.w.t();
        let mut g_w2t = Array2::<F>::zeros((P2, P1));
        let mut g_b2 = Array1::<F>::zeros(P2);
        for b in 0..batch {
            for c in 0..P2 {
                if trace.pooled[[b, c]] <= F::zero() {
                    continue;
                }
                let g = dfeat0[[b, P1 + c]];
                if g == F::zero() {
                    continue;
                }
                let row = b * rows_per + trace.arg[[b, c]] as usize;
                g_w2t.row_mut(c).scaled_add(g, &trace.a1.row(row));
                g_b2[c] += g;
                da1.row_mut(row).scaled_add(g, &w2t.row(c));
            }
        }
        let g_l2 = LayerGrad { w: g_w2t.t().to_owned(), b: g_b2 };
        // local path into row 0
        for b in 0..batch {
            let mut row = da1.row_mut(b * rows_per);
            for c in 0..P1 {
                row[c] += dfeat0[[b, c]];
            }
        }

        relu_backward_inplace(&mut da1, &trace.a1);
        let g_w1 = trace.x.t().dot(&da1);
        let g_b1 = da1.sum_axis(Axis(0));
        let g_l1 = LayerGrad { w: g_w1, b: g_b1 };

        Ok([g_l1, g_l2, g_h1, g_h2, g_h3])
    }

    pub fn backward_flat(
        &self,
        states: &[Array2<F>],
        labels: &[u8],
    ) -> Result<Vec<F>, NetError> {
        let (x, rows_per) = super::grasp::pack_states(states)?;
        let (scores, trace) = self.forward_trace(x, rows_per);
        let grads = self.backward(&trace, &scores, labels)?;
        Ok(flatten_grads(&grads.iter().collect::<Vec<_>>()))
    }
}

fn sigmoid<F: Scalar>(v: F) -> F {
    F::one() / (F::one() + (-v).exp())
}
