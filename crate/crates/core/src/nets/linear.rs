//! Dense layers and the scalar abstraction shared by both evaluators.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Float type the network math is generic over.
pub trait Scalar: ndarray::NdFloat + num_traits::FromPrimitive {
    fn from_f64c(x: f64) -> Self {
        Self::from_f64(x).expect("finite constant")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Fully-connected layer `y = x W + b`, weights stored `[fan_in, fan_out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<F> {
    pub w: Array2<F>,
    pub b: Array1<F>,
}

impl<F: Scalar> Linear<F> {
    /// Kaiming-uniform init; draws happen in f64 so f32 and f64 nets built
    /// from the same seed hold numerically identical weights.
    pub fn init(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / fan_in as f64).sqrt();
        let w = Array2::from_shape_fn((fan_in, fan_out), |_| {
            F::from_f64c(rng.gen_range(-bound..bound))
        });
        let b = Array1::zeros(fan_out);
        Linear { w, b }
    }

    pub fn forward(&self, x: &ArrayView2<F>) -> Array2<F> {
        x.dot(&self.w) + &self.b
    }

    pub fn fan_in(&self) -> usize {
        self.w.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.w.ncols()
    }

    pub fn n_params(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// Gradient of one layer, same shapes as the layer.
#[derive(Clone, Debug)]
pub struct LayerGrad<F> {
    pub w: Array2<F>,
    pub b: Array1<F>,
}

impl<F: Scalar> LayerGrad<F> {
    pub fn zeros_like(layer: &Linear<F>) -> Self {
        LayerGrad { w: Array2::zeros(layer.w.dim()), b: Array1::zeros(layer.b.dim()) }
    }

    pub fn add_assign(&mut self, other: &LayerGrad<F>) {
        self.w += &other.w;
        self.b += &other.b;
    }
}

pub(crate) fn relu_inplace<F: Scalar>(a: &mut Array2<F>) {
    a.mapv_inplace(|v| if v > F::zero() { v } else { F::zero() });
}

/// Zero out gradient entries where the forward activation was not positive.
pub(crate) fn relu_backward_inplace<F: Scalar>(grad: &mut Array2<F>, activated: &Array2<F>) {
    ndarray::Zip::from(grad).and(activated).for_each(|g, &a| {
        if a <= F::zero() {
            *g = F::zero();
        }
    });
}

/// Max over each sample's row block; returns pooled values and winning rows.
pub(crate) fn maxpool_rows<F: Scalar>(
    a: &ArrayView2<F>,
    batch: usize,
    rows_per: usize,
) -> (Array2<F>, Array2<u32>) {
    let cols = a.ncols();
    let mut pooled = Array2::from_elem((batch, cols), F::neg_infinity());
    let mut arg = Array2::<u32>::zeros((batch, cols));
    for b in 0..batch {
        let mut pooled_row = pooled.row_mut(b);
        let mut arg_row = arg.row_mut(b);
        for r in 0..rows_per {
            let row = a.row(b * rows_per + r);
            for c in 0..cols {
                if row[c] > pooled_row[c] {
                    pooled_row[c] = row[c];
                    arg_row[c] = r as u32;
                }
            }
        }
    }
    (pooled, arg)
}

/// dW = xᵀ dy, db = column sums of dy, dx = dy Wᵀ.
pub(crate) fn dense_backward<F: Scalar>(
    x: &ArrayView2<F>,
    layer: &Linear<F>,
    dy: &Array2<F>,
) -> (LayerGrad<F>, Array2<F>) {
    let dw = x.t().dot(dy);
    let db = dy.sum_axis(Axis(0));
    let dx = dy.dot(&layer.w.t());
    (LayerGrad { w: dw, b: db }, dx)
}

/// Canonical flattening order: per layer, row-major weights then biases.
pub(crate) fn flatten_layers<F: Scalar>(layers: &[&Linear<F>]) -> Vec<F> {
    let mut out = Vec::new();
    for l in layers {
        out.extend(l.w.iter().copied());
        out.extend(l.b.iter().copied());
    }
    out
}

pub(crate) fn unflatten_layers<F: Scalar>(layers: &mut [&mut Linear<F>], flat: &[F]) {
    let mut k = 0usize;
    for l in layers.iter_mut() {
        for v in l.w.iter_mut() {
            *v = flat[k];
            k += 1;
        }
        for v in l.b.iter_mut() {
            *v = flat[k];
            k += 1;
        }
    }
    assert_eq!(k, flat.len(), "flat parameter array length mismatch");
}

pub(crate) fn flatten_grads<F: Scalar>(grads: &[&LayerGrad<F>]) -> Vec<F> {
    let mut out = Vec::new();
    for g in grads {
        out.extend(g.w.iter().copied());
        out.extend(g.b.iter().copied());
    }
    out
}
