//! The two training losses: label-smoothed cross-entropy for the grasp
//! evaluator and binary cross-entropy for the push evaluator.

use ndarray::Array2;

use super::linear::Scalar;
use super::NetError;

const PROB_FLOOR: f64 = 1e-7;

/// Label smoothing for the grasp loss; the paper leaves epsilon unstated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    pub epsilon: f64,
    pub classes: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { epsilon: 0.1, classes: 2 }
    }
}

/// Smoothed cross-entropy over probability pairs:
/// `-(1/B) sum_i [(1-eps) log p_{i,y} + (eps/C) sum_c log p_{i,c}]`.
/// Probabilities are clamped to `[1e-7, 1 - 1e-7]` before the logs.
pub fn grasp_loss<F: Scalar>(
    probs: &Array2<F>,
    labels: &[u8],
    cfg: &LossConfig,
) -> Result<F, NetError> {
    if probs.nrows() != labels.len() {
        return Err(NetError::LengthMismatch("probs vs labels"));
    }
    let eps = F::from_f64c(cfg.epsilon);
    let c_inv = F::from_f64c(1.0 / cfg.classes as f64);
    let lo = F::from_f64c(PROB_FLOOR);
    let hi = F::from_f64c(1.0 - PROB_FLOOR);
    let mut total = F::zero();
    for (row, &y) in probs.rows().into_iter().zip(labels) {
        let mut smooth_term = F::zero();
        for &p in row.iter() {
            smooth_term = smooth_term + p.max(lo).min(hi).ln();
        }
        let p_y = row[y as usize].max(lo).min(hi);
        total = total + (F::one() - eps) * p_y.ln() + eps * c_inv * smooth_term;
    }
    Ok(-total / F::from_f64c(labels.len() as f64))
}

/// Binary cross-entropy: `-(1/N) sum_i [y log s + (1-y) log(1-s)]`, with
/// predictions clamped to `[1e-7, 1 - 1e-7]`.
pub fn push_loss<F: Scalar>(preds: &[F], labels: &[u8]) -> Result<F, NetError> {
    if preds.len() != labels.len() {
        return Err(NetError::LengthMismatch("preds vs labels"));
    }
    if preds.is_empty() {
        return Err(NetError::EmptyDataset);
    }
    let lo = F::from_f64c(PROB_FLOOR);
    let hi = F::from_f64c(1.0 - PROB_FLOOR);
    let mut total = F::zero();
    for (&p, &y) in preds.iter().zip(labels) {
        let p = p.max(lo).min(hi);
        total = total
            + if y == 1 { p.ln() } else { (F::one() - p).ln() };
    }
    Ok(-total / F::from_f64c(preds.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn uniform_probs_cost_ln2_for_any_label_and_eps() {
        for eps in [0.0, 0.1, 0.5] {
            for label in [0u8, 1] {
                let cfg = LossConfig { epsilon: eps, classes: 2 };
                let p = array![[0.5f64, 0.5]];
                let l = grasp_loss(&p, &[label], &cfg).unwrap();
                assert!((l - LN2).abs() < 1e-9, "eps {eps} label {label}: {l}");
            }
        }
    }

    #[test]
    fn perfect_prediction_without_smoothing_is_free() {
        let cfg = LossConfig { epsilon: 0.0, classes: 2 };
        let p = array![[1.0f64, 0.0]];
        let l = grasp_loss(&p, &[0], &cfg).unwrap();
        // the 1e-7 clamp keeps the log finite; cost is ~1e-7, not exactly 0
        assert!(l.abs() < 1e-6, "{l}");
    }

    #[test]
    fn smoothed_example_matches_hand_arithmetic() {
        // eps = 0.1, C = 2, p = (0.9, 0.1), label 0:
        // -[0.9 ln 0.9 + 0.05 (ln 0.9 + ln 0.1)] = 0.21523...
        let cfg = LossConfig { epsilon: 0.1, classes: 2 };
        let p = array![[0.9f64, 0.1]];
        let l = grasp_loss(&p, &[0], &cfg).unwrap();
        let expected = -(0.9 * 0.9f64.ln() + 0.05 * (0.9f64.ln() + 0.1f64.ln()));
        assert!((l - expected).abs() < 1e-12);
        assert!((l - 0.2152).abs() < 1e-4, "{l}");
    }

    #[test]
    fn grasp_loss_rejects_length_mismatch() {
        let cfg = LossConfig::default();
        let p = array![[0.5f64, 0.5]];
        assert!(grasp_loss(&p, &[0, 1], &cfg).is_err());
    }

    #[test]
    fn push_loss_fixed_points() {
        // exact predictions cost ~0
        let l = push_loss(&[1.0f64, 0.0], &[1, 0]).unwrap();
        assert!(l.abs() < 1e-6);
        // 0.5 costs ln 2 regardless of label
        let l = push_loss(&[0.5f64, 0.5], &[0, 1]).unwrap();
        assert!((l - LN2).abs() < 1e-9);
        // confident mistake: y = 1, pred 0.1 -> ln 10
        let l = push_loss(&[0.1f64], &[1]).unwrap();
        assert!((l - 10f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn push_loss_rejects_length_mismatch() {
        assert!(push_loss(&[0.5f64], &[0, 1]).is_err());
    }

    #[test]
    fn losses_are_nonnegative() {
        let cfg = LossConfig::default();
        for p1 in [0.01f64, 0.3, 0.77, 0.99] {
            let p = array![[p1, 1.0 - p1]];
            assert!(grasp_loss(&p, &[0], &cfg).unwrap() >= 0.0);
            assert!(push_loss(&[p1], &[1]).unwrap() >= 0.0);
        }
    }
}
