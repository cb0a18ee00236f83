use ndarray::Array2;

use super::layer::softmax_rows;
use super::Matrix;
use crate::error::{Error, Result};

/// How per-frame losses are combined over a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Mean,
    /// Summed over frames; the per-frame term is still averaged over output
    /// dimensions. Pair with `sgd_step(.., batch_size)` to get mean steps.
    Sum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loss {
    pub value: f64,
    pub grad: Matrix,
}

/// Mean cross-entropy of `softmax(logits)` against class indices, with
/// gradient `(softmax - onehot) / N`.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<Loss> {
    cross_entropy_with(logits, labels, Reduction::Mean)
}

pub fn cross_entropy_with(logits: &Matrix, labels: &[usize], reduction: Reduction) -> Result<Loss> {
    let (n, k) = logits.dim();
    if labels.len() != n {
        return Err(Error::shape(format!("{} labels for {n} frames", labels.len())));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Label { label, n_classes: k });
    }
    let mut grad = softmax_rows(logits.view());
    let mut total = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[label];
        grad[[i, label]] -= 1.0;
    }
    let scale = match reduction {
        Reduction::Mean => 1.0 / n.max(1) as f64,
        Reduction::Sum => 1.0,
    };
    grad *= scale;
    Ok(Loss {
        value: total * scale,
        grad,
    })
}

/// Mean squared error over all entries, with gradient `2 (pred - target) / N`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<Loss> {
    mse_with(pred, target, Reduction::Mean)
}

pub fn mse_with(pred: &Matrix, target: &Matrix, reduction: Reduction) -> Result<Loss> {
    if pred.dim() != target.dim() {
        return Err(Error::shape(format!(
            "prediction {:?} vs target {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    let (n, d) = pred.dim();
    let denom = match reduction {
        Reduction::Mean => (n * d).max(1) as f64,
        Reduction::Sum => d.max(1) as f64,
    };
    let diff: Array2<f64> = pred - target;
    let value = diff.iter().map(|v| v * v).sum::<f64>() / denom;
    Ok(Loss {
        value,
        grad: diff * (2.0 / denom),
    })
}
