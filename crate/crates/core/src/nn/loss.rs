use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Mean softmax cross-entropy over the batch and its gradient
/// `(softmax − onehot) / B` with respect to the logits.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let [b, classes] = logits.dims2()?;
    if labels.len() != b {
        return Err(Error::dim("labels", b, labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Usage(format!("label {bad} outside [0, {classes})")));
    }
    let mut loss = 0.0f64;
    let mut grad = vec![0.0f32; b * classes];
    for ((row, g), &label) in logits.data().chunks(classes).zip(grad.chunks_mut(classes)).zip(labels) {
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64));
        let exps: Vec<f64> = row.iter().map(|&v| (v as f64 - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        loss += total.ln() - (row[label] as f64 - max);
        for (k, (d, e)) in g.iter_mut().zip(&exps).enumerate() {
            let p = e / total;
            let target = if k == label { 1.0 } else { 0.0 };
            *d = ((p - target) / b as f64) as f32;
        }
    }
    Ok((loss / b as f64, Tensor::new(vec![b, classes], grad)?))
}

/// Index of the largest logit per row.
pub fn argmax_rows(logits: &Tensor) -> Result<Vec<usize>> {
    let [_, classes] = logits.dims2()?;
    Ok(logits
        .data()
        .chunks(classes)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f32::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
                .0
        })
        .collect())
}
