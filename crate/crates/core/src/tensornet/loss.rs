use super::{Real, TensorError};

/// Mean squared error and its gradient `2(pred − target)/N`.
pub fn mse_loss<T: Real>(pred: &[T], target: &[T]) -> Result<(f64, Vec<T>), TensorError> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(TensorError::LossShape {
            pred: pred.len(),
            target: target.len(),
        });
    }
    let n = pred.len() as f64;
    let scale = T::from_f64(2.0 / n);
    let mut sum = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let d = p - t;
            sum += d.to_f64() * d.to_f64();
            scale * d
        })
        .collect();
    Ok((sum / n, grad))
}
