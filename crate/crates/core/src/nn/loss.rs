use super::Tensor;
use crate::error::{Error, Result};

/// Root-mean-square loss and its gradient with respect to `pred`.
///
/// The gradient is `(p - t) / (n * loss)`, defined as zero when the loss is
/// exactly zero.
pub fn rmse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Shape(format!(
            "prediction has {} values, target {}",
            pred.len(),
            target.len()
        )));
    }
    let n = pred.len() as f64;
    let diff: Vec<f64> = pred.values().iter().zip(target.values()).map(|(p, t)| p - t).collect();
    let loss = (diff.iter().map(|d| d * d).sum::<f64>() / n).sqrt();
    let grad = if loss > 0.0 {
        diff.iter().map(|d| d / (n * loss)).collect()
    } else {
        vec![0.0; diff.len()]
    };
    Ok((loss, Tensor::new(pred.shape().to_vec(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction() {
        let t = Tensor::from_vec(vec![0.2, 0.4]);
        let (loss, grad) = rmse_loss(&t, &t).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grad.values(), &[0.0, 0.0]);
    }

    #[test]
    fn constant_offset() {
        let (loss, grad) = rmse_loss(&Tensor::from_vec(vec![1.0, 1.0]), &Tensor::from_vec(vec![0.0, 0.0])).unwrap();
        assert_eq!(loss, 1.0);
        assert_eq!(grad.values(), &[0.5, 0.5]);
    }

    #[test]
    fn shape_mismatch() {
        assert!(rmse_loss(&Tensor::from_vec(vec![1.0]), &Tensor::from_vec(vec![1.0, 2.0])).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = Tensor::from_vec(vec![0.3, -0.7, 1.2, 0.05]);
        let t = Tensor::from_vec(vec![0.1, 0.2, 0.9, 0.0]);
        let (_, grad) = rmse_loss(&p, &t).unwrap();
        let eps = 1e-6;
        for i in 0..p.len() {
            let (mut a, mut b) = (p.clone(), p.clone());
            a.values_mut()[i] += eps;
            b.values_mut()[i] -= eps;
            let fd = (rmse_loss(&a, &t).unwrap().0 - rmse_loss(&b, &t).unwrap().0) / (2.0 * eps);
            let g = grad.values()[i];
            assert!((g - fd).abs() / g.abs().max(fd.abs()) < 1e-4);
        }
    }
}
