use crate::error::{Error, Result};

fn check(pred: &[f64], reference: &[f64]) -> Result<()> {
    if pred.len() != reference.len() || pred.is_empty() {
        return Err(Error::Dimension(format!(
            "metric needs equal nonzero lengths, got {} and {}",
            pred.len(),
            reference.len()
        )));
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(pred: &[f64], reference: &[f64]) -> Result<f64> {
    check(pred, reference)?;
    let sum: f64 = pred.iter().zip(reference).map(|(p, r)| (p - r).abs()).sum();
    Ok(sum / pred.len() as f64)
}

/// Root mean square error.
pub fn rmse(pred: &[f64], reference: &[f64]) -> Result<f64> {
    check(pred, reference)?;
    let sum: f64 = pred.iter().zip(reference).map(|(p, r)| (p - r) * (p - r)).sum();
    Ok((sum / pred.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_values() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(rmse(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(mae(&[0.0, 2.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(rmse(&[0.0, 2.0], &[0.0, 0.0]).unwrap(), 2f64.sqrt());
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(mae(&[1.0], &[1.0, 2.0]), Err(Error::Dimension(_))));
        assert!(rmse(&[], &[]).is_err());
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(pairs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50)) {
            let (p, r): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let a = mae(&p, &r).unwrap();
            let b = rmse(&p, &r).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert!(b >= a * (1.0 - 1e-12));
        }

        #[test]
        fn equal_magnitudes_give_equality(mag in 0.0f64..10.0, signs in proptest::collection::vec(any::<bool>(), 1..20)) {
            let p: Vec<f64> = signs.iter().map(|&s| if s { mag } else { -mag }).collect();
            let r = vec![0.0; p.len()];
            let a = mae(&p, &r).unwrap();
            let b = rmse(&p, &r).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * mag.max(1.0));
        }
    }
}
