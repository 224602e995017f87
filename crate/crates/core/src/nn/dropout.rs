use rand::Rng;

use super::Tensor;
use crate::error::{Error, Result};

pub const DEFAULT_DROPOUT_RATE: f64 = 0.2;

pub fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate must lie in [0, 1), got {rate}")));
    }
    Ok(())
}

/// Inverted dropout. In training mode each element is zeroed with
/// probability `rate` and survivors are scaled by `1 / (1 - rate)`; the
/// returned mask holds those per-element factors. Inference is the identity.
pub fn dropout<R: Rng + ?Sized>(
    input: &Tensor,
    rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<(Tensor, Option<Vec<f64>>)> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok((input.clone(), None));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..input.len())
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let out = apply_mask(input, &mask)?;
    Ok((out, Some(mask)))
}

fn apply_mask(input: &Tensor, mask: &[f64]) -> Result<Tensor> {
    let values = input.values().iter().zip(mask).map(|(x, m)| x * m).collect();
    Tensor::new(input.shape().to_vec(), values)
}

#[derive(Debug, Clone)]
pub struct DropoutLayer {
    pub rate: f64,
    mask: Option<Vec<f64>>,
    frozen: bool,
}

impl DropoutLayer {
    pub fn new(rate: f64) -> Result<Self> {
        check_rate(rate)?;
        Ok(Self {
            rate,
            mask: None,
            frozen: false,
        })
    }

    /// While frozen, training-mode passes reuse the last sampled mask so the
    /// layer is a deterministic function of its input.
    pub fn set_frozen(&mut self, frozen: bool) {
        self.frozen = frozen;
    }

    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        input: &Tensor,
        training: Option<&mut R>,
    ) -> Result<Tensor> {
        match training {
            None => {
                self.mask = None;
                Ok(input.clone())
            }
            Some(_) if self.frozen && self.mask.is_some() => {
                apply_mask(input, self.mask.as_ref().expect("checked"))
            }
            Some(rng) => {
                let (out, mask) = dropout(input, self.rate, true, rng)?;
                self.mask = mask;
                Ok(out)
            }
        }
    }

    pub fn backward(&self, upstream: &Tensor) -> Result<Tensor> {
        match &self.mask {
            Some(mask) => apply_mask(upstream, mask),
            None => Ok(upstream.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_rate_and_inference_are_identity() {
        let x = Tensor::from_vec((0..50).map(f64::from).collect());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for training in [true, false] {
            assert_eq!(dropout(&x, 0.0, training, &mut rng).unwrap().0, x);
        }
        assert_eq!(dropout(&x, 0.7, false, &mut rng).unwrap().0, x);
    }

    #[test]
    fn rate_one_is_rejected() {
        let x = Tensor::from_vec(vec![1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(dropout(&x, 1.0, true, &mut rng), Err(Error::Config(_))));
        assert!(DropoutLayer::new(1.5).is_err());
    }

    #[test]
    fn seeded_mask_is_reproducible_with_expected_fraction() {
        let x = Tensor::from_vec(vec![1.0; 10_000]);
        let (a, _) = dropout(&x, 0.5, true, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let (b, _) = dropout(&x, 0.5, true, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        let dropped = a.values().iter().filter(|&&v| v == 0.0).count() as f64 / 1e4;
        assert!((dropped - 0.5).abs() <= 0.02, "dropped fraction {dropped}");
        assert!(a.values().iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn frozen_layer_reuses_mask() {
        let mut layer = DropoutLayer::new(0.5).unwrap();
        layer.set_frozen(true);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor::from_vec(vec![1.0; 64]);
        let a = layer.forward(&x, Some(&mut rng)).unwrap();
        let b = layer.forward(&x, Some(&mut rng)).unwrap();
        assert_eq!(a, b);
        let g = layer.backward(&x).unwrap();
        assert_eq!(g, a);
    }
}
