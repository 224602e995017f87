use super::{Activation, Tensor};
use crate::error::{Error, Result};

fn dense_pass(input: &Tensor, weights: &Tensor, bias: &Tensor, act: Activation) -> Result<(Vec<f64>, Tensor)> {
    let (n, m) = match *weights.shape() {
        [n, m] => (n, m),
        ref s => return Err(Error::Shape(format!("dense weights must be 2-D, got {s:?}"))),
    };
    if input.len() != n || bias.len() != m {
        return Err(Error::Dimension(format!(
            "dense layer {n}->{m} got input of {} and bias of {}",
            input.len(),
            bias.len()
        )));
    }
    let mut z = bias.values().to_vec();
    for (&xi, row) in input.values().iter().zip(weights.values().chunks_exact(m)) {
        if xi != 0.0 {
            z.iter_mut().zip(row).for_each(|(zj, wij)| *zj += xi * wij);
        }
    }
    let out = Tensor::from_vec(z.iter().map(|&v| act.apply(v)).collect());
    Ok((z, out))
}

/// `act(W^T x + b)` for a flat input of length `n` and `n x m` weights.
pub fn dense_forward(input: &Tensor, weights: &Tensor, bias: &Tensor, act: Activation) -> Result<Tensor> {
    dense_pass(input, weights, bias, act).map(|(_, y)| y)
}

#[derive(Debug, Clone)]
pub struct DenseGradients {
    pub input: Option<Tensor>,
    pub weights: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub weights: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
    cache: Option<(Vec<f64>, Vec<f64>)>,
}

impl DenseLayer {
    pub fn new(weights: Tensor, bias: Tensor, activation: Activation) -> Self {
        Self {
            weights,
            bias,
            activation,
            cache: None,
        }
    }

    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let (z, out) = dense_pass(input, &self.weights, &self.bias, self.activation)?;
        self.cache = Some((input.values().to_vec(), z));
        Ok(out)
    }

    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        dense_forward(input, &self.weights, &self.bias, self.activation)
    }

    pub(crate) fn cached_pre_activation(&self) -> Option<&[f64]> {
        self.cache.as_ref().map(|(_, z)| z.as_slice())
    }

    pub fn backward(&self, upstream: &Tensor, need_input: bool) -> Result<DenseGradients> {
        let (x, z) = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("dense backward called before forward".into()))?;
        let (n, m) = (x.len(), z.len());
        if upstream.len() != m {
            return Err(Error::Dimension(format!(
                "upstream gradient has {} values for {m} outputs",
                upstream.len()
            )));
        }
        let dz: Vec<f64> = upstream
            .values()
            .iter()
            .zip(z)
            .map(|(u, &z)| u * self.activation.derivative(z))
            .collect();
        let mut wg = Vec::with_capacity(n * m);
        for &xi in x {
            wg.extend(dz.iter().map(|d| xi * d));
        }
        let input = if need_input {
            let dx = self
                .weights
                .values()
                .chunks_exact(m)
                .map(|row| row.iter().zip(&dz).map(|(w, d)| w * d).sum())
                .collect();
            Some(Tensor::from_vec(dx))
        } else {
            None
        };
        Ok(DenseGradients {
            input,
            weights: Tensor::new(vec![n, m], wg)?,
            bias: Tensor::from_vec(dz),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn identity_weights() {
        let mut eye = vec![0.0; 16];
        (0..4).for_each(|i| eye[i * 5] = 1.0);
        let w = Tensor::new(vec![4, 4], eye).unwrap();
        let x = Tensor::from_vec(vec![0.5, -1.0, 2.0, 3.5]);
        let y = dense_forward(&x, &w, &Tensor::zeros(vec![4]), Activation::Identity).unwrap();
        assert_eq!(y.values(), x.values());
    }

    #[test]
    fn sigmoid_output_layer_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = Tensor::new(vec![128, 30], (0..3840).map(|_| rng.gen_range(-3.0..3.0)).collect()).unwrap();
        let x = random(vec![128], &mut rng);
        let y = dense_forward(&x, &w, &random(vec![30], &mut rng), Activation::Sigmoid).unwrap();
        assert_eq!(y.len(), 30);
        assert!(y.values().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn dimension_mismatch() {
        let w = Tensor::zeros(vec![3, 2]);
        let r = dense_forward(&Tensor::zeros(vec![4]), &w, &Tensor::zeros(vec![2]), Activation::Identity);
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let eps = 1e-5;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random(vec![6], &mut rng);
            let w = random(vec![6, 4], &mut rng);
            let b = random(vec![4], &mut rng);
            let up = random(vec![4], &mut rng);
            let act = Activation::Sigmoid;
            let loss = |x: &Tensor, w: &Tensor, b: &Tensor| -> f64 {
                let y = dense_forward(x, w, b, act).unwrap();
                y.values().iter().zip(up.values()).map(|(a, b)| a * b).sum()
            };
            let mut layer = DenseLayer::new(w.clone(), b.clone(), act);
            layer.forward(&x).unwrap();
            let g = layer.backward(&up, true).unwrap();
            for (t, grad) in [(0, g.input.as_ref().unwrap()), (1, &g.weights), (2, &g.bias)] {
                for i in 0..grad.len() {
                    let mut args = [x.clone(), w.clone(), b.clone()];
                    args[t].values_mut()[i] += eps;
                    let lp = loss(&args[0], &args[1], &args[2]);
                    args[t].values_mut()[i] -= 2.0 * eps;
                    let lm = loss(&args[0], &args[1], &args[2]);
                    let fd = (lp - lm) / (2.0 * eps);
                    assert!(rel(grad.values()[i], fd) < 1e-4, "seed {seed} tensor {t} index {i}");
                }
            }
        }
    }
}
