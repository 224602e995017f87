use super::conv::output_size;
use super::Tensor;
use crate::error::{Error, Result};

/// Max pooling over `size x size` windows of each channel.
///
/// Returns the pooled tensor and, for every output element, the flat input
/// index that supplied its maximum. Ties go to the first maximal element in
/// row-major order.
pub fn maxpool_forward(input: &Tensor, size: usize, stride: usize) -> Result<(Tensor, Vec<usize>)> {
    let (h, w, c) = match *input.shape() {
        [h, w, c] => (h, w, c),
        ref s => return Err(Error::Shape(format!("pooling expects H x W x C, got {s:?}"))),
    };
    let oh = output_size(h, size, stride)?;
    let ow = output_size(w, size, stride)?;
    let x = input.values();
    let mut out = Vec::with_capacity(oh * ow * c);
    let mut argmax = Vec::with_capacity(oh * ow * c);
    for i in 0..oh {
        for j in 0..ow {
            for ch in 0..c {
                let mut best_idx = ((i * stride) * w + j * stride) * c + ch;
                let mut best = x[best_idx];
                for a in 0..size {
                    for b in 0..size {
                        let idx = ((i * stride + a) * w + j * stride + b) * c + ch;
                        if x[idx] > best {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                out.push(best);
                argmax.push(best_idx);
            }
        }
    }
    Ok((Tensor::new(vec![oh, ow, c], out)?, argmax))
}

/// Routes each upstream value to its argmax; overlapping windows accumulate.
pub fn maxpool_backward(upstream: &Tensor, argmax: &[usize], input_shape: &[usize]) -> Result<Tensor> {
    if upstream.len() != argmax.len() {
        return Err(Error::Shape(format!(
            "upstream has {} values, cache has {}",
            upstream.len(),
            argmax.len()
        )));
    }
    let mut grad = vec![0.0; input_shape.iter().product()];
    for (&idx, &g) in argmax.iter().zip(upstream.values()) {
        grad[idx] += g;
    }
    Tensor::new(input_shape.to_vec(), grad)
}

#[derive(Debug, Clone)]
pub struct MaxPoolLayer {
    pub size: usize,
    pub stride: usize,
    cache: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPoolLayer {
    pub fn new(size: usize, stride: usize) -> Self {
        Self {
            size,
            stride,
            cache: None,
        }
    }

    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let (out, argmax) = maxpool_forward(input, self.size, self.stride)?;
        self.cache = Some((input.shape().to_vec(), argmax));
        Ok(out)
    }

    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        maxpool_forward(input, self.size, self.stride).map(|(t, _)| t)
    }

    pub(crate) fn cached_argmax(&self) -> Option<&[usize]> {
        self.cache.as_ref().map(|(_, a)| a.as_slice())
    }

    pub fn backward(&self, upstream: &Tensor) -> Result<Tensor> {
        let (shape, argmax) = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("pool backward called before forward".into()))?;
        maxpool_backward(upstream, argmax, shape)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_two_pool_size() {
        let (out, _) = maxpool_forward(&Tensor::zeros(vec![14, 14, 32]), 2, 1).unwrap();
        assert_eq!(out.shape(), &[13, 13, 32]);
    }

    #[test]
    fn constant_and_maximum() {
        let (out, _) = maxpool_forward(&Tensor::new(vec![3, 3, 1], vec![2.5; 9]).unwrap(), 2, 1).unwrap();
        assert_eq!(out.values(), &[2.5; 4]);
        let x = Tensor::new(vec![2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (out, argmax) = maxpool_forward(&x, 2, 1).unwrap();
        assert_eq!(out.values(), &[4.0]);
        assert_eq!(argmax, vec![3]);
    }

    #[test]
    fn distinct_maxima_route_only_to_argmax() {
        let mut layer = MaxPoolLayer::new(2, 2);
        let x = Tensor::new(vec![2, 4, 1], vec![1.0, 5.0, 0.0, -1.0, 2.0, 3.0, 7.0, 6.0]).unwrap();
        layer.forward(&x).unwrap();
        let g = layer.backward(&Tensor::new(vec![1, 2, 1], vec![10.0, 20.0]).unwrap()).unwrap();
        assert_eq!(g.values(), &[0.0, 10.0, 0.0, 0.0, 0.0, 0.0, 20.0, 0.0]);
    }

    #[test]
    fn ties_go_to_first_index() {
        let mut layer = MaxPoolLayer::new(2, 1);
        layer.forward(&Tensor::new(vec![2, 2, 1], vec![1.0, 1.0, 0.0, 0.0]).unwrap()).unwrap();
        let g = layer.backward(&Tensor::new(vec![1, 1, 1], vec![1.0]).unwrap()).unwrap();
        assert_eq!(g.values(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn backward_without_forward() {
        let layer = MaxPoolLayer::new(2, 1);
        assert!(matches!(layer.backward(&Tensor::zeros(vec![1, 1, 1])), Err(Error::State(_))));
    }

    /// Overlapping windows: finite differences of sum(up * pool(x)).
    #[test]
    fn overlapping_gradients_accumulate() {
        let x = Tensor::new(
            vec![3, 3, 1],
            vec![0.1, 0.9, 0.2, 0.3, 0.8, 0.4, 0.5, 0.6, 0.7],
        )
        .unwrap();
        let up = Tensor::new(vec![2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut layer = MaxPoolLayer::new(2, 1);
        layer.forward(&x).unwrap();
        let g = layer.backward(&up).unwrap();
        let eps = 1e-6;
        let loss = |x: &Tensor| -> f64 {
            let (y, _) = maxpool_forward(x, 2, 1).unwrap();
            y.values().iter().zip(up.values()).map(|(a, b)| a * b).sum()
        };
        for i in 0..9 {
            let (mut p, mut m) = (x.clone(), x.clone());
            p.values_mut()[i] += eps;
            m.values_mut()[i] -= eps;
            let fd = (loss(&p) - loss(&m)) / (2.0 * eps);
            assert!((fd - g.values()[i]).abs() < 1e-6, "index {i}: {fd} vs {}", g.values()[i]);
        }
        // 0.9 wins both top windows, 0.8 both bottom ones.
        assert_eq!(g.values()[1], 3.0);
        assert_eq!(g.values()[4], 7.0);
    }
}
