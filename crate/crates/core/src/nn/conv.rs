use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};

use super::{Activation, Tensor};
use crate::error::{Error, Result};

/// Output extent of a valid (unpadded) sliding operation: `(I - K) / S + 1`.
///
/// Fails unless the division is exact and the kernel fits.
pub fn output_size(input: usize, kernel: usize, stride: usize) -> Result<usize> {
    if kernel == 0 || stride == 0 {
        return Err(Error::Shape(format!(
            "kernel ({kernel}) and stride ({stride}) must be positive"
        )));
    }
    if kernel > input {
        return Err(Error::Shape(format!("kernel {kernel} exceeds input extent {input}")));
    }
    if !(input - kernel).is_multiple_of(stride) {
        return Err(Error::Shape(format!(
            "({input} - {kernel}) / {stride} is not an integer"
        )));
    }
    Ok((input - kernel) / stride + 1)
}

fn spatial(shape: &[usize]) -> Result<(usize, usize, usize)> {
    match *shape {
        [h, w, c] => Ok((h, w, c)),
        _ => Err(Error::Shape(format!("expected H x W x C tensor, got {shape:?}"))),
    }
}

struct Geometry {
    in_h: usize,
    in_w: usize,
    in_c: usize,
    k: usize,
    filters: usize,
    stride: usize,
    out_h: usize,
    out_w: usize,
}

impl Geometry {
    fn new(input: &[usize], kernels: &[usize], stride: usize) -> Result<Self> {
        let (in_h, in_w, in_c) = spatial(input)?;
        let (k, filters) = match *kernels {
            [k1, k2, c, f] if k1 == k2 && c == in_c => (k1, f),
            _ => {
                return Err(Error::Shape(format!(
                    "kernels {kernels:?} incompatible with input {input:?}"
                )))
            }
        };
        Ok(Self {
            in_h,
            in_w,
            in_c,
            k,
            filters,
            stride,
            out_h: output_size(in_h, k, stride)?,
            out_w: output_size(in_w, k, stride)?,
        })
    }

    fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    fn patch_len(&self) -> usize {
        self.k * self.k * self.in_c
    }
}

/// Gathers every receptive field into one row of a
/// `positions x (k * k * in_c)` matrix.
fn im2col(input: &[f64], g: &Geometry) -> Vec<f64> {
    let row_len = g.k * g.in_c;
    let mut patches = Vec::with_capacity(g.positions() * g.patch_len());
    for oh in 0..g.out_h {
        for ow in 0..g.out_w {
            for kh in 0..g.k {
                let start = ((oh * g.stride + kh) * g.in_w + ow * g.stride) * g.in_c;
                patches.extend_from_slice(&input[start..start + row_len]);
            }
        }
    }
    patches
}

fn col2im(cols: &[f64], g: &Geometry) -> Vec<f64> {
    let row_len = g.k * g.in_c;
    let mut out = vec![0.0; g.in_h * g.in_w * g.in_c];
    let mut src = cols.chunks_exact(row_len);
    for oh in 0..g.out_h {
        for ow in 0..g.out_w {
            for kh in 0..g.k {
                let start = ((oh * g.stride + kh) * g.in_w + ow * g.stride) * g.in_c;
                let chunk = src.next().expect("column buffer matches geometry");
                out[start..start + row_len]
                    .iter_mut()
                    .zip(chunk)
                    .for_each(|(o, c)| *o += c);
            }
        }
    }
    out
}

fn matmul(a: ArrayView2<f64>, b: ArrayView2<f64>, out: &mut [f64]) {
    let mut c = ArrayViewMut2::from_shape((a.nrows(), b.ncols()), out).expect("output sized");
    general_mat_mul(1.0, &a, &b, 0.0, &mut c);
}

struct ConvPass {
    patches: Vec<f64>,
    pre_activation: Vec<f64>,
    output: Tensor,
}

fn conv_pass(
    input: &Tensor,
    kernels: &Tensor,
    bias: &Tensor,
    stride: usize,
    act: Activation,
) -> Result<ConvPass> {
    let g = Geometry::new(input.shape(), kernels.shape(), stride)?;
    if bias.len() != g.filters {
        return Err(Error::Shape(format!(
            "bias has {} entries for {} filters",
            bias.len(),
            g.filters
        )));
    }
    let patches = im2col(input.values(), &g);
    let p = ArrayView2::from_shape((g.positions(), g.patch_len()), &patches).expect("im2col");
    let w = ArrayView2::from_shape((g.patch_len(), g.filters), kernels.values()).expect("kernels");
    let mut z = vec![0.0; g.positions() * g.filters];
    matmul(p, w, &mut z);
    for row in z.chunks_exact_mut(g.filters) {
        row.iter_mut().zip(bias.values()).for_each(|(z, b)| *z += b);
    }
    let out: Vec<f64> = z.iter().map(|&v| act.apply(v)).collect();
    let output = Tensor::new(vec![g.out_h, g.out_w, g.filters], out)?;
    Ok(ConvPass {
        patches,
        pre_activation: z,
        output,
    })
}

/// Valid 2-D convolution of an `H x W x C_in` input with `K x K x C_in x F`
/// kernels, followed by the activation.
pub fn conv_forward(
    input: &Tensor,
    kernels: &Tensor,
    bias: &Tensor,
    stride: usize,
    act: Activation,
) -> Result<Tensor> {
    conv_pass(input, kernels, bias, stride, act).map(|p| p.output)
}

/// Gradients produced by one convolution backward pass.
#[derive(Debug, Clone)]
pub struct ConvGradients {
    pub input: Option<Tensor>,
    pub kernels: Tensor,
    pub bias: Tensor,
}

#[derive(Clone)]
struct ConvCache {
    input_shape: Vec<usize>,
    patches: Vec<f64>,
    pre_activation: Vec<f64>,
}

/// Convolution layer with its parameters and forward cache.
#[derive(Debug, Clone)]
pub struct ConvLayer {
    pub kernels: Tensor,
    pub bias: Tensor,
    pub stride: usize,
    pub activation: Activation,
    cache: Option<ConvCache>,
}

impl std::fmt::Debug for ConvCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ConvCache({:?})", self.input_shape)
    }
}

impl ConvLayer {
    pub fn new(kernels: Tensor, bias: Tensor, stride: usize, activation: Activation) -> Self {
        Self {
            kernels,
            bias,
            stride,
            activation,
            cache: None,
        }
    }

    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        let pass = conv_pass(input, &self.kernels, &self.bias, self.stride, self.activation)?;
        self.cache = Some(ConvCache {
            input_shape: input.shape().to_vec(),
            patches: pass.patches,
            pre_activation: pass.pre_activation,
        });
        Ok(pass.output)
    }

    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        conv_forward(input, &self.kernels, &self.bias, self.stride, self.activation)
    }

    pub(crate) fn cached_pre_activation(&self) -> Option<&[f64]> {
        self.cache.as_ref().map(|c| c.pre_activation.as_slice())
    }

    /// Backpropagates `upstream` through the cached forward pass. The input
    /// gradient is skipped when `need_input` is false.
    pub fn backward(&self, upstream: &Tensor, need_input: bool) -> Result<ConvGradients> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("conv backward called before forward".into()))?;
        let g = Geometry::new(&cache.input_shape, self.kernels.shape(), self.stride)?;
        if upstream.shape() != [g.out_h, g.out_w, g.filters] {
            return Err(Error::Shape(format!(
                "upstream gradient {:?} does not match output {:?}",
                upstream.shape(),
                [g.out_h, g.out_w, g.filters]
            )));
        }
        let dz: Vec<f64> = upstream
            .values()
            .iter()
            .zip(&cache.pre_activation)
            .map(|(u, &z)| u * self.activation.derivative(z))
            .collect();
        let dz_view = ArrayView2::from_shape((g.positions(), g.filters), &dz).expect("dz");
        let p = ArrayView2::from_shape((g.positions(), g.patch_len()), &cache.patches).expect("p");

        let mut kernel_grad = vec![0.0; g.patch_len() * g.filters];
        matmul(p.t(), dz_view, &mut kernel_grad);

        let mut bias_grad = vec![0.0; g.filters];
        for row in dz.chunks_exact(g.filters) {
            bias_grad.iter_mut().zip(row).for_each(|(b, d)| *b += d);
        }

        let input = if need_input {
            let w = ArrayView2::from_shape((g.patch_len(), g.filters), self.kernels.values())
                .expect("kernels");
            let mut cols = vec![0.0; g.positions() * g.patch_len()];
            matmul(dz_view, w.t(), &mut cols);
            Some(Tensor::new(cache.input_shape.clone(), col2im(&cols, &g))?)
        } else {
            None
        };

        Ok(ConvGradients {
            input,
            kernels: Tensor::new(self.kernels.shape().to_vec(), kernel_grad)?,
            bias: Tensor::new(vec![g.filters], bias_grad)?,
        })
    }
}
