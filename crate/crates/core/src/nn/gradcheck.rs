use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{rmse_loss, Network, Tensor};
use crate::error::Result;

/// How dropout layers behave while gradients are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutHandling {
    /// Inference mode: dropout is the identity.
    Disabled,
    /// Training mode with one mask sampled up front and reused.
    FrozenMask,
    /// Training mode resampling the mask on every evaluation. The loss is
    /// then not a deterministic function of the weights and the check is
    /// expected to fail.
    Resample,
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Entries checked per weight tensor; tensors at or below this size are
    /// checked exhaustively.
    pub samples_per_tensor: usize,
    pub seed: u64,
    pub dropout: DropoutHandling,
    /// Discard and redraw entries whose `w - eps` or `w + eps` evaluation
    /// switches a pooling winner or crosses an activation kink. The central
    /// difference is not a valid reference there. Ignored under
    /// [`DropoutHandling::Resample`], where the pattern changes anyway.
    pub skip_kinks: bool,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            samples_per_tensor: 16,
            seed: 0,
            dropout: DropoutHandling::Disabled,
            skip_kinks: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerCheck {
    pub layer: usize,
    pub kind: &'static str,
    pub checked: usize,
    /// Entries discarded because the stencil straddled a kink.
    pub skipped: usize,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub layers: Vec<LayerCheck>,
}

impl GradCheckReport {
    pub fn checked(&self) -> usize {
        self.layers.iter().map(|l| l.checked).sum()
    }

    pub fn skipped(&self) -> usize {
        self.layers.iter().map(|l| l.skipped).sum()
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares backpropagated gradients of the RMSE loss against central
/// differences `(L(w + eps) - L(w - eps)) / (2 eps)` on sampled weights.
pub fn gradient_check(
    net: &mut Network,
    input: &Tensor,
    target: &Tensor,
    opts: GradCheckOptions,
) -> Result<GradCheckReport> {
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
    let training = opts.dropout != DropoutHandling::Disabled;
    net.set_dropout_frozen(opts.dropout == DropoutHandling::FrozenMask);
    let result = run(net, input, target, opts, training, &mut dropout_rng);
    net.set_dropout_frozen(false);
    net.clear_grads();
    result
}

fn run(
    net: &mut Network,
    input: &Tensor,
    target: &Tensor,
    opts: GradCheckOptions,
    training: bool,
    rng: &mut ChaCha8Rng,
) -> Result<GradCheckReport> {
    net.clear_grads();
    let pred = net.forward(input, training.then_some(&mut *rng))?;
    let (_, grad) = rmse_loss(&pred, target)?;
    net.backward(&grad)?;
    let analytic: Vec<Vec<f64>> = net
        .params()
        .iter()
        .map(|p| p.grad().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; p.len()]))
        .collect();
    let owners = net.param_layers();
    let kinds: Vec<&'static str> = net.specs().iter().map(|s| s.kind()).collect();

    let base_pattern = net.branch_pattern();
    let skip_kinks = opts.skip_kinks && opts.dropout != DropoutHandling::Resample;

    let mut pick = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut layers: Vec<LayerCheck> = Vec::new();
    for (pi, grads) in analytic.iter().enumerate() {
        let n = grads.len();
        let candidates: Vec<usize> = if n <= opts.samples_per_tensor {
            (0..n).collect()
        } else {
            sample(&mut pick, n, n).into_vec()
        };
        let (mut worst, mut checked, mut skipped) = (0.0f64, 0, 0);
        for &i in &candidates {
            if checked == opts.samples_per_tensor {
                break;
            }
            let original = net.params()[pi].values()[i];
            net.params_mut()[pi].values_mut()[i] = original + opts.eps;
            let plus = eval(net, input, target, training, rng)?;
            let crossed_up = skip_kinks && net.branch_pattern() != base_pattern;
            net.params_mut()[pi].values_mut()[i] = original - opts.eps;
            let minus = eval(net, input, target, training, rng)?;
            let crossed_down = skip_kinks && net.branch_pattern() != base_pattern;
            net.params_mut()[pi].values_mut()[i] = original;
            if crossed_up || crossed_down {
                skipped += 1;
                continue;
            }
            checked += 1;
            let numeric = (plus - minus) / (2.0 * opts.eps);
            let err = relative_error(grads[i], numeric);
            worst = if err.is_nan() { f64::INFINITY } else { worst.max(err) };
        }
        let layer = owners[pi];
        match layers.last_mut() {
            Some(l) if l.layer == layer => {
                l.checked += checked;
                l.skipped += skipped;
                l.max_relative_error = l.max_relative_error.max(worst);
            }
            _ => layers.push(LayerCheck {
                layer,
                kind: kinds[layer],
                checked,
                skipped,
                max_relative_error: worst,
            }),
        }
    }
    let max_relative_error = layers.iter().map(|l| l.max_relative_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        max_relative_error,
        layers,
    })
}

fn eval(net: &mut Network, input: &Tensor, target: &Tensor, training: bool, rng: &mut ChaCha8Rng) -> Result<f64> {
    let pred = net.forward(input, training.then_some(rng))?;
    Ok(rmse_loss(&pred, target)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerSpec};

    #[test]
    fn linear_single_layer_is_essentially_exact() {
        let specs = [
            LayerSpec::Flatten,
            LayerSpec::Dense {
                out_dim: 3,
                activation: Activation::Identity,
            },
        ];
        let mut net = Network::build(&[2, 2, 1], &specs, 3).unwrap();
        let x = Tensor::new(vec![2, 2, 1], vec![0.3, -0.2, 0.8, 0.5]).unwrap();
        let t = Tensor::from_vec(vec![0.1, 0.7, -0.4]);
        let report = gradient_check(&mut net, &x, &t, GradCheckOptions::default()).unwrap();
        assert!(report.max_relative_error < 1e-8, "{report:?}");
        assert_eq!(report.layers.len(), 1);
        assert_eq!(report.layers[0].checked, 15);
    }

    #[test]
    fn resampled_dropout_breaks_the_check() {
        let specs = [
            LayerSpec::Flatten,
            LayerSpec::Dense {
                out_dim: 8,
                activation: Activation::elu(),
            },
            LayerSpec::Dropout { rate: 0.5 },
            LayerSpec::Dense {
                out_dim: 2,
                activation: Activation::Sigmoid,
            },
        ];
        let x = Tensor::new(vec![2, 2, 1], vec![0.3, -0.2, 0.8, 0.5]).unwrap();
        let t = Tensor::from_vec(vec![0.1, 0.7]);
        let mut net = Network::build(&[2, 2, 1], &specs, 3).unwrap();
        let opts = GradCheckOptions {
            dropout: DropoutHandling::Resample,
            ..Default::default()
        };
        assert!(gradient_check(&mut net, &x, &t, opts).unwrap().max_relative_error > 1e-2);

        let frozen = GradCheckOptions {
            dropout: DropoutHandling::FrozenMask,
            ..Default::default()
        };
        assert!(gradient_check(&mut net, &x, &t, frozen).unwrap().max_relative_error < 1e-4);
    }

    /// Two pooling candidates `w0` and `w1` closer together than `eps`.
    fn near_tie_net() -> (Network, Tensor, Tensor) {
        let specs = [
            LayerSpec::Conv {
                kernel_size: 1,
                stride: 1,
                filters: 1,
                activation: Activation::Identity,
            },
            LayerSpec::MaxPool { size: 2, stride: 1 },
            LayerSpec::Flatten,
            LayerSpec::Dense {
                out_dim: 1,
                activation: Activation::Identity,
            },
        ];
        let mut net = Network::build(&[2, 2, 2], &specs, 0).unwrap();
        net.load_weights(&[vec![0.5 + 1e-7, 0.5], vec![0.0], vec![2.0], vec![0.0]]).unwrap();
        let x = Tensor::new(vec![2, 2, 2], vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        (net, x, Tensor::from_vec(vec![3.0]))
    }

    #[test]
    fn stencils_across_a_pooling_tie_are_skipped() {
        let (mut net, x, t) = near_tie_net();
        let naive = GradCheckOptions {
            skip_kinks: false,
            ..Default::default()
        };
        let report = gradient_check(&mut net, &x, &t, naive).unwrap();
        assert!(report.max_relative_error > 0.1, "{report:?}");
        assert_eq!(report.skipped(), 0);

        let report = gradient_check(&mut net, &x, &t, GradCheckOptions::default()).unwrap();
        assert!(report.max_relative_error < 1e-8, "{report:?}");
        assert_eq!(report.layers[0].skipped, 2);
        assert_eq!(report.layers[0].checked, 1);
    }
}
