use serde::{Deserialize, Serialize};

use super::Network;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// Moment estimates carried between steps; serialized with checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    state: AdamState,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            state: AdamState {
                config,
                step: 0,
                first_moment: Vec::new(),
                second_moment: Vec::new(),
            },
        })
    }

    pub fn from_state(state: AdamState) -> Result<Self> {
        state.config.validate()?;
        if state.first_moment.len() != state.second_moment.len() {
            return Err(Error::Checkpoint("moment arrays differ in length".into()));
        }
        Ok(Self { state })
    }

    pub fn state(&self) -> &AdamState {
        &self.state
    }

    /// Applies one update from the gradients accumulated by the last
    /// backward pass, then clears them.
    pub fn step(&mut self, net: &mut Network) -> Result<()> {
        let mut params = net.params_mut();
        if params.iter().any(|p| p.grad().is_none()) {
            return Err(Error::State("optimizer step requested before backward".into()));
        }
        let s = &mut self.state;
        if s.first_moment.is_empty() {
            s.first_moment = params.iter().map(|p| vec![0.0; p.len()]).collect();
            s.second_moment = s.first_moment.clone();
        }
        if s.first_moment.len() != params.len()
            || s.first_moment.iter().zip(&params).any(|(m, p)| m.len() != p.len())
        {
            return Err(Error::State("optimizer state does not match network".into()));
        }
        s.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = s.config;
        let t = s.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for ((p, m), v) in params.iter_mut().zip(&mut s.first_moment).zip(&mut s.second_moment) {
            let (values, grad) = p.values_and_grad_mut();
            let grad = grad.expect("checked above");
            for (((w, g), m), v) in values.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
            p.clear_grad();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerSpec, Tensor};

    fn scalar_net(w: f64) -> Network {
        let specs = [LayerSpec::Dense {
            out_dim: 1,
            activation: Activation::Identity,
        }];
        let mut net = Network::build(&[1], &specs, 0).unwrap();
        net.load_weights(&[vec![w], vec![0.0]]).unwrap();
        net
    }

    #[test]
    fn step_before_backward_fails() {
        let mut net = scalar_net(1.0);
        let mut adam = Adam::new(AdamConfig::default()).unwrap();
        assert!(matches!(adam.step(&mut net), Err(Error::State(_))));
    }

    #[test]
    fn zero_gradient_leaves_weights() {
        let mut net = scalar_net(0.3);
        let mut adam = Adam::new(AdamConfig::default()).unwrap();
        for p in net.params_mut() {
            let n = p.len();
            p.accumulate_grad(&vec![0.0; n]);
        }
        adam.step(&mut net).unwrap();
        assert_eq!(net.weights(), vec![vec![0.3], vec![0.0]]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut net = scalar_net(0.5);
        let cfg = AdamConfig::default();
        let mut adam = Adam::new(cfg).unwrap();
        for p in net.params_mut() {
            p.accumulate_grad(&[1.0]);
        }
        adam.step(&mut net).unwrap();
        // m_hat = v_hat = 1 at t = 1, so the step is lr / (1 + eps).
        let moved = net.weights()[0][0] - 0.5;
        assert!((moved + cfg.learning_rate / (1.0 + cfg.epsilon)).abs() < 1e-15);
    }

    #[test]
    fn runs_are_bit_identical() {
        let run = || {
            let mut net = scalar_net(0.1);
            let mut adam = Adam::new(AdamConfig::default()).unwrap();
            let x = Tensor::from_vec(vec![2.0]);
            for _ in 0..50 {
                let y = net.forward(&x, None).unwrap();
                let (_, g) = crate::nn::rmse_loss(&y, &Tensor::from_vec(vec![1.0])).unwrap();
                net.backward(&g).unwrap();
                adam.step(&mut net).unwrap();
            }
            net.weights()
        };
        let a = run();
        let b = run();
        assert_eq!(
            a.concat().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.concat().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}
