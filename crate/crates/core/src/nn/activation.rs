use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ELU_ALPHA: f64 = 1.0;
pub const DEFAULT_LEAKY_ALPHA: f64 = 0.01;

/// Elementwise nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Elu { alpha: f64 },
    LeakyRelu { alpha: f64 },
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn elu() -> Self {
        Activation::Elu {
            alpha: DEFAULT_ELU_ALPHA,
        }
    }

    pub fn leaky_relu() -> Self {
        Activation::LeakyRelu {
            alpha: DEFAULT_LEAKY_ALPHA,
        }
    }

    /// Parses `relu`, `elu`, `leaky_relu`, `sigmoid` or `identity` with
    /// default slopes.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "relu" => Ok(Activation::Relu),
            "elu" => Ok(Activation::elu()),
            "leaky_relu" => Ok(Activation::leaky_relu()),
            "sigmoid" => Ok(Activation::Sigmoid),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Elu { .. } => "elu",
            Activation::LeakyRelu { .. } => "leaky_relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Activation::Elu { alpha } | Activation::LeakyRelu { alpha } if alpha.is_nan() || alpha <= 0.0 => Err(
                Error::Config(format!("{} slope must be positive, got {alpha}", self.name())),
            ),
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Activation::Relu => {
                if x < 0.0 {
                    0.0
                } else {
                    x
                }
            }
            Activation::Elu { alpha } => {
                if x < 0.0 {
                    alpha * x.exp_m1()
                } else {
                    x
                }
            }
            Activation::LeakyRelu { alpha } => {
                if x < 0.0 {
                    alpha * x
                } else {
                    x
                }
            }
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative with respect to the pre-activation `x`. At `x = 0` the
    /// right-hand branch is used.
    #[inline]
    /// Whether the derivative jumps at zero.
    pub fn has_kink(&self) -> bool {
        match *self {
            Activation::Relu | Activation::LeakyRelu { .. } => true,
            Activation::Elu { alpha } => alpha != 1.0,
            Activation::Sigmoid | Activation::Identity => false,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Activation::Relu => {
                if x < 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
            Activation::Elu { alpha } => {
                if x < 0.0 {
                    alpha * x.exp()
                } else {
                    1.0
                }
            }
            Activation::LeakyRelu { alpha } => {
                if x < 0.0 {
                    alpha
                } else {
                    1.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_values() {
        assert_eq!(Activation::Relu.apply(-1.0), 0.0);
        assert_eq!(Activation::Relu.apply(2.0), 2.0);
        for alpha in [0.1, 1.0, 3.0] {
            assert_eq!(Activation::Elu { alpha }.apply(0.0), 0.0);
        }
        let elu = Activation::elu().apply(-1.0);
        assert!((elu - ((-1f64).exp() - 1.0)).abs() < 1e-15);
        assert!((elu + 0.63212).abs() < 1e-5);
        assert!((Activation::leaky_relu().apply(-2.0) + 0.02).abs() < 1e-15);
    }

    #[test]
    fn continuity_at_zero() {
        let h = 1e-12;
        for act in [Activation::Relu, Activation::elu(), Activation::leaky_relu()] {
            assert!((act.apply(-h) - act.apply(h)).abs() < 1e-11, "{act:?}");
        }
        let elu = Activation::elu();
        assert!((elu.derivative(-h) - elu.derivative(0.0)).abs() < 1e-11);
    }

    #[test]
    fn rejects_non_positive_slope() {
        assert!(Activation::Elu { alpha: 0.0 }.validate().is_err());
        assert!(Activation::LeakyRelu { alpha: -1.0 }.validate().is_err());
        assert!(Activation::elu().validate().is_ok());
    }

    #[test]
    fn names_round_trip() {
        for name in ["relu", "elu", "leaky_relu", "sigmoid", "identity"] {
            assert_eq!(Activation::from_name(name).unwrap().name(), name);
        }
        assert!(Activation::from_name("tanh").is_err());
    }

    proptest! {
        #[test]
        fn sigmoid_strictly_inside_unit_interval(x in -30.0f64..30.0) {
            let y = Activation::Sigmoid.apply(x);
            prop_assert!(y > 0.0 && y < 1.0);
        }

        #[test]
        fn derivative_matches_central_difference(x in prop_oneof![-5.0f64..-0.01, 0.01f64..5.0]) {
            let h = 1e-6;
            for act in [Activation::Relu, Activation::elu(), Activation::leaky_relu(), Activation::Sigmoid, Activation::Identity] {
                let fd = (act.apply(x + h) - act.apply(x - h)) / (2.0 * h);
                prop_assert!((fd - act.derivative(x)).abs() < 1e-7, "{:?} at {}", act, x);
            }
        }
    }
}
