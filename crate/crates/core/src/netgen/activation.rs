use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Elementwise nonlinearity with closed-form first and second derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    /// `x` for `x > 0`, `slope·x` otherwise. Not twice differentiable at 0.
    LeakyRelu { slope: f64 },
    Sigmoid,
    /// `ln(1 + e^{βx}) / β`.
    Softplus { sharpness: f64 },
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn leaky_relu(slope: f64) -> Self {
        Activation::LeakyRelu { slope }
    }

    pub fn softplus(sharpness: f64) -> Self {
        Activation::Softplus { sharpness }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Activation::LeakyRelu { slope } if !(slope > 0.0 && slope < 1.0) => {
                Err(Error::arg(format!("leaky relu slope must lie in (0,1), got {slope}")))
            }
            Activation::Softplus { sharpness } if !(sharpness > 0.0 && sharpness.is_finite()) => {
                Err(Error::arg(format!("softplus sharpness must be positive, got {sharpness}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::LeakyRelu { .. } => "leaky_relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Softplus { .. } => "softplus",
        }
    }

    /// Whether the activation is twice continuously differentiable.
    pub fn is_smooth(&self) -> bool {
        !matches!(self, Activation::LeakyRelu { .. })
    }

    pub fn require_smooth(&self) -> Result<()> {
        if self.is_smooth() {
            Ok(())
        } else {
            Err(Error::SmoothnessRequired(self.name().to_string()))
        }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Activation::LeakyRelu { slope } => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Sigmoid => logistic(x),
            Activation::Softplus { sharpness } => {
                let t = sharpness * x;
                let sp = if t > 0.0 { t + (-t).exp().ln_1p() } else { t.exp().ln_1p() };
                sp / sharpness
            }
        }
    }

    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        match *self {
            Activation::LeakyRelu { slope } => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Sigmoid => {
                let s = logistic(x);
                s * (1.0 - s)
            }
            Activation::Softplus { sharpness } => logistic(sharpness * x),
        }
    }

    #[inline]
    pub fn deriv2(&self, x: f64) -> f64 {
        match *self {
            Activation::LeakyRelu { .. } => 0.0,
            Activation::Sigmoid => {
                let s = logistic(x);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
            Activation::Softplus { sharpness } => {
                let s = logistic(sharpness * x);
                sharpness * s * (1.0 - s)
            }
        }
    }

    /// `sup |σ′|`.
    pub fn deriv_bound(&self) -> f64 {
        match *self {
            Activation::LeakyRelu { .. } | Activation::Softplus { .. } => 1.0,
            Activation::Sigmoid => 0.25,
        }
    }

    /// `sup |σ″|` (zero for the piecewise-linear kind, where σ″ is a
    /// distribution at the kink).
    pub fn deriv2_bound(&self) -> f64 {
        match *self {
            Activation::LeakyRelu { .. } => 0.0,
            // attained where σ(x) = 1/2 ± 1/(2√3)
            Activation::Sigmoid => 1.0 / (6.0 * 3f64.sqrt()),
            Activation::Softplus { sharpness } => sharpness / 4.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KINDS: [Activation; 4] = [
        Activation::LeakyRelu { slope: 0.1 },
        Activation::Sigmoid,
        Activation::Softplus { sharpness: 1.0 },
        Activation::Softplus { sharpness: 3.0 },
    ];

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
    }

    fn grid() -> impl Iterator<Item = f64> {
        (0..=4000).map(|i| -10.0 + i as f64 * 0.005)
    }

    #[test]
    fn first_derivative_matches_central_difference() {
        let h = 1e-6;
        for act in KINDS {
            for x in grid() {
                if !act.is_smooth() && x.abs() <= 1e-3 {
                    continue;
                }
                let fd = (act.value(x + h) - act.value(x - h)) / (2.0 * h);
                let d = act.deriv(x);
                // the difference quotient carries rounding error of order u·|σ(x)|/h
                let noise = 1e-9 * act.value(x).abs().max(1.0);
                assert!(rel_err(d, fd) < 1e-6 || (d - fd).abs() < noise, "{act:?} x={x} d={d} fd={fd}");
            }
        }
    }

    #[test]
    fn second_derivative_matches_central_difference() {
        let h = 1e-5;
        for act in KINDS.iter().filter(|a| a.is_smooth()) {
            for x in grid() {
                let fd = (act.deriv(x + h) - act.deriv(x - h)) / (2.0 * h);
                let d2 = act.deriv2(x);
                assert!(rel_err(d2, fd) < 1e-5 || (d2 - fd).abs() < 1e-10, "{act:?} x={x} d2={d2} fd={fd}");
            }
        }
    }

    #[test]
    fn bounds_dominate_on_grid() {
        for act in KINDS {
            let (b1, b2) = (act.deriv_bound(), act.deriv2_bound());
            for x in grid() {
                assert!(act.deriv(x).abs() <= b1 + 1e-15);
                assert!(act.deriv2(x).abs() <= b2 + 1e-15);
            }
        }
        let s = Activation::Sigmoid;
        let peak = (0..200_000).map(|i| s.deriv2(-5.0 + i as f64 * 5e-5).abs()).fold(0.0, f64::max);
        assert!((peak - s.deriv2_bound()).abs() < 1e-9);
    }

    #[test]
    fn smoothness_flags() {
        assert!(!Activation::leaky_relu(0.1).is_smooth());
        assert!(Activation::Sigmoid.is_smooth());
        assert!(Activation::softplus(1.0).is_smooth());
        assert!(matches!(
            Activation::leaky_relu(0.1).require_smooth(),
            Err(Error::SmoothnessRequired(_))
        ));
    }

    #[test]
    fn parameter_validation() {
        assert!(Activation::leaky_relu(0.0).validate().is_err());
        assert!(Activation::leaky_relu(1.0).validate().is_err());
        assert!(Activation::softplus(-1.0).validate().is_err());
        assert!(Activation::softplus(2.0).validate().is_ok());
    }

    #[test]
    fn serde_tagging() {
        let json = serde_json::to_string(&Activation::leaky_relu(0.1)).unwrap();
        assert_eq!(json, r#"{"kind":"leaky_relu","slope":0.1}"#);
        let back: Activation = serde_json::from_str(r#"{"kind":"sigmoid"}"#).unwrap();
        assert_eq!(back, Activation::Sigmoid);
    }
}
