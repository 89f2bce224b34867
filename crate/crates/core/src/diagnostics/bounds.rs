use serde::{Deserialize, Serialize};

use crate::linalg::spectral_norm;
use crate::{AttackDictionary, Error, GeneratorNetwork, Result};

/// Constants entering the closed-form curvature bounds of a single-layer
/// problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessConstants {
    /// `‖W‖₂`.
    pub c_w: f64,
    /// `Σ_j ‖W[j]‖₂²` over rows.
    pub v_w: f64,
    /// `sup |σ′|`.
    pub b_sigma1: f64,
    /// `sup |σ″|`.
    pub b_sigma2: f64,
    /// Bound on `‖x′ − G(z) − D c‖₁` over the region of interest.
    pub c_0: f64,
    /// Largest singular value of `D`.
    pub c_d: f64,
    /// Smallest singular value of `D`.
    pub l_d: f64,
}

impl SmoothnessConstants {
    pub fn new(g: &GeneratorNetwork, dict: &AttackDictionary, c_0: f64) -> Result<Self> {
        if g.depth() != 1 {
            return Err(Error::Unsupported(format!(
                "closed-form curvature bounds need a single-layer generator, got depth {}",
                g.depth()
            )));
        }
        let act = g.activation();
        act.require_smooth()?;
        if !(c_0 >= 0.0 && c_0.is_finite()) {
            return Err(Error::arg(format!("C_0 must be finite and non-negative, got {c_0}")));
        }
        let w = &g.weights()[0];
        let (c_d, l_d) = if dict.is_empty() { (0.0, 0.0) } else { dict.spectrum_bounds()? };
        Ok(Self {
            c_w: spectral_norm(w),
            v_w: w.iter().map(|x| x * x).sum(),
            b_sigma1: act.deriv_bound(),
            b_sigma2: act.deriv2_bound(),
            c_0,
            c_d,
            l_d,
        })
    }

    /// `C_W²(B₁² + B₂√C₀) + C_W B₁ C_D + C_D²`.
    pub fn rho_bound(&self) -> f64 {
        let Self { c_w, b_sigma1: b1, b_sigma2: b2, c_0, c_d, .. } = *self;
        c_w * c_w * (b1 * b1 + b2 * c_0.sqrt()) + c_w * b1 * c_d + c_d * c_d
    }

    /// `V_W B₂ C₀ + C_W B₁ C_D − L_D²`, clamped at zero.
    pub fn eps_bound(&self) -> f64 {
        let Self { c_w, v_w, b_sigma1: b1, b_sigma2: b2, c_0, c_d, l_d } = *self;
        (v_w * b2 * c_0 + c_w * b1 * c_d - l_d * l_d).max(0.0)
    }
}

/// Closed-form `(ρ, ε)` bounds for a single-layer smooth generator with
/// residual ℓ1-norm at most `c_0`.
pub fn analytic_rho_eps(g: &GeneratorNetwork, dict: &AttackDictionary, c_0: f64) -> Result<(f64, f64)> {
    let k = SmoothnessConstants::new(g, dict, c_0)?;
    Ok((k.rho_bound(), k.eps_bound()))
}
