use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `1 − 4η²μ²(3/4 − ηρ/2) + 4ηε`, unclamped.
pub fn theoretical_rate(eta: f64, mu: f64, rho: f64, eps: f64) -> f64 {
    1.0 - 4.0 * eta * eta * mu * mu * (0.75 - eta * rho / 2.0) + 4.0 * eta * eps
}

/// Admissible step sizes for the linear-rate guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StepWindow {
    /// `lo < η < hi`, with `hi` itself admissible when `hi_closed`.
    Feasible { lo: f64, hi: f64, hi_closed: bool },
    Infeasible { discriminant: f64 },
}

impl StepWindow {
    pub fn is_feasible(&self) -> bool {
        matches!(self, StepWindow::Feasible { .. })
    }

    pub fn contains(&self, eta: f64) -> bool {
        match *self {
            StepWindow::Feasible { lo, hi, hi_closed } => eta > lo && (eta < hi || (hi_closed && eta == hi)),
            StepWindow::Infeasible { .. } => false,
        }
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            StepWindow::Feasible { lo, hi, .. } => Some((lo, hi)),
            StepWindow::Infeasible { .. } => None,
        }
    }
}

/// Interval between the roots of `2ρμ²η² − 3μ²η + 4ε` (where the rate drops
/// below one), capped by `min(1/(4ε), 3/(2ρ))`.
///
/// Infeasible unless the discriminant `9μ⁴ − 32μ²ρε` is strictly positive.
pub fn step_window(mu: f64, rho: f64, eps: f64) -> Result<StepWindow> {
    if !(mu > 0.0 && mu.is_finite()) || !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::arg(format!("mu and rho must be positive, got mu={mu}, rho={rho}")));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::arg(format!("eps must be non-negative, got {eps}")));
    }
    let mu2 = mu * mu;
    let disc = 9.0 * mu2 * mu2 - 32.0 * mu2 * rho * eps;
    if disc <= 0.0 {
        return Ok(StepWindow::Infeasible { discriminant: disc });
    }
    let root = disc.sqrt();
    let denom = 4.0 * mu2 * rho;
    // with ε = 0 the roots are exactly 0 and 3/(2ρ); the general formula
    // can land an ulp below the cap and wrongly open the interval
    let (lo, hi_root) = if eps == 0.0 {
        (0.0, 1.5 / rho)
    } else {
        (((3.0 * mu2 - root) / denom).max(0.0), (3.0 * mu2 + root) / denom)
    };
    let cap = if eps > 0.0 { (1.0 / (4.0 * eps)).min(1.5 / rho) } else { 1.5 / rho };
    let (hi, hi_closed) = if cap <= hi_root { (cap, true) } else { (hi_root, false) };
    if hi <= lo {
        return Ok(StepWindow::Infeasible { discriminant: disc });
    }
    Ok(StepWindow::Feasible { lo, hi, hi_closed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_examples() {
        assert!((theoretical_rate(0.5, 1.0, 1.0, 0.0) - 0.5).abs() < 1e-15);
        assert!((theoretical_rate(1e-9, 1.0, 1.0, 0.0) - 1.0).abs() < 1e-15);
        assert!((theoretical_rate(1.5 / 2.0, 3.0, 2.0, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn window_without_curvature() {
        let w = step_window(1.0, 1.0, 0.0).unwrap();
        assert_eq!(w, StepWindow::Feasible { lo: 0.0, hi: 1.5, hi_closed: true });
        assert!(w.contains(1.5) && !w.contains(0.0));
    }

    #[test]
    fn window_degenerate_and_infeasible() {
        // 9μ⁴ = 32μ²ρε exactly
        let w = step_window(1.0, 1.0, 9.0 / 32.0).unwrap();
        assert_eq!(w, StepWindow::Infeasible { discriminant: 0.0 });
        assert!(!step_window(1e-3, 10.0, 1.0).unwrap().is_feasible());
        assert!(step_window(0.0, 1.0, 0.0).is_err());
        assert!(step_window(1.0, -1.0, 0.0).is_err());
    }
}
