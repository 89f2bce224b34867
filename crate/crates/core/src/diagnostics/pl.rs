use crate::linalg::norm_sq;
use crate::solver::{RedProblem, SolverState};
use crate::{Error, Result};

/// `−min_y [⟨∇_c f, y − c⟩ + ρ/2 ‖y − c‖² + λ(h(y) − h(c))]`, with the inner
/// minimiser `y* = prox(c − ∇_c f/ρ, λ/ρ)`. Never negative.
pub fn prox_pl_quantity(problem: &RedProblem, state: &SolverState, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::arg(format!("rho must be positive, got {rho}")));
    }
    if problem.num_coefficients() == 0 {
        return Ok(0.0);
    }
    let idx = problem.dictionary().index();
    let lambda = problem.lambda();
    let c = state.c.values();
    let (_, g) = problem.gradient_values(&state.z, c)?;
    let y = idx.prox(&(c - &(&g / rho)), lambda / rho)?;
    let step = &y - c;
    let inner = g.dot(&step) + 0.5 * rho * norm_sq(&step) + lambda * (idx.l12_norm(&y)? - idx.l12_norm(c)?);
    // y = c gives zero, so the true minimum is ≤ 0; clamp rounding noise
    Ok((-inner).max(0.0))
}
