use crate::linalg::norm_sq;
use crate::solver::{GroundTruth, RedProblem, SolverState};
use crate::{Error, Result};

/// `sqrt((‖∇_z f‖² + ‖∇_c f‖²) / (‖z − z*‖² + ‖c − c*‖²))` at `state`.
///
/// Fails with [`Error::UndefinedAtOptimum`] when the squared distance to the
/// ground truth is below `1e-14`.
pub fn estimate_mu_iterate(problem: &RedProblem, state: &SolverState, truth: &GroundTruth) -> Result<f64> {
    if truth.z.len() != state.z.len() || truth.c.len() != state.c.len() {
        return Err(Error::shape("ground truth does not match the state dimensions"));
    }
    let dist = norm_sq(&(&state.z - &truth.z)) + norm_sq(&(state.c.values() - &truth.c));
    if dist < 1e-14 {
        return Err(Error::UndefinedAtOptimum(dist));
    }
    let (gz, gc) = problem.gradient_values(&state.z, state.c.values())?;
    Ok(((norm_sq(&gz) + norm_sq(&gc)) / dist).sqrt())
}
