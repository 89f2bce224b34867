use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::linalg::extremal_eigenvalues;
use crate::netgen::hessian_vector_product;
use crate::solver::{RedProblem, SolverState};
use crate::{Error, Matrix, Result, Vector};

/// Largest Hessian eigenvalue `rho` and negative-curvature magnitude
/// `eps = max(0, −λ_min)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub rho: f64,
    pub eps: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Default finite-difference displacement for Hessian-vector products.
const HVP_STEP: f64 = 1e-5;

/// Extremal eigenvalues of `∇²f` at `state` by power iteration on
/// finite-difference Hessian-vector products.
pub fn hessian_extremal_eigs(
    problem: &RedProblem,
    state: &SolverState,
    tol: f64,
    max_iters: usize,
) -> Result<SpectralEstimate> {
    hessian_extremal_eigs_with_step(problem, state, tol, max_iters, HVP_STEP)
}

pub fn hessian_extremal_eigs_with_step(
    problem: &RedProblem,
    state: &SolverState,
    tol: f64,
    max_iters: usize,
    step: f64,
) -> Result<SpectralEstimate> {
    problem.generator().activation().require_smooth()?;
    let point = RedProblem::join(&state.z, state.c.values());
    let grad = |x: &Vector| problem.joint_gradient(x);
    // surface the first oracle failure instead of iterating on garbage
    let mut failure: Option<Error> = None;
    let ex = extremal_eigenvalues(
        |v| match hessian_vector_product(grad, &point, v, step) {
            Ok(hv) => hv,
            Err(e) => {
                failure.get_or_insert(e);
                v * 0.0
            }
        },
        point.len(),
        tol,
        max_iters,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(SpectralEstimate { rho: ex.max, eps: (-ex.min).max(0.0), iterations: ex.iterations, converged: ex.converged })
}

/// Dense Hessian of `f` for a single-layer generator:
///
/// ```text
/// ∇²_zz = JᵀJ + Σ_i σ″(w_i·z) r_i w_i w_iᵀ,  ∇²_zc = JᵀD,  ∇²_cc = DᵀD
/// ```
///
/// with `J = diag(σ′(Wz)) W` and `r = G(z) + D c − x′`.
pub fn exact_hessian_single_layer(problem: &RedProblem, z: &Vector, c: &Vector) -> Result<Matrix> {
    let g = problem.generator();
    if g.depth() != 1 {
        return Err(Error::Unsupported(format!(
            "the closed-form Hessian covers single-layer generators, got depth {}",
            g.depth()
        )));
    }
    g.activation().require_smooth()?;
    let w = &g.weights()[0];
    let act = g.activation();
    let d = problem.latent_dim();
    let k = problem.num_coefficients();
    let pre = w.dot(z);
    let r = problem.residual(z, c)?;

    let mut jac = w.clone();
    for (mut row, p) in jac.rows_mut().into_iter().zip(pre.iter()) {
        row *= act.deriv(*p);
    }
    let mut hzz = jac.t().dot(&jac);
    // second-order term: Wᵀ diag(σ″ ⊙ r) W
    let mut scaled = w.clone();
    for ((mut row, p), ri) in scaled.rows_mut().into_iter().zip(pre.iter()).zip(r.iter()) {
        row *= act.deriv2(*p) * ri;
    }
    hzz += &w.t().dot(&scaled);

    let mut h: Matrix = Array2::zeros((d + k, d + k));
    h.slice_mut(s![..d, ..d]).assign(&hzz);
    if k > 0 {
        let dm = problem.dictionary().matrix();
        let hzc = jac.t().dot(dm);
        h.slice_mut(s![..d, d..]).assign(&hzc);
        h.slice_mut(s![d.., ..d]).assign(&hzc.t());
        h.slice_mut(s![d.., d..]).assign(&dm.t().dot(dm));
    }
    Ok(h)
}
