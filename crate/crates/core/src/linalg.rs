//! Small dense linear-algebra kernels: power iteration on symmetric operators
//! and a cyclic Jacobi eigensolver for the modest matrices the diagnostics
//! assemble explicitly.

use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Matrix, Vector};

pub fn norm(v: &Vector) -> f64 {
    v.dot(v).sqrt()
}

pub fn norm_sq(v: &Vector) -> f64 {
    v.dot(v)
}

/// Outcome of a power iteration run.
#[derive(Debug, Clone)]
pub struct PowerResult {
    /// Rayleigh quotient at the final iterate.
    pub value: f64,
    pub vector: Vector,
    pub iterations: usize,
    pub converged: bool,
}

/// Fixed pseudo-random unit start vector so power iterations are reproducible
/// and almost surely not orthogonal to the dominant eigenvector.
pub fn start_vector(dim: usize) -> Vector {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_cafe);
    let v: Vector = Array1::from_shape_fn(dim, |_| StandardNormal.sample(&mut rng));
    let n = norm(&v);
    v / n
}

/// Dominant (largest magnitude) eigenpair of the symmetric operator `apply`.
///
/// Stops once `‖Av − λv‖ ≤ tol · max(|λ|, scale_floor)`.
pub fn power_iteration<F>(mut apply: F, dim: usize, tol: f64, max_iters: usize) -> PowerResult
where
    F: FnMut(&Vector) -> Vector,
{
    let mut v = start_vector(dim);
    let mut value = 0.0;
    for it in 1..=max_iters.max(1) {
        let av = apply(&v);
        value = v.dot(&av);
        let av_norm = norm(&av);
        if av_norm == 0.0 {
            return PowerResult { value: 0.0, vector: v, iterations: it, converged: true };
        }
        let residual = norm(&(&av - &(&v * value)));
        if residual <= tol * value.abs().max(f64::MIN_POSITIVE) {
            return PowerResult { value, vector: v, iterations: it, converged: true };
        }
        v = av / av_norm;
    }
    PowerResult { value, vector: v, iterations: max_iters, converged: false }
}

/// Largest and smallest eigenvalue of a symmetric operator.
#[derive(Debug, Clone, Copy)]
pub struct Extremes {
    pub max: f64,
    pub min: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Finds both spectral extremes with two power iterations: one on the
/// operator itself, one on the shift that makes the opposite end dominant.
pub fn extremal_eigenvalues<F>(mut apply: F, dim: usize, tol: f64, max_iters: usize) -> Extremes
where
    F: FnMut(&Vector) -> Vector,
{
    let dominant = power_iteration(&mut apply, dim, tol, max_iters);
    let lead = dominant.value;
    // Shifted operator: its dominant eigenvalue is the distance from `lead`
    // to the far end of the spectrum.
    let sign = if lead >= 0.0 { 1.0 } else { -1.0 };
    let shifted = power_iteration(
        |v: &Vector| {
            let av = apply(v);
            (v * lead - &av) * sign
        },
        dim,
        tol,
        max_iters,
    );
    let far = lead - sign * shifted.value.max(0.0);
    let (max, min) = if lead >= 0.0 { (lead, far) } else { (far, lead) };
    Extremes {
        max,
        min,
        iterations: dominant.iterations + shifted.iterations,
        converged: dominant.converged && shifted.converged,
    }
}

/// Eigenvalues of a symmetric matrix (ascending) by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(a: &Matrix) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "symmetric_eigenvalues needs a square matrix");
    let mut m = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum();
        let diag: f64 = (0..n).map(|i| m[[i, i]] * m[[i, i]]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[[i, i]]).collect();
    eig.sort_by(|a, b| a.total_cmp(b));
    eig
}

/// Spectral norm of a symmetric matrix.
pub fn symmetric_spectral_norm(a: &Matrix) -> f64 {
    let eig = symmetric_eigenvalues(a);
    match (eig.first(), eig.last()) {
        (Some(lo), Some(hi)) => lo.abs().max(hi.abs()),
        _ => 0.0,
    }
}

/// Largest singular value of a rectangular matrix via power iteration on `AᵀA`.
pub fn spectral_norm(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let res = power_iteration(|v| a.t().dot(&a.dot(v)), a.ncols(), 1e-12, 20_000);
    res.value.max(0.0).sqrt()
}

/// Least-squares slope and coefficient of determination of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn jacobi_diagonal_and_rotated() {
        let a = array![[3.0, 0.0], [0.0, 1.0]];
        assert_eq!(symmetric_eigenvalues(&a), vec![1.0, 3.0]);
        let b = array![[2.0, 1.0], [1.0, 2.0]];
        let e = symmetric_eigenvalues(&b);
        assert!((e[0] - 1.0).abs() < 1e-14 && (e[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn extremes_of_indefinite_matrix() {
        let a = array![[1.0, 0.0, 0.0], [0.0, -4.0, 0.0], [0.0, 0.0, 2.0]];
        let ex = extremal_eigenvalues(|v| a.dot(v), 3, 1e-12, 10_000);
        assert!(ex.converged);
        assert!((ex.max - 2.0).abs() < 1e-9, "{ex:?}");
        assert!((ex.min + 4.0).abs() < 1e-9, "{ex:?}");
    }

    #[test]
    fn zero_operator() {
        let ex = extremal_eigenvalues(|v| v * 0.0, 4, 1e-12, 100);
        assert_eq!((ex.max, ex.min), (0.0, 0.0));
    }

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (s, i, r2) = linear_fit(&x, &y);
        assert!((s + 0.5).abs() < 1e-12 && (i - 2.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }
}
