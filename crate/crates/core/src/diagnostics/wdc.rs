use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{norm, symmetric_spectral_norm};
use crate::{Error, Matrix, Result, Vector};

/// Smallest Monte-Carlo sample accepted by [`check_wdc`].
pub const MIN_MC_SAMPLES: usize = 10_000;

/// Deviation of one sampled direction pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WdcPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `‖Σ_i 1[w_i·x>0] 1[w_i·y>0] w_i w_iᵀ − Q_{x,y}‖₂`.
    pub deviation: f64,
    /// Same quantity with `y = x`.
    pub deviation_diagonal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WdcReport {
    pub n: usize,
    pub k: usize,
    pub epsilon: f64,
    pub n_mc_samples: usize,
    pub seed: u64,
    pub pairs: Vec<WdcPair>,
    pub max_deviation: f64,
    /// `max_deviation ≤ epsilon`.
    pub satisfied: bool,
    /// Set when `k > n`; the condition is meant for expansive layers.
    pub non_expansive_warning: bool,
}

fn pair_rng(seed: u64, p: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (p as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn unit(k: usize, rng: &mut ChaCha8Rng) -> Vector {
    loop {
        let v: Vector = Array1::from_shape_fn(k, |_| StandardNormal.sample(rng));
        let n = norm(&v);
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Monte-Carlo estimate of `Q_{x,y}`, normalised as the expectation of the
/// whole sum over `n` rows drawn from `N(0, I_k/n)`; equivalently
/// `E[1[g·x>0] 1[g·y>0] g gᵀ]` for `g ~ N(0, I_k)`. `Q_{x,x} = ½ I`.
pub fn estimate_q(x: &Vector, y: &Vector, n_samples: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let k = x.len();
    let mut acc: Matrix = Array2::zeros((k, k));
    let mut g: Vector = Array1::zeros(k);
    for _ in 0..n_samples {
        g.mapv_inplace(|_| StandardNormal.sample(rng));
        if g.dot(x) > 0.0 && g.dot(y) > 0.0 {
            for i in 0..k {
                for j in 0..=i {
                    acc[[i, j]] += g[i] * g[j];
                }
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            acc[[j, i]] = acc[[i, j]];
        }
    }
    acc / n_samples.max(1) as f64
}

fn empirical_sum(w: &Matrix, x: &Vector, y: &Vector) -> Matrix {
    let k = w.ncols();
    let mut acc: Matrix = Array2::zeros((k, k));
    for row in w.rows() {
        if row.dot(x) > 0.0 && row.dot(y) > 0.0 {
            for i in 0..k {
                for j in 0..k {
                    acc[[i, j]] += row[i] * row[j];
                }
            }
        }
    }
    acc
}

/// Rescales `w` (`n × k`) so that its mean squared row norm is `k/n`, the
/// scale at which a matrix with `N(0, 1/n)` entries is compared to `Q`.
pub fn match_wdc_scale(w: &Matrix) -> Result<Matrix> {
    let fro2: f64 = w.iter().map(|x| x * x).sum();
    if !(fro2 > 0.0 && fro2.is_finite()) {
        return Err(Error::arg("weight matrix must be finite and nonzero"));
    }
    Ok(w * ((w.ncols() as f64) / fro2).sqrt())
}

/// `‖Q̂_{x,x} − ½I‖₂` for one random unit `x ∈ R^k`.
pub fn q_identity_error(k: usize, n_samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = unit(k, &mut rng);
    let q = estimate_q(&x, &x, n_samples, &mut rng);
    let half: Matrix = Array2::eye(k) * 0.5;
    symmetric_spectral_norm(&(q - half))
}

/// Samples `n_pairs` random unit directions `(x, y)` and measures how far the
/// ReLU-gated Gram sum of the rows of `w` (`n × k`) is from `Q_{x,y}`.
pub fn check_wdc(w: &Matrix, epsilon: f64, n_pairs: usize, n_mc_samples: usize, seed: u64) -> Result<WdcReport> {
    let (n, k) = w.dim();
    if n == 0 || k == 0 {
        return Err(Error::shape("weight matrix is empty"));
    }
    if n_pairs == 0 {
        return Err(Error::arg("need at least one direction pair"));
    }
    if n_mc_samples < MIN_MC_SAMPLES {
        return Err(Error::arg(format!("need at least {MIN_MC_SAMPLES} Monte-Carlo samples, got {n_mc_samples}")));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::arg(format!("epsilon must be non-negative, got {epsilon}")));
    }
    let pairs: Vec<WdcPair> = (0..n_pairs)
        .into_par_iter()
        .map(|p| {
            let mut rng = pair_rng(seed, p);
            let x = unit(k, &mut rng);
            let y = unit(k, &mut rng);
            let q_xy = estimate_q(&x, &y, n_mc_samples, &mut rng);
            let q_xx = estimate_q(&x, &x, n_mc_samples, &mut rng);
            let deviation = symmetric_spectral_norm(&(empirical_sum(w, &x, &y) - q_xy));
            let deviation_diagonal = symmetric_spectral_norm(&(empirical_sum(w, &x, &x) - q_xx));
            WdcPair { x: x.to_vec(), y: y.to_vec(), deviation, deviation_diagonal }
        })
        .collect();
    let max_deviation = pairs.iter().map(|p| p.deviation.max(p.deviation_diagonal)).fold(0.0, f64::max);
    Ok(WdcReport {
        n,
        k,
        epsilon,
        n_mc_samples,
        seed,
        pairs,
        max_deviation,
        satisfied: max_deviation <= epsilon,
        non_expansive_warning: k > n,
    })
}
