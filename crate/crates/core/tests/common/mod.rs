#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use ndarray::s;
use red_core::{Activation, BlockIndex, GeneratorNetwork, Matrix, Vector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    Distribution::<f64>::sample(&StandardNormal, rng)
}

pub fn gaussian_vec(n: usize, rng: &mut ChaCha8Rng) -> Vector {
    Array1::from_shape_fn(n, |_| normal(rng))
}

pub fn gaussian_mat(r: usize, c: usize, scale: f64, rng: &mut ChaCha8Rng) -> Matrix {
    Array2::from_shape_fn((r, c), |_| scale * normal(rng))
}

pub fn smooth_activation(rng: &mut ChaCha8Rng) -> Activation {
    if rng.random::<bool>() {
        Activation::Sigmoid
    } else {
        Activation::softplus(rng.random_range(0.5..3.0))
    }
}

/// Random smooth generator with `d ≤ 8`, `m ≤ 32`, depth `≤ 3` and weights
/// scaled by fan-in so that the units stay out of saturation.
pub fn random_smooth_network(seed: u64) -> GeneratorNetwork {
    let mut r = rng(seed);
    let d = r.random_range(1..=8);
    let depth = r.random_range(1..=3);
    let mut dims = vec![d];
    for _ in 0..depth {
        dims.push(r.random_range(d..=32));
    }
    let act = smooth_activation(&mut r);
    let weights = dims.windows(2).map(|w| gaussian_mat(w[1], w[0], 1.0 / (w[0] as f64).sqrt(), &mut r)).collect();
    GeneratorNetwork::new(weights, act).unwrap()
}

/// Central-difference gradient of a scalar function.
pub fn fd_gradient<F: Fn(&Vector) -> f64>(f: F, x: &Vector, h: f64) -> Vector {
    let mut g = Array1::zeros(x.len());
    for i in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(&xp) - f(&xm)) / (2.0 * h);
    }
    g
}

pub fn rel_err(a: &Vector, b: &Vector) -> f64 {
    let diff = (a - b).dot(&(a - b)).sqrt();
    let scale = a.dot(a).sqrt().max(b.dot(b).sqrt()).max(1e-8);
    diff / scale
}

pub fn to_na(m: &Matrix) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

/// Minimizes `½‖y − v‖² + τ Σ_b huber_δ(‖y[b]‖)` by damped Newton. The Huber
/// smoothing moves the minimizer by at most `δ`, and not at all for blocks
/// whose optimum lies outside the δ-ball.
pub fn numeric_prox(idx: &BlockIndex, v: &Vector, tau: f64) -> Vector {
    let delta = 1e-10;
    let huber = |t: f64| if t <= delta { t * t / (2.0 * delta) } else { t - delta / 2.0 };
    let obj = |y: &Vector| {
        let fit = 0.5 * (y - v).mapv(|x| x * x).sum();
        fit + tau * idx.blocks().iter().map(|b| huber(y.slice(s![b.range()]).dot(&y.slice(s![b.range()])).sqrt())).sum::<f64>()
    };
    let n = v.len();
    let mut y = v.clone();
    for _ in 0..500 {
        let mut grad = &y - v;
        let mut hess = nalgebra::DMatrix::<f64>::identity(n, n);
        for b in idx.blocks() {
            let r = b.range();
            let yb = y.slice(s![r.clone()]).to_owned();
            let t = yb.dot(&yb).sqrt();
            if t <= delta {
                for i in r.clone() {
                    grad[i] += tau * y[i] / delta;
                    hess[(i, i)] += tau / delta;
                }
            } else {
                for i in r.clone() {
                    grad[i] += tau * y[i] / t;
                    for j in r.clone() {
                        let eye = if i == j { 1.0 } else { 0.0 };
                        hess[(i, j)] += tau * (eye / t - y[i] * y[j] / (t * t * t));
                    }
                }
            }
        }
        let g = nalgebra::DVector::from_iterator(n, grad.iter().copied());
        let dir = hess.lu().solve(&g).unwrap();
        let dir = Array1::from_iter(dir.iter().map(|x| -x));
        let f0 = obj(&y);
        let slope = grad.dot(&dir);
        let mut step = 1.0;
        while obj(&(&y + &(&dir * step))) > f0 + 1e-4 * step * slope && step > 1e-12 {
            step *= 0.5;
        }
        y = &y + &(&dir * step);
        if (&dir * step).mapv(|x| x * x).sum().sqrt() < 1e-15 {
            break;
        }
    }
    y
}

