mod common;

use common::*;
use ndarray::Array1;
use proptest::prelude::*;
use red_core::diagnostics::exact_hessian_single_layer;
use red_core::netgen::hessian_vector_product;
use red_core::{Activation, GeneratorNetwork, RedProblem, Vector};

#[test]
fn derivatives_match_finite_differences() {
    for act in [Activation::Sigmoid, Activation::softplus(1.0), Activation::softplus(2.5), Activation::leaky_relu(0.1)] {
        let h = 1e-6;
        for i in 0..=400 {
            let x = -10.0 + 0.05 * i as f64;
            if !act.is_smooth() && x.abs() <= 1e-3 {
                continue;
            }
            let fd = (act.value(x + h) - act.value(x - h)) / (2.0 * h);
            let floor = 1e-9 * act.value(x).abs().max(1.0);
            assert!((fd - act.deriv(x)).abs() <= 1e-6 * act.deriv(x).abs() + floor, "{act:?} at {x}");
            if act.is_smooth() {
                let fd2 = (act.deriv(x + h) - act.deriv(x - h)) / (2.0 * h);
                assert!((fd2 - act.deriv2(x)).abs() <= 1e-5 * act.deriv2(x).abs() + 1e-9, "{act:?} σ″ at {x}");
            }
        }
    }
    assert!(!Activation::leaky_relu(0.1).is_smooth());
    assert!(Activation::Sigmoid.is_smooth() && Activation::softplus(1.0).is_smooth());
}

#[test]
fn forward_with_activations_agrees_with_forward() {
    for seed in 0..100 {
        let g = random_smooth_network(seed);
        let z = gaussian_vec(g.latent_dim(), &mut rng(seed + 1000));
        let (out, pre) = g.forward_with_activations(&z).unwrap();
        assert_eq!(out, g.forward(&z).unwrap());
        assert_eq!(pre.len(), g.depth());
        // each cached pre-activation recomputed from the one before it
        let act = g.activation();
        let mut h = z.clone();
        for (w, p) in g.weights().iter().zip(&pre) {
            let expect = w.dot(&h);
            assert!(rel_err(&expect, p) < 1e-14);
            h = expect.mapv(|x| act.value(x));
        }
    }
}

#[test]
fn pullback_matches_fd_of_inversion_loss() {
    for seed in 0..100 {
        let g = random_smooth_network(seed);
        let mut r = rng(seed + 7);
        let z = gaussian_vec(g.latent_dim(), &mut r);
        let x = gaussian_vec(g.output_dim(), &mut r);
        let loss = |z: &Vector| 0.5 * (&g.forward(z).unwrap() - &x).mapv(|v| v * v).sum();
        let analytic = g.pullback(&z, &(g.forward(&z).unwrap() - &x)).unwrap();
        let fd = fd_gradient(loss, &z, 1e-5);
        assert!(rel_err(&analytic, &fd) < 1e-6, "seed {seed}: {}", rel_err(&analytic, &fd));
    }
}

#[test]
fn hvp_matches_exact_single_layer_hessian() {
    for seed in 0..20 {
        let mut r = rng(seed);
        let (m, d) = (12, 3);
        let g = GeneratorNetwork::single_layer(gaussian_mat(m, d, 0.6, &mut r), smooth_activation(&mut r)).unwrap();
        let x = gaussian_vec(m, &mut r);
        let p = RedProblem::inversion(x, g).unwrap();
        let z = gaussian_vec(d, &mut r);
        let h = exact_hessian_single_layer(&p, &z, &Array1::zeros(0)).unwrap();
        for i in 0..d {
            let mut e = Array1::zeros(d);
            e[i] = 1.0;
            let hv = hessian_vector_product(|v| p.joint_gradient(v), &z, &e, 1e-5).unwrap();
            let col = h.column(i).to_owned();
            assert!(rel_err(&hv, &col) < 1e-4, "seed {seed} col {i}");
        }
    }
}

#[test]
fn jacobian_matches_pullback_on_basis() {
    let g = random_smooth_network(3);
    let z = gaussian_vec(g.latent_dim(), &mut rng(4));
    let j = g.jacobian(&z).unwrap();
    for k in 0..g.output_dim() {
        let mut e = Array1::zeros(g.output_dim());
        e[k] = 1.0;
        let row = g.pullback(&z, &e).unwrap();
        assert!(rel_err(&row, &j.row(k).to_owned()) < 1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pullback_is_linear(seed in 0u64..10_000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let g = random_smooth_network(seed);
        let mut r = rng(seed ^ 0xabc);
        let z = gaussian_vec(g.latent_dim(), &mut r);
        let r1 = gaussian_vec(g.output_dim(), &mut r);
        let r2 = gaussian_vec(g.output_dim(), &mut r);
        let lhs = g.pullback(&z, &(&r1 * a + &r2 * b)).unwrap();
        let rhs = g.pullback(&z, &r1).unwrap() * a + g.pullback(&z, &r2).unwrap() * b;
        let scale = 1.0 + rhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (x, y) in lhs.iter().zip(rhs.iter()) {
            prop_assert!((x - y).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn forward_is_deterministic(seed in 0u64..10_000) {
        let g = random_smooth_network(seed);
        let z = gaussian_vec(g.latent_dim(), &mut rng(seed));
        prop_assert_eq!(g.forward(&z).unwrap(), g.forward(&z).unwrap());
    }

    #[test]
    fn pullback_of_zero_is_zero(seed in 0u64..10_000) {
        let g = random_smooth_network(seed);
        let z = gaussian_vec(g.latent_dim(), &mut rng(seed));
        let out = g.pullback(&z, &Array1::zeros(g.output_dim())).unwrap();
        prop_assert!(out.iter().all(|v| *v == 0.0));
    }
}
