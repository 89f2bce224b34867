//! Sampled checks of the two auxiliary inequalities behind the linear rate:
//! almost co-coercivity of `∇f` and the bound on the gradient-step residual
//! `ζ = Δ − η(∇f(x) − ∇f(y))`.
//!
//! Curvature constants are path quantities, so `ρ` and `ε` are taken from
//! dense exact Hessians on a grid along every segment the argument touches.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::spectral::exact_hessian_single_layer;
use crate::linalg::{norm_sq, symmetric_eigenvalues};
use crate::solver::RedProblem;
use crate::{Error, Result, Vector};

/// Grid points per segment.
pub const SEGMENT_POINTS: usize = 101;
/// Absolute tolerance before a trial counts as a violation.
pub const SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentCurvature {
    pub rho: f64,
    pub eps: f64,
}

/// Largest and most negative Hessian eigenvalue over grids on the given
/// segments.
pub fn segment_curvature(problem: &RedProblem, segments: &[(Vector, Vector)]) -> Result<SegmentCurvature> {
    let mut rho = f64::NEG_INFINITY;
    let mut lam_min = f64::INFINITY;
    for (a, b) in segments {
        for i in 0..SEGMENT_POINTS {
            let t = i as f64 / (SEGMENT_POINTS - 1) as f64;
            let p = a * (1.0 - t) + b * t;
            let (z, c) = problem.split(&p)?;
            let eig = symmetric_eigenvalues(&exact_hessian_single_layer(problem, &z, &c)?);
            lam_min = lam_min.min(eig[0]);
            rho = rho.max(eig[eig.len() - 1]);
        }
    }
    Ok(SegmentCurvature { rho, eps: (-lam_min).max(0.0) })
}

/// One evaluated instance of an inequality `lhs ≥ rhs` (co-coercivity) or
/// `lhs ≤ rhs` (ζ-bound).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaTrial {
    pub eta: f64,
    pub rho: f64,
    pub eps: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub inequality: String,
    pub seed: u64,
    pub trials: Vec<LemmaTrial>,
    /// Trials skipped because no admissible step could be fixed.
    pub skipped: usize,
    pub violations: usize,
    /// Largest amount by which a trial missed its inequality (negative when
    /// every trial held with room to spare).
    pub worst_excess: f64,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

struct PairData {
    delta: Vector,
    dgrad: Vector,
}

fn pair_data(problem: &RedProblem, x: &Vector, y: &Vector) -> Result<PairData> {
    Ok(PairData { delta: x - y, dgrad: problem.joint_gradient(x)? - problem.joint_gradient(y)? })
}

fn curvature_for(problem: &RedProblem, x: &Vector, y: &Vector, data: &PairData, eta: f64) -> Result<SegmentCurvature> {
    let zeta = &data.delta - &(&data.dgrad * eta);
    let segments = [
        (x.clone(), y + &zeta),
        (y.clone(), x - &zeta),
        (x.clone(), y.clone()),
    ];
    segment_curvature(problem, &segments)
}

/// Co-coercivity inequality at a given pair and step, with `ρ`, `ε` measured
/// on the relevant segments:
/// `⟨Δg, Δ⟩ ≥ 2η(1 − ηρ/2)‖Δg‖² − ε‖ζ‖²`.
pub fn cocoercivity_at(problem: &RedProblem, x: &Vector, y: &Vector, eta: f64) -> Result<LemmaTrial> {
    let data = pair_data(problem, x, y)?;
    let curv = curvature_for(problem, x, y, &data, eta)?;
    Ok(cocoercivity_trial(&data, eta, curv))
}

fn cocoercivity_trial(data: &PairData, eta: f64, curv: SegmentCurvature) -> LemmaTrial {
    let zeta = &data.delta - &(&data.dgrad * eta);
    let lhs = data.dgrad.dot(&data.delta);
    let rhs = 2.0 * eta * (1.0 - eta * curv.rho / 2.0) * norm_sq(&data.dgrad) - curv.eps * norm_sq(&zeta);
    LemmaTrial { eta, rho: curv.rho, eps: curv.eps, lhs, rhs, violated: lhs < rhs - SLACK }
}

/// ζ-bound at a given pair and step: `‖ζ‖² ≤ ‖Δ‖² / (1 − 2ηε)`.
pub fn zeta_bound_at(problem: &RedProblem, x: &Vector, y: &Vector, eta: f64) -> Result<LemmaTrial> {
    let data = pair_data(problem, x, y)?;
    let curv = curvature_for(problem, x, y, &data, eta)?;
    Ok(zeta_trial(&data, eta, curv))
}

fn zeta_trial(data: &PairData, eta: f64, curv: SegmentCurvature) -> LemmaTrial {
    let zeta = &data.delta - &(&data.dgrad * eta);
    let lhs = norm_sq(&zeta);
    let rhs = norm_sq(&data.delta) / (1.0 - 2.0 * eta * curv.eps);
    LemmaTrial { eta, rho: curv.rho, eps: curv.eps, lhs, rhs, violated: lhs > rhs + SLACK }
}

#[derive(Clone, Copy)]
enum Which {
    Cocoercivity,
    Zeta,
}

impl Which {
    /// Largest admissible step for the given curvature.
    fn cap(self, c: SegmentCurvature) -> f64 {
        let rho_cap = if c.rho > 0.0 { 1.5 / c.rho } else { f64::INFINITY };
        let eps_cap = match (self, c.eps > 0.0) {
            (_, false) => f64::INFINITY,
            (Which::Cocoercivity, true) => 1.0 / (4.0 * c.eps),
            (Which::Zeta, true) => 1.0 / (2.0 * c.eps),
        };
        rho_cap.min(eps_cap)
    }
}

fn sample_pair(problem: &RedProblem, rng: &mut ChaCha8Rng) -> (Vector, Vector) {
    let n = problem.joint_dim();
    let y: Vector = Array1::from_shape_fn(n, |_| StandardNormal.sample(rng));
    let scale: f64 = rng.random_range(0.05..2.0);
    let x = &y + &Array1::from_shape_fn(n, |_| scale * Distribution::<f64>::sample(&StandardNormal, rng));
    (x, y)
}

fn run(problem: &RedProblem, n_trials: usize, seed: u64, which: Which) -> Result<LemmaReport> {
    let g = problem.generator();
    if g.depth() != 1 {
        return Err(Error::Unsupported("lemma checks use the single-layer closed-form Hessian".into()));
    }
    g.activation().require_smooth()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = Vec::with_capacity(n_trials);
    let mut skipped = 0;
    for _ in 0..n_trials {
        let (x, y) = sample_pair(problem, &mut rng);
        let frac: f64 = rng.random_range(0.05..0.95);
        let data = pair_data(problem, &x, &y)?;
        // ρ and ε depend on η through ζ: shrink η until it sits below the cap
        // computed with its own curvature.
        let mut eta = frac * which.cap(segment_curvature(problem, &[(x.clone(), y.clone())])?);
        let mut settled = None;
        for _ in 0..40 {
            if !eta.is_finite() {
                eta = frac;
            }
            let curv = curvature_for(problem, &x, &y, &data, eta)?;
            let cap = which.cap(curv);
            if eta < cap {
                settled = Some(curv);
                break;
            }
            eta = frac * cap;
        }
        let Some(curv) = settled else {
            skipped += 1;
            continue;
        };
        trials.push(match which {
            Which::Cocoercivity => cocoercivity_trial(&data, eta, curv),
            Which::Zeta => zeta_trial(&data, eta, curv),
        });
    }
    let violations = trials.iter().filter(|t| t.violated).count();
    let worst_excess = trials
        .iter()
        .map(|t| match which {
            Which::Cocoercivity => t.rhs - t.lhs,
            Which::Zeta => t.lhs - t.rhs,
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let inequality = match which {
        Which::Cocoercivity => "cocoercivity",
        Which::Zeta => "zeta_bound",
    };
    Ok(LemmaReport { inequality: inequality.into(), seed, trials, skipped, violations, worst_excess })
}

/// Samples `n_trials` point pairs and admissible steps and checks the almost
/// co-coercivity inequality on each.
pub fn verify_cocoercivity(problem: &RedProblem, n_trials: usize, seed: u64) -> Result<LemmaReport> {
    run(problem, n_trials, seed, Which::Cocoercivity)
}

/// Samples `n_trials` point pairs with `η < min(1/(2ε), 3/(2ρ))` and checks
/// `‖ζ‖² ≤ ‖Δ‖²/(1 − 2ηε)`.
pub fn verify_zeta_bound(problem: &RedProblem, n_trials: usize, seed: u64) -> Result<LemmaReport> {
    run(problem, n_trials, seed, Which::Zeta)
}
