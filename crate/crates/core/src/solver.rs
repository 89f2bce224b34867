//! Alternating gradient / proximal-gradient solver for
//! `min_{z,c} ½‖x′ − G(z) − D c‖² + λ Σ_b ‖c[b]‖₂`.
//!
//! Each iteration takes a gradient step on `z` and a proximal gradient step on
//! `c`. By default both are evaluated at the iterate from the start of the
//! iteration (simultaneous update); [`UpdateOrder::GaussSeidel`] refreshes
//! the residual between the two.
//!
//! The reconstruction term carries a factor ½ so that the step direction
//! `J_G(z)ᵀ(G(z) + D c − x′)` is exactly its gradient; `λ` is measured
//! against that scaling.

use ndarray::{concatenate, s, Array1, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diagnostics::estimate_mu_iterate;
use crate::linalg::{norm, norm_sq, spectral_norm};
use crate::synth::SyntheticClassifier;
use crate::{AttackDictionary, BlockId, BlockVector, Error, GeneratorNetwork, Result, Vector};

/// Loss above which a run is declared divergent.
pub const DIVERGENCE_LOSS: f64 = 1e12;

/// An instance `(x′, G, D_a, λ)` of the recovery problem.
#[derive(Debug, Clone)]
pub struct RedProblem {
    observed: Vector,
    generator: GeneratorNetwork,
    dictionary: AttackDictionary,
    lambda: f64,
}

impl RedProblem {
    pub fn new(
        observed: Vector,
        generator: GeneratorNetwork,
        dictionary: AttackDictionary,
        lambda: f64,
    ) -> Result<Self> {
        let m = generator.output_dim();
        if observed.len() != m {
            return Err(Error::shape(format!(
                "observation has length {}, generator outputs {m}",
                observed.len()
            )));
        }
        if dictionary.rows() != m {
            return Err(Error::shape(format!(
                "dictionary has {} rows, generator outputs {m}",
                dictionary.rows()
            )));
        }
        if observed.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("observation has non-finite entries".into()));
        }
        check_lambda(lambda)?;
        Ok(Self { observed, generator, dictionary, lambda })
    }

    /// Pure GAN inversion: empty dictionary, `λ = 0`.
    pub fn inversion(observed: Vector, generator: GeneratorNetwork) -> Result<Self> {
        let m = generator.output_dim();
        Self::new(observed, generator, AttackDictionary::empty(m), 0.0)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        self.lambda = lambda;
        Ok(self)
    }

    pub fn observed(&self) -> &Vector {
        &self.observed
    }

    pub fn generator(&self) -> &GeneratorNetwork {
        &self.generator
    }

    pub fn dictionary(&self) -> &AttackDictionary {
        &self.dictionary
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn latent_dim(&self) -> usize {
        self.generator.latent_dim()
    }

    pub fn num_coefficients(&self) -> usize {
        self.dictionary.cols()
    }

    /// Dimension of the joint variable `(z, c)`.
    pub fn joint_dim(&self) -> usize {
        self.latent_dim() + self.num_coefficients()
    }

    /// `G(z) + D c − x′`.
    pub fn residual(&self, z: &Vector, c: &Vector) -> Result<Vector> {
        let g = self.generator.forward(z)?;
        let dc = self.dictionary.apply_values(c)?;
        Ok(g + dc - &self.observed)
    }

    /// Gradient of `f` with respect to `(z, c)` on raw vectors.
    pub fn gradient_values(&self, z: &Vector, c: &Vector) -> Result<(Vector, Vector)> {
        let (out, preacts) = self.generator.forward_with_activations(z)?;
        let r = out + self.dictionary.apply_values(c)? - &self.observed;
        let gz = self.generator.pullback_from(&preacts, &r)?;
        let gc = self.dictionary.apply_transpose_values(&r)?;
        Ok((gz, gc))
    }

    /// Splits a joint vector `[z; c]`.
    pub fn split(&self, joint: &Vector) -> Result<(Vector, Vector)> {
        if joint.len() != self.joint_dim() {
            return Err(Error::shape(format!(
                "joint vector has length {}, expected {}",
                joint.len(),
                self.joint_dim()
            )));
        }
        let d = self.latent_dim();
        Ok((joint.slice(s![..d]).to_owned(), joint.slice(s![d..]).to_owned()))
    }

    pub fn join(z: &Vector, c: &Vector) -> Vector {
        concatenate![Axis(0), z.view(), c.view()]
    }

    /// Gradient of `f` at the joint point `[z; c]`, returned jointly.
    pub fn joint_gradient(&self, joint: &Vector) -> Result<Vector> {
        let (z, c) = self.split(joint)?;
        let (gz, gc) = self.gradient_values(&z, &c)?;
        Ok(Self::join(&gz, &gc))
    }

    /// `½‖G(z) + D c − x′‖²` on raw vectors.
    pub fn reconstruction(&self, z: &Vector, c: &Vector) -> Result<f64> {
        Ok(0.5 * norm_sq(&self.residual(z, c)?))
    }

    /// `f + λ h` on raw vectors.
    pub fn objective(&self, z: &Vector, c: &Vector) -> Result<f64> {
        let f = self.reconstruction(z, c)?;
        Ok(f + self.lambda * self.dictionary.index().l12_norm(c)?)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::arg(format!("lambda must be finite and non-negative, got {lambda}")));
    }
    Ok(())
}

/// Order in which the two blocks are refreshed inside an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateOrder {
    /// Both updates use `(z^k, c^k)`.
    #[default]
    Jacobi,
    /// The `c` update sees `z^{k+1}`.
    GaussSeidel,
}

/// Starting point of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    Given { z0: Vec<f64>, c0: Vec<f64> },
    /// `z⁰ ~ N(0, I)`, `c⁰ = 0`.
    RandomNormal { seed: u64 },
    /// Best of `n_restarts` random starts after `warm_iters` pure-inversion
    /// steps each; `c⁰ = 0`.
    MultiRestart { n_restarts: usize, warm_iters: usize, seed: u64 },
}

impl Default for Init {
    fn default() -> Self {
        Init::RandomNormal { seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Step on `z`. `None` uses `1 / (sup|σ′|² Π‖W_i‖²)`.
    pub step_z: Option<f64>,
    /// Step on `c`. `None` uses `1 / ‖DᵀD‖₂`.
    pub step_c: Option<f64>,
    pub max_iters: usize,
    pub tol_grad: f64,
    pub tol_loss: f64,
    pub nesterov: bool,
    pub update: UpdateOrder,
    pub init: Init,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_z: None,
            step_c: None,
            max_iters: 500,
            tol_grad: 1e-10,
            tol_loss: 1e-10,
            nesterov: false,
            update: UpdateOrder::Jacobi,
            init: Init::default(),
        }
    }
}

impl SolverConfig {
    /// One step size shared by both blocks, as in the convergence analysis.
    pub fn single_step(eta: f64) -> Self {
        Self { step_z: Some(eta), step_c: Some(eta), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, step) in [("step_z", self.step_z), ("step_c", self.step_c)] {
            if let Some(s) = step {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::arg(format!("{name} must be positive, got {s}")));
                }
            }
        }
        if self.max_iters < 1 {
            return Err(Error::arg("max_iters must be at least 1"));
        }
        if let Init::MultiRestart { n_restarts: 0, .. } = self.init {
            return Err(Error::arg("multi-restart initialization needs at least one restart"));
        }
        Ok(())
    }

    /// Concrete `(step_z, step_c)` for a problem.
    pub fn resolve_steps(&self, problem: &RedProblem) -> Result<(f64, f64)> {
        let step_z = match self.step_z {
            Some(s) => s,
            None => default_step_z(problem.generator()),
        };
        let step_c = match self.step_c {
            Some(s) => s,
            None if problem.dictionary().is_empty() => step_z,
            None => {
                let (c_d, _) = problem.dictionary().spectrum_bounds()?;
                1.0 / (c_d * c_d)
            }
        };
        Ok((step_z, step_c))
    }
}

/// Inverse of the Gauss–Newton Lipschitz bound `sup|σ′|² Π‖W_i‖²`.
pub fn default_step_z(g: &GeneratorNetwork) -> f64 {
    let b = g.activation().deriv_bound();
    let lip: f64 = g.weights().iter().map(|w| (b * spectral_norm(w)).powi(2)).product();
    if lip > 0.0 {
        1.0 / lip
    } else {
        1.0
    }
}

/// Iterate `(z^k, c_a^k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub z: Vector,
    pub c: BlockVector,
    pub iter: usize,
}

impl SolverState {
    pub fn new(z: Vector, c: BlockVector) -> Self {
        Self { z, c, iter: 0 }
    }

    pub fn is_finite(&self) -> bool {
        self.z.iter().chain(self.c.values().iter()).all(|x| x.is_finite())
    }
}

/// Known optimum of a realizable instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub z: Vector,
    pub c: Vector,
}

impl GroundTruth {
    pub fn distances(&self, state: &SolverState) -> (f64, f64) {
        (norm(&(&state.z - &self.z)), norm(&(state.c.values() - &self.c)))
    }
}

/// One row of telemetry, describing the iterate at the start of iteration `iter`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub loss: f64,
    pub f: f64,
    pub grad_z: f64,
    /// Norm of the proximal gradient mapping in `c` (the plain gradient
    /// norm when `λ = 0`).
    pub grad_c: f64,
    pub dist_z: Option<f64>,
    pub dist_c: Option<f64>,
    pub mu: Option<f64>,
}

impl TraceRecord {
    /// `‖Δz‖² + ‖Δc‖²` when ground truth was supplied.
    pub fn joint_error(&self) -> Option<f64> {
        Some(self.dist_z?.powi(2) + self.dist_c?.powi(2))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Mean of the recorded error-bound estimates.
    pub fn mean_mu(&self) -> Option<f64> {
        let mus: Vec<f64> = self.records.iter().filter_map(|r| r.mu).collect();
        if mus.is_empty() {
            None
        } else {
            Some(mus.iter().sum::<f64>() / mus.len() as f64)
        }
    }

    pub fn min_mu(&self) -> Option<f64> {
        self.records.iter().filter_map(|r| r.mu).reduce(f64::min)
    }
}

/// `(L, f)` with `f = ½‖x′ − G(z) − D c‖²` and `L = f + λ‖c‖_{1,2}`.
pub fn loss(problem: &RedProblem, state: &SolverState) -> Result<(f64, f64)> {
    let f = problem.reconstruction(&state.z, state.c.values())?;
    let l = f + problem.lambda() * crate::dict::block_l12_norm(&state.c);
    Ok((l, f))
}

/// Exact gradients of `f`: `(J_G(z)ᵀ r, Dᵀ r)` with `r = G(z) + D c − x′`.
pub fn gradients(problem: &RedProblem, state: &SolverState) -> Result<(Vector, BlockVector)> {
    let (gz, gc) = problem.gradient_values(&state.z, state.c.values())?;
    Ok((gz, problem.dictionary().coefficients(gc)?))
}

/// One memoryless iteration (no momentum) with the configured steps.
pub fn step(problem: &RedProblem, config: &SolverConfig, state: &SolverState) -> Result<SolverState> {
    config.validate()?;
    let steps = config.resolve_steps(problem)?;
    let next = plain_step(problem, steps, config.update, state)?;
    if !next.is_finite() {
        return Err(Error::Divergence { iter: state.iter, last: Box::new(state.clone()) });
    }
    Ok(next)
}

fn plain_step(
    problem: &RedProblem,
    (step_z, step_c): (f64, f64),
    order: UpdateOrder,
    state: &SolverState,
) -> Result<SolverState> {
    let (gz, gc) = problem.gradient_values(&state.z, state.c.values())?;
    let z = &state.z - &(&gz * step_z);
    let gc = match order {
        UpdateOrder::Jacobi => gc,
        UpdateOrder::GaussSeidel => problem.gradient_values(&z, state.c.values())?.1,
    };
    let c = prox_step(problem, state.c.values(), &gc, step_c)?;
    Ok(SolverState { z, c: problem.dictionary().coefficients(c)?, iter: state.iter + 1 })
}

fn prox_step(problem: &RedProblem, c: &Vector, gc: &Vector, step_c: f64) -> Result<Vector> {
    let idx = problem.dictionary().index();
    idx.prox(&(c - &(gc * step_c)), step_c * problem.lambda())
}

/// Norm of the proximal gradient mapping `(c − prox(c − η g, ηλ)) / η`.
fn gradient_mapping_norm(problem: &RedProblem, c: &Vector, gc: &Vector, step_c: f64) -> Result<f64> {
    if problem.lambda() == 0.0 {
        return Ok(norm(gc));
    }
    let p = prox_step(problem, c, gc, step_c)?;
    Ok(norm(&(c - &p)) / step_c)
}

/// Builds the starting state described by `config.init`.
pub fn initial_state(problem: &RedProblem, config: &SolverConfig) -> Result<SolverState> {
    let d = problem.latent_dim();
    let dict = problem.dictionary();
    match &config.init {
        Init::Given { z0, c0 } => {
            if z0.len() != d {
                return Err(Error::shape(format!("initial z has length {}, expected {d}", z0.len())));
            }
            let c = dict.coefficients(Array1::from(c0.clone()))?;
            Ok(SolverState::new(Array1::from(z0.clone()), c))
        }
        Init::RandomNormal { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let z = Array1::from_shape_fn(d, |_| StandardNormal.sample(&mut rng));
            Ok(SolverState::new(z, dict.zero_coefficients()))
        }
        Init::MultiRestart { n_restarts, warm_iters, seed } => {
            let (step_z, _) = config.resolve_steps(problem)?;
            let z = multi_restart_init(problem, *n_restarts, *warm_iters, step_z, *seed)?;
            Ok(SolverState::new(z, dict.zero_coefficients()))
        }
    }
}

/// Stateful iteration with optional Nesterov extrapolation on `c`.
pub struct Solver<'a> {
    problem: &'a RedProblem,
    steps: (f64, f64),
    order: UpdateOrder,
    nesterov: bool,
    state: SolverState,
    // extrapolated point and momentum parameter for the `c` block
    anchor: Vector,
    t: f64,
}

impl<'a> Solver<'a> {
    pub fn new(problem: &'a RedProblem, config: &SolverConfig, state: SolverState) -> Result<Self> {
        config.validate()?;
        let steps = config.resolve_steps(problem)?;
        let anchor = state.c.values().clone();
        Ok(Self { problem, steps, order: config.update, nesterov: config.nesterov, state, anchor, t: 1.0 })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn steps(&self) -> (f64, f64) {
        self.steps
    }

    pub fn into_state(self) -> SolverState {
        self.state
    }

    /// Advances one iteration. `current_loss` is `L` at the current state,
    /// used for the momentum restart test.
    pub fn advance(&mut self, current_loss: f64) -> Result<()> {
        let next = if self.nesterov {
            self.accelerated_step(current_loss)?
        } else {
            plain_step(self.problem, self.steps, self.order, &self.state)?
        };
        if !next.is_finite() {
            return Err(Error::Divergence { iter: self.state.iter, last: Box::new(self.state.clone()) });
        }
        self.state = next;
        Ok(())
    }

    fn accelerated_step(&mut self, current_loss: f64) -> Result<SolverState> {
        let p = self.problem;
        let (step_z, step_c) = self.steps;
        let c = self.state.c.values();
        let (gz, _) = p.gradient_values(&self.state.z, c)?;
        let z = &self.state.z - &(&gz * step_z);
        let z_for_c = match self.order {
            UpdateOrder::Jacobi => &self.state.z,
            UpdateOrder::GaussSeidel => &z,
        };
        let (_, gc_anchor) = p.gradient_values(z_for_c, &self.anchor)?;
        let c_next = prox_step(p, &self.anchor, &gc_anchor, step_c)?;

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * self.t * self.t).sqrt());
        let new_loss = p.objective(&z, &c_next)?;
        if new_loss > current_loss {
            // restart momentum
            self.t = 1.0;
            self.anchor = c_next.clone();
        } else {
            let beta = (self.t - 1.0) / t_next;
            self.anchor = &c_next + &((&c_next - c) * beta);
            self.t = t_next;
        }
        Ok(SolverState { z, c: p.dictionary().coefficients(c_next)?, iter: self.state.iter + 1 })
    }
}

/// Runs the iteration until a stopping rule fires. The trace holds one record
/// per visited iterate, including the initial and final ones.
pub fn solve(
    problem: &RedProblem,
    config: &SolverConfig,
    ground_truth: Option<&GroundTruth>,
) -> Result<(SolverState, Trace)> {
    config.validate()?;
    if let Some(gt) = ground_truth {
        if gt.z.len() != problem.latent_dim() || gt.c.len() != problem.num_coefficients() {
            return Err(Error::shape("ground truth does not match the problem dimensions"));
        }
    }
    let start = initial_state(problem, config)?;
    solve_from(problem, config, start, ground_truth)
}

/// As [`solve`], from an explicit starting state.
pub fn solve_from(
    problem: &RedProblem,
    config: &SolverConfig,
    start: SolverState,
    ground_truth: Option<&GroundTruth>,
) -> Result<(SolverState, Trace)> {
    let mut solver = Solver::new(problem, config, start)?;
    let (_, step_c) = solver.steps();
    let mut trace = Trace::default();
    let mut last_finite: Option<SolverState> = None;

    loop {
        let state = solver.state().clone();
        let (gz, gc) = problem.gradient_values(&state.z, state.c.values())?;
        let (l, f) = loss(problem, &state)?;
        if !l.is_finite() || l > DIVERGENCE_LOSS || gz.iter().any(|x| !x.is_finite()) {
            let last = last_finite.unwrap_or(state);
            return Err(Error::Divergence { iter: last.iter, last: Box::new(last) });
        }
        let grad_z = norm(&gz);
        let grad_c = gradient_mapping_norm(problem, state.c.values(), &gc, step_c)?;
        let (dist_z, dist_c, mu) = match ground_truth {
            Some(gt) => {
                let (dz, dc) = gt.distances(&state);
                let mu = estimate_mu_iterate(problem, &state, gt).ok();
                (Some(dz), Some(dc), mu)
            }
            None => (None, None, None),
        };
        trace.records.push(TraceRecord { iter: state.iter, loss: l, f, grad_z, grad_c, dist_z, dist_c, mu });

        let done = grad_z + grad_c <= config.tol_grad || l <= config.tol_loss || state.iter >= config.max_iters;
        if done {
            return Ok((state, trace));
        }
        last_finite = Some(state);
        if let Err(e) = solver.advance(l) {
            return Err(match e {
                Error::Divergence { .. } => {
                    let last = last_finite.take().expect("set above");
                    Error::Divergence { iter: last.iter, last: Box::new(last) }
                }
                other => other,
            });
        }
    }
}

/// Smallest `λ` for which `c = 0` is optimal with `z` held fixed:
/// `max_b ‖D[b]ᵀ (x′ − G(z))‖₂`.
pub fn lambda_max(problem: &RedProblem, z: &Vector) -> Result<f64> {
    let dict = problem.dictionary();
    if dict.is_empty() {
        return Err(Error::arg("lambda_max needs a non-empty dictionary"));
    }
    let r = problem.observed() - &problem.generator().forward(z)?;
    let corr = dict.apply_transpose(&r)?;
    Ok(corr.block_norms().into_iter().fold(0.0, f64::max))
}

/// Default multiplier applied to [`lambda_max`] when choosing `λ` automatically.
pub const DEFAULT_LAMBDA_FACTOR: f64 = 0.35;

/// Draws `n` standard-normal latent codes, runs `warm_iters` pure-inversion
/// gradient steps from each (dictionary ignored) and returns the one with the
/// lowest `½‖x′ − G(z)‖²`. Ties go to the earliest candidate.
pub fn multi_restart_init(
    problem: &RedProblem,
    n: usize,
    warm_iters: usize,
    step: f64,
    seed: u64,
) -> Result<Vector> {
    if n == 0 {
        return Err(Error::arg("multi-restart initialization needs at least one restart"));
    }
    if !(step > 0.0) {
        return Err(Error::arg("warm-start step must be positive"));
    }
    let g = problem.generator();
    let x = problem.observed();
    let d = problem.latent_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vector)> = None;
    for _ in 0..n {
        let mut z: Vector = Array1::from_shape_fn(d, |_| StandardNormal.sample(&mut rng));
        for _ in 0..warm_iters {
            let (out, pre) = g.forward_with_activations(&z)?;
            let grad = g.pullback_from(&pre, &(out - x))?;
            z = z - grad * step;
            if z.iter().any(|v| !v.is_finite()) {
                break;
            }
        }
        let warm_loss = if z.iter().all(|v| v.is_finite()) {
            0.5 * norm_sq(&(g.forward(&z)? - x))
        } else {
            f64::INFINITY
        };
        if best.as_ref().is_none_or(|(b, _)| warm_loss < *b) {
            best = Some((warm_loss, z));
        }
    }
    let (loss, z) = best.expect("n >= 1");
    if !loss.is_finite() {
        return Err(Error::Numeric("every warm start diverged".into()));
    }
    Ok(z)
}

/// Output of the signal / attack classification rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    /// `1` if `ψ(G(z)) > 0`, else `0`; present only when a classifier is given.
    pub signal_label: Option<u8>,
    pub attack_block: BlockId,
    /// `(signal_class, attack_type)` of the selected block.
    pub attack_label: (i64, i64),
    /// `‖x′ − G(z) − D[b] c[b]‖₂` per block, in index order.
    pub block_residuals: Vec<f64>,
}

/// Signal label from `ψ(G(z))` and attack block as the block whose own
/// contribution best explains `x′ − G(z)`. Ties go to the lowest block index.
pub fn classify(
    problem: &RedProblem,
    state: &SolverState,
    classifier: Option<&SyntheticClassifier>,
) -> Result<Classification> {
    let dict = problem.dictionary();
    if dict.is_empty() {
        return Err(Error::arg("attack classification needs a non-empty dictionary"));
    }
    let clean = problem.generator().forward(&state.z)?;
    let base = problem.observed() - &clean;
    let residuals = dict.block_residuals(&state.c, &base)?;
    let mut best = 0;
    for (i, r) in residuals.iter().enumerate() {
        if *r < residuals[best] {
            best = i;
        }
    }
    let signal_label = match classifier {
        Some(psi) => Some(psi.label(&clean)?),
        None => None,
    };
    let id = BlockId(best);
    let attack_label = dict.index().block(id).expect("in range").label();
    Ok(Classification { signal_label, attack_block: id, attack_label, block_residuals: residuals })
}
