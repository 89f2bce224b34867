use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, generate_instance, InstanceSpec, RealizableInstance, WeightFamily};
use crate::solver::{solve, Init, SolverConfig};
use crate::{Activation, Error, Result};

/// Settings shared by every solve in a μ experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    /// Solver settings; `init` is replaced by a per-trial random start.
    pub solver: SolverConfig,
    pub activation: Activation,
    /// A run counts as converged when its final joint error is below this.
    pub converge_tol: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig { max_iters: 5000, tol_grad: 1e-13, tol_loss: 0.0, ..SolverConfig::default() },
            activation: Activation::leaky_relu(0.1),
            converge_tol: 1e-6,
        }
    }
}

/// Outcome of one seeded solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuTrial {
    pub init_seed: u64,
    pub converged: bool,
    /// Average of the per-iterate μ estimates along the path.
    pub mean_mu: Option<f64>,
    pub iterations: usize,
    pub final_error: Option<f64>,
}

/// Solves `instance` from `z ~ N(0, I)` (seeded), `c = 0` and averages the
/// μ estimate over the visited iterates. Divergence is reported as a
/// non-converged trial rather than an error.
pub fn run_mu_trial(instance: &RealizableInstance, config: &SweepConfig, init_seed: u64) -> Result<MuTrial> {
    let solver = SolverConfig { init: Init::RandomNormal { seed: init_seed }, ..config.solver.clone() };
    let gt = instance.ground_truth();
    match solve(&instance.problem, &solver, Some(&gt)) {
        Ok((state, trace)) => {
            let final_error = trace.last().and_then(|r| r.joint_error());
            Ok(MuTrial {
                init_seed,
                converged: final_error.is_some_and(|e| e < config.converge_tol),
                mean_mu: trace.mean_mu(),
                iterations: state.iter,
                final_error,
            })
        }
        Err(Error::Divergence { iter, .. }) => {
            Ok(MuTrial { init_seed, converged: false, mean_mu: None, iterations: iter, final_error: None })
        }
        Err(e) => Err(e),
    }
}

/// One line of the μ-vs-m table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: usize,
    /// Mean over converged instances of the trajectory-averaged μ.
    pub mean_mu: Option<f64>,
    /// Population standard deviation of the same values.
    pub std_mu: Option<f64>,
    pub n_converged: usize,
    pub n_failed: usize,
    pub trials: Vec<MuTrial>,
}

/// Pure-inversion random-Gaussian instances (`d × m` weights, `N(0, 1)`
/// entries) for each `m`. Instance `i` uses the same seeds at every `m`, so
/// rows are paired. Instances run in parallel on the current rayon pool.
pub fn mu_vs_m_sweep(
    d: usize,
    m_values: &[usize],
    n_instances: usize,
    config: &SweepConfig,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if d == 0 || n_instances == 0 || m_values.is_empty() {
        return Err(Error::arg("sweep needs d ≥ 1, at least one instance and at least one m"));
    }
    if let Some(m) = m_values.iter().find(|&&m| m < d) {
        return Err(Error::arg(format!("every m must be at least d = {d}, got {m}")));
    }
    let jobs: Vec<(usize, usize)> =
        m_values.iter().enumerate().flat_map(|(r, _)| (0..n_instances).map(move |i| (r, i))).collect();
    let results: Vec<Result<MuTrial>> = jobs
        .par_iter()
        .map(|&(r, i)| {
            let inst_seed = derive_seed(seed, i as u64, 0);
            let spec = InstanceSpec {
                family: WeightFamily::RandomGaussian { m: m_values[r], d, seed: derive_seed(inst_seed, 0, 0) },
                activation: config.activation,
                n_train: 0,
                seed: inst_seed,
                ..InstanceSpec::default()
            };
            let inst = generate_instance(&spec)?;
            run_mu_trial(&inst, config, derive_seed(inst_seed, 5, 0))
        })
        .collect();

    let mut rows: Vec<SweepRow> = m_values
        .iter()
        .map(|&m| SweepRow { m, mean_mu: None, std_mu: None, n_converged: 0, n_failed: 0, trials: Vec::new() })
        .collect();
    for (&(r, _), res) in jobs.iter().zip(results) {
        rows[r].trials.push(res?);
    }
    for row in &mut rows {
        let mus: Vec<f64> = row.trials.iter().filter(|t| t.converged).filter_map(|t| t.mean_mu).collect();
        row.n_converged = mus.len();
        row.n_failed = row.trials.len() - mus.len();
        if !mus.is_empty() {
            let n = mus.len() as f64;
            let mean = mus.iter().sum::<f64>() / n;
            let var = mus.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            row.mean_mu = Some(mean);
            row.std_mu = Some(var.sqrt());
        }
    }
    Ok(rows)
}
