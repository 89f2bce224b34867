use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use ndarray::Array1;
use serde_json::json;

use red_core::diagnostics::{
    analytic_rho_eps, check_wdc, estimate_mu_iterate, hessian_extremal_eigs, match_wdc_scale, step_window,
    theoretical_rate, verify_cocoercivity, verify_zeta_bound,
};
use red_core::io::{self, write_json};
use red_core::solver::{self, GroundTruth, SolverState, Trace};
use red_core::synth::{
    derive_seed, generate_instance, landscape_grid, make_generator, make_inversion, mu_vs_m_sweep, InstanceSpec,
    RealizableInstance, SweepConfig,
};
use red_core::{Init, RedProblem, SolverConfig, Vector};

use crate::manifest::Run;
use crate::parse::{self, FamilyKind, InitSpec, LambdaSpec};
use crate::{
    GenArgs, InvertArgs, LandscapeArgs, LemmaArgs, RateArgs, SolveArgs, SolverFlags, StateArgs, SweepArgs, WdcArgs,
    WindowArgs,
};

/// A diagnostic whose answer is "no admissible value".
#[derive(Debug)]
struct Infeasible(String);

impl std::fmt::Display for Infeasible {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Infeasible {}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Infeasible>().is_some() {
        return 4;
    }
    match e.downcast_ref::<red_core::Error>() {
        Some(red_core::Error::Divergence { .. }) => 3,
        Some(red_core::Error::DegenerateSpectrum(_)) | Some(red_core::Error::UndefinedAtOptimum(_)) => 4,
        _ => 2,
    }
}

/// Solver configuration from `--config` plus flag overrides. The init is
/// resolved later because `--init file` needs the problem dimensions.
fn base_config(flags: &SolverFlags, base: SolverConfig, inputs: &mut Vec<PathBuf>) -> anyhow::Result<SolverConfig> {
    let mut cfg = match &flags.config {
        Some(p) => {
            inputs.push(p.clone());
            io::read_json::<SolverConfig>(p)?
        }
        None => SolverConfig { init: Init::RandomNormal { seed: flags.seed }, ..base },
    };
    if let Some(n) = flags.iters {
        cfg.max_iters = n;
    }
    if flags.eta_z.is_some() {
        cfg.step_z = flags.eta_z;
    }
    if flags.eta_c.is_some() {
        cfg.step_c = flags.eta_c;
    }
    if flags.nesterov {
        cfg.nesterov = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_init(
    flags: &SolverFlags,
    cfg: &mut SolverConfig,
    problem: &RedProblem,
    inputs: &mut Vec<PathBuf>,
) -> anyhow::Result<()> {
    let Some(spec) = &flags.init else { return Ok(()) };
    cfg.init = match spec {
        InitSpec::Random => Init::RandomNormal { seed: flags.seed },
        InitSpec::MultiRestart { n, warm } => Init::MultiRestart { n_restarts: *n, warm_iters: *warm, seed: flags.seed },
        InitSpec::File(path) => {
            let path = path.clone().or_else(|| flags.init_file.clone()).ok_or_else(|| {
                red_core::Error::InvalidArgument("--init file needs a path (file:<path> or --init-file)".into())
            })?;
            let z0 = io::read_vector(&path)?;
            inputs.push(path);
            Init::Given { z0: z0.to_vec(), c0: vec![0.0; problem.num_coefficients()] }
        }
    };
    cfg.validate()?;
    Ok(())
}

fn init_seed(cfg: &SolverConfig) -> Vec<u64> {
    match cfg.init {
        Init::RandomNormal { seed } | Init::MultiRestart { seed, .. } => vec![seed],
        Init::Given { .. } => vec![],
    }
}

fn write_solution(run: &mut Run, problem: &RedProblem, state: &SolverState, trace: &Trace) -> anyhow::Result<()> {
    let outputs: [(&str, Vector); 2] =
        [("z_final.csv", state.z.clone()), ("reconstruction.csv", problem.generator().forward(&state.z)?)];
    let trace_path = run.path("trace.csv");
    io::write_trace(&trace_path, trace)?;
    run.output(&trace_path);
    for (name, v) in outputs {
        let p = run.path(name);
        io::write_vector(&p, &v)?;
        run.output(&p);
    }
    Ok(())
}

fn summary(trace: &Trace, cfg: &SolverConfig) -> serde_json::Value {
    let last = trace.last().expect("a solve records at least one iterate");
    let stop = if last.grad_z + last.grad_c <= cfg.tol_grad {
        "gradient"
    } else if last.loss <= cfg.tol_loss {
        "loss"
    } else {
        "max_iters"
    };
    json!({
        "iterations": last.iter,
        "loss": last.loss,
        "f": last.f,
        "grad_z": last.grad_z,
        "grad_c": last.grad_c,
        "stopped_by": stop,
        "joint_error": last.joint_error(),
    })
}

pub fn invert(a: InvertArgs) -> anyhow::Result<()> {
    let mut inputs = vec![a.network.clone(), a.target.clone()];
    let g = io::read_network(&a.network)?;
    let target = io::read_vector(&a.target)?;
    let problem = RedProblem::inversion(target, g)?;
    let mut cfg = base_config(&a.solver, SolverConfig::default(), &mut inputs)?;
    resolve_init(&a.solver, &mut cfg, &problem, &mut inputs)?;
    let start = solver::initial_state(&problem, &cfg)?;
    let (state, trace) = solver::solve_from(&problem, &cfg, start, None)?;

    let mut run = Run::new("invert", &a.out_dir);
    for p in &inputs {
        run.input(p);
    }
    write_solution(&mut run, &problem, &state, &trace)?;
    let result = run.path("result.json");
    write_json(&result, &summary(&trace, &cfg))?;
    run.output(&result);
    let seeds = init_seed(&cfg);
    run.finish(json!({ "solver": cfg }), seeds)
}

struct SolveInputs {
    problem: RedProblem,
    classifier: Option<red_core::synth::SyntheticClassifier>,
    truth: Option<GroundTruth>,
    inputs: Vec<PathBuf>,
}

fn load_solve_inputs(a: &SolveArgs) -> anyhow::Result<SolveInputs> {
    let mut inputs = Vec::new();
    let inst: Option<RealizableInstance> = match &a.instance {
        Some(dir) => {
            inputs.push(dir.clone());
            Some(io::read_instance(dir)?)
        }
        None => None,
    };
    let missing = |what: &str| red_core::Error::InvalidArgument(format!("--{what} is required without --instance"));
    let generator = match (&a.network, &inst) {
        (Some(p), _) => {
            inputs.push(p.clone());
            io::read_network(p)?
        }
        (None, Some(i)) => i.problem.generator().clone(),
        (None, None) => return Err(missing("network").into()),
    };
    let dictionary = match (&a.dictionary, &inst) {
        (Some(p), _) => {
            inputs.push(p.clone());
            io::read_dictionary(p)?
        }
        (None, Some(i)) => i.problem.dictionary().clone(),
        (None, None) => return Err(missing("dictionary").into()),
    };
    let observed = match (&a.target, &inst) {
        (Some(p), _) => {
            inputs.push(p.clone());
            io::read_vector(p)?
        }
        (None, Some(i)) => i.problem.observed().clone(),
        (None, None) => return Err(missing("target").into()),
    };
    let classifier = match (&a.classifier, &inst) {
        (Some(p), _) => {
            inputs.push(p.clone());
            Some(io::read_classifier(p)?)
        }
        (None, Some(i)) => i.classifier.clone(),
        (None, None) => None,
    };
    if dictionary.is_empty() {
        return Err(red_core::Error::InvalidArgument(
            "the attack dictionary is empty; use `red invert` for pure GAN inversion".into(),
        )
        .into());
    }
    let problem = RedProblem::new(observed, generator, dictionary, 0.0)?;
    // ground truth only applies when nothing was swapped out of the instance
    let untouched = a.network.is_none() && a.dictionary.is_none() && a.target.is_none();
    let truth = inst.filter(|_| untouched).map(|i| i.ground_truth());
    Ok(SolveInputs { problem, classifier, truth, inputs })
}

pub fn solve(a: SolveArgs) -> anyhow::Result<()> {
    let SolveInputs { problem, classifier, truth, mut inputs } = load_solve_inputs(&a)?;
    let mut cfg = base_config(&a.solver, SolverConfig::default(), &mut inputs)?;
    resolve_init(&a.solver, &mut cfg, &problem, &mut inputs)?;
    let start = solver::initial_state(&problem, &cfg)?;
    let (lambda, lambda_max) = match a.lambda {
        LambdaSpec::Value(v) => (v, None),
        LambdaSpec::Auto(f) => {
            let lm = solver::lambda_max(&problem, &start.z)?;
            (f * lm, Some(lm))
        }
    };
    let problem = problem.with_lambda(lambda)?;
    let (state, trace) = solver::solve_from(&problem, &cfg, start, truth.as_ref())?;
    let class = solver::classify(&problem, &state, classifier.as_ref())?;

    let mut run = Run::new("solve", &a.out_dir);
    for p in &inputs {
        run.input(p);
    }
    write_solution(&mut run, &problem, &state, &trace)?;
    let c_path = run.path("c_final.csv");
    io::write_vector(&c_path, state.c.values())?;
    run.output(&c_path);
    let (signal_class, attack_type) = class.attack_label;
    let report = json!({
        "attack_block": class.attack_block.0,
        "attack_label": { "signal_class": signal_class, "attack_type": attack_type },
        "block_residuals": class.block_residuals,
        "signal_label": class.signal_label,
        "lambda": lambda,
        "lambda_max": lambda_max,
        "result": summary(&trace, &cfg),
    });
    let class_path = run.path("classification.json");
    write_json(&class_path, &report)?;
    run.output(&class_path);
    let seeds = init_seed(&cfg);
    run.finish(json!({ "solver": cfg, "lambda": lambda, "lambda_spec": format!("{:?}", a.lambda) }), seeds)
}

pub fn synth_gen(a: GenArgs) -> anyhow::Result<()> {
    let spec = InstanceSpec {
        family: parse::family(a.family, a.m, a.d, a.noise_sd, a.seed),
        activation: a.activation,
        n_train: a.n_train,
        eta_attack: a.eta_attack,
        coeff_scale: a.coeff_scale,
        seed: a.seed,
        ..InstanceSpec::default()
    };
    let inst = generate_instance(&spec)?;
    let mut run = Run::new("synth gen", &a.out_dir);
    for p in io::write_instance(run.dir(), &inst)? {
        run.output(&p);
    }
    run.finish(json!({ "spec": spec }), vec![a.seed])
}

pub fn synth_sweep(a: SweepArgs) -> anyhow::Result<()> {
    let m_values: Vec<usize> = a.m.clone();
    if m_values.is_empty() {
        bail!(red_core::Error::InvalidArgument("--m needs at least one output dimension".into()));
    }
    let mut inputs = Vec::new();
    let solver_cfg = base_config(&a.solver, SweepConfig::default().solver, &mut inputs)?;
    let cfg = SweepConfig { solver: solver_cfg, activation: a.activation, ..SweepConfig::default() };
    let rows = mu_vs_m_sweep(a.d, &m_values, a.n, &cfg, a.solver.seed)?;

    let mut run = Run::new("synth sweep-mu", &a.out_dir);
    for p in &inputs {
        run.input(p);
    }
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut csv = String::from("m,mean_mu,std_mu,n_converged\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{},{}\n", r.m, opt(r.mean_mu), opt(r.std_mu), r.n_converged));
    }
    let csv_path = run.path("sweep.csv");
    io::write_atomic(&csv_path, csv.as_bytes())?;
    run.output(&csv_path);
    let json_path = run.path("sweep.json");
    write_json(&json_path, &rows)?;
    run.output(&json_path);
    run.finish(json!({ "d": a.d, "m": m_values, "n_instances": a.n, "sweep": cfg }), vec![a.solver.seed])
}

pub fn synth_landscape(a: LandscapeArgs) -> anyhow::Result<()> {
    let family = parse::family(a.family, a.m, 2, a.noise_sd, a.seed);
    let g = make_generator(&family, a.activation)?;
    let inst = make_inversion(g, derive_seed(a.seed, 2, 0))?;
    let grid =
        landscape_grid(inst.problem.generator(), inst.problem.observed(), a.z1_range, a.z2_range, a.res)?;

    let mut run = Run::new("synth landscape", &a.out_dir);
    let grid_path = run.path("landscape.csv");
    io::write_landscape(&grid_path, &grid)?;
    run.output(&grid_path);
    let z_path = run.path("z_star.csv");
    io::write_vector(&z_path, &inst.z_star)?;
    run.output(&z_path);
    let cfg = json!({
        "family": family,
        "activation": a.activation,
        "resolution": a.res,
        "z1_range": a.z1_range,
        "z2_range": a.z2_range,
    });
    run.finish(cfg, vec![a.seed])
}

/// Prints a report and, with an output directory, also stores it.
fn emit(command: &str, out_dir: Option<&Path>, report: &serde_json::Value, inputs: &[PathBuf], seeds: Vec<u64>) -> anyhow::Result<()> {
    // a closed pipe downstream is not an error for a report
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(report)?);
    if let Some(dir) = out_dir {
        let mut run = Run::new(command, dir);
        for p in inputs {
            run.input(p);
        }
        let path = run.path("report.json");
        write_json(&path, report)?;
        run.output(&path);
        run.finish(report.get("inputs").cloned().unwrap_or(serde_json::Value::Null), seeds)?;
    }
    Ok(())
}

/// State from `--z`/`--c`, or the ground truth when neither is given.
fn state_from_args(a: &StateArgs, inst: &RealizableInstance, inputs: &mut Vec<PathBuf>) -> anyhow::Result<Option<SolverState>> {
    let dict = inst.problem.dictionary();
    let z = match &a.z {
        Some(p) => {
            inputs.push(p.clone());
            Some(io::read_vector(p)?)
        }
        None => None,
    };
    let c = match &a.c {
        Some(p) => {
            inputs.push(p.clone());
            Some(io::read_vector(p)?)
        }
        None => None,
    };
    Ok(match (z, c) {
        (None, None) => None,
        (Some(z), c) => {
            let c = c.unwrap_or_else(|| Array1::zeros(dict.cols()));
            Some(SolverState::new(z, dict.coefficients(c)?))
        }
        (None, Some(c)) => Some(SolverState::new(inst.z_star.clone(), dict.coefficients(c)?)),
    })
}

pub fn diagnose_mu(a: StateArgs) -> anyhow::Result<()> {
    let mut inputs = vec![a.instance.clone()];
    let inst = io::read_instance(&a.instance)?;
    let truth = inst.ground_truth();
    let report = match state_from_args(&a, &inst, &mut inputs)? {
        Some(state) => {
            let mu = estimate_mu_iterate(&inst.problem, &state, &truth)?;
            json!({ "inputs": { "instance": a.instance, "z": a.z, "c": a.c }, "mu": mu })
        }
        None => {
            let mut cfg = base_config(&a.solver, SweepConfig::default().solver, &mut inputs)?;
            resolve_init(&a.solver, &mut cfg, &inst.problem, &mut inputs)?;
            let (_, trace) = solver::solve(&inst.problem, &cfg, Some(&truth))?;
            let mus: Vec<f64> = trace.records.iter().filter_map(|r| r.mu).collect();
            let max = mus.iter().copied().reduce(f64::max);
            json!({
                "inputs": { "instance": a.instance, "solver": cfg },
                "mean_mu": trace.mean_mu(),
                "min_mu": trace.min_mu(),
                "max_mu": max,
                "n_iterates": mus.len(),
                "final_joint_error": trace.last().and_then(|r| r.joint_error()),
            })
        }
    };
    emit("diagnose mu", a.out_dir.as_deref(), &report, &inputs, vec![])
}

pub fn diagnose_eigs(a: StateArgs) -> anyhow::Result<()> {
    let mut inputs = vec![a.instance.clone()];
    let inst = io::read_instance(&a.instance)?;
    let p = &inst.problem;
    let state = match state_from_args(&a, &inst, &mut inputs)? {
        Some(s) => s,
        None => SolverState::new(inst.z_star.clone(), inst.c_star.clone()),
    };
    let est = hessian_extremal_eigs(p, &state, 1e-10, 20_000)?;
    let c0: f64 = p.residual(&state.z, state.c.values())?.iter().map(|v| v.abs()).sum();
    let analytic = if p.generator().depth() == 1 {
        let (rho, eps) = analytic_rho_eps(p.generator(), p.dictionary(), c0)?;
        Some(json!({ "rho": rho, "eps": eps, "c_0": c0 }))
    } else {
        None
    };
    let report = json!({
        "inputs": { "instance": a.instance, "z": a.z, "c": a.c },
        "rho": est.rho,
        "eps": est.eps,
        "iterations": est.iterations,
        "converged": est.converged,
        "analytic_bound": analytic,
    });
    emit("diagnose eigs", a.out_dir.as_deref(), &report, &inputs, vec![])
}

pub fn diagnose_rate(a: RateArgs) -> anyhow::Result<()> {
    for (name, v) in [("eta", a.eta), ("mu", a.mu), ("rho", a.rho), ("eps", a.eps)] {
        if !v.is_finite() {
            bail!(red_core::Error::InvalidArgument(format!("{name} must be finite")));
        }
    }
    let rate = theoretical_rate(a.eta, a.mu, a.rho, a.eps);
    let report = json!({
        "inputs": { "eta": a.eta, "mu": a.mu, "rho": a.rho, "eps": a.eps },
        "rate": rate,
        "contracting": rate > 0.0 && rate < 1.0,
    });
    emit("diagnose rate", a.out_dir.as_deref(), &report, &[], vec![])
}

pub fn diagnose_window(a: WindowArgs) -> anyhow::Result<()> {
    let window = step_window(a.mu, a.rho, a.eps)?;
    let report = json!({ "inputs": { "mu": a.mu, "rho": a.rho, "eps": a.eps }, "window": window });
    emit("diagnose window", a.out_dir.as_deref(), &report, &[], vec![])?;
    if !window.is_feasible() {
        return Err(anyhow!(Infeasible(format!(
            "no admissible step: mu² = {} does not exceed 32·rho·eps/9 = {}",
            a.mu * a.mu,
            32.0 * a.rho * a.eps / 9.0
        ))));
    }
    Ok(())
}

pub fn diagnose_wdc(a: WdcArgs) -> anyhow::Result<()> {
    let d = if a.family == FamilyKind::Random { a.d } else { 0 };
    let family = parse::family(a.family, a.m, d.max(1), a.noise_sd, a.seed);
    let w = family.matrix()?;
    let w = if a.raw { w } else { match_wdc_scale(&w)? };
    let report = check_wdc(&w, a.epsilon, a.pairs, a.mc, a.seed)?;
    let out = json!({
        "inputs": { "family": family, "epsilon": a.epsilon, "pairs": a.pairs, "mc": a.mc, "matched_scale": !a.raw, "seed": a.seed },
        "satisfied": report.satisfied,
        "max_deviation": report.max_deviation,
        "report": report,
    });
    emit("diagnose wdc", a.out_dir.as_deref(), &out, &[], vec![a.seed])
}

pub fn diagnose_lemmas(a: LemmaArgs) -> anyhow::Result<()> {
    let inst = io::read_instance(&a.instance).with_context(|| format!("loading {}", a.instance.display()))?;
    let co = verify_cocoercivity(&inst.problem, a.trials, a.seed)?;
    let zeta = verify_zeta_bound(&inst.problem, a.trials, derive_seed(a.seed, 1, 0))?;
    let report = json!({
        "inputs": { "instance": a.instance, "trials": a.trials, "seed": a.seed },
        "passed": co.passed() && zeta.passed(),
        "cocoercivity": co,
        "zeta_bound": zeta,
    });
    emit("diagnose lemmas", a.out_dir.as_deref(), &report, std::slice::from_ref(&a.instance), vec![a.seed])
}
