//! `red`: GAN inversion, attack recovery, synthetic experiments and
//! convergence diagnostics from the command line.
//!
//! Exit codes: 0 success, 2 input error, 3 divergence, 4 infeasible diagnostic.

mod commands;
mod manifest;
mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use parse::{FamilyKind, InitSpec, LambdaSpec};

#[derive(Parser, Debug)]
#[command(name = "red", version, about = "Alternating GAN inversion with block-sparse attack recovery")]
struct Cli {
    /// Worker threads for parallel experiments.
    #[arg(long, global = true, env = "RED_SOLVE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Invert a generator: find z with G(z) close to the target.
    Invert(InvertArgs),
    /// Joint recovery of z and block-sparse attack coefficients.
    Solve(SolveArgs),
    /// Synthetic instances and experiments.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Convergence diagnostics.
    #[command(subcommand)]
    Diagnose(DiagnoseCommand),
}

#[derive(Args, Debug, Clone)]
pub struct SolverFlags {
    /// Solver configuration JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long = "eta-z")]
    eta_z: Option<f64>,
    #[arg(long = "eta-c")]
    eta_c: Option<f64>,
    /// Nesterov momentum on the attack coefficients.
    #[arg(long)]
    nesterov: bool,
    /// random | multirestart:<n>:<warm> | file[:<path>]
    #[arg(long, value_parser = parse::init)]
    init: Option<InitSpec>,
    /// Latent start for `--init file`.
    #[arg(long = "init-file")]
    init_file: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InvertArgs {
    /// Network manifest JSON.
    #[arg(long)]
    network: PathBuf,
    /// Target vector CSV.
    #[arg(long)]
    target: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Instance directory written by `synth gen`; supplies network,
    /// dictionary, target and classifier unless given explicitly.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long)]
    network: Option<PathBuf>,
    /// Dictionary manifest JSON.
    #[arg(long)]
    dictionary: Option<PathBuf>,
    #[arg(long)]
    target: Option<PathBuf>,
    /// Classifier manifest JSON, enables the signal label.
    #[arg(long)]
    classifier: Option<PathBuf>,
    /// Numeric value or auto:<factor> (factor × lambda_max at the start).
    #[arg(long, value_parser = parse::lambda, default_value = "0")]
    lambda: LambdaSpec,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
enum SynthCommand {
    /// Generate a realizable instance directory.
    Gen(GenArgs),
    /// Trajectory-averaged error-bound parameter against output dimension.
    SweepMu(SweepArgs),
    /// Inversion loss on a 2-D latent grid.
    Landscape(LandscapeArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "random")]
    family: FamilyKind,
    #[arg(long, default_value_t = 100)]
    m: usize,
    /// Latent dimension (random family only).
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long = "noise-sd", default_value_t = 0.2)]
    noise_sd: f64,
    /// leaky[:slope] | sigmoid | softplus[:beta]
    #[arg(long, value_parser = parse::activation, default_value = "leaky:0.1")]
    activation: red_core::Activation,
    /// Training latents behind the dictionary; 0 gives pure inversion.
    #[arg(long = "n-train", default_value_t = 12)]
    n_train: usize,
    #[arg(long = "eta-attack", default_value_t = 1.0)]
    eta_attack: f64,
    #[arg(long = "coeff-scale", default_value_t = 1.0)]
    coeff_scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Comma-separated output dimensions.
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    d: usize,
    /// Instances per output dimension.
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, value_parser = parse::activation, default_value = "leaky:0.1")]
    activation: red_core::Activation,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct LandscapeArgs {
    #[arg(long, value_enum, default_value = "orthonormal2d")]
    family: FamilyKind,
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long = "noise-sd", default_value_t = 0.2)]
    noise_sd: f64,
    #[arg(long, value_parser = parse::activation, default_value = "leaky:0.1")]
    activation: red_core::Activation,
    /// Grid points per axis.
    #[arg(long, default_value_t = 100)]
    res: usize,
    #[arg(long = "z1-range", value_parser = parse::range, default_value = "-3,3", allow_hyphen_values = true)]
    z1_range: (f64, f64),
    #[arg(long = "z2-range", value_parser = parse::range, default_value = "-3,3", allow_hyphen_values = true)]
    z2_range: (f64, f64),
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
enum DiagnoseCommand {
    /// Error-bound parameter at a state, or along a solve when no state is given.
    Mu(StateArgs),
    /// Extremal Hessian eigenvalues by power iteration (smooth activations).
    Eigs(StateArgs),
    /// Theoretical contraction factor.
    Rate(RateArgs),
    /// Admissible step sizes for the linear rate.
    Window(WindowArgs),
    /// Weight distribution condition check.
    Wdc(WdcArgs),
    /// Sampled checks of the co-coercivity and ζ-bound inequalities.
    Lemmas(LemmaArgs),
}

#[derive(Args, Debug)]
pub struct StateArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Latent point CSV; defaults to the ground truth for eigs.
    #[arg(long)]
    z: Option<PathBuf>,
    /// Coefficient CSV; defaults to the ground truth (or zero with --z).
    #[arg(long)]
    c: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RateArgs {
    #[arg(long)]
    eta: f64,
    #[arg(long)]
    mu: f64,
    #[arg(long)]
    rho: f64,
    #[arg(long)]
    eps: f64,
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct WindowArgs {
    #[arg(long)]
    mu: f64,
    #[arg(long)]
    rho: f64,
    #[arg(long)]
    eps: f64,
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct WdcArgs {
    #[arg(long, value_enum, default_value = "random")]
    family: FamilyKind,
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long = "noise-sd", default_value_t = 0.2)]
    noise_sd: f64,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 20)]
    pairs: usize,
    #[arg(long, default_value_t = red_core::diagnostics::MIN_MC_SAMPLES)]
    mc: usize,
    /// Use the weights as generated instead of rescaling rows to mean squared norm k/n.
    #[arg(long)]
    raw: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LemmaArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Invert(a) => commands::invert(a),
        Command::Solve(a) => commands::solve(a),
        Command::Synth(SynthCommand::Gen(a)) => commands::synth_gen(a),
        Command::Synth(SynthCommand::SweepMu(a)) => commands::synth_sweep(a),
        Command::Synth(SynthCommand::Landscape(a)) => commands::synth_landscape(a),
        Command::Diagnose(DiagnoseCommand::Mu(a)) => commands::diagnose_mu(a),
        Command::Diagnose(DiagnoseCommand::Eigs(a)) => commands::diagnose_eigs(a),
        Command::Diagnose(DiagnoseCommand::Rate(a)) => commands::diagnose_rate(a),
        Command::Diagnose(DiagnoseCommand::Window(a)) => commands::diagnose_window(a),
        Command::Diagnose(DiagnoseCommand::Wdc(a)) => commands::diagnose_wdc(a),
        Command::Diagnose(DiagnoseCommand::Lemmas(a)) => commands::diagnose_lemmas(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
