//! Parsers for the compact flag syntaxes (`auto:0.35`, `multirestart:8:100`,
//! `leaky:0.1`, `20,50,100`).

use std::path::PathBuf;

use red_core::synth::{derive_seed, WeightFamily};
use red_core::Activation;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaSpec {
    Value(f64),
    /// Multiple of `lambda_max` at the initial point.
    Auto(f64),
}

pub fn lambda(s: &str) -> Result<LambdaSpec, String> {
    let number = |t: &str| -> Result<f64, String> {
        let v: f64 = t.parse().map_err(|_| format!("{t:?} is not a number"))?;
        if v >= 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(format!("lambda must be finite and non-negative, got {v}"))
        }
    };
    match s.strip_prefix("auto:") {
        Some(f) => Ok(LambdaSpec::Auto(number(f)?)),
        None if s == "auto" => Ok(LambdaSpec::Auto(red_core::solver::DEFAULT_LAMBDA_FACTOR)),
        None => Ok(LambdaSpec::Value(number(s)?)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Random,
    MultiRestart { n: usize, warm: usize },
    /// Latent start read from a vector CSV; `None` defers to `--init-file`.
    File(Option<PathBuf>),
}

pub fn init(s: &str) -> Result<InitSpec, String> {
    let parts: Vec<&str> = s.splitn(3, ':').collect();
    match parts.as_slice() {
        ["random"] => Ok(InitSpec::Random),
        ["multirestart"] => Ok(InitSpec::MultiRestart { n: 10, warm: 200 }),
        ["multirestart", n, warm] => Ok(InitSpec::MultiRestart {
            n: n.parse().map_err(|_| format!("bad restart count {n:?}"))?,
            warm: warm.parse().map_err(|_| format!("bad warm-up length {warm:?}"))?,
        }),
        ["file"] => Ok(InitSpec::File(None)),
        ["file", rest @ ..] => Ok(InitSpec::File(Some(PathBuf::from(rest.join(":"))))),
        _ => Err(format!("expected random, multirestart:<n>:<warm> or file[:<path>], got {s:?}")),
    }
}

pub fn activation(s: &str) -> Result<Activation, String> {
    let (kind, param) = match s.split_once(':') {
        Some((k, p)) => (k, Some(p.parse::<f64>().map_err(|_| format!("bad activation parameter {p:?}"))?)),
        None => (s, None),
    };
    let act = match kind {
        "leaky" | "leaky_relu" => Activation::leaky_relu(param.unwrap_or(0.1)),
        "sigmoid" if param.is_none() => Activation::Sigmoid,
        "softplus" => Activation::softplus(param.unwrap_or(1.0)),
        _ => return Err(format!("unknown activation {s:?}; use leaky[:slope], sigmoid or softplus[:beta]")),
    };
    act.validate().map_err(|e| e.to_string())?;
    Ok(act)
}

pub fn range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected lo,hi, got {s:?}"))?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("{a:?} is not a number"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("{b:?} is not a number"))?;
    if lo < hi {
        Ok((lo, hi))
    } else {
        Err(format!("range must have lo < hi, got {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FamilyKind {
    Random,
    Orthonormal2d,
    Perturbed2d,
    Hadamard,
    PerturbedHadamard,
    Vandermonde,
}

/// Weight family for the given shape; randomness is derived from `seed`.
pub fn family(kind: FamilyKind, m: usize, d: usize, noise_sd: f64, seed: u64) -> WeightFamily {
    let fseed = derive_seed(seed, 0, 0);
    match kind {
        FamilyKind::Random => WeightFamily::RandomGaussian { m, d, seed: fseed },
        FamilyKind::Orthonormal2d => WeightFamily::Orthonormal2D { m },
        FamilyKind::Perturbed2d => WeightFamily::Perturbed2D { m, noise_sd, seed: fseed },
        FamilyKind::Hadamard => WeightFamily::HadamardSpanned { m, noise_sd: None, seed: fseed },
        FamilyKind::PerturbedHadamard => WeightFamily::HadamardSpanned { m, noise_sd: Some(noise_sd), seed: fseed },
        FamilyKind::Vandermonde => WeightFamily::Vandermonde { m, normalized: true },
    }
}
