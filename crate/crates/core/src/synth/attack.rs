use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::SyntheticClassifier;
use crate::linalg::norm;
use crate::{AttackDictionary, BlockIndex, Error, GeneratorNetwork, Result, Vector};

/// Single-step perturbations of the synthetic classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackType {
    /// `η ∇ψ(x)`.
    Gradient,
    /// `η ∇ψ(x) / ‖∇ψ(x)‖₂`.
    NormalizedGradient,
    /// `η sign(∇ψ(x)) / √m`, an ℓ∞ step with the same ℓ2 length as the
    /// normalized one.
    Sign,
}

impl AttackType {
    pub const ALL: [AttackType; 3] = [AttackType::Gradient, AttackType::NormalizedGradient, AttackType::Sign];

    /// Integer label stored in the block index.
    pub fn label(self) -> i64 {
        match self {
            AttackType::Gradient => 0,
            AttackType::NormalizedGradient => 1,
            AttackType::Sign => 2,
        }
    }

    pub fn from_label(label: i64) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.label() == label)
    }

    pub fn name(self) -> &'static str {
        match self {
            AttackType::Gradient => "gradient",
            AttackType::NormalizedGradient => "normalized_gradient",
            AttackType::Sign => "sign",
        }
    }
}

/// `η ∇ψ(x)`.
pub fn single_step_attack(classifier: &SyntheticClassifier, x: &Vector, eta_attack: f64) -> Result<Vector> {
    attack(classifier, x, eta_attack, AttackType::Gradient)
}

pub fn attack(classifier: &SyntheticClassifier, x: &Vector, eta_attack: f64, kind: AttackType) -> Result<Vector> {
    if !(eta_attack > 0.0 && eta_attack.is_finite()) {
        return Err(Error::arg(format!("attack step must be positive, got {eta_attack}")));
    }
    let g = classifier.gradient(x)?;
    Ok(match kind {
        AttackType::Gradient => g * eta_attack,
        AttackType::NormalizedGradient => {
            let n = norm(&g);
            if n == 0.0 {
                g
            } else {
                g * (eta_attack / n)
            }
        }
        AttackType::Sign => {
            let scale = eta_attack / (x.len() as f64).sqrt();
            g.mapv(|v| if v > 0.0 { scale } else if v < 0.0 { -scale } else { 0.0 })
        }
    })
}

/// Which attack type each training sample contributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackLabeling {
    /// Every column is a plain gradient step.
    GradientOnly,
    /// Sample `t` gets `AttackType::ALL[t mod 3]`.
    #[default]
    RoundRobin,
}

impl AttackLabeling {
    pub fn type_of(self, t: usize) -> AttackType {
        match self {
            AttackLabeling::GradientOnly => AttackType::Gradient,
            AttackLabeling::RoundRobin => AttackType::ALL[t % 3],
        }
    }
}

/// One column per training latent: the attack on `G(z_t)` of the type the
/// labeling assigns to `t`. Columns are grouped into blocks keyed by
/// `(label of ψ(G(z_t)), attack type)` in ascending key order, keeping
/// training order inside a block; empty blocks are dropped.
pub fn build_attack_dictionary(
    classifier: &SyntheticClassifier,
    train_latents: &[Vector],
    generator: &GeneratorNetwork,
    eta_attack: f64,
    labeling: AttackLabeling,
) -> Result<AttackDictionary> {
    if train_latents.is_empty() {
        return Err(Error::arg("attack dictionary needs at least one training latent"));
    }
    let m = generator.output_dim();
    if classifier.input_dim() != m {
        return Err(Error::shape(format!("classifier expects {} inputs, generator outputs {m}", classifier.input_dim())));
    }
    let mut groups: BTreeMap<(i64, i64), Vec<Vector>> = BTreeMap::new();
    for (t, z) in train_latents.iter().enumerate() {
        let x = generator.forward(z)?;
        let class = i64::from(classifier.label(&x)?);
        let kind = labeling.type_of(t);
        let col = attack(classifier, &x, eta_attack, kind)?;
        groups.entry((class, kind.label())).or_default().push(col);
    }
    let sizes: Vec<(i64, i64, usize)> = groups.iter().map(|(&(c, a), cols)| (c, a, cols.len())).collect();
    let cols: Vec<&Vector> = groups.values().flatten().collect();
    let matrix = Array2::from_shape_fn((m, cols.len()), |(i, j)| cols[j][i]);
    AttackDictionary::new(matrix, BlockIndex::from_sizes(&sizes)?)
}
