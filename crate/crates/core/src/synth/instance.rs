use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{build_attack_dictionary, derive_seed, make_generator, AttackLabeling, SyntheticClassifier, WeightFamily};
use crate::solver::GroundTruth;
use crate::{Activation, AttackDictionary, BlockId, BlockVector, Error, GeneratorNetwork, RedProblem, Result, Vector};

/// A problem whose observation was assembled as `G(z*) + D c*`.
#[derive(Debug, Clone)]
pub struct RealizableInstance {
    pub problem: RedProblem,
    pub z_star: Vector,
    pub c_star: BlockVector,
    pub classifier: Option<SyntheticClassifier>,
    /// Block carrying `c*`; `None` for pure inversion.
    pub true_block: Option<BlockId>,
    /// Recipe the instance was generated from, when it came from
    /// [`generate_instance`].
    pub spec: Option<InstanceSpec>,
}

impl RealizableInstance {
    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth { z: self.z_star.clone(), c: self.c_star.values().clone() }
    }

    /// `(signal_class, attack_type)` of the true block.
    pub fn true_label(&self) -> Option<(i64, i64)> {
        let id = self.true_block?;
        self.problem.dictionary().index().block(id).map(|b| b.label())
    }
}

fn gaussian(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vector {
    Array1::from_shape_fn(n, |_| {
        let g: f64 = StandardNormal.sample(rng);
        scale * g
    })
}

/// Draws `z* ~ N(0, I)` and `c*` with `N(0, coeff_scale²)` entries on
/// `support_block` (zero elsewhere), and sets `x′ = G(z*) + D c*`, `λ = 0`.
pub fn make_realizable(
    generator: GeneratorNetwork,
    dictionary: AttackDictionary,
    seed: u64,
    support_block: BlockId,
    coeff_scale: f64,
) -> Result<RealizableInstance> {
    if !(coeff_scale >= 0.0 && coeff_scale.is_finite()) {
        return Err(Error::arg(format!("coefficient scale must be non-negative, got {coeff_scale}")));
    }
    let block = dictionary
        .index()
        .block(support_block)
        .ok_or_else(|| Error::arg(format!("dictionary has no block {}", support_block.0)))?
        .clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z_star = gaussian(generator.latent_dim(), 1.0, &mut rng);
    let mut c = Array1::zeros(dictionary.cols());
    for i in block.range() {
        let g: f64 = StandardNormal.sample(&mut rng);
        c[i] = coeff_scale * g;
    }
    let c_star = dictionary.coefficients(c)?;
    let observed = generator.forward(&z_star)? + dictionary.apply(&c_star)?;
    let problem = RedProblem::new(observed, generator, dictionary, 0.0)?;
    Ok(RealizableInstance { problem, z_star, c_star, classifier: None, true_block: Some(support_block), spec: None })
}

/// Pure inversion instance `x′ = G(z*)` with `z* ~ N(0, I)`.
pub fn make_inversion(generator: GeneratorNetwork, seed: u64) -> Result<RealizableInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z_star = gaussian(generator.latent_dim(), 1.0, &mut rng);
    let observed = generator.forward(&z_star)?;
    let problem = RedProblem::inversion(observed, generator)?;
    let c_star = problem.dictionary().zero_coefficients();
    Ok(RealizableInstance { problem, z_star, c_star, classifier: None, true_block: None, spec: None })
}

/// Full recipe for a synthetic instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstanceSpec {
    pub family: WeightFamily,
    pub activation: Activation,
    /// Training latents behind the dictionary; `0` gives pure inversion.
    pub n_train: usize,
    /// Hidden width of the classifier; defaults to the output dimension.
    pub classifier_width: Option<usize>,
    pub eta_attack: f64,
    pub labeling: AttackLabeling,
    pub coeff_scale: f64,
    /// Fixed support block; drawn uniformly when absent.
    pub support_block: Option<usize>,
    pub seed: u64,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            family: WeightFamily::RandomGaussian { m: 100, d: 10, seed: 0 },
            activation: Activation::leaky_relu(0.1),
            n_train: 12,
            classifier_width: None,
            eta_attack: 1.0,
            labeling: AttackLabeling::RoundRobin,
            coeff_scale: 1.0,
            support_block: None,
            seed: 0,
        }
    }
}

impl InstanceSpec {
    /// Random-Gaussian family whose weight seed is derived from `seed`.
    pub fn random_gaussian(m: usize, d: usize, seed: u64) -> Self {
        Self { family: WeightFamily::RandomGaussian { m, d, seed: derive_seed(seed, 0, 0) }, seed, ..Self::default() }
    }
}

/// Builds generator, classifier, training set, dictionary and ground truth
/// from one spec. Every random draw is derived from `spec.seed` (and the
/// family's own seed for the weights).
pub fn generate_instance(spec: &InstanceSpec) -> Result<RealizableInstance> {
    let generator = make_generator(&spec.family, spec.activation)?;
    let m = generator.output_dim();
    let d = generator.latent_dim();
    let width = spec.classifier_width.unwrap_or(m);
    let classifier = SyntheticClassifier::random(m, width, spec.activation, derive_seed(spec.seed, 1, 0))?;
    let truth_seed = derive_seed(spec.seed, 2, 0);

    let mut inst = if spec.n_train == 0 {
        make_inversion(generator, truth_seed)?
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 3, 0));
        let latents: Vec<Vector> = (0..spec.n_train).map(|_| gaussian(d, 1.0, &mut rng)).collect();
        let dict = build_attack_dictionary(&classifier, &latents, &generator, spec.eta_attack, spec.labeling)?;
        let block = match spec.support_block {
            Some(b) => b,
            None => ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 4, 0)).random_range(0..dict.index().num_blocks()),
        };
        make_realizable(generator, dict, truth_seed, BlockId(block), spec.coeff_scale)?
    };
    inst.classifier = Some(classifier);
    inst.spec = Some(spec.clone());
    Ok(inst)
}
