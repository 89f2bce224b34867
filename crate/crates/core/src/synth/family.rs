use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Activation, Error, GeneratorNetwork, Matrix, Result};

/// Sylvester–Hadamard matrix of order 4.
pub const HADAMARD_4: [[f64; 4]; 4] = [
    [1.0, 1.0, 1.0, 1.0],
    [1.0, -1.0, 1.0, -1.0],
    [1.0, 1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0, 1.0],
];

const ORTHO_A: [f64; 2] = [-std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];
const ORTHO_B: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];

/// Weight matrices `W ∈ R^{m×d}` for single-layer generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum WeightFamily {
    /// i.i.d. `N(0, 1)` entries.
    RandomGaussian { m: usize, d: usize, seed: u64 },
    /// `d = 2`; rows alternate between `[−1, 1]/√2` and `[1, 1]/√2`.
    Orthonormal2D { m: usize },
    /// [`WeightFamily::Orthonormal2D`] plus `N(0, noise_sd²)` on every entry.
    Perturbed2D { m: usize, noise_sd: f64, seed: u64 },
    /// `d = 4`; row `i` is row `i mod 4` of [`HADAMARD_4`], optionally with
    /// `N(0, noise_sd²)` entrywise noise.
    HadamardSpanned { m: usize, noise_sd: Option<f64>, seed: u64 },
    /// `d = 2`; row `i` is `[1, i]` for `i = 1..=m`, rescaled to unit norm
    /// when `normalized`.
    Vandermonde { m: usize, normalized: bool },
}

impl WeightFamily {
    pub fn output_dim(&self) -> usize {
        match *self {
            WeightFamily::RandomGaussian { m, .. }
            | WeightFamily::Orthonormal2D { m }
            | WeightFamily::Perturbed2D { m, .. }
            | WeightFamily::HadamardSpanned { m, .. }
            | WeightFamily::Vandermonde { m, .. } => m,
        }
    }

    pub fn latent_dim(&self) -> usize {
        match *self {
            WeightFamily::RandomGaussian { d, .. } => d,
            WeightFamily::HadamardSpanned { .. } => 4,
            _ => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightFamily::RandomGaussian { .. } => "random",
            WeightFamily::Orthonormal2D { .. } => "orthonormal2d",
            WeightFamily::Perturbed2D { .. } => "perturbed2d",
            WeightFamily::HadamardSpanned { noise_sd: None, .. } => "hadamard",
            WeightFamily::HadamardSpanned { .. } => "perturbed_hadamard",
            WeightFamily::Vandermonde { .. } => "vandermonde",
        }
    }

    /// Seed of the family's own randomness, if it has any.
    pub fn seed(&self) -> Option<u64> {
        match *self {
            WeightFamily::RandomGaussian { seed, .. }
            | WeightFamily::Perturbed2D { seed, .. }
            | WeightFamily::HadamardSpanned { noise_sd: Some(_), seed, .. } => Some(seed),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let m = self.output_dim();
        if m == 0 {
            return Err(Error::arg("output dimension must be positive"));
        }
        match *self {
            WeightFamily::RandomGaussian { d: 0, .. } => Err(Error::arg("latent dimension must be positive")),
            WeightFamily::Perturbed2D { noise_sd, .. } | WeightFamily::HadamardSpanned { noise_sd: Some(noise_sd), .. }
                if !(noise_sd >= 0.0 && noise_sd.is_finite()) =>
            {
                Err(Error::arg(format!("noise standard deviation must be non-negative, got {noise_sd}")))
            }
            _ => Ok(()),
        }
    }

    pub fn matrix(&self) -> Result<Matrix> {
        self.validate()?;
        let m = self.output_dim();
        let noisy = |base: Matrix, sd: f64, seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            base.mapv(|x| {
                let g: f64 = StandardNormal.sample(&mut rng);
                x + sd * g
            })
        };
        let ortho = || Array2::from_shape_fn((m, 2), |(i, j)| if i % 2 == 0 { ORTHO_A[j] } else { ORTHO_B[j] });
        let w = match *self {
            WeightFamily::RandomGaussian { d, seed, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Array2::from_shape_fn((m, d), |_| StandardNormal.sample(&mut rng))
            }
            WeightFamily::Orthonormal2D { .. } => ortho(),
            WeightFamily::Perturbed2D { noise_sd, seed, .. } => noisy(ortho(), noise_sd, seed),
            WeightFamily::HadamardSpanned { noise_sd, seed, .. } => {
                let base = Array2::from_shape_fn((m, 4), |(i, j)| HADAMARD_4[i % 4][j]);
                match noise_sd {
                    Some(sd) => noisy(base, sd, seed),
                    None => base,
                }
            }
            WeightFamily::Vandermonde { normalized, .. } => {
                let mut w = Array2::from_shape_fn((m, 2), |(i, j)| if j == 0 { 1.0 } else { (i + 1) as f64 });
                if normalized {
                    for mut row in w.rows_mut() {
                        let n = row.dot(&row).sqrt();
                        row /= n;
                    }
                }
                w
            }
        };
        Ok(w)
    }
}

/// Single-layer generator `σ(W z)` with `W` drawn from `family`.
pub fn make_generator(family: &WeightFamily, activation: Activation) -> Result<GeneratorNetwork> {
    GeneratorNetwork::single_layer(family.matrix()?, activation)
}
