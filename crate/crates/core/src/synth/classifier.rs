use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Activation, Error, Matrix, Result, Vector};

/// `ψ(x) = k^{-1/2} Σ_ℓ a_ℓ σ(w_ℓ · x)` with fixed inner weights and signs.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticClassifier {
    /// `k × m`, row `ℓ` is `w_ℓ`.
    inner: Matrix,
    signs: Vector,
    activation: Activation,
}

impl SyntheticClassifier {
    pub fn new(inner: Matrix, signs: Vector, activation: Activation) -> Result<Self> {
        activation.validate()?;
        if inner.nrows() == 0 || inner.ncols() == 0 {
            return Err(Error::arg("classifier needs at least one unit and one input"));
        }
        if signs.len() != inner.nrows() {
            return Err(Error::shape(format!("{} signs for {} units", signs.len(), inner.nrows())));
        }
        if inner.iter().chain(signs.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Numeric("classifier parameters must be finite".into()));
        }
        Ok(Self { inner, signs, activation })
    }

    /// `w_ℓ ~ N(0, I_m/m)`, `a_ℓ` uniform on `{−1, +1}`.
    pub fn random(m: usize, k: usize, activation: Activation, seed: u64) -> Result<Self> {
        if m == 0 || k == 0 {
            return Err(Error::arg("classifier dimensions must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (m as f64).sqrt();
        let inner: Matrix = Array2::from_shape_fn((k, m), |_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g * scale
        });
        let signs: Vector = Array1::from_shape_fn(k, |_| if rng.random::<bool>() { 1.0 } else { -1.0 });
        Self::new(inner, signs, activation)
    }

    pub fn inner(&self) -> &Matrix {
        &self.inner
    }

    pub fn signs(&self) -> &Vector {
        &self.signs
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn width(&self) -> usize {
        self.inner.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.inner.ncols()
    }

    fn check(&self, x: &Vector) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::shape(format!("classifier input has length {}, expected {}", x.len(), self.input_dim())));
        }
        Ok(())
    }

    pub fn psi(&self, x: &Vector) -> Result<f64> {
        self.check(x)?;
        let act = self.activation;
        let h = self.inner.dot(x).mapv(|v| act.value(v));
        Ok(self.signs.dot(&h) / (self.width() as f64).sqrt())
    }

    /// `∇ψ(x) = k^{-1/2} Σ_ℓ a_ℓ σ′(w_ℓ · x) w_ℓ`.
    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        self.check(x)?;
        let act = self.activation;
        let coef = self.inner.dot(x).mapv(|v| act.deriv(v)) * &self.signs;
        Ok(self.inner.t().dot(&coef) / (self.width() as f64).sqrt())
    }

    /// `1` when `ψ(x) > 0`, else `0`.
    pub fn label(&self, x: &Vector) -> Result<u8> {
        Ok(u8::from(self.psi(x)? > 0.0))
    }
}
