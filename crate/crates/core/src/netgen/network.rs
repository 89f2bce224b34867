use ndarray::Array2;

use super::Activation;
use crate::{Error, Matrix, Result, Vector};

/// A fully connected generator `G(z) = σ(W_L σ(⋯σ(W_1 z)))` with fixed weights.
///
/// `weights[i]` has shape `n_{i+1} × n_i`; the latent dimension is the column
/// count of the first layer and the output dimension the row count of the last.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorNetwork {
    weights: Vec<Matrix>,
    activation: Activation,
}

impl GeneratorNetwork {
    pub fn new(weights: Vec<Matrix>, activation: Activation) -> Result<Self> {
        activation.validate()?;
        if weights.is_empty() {
            return Err(Error::arg("a generator needs at least one layer"));
        }
        for (i, w) in weights.iter().enumerate() {
            if w.is_empty() {
                return Err(Error::shape(format!("layer {i} has an empty weight matrix")));
            }
            if w.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numeric(format!("layer {i} has non-finite weights")));
            }
        }
        for (i, pair) in weights.windows(2).enumerate() {
            if pair[1].ncols() != pair[0].nrows() {
                return Err(Error::shape(format!(
                    "layer {} expects input of size {} but layer {} produces {}",
                    i + 1,
                    pair[1].ncols(),
                    i,
                    pair[0].nrows()
                )));
            }
        }
        Ok(Self { weights, activation })
    }

    /// Single-layer network `σ(W z)`.
    pub fn single_layer(w: Matrix, activation: Activation) -> Result<Self> {
        Self::new(vec![w], activation)
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights[self.weights.len() - 1].nrows()
    }

    fn check_latent(&self, z: &Vector) -> Result<()> {
        if z.len() != self.latent_dim() {
            return Err(Error::shape(format!(
                "latent vector has length {}, network expects {}",
                z.len(),
                self.latent_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, z: &Vector) -> Result<Vector> {
        self.check_latent(z)?;
        let act = self.activation;
        let mut h = z.clone();
        for w in &self.weights {
            h = w.dot(&h).mapv(|x| act.value(x));
        }
        Ok(h)
    }

    /// Forward pass that also returns the pre-activation `W_i h_{i−1}` of every
    /// layer, which the pullback needs for `σ′`.
    pub fn forward_with_activations(&self, z: &Vector) -> Result<(Vector, Vec<Vector>)> {
        self.check_latent(z)?;
        let act = self.activation;
        let mut preacts = Vec::with_capacity(self.weights.len());
        let mut h = z.clone();
        for w in &self.weights {
            let pre = w.dot(&h);
            h = pre.mapv(|x| act.value(x));
            preacts.push(pre);
        }
        Ok((h, preacts))
    }

    /// `J_G(z)ᵀ r = (W_1 R_1)ᵀ ⋯ (W_L R_L)ᵀ r` with `R_i = diag(σ′(preact_i))`.
    pub fn pullback(&self, z: &Vector, r: &Vector) -> Result<Vector> {
        let (_, preacts) = self.forward_with_activations(z)?;
        self.pullback_from(&preacts, r)
    }

    /// Pullback using pre-activations cached by [`forward_with_activations`].
    ///
    /// [`forward_with_activations`]: Self::forward_with_activations
    pub fn pullback_from(&self, preacts: &[Vector], r: &Vector) -> Result<Vector> {
        if r.len() != self.output_dim() {
            return Err(Error::shape(format!(
                "cotangent has length {}, network output is {}",
                r.len(),
                self.output_dim()
            )));
        }
        if preacts.len() != self.weights.len() {
            return Err(Error::shape("pre-activation cache does not match network depth"));
        }
        let act = self.activation;
        let mut g = r.clone();
        for (w, pre) in self.weights.iter().zip(preacts).rev() {
            let scaled = &g * &pre.mapv(|x| act.deriv(x));
            g = w.t().dot(&scaled);
        }
        Ok(g)
    }

    /// Dense Jacobian `∂G/∂z` (m × d).
    pub fn jacobian(&self, z: &Vector) -> Result<Matrix> {
        let (_, preacts) = self.forward_with_activations(z)?;
        let act = self.activation;
        let mut jac: Matrix = Array2::eye(self.latent_dim());
        for (w, pre) in self.weights.iter().zip(&preacts) {
            let d = pre.mapv(|x| act.deriv(x));
            let mut layer = w.dot(&jac);
            for (mut row, s) in layer.rows_mut().into_iter().zip(d.iter()) {
                row *= *s;
            }
            jac = layer;
        }
        Ok(jac)
    }
}

/// Hessian-vector product by central differences of a gradient oracle:
/// `(∇f(p + h v) − ∇f(p − h v)) / 2h`.
///
/// Exact for quadratics. `v` is used as given; callers normally pass a unit
/// vector so that `step` is the actual displacement.
pub fn hessian_vector_product<F>(grad: F, point: &Vector, v: &Vector, step: f64) -> Result<Vector>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    if !(step > 0.0) {
        return Err(Error::arg(format!("finite-difference step must be positive, got {step}")));
    }
    if v.len() != point.len() {
        return Err(Error::shape("direction and point differ in length"));
    }
    let plus = grad(&(point + &(v * step)))?;
    let minus = grad(&(point - &(v * step)))?;
    let hv = (plus - minus) / (2.0 * step);
    if hv.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("gradient oracle returned a non-finite value".into()));
    }
    Ok(hv)
}
