use ndarray::Array2;
use crate::linalg::norm_sq;
use crate::{Error, GeneratorNetwork, Matrix, Result, Vector};

/// `values[[i, j]] = ½‖x − G(z1[i], z2[j])‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Landscape {
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
    pub values: Matrix,
}

impl Landscape {
    /// Grid index and value of the smallest entry (first in row-major order on ties).
    pub fn argmin(&self) -> ((usize, usize), f64) {
        let mut best = ((0, 0), f64::INFINITY);
        for ((i, j), &v) in self.values.indexed_iter() {
            if v < best.1 {
                best = ((i, j), v);
            }
        }
        best
    }
}

fn linspace(range: (f64, f64), n: usize) -> Vec<f64> {
    let (lo, hi) = range;
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Evaluates the inversion loss on a `resolution × resolution` grid spanning
/// both ranges inclusively.
pub fn landscape_grid(
    g: &GeneratorNetwork,
    x_target: &Vector,
    z1_range: (f64, f64),
    z2_range: (f64, f64),
    resolution: usize,
) -> Result<Landscape> {
    if g.latent_dim() != 2 {
        return Err(Error::Unsupported(format!("landscape grids need a 2-D latent space, got d = {}", g.latent_dim())));
    }
    if resolution < 2 {
        return Err(Error::arg("landscape resolution must be at least 2"));
    }
    if x_target.len() != g.output_dim() {
        return Err(Error::shape(format!("target has length {}, network output is {}", x_target.len(), g.output_dim())));
    }
    for (lo, hi) in [z1_range, z2_range] {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::arg(format!("invalid grid range [{lo}, {hi}]")));
        }
    }
    let z1 = linspace(z1_range, resolution);
    let z2 = linspace(z2_range, resolution);
    let mut values = Array2::zeros((resolution, resolution));
    for (i, &a) in z1.iter().enumerate() {
        for (j, &b) in z2.iter().enumerate() {
            let out = g.forward(&Vector::from(vec![a, b]))?;
            values[[i, j]] = 0.5 * norm_sq(&(x_target - &out));
        }
    }
    Ok(Landscape { z1, z2, values })
}

/// Number of 8-connected components of the sublevel set `{values < threshold}`.
pub fn count_basins(values: &Matrix, threshold: f64) -> usize {
    let (rows, cols) = values.dim();
    let mut seen = Array2::from_elem((rows, cols), false);
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..rows * cols {
        let (si, sj) = (start / cols, start % cols);
        if seen[[si, sj]] || !(values[[si, sj]] < threshold) {
            continue;
        }
        count += 1;
        seen[[si, sj]] = true;
        stack.push((si, sj));
        while let Some((i, j)) = stack.pop() {
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if ni < 0 || nj < 0 || ni >= rows as i64 || nj >= cols as i64 {
                        continue;
                    }
                    let (ni, nj) = (ni as usize, nj as usize);
                    if !seen[[ni, nj]] && values[[ni, nj]] < threshold {
                        seen[[ni, nj]] = true;
                        stack.push((ni, nj));
                    }
                }
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Activation;
    use ndarray::array;

    #[test]
    fn basins_by_hand() {
        let v = array![[0.0, 5.0, 0.0], [5.0, 5.0, 5.0], [5.0, 5.0, 0.0]];
        assert_eq!(count_basins(&v, 1.0), 3);
        let diag = array![[0.0, 5.0], [5.0, 0.0]];
        assert_eq!(count_basins(&diag, 1.0), 1);
        assert_eq!(count_basins(&v, 10.0), 1);
        assert_eq!(count_basins(&v, -1.0), 0);
    }

    #[test]
    fn grid_shape_and_axes() {
        let g = GeneratorNetwork::single_layer(Array2::eye(2), Activation::leaky_relu(0.1)).unwrap();
        let l = landscape_grid(&g, &array![1.0, 1.0], (0.0, 2.0), (-1.0, 1.0), 5).unwrap();
        assert_eq!(l.values.dim(), (5, 5));
        assert_eq!(l.z1, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(l.z2[0], -1.0);
        assert_eq!(l.z2[4], 1.0);
        // f(z1 = 1, z2 = 1) = 0
        assert_eq!(l.values[[2, 4]], 0.0);
        assert_eq!(l.argmin(), ((2, 4), 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let g3 = GeneratorNetwork::single_layer(Array2::eye(3), Activation::Sigmoid).unwrap();
        let r = landscape_grid(&g3, &array![0.0, 0.0, 0.0], (0.0, 1.0), (0.0, 1.0), 4);
        assert!(matches!(r, Err(Error::Unsupported(_))));
        let g2 = GeneratorNetwork::single_layer(Array2::eye(2), Activation::Sigmoid).unwrap();
        assert!(landscape_grid(&g2, &array![0.0, 0.0], (0.0, 1.0), (0.0, 1.0), 1).is_err());
        assert!(landscape_grid(&g2, &array![0.0, 0.0], (1.0, 1.0), (0.0, 1.0), 3).is_err());
    }
}
