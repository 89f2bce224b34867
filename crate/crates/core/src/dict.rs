//! Block-structured attack dictionaries and the block ℓ1/ℓ2 machinery.
//!
//! Columns of `D_a` are grouped into blocks keyed by an opaque
//! `(signal_class, attack_type)` label pair. The regularizer is
//! `h(c) = Σ_b ‖c[b]‖₂` and its proximal map is blockwise soft thresholding.

use std::ops::Range;
use std::sync::Arc;

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::linalg::{extremal_eigenvalues, norm};
use crate::{Error, Matrix, Result, Vector};

/// Position of a block inside its [`BlockIndex`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub signal_class: i64,
    pub attack_type: i64,
    /// Half-open column range `[lo, hi)`.
    pub cols: (usize, usize),
}

impl Block {
    pub fn range(&self) -> Range<usize> {
        self.cols.0..self.cols.1
    }

    pub fn len(&self) -> usize {
        self.cols.1 - self.cols.0
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn label(&self) -> (i64, i64) {
        (self.signal_class, self.attack_type)
    }
}

/// Ordered partition of `[0, k_a)` into labelled, non-empty column blocks.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockIndex {
    blocks: Vec<Block>,
}

impl BlockIndex {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        let mut next = 0;
        for (i, b) in blocks.iter().enumerate() {
            if b.cols.0 != next {
                return Err(Error::arg(format!(
                    "block {i} starts at column {} but the previous block ended at {next}",
                    b.cols.0
                )));
            }
            if b.cols.1 <= b.cols.0 {
                return Err(Error::arg(format!("block {i} has an empty column range")));
            }
            next = b.cols.1;
        }
        for (i, b) in blocks.iter().enumerate() {
            if blocks[..i].iter().any(|o| o.label() == b.label()) {
                return Err(Error::arg(format!(
                    "label (signal_class={}, attack_type={}) appears twice",
                    b.signal_class, b.attack_type
                )));
            }
        }
        Ok(Self { blocks })
    }

    /// Builds an index from consecutive `(signal_class, attack_type, width)` runs.
    pub fn from_sizes(sizes: &[(i64, i64, usize)]) -> Result<Self> {
        let mut lo = 0;
        let blocks = sizes
            .iter()
            .map(|&(signal_class, attack_type, width)| {
                let b = Block { signal_class, attack_type, cols: (lo, lo + width) };
                lo += width;
                b
            })
            .collect();
        Self::new(blocks)
    }

    /// One block spanning all `k` columns.
    pub fn single(k: usize) -> Result<Self> {
        Self::from_sizes(&[(0, 0, k)])
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, id: BlockId) -> Option<&Block> {
        self.blocks.get(id.0)
    }

    pub fn ids(&self) -> impl Iterator<Item = BlockId> {
        (0..self.blocks.len()).map(BlockId)
    }

    pub fn find(&self, signal_class: i64, attack_type: i64) -> Option<BlockId> {
        self.blocks.iter().position(|b| b.label() == (signal_class, attack_type)).map(BlockId)
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Total column count `k_a`.
    pub fn width(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.cols.1)
    }

    fn check_len(&self, v: &Vector) -> Result<()> {
        if v.len() != self.width() {
            return Err(Error::shape(format!(
                "coefficient vector has length {}, block index covers {}",
                v.len(),
                self.width()
            )));
        }
        Ok(())
    }

    /// `Σ_b ‖v[b]‖₂`.
    pub fn l12_norm(&self, v: &Vector) -> Result<f64> {
        self.check_len(v)?;
        Ok(self.blocks.iter().map(|b| norm(&v.slice(s![b.range()]).to_owned())).sum())
    }

    /// Blockwise soft thresholding: `y[b] = max(0, 1 − τ/‖v[b]‖) v[b]`.
    pub fn prox(&self, v: &Vector, tau: f64) -> Result<Vector> {
        if !(tau >= 0.0) {
            return Err(Error::arg(format!("prox threshold must be non-negative, got {tau}")));
        }
        self.check_len(v)?;
        let mut out = v.clone();
        for b in &self.blocks {
            let mut seg = out.slice_mut(s![b.range()]);
            let n = seg.dot(&seg).sqrt();
            let scale = if n > tau { 1.0 - tau / n } else { 0.0 };
            seg *= scale;
        }
        Ok(out)
    }
}

/// Coefficients laid out according to a shared [`BlockIndex`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    values: Vector,
    index: Arc<BlockIndex>,
}

impl BlockVector {
    pub fn new(values: Vector, index: Arc<BlockIndex>) -> Result<Self> {
        index.check_len(&values)?;
        Ok(Self { values, index })
    }

    pub fn zeros(index: Arc<BlockIndex>) -> Self {
        Self { values: Array1::zeros(index.width()), index }
    }

    pub fn values(&self) -> &Vector {
        &self.values
    }

    pub fn into_values(self) -> Vector {
        self.values
    }

    pub fn index(&self) -> &Arc<BlockIndex> {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn block(&self, id: BlockId) -> Option<Vector> {
        self.index.block(id).map(|b| self.values.slice(s![b.range()]).to_owned())
    }

    /// Norm of each block in index order.
    pub fn block_norms(&self) -> Vec<f64> {
        self.index.blocks().iter().map(|b| norm(&self.values.slice(s![b.range()]).to_owned())).collect()
    }
}

pub fn block_l12_norm(c: &BlockVector) -> f64 {
    c.block_norms().iter().sum()
}

/// Proximal map of `τ Σ_b ‖·[b]‖₂`; minimizes `½‖y − v‖² + τ Σ_b ‖y[b]‖₂`.
pub fn prox_block_l12(v: &BlockVector, tau: f64) -> Result<BlockVector> {
    let values = v.index.prox(&v.values, tau)?;
    Ok(BlockVector { values, index: v.index.clone() })
}

/// Attack dictionary `D_a` (m × k_a) with its block labelling.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackDictionary {
    matrix: Matrix,
    index: Arc<BlockIndex>,
}

impl AttackDictionary {
    pub fn new(matrix: Matrix, index: BlockIndex) -> Result<Self> {
        if matrix.ncols() != index.width() {
            return Err(Error::shape(format!(
                "dictionary has {} columns, block index covers {}",
                matrix.ncols(),
                index.width()
            )));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("dictionary has non-finite entries".into()));
        }
        Ok(Self { matrix, index: Arc::new(index) })
    }

    /// Dictionary with no columns; the problem reduces to pure inversion.
    pub fn empty(rows: usize) -> Self {
        Self { matrix: Array2::zeros((rows, 0)), index: Arc::new(BlockIndex::empty()) }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn index(&self) -> &Arc<BlockIndex> {
        &self.index
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.ncols() == 0
    }

    pub fn zero_coefficients(&self) -> BlockVector {
        BlockVector::zeros(self.index.clone())
    }

    pub fn coefficients(&self, values: Vector) -> Result<BlockVector> {
        BlockVector::new(values, self.index.clone())
    }

    /// `D c` on a raw coefficient vector.
    pub fn apply_values(&self, c: &Vector) -> Result<Vector> {
        if c.len() != self.cols() {
            return Err(Error::shape(format!(
                "coefficient vector has length {}, dictionary has {} columns",
                c.len(),
                self.cols()
            )));
        }
        Ok(self.matrix.dot(c))
    }

    pub fn apply(&self, c: &BlockVector) -> Result<Vector> {
        self.apply_values(&c.values)
    }

    /// `Dᵀ r` on raw vectors.
    pub fn apply_transpose_values(&self, r: &Vector) -> Result<Vector> {
        if r.len() != self.rows() {
            return Err(Error::shape(format!(
                "residual has length {}, dictionary has {} rows",
                r.len(),
                self.rows()
            )));
        }
        Ok(self.matrix.t().dot(r))
    }

    pub fn apply_transpose(&self, r: &Vector) -> Result<BlockVector> {
        let values = self.apply_transpose_values(r)?;
        Ok(BlockVector { values, index: self.index.clone() })
    }

    /// Columns of block `id`.
    pub fn block_matrix(&self, id: BlockId) -> Option<Matrix> {
        self.index.block(id).map(|b| self.matrix.slice(s![.., b.range()]).to_owned())
    }

    /// `(C_D, L_D)`: largest and smallest singular value, from power iteration
    /// on `DᵀD` and on its shifted complement.
    pub fn spectrum_bounds(&self) -> Result<(f64, f64)> {
        if self.is_empty() || self.rows() == 0 {
            return Err(Error::arg("spectrum of an empty dictionary is undefined"));
        }
        if self.matrix.iter().all(|&x| x == 0.0) {
            return Err(Error::DegenerateSpectrum("dictionary is identically zero".into()));
        }
        let d = &self.matrix;
        let ex = extremal_eigenvalues(|v| d.t().dot(&d.dot(v)), self.cols(), 1e-11, 200_000);
        let hi = ex.max.max(0.0).sqrt();
        // the Gram matrix is PSD; tiny negative values are round-off
        let lo = ex.min.max(0.0).sqrt();
        Ok((hi, lo.min(hi)))
    }

    /// For each block `b`: `‖base − D[b] c[b]‖₂`, where the caller passes
    /// `base = x′ − G(z)`. Used to attribute the attack to a block.
    pub fn block_residuals(&self, c: &BlockVector, base_residual: &Vector) -> Result<Vec<f64>> {
        if c.len() != self.cols() {
            return Err(Error::shape("coefficients do not match the dictionary"));
        }
        if base_residual.len() != self.rows() {
            return Err(Error::shape("residual does not match the dictionary row count"));
        }
        Ok(self
            .index
            .blocks()
            .iter()
            .map(|b| {
                let part = self.matrix.slice(s![.., b.range()]).dot(&c.values.slice(s![b.range()]));
                norm(&(base_residual - &part))
            })
            .collect())
    }
}
