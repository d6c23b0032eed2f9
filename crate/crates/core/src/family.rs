//! Finite matrix families equipped with a probability vector.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|sum(p) - 1|` accepted by [`MatrixFamily::new`].
pub const PROB_SUM_TOL: f64 = 1e-12;

/// A family of `m` square `d x d` real matrices `A_1..A_m`, each drawn with
/// probability `p_j`.
///
/// Validated on construction and immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFamily {
    dim: usize,
    matrices: Vec<DMatrix<f64>>,
    probs: Vec<f64>,
}

impl MatrixFamily {
    /// Validates `matrices` and `probs`. Missing probabilities default to the
    /// uniform vector `1/m`.
    pub fn new(matrices: Vec<DMatrix<f64>>, probs: Option<Vec<f64>>) -> Result<Self> {
        let first = matrices.first().ok_or(Error::EmptyFamily)?;
        let dim = first.nrows();
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "matrices must be at least 1x1".into(),
            ));
        }
        for (index, a) in matrices.iter().enumerate() {
            if a.nrows() != dim || a.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    index,
                    rows: a.nrows(),
                    cols: a.ncols(),
                    dim,
                });
            }
            for row in 0..dim {
                for col in 0..dim {
                    if !a[(row, col)].is_finite() {
                        return Err(Error::NonFiniteEntry { index, row, col });
                    }
                }
            }
        }

        let m = matrices.len();
        let probs = match probs {
            None => vec![1.0 / m as f64; m],
            Some(p) => {
                if p.len() != m {
                    return Err(Error::ProbabilityCount {
                        expected: m,
                        got: p.len(),
                    });
                }
                for (index, &value) in p.iter().enumerate() {
                    if !(value > 0.0) || !value.is_finite() {
                        return Err(Error::NonPositiveProbability { index, value });
                    }
                }
                let sum: f64 = p.iter().sum();
                if (sum - 1.0).abs() > PROB_SUM_TOL {
                    return Err(Error::ProbabilitiesNotNormalized { sum });
                }
                p
            }
        };

        Ok(Self {
            dim,
            matrices,
            probs,
        })
    }

    /// Builds a family from row-major nested rows.
    pub fn from_rows(rows: &[Vec<Vec<f64>>], probs: Option<Vec<f64>>) -> Result<Self> {
        let mut matrices = Vec::with_capacity(rows.len());
        for (index, m) in rows.iter().enumerate() {
            let d = m.len();
            if let Some(bad) = m.iter().find(|r| r.len() != d) {
                return Err(Error::DimensionMismatch {
                    index,
                    rows: d,
                    cols: bad.len(),
                    dim: d,
                });
            }
            matrices.push(DMatrix::from_fn(d, d, |i, j| m[i][j]));
        }
        Self::new(matrices, probs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of matrices `m`.
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    pub fn matrix(&self, j: usize) -> &DMatrix<f64> {
        &self.matrices[j]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// True when every entry of every matrix is `>= 0`.
    pub fn is_nonnegative(&self) -> bool {
        self.matrices.iter().all(|a| a.iter().all(|&x| x >= 0.0))
    }

    /// Fails with [`Error::NotNonnegative`] on the first negative entry.
    pub fn require_nonnegative(&self) -> Result<()> {
        for (index, a) in self.matrices.iter().enumerate() {
            for col in 0..self.dim {
                for row in 0..self.dim {
                    let value = a[(row, col)];
                    if value < 0.0 {
                        return Err(Error::NotNonnegative {
                            index,
                            row,
                            col,
                            value,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// The family `{A_1^T, .., A_m^T}` with the same probabilities. Its
    /// Lyapunov exponent equals that of `self`.
    pub fn transpose(&self) -> Self {
        Self {
            dim: self.dim,
            matrices: self.matrices.iter().map(|a| a.transpose()).collect(),
            probs: self.probs.clone(),
        }
    }

    /// Every matrix multiplied by `c`; the exponent shifts by `ln c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "scale factor must be positive, got {c}"
            )));
        }
        Ok(Self {
            dim: self.dim,
            matrices: self.matrices.iter().map(|a| a * c).collect(),
            probs: self.probs.clone(),
        })
    }

    /// Conjugates every matrix by the coordinate permutation `perm`:
    /// entry `(i, j)` of the result is entry `(perm[i], perm[j])` of the input.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.dim)?;
        Ok(Self {
            dim: self.dim,
            matrices: self
                .matrices
                .iter()
                .map(|a| DMatrix::from_fn(self.dim, self.dim, |i, j| a[(perm[i], perm[j])]))
                .collect(),
            probs: self.probs.clone(),
        })
    }
}

pub(crate) fn check_permutation(perm: &[usize], dim: usize) -> Result<()> {
    let mut seen = vec![false; dim];
    if perm.len() != dim {
        return Err(Error::InvalidParameter(format!(
            "permutation has length {}, expected {dim}",
            perm.len()
        )));
    }
    for &p in perm {
        if p >= dim || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidParameter(format!(
                "{perm:?} is not a permutation"
            )));
        }
    }
    Ok(())
}

/// One product `B = A_{d_k} ... A_{d_1}` of the ensemble `A^k`, identified by
/// its word `(d_1, .., d_k)` (0-based indices) and probability `p_B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductIndex {
    pub word: Vec<usize>,
    pub prob: f64,
}

impl ProductIndex {
    pub fn new(family: &MatrixFamily, word: Vec<usize>) -> Result<Self> {
        if word.is_empty() {
            return Err(Error::InvalidParameter(
                "product word must be nonempty".into(),
            ));
        }
        let mut prob = 1.0;
        for &j in &word {
            prob *= *family
                .probs()
                .get(j)
                .ok_or_else(|| Error::InvalidParameter(format!("word index {j} out of range")))?;
        }
        Ok(Self { word, prob })
    }

    /// Multiplies out the product; the first letter of the word acts first.
    pub fn product(&self, family: &MatrixFamily) -> DMatrix<f64> {
        let mut b = DMatrix::identity(family.dim(), family.dim());
        for &j in &self.word {
            b = family.matrix(j) * b;
        }
        b
    }
}
