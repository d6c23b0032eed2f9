//! Built-in example families and seeded random generators.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::MatrixFamily;

/// Named corpus entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum CorpusSpec {
    Sigma6,
    Derham {
        omega: f64,
    },
    Counterexample,
    Random {
        dim: usize,
        density: f64,
        signed: bool,
        seed: u64,
    },
}

impl CorpusSpec {
    pub fn build(&self) -> Result<MatrixFamily> {
        match *self {
            CorpusSpec::Sigma6 => Ok(make_sigma6()),
            CorpusSpec::Derham { omega } => make_derham(omega),
            CorpusSpec::Counterexample => Ok(make_counterexample()),
            CorpusSpec::Random {
                dim,
                density,
                signed,
                seed,
            } => make_random(dim, density, signed, seed),
        }
    }
}

#[rustfmt::skip]
const SIGMA6: [[[f64; 6]; 6]; 2] = [
    [
        [1., 0., 1., 2., 0., 0.],
        [0., 0., 0., 0., 0., 0.],
        [0., 0., 0., 0., 1., 2.],
        [0., 2., 1., 0., 1., 0.],
        [0., 0., 0., 0., 0., 0.],
        [0., 0., 0., 0., 0., 0.],
    ],
    [
        [0., 0., 0., 2., 1., 0.],
        [1., 0., 0., 0., 0., 0.],
        [1., 0., 0., 0., 0., 2.],
        [0., 2., 1., 0., 0., 0.],
        [0., 0., 1., 0., 0., 0.],
        [0., 0., 0., 0., 1., 0.],
    ],
];

/// The two 6x6 matrices counting odd coefficients of `(1 + x + .. + x^6)^n`,
/// uniform probabilities.
pub fn make_sigma6() -> MatrixFamily {
    let mats = SIGMA6
        .iter()
        .map(|m| DMatrix::from_fn(6, 6, |i, j| m[i][j]))
        .collect();
    MatrixFamily::new(mats, None).expect("static family is valid")
}

/// De Rham curve matrices `{[[w, 0], [w, 1-2w]], [[1-2w, w], [0, w]]}` for
/// `0 < w < 1/2`, uniform probabilities.
pub fn make_derham(omega: f64) -> Result<MatrixFamily> {
    if !(omega > 0.0 && omega < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "de Rham parameter must lie in (0, 1/2), got {omega}"
        )));
    }
    let c = 1.0 - 2.0 * omega;
    let a1 = DMatrix::from_row_slice(2, 2, &[omega, 0.0, omega, c]);
    let a2 = DMatrix::from_row_slice(2, 2, &[c, omega, 0.0, omega]);
    MatrixFamily::new(vec![a1, a2], None)
}

/// `{2 Rot(pi/3), 2 diag(1, 0)}`: a signed pair with `lambda >= 0` whose
/// exponent is not lower semicontinuous.
pub fn make_counterexample() -> MatrixFamily {
    let (s, c) = (PI / 3.0).sin_cos();
    let rot = DMatrix::from_row_slice(2, 2, &[2.0 * c, -2.0 * s, 2.0 * s, 2.0 * c]);
    let proj = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
    MatrixFamily::new(vec![rot, proj], None).expect("static family is valid")
}

/// A random pair of `dim x dim` matrices.
///
/// Entries are uniform on `[0, 1)` (or `[-0.5, 0.5)` when `signed`), then
/// each is independently zeroed with probability `1 - density`. Entries are
/// drawn row-major, matrix by matrix, from ChaCha8 seeded with `seed`.
pub fn make_random(dim: usize, density: f64, signed: bool, seed: u64) -> Result<MatrixFamily> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidParameter(format!(
            "density must lie in [0, 1], got {density}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mats = Vec::with_capacity(2);
    for _ in 0..2 {
        let mut entries = Vec::with_capacity(dim * dim);
        for _ in 0..dim * dim {
            let u: f64 = rng.gen();
            let keep: f64 = rng.gen();
            let value = if signed { u - 0.5 } else { u };
            entries.push(if keep < density { value } else { 0.0 });
        }
        mats.push(DMatrix::from_row_slice(dim, dim, &entries));
    }
    MatrixFamily::new(mats, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma6_matches_display() {
        let f = make_sigma6();
        assert_eq!(f.dim(), 6);
        assert_eq!(f.probs(), &[0.5, 0.5]);
        let row0: Vec<f64> = (0..6).map(|j| f.matrix(0)[(0, j)]).collect();
        assert_eq!(row0, vec![1.0, 0.0, 1.0, 2.0, 0.0, 0.0]);
        for (m, display) in SIGMA6.iter().enumerate() {
            for (i, row) in display.iter().enumerate() {
                for (j, &x) in row.iter().enumerate() {
                    assert_eq!(f.matrix(m)[(i, j)], x);
                }
            }
        }
        let sums: Vec<f64> = (0..6).map(|i| f.matrix(0).row(i).sum()).collect();
        assert_eq!(sums, vec![4.0, 0.0, 3.0, 4.0, 0.0, 0.0]);
        let sums: Vec<f64> = (0..6).map(|i| f.matrix(1).row(i).sum()).collect();
        assert_eq!(sums, vec![3.0, 1.0, 3.0, 3.0, 1.0, 1.0]);
    }

    #[test]
    fn derham_layout() {
        let f = make_derham(1.0 / 3.0).unwrap();
        let t = 1.0 / 3.0;
        assert_eq!(
            f.matrix(0).as_slice(),
            DMatrix::from_row_slice(2, 2, &[t, 0.0, t, 1.0 - 2.0 * t]).as_slice()
        );
        let f = make_derham(0.25).unwrap();
        assert_eq!(f.matrix(0)[(0, 0)], 0.25);
        assert_eq!(f.matrix(0)[(0, 1)], 0.0);
        assert_eq!(f.matrix(0)[(1, 0)], 0.25);
        assert_eq!(f.matrix(0)[(1, 1)], 0.5);
        assert_eq!(f.matrix(1)[(0, 0)], 0.5);
        assert_eq!(f.matrix(1)[(0, 1)], 0.25);
        assert_eq!(f.matrix(1)[(1, 0)], 0.0);
        assert_eq!(f.matrix(1)[(1, 1)], 0.25);
        // row sums: w or 1-w
        for omega in [0.1, 0.2, 0.3, 0.45] {
            let f = make_derham(omega).unwrap();
            let r0: Vec<f64> = (0..2).map(|i| f.matrix(0).row(i).sum()).collect();
            let r1: Vec<f64> = (0..2).map(|i| f.matrix(1).row(i).sum()).collect();
            assert!((r0[0] - omega).abs() < 1e-15 && (r0[1] - (1.0 - omega)).abs() < 1e-15);
            assert!((r1[0] - (1.0 - omega)).abs() < 1e-15 && (r1[1] - omega).abs() < 1e-15);
        }
    }

    #[test]
    fn derham_product_positive() {
        let f = make_derham(1.0 / 3.0).unwrap();
        let p = f.matrix(1) * f.matrix(0);
        assert!(p.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn derham_range_checked() {
        for bad in [0.0, 0.5, -0.1, 0.7, f64::NAN] {
            assert!(make_derham(bad).is_err());
        }
    }

    #[test]
    fn counterexample_norms() {
        let f = make_counterexample();
        for a in f.matrices() {
            let s = a.clone().svd(false, false).singular_values.max();
            assert!((s - 2.0).abs() < 1e-14);
        }
        assert!(!f.is_nonnegative());
    }

    #[test]
    fn random_is_deterministic() {
        let a = make_random(60, 2.0 / 7.0, false, 7).unwrap();
        let b = make_random(60, 2.0 / 7.0, false, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, make_random(60, 2.0 / 7.0, false, 8).unwrap());
    }

    #[test]
    fn random_ranges() {
        let dense = make_random(8, 1.0, false, 1).unwrap();
        assert!(dense
            .matrices()
            .iter()
            .all(|m| m.iter().all(|&x| x > 0.0 && x < 1.0)));
        let signed = make_random(8, 1.0, true, 1).unwrap();
        assert!(signed
            .matrices()
            .iter()
            .all(|m| m.iter().all(|&x| (-0.5..0.5).contains(&x))));
        assert!(signed.matrices().iter().any(|m| m.iter().any(|&x| x < 0.0)));
        let empty = make_random(4, 0.0, false, 1).unwrap();
        assert!(empty.matrices().iter().all(|m| m.iter().all(|&x| x == 0.0)));
        assert!(make_random(3, 1.5, false, 0).is_err());
        assert!(make_random(0, 1.0, false, 0).is_err());
    }

    #[test]
    fn spec_builds() {
        assert_eq!(CorpusSpec::Sigma6.build().unwrap(), make_sigma6());
        assert!(CorpusSpec::Derham { omega: 0.6 }.build().is_err());
    }
}
