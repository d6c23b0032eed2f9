//! Semidefinite lifting and the certified upper bound `Gamma_k(V)` for
//! signed families.
//!
//! Symmetric matrices are stored in `svec` coordinates: the upper triangle
//! row by row, off-diagonal entries scaled by `sqrt 2`, so that
//! `<svec X, svec Y> = tr(XY)`.

use std::f64::consts::SQRT_2;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::bounds::{stored_leaf_cap, BoundKind, BoundReport, Certificate};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::family::MatrixFamily;
use crate::optim::{frank_wolfe_observed, FwSettings, LogLinearObjective, Spectrahedron, StepRule};

/// Tolerance for the spectrahedron invariants.
pub const SPECTRAHEDRON_TOL: f64 = 1e-10;

/// Dimension `d(d+1)/2` of the symmetric matrices.
pub fn svec_dim(d: usize) -> usize {
    d * (d + 1) / 2
}

pub fn svec(x: &DMatrix<f64>) -> DVector<f64> {
    let d = x.nrows();
    let mut out = Vec::with_capacity(svec_dim(d));
    for i in 0..d {
        out.push(x[(i, i)]);
        for j in i + 1..d {
            out.push(SQRT_2 * 0.5 * (x[(i, j)] + x[(j, i)]));
        }
    }
    DVector::from_vec(out)
}

pub fn smat(v: &DVector<f64>, d: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(d, d);
    let mut idx = 0;
    for i in 0..d {
        x[(i, i)] = v[idx];
        idx += 1;
        for j in i + 1..d {
            let s = v[idx] / SQRT_2;
            x[(i, j)] = s;
            x[(j, i)] = s;
            idx += 1;
        }
    }
    x
}

/// The operators `X -> A_j X A_j^T` on symmetric matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedFamily {
    base: MatrixFamily,
    operators: Vec<DMatrix<f64>>,
}

impl LiftedFamily {
    pub fn base(&self) -> &MatrixFamily {
        &self.base
    }

    /// The operators in `svec` coordinates.
    pub fn operators(&self) -> &[DMatrix<f64>] {
        &self.operators
    }

    /// `A_j X A_j^T`.
    pub fn apply(&self, j: usize, x: &DMatrix<f64>) -> DMatrix<f64> {
        let a = self.base.matrix(j);
        a * x * a.transpose()
    }

    /// The lifted operators as a family of `d(d+1)/2` square matrices with
    /// the base probabilities.
    pub fn as_family(&self) -> Result<MatrixFamily> {
        MatrixFamily::new(self.operators.clone(), Some(self.base.probs().to_vec()))
    }

    /// `svec(I / d)`, an interior point of the PSD cone.
    pub fn identity_start(&self) -> DVector<f64> {
        let d = self.base.dim();
        svec(&(DMatrix::identity(d, d) / d as f64))
    }
}

pub fn lift(family: &MatrixFamily) -> LiftedFamily {
    let d = family.dim();
    let n = svec_dim(d);
    let mut basis = Vec::with_capacity(n);
    for i in 0..d {
        for j in i..d {
            let mut e = DMatrix::zeros(d, d);
            if i == j {
                e[(i, i)] = 1.0;
            } else {
                e[(i, j)] = 1.0 / SQRT_2;
                e[(j, i)] = 1.0 / SQRT_2;
            }
            basis.push(e);
        }
    }
    let operators = family
        .matrices()
        .iter()
        .map(|a| {
            let mut op = DMatrix::zeros(n, n);
            for (c, e) in basis.iter().enumerate() {
                op.set_column(c, &svec(&(a * e * a.transpose())));
            }
            op
        })
        .collect();
    LiftedFamily {
        base: family.clone(),
        operators,
    }
}

/// A PSD matrix with `tr(VX) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrahedronPoint {
    pub x: DMatrix<f64>,
    pub trace_constraint_value: f64,
}

impl SpectrahedronPoint {
    pub fn new(x: DMatrix<f64>, v: &DMatrix<f64>) -> Result<Self> {
        let trace_constraint_value = (v * &x).trace();
        let point = Self {
            x,
            trace_constraint_value,
        };
        point.check()?;
        Ok(point)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (&self.x + self.x.transpose()) * 0.5;
        SymmetricEigen::new(sym).eigenvalues.min()
    }

    pub fn check(&self) -> Result<()> {
        let lo = self.min_eigenvalue();
        if lo < -SPECTRAHEDRON_TOL {
            return Err(Error::Precondition(format!(
                "matrix is not PSD (eigenvalue {lo})"
            )));
        }
        if (self.trace_constraint_value - 1.0).abs() > SPECTRAHEDRON_TOL {
            return Err(Error::Precondition(format!(
                "tr(VX) = {} differs from 1",
                self.trace_constraint_value
            )));
        }
        Ok(())
    }
}

/// Default Frank-Wolfe settings for [`gamma_sdp_upper`]: gap `1e-6`,
/// exact line search, 5000 iterations.
pub fn gamma_sdp_settings() -> FwSettings {
    FwSettings {
        tol: 1e-6,
        max_iters: 5000,
        step: StepRule::LineSearch,
    }
}

/// Full output of [`gamma_sdp_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSdpSolution {
    pub report: BoundReport,
    /// Final iterate; absent when a product is zero.
    pub point: Option<SpectrahedronPoint>,
    /// Certified bound after every iteration.
    pub certificate_trace: Vec<f64>,
    /// Smallest eigenvalue over all iterates.
    pub min_iterate_eigenvalue: f64,
    /// Largest `|tr(V X_t) - 1|` over all iterates.
    pub max_trace_violation: f64,
}

/// `V^{-1/2}` of a symmetric positive definite `V`.
fn inv_sqrt(v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = v.nrows();
    if v.ncols() != d {
        return Err(Error::InvalidParameter("V must be square".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("V has a non-finite entry".into()));
    }
    let asym = (v - v.transpose()).amax();
    if asym > 1e-12 * v.amax().max(1.0) {
        return Err(Error::InvalidParameter("V must be symmetric".into()));
    }
    let eig = SymmetricEigen::new((v + v.transpose()) * 0.5);
    let top = eig.eigenvalues.amax();
    if eig.eigenvalues.iter().any(|&l| !(l > 1e-14 * top)) {
        return Err(Error::InvalidParameter(
            "V must be positive definite".into(),
        ));
    }
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt())) * q.transpose())
}

/// [`gamma_sdp_upper`] with the final iterate and per-iteration data.
pub fn gamma_sdp_solve(
    family: &MatrixFamily,
    k: usize,
    v: &DMatrix<f64>,
    settings: &FwSettings,
) -> Result<GammaSdpSolution> {
    let started = Instant::now();
    let d = family.dim();
    if v.nrows() != d {
        return Err(Error::InvalidParameter(format!("V must be {d}x{d}")));
    }
    let inv_root = inv_sqrt(v)?;
    let ens = Ensemble::with_cap(family, k, stored_leaf_cap(d * d))?;
    let mut weights = Vec::new();
    let mut directions = Vec::new();
    let mut zero_product = false;
    ens.visit_products(&mut |_, p, b| {
        // tr(V B X B^T) = tr(N Y), N = V^{-1/2} B^T V B V^{-1/2}
        let w = b * &inv_root;
        let n = w.transpose() * v * &w;
        let n = (&n + n.transpose()) * 0.5;
        if n.trace() <= 0.0 {
            zero_product = true;
        }
        weights.push(p);
        directions.push(n);
    });
    let param = Some(v.transpose().iter().copied().collect());
    if zero_product {
        let mut report =
            BoundReport::new(BoundKind::GammaSdp, k, f64::NEG_INFINITY, param, started);
        report
            .notes
            .push("some product is zero: the spectral radius is 0".into());
        return Ok(GammaSdpSolution {
            report,
            point: None,
            certificate_trace: Vec::new(),
            min_iterate_eigenvalue: f64::NAN,
            max_trace_violation: f64::NAN,
        });
    }
    let objective = LogLinearObjective {
        weights,
        directions,
        scale: 0.5 / k as f64,
    };
    let to_x = |y: &DMatrix<f64>| &inv_root * y * &inv_root;
    let mut min_eig = f64::INFINITY;
    let mut max_violation: f64 = 0.0;
    let result = frank_wolfe_observed(&Spectrahedron { dim: d }, &objective, settings, |it| {
        let x = to_x(it.point);
        let pt = SpectrahedronPoint {
            trace_constraint_value: (v * &x).trace(),
            x,
        };
        min_eig = min_eig.min(pt.min_eigenvalue());
        max_violation = max_violation.max((pt.trace_constraint_value - 1.0).abs());
    })?;
    let x = to_x(&result.point);
    let point = SpectrahedronPoint {
        trace_constraint_value: (v * &x).trace(),
        x,
    };
    let mut report = BoundReport::new(BoundKind::GammaSdp, k, result.bound, param, started);
    report.optimized = true;
    report.certificate = Certificate::FrankWolfeGap(result.gap);
    if !result.converged {
        report.notes.push(format!(
            "Frank-Wolfe stopped after {} iterations with gap {}",
            result.iterations, result.gap
        ));
    }
    Ok(GammaSdpSolution {
        report,
        point: Some(point),
        certificate_trace: result.certificate_trace,
        min_iterate_eigenvalue: min_eig,
        max_trace_violation: max_violation,
    })
}

/// Certified upper bound `Gamma_k(V) = (1/2k) sup E ln tr(V B X B^T)` over
/// `X >= 0`, `tr(VX) = 1`. Valid for signed families.
///
/// The value is the smallest `objective + Frank-Wolfe gap` seen, so it is
/// never below the supremum.
pub fn gamma_sdp_upper(
    family: &MatrixFamily,
    k: usize,
    v: &DMatrix<f64>,
    settings: &FwSettings,
) -> Result<BoundReport> {
    Ok(gamma_sdp_solve(family, k, v, settings)?.report)
}
