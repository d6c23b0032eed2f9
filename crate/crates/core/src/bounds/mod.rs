//! Bounds on the positive orthant.
//!
//! Upper bounds: `alpha`, `alpha_tilde` (partition case), `gamma_orthant`
//! and the Euclidean norm bound. Lower bounds: `beta` and `beta_tilde`
//! (sparse case). Every evaluation is exact over the ensemble `A^k`; the
//! optimized variants only choose the parameter.

mod objectives;

use std::fmt;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::ensemble::{Direction, Ensemble, DEFAULT_LEAF_CAP};
use crate::error::{Error, Result};
use crate::family::MatrixFamily;
use crate::optim::{frank_wolfe, FwSettings, LogLinearObjective, OptimizerResult, Simplex};
use crate::structure::PartitionStructure;

pub use objectives::{
    alpha_optimize, alpha_tilde_optimize, beta_optimize, beta_tilde_optimize, default_beta_support,
    AlphaObjective, BetaObjective,
};

/// Arguments of `ln` at or below this are treated as zero.
pub const LOG_GUARD: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Alpha,
    Beta,
    AlphaTilde,
    BetaTilde,
    GammaOrthant,
    Euclid,
    GammaSdp,
}

impl BoundKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundKind::Alpha => "alpha",
            BoundKind::Beta => "beta",
            BoundKind::AlphaTilde => "alpha_tilde",
            BoundKind::BetaTilde => "beta_tilde",
            BoundKind::GammaOrthant => "gamma_orthant",
            BoundKind::Euclid => "euclid",
            BoundKind::GammaSdp => "gamma_sdp",
        }
    }

    pub fn is_upper(&self) -> bool {
        !matches!(self, BoundKind::Beta | BoundKind::BetaTilde)
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A bound in nats. `-inf` is a distinct state, never a bare number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundValue {
    Finite(f64),
    NegInfinity,
}

impl BoundValue {
    pub fn from_f64(v: f64) -> Self {
        if v == f64::NEG_INFINITY {
            BoundValue::NegInfinity
        } else {
            BoundValue::Finite(v)
        }
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            BoundValue::Finite(v) => v,
            BoundValue::NegInfinity => f64::NEG_INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, BoundValue::Finite(v) if v.is_finite())
    }
}

impl fmt::Display for BoundValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundValue::Finite(v) => write!(f, "{v}"),
            BoundValue::NegInfinity => f.write_str("-inf"),
        }
    }
}

/// Why the reported number is a valid bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certificate {
    /// The bound holds for every admissible parameter.
    AnyParameter,
    /// Objective plus the final Frank-Wolfe gap.
    FrankWolfeGap(f64),
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Certificate::AnyParameter => f.write_str("valid-for-any-parameter"),
            Certificate::FrankWolfeGap(g) => write!(f, "frank-wolfe-gap {g}"),
        }
    }
}

/// Optimizer bookkeeping attached to optimized reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSummary {
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
    pub line_search_failures: usize,
    pub start_value: f64,
}

impl OptimizerSummary {
    pub(crate) fn from_result(r: &OptimizerResult, start_value: f64) -> Self {
        Self {
            iterations: r.iterations,
            converged: r.converged,
            grad_norm: r.grad_norm,
            line_search_failures: r.line_search_failures,
            start_value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub k: usize,
    pub value: BoundValue,
    /// The `x`, `v` or `V` (row-major) the value was computed at.
    pub parameter: Option<Vec<f64>>,
    pub optimized: bool,
    pub certificate: Certificate,
    pub wall_time_ms: u64,
    pub notes: Vec<String>,
    pub optimizer: Option<OptimizerSummary>,
}

impl BoundReport {
    pub(crate) fn new(
        kind: BoundKind,
        k: usize,
        value: f64,
        parameter: Option<Vec<f64>>,
        started: Instant,
    ) -> Self {
        Self {
            kind,
            k,
            value: BoundValue::from_f64(value),
            parameter,
            optimized: false,
            certificate: Certificate::AnyParameter,
            wall_time_ms: started.elapsed().as_millis() as u64,
            notes: Vec::new(),
            optimizer: None,
        }
    }

    pub fn csv_header() -> &'static str {
        "kind,k,value,optimized,certificate,wall_time_ms"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.kind, self.k, self.value, self.optimized, self.certificate, self.wall_time_ms
        )
    }

    /// The value as `f64`, `-inf` included.
    pub fn value_f64(&self) -> f64 {
        self.value.as_f64()
    }
}

pub(crate) fn guarded_ln(r: f64) -> f64 {
    if r > LOG_GUARD {
        r.ln()
    } else {
        f64::NEG_INFINITY
    }
}

pub(crate) fn check_vector(v: &DVector<f64>, dim: usize, name: &str, strict: bool) -> Result<()> {
    if v.len() != dim {
        return Err(Error::InvalidParameter(format!(
            "{name} has length {}, expected {dim}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "{name} has a non-finite entry"
        )));
    }
    if strict {
        if let Some(i) = v.iter().position(|&x| x <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{name} must be strictly positive (entry {i} = {})",
                v[i]
            )));
        }
    } else if v.iter().any(|&x| x < 0.0) || v.iter().all(|&x| x == 0.0) {
        return Err(Error::InvalidParameter(format!(
            "{name} must be nonnegative and nonzero"
        )));
    }
    Ok(())
}

/// `max_{i in class} ln (y_i / x_i)`.
fn class_log_max(y: &DVector<f64>, x: &DVector<f64>, class: &[usize]) -> f64 {
    let mut r = 0.0;
    for &i in class {
        let q = y[i] / x[i];
        if q > r {
            r = q;
        }
    }
    guarded_ln(r)
}

/// `E max_{i in class} ln (Bx)_i / x_i` for each class.
fn forward_class_means(ens: &Ensemble<'_>, x: &DVector<f64>, classes: &[Vec<usize>]) -> Vec<f64> {
    ens.reduce_vectors(x, Direction::Forward, &mut |y: &DVector<f64>| {
        classes
            .iter()
            .map(|c| class_log_max(y, x, c))
            .collect::<Vec<f64>>()
    })
}

/// `E ln (v, b^j)` for each column `j`.
pub(crate) fn transpose_log_means(ens: &Ensemble<'_>, v: &DVector<f64>) -> Vec<f64> {
    ens.reduce_vectors(v, Direction::Transpose, &mut |t: &DVector<f64>| {
        t.iter().map(|&s| guarded_ln(s)).collect::<Vec<f64>>()
    })
}

pub(crate) fn alpha_tilde_value(
    ens: &Ensemble<'_>,
    x: &DVector<f64>,
    classes: &[Vec<usize>],
) -> f64 {
    let means = forward_class_means(ens, x, classes);
    means.into_iter().fold(f64::NEG_INFINITY, f64::max) / ens.k() as f64
}

/// Minimum over the support of `v` of `-ln v_j + E ln (v, b^j)`, over `k`.
pub(crate) fn beta_tilde_value(ens: &Ensemble<'_>, v: &DVector<f64>) -> f64 {
    let means = transpose_log_means(ens, v);
    let mut best = f64::INFINITY;
    for (j, m) in means.into_iter().enumerate() {
        if v[j] > 0.0 {
            best = best.min(m - v[j].ln());
        }
    }
    best / ens.k() as f64
}

fn all_coordinates(dim: usize) -> Vec<Vec<usize>> {
    vec![(0..dim).collect()]
}

const ZERO_COLUMN_HINT: &str =
    "a product has a zero column on the support of v; try beta_tilde with a smaller support or the transposed family";

/// `(1/k) E max_i ln (Bx)_i / x_i`: an upper bound for every `x > 0`.
///
/// A product with `Bx = 0` makes the value `-inf`, which means `rho = 0`.
pub fn alpha_eval(family: &MatrixFamily, k: usize, x: &DVector<f64>) -> Result<BoundReport> {
    let started = Instant::now();
    family.require_nonnegative()?;
    check_vector(x, family.dim(), "x", true)?;
    let ens = Ensemble::new(family, k)?;
    let value = alpha_tilde_value(&ens, x, &all_coordinates(family.dim()));
    let mut report = BoundReport::new(
        BoundKind::Alpha,
        k,
        value,
        Some(x.iter().copied().collect()),
        started,
    );
    if value == f64::NEG_INFINITY {
        report
            .notes
            .push("some product annihilates x: the spectral radius is 0".into());
    }
    Ok(report)
}

/// `(1/k) max_c E max_{i in Omega_c} ln (Bx)_i / x_i` for a partition
/// that every matrix permutes.
pub fn alpha_tilde_eval(
    family: &MatrixFamily,
    partition: &PartitionStructure,
    k: usize,
    x: &DVector<f64>,
) -> Result<BoundReport> {
    let started = Instant::now();
    family.require_nonnegative()?;
    partition.check_against(family)?;
    check_vector(x, family.dim(), "x", true)?;
    let ens = Ensemble::new(family, k)?;
    let value = alpha_tilde_value(&ens, x, &partition.classes);
    Ok(BoundReport::new(
        BoundKind::AlphaTilde,
        k,
        value,
        Some(x.iter().copied().collect()),
        started,
    ))
}

/// `(1/k) min_j (-ln v_j + E ln (v, b^j))`: a lower bound for every `v > 0`.
///
/// A zero column in some product gives `-inf`, flagged in the notes.
pub fn beta_eval(family: &MatrixFamily, k: usize, v: &DVector<f64>) -> Result<BoundReport> {
    let started = Instant::now();
    family.require_nonnegative()?;
    check_vector(v, family.dim(), "v", true)?;
    let ens = Ensemble::new(family, k)?;
    let value = beta_tilde_value(&ens, v);
    let mut report = BoundReport::new(
        BoundKind::Beta,
        k,
        value,
        Some(v.iter().copied().collect()),
        started,
    );
    if value == f64::NEG_INFINITY {
        report.notes.push(ZERO_COLUMN_HINT.into());
    }
    Ok(report)
}

/// [`beta_eval`] for `v >= 0`, minimizing only over the support of `v`.
pub fn beta_tilde_eval(family: &MatrixFamily, k: usize, v: &DVector<f64>) -> Result<BoundReport> {
    let started = Instant::now();
    family.require_nonnegative()?;
    check_vector(v, family.dim(), "v", false)?;
    let ens = Ensemble::new(family, k)?;
    let value = beta_tilde_value(&ens, v);
    let mut report = BoundReport::new(
        BoundKind::BetaTilde,
        k,
        value,
        Some(v.iter().copied().collect()),
        started,
    );
    if value == f64::NEG_INFINITY {
        report.notes.push(ZERO_COLUMN_HINT.into());
    }
    Ok(report)
}

/// The family of transposes; it has the same exponent.
pub fn transpose_family(family: &MatrixFamily) -> MatrixFamily {
    family.transpose()
}

/// `(1/k) E ln sigma_max(B)`, valid for signed families.
pub fn euclidean_upper(family: &MatrixFamily, k: usize) -> Result<BoundReport> {
    let started = Instant::now();
    let ens = Ensemble::new(family, k)?;
    let total: f64 = ens.reduce_products(&mut |b: &nalgebra::DMatrix<f64>| {
        let s = b.clone().svd(false, false).singular_values.max();
        guarded_ln(s)
    });
    let value = total / k as f64;
    let mut report = BoundReport::new(BoundKind::Euclid, k, value, None, started);
    if value == f64::NEG_INFINITY {
        report
            .notes
            .push("some product is zero: the spectral radius is 0".into());
    }
    Ok(report)
}

/// Cap on products whose directions are stored at once.
pub(crate) fn stored_leaf_cap(floats_per_leaf: usize) -> u64 {
    (DEFAULT_LEAF_CAP / 16).min((1u64 << 26) / floats_per_leaf.max(1) as u64)
}

/// Certified upper estimate of `max_{x >= 0, (v, x) = 1} (1/k) E ln (v, Bx)`.
///
/// Solved on the simplex in `z_i = v_i x_i` by Frank-Wolfe; the value is the
/// best `objective + gap` seen, which cannot be below the maximum.
pub fn gamma_orthant_eval(
    family: &MatrixFamily,
    k: usize,
    v: &DVector<f64>,
    settings: &FwSettings,
) -> Result<BoundReport> {
    let started = Instant::now();
    family.require_nonnegative()?;
    let d = family.dim();
    check_vector(v, d, "v", true)?;
    let ens = Ensemble::with_cap(family, k, stored_leaf_cap(d))?;
    let mut weights = Vec::new();
    let mut directions = Vec::new();
    let mut annihilated = false;
    ens.visit_vectors(v, Direction::Transpose, &mut |p, t| {
        // (v, Bx) = sum_j (B^T v)_j / v_j z_j
        let n = t.component_div(v);
        if n.iter().all(|&s| s <= 0.0) {
            annihilated = true;
        }
        weights.push(p);
        directions.push(n);
    });
    let param = Some(v.iter().copied().collect());
    if annihilated {
        let mut report = BoundReport::new(
            BoundKind::GammaOrthant,
            k,
            f64::NEG_INFINITY,
            param,
            started,
        );
        report
            .notes
            .push("some product is zero: the spectral radius is 0".into());
        return Ok(report);
    }
    let objective = LogLinearObjective {
        weights,
        directions,
        scale: 1.0 / k as f64,
    };
    let result = frank_wolfe(&Simplex { dim: d }, &objective, settings)?;
    let mut report = BoundReport::new(BoundKind::GammaOrthant, k, result.bound, param, started);
    report.certificate = Certificate::FrankWolfeGap(result.gap);
    report.optimized = true;
    if !result.converged {
        report.notes.push(format!(
            "Frank-Wolfe stopped after {} iterations with gap {}",
            result.iterations, result.gap
        ));
    }
    Ok(report)
}
