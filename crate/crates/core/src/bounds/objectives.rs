//! Smoothed parameter objectives and the optimized bounds.

use std::time::Instant;

use nalgebra::DVector;

use super::{
    alpha_tilde_eval, alpha_tilde_value, beta_tilde_eval, beta_tilde_value, check_vector,
    guarded_ln, transpose_log_means, BoundKind, BoundReport, OptimizerSummary,
};
use crate::ensemble::{Direction, Ensemble};
use crate::error::{Error, Result};
use crate::family::MatrixFamily;
use crate::optim::{minimize_smoothed, soft_max, soft_min, OptimizerSettings, SmoothedObjective};
use crate::structure::PartitionStructure;

/// `u -> (1/k) max_c E max_{i in Omega_c} ln (B e^u)_i - u_i`, convex in `u`.
///
/// With one class this is the `alpha` objective. Smoothing replaces both
/// maxima by log-sum-exp at the same temperature.
pub struct AlphaObjective<'a> {
    ens: Ensemble<'a>,
    classes: Vec<Vec<usize>>,
}

impl<'a> AlphaObjective<'a> {
    pub fn new(family: &'a MatrixFamily, k: usize) -> Result<Self> {
        family.require_nonnegative()?;
        Ok(Self {
            ens: Ensemble::new(family, k)?,
            classes: vec![(0..family.dim()).collect()],
        })
    }

    pub fn with_partition(
        family: &'a MatrixFamily,
        k: usize,
        partition: &PartitionStructure,
    ) -> Result<Self> {
        family.require_nonnegative()?;
        partition.check_against(family)?;
        Ok(Self {
            ens: Ensemble::new(family, k)?,
            classes: partition.classes.clone(),
        })
    }

    fn class_soft_max(
        &self,
        y: &DVector<f64>,
        u: &DVector<f64>,
        class: &[usize],
        tau: f64,
    ) -> (f64, Vec<f64>) {
        let terms: Vec<f64> = class.iter().map(|&i| guarded_ln(y[i]) - u[i]).collect();
        soft_max(&terms, tau)
    }
}

impl SmoothedObjective for AlphaObjective<'_> {
    fn dim(&self) -> usize {
        self.ens.family().dim()
    }

    fn exact(&self, u: &DVector<f64>) -> f64 {
        alpha_tilde_value(&self.ens, &u.map(f64::exp), &self.classes)
    }

    fn smoothed(&self, u: &DVector<f64>, tau: f64) -> (f64, DVector<f64>) {
        let d = self.dim();
        let kf = self.ens.k() as f64;
        let x = u.map(f64::exp);
        let (outer, pi) = if self.classes.len() == 1 {
            (None, vec![1.0])
        } else {
            let means: Vec<f64> =
                self.ens
                    .reduce_vectors(&x, Direction::Forward, &mut |y: &DVector<f64>| {
                        self.classes
                            .iter()
                            .map(|c| self.class_soft_max(y, u, c, tau).0)
                            .collect::<Vec<f64>>()
                    });
            let (v, pi) = soft_max(&means, tau);
            (Some(v), pi)
        };
        // leaf: value sum_c pi_c s_c, direct weights omega, gradient omega_i / y_i
        let ((value, omega), gx) =
            self.ens
                .backprop_vectors(&x, Direction::Forward, &mut |y: &DVector<f64>| {
                    let mut value = 0.0;
                    let mut omega = DVector::zeros(d);
                    let mut gy = DVector::zeros(d);
                    for (c, &pc) in self.classes.iter().zip(&pi) {
                        if pc == 0.0 {
                            continue;
                        }
                        let (s, w) = self.class_soft_max(y, u, c, tau);
                        value += pc * s;
                        for (&i, &wi) in c.iter().zip(&w) {
                            if wi > 0.0 {
                                omega[i] += pc * wi;
                                gy[i] += pc * wi / y[i];
                            }
                        }
                    }
                    ((value, omega), gy)
                });
        let grad = (x.component_mul(&gx) - omega) / kf;
        (outer.unwrap_or(value) / kf, grad)
    }
}

/// `w -> -(1/k) min_{j in S} (-w_j + E ln (v, b^j))` with `v = e^w` on the
/// support `S` and zero elsewhere. Minimizing it maximizes `beta_tilde`.
pub struct BetaObjective<'a> {
    ens: Ensemble<'a>,
    support: Vec<usize>,
}

impl<'a> BetaObjective<'a> {
    pub fn new(family: &'a MatrixFamily, k: usize) -> Result<Self> {
        Self::with_support(family, k, (0..family.dim()).collect())
    }

    pub fn with_support(family: &'a MatrixFamily, k: usize, support: Vec<usize>) -> Result<Self> {
        family.require_nonnegative()?;
        let d = family.dim();
        if support.is_empty()
            || support.iter().any(|&j| j >= d)
            || support.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidParameter(
                "support must be a nonempty increasing list of coordinates".into(),
            ));
        }
        Ok(Self {
            ens: Ensemble::new(family, k)?,
            support,
        })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// The full parameter vector for variables `w` on the support.
    pub fn embed(&self, w: &DVector<f64>) -> DVector<f64> {
        let mut v = DVector::zeros(self.ens.family().dim());
        for (&j, &wj) in self.support.iter().zip(w.iter()) {
            v[j] = wj.exp();
        }
        v
    }
}

impl SmoothedObjective for BetaObjective<'_> {
    fn dim(&self) -> usize {
        self.support.len()
    }

    fn exact(&self, w: &DVector<f64>) -> f64 {
        -beta_tilde_value(&self.ens, &self.embed(w))
    }

    fn smoothed(&self, w: &DVector<f64>, tau: f64) -> (f64, DVector<f64>) {
        let d = self.ens.family().dim();
        let kf = self.ens.k() as f64;
        let v = self.embed(w);
        let means = transpose_log_means(&self.ens, &v);
        let c: Vec<f64> = self
            .support
            .iter()
            .zip(w.iter())
            .map(|(&j, &wj)| means[j] - wj)
            .collect();
        let (value, pi) = soft_min(&c, tau);
        let (_, gv): (f64, _) =
            self.ens
                .backprop_vectors(&v, Direction::Transpose, &mut |t: &DVector<f64>| {
                    let mut gt = DVector::zeros(d);
                    for (&j, &pj) in self.support.iter().zip(&pi) {
                        if pj > 0.0 {
                            gt[j] = pj / t[j];
                        }
                    }
                    (0.0, gt)
                });
        let grad = DVector::from_iterator(
            self.support.len(),
            self.support
                .iter()
                .zip(&pi)
                .map(|(&j, &pj)| -(v[j] * gv[j] - pj) / kf),
        );
        (-value / kf, grad)
    }
}

fn start_point(given: Option<&DVector<f64>>, dim: usize, name: &str) -> Result<DVector<f64>> {
    match given {
        Some(u) => {
            if u.len() != dim || u.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be a finite vector of length {dim}"
                )));
            }
            Ok(u.clone())
        }
        None => Ok(DVector::zeros(dim)),
    }
}

/// Runs the optimizer, falling back to the start point on failure.
fn run<O: SmoothedObjective>(
    obj: &O,
    start: &DVector<f64>,
    settings: &OptimizerSettings,
    notes: &mut Vec<String>,
) -> Result<(DVector<f64>, Option<OptimizerSummary>)> {
    settings.validate()?;
    let start_value = obj.exact(start);
    if !start_value.is_finite() {
        notes.push("objective is infinite at the start point; not optimized".into());
        return Ok((start.clone(), None));
    }
    match minimize_smoothed(obj, start, settings) {
        Ok(r) => {
            if !r.converged {
                notes.push("optimizer stopped before convergence; the bound is still valid".into());
            }
            let summary = OptimizerSummary::from_result(&r, start_value);
            Ok((DVector::from_vec(r.point), Some(summary)))
        }
        Err(e) => {
            notes.push(format!("optimizer failed ({e}); reporting the start point"));
            Ok((start.clone(), None))
        }
    }
}

fn finish(
    mut report: BoundReport,
    started: Instant,
    notes: Vec<String>,
    summary: Option<OptimizerSummary>,
) -> BoundReport {
    report.optimized = true;
    report.notes.extend(notes);
    report.optimizer = summary;
    report.wall_time_ms = started.elapsed().as_millis() as u64;
    report
}

/// Minimizes `alpha_k(e^u)` from `u0` (default `0`). The value is the exact
/// `alpha_eval` at the final parameter.
pub fn alpha_optimize(
    family: &MatrixFamily,
    k: usize,
    u0: Option<&DVector<f64>>,
    settings: &OptimizerSettings,
) -> Result<BoundReport> {
    let started = Instant::now();
    let obj = AlphaObjective::new(family, k)?;
    let start = start_point(u0, family.dim(), "u0")?;
    let mut notes = Vec::new();
    let (u, summary) = run(&obj, &start, settings, &mut notes)?;
    let mut report = super::alpha_eval(family, k, &u.map(f64::exp))?;
    report.kind = BoundKind::Alpha;
    Ok(finish(report, started, notes, summary))
}

/// [`alpha_optimize`] for the partition bound.
pub fn alpha_tilde_optimize(
    family: &MatrixFamily,
    partition: &PartitionStructure,
    k: usize,
    u0: Option<&DVector<f64>>,
    settings: &OptimizerSettings,
) -> Result<BoundReport> {
    let started = Instant::now();
    let obj = AlphaObjective::with_partition(family, k, partition)?;
    let start = start_point(u0, family.dim(), "u0")?;
    let mut notes = Vec::new();
    let (u, summary) = run(&obj, &start, settings, &mut notes)?;
    let report = alpha_tilde_eval(family, partition, k, &u.map(f64::exp))?;
    Ok(finish(report, started, notes, summary))
}

/// Maximizes `beta_k(e^w)` from `w0` (default `0`). The problem is only
/// quasiconcave, so the result is a local optimum; the value is the exact
/// `beta_eval` at the final parameter.
pub fn beta_optimize(
    family: &MatrixFamily,
    k: usize,
    w0: Option<&DVector<f64>>,
    settings: &OptimizerSettings,
) -> Result<BoundReport> {
    let started = Instant::now();
    let obj = BetaObjective::new(family, k)?;
    let start = start_point(w0, family.dim(), "w0")?;
    let mut notes = vec!["local optimum: global optimality is not certified".to_string()];
    let (w, summary) = run(&obj, &start, settings, &mut notes)?;
    let report = super::beta_eval(family, k, &obj.embed(&w))?;
    Ok(finish(report, started, notes, summary))
}

/// Largest support `S` such that no product of length `k` has a column `j`
/// in `S` whose support misses `S`. On it `beta_tilde` is finite; `None`
/// when `S` is empty.
pub fn default_beta_support(family: &MatrixFamily, k: usize) -> Result<Option<Vec<usize>>> {
    family.require_nonnegative()?;
    let ens = Ensemble::new(family, k)?;
    let mut support: Vec<usize> = (0..family.dim()).collect();
    loop {
        if support.is_empty() {
            return Ok(None);
        }
        let mut v = DVector::zeros(family.dim());
        for &j in &support {
            v[j] = 1.0;
        }
        let means = transpose_log_means(&ens, &v);
        let kept: Vec<usize> = support
            .iter()
            .copied()
            .filter(|&j| means[j].is_finite())
            .collect();
        if kept.len() == support.len() {
            return Ok(Some(support));
        }
        support = kept;
    }
}

/// Maximizes `beta_tilde_k(v)` over `v` with the support of `v0`.
///
/// Without `v0` the support is [`default_beta_support`] and the start is
/// its indicator.
pub fn beta_tilde_optimize(
    family: &MatrixFamily,
    k: usize,
    v0: Option<&DVector<f64>>,
    settings: &OptimizerSettings,
) -> Result<BoundReport> {
    let started = Instant::now();
    let d = family.dim();
    let v0 = match v0 {
        Some(v) => {
            check_vector(v, d, "v0", false)?;
            v.clone()
        }
        None => match default_beta_support(family, k)? {
            Some(s) => {
                let mut v = DVector::zeros(d);
                s.iter().for_each(|&j| v[j] = 1.0);
                v
            }
            None => {
                return Err(Error::Precondition(
                    "every support yields an infinite lower bound at this k".into(),
                ))
            }
        },
    };
    let support: Vec<usize> = (0..d).filter(|&j| v0[j] > 0.0).collect();
    let start = DVector::from_iterator(support.len(), support.iter().map(|&j| v0[j].ln()));
    let obj = BetaObjective::with_support(family, k, support)?;
    let mut notes = vec!["local optimum: global optimality is not certified".to_string()];
    let (w, summary) = run(&obj, &start, settings, &mut notes)?;
    let report = beta_tilde_eval(family, k, &obj.embed(&w))?;
    Ok(finish(report, started, notes, summary))
}
