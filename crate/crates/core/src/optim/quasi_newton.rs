use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A nonsmooth objective together with a family of smooth approximations.
pub trait SmoothedObjective {
    fn dim(&self) -> usize;

    /// The exact (nonsmooth) objective.
    fn exact(&self, x: &DVector<f64>) -> f64;

    /// Value and gradient of the approximation at temperature `tau`.
    fn smoothed(&self, x: &DVector<f64>, tau: f64) -> (f64, DVector<f64>);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineSearch {
    /// Backtracking on the Armijo condition with quadratic then cubic
    /// interpolation of the step.
    ArmijoCubic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    /// Iteration budget per temperature stage.
    pub max_iters: usize,
    /// Stop a stage when the sup-norm of the smoothed gradient drops below this.
    pub grad_tol: f64,
    /// Smoothing temperatures, strictly decreasing.
    pub temperatures: Vec<f64>,
    pub line_search: LineSearch,
    /// Reserved for randomized restarts; the current method is deterministic.
    pub seed: u64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-8,
            temperatures: vec![1.0, 0.1, 0.01],
            line_search: LineSearch::ArmijoCubic,
            seed: 0,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.temperatures.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one temperature is required".into(),
            ));
        }
        if self
            .temperatures
            .iter()
            .any(|&t| !(t > 0.0) || !t.is_finite())
        {
            return Err(Error::InvalidParameter(
                "temperatures must be positive".into(),
            ));
        }
        if self.temperatures.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter(
                "temperatures must be strictly decreasing".into(),
            ));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "gradient tolerance must be positive".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub stage: usize,
    pub temperature: f64,
    pub smoothed: f64,
    pub exact: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerResult {
    /// Point with the best exact value seen.
    pub point: Vec<f64>,
    /// Exact objective at `point`.
    pub value: f64,
    /// Smoothed objective at `point`, at the last temperature.
    pub smoothed_value: f64,
    pub iterations: usize,
    /// Sup-norm of the smoothed gradient at the last iterate.
    pub grad_norm: f64,
    pub converged: bool,
    pub temperature: f64,
    pub line_search_failures: usize,
    /// One entry per accepted step.
    pub trace: Vec<TraceEntry>,
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

struct Accepted {
    step: f64,
    value: f64,
    grad: DVector<f64>,
}

/// Armijo backtracking; the first reduction uses a quadratic model, later
/// ones a cubic through the last two trial points. Each new step is kept
/// in `[0.1, 0.5]` times the previous one.
fn armijo_cubic<F>(
    eval: &F,
    x: &DVector<f64>,
    dir: &DVector<f64>,
    f0: f64,
    slope: f64,
    step0: f64,
) -> Option<Accepted>
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>),
{
    let mut step = step0;
    let mut prev: Option<(f64, f64)> = None;
    for _ in 0..MAX_BACKTRACKS {
        let trial = x + dir * step;
        let (value, grad) = eval(&trial);
        if value.is_finite() && value <= f0 + ARMIJO_C1 * step * slope {
            return Some(Accepted { step, value, grad });
        }
        let next = if !value.is_finite() {
            0.1 * step
        } else {
            match prev {
                None => -slope * step * step / (2.0 * (value - f0 - slope * step)),
                Some((ps, pv)) => cubic_step(f0, slope, ps, pv, step, value),
            }
        };
        let next = if next.is_finite() {
            next.clamp(0.1 * step, 0.5 * step)
        } else {
            0.5 * step
        };
        prev = Some((step, value));
        step = next;
        if step < 1e-20 {
            break;
        }
    }
    None
}

/// Minimizer of the cubic interpolating `phi(0), phi'(0)` and two trials.
fn cubic_step(f0: f64, slope: f64, a0: f64, f_a0: f64, a1: f64, f_a1: f64) -> f64 {
    let denom = a0 * a0 * a1 * a1 * (a1 - a0);
    let r1 = f_a1 - f0 - slope * a1;
    let r0 = f_a0 - f0 - slope * a0;
    let a = (a0 * a0 * r1 - a1 * a1 * r0) / denom;
    let b = (-a0 * a0 * a0 * r1 + a1 * a1 * a1 * r0) / denom;
    if a.abs() < 1e-300 {
        return -slope / (2.0 * b);
    }
    let disc = b * b - 3.0 * a * slope;
    if disc < 0.0 {
        return 0.5 * a1;
    }
    (-b + disc.sqrt()) / (3.0 * a)
}

/// Minimizes a smoothed nonsmooth objective with BFGS (inverse-Hessian
/// update, identity start) at each temperature in turn, starting each stage
/// from the best exact point so far. Returns the point with the best exact value seen,
/// `x0` included.
pub fn minimize_smoothed<O: SmoothedObjective + ?Sized>(
    objective: &O,
    x0: &DVector<f64>,
    settings: &OptimizerSettings,
) -> Result<OptimizerResult> {
    settings.validate()?;
    let n = objective.dim();
    if x0.len() != n {
        return Err(Error::InvalidParameter(format!(
            "start point has length {}, expected {n}",
            x0.len()
        )));
    }
    let f_start = objective.exact(x0);
    if !f_start.is_finite() {
        return Err(Error::Optimizer(
            "objective is not finite at the start point".into(),
        ));
    }

    let mut best_x = x0.clone();
    let mut best_f = f_start;
    let mut x;
    let mut iterations = 0;
    let mut failures = 0;
    let mut trace = Vec::new();
    let mut grad_norm = f64::INFINITY;
    let mut converged = false;

    for (stage, &tau) in settings.temperatures.iter().enumerate() {
        // a coarse stage may drift where the smoothing bias dominates
        x = best_x.clone();
        let (f_raw, mut g) = objective.smoothed(&x, tau);
        if !f_raw.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Optimizer(format!(
                "smoothed objective is not finite at temperature {tau}"
            )));
        }
        // values are tracked relative to the stage start
        let offset = f_raw;
        let eval = |p: &DVector<f64>| {
            let (v, gr) = objective.smoothed(p, tau);
            (v - offset, gr)
        };
        let mut f = 0.0;
        let mut h = DMatrix::<f64>::identity(n, n);
        let mut h_is_identity = true;
        converged = false;

        for _ in 0..settings.max_iters {
            grad_norm = g.amax();
            if grad_norm <= settings.grad_tol {
                converged = true;
                break;
            }
            let mut dir = -(&h * &g);
            let mut slope = g.dot(&dir);
            if !(slope < 0.0) {
                h = DMatrix::identity(n, n);
                h_is_identity = true;
                dir = -g.clone();
                slope = g.dot(&dir);
            }
            let step0 = if h_is_identity {
                (1.0 / dir.amax()).min(1.0)
            } else {
                1.0
            };
            let accepted = match armijo_cubic(&eval, &x, &dir, f, slope, step0) {
                Some(a) => a,
                None => {
                    failures += 1;
                    if h_is_identity {
                        break;
                    }
                    h = DMatrix::identity(n, n);
                    h_is_identity = true;
                    continue;
                }
            };
            let s = &dir * accepted.step;
            let y = &accepted.grad - &g;
            let sy = s.dot(&y);
            if sy > 1e-12 * s.norm() * y.norm() && sy > 0.0 {
                let rho = 1.0 / sy;
                let hy = &h * &y;
                let yhy = y.dot(&hy);
                // H+ = H - rho (s hy^T + hy s^T) + (rho^2 yHy + rho) s s^T
                h.ger(-rho, &s, &hy, 1.0);
                h.ger(-rho, &hy, &s, 1.0);
                h.ger(rho * rho * yhy + rho, &s, &s, 1.0);
                h_is_identity = false;
            } else {
                h = DMatrix::identity(n, n);
                h_is_identity = true;
            }
            let step_size = s.amax();
            x += &s;
            f = accepted.value;
            g = accepted.grad;
            iterations += 1;

            let exact = objective.exact(&x);
            if exact < best_f {
                best_f = exact;
                best_x = x.clone();
            }
            trace.push(TraceEntry {
                stage,
                temperature: tau,
                smoothed: f + offset,
                exact,
            });
            if step_size <= 1e-15 * x.amax().max(1.0) {
                grad_norm = g.amax();
                break;
            }
        }
    }

    let last_tau = *settings.temperatures.last().expect("validated");
    let smoothed_value = objective.smoothed(&best_x, last_tau).0;
    Ok(OptimizerResult {
        point: best_x.iter().copied().collect(),
        value: best_f,
        smoothed_value,
        iterations,
        grad_norm,
        converged,
        temperature: last_tau,
        line_search_failures: failures,
        trace,
    })
}
