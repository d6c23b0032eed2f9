use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points of a feasible set: an inner product and convex combinations.
pub trait FwPoint: Clone {
    fn inner(&self, other: &Self) -> f64;
    /// `(1 - gamma) * self + gamma * other`.
    fn lerp(&self, other: &Self, gamma: f64) -> Self;
    fn scaled(&self, c: f64) -> Self;
    /// `self += c * other`.
    fn add_scaled(&mut self, other: &Self, c: f64);
    fn all_finite(&self) -> bool;
}

impl FwPoint for DVector<f64> {
    fn inner(&self, other: &Self) -> f64 {
        self.dot(other)
    }
    fn lerp(&self, other: &Self, gamma: f64) -> Self {
        self * (1.0 - gamma) + other * gamma
    }
    fn scaled(&self, c: f64) -> Self {
        self * c
    }
    fn add_scaled(&mut self, other: &Self, c: f64) {
        self.axpy(c, other, 1.0);
    }
    fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

impl FwPoint for DMatrix<f64> {
    /// Frobenius inner product `tr(A^T B)`.
    fn inner(&self, other: &Self) -> f64 {
        self.dot(other)
    }
    fn lerp(&self, other: &Self, gamma: f64) -> Self {
        self * (1.0 - gamma) + other * gamma
    }
    fn scaled(&self, c: f64) -> Self {
        self * c
    }
    fn add_scaled(&mut self, other: &Self, c: f64) {
        *self += other * c;
    }
    fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

/// A compact convex set with a linear maximization oracle.
pub trait FeasibleSet {
    type Point: FwPoint;
    /// A point in the relative interior (barycenter).
    fn start(&self) -> Self::Point;
    /// `argmax_{s in set} <grad, s>`.
    fn linear_oracle(&self, grad: &Self::Point) -> Self::Point;
}

/// The standard simplex `{z >= 0, sum z = 1}` in `R^dim`.
#[derive(Debug, Clone, Copy)]
pub struct Simplex {
    pub dim: usize,
}

impl FeasibleSet for Simplex {
    type Point = DVector<f64>;

    fn start(&self) -> DVector<f64> {
        DVector::from_element(self.dim, 1.0 / self.dim as f64)
    }

    /// Best vertex; ties go to the smallest index.
    fn linear_oracle(&self, grad: &DVector<f64>) -> DVector<f64> {
        let mut best = 0;
        for i in 1..self.dim {
            if grad[i] > grad[best] {
                best = i;
            }
        }
        let mut s = DVector::zeros(self.dim);
        s[best] = 1.0;
        s
    }
}

/// Symmetric PSD `dim x dim` matrices with unit trace.
#[derive(Debug, Clone, Copy)]
pub struct Spectrahedron {
    pub dim: usize,
}

impl FeasibleSet for Spectrahedron {
    type Point = DMatrix<f64>;

    fn start(&self) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim) / self.dim as f64
    }

    /// `q q^T` for a unit top eigenvector `q` of the symmetrized gradient.
    fn linear_oracle(&self, grad: &DMatrix<f64>) -> DMatrix<f64> {
        let sym = (grad + grad.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let mut best = 0;
        for i in 1..self.dim {
            if eig.eigenvalues[i] > eig.eigenvalues[best] {
                best = i;
            }
        }
        let q = eig.eigenvectors.column(best).normalize();
        &q * q.transpose()
    }
}

/// A smooth concave function on a feasible set.
pub trait ConcaveObjective<P> {
    fn value(&self, p: &P) -> f64;
    fn gradient(&self, p: &P) -> P;
    /// Exact maximizer over `gamma in [0, 1]` of `value(x + gamma (s - x))`,
    /// when the objective can compute it cheaply.
    fn exact_step(&self, _x: &P, _s: &P) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    /// `gamma_t = 2 / (t + 2)`.
    Classic,
    /// Exact maximization along the segment: the objective's own
    /// [`ConcaveObjective::exact_step`] or golden-section search.
    LineSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwSettings {
    pub tol: f64,
    pub max_iters: usize,
    pub step: StepRule,
}

impl Default for FwSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 5000,
            step: StepRule::LineSearch,
        }
    }
}

/// Snapshot passed to the observer of [`frank_wolfe_observed`].
#[derive(Debug)]
pub struct FwIterate<'a, P> {
    pub iteration: usize,
    pub point: &'a P,
    pub value: f64,
    pub gap: f64,
    /// Running minimum of `value + gap`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwResult<P> {
    pub point: P,
    pub value: f64,
    /// Gap at `point`; the optimum is at most `value + gap`.
    pub gap: f64,
    /// Smallest `value_t + gap_t` over all iterates, a valid upper bound on
    /// the optimum. Never larger than `value + gap`.
    pub bound: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restarts: usize,
    /// `bound` after every iteration; nonincreasing.
    pub certificate_trace: Vec<f64>,
}

/// Maximizes a concave function with the conditional gradient method.
///
/// At each iterate the gap `<grad, s - x>` to the oracle vertex `s`
/// certifies `optimum <= value + gap`.
pub fn frank_wolfe<S, O>(
    set: &S,
    objective: &O,
    settings: &FwSettings,
) -> Result<FwResult<S::Point>>
where
    S: FeasibleSet,
    O: ConcaveObjective<S::Point>,
{
    frank_wolfe_observed(set, objective, settings, |_| {})
}

/// [`frank_wolfe`] with a callback invoked once per iterate.
pub fn frank_wolfe_observed<S, O, F>(
    set: &S,
    objective: &O,
    settings: &FwSettings,
    mut observer: F,
) -> Result<FwResult<S::Point>>
where
    S: FeasibleSet,
    O: ConcaveObjective<S::Point>,
    F: FnMut(&FwIterate<'_, S::Point>),
{
    if !(settings.tol >= 0.0) || settings.max_iters == 0 {
        return Err(Error::InvalidParameter(
            "invalid Frank-Wolfe settings".into(),
        ));
    }
    let mut x = set.start();
    let mut restarts = 0;
    let mut bound = f64::INFINITY;
    let mut trace = Vec::new();
    let mut iteration = 0;
    let mut gap;
    let mut value;
    loop {
        value = objective.value(&x);
        let grad = objective.gradient(&x);
        if !value.is_finite() || !grad.all_finite() {
            restarts += 1;
            if restarts > 1 {
                return Err(Error::Optimizer(format!(
                    "objective or gradient not finite at iterate {iteration}"
                )));
            }
            x = set.start();
            continue;
        }
        let s = set.linear_oracle(&grad);
        gap = (grad.inner(&s) - grad.inner(&x)).max(0.0);
        bound = bound.min(value + gap);
        trace.push(bound);
        observer(&FwIterate {
            iteration,
            point: &x,
            value,
            gap,
            bound,
        });
        if gap <= settings.tol || iteration >= settings.max_iters {
            break;
        }
        let gamma = match settings.step {
            StepRule::Classic => 2.0 / (iteration as f64 + 2.0),
            StepRule::LineSearch => objective
                .exact_step(&x, &s)
                .unwrap_or_else(|| golden_section(|g| objective.value(&x.lerp(&s, g)))),
        };
        x = x.lerp(&s, gamma);
        iteration += 1;
    }
    Ok(FwResult {
        point: x,
        value,
        gap,
        bound,
        iterations: iteration,
        converged: gap <= settings.tol,
        restarts,
        certificate_trace: trace,
    })
}

/// Maximizer of a concave function on `[0, 1]`.
fn golden_section<F: Fn(f64) -> f64>(f: F) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    // endpoints can be optimal for monotone slices
    [(f(0.0), 0.0), (f(mid), mid), (f(1.0), 1.0)]
        .into_iter()
        .fold((f64::NEG_INFINITY, 0.0), |acc, (v, g)| {
            if v > acc.0 {
                (v, g)
            } else {
                acc
            }
        })
        .1
}

/// `scale * sum_i w_i ln <n_i, p>` for fixed directions `n_i`.
///
/// Both certified bounds built on linear functionals have this form.
#[derive(Debug, Clone)]
pub struct LogLinearObjective<P> {
    pub weights: Vec<f64>,
    pub directions: Vec<P>,
    pub scale: f64,
}

/// Arguments of `ln` below this are treated as zero.
const LOG_GUARD: f64 = 1e-300;

impl<P: FwPoint> LogLinearObjective<P> {
    fn pairings(&self, p: &P) -> Vec<f64> {
        self.directions.iter().map(|n| n.inner(p)).collect()
    }
}

impl<P: FwPoint> ConcaveObjective<P> for LogLinearObjective<P> {
    fn value(&self, p: &P) -> f64 {
        let mut total = 0.0;
        for (w, a) in self.weights.iter().zip(self.pairings(p)) {
            if !(a > LOG_GUARD) {
                return f64::NEG_INFINITY;
            }
            total += w * a.ln();
        }
        self.scale * total
    }

    fn gradient(&self, p: &P) -> P {
        let pairs = self.pairings(p);
        let mut grad = self.directions[0].scaled(0.0);
        for ((w, n), a) in self.weights.iter().zip(&self.directions).zip(pairs) {
            grad.add_scaled(n, self.scale * w / a);
        }
        grad
    }

    fn exact_step(&self, x: &P, s: &P) -> Option<f64> {
        let a = self.pairings(x);
        let b = self.pairings(s);
        let slope = |g: f64| -> f64 {
            self.weights
                .iter()
                .zip(a.iter().zip(&b))
                .map(|(w, (&ai, &bi))| w * (bi - ai) / (ai + g * (bi - ai)))
                .sum()
        };
        if slope(0.0) <= 0.0 {
            return Some(0.0);
        }
        if b.iter().all(|&bi| bi > LOG_GUARD) && slope(1.0) >= 0.0 {
            return Some(1.0);
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-16 {
                break;
            }
        }
        Some(lo)
    }
}
