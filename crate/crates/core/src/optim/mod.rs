//! Optimization engine shared by the bound computations.
//!
//! [`minimize_smoothed`] handles the nonsmooth convex (and quasiconvex)
//! parameter problems through log-sum-exp smoothing and a quasi-Newton
//! method. [`frank_wolfe`] maximizes smooth concave functions over the
//! simplex or the trace-one spectrahedron and returns a duality-gap
//! certificate.

mod frank_wolfe;
mod quasi_newton;

pub use frank_wolfe::{
    frank_wolfe, frank_wolfe_observed, ConcaveObjective, FeasibleSet, FwIterate, FwPoint, FwResult,
    FwSettings, LogLinearObjective, Simplex, Spectrahedron, StepRule,
};
pub use quasi_newton::{
    minimize_smoothed, LineSearch, OptimizerResult, OptimizerSettings, SmoothedObjective,
    TraceEntry,
};

/// `tau * ln sum_i exp(x_i / tau)` and the softmax weights.
///
/// Entries equal to `-inf` get weight zero; if all entries are `-inf` the
/// value is `-inf` and all weights are zero. The value lies in
/// `[max x, max x + tau ln n]`.
pub fn soft_max(xs: &[f64], tau: f64) -> (f64, Vec<f64>) {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return (f64::NEG_INFINITY, vec![0.0; xs.len()]);
    }
    let mut weights: Vec<f64> = xs.iter().map(|&x| ((x - m) / tau).exp()).collect();
    let z: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= z);
    (m + tau * z.ln(), weights)
}

/// `-tau * ln sum_i exp(-x_i / tau)`: smoothed minimum, in
/// `[min x - tau ln n, min x]`.
pub fn soft_min(xs: &[f64], tau: f64) -> (f64, Vec<f64>) {
    let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
    let (v, w) = soft_max(&neg, tau);
    (-v, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_max_bounds() {
        let xs = [0.3, -1.2, 2.5, 2.4];
        for tau in [1.0, 0.1, 0.01] {
            let (v, w) = soft_max(&xs, tau);
            assert!(v >= 2.5 && v <= 2.5 + tau * 4f64.ln() + 1e-15);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let (v, _) = soft_min(&xs, tau);
            assert!(v <= -1.2 && v >= -1.2 - tau * 4f64.ln() - 1e-15);
        }
    }

    #[test]
    fn soft_max_handles_neg_infinity() {
        let (v, w) = soft_max(&[f64::NEG_INFINITY, 1.0], 0.5);
        assert_eq!(v, 1.0);
        assert_eq!(w, vec![0.0, 1.0]);
        let (v, w) = soft_max(&[f64::NEG_INFINITY; 3], 0.5);
        assert_eq!(v, f64::NEG_INFINITY);
        assert_eq!(w, vec![0.0; 3]);
        // extreme spread does not overflow
        let (v, _) = soft_max(&[1e6, -1e6], 1e-3);
        assert_eq!(v, 1e6);
    }
}
