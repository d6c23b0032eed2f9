//! Sampled estimate of the Lyapunov exponent from random trajectories.

use nalgebra::DVector;
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::MatrixFamily;

/// Monte Carlo estimate of `lambda` in nats per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trajectories: usize,
    pub length: usize,
    pub seed: u64,
    /// Trajectories whose vector became exactly zero; excluded from the mean.
    pub degenerate: usize,
}

/// Averages `(1/T) ln |X_T x0|` over `N` trajectories.
///
/// Trajectory `t` draws its indices from ChaCha8 seeded with `seed` on
/// stream `t`, so every trajectory is reproducible on its own. The running
/// vector is renormalized in the L1 norm after every step and the log of the
/// discarded scale is accumulated.
pub fn monte_carlo_lambda(
    family: &MatrixFamily,
    length: usize,
    trajectories: usize,
    seed: u64,
    x0: Option<&DVector<f64>>,
) -> Result<McEstimate> {
    if length == 0 || trajectories == 0 {
        return Err(Error::InvalidParameter(
            "trajectory length and count must be >= 1".into(),
        ));
    }
    let d = family.dim();
    let start = match x0 {
        Some(x) => {
            if x.len() != d || x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "x0 must be a finite vector of length {d}"
                )));
            }
            let n = x.lp_norm(1);
            if n == 0.0 {
                return Err(Error::InvalidParameter("x0 must be nonzero".into()));
            }
            x / n
        }
        None => DVector::from_element(d, 1.0 / d as f64),
    };
    let sampler = WeightedIndex::new(family.probs()).expect("validated probabilities");

    let mut count = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut degenerate = 0usize;
    for t in 0..trajectories {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let mut y = start.clone();
        let mut log_growth = 0.0;
        let mut dead = false;
        for _ in 0..length {
            let j = sampler.sample(&mut rng);
            y = family.matrix(j) * &y;
            let s = y.lp_norm(1);
            if s == 0.0 || !s.is_finite() {
                dead = true;
                break;
            }
            log_growth += s.ln();
            y /= s;
        }
        if dead {
            degenerate += 1;
            continue;
        }
        // Welford update
        let g = log_growth / length as f64;
        count += 1;
        let delta = g - mean;
        mean += delta / count as f64;
        m2 += delta * (g - mean);
    }
    if count == 0 {
        return Err(Error::AllTrajectoriesDegenerate { trajectories });
    }
    let stderr = if count > 1 {
        (m2 / (count - 1) as f64).sqrt() / (count as f64).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        stderr,
        trajectories,
        length,
        seed,
        degenerate,
    })
}
