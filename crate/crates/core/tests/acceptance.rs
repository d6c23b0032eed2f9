//! Acceptance suite: one PASS/FAIL line per criterion.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::HashSet;
use std::process::ExitCode;
use std::time::Instant;

use lyapbounds::bounds::{
    alpha_eval, alpha_optimize, alpha_tilde_eval, beta_eval, beta_optimize, beta_tilde_eval,
    euclidean_upper, gamma_orthant_eval, AlphaObjective, BetaObjective, BoundValue,
};
use lyapbounds::corpus::{make_counterexample, make_derham, make_random, make_sigma6};
use lyapbounds::lifting::{gamma_sdp_settings, gamma_sdp_upper, lift};
use lyapbounds::nalgebra::{DMatrix, DVector};
use lyapbounds::optim::{FwSettings, OptimizerSettings, SmoothedObjective};
use lyapbounds::structure::{positive_product_or_partition, Positivity, DEFAULT_PATTERN_BUDGET};
use lyapbounds::{monte_carlo_lambda, Error, MatrixFamily, ProductIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ones(d: usize) -> DVector<f64> {
    DVector::from_element(d, 1.0)
}

fn scalars(xs: &[f64]) -> MatrixFamily {
    MatrixFamily::new(
        xs.iter().map(|&x| DMatrix::from_element(1, 1, x)).collect(),
        None,
    )
    .unwrap()
}

fn swap_pair() -> MatrixFamily {
    MatrixFamily::from_rows(
        &[
            vec![vec![0.0, 2.0], vec![3.0, 0.0]],
            vec![vec![0.0, 1.0], vec![5.0, 0.0]],
        ],
        None,
    )
    .unwrap()
}

fn corpus() -> Vec<(String, MatrixFamily)> {
    let mut out = vec![
        ("sigma6".to_string(), make_sigma6()),
        ("derham 1/3".into(), make_derham(1.0 / 3.0).unwrap()),
        ("derham 1/5".into(), make_derham(1.0 / 5.0).unwrap()),
        ("derham 1/7".into(), make_derham(1.0 / 7.0).unwrap()),
        ("swap pair".into(), swap_pair()),
    ];
    for seed in 0..5 {
        out.push((
            format!("random d=5 seed={seed}"),
            make_random(5, 0.8, false, seed).unwrap(),
        ));
    }
    for seed in 0..5 {
        out.push((
            format!("random d=10 seed={seed}"),
            make_random(10, 1.0, false, 100 + seed).unwrap(),
        ));
    }
    out
}

fn c1_scalar_exactness() -> Outcome {
    let f = scalars(&[2.0, 8.0]);
    let want = 2.0 * 2f64.ln();
    let mut worst: f64 = 0.0;
    for k in 1..=5 {
        let a = alpha_eval(&f, k, &ones(1)).unwrap().value_f64();
        let b = beta_eval(&f, k, &ones(1)).unwrap().value_f64();
        let g = gamma_orthant_eval(&f, k, &ones(1), &FwSettings::default())
            .unwrap()
            .value_f64();
        worst = worst
            .max((a - want).abs())
            .max((b - want).abs())
            .max((g - want).abs());
    }
    let short = monte_carlo_lambda(&f, 250, 20, 1, None).unwrap();
    let long = monte_carlo_lambda(&f, 16_000, 20, 1, None).unwrap();
    let mc_ok =
        (long.mean - want).abs() <= 3.0 * long.stderr + 1e-12 && long.stderr < short.stderr / 4.0;
    check(
        worst <= 1e-12 && mc_ok,
        format!(
            "max deviation {worst:e}; MC mean {} (stderr {} at T=250, {} at T=16000)",
            long.mean, short.stderr, long.stderr
        ),
    )
}

fn c2_perron_oracle() -> Outcome {
    let f = MatrixFamily::from_rows(&[vec![vec![2.0, 1.0], vec![1.0, 2.0]]], None).unwrap();
    let s = OptimizerSettings::default();
    let want = 3f64.ln();
    let mut worst: f64 = 0.0;
    for start in [None, Some(DVector::from_vec(vec![0.8, -0.5]))] {
        let a = alpha_optimize(&f, 1, start.as_ref(), &s)
            .unwrap()
            .value_f64();
        let b = beta_optimize(&f, 1, start.as_ref(), &s)
            .unwrap()
            .value_f64();
        worst = worst.max((a - want).abs()).max((b - want).abs());
    }
    check(worst <= 1e-6, format!("max |bound - ln 3| = {worst:e}"))
}

fn c3_sandwich_and_mc() -> Outcome {
    let started = Instant::now();
    let mut failures = Vec::new();
    for (i, (name, f)) in corpus().into_iter().enumerate() {
        let mc = monte_carlo_lambda(&f, 5000, 50, 7 + i as u64, None).unwrap();
        for k in 1..=10 {
            let a = alpha_eval(&f, k, &ones(f.dim())).unwrap().value_f64();
            let b = beta_eval(&f, k, &ones(f.dim())).unwrap().value_f64();
            if !(b <= a + 1e-9) {
                failures.push(format!("{name} k={k}: beta {b} > alpha {a}"));
            }
            if !(mc.mean >= b - 3.0 * mc.stderr && mc.mean <= a + 3.0 * mc.stderr) {
                failures.push(format!("{name} k={k}: MC {} outside [{b}, {a}]", mc.mean));
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    if secs > 300.0 {
        failures.push(format!("runtime {secs:.1}s"));
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("15 families, k <= 10, {secs:.1}s")
        } else {
            failures.join("; ")
        },
    )
}

fn c4_doubling() -> Outcome {
    let mut failures = Vec::new();
    for (name, f) in corpus() {
        let x = ones(f.dim());
        for k in [1, 2, 4] {
            let a1 = alpha_eval(&f, k, &x).unwrap().value_f64();
            let a2 = alpha_eval(&f, 2 * k, &x).unwrap().value_f64();
            let b1 = beta_eval(&f, k, &x).unwrap().value_f64();
            let b2 = beta_eval(&f, 2 * k, &x).unwrap().value_f64();
            if !(a2 <= a1 + 1e-9) {
                failures.push(format!("{name} alpha k={k}: {a2} > {a1}"));
            }
            if !(b2 >= b1 - 1e-9) {
                failures.push(format!("{name} beta k={k}: {b2} < {b1}"));
            }
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            "15 families, k in {1,2,4}".into()
        } else {
            failures.join("; ")
        },
    )
}

fn c5_random_dense() -> Outcome {
    let s = OptimizerSettings::default();
    let mut parts = Vec::new();
    let mut ok = true;
    for d in [10, 20] {
        let started = Instant::now();
        let f = make_random(d, 1.0, false, 2024).unwrap();
        let a = alpha_optimize(&f, 12, None, &s).unwrap().value_f64();
        let b = beta_optimize(&f, 12, None, &s).unwrap().value_f64();
        let rel = (a - b) / a.abs().max(1e-12);
        let secs = started.elapsed().as_secs_f64();
        ok &= rel <= 0.02 && b <= a && secs <= 600.0;
        parts.push(format!(
            "d={d}: rho in [{:.4}, {:.4}], rel gap {:.3}% ({secs:.1}s)",
            b.exp(),
            a.exp(),
            100.0 * rel
        ));
    }
    check(ok, parts.join("; "))
}

fn c6_partition_case() -> Outcome {
    let f = swap_pair();
    let p = match positive_product_or_partition(&f, DEFAULT_PATTERN_BUDGET) {
        Ok(Positivity::Partition(p)) => p,
        other => return Err(format!("expected a partition, got {other:?}")),
    };
    let want = 0.25 * 30f64.ln();
    let at = alpha_tilde_eval(&f, &p, 12, &ones(2)).unwrap().value_f64();
    let b = beta_eval(&f, 12, &ones(2)).unwrap().value_f64();
    check(
        at - b <= 0.02 && (at - want).abs() <= 0.02 && (b - want).abs() <= 0.02,
        format!("alpha_tilde {at}, beta {b}, target {want}"),
    )
}

fn c7_beta_tilde() -> Outcome {
    let f = MatrixFamily::from_rows(
        &[
            vec![vec![2.0, 0.0], vec![1.0, 0.0]],
            vec![vec![3.0, 0.0], vec![1.0, 0.0]],
        ],
        None,
    )
    .unwrap();
    let want = 0.5 * 6f64.ln();
    let t = beta_tilde_eval(&f, 1, &DVector::from_vec(vec![1.0, 0.0]))
        .unwrap()
        .value_f64();
    let b = beta_eval(&f, 1, &ones(2)).unwrap().value;
    check(
        (t - want).abs() <= 1e-12 && b == BoundValue::NegInfinity,
        format!("beta_tilde {t} vs {want}; beta {b}"),
    )
}

fn c8_proposition_sdp() -> Outcome {
    let started = Instant::now();
    let mut sum_g = 0.0;
    let mut sum_e = 0.0;
    let mut sum_rho_g = 0.0;
    let mut sum_rho_e = 0.0;
    let mut violations = Vec::new();
    for seed in 0..20u64 {
        let f = make_random(10, 1.0, true, 500 + seed).unwrap();
        let g = gamma_sdp_upper(&f, 1, &DMatrix::identity(10, 10), &gamma_sdp_settings())
            .unwrap()
            .value_f64();
        let e = euclidean_upper(&f, 1).unwrap().value_f64();
        if !(g <= e) {
            violations.push(format!("seed {seed}: {g} > {e}"));
        }
        sum_g += g;
        sum_e += e;
        sum_rho_g += g.exp();
        sum_rho_e += e.exp();
    }
    let ratio = sum_g / sum_e;
    let rho_ratio = sum_rho_g / sum_rho_e;
    let secs = started.elapsed().as_secs_f64();
    check(
        violations.is_empty() && ratio <= 0.85 && secs <= 300.0,
        format!(
            "mean Gamma {:.4} vs Euclid {:.4} nats (ratio {ratio:.3}; radius ratio {rho_ratio:.3}); {secs:.1}s {}",
            sum_g / 20.0,
            sum_e / 20.0,
            violations.join("; ")
        ),
    )
}

fn c9_lifting_identity() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for seed in 0..3u64 {
        let f = make_random(3, 1.0, true, 40 + seed).unwrap();
        let lifted = lift(&f);
        let base = monte_carlo_lambda(&f, 5000, 50, 900 + seed, None).unwrap();
        let up = monte_carlo_lambda(
            &lifted.as_family().unwrap(),
            5000,
            50,
            1900 + seed,
            Some(&lifted.identity_start()),
        )
        .unwrap();
        let se = (up.stderr.powi(2) + (2.0 * base.stderr).powi(2)).sqrt();
        let diff = (up.mean - 2.0 * base.mean).abs();
        ok &= diff <= 3.0 * se;
        parts.push(format!(
            "seed {seed}: |{:.4} - 2*{:.4}| = {diff:.2e} (3se {:.2e})",
            up.mean,
            base.mean,
            3.0 * se
        ));
    }
    check(ok, parts.join("; "))
}

/// Boolean patterns of at most 5x5 matrices as 25-bit masks.
fn pattern(a: &DMatrix<f64>) -> u32 {
    let d = a.nrows();
    let mut m = 0;
    for i in 0..d {
        for j in 0..d {
            if a[(i, j)] != 0.0 {
                m |= 1 << (i * d + j);
            }
        }
    }
    m
}

fn pattern_mul(a: u32, b: u32, d: usize) -> u32 {
    let mut c = 0;
    for i in 0..d {
        for j in 0..d {
            if (0..d).any(|l| a >> (i * d + l) & 1 == 1 && b >> (l * d + j) & 1 == 1) {
                c |= 1 << (i * d + j);
            }
        }
    }
    c
}

/// Exhaustive semigroup closure: is some product entrywise positive?
fn oracle_positive(f: &MatrixFamily) -> bool {
    let d = f.dim();
    let full = if d * d == 32 {
        u32::MAX
    } else {
        (1u32 << (d * d)) - 1
    };
    let gens: Vec<u32> = f.matrices().iter().map(pattern).collect();
    let mut seen: HashSet<u32> = gens.iter().copied().collect();
    let mut frontier: Vec<u32> = seen.iter().copied().collect();
    while let Some(p) = frontier.pop() {
        if p == full {
            return true;
        }
        for &g in &gens {
            let q = pattern_mul(g, p, d);
            if seen.insert(q) {
                frontier.push(q);
            }
        }
    }
    false
}

fn oracle_preconditions(f: &MatrixFamily) -> bool {
    let d = f.dim();
    let zero_line = f.matrices().iter().any(|a| {
        (0..d).any(|i| (0..d).all(|j| a[(i, j)] == 0.0))
            || (0..d).any(|j| (0..d).all(|i| a[(i, j)] == 0.0))
    });
    // reachability in the union digraph
    let mut reach = vec![vec![false; d]; d];
    for a in f.matrices() {
        for i in 0..d {
            for j in 0..d {
                reach[i][j] |= a[(i, j)] != 0.0;
            }
        }
    }
    for l in 0..d {
        for i in 0..d {
            for j in 0..d {
                reach[i][j] = reach[i][j] || (reach[i][l] && reach[l][j]);
            }
        }
    }
    let strongly_connected =
        (0..d).all(|i| (0..d).all(|j| i == j || reach[i][j])) && (d > 1 || reach[0][0]);
    !zero_line && (strongly_connected || d == 1)
}

fn c10_structure_dichotomy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut checked = 0;
    let mut partitions = 0;
    let mut rejected = 0;
    let mut failures = Vec::new();
    while checked < 200 {
        let d = rng.gen_range(1..=5);
        let m = rng.gen_range(1..=3);
        let density = rng.gen_range(0.2..0.7);
        let mats: Vec<DMatrix<f64>> = if d >= 2 && rng.gen_bool(0.5) {
            // class-permuting patterns
            let r = rng.gen_range(2..=d);
            let owner: Vec<usize> = (0..d)
                .map(|i| if i < r { i } else { rng.gen_range(0..r) })
                .collect();
            (0..m)
                .map(|_| {
                    let mut sigma: Vec<usize> = (0..r).collect();
                    for i in (1..r).rev() {
                        sigma.swap(i, rng.gen_range(0..=i));
                    }
                    DMatrix::from_fn(d, d, |i, j| {
                        if owner[i] == sigma[owner[j]] && rng.gen::<f64>() < density + 0.3 {
                            1.0
                        } else {
                            0.0
                        }
                    })
                })
                .collect()
        } else {
            (0..m)
                .map(|_| {
                    DMatrix::from_fn(
                        d,
                        d,
                        |_, _| if rng.gen::<f64>() < density { 1.0 } else { 0.0 },
                    )
                })
                .collect()
        };
        let f = MatrixFamily::new(mats, None).unwrap();
        let valid = oracle_preconditions(&f);
        match positive_product_or_partition(&f, DEFAULT_PATTERN_BUDGET) {
            Err(Error::Precondition(_)) if !valid => rejected += 1,
            Ok(Positivity::PositiveProduct { word }) if valid => {
                checked += 1;
                let b = ProductIndex::new(&f, word).unwrap().product(&f);
                if !b.iter().all(|&x| x > 0.0) || !oracle_positive(&f) {
                    failures.push(format!("pattern {checked}: bad positive word"));
                }
            }
            Ok(Positivity::Partition(p)) if valid => {
                checked += 1;
                partitions += 1;
                if p.num_classes() < 2 || p.check_against(&f).is_err() || oracle_positive(&f) {
                    failures.push(format!("pattern {checked}: bad partition {:?}", p.classes));
                }
            }
            other => failures.push(format!("valid={valid}: unexpected {other:?}")),
        }
        if failures.len() > 5 {
            break;
        }
    }
    check(
        failures.is_empty(),
        format!(
            "{checked} patterns ({partitions} partitions), {rejected} precondition rejections {}",
            failures.join("; ")
        ),
    )
}

fn max_relative_fd_error<O: SmoothedObjective>(
    obj: &O,
    rng: &mut ChaCha8Rng,
    points: usize,
) -> f64 {
    let temps = [1.0, 0.1, 0.01];
    let mut worst: f64 = 0.0;
    for n in 0..points {
        let tau = temps[n % 3];
        let p = DVector::from_fn(obj.dim(), |_, _| rng.gen_range(-1.0..1.0));
        let (_, g) = obj.smoothed(&p, tau);
        let h = 1e-6;
        let fd = DVector::from_fn(obj.dim(), |i, _| {
            let mut a = p.clone();
            a[i] += h;
            let mut b = p.clone();
            b[i] -= h;
            (obj.smoothed(&a, tau).0 - obj.smoothed(&b, tau).0) / (2.0 * h)
        });
        worst = worst.max((fd - &g).amax() / g.amax().max(1e-8));
    }
    worst
}

fn c11_gradients() -> Outcome {
    let f = make_random(5, 1.0, false, 11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let ea = max_relative_fd_error(&AlphaObjective::new(&f, 3).unwrap(), &mut rng, 25);
    let eb = max_relative_fd_error(&BetaObjective::new(&f, 3).unwrap(), &mut rng, 25);
    check(
        ea <= 1e-5 && eb <= 1e-5,
        format!("max relative error alpha {ea:.2e}, beta {eb:.2e}"),
    )
}

fn c12_counterexample() -> Outcome {
    let f = make_counterexample();
    let g = gamma_sdp_upper(&f, 1, &DMatrix::identity(2, 2), &gamma_sdp_settings())
        .unwrap()
        .value_f64();
    let mc = monte_carlo_lambda(&f, 5000, 50, 12, None).unwrap();
    check(
        g <= 2f64.ln() + 1e-9 && mc.mean >= -3.0 * mc.stderr,
        format!(
            "Gamma_1 {g} (ln 2 = {}); MC {} +- {}",
            2f64.ln(),
            mc.mean,
            mc.stderr
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("scalar exactness", c1_scalar_exactness),
        ("Perron oracle", c2_perron_oracle),
        ("sandwich and Monte Carlo containment", c3_sandwich_and_mc),
        ("doubling monotonicity", c4_doubling),
        ("random dense pairs at k=12", c5_random_dense),
        ("partition-case convergence", c6_partition_case),
        ("beta_tilde on zero columns", c7_beta_tilde),
        ("Gamma_1(I) against the Euclidean bound", c8_proposition_sdp),
        ("lifting doubles the exponent", c9_lifting_identity),
        (
            "positivity dichotomy against exhaustive closure",
            c10_structure_dichotomy,
        ),
        ("smoothed gradient checks", c11_gradients),
        ("counterexample family", c12_counterexample),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", n + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
