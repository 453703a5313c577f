//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use hopac::{Family, Generator, HacTree};
use rand::Rng;

pub fn gen(family: Family, theta: f64, beta: f64) -> Generator {
    Generator::new(family, theta, beta).unwrap()
}

/// Theta interval used for random generators in tests; wide enough to cover
/// weak and strong dependence, narrow enough to stay numerically tame.
pub fn theta_range(family: Family) -> (f64, f64) {
    match family {
        Family::AliMikhailHaq => (0.0, 0.95),
        Family::Clayton => (0.5, 5.0),
        Family::Frank => (0.5, 15.0),
        Family::Gumbel | Family::Joe => (1.0, 5.0),
    }
}

pub fn random_generator<R: Rng>(family: Family, rng: &mut R) -> Generator {
    let (lo, hi) = theta_range(family);
    let theta = rng.random_range(lo..hi);
    let beta = rng.random_range(1.0..4.0);
    gen(family, theta, beta)
}

/// Composite Simpson rule on `[a, b]` with `m` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    s * h / 3.0
}

/// `phi / phi'` for the inverse generator `phi` of each family, written out
/// by hand so the tau integral below does not reuse library code.
pub fn phi_over_dphi(family: Family, theta: f64, t: f64) -> f64 {
    match family {
        Family::AliMikhailHaq => {
            let phi = ((1.0 - theta * (1.0 - t)) / t).ln();
            let dphi = theta / (1.0 - theta * (1.0 - t)) - 1.0 / t;
            phi / dphi
        }
        Family::Clayton => (t.powf(theta + 1.0) - t) / theta,
        Family::Frank => {
            let phi = -(((-theta * t).exp() - 1.0) / ((-theta).exp() - 1.0)).ln();
            let dphi = theta * (-theta * t).exp() / ((-theta * t).exp() - 1.0);
            phi / dphi
        }
        Family::Gumbel => t * t.ln() / theta,
        Family::Joe => {
            let a = (1.0 - t).powf(theta);
            let phi = -(1.0 - a).ln();
            let dphi = -theta * (1.0 - t).powf(theta - 1.0) / (1.0 - a);
            phi / dphi
        }
    }
}

/// Kendall's tau of the one-parameter copula from `1 + 4 int phi / phi'`.
pub fn tau_by_integral(family: Family, theta: f64) -> f64 {
    let f = |t: f64| {
        if t <= 0.0 || t >= 1.0 {
            0.0
        } else {
            phi_over_dphi(family, theta, t)
        }
    };
    1.0 + 4.0 * simpson(f, 0.0, 1.0, 200_000)
}

/// Sample Kendall's tau by brute-force pair counting.
pub fn tau_brute(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let p = (x[i] - x[j]) * (y[i] - y[j]);
            s += if p > 0.0 {
                1
            } else if p < 0.0 {
                -1
            } else {
                0
            };
        }
    }
    s as f64 / (n * (n - 1) / 2) as f64
}

/// Kolmogorov-Smirnov statistic of a sample against Uniform(0, 1).
pub fn ks_uniform(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &u)| ((i as f64 + 1.0) / n - u).max(u - i as f64 / n))
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.627_61 / (n as f64).sqrt()
}

/// The four-leaf Clayton model with pairs (1,2) and (3,4) under a common
/// root, built under the R2 rule.
pub fn four_leaf_clayton() -> HacTree {
    let c = |t, b| gen(Family::Clayton, t, b);
    HacTree::new(4, vec![(5, [1, 2], c(1.0, 5.0)), (6, [3, 4], c(1.0, 4.5)), (7, [5, 6], c(1.0, 3.0))]).unwrap()
}

/// A six-leaf Clayton model mixing both nesting rules: two
/// one-parameter forks at the top, an R1 step and an R2 chain below.
pub fn six_leaf_clayton() -> HacTree {
    let c = |t, b| gen(Family::Clayton, t, b);
    HacTree::new(
        6,
        vec![
            (7, [1, 2], c(1.0, 3.0)),
            (9, [7, 3], c(1.0, 2.0)),
            (8, [4, 5], c(2.0, 1.2)),
            (10, [8, 6], c(1.0, 1.0)),
            (11, [9, 10], c(0.5, 1.0)),
        ],
    )
    .unwrap()
}
