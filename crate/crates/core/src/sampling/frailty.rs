//! Frailty samplers: `V ~ LS^{-1}[psi]` for the base families and the inner
//! frailties of nested generators.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use statrs::function::gamma::ln_gamma;

use super::stable::{open01, scaled_stable, standard_stable, tilted_stable};
use crate::error::{HopacError, Result};
use crate::generator::{Family, Generator};
use crate::tree::{nesting_rule, NestingRule};

/// Above this expected amount of work a sum of Sibuya variates is replaced by
/// its stable limit.
const SIBUYA_SUM_WORK_CAP: f64 = 5e6;

/// Geometric on `{1, 2, ...}` with `P(V = k) = (1 - q) q^(k-1)`.
pub fn geometric<R: Rng + ?Sized>(q: f64, rng: &mut R) -> f64 {
    if q <= 0.0 {
        return 1.0;
    }
    1.0 + (open01(rng).ln() / q.ln()).floor()
}

/// Logarithmic series law `P(V = k) = -p^k / (k log(1 - p))`, parameterized
/// by `log1mp = log(1 - p) < 0` for accuracy near `p = 1`. Kemp's LK
/// algorithm.
pub fn logarithmic<R: Rng + ?Sized>(log1mp: f64, rng: &mut R) -> f64 {
    let p = -log1mp.exp_m1();
    let v: f64 = open01(rng);
    if v >= p {
        return 1.0;
    }
    let u: f64 = open01(rng);
    let q = -(log1mp * u).exp_m1();
    if v > q {
        1.0
    } else if v > q * q {
        2.0
    } else {
        (1.0 + v.ln() / q.ln()).floor()
    }
}

/// `log(1 - F(k))` for the Sibuya(alpha) law: `1 - F(k) = 1 / (k B(k, 1 - alpha))`.
fn sibuya_log_survival(alpha: f64, k: f64) -> f64 {
    ln_gamma(k + 1.0 - alpha) - ln_gamma(k + 1.0) - ln_gamma(1.0 - alpha)
}

/// Sibuya(alpha) by inversion, given a uniform `u`.
fn sibuya_from_uniform(alpha: f64, u: f64) -> f64 {
    if u <= alpha {
        return 1.0;
    }
    let ginv = ((1.0 - u) * ln_gamma(1.0 - alpha).exp()).powf(-1.0 / alpha);
    let fl = ginv.floor();
    if ginv > 1.0 / f64::EPSILON {
        return fl;
    }
    if fl < 1.0 {
        return 1.0;
    }
    // ginv is the inverse of a continuous approximation; correct by one step
    if (1.0 - u).ln() < sibuya_log_survival(alpha, fl) {
        fl + 1.0
    } else {
        fl
    }
}

/// Sibuya law with `P(V = k) = binom(alpha, k) (-1)^(k+1)`, `alpha` in (0, 1].
pub fn sibuya<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    if alpha >= 1.0 {
        return 1.0;
    }
    sibuya_from_uniform(alpha, open01(rng))
}

/// Sibuya conditioned on exceeding `k`.
fn sibuya_tail<R: Rng + ?Sized>(alpha: f64, k: f64, rng: &mut R) -> f64 {
    let s = sibuya_log_survival(alpha, k).exp();
    loop {
        let u = 1.0 - s * open01(rng);
        let v = sibuya_from_uniform(alpha, u);
        if v > k {
            return v;
        }
    }
}

/// Sibuya probability mass at `k`.
fn sibuya_pmf(alpha: f64, k: f64) -> f64 {
    (alpha.ln() + ln_gamma(k - alpha) - ln_gamma(1.0 - alpha) - ln_gamma(k + 1.0)).exp()
}

/// Sum of `v` independent Sibuya(alpha) variates.
///
/// Small counts are summed directly. Larger counts are drawn value by value:
/// binomial counts for the values `1..=K` and direct tail draws above `K`,
/// which is exact. Only when even that would cost more than
/// `SIBUYA_SUM_WORK_CAP` draws is the stable limit `v^(1/alpha) S` used.
pub fn sibuya_sum<R: Rng + ?Sized>(alpha: f64, v: f64, rng: &mut R) -> f64 {
    if alpha >= 1.0 {
        return v;
    }
    if v <= 64.0 {
        return (0..v as u64).map(|_| sibuya(alpha, rng)).sum();
    }
    // K balancing binomial steps against expected tail draws
    let kf = (alpha * v).powf(1.0 / (1.0 + alpha)).clamp(8.0, 1e5).floor();
    let tail_count = v * sibuya_log_survival(alpha, kf).exp();
    if kf + tail_count > SIBUYA_SUM_WORK_CAP {
        return scaled_stable(alpha, v, rng);
    }
    let k = kf as u64;
    let mut remaining = v as u64;
    let mut total = 0.0;
    let mut surv = 1.0;
    for j in 1..=k {
        if remaining == 0 {
            return total;
        }
        let pj = sibuya_pmf(alpha, j as f64);
        let cond = (pj / surv).clamp(0.0, 1.0);
        let cnt = Binomial::new(remaining, cond).map(|b| b.sample(rng)).unwrap_or(remaining);
        total += cnt as f64 * j as f64;
        remaining -= cnt;
        surv = sibuya_log_survival(alpha, j as f64).exp();
    }
    for _ in 0..remaining {
        total += sibuya_tail(alpha, kf, rng);
    }
    total
}

/// `V ~ LS^{-1}[psi_(a, theta)]` for a generator with `beta = 1`.
pub fn sample_frailty<R: Rng + ?Sized>(g: &Generator, rng: &mut R) -> Result<f64> {
    if g.beta() != 1.0 {
        return Err(HopacError::Domain(format!(
            "sample_frailty needs beta = 1, got {}; use sample_op_frailty",
            g.beta()
        )));
    }
    Ok(base_frailty(g.family(), g.theta(), rng))
}

fn base_frailty<R: Rng + ?Sized>(family: Family, theta: f64, rng: &mut R) -> f64 {
    match family {
        Family::AliMikhailHaq => geometric(theta, rng),
        Family::Clayton => Gamma::new(1.0 / theta, 1.0).expect("positive shape").sample(rng),
        Family::Frank => logarithmic(-theta, rng),
        Family::Gumbel => standard_stable(1.0 / theta, rng),
        Family::Joe => sibuya(1.0 / theta, rng),
    }
}

/// `V ~ LS^{-1}[psi_beta]` as `S V0^beta` with `S` stable of index `1/beta`.
pub fn sample_op_frailty<R: Rng + ?Sized>(g: &Generator, rng: &mut R) -> f64 {
    let v = base_frailty(g.family(), g.theta(), rng);
    if g.beta() == 1.0 {
        return v;
    }
    standard_stable(1.0 / g.beta(), rng) * v.powf(g.beta())
}

/// Inner frailty of `child` nested in `parent`, given the parent's frailty.
pub fn sample_inner_frailty<R: Rng + ?Sized>(
    parent: &Generator,
    child: &Generator,
    v_parent: f64,
    rng: &mut R,
) -> Result<f64> {
    match nesting_rule(parent, child) {
        Some(NestingRule::R1) => {
            let v = base_inner(child.family(), parent.theta(), child.theta(), v_parent, rng)?;
            if child.beta() == 1.0 {
                Ok(v)
            } else {
                Ok(standard_stable(1.0 / child.beta(), rng) * v.powf(child.beta()))
            }
        }
        Some(NestingRule::R2) => Ok(scaled_stable(parent.beta() / child.beta(), v_parent, rng)),
        None => Err(HopacError::Sampling(format!(
            "no nesting rule admits {child} below {parent}"
        ))),
    }
}

/// `V ~ LS^{-1}[exp(-v0 psi_1^{-1}(psi_2(t)))]` for one-parameter generators
/// with `theta1 <= theta2`.
fn base_inner<R: Rng + ?Sized>(family: Family, theta1: f64, theta2: f64, v0: f64, rng: &mut R) -> Result<f64> {
    if theta1 == theta2 {
        return Ok(v0);
    }
    match family {
        Family::AliMikhailHaq => {
            // v0 independent Geometric(1 - q) variates
            let q = (theta2 - theta1) / (1.0 - theta1);
            if v0 <= 64.0 {
                return Ok((0..v0 as u64).map(|_| geometric(q, rng)).sum());
            }
            let lambda = Gamma::new(v0, q / (1.0 - q)).expect("positive shape").sample(rng);
            let extra = if lambda > 0.0 { Poisson::new(lambda).map(|p| p.sample(rng)).unwrap_or(lambda) } else { 0.0 };
            Ok(v0 + extra)
        }
        Family::Clayton => Ok(tilted_stable(theta1 / theta2, v0, rng)),
        Family::Frank => Ok(frank_inner(theta1, theta2, v0, rng)),
        Family::Gumbel => Ok(scaled_stable(theta1 / theta2, v0, rng)),
        Family::Joe => Ok(sibuya_sum(theta1 / theta2, v0, rng)),
    }
}

/// Sum of `v0` variates with `P(X = k) = sibuya_alpha(k) c2^k / c1`.
fn frank_inner<R: Rng + ?Sized>(theta1: f64, theta2: f64, v0: f64, rng: &mut R) -> f64 {
    let alpha = theta1 / theta2;
    let c2 = -(-theta2).exp_m1();
    let lga = ln_gamma(1.0 - alpha);
    let one = |rng: &mut R| -> f64 {
        if c2 < theta1 {
            // Sibuya proposal, acceptance c2^(k-1), efficiency c1 / c2
            loop {
                let k = sibuya(alpha, rng);
                if open01(rng).ln() <= (k - 1.0) * c2.ln() {
                    return k;
                }
            }
        } else {
            // logarithmic proposal, acceptance Gamma(k-a)/(Gamma(1-a)Gamma(k)), efficiency c1 / theta1
            loop {
                let k = logarithmic(-theta2, rng);
                let la = ln_gamma(k - alpha) - lga - ln_gamma(k);
                if open01(rng).ln() <= la {
                    return k;
                }
            }
        }
    };
    let mut total = 0.0;
    for _ in 0..v0 as u64 {
        total += one(rng);
    }
    total
}
