//! One-sided stable variates.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{HopacError, Result};

/// Draw with Laplace transform `exp(-t^alpha)`, `alpha` in (0, 1].
///
/// Kanter's representation of the Chambers–Mallows–Stuck sampler at
/// skewness one, evaluated on the log scale.
pub fn standard_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    if alpha >= 1.0 {
        return 1.0;
    }
    let u = PI * open01(rng);
    let w = -open01(rng).ln();
    let ia = 1.0 / alpha;
    let ln_s = (alpha * u).sin().ln() - ia * u.sin().ln()
        + (ia - 1.0) * (((1.0 - alpha) * u).sin().ln() - w.ln());
    ln_s.exp()
}

/// Draw with Laplace transform `exp(-scale * t^alpha)`.
pub fn scaled_stable<R: Rng + ?Sized>(alpha: f64, scale: f64, rng: &mut R) -> f64 {
    if alpha >= 1.0 {
        return scale;
    }
    scale.powf(1.0 / alpha) * standard_stable(alpha, rng)
}

/// One-sided stable variate `S(alpha, 1, gamma, 1{alpha = 1}; 1)`.
///
/// For `alpha < 1` the result has Laplace transform
/// `exp(-gamma^alpha / cos(pi alpha / 2) * t^alpha)`, so
/// `gamma = cos(pi alpha / 2)^(1/alpha)` gives `exp(-t^alpha)`. At
/// `alpha = 1` the law degenerates to the point 1.
pub fn sample_positive_stable<R: Rng + ?Sized>(alpha: f64, gamma: f64, rng: &mut R) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(HopacError::Domain(format!("stable index {alpha} outside (0, 1]")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(HopacError::Domain(format!("stable scale {gamma} must be positive")));
    }
    if alpha == 1.0 {
        return Ok(1.0);
    }
    let gamma0 = (PI * alpha / 2.0).cos().powf(1.0 / alpha);
    Ok(gamma / gamma0 * standard_stable(alpha, rng))
}

/// Draw with Laplace transform `exp(-v ((1 + t)^alpha - 1))`: an
/// exponentially tilted stable law.
///
/// Devroye's double rejection on Zolotarev's representation
/// `S = (A(U) / E)^((1 - alpha) / alpha)`. First `U` is drawn from the mass of
/// the second stage's envelope, then `X = E / A(U)` from a log-concave
/// density under a normal, uniform and exponential envelope. The expected
/// number of trials is bounded uniformly in `v`, unlike naive rejection whose
/// cost grows like `exp(v)`.
pub fn tilted_stable<R: Rng + ?Sized>(alpha: f64, v: f64, rng: &mut R) -> f64 {
    if alpha >= 1.0 {
        return v;
    }
    if v <= 0.0 {
        return 0.0;
    }
    let ia = 1.0 - alpha;
    let b = ia / alpha;
    let c1 = (PI / 2.0).sqrt();
    // v is lambda^alpha for the tilt lambda
    let gamma = v * alpha * ia;
    let sg = gamma.sqrt();
    let c3 = (2.0 + c1) * sg;
    let xi = (1.0 + SQRT_2 * c3) / PI;
    let psi = c3 * (-gamma * PI * PI / 8.0).exp() / PI.sqrt();
    let w1 = c1 * xi / sg;
    let w2 = 2.0 * PI.sqrt() * psi;
    let w3 = xi * PI;
    let ln_a0 = alpha * alpha.ln() + ia * ia.ln();
    loop {
        let (ln_a, z) = loop {
            let pick = open01(rng);
            let u = if gamma >= 1.0 {
                if pick < w1 / (w1 + w2) {
                    rng.sample::<f64, _>(StandardNormal).abs() / sg
                } else {
                    let w = open01(rng);
                    PI * (1.0 - w * w)
                }
            } else {
                let w = open01(rng);
                if pick < w3 / (w3 + w2) {
                    PI * w
                } else {
                    PI * (1.0 - w * w)
                }
            };
            if !(u > 0.0 && u < PI) {
                continue;
            }
            // ln of sin(alpha u)^alpha sin((1 - alpha) u)^(1 - alpha) / sin(u)
            let ln_a = alpha * (alpha * u).sin().ln() + ia * (ia * u).sin().ln() - u.sin().ln();
            let inv_zeta2 = (ln_a - ln_a0).exp();
            let zeta = inv_zeta2.recip().sqrt();
            let z = 1.0 / -(-(alpha * zeta / sg).ln_1p() / alpha).exp_m1();
            let mut d = psi / (PI - u).sqrt();
            d += if gamma >= 1.0 { xi * (-gamma * u * u / 2.0).exp() } else { xi };
            let mass = (-v * (inv_zeta2 - 1.0)).exp() * ((1.0 + c1) * sg / zeta + z);
            if open01(rng) * PI * d <= mass {
                break (ln_a, z);
            }
        };
        // X given U has log-density -a x - lambda x^(-b) with mode m
        let a = (ln_a / ia).exp();
        let m = (alpha * (b / a).ln() + v.ln()).exp();
        let delta = (m * alpha / a).sqrt();
        let a1 = delta * c1;
        let a3 = z / a;
        let s = a1 + delta + a3;
        let pick = open01(rng) * s;
        let (x, bound) = if pick < a1 {
            let n: f64 = rng.sample(StandardNormal);
            (m - delta * n.abs(), n * n / 2.0)
        } else if pick < a1 + delta {
            (m + delta * open01(rng), 0.0)
        } else {
            let e = -open01(rng).ln();
            (m + delta + e * a3, e)
        };
        if x <= 0.0 {
            continue;
        }
        // -(log-density(x) - log-density(m)); lambda m^(-b) = a m / b
        let c = a * (x - m) + a * m * (b * (m / x).ln()).exp_m1() / b - bound;
        if c <= -open01(rng).ln() {
            return (v.ln() / alpha - b * x.ln()).exp();
        }
    }
}

/// Uniform on the open interval (0, 1).
#[inline]
pub(crate) fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn laplace_transform_half() {
        let mut rng = RngStream::new(1, 0).rng();
        let gamma = (PI / 4.0).cos().powi(2);
        let draws: Vec<f64> = (0..100_000).map(|_| sample_positive_stable(0.5, gamma, &mut rng).unwrap()).collect();
        for t in [0.5f64, 1.0, 2.0] {
            let mc = draws.iter().map(|s| (-s * t).exp()).sum::<f64>() / draws.len() as f64;
            assert!((mc - (-t.sqrt()).exp()).abs() < 0.01, "t = {t}: {mc}");
        }
    }

    #[test]
    fn tilted_stable_matches_its_laplace_transform() {
        let mut rng = RngStream::new(2, 0).rng();
        let n = 20_000;
        for alpha in [0.05, 0.3, 0.7, 0.999] {
            for v in [0.01, 0.5, 3.0, 50.0, 1e4, 1e10] {
                let draws: Vec<f64> = (0..n).map(|_| tilted_stable(alpha, v, &mut rng)).collect();
                // t putting the transform at exp(-1)
                let t = ((1.0 / v).ln_1p() / alpha).exp_m1();
                let mc = draws.iter().map(|s| (-s * t).exp()).sum::<f64>() / n as f64;
                assert!((mc - (-1f64).exp()).abs() < 0.015, "alpha {alpha}, v {v}: {mc}");
                let mean = draws.iter().sum::<f64>() / n as f64;
                let se = (v * alpha * (1.0 - alpha) / n as f64).sqrt();
                assert!((mean - v * alpha).abs() < 4.0 * se, "alpha {alpha}, v {v}: mean {mean} vs {}", v * alpha);
            }
        }
        assert_eq!(tilted_stable(1.0, 2.5, &mut rng), 2.5);
    }

    #[test]
    fn degenerate_and_domain() {
        let mut rng = RngStream::new(1, 0).rng();
        assert_eq!(sample_positive_stable(1.0, 1.0, &mut rng).unwrap(), 1.0);
        assert!(sample_positive_stable(1.5, 1.0, &mut rng).is_err());
        assert!(sample_positive_stable(0.0, 1.0, &mut rng).is_err());
    }
}
