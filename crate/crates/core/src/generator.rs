//! Archimedean generator families and their outer-power (OP) transformations.
//!
//! A [`Generator`] is the OP transform `psi_beta(t) = psi(t^(1/beta))` of a
//! one-parameter generator `psi` from one of five families. Everything the
//! rest of the crate needs from a generator lives here: evaluation, the
//! generalized inverse, the first two derivatives (also on log scale, which is
//! what the likelihood uses), Kendall's tau and the tail dependence
//! coefficients.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{HopacError, Result};
use crate::quadrature;

/// Distance kept from open parameter-range endpoints (A at 1, C and F at 0).
pub const THETA_GUARD: f64 = 1e-10;

const LN2: f64 = std::f64::consts::LN_2;

/// One-parameter Archimedean families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    /// Ali-Mikhail-Haq, theta in [0, 1).
    #[serde(rename = "A")]
    AliMikhailHaq,
    /// Clayton, theta in (0, inf).
    #[serde(rename = "C")]
    Clayton,
    /// Frank, theta in (0, inf).
    #[serde(rename = "F")]
    Frank,
    /// Gumbel, theta in [1, inf).
    #[serde(rename = "G")]
    Gumbel,
    /// Joe, theta in [1, inf).
    #[serde(rename = "J")]
    Joe,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::AliMikhailHaq,
        Family::Clayton,
        Family::Frank,
        Family::Gumbel,
        Family::Joe,
    ];

    /// Families for which the OP parameter is not redundant.
    pub const OP: [Family; 4] = [Family::AliMikhailHaq, Family::Clayton, Family::Frank, Family::Joe];

    pub fn label(self) -> &'static str {
        match self {
            Family::AliMikhailHaq => "A",
            Family::Clayton => "C",
            Family::Frank => "F",
            Family::Gumbel => "G",
            Family::Joe => "J",
        }
    }

    /// Closed parameter interval used in numerical work. Open endpoints of the
    /// theoretical range are pulled inside by [`THETA_GUARD`]; upper endpoints
    /// at infinity stay infinite.
    pub fn theta_bounds(self) -> (f64, f64) {
        match self {
            Family::AliMikhailHaq => (0.0, 1.0 - THETA_GUARD),
            Family::Clayton | Family::Frank => (THETA_GUARD, f64::INFINITY),
            Family::Gumbel | Family::Joe => (1.0, f64::INFINITY),
        }
    }

    /// Membership in the theoretical parameter range.
    pub fn contains(self, theta: f64) -> bool {
        if !theta.is_finite() {
            return false;
        }
        match self {
            Family::AliMikhailHaq => (0.0..1.0).contains(&theta),
            Family::Clayton | Family::Frank => theta > 0.0,
            Family::Gumbel | Family::Joe => theta >= 1.0,
        }
    }

    /// Kendall's tau of the one-parameter copula.
    pub fn base_tau(self, theta: f64) -> f64 {
        match self {
            Family::AliMikhailHaq => amh_tau(theta),
            Family::Clayton => theta / (theta + 2.0),
            Family::Frank => frank_tau(theta),
            Family::Gumbel => 1.0 - 1.0 / theta,
            Family::Joe => joe_tau(theta),
        }
    }

    /// Supremum of the base tau over the parameter range.
    pub fn base_tau_sup(self) -> f64 {
        match self {
            Family::AliMikhailHaq => 1.0 / 3.0,
            _ => 1.0,
        }
    }

    fn psi(self, theta: f64, t: f64) -> f64 {
        match self {
            Family::AliMikhailHaq => (1.0 - theta) / (t.exp_m1() + 1.0 - theta),
            Family::Clayton => (-t.ln_1p() / theta).exp(),
            Family::Frank => {
                let c = -(-theta).exp_m1();
                -(-c * (-t).exp()).ln_1p() / theta
            }
            Family::Gumbel => (-t.powf(1.0 / theta)).exp(),
            Family::Joe => -(ln_one_minus_exp_neg(t) / theta).exp_m1(),
        }
    }

    fn psi_inv(self, theta: f64, s: f64) -> f64 {
        if s <= 0.0 {
            return f64::INFINITY;
        }
        if s >= 1.0 {
            return 0.0;
        }
        match self {
            Family::AliMikhailHaq => ((1.0 - theta) * (1.0 - s) / s).ln_1p(),
            Family::Clayton => (-theta * s.ln()).exp_m1(),
            Family::Frank => -((-theta * s).exp_m1() / (-theta).exp_m1()).ln(),
            Family::Gumbel => (-s.ln()).powf(theta),
            Family::Joe => {
                // -log(1 - (1-s)^theta)
                let p = theta * (-s).ln_1p();
                -ln_one_minus_exp(p)
            }
        }
    }

    /// log(-psi'(t)) of the one-parameter generator.
    fn log_neg_d1(self, theta: f64, t: f64) -> f64 {
        match self {
            Family::AliMikhailHaq => {
                (1.0 - theta).ln() - t - 2.0 * (-theta * (-t).exp()).ln_1p()
            }
            Family::Clayton => -theta.ln() - (1.0 / theta + 1.0) * t.ln_1p(),
            Family::Frank => {
                let c = -(-theta).exp_m1();
                let g = c * (-t).exp();
                c.ln() - t - theta.ln() - (-g).ln_1p()
            }
            Family::Gumbel => {
                let a = 1.0 / theta;
                a.ln() + (a - 1.0) * t.ln() - t.powf(a)
            }
            Family::Joe => {
                let lw = ln_one_minus_exp_neg(t);
                -theta.ln() + (1.0 / theta - 1.0) * lw - t
            }
        }
    }

    /// log(psi''(t)) of the one-parameter generator.
    fn log_d2(self, theta: f64, t: f64) -> f64 {
        match self {
            Family::AliMikhailHaq => {
                let e = (-t).exp();
                (1.0 - theta).ln() - t + (theta * e).ln_1p() - 3.0 * (-theta * e).ln_1p()
            }
            Family::Clayton => {
                let a = 1.0 / theta;
                a.ln() + (a + 1.0).ln() - (a + 2.0) * t.ln_1p()
            }
            Family::Frank => {
                let c = -(-theta).exp_m1();
                let g = c * (-t).exp();
                c.ln() - t - theta.ln() - 2.0 * (-g).ln_1p()
            }
            Family::Gumbel => {
                let a = 1.0 / theta;
                let ta = t.powf(a);
                a.ln() + (a - 2.0) * t.ln() - ta + (a * ta + 1.0 - a).ln()
            }
            Family::Joe => {
                let lw = ln_one_minus_exp_neg(t);
                let w = -(-t).exp_m1();
                -theta.ln() + (1.0 / theta - 2.0) * lw - t + (((theta - 1.0) + w) / theta).ln()
            }
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Family {
    type Err = HopacError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" | "AMH" | "ALI-MIKHAIL-HAQ" => Ok(Family::AliMikhailHaq),
            "C" | "CLAYTON" => Ok(Family::Clayton),
            "F" | "FRANK" => Ok(Family::Frank),
            "G" | "GUMBEL" => Ok(Family::Gumbel),
            "J" | "JOE" => Ok(Family::Joe),
            other => Err(HopacError::Domain(format!("unknown family '{other}'"))),
        }
    }
}

/// log(1 - e^{-t}) for t > 0.
fn ln_one_minus_exp_neg(t: f64) -> f64 {
    if t > LN2 {
        (-(-t).exp()).ln_1p()
    } else {
        (-(-t).exp_m1()).ln()
    }
}

/// log(1 - e^{p}) for p < 0.
fn ln_one_minus_exp(p: f64) -> f64 {
    if p > -LN2 {
        (-p.exp_m1()).ln()
    } else {
        (-p.exp()).ln_1p()
    }
}

fn amh_tau(theta: f64) -> f64 {
    if theta < 0.5 {
        // tau = 4/3 * sum_k theta^k / (k (k+1) (k+2))
        let mut sum = 0.0;
        let mut p = 1.0;
        for k in 1..200 {
            p *= theta;
            let kf = k as f64;
            let term = p / (kf * (kf + 1.0) * (kf + 2.0));
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        4.0 / 3.0 * sum
    } else {
        let om = 1.0 - theta;
        1.0 - 2.0 * (theta + om * om * (-theta).ln_1p()) / (3.0 * theta * theta)
    }
}

/// Debye function of order one, D_1(x) = (1/x) int_0^x t/(e^t - 1) dt.
pub(crate) fn debye1(x: f64) -> f64 {
    if x < 1e-2 {
        let x2 = x * x;
        return 1.0 - x / 4.0 + x2 / 36.0 - x2 * x2 / 3600.0 + x2 * x2 * x2 / 211_680.0;
    }
    let integrand = |t: f64| if t == 0.0 { 1.0 } else { t / t.exp_m1() };
    quadrature::integrate(integrand, 0.0, x, 1e-15, 1e-14) / x
}

fn frank_tau(theta: f64) -> f64 {
    if theta < 1e-2 {
        let t2 = theta * theta;
        return theta / 9.0 - theta * t2 / 900.0 + theta * t2 * t2 / 52_920.0;
    }
    1.0 - 4.0 / theta * (1.0 - debye1(theta))
}

/// Joe tau through the Genest–MacKay integral tau = 1 + 4 int_0^1 phi/phi',
/// written in x = 1 - s.
fn joe_tau(theta: f64) -> f64 {
    if theta == 1.0 {
        return 0.0;
    }
    let integrand = move |x: f64| {
        if x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        let lx = x.ln();
        let em = -(theta * lx).exp_m1(); // 1 - x^theta
        let y = (theta * lx).exp(); // x^theta
        if y < 0.5 {
            let r = if y == 0.0 { -1.0 } else { (-y).ln_1p() / y };
            em * x * r / theta
        } else {
            em * em.ln() * x / (theta * y)
        }
    };
    1.0 + 4.0 * quadrature::integrate(integrand, 0.0, 1.0, 1e-13, 1e-13)
}

/// A parametric OP-transformed Archimedean generator `psi_(a, theta, beta)`.
///
/// Gumbel generators are normalized on construction to `(theta * beta, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Generator {
    family: Family,
    theta: f64,
    beta: f64,
}

#[derive(Deserialize)]
struct RawGenerator {
    family: Family,
    theta: f64,
    #[serde(default = "one")]
    beta: f64,
}

fn one() -> f64 {
    1.0
}

impl<'de> Deserialize<'de> for Generator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawGenerator::deserialize(d)?;
        Generator::new(raw.family, raw.theta, raw.beta).map_err(serde::de::Error::custom)
    }
}

/// Lower and upper tail dependence coefficients of a bivariate copula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailCoefficients {
    pub lambda_l: f64,
    pub lambda_u: f64,
}

impl Generator {
    pub fn new(family: Family, theta: f64, beta: f64) -> Result<Self> {
        if !family.contains(theta) {
            return Err(HopacError::Domain(format!(
                "theta = {theta} outside the parameter range of family {family}"
            )));
        }
        if !(beta.is_finite() && beta >= 1.0) {
            return Err(HopacError::Domain(format!("beta = {beta} must lie in [1, inf)")));
        }
        if family == Family::Gumbel {
            return Ok(Generator { family, theta: theta * beta, beta: 1.0 });
        }
        Ok(Generator { family, theta, beta })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// The generator with the same family and theta but beta = 1.
    pub fn base(&self) -> Generator {
        Generator { beta: 1.0, ..*self }
    }

    pub fn psi(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(HopacError::Domain(format!("psi evaluated at t = {t} < 0")));
        }
        Ok(self.psi_unchecked(t))
    }

    /// `psi` without the domain check; `t` must be nonnegative.
    #[inline]
    pub fn psi_unchecked(&self, t: f64) -> f64 {
        if t == f64::INFINITY {
            return 0.0;
        }
        let x = if self.beta == 1.0 { t } else { t.powf(1.0 / self.beta) };
        self.family.psi(self.theta, x)
    }

    pub fn psi_inverse(&self, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(HopacError::Domain(format!("psi_inverse evaluated at s = {s} outside [0, 1]")));
        }
        Ok(self.psi_inverse_unchecked(s))
    }

    #[inline]
    pub fn psi_inverse_unchecked(&self, s: f64) -> f64 {
        let x = self.family.psi_inv(self.theta, s);
        if self.beta == 1.0 {
            x
        } else {
            x.powf(self.beta)
        }
    }

    fn check_derivative_arg(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) || (t == 0.0 && self.beta > 1.0) {
            return Err(HopacError::Domain(format!(
                "generator derivative at t = {t} (beta = {})",
                self.beta
            )));
        }
        Ok(())
    }

    /// log(-psi_beta'(t)) for t > 0.
    #[inline]
    pub fn log_neg_d1(&self, t: f64) -> f64 {
        if self.beta == 1.0 {
            return self.family.log_neg_d1(self.theta, t);
        }
        let ib = 1.0 / self.beta;
        let lt = t.ln();
        let x = (ib * lt).exp();
        self.family.log_neg_d1(self.theta, x) - self.beta.ln() + (ib - 1.0) * lt
    }

    /// log(psi_beta''(t)) for t > 0.
    #[inline]
    pub fn log_d2(&self, t: f64) -> f64 {
        if self.beta == 1.0 {
            return self.family.log_d2(self.theta, t);
        }
        // psi_b'' = (1/b) t^{1/b-2} [psi''(x) x / b + (-psi'(x)) (1 - 1/b)],  x = t^{1/b}
        let ib = 1.0 / self.beta;
        let lt = t.ln();
        let lx = ib * lt;
        let x = lx.exp();
        let a = self.family.log_d2(self.theta, x) + lx - self.beta.ln();
        let b = self.family.log_neg_d1(self.theta, x) + (1.0 - ib).ln();
        let m = a.max(b);
        let lse = if m == f64::NEG_INFINITY { m } else { m + ((a - m).exp() + (b - m).exp()).ln() };
        -self.beta.ln() + (ib - 2.0) * lt + lse
    }

    /// First derivative of the OP generator.
    pub fn psi_d1(&self, t: f64) -> Result<f64> {
        self.check_derivative_arg(t)?;
        let v = -self.log_neg_d1(t).exp();
        if !v.is_finite() {
            return Err(HopacError::Domain(format!("psi' is singular at t = {t}")));
        }
        Ok(v)
    }

    /// Second derivative of the OP generator.
    pub fn psi_d2(&self, t: f64) -> Result<f64> {
        self.check_derivative_arg(t)?;
        let v = self.log_d2(t).exp();
        if !v.is_finite() {
            return Err(HopacError::Domain(format!("psi'' is singular at t = {t}")));
        }
        Ok(v)
    }

    /// Kendall's tau of the bivariate copula, `1 - (1 - tau_a(theta)) / beta`.
    pub fn kendall_tau(&self) -> f64 {
        1.0 - (1.0 - self.family.base_tau(self.theta)) / self.beta
    }

    pub fn tail_coefficients(&self) -> TailCoefficients {
        let tb = self.theta * self.beta;
        let lambda_l = match self.family {
            Family::Clayton => 2f64.powf(-1.0 / tb),
            _ => 0.0,
        };
        let lambda_u = match self.family {
            Family::AliMikhailHaq | Family::Clayton | Family::Frank => 2.0 - 2f64.powf(1.0 / self.beta),
            Family::Gumbel | Family::Joe => 2.0 - 2f64.powf(1.0 / tb),
        };
        TailCoefficients { lambda_l, lambda_u }
    }

    /// Archimedean copula `psi(sum_j psi^{-1}(u_j))`.
    pub fn copula_cdf(&self, u: &[f64]) -> f64 {
        if u.iter().any(|&x| x <= 0.0) {
            return 0.0;
        }
        let s: f64 = u.iter().map(|&x| self.psi_inverse_unchecked(x.min(1.0))).sum();
        self.psi_unchecked(s)
    }

    /// Log-density of the bivariate copula at `(u, v)`, both in (0, 1).
    #[inline]
    pub fn log_density2(&self, u: f64, v: f64) -> f64 {
        let x = self.psi_inverse_unchecked(u);
        let y = self.psi_inverse_unchecked(v);
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        // Summing in sorted order keeps the value exactly symmetric in (u, v).
        self.log_d2(lo + hi) - (self.log_neg_d1(lo) + self.log_neg_d1(hi))
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "psi({}, {}, {})", self.family, self.theta, self.beta)
    }
}

/// The theta for which `(family, theta, beta)` has Kendall's tau `tau`.
pub fn kendall_tau_inverse(family: Family, tau: f64, beta: f64) -> Result<f64> {
    if !(beta.is_finite() && beta >= 1.0) {
        return Err(HopacError::Domain(format!("beta = {beta} must lie in [1, inf)")));
    }
    if !(tau.is_finite() && tau < 1.0) {
        return Err(HopacError::Infeasible(format!("tau = {tau} is not attainable")));
    }
    let target = 1.0 - beta * (1.0 - tau);
    let infeasible = || {
        HopacError::Infeasible(format!("tau = {tau} not attainable by family {family} at beta = {beta}"))
    };
    match family {
        Family::Clayton => {
            if target <= 0.0 {
                return Err(infeasible());
            }
            Ok(2.0 * target / (1.0 - target))
        }
        Family::Gumbel => {
            if target < 0.0 {
                return Err(infeasible());
            }
            Ok(1.0 / (beta * (1.0 - tau)))
        }
        Family::AliMikhailHaq | Family::Frank | Family::Joe => {
            let (lo, hi_bound) = family.theta_bounds();
            let tau_lo = family.base_tau(lo);
            if target <= tau_lo + 1e-15 {
                if family == Family::Frank && target > 0.0 && target < tau_lo {
                    // below the guard; tau is linear there
                    return Ok(9.0 * target);
                }
                if target >= tau_lo - 1e-15 {
                    return Ok(lo);
                }
                return Err(infeasible());
            }
            let mut hi = if hi_bound.is_finite() { hi_bound } else { lo.max(1.0) * 2.0 };
            if hi_bound.is_finite() {
                if family.base_tau(hi) < target {
                    return Err(infeasible());
                }
            } else {
                let mut guard = 0;
                while family.base_tau(hi) < target {
                    hi *= 2.0;
                    guard += 1;
                    if guard > 60 {
                        return Err(infeasible());
                    }
                }
            }
            let mut a = lo;
            let mut b = hi;
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if family.base_tau(mid) < target {
                    a = mid;
                } else {
                    b = mid;
                }
                if b - a <= 1e-12 * b.max(1.0) {
                    break;
                }
            }
            Ok(0.5 * (a + b))
        }
    }
}

/// Finds `(theta, beta)` with prescribed Kendall's tau and upper tail
/// coefficient. Returns `Ok(None)` when the pair is not attainable.
pub fn solve_tau_lambda_u(family: Family, tau: f64, lambda_u: f64) -> Result<Option<(f64, f64)>> {
    if family == Family::Gumbel {
        return Err(HopacError::Domain(
            "the OP parameter of the Gumbel family is redundant; use theta alone".into(),
        ));
    }
    if !(0.0..1.0).contains(&tau) || !(0.0..1.0).contains(&lambda_u) {
        return Err(HopacError::Domain(format!(
            "tau = {tau} and lambda_u = {lambda_u} must lie in [0, 1)"
        )));
    }
    // 2 - 2^{1/p} = lambda_u  <=>  p = ln 2 / ln(2 - lambda_u)
    let p = LN2 / (2.0 - lambda_u).ln();
    match family {
        Family::AliMikhailHaq | Family::Clayton | Family::Frank => {
            let beta = p;
            match kendall_tau_inverse(family, tau, beta) {
                Ok(theta) => Ok(Some((theta, beta))),
                Err(HopacError::Infeasible(_)) => Ok(None),
                Err(e) => Err(e),
            }
        }
        Family::Joe => {
            // theta * beta = p with beta >= 1, so theta in [1, p]
            if p < 1.0 {
                return Ok(None);
            }
            let f = |theta: f64| 1.0 - theta * (1.0 - joe_tau(theta)) / p - tau;
            if (p - 1.0).abs() < 1e-15 {
                return Ok(if tau.abs() < 1e-12 { Some((1.0, 1.0)) } else { None });
            }
            let grid = 400;
            let mut prev_t = 1.0;
            let mut prev_f = f(prev_t);
            if prev_f.abs() < 1e-14 {
                return Ok(Some((1.0, p)));
            }
            for i in 1..=grid {
                let t = 1.0 + (p - 1.0) * i as f64 / grid as f64;
                let ft = f(t);
                if ft == 0.0 || ft.signum() != prev_f.signum() {
                    let (mut a, mut b, fa) = (prev_t, t, prev_f);
                    for _ in 0..200 {
                        let mid = 0.5 * (a + b);
                        let fm = f(mid);
                        if fm.signum() == fa.signum() && fm != 0.0 {
                            a = mid;
                        } else {
                            b = mid;
                        }
                        if b - a < 1e-14 * b {
                            break;
                        }
                    }
                    let theta = 0.5 * (a + b);
                    return Ok(Some((theta, p / theta)));
                }
                prev_t = t;
                prev_f = ft;
            }
            Ok(None)
        }
        Family::Gumbel => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(f: Family, theta: f64, beta: f64) -> Generator {
        Generator::new(f, theta, beta).unwrap()
    }

    #[test]
    fn clayton_values() {
        let c = g(Family::Clayton, 1.0, 1.0);
        assert!((c.psi(1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((c.psi_inverse(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((c.psi_d1(1.0).unwrap() + 0.25).abs() < 1e-15);
    }

    #[test]
    fn psi_at_zero_is_one() {
        for f in Family::ALL {
            let theta = f.theta_bounds().0 + 0.5;
            let gen = g(f, theta, 2.5);
            assert_eq!(gen.psi(0.0).unwrap(), 1.0);
            assert_eq!(gen.psi_inverse(1.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn domain_errors() {
        let c = g(Family::Clayton, 1.0, 2.0);
        assert!(c.psi(-1.0).is_err());
        assert!(c.psi_inverse(1.5).is_err());
        assert!(c.psi_inverse(-0.1).is_err());
        assert!(c.psi_d1(0.0).is_err());
        assert!(c.psi_d2(-1.0).is_err());
        assert!(g(Family::Clayton, 1.0, 1.0).psi_d1(0.0).is_ok());
        assert!(Generator::new(Family::AliMikhailHaq, 1.0, 1.0).is_err());
        assert!(Generator::new(Family::Clayton, 0.0, 1.0).is_err());
        assert!(Generator::new(Family::Joe, 0.9, 1.0).is_err());
        assert!(Generator::new(Family::Clayton, 1.0, 0.9).is_err());
    }

    #[test]
    fn gumbel_is_normalized() {
        let a = g(Family::Gumbel, 2.0, 3.0);
        let b = g(Family::Gumbel, 6.0, 1.0);
        assert_eq!(a, b);
        assert_eq!(a.beta(), 1.0);
        for t in [0.1, 1.0, 3.0] {
            assert_eq!(a.psi(t).unwrap(), b.psi(t).unwrap());
            assert_eq!(a.psi_d1(t).unwrap(), b.psi_d1(t).unwrap());
        }
    }

    #[test]
    fn tau_examples() {
        assert!((g(Family::Clayton, 2.0, 1.0).kendall_tau() - 0.5).abs() < 1e-15);
        assert!((g(Family::Clayton, 2.0, 2.0).kendall_tau() - 0.75).abs() < 1e-15);
        assert!(g(Family::AliMikhailHaq, 0.999, 1.0).kendall_tau() < 1.0 / 3.0);
    }

    #[test]
    fn amh_series_matches_closed_form() {
        for theta in [0.3f64, 0.45, 0.49] {
            let om = 1.0 - theta;
            let closed = 1.0 - 2.0 * (theta + om * om * (1.0 - theta).ln()) / (3.0 * theta * theta);
            assert!((amh_tau(theta) - closed).abs() < 1e-12);
        }
        assert_eq!(amh_tau(0.0), 0.0);
    }

    #[test]
    fn frank_series_continuity() {
        let below = frank_tau(0.009_999_999);
        let above = frank_tau(0.010_000_001);
        assert!((below - above).abs() < 1e-9);
    }

    #[test]
    fn tau_inverse_examples() {
        assert!((kendall_tau_inverse(Family::Clayton, 0.5, 1.0).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(
            kendall_tau_inverse(Family::AliMikhailHaq, 0.5, 1.0),
            Err(HopacError::Infeasible(_))
        ));
        assert_eq!(kendall_tau_inverse(Family::Joe, 0.0, 1.0).unwrap(), 1.0);
        assert_eq!(kendall_tau_inverse(Family::AliMikhailHaq, 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn tail_examples() {
        let t = g(Family::Clayton, 1.0, 1.0).tail_coefficients();
        assert!((t.lambda_l - 0.5).abs() < 1e-15 && t.lambda_u.abs() < 1e-15);
        let t = g(Family::Joe, 2.0, 1.0).tail_coefficients();
        assert!((t.lambda_u - (2.0 - 2f64.sqrt())).abs() < 1e-15);
        let t = g(Family::AliMikhailHaq, 0.5, 1.0).tail_coefficients();
        assert_eq!((t.lambda_l, t.lambda_u), (0.0, 0.0));
    }

    #[test]
    fn solve_examples() {
        let (theta, beta) = solve_tau_lambda_u(Family::Clayton, 0.3, 0.3).unwrap().unwrap();
        assert!((beta - LN2 / 1.7f64.ln()).abs() < 1e-12);
        assert!((theta - 0.187_23).abs() < 1e-4);
        let (theta, beta) = solve_tau_lambda_u(Family::AliMikhailHaq, 0.0, 0.0).unwrap().unwrap();
        assert_eq!((theta, beta), (0.0, 1.0));
        assert!(solve_tau_lambda_u(Family::Joe, 0.5, 0.01).unwrap().is_none());
        assert!(solve_tau_lambda_u(Family::Gumbel, 0.5, 0.3).is_err());
    }

    #[test]
    fn solve_joe_hits_targets() {
        let (theta, beta) = solve_tau_lambda_u(Family::Joe, 0.3, 0.5).unwrap().unwrap();
        let gen = g(Family::Joe, theta, beta);
        assert!((gen.kendall_tau() - 0.3).abs() < 1e-6);
        assert!((gen.tail_coefficients().lambda_u - 0.5).abs() < 1e-6);
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let gen = g(Family::Clayton, 1.0, 2.0);
        let s = serde_json::to_string(&gen).unwrap();
        assert_eq!(s, r#"{"family":"C","theta":1.0,"beta":2.0}"#);
        let back: Generator = serde_json::from_str(&s).unwrap();
        assert_eq!(back, gen);
        assert!(serde_json::from_str::<Generator>(r#"{"family":"C","theta":-1.0,"beta":2.0}"#).is_err());
    }

    #[test]
    fn family_parsing() {
        assert_eq!("c".parse::<Family>().unwrap(), Family::Clayton);
        assert_eq!("Joe".parse::<Family>().unwrap(), Family::Joe);
        assert!("X".parse::<Family>().is_err());
    }
}
