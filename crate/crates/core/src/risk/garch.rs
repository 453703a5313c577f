//! GARCH(1,1) with standardized Student-t innovations.
//!
//! `R_t = mu + sigma_t Z_t`, `sigma_t^2 = omega + alpha (R_{t-1} - mu)^2 + beta_g sigma_{t-1}^2`,
//! with `Z_t` Student-t with `nu` degrees of freedom scaled to unit variance.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{HopacError, Result};
use crate::optim::{nelder_mead, NmOptions};

/// Shortest series accepted by [`fit_garch`].
pub const MIN_GARCH_LEN: usize = 100;

const PERSISTENCE_MAX: f64 = 0.9999;
const NU_MIN: f64 = 2.05;
const NU_MAX: f64 = 200.0;

/// 95% quantile of the chi-square distribution with 2 degrees of freedom.
/// A GARCH fit must beat constant variance by this likelihood-ratio margin.
pub const LR_CRITICAL: f64 = 5.991464547107979;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub mu: f64,
    pub omega: f64,
    /// Weight of the last squared residual.
    pub alpha: f64,
    /// Weight of the last conditional variance.
    pub beta_g: f64,
    pub nu: f64,
}

impl GarchParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mu.is_finite()
            && self.omega > 0.0
            && self.alpha >= 0.0
            && self.beta_g >= 0.0
            && self.alpha + self.beta_g < 1.0
            && self.nu > 2.0
            && self.omega.is_finite()
            && self.nu.is_finite();
        if ok {
            Ok(())
        } else {
            Err(HopacError::Domain(format!("invalid GARCH parameters {self:?}")))
        }
    }

    /// Stationary variance `omega / (1 - alpha - beta_g)`.
    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.alpha - self.beta_g)
    }

    /// Conditional variances of `returns`, started at their sample variance.
    pub fn variances(&self, returns: &[f64]) -> Vec<f64> {
        let start = sample_variance(returns, self.mu);
        let mut s2 = Vec::with_capacity(returns.len());
        let mut prev = start;
        for t in 0..returns.len() {
            let v = if t == 0 {
                start
            } else {
                let e = returns[t - 1] - self.mu;
                self.omega + self.alpha * e * e + self.beta_g * prev
            };
            s2.push(v);
            prev = v;
        }
        s2
    }

    /// Standardized residuals `(R_t - mu) / sigma_t`.
    pub fn residuals(&self, returns: &[f64]) -> Vec<f64> {
        self.variances(returns).iter().zip(returns).map(|(v, r)| (r - self.mu) / v.sqrt()).collect()
    }

    /// One-step-ahead conditional variance after the last observation.
    pub fn forecast_variance(&self, returns: &[f64]) -> f64 {
        let s2 = self.variances(returns);
        match (returns.last(), s2.last()) {
            (Some(r), Some(v)) => {
                let e = r - self.mu;
                self.omega + self.alpha * e * e + self.beta_g * v
            }
            _ => self.unconditional_variance(),
        }
    }

    /// Log-likelihood of `returns`.
    pub fn log_likelihood(&self, returns: &[f64]) -> f64 {
        log_likelihood(self, returns, &self.variances(returns))
    }
}

fn sample_variance(x: &[f64], mu: f64) -> f64 {
    if x.is_empty() {
        return 1.0;
    }
    x.iter().map(|r| (r - mu) * (r - mu)).sum::<f64>() / x.len() as f64
}

fn log_likelihood(p: &GarchParams, returns: &[f64], s2: &[f64]) -> f64 {
    let nu = p.nu;
    let c = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (std::f64::consts::PI * (nu - 2.0)).ln();
    let mut ll = 0.0;
    for (r, v) in returns.iter().zip(s2) {
        let e = r - p.mu;
        ll += c - 0.5 * v.ln() - 0.5 * (nu + 1.0) * (e * e / ((nu - 2.0) * v)).ln_1p();
    }
    ll
}

/// Quantile of the unit-variance Student-t distribution.
pub fn std_t_quantile(nu: f64, u: f64) -> f64 {
    let t = StudentsT::new(0.0, 1.0, nu).expect("nu > 0");
    t.inverse_cdf(u) * ((nu - 2.0) / nu).sqrt()
}

/// Distribution function of the unit-variance Student-t distribution.
pub fn std_t_cdf(nu: f64, z: f64) -> f64 {
    let t = StudentsT::new(0.0, 1.0, nu).expect("nu > 0");
    t.cdf(z / ((nu - 2.0) / nu).sqrt())
}

/// Result of [`fit_garch`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchFit {
    pub params: GarchParams,
    pub log_likelihood: f64,
    pub converged: bool,
    /// The constant-variance model was used instead, either because the
    /// optimizer failed or because the GARCH terms were not significant.
    pub fallback: bool,
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        z.exp() / (1.0 + z.exp())
    }
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-9, 1.0 - 1e-9);
    (p / (1.0 - p)).ln()
}

// z = (ln omega, logit persistence, logit alpha share, logit nu)
fn decode(z: &[f64], mu: f64) -> GarchParams {
    let pers = PERSISTENCE_MAX * logistic(z[1]);
    let alpha = pers * logistic(z[2]);
    GarchParams {
        mu,
        omega: z[0].exp(),
        alpha,
        beta_g: pers - alpha,
        nu: NU_MIN + (NU_MAX - NU_MIN) * logistic(z[3]),
    }
}

fn encode(p: &GarchParams) -> Vec<f64> {
    let pers = (p.alpha + p.beta_g).clamp(1e-8, PERSISTENCE_MAX * (1.0 - 1e-8));
    vec![
        p.omega.max(1e-300).ln(),
        logit(pers / PERSISTENCE_MAX),
        logit(p.alpha / pers),
        logit((p.nu - NU_MIN) / (NU_MAX - NU_MIN)),
    ]
}

/// Constrained maximum likelihood fit, started from `warm` when given and
/// from a few generic points otherwise. The mean is the sample mean.
pub fn fit_garch(returns: &[f64], warm: Option<&GarchParams>) -> Result<GarchFit> {
    if returns.len() < MIN_GARCH_LEN {
        return Err(HopacError::Data(format!(
            "GARCH fit needs at least {MIN_GARCH_LEN} returns, got {}",
            returns.len()
        )));
    }
    if returns.iter().any(|r| !r.is_finite()) {
        return Err(HopacError::Data("returns contain non-finite values".into()));
    }
    let mu = returns.iter().sum::<f64>() / returns.len() as f64;
    let var = sample_variance(returns, mu);
    if !(var > 0.0) {
        return Err(HopacError::Data("returns are constant".into()));
    }
    let nll = |z: &[f64]| {
        let p = decode(z, mu);
        -log_likelihood(&p, returns, &p.variances(returns))
    };
    // a constant-variance warm point sits at a degenerate corner; start cold
    let warm = warm.filter(|w| w.alpha + w.beta_g > 0.0);
    let starts: Vec<(GarchParams, f64)> = match warm {
        Some(w) => vec![(GarchParams { mu, ..*w }, 0.2)],
        None => [(0.05, 0.05, 0.90, 8.0), (0.2, 0.1, 0.7, 5.0), (0.9, 0.05, 0.05, 20.0)]
            .iter()
            .map(|&(o, a, b, nu)| (GarchParams { mu, omega: o * var, alpha: a, beta_g: b, nu }, 0.5))
            .collect(),
    };
    let opts = NmOptions { max_iter: 2000, ftol: 1e-10 };
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    for (p0, step) in starts {
        let mut r = nelder_mead(nll, &encode(&p0), &[step; 4], opts);
        // one restart guards against a collapsed simplex
        let r2 = nelder_mead(nll, &r.x, &[0.1; 4], opts);
        if r2.f <= r.f {
            r = crate::optim::NmResult { converged: r2.converged, ..r2 };
        }
        if best.as_ref().map_or(true, |b| r.f < b.1) {
            best = Some((r.x, r.f, r.converged));
        }
    }
    let (z, f, converged) = best.unwrap();
    let params = decode(&z, mu);
    // Without ARCH effects beta_g is not identified (the likelihood is flat
    // along omega / (1 - beta_g) = var), so insignificant fits are replaced by
    // the nested constant-variance model.
    let flat = constant_variance_fit(returns, mu, var);
    if !f.is_finite() || params.validate().is_err() || 2.0 * (-f - flat.log_likelihood) < LR_CRITICAL {
        return Ok(flat);
    }
    Ok(GarchFit { params, log_likelihood: -f, converged, fallback: false })
}

fn constant_variance_fit(returns: &[f64], mu: f64, var: f64) -> GarchFit {
    // alpha = beta_g = 0; only nu is free
    let at = |nu: f64| GarchParams { mu, omega: var, alpha: 0.0, beta_g: 0.0, nu };
    let r = nelder_mead(
        |z| -at(NU_MIN + (NU_MAX - NU_MIN) * logistic(z[0])).log_likelihood(returns),
        &[logit((8.0 - NU_MIN) / (NU_MAX - NU_MIN))],
        &[0.5],
        NmOptions { max_iter: 400, ftol: 1e-10 },
    );
    let params = at(NU_MIN + (NU_MAX - NU_MIN) * logistic(r.x[0]));
    GarchFit { params, log_likelihood: -r.f, converged: r.converged, fallback: true }
}

/// Asymptotic standard errors of `(omega, alpha, beta_g, nu)` from the
/// inverse numerical Hessian of the negative log-likelihood. `None` when the
/// Hessian is not positive definite or a parameter sits on a bound.
pub fn standard_errors(params: &GarchParams, returns: &[f64]) -> Option<[f64; 4]> {
    let x0 = [params.omega, params.alpha, params.beta_g, params.nu];
    let f = |x: &[f64; 4]| {
        let p = GarchParams { mu: params.mu, omega: x[0], alpha: x[1], beta_g: x[2], nu: x[3] };
        if p.validate().is_err() {
            return f64::NAN;
        }
        -p.log_likelihood(returns)
    };
    let h: Vec<f64> = x0.iter().map(|x| 1e-4 * x.abs().max(1e-4)).collect();
    let f0 = f(&x0);
    let mut hess = DMatrix::zeros(4, 4);
    for i in 0..4 {
        for j in i..4 {
            let v = if i == j {
                let mut a = x0;
                let mut b = x0;
                a[i] += h[i];
                b[i] -= h[i];
                (f(&a) - 2.0 * f0 + f(&b)) / (h[i] * h[i])
            } else {
                let mut pp = x0;
                let mut pm = x0;
                let mut mp = x0;
                let mut mm = x0;
                pp[i] += h[i];
                pp[j] += h[j];
                pm[i] += h[i];
                pm[j] -= h[j];
                mp[i] -= h[i];
                mp[j] += h[j];
                mm[i] -= h[i];
                mm[j] -= h[j];
                (f(&pp) - f(&pm) - f(&mp) + f(&mm)) / (4.0 * h[i] * h[j])
            };
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    if hess.iter().any(|v: &f64| !v.is_finite()) {
        return None;
    }
    let inv = hess.cholesky()?.inverse();
    let mut se = [0.0; 4];
    for (i, s) in se.iter_mut().enumerate() {
        *s = inv[(i, i)].sqrt();
    }
    Some(se)
}

/// Simulates returns whose innovations are `std_t_quantile(nu, u_t)`,
/// starting from the stationary variance.
pub fn simulate_from_uniforms(params: &GarchParams, u: &[f64]) -> Vec<f64> {
    let mut s2 = params.unconditional_variance();
    let mut out = Vec::with_capacity(u.len());
    for &ut in u {
        let z = std_t_quantile(params.nu, ut);
        let e = s2.sqrt() * z;
        out.push(params.mu + e);
        s2 = params.omega + params.alpha * e * e + params.beta_g * s2;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand::Rng;

    #[test]
    fn std_t_has_unit_variance() {
        // P(Z <= 1) for nu = 4 after scaling: t cdf at sqrt(2)
        let p = std_t_cdf(4.0, 1.0);
        let t = StudentsT::new(0.0, 1.0, 4.0).unwrap();
        assert!((p - t.cdf(2f64.sqrt())).abs() < 1e-12);
        assert!((std_t_cdf(6.0, std_t_quantile(6.0, 0.975)) - 0.975).abs() < 1e-9);
    }

    #[test]
    fn recovers_simulated_parameters() {
        let truth = GarchParams { mu: 0.0, omega: 0.05, alpha: 0.1, beta_g: 0.85, nu: 6.0 };
        let mut rng = RngStream::new(11, 0).rng();
        let u: Vec<f64> = (0..3000).map(|_| rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12)).collect();
        let r = simulate_from_uniforms(&truth, &u);
        let fit = fit_garch(&r, None).unwrap();
        assert!(!fit.fallback);
        assert!((fit.params.alpha - 0.1).abs() < 0.05, "{fit:?}");
        assert!((fit.params.beta_g - 0.85).abs() < 0.07, "{fit:?}");
        assert!(fit.params.validate().is_ok());
        let se = standard_errors(&fit.params, &r).unwrap();
        assert!(se.iter().all(|s| s.is_finite() && *s > 0.0));
    }

    #[test]
    fn rejects_short_series() {
        assert!(fit_garch(&[0.1; 20], None).is_err());
    }
}
