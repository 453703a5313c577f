//! Bivariate OPAC fitting by maximum likelihood or the S_n distance, and the
//! mean-aggregated fit over several pairs.

use serde::{Deserialize, Serialize};

use super::pseudo::kendall_tau_b;
use super::structure::sorted_sum;
use crate::data::SampleMatrix;
use crate::error::{HopacError, Result};
use crate::generator::{kendall_tau_inverse, Family, Generator};
use crate::optim::{nelder_mead, Interval, Logistic, NmOptions};

/// Pseudo-observations are kept this far from 0 and 1 in the likelihood.
pub const U_CLAMP: f64 = 1e-12;

/// Largest beta the optimizer explores.
pub const BETA_CAP: f64 = 100.0;

/// Largest theta the optimizer explores for families with unbounded range.
pub fn theta_cap(family: Family) -> f64 {
    match family {
        Family::AliMikhailHaq => 1.0,
        Family::Clayton | Family::Gumbel | Family::Joe => 200.0,
        Family::Frank => 500.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Maximum likelihood.
    Ml,
    /// Least squares distance to the empirical copula.
    Sn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFit {
    pub theta: f64,
    pub beta: f64,
    /// Log-likelihood for ML, the S_n sum of squares otherwise.
    pub objective: f64,
    pub converged: bool,
    /// Some parameter sits on a bound of its range.
    pub boundary: bool,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    pub nm: NmOptions,
    /// Start only from this point instead of the default starts.
    pub warm_start: Option<(f64, f64)>,
}

/// Full parameter ranges of a family: `Theta_a x [1, inf)`, with beta fixed
/// to 1 for Gumbel where it is redundant.
pub fn default_ranges(family: Family) -> (Interval, Interval) {
    let (lo, hi) = family.theta_bounds();
    let rb = if family == Family::Gumbel { Interval::point(1.0) } else { Interval::new(1.0, f64::INFINITY) };
    (Interval::new(lo, hi), rb)
}

/// The bivariate log-likelihood of `g` on the pairs `(u_i, v_i)`.
pub fn log_likelihood(g: &Generator, u: &[f64], v: &[f64]) -> f64 {
    let terms: Vec<f64> = u
        .iter()
        .zip(v)
        .map(|(&a, &b)| g.log_density2(a.clamp(U_CLAMP, 1.0 - U_CLAMP), b.clamp(U_CLAMP, 1.0 - U_CLAMP)))
        .collect();
    terms.iter().sum()
}

/// Bivariate empirical copula at each sample point.
pub fn empirical_copula_at_points(u: &[f64], v: &[f64]) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|i| (0..n).filter(|&j| u[j] <= u[i] && v[j] <= v[i]).count() as f64 / n as f64)
        .collect()
}

/// S_n distance of `g` given the precomputed empirical copula `cn`.
pub fn sn_distance(g: &Generator, u: &[f64], v: &[f64], cn: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .zip(cn)
        .map(|((&a, &b), &c)| {
            let m = g.copula_cdf(&[a, b]);
            (m - c) * (m - c)
        })
        .sum()
}

struct Problem {
    family: Family,
    method: Method,
    u: Vec<f64>,
    v: Vec<f64>,
    cn: Vec<f64>,
}

impl Problem {
    /// Value to minimize; `+inf` outside the parameter space.
    fn cost(&self, theta: f64, beta: f64) -> f64 {
        let g = match Generator::new(self.family, theta, beta) {
            Ok(g) => g,
            Err(_) => return f64::INFINITY,
        };
        let c = match self.method {
            Method::Ml => -log_likelihood(&g, &self.u, &self.v),
            Method::Sn => sn_distance(&g, &self.u, &self.v, &self.cn),
        };
        if c.is_nan() {
            f64::INFINITY
        } else {
            c
        }
    }
}

fn effective_ranges(family: Family, r_theta: Interval, r_beta: Interval) -> Result<(Interval, Interval)> {
    let (ft, _) = default_ranges(family);
    let rt = r_theta
        .intersect(&ft)
        .ok_or_else(|| HopacError::Infeasible(format!("theta range {r_theta:?} outside family {family}")))?;
    let rb = if family == Family::Gumbel {
        Interval::point(1.0)
    } else {
        r_beta
            .intersect(&Interval::new(1.0, f64::INFINITY))
            .ok_or_else(|| HopacError::Infeasible(format!("beta range {r_beta:?} below 1")))?
    };
    Ok((rt, rb))
}

fn default_starts(family: Family, tau: f64, rt: Interval, rb: Interval) -> Vec<(f64, f64)> {
    let ct = rt.capped(theta_cap(family));
    let cb = rb.capped(BETA_CAP);
    let theta_near_lo = |iv: Interval| iv.lo + 0.05 * (iv.hi - iv.lo).min(1.0);
    let mut starts = Vec::new();
    let tau = tau.min(0.95);
    if tau <= 0.0 {
        starts.push((theta_near_lo(ct), cb.lo));
    } else {
        let b1 = cb.lo;
        let th1 = kendall_tau_inverse(family, tau, b1).unwrap_or_else(|_| theta_near_lo(ct));
        starts.push((ct.clamp(th1), b1));
        // tau split evenly between the base family and the power
        let b2 = cb.clamp(1.0 / (1.0 - tau).sqrt());
        if let Ok(th2) = kendall_tau_inverse(family, tau, b2) {
            starts.push((ct.clamp(th2), b2));
        }
        // theta pinned low, power carries the dependence
        let th3 = ct.lo;
        let b3 = cb.clamp((1.0 - family.base_tau(th3)) / (1.0 - tau));
        starts.push((th3, b3));
    }
    starts
}

/// Fits `(theta, beta)` of a bivariate OPAC on the box `r_theta x r_beta`.
pub fn fit_pair(
    u: &[f64],
    v: &[f64],
    family: Family,
    method: Method,
    r_theta: Interval,
    r_beta: Interval,
    opts: &FitOptions,
) -> Result<PairFit> {
    if u.len() != v.len() || u.len() < 2 {
        return Err(HopacError::Data("pair fit needs two equally long columns with n >= 2".into()));
    }
    let (rt, rb) = effective_ranges(family, r_theta, r_beta)?;
    let cn = if method == Method::Sn { empirical_copula_at_points(u, v) } else { Vec::new() };
    let p = Problem {
        family,
        method,
        u: u.to_vec(),
        v: v.to_vec(),
        cn,
    };
    let ct = rt.capped(theta_cap(family));
    let cb = rb.capped(BETA_CAP);
    let tmap = (!ct.is_point()).then(|| Logistic::new(ct));
    let bmap = (!cb.is_point()).then(|| Logistic::new(cb));
    let decode = |z: &[f64]| -> (f64, f64) {
        let mut k = 0;
        let th = match &tmap {
            Some(m) => {
                k += 1;
                m.to_bounded(z[0])
            }
            None => ct.lo,
        };
        let be = match &bmap {
            Some(m) => m.to_bounded(z[k]),
            None => cb.lo,
        };
        (th, be)
    };
    let encode = |th: f64, be: f64| -> Vec<f64> {
        let mut z = Vec::new();
        if let Some(m) = &tmap {
            z.push(m.to_real(th));
        }
        if let Some(m) = &bmap {
            z.push(m.to_real(be));
        }
        z
    };
    let starts = match opts.warm_start {
        Some((th, be)) => vec![(ct.clamp(th), cb.clamp(be))],
        None => default_starts(family, kendall_tau_b(u, v), rt, rb),
    };
    let mut best: Option<(f64, f64, f64, bool)> = None;
    let mut evaluations = 0;
    for (th0, be0) in starts {
        let z0 = encode(th0, be0);
        // a warm start is assumed close, so the simplex starts small
        let step = vec![if opts.warm_start.is_some() { 0.2 } else { 0.6 }; z0.len()];
        let r = nelder_mead(
            |z| {
                let (th, be) = decode(z);
                p.cost(th, be)
            },
            &z0,
            &step,
            opts.nm,
        );
        evaluations += r.evaluations;
        let (th, be) = decode(&r.x);
        if best.as_ref().map_or(true, |b| r.f < b.2) {
            best = Some((th, be, r.f, r.converged));
        }
    }
    let (mut th, mut be, mut f, converged) = best.unwrap();
    // Snap to a bound when that is at least as good.
    let mut boundary = false;
    let bounds_t: Vec<f64> = if ct.is_point() { vec![] } else { [rt.lo, rt.hi].into_iter().filter(|x| x.is_finite()).collect() };
    for b in bounds_t {
        if (th - b).abs() < 1e-3 * (1.0 + b.abs()) {
            let fb = p.cost(b, be);
            evaluations += 1;
            if fb <= f {
                th = b;
                f = fb;
                boundary = true;
            }
        }
    }
    let bounds_b: Vec<f64> = if cb.is_point() { vec![] } else { [rb.lo, rb.hi].into_iter().filter(|x| x.is_finite()).collect() };
    for b in bounds_b {
        if (be - b).abs() < 1e-3 * (1.0 + b.abs()) {
            let fb = p.cost(th, b);
            evaluations += 1;
            if fb <= f {
                be = b;
                f = fb;
                boundary = true;
            }
        }
    }
    let objective = match method {
        Method::Ml => -f,
        Method::Sn => f,
    };
    Ok(PairFit { theta: th, beta: be, objective, converged, boundary, evaluations })
}

/// Maximum likelihood fit of a bivariate OPAC (`u` is `n x 2`).
pub fn fit_opac_ml(u: &SampleMatrix, family: Family, r_theta: Interval, r_beta: Interval) -> Result<PairFit> {
    check_pairs(u)?;
    fit_pair(&u.column(0), &u.column(1), family, Method::Ml, r_theta, r_beta, &FitOptions::default())
}

/// S_n fit of a bivariate OPAC (`u` is `n x 2`).
pub fn fit_opac_sn(u: &SampleMatrix, family: Family, r_theta: Interval, r_beta: Interval) -> Result<PairFit> {
    check_pairs(u)?;
    fit_pair(&u.column(0), &u.column(1), family, Method::Sn, r_theta, r_beta, &FitOptions::default())
}

fn check_pairs(u: &SampleMatrix) -> Result<()> {
    if u.d() != 2 {
        return Err(HopacError::Data(format!("expected 2 columns, got {}", u.d())));
    }
    Ok(())
}

/// Component-wise mean of parameter pairs, summed in sorted order so the
/// result does not depend on the order of the input.
pub fn aggregate_mean(estimates: &[(f64, f64)]) -> (f64, f64) {
    let n = estimates.len() as f64;
    let th = sorted_sum(estimates.iter().map(|e| e.0).collect()) / n;
    let be = sorted_sum(estimates.iter().map(|e| e.1).collect()) / n;
    (th, be)
}

/// Result of a mean-aggregated fit over a set of column pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedFit {
    pub theta: f64,
    pub beta: f64,
    pub pairs: Vec<(usize, usize)>,
    pub pair_fits: Vec<PairFit>,
}

impl AggregatedFit {
    pub fn any_unconverged(&self) -> bool {
        self.pair_fits.iter().any(|f| !f.converged)
    }

    pub fn any_boundary(&self) -> bool {
        self.pair_fits.iter().any(|f| f.boundary)
    }
}

/// Fits every column pair in `pairs` (0-based) and averages the estimates.
pub fn fit_aggregated_pairs(
    u: &SampleMatrix,
    pairs: &[(usize, usize)],
    family: Family,
    method: Method,
    r_theta: Interval,
    r_beta: Interval,
    opts: &FitOptions,
) -> Result<AggregatedFit> {
    if pairs.is_empty() {
        return Err(HopacError::Data("no pairs to aggregate".into()));
    }
    let mut fits = Vec::with_capacity(pairs.len());
    for &(i, j) in pairs {
        let f = fit_pair(&u.column(i), &u.column(j), family, method, r_theta, r_beta, opts)?;
        if !f.converged {
            log::warn!("pair ({}, {}) fit did not converge", i + 1, j + 1);
        }
        fits.push(f);
    }
    let est: Vec<(f64, f64)> = fits.iter().map(|f| (f.theta, f.beta)).collect();
    let (theta, beta) = aggregate_mean(&est);
    Ok(AggregatedFit { theta, beta, pairs: pairs.to_vec(), pair_fits: fits })
}

/// Exchangeable OPAC estimate: mean of all `d(d-1)/2` pairwise ML fits.
pub fn fit_opac_aggregated(u: &SampleMatrix, family: Family) -> Result<(f64, f64)> {
    let d = u.d();
    if d < 2 {
        return Err(HopacError::Data("need at least 2 columns".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
    let (rt, rb) = default_ranges(family);
    let f = fit_aggregated_pairs(u, &pairs, family, Method::Ml, rt, rb, &FitOptions::default())?;
    Ok((f.theta, f.beta))
}
