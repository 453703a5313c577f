//! Derivative-free minimization (Nelder–Mead) and bounded reparameterization.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmOptions {
    pub max_iter: usize,
    /// Stop when the simplex values spread less than `ftol * (1 + |f_best|)`.
    pub ftol: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        NmOptions { max_iter: 400, ftol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0` with initial simplex offsets `step`. Non-finite
/// function values count as `+inf`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], step: &[f64], opts: NmOptions) -> NmResult {
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if n == 0 {
        let v = eval(x0, &mut evals);
        return NmResult { x: vec![], f: v, iterations: 0, evaluations: evals, converged: true };
    }
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += if step[i] != 0.0 { step[i] } else { 0.1 };
        simplex.push(p);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|p| eval(p, &mut evals)).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let (best, worst) = (vals[0], vals[n]);
        if best.is_finite() && (worst - best).abs() <= opts.ftol * (1.0 + best.abs()) {
            converged = true;
            break;
        }
        iterations += 1;
        let centroid: Vec<f64> =
            (0..n).map(|k| simplex[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (c - w)).collect()
        };
        let xr = along(1.0);
        let fr = eval(&xr, &mut evals);
        if fr < vals[0] {
            let xe = along(2.0);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                simplex[n] = xe;
                vals[n] = fe;
            } else {
                simplex[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            simplex[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(0.5);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < vals[n].min(fr) {
            simplex[n] = xc;
            vals[n] = fc;
            continue;
        }
        // shrink toward the best vertex
        for i in 1..=n {
            let p: Vec<f64> = simplex[0].iter().zip(&simplex[i]).map(|(b, x)| b + 0.5 * (x - b)).collect();
            vals[i] = eval(&p, &mut evals);
            simplex[i] = p;
        }
    }
    let bi = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    NmResult { x: simplex[bi].clone(), f: vals[bi], iterations, evaluations: evals, converged }
}

/// A closed interval `[lo, hi]`; `hi` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn is_point(&self) -> bool {
        self.hi - self.lo <= 0.0
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.max(self.lo).min(self.hi)
    }

    /// Intersection; `None` when empty.
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    /// Same interval with an infinite upper end replaced by `cap`.
    pub fn capped(&self, cap: f64) -> Interval {
        Interval { lo: self.lo, hi: if self.hi.is_finite() { self.hi } else { cap.max(self.lo) } }
    }
}

/// Logistic map from the real line onto a finite interval.
#[derive(Debug, Clone, Copy)]
pub struct Logistic {
    lo: f64,
    hi: f64,
}

impl Logistic {
    pub fn new(iv: Interval) -> Self {
        debug_assert!(iv.hi.is_finite());
        Logistic { lo: iv.lo, hi: iv.hi }
    }

    pub fn to_bounded(&self, z: f64) -> f64 {
        let s = if z >= 0.0 { 1.0 / (1.0 + (-z).exp()) } else { z.exp() / (1.0 + z.exp()) };
        (self.lo + (self.hi - self.lo) * s).clamp(self.lo, self.hi)
    }

    /// Inverse map; points at or beyond the ends are pulled slightly inside.
    pub fn to_real(&self, x: f64) -> f64 {
        let w = self.hi - self.lo;
        let p = ((x - self.lo) / w).clamp(1e-9, 1.0 - 1e-9);
        (p / (1.0 - p)).ln()
    }
}
