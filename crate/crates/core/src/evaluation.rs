//! Empirical copulas, tail-dependence estimates and discrepancy measures
//! between samples, models and estimates.

use serde::{Deserialize, Serialize};

use crate::data::PseudoSample;
use crate::error::{HopacError, Result};
use crate::estimation::pseudo::{average_ranks, kendall_matrix};
use crate::estimation::FitReport;
use std::collections::BTreeSet;

use crate::tree::{triple_class, HacTree, Structure, SNC_TOL};

/// Fraction of rows that are component-wise at most `point`.
pub fn empirical_copula(u: &PseudoSample, point: &[f64]) -> f64 {
    if u.n() == 0 {
        return 0.0;
    }
    let hits = u.rows().filter(|r| r.iter().zip(point).all(|(a, b)| a <= b)).count();
    hits as f64 / u.n() as f64
}

/// Empirical copula evaluated at every sample row.
pub fn empirical_copula_at_rows(u: &PseudoSample) -> Vec<f64> {
    (0..u.n()).map(|i| empirical_copula(u, u.row(i))).collect()
}

/// Default tail count `ceil(0.05 n)`.
pub fn default_tail_k(n: usize) -> usize {
    ((0.05 * n as f64).ceil() as usize).max(1)
}

/// Non-parametric upper tail coefficient: the share of the `k` largest
/// observations of one variable that are also among the `k` largest of the
/// other.
pub fn lambda_u_empirical(x: &[f64], y: &[f64], k: usize) -> Result<f64> {
    let n = x.len();
    if y.len() != n {
        return Err(HopacError::Data("columns differ in length".into()));
    }
    if k == 0 || k > n {
        return Err(HopacError::Domain(format!("tail count k = {k} outside 1..={n}")));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let cut = (n - k) as f64;
    let both = rx.iter().zip(&ry).filter(|(a, b)| **a > cut && **b > cut).count();
    Ok(both as f64 / k as f64)
}

/// Matrix of empirical upper tail coefficients at level `k`.
pub fn lambda_u_matrix(u: &PseudoSample, k: usize) -> Result<Vec<Vec<f64>>> {
    let d = u.d();
    let cols: Vec<Vec<f64>> = (0..d).map(|j| u.column(j)).collect();
    let mut m = vec![vec![1.0; d]; d];
    for i in 0..d {
        for j in i + 1..d {
            let l = lambda_u_empirical(&cols[i], &cols[j], k)?;
            m[i][j] = l;
            m[j][i] = l;
        }
    }
    Ok(m)
}

/// Sample-versus-estimate discrepancies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMeasures {
    /// Mean squared gap between model and empirical copula at the sample rows.
    pub cdf_distance: f64,
    /// Mean absolute gap between model and sample Kendall's tau over pairs.
    pub tau_distance: f64,
    /// Mean absolute gap between model and empirical upper tail coefficients.
    pub lambda_u_distance: f64,
}

/// True-versus-estimate discrepancies, averaged over forks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueMeasures {
    pub param_distance: f64,
    pub tau_distance: f64,
    pub lambda_u_distance: f64,
}

/// Both groups of measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureSet {
    pub sample_vs_estimate: SampleMeasures,
    pub true_vs_estimate: Option<TrueMeasures>,
}

fn pair_mean(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let d = a.len();
    let mut s = 0.0;
    let mut c = 0usize;
    for i in 0..d {
        for j in i + 1..d {
            s += (a[i][j] - b[i][j]).abs();
            c += 1;
        }
    }
    s / c as f64
}

/// Measures comparing a fitted tree with the sample it was fitted on.
pub fn sample_vs_estimate_tree(u: &PseudoSample, tree: &HacTree) -> Result<SampleMeasures> {
    if u.d() != tree.d() {
        return Err(HopacError::Data(format!("sample has {} columns, model {}", u.d(), tree.d())));
    }
    let cn = empirical_copula_at_rows(u);
    let mut sq = 0.0;
    for (i, c) in cn.iter().enumerate() {
        let m = tree.cdf(u.row(i))?;
        sq += (m - c) * (m - c);
    }
    let pm = tree.pairwise_matrix();
    let tau_n = kendall_matrix(u);
    let lam_n = lambda_u_matrix(u, default_tail_k(u.n()))?;
    Ok(SampleMeasures {
        cdf_distance: sq / u.n() as f64,
        tau_distance: pair_mean(&pm.tau, &tau_n),
        lambda_u_distance: pair_mean(&pm.lambda_u, &lam_n),
    })
}

pub fn sample_vs_estimate(u: &PseudoSample, fit: &FitReport) -> Result<SampleMeasures> {
    sample_vs_estimate_tree(u, &fit.tree)
}

/// For each fork of `model`, the fork of `fit` with the same leaf set.
pub fn match_forks(model: &HacTree, fit: &HacTree) -> Result<Vec<(usize, usize)>> {
    if model.d() != fit.d() {
        return Err(HopacError::StructureMismatch(format!("d = {} vs {}", model.d(), fit.d())));
    }
    let ms = model.structure();
    let fs = fit.structure();
    let mut out = Vec::new();
    for f in ms.forks() {
        let leaves = ms.descendant_leaves(f);
        let g = fs
            .forks()
            .find(|&g| fs.descendant_leaves(g) == leaves)
            .ok_or_else(|| HopacError::StructureMismatch(format!("no fitted fork over leaves {leaves:?}")))?;
        out.push((f, g));
    }
    Ok(out)
}

/// Measures comparing fitted forks with the true ones; the structures must agree.
pub fn true_vs_estimate_tree(model: &HacTree, fit: &HacTree) -> Result<TrueMeasures> {
    let pairs = match_forks(model, fit)?;
    let (mut p, mut t, mut l) = (0.0, 0.0, 0.0);
    for &(f, g) in &pairs {
        let (a, b) = (model.generator(f), fit.generator(g));
        p += ((a.theta() - b.theta()).powi(2) + (a.beta() - b.beta()).powi(2)).sqrt();
        t += (a.kendall_tau() - b.kendall_tau()).abs();
        l += (a.tail_coefficients().lambda_u - b.tail_coefficients().lambda_u).abs();
    }
    let m = pairs.len() as f64;
    Ok(TrueMeasures { param_distance: p / m, tau_distance: t / m, lambda_u_distance: l / m })
}

pub fn true_vs_estimate(model: &HacTree, fit: &FitReport) -> Result<TrueMeasures> {
    true_vs_estimate_tree(model, &fit.tree)
}

/// Structure agreement: whether the fit reproduces every split the model
/// identifies, and the share of leaf triples grouped the same way.
///
/// A fork whose tau equals its parent's carries no split of its own (the two
/// forks form one exchangeable group), so it is not required of the fit and
/// triples merging inside such a group agree with any grouping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureMatch {
    pub exact: bool,
    pub trivariate_ratio: f64,
}

/// Leaf sets of the forks of `t` that differ in tau from their parent, plus
/// the root.
pub fn identified_clades(t: &HacTree) -> BTreeSet<Vec<usize>> {
    let s = t.structure();
    s.forks()
        .filter(|&f| match s.parent_of(f) {
            None => true,
            Some(p) => (t.generator(f).kendall_tau() - t.generator(p).kendall_tau()).abs() > SNC_TOL,
        })
        .map(|f| s.descendant_leaves(f))
        .collect()
}

pub fn structure_match(model: &HacTree, fit: &HacTree) -> Result<StructureMatch> {
    compare(model, fit.structure(), Some(fit))
}

/// As [`structure_match`] against a bare estimated structure.
pub fn structure_match_bare(model: &HacTree, fit: &Structure) -> Result<StructureMatch> {
    compare(model, fit, None)
}

pub fn trivariate_ratio(model: &HacTree, fit: &Structure) -> Result<f64> {
    Ok(structure_match_bare(model, fit)?.trivariate_ratio)
}

fn compare(model: &HacTree, fit: &Structure, fit_tree: Option<&HacTree>) -> Result<StructureMatch> {
    let d = model.d();
    if fit.d() != d {
        return Err(HopacError::StructureMismatch(format!("d = {} vs {}", d, fit.d())));
    }
    let exact = identified_clades(model).is_subset(&fit.clades());
    if d < 3 {
        return Ok(StructureMatch { exact, trivariate_ratio: if exact { 1.0 } else { 0.0 } });
    }
    let ms = model.structure();
    let (mut agree, mut total) = (0usize, 0usize);
    for i in 1..=d {
        for j in i + 1..=d {
            for k in j + 1..=d {
                total += 1;
                let a = triple_class(ms, Some(model), i, j, k);
                if a.is_none() || a == triple_class(fit, fit_tree, i, j, k) {
                    agree += 1;
                }
            }
        }
    }
    Ok(StructureMatch { exact, trivariate_ratio: agree as f64 / total as f64 })
}
