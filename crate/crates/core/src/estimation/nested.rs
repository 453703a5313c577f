//! HOPAC estimators: Top-Down, Bottom-Up, and the OPAC and HAC baselines.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::opac::{default_ranges, fit_aggregated_pairs, AggregatedFit, FitOptions, Method};
use super::pseudo::kendall_matrix;
use super::structure::{estimate_structure, StructureEstimate};
use crate::data::PseudoSample;
use crate::error::{HopacError, Result};
use crate::generator::{Family, Generator};
use crate::optim::{Interval, NmOptions};
use crate::tree::{HacTree, NestingRule, SNC_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "OPAC")]
    Opac,
    #[serde(rename = "HAC")]
    Hac,
    #[serde(rename = "TD-ML")]
    TdMl,
    #[serde(rename = "TD-Sn")]
    TdSn,
    #[serde(rename = "BU-ML")]
    BuMl,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [Estimator::Opac, Estimator::Hac, Estimator::TdMl, Estimator::TdSn, Estimator::BuMl];

    pub fn label(self) -> &'static str {
        match self {
            Estimator::Opac => "OPAC",
            Estimator::Hac => "HAC",
            Estimator::TdMl => "TD-ML",
            Estimator::TdSn => "TD-Sn",
            Estimator::BuMl => "BU-ML",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Estimator {
    type Err = HopacError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "opac" => Ok(Estimator::Opac),
            "hac" => Ok(Estimator::Hac),
            "td-ml" | "tdml" => Ok(Estimator::TdMl),
            "td-sn" | "tdsn" => Ok(Estimator::TdSn),
            "bu-ml" | "buml" => Ok(Estimator::BuMl),
            other => Err(HopacError::Config(format!("unknown estimator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Largest fitted beta still read as beta = 1 (R1 branch).
    pub beta_r: f64,
    /// Range of beta at the root; `[1, 1]` gives the HAC estimator.
    pub beta_range: Interval,
    pub nm: NmOptions,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig { beta_r: 1.05, beta_range: Interval::new(1.0, f64::INFINITY), nm: NmOptions::default() }
    }
}

impl EstimatorConfig {
    pub fn hac() -> Self {
        EstimatorConfig { beta_range: Interval::point(1.0), ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta_r >= 1.0) {
            return Err(HopacError::Config(format!("beta_R = {} must be >= 1", self.beta_r)));
        }
        if !(self.beta_range.lo >= 1.0 && self.beta_range.lo <= self.beta_range.hi) {
            return Err(HopacError::Config(format!("beta range {:?} must lie in [1, inf)", self.beta_range)));
        }
        Ok(())
    }
}

/// Diagnostics of one estimated fork.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForkRecord {
    pub fork: usize,
    pub theta: f64,
    pub beta: f64,
    /// Number of leaf pairs aggregated.
    pub pairs: usize,
    /// Nesting rule imposed on the fork's children (Top-Down) or used to
    /// reconcile the fork with its children (Bottom-Up).
    pub restriction: Option<NestingRule>,
    pub trimmed: bool,
    /// Some pair fit ended on a bound of its range.
    pub boundary: bool,
    pub converged: bool,
    pub theta_range: Interval,
    pub beta_range: Interval,
    /// Final objective of each pair fit.
    pub objectives: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub estimator: Estimator,
    pub family: Family,
    pub tree: HacTree,
    /// Ordered by fork id of `tree`.
    pub forks: Vec<ForkRecord>,
}

impl FitReport {
    pub fn record(&self, fork: usize) -> Option<&ForkRecord> {
        self.forks.iter().find(|r| r.fork == fork)
    }
}

fn zero_based_pairs(li: &[usize], lj: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(li.len() * lj.len());
    for &a in li {
        for &b in lj {
            out.push((a.min(b) - 1, a.max(b) - 1));
        }
    }
    out
}

fn check_input(u: &PseudoSample) -> Result<()> {
    if u.d() < 2 {
        return Err(HopacError::Data(format!("need d >= 2 columns, got {}", u.d())));
    }
    if u.n() < 10 {
        return Err(HopacError::Data(format!("need n >= 10 observations, got {}", u.n())));
    }
    Ok(())
}

/// Result of the R1/R2 decision at one fork.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub rule: NestingRule,
    pub theta_range: Interval,
    pub beta_range: Interval,
}

/// Ranges handed to the children of a fork estimated at `(theta, beta)`:
/// R1 when `beta <= beta_r`, R2 otherwise.
pub fn branch_ranges(theta: f64, beta: f64, r_theta: Interval, r_beta: Interval, beta_r: f64) -> Branch {
    if beta <= beta_r {
        let lo = r_theta.lo.max(theta);
        Branch { rule: NestingRule::R1, theta_range: Interval::new(lo, r_theta.hi.max(lo)), beta_range: r_beta }
    } else {
        Branch {
            rule: NestingRule::R2,
            theta_range: Interval::point(theta),
            beta_range: Interval::new(beta, f64::INFINITY),
        }
    }
}

struct Ctx<'a> {
    u: &'a PseudoSample,
    family: Family,
    method: Method,
    cfg: EstimatorConfig,
}

impl Ctx<'_> {
    fn aggregate(&self, pairs: &[(usize, usize)], rt: Interval, rb: Interval) -> Result<AggregatedFit> {
        self.aggregate_from(pairs, rt, rb, None)
    }

    fn aggregate_from(
        &self,
        pairs: &[(usize, usize)],
        rt: Interval,
        rb: Interval,
        warm: Option<(f64, f64)>,
    ) -> Result<AggregatedFit> {
        let opts = FitOptions { nm: self.cfg.nm, warm_start: warm };
        fit_aggregated_pairs(self.u, pairs, self.family, self.method, rt, rb, &opts)
    }
}

fn record_from(fork: usize, fit: &AggregatedFit, rt: Interval, rb: Interval) -> ForkRecord {
    ForkRecord {
        fork,
        theta: fit.theta,
        beta: fit.beta,
        pairs: fit.pairs.len(),
        restriction: None,
        trimmed: false,
        boundary: fit.any_boundary(),
        converged: !fit.any_unconverged(),
        theta_range: rt,
        beta_range: rb,
        objectives: fit.pair_fits.iter().map(|f| f.objective).collect(),
    }
}

fn finish(
    est: &StructureEstimate,
    estimator: Estimator,
    family: Family,
    mut records: Vec<ForkRecord>,
) -> Result<FitReport> {
    let s = &est.structure;
    let d = s.d();
    let gens: Vec<Generator> = records
        .iter()
        .map(|r| Generator::new(family, r.theta, r.beta))
        .collect::<Result<_>>()?;
    let (tree, map) = HacTree::from_structure_with_map(s, |f| gens[f - d - 1]);
    for r in &mut records {
        r.fork = map[r.fork];
        let g = tree.generator(r.fork);
        // Gumbel generators are stored normalized
        r.theta = g.theta();
        r.beta = g.beta();
    }
    records.sort_by_key(|r| r.fork);
    tree.require_snc()?;
    Ok(FitReport { estimator, family, tree, forks: records })
}

/// Top-Down estimator: depth-first from the root, mean-aggregated pairwise
/// fits, children restricted by the R1/R2 branch of their parent.
pub fn fit_topdown(u: &PseudoSample, family: Family, method: Method, cfg: &EstimatorConfig) -> Result<FitReport> {
    fit_topdown_warm(u, family, method, cfg, None)
}

/// Top-Down estimator started, fork by fork, from a previous fit: a fork whose
/// leaf set also appears in `previous` starts from that fork's parameters.
/// Used for rolling-window refits where consecutive samples barely differ.
pub fn fit_topdown_warm(
    u: &PseudoSample,
    family: Family,
    method: Method,
    cfg: &EstimatorConfig,
    previous: Option<&HacTree>,
) -> Result<FitReport> {
    check_input(u)?;
    cfg.validate()?;
    let est = estimate_structure(&kendall_matrix(u))?;
    let ctx = Ctx { u, family, method, cfg: *cfg };
    let (rt0, _) = default_ranges(family);
    let rb0 = if family == Family::Gumbel { Interval::point(1.0) } else { cfg.beta_range };
    let d = u.d();
    let mut records: Vec<Option<ForkRecord>> = vec![None; d - 1];
    let s = &est.structure;
    let mut stack = vec![(s.root(), rt0, rb0)];
    while let Some((k, rt, rb)) = stack.pop() {
        let [i, j] = s.children_of(k);
        let pairs = zero_based_pairs(&s.descendant_leaves(i), &s.descendant_leaves(j));
        let warm = previous.and_then(|p| warm_point(p, &s.descendant_leaves(k)));
        let fit = ctx.aggregate_from(&pairs, rt, rb, warm)?;
        let mut rec = record_from(k, &fit, rt, rb);
        if rec.beta <= cfg.beta_r && (rec.beta - 1.0).abs() > SNC_TOL {
            // R1 needs beta = 1 exactly; refit theta with beta pinned.
            let refit = ctx.aggregate_from(&pairs, rt, Interval::point(1.0), warm.map(|w| (w.0, 1.0)))?;
            rec.theta = refit.theta;
            rec.beta = 1.0;
            rec.boundary |= refit.any_boundary();
            rec.converged &= !refit.any_unconverged();
            rec.objectives = refit.pair_fits.iter().map(|f| f.objective).collect();
        }
        let br = branch_ranges(rec.theta, rec.beta, rt, rb, cfg.beta_r);
        rec.restriction = Some(br.rule);
        for c in [j, i] {
            if !s.is_leaf(c) {
                stack.push((c, br.theta_range, br.beta_range));
            }
        }
        records[k - d - 1] = Some(rec);
    }
    let estimator = match (method, cfg.beta_range.is_point()) {
        (_, true) => Estimator::Hac,
        (Method::Ml, false) => Estimator::TdMl,
        (Method::Sn, false) => Estimator::TdSn,
    };
    finish(&est, estimator, family, records.into_iter().map(Option::unwrap).collect())
}

fn warm_point(previous: &HacTree, leaves: &[usize]) -> Option<(f64, f64)> {
    let s = previous.structure();
    s.forks().find(|&f| s.descendant_leaves(f) == leaves).map(|f| {
        let g = previous.generator(f);
        (g.theta(), g.beta())
    })
}

/// HAC estimator: Top-Down ML with beta fixed to 1.
pub fn fit_hac(u: &PseudoSample, family: Family) -> Result<FitReport> {
    fit_topdown(u, family, Method::Ml, &EstimatorConfig::hac())
}

/// Bottom-Up estimator: forks by decreasing tau, each fitted without
/// restriction and then reconciled with its already fitted children.
pub fn fit_bottomup(u: &PseudoSample, family: Family, cfg: &EstimatorConfig) -> Result<FitReport> {
    check_input(u)?;
    cfg.validate()?;
    let est = estimate_structure(&kendall_matrix(u))?;
    let ctx = Ctx { u, family, method: Method::Ml, cfg: *cfg };
    let (rt0, rb0) = default_ranges(family);
    let d = u.d();
    let s = &est.structure;
    let mut records: Vec<ForkRecord> = Vec::with_capacity(d - 1);
    // ids increase as tau decreases, and children precede parents
    for k in s.forks() {
        let [i, j] = s.children_of(k);
        let pairs = zero_based_pairs(&s.descendant_leaves(i), &s.descendant_leaves(j));
        let fit = ctx.aggregate(&pairs, rt0, rb0)?;
        let mut rec = record_from(k, &fit, rt0, rb0);
        let kids: Vec<(f64, f64)> = [i, j]
            .iter()
            .filter(|&&c| !s.is_leaf(c))
            .map(|&c| {
                let r = &records[c - d - 1];
                (r.theta, r.beta)
            })
            .collect();
        let (th_hat, be_hat) = (rec.theta, rec.beta);
        if !kids.is_empty() {
            let min_theta = kids.iter().map(|k| k.0).fold(f64::INFINITY, f64::min);
            let max_theta = kids.iter().map(|k| k.0).fold(f64::NEG_INFINITY, f64::max);
            let min_beta = kids.iter().map(|k| k.1).fold(f64::INFINITY, f64::min);
            let equal_theta = max_theta - min_theta <= SNC_TOL;
            if !equal_theta || (kids.len() == 1 && be_hat <= cfg.beta_r) {
                rec.restriction = Some(NestingRule::R1);
                rec.beta = 1.0;
                rec.theta = th_hat.min(min_theta);
            } else {
                rec.restriction = Some(NestingRule::R2);
                rec.theta = min_theta;
                rec.beta = be_hat.min(min_beta);
            }
            rec.trimmed = (rec.theta - th_hat).abs() > SNC_TOL || (rec.beta - be_hat).abs() > SNC_TOL;
        }
        records.push(rec);
    }
    finish(&est, Estimator::BuMl, family, records)
}

/// Exchangeable OPAC estimate written as a tree whose forks all carry the
/// aggregated generator. With `cfg.beta_range = [1, 1]` this is the plain
/// Archimedean estimate.
pub fn fit_opac(u: &PseudoSample, family: Family, cfg: &EstimatorConfig) -> Result<FitReport> {
    check_input(u)?;
    let d = u.d();
    let est = estimate_structure(&kendall_matrix(u))?;
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
    let (rt, rb) = default_ranges(family);
    let rb = rb.intersect(&cfg.beta_range).unwrap_or(rb);
    let ctx = Ctx { u, family, method: Method::Ml, cfg: *cfg };
    let fit = ctx.aggregate(&pairs, rt, rb)?;
    let records = est.structure.forks().map(|k| record_from(k, &fit, rt, rb)).collect();
    finish(&est, Estimator::Opac, family, records)
}

/// Dispatches on the estimator tag.
pub fn fit(u: &PseudoSample, family: Family, estimator: Estimator, cfg: &EstimatorConfig) -> Result<FitReport> {
    match estimator {
        Estimator::Opac => fit_opac(u, family, cfg),
        Estimator::Hac => fit_topdown(u, family, Method::Ml, &EstimatorConfig { beta_range: Interval::point(1.0), ..*cfg }),
        Estimator::TdMl => fit_topdown(u, family, Method::Ml, cfg),
        Estimator::TdSn => fit_topdown(u, family, Method::Sn, cfg),
        Estimator::BuMl => fit_bottomup(u, family, cfg),
    }
}
