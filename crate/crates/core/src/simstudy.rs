//! Random HOPAC models and the estimator comparison study.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{HopacError, Result};
use crate::estimation::{estimate_structure, fit, kendall_matrix, pseudo_observations, Estimator, EstimatorConfig};
use crate::evaluation::{sample_vs_estimate, structure_match_bare, true_vs_estimate};
use crate::generator::{kendall_tau_inverse, Family, Generator};
use crate::rng::RngStream;
use crate::sampling::sample_hopac;
use crate::tree::HacTree;

/// Fork taus below this are raised to it when building random models.
pub const MIN_FORK_TAU: f64 = 0.01;

/// Random correlation matrix, uniform over the space of correlation matrices,
/// built by the onion method.
pub fn random_correlation<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if d < 2 {
        return Err(HopacError::Domain(format!("correlation matrix needs d >= 2, got {d}")));
    }
    let mut b = (d as f64 - 2.0) / 2.0 + 1.0;
    let r12 = 2.0 * Beta::new(b, b).expect("valid beta").sample(rng) - 1.0;
    let mut r = DMatrix::from_row_slice(2, 2, &[1.0, r12, r12, 1.0]);
    for k in 2..d {
        b -= 0.5;
        let y = Beta::new(k as f64 / 2.0, b).expect("valid beta").sample(rng);
        let w = loop {
            let w = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = w.norm();
            if norm > 0.0 {
                break w / norm;
            }
        };
        let z = w * y.sqrt();
        let l = r
            .clone()
            .cholesky()
            .ok_or_else(|| HopacError::Sampling("onion step lost positive definiteness".into()))?
            .l();
        let q = l * z;
        let mut next = DMatrix::identity(k + 1, k + 1);
        next.view_mut((0, 0), (k, k)).copy_from(&r);
        for i in 0..k {
            next[(i, k)] = q[i];
            next[(k, i)] = q[i];
        }
        r = next;
    }
    Ok((0..d).map(|i| (0..d).map(|j| r[(i, j)]).collect()).collect())
}

/// Largest theta of the R2 range at tau: the theta reaching `tau` with beta = 1,
/// or the family's upper bound when no such theta exists.
fn theta_at_unit_beta(family: Family, tau: f64) -> Result<f64> {
    if tau >= family.base_tau_sup() {
        return Ok(family.theta_bounds().1);
    }
    kendall_tau_inverse(family, tau, 1.0)
}

/// Beta giving Kendall's tau `tau` at a fixed theta.
fn beta_for(family: Family, theta: f64, tau: f64) -> f64 {
    ((1.0 - family.base_tau(theta)) / (1.0 - tau)).max(1.0)
}

/// One fork of a random model before renumbering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomFork {
    pub generator: Generator,
    pub tau: f64,
    /// Whether the coin flip was available (the parent allowed beta = 1).
    pub free: bool,
}

/// A random HOPAC: structure from a random correlation matrix, then per fork
/// from the root either beta = 1 (R1) or a random theta from the feasible R2
/// range with beta matching the fork tau. Children of a fork with beta > 1
/// must follow R2 with the parent's theta.
pub fn random_hopac<R: Rng + ?Sized>(family: Family, d: usize, rng: &mut R) -> Result<HacTree> {
    Ok(random_hopac_detailed(family, d, rng)?.0)
}

/// As [`random_hopac`], also returning the per-fork draws keyed by the fork
/// ids of the returned tree.
pub fn random_hopac_detailed<R: Rng + ?Sized>(
    family: Family,
    d: usize,
    rng: &mut R,
) -> Result<(HacTree, BTreeMap<usize, RandomFork>)> {
    if family == Family::Gumbel {
        return Err(HopacError::Domain("random HOPACs need a family with a free OP parameter".into()));
    }
    if d < 3 {
        return Err(HopacError::Domain(format!("random HOPACs need d >= 3, got {d}")));
    }
    let corr = random_correlation(d, rng)?;
    let est = estimate_structure(&corr)?;
    let s = &est.structure;
    let (lo, _) = family.theta_bounds();
    let mut forks: BTreeMap<usize, RandomFork> = BTreeMap::new();
    for k in s.preorder_forks() {
        let tau = est.tau(k).max(MIN_FORK_TAU);
        let parent = s.parent_of(k).map(|p| forks[&p].generator);
        let g = match parent {
            Some(p) if p.beta() > 1.0 => {
                let beta = beta_for(family, p.theta(), tau).max(p.beta());
                forks.insert(k, RandomFork { generator: Generator::new(family, p.theta(), beta)?, tau, free: false });
                continue;
            }
            _ => {
                let th_lo = parent.map_or(lo, |p| p.theta());
                let unit_ok = tau < family.base_tau_sup();
                if unit_ok && rng.random::<f64>() < 0.5 {
                    let theta = kendall_tau_inverse(family, tau, 1.0)?.max(th_lo);
                    Generator::new(family, theta, 1.0)?
                } else {
                    let th_hi = theta_at_unit_beta(family, tau)?.max(th_lo);
                    let theta = th_lo + (th_hi - th_lo) * rng.random::<f64>();
                    Generator::new(family, theta, beta_for(family, theta, tau))?
                }
            }
        };
        forks.insert(k, RandomFork { generator: g, tau, free: true });
    }
    let (tree, map) = HacTree::from_structure_with_map(s, |f| forks[&f].generator);
    tree.require_snc()?;
    let forks = forks.into_iter().map(|(k, v)| (map[k], v)).collect();
    Ok((tree, forks))
}

fn default_estimators() -> Vec<Estimator> {
    vec![Estimator::Opac, Estimator::Hac, Estimator::TdSn, Estimator::TdMl]
}

fn default_retry_cap() -> usize {
    10_000
}

fn default_true() -> bool {
    true
}

/// Study configuration, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub families: Vec<Family>,
    pub dims: Vec<usize>,
    pub sample_sizes: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
    /// Resample until the estimated structure equals the true one.
    #[serde(default = "default_true")]
    pub match_structure: bool,
    #[serde(default = "default_retry_cap")]
    pub retry_cap: usize,
    #[serde(default)]
    pub estimator_config: EstimatorConfig,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(HopacError::Config("repetitions must be >= 1".into()));
        }
        if self.families.is_empty() || self.dims.is_empty() || self.sample_sizes.is_empty() {
            return Err(HopacError::Config("families, dims and sample_sizes must be non-empty".into()));
        }
        if let Some(f) = self.families.iter().find(|f| **f == Family::Gumbel) {
            return Err(HopacError::Config(format!("family {f} has no free OP parameter")));
        }
        if let Some(d) = self.dims.iter().find(|d| **d < 3) {
            return Err(HopacError::Config(format!("dimension {d} < 3")));
        }
        if let Some(n) = self.sample_sizes.iter().find(|n| **n < 10) {
            return Err(HopacError::Config(format!("sample size {n} < 10")));
        }
        if self.retry_cap == 0 {
            return Err(HopacError::Config("retry_cap must be >= 1".into()));
        }
        Ok(())
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: StudyConfig = serde_json::from_reader(std::fs::File::open(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One estimator run on one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureRow {
    pub family: Family,
    pub d: usize,
    pub n: usize,
    pub estimator: Estimator,
    pub rep: usize,
    /// Empty on success, otherwise the error message.
    pub error: String,
    pub cdf_distance: Option<f64>,
    pub tau_distance: Option<f64>,
    pub lambda_u_distance: Option<f64>,
    pub true_param_distance: Option<f64>,
    pub true_tau_distance: Option<f64>,
    pub true_lambda_u_distance: Option<f64>,
}

/// Structure-recovery counts of one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub family: Family,
    pub d: usize,
    pub n: usize,
    pub rep: usize,
    /// Samples drawn until the structure was recovered (or the cap hit).
    pub tries: usize,
    pub recovered: bool,
    /// Sum of the trivariate agreement ratios over all tries.
    pub trivariate_sum: f64,
}

/// Recovery percentages of one `(family, d, n)` cell: `100 N / m` and
/// `100 r / m` where `m` counts all samples drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverySummary {
    pub family: Family,
    pub d: usize,
    pub n: usize,
    pub recovered: usize,
    pub tries: usize,
    pub exact_ratio: f64,
    pub trivariate_ratio: f64,
}

/// Mean and standard error of one measure over repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSummary {
    pub family: Family,
    pub d: usize,
    pub n: usize,
    pub estimator: Estimator,
    pub measure: String,
    pub count: usize,
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StudyResults {
    pub measures: Vec<MeasureRow>,
    pub recovery: Vec<RecoveryRow>,
}

fn family_key(f: Family) -> u64 {
    Family::ALL.iter().position(|g| *g == f).unwrap() as u64
}

fn cell_stream(seed: u64, family: Family, d: usize, rep: usize) -> RngStream {
    RngStream::new(seed, 0).substream(family_key(family)).substream(d as u64).substream(rep as u64)
}

/// Draws samples of size `n` until the estimated structure equals the model's.
/// Returns the last pseudo-sample drawn and the recovery counts.
fn matched_sample(
    model: &HacTree,
    n: usize,
    cap: usize,
    stream: &RngStream,
) -> Result<(crate::data::PseudoSample, usize, bool, f64)> {
    let mut tri = 0.0;
    let mut last = None;
    for t in 0..cap {
        let x = sample_hopac(model, n, &stream.substream(t as u64))?;
        let u = pseudo_observations(&x)?;
        let est = estimate_structure(&kendall_matrix(&u))?;
        let m = structure_match_bare(model, &est.structure)?;
        let exact = m.exact;
        tri += m.trivariate_ratio;
        last = Some(u);
        if exact {
            return Ok((last.unwrap(), t + 1, true, tri));
        }
    }
    Ok((last.unwrap(), cap, false, tri))
}

fn run_cell(cfg: &StudyConfig, family: Family, d: usize, rep: usize) -> (Vec<MeasureRow>, Vec<RecoveryRow>) {
    let stream = cell_stream(cfg.seed, family, d, rep);
    let mut measures = Vec::new();
    let mut recovery = Vec::new();
    let failed = |n: usize, e: &str| -> Vec<MeasureRow> {
        cfg.estimators
            .iter()
            .map(|&estimator| MeasureRow {
                family,
                d,
                n,
                estimator,
                rep,
                error: e.to_string(),
                cdf_distance: None,
                tau_distance: None,
                lambda_u_distance: None,
                true_param_distance: None,
                true_tau_distance: None,
                true_lambda_u_distance: None,
            })
            .collect()
    };
    let model = match random_hopac(family, d, &mut stream.substream(0).rng()) {
        Ok(m) => m,
        Err(e) => {
            for &n in &cfg.sample_sizes {
                measures.extend(failed(n, &e.to_string()));
            }
            return (measures, recovery);
        }
    };
    for &n in &cfg.sample_sizes {
        let s = stream.substream(1).substream(n as u64);
        let cap = if cfg.match_structure { cfg.retry_cap } else { 1 };
        let (u, tries, recovered, tri) = match matched_sample(&model, n, cap, &s) {
            Ok(r) => r,
            Err(e) => {
                measures.extend(failed(n, &e.to_string()));
                continue;
            }
        };
        recovery.push(RecoveryRow { family, d, n, rep, tries, recovered, trivariate_sum: tri });
        for &estimator in &cfg.estimators {
            let mut row = MeasureRow {
                family,
                d,
                n,
                estimator,
                rep,
                error: String::new(),
                cdf_distance: None,
                tau_distance: None,
                lambda_u_distance: None,
                true_param_distance: None,
                true_tau_distance: None,
                true_lambda_u_distance: None,
            };
            match fit(&u, family, estimator, &cfg.estimator_config).and_then(|r| Ok((sample_vs_estimate(&u, &r)?, r))) {
                Ok((m, r)) => {
                    row.cdf_distance = Some(m.cdf_distance);
                    row.tau_distance = Some(m.tau_distance);
                    row.lambda_u_distance = Some(m.lambda_u_distance);
                    if matches!(estimator, Estimator::TdMl | Estimator::TdSn | Estimator::BuMl) {
                        if let Ok(t) = true_vs_estimate(&model, &r) {
                            row.true_param_distance = Some(t.param_distance);
                            row.true_tau_distance = Some(t.tau_distance);
                            row.true_lambda_u_distance = Some(t.lambda_u_distance);
                        }
                    }
                }
                Err(e) => row.error = e.to_string(),
            }
            measures.push(row);
        }
    }
    (measures, recovery)
}

/// Number of worker threads: `jobs` if given, else `HOPAC_JOBS`, else 1.
pub fn resolve_jobs(jobs: Option<usize>) -> usize {
    jobs.or_else(|| std::env::var("HOPAC_JOBS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(1)
        .max(1)
}

/// Runs `task(i)` for `i` in `0..count` on `jobs` threads and returns the
/// results in index order.
pub fn parallel_map<T: Send>(count: usize, jobs: usize, task: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<Option<T>>> = Mutex::new((0..count).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, count.max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let r = task(i);
                out.lock().unwrap()[i] = Some(r);
            });
        }
    });
    out.into_inner().unwrap().into_iter().map(Option::unwrap).collect()
}

/// Runs the study. Cells `(family, d, repetition)` are independent and use
/// their own random streams, so the result does not depend on `jobs`.
pub fn run_study(cfg: &StudyConfig, jobs: usize) -> Result<StudyResults> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &f in &cfg.families {
        for &d in &cfg.dims {
            for rep in 0..cfg.repetitions {
                cells.push((f, d, rep));
            }
        }
    }
    let parts = parallel_map(cells.len(), jobs, |i| {
        let (f, d, rep) = cells[i];
        run_cell(cfg, f, d, rep)
    });
    let mut res = StudyResults::default();
    for (m, r) in parts {
        res.measures.extend(m);
        res.recovery.extend(r);
    }
    res.measures.sort_by(|a, b| {
        (family_key(a.family), a.d, a.n, a.estimator, a.rep).cmp(&(family_key(b.family), b.d, b.n, b.estimator, b.rep))
    });
    res.recovery
        .sort_by(|a, b| (family_key(a.family), a.d, a.n, a.rep).cmp(&(family_key(b.family), b.d, b.n, b.rep)));
    Ok(res)
}

impl StudyResults {
    pub fn recovery_summary(&self) -> Vec<RecoverySummary> {
        let mut cells: BTreeMap<(u64, usize, usize), (Family, usize, usize, f64)> = BTreeMap::new();
        for r in &self.recovery {
            let e = cells.entry((family_key(r.family), r.d, r.n)).or_insert((r.family, 0, 0, 0.0));
            e.1 += r.recovered as usize;
            e.2 += r.tries;
            e.3 += r.trivariate_sum;
        }
        cells
            .into_iter()
            .map(|((_, d, n), (family, rec, tries, tri))| RecoverySummary {
                family,
                d,
                n,
                recovered: rec,
                tries,
                exact_ratio: 100.0 * rec as f64 / tries as f64,
                trivariate_ratio: 100.0 * tri / tries as f64,
            })
            .collect()
    }

    pub fn measure_summary(&self) -> Vec<MeasureSummary> {
        type Key = (u64, usize, usize, Estimator, usize);
        const NAMES: [&str; 6] = [
            "cdf_distance",
            "tau_distance",
            "lambda_u_distance",
            "true_param_distance",
            "true_tau_distance",
            "true_lambda_u_distance",
        ];
        let mut cells: BTreeMap<Key, (Family, Vec<f64>)> = BTreeMap::new();
        for r in &self.measures {
            let vals = [
                r.cdf_distance,
                r.tau_distance,
                r.lambda_u_distance,
                r.true_param_distance,
                r.true_tau_distance,
                r.true_lambda_u_distance,
            ];
            for (m, v) in vals.iter().enumerate() {
                if let Some(v) = v {
                    cells
                        .entry((family_key(r.family), r.d, r.n, r.estimator, m))
                        .or_insert((r.family, Vec::new()))
                        .1
                        .push(*v);
                }
            }
        }
        cells
            .into_iter()
            .map(|((_, d, n, estimator, m), (family, v))| {
                let c = v.len() as f64;
                let mean = v.iter().sum::<f64>() / c;
                let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (c - 1.0) } else { 0.0 };
                MeasureSummary {
                    family,
                    d,
                    n,
                    estimator,
                    measure: NAMES[m].to_string(),
                    count: v.len(),
                    mean,
                    se: (var / c).sqrt(),
                }
            })
            .collect()
    }

    /// Writes `measures.csv`, `recovery.csv`, `summary.csv` and
    /// `recovery_summary.csv` into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_rows(dir.join("measures.csv"), &self.measures)?;
        write_rows(dir.join("recovery.csv"), &self.recovery)?;
        write_rows(dir.join("summary.csv"), &self.measure_summary())?;
        write_rows(dir.join("recovery_summary.csv"), &self.recovery_summary())?;
        Ok(())
    }
}

/// Serializes `rows` as a headed CSV file.
pub fn write_rows<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Serializes `value` as pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}
