//! Portfolio Value-at-Risk with GARCH(1,1)-t margins and copula dependence,
//! forecast in a rolling window and backtested by violation ratios.

pub mod garch;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::SampleMatrix;
use crate::error::{HopacError, Result};
use crate::estimation::{fit_opac, fit_topdown_warm, pseudo_observations, EstimatorConfig, Method};
use crate::generator::Family;
use crate::optim::Interval;
use crate::rng::RngStream;
use crate::sampling::sample_hopac;
use crate::simstudy::{parallel_map, write_json, write_rows};
use crate::tree::HacTree;

pub use garch::{fit_garch, standard_errors, GarchFit, GarchParams};

/// Window widths accepted by the backtest.
pub const WINDOWS: [usize; 3] = [126, 252, 504];

/// Simulated scenarios per forecast.
pub const DEFAULT_SIMULATIONS: usize = 1000;

/// Dependence model of the standardized residuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopulaModel {
    Independence,
    /// Exchangeable one-parameter Archimedean copula.
    Ac,
    Opac,
    Hac,
    Hopac,
}

impl CopulaModel {
    pub const ALL: [CopulaModel; 5] =
        [CopulaModel::Independence, CopulaModel::Ac, CopulaModel::Opac, CopulaModel::Hac, CopulaModel::Hopac];

    pub fn label(self) -> &'static str {
        match self {
            CopulaModel::Independence => "independence",
            CopulaModel::Ac => "ac",
            CopulaModel::Opac => "opac",
            CopulaModel::Hac => "hac",
            CopulaModel::Hopac => "hopac",
        }
    }
}

impl fmt::Display for CopulaModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CopulaModel {
    type Err = HopacError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        CopulaModel::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| HopacError::Config(format!("unknown copula model '{s}'")))
    }
}

/// `sum_j b_j P_j (1 - exp(R_j))`: the loss over one day of a portfolio
/// holding fractions `weights` of the assets priced at `prices`.
pub fn portfolio_loss(prices: &[f64], returns_next: &[f64], weights: &[f64]) -> Result<f64> {
    check_weights(weights, prices.len())?;
    if returns_next.len() != prices.len() {
        return Err(HopacError::Data("prices and returns differ in length".into()));
    }
    Ok(prices.iter().zip(returns_next).zip(weights).map(|((p, r), b)| -b * p * r.exp_m1()).sum())
}

fn check_weights(weights: &[f64], d: usize) -> Result<()> {
    if weights.len() != d {
        return Err(HopacError::Data(format!("{} weights for {d} assets", weights.len())));
    }
    let s: f64 = weights.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(HopacError::Data(format!("weights sum to {s}, not 1")));
    }
    Ok(())
}

pub fn equal_weights(d: usize) -> Vec<f64> {
    vec![1.0 / d as f64; d]
}

/// Sample quantile with linear interpolation between order statistics
/// (type 7).
pub fn quantile_type7(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// `1 / (t_e - t_s + 1) * #{t in [t_s, t_e] : L_t > VaR_t}` over 0-based
/// indices into the aligned series.
pub fn violation_ratio(losses: &[f64], var: &[f64], t_s: usize, t_e: usize) -> Result<f64> {
    if losses.len() != var.len() {
        return Err(HopacError::Data(format!("{} losses vs {} VaR values", losses.len(), var.len())));
    }
    if t_s > t_e || t_e >= losses.len() {
        return Err(HopacError::Data(format!("invalid period [{t_s}, {t_e}] for {} days", losses.len())));
    }
    let hits = (t_s..=t_e).filter(|&t| losses[t] > var[t]).count();
    Ok(hits as f64 / (t_e - t_s + 1) as f64)
}

/// Fits from one day, reused as starting points on the next.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmState {
    pub garch: Vec<GarchParams>,
    pub tree: Option<HacTree>,
}

/// What to forecast with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: CopulaModel,
    pub family: Family,
    pub estimator: EstimatorConfig,
}

impl ModelSpec {
    pub fn new(model: CopulaModel, family: Family) -> Self {
        ModelSpec { model, family, estimator: EstimatorConfig::default() }
    }
}

/// Copula fitted to pseudo-observations; `None` for independence.
pub fn fit_copula(
    u: &SampleMatrix,
    spec: &ModelSpec,
    warm: Option<&HacTree>,
) -> Result<Option<HacTree>> {
    let unit = EstimatorConfig { beta_range: Interval::point(1.0), ..spec.estimator };
    let report = match spec.model {
        CopulaModel::Independence => return Ok(None),
        CopulaModel::Ac => fit_opac(u, spec.family, &unit)?,
        CopulaModel::Opac => fit_opac(u, spec.family, &spec.estimator)?,
        CopulaModel::Hac => fit_topdown_warm(u, spec.family, Method::Ml, &unit, warm)?,
        CopulaModel::Hopac => fit_topdown_warm(u, spec.family, Method::Ml, &spec.estimator, warm)?,
    };
    Ok(Some(report.tree))
}

/// Copula sample of size `n`; independent uniforms when `tree` is `None`.
pub fn sample_copula(tree: Option<&HacTree>, d: usize, n: usize, stream: &RngStream) -> Result<SampleMatrix> {
    match tree {
        Some(t) => sample_hopac(t, n, stream),
        None => {
            let mut rng = stream.rng();
            let data = (0..n * d).map(|_| rng.random::<f64>().clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)).collect();
            SampleMatrix::from_vec(n, d, data)
        }
    }
}

/// One day's forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    /// VaR per requested level, in the order given.
    pub var: Vec<f64>,
    pub state: WarmState,
}

/// Per-asset GARCH fits of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct Margins {
    pub params: Vec<GarchParams>,
    /// Pseudo-observations of the standardized residuals.
    pub pseudo: SampleMatrix,
    /// One-step-ahead conditional standard deviations.
    pub sigma_next: Vec<f64>,
}

/// Fits GARCH(1,1)-t to every column of `window` (warm-started from `warm`).
pub fn fit_margins(window: &SampleMatrix, warm: Option<&[GarchParams]>) -> Result<Margins> {
    let d = window.d();
    let mut params = Vec::with_capacity(d);
    let mut resid = Vec::with_capacity(d);
    let mut sigma_next = Vec::with_capacity(d);
    for j in 0..d {
        let r = window.column(j);
        let fit = fit_garch(&r, warm.and_then(|w| w.get(j)))
            .map_err(|e| HopacError::Data(format!("asset {}: {e}", j + 1)))?;
        if fit.fallback {
            log::warn!("asset {}: GARCH fit fell back to constant variance", j + 1);
        }
        resid.push(fit.params.residuals(&r));
        sigma_next.push(fit.params.forecast_variance(&r).sqrt());
        params.push(fit.params);
    }
    let z = SampleMatrix::from_columns(&resid)?;
    Ok(Margins { params, pseudo: pseudo_observations(&z)?, sigma_next })
}

/// VaR per level from fitted margins: a copula on their residuals and
/// `n_sim` simulated next-day returns. Also returns the fitted copula.
#[allow(clippy::too_many_arguments)]
pub fn forecast_from_margins(
    margins: &Margins,
    prices: &[f64],
    weights: &[f64],
    spec: &ModelSpec,
    alphas: &[f64],
    n_sim: usize,
    stream: &RngStream,
    warm: Option<&HacTree>,
) -> Result<(Vec<f64>, Option<HacTree>)> {
    let d = margins.params.len();
    if prices.len() != d {
        return Err(HopacError::Data(format!("{} prices for {d} assets", prices.len())));
    }
    check_weights(weights, d)?;
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(HopacError::Config(format!("level {a} outside (0, 1)")));
    }
    let tree = fit_copula(&margins.pseudo, spec, warm)?;
    let sim = sample_copula(tree.as_ref(), d, n_sim, stream)?;
    let mut losses = Vec::with_capacity(n_sim);
    let mut r = vec![0.0; d];
    for i in 0..n_sim {
        for j in 0..d {
            let p = &margins.params[j];
            r[j] = p.mu + margins.sigma_next[j] * garch::std_t_quantile(p.nu, sim.get(i, j));
        }
        losses.push(portfolio_loss(prices, &r, weights)?);
    }
    losses.sort_by(f64::total_cmp);
    Ok((alphas.iter().map(|&a| quantile_sorted(&losses, a)).collect(), tree))
}

/// VaR of the next day's portfolio loss: GARCH fits per asset, a copula on
/// the pseudo-observations of the standardized residuals, `n_sim` simulated
/// joint returns and type-7 quantiles of the simulated losses.
#[allow(clippy::too_many_arguments)]
pub fn var_forecast(
    window: &SampleMatrix,
    prices: &[f64],
    weights: &[f64],
    spec: &ModelSpec,
    alphas: &[f64],
    n_sim: usize,
    stream: &RngStream,
    warm: Option<&WarmState>,
) -> Result<Forecast> {
    if !WINDOWS.contains(&window.n()) {
        return Err(HopacError::Config(format!("window width {} not in {:?}", window.n(), WINDOWS)));
    }
    if prices.len() != window.d() {
        return Err(HopacError::Data(format!("{} prices for {} assets", prices.len(), window.d())));
    }
    let margins = fit_margins(window, warm.map(|w| w.garch.as_slice()))?;
    let (var, tree) = forecast_from_margins(
        &margins,
        prices,
        weights,
        spec,
        alphas,
        n_sim,
        stream,
        warm.and_then(|w| w.tree.as_ref()),
    )?;
    Ok(Forecast { var, state: WarmState { garch: margins.params, tree } })
}

/// Log-returns of a price matrix (`(T + 1) x d` prices give `T x d` returns).
pub fn log_returns(prices: &SampleMatrix) -> Result<SampleMatrix> {
    if prices.n() < 2 {
        return Err(HopacError::Data("need at least two price rows".into()));
    }
    if prices.as_slice().iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(HopacError::Data("prices must be positive and finite".into()));
    }
    let mut out = SampleMatrix::zeros(prices.n() - 1, prices.d());
    for t in 1..prices.n() {
        for j in 0..prices.d() {
            out.set(t - 1, j, (prices.get(t, j) / prices.get(t - 1, j)).ln());
        }
    }
    Ok(out)
}

/// Prices read from CSV: a header `date,<ticker>,...` and one row per day.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    pub dates: Vec<String>,
    pub tickers: Vec<String>,
    pub prices: SampleMatrix,
}

impl PriceTable {
    pub fn read_path(path: impl AsRef<Path>) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let header = rdr.headers()?.clone();
        if header.len() < 2 {
            return Err(HopacError::Data("price file needs a date column and at least one ticker".into()));
        }
        let tickers: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut dates = Vec::new();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            dates.push(rec.get(0).unwrap_or_default().to_string());
            let row = rec
                .iter()
                .skip(1)
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| HopacError::Data(format!("row {}: cannot parse price '{v}'", i + 2)))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        let prices = SampleMatrix::from_rows(&rows)?;
        if prices.d() != tickers.len() {
            return Err(HopacError::Data("rows and header differ in width".into()));
        }
        Ok(PriceTable { dates, tickers, prices })
    }

    pub fn write_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["date".to_string()];
        header.extend(self.tickers.iter().cloned());
        w.write_record(&header)?;
        for (t, date) in self.dates.iter().enumerate() {
            let mut rec = vec![date.clone()];
            rec.extend(self.prices.row(t).iter().map(|p| crate::data::format_f64(*p)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Prices following GARCH(1,1)-t margins joined by `copula` (independent when
/// `None`), starting at 100.
pub fn simulate_market(
    margins: &[GarchParams],
    copula: Option<&HacTree>,
    days: usize,
    stream: &RngStream,
) -> Result<PriceTable> {
    let d = margins.len();
    if let Some(t) = copula {
        if t.d() != d {
            return Err(HopacError::Data(format!("copula has {} leaves for {d} margins", t.d())));
        }
    }
    for m in margins {
        m.validate()?;
    }
    let u = sample_copula(copula, d, days, stream)?;
    let returns: Vec<Vec<f64>> =
        (0..d).map(|j| garch::simulate_from_uniforms(&margins[j], &u.column(j))).collect();
    let mut prices = SampleMatrix::zeros(days + 1, d);
    for j in 0..d {
        let mut p = 100.0;
        prices.set(0, j, p);
        for t in 0..days {
            p *= returns[j][t].exp();
            prices.set(t + 1, j, p);
        }
    }
    Ok(PriceTable {
        dates: (0..=days).map(|t| format!("day{t:05}")).collect(),
        tickers: (1..=d).map(|j| format!("A{j}")).collect(),
        prices,
    })
}

fn default_block() -> usize {
    25
}

fn default_sims() -> usize {
    DEFAULT_SIMULATIONS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub family: Family,
    pub models: Vec<CopulaModel>,
    /// VaR levels, e.g. 0.95 and 0.99.
    pub alphas: Vec<f64>,
    pub window: usize,
    #[serde(default = "default_sims")]
    pub simulations: usize,
    pub seed: u64,
    /// Days per block sharing warm starts; blocks start cold so results do
    /// not depend on how blocks are spread over threads.
    #[serde(default = "default_block")]
    pub block: usize,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

impl BacktestConfig {
    pub fn new(family: Family, models: Vec<CopulaModel>, alphas: Vec<f64>, window: usize, seed: u64) -> Self {
        BacktestConfig {
            family,
            models,
            alphas,
            window,
            simulations: DEFAULT_SIMULATIONS,
            seed,
            block: default_block(),
            weights: None,
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        if !WINDOWS.contains(&self.window) {
            return Err(HopacError::Config(format!("window width {} not in {:?}", self.window, WINDOWS)));
        }
        if self.models.is_empty() || self.alphas.is_empty() {
            return Err(HopacError::Config("need at least one model and one level".into()));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(HopacError::Config(format!("level {a} outside (0, 1)")));
        }
        if self.simulations < 2 || self.block == 0 {
            return Err(HopacError::Config("simulations must be >= 2 and block >= 1".into()));
        }
        if let Some(w) = &self.weights {
            check_weights(w, d)?;
        }
        Ok(())
    }
}

/// Loss and forecasts of one backtest day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    /// 0-based index of the forecast return.
    pub t: usize,
    pub loss: f64,
    /// `var[m][a]` for model `m` and level `a` (config order); NaN on failure.
    pub var: Vec<Vec<f64>>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationSummary {
    pub model: CopulaModel,
    pub alpha: f64,
    pub window: usize,
    pub days: usize,
    pub violations: usize,
    pub ratio: f64,
    /// `|ratio - (1 - alpha)|`.
    pub deviation: f64,
    pub failed_days: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarBacktestReport {
    pub config: BacktestConfig,
    pub days: Vec<DayRecord>,
    pub summary: Vec<ViolationSummary>,
}

/// Rolling-window backtest over every day with a full window before it.
pub fn backtest(prices: &SampleMatrix, cfg: &BacktestConfig, jobs: usize) -> Result<VarBacktestReport> {
    let d = prices.d();
    cfg.validate(d)?;
    let returns = log_returns(prices)?;
    let total = returns.n();
    let w = cfg.window;
    if total <= w {
        return Err(HopacError::Data(format!("{total} returns leave no day after a window of {w}")));
    }
    let weights = cfg.weights.clone().unwrap_or_else(|| equal_weights(d));
    let days: Vec<usize> = (w..total).collect();
    let blocks: Vec<&[usize]> = days.chunks(cfg.block).collect();
    let root = RngStream::new(cfg.seed, 0);
    let per_block = parallel_map(blocks.len(), jobs, |b| -> Result<Vec<DayRecord>> {
        let mut warm_margins: Option<Vec<GarchParams>> = None;
        let mut warm_trees: Vec<Option<HacTree>> = vec![None; cfg.models.len()];
        let mut out = Vec::with_capacity(blocks[b].len());
        for &t in blocks[b] {
            let window = SampleMatrix::from_rows(&(t - w..t).map(|i| returns.row(i).to_vec()).collect::<Vec<_>>())?;
            let p = prices.row(t);
            let loss = portfolio_loss(p, returns.row(t), &weights)?;
            let mut var = Vec::with_capacity(cfg.models.len());
            let mut errors = Vec::new();
            let margins = match fit_margins(&window, warm_margins.as_deref()) {
                Ok(m) => m,
                Err(e) => {
                    errors.push(format!("margins: {e}"));
                    warm_margins = None;
                    let var = vec![vec![f64::NAN; cfg.alphas.len()]; cfg.models.len()];
                    out.push(DayRecord { t, loss, var, errors });
                    continue;
                }
            };
            for (m, &model) in cfg.models.iter().enumerate() {
                let spec = ModelSpec::new(model, cfg.family);
                let stream = root.substream(t as u64).substream(m as u64);
                let r = forecast_from_margins(
                    &margins,
                    p,
                    &weights,
                    &spec,
                    &cfg.alphas,
                    cfg.simulations,
                    &stream,
                    warm_trees[m].as_ref(),
                );
                match r {
                    Ok((v, tree)) => {
                        var.push(v);
                        warm_trees[m] = tree;
                    }
                    Err(e) => {
                        errors.push(format!("{model}: {e}"));
                        var.push(vec![f64::NAN; cfg.alphas.len()]);
                        warm_trees[m] = None;
                    }
                }
            }
            warm_margins = Some(margins.params);
            out.push(DayRecord { t, loss, var, errors });
        }
        Ok(out)
    });
    let mut records = Vec::with_capacity(days.len());
    for b in per_block {
        records.extend(b?);
    }
    let summary = summarize(&records, cfg);
    Ok(VarBacktestReport { config: cfg.clone(), days: records, summary })
}

fn summarize(records: &[DayRecord], cfg: &BacktestConfig) -> Vec<ViolationSummary> {
    let mut out = Vec::new();
    for (m, &model) in cfg.models.iter().enumerate() {
        for (a, &alpha) in cfg.alphas.iter().enumerate() {
            let losses: Vec<f64> = records.iter().map(|r| r.loss).collect();
            let var: Vec<f64> = records.iter().map(|r| r.var[m][a]).collect();
            let failed = var.iter().filter(|v| v.is_nan()).count();
            // failed days count as non-violations
            let ratio = violation_ratio(&losses, &var, 0, records.len() - 1).unwrap_or(f64::NAN);
            let violations = losses.iter().zip(&var).filter(|(l, v)| l > v).count();
            out.push(ViolationSummary {
                model,
                alpha,
                window: cfg.window,
                days: records.len(),
                violations,
                ratio,
                deviation: (ratio - (1.0 - alpha)).abs(),
                failed_days: failed,
            });
        }
    }
    out
}

#[derive(Serialize)]
struct VarRow {
    t: usize,
    loss: f64,
    var: f64,
    violation: bool,
}

impl VarBacktestReport {
    /// Writes one CSV per (model, level) named `var_<model>_<alpha>_w<window>.csv`
    /// and `summary.json`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (m, model) in self.config.models.iter().enumerate() {
            for (a, alpha) in self.config.alphas.iter().enumerate() {
                let rows: Vec<VarRow> = self
                    .days
                    .iter()
                    .map(|r| VarRow { t: r.t, loss: r.loss, var: r.var[m][a], violation: r.loss > r.var[m][a] })
                    .collect();
                write_rows(dir.join(format!("var_{model}_{alpha}_w{}.csv", self.config.window)), &rows)?;
            }
        }
        write_json(dir.join("summary.json"), &self.summary)
    }

    pub fn summary_for(&self, model: CopulaModel, alpha: f64) -> Option<&ViolationSummary> {
        self.summary.iter().find(|s| s.model == model && s.alpha == alpha)
    }
}
