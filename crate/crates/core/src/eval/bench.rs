//! Monte-Carlo driver and reporting.
//!
//! Trial `t` of sweep point `p` draws everything from the child seed
//! `derive_seed(master, [p, t])`: the source layout from substream 1, the
//! snapshots from `derive_seed(child, [0])`, and the DE runs of method `i`
//! (index in [`Method::ALL`]) from `derive_seed(child, [1 + i])`. Every
//! method therefore sees the same data, and results do not depend on the
//! order in which trials are scheduled.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{write_json, BenchmarkConfig, SourceDraw, Sweep};
use super::metrics::{match_and_rmse, to_cartesian};
use crate::channel::{simulate_snapshots, Scenario, SourceSpec};
use crate::error::{Error, Result};
use crate::geometry::{ArrayResponse, SourceLocation};
use crate::localize::{music_localize, neef_de, nemo_de, GridSize, LocalizationResult, Method, SearchDomain};
use crate::objectives::PenaltyConfig;
use crate::rng::{derive_seed, stream_rng};

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// One CSV row: one true source of one method in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub sweep: String,
    pub trial: usize,
    pub method: String,
    pub k: usize,
    pub src: usize,
    pub phi_true_deg: f64,
    pub psi_true_deg: Option<f64>,
    pub r_true_m: f64,
    pub phi_est_deg: Option<f64>,
    pub psi_est_deg: Option<f64>,
    pub r_est_m: Option<f64>,
    pub err_m: Option<f64>,
    /// Pooled over the matched sources of this trial.
    pub rmse_m: Option<f64>,
    pub runtime_s: Option<f64>,
    pub flags: String,
}

/// Aggregate of one (sweep value, method) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryPoint {
    pub sweep: String,
    pub method: String,
    pub trials: usize,
    pub median_rmse_m: Option<f64>,
    pub mean_rmse_m: Option<f64>,
    pub median_runtime_s: Option<f64>,
    pub mean_runtime_s: Option<f64>,
    /// Unmatched true sources over all true sources.
    pub miss_rate: f64,
    /// Trials whose estimator returned an error.
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_axis: Option<String>,
    pub points: Vec<SummaryPoint>,
}

impl Summary {
    pub fn point(&self, sweep: &str, method: Method) -> Option<&SummaryPoint> {
        self.points.iter().find(|p| p.sweep == sweep && p.method == method.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOutput {
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

struct Point {
    label: String,
    k: usize,
    snr_db: f64,
    deviation_db: f64,
    grid: GridSize,
}

fn points(cfg: &BenchmarkConfig) -> Result<Vec<Point>> {
    let base_grid: GridSize = cfg.music_grid.parse()?;
    let s = &cfg.sources;
    (0..cfg.sweep.len())
        .map(|i| {
            let mut p = Point {
                label: cfg.sweep.label(i),
                k: s.count,
                snr_db: s.snr_db,
                deviation_db: s.snr_deviation_db,
                grid: base_grid,
            };
            match &cfg.sweep {
                Sweep::Snr(v) => p.snr_db = v[i],
                Sweep::K(v) => p.k = v[i],
                Sweep::SnrDeviation(v) => p.deviation_db = v[i],
                Sweep::GridSize(v) => p.grid = v[i].parse()?,
            }
            Ok(p)
        })
        .collect()
}

fn draw_sources(
    domain: &SearchDomain,
    k: usize,
    min_sep: Option<f64>,
    rng: &mut impl Rng,
) -> Result<Vec<SourceLocation>> {
    let metric = PenaltyConfig::default();
    for _ in 0..10_000 {
        let locs: Vec<SourceLocation> = (0..k)
            .map(|_| SourceLocation {
                phi: rng.random_range(domain.phi.0..=domain.phi.1),
                psi: domain.psi.map(|(lo, hi)| rng.random_range(lo..=hi)),
                range: rng.random_range(domain.range.0..=domain.range.1),
            })
            .collect();
        let ok = match min_sep {
            None => true,
            Some(d) => {
                locs.iter().enumerate().all(|(i, a)| locs[..i].iter().all(|b| metric.location_distance(a, b) >= d))
            }
        };
        if ok {
            return Ok(locs);
        }
    }
    Err(Error::InvalidConfig(format!("could not place {k} sources with the requested separation")))
}

fn run_method(
    method: Method,
    cfg: &BenchmarkConfig,
    snap: &crate::channel::SnapshotMatrix,
    k: usize,
    domain: &SearchDomain,
    grid: GridSize,
    seed: u64,
) -> Result<LocalizationResult> {
    match method {
        Method::Nemo => nemo_de(snap, k, domain, &cfg.nemo.config(seed)),
        Method::Neef => neef_de(snap, k, domain, &cfg.neef.config(k, seed)),
        Method::Music => {
            let metric = PenaltyConfig { delta_min: cfg.nemo.delta_min, ..PenaltyConfig::default() };
            music_localize(snap, k, domain, grid, &metric)
        }
    }
}

fn records_for(
    point: &Point,
    trial: usize,
    method: Method,
    truth: &[SourceLocation],
    response: &ArrayResponse,
    outcome: Result<LocalizationResult>,
    timing: bool,
) -> Result<Vec<TrialRecord>> {
    let geometry = response.geometry();
    let (estimates, runtime, flags) = match &outcome {
        Ok(r) => (r.estimates.clone(), Some(r.runtime_s), r.flags()),
        Err(_) => (Vec::new(), None, "error".to_string()),
    };
    let tp: Vec<Vec<f64>> = truth.iter().map(|l| to_cartesian(l, geometry)).collect();
    let ep: Vec<Vec<f64>> = estimates.iter().map(|l| to_cartesian(l, geometry)).collect();
    let m = match_and_rmse(&tp, &ep)?;
    Ok(truth
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let est = m.assignment[i].map(|j| estimates[j]);
            TrialRecord {
                sweep: point.label.clone(),
                trial,
                method: method.name().into(),
                k: truth.len(),
                src: i,
                phi_true_deg: t.phi.to_degrees(),
                psi_true_deg: t.psi.map(f64::to_degrees),
                r_true_m: t.range,
                phi_est_deg: est.map(|e| e.phi.to_degrees()),
                psi_est_deg: est.and_then(|e| e.psi.map(f64::to_degrees)),
                r_est_m: est.map(|e| e.range),
                err_m: m.errors[i],
                rmse_m: m.rmse,
                runtime_s: if timing { runtime } else { None },
                flags: flags.clone(),
            }
        })
        .collect())
}

fn run_trial(
    cfg: &BenchmarkConfig,
    methods: &[Method],
    pi: usize,
    point: &Point,
    trial: usize,
) -> Result<Vec<TrialRecord>> {
    let response = cfg.setup.response()?;
    let search = SearchDomain::for_response(&response)?;
    let child = derive_seed(cfg.seed, &[pi as u64, trial as u64]);
    let truth =
        draw_sources(&cfg.sources.domain(&search), point.k, cfg.sources.min_separation, &mut stream_rng(child, 1))?;
    let sources = truth
        .iter()
        .zip(SourceDraw::snrs(point.snr_db, point.deviation_db, point.k))
        .map(|(&location, snr_db)| SourceSpec { location, snr_db })
        .collect();
    let mut scenario = Scenario::new(
        response.clone(),
        sources,
        cfg.setup.snapshots,
        cfg.setup.channel.into(),
        derive_seed(child, &[0]),
    );
    scenario.noise_variance = cfg.setup.noise_variance;
    let snap = simulate_snapshots(&scenario)?;

    let mut rows = Vec::new();
    for &method in methods {
        let idx = Method::ALL.iter().position(|&m| m == method).unwrap_or(0) as u64;
        let outcome = run_method(method, cfg, &snap, point.k, &search, point.grid, derive_seed(child, &[1 + idx]));
        rows.extend(records_for(point, trial, method, &truth, &response, outcome, cfg.timing)?);
    }
    Ok(rows)
}

/// Runs every (sweep point, trial, method) combination in memory.
pub fn run_trials(cfg: &BenchmarkConfig) -> Result<BenchmarkOutput> {
    cfg.validate()?;
    let methods = cfg.methods()?;
    let pts = points(cfg)?;
    let jobs: Vec<(usize, usize)> = (0..pts.len()).flat_map(|p| (0..cfg.trials).map(move |t| (p, t))).collect();
    let run = |&(p, t): &(usize, usize)| run_trial(cfg, &methods, p, &pts[p], t);
    let chunks: Vec<Vec<TrialRecord>> = if cfg.parallel {
        jobs.par_iter().map(run).collect::<Result<_>>()?
    } else {
        jobs.iter().map(run).collect::<Result<_>>()?
    };
    let records: Vec<TrialRecord> = chunks.into_iter().flatten().collect();
    let mut summary = summarize(&records);
    summary.sweep_axis = Some(cfg.sweep.name().into());
    Ok(BenchmarkOutput { records, summary })
}

/// Runs the sweep and writes `results.csv` and `summary.json` into `out_dir`.
pub fn run_benchmark(cfg: &BenchmarkConfig, out_dir: &Path) -> Result<BenchmarkOutput> {
    let out = run_trials(cfg)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_records(&out_dir.join(RESULTS_FILE), &out.records)?;
    write_json(&out_dir.join(SUMMARY_FILE), &out.summary)?;
    Ok(out)
}

pub fn write_records(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let csv_err = |e| Error::Csv { path: path.into(), source: e };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    let csv_err = |e| Error::Csv { path: path.into(), source: e };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err)
}

type TrialCell = (Option<f64>, Option<f64>, usize, usize, bool);

/// Median/mean RMSE and runtime per (sweep value, method), in order of
/// first appearance.
pub fn summarize(records: &[TrialRecord]) -> Summary {
    // key -> (first index, per-trial (rmse, runtime, misses, k, failed))
    let mut cells: BTreeMap<(String, String), (usize, BTreeMap<usize, TrialCell>)> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let cell = cells.entry((r.sweep.clone(), r.method.clone())).or_insert((i, BTreeMap::new()));
        let trial = cell.1.entry(r.trial).or_insert((r.rmse_m, r.runtime_s, 0, r.k, r.flags.contains("error")));
        if r.err_m.is_none() {
            trial.2 += 1;
        }
    }
    let mut ordered: Vec<_> = cells.into_iter().collect();
    ordered.sort_by_key(|(_, (first, _))| *first);
    let points = ordered
        .into_iter()
        .map(|((sweep, method), (_, trials))| {
            let rmse: Vec<f64> = trials.values().filter_map(|t| t.0).collect();
            let runtime: Vec<f64> = trials.values().filter_map(|t| t.1).collect();
            let misses: usize = trials.values().map(|t| t.2).sum();
            let total: usize = trials.values().map(|t| t.3).sum();
            SummaryPoint {
                sweep,
                method,
                trials: trials.len(),
                median_rmse_m: median(&rmse),
                mean_rmse_m: mean(&rmse),
                median_runtime_s: median(&runtime),
                mean_runtime_s: mean(&runtime),
                miss_rate: if total > 0 { misses as f64 / total as f64 } else { 0.0 },
                failed: trials.values().filter(|t| t.4).count(),
            }
        })
        .collect();
    Summary { sweep_axis: None, points }
}

/// Re-aggregates a results directory (or CSV file) into a summary.
pub fn report(input: &Path) -> Result<Summary> {
    let csv = if input.is_dir() { input.join(RESULTS_FILE) } else { input.to_path_buf() };
    Ok(summarize(&read_records(&csv)?))
}
