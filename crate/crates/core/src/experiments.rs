//! Evaluation metrics and the benchmark harness over synthetic settings.
//!
//! All metrics are unnormalized sums over the relevant sample set. Rows are
//! emitted in (setting, seed, method) order; apart from `runtime_ms` they
//! are reproducible byte for byte.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::approx::sorting_method;
use crate::dataset::{relu_objective, Dataset, Params};
use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};
use crate::heuristics::{gradient_descent, iterative_heuristic, sgd, GdConfig};
use crate::numeric::{norm2, relu, sum_terms};
use crate::solver::SolverConfig;
use crate::statgen::{generate_instance, StatModelSpec};

/// `Σ_i (max{0, x_iᵀβ̂ + β̂₀} − max{0, x_iᵀβ* + β₀*})²` over `d`.
pub fn prediction_error(d: &Dataset, est: &Params, truth: &Params) -> Result<f64> {
    d.check_params(est)?;
    d.check_params(truth)?;
    Ok(sum_terms(
        d.n(),
        (0..d.n()).map(|i| {
            let r = relu(d.linear(i, est)) - relu(d.linear(i, truth));
            r * r
        }),
    ))
}

/// `‖β̂ − β*‖₂`. The intercept difference is included only when the truth
/// has a nonzero intercept.
pub fn recovery_error(est: &Params, truth: &Params) -> Result<f64> {
    if est.dim() != truth.dim() {
        return Err(Error::DimensionMismatch { expected: truth.dim(), got: est.dim() });
    }
    let mut diff: Vec<f64> = est.beta.iter().zip(&truth.beta).map(|(a, b)| a - b).collect();
    if truth.beta0 != 0.0 {
        diff.push(est.beta0 - truth.beta0);
    }
    Ok(norm2(&diff))
}

/// Training objective evaluated on held-out data.
pub fn generalization_error(test: &Dataset, est: &Params) -> Result<f64> {
    relu_objective(test, est)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "sorting")]
    Sorting,
    #[serde(rename = "sorting+iter")]
    SortingIter,
    #[serde(rename = "gd")]
    Gd,
    #[serde(rename = "sorting+gd")]
    SortingGd,
    #[serde(rename = "sgd")]
    Sgd,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Sorting, Method::SortingIter, Method::Gd, Method::SortingGd, Method::Sgd];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sorting => "sorting",
            Method::SortingIter => "sorting+iter",
            Method::Gd => "gd",
            Method::SortingGd => "sorting+gd",
            Method::Sgd => "sgd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

/// Method parameters shared by every run of a benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodConfig {
    /// Number of splits for the sorting method.
    pub splits: usize,
    /// Outer iterations of the iterative heuristic.
    pub iter_rounds: usize,
    pub gd: GdConfig,
    pub solver: SolverConfig,
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig {
            splits: 10,
            iter_rounds: 20,
            gd: GdConfig::default(),
            solver: SolverConfig::default().with_execution(Execution::Sequential),
        }
    }
}

/// Per-run SGD seed, decorrelated from the data seed.
pub fn sgd_seed(seed: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0x5DEE_CE66
}

/// Fits `method` on `d`. `seed` only matters for SGD.
pub fn run_method(d: &Dataset, method: Method, cfg: &MethodConfig, seed: u64) -> Result<Params> {
    let origin = Params::zeros(d.p());
    let sorted = || sorting_method(d, cfg.splits, &cfg.solver).map(|r| r.best.params);
    Ok(match method {
        Method::Sorting => sorted()?,
        Method::SortingIter => iterative_heuristic(d, &sorted()?, cfg.iter_rounds, &cfg.solver)?.params,
        Method::Gd => gradient_descent(d, &cfg.gd, &origin)?.params,
        Method::SortingGd => gradient_descent(d, &cfg.gd, &sorted()?)?.params,
        Method::Sgd => sgd(d, &cfg.gd, &origin, sgd_seed(seed))?.params,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub p: usize,
    pub n: usize,
    pub sparsity: f64,
    pub db: f64,
    pub rho: f64,
    pub seed: u64,
    pub method: Method,
    pub pe: f64,
    pub obj: f64,
    pub re: f64,
    pub ge: f64,
    pub runtime_ms: f64,
}

/// A benchmark: settings, seeds per setting, methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub settings: Vec<StatModelSpec>,
    /// Seeds `seed, seed + 1, …` are run for each setting.
    pub repetitions: usize,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub params: MethodConfig,
}

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

/// Runs every method on every (setting, seed); jobs fan out per `exec`.
pub fn run_benchmark(cfg: &BenchConfig, exec: Execution) -> Result<Vec<MetricRow>> {
    if cfg.repetitions == 0 {
        return Err(Error::InvalidArgument("repetitions must be at least 1".into()));
    }
    cfg.params.solver.validate()?;
    cfg.params.gd.validate()?;
    let jobs: Vec<StatModelSpec> = cfg
        .settings
        .iter()
        .flat_map(|s| {
            (0..cfg.repetitions as u64).map(move |r| StatModelSpec {
                seed: s.seed.wrapping_add(r),
                ..s.clone()
            })
        })
        .collect();
    let per_job = map_range(exec, jobs.len(), |j| run_instance(&jobs[j], &cfg.methods, &cfg.params));
    let mut rows = Vec::with_capacity(jobs.len() * cfg.methods.len());
    for r in per_job {
        rows.extend(r?);
    }
    Ok(rows)
}

/// One generated instance, every method.
pub fn run_instance(spec: &StatModelSpec, methods: &[Method], cfg: &MethodConfig) -> Result<Vec<MetricRow>> {
    let inst = generate_instance(spec)?;
    let truth = &inst.truth.params;
    methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let est = run_method(&inst.train, method, cfg, spec.seed)?;
            let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            Ok(MetricRow {
                p: spec.p,
                n: spec.n,
                sparsity: spec.sparsity,
                db: spec.db,
                rho: inst.truth.rho,
                seed: spec.seed,
                method,
                pe: prediction_error(&inst.train, &est, truth)?,
                obj: relu_objective(&inst.train, &est)?,
                re: recovery_error(&est, truth)?,
                ge: generalization_error(&inst.test, &est)?,
                runtime_ms,
            })
        })
        .collect()
}

pub fn write_rows<W: Write>(rows: &[MetricRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Per (setting, method) means and sample standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub p: usize,
    pub n: usize,
    pub sparsity: f64,
    pub db: f64,
    pub rho: f64,
    pub method: Method,
    pub count: usize,
    pub mean_pe: f64,
    pub std_pe: f64,
    pub mean_obj: f64,
    pub std_obj: f64,
    pub mean_re: f64,
    pub std_re: f64,
    pub mean_ge: f64,
    pub std_ge: f64,
    pub mean_runtime_ms: f64,
    pub std_runtime_ms: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    let mean = sum_terms(n, v.iter().copied()) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = sum_terms(n, v.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64;
    (mean, var.sqrt())
}

fn same_setting(a: &MetricRow, b: &MetricRow) -> bool {
    a.p == b.p && a.n == b.n && a.sparsity == b.sparsity && a.db == b.db
}

/// Groups rows by setting and method, in first-seen order.
pub fn aggregate(rows: &[MetricRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<&MetricRow> = Vec::new();
    for r in rows {
        if !keys.iter().any(|k| same_setting(k, r) && k.method == r.method) {
            keys.push(r);
        }
    }
    keys.into_iter()
        .map(|k| {
            let group: Vec<&MetricRow> = rows.iter().filter(|r| same_setting(k, r) && r.method == k.method).collect();
            let stat = |f: fn(&MetricRow) -> f64| mean_std(&group.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (mean_pe, std_pe) = stat(|r| r.pe);
            let (mean_obj, std_obj) = stat(|r| r.obj);
            let (mean_re, std_re) = stat(|r| r.re);
            let (mean_ge, std_ge) = stat(|r| r.ge);
            let (mean_runtime_ms, std_runtime_ms) = stat(|r| r.runtime_ms);
            AggregateRow {
                p: k.p,
                n: k.n,
                sparsity: k.sparsity,
                db: k.db,
                rho: k.rho,
                method: k.method,
                count: group.len(),
                mean_pe,
                std_pe,
                mean_obj,
                std_obj,
                mean_re,
                std_re,
                mean_ge,
                std_ge,
                mean_runtime_ms,
                std_runtime_ms,
            }
        })
        .collect()
}

pub fn write_aggregate<W: Write>(rows: &[AggregateRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Fraction of (setting, seed) pairs where `a` reaches an objective no
/// worse than `b` (relative tolerance 1e-9). `None` if no pair has both.
pub fn win_rate(rows: &[MetricRow], a: Method, b: Method) -> Option<f64> {
    let mut wins = 0usize;
    let mut total = 0usize;
    for ra in rows.iter().filter(|r| r.method == a) {
        if let Some(rb) = rows.iter().find(|r| r.method == b && r.seed == ra.seed && same_setting(r, ra)) {
            total += 1;
            if ra.obj <= rb.obj + 1e-9 * (1.0 + rb.obj.abs()) {
                wins += 1;
            }
        }
    }
    (total > 0).then(|| wins as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_dataset, Sample};

    fn spec(db: f64, seed: u64) -> StatModelSpec {
        StatModelSpec {
            p: 3,
            n: 30,
            sparsity: 0.5,
            beta_star_mean: 0.0,
            beta_star_var: 10.0,
            db,
            realizable_rows: true,
            seed,
        }
    }

    #[test]
    fn metric_examples() {
        let d = build_dataset(vec![Sample::new(vec![1.0], 0.5)]).unwrap();
        let truth = Params::new(vec![1.0], 0.0);
        assert_eq!(prediction_error(&d, &truth, &truth).unwrap(), 0.0);
        assert_eq!(prediction_error(&d, &Params::new(vec![2.0], 0.0), &truth).unwrap(), 1.0);
        let t2 = Params::new(vec![0.0, 0.0], 0.0);
        assert_eq!(recovery_error(&Params::new(vec![3.0, 4.0], 7.0), &t2).unwrap(), 5.0);
        assert_eq!(recovery_error(&t2, &t2).unwrap(), 0.0);
        assert!(recovery_error(&truth, &t2).is_err());
        let est = Params::new(vec![0.3], -0.1);
        assert_eq!(generalization_error(&d, &est).unwrap(), relu_objective(&d, &est).unwrap());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
        assert!("newton".parse::<Method>().is_err());
    }

    #[test]
    fn one_setting_gives_five_rows() {
        let cfg = BenchConfig {
            settings: vec![spec(20.0, 1)],
            repetitions: 1,
            methods: Method::ALL.to_vec(),
            params: MethodConfig::default(),
        };
        let rows = run_benchmark(&cfg, Execution::Auto).unwrap();
        assert_eq!(rows.len(), 5);
        for r in &rows {
            assert!(r.pe >= 0.0 && r.obj >= 0.0 && r.re >= 0.0 && r.ge >= 0.0);
        }
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 5);
        assert_eq!(agg[0].count, 1);
        assert_eq!(agg[0].std_obj, 0.0);
    }

    #[test]
    fn realizable_sorting_methods_recover_truth() {
        let cfg = BenchConfig {
            settings: vec![spec(f64::INFINITY, 3)],
            repetitions: 2,
            methods: vec![Method::Sorting, Method::SortingIter, Method::SortingGd],
            params: MethodConfig::default(),
        };
        let rows = run_benchmark(&cfg, Execution::Auto).unwrap();
        for r in rows {
            assert!(r.pe <= 1e-6 && r.re <= 1e-6, "{r:?}");
            // noiseless with β₀* = 0: PE and Obj coincide
            assert!((r.pe - r.obj).abs() <= 1e-9);
        }
    }

    #[test]
    fn rows_reproducible_apart_from_timing() {
        let cfg = BenchConfig {
            settings: vec![spec(10.0, 5)],
            repetitions: 2,
            methods: Method::ALL.to_vec(),
            params: MethodConfig::default(),
        };
        let strip = |rows: Vec<MetricRow>| {
            let rows: Vec<MetricRow> = rows.into_iter().map(|r| MetricRow { runtime_ms: 0.0, ..r }).collect();
            let mut buf = Vec::new();
            write_rows(&rows, &mut buf).unwrap();
            String::from_utf8(buf).unwrap()
        };
        let a = strip(run_benchmark(&cfg, Execution::Auto).unwrap());
        let b = strip(run_benchmark(&cfg, Execution::Sequential).unwrap());
        assert_eq!(a, b);
        assert!(a.starts_with("p,n,sparsity,db,rho,seed,method,pe,obj,re,ge,runtime_ms\n"));
    }

    #[test]
    fn win_rate_counts_ties() {
        let row = |seed, method, obj| MetricRow {
            p: 1,
            n: 1,
            sparsity: 0.5,
            db: 10.0,
            rho: 0.3,
            seed,
            method,
            pe: 0.0,
            obj,
            re: 0.0,
            ge: 0.0,
            runtime_ms: 0.0,
        };
        let rows = vec![
            row(0, Method::Sorting, 1.0),
            row(0, Method::Gd, 1.0),
            row(1, Method::Sorting, 3.0),
            row(1, Method::Gd, 2.0),
        ];
        assert_eq!(win_rate(&rows, Method::Sorting, Method::Gd), Some(0.5));
        assert_eq!(win_rate(&rows, Method::Sgd, Method::Gd), None);
    }

    #[test]
    fn bench_config_json_defaults() {
        let text = r#"{"settings":[{"p":2,"n":10,"sparsity":0.5,"beta_star_mean":0,"beta_star_var":1,"db":"inf","seed":1}],"repetitions":1}"#;
        let cfg: BenchConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.methods.len(), 5);
        assert_eq!(cfg.params.splits, 10);
        assert!(!cfg.settings[0].realizable_rows);
    }
}
