use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use onerelu::approx::{generalized_approx, sorting_method};
use onerelu::dataset::{Dataset, Params};
use onerelu::error::Error;
use onerelu::exec::Execution;
use onerelu::experiments::{aggregate, run_benchmark, sgd_seed, write_aggregate, write_rows, BenchConfig};
use onerelu::hardness::{decide, reduce_to_relu, to_pm1, SubsetSumInstance};
use onerelu::heuristics::{gradient_descent, iterative_heuristic, sgd, GdConfig};
use onerelu::oracle::brute_force_opt;
use onerelu::solver::{SolveReport, SolverConfig};
use onerelu::statgen::{asymptotic_bracket, generate_instance, StatModelSpec};
use serde::{Deserialize, Serialize};

use crate::{BenchArgs, BoundsArgs, GenerateArgs, OracleArgs, ReduceArgs, SolveArgs};

pub const EXIT_BAD_INPUT: u8 = 2;
pub const EXIT_REFUSED: u8 = 3;
pub const EXIT_NOT_CONVERGED: u8 = 4;

const SCHEMA: u32 = 1;

pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::TooLarge(_)) => EXIT_REFUSED,
        _ => EXIT_BAD_INPUT,
    }
}

fn parse_db(s: &str) -> Result<f64> {
    match s.to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        other => other.parse().with_context(|| format!("invalid dB value {s:?}")),
    }
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Dataset::read_csv(BufReader::new(f))?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
struct TruthFile<'a> {
    schema: u32,
    beta_star: &'a [f64],
    beta0: f64,
    sigma: f64,
    rho: f64,
    delta_sq: f64,
    spec: &'a StatModelSpec,
}

pub fn generate(a: GenerateArgs) -> Result<u8> {
    if a.output.len() != 3 {
        bail!(Error::InvalidArgument("-o expects TRAIN.csv,TEST.csv,TRUTH.json".into()));
    }
    let spec = StatModelSpec {
        p: a.p,
        n: a.n,
        sparsity: a.sparsity,
        beta_star_mean: a.beta_mean,
        beta_star_var: a.beta_var,
        db: parse_db(&a.db)?,
        realizable_rows: a.realizable_rows,
        seed: a.seed,
    };
    let inst = generate_instance(&spec)?;
    inst.train.write_csv(create(&a.output[0])?)?;
    inst.test.write_csv(create(&a.output[1])?)?;
    let truth = TruthFile {
        schema: SCHEMA,
        beta_star: &inst.truth.params.beta,
        beta0: inst.truth.params.beta0,
        sigma: inst.truth.sigma,
        rho: inst.truth.rho,
        delta_sq: inst.truth.delta_sq,
        spec: &spec,
    };
    let mut w = create(&a.output[2])?;
    serde_json::to_writer_pretty(&mut w, &truth)?;
    writeln!(w)?;
    w.flush()?;
    Ok(0)
}

/// Optional overrides for `solve`.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SolveConfig {
    solver: SolverConfig,
    gd: GdConfig,
}

#[derive(Serialize)]
struct SolveOutput {
    schema: u32,
    method: String,
    obj: f64,
    params: Params,
    iterations: usize,
    converged: bool,
    /// Surrogate value for the surrogate-based methods.
    #[serde(skip_serializing_if = "Option::is_none")]
    z_sigma: Option<f64>,
    runtime_ms: f64,
}

pub fn solve(a: SolveArgs) -> Result<u8> {
    let d = read_dataset(&a.input)?;
    let mut conf = match &a.config {
        Some(path) => {
            let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            serde_json::from_reader(BufReader::new(f)).context("parsing solve config")?
        }
        None => SolveConfig::default(),
    };
    if a.sequential {
        conf.solver.execution = Execution::Sequential;
    }
    let cfg = &conf.solver;
    let origin = Params::zeros(d.p());
    let start = Instant::now();
    let sorted = || sorting_method(&d, a.splits, cfg);
    let (rep, z_sigma): (SolveReport, Option<f64>) = match a.method.as_str() {
        "approx" => {
            let r = generalized_approx(&d, a.k, cfg)?;
            let z = r.best.value;
            (SolveReport { iterations: r.candidates_evaluated, ..r.best }, Some(z))
        }
        "sorting" => {
            let r = sorted()?;
            let z = r.best.value;
            (SolveReport { iterations: r.candidates_evaluated, ..r.best }, Some(z))
        }
        "iter" => {
            let r = iterative_heuristic(&d, &origin, a.rounds, cfg)?;
            let z = r.value;
            (r, Some(z))
        }
        "sorting+iter" => {
            let r = iterative_heuristic(&d, &sorted()?.best.params, a.rounds, cfg)?;
            let z = r.value;
            (r, Some(z))
        }
        "gd" => (gradient_descent(&d, &conf.gd, &origin)?, None),
        "sorting+gd" => (gradient_descent(&d, &conf.gd, &sorted()?.best.params)?, None),
        "sgd" => {
            let Some(seed) = a.seed else {
                bail!(Error::InvalidArgument("sgd needs an explicit --seed".into()));
            };
            (sgd(&d, &conf.gd, &origin, sgd_seed(seed))?, None)
        }
        other => bail!(Error::InvalidArgument(format!(
            "unknown method {other:?}; expected approx, sorting, iter, gd, sgd, sorting+iter or sorting+gd"
        ))),
    };
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    let obj = onerelu::dataset::relu_objective(&d, &rep.params)?;
    let converged = rep.converged;
    print_json(&SolveOutput {
        schema: SCHEMA,
        method: a.method,
        obj,
        params: rep.params,
        iterations: rep.iterations,
        converged,
        z_sigma,
        runtime_ms,
    })?;
    if a.strict && !converged {
        eprintln!("error: method did not converge");
        return Ok(EXIT_NOT_CONVERGED);
    }
    Ok(0)
}

#[derive(Serialize)]
struct OracleOutput<'a> {
    schema: u32,
    z_opt: f64,
    params: &'a Params,
    /// 0-based sample indices on the linear piece.
    active_set: &'a [usize],
    subsets: usize,
}

pub fn oracle(a: OracleArgs) -> Result<u8> {
    let d = read_dataset(&a.input)?;
    let mut cfg = SolverConfig::default();
    if a.sequential {
        cfg.execution = Execution::Sequential;
    }
    let r = brute_force_opt(&d, &cfg)?;
    print_json(&OracleOutput {
        schema: SCHEMA,
        z_opt: r.report.value,
        params: &r.report.params,
        active_set: r.active.members(),
        subsets: r.subsets,
    })?;
    Ok(0)
}

pub fn reduce(a: ReduceArgs) -> Result<u8> {
    let mut inst = SubsetSumInstance::new(a.a);
    if a.from_subset_sum {
        inst = to_pm1(&inst);
    }
    let d = reduce_to_relu(&inst, inst.p())?;
    match &a.output {
        Some(path) => {
            let mut w = create(path)?;
            d.write_csv(&mut w)?;
            w.flush()?;
        }
        None if !a.decide => d.write_csv(io::stdout().lock())?,
        None => {}
    }
    if a.decide {
        let v = decide(&inst, &SolverConfig::default())?;
        println!(
            "{} optimum {} threshold {}",
            if v.feasible { "FEASIBLE" } else { "INFEASIBLE" },
            v.optimum,
            v.threshold
        );
    }
    Ok(0)
}

pub fn bench(a: BenchArgs) -> Result<u8> {
    let f = File::open(&a.config).with_context(|| format!("opening {}", a.config.display()))?;
    let cfg: BenchConfig = serde_json::from_reader(BufReader::new(f)).context("parsing bench config")?;
    let rows = match a.jobs {
        Some(0) => bail!(Error::InvalidArgument("--jobs must be at least 1".into())),
        Some(1) => run_benchmark(&cfg, Execution::Sequential)?,
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(j).build()?;
            pool.install(|| run_benchmark(&cfg, Execution::Auto))?
        }
        None => run_benchmark(&cfg, Execution::Auto)?,
    };
    let mut w = create(&a.output)?;
    write_rows(&rows, &mut w)?;
    w.flush()?;
    if let Some(path) = &a.aggregate {
        let mut w = create(path)?;
        write_aggregate(&aggregate(&rows), &mut w)?;
        w.flush()?;
    }
    Ok(0)
}

#[derive(Serialize)]
struct BoundsOutput {
    schema: u32,
    lower: f64,
    upper: f64,
    gamma: f64,
    delta_sq: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    ratio_bound: Option<f64>,
}

pub fn bounds(a: BoundsArgs) -> Result<u8> {
    let b = asymptotic_bracket(a.gamma, a.delta_sq)?;
    print_json(&BoundsOutput {
        schema: SCHEMA,
        lower: b.lower,
        upper: b.upper,
        gamma: b.gamma,
        delta_sq: b.delta_sq,
        ratio_bound: b.ratio_bound,
    })?;
    Ok(0)
}
