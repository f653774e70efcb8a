use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use growwalk_core::harness::{emit_outputs, load_grid, summarize, sweep, write_criterion_csv, write_summary_csv_to, write_sweep_csv};
use growwalk_core::lattice::BallShape;
use growwalk_core::potential::criteria::{egs_criterion, obt_box_criterion};
use growwalk_core::{DirichletProblem, Error, ExperimentConfig, Method, Metric, Schedule, Site};
use serde::Deserialize;

const EXIT_CONFIG: u8 = 2;
const EXIT_TRUNCATED: u8 = 3;

#[derive(Parser)]
#[command(name = "growwalk", version, about = "Random walks on growing subgraphs of Z^d")]
struct Cli {
    /// Worker threads (overrides GROWWALK_WORKERS).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every replica of an experiment.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Cross product of a parameter grid over a base config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Partial sums of a criterion series as CSV.
    Criterion {
        #[arg(long, value_enum)]
        family: Family,
        /// Schedule as `key=value` pairs: `n=1`, `alpha=2.5 [a=1]`, or `table=1,2,4`.
        #[arg(long, num_args = 1.., required = true)]
        params: Vec<String>,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 10_000)]
        k_max: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hitting probability of a target set on a finite domain.
    Dirichlet {
        #[arg(long)]
        dim: usize,
        /// TOML domain file: `sites = [[x, y], ...]` or `radius = r` with optional `metric`.
        #[arg(long)]
        domain: PathBuf,
        /// Target sites, e.g. `0,0`. Other exits are killing.
        #[arg(long, num_args = 1.., required = true)]
        target: Vec<String>,
        #[arg(long)]
        start: String,
        #[arg(long, value_enum, default_value_t = SolveMethod::Auto)]
        method: SolveMethod,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum Family {
    Egs,
    ObtBox,
}

#[derive(Copy, Clone, ValueEnum)]
enum SolveMethod {
    Auto,
    Iterative,
    Dense,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainFile {
    sites: Option<Vec<Vec<i32>>>,
    radius: Option<f64>,
    #[serde(default = "euclidean")]
    metric: Metric,
}

fn euclidean() -> Metric {
    Metric::Euclidean
}

enum Failure {
    Config(String),
    Truncated(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidParameter(_) | Error::Parse { .. } => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn parse_site(text: &str, dim: usize) -> Result<Site, Failure> {
    let coords: Vec<i32> = text
        .split(',')
        .map(|c| c.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Config(format!("bad site `{text}`: {e}")))?;
    if coords.len() != dim {
        return Err(Failure::Config(format!("site `{text}` does not have {dim} coordinates")));
    }
    Ok(Site::new(&coords)?)
}

fn parse_schedule(params: &[String]) -> Result<Schedule, Failure> {
    let mut kv = std::collections::BTreeMap::new();
    for p in params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("expected key=value, got `{p}`")))?;
        kv.insert(k.trim(), v.trim());
    }
    let num = |k: &str| -> Result<Option<f64>, Failure> {
        kv.get(k)
            .map(|v| v.parse::<f64>().map_err(|e| Failure::Config(format!("{k}: {e}"))))
            .transpose()
    };
    let schedule = match (kv.get("n"), kv.get("table"), num("alpha")?) {
        (Some(n), None, None) => Schedule::constant(n.parse().map_err(|e| Failure::Config(format!("n: {e}")))?),
        (None, Some(t), None) => Schedule::Table {
            values: t
                .split(',')
                .map(|v| v.trim().parse())
                .collect::<Result<_, _>>()
                .map_err(|e| Failure::Config(format!("table: {e}")))?,
        },
        (None, None, Some(alpha)) => Schedule::Power {
            a: num("a")?.unwrap_or(1.0),
            alpha,
        },
        _ => return Err(Failure::Config("give exactly one of n, table, alpha".into())),
    };
    if let Some(extra) = kv.keys().find(|k| !["n", "table", "alpha", "a"].contains(k)) {
        return Err(Failure::Config(format!("unknown parameter `{extra}`")));
    }
    schedule.validate()?;
    Ok(schedule)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => std::fs::File::create(p)
            .map(|f| Box::new(std::io::BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| Failure::Runtime(format!("creating {}: {e}", p.display()))),
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn simulate(config: &Path, workers: Option<usize>) -> Result<(), Failure> {
    let cfg = ExperimentConfig::load(config)?;
    let results = growwalk_core::run_experiment(&cfg, workers)?;
    emit_outputs(&cfg, &results)?;
    let summary = summarize(&results)?;
    write_summary_csv_to(&summary, std::io::stdout().lock())?;
    let frac = summary.truncated as f64 / summary.replicas as f64;
    if frac > cfg.max_truncated {
        return Err(Failure::Truncated(format!(
            "{} of {} replicas truncated at r_max (allowed fraction {})",
            summary.truncated, summary.replicas, cfg.max_truncated
        )));
    }
    Ok(())
}

fn dirichlet(dim: usize, domain: &Path, target: &[String], start: &str, method: SolveMethod) -> Result<(), Failure> {
    let text = std::fs::read_to_string(domain).map_err(|e| Failure::Config(format!("{}: {e}", domain.display())))?;
    let file: DomainFile = toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", domain.display())))?;
    let sites: Vec<Site> = match (file.sites, file.radius) {
        (Some(list), None) => list
            .iter()
            .map(|c| {
                if c.len() != dim {
                    return Err(Failure::Config(format!("site {c:?} does not have {dim} coordinates")));
                }
                Ok(Site::new(c)?)
            })
            .collect::<Result<_, _>>()?,
        (None, Some(r)) if r >= 0.0 => BallShape::new(file.metric, r).sites(dim),
        _ => return Err(Failure::Config("domain file needs exactly one of `sites` or a non-negative `radius`".into())),
    };
    let targets: Vec<Site> = target.iter().map(|t| parse_site(t, dim)).collect::<Result<_, _>>()?;
    let start = parse_site(start, dim)?;
    let free: Vec<Site> = sites.into_iter().filter(|z| !targets.contains(z)).collect();
    let free_set: std::collections::HashSet<Site> = free.iter().copied().collect();
    if !free_set.contains(&start) && !targets.contains(&start) {
        return Err(Failure::Config("start must lie in the domain".into()));
    }
    let problem = DirichletProblem::on_lattice(
        dim,
        &free,
        |z| (!free_set.contains(&z)).then_some(if targets.contains(&z) { 1.0 } else { 0.0 }),
        start,
    )?;
    let method = match method {
        SolveMethod::Auto => Method::Auto,
        SolveMethod::Iterative => Method::Iterative,
        SolveMethod::Dense => Method::Dense,
    };
    let sol = problem.solve(method)?;
    println!("probability,unknowns,residual,iterations,method");
    println!(
        "{},{},{:e},{},{:?}",
        sol.start_value,
        problem.free_count(),
        sol.residual,
        sol.iterations,
        sol.method
    );
    Ok(())
}

fn main_inner(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Simulate { config } => simulate(&config, cli.workers),
        Cmd::Sweep { config, grid, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let grid = load_grid(&grid)?;
            let rows = sweep(&cfg, &grid, cli.workers)?;
            write_sweep_csv(&rows, output(out.as_deref())?)?;
            Ok(())
        }
        Cmd::Criterion {
            family,
            params,
            dim,
            k_max,
            out,
        } => {
            let schedule = parse_schedule(&params)?;
            let report = match family {
                Family::Egs => egs_criterion(&schedule, dim, k_max)?,
                Family::ObtBox => obt_box_criterion(&schedule, dim, k_max)?,
            };
            write_criterion_csv(&report, output(out.as_deref())?)?;
            eprintln!("{}: partial sum {} at k={}, verdict {:?}", report.series, report.total(), report.cutoff, report.verdict);
            Ok(())
        }
        Cmd::Dirichlet {
            dim,
            domain,
            target,
            start,
            method,
        } => dirichlet(dim, &domain, &target, &start, method),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Truncated(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_TRUNCATED)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::FAILURE
        }
    }
}
