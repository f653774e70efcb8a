//! Config-driven experiments: seeded replicas, sweeps, summaries and output.

mod emit;
mod summary;
mod sweep;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::egs::{egs_run, layered_chain_run, EgsConfig, LayeredChain};
use crate::error::{Error, Result};
use crate::interactions::{coupled_biased_walk, BoundaryPolicy, FobtBiased, Interaction, InteractionPolicy, Radius};
use crate::lattice::{ball, bernoulli_domain, check_dim, Base, Edge, GrowingDomain, Metric, Site};
use crate::potential::criteria::Schedule;
use crate::psrw::{budget_report, psrw_run, ProbeCap, Strategy};
use crate::rng::Streams;
use crate::walker::{run, Checkpoints, CheckpointRow, Dynamics, FixedDomain, RunConfig, StoppingLog, WalkState};

pub use emit::{
    read_results_csv, read_results_jsonl, write_criterion_csv, write_results_csv, write_results_csv_to,
    write_results_jsonl, write_summary_csv, write_summary_csv_to, write_sweep_csv, CSV_SCHEMA,
};
pub use summary::{ls_slope, quantile, summarize, Summary, SummaryRow};
pub use sweep::{load_grid, sweep, Grid, SweepRow};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "GROWWALK_WORKERS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedEdge {
    pub site: Vec<i32>,
    pub axis: usize,
}

/// Initial domain of a walker model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "base", rename_all = "snake_case")]
pub enum DomainSpec {
    Full,
    Ball {
        radius: f64,
        #[serde(default = "graph_metric")]
        metric: Metric,
    },
    /// Bond percolation; the edge seed is drawn from the replica's domain stream.
    Bernoulli {
        p: f64,
        #[serde(default = "default_box")]
        box_halfwidth: i32,
    },
    AllBut {
        closed: Vec<ClosedEdge>,
    },
}

fn graph_metric() -> Metric {
    Metric::Graph
}

fn euclidean_metric() -> Metric {
    Metric::Euclidean
}

fn default_box() -> i32 {
    64
}

fn default_replicas() -> u64 {
    1
}

impl DomainSpec {
    pub fn build(&self, dim: usize, rngs: &mut Streams) -> Result<GrowingDomain> {
        match self {
            DomainSpec::Full => GrowingDomain::full(dim),
            DomainSpec::Ball { radius, metric } => ball(Site::ORIGIN, *radius, *metric, dim),
            DomainSpec::Bernoulli { p, box_halfwidth } => {
                bernoulli_domain(*p, *box_halfwidth, rngs.domain.next_u64(), dim)
            }
            DomainSpec::AllBut { closed } => {
                let mut set = rustc_hash::FxHashSet::default();
                for e in closed {
                    if e.site.len() != dim || e.axis >= dim {
                        return Err(Error::invalid(format!("closed edge {e:?} does not fit d={dim}")));
                    }
                    set.insert(Edge::along(Site::new(&e.site)?, e.axis));
                }
                GrowingDomain::new(dim, Base::AllBut(set))
            }
        }
    }
}

/// Model and its parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    /// SRW on a fixed domain.
    Srw { domain: DomainSpec },
    Interaction {
        domain: DomainSpec,
        interaction: Interaction,
        #[serde(default)]
        boundary: BoundaryPolicy,
        #[serde(default)]
        radius: Radius,
    },
    FobtBiased { domain: DomainSpec },
    Egs {
        c: f64,
        #[serde(default = "euclidean_metric")]
        metric: Metric,
        schedule: Schedule,
    },
    Layered(LayeredChain),
    Psrw {
        strategy: Strategy,
        #[serde(default)]
        cap: ProbeCap,
    },
    /// The biased-opening coupling on Z^2 from a Bernoulli(p) initial domain.
    Coupling {
        p: f64,
        #[serde(default = "default_box")]
        box_halfwidth: i32,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Output {
    pub csv: Option<PathBuf>,
    pub jsonl: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub dim: usize,
    pub horizon: u64,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub checkpoints: Checkpoints,
    /// Replicas abort once `|X_t|_1 >= r_max`.
    pub r_max: Option<i64>,
    /// Largest tolerated fraction of truncated replicas.
    #[serde(default)]
    pub max_truncated: f64,
    pub model: Model,
    #[serde(default)]
    pub output: Output,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks every parameter against the model's preconditions.
    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|e| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        })
    }

    fn check(&self) -> Result<()> {
        check_dim(self.dim)?;
        if self.horizon == 0 {
            return Err(Error::invalid("horizon must be >= 1"));
        }
        if self.replicas == 0 {
            return Err(Error::invalid("replicas must be >= 1"));
        }
        if self.r_max.is_some_and(|r| r < 1) {
            return Err(Error::invalid("r_max must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.max_truncated) {
            return Err(Error::invalid("max_truncated must lie in [0, 1]"));
        }
        let mut rngs = Streams::new(self.master_seed, 0);
        match &self.model {
            Model::Srw { domain } => {
                domain.build(self.dim, &mut rngs)?;
            }
            Model::Interaction {
                domain,
                interaction,
                boundary,
                radius,
            } => {
                domain.build(self.dim, &mut rngs)?;
                InteractionPolicy::new(interaction.clone(), boundary.clone(), *radius)?;
                if matches!(interaction, Interaction::Fobt { open: crate::interactions::FobtRule::RightUpDown })
                    && self.dim != 2
                {
                    return Err(Error::invalid("right/up/down opening needs d = 2"));
                }
            }
            Model::FobtBiased { domain } => {
                if self.dim != 2 {
                    return Err(Error::invalid("biased FOBT needs d = 2"));
                }
                domain.build(self.dim, &mut rngs)?;
            }
            Model::Egs { c, metric, schedule } => self.egs(*c, *metric, schedule).validate()?,
            Model::Layered(chain) => chain.validate()?,
            Model::Psrw { strategy, cap } => {
                psrw_run(self.dim, strategy, 0, &[], *cap, false, &mut rngs)?;
            }
            Model::Coupling { p, box_halfwidth } => {
                if self.dim != 2 {
                    return Err(Error::invalid("the coupling needs d = 2"));
                }
                bernoulli_domain(*p, *box_halfwidth, 0, 2)?;
            }
        }
        Ok(())
    }

    fn egs(&self, c: f64, metric: Metric, schedule: &Schedule) -> EgsConfig {
        EgsConfig {
            dim: self.dim,
            c,
            schedule: schedule.clone(),
            metric,
        }
    }

    pub fn checkpoint_times(&self) -> Vec<u64> {
        self.checkpoints.times(self.horizon)
    }

    fn run_config(&self) -> RunConfig {
        let mut rc = RunConfig::new(self.horizon);
        rc.checkpoints = self.checkpoint_times();
        if let Some(r) = self.r_max {
            rc.r_max = r;
        }
        rc
    }
}

/// One checkpoint row of one replica. Columns a model does not produce are
/// left empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub replica: u64,
    pub t: u64,
    pub n0: Option<u64>,
    pub last_return: Option<u64>,
    pub dist: Option<u64>,
    pub domain_sites: Option<u64>,
    pub domain_edges: Option<u64>,
    pub mbar: Option<f64>,
    pub diff1: Option<i64>,
}

impl Row {
    fn from_checkpoint(replica: u64, c: &CheckpointRow) -> Row {
        Row {
            replica,
            t: c.t,
            n0: Some(c.n0),
            last_return: c.last_return,
            dist: c.dist,
            domain_sites: c.domain_sites.map(|v| v as u64),
            domain_edges: c.domain_edges.map(|v| v as u64),
            ..Row::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetSummary {
    pub total: u64,
    pub mbar: f64,
    pub trailing: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingSummary {
    pub records: usize,
    pub closed: usize,
    pub hits: usize,
}

impl StoppingSummary {
    fn of(log: &StoppingLog) -> StoppingSummary {
        StoppingSummary {
            records: log.records.len(),
            closed: log.closed().count(),
            hits: log.hits(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicaResult {
    pub replica: u64,
    /// Steps actually taken.
    pub t: u64,
    pub n0: u64,
    pub last_return: Option<u64>,
    pub truncated: bool,
    pub budget: Option<BudgetSummary>,
    pub stopping: Option<StoppingSummary>,
    /// Model-specific scalars.
    pub extra: BTreeMap<String, f64>,
    pub rows: Vec<Row>,
    pub wall_ms: u64,
}

fn walker_result(replica: u64, out: crate::walker::RunOutput) -> ReplicaResult {
    ReplicaResult {
        replica,
        t: out.state.t,
        n0: out.state.visits_origin,
        last_return: out.state.last_return,
        truncated: out.truncated,
        budget: None,
        stopping: Some(StoppingSummary::of(&out.log)),
        extra: BTreeMap::new(),
        rows: out.checkpoints.iter().map(|c| Row::from_checkpoint(replica, c)).collect(),
        wall_ms: 0,
    }
}

fn run_walker<M: Dynamics>(cfg: &ExperimentConfig, domain: &DomainSpec, mut dynamics: M, replica: u64, rngs: &mut Streams) -> Result<ReplicaResult> {
    let mut dom = domain.build(cfg.dim, rngs)?;
    let out = run(WalkState::at_origin(), &mut dom, &mut dynamics, &cfg.run_config(), rngs)?;
    Ok(walker_result(replica, out))
}

/// Runs replica `replica` on the streams `(master_seed, replica)`.
pub fn run_replica(cfg: &ExperimentConfig, replica: u64) -> Result<ReplicaResult> {
    let clock = Instant::now();
    let mut rngs = Streams::new(cfg.master_seed, replica);
    let mut res = match &cfg.model {
        Model::Srw { domain } => run_walker(cfg, domain, FixedDomain, replica, &mut rngs)?,
        Model::Interaction {
            domain,
            interaction,
            boundary,
            radius,
        } => {
            let policy = InteractionPolicy::new(interaction.clone(), boundary.clone(), *radius)?;
            run_walker(cfg, domain, policy, replica, &mut rngs)?
        }
        Model::FobtBiased { domain } => run_walker(cfg, domain, FobtBiased::new(), replica, &mut rngs)?,
        Model::Egs { c, metric, schedule } => {
            let ecfg = cfg.egs(*c, *metric, schedule);
            let out = egs_run(&ecfg, &cfg.run_config(), &mut rngs, true)?;
            let mut extra = BTreeMap::new();
            extra.insert("k".to_string(), out.state.k as f64);
            ReplicaResult {
                replica,
                t: out.state.walk.t,
                n0: out.state.walk.visits_origin,
                last_return: out.state.walk.last_return,
                truncated: out.truncated,
                budget: None,
                stopping: out.log.as_ref().map(StoppingSummary::of),
                extra,
                rows: out.checkpoints.iter().map(|c| Row::from_checkpoint(replica, c)).collect(),
                wall_ms: 0,
            }
        }
        Model::Layered(chain) => {
            let out = layered_chain_run(chain, &cfg.run_config(), &mut rngs)?;
            let mut extra = BTreeMap::new();
            extra.insert("w".to_string(), out.w as f64);
            ReplicaResult {
                replica,
                t: cfg.horizon,
                n0: out.returns,
                last_return: out.last_return,
                truncated: false,
                budget: None,
                stopping: Some(StoppingSummary::of(&out.log)),
                extra,
                rows: out.checkpoints.iter().map(|c| Row::from_checkpoint(replica, c)).collect(),
                wall_ms: 0,
            }
        }
        Model::Psrw { strategy, cap } => {
            let cps = cfg.checkpoint_times();
            let out = psrw_run(cfg.dim, strategy, cfg.horizon, &cps, *cap, false, &mut rngs)?;
            let report = budget_report(&out.budget, &[]);
            let mut extra = BTreeMap::new();
            if !out.first_visit_probes.is_empty() {
                let n = out.first_visit_probes.len() as f64;
                extra.insert("first_visits".to_string(), n);
                extra.insert(
                    "probes_per_first_visit".to_string(),
                    out.first_visit_probes.iter().map(|&m| m as f64).sum::<f64>() / n,
                );
            }
            ReplicaResult {
                replica,
                t: out.state.t,
                n0: out.state.visits_origin,
                last_return: out.state.last_return,
                truncated: false,
                budget: Some(BudgetSummary {
                    total: out.budget.total(),
                    mbar: out.budget.mbar(out.budget.len().max(1)),
                    trailing: report.trailing,
                }),
                stopping: None,
                extra,
                rows: out
                    .rows
                    .iter()
                    .map(|r| Row {
                        replica,
                        t: r.t,
                        n0: Some(r.n0),
                        last_return: r.last_return,
                        domain_sites: Some(r.domain_sites),
                        mbar: Some(r.mbar),
                        ..Row::default()
                    })
                    .collect(),
                wall_ms: 0,
            }
        }
        Model::Coupling { p, box_halfwidth } => {
            let mut d0 = bernoulli_domain(*p, *box_halfwidth, rngs.domain.next_u64(), 2)?;
            let pair = coupled_biased_walk(&mut d0, cfg.horizon, &mut rngs)?;
            let mut extra = BTreeMap::new();
            extra.insert("diff1".to_string(), pair.final_diff1() as f64);
            extra.insert("monotonicity_violation".to_string(), pair.monotonicity_violation.map_or(0.0, |_| 1.0));
            extra.insert("super_non_nv".to_string(), pair.snn_times.len() as f64);
            extra.insert("holds".to_string(), pair.holds as f64);
            ReplicaResult {
                replica,
                t: cfg.horizon,
                n0: pair.e.visits_origin,
                last_return: pair.e.last_return,
                truncated: false,
                budget: None,
                stopping: None,
                extra,
                rows: cfg
                    .checkpoint_times()
                    .into_iter()
                    .map(|t| Row {
                        replica,
                        t,
                        diff1: pair.diff1.get(t as usize).copied(),
                        ..Row::default()
                    })
                    .collect(),
                wall_ms: 0,
            }
        }
    };
    res.wall_ms = clock.elapsed().as_millis() as u64;
    Ok(res)
}

/// Worker count from [`WORKERS_ENV`], if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&n: &usize| n > 0)
}

/// Runs every replica, in parallel over `workers` threads (default: the
/// environment, then all cores). Results are ordered by replica index.
pub fn run_experiment(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<Vec<ReplicaResult>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.or_else(workers_from_env).unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| (0..cfg.replicas).into_par_iter().map(|r| run_replica(cfg, r)).collect())
}

/// Writes whichever outputs the config names.
pub fn emit_outputs(cfg: &ExperimentConfig, results: &[ReplicaResult]) -> Result<()> {
    if let Some(p) = &cfg.output.csv {
        write_results_csv(results, p)?;
    }
    if let Some(p) = &cfg.output.jsonl {
        write_results_jsonl(results, p)?;
    }
    if let Some(p) = &cfg.output.summary {
        write_summary_csv(&summarize(results)?, p)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const EGS: &str = r#"
dim = 3
horizon = 2000
replicas = 3
master_seed = 7

[model]
kind = "egs"
c = 1.0
schedule = { family = "power", a = 1.0, alpha = 1.5 }
"#;

    #[test]
    fn parse_and_run() {
        let cfg = ExperimentConfig::from_toml(EGS).unwrap();
        let res = run_experiment(&cfg, Some(1)).unwrap();
        assert_eq!(res.len(), 3);
        assert_eq!(res.iter().map(|r| r.replica).collect::<Vec<_>>(), vec![0, 1, 2]);
        let again = run_experiment(&cfg, Some(2)).unwrap();
        for (a, b) in res.iter().zip(&again) {
            assert_eq!(a.rows, b.rows);
            assert_eq!(a.n0, b.n0);
        }
        let one = run_replica(&cfg, 1).unwrap();
        assert_eq!(one.rows, res[1].rows);
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            EGS.replace("horizon = 2000", "horizon = 0"),
            EGS.replace("replicas = 3", "replicas = 0"),
            EGS.replace("c = 1.0", "c = 0.5"),
            EGS.replace("dim = 3", "dim = 7"),
            EGS.replace("master_seed", "seed"),
        ] {
            assert!(matches!(ExperimentConfig::from_toml(&bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn every_model_parses() {
        let models = [
            "kind = \"srw\"\ndomain = { base = \"ball\", radius = 4.0 }",
            "kind = \"interaction\"\ndomain = { base = \"ball\", radius = 1.0 }\ninteraction = { rule = \"obt\" }",
            "kind = \"interaction\"\ndomain = { base = \"bernoulli\", p = 0.3 }\ninteraction = { rule = \"pobt\", eps = 0.5, open = \"one_uniform\" }\nboundary = { policy = \"drift_to_origin\", delta = 0.2 }",
            "kind = \"fobt_biased\"\ndomain = { base = \"ball\", radius = 1.0 }",
            "kind = \"layered\"\np_plus = 0.5\nq = 1.0\nschedule = { family = \"power\", a = 1.0, alpha = 0.0 }",
            "kind = \"psrw\"\nstrategy = { strategy = \"guided\", l = 4, variant = \"biased2d\" }",
            "kind = \"psrw\"\nstrategy = { strategy = \"unguided_plus_m\", m = 2 }",
            "kind = \"coupling\"\np = 0.0",
        ];
        for m in models {
            let text = format!("dim = 2\nhorizon = 500\nreplicas = 2\n[model]\n{m}\n");
            let cfg = ExperimentConfig::from_toml(&text).unwrap_or_else(|e| panic!("{m}: {e}"));
            let res = run_experiment(&cfg, Some(1)).unwrap();
            assert_eq!(res.len(), 2, "{m}");
            assert!(!res[0].rows.is_empty(), "{m}");
        }
    }
}
