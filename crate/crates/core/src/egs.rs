//! Expanding glassy spheres and the layered birth-death chain.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{check_dim, neighbors, BallShape, BoundaryHistory, Metric, Site, MAX_DIM};
use crate::potential::criteria::hit_origin_field;
use crate::potential::dirichlet::{DirichletProblem, Method, Node};
use crate::potential::estimator::{SnapshotSource, Term};
use crate::rng::{StreamRng, Streams};
use crate::walker::{CheckpointRow, RunConfig, StopRecord, StoppingLog, WalkState};

pub use crate::potential::criteria::{egs_criterion, Schedule};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgsConfig {
    pub dim: usize,
    /// Expansion factor `c >= 1`: shell `k` is the ball of radius `c k`.
    pub c: f64,
    pub schedule: Schedule,
    pub metric: Metric,
}

impl EgsConfig {
    pub fn validate(&self) -> Result<()> {
        check_dim(self.dim)?;
        if !(self.c >= 1.0 && self.c.is_finite()) {
            return Err(Error::invalid(format!("expansion factor must be >= 1, got {}", self.c)));
        }
        self.schedule.validate()
    }

    pub fn shell(&self, k: u64) -> BallShape {
        BallShape::new(self.metric, self.c * k as f64)
    }
}

#[derive(Clone, Debug)]
pub struct EgsState {
    pub k: u64,
    /// Boundary visits since `tau_k`.
    pub hits: u64,
    /// `tau_1 = 0, tau_2, ...`
    pub tau_log: Vec<u64>,
    pub walk: WalkState,
    shape: BallShape,
}

impl EgsState {
    pub fn new(cfg: &EgsConfig) -> Result<EgsState> {
        cfg.validate()?;
        Ok(EgsState {
            k: 1,
            hits: 0,
            tau_log: vec![0],
            walk: WalkState::at_origin(),
            shape: cfg.shell(1),
        })
    }

    pub fn shape(&self) -> &BallShape {
        &self.shape
    }
}

/// One EGS step: counts a visit of `Z_t` to the shell boundary, moves
/// uniformly inside the shell, and expands once the count reaches `N(k)`.
/// Returns whether the shell expanded.
#[inline]
pub fn egs_step(state: &mut EgsState, cfg: &EgsConfig, rng: &mut StreamRng) -> Result<bool> {
    let pos = state.walk.pos;
    let mut inside = arrayvec::ArrayVec::<Site, { 2 * MAX_DIM }>::new();
    for y in neighbors(pos, cfg.dim) {
        if state.shape.contains(&y) {
            inside.push(y);
        }
    }
    if inside.is_empty() {
        return Err(Error::IsolatedSite(pos));
    }
    if inside.len() < 2 * cfg.dim {
        state.hits += 1;
    }
    let next = inside[rng.random_range(0..inside.len())];
    state.walk.arrive(next);
    if state.hits < cfg.schedule.at(state.k) {
        return Ok(false);
    }
    state.k += 1;
    state.hits = 0;
    state.tau_log.push(state.walk.t);
    state.shape = cfg.shell(state.k);
    Ok(true)
}

/// Boundary history of an EGS run, derived from its expansion times.
pub struct ShellView<'a> {
    pub cfg: &'a EgsConfig,
    pub tau_log: &'a [u64],
}

impl ShellView<'_> {
    /// Shell index in force at time `t`.
    pub fn k_at(&self, t: u64) -> u64 {
        self.tau_log.partition_point(|&tau| tau <= t) as u64
    }

    fn on_boundary(&self, z: Site, k: u64) -> bool {
        let shape = self.cfg.shell(k);
        shape.contains(&z) && neighbors(z, self.cfg.dim).iter().any(|y| !shape.contains(y))
    }
}

impl BoundaryHistory for ShellView<'_> {
    fn is_boundary_now(&self, z: Site) -> bool {
        self.on_boundary(z, self.tau_log.len() as u64)
    }

    fn was_boundary_at(&self, z: Site, t: u64) -> bool {
        self.on_boundary(z, self.k_at(t))
    }
}

#[derive(Clone, Debug)]
pub struct EgsRun {
    pub trajectory: Vec<Site>,
    pub checkpoints: Vec<CheckpointRow>,
    pub tau_log: Vec<u64>,
    pub log: Option<StoppingLog>,
    pub state: EgsState,
    pub truncated: bool,
}

/// Runs EGS from `Z_0 = 0` for `run.horizon` steps.
pub fn egs_run(cfg: &EgsConfig, run: &RunConfig, rngs: &mut Streams, with_log: bool) -> Result<EgsRun> {
    let mut state = EgsState::new(cfg)?;
    let mut out = EgsRun {
        trajectory: Vec::new(),
        checkpoints: Vec::new(),
        tau_log: Vec::new(),
        log: with_log.then(StoppingLog::new),
        state: state.clone(),
        truncated: false,
    };
    if run.horizon == 0 {
        out.tau_log = state.tau_log.clone();
        return Ok(out);
    }
    let keep = |t: u64| run.thin > 0 && t % run.thin == 0;
    let mut next_cp = run.checkpoints.iter().copied().peekable();
    loop {
        let t = state.walk.t;
        if keep(t) {
            out.trajectory.push(state.walk.pos);
        }
        if let Some(log) = out.log.as_mut() {
            let view = ShellView {
                cfg,
                tau_log: &state.tau_log,
            };
            log.update(t, state.walk.pos, &view);
        }
        while next_cp.peek().is_some_and(|&c| c <= t) {
            if next_cp.next() == Some(t) {
                out.checkpoints.push(CheckpointRow {
                    t,
                    n0: state.walk.visits_origin,
                    last_return: state.walk.last_return,
                    dist: Some(state.walk.pos.l1() as u64),
                    domain_sites: None,
                    domain_edges: None,
                });
            }
        }
        if t >= run.horizon {
            break;
        }
        if state.walk.pos.l1() >= run.r_max {
            out.truncated = true;
            break;
        }
        egs_step(&mut state, cfg, &mut rngs.walk)?;
    }
    out.tau_log = state.tau_log.clone();
    out.state = state;
    Ok(out)
}

/// Exact `p_n` for EGS records: the shell in force at `eta_n` is solved once
/// per shell up to `k_exact`; larger shells get the bracket
/// `[0, c_d |start|_1^(2-d)]` (or `[0, 1]` for `d <= 2`).
pub struct EgsSnapshots<'a> {
    pub cfg: &'a EgsConfig,
    pub tau_log: &'a [u64],
    pub k_exact: u64,
    fields: FxHashMap<u64, FxHashMap<Site, f64>>,
}

impl<'a> EgsSnapshots<'a> {
    pub fn new(cfg: &'a EgsConfig, tau_log: &'a [u64], k_exact: u64) -> Self {
        EgsSnapshots {
            cfg,
            tau_log,
            k_exact,
            fields: FxHashMap::default(),
        }
    }
}

impl SnapshotSource for EgsSnapshots<'_> {
    fn term(&mut self, rec: &StopRecord) -> Result<Option<Term>> {
        if rec.start.is_origin() {
            return Ok(Some(Term::exact(1.0)));
        }
        let view = ShellView {
            cfg: self.cfg,
            tau_log: self.tau_log,
        };
        let k = view.k_at(rec.eta);
        if k > self.k_exact {
            let hi = if self.cfg.dim >= 3 {
                crate::potential::bounds::ever_hit_zero_bound(rec.start, self.cfg.dim)
                    .unwrap_or(1.0)
                    .min(1.0)
            } else {
                1.0
            };
            return Ok(Some(Term::bracket(0.0, hi)));
        }
        if !self.fields.contains_key(&k) {
            let (_, field) = hit_origin_field(&self.cfg.shell(k), self.cfg.dim, Method::Auto)?;
            self.fields.insert(k, field.into_iter().collect());
        }
        let field = &self.fields[&k];
        Ok(Some(Term::exact(field.get(&rec.start).copied().unwrap_or(0.0))))
    }
}

/// Layer-indexed parameter (`k >= 0`; a table repeats its last entry).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LayerValues {
    Const(f64),
    Table(Vec<f64>),
}

impl LayerValues {
    pub fn at(&self, k: u64) -> f64 {
        match self {
            LayerValues::Const(v) => *v,
            LayerValues::Table(v) => v[(k as usize).min(v.len() - 1)],
        }
    }

    fn check(&self, name: &str) -> Result<()> {
        let ok = |x: f64| (0.0..=1.0).contains(&x);
        let valid = match self {
            LayerValues::Const(v) => ok(*v),
            LayerValues::Table(v) => !v.is_empty() && v.iter().all(|&x| ok(x)),
        };
        if valid {
            Ok(())
        } else {
            Err(Error::invalid(format!("{name} must lie in [0,1]")))
        }
    }
}

/// Birth-death chain on Z_+ moving up with `p_plus(k)` (reflecting at 0),
/// whose edge `(k, k+1)` opens only after `Binomial(N(k), q(k))` steps from
/// `k` down to `k - 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayeredChain {
    pub p_plus: LayerValues,
    pub q: LayerValues,
    pub schedule: Schedule,
}

impl LayeredChain {
    pub fn validate(&self) -> Result<()> {
        self.p_plus.check("p_plus")?;
        self.q.check("q")?;
        self.schedule.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRow {
    pub s: u64,
    pub w: u64,
    pub frontier: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct LayeredRun {
    pub checkpoints: Vec<CheckpointRow>,
    pub trajectory: Vec<ChainRow>,
    /// `(t, F)`: from graph index `t` on, the lowest closed edge is
    /// `(F, F+1)` (None: no closed edge within reach).
    pub frontier_log: Vec<(u64, Option<u64>)>,
    pub log: StoppingLog,
    pub returns: u64,
    pub last_return: Option<u64>,
    pub w: u64,
}

struct Frontier<'a> {
    chain: &'a LayeredChain,
    at: Option<u64>,
    budget: u64,
}

impl Frontier<'_> {
    /// Lowest layer `j >= from` whose sampled budget is positive, giving up
    /// beyond `reach`.
    fn advance(&mut self, from: u64, reach: u64, rng: &mut StreamRng) -> Result<()> {
        let mut j = from;
        while j <= reach {
            let n = self.chain.schedule.at(j.max(1));
            let q = self.chain.q.at(j);
            let b = if q >= 1.0 {
                n
            } else if q <= 0.0 {
                0
            } else {
                Binomial::new(n, q).map_err(|e| Error::invalid(e.to_string()))?.sample(rng)
            };
            if b > 0 {
                self.at = Some(j);
                self.budget = b;
                return Ok(());
            }
            j += 1;
        }
        self.at = None;
        self.budget = 0;
        Ok(())
    }
}

/// Boundary history of a layered run.
pub struct LayeredView<'a> {
    pub frontier_log: &'a [(u64, Option<u64>)],
}

impl LayeredView<'_> {
    pub fn frontier_at(&self, t: u64) -> Option<u64> {
        let i = self.frontier_log.partition_point(|&(s, _)| s <= t);
        if i == 0 {
            None
        } else {
            self.frontier_log[i - 1].1
        }
    }
}

impl BoundaryHistory for LayeredView<'_> {
    fn is_boundary_now(&self, z: Site) -> bool {
        self.frontier_log
            .last()
            .and_then(|&(_, f)| f)
            .is_some_and(|f| z.coord(0) as u64 == f)
    }

    fn was_boundary_at(&self, z: Site, t: u64) -> bool {
        self.frontier_at(t).is_some_and(|f| z.coord(0) as u64 == f)
    }
}

/// Simulates `W_s` for `run.horizon` steps from `W_0 = 0` with edge (0,1)
/// open. Moves use the walk stream, budgets the domain stream.
pub fn layered_chain_run(chain: &LayeredChain, run: &RunConfig, rngs: &mut Streams) -> Result<LayeredRun> {
    chain.validate()?;
    let horizon = run.horizon;
    let mut out = LayeredRun {
        checkpoints: Vec::new(),
        trajectory: Vec::new(),
        frontier_log: Vec::new(),
        log: StoppingLog::new(),
        returns: 1,
        last_return: Some(0),
        w: 0,
    };
    if horizon == 0 {
        return Ok(out);
    }
    let mut front = Frontier {
        chain,
        at: None,
        budget: 0,
    };
    front.advance(1, horizon + 1, &mut rngs.domain)?;
    out.frontier_log.push((0, front.at));
    let mut w: u64 = 0;
    let keep = |t: u64| run.thin > 0 && t % run.thin == 0;
    let mut next_cp = run.checkpoints.iter().copied().peekable();
    let mut t = 0u64;
    loop {
        if keep(t) {
            out.trajectory.push(ChainRow { s: t, w, frontier: front.at });
        }
        let view = LayeredView {
            frontier_log: &out.frontier_log,
        };
        out.log.update(t, Site::axis_point(0, w as i32), &view);
        while next_cp.peek().is_some_and(|&c| c <= t) {
            if next_cp.next() == Some(t) {
                out.checkpoints.push(CheckpointRow {
                    t,
                    n0: out.returns,
                    last_return: out.last_return,
                    dist: Some(w),
                    domain_sites: front.at.map(|f| f as usize + 1),
                    domain_edges: front.at.map(|f| f as usize),
                });
            }
        }
        if t >= horizon {
            break;
        }
        if (w as i64) >= run.r_max {
            break;
        }
        if front.at == Some(w) {
            w -= 1;
            front.budget -= 1;
            if front.budget == 0 {
                let from = front.at.expect("frontier") + 1;
                front.advance(from, w + (horizon - t) + 1, &mut rngs.domain)?;
                out.frontier_log.push((t + 1, front.at));
            }
        } else if w == 0 {
            w = 1;
        } else if rngs.walk.random_bool(chain.p_plus.at(w)) {
            w += 1;
        } else {
            w -= 1;
        }
        t += 1;
        if w == 0 {
            out.returns += 1;
            out.last_return = Some(t);
        }
    }
    out.w = w;
    Ok(out)
}

/// Exact `p_n` for layered records: the chain on all of Z_+ started at
/// `W_eta` hits 0 before the frozen frontier `F(eta)`. Uses the gambler's
/// ruin formula `P_w = sum_{w <= j < F} rho_j / sum_{j < F} rho_j` with
/// `rho_j = prod_{i=1}^{j} (1 - p(i)) / p(i)`, falling back to
/// [`birth_death_field`] if the weights overflow.
pub struct LayeredSnapshots<'a> {
    pub chain: &'a LayeredChain,
    pub frontier_log: &'a [(u64, Option<u64>)],
    /// `prefix[n] = sum_{j < n} rho_j`.
    prefix: Vec<f64>,
    fallback: Option<(u64, Vec<f64>)>,
}

impl<'a> LayeredSnapshots<'a> {
    pub fn new(chain: &'a LayeredChain, frontier_log: &'a [(u64, Option<u64>)]) -> Self {
        LayeredSnapshots {
            chain,
            frontier_log,
            prefix: vec![0.0],
            fallback: None,
        }
    }

    fn extend_to(&mut self, n: usize) {
        while self.prefix.len() <= n {
            let j = self.prefix.len() - 1;
            let rho = if j == 0 {
                1.0
            } else {
                let prev = self.prefix[j] - self.prefix[j - 1];
                let p = self.chain.p_plus.at(j as u64);
                prev * (1.0 - p) / p
            };
            self.prefix.push(self.prefix[j] + rho);
        }
    }

    /// `P_w(hit 0 before f)`.
    pub fn hit_probability(&mut self, w: u64, f: u64) -> Result<f64> {
        if w == 0 {
            return Ok(1.0);
        }
        if w >= f {
            return Ok(0.0);
        }
        self.extend_to(f as usize);
        let total = self.prefix[f as usize];
        if total.is_finite() && total > 0.0 {
            return Ok((total - self.prefix[w as usize]) / total);
        }
        if self.fallback.as_ref().is_none_or(|(g, _)| *g != f) {
            self.fallback = Some((f, birth_death_field(self.chain, f)?));
        }
        Ok(self.fallback.as_ref().expect("just set").1[w as usize])
    }
}

/// `P_w(hit 0 before f)` for the birth-death chain, as a Dirichlet problem.
pub fn birth_death_field(chain: &LayeredChain, f: u64) -> Result<Vec<f64>> {
    let n = f as usize + 1;
    let mut nodes = vec![Node::Free; n];
    nodes[0] = Node::Fixed(1.0);
    nodes[n - 1] = Node::Fixed(0.0);
    let trans = (0..n)
        .map(|k| {
            if k == 0 || k == n - 1 {
                Vec::new()
            } else {
                let p = chain.p_plus.at(k as u64);
                vec![(k + 1, p), (k - 1, 1.0 - p)]
            }
        })
        .collect();
    let p = DirichletProblem::chain(nodes, trans, 0)?;
    Ok(p.solve(Method::Auto)?.values)
}

impl SnapshotSource for LayeredSnapshots<'_> {
    fn term(&mut self, rec: &StopRecord) -> Result<Option<Term>> {
        let view = LayeredView {
            frontier_log: self.frontier_log,
        };
        let Some(f) = view.frontier_at(rec.eta) else {
            return Ok(None);
        };
        let w = rec.start.coord(0) as u64;
        Ok(Some(Term::exact(self.hit_probability(w, f)?)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Substream};

    fn cfg(dim: usize, c: f64, schedule: Schedule) -> EgsConfig {
        EgsConfig {
            dim,
            c,
            schedule,
            metric: Metric::Graph,
        }
    }

    #[test]
    fn one_dimensional_unit_schedule() {
        let c = cfg(1, 1.0, Schedule::constant(1));
        let out = egs_run(&c, &RunConfig::new(2_000), &mut Streams::new(1, 0), false).unwrap();
        assert_eq!(out.tau_log[0], 0);
        assert!(out.tau_log.windows(2).all(|w| w[1] > w[0]));
        // every touch of the shell boundary expands
        assert!(out.tau_log.len() > 10);
    }

    #[test]
    fn expansion_on_third_boundary_visit() {
        let c = cfg(2, 2.0, Schedule::Table { values: vec![3, 1] });
        let mut st = EgsState::new(&c).unwrap();
        let mut rng = stream(5, 0, Substream::Walk);
        let mut visits = 0;
        loop {
            let on_bd = neighbors(st.walk.pos, 2).iter().any(|y| !st.shape().contains(y));
            visits += on_bd as u64;
            egs_step(&mut st, &c, &mut rng).unwrap();
            if st.k == 2 {
                break;
            }
            assert!(st.hits < 3);
        }
        assert_eq!(visits, 3);
        assert_eq!(st.tau_log[1], st.walk.t);
    }

    #[test]
    fn shell_constant_between_expansions() {
        let c = EgsConfig {
            metric: Metric::Euclidean,
            ..cfg(2, 1.0, Schedule::constant(2))
        };
        let out = egs_run(&c, &RunConfig::new(5_000).keep_all(), &mut Streams::new(3, 0), false).unwrap();
        let view = ShellView {
            cfg: &c,
            tau_log: &out.tau_log,
        };
        for (t, z) in out.trajectory.iter().enumerate() {
            assert!(c.shell(view.k_at(t as u64)).contains(z));
        }
    }

    #[test]
    fn layered_q_zero_is_reflected_walk() {
        let chain = LayeredChain {
            p_plus: LayerValues::Const(0.5),
            q: LayerValues::Const(0.0),
            schedule: Schedule::constant(1),
        };
        let out = layered_chain_run(&chain, &RunConfig::new(10_000), &mut Streams::new(1, 0)).unwrap();
        assert_eq!(out.frontier_log, vec![(0, None)]);
        assert!(out.returns > 10);
    }

    #[test]
    fn layered_frontier_confines_walk() {
        let chain = LayeredChain {
            p_plus: LayerValues::Const(2.0 / 3.0),
            q: LayerValues::Const(1.0),
            schedule: Schedule::constant(2),
        };
        let out = layered_chain_run(&chain, &RunConfig::new(20_000).keep_all(), &mut Streams::new(2, 0)).unwrap();
        for row in &out.trajectory {
            assert!(row.w <= row.frontier.unwrap());
        }
        assert!(out.frontier_log.windows(2).all(|w| w[1].1 > w[0].1));
    }

    #[test]
    fn birth_death_field_closed_form() {
        let chain = LayeredChain {
            p_plus: LayerValues::Const(2.0 / 3.0),
            q: LayerValues::Const(1.0),
            schedule: Schedule::constant(1),
        };
        let f = birth_death_field(&chain, 12).unwrap();
        let r: f64 = 0.5;
        for w in 0..=12 {
            let exact = (r.powi(w) - r.powi(12)) / (1.0 - r.powi(12));
            assert!((f[w as usize] - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn snapshot_formula_matches_solve() {
        let chain = LayeredChain {
            p_plus: LayerValues::Table(vec![0.5, 0.5, 0.3, 0.7, 0.45, 0.6]),
            q: LayerValues::Const(1.0),
            schedule: Schedule::constant(1),
        };
        let mut snaps = LayeredSnapshots::new(&chain, &[]);
        for f in [1u64, 2, 5, 17, 40] {
            let field = birth_death_field(&chain, f).unwrap();
            for w in 0..=f {
                assert!((snaps.hit_probability(w, f).unwrap() - field[w as usize]).abs() < 1e-12, "f={f} w={w}");
            }
        }
    }
}
