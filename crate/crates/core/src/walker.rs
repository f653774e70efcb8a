//! Simple random walk on a growing domain, with recurrence bookkeeping and
//! the online stopping-time log behind the `S = sum p_n` criterion.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{bfs_distance, neighbors, Base, BoundaryHistory, Domain, GrowingDomain, Site};
use crate::rng::{StreamRng, Streams};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WalkState {
    pub t: u64,
    pub pos: Site,
    /// Number of times `s <= t` with `X_s = 0`.
    pub visits_origin: u64,
    /// Last `s <= t` with `X_s = 0`.
    pub last_return: Option<u64>,
}

impl WalkState {
    pub fn at(pos: Site) -> WalkState {
        let home = pos.is_origin();
        WalkState {
            t: 0,
            pos,
            visits_origin: home as u64,
            last_return: home.then_some(0),
        }
    }

    pub fn at_origin() -> WalkState {
        WalkState::at(Site::ORIGIN)
    }

    /// Advances the clock by one and moves to `pos` (which may equal the
    /// current position for a holding step).
    #[inline]
    pub fn arrive(&mut self, pos: Site) {
        self.t += 1;
        self.pos = pos;
        if pos.is_origin() {
            self.visits_origin += 1;
            self.last_return = Some(self.t);
        }
    }
}

/// One step to a uniformly chosen open neighbour.
#[inline]
pub fn srw_step<D: Domain + ?Sized>(state: &mut WalkState, domain: &D, rng: &mut StreamRng) -> Result<()> {
    let nbrs = domain.open_neighbors(state.pos);
    if nbrs.is_empty() {
        return Err(Error::IsolatedSite(state.pos));
    }
    let next = nbrs[rng.random_range(0..nbrs.len())];
    state.arrive(next);
    Ok(())
}

/// One step of SRW on the full lattice Z^dim.
#[inline]
pub fn lattice_step(pos: Site, dim: usize, rng: &mut StreamRng) -> Site {
    neighbors(pos, dim)[rng.random_range(0..2 * dim)]
}

/// One interval `[eta_n, sigma_n)` of the stopping-time sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopRecord {
    pub n: usize,
    pub eta: u64,
    /// `None` while the walk has not yet touched the frozen boundary.
    pub sigma: Option<u64>,
    /// `X_{eta_n}`.
    pub start: Site,
    /// Whether 0 was visited in `[eta_n, min(sigma_n, now))`.
    pub hit: bool,
    pub p_hat: Option<f64>,
}

impl StopRecord {
    /// The event A_n, once sigma_n has fired.
    pub fn a_n(&self) -> Option<bool> {
        self.sigma.map(|_| self.hit)
    }
}

impl Serialize for Site {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Site {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Site, D::Error> {
        <[i32; crate::lattice::MAX_DIM]>::deserialize(d).map(Site)
    }
}

/// Online log of the times
/// `sigma_n = inf{t >= eta_n : X_t in dG_{eta_n}}` and
/// `eta_{n+1} = inf{t >= sigma_n : X_t not in dG_t}`, with `eta_0 = 0`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StoppingLog {
    pub records: Vec<StopRecord>,
    open: bool,
}

impl StoppingLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds the position at time `t` together with the domain G_t.
    /// Must be called for every `t` in increasing order.
    pub fn update<B: BoundaryHistory + ?Sized>(&mut self, t: u64, pos: Site, view: &B) {
        if self.open {
            let rec = self.records.last_mut().expect("open record");
            if view.was_boundary_at(pos, rec.eta) {
                rec.sigma = Some(t);
                self.open = false;
            } else {
                rec.hit |= pos.is_origin();
                return;
            }
        }
        if !view.is_boundary_now(pos) {
            self.records.push(StopRecord {
                n: self.records.len(),
                eta: t,
                sigma: None,
                start: pos,
                hit: pos.is_origin(),
                p_hat: None,
            });
            self.open = true;
        }
    }

    pub fn closed(&self) -> impl Iterator<Item = &StopRecord> {
        self.records.iter().filter(|r| r.sigma.is_some())
    }

    pub fn hits(&self) -> usize {
        self.closed().filter(|r| r.hit).count()
    }
}

/// Offline recomputation of the stopping log from a stored trajectory.
pub fn stopping_log_offline<B: BoundaryHistory + ?Sized>(trajectory: &[Site], view: &B) -> StoppingLog {
    let mut log = StoppingLog::new();
    for (t, &z) in trajectory.iter().enumerate() {
        log.update(t as u64, z, view);
    }
    log
}

/// A model's transition rule: applies the domain update induced by the
/// current position (edges tagged `t + 1`) and moves the walker.
pub trait Dynamics {
    fn advance(&mut self, domain: &mut GrowingDomain, state: &mut WalkState, rngs: &mut Streams) -> Result<()>;
}

/// SRW on a fixed domain.
#[derive(Copy, Clone, Debug, Default)]
pub struct FixedDomain;

impl Dynamics for FixedDomain {
    fn advance(&mut self, domain: &mut GrowingDomain, state: &mut WalkState, rngs: &mut Streams) -> Result<()> {
        srw_step(state, domain, &mut rngs.walk)
    }
}

/// Checkpoint schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Checkpoints {
    /// Powers of two up to the horizon, plus the horizon.
    Dyadic,
    /// Explicit times (clipped to the horizon, horizon appended).
    List { times: Vec<u64> },
}

impl Default for Checkpoints {
    fn default() -> Self {
        Checkpoints::Dyadic
    }
}

impl Checkpoints {
    pub fn times(&self, horizon: u64) -> Vec<u64> {
        let mut v: Vec<u64> = match self {
            Checkpoints::Dyadic => std::iter::successors(Some(1u64), |&t| t.checked_mul(2))
                .take_while(|&t| t <= horizon)
                .collect(),
            Checkpoints::List { times } => times.iter().copied().filter(|&t| t <= horizon).collect(),
        };
        if horizon > 0 {
            v.push(horizon);
        }
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// One row of checkpoint statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRow {
    pub t: u64,
    pub n0: u64,
    pub last_return: Option<u64>,
    /// Within-domain graph distance from 0 to `X_t` (None when the search
    /// budget ran out).
    pub dist: Option<u64>,
    pub domain_sites: Option<usize>,
    pub domain_edges: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub horizon: u64,
    pub checkpoints: Vec<u64>,
    /// Replica aborts once `||X_t||_1 >= r_max`.
    pub r_max: i64,
    /// Keep every `thin`-th position; 0 keeps none.
    pub thin: u64,
    /// Node budget for checkpoint distance searches.
    pub dist_budget: usize,
}

impl RunConfig {
    pub fn new(horizon: u64) -> RunConfig {
        RunConfig {
            horizon,
            checkpoints: Checkpoints::Dyadic.times(horizon),
            r_max: i64::MAX,
            thin: 0,
            dist_budget: 1 << 20,
        }
    }

    pub fn keep_all(mut self) -> RunConfig {
        self.thin = 1;
        self
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trajectory: Vec<Site>,
    pub checkpoints: Vec<CheckpointRow>,
    pub log: StoppingLog,
    pub state: WalkState,
    pub truncated: bool,
}

fn checkpoint_row(state: &WalkState, domain: &GrowingDomain, budget: usize) -> CheckpointRow {
    let dist = match domain.base() {
        Base::Full => Some(state.pos.l1() as u64),
        _ => bfs_distance(domain.dim(), Site::ORIGIN, state.pos, |e| domain.is_open(e), budget),
    };
    CheckpointRow {
        t: state.t,
        n0: state.visits_origin,
        last_return: state.last_return,
        dist,
        domain_sites: domain.site_count(),
        domain_edges: domain.edge_count(),
    }
}

/// Drives `dynamics` for `cfg.horizon` steps.
pub fn run<M: Dynamics + ?Sized>(
    mut state: WalkState,
    domain: &mut GrowingDomain,
    dynamics: &mut M,
    cfg: &RunConfig,
    rngs: &mut Streams,
) -> Result<RunOutput> {
    let mut out = RunOutput {
        trajectory: Vec::new(),
        checkpoints: Vec::new(),
        log: StoppingLog::new(),
        state: state.clone(),
        truncated: false,
    };
    if cfg.horizon == 0 {
        return Ok(out);
    }
    let mut next_cp = cfg.checkpoints.iter().copied().peekable();
    let keep = |t: u64| cfg.thin > 0 && t % cfg.thin == 0;
    if keep(0) {
        out.trajectory.push(state.pos);
    }
    loop {
        out.log.update(state.t, state.pos, &*domain);
        while next_cp.peek().is_some_and(|&c| c <= state.t) {
            if next_cp.next() == Some(state.t) {
                out.checkpoints.push(checkpoint_row(&state, domain, cfg.dist_budget));
            }
        }
        if state.t >= cfg.horizon {
            break;
        }
        if state.pos.l1() >= cfg.r_max {
            out.truncated = true;
            break;
        }
        dynamics.advance(domain, &mut state, rngs)?;
        if keep(state.t) {
            out.trajectory.push(state.pos);
        }
    }
    out.state = state;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecurrenceStats {
    /// `(t, N_0(t))` at each checkpoint.
    pub n0_curve: Vec<(u64, u64)>,
    pub last_return: Option<u64>,
    /// `(t, d^{G_t}(0, X_t))` at each checkpoint.
    pub dist_series: Vec<(u64, Option<u64>)>,
}

/// Recurrence statistics from a full (unthinned) trajectory `X_0..X_T`,
/// using the time-stamped domain for the distance snapshots.
pub fn recurrence_stats(
    trajectory: &[Site],
    checkpoints: &[u64],
    domain: &GrowingDomain,
    dist_budget: usize,
) -> RecurrenceStats {
    let mut n0 = 0u64;
    let mut last_return = None;
    let mut n0_curve = Vec::new();
    let mut dist_series = Vec::new();
    let mut cps = checkpoints.iter().copied().peekable();
    for (t, z) in trajectory.iter().enumerate() {
        let t = t as u64;
        if z.is_origin() {
            n0 += 1;
            last_return = Some(t);
        }
        while cps.peek().is_some_and(|&c| c < t) {
            cps.next();
        }
        if cps.peek() == Some(&t) {
            cps.next();
            n0_curve.push((t, n0));
            let d = bfs_distance(domain.dim(), Site::ORIGIN, *z, |e| domain.is_open_at(e, t), dist_budget);
            dist_series.push((t, d));
        }
    }
    RecurrenceStats {
        n0_curve,
        last_return,
        dist_series,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{ball, Edge, Metric};

    fn s(c: &[i32]) -> Site {
        Site::from_slice(c)
    }

    #[test]
    fn degree_one_site_forces_the_move() {
        let mut d = GrowingDomain::empty(2).unwrap();
        d.add_edges([Edge::between(s(&[0, 0]), s(&[1, 0])).unwrap()], 0);
        let mut rngs = Streams::new(1, 0);
        for _ in 0..20 {
            let mut st = WalkState::at_origin();
            srw_step(&mut st, &d, &mut rngs.walk).unwrap();
            assert_eq!(st.pos, s(&[1, 0]));
            assert_eq!(st.t, 1);
        }
    }

    #[test]
    fn isolated_site_is_an_error() {
        let mut d = GrowingDomain::empty(2).unwrap();
        d.add_site(Site::ORIGIN, 0);
        let mut rngs = Streams::new(1, 0);
        let err = srw_step(&mut WalkState::at_origin(), &d, &mut rngs.walk).unwrap_err();
        assert!(matches!(err, Error::IsolatedSite(_)));
    }

    #[test]
    fn interior_step_frequencies_are_uniform() {
        let d = GrowingDomain::full(2).unwrap();
        let mut rngs = Streams::new(3, 0);
        let n = 1_000_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let mut st = WalkState::at_origin();
            srw_step(&mut st, &d, &mut rngs.walk).unwrap();
            let i = neighbors(Site::ORIGIN, 2).iter().position(|y| *y == st.pos).unwrap();
            counts[i] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn closed_edge_is_never_crossed() {
        let mut d = ball(Site::ORIGIN, 2.0, Metric::Graph, 2).unwrap();
        let _ = &mut d;
        // (1,0) has neighbours (0,0),(2,0),(1,-1),(1,1) in the ball: all open.
        // (2,0) has only its left edge open plus nothing else.
        let mut rngs = Streams::new(5, 0);
        for _ in 0..1000 {
            let mut st = WalkState::at(s(&[1, 1]));
            srw_step(&mut st, &d, &mut rngs.walk).unwrap();
            assert!(st.pos == s(&[0, 1]) || st.pos == s(&[1, 0]));
        }
    }

    #[test]
    fn zero_horizon_is_empty() {
        let mut d = ball(Site::ORIGIN, 1.0, Metric::Graph, 2).unwrap();
        let mut rngs = Streams::new(1, 0);
        let out = run(WalkState::at_origin(), &mut d, &mut FixedDomain, &RunConfig::new(0), &mut rngs).unwrap();
        assert!(out.trajectory.is_empty());
        assert!(out.checkpoints.is_empty());
        assert!(out.log.records.is_empty());
    }

    #[test]
    fn never_touching_the_boundary_leaves_one_open_record() {
        let mut d = GrowingDomain::full(3).unwrap();
        let mut rngs = Streams::new(2, 0);
        let out = run(WalkState::at_origin(), &mut d, &mut FixedDomain, &RunConfig::new(500), &mut rngs).unwrap();
        assert_eq!(out.log.records.len(), 1);
        assert_eq!(out.log.records[0].eta, 0);
        assert_eq!(out.log.records[0].sigma, None);
    }

    #[test]
    fn stopping_log_on_a_segment_matches_hand_trace() {
        // G_0 = {-2..2} on Z, fixed; boundary {-2, 2}.
        let d = ball(Site::ORIGIN, 2.0, Metric::Graph, 1).unwrap();
        let path: Vec<Site> = [0, 1, 2, 1, 0, -1, -2, -2, -1, 0, 1]
            .iter()
            .map(|&x| s(&[x]))
            .collect();
        let log = stopping_log_offline(&path, &d);
        // eta_0=0, sigma_0=2 (hit 0 at t=0); eta_1=3, sigma_1=6 (hit at 4);
        // t=7 still on the boundary, eta_2=8, open (hit at 9).
        let got: Vec<_> = log.records.iter().map(|r| (r.eta, r.sigma, r.hit)).collect();
        assert_eq!(got, vec![(0, Some(2), true), (3, Some(6), true), (8, None, true)]);
        assert_eq!(log.records[1].start, s(&[1]));
        assert_eq!(log.records[2].start, s(&[-1]));
    }

    #[test]
    fn recurrence_stats_of_an_excursion_free_path() {
        let d = GrowingDomain::full(1).unwrap();
        let path: Vec<Site> = (0..20).map(|x| s(&[x])).collect();
        let stats = recurrence_stats(&path, &[1, 2, 4, 8, 16], &d, 1000);
        assert!(stats.n0_curve.iter().all(|&(_, n)| n == 1));
        assert_eq!(stats.last_return, Some(0));
        for (t, dist) in stats.dist_series {
            assert_eq!(dist, Some(t));
        }
    }

    #[test]
    fn dyadic_checkpoints() {
        assert_eq!(Checkpoints::Dyadic.times(10), vec![1, 2, 4, 8, 10]);
        assert_eq!(Checkpoints::Dyadic.times(8), vec![1, 2, 4, 8]);
        assert!(Checkpoints::Dyadic.times(0).is_empty());
    }
}
