//! Open-by-touch interactions, extended walks with boundary policies, and
//! the coupled biased-opening walk on Z^2.

use std::fmt;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{neighbors, Base, BallShape, Domain, Edge, GrowingDomain, Metric, Site};
use crate::potential::dirichlet::dense_solve;
use crate::rng::{StreamRng, Streams};
use crate::walker::{srw_step, Dynamics, WalkState};

/// Neighbour indices in [`neighbors`] order for d = 2.
pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;
pub const DOWN: usize = 2;
pub const UP: usize = 3;

/// Which closed edges a POBT opening affects.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PobtRule {
    /// Every closed incident edge.
    All,
    /// One closed incident edge chosen uniformly.
    OneUniform,
}

/// Which incident edges a FOBT first visit opens.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FobtRule {
    All,
    /// Every incident edge except the one towards `-e_1`.
    RightUpDown,
}

impl FobtRule {
    fn opens(self, index: usize) -> bool {
        match self {
            FobtRule::All => true,
            FobtRule::RightUpDown => index != LEFT,
        }
    }
}

/// Domain update rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Interaction {
    Obt,
    Pobt { eps: f64, open: PobtRule },
    Fobt { open: FobtRule },
    /// At a boundary visit, open up to `max_edges` closed edges chosen
    /// uniformly among those within l1-distance `radius` of the walker and
    /// touching the current domain.
    Robt { radius: u32, max_edges: usize },
}

/// Radius of the correction ball `C(x) = B(x, r(x))`:
/// `r(x) = clamp(floor(c * |x|_1), 1, max)`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Radius {
    pub c: f64,
    pub max: u32,
}

impl Default for Radius {
    fn default() -> Self {
        Radius { c: 0.0, max: 1 }
    }
}

impl Radius {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.c) || self.max < 1 {
            return Err(Error::invalid(format!(
                "correction radius needs 0 <= c < 1 and max >= 1, got c={} max={}",
                self.c, self.max
            )));
        }
        Ok(())
    }

    pub fn at(&self, x: Site) -> u32 {
        let r = (self.c * x.l1() as f64).floor();
        (r.min(self.max as f64) as u32).max(1)
    }
}

/// Scripted boundary move: target for a boundary site (None defers to the
/// uniform rule).
pub type Script = Arc<dyn Fn(Site) -> Option<Site> + Send + Sync>;

/// How an extended walk leaves a boundary site.
#[derive(Clone, Default, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// Uniform over the admissible targets; for `r = 1` an ordinary SRW
    /// step on the current domain.
    #[default]
    Uniform,
    /// Axis step with conditional mean `-delta * y / |y|_1`, closest to
    /// uniform in relative entropy.
    DriftToOrigin { delta: f64 },
    #[serde(skip)]
    Scripted(Script),
}

impl fmt::Debug for BoundaryPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryPolicy::Uniform => write!(f, "Uniform"),
            BoundaryPolicy::DriftToOrigin { delta } => write!(f, "DriftToOrigin({delta})"),
            BoundaryPolicy::Scripted(_) => write!(f, "Scripted"),
        }
    }
}

/// Opens every incident edge of a boundary site, from graph index `t + 1`.
pub fn obt_update(domain: &mut GrowingDomain, pos: Site, t: u64) -> usize {
    if !domain.is_boundary(pos) {
        return 0;
    }
    let dim = domain.dim();
    domain.add_edges((0..2 * dim).map(|i| Edge::incident(pos, i)), t + 1)
}

fn closed_incident(domain: &GrowingDomain, pos: Site) -> Vec<Edge> {
    (0..2 * domain.dim())
        .map(|i| Edge::incident(pos, i))
        .filter(|&e| !domain.is_open(e))
        .collect()
}

/// With probability `eps`, opens closed incident edges of a boundary site
/// per `rule`. Returns the number of edges opened.
pub fn pobt_update(
    domain: &mut GrowingDomain,
    pos: Site,
    t: u64,
    eps: f64,
    rule: PobtRule,
    rng: &mut StreamRng,
) -> Result<usize> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::invalid(format!("POBT needs 0 < eps <= 1, got {eps}")));
    }
    if !domain.is_boundary(pos) {
        return Ok(0);
    }
    if !rng.random_bool(eps) {
        return Ok(0);
    }
    let closed = closed_incident(domain, pos);
    let chosen = match rule {
        PobtRule::All => closed,
        PobtRule::OneUniform => vec![closed[rng.random_range(0..closed.len())]],
    };
    Ok(domain.add_edges(chosen, t + 1))
}

/// FOBT opening at the first visit of `pos`; `visited` is updated.
pub fn fobt_update(
    domain: &mut GrowingDomain,
    pos: Site,
    t: u64,
    rule: FobtRule,
    visited: &mut FxHashSet<Site>,
) -> usize {
    if !visited.insert(pos) || !domain.is_boundary(pos) {
        return 0;
    }
    let dim = domain.dim();
    domain.add_edges(
        (0..2 * dim).filter(|&i| rule.opens(i)).map(|i| Edge::incident(pos, i)),
        t + 1,
    )
}

/// ROBT opening: up to `max_edges` closed edges near `pos`.
pub fn robt_update(
    domain: &mut GrowingDomain,
    pos: Site,
    t: u64,
    radius: u32,
    max_edges: usize,
    rng: &mut StreamRng,
) -> usize {
    if !domain.is_boundary(pos) || max_edges == 0 {
        return 0;
    }
    let dim = domain.dim();
    let mut seen = FxHashSet::default();
    let mut cands = Vec::new();
    for rel in BallShape::new(Metric::Graph, radius as f64).sites(dim) {
        let z = pos.add(&rel);
        for i in 0..2 * dim {
            let e = Edge::incident(z, i);
            if seen.insert(e) && !domain.is_open(e) && (domain.contains(e.lo()) || domain.contains(e.hi())) {
                cands.push(e);
            }
        }
    }
    cands.sort_unstable();
    let k = max_edges.min(cands.len());
    let picked: Vec<Edge> = sample(rng, cands.len(), k).into_iter().map(|i| cands[i]).collect();
    domain.add_edges(picked, t + 1)
}

/// Exponentially tilted law on the unit moves `dirs` with mean `target`;
/// this is the law closest to uniform in relative entropy. Infeasible
/// targets are shrunk towards the centroid of `dirs` until feasible.
pub fn tilted_law(dirs: &[Site], target: &[f64], dim: usize) -> Vec<f64> {
    let n = dirs.len();
    let uniform = vec![1.0 / n as f64; n];
    if n <= 1 {
        return uniform;
    }
    let v: Vec<Vec<f64>> = dirs
        .iter()
        .map(|z| (0..dim).map(|a| z.coord(a) as f64).collect())
        .collect();
    let centroid: Vec<f64> = (0..dim).map(|a| v.iter().map(|x| x[a]).sum::<f64>() / n as f64).collect();
    // axes with no spread cannot be tilted
    let spanned: Vec<bool> = (0..dim)
        .map(|a| v.iter().any(|x| (x[a] - centroid[a]).abs() > 1e-12))
        .collect();
    let mut goal: Vec<f64> = (0..dim)
        .map(|a| if spanned[a] { target[a] } else { centroid[a] })
        .collect();
    for _ in 0..60 {
        if let Some(q) = solve_tilt(&v, &goal, dim) {
            return q;
        }
        for a in 0..dim {
            goal[a] = centroid[a] + 0.5 * (goal[a] - centroid[a]);
        }
    }
    uniform
}

fn tilt_weights(v: &[Vec<f64>], lambda: &[f64]) -> (Vec<f64>, f64) {
    let scores: Vec<f64> = v
        .iter()
        .map(|x| x.iter().zip(lambda).map(|(a, b)| a * b).sum())
        .collect();
    let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
    let z: f64 = w.iter().sum();
    let log_z = top + z.ln();
    (w.into_iter().map(|x| x / z).collect(), log_z)
}

fn solve_tilt(v: &[Vec<f64>], goal: &[f64], dim: usize) -> Option<Vec<f64>> {
    let mut lambda = vec![0.0; dim];
    let dual = |lam: &[f64]| tilt_weights(v, lam).1 - lam.iter().zip(goal).map(|(a, b)| a * b).sum::<f64>();
    for _ in 0..200 {
        let (q, _) = tilt_weights(v, &lambda);
        let mean: Vec<f64> = (0..dim).map(|a| q.iter().zip(v).map(|(p, x)| p * x[a]).sum()).collect();
        let grad: Vec<f64> = (0..dim).map(|a| mean[a] - goal[a]).collect();
        if grad.iter().all(|g| g.abs() < 1e-14) {
            return Some(q);
        }
        let mut hess = vec![0.0; dim * dim];
        for (p, x) in q.iter().zip(v) {
            for a in 0..dim {
                for b in 0..dim {
                    hess[a * dim + b] += p * (x[a] - mean[a]) * (x[b] - mean[b]);
                }
            }
        }
        for a in 0..dim {
            hess[a * dim + a] += 1e-12;
        }
        let step = dense_solve(&mut hess, grad.clone(), dim).ok()?;
        let f0 = dual(&lambda);
        let mut s = 1.0;
        loop {
            let trial: Vec<f64> = lambda.iter().zip(&step).map(|(l, d)| l - s * d).collect();
            if dual(&trial) <= f0 || s < 1e-10 {
                lambda = trial;
                break;
            }
            s *= 0.5;
        }
        if lambda.iter().any(|l| !l.is_finite() || l.abs() > 60.0) {
            return None;
        }
    }
    None
}

/// Picks the move of an extended walk at a boundary site.
pub fn extended_boundary_step(
    state: &mut WalkState,
    domain: &GrowingDomain,
    policy: &BoundaryPolicy,
    radius: &Radius,
    rngs: &mut Streams,
) -> Result<()> {
    let y = state.pos;
    let dim = domain.dim();
    let r = radius.at(y);
    match policy {
        BoundaryPolicy::Scripted(script) => {
            if let Some(target) = script(y) {
                if target == y || target.l1_dist(&y) > r as i64 || !domain.contains(target) {
                    return Err(Error::InadmissibleTarget { from: y, target });
                }
                state.arrive(target);
                return Ok(());
            }
            uniform_move(state, domain, r, &mut rngs.walk)
        }
        BoundaryPolicy::Uniform => uniform_move(state, domain, r, &mut rngs.walk),
        BoundaryPolicy::DriftToOrigin { delta } => {
            if y.is_origin() {
                return uniform_move(state, domain, 1, &mut rngs.walk);
            }
            let nbrs = domain.open_neighbors(y);
            if nbrs.is_empty() {
                return Err(Error::IsolatedSite(y));
            }
            let dirs: Vec<Site> = nbrs.iter().map(|z| z.sub(&y)).collect();
            let norm = y.l1() as f64;
            let target: Vec<f64> = (0..dim).map(|a| -delta * y.coord(a) as f64 / norm).collect();
            let q = tilted_law(&dirs, &target, dim);
            let u: f64 = rngs.policy.random();
            let mut acc = 0.0;
            let mut pick = nbrs.len() - 1;
            for (i, p) in q.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            state.arrive(nbrs[pick]);
            Ok(())
        }
    }
}

fn uniform_move(state: &mut WalkState, domain: &GrowingDomain, r: u32, rng: &mut StreamRng) -> Result<()> {
    if r <= 1 {
        return srw_step(state, domain, rng);
    }
    let y = state.pos;
    let mut cands: Vec<Site> = BallShape::new(Metric::Graph, r as f64)
        .sites(domain.dim())
        .into_iter()
        .filter(|rel| !rel.is_origin())
        .map(|rel| y.add(&rel))
        .filter(|&z| domain.contains(z))
        .collect();
    if cands.is_empty() {
        return Err(Error::IsolatedSite(y));
    }
    cands.sort_unstable();
    state.arrive(cands[rng.random_range(0..cands.len())]);
    Ok(())
}

/// An interaction model: a domain update rule plus the boundary policy of
/// the extended walk.
///
/// Each step first applies the update induced by `X_t` (edges present from
/// `t + 1`) and then moves on `G_{t+1}`: a plain SRW step when `X_t` was not
/// a boundary site, the boundary policy otherwise.
#[derive(Clone, Debug)]
pub struct InteractionPolicy {
    pub interaction: Interaction,
    pub boundary: BoundaryPolicy,
    pub radius: Radius,
    visited: FxHashSet<Site>,
}

impl InteractionPolicy {
    pub fn new(interaction: Interaction, boundary: BoundaryPolicy, radius: Radius) -> Result<InteractionPolicy> {
        radius.validate()?;
        match &interaction {
            Interaction::Pobt { eps, .. } if !(*eps > 0.0 && *eps <= 1.0) => {
                return Err(Error::invalid(format!("POBT needs 0 < eps <= 1, got {eps}")));
            }
            _ => {}
        }
        if let BoundaryPolicy::DriftToOrigin { delta } = boundary {
            if !(0.0..1.0).contains(&delta) {
                return Err(Error::invalid(format!("drift needs 0 <= delta < 1, got {delta}")));
            }
        }
        Ok(InteractionPolicy {
            interaction,
            boundary,
            radius,
            visited: FxHashSet::default(),
        })
    }

    pub fn obt() -> InteractionPolicy {
        InteractionPolicy::new(Interaction::Obt, BoundaryPolicy::Uniform, Radius::default()).expect("valid")
    }
}

impl Dynamics for InteractionPolicy {
    fn advance(&mut self, domain: &mut GrowingDomain, state: &mut WalkState, rngs: &mut Streams) -> Result<()> {
        let (t, pos) = (state.t, state.pos);
        let on_boundary = domain.is_boundary(pos);
        match self.interaction {
            Interaction::Obt => {
                obt_update(domain, pos, t);
            }
            Interaction::Pobt { eps, open } => {
                pobt_update(domain, pos, t, eps, open, &mut rngs.domain)?;
            }
            Interaction::Fobt { open } => {
                fobt_update(domain, pos, t, open, &mut self.visited);
            }
            Interaction::Robt { radius, max_edges } => {
                robt_update(domain, pos, t, radius, max_edges, &mut rngs.domain);
            }
        }
        if on_boundary {
            extended_boundary_step(state, domain, &self.boundary, &self.radius, rngs)
        } else {
            srw_step(state, domain, &mut rngs.walk)
        }
    }
}

/// FOBT walk on Z^2 that opens the right/up/down edges of each newly
/// visited site and then holds for one step.
#[derive(Clone, Debug, Default)]
pub struct FobtBiased {
    visited: FxHashSet<Site>,
}

impl FobtBiased {
    pub fn new() -> FobtBiased {
        FobtBiased::default()
    }

    pub fn visited(&self) -> &FxHashSet<Site> {
        &self.visited
    }
}

/// One step of the biased FOBT walk. Returns whether it was a holding step.
pub fn fobt_biased_step(
    state: &mut WalkState,
    domain: &mut GrowingDomain,
    visited: &mut FxHashSet<Site>,
    rng: &mut StreamRng,
) -> Result<bool> {
    if domain.dim() != 2 {
        return Err(Error::invalid("the biased FOBT walk lives on Z^2"));
    }
    let pos = state.pos;
    if visited.insert(pos) {
        domain.add_edges([RIGHT, DOWN, UP].map(|i| Edge::incident(pos, i)), state.t + 1);
        if let Base::Empty = domain.base() {
            domain.add_site(pos, state.t + 1);
        }
        state.arrive(pos);
        return Ok(true);
    }
    srw_step(state, domain, rng)?;
    Ok(false)
}

impl Dynamics for FobtBiased {
    fn advance(&mut self, domain: &mut GrowingDomain, state: &mut WalkState, rngs: &mut Streams) -> Result<()> {
        fobt_biased_step(state, domain, &mut self.visited, &mut rngs.walk).map(|_| ())
    }
}

/// Joint run of the biased FOBT walk `E` and a free SRW `R` on Z^2.
#[derive(Clone, Debug, Default)]
pub struct CoupledPair {
    pub e: WalkState,
    pub r: Site,
    /// `(E_t - R(t))_1` for `t = 0..=horizon`.
    pub diff1: Vec<i64>,
    /// Super-non-NV times `m` with whether `E_m`'s left edge is in D_0.
    pub snn_times: Vec<(u64, bool)>,
    /// First step at which `diff1` decreased, if any.
    pub monotonicity_violation: Option<u64>,
    /// Move counts by direction (left, right, down, up).
    pub r_moves: [u64; 4],
    pub e_moves_left_open: [u64; 4],
    pub e_moves_left_closed: [u64; 4],
    pub holds: u64,
}

impl CoupledPair {
    pub fn final_diff1(&self) -> i64 {
        self.diff1.last().copied().unwrap_or(0)
    }
}

/// Runs the coupling for `horizon` steps of `E`'s clock. `R` moves exactly
/// on `E`'s moving steps, with the same direction except when `E`'s left
/// edge is closed and `R` goes left, in which case `E` picks uniformly among
/// right/down/up.
pub fn coupled_biased_walk(d0: &mut GrowingDomain, horizon: u64, rngs: &mut Streams) -> Result<CoupledPair> {
    if d0.dim() != 2 {
        return Err(Error::invalid("the coupling lives on Z^2"));
    }
    let mut pair = CoupledPair {
        e: WalkState::at_origin(),
        r: Site::ORIGIN,
        diff1: Vec::with_capacity(horizon as usize + 1),
        ..CoupledPair::default()
    };
    pair.diff1.push(0);
    let mut visited: FxHashSet<Site> = FxHashSet::default();
    while pair.e.t < horizon {
        let pos = pair.e.pos;
        if !visited.contains(&pos) {
            let left = neighbors(pos, 2)[LEFT];
            if !visited.contains(&left) {
                pair.snn_times.push((pair.e.t, d0.initially_open(Edge::incident(pos, LEFT))));
            }
            visited.insert(pos);
            d0.add_edges([RIGHT, DOWN, UP].map(|i| Edge::incident(pos, i)), pair.e.t + 1);
            pair.e.arrive(pos);
            pair.holds += 1;
        } else {
            let r_dir = rngs.walk.random_range(0..4usize);
            let left_open = d0.is_open(Edge::incident(pos, LEFT));
            let e_dir = if left_open || r_dir != LEFT {
                r_dir
            } else {
                [RIGHT, DOWN, UP][rngs.companion.random_range(0..3usize)]
            };
            pair.r_moves[r_dir] += 1;
            if left_open {
                pair.e_moves_left_open[e_dir] += 1;
            } else {
                pair.e_moves_left_closed[e_dir] += 1;
            }
            pair.r = neighbors(pair.r, 2)[r_dir];
            pair.e.arrive(neighbors(pos, 2)[e_dir]);
        }
        let d = (pair.e.pos.coord(0) - pair.r.coord(0)) as i64;
        if pair.monotonicity_violation.is_none() && d < *pair.diff1.last().expect("non-empty") {
            pair.monotonicity_violation = Some(pair.e.t);
        }
        pair.diff1.push(d);
    }
    Ok(pair)
}

/// `s_t = ceil((1 + c)^(t-1))` for `t = 1..=terms`.
pub fn conv_obt_radii(c: f64, terms: usize) -> Vec<i32> {
    let mut out: Vec<i32> = Vec::with_capacity(terms);
    for t in 1..=terms {
        let s = (1.0 + c).powi(t as i32 - 1).ceil() as i32;
        out.push(s);
    }
    out
}

/// The four-ray fixture on Z^2: every edge open except the outward edge at
/// `s_t * u` for each radius `s_t` and `u` in `{+-e_1, +-e_2}`, together with
/// the script sending a boundary site `s_t * u` to `s_{t+1} * u`.
pub fn conv_obt_fixture(c: f64, terms: usize) -> Result<(GrowingDomain, Script)> {
    if !(0.0..1.0).contains(&c) || terms < 2 {
        return Err(Error::invalid("fixture needs 0 <= c < 1 and at least two radii"));
    }
    let radii = conv_obt_radii(c, terms);
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("radii must be strictly increasing"));
    }
    let mut closed = FxHashSet::default();
    let mut next: FxHashMap<Site, Site> = FxHashMap::default();
    for axis in 0..2 {
        for sign in [-1, 1] {
            for (i, &s) in radii.iter().enumerate() {
                let here = Site::axis_point(axis, sign * s);
                let out = here.shifted(axis, sign);
                closed.insert(Edge::between(here, out).expect("adjacent"));
                if let Some(&s2) = radii.get(i + 1) {
                    next.insert(here, Site::axis_point(axis, sign * s2));
                }
            }
        }
    }
    let domain = GrowingDomain::new(2, Base::AllBut(closed))?;
    let script: Script = Arc::new(move |y| next.get(&y).copied());
    Ok((domain, script))
}
