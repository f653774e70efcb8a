//! Probing simple random walk: the walker emits probes, each of which adds
//! a site (or an edge) to its domain `D_t`, starting from `D_0 = {0}`.

use rand::Rng;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{check_dim, neighbors, Domain, Edge, GrowingDomain, InducedDomain, Site};
use crate::rng::{StreamRng, Streams};
use crate::walker::{srw_step, WalkState};

/// Probe counts `m(t)`, one per step, with running sums.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProbeBudget {
    m: Vec<u32>,
    cumsum: Vec<u64>,
}

impl ProbeBudget {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, m: u32) {
        let prev = self.cumsum.last().copied().unwrap_or(0);
        self.m.push(m);
        self.cumsum.push(prev + m as u64);
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn m(&self) -> &[u32] {
        &self.m
    }

    /// Probes spent in the first `t` steps.
    pub fn cumsum(&self, t: usize) -> u64 {
        if t == 0 {
            0
        } else {
            self.cumsum[t - 1]
        }
    }

    pub fn total(&self) -> u64 {
        self.cumsum(self.len())
    }

    /// `m̄_t = t⁻¹ Σ_{s<t} m(s)`, for `1 <= t <= len`.
    pub fn mbar(&self, t: usize) -> f64 {
        self.cumsum(t) as f64 / t as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    /// `(t, m̄_t)` at the requested checkpoints.
    pub rows: Vec<(u64, f64)>,
    /// `max m̄_t` over the trailing half of the run.
    pub trailing: Option<f64>,
}

pub fn budget_report(budget: &ProbeBudget, checkpoints: &[u64]) -> BudgetReport {
    let n = budget.len();
    let rows = checkpoints
        .iter()
        .filter(|&&t| t >= 1 && t as usize <= n)
        .map(|&t| (t, budget.mbar(t as usize)))
        .collect();
    let trailing = (n > 0).then(|| ((n + 1) / 2..=n).map(|t| budget.mbar(t.max(1))).fold(0.0, f64::max));
    BudgetReport { rows, trailing }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Off,
    Lattice,
    Junction,
}

/// The stretched lattice: sites with at least `d - 1` coordinates in `LZ`
/// (lines joining the junctions `(LZ)^d`), with the lattice edges between
/// them.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StretchedLattice {
    pub l: i32,
    pub dim: usize,
}

impl StretchedLattice {
    pub fn new(l: i32, dim: usize) -> Result<StretchedLattice> {
        check_dim(dim)?;
        if l < 2 {
            return Err(Error::invalid(format!("stretch factor must be >= 2, got {l}")));
        }
        if dim < 2 {
            return Err(Error::invalid("the stretched lattice needs d >= 2"));
        }
        Ok(StretchedLattice { l, dim })
    }

    #[inline]
    pub fn membership(&self, z: Site) -> Membership {
        let on = (0..self.dim).filter(|&a| z.coord(a).rem_euclid(self.l) == 0).count();
        if on == self.dim {
            Membership::Junction
        } else if on + 1 == self.dim {
            Membership::Lattice
        } else {
            Membership::Off
        }
    }

    #[inline]
    pub fn contains(&self, z: Site) -> bool {
        self.membership(z) != Membership::Off
    }

    pub fn is_junction(&self, z: Site) -> bool {
        self.membership(z) == Membership::Junction
    }

    /// Neighbours of `z` inside the lattice, in [`neighbors`] order.
    pub fn neighbors(&self, z: Site) -> impl Iterator<Item = (usize, Site)> + '_ {
        neighbors(z, self.dim).into_iter().enumerate().filter(|(_, y)| self.contains(*y))
    }
}

pub fn stretched_membership(z: Site, l: i32, dim: usize) -> Result<Membership> {
    Ok(StretchedLattice::new(l, dim)?.membership(z))
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidedVariant {
    /// Open every closed lattice edge at a first visit.
    #[default]
    Full,
    /// `d = 2`: at junctions open only the right, down and up edges.
    Biased2d,
}

/// Guided probing along the stretched lattice.
#[derive(Clone, Debug)]
pub struct Guided {
    pub lattice: StretchedLattice,
    pub variant: GuidedVariant,
    pub domain: GrowingDomain,
    visited: FxHashSet<Site>,
}

impl Guided {
    pub fn new(lattice: StretchedLattice, variant: GuidedVariant) -> Result<Guided> {
        if variant == GuidedVariant::Biased2d && lattice.dim != 2 {
            return Err(Error::invalid("the biased guided variant needs d = 2"));
        }
        let mut domain = GrowingDomain::empty(lattice.dim)?;
        domain.add_site(Site::ORIGIN, 0);
        Ok(Guided {
            lattice,
            variant,
            domain,
            visited: FxHashSet::default(),
        })
    }

    /// Probes (if this is a first visit) and then steps; returns `m(t)`.
    pub fn step(&mut self, state: &mut WalkState, rng: &mut StreamRng) -> Result<u32> {
        let z = state.pos;
        let kind = self.lattice.membership(z);
        if kind == Membership::Off {
            return Err(Error::OffLattice(z));
        }
        let mut m = 0;
        if self.visited.insert(z) {
            let skip_left = self.variant == GuidedVariant::Biased2d && kind == Membership::Junction;
            let edges: Vec<Edge> = self
                .lattice
                .neighbors(z)
                .filter(|&(i, _)| !(skip_left && i == 0))
                .map(|(i, _)| Edge::incident(z, i))
                .filter(|&e| !self.domain.is_open(e))
                .collect();
            m = self.domain.add_edges(edges, state.t) as u32;
        }
        srw_step(state, &self.domain, rng)?;
        Ok(m)
    }
}

/// `2M` probes per step on `Z x {0}^(d-1)`, keeping `D_t` the interval
/// `[-a_t, a_t]`.
#[derive(Clone, Debug)]
pub struct Line {
    pub m: u32,
    pub half: u64,
}

impl Line {
    pub fn new(m: u32) -> Result<Line> {
        if m == 0 {
            return Err(Error::invalid("line strategy needs M >= 1"));
        }
        Ok(Line { m, half: 0 })
    }

    pub fn step(&mut self, state: &mut WalkState, rng: &mut StreamRng) -> Result<u32> {
        self.half += self.m as u64;
        // |X_t| <= t < a_t: both axis neighbours are open
        let dx = if rng.random_range(0..2) == 0 { -1 } else { 1 };
        state.arrive(state.pos.shifted(0, dx));
        Ok(2 * self.m)
    }

    pub fn sites(&self) -> u64 {
        2 * self.half + 1
    }
}

/// Exit site of an auxiliary SRW on `Z^d` started at `from`, i.e. a sample
/// of the hitting measure of the complement of `domain`. A walk longer than
/// `cap` steps is discarded and redrawn, at most `retries` times.
pub fn unguided_probe(domain: &InducedDomain, from: Site, rng: &mut StreamRng, cap: u64, retries: u32) -> Result<Site> {
    if !domain.contains(from) {
        return Err(Error::invalid(format!("probe start {from:?} is outside the domain")));
    }
    let dim = domain.dim();
    for _ in 0..=retries {
        let mut z = from;
        for _ in 0..cap {
            z = neighbors(z, dim)[rng.random_range(0..2 * dim)];
            if !domain.contains(z) {
                return Ok(z);
            }
        }
    }
    Err(Error::ProbeCapExhausted { from, cap, retries })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeCap {
    pub cap: u64,
    pub retries: u32,
}

impl Default for ProbeCap {
    fn default() -> Self {
        ProbeCap {
            cap: 10_000_000,
            retries: 3,
        }
    }
}

/// Unguided probing: at a first visit to `z`, probe until `B(z,1) ⊆ D_t`,
/// then emit `extra` further probes every step, then step.
#[derive(Clone, Debug)]
pub struct Coupon {
    pub domain: InducedDomain,
    pub extra: u32,
    pub cap: ProbeCap,
    visited: FxHashSet<Site>,
    /// Probes spent at each first visit.
    pub first_visit_probes: Vec<u32>,
}

impl Coupon {
    pub fn new(dim: usize, extra: u32, cap: ProbeCap) -> Result<Coupon> {
        if dim < 2 {
            return Err(Error::invalid("the coupon strategy needs d >= 2"));
        }
        Ok(Coupon {
            domain: InducedDomain::from_sites(dim, [Site::ORIGIN])?,
            extra,
            cap,
            visited: FxHashSet::default(),
            first_visit_probes: Vec::new(),
        })
    }

    fn probe(&mut self, from: Site, rng: &mut StreamRng) -> Result<()> {
        let y = unguided_probe(&self.domain, from, rng, self.cap.cap, self.cap.retries)?;
        self.domain.insert(y);
        Ok(())
    }

    pub fn step(&mut self, state: &mut WalkState, rngs: &mut Streams) -> Result<u32> {
        let z = state.pos;
        let dim = self.domain.dim();
        let mut m = 0;
        if self.visited.insert(z) {
            while neighbors(z, dim).iter().any(|y| !self.domain.contains(*y)) {
                self.probe(z, &mut rngs.probe)?;
                m += 1;
            }
            self.first_visit_probes.push(m);
        }
        for _ in 0..self.extra {
            self.probe(z, &mut rngs.probe)?;
        }
        srw_step(state, &self.domain, &mut rngs.walk)?;
        Ok(m + self.extra)
    }
}

/// A fixed number of unguided probes per step, then a step on `D_t`.
#[derive(Clone, Debug)]
pub struct FixedProbes {
    pub domain: InducedDomain,
    pub m: u32,
    pub cap: ProbeCap,
}

impl FixedProbes {
    pub fn new(dim: usize, m: u32, cap: ProbeCap) -> Result<FixedProbes> {
        if m == 0 {
            return Err(Error::invalid("fixed probing needs m >= 1"));
        }
        Ok(FixedProbes {
            domain: InducedDomain::from_sites(dim, [Site::ORIGIN])?,
            m,
            cap,
        })
    }

    pub fn step(&mut self, state: &mut WalkState, rngs: &mut Streams) -> Result<u32> {
        for _ in 0..self.m {
            let y = unguided_probe(&self.domain, state.pos, &mut rngs.probe, self.cap.cap, self.cap.retries)?;
            self.domain.insert(y);
        }
        srw_step(state, &self.domain, &mut rngs.walk)?;
        Ok(self.m)
    }
}

/// Probe strategy of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Strategy {
    Guided {
        l: i32,
        #[serde(default)]
        variant: GuidedVariant,
    },
    Line {
        m: u32,
    },
    UnguidedCoupon,
    UnguidedPlusM {
        m: u32,
    },
    /// Exploratory: `m` unguided probes every step.
    UnguidedFixed {
        m: u32,
    },
}

enum Driver {
    Guided(Guided),
    Line(Line),
    Coupon(Coupon),
    Fixed(FixedProbes),
}

impl Driver {
    fn sites(&self) -> u64 {
        match self {
            Driver::Guided(g) => g.domain.site_count().unwrap_or(0) as u64,
            Driver::Line(l) => l.sites(),
            Driver::Coupon(c) => c.domain.len() as u64,
            Driver::Fixed(f) => f.domain.len() as u64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsrwRow {
    pub t: u64,
    /// `m(t-1)`, the probes of the last step.
    pub m: u32,
    pub mbar: f64,
    pub domain_sites: u64,
    pub n0: u64,
    pub last_return: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct PsrwRun {
    pub rows: Vec<PsrwRow>,
    pub budget: ProbeBudget,
    pub state: WalkState,
    pub domain_sites: u64,
    pub first_visit_probes: Vec<u32>,
    /// `X_0..X_T` when requested.
    pub trajectory: Vec<Site>,
}

/// Runs a PSRW from `K_0 = 0`, `D_0 = {0}` for `horizon` steps.
pub fn psrw_run(
    dim: usize,
    strategy: &Strategy,
    horizon: u64,
    checkpoints: &[u64],
    cap: ProbeCap,
    keep_trajectory: bool,
    rngs: &mut Streams,
) -> Result<PsrwRun> {
    check_dim(dim)?;
    let mut driver = match *strategy {
        Strategy::Guided { l, variant } => Driver::Guided(Guided::new(StretchedLattice::new(l, dim)?, variant)?),
        Strategy::Line { m } => Driver::Line(Line::new(m)?),
        Strategy::UnguidedCoupon => Driver::Coupon(Coupon::new(dim, 0, cap)?),
        Strategy::UnguidedPlusM { m } => Driver::Coupon(Coupon::new(dim, m, cap)?),
        Strategy::UnguidedFixed { m } => Driver::Fixed(FixedProbes::new(dim, m, cap)?),
    };
    let mut state = WalkState::at_origin();
    let mut budget = ProbeBudget::new();
    let mut rows = Vec::new();
    let mut trajectory = Vec::new();
    if keep_trajectory {
        trajectory.push(state.pos);
    }
    let mut cps = checkpoints.iter().copied().filter(|&t| t >= 1 && t <= horizon).peekable();
    while state.t < horizon {
        let m = match &mut driver {
            Driver::Guided(g) => g.step(&mut state, &mut rngs.walk)?,
            Driver::Line(l) => l.step(&mut state, &mut rngs.walk)?,
            Driver::Coupon(c) => c.step(&mut state, rngs)?,
            Driver::Fixed(f) => f.step(&mut state, rngs)?,
        };
        budget.push(m);
        if keep_trajectory {
            trajectory.push(state.pos);
        }
        while cps.peek().is_some_and(|&c| c <= state.t) {
            let t = cps.next().expect("peeked");
            if t == state.t {
                rows.push(PsrwRow {
                    t,
                    m,
                    mbar: budget.mbar(t as usize),
                    domain_sites: driver.sites(),
                    n0: state.visits_origin,
                    last_return: state.last_return,
                });
            }
        }
    }
    let first_visit_probes = match driver {
        Driver::Coupon(ref mut c) => std::mem::take(&mut c.first_visit_probes),
        _ => Vec::new(),
    };
    Ok(PsrwRun {
        rows,
        budget,
        domain_sites: driver.sites(),
        state,
        first_visit_probes,
        trajectory,
    })
}

/// `c_d = 2d Σ_{l=1}^{2d-1} 1/l`, the mean of a `2d`-coupon collection
/// minus one.
pub fn coupon_constant(dim: usize) -> f64 {
    let n = 2 * dim;
    n as f64 * (1..n).map(|l| 1.0 / l as f64).sum::<f64>()
}
