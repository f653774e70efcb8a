//! Z^d geometry and the growing-domain data structure shared by every model.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use arrayvec::ArrayVec;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{hashed_uniform, mix64};

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 4;

/// A point of Z^d. Coordinates past the active dimension are zero.
#[derive(Copy, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site(pub [i32; MAX_DIM]);

impl std::fmt::Debug for Site {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // trailing zeros are noise for low dimensions
        let last = self.0.iter().rposition(|&c| c != 0).map_or(1, |i| i + 1);
        f.debug_tuple("Site").field(&&self.0[..last.max(1)]).finish()
    }
}

impl Site {
    pub const ORIGIN: Site = Site([0; MAX_DIM]);

    pub fn new(coords: &[i32]) -> Result<Site> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::invalid(format!(
                "site needs 1..={MAX_DIM} coordinates, got {}",
                coords.len()
            )));
        }
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Site(c))
    }

    /// Convenience for tests and fixtures; panics on bad length.
    pub fn from_slice(coords: &[i32]) -> Site {
        Site::new(coords).expect("site coordinates")
    }

    /// `k * e_axis`.
    pub fn axis_point(axis: usize, k: i32) -> Site {
        let mut c = [0; MAX_DIM];
        c[axis] = k;
        Site(c)
    }

    #[inline]
    pub fn coord(&self, axis: usize) -> i32 {
        self.0[axis]
    }

    pub fn coords(&self, dim: usize) -> &[i32] {
        &self.0[..dim]
    }

    #[inline]
    pub fn is_origin(&self) -> bool {
        self.0 == [0; MAX_DIM]
    }

    #[inline]
    pub fn shifted(&self, axis: usize, delta: i32) -> Site {
        let mut c = self.0;
        c[axis] += delta;
        Site(c)
    }

    #[inline]
    pub fn l1(&self) -> i64 {
        self.0.iter().map(|&c| (c as i64).abs()).sum()
    }

    #[inline]
    pub fn l2_sq(&self) -> i64 {
        self.0.iter().map(|&c| (c as i64) * (c as i64)).sum()
    }

    pub fn l1_dist(&self, other: &Site) -> i64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(&a, &b)| (a as i64 - b as i64).abs())
            .sum()
    }

    pub fn sub(&self, other: &Site) -> Site {
        let mut c = self.0;
        for (x, y) in c.iter_mut().zip(other.0.iter()) {
            *x -= *y;
        }
        Site(c)
    }

    pub fn add(&self, other: &Site) -> Site {
        let mut c = self.0;
        for (x, y) in c.iter_mut().zip(other.0.iter()) {
            *x += *y;
        }
        Site(c)
    }
}

pub fn check_dim(dim: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(Error::invalid(format!("dimension must be in 1..={MAX_DIM}, got {dim}")))
    }
}

/// The `2d` lattice neighbours of `z`: axis ascending, minus before plus.
#[inline]
pub fn neighbors(z: Site, dim: usize) -> ArrayVec<Site, { 2 * MAX_DIM }> {
    let mut out = ArrayVec::new();
    for axis in 0..dim {
        out.push(z.shifted(axis, -1));
        out.push(z.shifted(axis, 1));
    }
    out
}

/// An edge of Z^d, stored as its lower endpoint plus the axis it spans.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    lo: Site,
    axis: u8,
}

impl Edge {
    pub fn along(lo: Site, axis: usize) -> Edge {
        debug_assert!(axis < MAX_DIM);
        Edge { lo, axis: axis as u8 }
    }

    /// Edge between two sites at l1-distance one.
    pub fn between(a: Site, b: Site) -> Option<Edge> {
        if a.l1_dist(&b) != 1 {
            return None;
        }
        let axis = (0..MAX_DIM).find(|&i| a.0[i] != b.0[i])?;
        let lo = if a.0[axis] < b.0[axis] { a } else { b };
        Some(Edge::along(lo, axis))
    }

    /// The `index`-th incident edge of `z` in [`neighbors`] order.
    #[inline]
    pub fn incident(z: Site, index: usize) -> Edge {
        let axis = index / 2;
        if index % 2 == 0 {
            Edge::along(z.shifted(axis, -1), axis)
        } else {
            Edge::along(z, axis)
        }
    }

    pub fn lo(&self) -> Site {
        self.lo
    }

    pub fn hi(&self) -> Site {
        self.lo.shifted(self.axis as usize, 1)
    }

    pub fn axis(&self) -> usize {
        self.axis as usize
    }

    pub fn endpoints(&self) -> (Site, Site) {
        (self.lo, self.hi())
    }

    /// 64-bit canonical id, used to key per-edge pseudorandom decisions.
    pub fn key(&self) -> u64 {
        let mut h = self.axis as u64;
        for &c in &self.lo.0 {
            h = mix64(h ^ (c as u32 as u64));
        }
        h
    }
}

/// Ball metric.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Graph (l1) distance on Z^d.
    Graph,
    /// Lattice projection of the closed Euclidean ball.
    Euclidean,
}

/// Membership test for a ball of real radius about the origin, using exact
/// integer comparisons.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct BallShape {
    pub metric: Metric,
    pub radius: f64,
    bound: i64,
}

impl BallShape {
    pub fn new(metric: Metric, radius: f64) -> BallShape {
        let bound = match metric {
            Metric::Graph => radius.floor() as i64,
            Metric::Euclidean => (radius * radius).floor() as i64,
        };
        BallShape {
            metric,
            radius,
            bound,
        }
    }

    #[inline]
    pub fn contains(&self, z: &Site) -> bool {
        match self.metric {
            Metric::Graph => z.l1() <= self.bound,
            Metric::Euclidean => z.l2_sq() <= self.bound,
        }
    }

    /// Sites of the ball, in lexicographic order.
    pub fn sites(&self, dim: usize) -> Vec<Site> {
        let r = self.radius.floor() as i32;
        let mut out = Vec::new();
        let mut c = [0i32; MAX_DIM];
        fn rec(
            axis: usize,
            dim: usize,
            r: i32,
            c: &mut [i32; MAX_DIM],
            shape: &BallShape,
            out: &mut Vec<Site>,
        ) {
            if axis == dim {
                let z = Site(*c);
                if shape.contains(&z) {
                    out.push(z);
                }
                return;
            }
            for x in -r..=r {
                c[axis] = x;
                rec(axis + 1, dim, r, c, shape, out);
            }
            c[axis] = 0;
        }
        rec(0, dim, r, &mut c, self, &mut out);
        out
    }
}

/// Read access shared by the explicit and induced domains.
pub trait Domain {
    fn dim(&self) -> usize;
    fn contains(&self, z: Site) -> bool;
    fn is_open(&self, e: Edge) -> bool;

    /// Open neighbours of `z` in [`neighbors`] order.
    #[inline]
    fn open_neighbors(&self, z: Site) -> ArrayVec<Site, { 2 * MAX_DIM }> {
        let mut out = ArrayVec::new();
        for (i, y) in neighbors(z, self.dim()).into_iter().enumerate() {
            if self.is_open(Edge::incident(z, i)) {
                out.push(y);
            }
        }
        out
    }

    fn degree(&self, z: Site) -> usize {
        (0..2 * self.dim())
            .filter(|&i| self.is_open(Edge::incident(z, i)))
            .count()
    }

    fn is_boundary(&self, z: Site) -> bool {
        self.contains(z) && self.degree(z) < 2 * self.dim()
    }
}

/// Boundary queries at past times, for the frozen-boundary stopping times.
pub trait BoundaryHistory {
    fn is_boundary_now(&self, z: Site) -> bool;
    fn was_boundary_at(&self, z: Site, t: u64) -> bool;
}

/// Edges present before any growth.
#[derive(Clone, Debug)]
pub enum Base {
    /// No edges; sites are exactly the endpoints of opened edges (plus any
    /// explicitly added site).
    Empty,
    /// Every edge of Z^d.
    Full,
    /// Every edge of Z^d except the listed ones; all sites present.
    AllBut(FxHashSet<Edge>),
    /// Each edge open independently with probability `p`, decided by a pure
    /// function of `(seed, edge)`; all sites present.
    Bernoulli { p: f64, seed: u64, box_halfwidth: i32 },
}

#[derive(Copy, Clone, Debug)]
struct SiteInfo {
    added_at: u64,
    full_at: u64,
    degree: u8,
}

/// One `add_edges` call: the graph index from which the edges are present.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrowthRecord {
    pub t: u64,
    pub edges: Vec<Edge>,
}

#[derive(Serialize, Deserialize)]
struct GrowthLine {
    t: u64,
    edges: Vec<[Vec<i32>; 2]>,
}

impl GrowthRecord {
    pub fn to_json_line(&self, dim: usize) -> String {
        let line = GrowthLine {
            t: self.t,
            edges: self
                .edges
                .iter()
                .map(|e| [e.lo().coords(dim).to_vec(), e.hi().coords(dim).to_vec()])
                .collect(),
        };
        serde_json::to_string(&line).expect("growth record serializes")
    }

    pub fn from_json_line(line: &str) -> std::result::Result<GrowthRecord, String> {
        let raw: GrowthLine = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let edges = raw
            .edges
            .iter()
            .map(|[a, b]| {
                let (a, b) = (Site::new(a), Site::new(b));
                match (a, b) {
                    (Ok(a), Ok(b)) => Edge::between(a, b).ok_or_else(|| "not a lattice edge".into()),
                    _ => Err("bad coordinates".to_string()),
                }
            })
            .collect::<std::result::Result<Vec<_>, String>>()?;
        Ok(GrowthRecord { t: raw.t, edges })
    }
}

/// The monotone open edge set G_t together with degrees and boundary.
///
/// Edges carry the graph index at which they appeared, so every past
/// snapshot G_s stays queryable. With an [`Base::Empty`] base the site set,
/// the degrees and the boundary are stored explicitly; for the other bases
/// every site of Z^d belongs to the domain and degrees are computed on demand.
#[derive(Clone, Debug)]
pub struct GrowingDomain {
    dim: usize,
    base: Base,
    added: FxHashMap<Edge, u64>,
    sites: FxHashMap<Site, SiteInfo>,
    boundary: FxHashSet<Site>,
    growth_log: Vec<GrowthRecord>,
    record_growth: bool,
}

impl GrowingDomain {
    pub fn new(dim: usize, base: Base) -> Result<GrowingDomain> {
        check_dim(dim)?;
        Ok(GrowingDomain {
            dim,
            base,
            added: FxHashMap::default(),
            sites: FxHashMap::default(),
            boundary: FxHashSet::default(),
            growth_log: Vec::new(),
            record_growth: true,
        })
    }

    pub fn empty(dim: usize) -> Result<GrowingDomain> {
        GrowingDomain::new(dim, Base::Empty)
    }

    pub fn full(dim: usize) -> Result<GrowingDomain> {
        GrowingDomain::new(dim, Base::Full)
    }

    /// Turns growth logging on or off (long runs keep only edge timestamps).
    pub fn set_growth_log(&mut self, on: bool) {
        self.record_growth = on;
    }

    pub fn base(&self) -> &Base {
        &self.base
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.base, Base::Empty)
    }

    pub fn growth_log(&self) -> &[GrowthRecord] {
        &self.growth_log
    }

    #[inline]
    fn base_open(&self, e: &Edge) -> bool {
        match &self.base {
            Base::Empty => false,
            Base::Full => true,
            Base::AllBut(closed) => !closed.contains(e),
            Base::Bernoulli { p, seed, .. } => hashed_uniform(*seed, e.key()) < *p,
        }
    }

    /// Whether `e` belonged to the initial domain.
    pub fn initially_open(&self, e: Edge) -> bool {
        self.base_open(&e)
    }

    pub fn is_open_at(&self, e: Edge, t: u64) -> bool {
        self.base_open(&e) || self.added.get(&e).is_some_and(|&s| s <= t)
    }

    pub fn contains_at(&self, z: Site, t: u64) -> bool {
        match self.base {
            Base::Empty => self.sites.get(&z).is_some_and(|i| i.added_at <= t),
            _ => true,
        }
    }

    pub fn degree_at(&self, z: Site, t: u64) -> usize {
        (0..2 * self.dim)
            .filter(|&i| self.is_open_at(Edge::incident(z, i), t))
            .count()
    }

    /// Opens `edges`, present from graph index `t` on. Already-open edges
    /// are ignored; returns the number of newly opened edges.
    pub fn add_edges<I: IntoIterator<Item = Edge>>(&mut self, edges: I, t: u64) -> usize {
        let full = 2 * self.dim as u8;
        let mut delta = Vec::new();
        for e in edges {
            if self.is_open(e) {
                continue;
            }
            self.added.insert(e, t);
            if let Base::Empty = self.base {
                for z in [e.lo(), e.hi()] {
                    let info = self.sites.entry(z).or_insert(SiteInfo {
                        added_at: t,
                        full_at: u64::MAX,
                        degree: 0,
                    });
                    info.degree += 1;
                    if info.degree == full {
                        info.full_at = t;
                        self.boundary.remove(&z);
                    } else {
                        self.boundary.insert(z);
                    }
                }
            }
            delta.push(e);
        }
        let n = delta.len();
        if self.record_growth {
            self.growth_log.push(GrowthRecord { t, edges: delta });
        }
        n
    }

    /// Adds an isolated site (only meaningful for the empty base).
    pub fn add_site(&mut self, z: Site, t: u64) {
        if let Base::Empty = self.base {
            if !self.sites.contains_key(&z) {
                self.sites.insert(
                    z,
                    SiteInfo {
                        added_at: t,
                        full_at: u64::MAX,
                        degree: 0,
                    },
                );
                self.boundary.insert(z);
            }
        }
    }

    /// Boundary set; `None` when the domain is unbounded.
    pub fn boundary(&self) -> Option<&FxHashSet<Site>> {
        self.is_finite().then_some(&self.boundary)
    }

    /// Number of sites; `None` when unbounded.
    pub fn site_count(&self) -> Option<usize> {
        self.is_finite().then_some(self.sites.len())
    }

    /// Number of open edges; `None` when the base is infinite.
    pub fn edge_count(&self) -> Option<usize> {
        self.is_finite().then_some(self.added.len())
    }

    /// Explicit sites (empty base only).
    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        self.sites.keys().copied()
    }

    /// Edges opened on top of the base, with their appearance index.
    pub fn added_edges(&self) -> impl Iterator<Item = (Edge, u64)> + '_ {
        self.added.iter().map(|(e, t)| (*e, *t))
    }

    /// Sites of the snapshot G_t (empty base only), sorted.
    pub fn sites_at(&self, t: u64) -> Vec<Site> {
        let mut v: Vec<Site> = self
            .sites
            .iter()
            .filter(|(_, i)| i.added_at <= t)
            .map(|(z, _)| *z)
            .collect();
        v.sort_unstable();
        v
    }

    /// Recomputes degree and boundary maps from the open-edge set.
    pub fn recompute_from_edges(&self) -> (FxHashMap<Site, usize>, FxHashSet<Site>) {
        let mut degree: FxHashMap<Site, usize> = FxHashMap::default();
        for e in self.added.keys() {
            *degree.entry(e.lo()).or_default() += 1;
            *degree.entry(e.hi()).or_default() += 1;
        }
        for z in self.sites.keys() {
            degree.entry(*z).or_default();
        }
        let boundary = degree
            .iter()
            .filter(|(_, &d)| d < 2 * self.dim)
            .map(|(z, _)| *z)
            .collect();
        (degree, boundary)
    }

    /// Edges of the Bernoulli box, for statistics over the materialized part.
    pub fn box_edges(&self) -> Vec<Edge> {
        let Base::Bernoulli { box_halfwidth: h, .. } = self.base else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut c = [0i32; MAX_DIM];
        fn rec(axis: usize, dim: usize, h: i32, c: &mut [i32; MAX_DIM], out: &mut Vec<Edge>) {
            if axis == dim {
                let z = Site(*c);
                for a in 0..dim {
                    if z.0[a] < h {
                        out.push(Edge::along(z, a));
                    }
                }
                return;
            }
            for x in -h..=h {
                c[axis] = x;
                rec(axis + 1, dim, h, c, out);
            }
        }
        rec(0, self.dim, h, &mut c, &mut out);
        out
    }

    pub fn write_growth_log<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for rec in &self.growth_log {
            writeln!(w, "{}", rec.to_json_line(self.dim))?;
        }
        Ok(())
    }
}

pub fn read_growth_log<R: BufRead>(r: R) -> std::result::Result<Vec<GrowthRecord>, String> {
    r.lines()
        .map(|l| l.map_err(|e| e.to_string()))
        .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
        .map(|l| GrowthRecord::from_json_line(&l?))
        .collect()
}

impl Domain for GrowingDomain {
    #[inline]
    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn contains(&self, z: Site) -> bool {
        match self.base {
            Base::Empty => self.sites.contains_key(&z),
            _ => true,
        }
    }

    #[inline]
    fn is_open(&self, e: Edge) -> bool {
        self.base_open(&e) || self.added.contains_key(&e)
    }

    fn degree(&self, z: Site) -> usize {
        match self.base {
            Base::Empty => self.sites.get(&z).map_or(0, |i| i.degree as usize),
            Base::Full => 2 * self.dim,
            _ => (0..2 * self.dim)
                .filter(|&i| self.is_open(Edge::incident(z, i)))
                .count(),
        }
    }

    fn is_boundary(&self, z: Site) -> bool {
        match self.base {
            Base::Empty => self.boundary.contains(&z),
            Base::Full => false,
            _ => self.degree(z) < 2 * self.dim,
        }
    }
}

impl BoundaryHistory for GrowingDomain {
    fn is_boundary_now(&self, z: Site) -> bool {
        self.is_boundary(z)
    }

    fn was_boundary_at(&self, z: Site, t: u64) -> bool {
        match self.base {
            Base::Empty => self
                .sites
                .get(&z)
                .is_some_and(|i| i.added_at <= t && t < i.full_at),
            Base::Full => false,
            _ => self.degree_at(z, t) < 2 * self.dim,
        }
    }
}

/// Domain given by a site set, with every lattice edge between two of its
/// sites open.
#[derive(Clone, Debug)]
pub struct InducedDomain {
    dim: usize,
    sites: FxHashSet<Site>,
}

impl InducedDomain {
    pub fn new(dim: usize) -> Result<InducedDomain> {
        check_dim(dim)?;
        Ok(InducedDomain {
            dim,
            sites: FxHashSet::default(),
        })
    }

    pub fn from_sites<I: IntoIterator<Item = Site>>(dim: usize, sites: I) -> Result<InducedDomain> {
        let mut d = InducedDomain::new(dim)?;
        d.sites.extend(sites);
        Ok(d)
    }

    /// Returns whether the site was new.
    pub fn insert(&mut self, z: Site) -> bool {
        self.sites.insert(z)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        self.sites.iter().copied()
    }

    /// Lattice sites outside the domain adjacent to it, sorted.
    pub fn exterior_boundary(&self) -> Vec<Site> {
        let mut out: Vec<Site> = self
            .sites
            .iter()
            .flat_map(|&z| neighbors(z, self.dim))
            .filter(|y| !self.sites.contains(y))
            .collect::<FxHashSet<_>>()
            .into_iter()
            .collect();
        out.sort_unstable();
        out
    }
}

impl Domain for InducedDomain {
    fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn contains(&self, z: Site) -> bool {
        self.sites.contains(&z)
    }

    #[inline]
    fn is_open(&self, e: Edge) -> bool {
        self.sites.contains(&e.lo()) && self.sites.contains(&e.hi())
    }
}

/// Ball about `center` with every internal edge open, as a finite domain.
pub fn ball(center: Site, radius: f64, metric: Metric, dim: usize) -> Result<GrowingDomain> {
    check_dim(dim)?;
    if !(radius >= 1.0) {
        return Err(Error::invalid(format!("ball radius must be >= 1, got {radius}")));
    }
    let shape = BallShape::new(metric, radius);
    let mut dom = GrowingDomain::empty(dim)?;
    let sites = shape.sites(dim);
    let mut edges = Vec::new();
    for &rel in &sites {
        for axis in 0..dim {
            let up = rel.shifted(axis, 1);
            if shape.contains(&up) {
                edges.push(Edge::along(rel.add(&center), axis));
            }
        }
    }
    dom.add_edges(edges, 0);
    for rel in sites {
        dom.add_site(rel.add(&center), 0);
    }
    Ok(dom)
}

/// Every site of Z^dim present; each edge open independently with
/// probability `p`. Edges are decided lazily from `(seed, edge)`, so the
/// domain is unbounded; `box_halfwidth` only delimits [`GrowingDomain::box_edges`].
pub fn bernoulli_domain(p: f64, box_halfwidth: i32, seed: u64, dim: usize) -> Result<GrowingDomain> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid(format!("edge probability must be in [0,1), got {p}")));
    }
    if box_halfwidth < 0 {
        return Err(Error::invalid("box half-width must be non-negative"));
    }
    GrowingDomain::new(
        dim,
        Base::Bernoulli {
            p,
            seed,
            box_halfwidth,
        },
    )
}

/// Graph distance between `from` and `to` over the edges accepted by `open`,
/// giving up after `max_nodes` explored sites.
pub fn bfs_distance<F: Fn(Edge) -> bool>(
    dim: usize,
    from: Site,
    to: Site,
    open: F,
    max_nodes: usize,
) -> Option<u64> {
    if from == to {
        return Some(0);
    }
    let mut seen = FxHashSet::default();
    let mut queue = VecDeque::new();
    seen.insert(from);
    queue.push_back((from, 0u64));
    while let Some((z, d)) = queue.pop_front() {
        for (i, y) in neighbors(z, dim).into_iter().enumerate() {
            if seen.contains(&y) || !open(Edge::incident(z, i)) {
                continue;
            }
            if y == to {
                return Some(d + 1);
            }
            if seen.len() >= max_nodes {
                return None;
            }
            seen.insert(y);
            queue.push_back((y, d + 1));
        }
    }
    None
}
