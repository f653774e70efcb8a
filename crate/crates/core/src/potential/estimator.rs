//! The estimator `S_hat = sum p_hat_n` over a stopping log.

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lattice::{Base, BallShape, BoundaryHistory, Domain, GrowingDomain, Metric, Site};
use crate::potential::bounds::ever_hit_constant;
use crate::potential::criteria::Verdict;
use crate::potential::dirichlet::{DirichletProblem, Method};
use crate::walker::{StopRecord, StoppingLog};

/// `p_n`, exact when `lower == upper`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub lower: f64,
    pub upper: f64,
}

impl Term {
    pub fn exact(p: f64) -> Term {
        Term { lower: p, upper: p }
    }

    pub fn bracket(lower: f64, upper: f64) -> Term {
        Term { lower, upper }
    }

    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }
}

/// Supplies `p_n = P_{X_eta}(SRW on the full lattice hits 0 before dG_eta)`
/// for a stopping record.
pub trait SnapshotSource {
    /// None when `dG_eta` is empty.
    fn term(&mut self, rec: &StopRecord) -> Result<Option<Term>>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermDetail {
    pub n: usize,
    pub eta: u64,
    pub start: Site,
    pub lower: f64,
    pub upper: f64,
    pub bracketed: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SEstimate {
    pub terms: Vec<TermDetail>,
    pub partial_lower: Vec<f64>,
    pub partial_upper: Vec<f64>,
}

/// Increment of the partial sums over the records `n` in `[2^j, 2^(j+1))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicBlock {
    pub j: u32,
    pub lower: f64,
    pub upper: f64,
}

impl SEstimate {
    pub fn total_lower(&self) -> f64 {
        self.partial_lower.last().copied().unwrap_or(0.0)
    }

    pub fn total_upper(&self) -> f64 {
        self.partial_upper.last().copied().unwrap_or(0.0)
    }

    pub fn bracketed_count(&self) -> usize {
        self.terms.iter().filter(|t| t.bracketed).count()
    }

    /// Complete dyadic blocks of term indices (counted from 1).
    pub fn dyadic_increments(&self) -> Vec<DyadicBlock> {
        let len = self.terms.len();
        let mut out = Vec::new();
        let mut j = 0u32;
        loop {
            let (a, b) = (1usize << j, 1usize << (j + 1));
            if b - 1 > len {
                break;
            }
            // partial sums are 1-indexed: S_m = partial[m - 1]
            let before = |v: &[f64]| if a >= 2 { v[a - 2] } else { 0.0 };
            out.push(DyadicBlock {
                j,
                lower: self.partial_lower[b - 2] - before(&self.partial_lower),
                upper: self.partial_upper[b - 2] - before(&self.partial_upper),
            });
            j += 1;
        }
        out
    }

    /// Least-squares slope of `S_hat(2^j)` (lower sums) against `j` over the
    /// last half of the dyadic points.
    pub fn slope(&self) -> f64 {
        let pts: Vec<(f64, f64)> = (0..)
            .map(|j| 1usize << j)
            .take_while(|&m| m <= self.terms.len())
            .enumerate()
            .map(|(j, m)| (j as f64, self.partial_lower[m - 1]))
            .collect();
        let tail = &pts[pts.len() / 2..];
        let n = tail.len() as f64;
        if tail.len() < 2 {
            return 0.0;
        }
        let mx = tail.iter().map(|p| p.0).sum::<f64>() / n;
        let my = tail.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }

    /// Heuristic: the last complete dyadic block's increment at least
    /// `divergent_at` reads as divergence, at most `cauchy_at` as a Cauchy
    /// sequence.
    pub fn verdict(&self, divergent_at: f64, cauchy_at: f64) -> Verdict {
        match self.dyadic_increments().last() {
            Some(b) if b.lower >= divergent_at => Verdict::Divergent,
            Some(b) if b.upper <= cauchy_at => Verdict::Convergent,
            _ => Verdict::Undetermined,
        }
    }
}

/// Sums `p_hat_n` over all records of `log` with a non-empty boundary
/// snapshot, writing exact values back into the records.
pub fn s_estimator<S: SnapshotSource + ?Sized>(log: &mut StoppingLog, source: &mut S) -> Result<SEstimate> {
    let mut est = SEstimate::default();
    let (mut lo, mut hi) = (0.0, 0.0);
    for rec in log.records.iter_mut() {
        let Some(term) = source.term(rec)? else {
            continue;
        };
        rec.p_hat = term.is_exact().then_some(term.lower);
        lo += term.lower;
        hi += term.upper;
        est.terms.push(TermDetail {
            n: rec.n,
            eta: rec.eta,
            start: rec.start,
            lower: term.lower,
            upper: term.upper,
            bracketed: !term.is_exact(),
        });
        est.partial_lower.push(lo);
        est.partial_upper.push(hi);
    }
    Ok(est)
}

/// Snapshots of a [`GrowingDomain`]. Finite domains are solved exactly; for
/// unbounded bases the walk is cut at the Euclidean ball of radius
/// `truncation`, paying 0 (lower) or the ever-hit bound (upper) outside.
pub struct DomainSnapshots<'a> {
    pub domain: &'a GrowingDomain,
    pub truncation: f64,
    /// Distinct growth tags, sorted.
    tags: Vec<u64>,
    cache: FxHashMap<u64, (FxHashMap<Site, f64>, FxHashMap<Site, f64>)>,
}

impl<'a> DomainSnapshots<'a> {
    pub fn new(domain: &'a GrowingDomain, truncation: f64) -> Self {
        let mut tags: Vec<u64> = domain.added_edges().map(|(_, t)| t).collect::<FxHashSet<_>>().into_iter().collect();
        tags.sort_unstable();
        DomainSnapshots {
            domain,
            truncation,
            tags,
            cache: FxHashMap::default(),
        }
    }

    /// The last growth tag not after `t`: G_t equals G_(that tag).
    fn version(&self, t: u64) -> u64 {
        let i = self.tags.partition_point(|&s| s <= t);
        if i == 0 {
            0
        } else {
            self.tags[i - 1]
        }
    }

    fn solve(&self, t: u64) -> Result<Option<(FxHashMap<Site, f64>, FxHashMap<Site, f64>)>> {
        let dom = self.domain;
        let dim = dom.dim();
        let finite = dom.is_finite();
        let sites: Vec<Site> = if finite {
            dom.sites_at(t)
        } else {
            BallShape::new(Metric::Euclidean, self.truncation).sites(dim)
        };
        let killing: FxHashSet<Site> = sites.iter().copied().filter(|&z| dom.was_boundary_at(z, t)).collect();
        if killing.is_empty() && (finite || matches!(dom.base(), Base::Full)) {
            return Ok(None);
        }
        let in_set: FxHashSet<Site> = sites.iter().copied().collect();
        let free: Vec<Site> = sites
            .iter()
            .copied()
            .filter(|z| !z.is_origin() && !killing.contains(z))
            .collect();
        let bound_c = if dim >= 3 { ever_hit_constant(dim).ok() } else { None };
        let mut fields = Vec::with_capacity(2);
        for upper in [false, true] {
            let payoff = |z: Site| -> Option<f64> {
                if z.is_origin() {
                    Some(1.0)
                } else if killing.contains(&z) || dom.was_boundary_at(z, t) {
                    Some(0.0)
                } else if !in_set.contains(&z) {
                    Some(match (upper, bound_c) {
                        (false, _) => 0.0,
                        (true, Some(c)) => (c * (z.l1() as f64).powi(2 - dim as i32)).min(1.0),
                        (true, None) => 1.0,
                    })
                } else {
                    None
                }
            };
            let start = free.first().copied().unwrap_or(Site::ORIGIN);
            let p = DirichletProblem::on_lattice(dim, &free, payoff, start)?;
            let sol = p.solve(Method::Auto)?;
            let field: FxHashMap<Site, f64> = p.labels().expect("lattice").iter().copied().zip(sol.values).collect();
            fields.push(field);
            if finite {
                break;
            }
        }
        let up = if finite { fields[0].clone() } else { fields.pop().expect("upper") };
        let lo = fields.pop().expect("lower");
        Ok(Some((lo, up)))
    }
}

impl SnapshotSource for DomainSnapshots<'_> {
    fn term(&mut self, rec: &StopRecord) -> Result<Option<Term>> {
        if rec.start.is_origin() {
            return Ok(Some(Term::exact(1.0)));
        }
        let v = self.version(rec.eta);
        if !self.cache.contains_key(&v) {
            match self.solve(v)? {
                Some(f) => {
                    self.cache.insert(v, f);
                }
                None => return Ok(None),
            }
        }
        let (lo, up) = &self.cache[&v];
        match (lo.get(&rec.start), up.get(&rec.start)) {
            (Some(&a), Some(&b)) if !a.is_nan() && !b.is_nan() => Ok(Some(Term::bracket(a, b.max(a)))),
            _ => {
                // outside the truncation: only the analytic bound is known
                let dim = self.domain.dim();
                let hi = match ever_hit_constant(dim) {
                    Ok(c) => (c * (rec.start.l1() as f64).powi(2 - dim as i32)).min(1.0),
                    Err(_) => 1.0,
                };
                Ok(Some(Term::bracket(0.0, hi)))
            }
        }
    }
}

/// A scripted source for tests: one fixed term per record.
pub struct FixedTerms(pub Vec<Term>);

impl SnapshotSource for FixedTerms {
    fn term(&mut self, rec: &StopRecord) -> Result<Option<Term>> {
        Ok(self.0.get(rec.n).copied())
    }
}
