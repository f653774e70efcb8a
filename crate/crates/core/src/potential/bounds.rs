//! Ever-hit-the-origin bounds for transient lattices and the `S*` series.

use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{Error, Result};
use crate::interactions::Radius;
use crate::lattice::{neighbors, Base, BallShape, Domain, GrowingDomain, Metric, Site};
use crate::potential::constants;
use crate::potential::criteria::{CriterionReport, CriterionRow, Verdict};
use crate::potential::dirichlet::{DirichletProblem, Method};

/// `c_d` used by [`ever_hit_zero_bound`].
pub fn ever_hit_constant(dim: usize) -> Result<f64> {
    match dim {
        3 => Ok(constants::EVER_HIT_C3),
        4 => Ok(constants::EVER_HIT_C4),
        _ => Err(Error::invalid(format!("no ever-hit constant for d={dim} (needs 3 <= d <= 4)"))),
    }
}

/// Upper bound `c_d |y|_1^(2-d)` on `P_y(SRW on Z^d ever hits 0)`.
pub fn ever_hit_zero_bound(y: Site, dim: usize) -> Result<f64> {
    ever_hit_zero_bound_with(y, dim, ever_hit_constant(dim)?)
}

pub fn ever_hit_zero_bound_with(y: Site, dim: usize, c: f64) -> Result<f64> {
    if dim <= 2 {
        return Err(Error::invalid("the ever-hit bound needs d >= 3"));
    }
    if y.is_origin() {
        return Err(Error::invalid("the ever-hit bound needs y != 0"));
    }
    Ok(c * (y.l1() as f64).powi(2 - dim as i32))
}

/// `P_y(hit 0 before leaving the Euclidean ball of radius `radius`)` for
/// every site of the ball, with `outer(z)` paid on the sites just outside.
pub fn origin_field<F: Fn(Site) -> f64>(dim: usize, radius: f64, outer: F) -> Result<FxHashMap<Site, f64>> {
    let shape = BallShape::new(Metric::Euclidean, radius);
    let free: Vec<Site> = shape.sites(dim).into_iter().filter(|z| !z.is_origin()).collect();
    let p = DirichletProblem::on_lattice(
        dim,
        &free,
        |z| {
            if z.is_origin() {
                Some(1.0)
            } else if !shape.contains(&z) {
                Some(outer(z))
            } else {
                None
            }
        },
        Site::ORIGIN,
    )?;
    let sol = p.solve(Method::Auto)?;
    let mut out: FxHashMap<Site, f64> = p.labels().expect("lattice").iter().copied().zip(sol.values).collect();
    out.insert(Site::ORIGIN, 1.0);
    Ok(out)
}

/// Recomputes `c_d`: the self-consistent value of
/// `max_{1 <= |y|_1 <= radius/2} P_y |y|_1^(d-2)` where `P_y` is solved on
/// the ball of radius `radius` with outer payoff `c |z|_1^(2-d)`, times
/// `safety`.
pub fn calibrate_ever_hit_constant(dim: usize, radius: f64, safety: f64) -> Result<f64> {
    if dim < 3 {
        return Err(Error::invalid("calibration needs d >= 3"));
    }
    let reach = (radius / 2.0).floor() as i64;
    let mut c = 0.0;
    for _ in 0..50 {
        let field = origin_field(dim, radius, |z| (c * (z.l1() as f64).powi(2 - dim as i32)).min(1.0))?;
        let next = field
            .iter()
            .filter(|(z, _)| (1..=reach).contains(&z.l1()))
            .map(|(z, h)| h * (z.l1() as f64).powi(dim as i32 - 2))
            .fold(0.0, f64::max);
        let done = (next - c).abs() < 1e-9;
        c = next;
        if done {
            break;
        }
    }
    Ok(c * safety)
}

/// One summand of `S*`.
#[derive(Clone, Debug, PartialEq)]
pub struct StarTerm {
    pub site: Site,
    pub lower: f64,
    pub upper: f64,
    /// Whether the correction ball reached beyond the solved region.
    pub far: bool,
}

#[derive(Clone, Debug)]
pub struct StarReport {
    pub terms: Vec<StarTerm>,
    /// Partial sums grouped by box shell `k = |x|_inf`, solve-only.
    pub lower: CriterionReport,
    /// Same, with analytic bounds for far terms and as outer payoff.
    pub upper: CriterionReport,
}

/// Boundary sites of an initial domain with finitely many closed edges
/// (or a finite explicit domain).
pub fn initial_boundary(domain: &GrowingDomain) -> Result<Vec<Site>> {
    let mut out: Vec<Site> = match domain.base() {
        Base::Full => Vec::new(),
        Base::Empty => domain.boundary().expect("finite").iter().copied().collect(),
        Base::AllBut(closed) => closed
            .iter()
            .flat_map(|e| [e.lo(), e.hi()])
            .collect::<FxHashSet<_>>()
            .into_iter()
            .filter(|&z| domain.is_boundary(z))
            .collect(),
        Base::Bernoulli { .. } => return Err(Error::UnboundedDomain("Bernoulli initial domain")),
    };
    out.sort_unstable();
    Ok(out)
}

/// `S* = sum_{x in dG_0} sup_{y in C(x)} P_y(SRW on Z^d ever hits 0)`.
pub fn s_star(domain0: &GrowingDomain, radius: &Radius, truncation: f64) -> Result<StarReport> {
    let dim = domain0.dim();
    let boundary = initial_boundary(domain0)?;
    s_star_sites(&boundary, dim, radius, truncation)
}

/// [`s_star`] for an explicit boundary set.
pub fn s_star_sites(boundary: &[Site], dim: usize, radius: &Radius, truncation: f64) -> Result<StarReport> {
    if dim <= 2 {
        return Err(Error::invalid("S* needs d >= 3"));
    }
    radius.validate()?;
    let c = ever_hit_constant(dim)?;
    let exp = 2 - dim as i32;
    let bound = |z: Site| -> f64 {
        if z.is_origin() {
            1.0
        } else {
            (c * (z.l1() as f64).powi(exp)).min(1.0)
        }
    };
    let shape = BallShape::new(Metric::Euclidean, truncation);
    let (low_field, up_field) = if boundary.is_empty() {
        (FxHashMap::default(), FxHashMap::default())
    } else {
        (origin_field(dim, truncation, |_| 0.0)?, origin_field(dim, truncation, bound)?)
    };
    let mut terms = Vec::with_capacity(boundary.len());
    for &x in boundary {
        let r = radius.at(x);
        let ball: Vec<Site> = BallShape::new(Metric::Graph, r as f64)
            .sites(dim)
            .into_iter()
            .map(|rel| x.add(&rel))
            .collect();
        let inside = ball.iter().all(|y| shape.contains(y) && neighbors(*y, dim).iter().all(|n| shape.contains(n)));
        let term = if inside {
            let lo = ball.iter().map(|y| low_field[y]).fold(0.0, f64::max);
            let hi = ball.iter().map(|y| up_field[y].min(bound(*y))).fold(0.0, f64::max);
            StarTerm { site: x, lower: lo, upper: hi.max(lo), far: false }
        } else {
            let nearest = (x.l1() - r as i64).max(0);
            let hi = if nearest == 0 {
                1.0
            } else {
                (c * (nearest as f64).powi(exp)).min(1.0)
            };
            StarTerm { site: x, lower: 0.0, upper: hi, far: true }
        };
        terms.push(term);
    }
    let shell = |z: &Site| (0..dim).map(|a| z.coord(a).unsigned_abs() as u64).max().unwrap_or(0);
    let mut by_shell: std::collections::BTreeMap<u64, (f64, f64)> = std::collections::BTreeMap::new();
    for t in &terms {
        let e = by_shell.entry(shell(&t.site)).or_default();
        e.0 += t.lower;
        e.1 += t.upper;
    }
    let report = |series: &str, pick: fn(&(f64, f64)) -> f64| {
        let mut acc = 0.0;
        let rows: Vec<CriterionRow> = by_shell
            .iter()
            .map(|(&k, v)| {
                acc += pick(v);
                CriterionRow { k, term: pick(v), partial_sum: acc }
            })
            .collect();
        CriterionReport {
            series: series.to_string(),
            cutoff: rows.last().map_or(0, |r| r.k),
            rows,
            // a finite boundary set gives a finite sum
            verdict: Verdict::Convergent,
        }
    };
    Ok(StarReport {
        lower: report("s_star_lower", |v| v.0),
        upper: report("s_star_upper", |v| v.1),
        terms,
    })
}
