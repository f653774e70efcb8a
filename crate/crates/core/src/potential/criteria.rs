//! Partial sums of the recurrence/transience criterion series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{neighbors, BallShape, Metric, Site};
use crate::potential::dirichlet::{DirichletProblem, Method};

/// Hit-count schedule `k -> N(k)`, `k >= 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Schedule {
    /// `N(k) = max(1, ceil(a * k^alpha))`.
    Power { a: f64, alpha: f64 },
    /// `N(k) = values[k - 1]`, the last value repeating beyond the table.
    Table { values: Vec<u64> },
}

impl Schedule {
    pub fn constant(n: u64) -> Schedule {
        Schedule::Table { values: vec![n] }
    }

    pub fn power(alpha: f64) -> Schedule {
        Schedule::Power { a: 1.0, alpha }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Schedule::Power { a, alpha } if !(*a > 0.0 && a.is_finite() && alpha.is_finite()) => {
                Err(Error::invalid(format!("power schedule needs a > 0, got a={a} alpha={alpha}")))
            }
            Schedule::Table { values } if values.is_empty() || values.contains(&0) => {
                Err(Error::invalid("schedule table must be non-empty with entries >= 1"))
            }
            _ => Ok(()),
        }
    }

    pub fn at(&self, k: u64) -> u64 {
        debug_assert!(k >= 1);
        match self {
            Schedule::Power { a, alpha } => {
                let v = (a * (k as f64).powf(*alpha)).ceil();
                if v >= u64::MAX as f64 {
                    u64::MAX
                } else {
                    (v as u64).max(1)
                }
            }
            Schedule::Table { values } => values[(k as usize - 1).min(values.len() - 1)],
        }
    }

    /// Exponent of the power-law growth if the schedule is in a recognized
    /// family (constant tables count as `alpha = 0`).
    fn growth_exponent(&self) -> Option<f64> {
        match self {
            Schedule::Power { alpha, .. } => Some(*alpha),
            Schedule::Table { values } if values.len() == 1 => Some(0.0),
            Schedule::Table { .. } => None,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Divergent,
    Convergent,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionRow {
    pub k: u64,
    pub term: f64,
    pub partial_sum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub series: String,
    pub rows: Vec<CriterionRow>,
    pub cutoff: u64,
    pub verdict: Verdict,
}

impl CriterionReport {
    fn from_terms(series: &str, terms: impl IntoIterator<Item = (u64, f64)>, verdict: Verdict) -> CriterionReport {
        let mut acc = 0.0;
        let mut comp = 0.0;
        let rows: Vec<CriterionRow> = terms
            .into_iter()
            .map(|(k, term)| {
                // compensated summation
                let y = term - comp;
                let t = acc + y;
                comp = (t - acc) - y;
                acc = t;
                CriterionRow { k, term, partial_sum: acc }
            })
            .collect();
        CriterionReport {
            series: series.to_string(),
            cutoff: rows.last().map_or(0, |r| r.k),
            rows,
            verdict,
        }
    }

    pub fn total(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.partial_sum)
    }

    /// Partial sum after the term with index `k`.
    pub fn partial(&self, k: u64) -> Option<f64> {
        self.rows.iter().find(|r| r.k == k).map(|r| r.partial_sum)
    }

    pub fn is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].partial_sum >= w[0].partial_sum)
    }
}

/// Symbolic verdict for `sum N(k) k^p`: with `N(k) ~ k^alpha` the series
/// converges iff `alpha + p < -1`; `N(k) >= 1` forces divergence when
/// `p >= -1`.
fn power_verdict(schedule: &Schedule, p: f64) -> Verdict {
    if p >= -1.0 {
        return Verdict::Divergent;
    }
    match schedule.growth_exponent() {
        Some(alpha) if alpha + p < -1.0 => Verdict::Convergent,
        Some(_) => Verdict::Divergent,
        None => Verdict::Undetermined,
    }
}

/// Partial sums of `sum_k N(k) k^(1-d)`.
pub fn egs_criterion(schedule: &Schedule, dim: usize, k_max: u64) -> Result<CriterionReport> {
    schedule.validate()?;
    if k_max < 10 {
        return Err(Error::invalid("criterion cutoff must be at least 10"));
    }
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let p = 1.0 - dim as f64;
    Ok(CriterionReport::from_terms(
        "egs_shells",
        (1..=k_max).map(|k| (k, schedule.at(k) as f64 * (k as f64).powf(p))),
        power_verdict(schedule, p),
    ))
}

/// Partial sums of `sum_k N(k) k^(2-d)`, `N(k)` counting boundary sites of
/// the initial domain on the box shell of side `k`.
pub fn obt_box_criterion(schedule: &Schedule, dim: usize, k_max: u64) -> Result<CriterionReport> {
    schedule.validate()?;
    if dim < 3 {
        return Err(Error::invalid("the box criterion needs d >= 3"));
    }
    let p = 2.0 - dim as f64;
    Ok(CriterionReport::from_terms(
        "obt_boxes",
        (1..=k_max).map(|k| (k, schedule.at(k) as f64 * (k as f64).powf(p))),
        power_verdict(schedule, p),
    ))
}

/// Per-shell extremes of `P_x(SRW hits 0 before dB)` over the one-ring set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellPotential {
    pub k: u64,
    /// `inf_{x in C_k} P_x(hit 0 before dB_k)`.
    pub inf_own: f64,
    /// `sup_{x in C_k} P_x(hit 0 before dB_k)`.
    pub sup_own: f64,
    /// `sup_{x in C_k} P_x(hit 0 before dB_{k+1})`.
    pub sup_next: f64,
    pub ring_size: usize,
}

impl ShellPotential {
    /// `k^(d-1) * inf` and `k^(d-1) * sup` on the own shell.
    pub fn normalized(&self, dim: usize) -> (f64, f64) {
        let s = (self.k as f64).powi(dim as i32 - 1);
        (s * self.inf_own, s * self.sup_own)
    }

    /// `k log k * inf` (the two-dimensional lower-bound check).
    pub fn klogk_inf(&self) -> f64 {
        let k = self.k as f64;
        k * k.ln() * self.inf_own
    }
}

/// Sites of the ball, its boundary (degree-deficient sites) and the ring at
/// graph distance one from the boundary.
pub struct ShellGeometry {
    pub sites: Vec<Site>,
    pub boundary: Vec<Site>,
    pub ring: Vec<Site>,
}

pub fn shell_geometry(shape: &BallShape, dim: usize) -> ShellGeometry {
    let sites = shape.sites(dim);
    let is_bd = |z: &Site| neighbors(*z, dim).iter().any(|y| !shape.contains(y));
    let boundary: Vec<Site> = sites.iter().copied().filter(|z| is_bd(z)).collect();
    let bset: rustc_hash::FxHashSet<Site> = boundary.iter().copied().collect();
    let ring = sites
        .iter()
        .copied()
        .filter(|z| !bset.contains(z) && neighbors(*z, dim).iter().any(|y| bset.contains(y)))
        .collect();
    ShellGeometry { sites, boundary, ring }
}

/// Full field `P_x(SRW on Z^d hits 0 before the boundary of the ball)`.
pub fn hit_origin_field(shape: &BallShape, dim: usize, method: Method) -> Result<(ShellGeometry, Vec<(Site, f64)>)> {
    let geo = shell_geometry(shape, dim);
    let bset: rustc_hash::FxHashSet<Site> = geo.boundary.iter().copied().collect();
    let free: Vec<Site> = geo
        .sites
        .iter()
        .copied()
        .filter(|z| !z.is_origin() && !bset.contains(z))
        .collect();
    let start = geo.ring.first().copied().unwrap_or(Site::ORIGIN);
    let payoff = |z: Site| {
        if z.is_origin() {
            Some(1.0)
        } else if bset.contains(&z) {
            Some(0.0)
        } else {
            None
        }
    };
    let problem = DirichletProblem::on_lattice(dim, &free, payoff, start)?;
    let sol = problem.solve(method)?;
    let labels = problem.labels().expect("lattice problem");
    let field = labels.iter().copied().zip(sol.values).collect();
    Ok((geo, field))
}

/// Exact per-shell potentials behind the two-sided EGS series, for
/// `k = 1..=k_max` with shells `B_{ck}`.
pub fn shell_potentials(dim: usize, c: f64, metric: Metric, k_max: u64) -> Result<Vec<ShellPotential>> {
    if !(c >= 1.0) {
        return Err(Error::invalid("expansion factor must be >= 1"));
    }
    let mut out = Vec::with_capacity(k_max as usize);
    let mut next = None;
    for k in 1..=k_max {
        let own = match next.take() {
            Some(v) => v,
            None => hit_origin_field(&BallShape::new(metric, c * k as f64), dim, Method::Auto)?,
        };
        let outer = hit_origin_field(&BallShape::new(metric, c * (k + 1) as f64), dim, Method::Auto)?;
        let (geo, field) = &own;
        let lookup = |f: &Vec<(Site, f64)>| -> rustc_hash::FxHashMap<Site, f64> { f.iter().copied().collect() };
        let own_map = lookup(field);
        let outer_map = lookup(&outer.1);
        let mut inf_own = f64::INFINITY;
        let mut sup_own: f64 = 0.0;
        let mut sup_next: f64 = 0.0;
        for z in &geo.ring {
            let h = own_map.get(z).copied().unwrap_or(if z.is_origin() { 1.0 } else { 0.0 });
            inf_own = inf_own.min(h);
            sup_own = sup_own.max(h);
            let h2 = outer_map.get(z).copied().unwrap_or(if z.is_origin() { 1.0 } else { 0.0 });
            sup_next = sup_next.max(h2);
        }
        if geo.ring.is_empty() {
            inf_own = 0.0;
        }
        out.push(ShellPotential {
            k,
            inf_own,
            sup_own,
            sup_next,
            ring_size: geo.ring.len(),
        });
        next = Some(outer);
    }
    Ok(out)
}

/// The pair of EGS series `sum N(k) inf_{C_k} P(.. before dB_k)` (recurrence
/// side) and `sum N(k) sup_{C_k} P(.. before dB_{k+1})` (transience side),
/// with the per-shell potentials.
pub fn egs_bracket(
    schedule: &Schedule,
    dim: usize,
    c: f64,
    metric: Metric,
    k_max: u64,
) -> Result<(CriterionReport, CriterionReport, Vec<ShellPotential>)> {
    schedule.validate()?;
    let shells = shell_potentials(dim, c, metric, k_max)?;
    let verdict = power_verdict(schedule, 1.0 - dim as f64);
    let rec = CriterionReport::from_terms(
        "egs_rec",
        shells.iter().map(|s| (s.k, schedule.at(s.k) as f64 * s.inf_own)),
        verdict,
    );
    let trans = CriterionReport::from_terms(
        "egs_trans",
        shells.iter().map(|s| (s.k, schedule.at(s.k) as f64 * s.sup_next)),
        verdict,
    );
    Ok((rec, trans, shells))
}
