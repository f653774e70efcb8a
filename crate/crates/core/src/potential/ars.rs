//! Almost-regular-shape checker for the Euclidean ball.

use std::collections::VecDeque;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{neighbors, Domain, Edge, GrowingDomain, Site};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArsRow {
    pub t: u64,
    pub sites: usize,
    /// Largest `f` with `fB ∩ Z^d ⊆ D_t`.
    pub f: f64,
    /// `max_z d^{D_t}(z, fB)`, None if some site cannot reach the ball.
    pub max_dist: Option<u64>,
    /// `max_dist / ln f`; None when `f < e`.
    pub gamma: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArsReport {
    pub rows: Vec<ArsRow>,
    /// Smallest `γ` that every applicable snapshot satisfies.
    pub gamma_min: Option<f64>,
}

/// Checks one snapshot given by its sites and open edges.
pub fn ars_snapshot<F: Fn(Edge) -> bool>(dim: usize, t: u64, sites: &[Site], open: F, gamma: f64) -> Result<ArsRow> {
    if sites.is_empty() {
        return Err(Error::invalid("empty snapshot"));
    }
    let set: FxHashSet<Site> = sites.iter().copied().collect();
    let f2 = if set.contains(&Site::ORIGIN) {
        let missing = sites
            .iter()
            .flat_map(|&z| neighbors(z, dim))
            .filter(|n| !set.contains(n))
            .map(|n| n.l2_sq())
            .min()
            .expect("finite snapshot has an exterior");
        missing - 1
    } else {
        -1
    };
    let f = if f2 >= 0 { (f2 as f64).sqrt() } else { 0.0 };
    let mut dist: FxHashMap<Site, u64> = FxHashMap::default();
    let mut queue = VecDeque::new();
    for &z in sites {
        if f2 >= 0 && z.l2_sq() <= f2 {
            dist.insert(z, 0);
            queue.push_back(z);
        }
    }
    while let Some(z) = queue.pop_front() {
        let dz = dist[&z];
        for (i, n) in neighbors(z, dim).into_iter().enumerate() {
            if set.contains(&n) && !dist.contains_key(&n) && open(Edge::incident(z, i)) {
                dist.insert(n, dz + 1);
                queue.push_back(n);
            }
        }
    }
    let max_dist = (dist.len() == set.len()).then(|| dist.values().copied().max().unwrap_or(0));
    let gamma_row = if f >= std::f64::consts::E {
        Some(max_dist.map_or(f64::INFINITY, |m| m as f64 / f.ln()))
    } else {
        None
    };
    Ok(ArsRow {
        t,
        sites: sites.len(),
        f,
        max_dist,
        gamma: gamma_row,
        pass: gamma_row.map(|g| g <= gamma),
    })
}

/// Checks snapshots `G_t`, `t ∈ times`, of a finite growing domain.
pub fn ars_check(domain: &GrowingDomain, times: &[u64], gamma: f64) -> Result<ArsReport> {
    if !domain.is_finite() {
        return Err(Error::UnboundedDomain("almost-regular-shape check"));
    }
    let rows = times
        .iter()
        .map(|&t| ars_snapshot(domain.dim(), t, &domain.sites_at(t), |e| domain.is_open_at(e, t), gamma))
        .collect::<Result<Vec<_>>>()?;
    Ok(report(rows))
}

/// Checks induced site sets (every lattice edge inside the set open).
pub fn ars_check_sets(dim: usize, snapshots: &[(u64, Vec<Site>)], gamma: f64) -> Result<ArsReport> {
    let rows = snapshots
        .iter()
        .map(|(t, s)| ars_snapshot(dim, *t, s, |_| true, gamma))
        .collect::<Result<Vec<_>>>()?;
    Ok(report(rows))
}

fn report(rows: Vec<ArsRow>) -> ArsReport {
    let gamma_min = rows.iter().filter_map(|r| r.gamma).reduce(f64::max);
    ArsReport { rows, gamma_min }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{BallShape, Metric};

    #[test]
    fn exact_ball_has_zero_gamma() {
        let s = BallShape::new(Metric::Euclidean, 10.0).sites(2);
        let r = ars_check_sets(2, &[(0, s)], 0.0).unwrap();
        assert_eq!(r.rows[0].f, 10.0);
        assert_eq!(r.gamma_min, Some(0.0));
        assert_eq!(r.rows[0].pass, Some(true));
    }

    #[test]
    fn tentacle() {
        let mut s = BallShape::new(Metric::Euclidean, 100.0).sites(2);
        for x in 101..=105 {
            s.push(Site::from_slice(&[x, 0]));
        }
        let r = ars_check_sets(2, &[(0, s)], 1.0).unwrap();
        let row = &r.rows[0];
        assert_eq!(row.f, 100.0);
        assert_eq!(row.max_dist, Some(5));
        assert!((row.gamma.unwrap() - 5.0 / 100f64.ln()).abs() < 1e-12);
        assert_eq!(row.pass, Some(false));
    }

    #[test]
    fn small_snapshot_not_applicable() {
        let s = BallShape::new(Metric::Euclidean, 2.0).sites(2);
        let r = ars_check_sets(2, &[(0, s)], 1.0).unwrap();
        assert_eq!(r.rows[0].gamma, None);
        assert_eq!(r.gamma_min, None);
        assert!(ars_check_sets(2, &[(0, vec![])], 1.0).is_err());
    }
}
