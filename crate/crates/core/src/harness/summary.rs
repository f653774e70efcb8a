use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ReplicaResult;
use crate::error::{Error, Result};

/// Per-checkpoint aggregate over replicas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub t: u64,
    pub replicas: usize,
    pub n0_median: Option<f64>,
    pub n0_q10: Option<f64>,
    pub n0_q90: Option<f64>,
    pub last_return_median: Option<f64>,
    pub dist_median: Option<f64>,
    pub mbar_median: Option<f64>,
    pub diff1_median: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub replicas: usize,
    pub truncated: usize,
    pub rows: Vec<SummaryRow>,
    /// Least-squares slope of the median `N_0(t)` against `ln t`.
    pub n0_slope: Option<f64>,
    pub n0_median: f64,
    /// Median last return, never-returned counted as 0.
    pub last_return_median: f64,
    pub trailing_mbar_median: Option<f64>,
}

/// Linear-interpolation quantile of `values` (need not be sorted).
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// Least-squares slope of `y` on `x`.
pub fn ls_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

pub fn summarize(results: &[ReplicaResult]) -> Result<Summary> {
    if results.is_empty() {
        return Err(Error::invalid("nothing to summarize"));
    }
    let mut by_t: BTreeMap<u64, Vec<&super::Row>> = BTreeMap::new();
    for r in results {
        for row in &r.rows {
            by_t.entry(row.t).or_default().push(row);
        }
    }
    let col = |rows: &[&super::Row], f: &dyn Fn(&super::Row) -> Option<f64>| -> Vec<f64> {
        rows.iter().filter_map(|r| f(r)).collect()
    };
    let rows: Vec<SummaryRow> = by_t
        .iter()
        .map(|(&t, rows)| {
            let n0 = col(rows, &|r| r.n0.map(|v| v as f64));
            SummaryRow {
                t,
                replicas: rows.len(),
                n0_median: quantile(&n0, 0.5),
                n0_q10: quantile(&n0, 0.1),
                n0_q90: quantile(&n0, 0.9),
                last_return_median: quantile(&col(rows, &|r| r.n0.map(|_| r.last_return.unwrap_or(0) as f64)), 0.5),
                dist_median: quantile(&col(rows, &|r| r.dist.map(|v| v as f64)), 0.5),
                mbar_median: quantile(&col(rows, &|r| r.mbar), 0.5),
                diff1_median: quantile(&col(rows, &|r| r.diff1.map(|v| v as f64)), 0.5),
            }
        })
        .collect();
    let curve: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.t >= 1)
        .filter_map(|r| r.n0_median.map(|m| ((r.t as f64).ln(), m)))
        .collect();
    let n0: Vec<f64> = results.iter().map(|r| r.n0 as f64).collect();
    let last: Vec<f64> = results.iter().map(|r| r.last_return.unwrap_or(0) as f64).collect();
    let trailing: Vec<f64> = results.iter().filter_map(|r| r.budget.as_ref()?.trailing).collect();
    Ok(Summary {
        replicas: results.len(),
        truncated: results.iter().filter(|r| r.truncated).count(),
        rows,
        n0_slope: ls_slope(&curve),
        n0_median: quantile(&n0, 0.5).expect("non-empty"),
        last_return_median: quantile(&last, 0.5).expect("non-empty"),
        trailing_mbar_median: quantile(&trailing, 0.5),
    })
}
