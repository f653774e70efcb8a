use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{run_experiment, summarize, ExperimentConfig, Summary};
use crate::error::{Error, Result};

/// Parameter lattice: dotted config path -> values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Grid(pub BTreeMap<String, Vec<toml::Value>>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// `(path, value)` in key order.
    pub cell: Vec<(String, String)>,
    pub summary: Summary,
}

pub fn load_grid(path: &Path) -> Result<Grid> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn lookup<'a>(v: &'a toml::Value, path: &str) -> Option<&'a toml::Value> {
    path.split('.').try_fold(v, |v, k| v.get(k))
}

fn set(cfg: &ExperimentConfig, path: &str, value: &toml::Value) -> Result<ExperimentConfig> {
    let bad = || Error::Config(format!("grid key `{path}` is not a config path"));
    let mut root = toml::Value::try_from(cfg).map_err(|e| Error::Config(e.to_string()))?;
    let mut keys: Vec<&str> = path.split('.').collect();
    let leaf = keys.pop().ok_or_else(bad)?;
    let mut node = &mut root;
    for k in keys {
        node = node.get_mut(k).ok_or_else(bad)?;
    }
    node.as_table_mut().ok_or_else(bad)?.insert(leaf.to_string(), value.clone());
    let next: ExperimentConfig = root.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    next.validate()?;
    // unknown keys inside tagged enums are dropped silently; catch them here
    let echo = toml::Value::try_from(&next).map_err(|e| Error::Config(e.to_string()))?;
    if lookup(&echo, path) != Some(value) {
        return Err(bad());
    }
    Ok(next)
}

/// Runs the cross product of `grid` on top of `cfg`, one summary row per
/// cell, cells in lexicographic key order.
pub fn sweep(cfg: &ExperimentConfig, grid: &Grid, workers: Option<usize>) -> Result<Vec<SweepRow>> {
    if grid.0.is_empty() || grid.0.values().any(|v| v.is_empty()) {
        return Err(Error::Config("empty grid".into()));
    }
    let keys: Vec<&String> = grid.0.keys().collect();
    let mut idx = vec![0usize; keys.len()];
    let mut rows = Vec::new();
    loop {
        let mut cell_cfg = cfg.clone();
        let mut cell = Vec::with_capacity(keys.len());
        for (k, &i) in keys.iter().zip(&idx) {
            let v = &grid.0[*k][i];
            cell_cfg = set(&cell_cfg, k, v)?;
            cell.push(((*k).clone(), v.to_string()));
        }
        let results = run_experiment(&cell_cfg, workers)?;
        rows.push(SweepRow {
            cell,
            summary: summarize(&results)?,
        });
        // odometer, last key fastest
        let mut pos = keys.len();
        loop {
            if pos == 0 {
                return Ok(rows);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < grid.0[keys[pos]].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "dim = 2\nhorizon = 400\nreplicas = 2\nmaster_seed = 3\n[model]\nkind = \"psrw\"\nstrategy = { strategy = \"guided\", l = 2 }\n";

    #[test]
    fn grid_over_stretch() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        let grid: Grid = toml::from_str("\"model.strategy.l\" = [2, 4]\n").unwrap();
        let rows = sweep(&cfg, &grid, Some(1)).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].cell, vec![("model.strategy.l".to_string(), "4".to_string())]);
    }

    #[test]
    fn singleton_matches_run() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        let grid: Grid = toml::from_str("horizon = [400]\n").unwrap();
        let rows = sweep(&cfg, &grid, Some(1)).unwrap();
        let direct = summarize(&run_experiment(&cfg, Some(1)).unwrap()).unwrap();
        assert_eq!(rows[0].summary, direct);
    }

    #[test]
    fn bad_grids() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        assert!(sweep(&cfg, &Grid::default(), None).is_err());
        let typo: Grid = toml::from_str("\"model.strategy.ell\" = [2]\n").unwrap();
        assert!(matches!(sweep(&cfg, &typo, None), Err(Error::Config(_))));
        let missing: Grid = toml::from_str("\"model.nope.l\" = [2]\n").unwrap();
        assert!(sweep(&cfg, &missing, None).is_err());
    }
}
