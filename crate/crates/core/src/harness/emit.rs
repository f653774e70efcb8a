use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::{ReplicaResult, Row, Summary, SweepRow};
use crate::error::{Error, Result};
use crate::potential::criteria::CriterionReport;

/// Version written as the first line (`#schema=N`) of every CSV.
pub const CSV_SCHEMA: u32 = 1;

const ROW_COLUMNS: [&str; 9] = [
    "replica",
    "t",
    "n0",
    "last_return",
    "dist",
    "domain_sites",
    "domain_edges",
    "mbar",
    "diff1",
];

const SUMMARY_COLUMNS: [&str; 9] = [
    "t",
    "replicas",
    "n0_median",
    "n0_q10",
    "n0_q90",
    "last_return_median",
    "dist_median",
    "mbar_median",
    "diff1_median",
];

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

/// Writes `#schema` and a header, then one serialized record per item.
fn write_csv<W: Write, T: Serialize>(mut w: W, header: &[&str], records: impl IntoIterator<Item = T>) -> Result<()> {
    let ctx = |e: std::io::Error| Error::io("writing CSV", e);
    writeln!(w, "#schema={CSV_SCHEMA}").map_err(ctx)?;
    let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    let csv_err = |e: csv::Error| Error::io("writing CSV", e.into());
    csv.write_record(header).map_err(csv_err)?;
    for r in records {
        csv.serialize(r).map_err(csv_err)?;
    }
    csv.flush().map_err(ctx)
}

pub fn write_results_csv(results: &[ReplicaResult], path: &Path) -> Result<()> {
    write_results_csv_to(results, create(path)?)
}

pub fn write_results_csv_to<W: Write>(results: &[ReplicaResult], w: W) -> Result<()> {
    write_csv(w, &ROW_COLUMNS, results.iter().flat_map(|r| r.rows.iter()))
}

pub fn read_results_csv(path: &Path) -> Result<Vec<Row>> {
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    rdr.deserialize()
        .map(|r| {
            r.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
        })
        .collect()
}

/// One JSON object per replica.
pub fn write_results_jsonl(results: &[ReplicaResult], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let ctx = |e: std::io::Error| Error::io(format!("writing {}", path.display()), e);
    for r in results {
        serde_json::to_writer(&mut w, r).map_err(|e| ctx(e.into()))?;
        w.write_all(b"\n").map_err(ctx)?;
    }
    w.flush().map_err(ctx)
}

pub fn read_results_jsonl(path: &Path) -> Result<Vec<ReplicaResult>> {
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", i + 1),
        })?);
    }
    Ok(out)
}

pub fn write_summary_csv(summary: &Summary, path: &Path) -> Result<()> {
    write_summary_csv_to(summary, create(path)?)
}

pub fn write_summary_csv_to<W: Write>(summary: &Summary, w: W) -> Result<()> {
    write_csv(w, &SUMMARY_COLUMNS, &summary.rows)
}

pub fn write_criterion_csv<W: Write>(report: &CriterionReport, w: W) -> Result<()> {
    write_csv(w, &["k", "term", "partial_sum"], &report.rows)
}

/// One row per grid cell: the cell's parameter values in key order, then
/// the summary columns.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    let ctx = |e: std::io::Error| Error::io("writing CSV", e);
    writeln!(w, "#schema={CSV_SCHEMA}").map_err(ctx)?;
    let mut csv = csv::WriterBuilder::new().from_writer(w);
    let csv_err = |e: csv::Error| Error::io("writing CSV", e.into());
    let tail = ["replicas", "truncated", "n0_median", "last_return_median", "n0_slope", "trailing_mbar_median"];
    if let Some(first) = rows.first() {
        let header: Vec<&str> = first.cell.iter().map(|(k, _)| k.as_str()).chain(tail).collect();
        csv.write_record(&header).map_err(csv_err)?;
    }
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in rows {
        let s = &r.summary;
        let rec: Vec<String> = r
            .cell
            .iter()
            .map(|(_, v)| v.clone())
            .chain([
                s.replicas.to_string(),
                s.truncated.to_string(),
                s.n0_median.to_string(),
                s.last_return_median.to_string(),
                opt(s.n0_slope),
                opt(s.trailing_mbar_median),
            ])
            .collect();
        csv.write_record(&rec).map_err(csv_err)?;
    }
    csv.flush().map_err(ctx)
}
