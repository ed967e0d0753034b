//! CSV and JSON persistence.
//!
//! Floats are written with `{}`, Rust's shortest representation that parses
//! back to the same value.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::{DensityEstimate, RiskCurve, RiskKind, RiskPoint};
use crate::domain::{AcceptedDraw, ParameterPoint, ReferenceTable, RunWarning, SummaryVector};
use crate::engine::acceptance_rate;
use crate::error::{Error, Result};

/// Writes a header and rows of floats.
pub fn write_float_csv<W: Write, S: AsRef<str>>(
    writer: W,
    header: &[S],
    rows: &[Vec<f64>],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header.iter().map(|h| h.as_ref()))?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Dimension {
                expected: header.len(),
                found: row.len(),
            });
        }
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a float CSV; returns the header and the rows.
pub fn read_float_csv<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|field| {
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad float {field:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Scalar metadata stored next to a reference-table CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSidecar {
    /// Simulations performed, M.
    pub draws: u64,
    pub accepted: usize,
    pub epsilon: f64,
    pub seed: u64,
    /// `None` when M = 0.
    pub acceptance_rate: Option<f64>,
    pub proposal_mass: f64,
    pub observed_summary: SummaryVector,
    pub warning: Option<RunWarning>,
}

/// Path of the JSON sidecar belonging to a table CSV.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

fn table_header(d: usize, k: usize) -> Vec<String> {
    (1..=d)
        .map(|j| format!("theta_{j}"))
        .chain((1..=k).map(|j| format!("s_{j}")))
        .chain(std::iter::once("distance".to_owned()))
        .collect()
}

/// Writes the table as `theta_*, s_*, distance` rows plus a JSON sidecar.
pub fn write_reference_table(table: &ReferenceTable, csv_path: &Path) -> Result<()> {
    let k = table.observed_summary.dim();
    let d = table.draws.first().map_or(0, |draw| draw.theta.dim());
    let rows: Vec<Vec<f64>> = table
        .draws
        .iter()
        .map(|draw| {
            let mut row = Vec::with_capacity(d + k + 1);
            row.extend_from_slice(draw.theta.as_slice());
            row.extend_from_slice(draw.summary.as_slice());
            row.push(draw.distance);
            row
        })
        .collect();
    write_float_csv(
        BufWriter::new(File::create(csv_path)?),
        &table_header(d, k),
        &rows,
    )?;
    let sidecar = TableSidecar {
        draws: table.total_simulated,
        accepted: table.len(),
        epsilon: table.epsilon,
        seed: table.seed,
        acceptance_rate: acceptance_rate(table).ok(),
        proposal_mass: table.proposal_mass,
        observed_summary: table.observed_summary.clone(),
        warning: table.warning,
    };
    write_json(&sidecar_path(csv_path), &sidecar)
}

/// Reads a table written by [`write_reference_table`].
///
/// Draw indices are not stored; rows are numbered in file order.
pub fn read_reference_table(csv_path: &Path) -> Result<ReferenceTable> {
    let sidecar: TableSidecar = read_json(&sidecar_path(csv_path))?;
    let (header, rows) = read_float_csv(BufReader::new(File::open(csv_path)?))?;
    let k = sidecar.observed_summary.dim();
    let d = header.iter().filter(|h| h.starts_with("theta_")).count();
    if header != table_header(d, k) {
        return Err(Error::Config(format!(
            "unexpected reference-table header {header:?}"
        )));
    }
    let draws = rows
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            Ok(AcceptedDraw {
                index: i as u64,
                theta: ParameterPoint::new(row[..d].to_vec())?,
                summary: SummaryVector::new(row[d..d + k].to_vec())?,
                distance: row[d + k],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if draws.len() != sidecar.accepted {
        return Err(Error::Config(format!(
            "table has {} rows but sidecar records {} accepted draws",
            draws.len(),
            sidecar.accepted
        )));
    }
    Ok(ReferenceTable {
        draws,
        total_simulated: sidecar.draws,
        proposal_mass: sidecar.proposal_mass,
        epsilon: sidecar.epsilon,
        observed_summary: sidecar.observed_summary,
        seed: sidecar.seed,
        warning: sidecar.warning,
    })
}

/// `bin_center,value` rows.
pub fn write_density_csv(estimate: &DensityEstimate, path: &Path) -> Result<()> {
    let rows: Vec<Vec<f64>> = estimate
        .grid
        .iter()
        .zip(&estimate.values)
        .map(|(&g, &v)| vec![g, v])
        .collect();
    write_float_csv(
        BufWriter::new(File::create(path)?),
        &["bin_center", "value"],
        &rows,
    )
}

pub fn read_density_csv(path: &Path) -> Result<DensityEstimate> {
    let (header, rows) = read_float_csv(BufReader::new(File::open(path)?))?;
    if header != ["bin_center", "value"] {
        return Err(Error::Config(format!(
            "unexpected density header {header:?}"
        )));
    }
    if rows.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            found: rows.len(),
        });
    }
    let bin_width = (rows[rows.len() - 1][0] - rows[0][0]) / (rows.len() - 1) as f64;
    Ok(DensityEstimate {
        grid: rows.iter().map(|r| r[0]).collect(),
        values: rows.iter().map(|r| r[1]).collect(),
        bin_width,
    })
}

/// `epsilon,risk,n_samples` rows; the curve kind goes in the file name.
pub fn write_risk_curve_csv(curve: &RiskCurve, path: &Path) -> Result<()> {
    let rows: Vec<Vec<f64>> = curve
        .points
        .iter()
        .map(|p| vec![p.epsilon, p.risk, p.n_samples as f64])
        .collect();
    write_float_csv(
        BufWriter::new(File::create(path)?),
        &["epsilon", "risk", "n_samples"],
        &rows,
    )
}

pub fn read_risk_curve_csv(kind: RiskKind, path: &Path) -> Result<RiskCurve> {
    let (header, rows) = read_float_csv(BufReader::new(File::open(path)?))?;
    if header != ["epsilon", "risk", "n_samples"] {
        return Err(Error::Config(format!(
            "unexpected risk-curve header {header:?}"
        )));
    }
    RiskCurve::new(
        kind,
        rows.iter()
            .map(|r| RiskPoint {
                epsilon: r[0],
                risk: r[1],
                n_samples: r[2] as usize,
            })
            .collect(),
    )
}
