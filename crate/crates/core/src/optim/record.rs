use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

/// One row of a run trace; `None` renders as an empty CSV cell.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricRow {
    pub iter: usize,
    pub wall_s: f64,
    pub fval: Option<f64>,
    pub feas_est: Option<f64>,
    pub dnorm: Option<f64>,
    pub grad_h: Option<f64>,
    pub kkt: Option<f64>,
    pub pcc: Option<f64>,
}

pub const CSV_COLUMNS: [&str; 8] = [
    "iter", "wall_s", "fval", "feas_est", "dnorm", "grad_h", "kkt", "pcc",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSummary {
    pub solver: String,
    pub iterations: usize,
    pub alpha: f64,
    pub tracking_weight: f64,
    /// Ada runs: iterations whose step exceeded the displacement bound.
    pub displacement_violations: usize,
    /// Ada runs: entries where the running max second moment decreased.
    pub monotonicity_violations: usize,
    /// Deterministic runs: number of step halvings.
    pub step_halvings: usize,
    pub wall_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunRecord {
    pub rows: Vec<MetricRow>,
    pub summary: RunSummary,
}

fn cell(out: &mut String, v: Option<f64>) {
    out.push(',');
    if let Some(v) = v {
        let _ = write!(out, "{v}");
    }
}

impl RunRecord {
    pub fn last(&self) -> Option<&MetricRow> {
        self.rows.last()
    }

    /// Last row carrying a value for the given metric.
    pub fn last_with(&self, f: impl Fn(&MetricRow) -> Option<f64>) -> Option<f64> {
        self.rows.iter().rev().find_map(f)
    }

    pub fn to_csv(&self) -> String {
        let mut out = CSV_COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{},{}", r.iter, r.wall_s);
            cell(&mut out, r.fval);
            cell(&mut out, r.feas_est);
            cell(&mut out, r.dnorm);
            cell(&mut out, r.grad_h);
            cell(&mut out, r.kkt);
            cell(&mut out, r.pcc);
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}
