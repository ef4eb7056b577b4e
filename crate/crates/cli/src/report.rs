//! `gsopt report`: markdown table and plot data from metric traces.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gsopt_core::optim::CSV_COLUMNS;

use crate::failure::{CliResult, Failure};

/// Metric columns after `iter` and `wall_s`.
const METRICS: [&str; 6] = ["fval", "feas_est", "dnorm", "grad_h", "kkt", "pcc"];

/// One metrics CSV: `(iter, values)` with values in [`CSV_COLUMNS`] order
/// after `iter`.
struct Trace {
    rows: Vec<(usize, Vec<Option<f64>>)>,
}

impl Trace {
    fn column(&self, name: &str) -> usize {
        CSV_COLUMNS.iter().position(|c| *c == name).unwrap() - 1
    }

    fn last(&self, name: &str) -> Option<f64> {
        let c = self.column(name);
        self.rows.iter().rev().find_map(|(_, v)| v[c])
    }
}

fn read_trace(path: &Path) -> CliResult<Option<Trace>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Failure::io(path.display(), e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Failure::io(path.display(), e))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header != CSV_COLUMNS {
        return Ok(None);
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Failure::io(path.display(), e))?;
        let bad = |what: &str| Failure::io(path.display(), format!("bad {what} in {rec:?}"));
        let iter: usize = rec[0].parse().map_err(|_| bad("iteration"))?;
        let mut vals = Vec::with_capacity(CSV_COLUMNS.len() - 1);
        for cell in rec.iter().skip(1) {
            vals.push(if cell.is_empty() {
                None
            } else {
                Some(cell.parse::<f64>().map_err(|_| bad("number"))?)
            });
        }
        rows.push((iter, vals));
    }
    Ok(Some(Trace { rows }))
}

/// Series label: the file stem without its `_seed-N` suffix.
fn series_of(path: &Path) -> String {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    match stem.rfind("_seed-") {
        Some(i) => stem[..i].to_string(),
        None => stem.to_string(),
    }
}

fn metrics_dir(dir: &Path) -> PathBuf {
    let runs = dir.join("runs");
    if runs.is_dir() {
        runs
    } else {
        dir.to_path_buf()
    }
}

/// Traces grouped by series, in name order.
fn load_traces(dir: &Path) -> CliResult<BTreeMap<String, Vec<Trace>>> {
    let mdir = metrics_dir(dir);
    let entries = fs::read_dir(&mdir).map_err(|e| Failure::io(mdir.display(), e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();
    let mut out: BTreeMap<String, Vec<Trace>> = BTreeMap::new();
    for p in paths {
        if let Some(t) = read_trace(&p)? {
            out.entry(series_of(&p)).or_default().push(t);
        }
    }
    if out.is_empty() {
        return Err(Failure::io(mdir.display(), "no metric CSV files"));
    }
    Ok(out)
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn cell(v: Option<f64>, fmt: impl Fn(f64) -> String) -> String {
    v.map_or_else(|| "-".to_string(), fmt)
}

/// Markdown table of terminal values, averaged over the runs of each series.
pub fn render_table(dir: &Path) -> CliResult<String> {
    let traces = load_traces(dir)?;
    let mut out = String::from("| Solver | Runs | Fval | Fea | PCC | Time (s) |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for (series, runs) in &traces {
        let terminal = |name: &str| -> Option<f64> {
            let v: Vec<f64> = runs.iter().filter_map(|t| t.last(name)).collect();
            mean(&v)
        };
        let _ = writeln!(
            out,
            "| {series} | {} | {} | {} | {} | {} |",
            runs.len(),
            cell(terminal("fval"), |v| format!("{v:.6e}")),
            cell(terminal("feas_est"), |v| format!("{v:.3e}")),
            cell(terminal("pcc"), |v| format!("{v:.4}")),
            cell(terminal("wall_s"), |v| format!("{v:.3}")),
        );
    }
    Ok(out)
}

/// One file per metric, `iter` then one column per series holding the mean
/// over that series' runs. Rows where no series has a value are skipped.
pub fn write_plot_data(dir: &Path, out: &Path) -> CliResult<Vec<PathBuf>> {
    let traces = load_traces(dir)?;
    fs::create_dir_all(out).map_err(|e| Failure::io(out.display(), e))?;
    let mut written = Vec::new();
    for name in METRICS {
        let mut by_iter: BTreeMap<usize, Vec<Option<f64>>> = BTreeMap::new();
        let n_series = traces.len();
        for (s, runs) in traces.values().enumerate() {
            let mut acc: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for t in runs {
                let c = t.column(name);
                for (it, vals) in &t.rows {
                    if let Some(v) = vals[c] {
                        acc.entry(*it).or_default().push(v);
                    }
                }
            }
            for (it, v) in acc {
                by_iter.entry(it).or_insert_with(|| vec![None; n_series])[s] = mean(&v);
            }
        }
        if by_iter.is_empty() {
            continue;
        }
        let mut body = String::from("iter");
        for s in traces.keys() {
            let _ = write!(body, ",{s}");
        }
        body.push('\n');
        for (it, vals) in by_iter {
            let _ = write!(body, "{it}");
            for v in vals {
                body.push(',');
                if let Some(v) = v {
                    let _ = write!(body, "{v}");
                }
            }
            body.push('\n');
        }
        let path = out.join(format!("{name}.csv"));
        fs::write(&path, body).map_err(|e| Failure::io(path.display(), e))?;
        written.push(path);
    }
    Ok(written)
}

/// Writes `report.md` and `plots/` under `out` (default: `dir`).
pub fn cmd_report(dir: &Path, out: Option<&Path>) -> CliResult<String> {
    let table = render_table(dir)?;
    let out = out.unwrap_or(dir);
    fs::create_dir_all(out).map_err(|e| Failure::io(out.display(), e))?;
    let path = out.join("report.md");
    fs::write(&path, &table).map_err(|e| Failure::io(path.display(), e))?;
    write_plot_data(dir, &out.join("plots"))?;
    Ok(table)
}
