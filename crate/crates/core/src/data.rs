//! Dataset ingestion, the GSMX binary format, preprocessing and one-pass batching.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gcca::BlockSpec;
use crate::linalg::DenseMatrix;

/// Samples in rows, features in columns. Entries are finite.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetMatrix(DenseMatrix);

impl DatasetMatrix {
    pub fn new(m: DenseMatrix) -> Result<Self> {
        if m.rows() == 0 {
            return Err(Error::Format("dataset has no samples".into()));
        }
        if !m.all_finite() {
            let idx = m.as_slice().iter().position(|v| !v.is_finite()).unwrap();
            return Err(Error::NonFinite {
                row: idx / m.cols(),
                col: idx % m.cols(),
                value: m.as_slice()[idx],
            });
        }
        Ok(DatasetMatrix(m))
    }

    pub fn samples(&self) -> usize {
        self.0.rows()
    }

    pub fn features(&self) -> usize {
        self.0.cols()
    }

    pub fn as_dense(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn into_dense(self) -> DenseMatrix {
        self.0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }
}

fn parse_err(path: &Path, line: usize, column: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        column,
        msg: msg.into(),
    }
}

/// Reads a comma-separated numeric matrix. A first row containing any
/// non-numeric cell is treated as a header.
pub fn load_csv(path: impl AsRef<Path>) -> Result<DatasetMatrix> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;

    let mut data = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0;
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, _>> =
            record.iter().map(|c| c.parse::<f64>()).collect();
        if idx == 0 && parsed.iter().any(|v| v.is_err()) {
            cols = Some(record.len());
            continue;
        }
        match cols {
            Some(c) if c != record.len() => {
                return Err(parse_err(
                    path,
                    line,
                    record.len().min(c) + 1,
                    format!("ragged row: expected {c} fields, found {}", record.len()),
                ));
            }
            None => cols = Some(record.len()),
            _ => {}
        }
        for (j, v) in parsed.into_iter().enumerate() {
            match v {
                Ok(x) if x.is_finite() => data.push(x),
                Ok(x) => {
                    return Err(parse_err(
                        path,
                        line,
                        j + 1,
                        format!("non-finite value {x}"),
                    ))
                }
                Err(_) => {
                    return Err(parse_err(
                        path,
                        line,
                        j + 1,
                        format!("non-numeric cell {:?}", &record[j]),
                    ))
                }
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(parse_err(path, 1, 1, "no numeric rows"));
    }
    DatasetMatrix::new(DenseMatrix::from_vec(rows, cols.unwrap_or(0), data)?)
}

/// Writes the matrix as comma-separated values without a header.
pub fn save_csv(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_path(path)?;
    for i in 0..m.rows() {
        w.write_record(m.row(i).iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub const GSMX_MAGIC: &[u8; 4] = b"GSMX";
pub const GSMX_VERSION: u8 = 1;
const GSMX_HEADER: usize = 4 + 1 + 4 + 4;

pub fn encode_bin(m: &DenseMatrix) -> Result<Vec<u8>> {
    let rows = u32::try_from(m.rows()).map_err(|_| Error::Format("too many rows".into()))?;
    let cols = u32::try_from(m.cols()).map_err(|_| Error::Format("too many columns".into()))?;
    let mut buf = Vec::with_capacity(GSMX_HEADER + 8 * m.as_slice().len());
    buf.extend_from_slice(GSMX_MAGIC);
    buf.push(GSMX_VERSION);
    buf.extend_from_slice(&rows.to_le_bytes());
    buf.extend_from_slice(&cols.to_le_bytes());
    for v in m.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(buf)
}

pub fn decode_bin(bytes: &[u8]) -> Result<DenseMatrix> {
    if bytes.len() < GSMX_HEADER {
        return Err(Error::Format(format!(
            "truncated header: expected at least {GSMX_HEADER} bytes, got {}",
            bytes.len()
        )));
    }
    if &bytes[..4] != GSMX_MAGIC {
        return Err(Error::Format(format!("bad magic {:?}", &bytes[..4])));
    }
    if bytes[4] != GSMX_VERSION {
        return Err(Error::Format(format!(
            "unsupported version {} (expected {GSMX_VERSION})",
            bytes[4]
        )));
    }
    let rows = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let expected = GSMX_HEADER + 8 * rows * cols;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "payload length mismatch: expected {expected} bytes, got {}",
            bytes.len()
        )));
    }
    let data = bytes[GSMX_HEADER..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DenseMatrix::from_vec(rows, cols, data)
}

pub fn save_bin(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    f.write_all(&encode_bin(m)?)?;
    f.flush()?;
    Ok(())
}

pub fn load_bin(path: impl AsRef<Path>) -> Result<DatasetMatrix> {
    DatasetMatrix::new(decode_bin(&fs::read(path)?)?)
}

/// Column centering and optional unit-variance scaling. Zero-variance
/// columns are left unscaled.
pub fn standardize(data: &DatasetMatrix, center: bool, scale: bool) -> Result<DatasetMatrix> {
    let n = data.samples();
    let d = data.features();
    if scale && n < 2 {
        return Err(Error::Domain("scaling needs at least two samples".into()));
    }
    let mut m = data.as_dense().clone();
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for (acc, v) in mean.iter_mut().zip(m.row(i)) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n as f64);

    let mut factor = vec![1.0; d];
    if scale {
        let mut ss = vec![0.0; d];
        for i in 0..n {
            for ((acc, v), mu) in ss.iter_mut().zip(m.row(i)).zip(&mean) {
                *acc += (v - mu) * (v - mu);
            }
        }
        for (j, s) in ss.iter().enumerate() {
            let sd = (s / (n as f64 - 1.0)).sqrt();
            if sd > 0.0 {
                factor[j] = 1.0 / sd;
            } else {
                warn!("column {j} has zero variance; left unscaled");
            }
        }
    }
    let shift: Vec<f64> = if center { mean } else { vec![0.0; d] };
    for i in 0..n {
        for ((v, mu), f) in m.row_mut(i).iter_mut().zip(&shift).zip(&factor) {
            *v = (*v - mu) * f;
        }
    }
    DatasetMatrix::new(m)
}

/// Read-only view of a contiguous column range.
#[derive(Clone, Copy, Debug)]
pub struct BlockView<'a> {
    parent: &'a DatasetMatrix,
    start: usize,
    width: usize,
}

impl<'a> BlockView<'a> {
    pub fn samples(&self) -> usize {
        self.parent.samples()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.parent.row(i)[self.start..self.start + self.width]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i)[j]
    }

    pub fn to_dataset(&self) -> DatasetMatrix {
        let m = DenseMatrix::from_fn(self.samples(), self.width, |i, j| self.get(i, j));
        DatasetMatrix(m)
    }
}

pub fn split_blocks<'a>(data: &'a DatasetMatrix, spec: &BlockSpec) -> Result<Vec<BlockView<'a>>> {
    if spec.total() != data.features() {
        return Err(Error::dim(
            "split_blocks",
            format!("{} features", spec.total()),
            format!("{} features", data.features()),
        ));
    }
    let mut start = 0;
    Ok(spec
        .dims()
        .iter()
        .map(|&w| {
            let v = BlockView {
                parent: data,
                start,
                width: w,
            };
            start += w;
            v
        })
        .collect())
}

/// Seeded shuffled partition of `0..n` into consecutive batches of size
/// `l`; the last batch holds the `n mod l` leftover indices when nonzero.
#[derive(Clone, Debug)]
pub struct BatchIterator {
    perm: Vec<usize>,
    batch: usize,
    cursor: usize,
}

impl BatchIterator {
    pub fn new(n: usize, l: usize, seed: u64) -> Result<Self> {
        Self::with_rng(n, l, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn with_rng(n: usize, l: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if l == 0 || l > n {
            return Err(Error::Domain(format!(
                "batch size must lie in [1, {n}], got {l}"
            )));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        Ok(BatchIterator {
            perm,
            batch: l,
            cursor: 0,
        })
    }

    pub fn num_batches(&self) -> usize {
        self.perm.len().div_ceil(self.batch)
    }

    pub fn remaining(&self) -> usize {
        (self.perm.len() - self.cursor).div_ceil(self.batch)
    }
}

impl Iterator for BatchIterator {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.cursor >= self.perm.len() {
            return None;
        }
        let end = (self.cursor + self.batch).min(self.perm.len());
        let out = self.perm[self.cursor..end].to_vec();
        self.cursor = end;
        Some(out)
    }
}

pub fn batches(n: usize, l: usize, seed: u64) -> Result<BatchIterator> {
    BatchIterator::new(n, l, seed)
}
