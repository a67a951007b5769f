//! Probability matrices and their on-disk formats.
//!
//! Text: a header line `n_epochs n_classes`, then one whitespace-separated
//! row per epoch.
//!
//! Binary: magic `ECGPROB1`, `n_epochs` and `n_classes` as u64 LE, then
//! row-major f64 LE values.

use std::fmt::Write as _;

use super::ModelError;

pub const PROB_MAGIC: &[u8; 8] = b"ECGPROB1";
/// Row-sum tolerance for externally produced files.
pub const FILE_ROW_TOLERANCE: f64 = 1e-4;
/// Row-sum tolerance for matrices produced in-process.
pub const ROW_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix {
    n_classes: usize,
    data: Vec<f64>,
}

impl ProbabilityMatrix {
    pub fn new(n_classes: usize, data: Vec<f64>) -> Result<Self, ModelError> {
        Self::with_tolerance(n_classes, data, ROW_TOLERANCE)
    }

    pub fn with_tolerance(n_classes: usize, data: Vec<f64>, tol: f64) -> Result<Self, ModelError> {
        if n_classes == 0 || data.len() % n_classes != 0 {
            return Err(ModelError::Shape(format!(
                "{} values do not form rows of {n_classes}",
                data.len()
            )));
        }
        for (row, r) in data.chunks_exact(n_classes).enumerate() {
            if r.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(ModelError::InvalidRow {
                    row,
                    reason: "negative or non-finite entry".into(),
                });
            }
            let sum: f64 = r.iter().sum();
            if (sum - 1.0).abs() > tol {
                return Err(ModelError::InvalidRow {
                    row,
                    reason: format!("row sums to {sum}"),
                });
            }
        }
        Ok(ProbabilityMatrix { n_classes, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(ModelError::Shape("ragged rows".into()));
        }
        Self::new(k, rows.concat())
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.n_classes
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_classes)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Argmax per row; ties go to the lowest class index.
    pub fn argmax(&self) -> Vec<usize> {
        self.rows().map(super::argmax).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.n_rows(), self.n_classes);
        for r in self.rows() {
            let line: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 8 * self.data.len());
        out.extend_from_slice(PROB_MAGIC);
        out.extend_from_slice(&(self.n_rows() as u64).to_le_bytes());
        out.extend_from_slice(&(self.n_classes as u64).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }
}

fn parse_text(text: &str) -> Result<(usize, usize, Vec<f64>), ModelError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| ModelError::Format("empty file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| ModelError::Format(format!("bad header '{header}'"))))
        .collect::<Result<_, _>>()?;
    let [n, k] = dims[..] else {
        return Err(ModelError::Format(format!("header must be 'n_epochs n_classes', got '{header}'")));
    };
    let mut data = Vec::with_capacity(n * k);
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| ModelError::Format(format!("row {i}: bad value '{t}'")))
            })
            .collect::<Result<_, _>>()?;
        if vals.len() != k {
            return Err(ModelError::Format(format!("row {i}: {} values, expected {k}", vals.len())));
        }
        data.extend(vals);
        rows += 1;
    }
    if rows != n {
        return Err(ModelError::Format(format!("header declares {n} rows, file has {rows}")));
    }
    Ok((n, k, data))
}

fn parse_binary(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>), ModelError> {
    if bytes.len() < 24 {
        return Err(ModelError::Format("binary header truncated".into()));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let k = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let body = &bytes[24..];
    if Some(body.len()) != n.checked_mul(k).and_then(|c| c.checked_mul(8)) {
        return Err(ModelError::Format(format!(
            "binary payload is {} bytes, header implies {n} x {k} doubles",
            body.len()
        )));
    }
    Ok((
        n,
        k,
        body.chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect(),
    ))
}

/// Parse a text or binary matrix (detected by the magic) and check row sums
/// and, when given, the expected number of epochs.
pub fn ingest_probabilities(bytes: &[u8], expected_rows: Option<usize>) -> Result<ProbabilityMatrix, ModelError> {
    let (n, k, data) = if bytes.starts_with(PROB_MAGIC) {
        parse_binary(bytes)?
    } else {
        let text = std::str::from_utf8(bytes).map_err(|_| ModelError::Format("not UTF-8 text".into()))?;
        parse_text(text)?
    };
    if let Some(expected) = expected_rows {
        if n != expected {
            return Err(ModelError::CountMismatch { rows: n, labels: expected });
        }
    }
    ProbabilityMatrix::with_tolerance(k, data, FILE_ROW_TOLERANCE)
}
