//! Dataset loading, saving, and synthesis.
//!
//! The canonical interchange format is headerless comma-separated CSV with
//! one sample per row; when labels are present they occupy the last column
//! as integers. All floating-point output is printed with 9 significant
//! digits so files round-trip to within print precision.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Formats a float with 9 significant digits (scientific notation).
pub(crate) fn fmt_g9(x: f64) -> String {
    format!("{:.8e}", x)
}

/// A dense row-major sample matrix with optional integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseDataset {
    n_samples: usize,
    n_features: usize,
    values: Vec<f64>,
    labels: Option<Vec<i64>>,
}

impl DenseDataset {
    /// Builds a dataset from a flat row-major value buffer, checking every
    /// invariant: finite values, positive shape, label length.
    pub fn new(
        values: Vec<f64>,
        n_samples: usize,
        n_features: usize,
        labels: Option<Vec<i64>>,
    ) -> Result<Self> {
        if n_samples == 0 || n_features == 0 {
            return Err(Error::param("dataset must have at least one sample and one feature"));
        }
        if values.len() != n_samples * n_features {
            return Err(Error::param(format!(
                "value buffer has {} entries, expected {}x{}",
                values.len(),
                n_samples,
                n_features
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!(
                "non-finite value at row {}, column {}",
                bad / n_features,
                bad % n_features
            )));
        }
        if let Some(ref l) = labels {
            if l.len() != n_samples {
                return Err(Error::param(format!(
                    "label vector has length {}, expected {}",
                    l.len(),
                    n_samples
                )));
            }
        }
        Ok(Self {
            n_samples,
            n_features,
            values,
            labels,
        })
    }

    /// Builds a dataset from per-sample rows.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Option<Vec<i64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::param("dataset must have at least one sample"));
        }
        let d = rows[0].len();
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::param(format!(
                "row {} has {} fields, expected {}",
                bad,
                rows[bad].len(),
                d
            )));
        }
        let n = rows.len();
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        Self::new(values, n, d, labels)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    /// Replaces the label vector (length-checked).
    pub fn with_labels(mut self, labels: Option<Vec<i64>>) -> Result<Self> {
        if let Some(ref l) = labels {
            if l.len() != self.n_samples {
                return Err(Error::param(format!(
                    "label vector has length {}, expected {}",
                    l.len(),
                    self.n_samples
                )));
            }
        }
        self.labels = labels;
        Ok(self)
    }
}

fn parse_label(field: &str, path: &Path, line: usize) -> Result<i64> {
    if let Ok(v) = field.parse::<i64>() {
        return Ok(v);
    }
    // Tolerate labels printed as integral floats ("3.0").
    if let Ok(f) = field.parse::<f64>() {
        if f.is_finite() && f.fract() == 0.0 {
            return Ok(f as i64);
        }
    }
    Err(Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("cannot parse label from {:?}", field),
    })
}

/// Loads a headerless CSV dataset. When `has_labels` is set the last column
/// is parsed as integer labels.
pub fn load_csv(path: impl AsRef<Path>, has_labels: bool) -> Result<DenseDataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<i64> = Vec::new();
    let mut width: Option<usize> = None;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    msg: format!("ragged row: {} fields, expected {}", fields.len(), w),
                });
            }
            _ => {}
        }
        let n_numeric = fields.len() - usize::from(has_labels);
        if n_numeric == 0 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg: "row has no feature columns".into(),
            });
        }
        let mut row = Vec::with_capacity(n_numeric);
        for field in &fields[..n_numeric] {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                msg: format!("cannot parse number from {:?}", field),
            })?;
            row.push(v);
        }
        if has_labels {
            labels.push(parse_label(fields[n_numeric], path, line_no)?);
        }
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(Error::EmptyInput {
            path: path.to_path_buf(),
        });
    }
    DenseDataset::from_rows(rows, has_labels.then_some(labels))
}

/// Writes a dataset as headerless CSV, labels (if any) as the trailing
/// integer column. Values are printed with 9 significant digits.
pub fn save_csv(data: &DenseDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for i in 0..data.n_samples() {
        let mut first = true;
        for v in data.row(i) {
            if !first {
                out.push(',');
            }
            out.push_str(&fmt_g9(*v));
            first = false;
        }
        if let Some(labels) = data.labels() {
            let _ = write!(out, ",{}", labels[i]);
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Synthetic dataset families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[clap(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Two isotropic Gaussian clusters at (-3, 0) and (3, 0).
    Blobs,
    /// Two interleaved half-circles.
    TwoMoons,
    /// Two concentric circles, radii 1.0 and 0.5.
    Circles,
}

/// Generates a labeled 2-D dataset. Pure function of its arguments: fixed
/// (kind, n, noise, seed) always yields bit-identical output.
pub fn generate_synthetic(
    kind: SyntheticKind,
    n: usize,
    noise: f64,
    seed: u64,
) -> Result<DenseDataset> {
    if n < 4 {
        return Err(Error::param(format!("need n >= 4 samples, got {}", n)));
    }
    if noise < 0.0 || !noise.is_finite() {
        return Err(Error::param(format!("noise must be finite and >= 0, got {}", noise)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n0 = n - n / 2;
    let n1 = n / 2;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);

    let mut push = |rng: &mut ChaCha8Rng, x: f64, y: f64, label: i64, rows: &mut Vec<Vec<f64>>| {
        let nx: f64 = rng.sample(rand_distr::StandardNormal);
        let ny: f64 = rng.sample(rand_distr::StandardNormal);
        rows.push(vec![x + noise * nx, y + noise * ny]);
        labels.push(label);
    };

    match kind {
        SyntheticKind::Blobs => {
            for _ in 0..n0 {
                push(&mut rng, -3.0, 0.0, 0, &mut rows);
            }
            for _ in 0..n1 {
                push(&mut rng, 3.0, 0.0, 1, &mut rows);
            }
        }
        SyntheticKind::TwoMoons => {
            for j in 0..n0 {
                let t = std::f64::consts::PI * j as f64 / (n0 - 1).max(1) as f64;
                push(&mut rng, t.cos(), t.sin(), 0, &mut rows);
            }
            for j in 0..n1 {
                let t = std::f64::consts::PI * j as f64 / (n1 - 1).max(1) as f64;
                push(&mut rng, 1.0 - t.cos(), 0.5 - t.sin(), 1, &mut rows);
            }
        }
        SyntheticKind::Circles => {
            for j in 0..n0 {
                let t = 2.0 * std::f64::consts::PI * j as f64 / n0 as f64;
                push(&mut rng, t.cos(), t.sin(), 0, &mut rows);
            }
            for j in 0..n1 {
                let t = 2.0 * std::f64::consts::PI * j as f64 / n1 as f64;
                push(&mut rng, 0.5 * t.cos(), 0.5 * t.sin(), 1, &mut rows);
            }
        }
    }
    DenseDataset::from_rows(rows, Some(labels))
}
