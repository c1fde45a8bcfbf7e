//! Dataset directory reading and writing.
//!
//! A dataset is a directory of delimited text files:
//!
//! * `view_0.txt` … `view_{V-1}.txt` — one d×n feature matrix each. First
//!   line `d n`, then d tab-separated rows of 17-significant-digit decimal
//!   floats; `NaN` marks a missing feature value.
//! * `labels.txt` — the observed m×n label matrix. First line `m n`, then
//!   integer entries `1` (positive), `-1` (negative), `0` (unknown).
//! * `truth.txt` — the complete m×n ground-truth label matrix, entries
//!   `1`/`-1` only. Used for evaluation, never for training.
//! * `partition.txt` — n lines, one sample role each: `labeled`,
//!   `unlabeled`, or `test`.
//!
//! Matrices are written with `{:.16e}` formatting (17 significant digits),
//! which round-trips every finite f64 exactly. Score matrices written by the
//! runner (`predictions/*.txt`) use the same numeric matrix format.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::{CliError, CliResult};
use mvmc_core::{FeatureMatrix, Label, LabelMatrix, SampleRole};

pub const LABELS_FILE: &str = "labels.txt";
pub const TRUTH_FILE: &str = "truth.txt";
pub const PARTITION_FILE: &str = "partition.txt";

pub fn view_file(v: usize) -> String {
    format!("view_{v}.txt")
}

// ---------------------------------------------------------------------------
// Numeric matrices
// ---------------------------------------------------------------------------

/// Render a matrix in the dataset text format.
pub fn format_matrix(matrix: &Array2<f64>) -> String {
    let (rows, cols) = matrix.dim();
    let mut out = String::new();
    let _ = writeln!(out, "{rows} {cols}");
    for r in 0..rows {
        for c in 0..cols {
            if c > 0 {
                out.push('\t');
            }
            let _ = write!(out, "{:.16e}", matrix[(r, c)]);
        }
        out.push('\n');
    }
    out
}

/// Parse a matrix in the dataset text format.
pub fn parse_matrix(text: &str, what: &str) -> CliResult<Array2<f64>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::data(format!("{what}: empty file")))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(CliError::data(format!(
            "{what}: header must be 'rows cols', got '{header}'"
        )));
    }
    let rows: usize = dims[0]
        .parse()
        .map_err(|_| CliError::data(format!("{what}: bad row count '{}'", dims[0])))?;
    let cols: usize = dims[1]
        .parse()
        .map_err(|_| CliError::data(format!("{what}: bad column count '{}'", dims[1])))?;
    let mut matrix = Array2::zeros((rows, cols));
    let mut r = 0;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        if r >= rows {
            return Err(CliError::data(format!(
                "{what}: more than {rows} data rows"
            )));
        }
        let mut c = 0;
        for token in line.split_whitespace() {
            if c >= cols {
                return Err(CliError::data(format!(
                    "{what}: row {r} has more than {cols} entries"
                )));
            }
            let value: f64 = token.parse().map_err(|_| {
                CliError::data(format!("{what}: row {r} entry {c}: bad number '{token}'"))
            })?;
            matrix[(r, c)] = value;
            c += 1;
        }
        if c != cols {
            return Err(CliError::data(format!(
                "{what}: row {r} has {c} entries, expected {cols}"
            )));
        }
        r += 1;
    }
    if r != rows {
        return Err(CliError::data(format!(
            "{what}: found {r} data rows, expected {rows}"
        )));
    }
    Ok(matrix)
}

pub fn write_matrix(path: &Path, matrix: &Array2<f64>) -> CliResult<()> {
    std::fs::write(path, format_matrix(matrix))
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

pub fn read_matrix(path: &Path) -> CliResult<Array2<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    parse_matrix(&text, &path.display().to_string())
}

// ---------------------------------------------------------------------------
// Feature views (NaN = missing)
// ---------------------------------------------------------------------------

pub fn feature_to_matrix(view: &FeatureMatrix) -> Array2<f64> {
    let (d, n) = (view.feature_dim(), view.num_samples());
    let mut out = Array2::zeros((d, n));
    for f in 0..d {
        for s in 0..n {
            out[(f, s)] = view.get(f, s).unwrap_or(f64::NAN);
        }
    }
    out
}

pub fn matrix_to_feature(matrix: Array2<f64>) -> CliResult<FeatureMatrix> {
    if matrix.iter().any(|v| v.is_nan()) {
        let missing = matrix.mapv(f64::is_nan);
        let values = matrix.mapv(|v| if v.is_nan() { 0.0 } else { v });
        FeatureMatrix::with_missing(values, missing).map_err(CliError::from_data_stage)
    } else if matrix.iter().any(|v| !v.is_finite()) {
        Err(CliError::data("feature matrix contains infinite values"))
    } else {
        Ok(FeatureMatrix::dense(matrix))
    }
}

// ---------------------------------------------------------------------------
// Label matrices (1 / -1 / 0)
// ---------------------------------------------------------------------------

pub fn format_labels(labels: &LabelMatrix) -> String {
    let (m, n) = (labels.num_labels(), labels.num_samples());
    let mut out = String::new();
    let _ = writeln!(out, "{m} {n}");
    for t in 0..m {
        for j in 0..n {
            if j > 0 {
                out.push('\t');
            }
            let symbol = match labels.get(t, j) {
                Label::Pos => "1",
                Label::Neg => "-1",
                Label::Unknown => "0",
            };
            out.push_str(symbol);
        }
        out.push('\n');
    }
    out
}

pub fn parse_labels(text: &str, what: &str, require_complete: bool) -> CliResult<LabelMatrix> {
    let matrix = parse_matrix(text, what)?;
    let (m, n) = matrix.dim();
    let mut labels = LabelMatrix::unknown(m, n);
    for t in 0..m {
        for j in 0..n {
            let value = match matrix[(t, j)] {
                v if v == 1.0 => Label::Pos,
                v if v == -1.0 => Label::Neg,
                v if v == 0.0 => Label::Unknown,
                v => {
                    return Err(CliError::data(format!(
                        "{what}: entry ({t}, {j}) must be 1, -1, or 0, got {v}"
                    )))
                }
            };
            if require_complete && value == Label::Unknown {
                return Err(CliError::data(format!(
                    "{what}: entry ({t}, {j}) is unknown but the matrix must be complete"
                )));
            }
            labels.set(t, j, value);
        }
    }
    Ok(labels)
}

pub fn write_labels(path: &Path, labels: &LabelMatrix) -> CliResult<()> {
    std::fs::write(path, format_labels(labels))
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

pub fn read_labels(path: &Path, require_complete: bool) -> CliResult<LabelMatrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    parse_labels(&text, &path.display().to_string(), require_complete)
}

// ---------------------------------------------------------------------------
// Partition files
// ---------------------------------------------------------------------------

pub fn format_partition(partition: &[SampleRole]) -> String {
    let mut out = String::new();
    for role in partition {
        out.push_str(role.as_str());
        out.push('\n');
    }
    out
}

pub fn parse_partition(text: &str, what: &str) -> CliResult<Vec<SampleRole>> {
    let mut roles = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let role = SampleRole::parse(trimmed)
            .map_err(|e| CliError::data(format!("{what}: line {}: {e}", i + 1)))?;
        roles.push(role);
    }
    if roles.is_empty() {
        return Err(CliError::data(format!("{what}: no sample roles found")));
    }
    Ok(roles)
}

pub fn write_partition(path: &Path, partition: &[SampleRole]) -> CliResult<()> {
    std::fs::write(path, format_partition(partition))
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

pub fn read_partition(path: &Path) -> CliResult<Vec<SampleRole>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    parse_partition(&text, &path.display().to_string())
}

// ---------------------------------------------------------------------------
// Whole datasets
// ---------------------------------------------------------------------------

/// On-disk dataset: views plus observed labels, complete truth, and roles.
#[derive(Debug, Clone)]
pub struct StoredDataset {
    pub views: Vec<FeatureMatrix>,
    pub labels: LabelMatrix,
    pub truth: LabelMatrix,
    pub partition: Vec<SampleRole>,
}

/// Write a dataset directory (created if absent).
pub fn write_dataset(dir: &Path, dataset: &StoredDataset) -> CliResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", dir.display())))?;
    for (v, view) in dataset.views.iter().enumerate() {
        write_matrix(&dir.join(view_file(v)), &feature_to_matrix(view))?;
    }
    write_labels(&dir.join(LABELS_FILE), &dataset.labels)?;
    write_labels(&dir.join(TRUTH_FILE), &dataset.truth)?;
    write_partition(&dir.join(PARTITION_FILE), &dataset.partition)?;
    Ok(())
}

/// Read a dataset directory; views are discovered as `view_0.txt`,
/// `view_1.txt`, … until the first gap.
pub fn read_dataset(dir: &Path) -> CliResult<StoredDataset> {
    let mut views = Vec::new();
    loop {
        let path = dir.join(view_file(views.len()));
        if !path.exists() {
            break;
        }
        views.push(matrix_to_feature(read_matrix(&path)?)?);
    }
    if views.is_empty() {
        return Err(CliError::data(format!(
            "no view files (view_0.txt, …) in {}",
            dir.display()
        )));
    }
    let labels = read_labels(&dir.join(LABELS_FILE), false)?;
    let truth = read_labels(&dir.join(TRUTH_FILE), true)?;
    let partition = read_partition(&dir.join(PARTITION_FILE))?;

    let n = labels.num_samples();
    if partition.len() != n {
        return Err(CliError::data(format!(
            "partition lists {} samples but labels have {n}",
            partition.len()
        )));
    }
    if truth.num_labels() != labels.num_labels() || truth.num_samples() != n {
        return Err(CliError::data(format!(
            "truth is {}x{} but labels are {}x{n}",
            truth.num_labels(),
            truth.num_samples(),
            labels.num_labels(),
        )));
    }
    Ok(StoredDataset {
        views,
        labels,
        truth,
        partition,
    })
}

/// Resolve a dataset directory from a path argument.
pub fn dataset_dir(path: &Path) -> CliResult<PathBuf> {
    if !path.is_dir() {
        return Err(CliError::data(format!(
            "dataset path {} is not a directory",
            path.display()
        )));
    }
    Ok(path.to_path_buf())
}
