//! Prediction matrices: the m x n label matrix Z that every estimator
//! consumes, plus CSV parsing and structural validation.
//!
//! Rows are classifiers, columns are instances. Binary labels are stored
//! as -1/+1; multiclass labels as 1..=K.

use thiserror::Error;

/// Minimum number of classifiers required by the spectral identifiability
/// argument.
pub const MIN_CLASSIFIERS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("row {row} has {got} entries, expected {expected}")]
    RaggedRows { row: usize, expected: usize, got: usize },
    #[error("row {row}, column {col}: cannot parse {token:?} as an integer")]
    BadToken { row: usize, col: usize, token: String },
    #[error("row {row}, column {col}: label {value} outside the accepted alphabet")]
    BadLabel { row: usize, col: usize, value: i64 },
    #[error("row {row}, column {col}: empty cell")]
    EmptyCell { row: usize, col: usize },
    #[error("need at least {MIN_CLASSIFIERS} classifiers, got {m}")]
    TooFewClassifiers { m: usize },
    #[error("matrix must have at least one instance")]
    NoInstances,
}

/// Input label encoding for binary CSV files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    /// Labels are -1 / +1.
    PmOne,
    /// Labels are 0 / 1, mapped to -1 / +1.
    ZeroOne,
}

/// An m x n matrix of binary predictions with entries in {-1, +1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionMatrix {
    m: usize,
    n: usize,
    entries: Vec<i8>, // row-major
}

impl PredictionMatrix {
    /// Builds a matrix from row-major entries, enforcing the structural
    /// invariants (m >= 3, n >= 1, entries in {-1, +1}).
    pub fn new(m: usize, n: usize, entries: Vec<i8>) -> Result<Self, DataError> {
        if m < MIN_CLASSIFIERS {
            return Err(DataError::TooFewClassifiers { m });
        }
        if n == 0 {
            return Err(DataError::NoInstances);
        }
        assert_eq!(entries.len(), m * n, "entry buffer length mismatch");
        for (idx, &e) in entries.iter().enumerate() {
            if e != 1 && e != -1 {
                return Err(DataError::BadLabel {
                    row: idx / n,
                    col: idx % n,
                    value: e as i64,
                });
            }
        }
        Ok(Self { m, n, entries })
    }

    pub fn from_rows(rows: &[Vec<i8>]) -> Result<Self, DataError> {
        let m = rows.len();
        if m < MIN_CLASSIFIERS {
            return Err(DataError::TooFewClassifiers { m });
        }
        let n = rows[0].len();
        let mut entries = Vec::with_capacity(m * n);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(DataError::RaggedRows { row: i, expected: n, got: r.len() });
            }
            entries.extend_from_slice(r);
        }
        Self::new(m, n, entries)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.entries[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[i8] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = i8> + '_ {
        (0..self.m).map(move |i| self.get(i, j))
    }

    /// The matrix with every label flipped (class-symmetry experiments).
    pub fn negated(&self) -> Self {
        Self {
            m: self.m,
            n: self.n,
            entries: self.entries.iter().map(|&e| -e).collect(),
        }
    }

    pub fn transposed(&self) -> Result<Self, DataError> {
        let mut entries = Vec::with_capacity(self.m * self.n);
        for j in 0..self.n {
            for i in 0..self.m {
                entries.push(self.get(i, j));
            }
        }
        Self::new(self.n, self.m, entries)
    }

    /// Canonical pm_one CSV form (one classifier per line).
    pub fn to_csv_pm_one(&self) -> String {
        let mut out = String::new();
        for i in 0..self.m {
            let row: Vec<String> = self.row(i).iter().map(|e| e.to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// An m x n matrix of multiclass predictions with entries in 1..=K.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiPredictionMatrix {
    m: usize,
    n: usize,
    k: usize,
    entries: Vec<u32>, // row-major
}

impl MultiPredictionMatrix {
    pub fn new(m: usize, n: usize, k: usize, entries: Vec<u32>) -> Result<Self, DataError> {
        if m < MIN_CLASSIFIERS {
            return Err(DataError::TooFewClassifiers { m });
        }
        if n == 0 {
            return Err(DataError::NoInstances);
        }
        assert!(k >= 2, "need at least two classes");
        assert_eq!(entries.len(), m * n, "entry buffer length mismatch");
        for (idx, &e) in entries.iter().enumerate() {
            if e < 1 || e as usize > k {
                return Err(DataError::BadLabel {
                    row: idx / n,
                    col: idx % n,
                    value: e as i64,
                });
            }
        }
        Ok(Self { m, n, k, entries })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.entries[i * self.n + j]
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

fn parse_cell(row: usize, col: usize, cell: &str) -> Result<i64, DataError> {
    let t = cell.trim();
    if t.is_empty() {
        return Err(DataError::EmptyCell { row, col });
    }
    t.parse::<i64>().map_err(|_| DataError::BadToken {
        row,
        col,
        token: t.to_string(),
    })
}

fn parse_binary_grid(lines: &[&str], encoding: Encoding) -> Result<Vec<Vec<i8>>, DataError> {
    let mut rows: Vec<Vec<i8>> = Vec::new();
    let mut width: Option<usize> = None;
    for (i, line) in lines.iter().enumerate() {
        let mut row = Vec::new();
        for (j, cell) in line.split(',').enumerate() {
            let value = parse_cell(i, j, cell)?;
            let mapped = match (encoding, value) {
                (Encoding::PmOne, 1) => 1,
                (Encoding::PmOne, -1) => -1,
                (Encoding::ZeroOne, 1) => 1,
                (Encoding::ZeroOne, 0) => -1,
                _ => return Err(DataError::BadLabel { row: i, col: j, value }),
            };
            row.push(mapped);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(DataError::RaggedRows { row: i, expected: w, got: row.len() })
            }
            _ => {}
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Parses a binary prediction CSV (rows = classifiers, columns = instances).
///
/// Lines starting with `#` are skipped; `\r\n` endings are accepted. The
/// classifier count is checked before cell values, so a 2-row file fails
/// with TooFewClassifiers whatever its cells hold.
pub fn parse_prediction_csv(text: &str, encoding: Encoding) -> Result<PredictionMatrix, DataError> {
    let lines: Vec<&str> = data_lines(text).collect();
    if lines.len() < MIN_CLASSIFIERS {
        return Err(DataError::TooFewClassifiers { m: lines.len() });
    }
    PredictionMatrix::from_rows(&parse_binary_grid(&lines, encoding)?)
}

/// Parses the transposed on-disk orientation (rows = instances, columns =
/// classifiers); the three-classifier minimum applies to the columns.
pub fn parse_prediction_csv_transposed(
    text: &str,
    encoding: Encoding,
) -> Result<PredictionMatrix, DataError> {
    let lines: Vec<&str> = data_lines(text).collect();
    if lines.is_empty() {
        return Err(DataError::TooFewClassifiers { m: 0 });
    }
    let grid = parse_binary_grid(&lines, encoding)?;
    let n = grid.len();
    let m = grid[0].len();
    if m < MIN_CLASSIFIERS {
        return Err(DataError::TooFewClassifiers { m });
    }
    let mut entries = Vec::with_capacity(m * n);
    for i in 0..m {
        for row in &grid {
            entries.push(row[i]);
        }
    }
    PredictionMatrix::new(m, n, entries)
}

/// Parses a multiclass prediction CSV with labels in 1..=k.
pub fn parse_multiclass_csv(text: &str, k: usize) -> Result<MultiPredictionMatrix, DataError> {
    assert!(k >= 2, "need at least two classes");
    let lines: Vec<&str> = data_lines(text).collect();
    if lines.len() < MIN_CLASSIFIERS {
        return Err(DataError::TooFewClassifiers { m: lines.len() });
    }
    let mut entries: Vec<u32> = Vec::new();
    let mut width: Option<usize> = None;
    for (i, line) in lines.iter().enumerate() {
        let mut count = 0usize;
        for (j, cell) in line.split(',').enumerate() {
            let value = parse_cell(i, j, cell)?;
            if value < 1 || value > k as i64 {
                return Err(DataError::BadLabel { row: i, col: j, value });
            }
            entries.push(value as u32);
            count += 1;
        }
        match width {
            None => width = Some(count),
            Some(w) if w != count => {
                return Err(DataError::RaggedRows { row: i, expected: w, got: count })
            }
            _ => {}
        }
    }
    MultiPredictionMatrix::new(lines.len(), width.unwrap(), k, entries)
}

/// Warning codes attached by [`validate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueCode {
    /// A classifier emits the same label everywhere; its covariance row is zero.
    ConstantRow,
    /// Too few instances for the moment estimates to mean much.
    SmallN,
}

#[derive(Debug, Clone)]
pub struct Issue {
    pub code: IssueCode,
    pub message: String,
}

/// Report-only structural diagnostics; never an error.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

const SMALL_N_THRESHOLD: usize = 10;

/// Flags degenerate classifiers and tiny sample sizes as warnings.
pub fn validate(z: &PredictionMatrix) -> ValidationReport {
    let mut issues = Vec::new();
    for i in 0..z.m() {
        let first = z.get(i, 0);
        if (0..z.n()).all(|j| z.get(i, j) == first) {
            issues.push(Issue {
                code: IssueCode::ConstantRow,
                message: format!("classifier {i} predicts {first} on every instance"),
            });
        }
    }
    if z.n() < SMALL_N_THRESHOLD {
        issues.push(Issue {
            code: IssueCode::SmallN,
            message: format!("only {} instances; estimates will be noisy", z.n()),
        });
    }
    // warnings do not clear `ok`
    ValidationReport { ok: true, issues }
}
