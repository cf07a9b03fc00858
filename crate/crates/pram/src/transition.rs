//! Transition probability matrices and their per-attribute product structure.
//!
//! A transition matrix `A` is row-stochastic and read in source → destination
//! orientation: `A[u][v]` is the probability that value `u` is released as
//! value `v`. Multi-attribute tables use one matrix per attribute; the matrix
//! on the bundled product domain is never materialized — its entries are the
//! products of the per-attribute entries ([`AttributeMatrixSet::product_entry`]),
//! because attributes are randomized independently.
//!
//! Retention-replacement perturbation (RRP) is the workhorse instance: keep a
//! value with probability `ρ`, otherwise replace it with a uniform draw from
//! the whole domain (which may re-select the original value). For a domain of
//! size `m` that gives diagonal entries `ρ + (1-ρ)/m` and off-diagonal
//! entries `(1-ρ)/m`.

use thiserror::Error;

use crate::tabular::TableSchema;

/// Row-sum tolerance for programmatic construction.
pub const CONSTRUCTION_TOLERANCE: f64 = 1e-12;
/// Row-sum tolerance when loading a matrix from a file.
pub const FILE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TransitionError {
    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("matrix must be square: {rows} rows but row {row} has {cols} entries")]
    NotSquare {
        rows: usize,
        row: usize,
        cols: usize,
    },
    #[error("matrix is empty")]
    Empty,
    #[error("entry ({row}, {col}) = {value} is outside [0, 1]")]
    EntryOutOfRange { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}, more than {tolerance} away from 1")]
    RowSum {
        row: usize,
        sum: f64,
        tolerance: f64,
    },
    #[error("expected {expected} retention probabilities, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("matrix {index} has size {matrix} but attribute {attribute:?} has {domain} values")]
    DomainSizeMismatch {
        index: usize,
        matrix: usize,
        attribute: String,
        domain: usize,
    },
    #[error("value tuple has {found} entries, schema has {expected} attributes")]
    TupleLength { expected: usize, found: usize },
    #[error("value index {index} out of range for attribute {attribute:?}")]
    IndexOutOfRange { attribute: String, index: usize },
    #[error("matrix file line {line}: {message}")]
    MatrixSyntax { line: usize, message: String },
}

/// A square row-stochastic matrix over one attribute domain.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    size: usize,
    entries: Vec<f64>,
}

impl TransitionMatrix {
    /// Builds a matrix from rows, validating squareness, entry range, and
    /// row sums within [`CONSTRUCTION_TOLERANCE`].
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, TransitionError> {
        Self::from_rows_with_tolerance(rows, CONSTRUCTION_TOLERANCE)
    }

    /// As [`TransitionMatrix::from_rows`] with an explicit row-sum tolerance.
    pub fn from_rows_with_tolerance(
        rows: Vec<Vec<f64>>,
        tolerance: f64,
    ) -> Result<Self, TransitionError> {
        let size = rows.len();
        if size == 0 {
            return Err(TransitionError::Empty);
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != size {
                return Err(TransitionError::NotSquare {
                    rows: size,
                    row: r,
                    cols: row.len(),
                });
            }
            let mut sum = 0.0;
            for (c, &value) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) || value.is_nan() {
                    return Err(TransitionError::EntryOutOfRange {
                        row: r,
                        col: c,
                        value,
                    });
                }
                sum += value;
            }
            if (sum - 1.0).abs() > tolerance {
                return Err(TransitionError::RowSum {
                    row: r,
                    sum,
                    tolerance,
                });
            }
        }
        let entries = rows.into_iter().flatten().collect();
        Ok(Self { size, entries })
    }

    /// The retention-replacement matrix for a domain of `domain_size` values
    /// and retention probability `rho`.
    pub fn retention_replacement(domain_size: usize, rho: f64) -> Result<Self, TransitionError> {
        if domain_size == 0 {
            return Err(TransitionError::Empty);
        }
        if !(0.0..=1.0).contains(&rho) || rho.is_nan() {
            return Err(TransitionError::InvalidProbability(rho));
        }
        let off = (1.0 - rho) / domain_size as f64;
        let diagonal = rho + off;
        let mut entries = vec![off; domain_size * domain_size];
        for i in 0..domain_size {
            entries[i * domain_size + i] = diagonal;
        }
        Ok(Self {
            size: domain_size,
            entries,
        })
    }

    /// Domain size (number of rows = columns).
    pub fn size(&self) -> usize {
        self.size
    }

    /// `A[u][v]`: probability that `u` is released as `v`.
    pub fn entry(&self, u: usize, v: usize) -> f64 {
        self.entries[u * self.size + v]
    }

    /// The distribution row for source value `u`.
    pub fn row(&self, u: usize) -> &[f64] {
        &self.entries[u * self.size..(u + 1) * self.size]
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.entries.iter().all(|&e| e > 0.0)
    }
}

/// Report-only validation of raw probability rows; never fails, so it can
/// describe data that [`TransitionMatrix::from_rows`] would reject.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// `(row, sum)` for every row.
    pub row_sums: Vec<(usize, f64)>,
    /// Worst absolute deviation of any row sum from 1.
    pub max_row_sum_deviation: f64,
    pub negative_entries: Vec<(usize, usize)>,
    /// Zero entries are flagged because the anonymity and privacy formulas
    /// divide by matrix entries.
    pub zero_entries: Vec<(usize, usize)>,
    pub is_square: bool,
}

impl ValidationReport {
    pub fn row_stochastic_within(&self, tolerance: f64) -> bool {
        self.is_square
            && self.negative_entries.is_empty()
            && self.max_row_sum_deviation <= tolerance
    }

    pub fn has_zero_entries(&self) -> bool {
        !self.zero_entries.is_empty()
    }
}

/// Validates raw rows: row sums, negative entries, zero entries, squareness.
pub fn validate(rows: &[Vec<f64>]) -> ValidationReport {
    let size = rows.len();
    let mut report = ValidationReport {
        row_sums: Vec::with_capacity(size),
        max_row_sum_deviation: 0.0,
        negative_entries: Vec::new(),
        zero_entries: Vec::new(),
        is_square: true,
    };
    for (r, row) in rows.iter().enumerate() {
        if row.len() != size {
            report.is_square = false;
        }
        let sum: f64 = row.iter().sum();
        report.max_row_sum_deviation = report.max_row_sum_deviation.max((sum - 1.0).abs());
        report.row_sums.push((r, sum));
        for (c, &value) in row.iter().enumerate() {
            if value < 0.0 {
                report.negative_entries.push((r, c));
            } else if value == 0.0 {
                report.zero_entries.push((r, c));
            }
        }
    }
    report
}

/// Per-attribute retention probabilities for RRP.
#[derive(Debug, Clone, PartialEq)]
pub struct RetentionProfile {
    rhos: Vec<f64>,
}

impl RetentionProfile {
    pub fn new(rhos: Vec<f64>) -> Result<Self, TransitionError> {
        for &rho in &rhos {
            if !(0.0..=1.0).contains(&rho) || rho.is_nan() {
                return Err(TransitionError::InvalidProbability(rho));
            }
        }
        Ok(Self { rhos })
    }

    /// The same retention probability for every attribute.
    pub fn uniform(rho: f64, attributes: usize) -> Result<Self, TransitionError> {
        Self::new(vec![rho; attributes])
    }

    pub fn rhos(&self) -> &[f64] {
        &self.rhos
    }

    pub fn len(&self) -> usize {
        self.rhos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhos.is_empty()
    }
}

/// One transition matrix per attribute of a schema.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeMatrixSet {
    schema: TableSchema,
    matrices: Vec<TransitionMatrix>,
}

impl AttributeMatrixSet {
    /// Pairs a schema with per-attribute matrices, checking sizes.
    pub fn new(
        schema: TableSchema,
        matrices: Vec<TransitionMatrix>,
    ) -> Result<Self, TransitionError> {
        if matrices.len() != schema.attribute_count() {
            return Err(TransitionError::LengthMismatch {
                expected: schema.attribute_count(),
                found: matrices.len(),
            });
        }
        for (i, (matrix, attr)) in matrices.iter().zip(schema.attributes()).enumerate() {
            if matrix.size() != attr.domain_size() {
                return Err(TransitionError::DomainSizeMismatch {
                    index: i,
                    matrix: matrix.size(),
                    attribute: attr.name().to_owned(),
                    domain: attr.domain_size(),
                });
            }
        }
        Ok(Self { schema, matrices })
    }

    /// Builds one RRP matrix per attribute from the retention profile.
    pub fn retention_replacement(
        schema: TableSchema,
        profile: &RetentionProfile,
    ) -> Result<Self, TransitionError> {
        if profile.len() != schema.attribute_count() {
            return Err(TransitionError::LengthMismatch {
                expected: schema.attribute_count(),
                found: profile.len(),
            });
        }
        let matrices = schema
            .attributes()
            .iter()
            .zip(profile.rhos())
            .map(|(attr, &rho)| TransitionMatrix::retention_replacement(attr.domain_size(), rho))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { schema, matrices })
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn matrices(&self) -> &[TransitionMatrix] {
        &self.matrices
    }

    pub fn matrix(&self, attribute: usize) -> &TransitionMatrix {
        &self.matrices[attribute]
    }

    pub fn attribute_count(&self) -> usize {
        self.matrices.len()
    }

    /// Size of the bundled product domain.
    pub fn domain_size(&self) -> usize {
        self.schema.domain_size()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.matrices
            .iter()
            .all(TransitionMatrix::is_strictly_positive)
    }

    /// Entry of the virtual product matrix: the probability that tuple `u`
    /// is released as tuple `v`, i.e. `Π_a A_a[u_a][v_a]`.
    pub fn product_entry(&self, u: &[usize], v: &[usize]) -> Result<f64, TransitionError> {
        self.check_tuple(u)?;
        self.check_tuple(v)?;
        Ok(self
            .matrices
            .iter()
            .zip(u.iter().zip(v))
            .map(|(m, (&ui, &vi))| m.entry(ui, vi))
            .product())
    }

    /// Natural log of [`AttributeMatrixSet::product_entry`] for unchecked
    /// index tuples; `-inf` when any factor is zero. The oracle sums these
    /// over records instead of multiplying probabilities directly.
    pub fn log_product_entry(&self, u: &[usize], v: &[usize]) -> f64 {
        self.matrices
            .iter()
            .zip(u.iter().zip(v))
            .map(|(m, (&ui, &vi))| m.entry(ui, vi).ln())
            .sum()
    }

    fn check_tuple(&self, tuple: &[usize]) -> Result<(), TransitionError> {
        if tuple.len() != self.matrices.len() {
            return Err(TransitionError::TupleLength {
                expected: self.matrices.len(),
                found: tuple.len(),
            });
        }
        for (a, &i) in tuple.iter().enumerate() {
            if i >= self.matrices[a].size() {
                return Err(TransitionError::IndexOutOfRange {
                    attribute: self.schema.attribute(a).name().to_owned(),
                    index: i,
                });
            }
        }
        Ok(())
    }
}

/// Parses the matrix file format.
///
/// Line-oriented like the schema format: blank lines and `#` comments are
/// ignored, all other lines are `key: value` with keys `domain` and `row`:
///
/// ```text
/// domain: male
/// domain: female
/// row: 0.75 0.25
/// row: 0.25 0.75
/// ```
///
/// `domain:` lines list the value labels in order; `row:` lines give the
/// corresponding source rows as whitespace-separated probabilities. The
/// matrix must be square over the listed domain, and each row must sum to 1
/// within [`FILE_TOLERANCE`]. Returns the labels alongside the matrix so
/// callers can cross-check them against a table schema.
pub fn parse_matrix(text: &str) -> Result<(Vec<String>, TransitionMatrix), TransitionError> {
    let mut labels: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, rest)) = line.split_once(':') else {
            return Err(TransitionError::MatrixSyntax {
                line: line_no,
                message: format!("expected `key: value`, found {line:?}"),
            });
        };
        let value = rest.trim();
        match key.trim() {
            "domain" => {
                if value.is_empty() {
                    return Err(TransitionError::MatrixSyntax {
                        line: line_no,
                        message: "domain label is empty".into(),
                    });
                }
                labels.push(value.to_owned());
            }
            "row" => {
                let row = value
                    .split_whitespace()
                    .map(|tok| {
                        tok.parse::<f64>()
                            .map_err(|e| TransitionError::MatrixSyntax {
                                line: line_no,
                                message: format!("bad probability {tok:?}: {e}"),
                            })
                    })
                    .collect::<Result<Vec<f64>, _>>()?;
                rows.push(row);
            }
            other => {
                return Err(TransitionError::MatrixSyntax {
                    line: line_no,
                    message: format!("unknown key {other:?}"),
                })
            }
        }
    }
    if labels.is_empty() {
        return Err(TransitionError::MatrixSyntax {
            line: 0,
            message: "no `domain:` lines".into(),
        });
    }
    if rows.len() != labels.len() {
        return Err(TransitionError::MatrixSyntax {
            line: 0,
            message: format!("{} domain labels but {} rows", labels.len(), rows.len()),
        });
    }
    let matrix = TransitionMatrix::from_rows_with_tolerance(rows, FILE_TOLERANCE)?;
    Ok((labels, matrix))
}

/// Renders a labeled matrix in the format accepted by [`parse_matrix`].
pub fn format_matrix(labels: &[String], matrix: &TransitionMatrix) -> String {
    let mut out = String::new();
    for label in labels {
        out.push_str("domain: ");
        out.push_str(label);
        out.push('\n');
    }
    for u in 0..matrix.size() {
        out.push_str("row:");
        for v in 0..matrix.size() {
            out.push(' ');
            out.push_str(&matrix.entry(u, v).to_string());
        }
        out.push('\n');
    }
    out
}
