//! Tables, attribute schemas, and CSV ingestion.
//!
//! A table is a finite map from record indices to value tuples: one
//! categorical label per attribute, drawn from that attribute's fixed domain.
//! Record identity is the row index; no identifier column is read or written.
//! All attributes are categorical — numeric data must be binned by the caller
//! before ingestion, and only the columns that should travel with the release
//! (typically the quasi-identifiers) should be present in the input.
//!
//! Cells are stored as indices into the attribute domains, which is the
//! encoding every other module works in. [`Table::value_index`] exposes it.

use std::collections::HashMap;
use std::io::{Read, Write};

use thiserror::Error;

/// Errors from schema construction, table construction, and CSV handling.
#[derive(Debug, Error)]
pub enum TabularError {
    #[error("attribute domain is empty")]
    EmptyDomain,
    #[error("duplicate value {label:?} in domain of attribute {attribute:?}")]
    DuplicateValue { attribute: String, label: String },
    #[error("duplicate attribute name {0:?}")]
    DuplicateAttribute(String),
    #[error("schema has no attributes")]
    NoAttributes,
    #[error("row {row}, column {column:?}: value {label:?} is not in the attribute domain")]
    UnknownValue {
        row: usize,
        column: String,
        label: String,
    },
    #[error("CSV columns {found:?} do not match schema attributes {expected:?}")]
    ColumnMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("input contains no data rows")]
    EmptyInput,
    #[error("row index {index} out of range for table with {records} records")]
    RowOutOfRange { index: usize, records: usize },
    #[error("row {row} has {found} cells, schema has {expected} attributes")]
    RowLength {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("cell index {index} out of range for attribute {attribute:?}")]
    CellIndexOutOfRange { attribute: String, index: usize },
    #[error("schema file line {line}: {message}")]
    SchemaSyntax { line: usize, message: String },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// One categorical attribute: a name and its ordered domain of labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeSchema {
    name: String,
    values: Vec<String>,
}

impl AttributeSchema {
    /// Builds an attribute schema. The domain must be non-empty and free of
    /// duplicate labels; labels compare by exact string equality.
    pub fn new<N, I, S>(name: N, values: I) -> Result<Self, TabularError>
    where
        N: Into<String>,
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let name = name.into();
        let values: Vec<String> = values.into_iter().map(Into::into).collect();
        if values.is_empty() {
            return Err(TabularError::EmptyDomain);
        }
        let mut seen = HashMap::new();
        for (i, label) in values.iter().enumerate() {
            if seen.insert(label.clone(), i).is_some() {
                return Err(TabularError::DuplicateValue {
                    attribute: name,
                    label: label.clone(),
                });
            }
        }
        Ok(Self { name, values })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Ordered domain labels.
    pub fn values(&self) -> &[String] {
        &self.values
    }

    /// Number of values in the domain.
    pub fn domain_size(&self) -> usize {
        self.values.len()
    }

    /// Position of a label in the domain, if present.
    pub fn position(&self, label: &str) -> Option<usize> {
        self.values.iter().position(|v| v == label)
    }
}

/// An ordered list of attributes; the table's value domain is their product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableSchema {
    attributes: Vec<AttributeSchema>,
}

impl TableSchema {
    /// Builds a table schema. Attribute names must be unique.
    pub fn new(attributes: Vec<AttributeSchema>) -> Result<Self, TabularError> {
        if attributes.is_empty() {
            return Err(TabularError::NoAttributes);
        }
        let mut seen = HashMap::new();
        for (i, attr) in attributes.iter().enumerate() {
            if seen.insert(attr.name.clone(), i).is_some() {
                return Err(TabularError::DuplicateAttribute(attr.name.clone()));
            }
        }
        Ok(Self { attributes })
    }

    /// Schema with attribute names `a0, a1, ...` and labels `v0, v1, ...`,
    /// one attribute per entry of `domains`. Convenient for synthetic data
    /// and for matrices supplied without labels.
    pub fn with_generic_labels(domains: &[usize]) -> Result<Self, TabularError> {
        let attributes = domains
            .iter()
            .enumerate()
            .map(|(i, &m)| AttributeSchema::new(format!("a{i}"), (0..m).map(|v| format!("v{v}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(attributes)
    }

    pub fn attributes(&self) -> &[AttributeSchema] {
        &self.attributes
    }

    pub fn attribute(&self, index: usize) -> &AttributeSchema {
        &self.attributes[index]
    }

    pub fn attribute_count(&self) -> usize {
        self.attributes.len()
    }

    /// Index of the attribute with the given name.
    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    /// Per-attribute domain sizes.
    pub fn domain_sizes(&self) -> Vec<usize> {
        self.attributes.iter().map(|a| a.domain_size()).collect()
    }

    /// Size of the product domain, `Π_a |V_a|`, saturating at `usize::MAX`
    /// so size guards stay meaningful for very wide schemas.
    pub fn domain_size(&self) -> usize {
        self.attributes
            .iter()
            .fold(1usize, |acc, a| acc.saturating_mul(a.domain_size()))
    }

    /// Flattens a per-attribute index tuple into a single index over the
    /// product domain (row-major: the last attribute varies fastest).
    pub fn flat_index(&self, tuple: &[usize]) -> usize {
        debug_assert_eq!(tuple.len(), self.attributes.len());
        let mut flat = 0;
        for (a, &i) in tuple.iter().enumerate() {
            flat = flat * self.attributes[a].domain_size() + i;
        }
        flat
    }
}

/// A table: a schema plus one value tuple per record, cells stored as domain
/// indices. Immutable after construction; always has at least one record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    schema: TableSchema,
    rows: Vec<Vec<usize>>,
}

impl Table {
    /// Builds a table from rows of domain indices, validating every cell.
    pub fn from_index_rows(
        schema: TableSchema,
        rows: Vec<Vec<usize>>,
    ) -> Result<Self, TabularError> {
        if rows.is_empty() {
            return Err(TabularError::EmptyInput);
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.attribute_count() {
                return Err(TabularError::RowLength {
                    row: r,
                    expected: schema.attribute_count(),
                    found: row.len(),
                });
            }
            for (a, &cell) in row.iter().enumerate() {
                if cell >= schema.attribute(a).domain_size() {
                    return Err(TabularError::CellIndexOutOfRange {
                        attribute: schema.attribute(a).name().to_owned(),
                        index: cell,
                    });
                }
            }
        }
        Ok(Self { schema, rows })
    }

    /// Builds a table from rows of labels, validating each against its domain.
    pub fn from_label_rows(
        schema: TableSchema,
        rows: Vec<Vec<String>>,
    ) -> Result<Self, TabularError> {
        if rows.is_empty() {
            return Err(TabularError::EmptyInput);
        }
        let mut index_rows = Vec::with_capacity(rows.len());
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.attribute_count() {
                return Err(TabularError::RowLength {
                    row: r,
                    expected: schema.attribute_count(),
                    found: row.len(),
                });
            }
            let mut index_row = Vec::with_capacity(row.len());
            for (a, label) in row.iter().enumerate() {
                let attr = schema.attribute(a);
                match attr.position(label) {
                    Some(i) => index_row.push(i),
                    None => {
                        return Err(TabularError::UnknownValue {
                            row: r,
                            column: attr.name().to_owned(),
                            label: label.clone(),
                        })
                    }
                }
            }
            index_rows.push(index_row);
        }
        Ok(Self {
            schema,
            rows: index_rows,
        })
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    /// Number of records, `|R|`.
    pub fn records(&self) -> usize {
        self.rows.len()
    }

    /// The per-attribute index tuple of a record.
    pub fn value_index(&self, row: usize) -> Result<&[usize], TabularError> {
        self.rows
            .get(row)
            .map(Vec::as_slice)
            .ok_or(TabularError::RowOutOfRange {
                index: row,
                records: self.rows.len(),
            })
    }

    /// All rows as index tuples, in record order.
    pub fn index_rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    /// The labels of a record, in attribute order.
    pub fn row_labels(&self, row: usize) -> Result<Vec<&str>, TabularError> {
        let cells = self.value_index(row)?;
        Ok(cells
            .iter()
            .enumerate()
            .map(|(a, &i)| self.schema.attribute(a).values()[i].as_str())
            .collect())
    }

    /// Multiplicity of every record's value tuple: `counts[r]` is the number
    /// of records sharing record `r`'s tuple (including itself).
    pub fn tuple_multiplicities(&self) -> Vec<usize> {
        let mut by_tuple: HashMap<&[usize], usize> = HashMap::new();
        for row in &self.rows {
            *by_tuple.entry(row.as_slice()).or_insert(0) += 1;
        }
        self.rows
            .iter()
            .map(|row| by_tuple[row.as_slice()])
            .collect()
    }
}

/// Loads a table from CSV. The header row must match the schema's attribute
/// names in order; every cell must belong to its attribute's domain.
pub fn load_table<R: Read>(reader: R, schema: &TableSchema) -> Result<Table, TabularError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);

    let headers: Vec<String> = csv_reader.headers()?.iter().map(|h| h.to_owned()).collect();
    let expected: Vec<String> = schema
        .attributes()
        .iter()
        .map(|a| a.name().to_owned())
        .collect();
    if headers != expected {
        return Err(TabularError::ColumnMismatch {
            expected,
            found: headers,
        });
    }

    let mut rows = Vec::new();
    for (r, record) in csv_reader.records().enumerate() {
        let record = record?;
        if record.len() != schema.attribute_count() {
            return Err(TabularError::RowLength {
                row: r,
                expected: schema.attribute_count(),
                found: record.len(),
            });
        }
        rows.push(record.iter().map(|c| c.to_owned()).collect());
    }
    if rows.is_empty() {
        return Err(TabularError::EmptyInput);
    }
    Table::from_label_rows(schema.clone(), rows)
}

/// Writes a table as CSV: header row of attribute names, then one row of
/// labels per record, in record order. Comma separated, double-quote escaped.
pub fn emit_table<W: Write>(table: &Table, writer: W) -> Result<(), TabularError> {
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer.write_record(table.schema.attributes().iter().map(|a| a.name()))?;
    for r in 0..table.records() {
        csv_writer.write_record(table.row_labels(r)?)?;
    }
    csv_writer.flush()?;
    Ok(())
}

/// Parses the schema file format.
///
/// The grammar is line-oriented. Blank lines and lines starting with `#` are
/// ignored. Every other line is `key: value` with exactly two keys:
///
/// ```text
/// attribute: sex
/// value: male
/// value: female
/// attribute: age
/// value: 20s
/// value: 30s
/// ```
///
/// `attribute:` opens a new attribute; each `value:` appends a label to the
/// most recently opened attribute's domain, in order. Labels are trimmed of
/// surrounding whitespace and must be non-empty. Unknown keys are rejected.
pub fn parse_schema(text: &str) -> Result<TableSchema, TabularError> {
    let mut attributes: Vec<(String, Vec<String>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, rest)) = line.split_once(':') else {
            return Err(TabularError::SchemaSyntax {
                line: line_no,
                message: format!("expected `key: value`, found {line:?}"),
            });
        };
        let value = rest.trim();
        match key.trim() {
            "attribute" => {
                if value.is_empty() {
                    return Err(TabularError::SchemaSyntax {
                        line: line_no,
                        message: "attribute name is empty".into(),
                    });
                }
                attributes.push((value.to_owned(), Vec::new()));
            }
            "value" => {
                if value.is_empty() {
                    return Err(TabularError::SchemaSyntax {
                        line: line_no,
                        message: "value label is empty".into(),
                    });
                }
                match attributes.last_mut() {
                    Some((_, values)) => values.push(value.to_owned()),
                    None => {
                        return Err(TabularError::SchemaSyntax {
                            line: line_no,
                            message: "`value:` before any `attribute:`".into(),
                        })
                    }
                }
            }
            other => {
                return Err(TabularError::SchemaSyntax {
                    line: line_no,
                    message: format!("unknown key {other:?}"),
                })
            }
        }
    }
    let attributes = attributes
        .into_iter()
        .map(|(name, values)| AttributeSchema::new(name, values))
        .collect::<Result<Vec<_>, _>>()?;
    TableSchema::new(attributes)
}

/// Renders a schema in the format accepted by [`parse_schema`].
pub fn format_schema(schema: &TableSchema) -> String {
    let mut out = String::new();
    for attr in schema.attributes() {
        out.push_str("attribute: ");
        out.push_str(attr.name());
        out.push('\n');
        for value in attr.values() {
            out.push_str("value: ");
            out.push_str(value);
            out.push('\n');
        }
    }
    out
}
