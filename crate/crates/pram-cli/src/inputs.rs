//! File and inline-spec loading shared by the subcommands.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use pram::tabular::{self, Table, TableSchema};
use pram::transition::{AttributeMatrixSet, TransitionMatrix};

pub fn load_schema(path: &Path) -> Result<TableSchema> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading schema {}", path.display()))?;
    tabular::parse_schema(&text).with_context(|| format!("parsing schema {}", path.display()))
}

pub fn load_table(path: &Path, schema: &TableSchema) -> Result<Table> {
    let file = fs::File::open(path).with_context(|| format!("opening table {}", path.display()))?;
    tabular::load_table(file, schema).with_context(|| format!("loading table {}", path.display()))
}

/// A matrix argument: either `rrp(SIZE,RHO)` or a path to a matrix file.
/// File matrices carry their domain labels; inline ones do not.
pub fn load_matrix(spec: &str) -> Result<(Option<Vec<String>>, TransitionMatrix)> {
    if let Some(args) = spec.strip_prefix("rrp(").and_then(|s| s.strip_suffix(')')) {
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            bail!("inline matrix {spec:?} must be rrp(SIZE,RHO)");
        }
        let size: usize = parts[0]
            .parse()
            .with_context(|| format!("domain size in {spec:?}"))?;
        let rho: f64 = parts[1]
            .parse()
            .with_context(|| format!("retention probability in {spec:?}"))?;
        let matrix = TransitionMatrix::retention_replacement(size, rho)?;
        return Ok((None, matrix));
    }
    let path = Path::new(spec);
    let text =
        fs::read_to_string(path).with_context(|| format!("reading matrix {}", path.display()))?;
    let (labels, matrix) =
        pram::transition::parse_matrix(&text).with_context(|| format!("parsing matrix {spec}"))?;
    Ok((Some(labels), matrix))
}

/// Builds a matrix set from per-attribute specs, inventing generic labels.
/// Used where the guarantees depend only on the matrices.
pub fn load_matrix_set(specs: &[String]) -> Result<AttributeMatrixSet> {
    let matrices = specs
        .iter()
        .map(|spec| load_matrix(spec).map(|(_, m)| m))
        .collect::<Result<Vec<_>>>()?;
    let domains: Vec<usize> = matrices.iter().map(TransitionMatrix::size).collect();
    let schema = TableSchema::with_generic_labels(&domains)?;
    Ok(AttributeMatrixSet::new(schema, matrices)?)
}

/// Builds a matrix set against a known schema, cross-checking any labels a
/// matrix file declares against the matching attribute's domain.
pub fn load_matrix_set_for_schema(
    specs: &[String],
    schema: &TableSchema,
) -> Result<AttributeMatrixSet> {
    if specs.len() != schema.attribute_count() {
        bail!(
            "{} matrices supplied for {} attributes",
            specs.len(),
            schema.attribute_count()
        );
    }
    let mut matrices = Vec::with_capacity(specs.len());
    for (spec, attr) in specs.iter().zip(schema.attributes()) {
        let (labels, matrix) = load_matrix(spec)?;
        if let Some(labels) = labels {
            if labels != attr.values() {
                bail!(
                    "matrix {spec} lists domain {labels:?} but attribute {:?} has {:?}",
                    attr.name(),
                    attr.values()
                );
            }
        }
        matrices.push(matrix);
    }
    Ok(AttributeMatrixSet::new(schema.clone(), matrices)?)
}

/// Brute-force limit: an explicit flag wins, then PRAM_BRUTE_FORCE_LIMIT,
/// then the library default.
pub fn brute_force_limit(flag: Option<usize>) -> Result<usize> {
    if let Some(limit) = flag {
        return Ok(limit);
    }
    match std::env::var("PRAM_BRUTE_FORCE_LIMIT") {
        Ok(value) => value
            .parse::<usize>()
            .with_context(|| format!("PRAM_BRUTE_FORCE_LIMIT={value:?} is not a record count")),
        Err(_) => Ok(pram::oracle::DEFAULT_BRUTE_FORCE_LIMIT),
    }
}
