//! Cross-tabulation, reconstruction of original aggregates from randomized
//! ones, and the L1 utility metric.
//!
//! Randomization biases every cross-tabulation in a precisely known way: the
//! expected released count vector is `Aᵀ x` where `x` holds the private
//! counts and `A` is the (virtual) product transition matrix. Solving
//! `Aᵀ x̂ = y` therefore gives an unbiased estimate of the private counts
//! from released ones. The product structure means the solve runs one small
//! `|V_a| × |V_a|` system per attribute along each axis of the count tensor,
//! never materializing `A`.
//!
//! Utility is summarized by the normalized L1 distance between the private
//! cross-tabulation and the reconstruction, `d = Σ_v |x_v − x̂_v| / |R|`.
//! [`run_trend_experiment`] wires the whole pipeline — solve `ρ` for a
//! target anonymity level, randomize synthetic data, reconstruct, measure —
//! over a parameter grid with repeated seeds.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::mechanism::{MechanismError, PramMechanism};
use crate::privacy::{self, PrivacyBudget, PrivacyError};
use crate::seed;
use crate::tabular::{AttributeSchema, Table, TableSchema};
use crate::transition::{AttributeMatrixSet, RetentionProfile, TransitionError};

#[derive(Debug, Error)]
pub enum ReconstructError {
    #[error("attribute {0:?} is not in the table schema")]
    UnknownAttribute(String),
    #[error("transition matrix is singular; counts cannot be reconstructed")]
    SingularMatrix,
    #[error("cross-tabulation attributes do not match the matrix set schema")]
    SchemaMismatch,
    #[error("cross-tabulations are over different attribute domains")]
    DomainMismatch,
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Transition(#[from] TransitionError),
}

/// Counts of value tuples over a subset of attributes, flattened row-major
/// (last attribute varies fastest).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossTab {
    attributes: Vec<AttributeSchema>,
    counts: Vec<u64>,
}

impl CrossTab {
    pub fn attributes(&self) -> &[AttributeSchema] {
        &self.attributes
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Labels of the cell at a flat index, in attribute order.
    pub fn cell_labels(&self, mut flat: usize) -> Vec<&str> {
        let mut labels = vec![""; self.attributes.len()];
        for (a, attr) in self.attributes.iter().enumerate().rev() {
            let m = attr.domain_size();
            labels[a] = attr.values()[flat % m].as_str();
            flat /= m;
        }
        labels
    }
}

/// Exact counts per value tuple of the selected attributes. An empty
/// selection yields the single cell `() → record count`.
pub fn cross_tabulate(table: &Table, attributes: &[&str]) -> Result<CrossTab, ReconstructError> {
    let schema = table.schema();
    let selected: Vec<usize> = attributes
        .iter()
        .map(|name| {
            schema
                .attribute_index(name)
                .ok_or_else(|| ReconstructError::UnknownAttribute((*name).to_owned()))
        })
        .collect::<Result<_, _>>()?;
    let attr_schemas: Vec<AttributeSchema> = selected
        .iter()
        .map(|&a| schema.attribute(a).clone())
        .collect();
    let cells: usize = attr_schemas.iter().map(|a| a.domain_size()).product();
    let mut counts = vec![0u64; cells];
    for row in table.index_rows() {
        let mut flat = 0;
        for (&a, attr) in selected.iter().zip(&attr_schemas) {
            flat = flat * attr.domain_size() + row[a];
        }
        counts[flat] += 1;
    }
    Ok(CrossTab {
        attributes: attr_schemas,
        counts,
    })
}

/// Reconstructed (real-valued) counts per value tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    attributes: Vec<AttributeSchema>,
    estimates: Vec<f64>,
    /// How the estimates were produced.
    pub method: &'static str,
    /// Whether any negative estimate was zeroed on request.
    pub negatives_clipped: bool,
}

impl ReconstructionResult {
    pub fn attributes(&self) -> &[AttributeSchema] {
        &self.attributes
    }

    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    pub fn total(&self) -> f64 {
        self.estimates.iter().sum()
    }
}

/// LU factorization with partial pivoting of a small dense matrix, enough to
/// solve the per-attribute systems.
struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    pivots: Vec<usize>,
}

impl LuFactors {
    fn factor(n: usize, mut a: Vec<f64>) -> Result<Self, ReconstructError> {
        let mut pivots = vec![0usize; n];
        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_abs = a[col * n + col].abs();
            for row in (col + 1)..n {
                let candidate = a[row * n + col].abs();
                if candidate > pivot_abs {
                    pivot_abs = candidate;
                    pivot_row = row;
                }
            }
            if pivot_abs < 1e-12 {
                return Err(ReconstructError::SingularMatrix);
            }
            pivots[col] = pivot_row;
            if pivot_row != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot_row * n + j);
                }
            }
            let pivot = a[col * n + col];
            for row in (col + 1)..n {
                let factor = a[row * n + col] / pivot;
                a[row * n + col] = factor;
                for j in (col + 1)..n {
                    a[row * n + j] -= factor * a[col * n + j];
                }
            }
        }
        Ok(Self { n, lu: a, pivots })
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        for col in 0..n {
            b.swap(col, self.pivots[col]);
        }
        for row in 1..n {
            for col in 0..row {
                b[row] -= self.lu[row * n + col] * b[col];
            }
        }
        for row in (0..n).rev() {
            for col in (row + 1)..n {
                b[row] -= self.lu[row * n + col] * b[col];
            }
            b[row] /= self.lu[row * n + row];
        }
    }
}

/// Solves `Aᵀ x̂ = y` for the private counts, one attribute axis at a time.
/// Estimates are returned raw — possibly negative — unless `clip_negatives`
/// zeroes them (without renormalization, which biases totals and the L1
/// metric; the flag records whether anything was clipped).
pub fn reconstruct_inversion(
    observed: &CrossTab,
    set: &AttributeMatrixSet,
    clip_negatives: bool,
) -> Result<ReconstructionResult, ReconstructError> {
    let schema_attrs = set.schema().attributes();
    if observed.attributes.as_slice() != schema_attrs {
        return Err(ReconstructError::SchemaMismatch);
    }

    let sizes: Vec<usize> = observed
        .attributes
        .iter()
        .map(|a| a.domain_size())
        .collect();
    let total_cells = observed.counts.len();
    let mut estimates: Vec<f64> = observed.counts.iter().map(|&c| c as f64).collect();

    // Strides for row-major layout: the last attribute varies fastest.
    let mut strides = vec![1usize; sizes.len()];
    for a in (0..sizes.len().saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * sizes[a + 1];
    }

    for (a, &m) in sizes.iter().enumerate() {
        let matrix = set.matrix(a);
        // Row-major transpose: entry (i, j) of Aᵀ is A[j][i].
        let transposed: Vec<f64> = (0..m * m)
            .map(|idx| matrix.entry(idx % m, idx / m))
            .collect();
        let lu = LuFactors::factor(m, transposed)?;

        let stride = strides[a];
        let block = stride * m;
        let mut fiber = vec![0.0; m];
        for base in (0..total_cells).step_by(block) {
            for offset in 0..stride {
                for i in 0..m {
                    fiber[i] = estimates[base + offset + i * stride];
                }
                lu.solve(&mut fiber);
                for i in 0..m {
                    estimates[base + offset + i * stride] = fiber[i];
                }
            }
        }
    }

    let mut negatives_clipped = false;
    if clip_negatives {
        for e in &mut estimates {
            if *e < 0.0 {
                *e = 0.0;
                negatives_clipped = true;
            }
        }
    }

    Ok(ReconstructionResult {
        attributes: observed.attributes.clone(),
        estimates,
        method: "matrix-inversion",
        negatives_clipped,
    })
}

/// Normalized L1 distance between a private cross-tabulation and a
/// reconstruction: `d = Σ_v |x_v − x̂_v| / records`.
pub fn l1_error(
    original: &CrossTab,
    reconstructed: &ReconstructionResult,
    records: u64,
) -> Result<f64, ReconstructError> {
    if original.attributes != reconstructed.attributes {
        return Err(ReconstructError::DomainMismatch);
    }
    let sum: f64 = original
        .counts
        .iter()
        .zip(&reconstructed.estimates)
        .map(|(&x, &xhat)| (x as f64 - xhat).abs())
        .sum();
    Ok(sum / records as f64)
}

/// Draws a table of independent per-attribute categorical values with
/// Zipf-like cell weights `(rank + 1)^(-exponent)`; `exponent = 0` is
/// uniform. Deterministic in the seed.
pub fn generate_synthetic_table(
    schema: &TableSchema,
    records: usize,
    zipf_exponent: f64,
    seed: u64,
) -> Table {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let cumulative: Vec<Vec<f64>> = schema
        .attributes()
        .iter()
        .map(|attr| {
            let weights: Vec<f64> = (0..attr.domain_size())
                .map(|rank| ((rank + 1) as f64).powf(-zipf_exponent))
                .collect();
            let total: f64 = weights.iter().sum();
            let mut acc = 0.0;
            weights
                .iter()
                .map(|w| {
                    acc += w / total;
                    acc
                })
                .collect()
        })
        .collect();

    let rows = (0..records.max(1))
        .map(|_| {
            cumulative
                .iter()
                .map(|cdf| {
                    let u: f64 = rng.random();
                    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
                })
                .collect()
        })
        .collect();
    Table::from_index_rows(schema.clone(), rows).expect("synthetic rows are in range")
}

/// Which knob a trend experiment sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VaryParameter {
    /// Sweep the record count, holding attributes and the k target fixed.
    Records,
    /// Sweep how many leading attributes participate.
    Attributes,
    /// Sweep the anonymity target k.
    K,
}

/// Configuration of a trend experiment.
#[derive(Debug, Clone)]
pub struct TrendConfig {
    pub vary: VaryParameter,
    /// Grid values for the varied parameter.
    pub grid: Vec<f64>,
    /// Record count when not varied.
    pub records: u64,
    /// Per-attribute domain sizes; attribute sweeps use prefixes of this.
    pub domains: Vec<usize>,
    /// Anonymity target when not varied.
    pub k_target: f64,
    /// Repetitions per grid point.
    pub seeds: u32,
    /// Skew of the synthetic data generator.
    pub zipf_exponent: f64,
}

/// One grid point of a trend experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendPoint {
    pub varied: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub k: f64,
    pub mean_l1: f64,
    pub stderr_l1: f64,
}

/// Runs the full pipeline over the grid: solve `ρ` from the anonymity
/// target, randomize synthetic data, cross-tabulate, reconstruct, and
/// average the L1 error over `seeds` repetitions per grid point.
pub fn run_trend_experiment(
    config: &TrendConfig,
    master_seed: u64,
) -> Result<Vec<TrendPoint>, ReconstructError> {
    if config.grid.is_empty() {
        return Err(ReconstructError::InvalidConfig("empty grid".into()));
    }
    if config.seeds == 0 {
        return Err(ReconstructError::InvalidConfig("seeds must be ≥ 1".into()));
    }
    if config.domains.is_empty() {
        return Err(ReconstructError::InvalidConfig(
            "no attribute domains".into(),
        ));
    }

    let mut points = Vec::with_capacity(config.grid.len());
    for (grid_index, &value) in config.grid.iter().enumerate() {
        let (records, domains, k_target) = match config.vary {
            VaryParameter::Records => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(ReconstructError::InvalidConfig(format!(
                        "record count {value} is not a positive integer"
                    )));
                }
                (value as u64, &config.domains[..], config.k_target)
            }
            VaryParameter::Attributes => {
                let count = value as usize;
                if value.fract() != 0.0 || count < 1 || count > config.domains.len() {
                    return Err(ReconstructError::InvalidConfig(format!(
                        "attribute count {value} must be an integer in 1..={}",
                        config.domains.len()
                    )));
                }
                (config.records, &config.domains[..count], config.k_target)
            }
            VaryParameter::K => (config.records, &config.domains[..], value),
        };

        let rho = privacy::solve_rho_from_k(k_target, records, domains)?;
        let profile = RetentionProfile::uniform(rho, domains.len())?;
        let epsilon = match privacy::eps_from_rrp(domains, &profile)? {
            PrivacyBudget::Finite(eps) => eps,
            PrivacyBudget::Unbounded => f64::INFINITY,
        };
        let k_achieved = privacy::k_from_rrp(domains, &profile, records)?.value();

        let schema = TableSchema::with_generic_labels(domains)
            .map_err(|e| ReconstructError::InvalidConfig(e.to_string()))?;
        let set = AttributeMatrixSet::retention_replacement(schema.clone(), &profile)?;
        let names: Vec<&str> = schema.attributes().iter().map(|a| a.name()).collect();

        let point_seed = seed::derive(master_seed, grid_index as u64);
        let mut errors = Vec::with_capacity(config.seeds as usize);
        for repetition in 0..config.seeds {
            let data_seed = seed::derive(point_seed, 2 * repetition as u64);
            let mechanism_seed = seed::derive(point_seed, 2 * repetition as u64 + 1);
            let table = generate_synthetic_table(
                &schema,
                records as usize,
                config.zipf_exponent,
                data_seed,
            );
            let released = PramMechanism::new(set.clone(), mechanism_seed).anonymize(&table)?;
            let original = cross_tabulate(&table, &names)?;
            let observed = cross_tabulate(&released, &names)?;
            let reconstructed = reconstruct_inversion(&observed, &set, false)?;
            errors.push(l1_error(&original, &reconstructed, records)?);
        }

        let count = errors.len() as f64;
        let mean = errors.iter().sum::<f64>() / count;
        let stderr = if errors.len() > 1 {
            let variance = errors.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (count - 1.0);
            (variance / count).sqrt()
        } else {
            0.0
        };

        points.push(TrendPoint {
            varied: value,
            rho,
            epsilon,
            k: k_achieved,
            mean_l1: mean,
            stderr_l1: stderr,
        });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rrp_set(domains: &[usize], rho: f64) -> AttributeMatrixSet {
        let schema = TableSchema::with_generic_labels(domains).unwrap();
        let profile = RetentionProfile::uniform(rho, domains.len()).unwrap();
        AttributeMatrixSet::retention_replacement(schema, &profile).unwrap()
    }

    #[test]
    fn crosstab_counts_single_attribute() {
        let schema = TableSchema::with_generic_labels(&[2]).unwrap();
        let table = Table::from_index_rows(schema, vec![vec![0], vec![0], vec![1]]).unwrap();
        let tab = cross_tabulate(&table, &["a0"]).unwrap();
        assert_eq!(tab.counts(), &[2, 1]);
        assert_eq!(tab.total(), 3);
    }

    #[test]
    fn crosstab_empty_selection_is_total() {
        let schema = TableSchema::with_generic_labels(&[2]).unwrap();
        let table = Table::from_index_rows(schema, vec![vec![0]; 5]).unwrap();
        let tab = cross_tabulate(&table, &[]).unwrap();
        assert_eq!(tab.counts(), &[5]);
    }

    #[test]
    fn crosstab_two_attributes_sums_to_records() {
        let schema = TableSchema::with_generic_labels(&[2, 3]).unwrap();
        let table =
            Table::from_index_rows(schema, vec![vec![0, 0], vec![0, 2], vec![1, 1], vec![1, 1]])
                .unwrap();
        let tab = cross_tabulate(&table, &["a0", "a1"]).unwrap();
        assert_eq!(tab.total(), 4);
        assert_eq!(tab.counts(), &[1, 0, 1, 0, 2, 0]);
        assert_eq!(tab.cell_labels(4), vec!["v1", "v1"]);
    }

    #[test]
    fn crosstab_unknown_attribute() {
        let schema = TableSchema::with_generic_labels(&[2]).unwrap();
        let table = Table::from_index_rows(schema, vec![vec![0]]).unwrap();
        assert!(matches!(
            cross_tabulate(&table, &["nope"]),
            Err(ReconstructError::UnknownAttribute(_))
        ));
    }

    #[test]
    fn inversion_worked_example() {
        // y = (75, 25) through rrp(2, 0.5) solves back to exactly (100, 0).
        let set = rrp_set(&[2], 0.5);
        let observed = CrossTab {
            attributes: set.schema().attributes().to_vec(),
            counts: vec![75, 25],
        };
        let result = reconstruct_inversion(&observed, &set, false).unwrap();
        assert!((result.estimates()[0] - 100.0).abs() < 1e-9);
        assert!(result.estimates()[1].abs() < 1e-9);
        assert_eq!(result.method, "matrix-inversion");
        assert!(!result.negatives_clipped);
    }

    #[test]
    fn inversion_identity_returns_observed() {
        let set = rrp_set(&[3], 1.0);
        let observed = CrossTab {
            attributes: set.schema().attributes().to_vec(),
            counts: vec![5, 7, 11],
        };
        let result = reconstruct_inversion(&observed, &set, false).unwrap();
        for (e, &c) in result.estimates().iter().zip(observed.counts()) {
            assert!((e - c as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn inversion_uniform_matrix_is_singular() {
        let set = rrp_set(&[2], 0.0);
        let observed = CrossTab {
            attributes: set.schema().attributes().to_vec(),
            counts: vec![40, 60],
        };
        assert!(matches!(
            reconstruct_inversion(&observed, &set, false),
            Err(ReconstructError::SingularMatrix)
        ));
    }

    #[test]
    fn inversion_preserves_totals_across_axes() {
        let set = rrp_set(&[2, 3], 0.4);
        let observed = CrossTab {
            attributes: set.schema().attributes().to_vec(),
            counts: vec![10, 2, 8, 5, 25, 0],
        };
        let result = reconstruct_inversion(&observed, &set, false).unwrap();
        assert!((result.total() - 50.0).abs() < 1e-9 * 50.0);
    }

    #[test]
    fn inversion_satisfies_its_defining_system() {
        // Pushing the estimates forward through the product matrix must
        // recover the observed counts: A^T xhat = y.
        let set = rrp_set(&[2, 3], 0.6);
        let observed = CrossTab {
            attributes: set.schema().attributes().to_vec(),
            counts: vec![12, 0, 7, 3, 25, 3],
        };
        let result = reconstruct_inversion(&observed, &set, false).unwrap();
        let tuples: Vec<[usize; 2]> = (0..2).flat_map(|a| (0..3).map(move |b| [a, b])).collect();
        for (cell, v) in tuples.iter().enumerate() {
            let forward: f64 = tuples
                .iter()
                .zip(result.estimates())
                .map(|(u, xhat)| xhat * set.product_entry(u, v).unwrap())
                .sum();
            let want = observed.counts()[cell] as f64;
            assert!(
                (forward - want).abs() < 1e-8,
                "cell {cell}: {forward} vs {want}"
            );
        }
    }

    #[test]
    fn clipping_zeroes_negatives_and_flags() {
        let set = rrp_set(&[2], 0.5);
        // Heavily skewed observation forces a negative raw estimate.
        let observed = CrossTab {
            attributes: set.schema().attributes().to_vec(),
            counts: vec![0, 10],
        };
        let raw = reconstruct_inversion(&observed, &set, false).unwrap();
        assert!(raw.estimates()[0] < 0.0);
        let clipped = reconstruct_inversion(&observed, &set, true).unwrap();
        assert_eq!(clipped.estimates()[0], 0.0);
        assert!(clipped.negatives_clipped);
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let set = rrp_set(&[2], 0.5);
        let other = rrp_set(&[3], 0.5);
        let observed = CrossTab {
            attributes: other.schema().attributes().to_vec(),
            counts: vec![1, 2, 3],
        };
        assert!(matches!(
            reconstruct_inversion(&observed, &set, false),
            Err(ReconstructError::SchemaMismatch)
        ));
    }

    #[test]
    fn l1_error_examples() {
        let attrs = vec![AttributeSchema::new("a0", ["v0", "v1"]).unwrap()];
        let x = CrossTab {
            attributes: attrs.clone(),
            counts: vec![100, 0],
        };
        let same = ReconstructionResult {
            attributes: attrs.clone(),
            estimates: vec![100.0, 0.0],
            method: "matrix-inversion",
            negatives_clipped: false,
        };
        assert_eq!(l1_error(&x, &same, 100).unwrap(), 0.0);

        let off = ReconstructionResult {
            attributes: attrs.clone(),
            estimates: vec![90.0, 10.0],
            method: "matrix-inversion",
            negatives_clipped: false,
        };
        assert!((l1_error(&x, &off, 100).unwrap() - 0.2).abs() < 1e-12);

        let swapped = ReconstructionResult {
            attributes: attrs,
            estimates: vec![0.0, 100.0],
            method: "matrix-inversion",
            negatives_clipped: false,
        };
        assert_eq!(l1_error(&x, &swapped, 100).unwrap(), 2.0);

        let other_attrs = ReconstructionResult {
            attributes: vec![AttributeSchema::new("b", ["v0", "v1"]).unwrap()],
            estimates: vec![0.0, 0.0],
            method: "matrix-inversion",
            negatives_clipped: false,
        };
        assert!(matches!(
            l1_error(&x, &other_attrs, 100),
            Err(ReconstructError::DomainMismatch)
        ));
    }

    #[test]
    fn synthetic_tables_are_seed_deterministic_and_skewed() {
        let schema = TableSchema::with_generic_labels(&[4]).unwrap();
        let a = generate_synthetic_table(&schema, 2000, 1.0, 5);
        let b = generate_synthetic_table(&schema, 2000, 1.0, 5);
        assert_eq!(a, b);
        let c = generate_synthetic_table(&schema, 2000, 1.0, 6);
        assert_ne!(a, c);

        let tab = cross_tabulate(&a, &["a0"]).unwrap();
        // Zipf weights are decreasing, so the first cell dominates the last.
        assert!(tab.counts()[0] > tab.counts()[3]);
    }

    #[test]
    fn trend_experiment_runs_a_small_grid() {
        let config = TrendConfig {
            vary: VaryParameter::Records,
            grid: vec![50.0, 200.0],
            records: 0,
            domains: vec![2, 3],
            k_target: 2.0,
            seeds: 3,
            zipf_exponent: 1.0,
        };
        let points = run_trend_experiment(&config, 99).unwrap();
        assert_eq!(points.len(), 2);
        for point in &points {
            assert!(point.rho > 0.0 && point.rho < 1.0);
            assert!(point.epsilon.is_finite());
            assert!((point.k - 2.0).abs() < 1e-6);
            assert!(point.mean_l1 >= 0.0);
        }
        // Identical reruns are deterministic.
        let again = run_trend_experiment(&config, 99).unwrap();
        assert_eq!(points, again);
    }

    #[test]
    fn trend_experiment_rejects_bad_configs() {
        let base = TrendConfig {
            vary: VaryParameter::Attributes,
            grid: vec![3.0],
            records: 100,
            domains: vec![2, 3],
            k_target: 2.0,
            seeds: 2,
            zipf_exponent: 1.0,
        };
        assert!(matches!(
            run_trend_experiment(&base, 1),
            Err(ReconstructError::InvalidConfig(_))
        ));
        let empty = TrendConfig {
            grid: vec![],
            ..base.clone()
        };
        assert!(matches!(
            run_trend_experiment(&empty, 1),
            Err(ReconstructError::InvalidConfig(_))
        ));
    }
}
