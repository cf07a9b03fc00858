//! Brute-force verification of the closed-form guarantees.
//!
//! Everything here recomputes, by exhaustive enumeration over the `n!`
//! record permutations, the quantities the [`crate::privacy`] module derives
//! in closed form. The central object is the adversary's *estimation
//! probability*: given prior knowledge over private tables (a finite-support
//! distribution) and a released table, the posterior probability that person
//! `r`'s record landed at released position `r'`:
//!
//! ```text
//!        Σ_τ  f(τ) · Σ_{π : π(r) = r'}  Π_s A[τ(s)][τ'(π(s))]
//! ℰ  =  ────────────────────────────────────────────────────
//!        Σ_τ  f(τ) · Σ_π               Π_s A[τ(s)][τ'(π(s))]
//! ```
//!
//! The anonymity level of a mechanism is exactly `1 / max ℰ`, the maximum
//! ranging over knowledge, released tables, and record pairs;
//! [`max_estimation_search`] finds that maximum by constructing the
//! two-value worst case for every pair of value tuples, and
//! [`pk_bound_audit`] hammers the bound with randomized configurations.
//! [`dp_ratio_check`] exhaustively verifies the differential-privacy ratio
//! over all pairs of tables differing in one record.
//!
//! Products of matrix entries are accumulated in log space with a stable
//! log-sum-exp, so long products cannot underflow. Enumeration is factorial:
//! operations take the record count as an explicit input and refuse anything
//! above the brute-force limit (default 8; `_with_limit` variants override).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::privacy::{self, AnonymityLevel, PrivacyBudget, PrivacyError};
use crate::tabular::{Table, TableSchema};
use crate::transition::AttributeMatrixSet;

/// Record counts above this are refused by default (`8! = 40320`
/// permutations per enumerated table).
pub const DEFAULT_BRUTE_FORCE_LIMIT: usize = 8;

// Work cap for the worst-case search: |V|^4 tuple combinations, each costing
// about n! permutation products.
const SEARCH_WORK_CAP: f64 = 1e8;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{records} records exceed the brute-force limit of {limit}")]
    TooLarge { records: usize, limit: usize },
    #[error("worst-case search over {domain}^4 value tuples at {records} records is too large")]
    SearchTooLarge { domain: usize, records: usize },
    #[error("released table is unreachable under every support table (zero denominator)")]
    DegenerateDenominator,
    #[error("knowledge, released table, and matrix set must share one schema")]
    SchemaMismatch,
    #[error("record index {index} out of range for {records} records")]
    RecordOutOfRange { index: usize, records: usize },
    #[error("invalid background knowledge: {0}")]
    InvalidKnowledge(String),
    #[error("randomized configuration reached {observed}, above the constructed bound {bound}")]
    BoundExceeded { observed: f64, bound: f64 },
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
}

/// An adversary's prior over private tables: a finite-support distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundKnowledge {
    support: Vec<(Table, f64)>,
}

impl BackgroundKnowledge {
    /// The adversary knows the private table exactly.
    pub fn point_mass(table: Table) -> Self {
        Self {
            support: vec![(table, 1.0)],
        }
    }

    /// A general finite-support prior. Weights must be non-negative and sum
    /// to 1 within 1e-12; all tables must share one schema and record count.
    pub fn mixture(support: Vec<(Table, f64)>) -> Result<Self, OracleError> {
        if support.is_empty() {
            return Err(OracleError::InvalidKnowledge("empty support".into()));
        }
        let mut total = 0.0;
        for (_, w) in &support {
            if w.is_nan() || *w < 0.0 {
                return Err(OracleError::InvalidKnowledge(format!(
                    "negative weight {w}"
                )));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(OracleError::InvalidKnowledge(format!(
                "weights sum to {total}, not 1"
            )));
        }
        let (first, _) = &support[0];
        for (table, _) in &support[1..] {
            if table.schema() != first.schema() || table.records() != first.records() {
                return Err(OracleError::InvalidKnowledge(
                    "support tables disagree on schema or record count".into(),
                ));
            }
        }
        Ok(Self { support })
    }

    pub fn support(&self) -> &[(Table, f64)] {
        &self.support
    }

    pub fn records(&self) -> usize {
        self.support[0].0.records()
    }

    pub fn schema(&self) -> &TableSchema {
        self.support[0].0.schema()
    }
}

/// One estimation question: which released record is person `source`'s?
#[derive(Debug, Clone)]
pub struct EstimationQuery<'a> {
    pub knowledge: &'a BackgroundKnowledge,
    pub released: &'a Table,
    /// Record index in the private table (the person).
    pub source: usize,
    /// Record index in the released table.
    pub target: usize,
}

/// Stable log-sum-exp accumulator.
struct LogSum {
    max: f64,
    scaled: f64,
}

impl LogSum {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }

    fn add(&mut self, term: f64) {
        if term == f64::NEG_INFINITY {
            return;
        }
        if term > self.max {
            self.scaled = self.scaled * (self.max - term).exp() + 1.0;
            self.max = term;
        } else {
            self.scaled += (term - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        if self.scaled == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// Visits every permutation of `0..n`; with `fixed = Some((r, r'))`, only
/// those mapping `r` to `r'`.
fn for_each_permutation<F: FnMut(&[usize])>(n: usize, fixed: Option<(usize, usize)>, mut visit: F) {
    fn recurse<F: FnMut(&[usize])>(
        perm: &mut [usize],
        used: &mut [bool],
        position: usize,
        visit: &mut F,
    ) {
        let n = perm.len();
        if position == n {
            visit(perm);
            return;
        }
        if perm[position] != usize::MAX {
            recurse(perm, used, position + 1, visit);
            return;
        }
        for candidate in 0..n {
            if !used[candidate] {
                perm[position] = candidate;
                used[candidate] = true;
                recurse(perm, used, position + 1, visit);
                used[candidate] = false;
                perm[position] = usize::MAX;
            }
        }
    }

    let mut perm = vec![usize::MAX; n];
    let mut used = vec![false; n];
    if let Some((source, target)) = fixed {
        perm[source] = target;
        used[target] = true;
    }
    recurse(&mut perm, &mut used, 0, &mut visit);
}

/// `w[s][s'] = ln Pr[record s of the private table is released as row s']`.
fn log_weights(set: &AttributeMatrixSet, private: &Table, released: &Table) -> Vec<Vec<f64>> {
    let n = private.records();
    (0..n)
        .map(|s| {
            let u = private.value_index(s).expect("in range");
            (0..n)
                .map(|s_dst| {
                    let v = released.value_index(s_dst).expect("in range");
                    set.log_product_entry(u, v)
                })
                .collect()
        })
        .collect()
}

/// `ln Σ_π Π_s exp(w[s][π(s)])`, optionally constrained to `π(r) = r'`.
fn log_permutation_sum(weights: &[Vec<f64>], fixed: Option<(usize, usize)>) -> f64 {
    let n = weights.len();
    let mut sum = LogSum::new();
    for_each_permutation(n, fixed, |perm| {
        let mut log_product = 0.0;
        for (s, &s_dst) in perm.iter().enumerate() {
            log_product += weights[s][s_dst];
            if log_product == f64::NEG_INFINITY {
                break;
            }
        }
        sum.add(log_product);
    });
    sum.value()
}

/// Exact posterior `Pr[Π(source) = target | released]` under the PRAM
/// mechanism and the given knowledge. Uses the default brute-force limit.
pub fn estimation_probability(
    query: &EstimationQuery,
    set: &AttributeMatrixSet,
) -> Result<f64, OracleError> {
    estimation_probability_with_limit(query, set, DEFAULT_BRUTE_FORCE_LIMIT)
}

/// As [`estimation_probability`] with an explicit record-count limit.
pub fn estimation_probability_with_limit(
    query: &EstimationQuery,
    set: &AttributeMatrixSet,
    limit: usize,
) -> Result<f64, OracleError> {
    let n = query.knowledge.records();
    if n > limit {
        return Err(OracleError::TooLarge { records: n, limit });
    }
    if query.released.records() != n
        || query.knowledge.schema() != query.released.schema()
        || query.knowledge.schema() != set.schema()
    {
        return Err(OracleError::SchemaMismatch);
    }
    for index in [query.source, query.target] {
        if index >= n {
            return Err(OracleError::RecordOutOfRange { index, records: n });
        }
    }

    let mut numerator = LogSum::new();
    let mut denominator = LogSum::new();
    for (table, weight) in query.knowledge.support() {
        if *weight == 0.0 {
            continue;
        }
        let w = log_weights(set, table, query.released);
        let log_weight = weight.ln();
        numerator.add(log_weight + log_permutation_sum(&w, Some((query.source, query.target))));
        denominator.add(log_weight + log_permutation_sum(&w, None));
    }
    let den = denominator.value();
    if den == f64::NEG_INFINITY {
        return Err(OracleError::DegenerateDenominator);
    }
    Ok((numerator.value() - den).exp())
}

/// The two-value configuration realizing a candidate maximum: the private
/// table holds `source_value` at one record and `fill_value` everywhere
/// else; the released table holds `source_released` and `fill_released` in
/// the same pattern, and the adversary knows the private table exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorstCaseWitness {
    pub source_value: Vec<usize>,
    pub fill_value: Vec<usize>,
    pub source_released: Vec<usize>,
    pub fill_released: Vec<usize>,
}

/// Result of [`max_estimation_search`].
#[derive(Debug, Clone, PartialEq)]
pub struct MaxEstimation {
    /// The maximum estimation probability; its reciprocal is the tight
    /// anonymity level.
    pub probability: f64,
    pub witness: WorstCaseWitness,
    pub random_trials: usize,
    /// Largest estimation probability seen among the randomized
    /// configurations; never exceeds `probability`.
    pub random_max: f64,
}

fn product_tuples(domains: &[usize]) -> Vec<Vec<usize>> {
    let mut tuples = vec![Vec::new()];
    for &m in domains {
        let mut next = Vec::with_capacity(tuples.len() * m);
        for tuple in &tuples {
            for v in 0..m {
                let mut t = tuple.clone();
                t.push(v);
                next.push(t);
            }
        }
        tuples = next;
    }
    tuples
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn two_value_table(schema: &TableSchema, records: usize, first: &[usize], fill: &[usize]) -> Table {
    let mut rows = vec![fill.to_vec(); records];
    rows[0] = first.to_vec();
    Table::from_index_rows(schema.clone(), rows).expect("tuples are in range")
}

/// Finds the maximum estimation probability of a PRAM mechanism on
/// `records` records by evaluating the two-value worst case for every
/// 4-tuple of value tuples, then cross-checks with `random_trials`
/// randomized configurations (random tables, released tables, and record
/// pairs), erroring if any of them beats the constructed maximum.
pub fn max_estimation_search(
    set: &AttributeMatrixSet,
    records: usize,
    random_trials: usize,
    seed: u64,
) -> Result<MaxEstimation, OracleError> {
    max_estimation_search_with_limit(set, records, random_trials, seed, DEFAULT_BRUTE_FORCE_LIMIT)
}

/// As [`max_estimation_search`] with an explicit record-count limit.
pub fn max_estimation_search_with_limit(
    set: &AttributeMatrixSet,
    records: usize,
    random_trials: usize,
    seed: u64,
    limit: usize,
) -> Result<MaxEstimation, OracleError> {
    if records == 0 || records > limit {
        return Err(OracleError::TooLarge { records, limit });
    }
    let domain = set.domain_size();
    let work = (domain as f64).powi(4) * factorial(records);
    if work > SEARCH_WORK_CAP {
        return Err(OracleError::SearchTooLarge { domain, records });
    }

    let schema = set.schema();
    let tuples = product_tuples(&schema.domain_sizes());

    let mut best = f64::NEG_INFINITY;
    let mut witness = None;
    for u in &tuples {
        for v in &tuples {
            let private = two_value_table(schema, records, u, v);
            let knowledge = BackgroundKnowledge::point_mass(private);
            for u_dst in &tuples {
                for v_dst in &tuples {
                    let released = two_value_table(schema, records, u_dst, v_dst);
                    let query = EstimationQuery {
                        knowledge: &knowledge,
                        released: &released,
                        source: 0,
                        target: 0,
                    };
                    match estimation_probability_with_limit(&query, set, limit) {
                        Ok(probability) => {
                            if probability > best {
                                best = probability;
                                witness = Some(WorstCaseWitness {
                                    source_value: u.clone(),
                                    fill_value: v.clone(),
                                    source_released: u_dst.clone(),
                                    fill_released: v_dst.clone(),
                                });
                            }
                        }
                        // A release unreachable from the known table tells
                        // the adversary nothing; skip it.
                        Err(OracleError::DegenerateDenominator) => {}
                        Err(e) => return Err(e),
                    }
                }
            }
        }
    }
    let witness = witness.ok_or(OracleError::DegenerateDenominator)?;

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let sizes = schema.domain_sizes();
    let random_tuple = |rng: &mut ChaCha12Rng| -> Vec<usize> {
        sizes.iter().map(|&m| rng.random_range(0..m)).collect()
    };
    let mut random_max = 0.0f64;
    for _ in 0..random_trials {
        let private_rows: Vec<Vec<usize>> = (0..records).map(|_| random_tuple(&mut rng)).collect();
        let released_rows: Vec<Vec<usize>> = (0..records).map(|_| random_tuple(&mut rng)).collect();
        let private = Table::from_index_rows(schema.clone(), private_rows).expect("in range");
        let released = Table::from_index_rows(schema.clone(), released_rows).expect("in range");
        let knowledge = BackgroundKnowledge::point_mass(private);
        let query = EstimationQuery {
            knowledge: &knowledge,
            released: &released,
            source: rng.random_range(0..records),
            target: rng.random_range(0..records),
        };
        match estimation_probability_with_limit(&query, set, limit) {
            Ok(probability) => {
                random_max = random_max.max(probability);
                if probability > best + 1e-12 {
                    return Err(OracleError::BoundExceeded {
                        observed: probability,
                        bound: best,
                    });
                }
            }
            Err(OracleError::DegenerateDenominator) => {}
            Err(e) => return Err(e),
        }
    }

    Ok(MaxEstimation {
        probability: best,
        witness,
        random_trials,
        random_max,
    })
}

/// Anonymity level of a released table under a *deterministic* mechanism
/// with point-mass knowledge: the minimum multiplicity of any record's value
/// tuple. For deterministic mechanisms this coincides exactly with the
/// classical k-anonymity level of the table.
pub fn pk_level_deterministic(released: &Table) -> AnonymityLevel {
    let min = released
        .tuple_multiplicities()
        .into_iter()
        .min()
        .expect("tables have at least one record");
    privacy::AnonymityLevel::new(min as f64)
}

/// The table pair and release attaining a maximal probability ratio, as
/// index-row lists. `left` and `right` differ in exactly one record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DpWitness {
    pub left: Vec<Vec<usize>>,
    pub right: Vec<Vec<usize>>,
    pub released: Vec<Vec<usize>>,
}

/// Outcome of [`dp_ratio_check`]: the exhaustive maximum of the release
/// probability ratio over neighboring private tables.
#[derive(Debug, Clone, PartialEq)]
pub struct DpRatioCheck {
    pub max_ratio: f64,
    /// `exp(claimed ε)`.
    pub bound: f64,
    pub passes: bool,
    pub witness: DpWitness,
}

// Full enumeration over table pairs is |V|^(2n) and only meant for desk
// scale; these caps keep it honest.
const DP_CHECK_MAX_RECORDS: usize = 3;
const DP_CHECK_MAX_DOMAIN: usize = 3;

/// Exhaustively computes
/// `max Pr[release(τ₁) = τ'] / Pr[release(τ₂) = τ']` over all pairs of
/// private tables differing in exactly one record and all released tables,
/// and compares it with `exp(claimed_eps)`. The comparison allows a 1e-9
/// relative slack for rounding.
pub fn dp_ratio_check(
    set: &AttributeMatrixSet,
    records: usize,
    claimed_eps: PrivacyBudget,
) -> Result<DpRatioCheck, OracleError> {
    if records == 0 || records > DP_CHECK_MAX_RECORDS {
        return Err(OracleError::TooLarge {
            records,
            limit: DP_CHECK_MAX_RECORDS,
        });
    }
    let domain = set.domain_size();
    if domain > DP_CHECK_MAX_DOMAIN {
        return Err(OracleError::SearchTooLarge { domain, records });
    }

    let schema = set.schema();
    let tuples = product_tuples(&schema.domain_sizes());
    let tables: Vec<Vec<Vec<usize>>> = {
        // All |V|^n tables as index-row lists.
        let mut tables = vec![Vec::new()];
        for _ in 0..records {
            let mut next = Vec::with_capacity(tables.len() * tuples.len());
            for table in &tables {
                for tuple in &tuples {
                    let mut t = table.clone();
                    t.push(tuple.clone());
                    next.push(t);
                }
            }
            tables = next;
        }
        tables
    };

    let log_release_prob = |private: &Vec<Vec<usize>>, released: &Table| -> f64 {
        let private = Table::from_index_rows(schema.clone(), private.clone()).expect("in range");
        // The uniform 1/n! over permutations cancels in every ratio.
        log_permutation_sum(&log_weights(set, &private, released), None)
    };

    let mut max_ratio = 0.0f64;
    let mut witness = None;
    for left in &tables {
        for record in 0..records {
            for tuple in &tuples {
                if tuple == &left[record] {
                    continue;
                }
                let mut right = left.clone();
                right[record] = tuple.clone();
                for released_rows in &tables {
                    let released = Table::from_index_rows(schema.clone(), released_rows.clone())
                        .expect("in range");
                    let log_left = log_release_prob(left, &released);
                    let log_right = log_release_prob(&right, &released);
                    let ratio = if log_left == f64::NEG_INFINITY {
                        // Unreachable from the left table: no constraint.
                        continue;
                    } else if log_right == f64::NEG_INFINITY {
                        f64::INFINITY
                    } else {
                        (log_left - log_right).exp()
                    };
                    if ratio > max_ratio {
                        max_ratio = ratio;
                        witness = Some(DpWitness {
                            left: left.clone(),
                            right: right.clone(),
                            released: released_rows.clone(),
                        });
                    }
                }
            }
        }
    }

    let bound = match claimed_eps {
        PrivacyBudget::Finite(eps) => eps.exp(),
        PrivacyBudget::Unbounded => f64::INFINITY,
    };
    let passes = max_ratio <= bound * (1.0 + 1e-9);
    Ok(DpRatioCheck {
        max_ratio,
        bound,
        passes,
        witness: witness.expect("at least one comparable pair exists"),
    })
}

/// Outcome of [`pk_bound_audit`].
#[derive(Debug, Clone, PartialEq)]
pub struct PkBoundAudit {
    pub trials: usize,
    /// `1/k` for the closed-form k of the matrix set.
    pub bound: f64,
    pub max_estimation: f64,
    pub passes: bool,
}

/// Samples `trials` randomized knowledge distributions (point masses and
/// two-table mixtures), released tables, and record pairs, and checks that
/// no estimation probability exceeds `1/k` for the closed-form anonymity
/// level of the matrix set.
pub fn pk_bound_audit(
    set: &AttributeMatrixSet,
    records: usize,
    trials: usize,
    seed: u64,
) -> Result<PkBoundAudit, OracleError> {
    pk_bound_audit_with_limit(set, records, trials, seed, DEFAULT_BRUTE_FORCE_LIMIT)
}

/// As [`pk_bound_audit`] with an explicit record-count limit.
pub fn pk_bound_audit_with_limit(
    set: &AttributeMatrixSet,
    records: usize,
    trials: usize,
    seed: u64,
    limit: usize,
) -> Result<PkBoundAudit, OracleError> {
    if records == 0 || records > limit {
        return Err(OracleError::TooLarge { records, limit });
    }
    let k = privacy::k_from_matrix_set(set, records as u64)?;
    let bound = 1.0 / k.value();

    let schema = set.schema();
    let sizes = schema.domain_sizes();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let random_table = |rng: &mut ChaCha12Rng| -> Table {
        let rows = (0..records)
            .map(|_| sizes.iter().map(|&m| rng.random_range(0..m)).collect())
            .collect();
        Table::from_index_rows(schema.clone(), rows).expect("in range")
    };

    let mut max_estimation = 0.0f64;
    let mut passes = true;
    for _ in 0..trials {
        let primary = random_table(&mut rng);
        let knowledge = if rng.random::<bool>() {
            BackgroundKnowledge::point_mass(primary.clone())
        } else {
            let secondary = random_table(&mut rng);
            let lambda: f64 = rng.random();
            BackgroundKnowledge::mixture(vec![
                (primary.clone(), lambda),
                (secondary, 1.0 - lambda),
            ])?
        };
        let released = if rng.random::<bool>() {
            primary
        } else {
            random_table(&mut rng)
        };
        let query = EstimationQuery {
            knowledge: &knowledge,
            released: &released,
            source: rng.random_range(0..records),
            target: rng.random_range(0..records),
        };
        match estimation_probability_with_limit(&query, set, limit) {
            Ok(probability) => {
                max_estimation = max_estimation.max(probability);
                if probability > bound + 1e-9 {
                    passes = false;
                }
            }
            Err(OracleError::DegenerateDenominator) => {}
            Err(e) => return Err(e),
        }
    }

    Ok(PkBoundAudit {
        trials,
        bound,
        max_estimation,
        passes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transition::RetentionProfile;

    fn rrp_set(domains: &[usize], rho: f64) -> AttributeMatrixSet {
        let schema = TableSchema::with_generic_labels(domains).unwrap();
        let profile = RetentionProfile::uniform(rho, domains.len()).unwrap();
        AttributeMatrixSet::retention_replacement(schema, &profile).unwrap()
    }

    fn table(domains: &[usize], rows: Vec<Vec<usize>>) -> Table {
        let schema = TableSchema::with_generic_labels(domains).unwrap();
        Table::from_index_rows(schema, rows).unwrap()
    }

    #[test]
    fn estimation_probability_worked_example() {
        // Two records, rrp(2, 0.5), adversary knows tau = (v0, v1), release
        // equals tau. Identity permutation weighs 0.75^2 = 0.5625, the swap
        // weighs 0.25^2 = 0.0625; the posterior for the identity link is
        // 0.5625 / 0.625 = 0.9.
        let set = rrp_set(&[2], 0.5);
        let private = table(&[2], vec![vec![0], vec![1]]);
        let released = table(&[2], vec![vec![0], vec![1]]);
        let knowledge = BackgroundKnowledge::point_mass(private);
        let query = EstimationQuery {
            knowledge: &knowledge,
            released: &released,
            source: 0,
            target: 0,
        };
        let e = estimation_probability(&query, &set).unwrap();
        assert!((e - 0.9).abs() < 1e-12, "E = {e}");
    }

    #[test]
    fn deterministic_link_has_probability_one() {
        let set = rrp_set(&[3], 1.0);
        let private = table(&[3], vec![vec![0], vec![1], vec![2]]);
        let released = table(&[3], vec![vec![2], vec![0], vec![1]]);
        let knowledge = BackgroundKnowledge::point_mass(private);
        // Record 0 holds value v0, which sits at released position 1.
        let hit = EstimationQuery {
            knowledge: &knowledge,
            released: &released,
            source: 0,
            target: 1,
        };
        assert!((estimation_probability(&hit, &set).unwrap() - 1.0).abs() < 1e-12);
        let miss = EstimationQuery {
            knowledge: &knowledge,
            released: &released,
            source: 0,
            target: 0,
        };
        assert_eq!(estimation_probability(&miss, &set).unwrap(), 0.0);
    }

    #[test]
    fn uniform_matrix_reveals_nothing() {
        let set = rrp_set(&[2], 0.0);
        let private = table(&[2], vec![vec![0], vec![1], vec![0], vec![1]]);
        let released = table(&[2], vec![vec![1], vec![1], vec![0], vec![0]]);
        let knowledge = BackgroundKnowledge::point_mass(private);
        for target in 0..4 {
            let query = EstimationQuery {
                knowledge: &knowledge,
                released: &released,
                source: 2,
                target,
            };
            let e = estimation_probability(&query, &set).unwrap();
            assert!((e - 0.25).abs() < 1e-12, "E = {e}");
        }
    }

    #[test]
    fn degenerate_denominator_is_an_error() {
        // Identity randomization cannot turn (v0, v0) into (v0, v1).
        let set = rrp_set(&[2], 1.0);
        let private = table(&[2], vec![vec![0], vec![0]]);
        let released = table(&[2], vec![vec![0], vec![1]]);
        let knowledge = BackgroundKnowledge::point_mass(private);
        let query = EstimationQuery {
            knowledge: &knowledge,
            released: &released,
            source: 0,
            target: 0,
        };
        assert!(matches!(
            estimation_probability(&query, &set),
            Err(OracleError::DegenerateDenominator)
        ));
    }

    #[test]
    fn estimation_respects_limit() {
        let set = rrp_set(&[2], 0.5);
        let rows = vec![vec![0]; 9];
        let private = table(&[2], rows.clone());
        let released = table(&[2], rows);
        let knowledge = BackgroundKnowledge::point_mass(private);
        let query = EstimationQuery {
            knowledge: &knowledge,
            released: &released,
            source: 0,
            target: 0,
        };
        assert!(matches!(
            estimation_probability(&query, &set),
            Err(OracleError::TooLarge {
                records: 9,
                limit: 8
            })
        ));
        assert!(estimation_probability_with_limit(&query, &set, 9).is_ok());
    }

    #[test]
    fn conservation_over_targets() {
        // For a fixed source the posteriors over released positions sum to 1.
        let set = rrp_set(&[2, 2], 0.3);
        let schema = TableSchema::with_generic_labels(&[2, 2]).unwrap();
        let private = Table::from_index_rows(
            schema.clone(),
            vec![vec![0, 0], vec![1, 0], vec![1, 1], vec![0, 1], vec![0, 0]],
        )
        .unwrap();
        let released = Table::from_index_rows(
            schema,
            vec![vec![0, 0], vec![0, 0], vec![1, 1], vec![1, 0], vec![0, 1]],
        )
        .unwrap();
        let knowledge = BackgroundKnowledge::point_mass(private);
        for source in 0..5 {
            let total: f64 = (0..5)
                .map(|target| {
                    let query = EstimationQuery {
                        knowledge: &knowledge,
                        released: &released,
                        source,
                        target,
                    };
                    estimation_probability(&query, &set).unwrap()
                })
                .sum();
            assert!(
                (total - 1.0).abs() < 1e-9,
                "source {source} sums to {total}"
            );
        }
    }

    #[test]
    fn log_space_survives_products_that_underflow_linearly() {
        // Eight factors of 1e-300 multiply to 1e-2400, which is zero in
        // linear f64 arithmetic; in log space the posterior stays exact.
        let tiny = 1e-300;
        let matrix = crate::transition::TransitionMatrix::from_rows(vec![
            vec![1.0 - tiny, tiny],
            vec![tiny, 1.0 - tiny],
        ])
        .unwrap();
        let schema = TableSchema::with_generic_labels(&[2]).unwrap();
        let set = AttributeMatrixSet::new(schema, vec![matrix]).unwrap();
        let n = 8;
        // Private all-v0, released all-v1: every cell flipped, weight
        // tiny^8 for every permutation.
        let private = table(&[2], vec![vec![0]; n]);
        let released = table(&[2], vec![vec![1]; n]);
        let knowledge = BackgroundKnowledge::point_mass(private);
        for target in [0, 3, 7] {
            let query = EstimationQuery {
                knowledge: &knowledge,
                released: &released,
                source: 0,
                target,
            };
            let e = estimation_probability(&query, &set).unwrap();
            // All permutations weigh the same, so the posterior is 1/n.
            assert!((e - 1.0 / n as f64).abs() < 1e-12, "E = {e}");
        }
    }

    #[test]
    fn mixture_knowledge_interpolates_point_masses() {
        let set = rrp_set(&[2], 0.5);
        let t1 = table(&[2], vec![vec![0], vec![1]]);
        let t2 = table(&[2], vec![vec![1], vec![1]]);
        let released = table(&[2], vec![vec![0], vec![1]]);
        let e = |knowledge: &BackgroundKnowledge| {
            let query = EstimationQuery {
                knowledge,
                released: &released,
                source: 0,
                target: 0,
            };
            estimation_probability(&query, &set).unwrap()
        };
        let e1 = e(&BackgroundKnowledge::point_mass(t1.clone()));
        let e2 = e(&BackgroundKnowledge::point_mass(t2.clone()));
        let mixed = e(&BackgroundKnowledge::mixture(vec![(t1, 0.3), (t2, 0.7)]).unwrap());
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        assert!(mixed >= lo - 1e-12 && mixed <= hi + 1e-12);
    }

    #[test]
    fn mixture_validation() {
        let t = table(&[2], vec![vec![0]]);
        assert!(matches!(
            BackgroundKnowledge::mixture(vec![]),
            Err(OracleError::InvalidKnowledge(_))
        ));
        assert!(matches!(
            BackgroundKnowledge::mixture(vec![(t.clone(), 0.5), (t.clone(), 0.6)]),
            Err(OracleError::InvalidKnowledge(_))
        ));
        let other = table(&[3], vec![vec![0]]);
        assert!(matches!(
            BackgroundKnowledge::mixture(vec![(t, 0.5), (other, 0.5)]),
            Err(OracleError::InvalidKnowledge(_))
        ));
    }

    #[test]
    fn worst_case_search_matches_closed_form() {
        let set = rrp_set(&[2], 0.5);
        let result = max_estimation_search(&set, 2, 50, 1).unwrap();
        assert!((result.probability - 0.9).abs() < 1e-12);
        let k = privacy::k_from_matrix_set(&set, 2).unwrap().value();
        assert!((1.0 / result.probability - k).abs() < 1e-9);
        assert!(result.random_max <= result.probability + 1e-12);

        // The witness should be the retained two-value configuration.
        let w = &result.witness;
        assert_eq!(w.source_value, w.source_released);
        assert_eq!(w.fill_value, w.fill_released);
        assert_ne!(w.source_value, w.fill_value);
    }

    #[test]
    fn worst_case_search_uniform_matrix() {
        let set = rrp_set(&[3], 0.0);
        for n in [1usize, 2, 4] {
            let result = max_estimation_search(&set, n, 20, 7).unwrap();
            assert!(
                (result.probability - 1.0 / n as f64).abs() < 1e-12,
                "n = {n}: {}",
                result.probability
            );
        }
    }

    #[test]
    fn worst_case_search_single_record() {
        let set = rrp_set(&[2], 0.5);
        let result = max_estimation_search(&set, 1, 10, 3).unwrap();
        assert_eq!(result.probability, 1.0);
    }

    #[test]
    fn deterministic_pk_level_is_min_multiplicity() {
        assert_eq!(
            pk_level_deterministic(&table(&[2], vec![vec![0], vec![0], vec![1], vec![1]])).value(),
            2.0
        );
        assert_eq!(
            pk_level_deterministic(&table(&[2], vec![vec![0], vec![0], vec![1]])).value(),
            1.0
        );
        assert_eq!(
            pk_level_deterministic(&table(&[2], vec![vec![1]; 5])).value(),
            5.0
        );
    }

    #[test]
    fn dp_ratio_check_passes_at_claimed_eps() {
        let set = rrp_set(&[2], 0.5);
        let claimed = privacy::eps_from_matrix_set(&set);
        let check = dp_ratio_check(&set, 2, claimed).unwrap();
        assert!(check.passes, "max ratio {}", check.max_ratio);
        assert!(check.max_ratio <= 3.0 * (1.0 + 1e-9));
    }

    #[test]
    fn dp_ratio_check_fails_for_understated_eps() {
        let set = rrp_set(&[2], 0.5);
        let understated = PrivacyBudget::Finite(0.5 * 3f64.ln());
        let check = dp_ratio_check(&set, 2, understated).unwrap();
        assert!(!check.passes);
        assert!(check.max_ratio > check.bound);
        // The witness pair differs in exactly one record.
        let diffs = check
            .witness
            .left
            .iter()
            .zip(&check.witness.right)
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(diffs, 1);
    }

    #[test]
    fn dp_ratio_uniform_matrix_is_one() {
        let set = rrp_set(&[3], 0.0);
        let check = dp_ratio_check(&set, 2, PrivacyBudget::Finite(0.0)).unwrap();
        assert!((check.max_ratio - 1.0).abs() < 1e-12);
        assert!(check.passes);
    }

    #[test]
    fn dp_ratio_single_record_attains_the_bound() {
        let set = rrp_set(&[2], 0.5);
        let check = dp_ratio_check(&set, 1, privacy::eps_from_matrix_set(&set)).unwrap();
        assert!(check.passes);
        assert!((check.max_ratio - 3.0).abs() < 1e-9);
    }

    #[test]
    fn dp_ratio_check_respects_caps() {
        let set = rrp_set(&[2], 0.5);
        assert!(matches!(
            dp_ratio_check(&set, 4, PrivacyBudget::Finite(1.0)),
            Err(OracleError::TooLarge { .. })
        ));
        let wide = rrp_set(&[2, 2], 0.5);
        assert!(matches!(
            dp_ratio_check(&wide, 2, PrivacyBudget::Finite(1.0)),
            Err(OracleError::SearchTooLarge { .. })
        ));
    }

    #[test]
    fn audit_never_beats_the_bound() {
        let set = rrp_set(&[2], 0.5);
        let audit = pk_bound_audit(&set, 3, 500, 42).unwrap();
        assert!(audit.passes);
        assert!(audit.max_estimation <= audit.bound + 1e-9);
        assert!((audit.bound - 9.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn audit_uniform_matrix_pins_exactly_one_over_n() {
        let set = rrp_set(&[2], 0.0);
        let audit = pk_bound_audit(&set, 4, 200, 9).unwrap();
        assert!(audit.passes);
        assert!((audit.max_estimation - 0.25).abs() < 1e-12);
        assert!((audit.bound - 0.25).abs() < 1e-12);
    }
}
