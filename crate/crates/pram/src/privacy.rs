//! Closed-form privacy accounting for PRAM, and the parameter solvers that
//! invert it.
//!
//! Two guarantees are computed from the transition matrices alone — no data
//! is needed, only the record count (an expected count is fine when the data
//! has not been collected yet):
//!
//! * **Anonymity** `k`: a PRAM release withstands any adversary prior when
//!   the posterior of linking a person to a record never exceeds `1/k`, with
//!
//!   `k = 1 + (|R| − 1) · min_{u,v,u',v'} (A[u][v'] · A[v][u']) / (A[u][u'] · A[v][v'])`.
//!
//!   The bound is tight: the [`crate::oracle`] module reproduces it by
//!   exhaustive search. `k` is a real number — `k = 1.5` is meaningful — and
//!   always lies in `[1, |R|]`. Every k-value this module reports is the
//!   maximal one; any smaller k is satisfied a fortiori. For a set of
//!   per-attribute matrices the minimum factorizes into a product of
//!   per-attribute *anonymity ratios* `AR_a`.
//!
//! * **Differential privacy** `ε`: `ε = ln max_{u,v,v'} A[u][v'] / A[v][v']`,
//!   summed over attributes. A column mixing zero and non-zero entries makes
//!   the ratio unbounded.
//!
//! For retention-replacement perturbation both collapse to closed forms in
//! `ρ`: `AR_a = ((1−ρ_a)/(1+(|V_a|−1)ρ_a))²` and
//! `ε = Σ_a ln((1+(|V_a|−1)ρ_a)/(1−ρ_a))`. Attributes with a single value
//! contribute nothing to either guarantee (their matrix is `[[1]]`), so they
//! enter as `AR_a = 1` and `ε_a = 0`.
//!
//! `k` is strictly decreasing and `ε` strictly increasing in `ρ`, so both are
//! invertible by bisection; [`solve_rho_from_k`], [`solve_rho_from_eps`] and
//! [`solve_rho_combined`] do exactly that, with a uniform `ρ` across
//! attributes.

use thiserror::Error;

use crate::tabular::Table;
use crate::transition::{AttributeMatrixSet, RetentionProfile, TransitionMatrix};

/// Bisection stops when the bracket is this narrow (or after
/// [`MAX_BISECTION_ITERATIONS`], whichever comes first).
pub const BISECTION_WIDTH: f64 = 1e-12;
pub const MAX_BISECTION_ITERATIONS: u32 = 200;
// The ε bracket stops just short of ρ = 1, where ε is infinite.
const EPS_BRACKET_MAX: f64 = 1.0 - 1e-15;

#[derive(Debug, Error)]
pub enum PrivacyError {
    #[error("matrix entry ({row}, {col}) is zero; the anonymity formula divides by entries")]
    ZeroEntry { row: usize, col: usize },
    #[error("record count must be at least 1")]
    EmptyTable,
    #[error("expected {expected} retention probabilities, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("anonymity target {k_target} is not attainable with {records} records (need 1 ≤ k ≤ records)")]
    Infeasible { k_target: f64, records: u64 },
    #[error("privacy budget target must be positive, got {0}")]
    InvalidTarget(f64),
}

/// An anonymity level `k ≥ 1`: no adversary posterior exceeds `1/k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnonymityLevel(f64);

impl AnonymityLevel {
    pub(crate) fn new(k: f64) -> Self {
        debug_assert!(k >= 1.0);
        Self(k)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl std::fmt::Display for AnonymityLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A differential-privacy budget: a finite `ε ≥ 0`, or unbounded when the
/// mechanism can reveal a value deterministically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrivacyBudget {
    Finite(f64),
    Unbounded,
}

impl PrivacyBudget {
    pub fn is_unbounded(self) -> bool {
        matches!(self, PrivacyBudget::Unbounded)
    }

    /// The finite value, if any.
    pub fn value(self) -> Option<f64> {
        match self {
            PrivacyBudget::Finite(eps) => Some(eps),
            PrivacyBudget::Unbounded => None,
        }
    }
}

impl std::fmt::Display for PrivacyBudget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PrivacyBudget::Finite(eps) => write!(f, "{eps}"),
            PrivacyBudget::Unbounded => write!(f, "unbounded"),
        }
    }
}

/// The guarantees of a mechanism together with the inputs that produced
/// them, so both can be recomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyReport {
    pub k: AnonymityLevel,
    pub epsilon: PrivacyBudget,
    pub records: u64,
    /// Per-attribute anonymity ratios `AR_a`.
    pub anonymity_ratios: Vec<f64>,
    /// Per-attribute domain sizes.
    pub domains: Vec<usize>,
    /// Retention probabilities, when the matrices are RRP.
    pub rhos: Option<Vec<f64>>,
}

impl PrivacyReport {
    /// Report for retention-replacement perturbation.
    pub fn from_rrp(
        domains: &[usize],
        profile: &RetentionProfile,
        records: u64,
    ) -> Result<Self, PrivacyError> {
        let k = k_from_rrp(domains, profile, records)?;
        let epsilon = eps_from_rrp(domains, profile)?;
        let anonymity_ratios = domains
            .iter()
            .zip(profile.rhos())
            .map(|(&m, &rho)| rrp_anonymity_ratio(m, rho))
            .collect();
        Ok(Self {
            k,
            epsilon,
            records,
            anonymity_ratios,
            domains: domains.to_vec(),
            rhos: Some(profile.rhos().to_vec()),
        })
    }

    /// Report for arbitrary per-attribute matrices.
    pub fn from_matrix_set(set: &AttributeMatrixSet, records: u64) -> Result<Self, PrivacyError> {
        let k = k_from_matrix_set(set, records)?;
        let epsilon = eps_from_matrix_set(set);
        let anonymity_ratios = set
            .matrices()
            .iter()
            .map(min_anonymity_ratio)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            k,
            epsilon,
            records,
            anonymity_ratios,
            domains: set.schema().domain_sizes(),
            rhos: None,
        })
    }
}

/// The minimum over value 4-tuples of
/// `(A[u][v'] · A[v][u']) / (A[u][u'] · A[v][v'])` — the factor one attribute
/// contributes to `(k − 1)/(|R| − 1)`. Requires a strictly positive matrix.
pub fn min_anonymity_ratio(matrix: &TransitionMatrix) -> Result<f64, PrivacyError> {
    let m = matrix.size();
    for u in 0..m {
        for v in 0..m {
            if matrix.entry(u, v) == 0.0 {
                return Err(PrivacyError::ZeroEntry { row: u, col: v });
            }
        }
    }
    let mut min = f64::INFINITY;
    for u in 0..m {
        for v in 0..m {
            for u_dst in 0..m {
                for v_dst in 0..m {
                    let ratio = matrix.entry(u, v_dst) * matrix.entry(v, u_dst)
                        / (matrix.entry(u, u_dst) * matrix.entry(v, v_dst));
                    if ratio < min {
                        min = ratio;
                    }
                }
            }
        }
    }
    Ok(min)
}

/// Tight anonymity level of a single-matrix PRAM mechanism on `records`
/// records.
pub fn k_from_matrix(
    matrix: &TransitionMatrix,
    records: u64,
) -> Result<AnonymityLevel, PrivacyError> {
    if records == 0 {
        return Err(PrivacyError::EmptyTable);
    }
    let ratio = min_anonymity_ratio(matrix)?;
    Ok(AnonymityLevel::new(1.0 + (records as f64 - 1.0) * ratio))
}

/// Tight anonymity level of a per-attribute matrix set: the minima multiply
/// across attributes because attributes are randomized independently.
pub fn k_from_matrix_set(
    set: &AttributeMatrixSet,
    records: u64,
) -> Result<AnonymityLevel, PrivacyError> {
    if records == 0 {
        return Err(PrivacyError::EmptyTable);
    }
    let mut product = 1.0;
    for matrix in set.matrices() {
        product *= min_anonymity_ratio(matrix)?;
    }
    Ok(AnonymityLevel::new(1.0 + (records as f64 - 1.0) * product))
}

/// `AR_a` for an RRP attribute; 1 for singleton domains, whose matrix is
/// `[[1]]` and reveals nothing.
fn rrp_anonymity_ratio(domain_size: usize, rho: f64) -> f64 {
    if domain_size < 2 {
        return 1.0;
    }
    let ratio = (1.0 - rho) / (1.0 + (domain_size as f64 - 1.0) * rho);
    ratio * ratio
}

/// Anonymity level of retention-replacement perturbation, in closed form.
pub fn k_from_rrp(
    domains: &[usize],
    profile: &RetentionProfile,
    records: u64,
) -> Result<AnonymityLevel, PrivacyError> {
    if records == 0 {
        return Err(PrivacyError::EmptyTable);
    }
    if domains.len() != profile.len() {
        return Err(PrivacyError::LengthMismatch {
            expected: domains.len(),
            found: profile.len(),
        });
    }
    let product: f64 = domains
        .iter()
        .zip(profile.rhos())
        .map(|(&m, &rho)| rrp_anonymity_ratio(m, rho))
        .product();
    Ok(AnonymityLevel::new(1.0 + (records as f64 - 1.0) * product))
}

/// Differential-privacy budget of a single matrix:
/// `ε = ln max_{u,v,v'} A[u][v'] / A[v][v']`. Unbounded when some column
/// mixes zero and non-zero entries.
pub fn eps_from_matrix(matrix: &TransitionMatrix) -> PrivacyBudget {
    let m = matrix.size();
    let mut max_ratio = 1.0f64;
    for v_dst in 0..m {
        let mut col_min = f64::INFINITY;
        let mut col_max = 0.0f64;
        for u in 0..m {
            let e = matrix.entry(u, v_dst);
            col_min = col_min.min(e);
            col_max = col_max.max(e);
        }
        if col_max == 0.0 {
            // Unreachable destination value: imposes no constraint.
            continue;
        }
        if col_min == 0.0 {
            return PrivacyBudget::Unbounded;
        }
        max_ratio = max_ratio.max(col_max / col_min);
    }
    PrivacyBudget::Finite(max_ratio.ln())
}

/// Budget of a matrix set: the per-attribute budgets add.
pub fn eps_from_matrix_set(set: &AttributeMatrixSet) -> PrivacyBudget {
    let mut total = 0.0;
    for matrix in set.matrices() {
        match eps_from_matrix(matrix) {
            PrivacyBudget::Finite(eps) => total += eps,
            PrivacyBudget::Unbounded => return PrivacyBudget::Unbounded,
        }
    }
    PrivacyBudget::Finite(total)
}

/// Per-attribute RRP budget; 0 for singleton domains.
fn rrp_epsilon(domain_size: usize, rho: f64) -> PrivacyBudget {
    if domain_size < 2 {
        return PrivacyBudget::Finite(0.0);
    }
    if rho >= 1.0 {
        return PrivacyBudget::Unbounded;
    }
    PrivacyBudget::Finite(((1.0 + (domain_size as f64 - 1.0) * rho) / (1.0 - rho)).ln())
}

/// Budget of retention-replacement perturbation, in closed form.
pub fn eps_from_rrp(
    domains: &[usize],
    profile: &RetentionProfile,
) -> Result<PrivacyBudget, PrivacyError> {
    if domains.len() != profile.len() {
        return Err(PrivacyError::LengthMismatch {
            expected: domains.len(),
            found: profile.len(),
        });
    }
    let mut total = 0.0;
    for (&m, &rho) in domains.iter().zip(profile.rhos()) {
        match rrp_epsilon(m, rho) {
            PrivacyBudget::Finite(eps) => total += eps,
            PrivacyBudget::Unbounded => return Ok(PrivacyBudget::Unbounded),
        }
    }
    Ok(PrivacyBudget::Finite(total))
}

/// Outcome of a classical k-anonymity check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KAnonymityCheck {
    pub k: u64,
    pub satisfied: bool,
    /// `multiplicities[r]`: how many records share record `r`'s value tuple.
    pub multiplicities: Vec<usize>,
    pub min_multiplicity: usize,
}

/// Checks whether every record's value tuple occurs at least `k` times.
pub fn check_k_anonymity(table: &Table, k: u64) -> KAnonymityCheck {
    let multiplicities = table.tuple_multiplicities();
    let min_multiplicity = multiplicities.iter().copied().min().unwrap_or(0);
    KAnonymityCheck {
        k,
        satisfied: min_multiplicity as u64 >= k,
        multiplicities,
        min_multiplicity,
    }
}

fn k_of_uniform_rho(domains: &[usize], rho: f64, records: u64) -> f64 {
    let product: f64 = domains
        .iter()
        .map(|&m| rrp_anonymity_ratio(m, rho))
        .product();
    1.0 + (records as f64 - 1.0) * product
}

fn eps_of_uniform_rho(domains: &[usize], rho: f64) -> f64 {
    domains
        .iter()
        .map(|&m| match rrp_epsilon(m, rho) {
            PrivacyBudget::Finite(eps) => eps,
            PrivacyBudget::Unbounded => f64::INFINITY,
        })
        .sum()
}

/// Solves for the uniform retention probability that achieves anonymity
/// level `k_target` on `records` records, by bisection on `[0, 1]` starting
/// from `ρ = 1/2`. `k` decreases monotonically in `ρ`, from `|R|` at `ρ = 0`
/// to `1` at `ρ = 1`.
pub fn solve_rho_from_k(
    k_target: f64,
    records: u64,
    domains: &[usize],
) -> Result<f64, PrivacyError> {
    if records == 0 {
        return Err(PrivacyError::EmptyTable);
    }
    if !k_target.is_finite() || k_target < 1.0 || k_target > records as f64 {
        return Err(PrivacyError::Infeasible { k_target, records });
    }
    let k_at = |rho: f64| k_of_uniform_rho(domains, rho, records);
    // Prefer the high-retention endpoint: when several rho meet the target
    // (degenerate domains, or a single record), larger rho costs no anonymity
    // and keeps more utility.
    if k_at(1.0) == k_target {
        return Ok(1.0);
    }
    if k_at(0.0) == k_target {
        return Ok(0.0);
    }
    if k_at(0.0) == k_at(1.0) {
        // No attribute has two or more values, so rho has no effect; the
        // endpoint shortcuts above are the only attainable targets.
        return Err(PrivacyError::Infeasible { k_target, records });
    }
    // Invariant: k(lo) > k_target > k(hi).
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..MAX_BISECTION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if k_at(mid) >= k_target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= BISECTION_WIDTH {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solves for the uniform retention probability whose budget is
/// `eps_target`, by bisection on `[0, 1 − 1e-15]` starting from `ρ = 1/2`.
/// `ε` increases monotonically from 0 at `ρ = 0` and diverges as `ρ → 1`,
/// so any positive target is reachable; if the target exceeds what the
/// bracket can represent, the bracket's upper end is returned (its budget is
/// still below the target).
pub fn solve_rho_from_eps(eps_target: f64, domains: &[usize]) -> Result<f64, PrivacyError> {
    if eps_target.is_nan() || eps_target <= 0.0 {
        return Err(PrivacyError::InvalidTarget(eps_target));
    }
    let eps_at = |rho: f64| eps_of_uniform_rho(domains, rho);
    if eps_at(EPS_BRACKET_MAX) <= eps_target {
        return Ok(EPS_BRACKET_MAX);
    }
    // Invariant: eps(lo) < eps_target < eps(hi).
    let mut lo = 0.0f64;
    let mut hi = EPS_BRACKET_MAX;
    for _ in 0..MAX_BISECTION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if eps_at(mid) <= eps_target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= BISECTION_WIDTH {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solves for the uniform retention probability satisfying an anonymity
/// target *and* a budget target at once: the smaller of the two solutions.
/// Lowering `ρ` raises `k` and lowers `ε`, so the minimum satisfies both.
pub fn solve_rho_combined(
    k_target: f64,
    eps_target: f64,
    records: u64,
    domains: &[usize],
) -> Result<f64, PrivacyError> {
    let rho_k = solve_rho_from_k(k_target, records, domains)?;
    let rho_eps = solve_rho_from_eps(eps_target, domains)?;
    Ok(rho_k.min(rho_eps))
}
