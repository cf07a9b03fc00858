//! The PRAM privacy mechanism: record-wise randomization through the
//! transition matrices, followed by a uniformly random permutation of the
//! released rows.
//!
//! Randomness is fully determined by a single master seed. Each record draws
//! its cells from an RNG seeded by `(master_seed, record index)`, and the
//! final shuffle uses a reserved counter, so the output is a pure function of
//! `(seed, table)` regardless of evaluation order. Anonymizing a one-row
//! table gives the per-individual local mode: each person can randomize their
//! own record with the same guarantees, provided transport hides the origin
//! the way the shuffle does here.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::seed;
use crate::tabular::Table;
use crate::transition::{AttributeMatrixSet, TransitionMatrix};

#[derive(Debug, Error)]
pub enum MechanismError {
    #[error("table schema does not match the matrix set schema")]
    SchemaMismatch,
}

// Counter 0 seeds the shuffle; record r draws from counter r + 1.
const SHUFFLE_COUNTER: u64 = 0;

/// PRAM with a fixed matrix set and master seed.
#[derive(Debug, Clone)]
pub struct PramMechanism {
    matrix_set: AttributeMatrixSet,
    master_seed: u64,
}

/// Instrumentation for tests: the permutation that placed the randomized
/// rows, and those rows before shuffling. `permutation[i]` is the output
/// position of input record `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnonymizationTrace {
    pub permutation: Vec<usize>,
    pub pre_shuffle_rows: Vec<Vec<usize>>,
}

impl PramMechanism {
    pub fn new(matrix_set: AttributeMatrixSet, master_seed: u64) -> Self {
        Self {
            matrix_set,
            master_seed,
        }
    }

    pub fn matrix_set(&self) -> &AttributeMatrixSet {
        &self.matrix_set
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Releases a table: every cell of every record is independently
    /// resampled from its matrix row, then the rows are placed in uniformly
    /// random order. Deterministic given the master seed.
    pub fn anonymize(&self, table: &Table) -> Result<Table, MechanismError> {
        self.anonymize_traced(table).map(|(released, _)| released)
    }

    /// As [`PramMechanism::anonymize`], additionally exposing the permutation
    /// and the pre-shuffle rows. Intended for verification and tests only —
    /// publishing the trace would defeat the shuffle.
    pub fn anonymize_traced(
        &self,
        table: &Table,
    ) -> Result<(Table, AnonymizationTrace), MechanismError> {
        if table.schema() != self.matrix_set.schema() {
            return Err(MechanismError::SchemaMismatch);
        }
        let n = table.records();

        let mut pre_shuffle = Vec::with_capacity(n);
        for r in 0..n {
            let mut rng = ChaCha12Rng::seed_from_u64(seed::derive(self.master_seed, r as u64 + 1));
            let source = table.value_index(r).expect("record index in range");
            let row: Vec<usize> = source
                .iter()
                .zip(self.matrix_set.matrices())
                .map(|(&cell, matrix)| sample_destination(&mut rng, matrix, cell))
                .collect();
            pre_shuffle.push(row);
        }

        // Fisher-Yates on the output slots: slot j receives input placement[j].
        let mut shuffle_rng =
            ChaCha12Rng::seed_from_u64(seed::derive(self.master_seed, SHUFFLE_COUNTER));
        let mut placement: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = shuffle_rng.random_range(0..=i);
            placement.swap(i, j);
        }

        let mut permutation = vec![0usize; n];
        let mut released_rows = vec![Vec::new(); n];
        for (slot, &input) in placement.iter().enumerate() {
            permutation[input] = slot;
            released_rows[slot] = pre_shuffle[input].clone();
        }

        let released = Table::from_index_rows(table.schema().clone(), released_rows)
            .expect("released rows are valid by construction");
        Ok((
            released,
            AnonymizationTrace {
                permutation,
                pre_shuffle_rows: pre_shuffle,
            },
        ))
    }
}

/// Inverse-CDF draw from a matrix row.
fn sample_destination(rng: &mut ChaCha12Rng, matrix: &TransitionMatrix, source: usize) -> usize {
    let row = matrix.row(source);
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    for (v, &p) in row.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return v;
        }
    }
    // Guard against cumulative rounding just below 1.
    row.len() - 1
}
