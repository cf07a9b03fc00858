//! Anonymization of categorical microdata by post-randomization (PRAM),
//! together with the machinery needed to use it responsibly: exact privacy
//! accounting, parameter solvers, brute-force verification, and aggregate
//! reconstruction.
//!
//! PRAM releases a table by resampling every cell through a row-stochastic
//! *transition probability matrix* and then shuffling the record order. Two
//! guarantees can be computed in closed form from the matrices alone:
//!
//! * **Pk-anonymity** — no adversary, whatever their prior knowledge over
//!   private tables, can pin a person to a released record with posterior
//!   probability above `1/k` ([`privacy::k_from_matrix`]).
//! * **ε-differential privacy** — changing one input record changes the
//!   release distribution by at most a factor `exp(ε)`
//!   ([`privacy::eps_from_matrix`]).
//!
//! Both calculators are backed by the [`oracle`] module, which recomputes the
//! same quantities by exhaustive enumeration over permutations at small scale,
//! so every closed form in this crate is testable against ground truth.
//!
//! # Example
//!
//! ```
//! use pram::tabular::{AttributeSchema, Table, TableSchema};
//! use pram::transition::{AttributeMatrixSet, RetentionProfile};
//! use pram::mechanism::PramMechanism;
//! use pram::privacy;
//!
//! let schema = TableSchema::new(vec![
//!     AttributeSchema::new("sex", ["male", "female"]).unwrap(),
//! ])
//! .unwrap();
//!
//! // Keep each value with probability 0.5, otherwise redraw uniformly.
//! let profile = RetentionProfile::uniform(0.5, 1).unwrap();
//! let set = AttributeMatrixSet::retention_replacement(schema.clone(), &profile).unwrap();
//!
//! // The guarantees are known before any data is touched.
//! let k = privacy::k_from_matrix_set(&set, 4).unwrap();
//! let eps = privacy::eps_from_matrix_set(&set);
//! assert!((k.value() - (1.0 + 3.0 / 9.0)).abs() < 1e-12);
//! assert!((eps.value().unwrap() - 3f64.ln()).abs() < 1e-12);
//!
//! let table = Table::from_label_rows(
//!     schema,
//!     vec![vec!["male".into()], vec!["male".into()], vec!["female".into()], vec!["male".into()]],
//! )
//! .unwrap();
//! let released = PramMechanism::new(set, 7).anonymize(&table).unwrap();
//! assert_eq!(released.records(), 4);
//! ```

pub mod mechanism;
pub mod oracle;
pub mod privacy;
pub mod reconstruct;
pub mod tabular;
pub mod transition;

mod seed;

pub use mechanism::{AnonymizationTrace, MechanismError, PramMechanism};
pub use privacy::{AnonymityLevel, PrivacyBudget, PrivacyError, PrivacyReport};
pub use tabular::{AttributeSchema, Table, TableSchema, TabularError};
pub use transition::{AttributeMatrixSet, RetentionProfile, TransitionError, TransitionMatrix};
