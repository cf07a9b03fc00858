//! Cross-checks between the closed-form calculators and the brute-force
//! oracle: tightness of the anonymity bound, equivalence with classical
//! k-anonymity for deterministic mechanisms, the narrowing-down property,
//! and the differential-privacy ratio.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use pram::oracle::{self, BackgroundKnowledge, EstimationQuery};
use pram::privacy;
use pram::tabular::{Table, TableSchema};
use pram::transition::{AttributeMatrixSet, TransitionMatrix};

/// Random strictly positive row-stochastic matrix: each entry at least
/// `floor` of the row mass before normalization.
fn random_positive_matrix(rng: &mut ChaCha12Rng, size: usize) -> TransitionMatrix {
    let rows = (0..size)
        .map(|_| {
            let raw: Vec<f64> = (0..size).map(|_| 0.05 + rng.random::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / total).collect()
        })
        .collect();
    TransitionMatrix::from_rows_with_tolerance(rows, 1e-9).unwrap()
}

fn single_attribute_set(matrix: TransitionMatrix) -> AttributeMatrixSet {
    let schema = TableSchema::with_generic_labels(&[matrix.size()]).unwrap();
    AttributeMatrixSet::new(schema, vec![matrix]).unwrap()
}

#[test]
fn worst_case_search_is_tight_against_closed_form() {
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    for trial in 0..40 {
        let size = 2 + trial % 2;
        let records = 2 + trial % 4;
        let matrix = random_positive_matrix(&mut rng, size);
        let k = privacy::k_from_matrix(&matrix, records as u64)
            .unwrap()
            .value();
        let set = single_attribute_set(matrix);
        let search = oracle::max_estimation_search(&set, records, 20, trial as u64).unwrap();
        assert!(
            (search.probability - 1.0 / k).abs() < 1e-9,
            "trial {trial}: max E {} vs 1/k {}",
            search.probability,
            1.0 / k
        );
    }
}

#[test]
fn deterministic_mechanisms_match_classical_k_anonymity() {
    let mut rng = ChaCha12Rng::seed_from_u64(17);
    for trial in 0..60 {
        let domains: Vec<usize> = if trial % 2 == 0 { vec![3] } else { vec![2, 2] };
        let schema = TableSchema::with_generic_labels(&domains).unwrap();
        let records = 1 + rng.random_range(0..8);

        // A deterministic value mapping g : V -> V, arbitrary per tuple.
        let mut tuples = vec![vec![]];
        for &m in &domains {
            tuples = tuples
                .into_iter()
                .flat_map(|t: Vec<usize>| {
                    (0..m).map(move |v| {
                        let mut t = t.clone();
                        t.push(v);
                        t
                    })
                })
                .collect();
        }
        let mapping: Vec<Vec<usize>> = (0..tuples.len())
            .map(|_| tuples[rng.random_range(0..tuples.len())].clone())
            .collect();

        let rows: Vec<Vec<usize>> = (0..records)
            .map(|_| {
                let tuple = &tuples[rng.random_range(0..tuples.len())];
                let flat = schema.flat_index(tuple);
                mapping[flat].clone()
            })
            .collect();
        let released = Table::from_index_rows(schema, rows).unwrap();

        let oracle_k = oracle::pk_level_deterministic(&released).value();
        let classical_k = (1..=records as u64)
            .rev()
            .find(|&k| privacy::check_k_anonymity(&released, k).satisfied)
            .unwrap();
        assert_eq!(oracle_k, classical_k as f64, "trial {trial}");
    }
}

#[test]
fn narrowing_down_property() {
    // Choosing floor(k - 1) released records still leaves at least 1/k
    // probability that the target is elsewhere: the chosen posteriors sum to
    // at most 1 - 1/k.
    let mut rng = ChaCha12Rng::seed_from_u64(23);
    for trial in 0..30 {
        let size = 2 + trial % 2;
        let records = 4 + trial % 3;
        // Mild randomization keeps k comfortably above 2.
        let rho = 0.05 + 0.1 * rng.random::<f64>();
        let matrix = TransitionMatrix::retention_replacement(size, rho).unwrap();
        let k = privacy::k_from_matrix(&matrix, records as u64)
            .unwrap()
            .value();
        let set = single_attribute_set(matrix);
        let chosen = (k - 1.0).floor() as usize;
        assert!(chosen >= 1, "configuration too sharp for the test");

        let schema = set.schema().clone();
        let random_table = |rng: &mut ChaCha12Rng| {
            let rows = (0..records)
                .map(|_| vec![rng.random_range(0..size)])
                .collect();
            Table::from_index_rows(schema.clone(), rows).unwrap()
        };
        let private = random_table(&mut rng);
        let released = random_table(&mut rng);
        let knowledge = BackgroundKnowledge::point_mass(private);
        let source = rng.random_range(0..records);

        let mut posteriors: Vec<f64> = (0..records)
            .map(|target| {
                let query = EstimationQuery {
                    knowledge: &knowledge,
                    released: &released,
                    source,
                    target,
                };
                oracle::estimation_probability(&query, &set).unwrap()
            })
            .collect();
        posteriors.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let top_sum: f64 = posteriors[..chosen].iter().sum();
        assert!(
            top_sum <= 1.0 - 1.0 / k + 1e-9,
            "trial {trial}: sum of top {chosen} posteriors {top_sum} vs 1 - 1/k = {}",
            1.0 - 1.0 / k
        );
    }
}

#[test]
fn narrowing_down_is_exact_for_uniform_matrices() {
    let set = single_attribute_set(TransitionMatrix::retention_replacement(3, 0.0).unwrap());
    let records = 5;
    let schema = set.schema().clone();
    let table =
        Table::from_index_rows(schema, vec![vec![0], vec![1], vec![2], vec![0], vec![1]]).unwrap();
    let knowledge = BackgroundKnowledge::point_mass(table.clone());
    let k = privacy::k_from_matrix_set(&set, records as u64)
        .unwrap()
        .value();
    assert_eq!(k, records as f64);
    let sum: f64 = (0..records - 1)
        .map(|target| {
            let query = EstimationQuery {
                knowledge: &knowledge,
                released: &table,
                source: 0,
                target,
            };
            oracle::estimation_probability(&query, &set).unwrap()
        })
        .sum();
    assert!((sum - (1.0 - 1.0 / k)).abs() < 1e-12);
}

#[test]
fn dp_ratio_never_exceeds_the_claimed_budget() {
    let mut rng = ChaCha12Rng::seed_from_u64(29);
    for trial in 0..25 {
        let size = 2 + trial % 2;
        let records = 1 + trial % 3;
        let matrix = random_positive_matrix(&mut rng, size);
        let set = single_attribute_set(matrix);
        let claimed = privacy::eps_from_matrix_set(&set);
        let check = oracle::dp_ratio_check(&set, records, claimed).unwrap();
        assert!(
            check.passes,
            "trial {trial}: ratio {} above bound {}",
            check.max_ratio, check.bound
        );
        if records == 1 {
            assert!(
                check.max_ratio >= check.bound - 1e-9,
                "trial {trial}: single-record pairs attain the bound"
            );
        }
    }
}

#[test]
fn randomized_audits_respect_the_anonymity_bound() {
    let mut rng = ChaCha12Rng::seed_from_u64(31);
    for trial in 0..10 {
        let size = 2 + trial % 2;
        let records = 2 + trial % 4;
        let matrix = random_positive_matrix(&mut rng, size);
        let set = single_attribute_set(matrix);
        let audit = oracle::pk_bound_audit(&set, records, 100, trial as u64).unwrap();
        assert!(audit.passes, "trial {trial}: {audit:?}");
    }
}
