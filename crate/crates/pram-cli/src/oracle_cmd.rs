//! oracle subcommands: estimate, verify-k, verify-eps, audit.

use std::path::Path;

use pram::oracle::{self, BackgroundKnowledge, EstimationQuery};
use pram::privacy;

use crate::emit::Report;
use crate::inputs;
use crate::{CliError, CliResult};

pub fn estimate(
    schema_path: &Path,
    private_path: &Path,
    released_path: &Path,
    matrix_specs: &[String],
    source_record: usize,
    target_record: usize,
    limit: Option<usize>,
) -> CliResult {
    let schema = inputs::load_schema(schema_path)?;
    let private = inputs::load_table(private_path, &schema)?;
    let released = inputs::load_table(released_path, &schema)?;
    let set = inputs::load_matrix_set_for_schema(matrix_specs, &schema)?;
    let limit = inputs::brute_force_limit(limit)?;

    let knowledge = BackgroundKnowledge::point_mass(private);
    let query = EstimationQuery {
        knowledge: &knowledge,
        released: &released,
        source: source_record,
        target: target_record,
    };
    let probability = oracle::estimation_probability_with_limit(&query, &set, limit)?;

    let mut report = Report::new();
    report.push("estimation", probability);
    report.push("source_record", source_record);
    report.push("target_record", target_record);
    report.push("records", released.records());
    report.print();
    Ok(())
}

pub fn verify_k(
    matrix_specs: &[String],
    records: usize,
    trials: usize,
    seed: u64,
    limit: Option<usize>,
) -> CliResult {
    let set = inputs::load_matrix_set(matrix_specs)?;
    let limit = inputs::brute_force_limit(limit)?;
    let closed_form = privacy::k_from_matrix_set(&set, records as u64)
        .map_err(anyhow::Error::from)?
        .value();
    let search = oracle::max_estimation_search_with_limit(&set, records, trials, seed, limit)?;
    let k_oracle = 1.0 / search.probability;
    let matches = (k_oracle - closed_form).abs() <= 1e-9 * closed_form;

    let mut report = Report::new();
    report.push("max_estimation", search.probability);
    report.push("k_oracle", k_oracle);
    report.push("k_closed_form", closed_form);
    report.push("random_trials", search.random_trials);
    report.push("random_max", search.random_max);
    report.push("match", matches);
    report.print();
    eprintln!(
        "worst case: private record holds {:?} among {:?}, released {:?} among {:?}",
        search.witness.source_value,
        search.witness.fill_value,
        search.witness.source_released,
        search.witness.fill_released
    );

    if matches {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "oracle k {k_oracle} disagrees with closed form {closed_form}"
        )))
    }
}

pub fn verify_eps(matrix_specs: &[String], records: usize) -> CliResult {
    let set = inputs::load_matrix_set(matrix_specs)?;
    let claimed = privacy::eps_from_matrix_set(&set);
    let check = oracle::dp_ratio_check(&set, records, claimed)?;

    let mut report = Report::new();
    report.push("epsilon_closed_form", claimed);
    report.push("max_ratio", check.max_ratio);
    report.push("bound", check.bound);
    report.push("pass", check.passes);
    report.print();

    if check.passes {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "ratio {} exceeds bound {} at tables {:?} vs {:?}, release {:?}",
            check.max_ratio,
            check.bound,
            check.witness.left,
            check.witness.right,
            check.witness.released
        )))
    }
}

pub fn audit(
    matrix_specs: &[String],
    records: usize,
    trials: usize,
    seed: u64,
    limit: Option<usize>,
) -> CliResult {
    let set = inputs::load_matrix_set(matrix_specs)?;
    let limit = inputs::brute_force_limit(limit)?;
    let audit = oracle::pk_bound_audit_with_limit(&set, records, trials, seed, limit)?;

    let mut report = Report::new();
    report.push("trials", audit.trials);
    report.push("max_estimation", audit.max_estimation);
    report.push("bound", audit.bound);
    report.push("pass", audit.passes);
    report.print();

    if audit.passes {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "observed estimation probability {} above 1/k = {}",
            audit.max_estimation, audit.bound
        )))
    }
}
