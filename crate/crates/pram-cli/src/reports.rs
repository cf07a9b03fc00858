//! report, params, and check subcommands.

use std::path::Path;

use pram::privacy::{self, PrivacyReport};
use pram::transition::RetentionProfile;

use crate::emit::{self, Report};
use crate::inputs;
use crate::{CliError, CliResult};

pub fn report_k(matrix_specs: &[String], records: u64) -> CliResult {
    let set = inputs::load_matrix_set(matrix_specs)?;
    let privacy_report = PrivacyReport::from_matrix_set(&set, records)?;
    let mut report = Report::new();
    emit::privacy_lines(&privacy_report, &mut report);
    report.print();
    Ok(())
}

pub fn report_eps(matrix_specs: &[String]) -> CliResult {
    let set = inputs::load_matrix_set(matrix_specs)?;
    let epsilon = privacy::eps_from_matrix_set(&set);
    let mut report = Report::new();
    report.push("epsilon", epsilon);
    report.push("attributes", set.attribute_count());
    report.print();
    Ok(())
}

pub fn params_k_to_rho(k: f64, records: u64, domains: &[usize]) -> CliResult {
    let rho = privacy::solve_rho_from_k(k, records, domains)?;
    print_solution(rho, records, domains)
}

pub fn params_eps_to_rho(eps: f64, domains: &[usize]) -> CliResult {
    let rho = privacy::solve_rho_from_eps(eps, domains)?;
    let mut report = Report::new();
    report.push("rho", rho);
    let profile = RetentionProfile::uniform(rho, domains.len()).map_err(anyhow::Error::from)?;
    report.push("epsilon", privacy::eps_from_rrp(domains, &profile)?);
    report.push("attributes", domains.len());
    report.print();
    Ok(())
}

pub fn params_combine(k: f64, eps: f64, records: u64, domains: &[usize]) -> CliResult {
    let rho = privacy::solve_rho_combined(k, eps, records, domains)?;
    print_solution(rho, records, domains)
}

fn print_solution(rho: f64, records: u64, domains: &[usize]) -> CliResult {
    let profile = RetentionProfile::uniform(rho, domains.len()).map_err(anyhow::Error::from)?;
    let privacy_report = PrivacyReport::from_rrp(domains, &profile, records)?;
    let mut report = Report::new();
    emit::privacy_lines(&privacy_report, &mut report);
    report.print();
    Ok(())
}

pub fn check_k_anonymity(schema_path: &Path, input: &Path, k: u64) -> CliResult {
    let schema = inputs::load_schema(schema_path)?;
    let table = inputs::load_table(input, &schema)?;
    let check = privacy::check_k_anonymity(&table, k);

    let mut report = Report::new();
    report.push("k", check.k);
    report.push("k_anonymous", check.satisfied);
    report.push("min_multiplicity", check.min_multiplicity);
    report.push("records", table.records());
    report.print();

    if check.satisfied {
        Ok(())
    } else {
        let violator = check
            .multiplicities
            .iter()
            .enumerate()
            .min_by_key(|(_, &m)| m)
            .map(|(record, &multiplicity)| (record, multiplicity))
            .expect("tables are non-empty");
        Err(CliError::Verification(format!(
            "record {} occurs {} times, below k = {}",
            violator.0, violator.1, k
        )))
    }
}
