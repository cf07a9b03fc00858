//! The line-oriented `key=value` report format. Keys are stable; values use
//! Rust's shortest round-trip float formatting, so a reported rho can be fed
//! back on the command line without precision loss.

use std::fmt::Display;
use std::fmt::Write as _;

use pram::privacy::PrivacyReport;

#[derive(Default)]
pub struct Report {
    lines: String,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl Display) -> &mut Self {
        let _ = writeln!(self.lines, "{key}={value}");
        self
    }

    pub fn render(&self) -> &str {
        &self.lines
    }

    pub fn print(&self) {
        print!("{}", self.lines);
    }
}

/// The stable report keys for a privacy report: rho (when RRP), k, epsilon,
/// records, attributes, and one ar_I per attribute.
pub fn privacy_lines(report: &PrivacyReport, out: &mut Report) {
    if let Some(rhos) = &report.rhos {
        if let Some(first) = rhos.first() {
            if rhos.iter().all(|r| r == first) {
                out.push("rho", first);
            }
        }
        for (i, rho) in rhos.iter().enumerate() {
            out.push(&format!("rho_{i}"), rho);
        }
    }
    out.push("k", report.k.value());
    out.push("epsilon", report.epsilon);
    out.push("records", report.records);
    out.push("attributes", report.domains.len());
    for (i, ar) in report.anonymity_ratios.iter().enumerate() {
        out.push(&format!("ar_{i}"), ar);
    }
}
