//! The anonymize subcommand: resolve a retention probability, randomize,
//! and leave a reproducible trail (report + manifest).

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use pram::mechanism::PramMechanism;
use pram::privacy::{self, PrivacyReport};
use pram::tabular;
use pram::transition::{AttributeMatrixSet, RetentionProfile};
use rand::Rng;

use crate::emit::{self, Report};
use crate::inputs;
use crate::{AnonymizeArgs, CliResult};

enum Mode {
    Direct(f64),
    FromK(f64),
    FromEps(f64),
    FromBoth(f64, f64),
}

impl Mode {
    fn resolve(args: &AnonymizeArgs) -> anyhow::Result<Mode> {
        match (args.rho, args.k, args.eps) {
            (Some(rho), None, None) => Ok(Mode::Direct(rho)),
            (None, Some(k), None) => Ok(Mode::FromK(k)),
            (None, None, Some(eps)) => Ok(Mode::FromEps(eps)),
            (None, Some(k), Some(eps)) => Ok(Mode::FromBoth(k, eps)),
            _ => bail!("choose exactly one of --rho, --k, --eps, or --k with --eps"),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Mode::Direct(_) => "rho",
            Mode::FromK(_) => "k",
            Mode::FromEps(_) => "eps",
            Mode::FromBoth(..) => "k+eps",
        }
    }
}

fn resolve_rho(mode: &Mode, records: u64, domains: &[usize]) -> anyhow::Result<f64> {
    Ok(match *mode {
        Mode::Direct(rho) => {
            if !(0.0..=1.0).contains(&rho) {
                bail!("--rho {rho} is outside [0, 1]");
            }
            rho
        }
        Mode::FromK(k) => privacy::solve_rho_from_k(k, records, domains)?,
        Mode::FromEps(eps) => privacy::solve_rho_from_eps(eps, domains)?,
        Mode::FromBoth(k, eps) => privacy::solve_rho_combined(k, eps, records, domains)?,
    })
}

pub fn run(args: AnonymizeArgs) -> CliResult {
    let schema = inputs::load_schema(&args.schema)?;
    let table = inputs::load_table(&args.input, &schema)?;
    let records = table.records() as u64;
    let domains = schema.domain_sizes();

    let mode = Mode::resolve(&args)?;
    let rho = resolve_rho(&mode, records, &domains)?;

    let seed = args.seed.unwrap_or_else(|| rand::rng().random());
    let profile = RetentionProfile::uniform(rho, domains.len())?;
    let set = AttributeMatrixSet::retention_replacement(schema.clone(), &profile)?;
    let released = PramMechanism::new(set, seed).anonymize(&table)?;

    let mut bytes = Vec::new();
    tabular::emit_table(&released, &mut bytes)?;
    fs::write(&args.output, &bytes)
        .with_context(|| format!("writing released table {}", args.output.display()))?;

    let privacy_report = PrivacyReport::from_rrp(&domains, &profile, records)?;
    let mut report = Report::new();
    report.push("seed", seed);
    emit::privacy_lines(&privacy_report, &mut report);
    report.print();
    if let Some(path) = &args.report {
        fs::write(path, report.render())
            .with_context(|| format!("writing report {}", path.display()))?;
    }

    let manifest_path: PathBuf = args.manifest.clone().unwrap_or_else(|| {
        let mut p = args.output.as_os_str().to_owned();
        p.push(".manifest");
        PathBuf::from(p)
    });
    let mut manifest = Report::new();
    manifest.push("manifest_version", 1);
    manifest.push("tool_version", env!("CARGO_PKG_VERSION"));
    manifest.push("command", "anonymize");
    manifest.push("schema", args.schema.display());
    manifest.push("input", args.input.display());
    manifest.push("output", args.output.display());
    manifest.push("mode", mode.name());
    if let Some(k) = args.k {
        manifest.push("k_target", k);
    }
    if let Some(eps) = args.eps {
        manifest.push("eps_target", eps);
    }
    manifest.push("rho", rho);
    manifest.push("seed", seed);
    manifest.push("records", records);
    manifest.push("attributes", domains.len());
    fs::write(&manifest_path, manifest.render())
        .with_context(|| format!("writing manifest {}", manifest_path.display()))?;

    eprintln!(
        "released {} records to {} (rho {:.6}, k {:.6}, epsilon {}, seed {})",
        records,
        args.output.display(),
        rho,
        privacy_report.k.value(),
        privacy_report.epsilon,
        seed
    );
    Ok(())
}
