//! reconstruct crosstab and experiment trend subcommands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use pram::reconstruct::{self, TrendConfig, VaryParameter};
use pram::tabular::TableSchema;
use rand::Rng;

use crate::inputs;
use crate::CliResult;

pub fn crosstab(
    schema_path: &Path,
    input: &Path,
    attrs: &[String],
    matrix_specs: &[String],
    clip: bool,
    out: Option<&Path>,
) -> CliResult {
    let schema = inputs::load_schema(schema_path)?;
    let table = inputs::load_table(input, &schema)?;
    let names: Vec<&str> = attrs.iter().map(String::as_str).collect();
    let observed = reconstruct::cross_tabulate(&table, &names)?;

    // The matrices describe the selected attributes only, in --attrs order.
    let selected = TableSchema::new(observed.attributes().to_vec()).map_err(anyhow::Error::from)?;
    let set = inputs::load_matrix_set_for_schema(matrix_specs, &selected)?;
    let estimated = reconstruct::reconstruct_inversion(&observed, &set, clip)?;

    let mut csv = String::new();
    csv.push_str(&attrs.join(","));
    csv.push_str(",observed,estimate\n");
    for (cell, (&count, &estimate)) in observed
        .counts()
        .iter()
        .zip(estimated.estimates())
        .enumerate()
    {
        csv.push_str(&observed.cell_labels(cell).join(","));
        csv.push_str(&format!(",{count},{estimate}\n"));
    }

    match out {
        Some(path) => {
            fs::write(path, &csv).with_context(|| format!("writing crosstab {}", path.display()))?
        }
        None => print!("{csv}"),
    }
    eprintln!(
        "tabulated {} records into {} cells (method {}, clipped: {})",
        table.records(),
        observed.counts().len(),
        estimated.method,
        estimated.negatives_clipped
    );
    Ok(())
}

#[derive(Args)]
pub struct TrendArgs {
    /// Which knob to sweep.
    #[arg(long, value_enum)]
    pub vary: VaryArg,
    /// Comma-separated grid values for the varied knob.
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<f64>,
    /// Record count when not varied.
    #[arg(long, default_value_t = 10_000)]
    pub records: u64,
    /// Attribute domain sizes; attribute sweeps use prefixes.
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 5, 10, 3])]
    pub domains: Vec<usize>,
    /// Anonymity target when not varied.
    #[arg(long, default_value_t = 2.0)]
    pub k: f64,
    /// Repetitions per grid point.
    #[arg(long, default_value_t = 20)]
    pub seeds: u32,
    /// Skew of the synthetic categorical distribution (0 = uniform).
    #[arg(long, default_value_t = 1.0)]
    pub zipf: f64,
    /// Master seed; drawn at random and reported when absent.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, clap::ValueEnum)]
pub enum VaryArg {
    Records,
    Attrs,
    K,
}

pub fn trend(args: TrendArgs) -> CliResult {
    let config = TrendConfig {
        vary: match args.vary {
            VaryArg::Records => VaryParameter::Records,
            VaryArg::Attrs => VaryParameter::Attributes,
            VaryArg::K => VaryParameter::K,
        },
        grid: args.grid.clone(),
        records: args.records,
        domains: args.domains.clone(),
        k_target: args.k,
        seeds: args.seeds,
        zipf_exponent: args.zipf,
    };
    let seed = args.seed.unwrap_or_else(|| rand::rng().random());
    let points = reconstruct::run_trend_experiment(&config, seed)?;

    let mut csv = String::from("varied_value,rho,epsilon,k,mean_l1,stderr_l1\n");
    for p in &points {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.varied, p.rho, p.epsilon, p.k, p.mean_l1, p.stderr_l1
        ));
    }
    fs::write(&args.out, &csv)
        .with_context(|| format!("writing trend results {}", args.out.display()))?;

    let mut stderr = std::io::stderr().lock();
    let _ = writeln!(stderr, "seed={seed}");
    for p in &points {
        let _ = writeln!(
            stderr,
            "varied {:>10}: rho {:.4} epsilon {:.4} k {:.4} mean_l1 {:.5} ± {:.5}",
            p.varied, p.rho, p.epsilon, p.k, p.mean_l1, p.stderr_l1
        );
    }
    Ok(())
}
