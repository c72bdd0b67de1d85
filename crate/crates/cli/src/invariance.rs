use anyhow::Result;
use clap::{Args, ValueEnum};
use nosig_core::experiment::{invariance_test, InvarianceConfig, InvarianceReport, RootSampler};
use serde::Serialize;

use crate::output::{csv_bytes, write_bytes, write_json, Format, OutputArgs, SCHEMA_VERSION};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Sampler {
    Uniform,
    /// The smaller of two uniform roots; a non-uniform negative control.
    MinOfTwo,
}

#[derive(Args, Debug)]
pub struct InvarianceArgs {
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    /// Number of bins, a power of two.
    #[arg(long, default_value_t = 256)]
    pub bins: u64,
    #[arg(long)]
    pub seed: u64,
    /// Applications of the baker's map before binning.
    #[arg(long, default_value_t = 1)]
    pub shifts: u64,
    #[arg(long, value_enum, default_value_t = Sampler::Uniform)]
    pub sampler: Sampler,
    /// Uniformity is rejected when the p-value falls below this level.
    #[arg(long, default_value_t = 0.001)]
    pub alpha: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Serialize)]
struct Report<'a> {
    schema_version: u32,
    command: &'static str,
    alpha: f64,
    uniformity_rejected: bool,
    #[serde(flatten)]
    report: &'a InvarianceReport,
}

#[derive(Serialize)]
struct BinRow {
    schema_version: u32,
    bin: usize,
    count: u64,
    expected: f64,
}

pub fn run(args: &InvarianceArgs) -> Result<()> {
    let cfg = InvarianceConfig {
        samples: args.samples,
        bins: args.bins,
        seed: args.seed,
        shifts: args.shifts,
        sampler: match args.sampler {
            Sampler::Uniform => RootSampler::Uniform,
            Sampler::MinOfTwo => RootSampler::MinOfTwo,
        },
    };
    let report = invariance_test(&cfg).map_err(|e| anyhow::anyhow!("--bins/--samples: {e}"))?;
    let rejected = report.chi_square.p_value < args.alpha;
    eprintln!(
        "chi-square {:.3} on {} df, p = {:.4e}: uniformity {}",
        report.chi_square.statistic,
        report.chi_square.df,
        report.chi_square.p_value,
        if rejected { "rejected" } else { "not rejected" }
    );
    let dest = args.output.destination("invariance-test");
    match args.output.format {
        Format::Json => write_json(
            dest.as_deref(),
            &Report {
                schema_version: SCHEMA_VERSION,
                command: "invariance-test",
                alpha: args.alpha,
                uniformity_rejected: rejected,
                report: &report,
            },
        ),
        Format::Csv => {
            let expected = args.samples as f64 / args.bins as f64;
            let rows = report.counts.iter().enumerate().map(|(bin, &count)| BinRow {
                schema_version: SCHEMA_VERSION,
                bin,
                count,
                expected,
            });
            write_bytes(dest.as_deref(), &csv_bytes(rows)?)
        }
    }
}
