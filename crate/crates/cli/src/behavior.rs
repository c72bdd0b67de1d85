use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use clap::Args;
use nosig_core::behavior::{
    check_fns, check_functional_locality_equivalence, check_no_signaling, functions_from_deterministic,
    is_deterministic_extremal, Behavior, BehaviorFile, FnsVerdict, LocalityReport, NsVerdict, ENUMERATION_BUDGET,
};
use serde::Serialize;

use crate::output::{csv_bytes, write_bytes, write_json, Format, OutputArgs, SCHEMA_VERSION};

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Behavior JSON file.
    pub path: PathBuf,
    /// Absolute tolerance for floating-point tables (exact tables ignore it).
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    /// Check the marginals of every proper subset of parties, not just single parties.
    #[arg(long)]
    pub strict: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Serialize)]
struct VerifyConfig<'a> {
    path: &'a PathBuf,
    tolerance: f64,
    strict: bool,
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    schema_version: u32,
    command: &'static str,
    config: VerifyConfig<'a>,
    parties: usize,
    inputs: &'a [usize],
    outputs: &'a [usize],
    exact: bool,
    no_signaling: NsVerdict,
    deterministic: bool,
    /// Present only for deterministic behaviors.
    fns: Option<FnsVerdict>,
    summary: String,
}

#[derive(Serialize)]
struct ViolationRow {
    schema_version: u32,
    parties: String,
    inputs: String,
    outputs: String,
    reference_x: String,
    other_x: String,
    reference_value: String,
    other_value: String,
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// Returns whether the behavior is no-signaling.
pub fn verify(args: &VerifyArgs) -> Result<bool> {
    let text = fs::read_to_string(&args.path).with_context(|| format!("reading {}", args.path.display()))?;
    let file: BehaviorFile = serde_json::from_str(&text)
        .map_err(|e| anyhow!("malformed behavior file {}: {e}", args.path.display()))?;
    let behavior = Behavior::try_from(file).map_err(|e| anyhow!("invalid behavior in {}: {e}", args.path.display()))?;
    behavior
        .validate(args.tolerance)
        .map_err(|e| anyhow!("invalid behavior in {}: {e}", args.path.display()))?;

    let ns = check_no_signaling(&behavior, args.tolerance, args.strict)?;
    let deterministic = is_deterministic_extremal(&behavior, args.tolerance);
    let fns = if deterministic {
        Some(check_fns(&functions_from_deterministic(&behavior, args.tolerance)?))
    } else {
        None
    };

    let mut summary = format!(
        "NS: {}, deterministic: {}",
        if ns.pass { "pass" } else { "FAIL" },
        if deterministic { "yes" } else { "no" }
    );
    if let Some(f) = &fns {
        summary.push_str(if f.pass { ", FNS: pass" } else { ", FNS: FAIL" });
    }
    if let Some(v) = ns.violations.first() {
        summary.push_str(&format!(
            "; marginal of parties [{}] for inputs [{}] outputs [{}] is {} at x = [{}] but {} at x = [{}]",
            join(&v.parties),
            join(&v.inputs),
            join(&v.outputs),
            v.reference_value,
            join(&v.reference_x),
            v.other_value,
            join(&v.other_x)
        ));
    }
    eprintln!("{summary}");

    let out = &args.output;
    match out.format {
        Format::Json => {
            let report = VerifyReport {
                schema_version: SCHEMA_VERSION,
                command: "verify-behavior",
                config: VerifyConfig { path: &args.path, tolerance: args.tolerance, strict: args.strict },
                parties: behavior.parties(),
                inputs: behavior.input_sizes(),
                outputs: behavior.output_sizes(),
                exact: behavior.is_exact(),
                no_signaling: ns.clone(),
                deterministic,
                fns,
                summary,
            };
            write_json(out.destination("verify-behavior").as_deref(), &report)?;
        }
        Format::Csv => {
            let rows = ns.violations.iter().map(|v| ViolationRow {
                schema_version: SCHEMA_VERSION,
                parties: join(&v.parties),
                inputs: join(&v.inputs),
                outputs: join(&v.outputs),
                reference_x: join(&v.reference_x),
                other_x: join(&v.other_x),
                reference_value: v.reference_value.clone(),
                other_value: v.other_value.clone(),
            });
            let mut bytes = csv_bytes(rows)?;
            if bytes.is_empty() {
                bytes = b"schema_version,parties,inputs,outputs,reference_x,other_x,reference_value,other_value\n".to_vec();
            }
            write_bytes(out.destination("verify-behavior").as_deref(), &bytes)?;
        }
    }
    Ok(ns.pass)
}

#[derive(Args, Debug)]
pub struct EnumerateArgs {
    /// Input alphabet sizes, one per party, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub inputs: Vec<usize>,
    /// Output alphabet sizes; defaults to binary outputs for every party.
    #[arg(long, value_delimiter = ',')]
    pub outputs: Option<Vec<usize>>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Serialize)]
struct EnumerateReport {
    schema_version: u32,
    command: &'static str,
    budget: u64,
    #[serde(flatten)]
    report: LocalityReport,
}

#[derive(Serialize)]
struct EnumerateRow {
    schema_version: u32,
    inputs: String,
    outputs: String,
    total: u64,
    fns_count: u64,
    factored_count: u64,
    equal: bool,
}

/// Returns whether the FNS tuples coincide with the factored ones.
pub fn enumerate(args: &EnumerateArgs) -> Result<bool> {
    let outputs = args.outputs.clone().unwrap_or_else(|| vec![2; args.inputs.len()]);
    let report = check_functional_locality_equivalence(&args.inputs, &outputs)?;
    eprintln!(
        "total {}, FNS {}, factored {}, equal: {}",
        report.total, report.fns_count, report.factored_count, report.equal
    );
    let equal = report.equal;
    let dest = args.output.destination("enumerate-fns");
    match args.output.format {
        Format::Json => write_json(
            dest.as_deref(),
            &EnumerateReport { schema_version: SCHEMA_VERSION, command: "enumerate-fns", budget: ENUMERATION_BUDGET, report },
        )?,
        Format::Csv => {
            let row = EnumerateRow {
                schema_version: SCHEMA_VERSION,
                inputs: join(&report.inputs),
                outputs: join(&report.outputs),
                total: report.total,
                fns_count: report.fns_count,
                factored_count: report.factored_count,
                equal: report.equal,
            };
            write_bytes(dest.as_deref(), &csv_bytes([row])?)?;
        }
    }
    Ok(equal)
}
