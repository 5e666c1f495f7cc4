//! Command-line front end: run experiments, validate scenarios, compare
//! result streams, and emit plot-ready series.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error, 3 schema or
//! configuration violation, 4 unreadable or unwritable file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use iov_sfdl::credibility::CombinationRule;
use iov_sfdl::error::{Result, SfdlError};
use iov_sfdl::metrics::AccuracyMode;
use iov_sfdl::sim::checkpoint::{load_checkpoints, RoundRecord};
use iov_sfdl::sim::{run_experiment, write_report, Scenario, SimConfig};
use iov_sfdl::Framework;

#[derive(Parser)]
#[command(
    name = "iov-sfdl",
    version,
    about = "Swarm-federated learning simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write round checkpoints plus a summary.
    Run(RunArgs),
    /// Check a scenario file against the schema; silent on success.
    Validate(ValidateArgs),
    /// Compare two or more checkpoint streams round by round.
    Compare(CompareArgs),
    /// Emit columnar series (CSV) from a checkpoint stream.
    PlotData(PlotDataArgs),
}

#[derive(Args)]
struct ScenarioSource {
    /// Scenario file (JSON).
    #[arg(long, env = "IOV_SFDL_SCENARIO")]
    scenario: Option<PathBuf>,
    /// Built-in density preset: high, medium, or low.
    #[arg(long, env = "IOV_SFDL_PRESET", conflicts_with = "scenario")]
    preset: Option<String>,
}

impl ScenarioSource {
    fn load(&self) -> Result<Scenario> {
        match (&self.scenario, &self.preset) {
            (Some(path), None) => Scenario::load(path),
            (None, Some(name)) => Scenario::preset(name),
            _ => Err(SfdlError::invalid(
                "exactly one of --scenario or --preset is required",
            )),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: ScenarioSource,
    /// Frameworks to run, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "sfdl,fed-avg,comm-efficient",
        env = "IOV_SFDL_FRAMEWORKS"
    )]
    frameworks: Vec<String>,
    /// Override the scenario seed.
    #[arg(long, env = "IOV_SFDL_SEED")]
    seed: Option<u64>,
    /// Override the scenario round count.
    #[arg(long, env = "IOV_SFDL_ROUNDS")]
    rounds: Option<usize>,
    /// Output directory for checkpoint streams and the summary.
    #[arg(long, env = "IOV_SFDL_OUT")]
    out: PathBuf,
    /// Credibility combination rule: product, mean, or effectiveness-only.
    #[arg(long, default_value = "product", env = "IOV_SFDL_CREDIBILITY_RULE")]
    credibility_rule: String,
    /// Client fraction for the communication-efficient baseline.
    #[arg(long, env = "IOV_SFDL_FRAC")]
    frac: Option<f64>,
    /// Accuracy classification: per-waypoint or per-trajectory.
    #[arg(long, default_value = "per-waypoint", env = "IOV_SFDL_ACCURACY_MODE")]
    accuracy_mode: String,
}

#[derive(Args)]
struct ValidateArgs {
    /// Scenario file (JSON).
    #[arg(long, env = "IOV_SFDL_SCENARIO")]
    scenario: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Checkpoint streams; the first is the reference.
    #[arg(num_args = 2.., required = true)]
    files: Vec<PathBuf>,
    /// Write the comparison JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotDataArgs {
    /// Checkpoint stream to tabulate.
    file: PathBuf,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Compare(args) => cmd_compare(args),
        Command::PlotData(args) => cmd_plot_data(args),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

fn exit_code(e: &SfdlError) -> i32 {
    match e {
        SfdlError::Schema(_) | SfdlError::Config(_) => 3,
        SfdlError::Io(_) => 4,
        SfdlError::Round { source, .. } => exit_code(source),
        _ => 1,
    }
}

fn parse_frameworks(tags: &[String]) -> Result<Vec<Framework>> {
    tags.iter().map(|t| Framework::from_str(t.trim())).collect()
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut scenario = args.source.load()?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(rounds) = args.rounds {
        scenario.rounds = rounds;
    }
    let frameworks = parse_frameworks(&args.frameworks)?;
    let mut config = SimConfig {
        credibility_rule: CombinationRule::from_str(&args.credibility_rule)?,
        accuracy_mode: AccuracyMode::from_str(&args.accuracy_mode)?,
        ..SimConfig::default()
    };
    if let Some(frac) = args.frac {
        config.frac = frac;
    }

    let report = run_experiment(scenario, &frameworks, config)?;
    write_report(&report, &args.out)?;
    for fw in &report.summary.frameworks {
        println!(
            "{}: rounds={} loss={:.6} prediction_error={:.3}m accuracy={:.3} edge_links={}",
            fw.framework,
            fw.rounds,
            fw.final_loss,
            fw.final_prediction_error,
            fw.final_prediction_accuracy,
            fw.cumulative_links.edge_to_global_links,
        );
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    Scenario::load(&args.scenario)?;
    Ok(())
}

fn load_stream(path: &Path) -> Result<(String, Vec<RoundRecord>)> {
    let records = load_checkpoints(path)?;
    let tag = records
        .first()
        .map(|r| r.framework.clone())
        .ok_or_else(|| SfdlError::invalid(format!("{} holds no records", path.display())))?;
    Ok((tag, records))
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let (ref_tag, ref_records) = load_stream(&args.files[0])?;
    let mut others = Vec::new();
    for path in &args.files[1..] {
        others.push(load_stream(path)?);
    }

    let mut per_round = Vec::new();
    for reference in &ref_records {
        let mut comparisons = Vec::new();
        for (tag, records) in &others {
            if let Some(other) = records.iter().find(|r| r.round == reference.round) {
                comparisons.push(serde_json::json!({
                    "framework": tag,
                    "loss_delta": reference.loss - other.loss,
                    "prediction_error_delta": reference.prediction_error - other.prediction_error,
                    "accuracy_delta": reference.prediction_accuracy - other.prediction_accuracy,
                }));
            }
        }
        per_round.push(serde_json::json!({
            "round": reference.round,
            "reference_loss": reference.loss,
            "reference_prediction_error": reference.prediction_error,
            "comparisons": comparisons,
        }));
    }

    let cumulative = |records: &[RoundRecord]| {
        let links: u64 = records.iter().map(|r| r.links_edge_global).sum();
        let bytes: u64 = records.iter().map(|r| r.bytes_up + r.bytes_down).sum();
        (links, bytes)
    };
    let (ref_links, ref_bytes) = cumulative(&ref_records);
    let reduction = |reference: u64, other: u64| {
        if other == 0 {
            0.0
        } else {
            100.0 * (other as f64 - reference as f64) / other as f64
        }
    };
    let overhead: Vec<_> = others
        .iter()
        .map(|(tag, records)| {
            let (links, bytes) = cumulative(records);
            serde_json::json!({
                "framework": tag,
                "reference_edge_links": ref_links,
                "edge_links": links,
                "edge_link_reduction_pct": reduction(ref_links, links),
                "reference_edge_bytes": ref_bytes,
                "edge_bytes": bytes,
                "edge_byte_reduction_pct": reduction(ref_bytes, bytes),
            })
        })
        .collect();

    let report = serde_json::json!({
        "reference": ref_tag,
        "rounds": ref_records.len(),
        "per_round": per_round,
        "overhead_reduction": overhead,
    });
    let text =
        serde_json::to_string_pretty(&report).map_err(|e| SfdlError::Parse(e.to_string()))? + "\n";
    match &args.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_plot_data(args: PlotDataArgs) -> Result<()> {
    let records = load_checkpoints(&args.file)?;
    if records.is_empty() {
        return Err(SfdlError::invalid(format!(
            "{} holds no records",
            args.file.display()
        )));
    }
    let mut csv = String::from(
        "framework,round,loss,prediction_error,prediction_accuracy,\
         links_intra,links_edge_global,bytes_up,bytes_down\n",
    );
    for r in &records {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.framework,
            r.round,
            r.loss,
            r.prediction_error,
            r.prediction_accuracy,
            r.links_intra,
            r.links_edge_global,
            r.bytes_up,
            r.bytes_down,
        ));
    }
    match &args.out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}
