//! Command-line entry point for the review summarization pipeline.
//!
//! Subcommands mirror the pipeline stages (`induce-aspects` through
//! `summarize` run the pipeline up to that stage, `run` does everything),
//! plus a standalone `evaluate` for scoring a candidate summary file
//! against a reference. Configuration precedence: flags over config file
//! over defaults. Exit codes: 0 success, 1 configuration error, 2 data
//! error, 3 backend error, 4 skip-threshold abort.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aspectsum_core::config::PipelineConfig;
use aspectsum_core::embedding::HashedEmbedder;
use aspectsum_core::metrics::MetricReport;
use aspectsum_core::pipeline::{run_pipeline_until, PipelineError, StageId};

#[derive(Parser)]
#[command(
    name = "aspectsum",
    about = "Aspect-centric, evidence-grounded summarization of product reviews",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    /// Line-delimited JSON review file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory; one subdirectory per product.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// LLM backend kind.
    #[arg(long, value_parser = ["remote", "mock"])]
    backend: Option<String>,
    /// Embedding provider kind.
    #[arg(long, value_parser = ["remote", "hashed-local"])]
    embedder: Option<String>,
    /// Cosine-distance threshold for aspect unification.
    #[arg(long)]
    eps_aspect: Option<f64>,
    /// Cosine-distance threshold for evidence clustering.
    #[arg(long)]
    eps_evidence: Option<f64>,
    /// Minimum samples per cluster.
    #[arg(long)]
    min_samples: Option<usize>,
    /// Evidence budget of the summary.
    #[arg(long)]
    top_n: Option<usize>,
    /// Response cache directory.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Mock backend rule file (line-delimited JSON {match, response}).
    #[arg(long)]
    seed_fixtures: Option<PathBuf>,
    /// Reference summaries for ROUGE (line-delimited JSON
    /// {product_id, text}).
    #[arg(long)]
    references: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Seed the aspect taxonomy for each product's category.
    InduceAspects(PipelineArgs),
    /// Extract aspect/sentiment/evidence arguments from reviews.
    Extract(PipelineArgs),
    /// Unify aspect wording by clustering aspect strings.
    UnifyAspects(PipelineArgs),
    /// Cluster arguments with semantically close evidence.
    ClusterEvidence(PipelineArgs),
    /// Select representatives, score clusters and write the summary.
    Summarize(PipelineArgs),
    /// Run the full pipeline including evaluation.
    Run(PipelineArgs),
    /// Score a candidate summary file against a reference file.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Candidate summary text file.
    #[arg(long)]
    candidate: PathBuf,
    /// Reference summary text file.
    #[arg(long)]
    reference: PathBuf,
    /// Eps for the diversity clustering.
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// Write the metric report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn build_config(args: &PipelineArgs) -> Result<PipelineConfig, PipelineError> {
    let mut config = PipelineConfig::default();
    if let Some(path) = &args.config {
        config
            .apply_file(path)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
    }
    let mut set = |key: &str, value: String| -> Result<(), PipelineError> {
        config
            .set(key, &value)
            .map_err(|e| PipelineError::Config(e.to_string()))
    };
    if let Some(v) = &args.backend {
        set("backend", v.clone())?;
    }
    if let Some(v) = &args.embedder {
        set("embedder", v.clone())?;
    }
    if let Some(v) = args.eps_aspect {
        set("eps_aspect", v.to_string())?;
    }
    if let Some(v) = args.eps_evidence {
        set("eps_evidence", v.to_string())?;
    }
    if let Some(v) = args.min_samples {
        set("min_samples", v.to_string())?;
    }
    if let Some(v) = args.top_n {
        set("top_n", v.to_string())?;
    }
    if let Some(path) = &args.input {
        config.input = Some(path.clone());
    }
    if let Some(path) = &args.out_dir {
        config.out_dir = Some(path.clone());
    }
    if let Some(path) = &args.cache_dir {
        config.cache_dir = Some(path.clone());
    }
    if let Some(path) = &args.seed_fixtures {
        config.seed_fixtures = Some(path.clone());
    }
    if let Some(path) = &args.references {
        config.references = Some(path.clone());
    }
    Ok(config)
}

fn run_stage_command(args: &PipelineArgs, until: StageId) -> Result<(), PipelineError> {
    let config = build_config(args)?;
    let report = run_pipeline_until(&config, until)?;
    for warning in &report.load_warnings {
        eprintln!("warning: {warning}");
    }
    for product in &report.products {
        for warning in &product.manifest.warnings {
            eprintln!("warning: product {}: {warning}", product.product_id);
        }
        match (&product.summary, &product.metrics) {
            (Some(summary), Some(metrics)) => println!(
                "{}: {} evidence piece(s), diversity {}",
                product.product_id,
                summary.items.len(),
                metrics
                    .diversity
                    .map_or("n/a".to_owned(), |d| format!("{d:.3}")),
            ),
            (Some(summary), None) => println!(
                "{}: {} evidence piece(s)",
                product.product_id,
                summary.items.len()
            ),
            _ => println!(
                "{}: completed through {}",
                product.product_id,
                until.name()
            ),
        }
    }
    Ok(())
}

fn read_text(path: &PathBuf) -> Result<String, PipelineError> {
    std::fs::read_to_string(path)
        .map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))
}

fn run_evaluate(args: &EvaluateArgs) -> Result<(), PipelineError> {
    let candidate = read_text(&args.candidate)?;
    let reference = read_text(&args.reference)?;
    for (name, text) in [("candidate", &candidate), ("reference", &reference)] {
        if aspectsum_core::metrics::tokenize(text).len() < 2 {
            eprintln!("warning: {name} has fewer than 2 tokens; ROUGE-2 is 0");
        }
    }
    let provider = HashedEmbedder::new();
    let report = MetricReport::compute(
        candidate.trim(),
        Some(reference.trim()),
        &provider,
        args.eps,
    )
    .map_err(PipelineError::from)?;
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    match &args.out {
        Some(path) => std::fs::write(path, &json)
            .map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?,
        None => print!("{json}"),
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::InduceAspects(args) => run_stage_command(&args, StageId::Induce),
        Command::Extract(args) => run_stage_command(&args, StageId::Extract),
        Command::UnifyAspects(args) => run_stage_command(&args, StageId::UnifyAspects),
        Command::ClusterEvidence(args) => run_stage_command(&args, StageId::ClusterEvidence),
        Command::Summarize(args) => run_stage_command(&args, StageId::Summarize),
        Command::Run(args) => run_stage_command(&args, StageId::Evaluate),
        Command::Evaluate(args) => run_evaluate(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(error.exit_code() as u8)
        }
    }
}
