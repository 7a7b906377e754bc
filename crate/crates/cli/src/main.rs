use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use factreason_cli::dataset::{load_dataset, DatasetFormat};
use factreason_cli::experiment::{run_experiment, Assessor, RunConfig};
use factreason_cli::report::{canonical_json, render, ReportFormat};
use factreason_core::cache::{Cache, CachedTransport};
use factreason_core::llm::{ChatTransport, HttpTransport, LimitedTransport, LlmClient, LlmConfig};
use factreason_core::model_builder::FrVariant;
use factreason_core::pipeline::{infer, Engine, InferenceConfig, PipelineConfig, Services};
use factreason_core::retrieval::{
    CachedRetriever, FixtureRetriever, Retriever, RetrieverConfig, RetrieverSource, SerperRetriever, WikipediaRetriever,
};

#[derive(Parser)]
#[command(name = "factreason", about = "Factuality assessment of long-form text")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assess every entry of a dataset and write a report.
    Assess(Box<AssessArgs>),
    /// Run inference on a model in UAI format.
    Infer(InferArgs),
    /// Print the version.
    Version,
}

#[derive(Clone, Copy, ValueEnum)]
enum RetrieverArg {
    Wikipedia,
    Web,
    Fixture,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Auto,
    Exact,
    Wmb,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Auto => Engine::Auto,
            EngineArg::Exact => Engine::Exact,
            EngineArg::Wmb => Engine::Wmb,
        }
    }
}

#[derive(clap::Args)]
struct AssessArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    format: DatasetFormat,
    #[arg(long, value_enum)]
    assessor: Assessor,
    /// Supported-atom count at which recall saturates.
    #[arg(long = "K", default_value_t = 22)]
    recall_k: usize,
    #[arg(long, value_enum, default_value = "wikipedia")]
    retriever: RetrieverArg,
    /// Results kept per retrieval query. Defaults to 3 for Wikipedia and 5
    /// otherwise.
    #[arg(long)]
    k: Option<usize>,
    /// JSON file mapping queries to search hits, for `--retriever fixture`.
    #[arg(long)]
    fixture: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    atom_prior: f64,
    /// Overrides the prior of every context.
    #[arg(long)]
    context_prior: Option<f64>,
    #[arg(long, value_enum, default_value = "auto")]
    engine: EngineArg,
    #[arg(long, default_value_t = 6)]
    ibound: usize,
    /// Full chat-completions URL. The key is read from FACTREASON_LLM_KEY.
    #[arg(long)]
    llm_endpoint: String,
    #[arg(long)]
    llm_model: String,
    /// Model for relation judgments and prompt-based assessors, if it
    /// differs from `--llm-model`.
    #[arg(long)]
    evaluator_model: Option<String>,
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    concurrency: usize,
    #[arg(long, default_value_t = 3)]
    max_retries: u32,
    /// Name shown in reports; defaults to the input file stem.
    #[arg(long)]
    dataset_name: Option<String>,
    /// Report path; stdout if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    report_format: ReportFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum Query {
    Marginals,
}

#[derive(clap::Args)]
struct InferArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum, default_value = "marginals")]
    query: Query,
    #[arg(long, value_enum, default_value = "auto")]
    engine: EngineArg,
    #[arg(long, default_value_t = 6)]
    ibound: usize,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
}

fn build_retriever(args: &AssessArgs, cache: Option<&Cache>) -> Result<Arc<dyn Retriever>> {
    fn wrap<R: Retriever + 'static>(r: R, cache: Option<&Cache>) -> Arc<dyn Retriever> {
        match cache {
            Some(c) => Arc::new(CachedRetriever::new(r, c.clone())),
            None => Arc::new(r),
        }
    }
    Ok(match args.retriever {
        RetrieverArg::Wikipedia => wrap(WikipediaRetriever::new(args.max_retries)?, cache),
        RetrieverArg::Web => wrap(SerperRetriever::from_env(args.max_retries)?, cache),
        RetrieverArg::Fixture => {
            let path = args.fixture.as_ref().context("--retriever fixture needs --fixture")?;
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            Arc::new(FixtureRetriever::from_json(&text)?)
        }
    })
}

fn assess(args: AssessArgs) -> Result<()> {
    let source = match args.retriever {
        RetrieverArg::Wikipedia => RetrieverSource::Wikipedia,
        RetrieverArg::Web => RetrieverSource::WebSearch,
        RetrieverArg::Fixture => RetrieverSource::CachedFixture,
    };
    let retriever_config = match args.k {
        Some(k) => RetrieverConfig::new(source, k)?,
        None => RetrieverConfig::default_for(source),
    };
    let mut pipeline = PipelineConfig::new(FrVariant::Fr2, retriever_config);
    pipeline.atom_prior = args.atom_prior;
    pipeline.context_prior = args.context_prior;
    pipeline.inference = InferenceConfig {
        engine: args.engine.into(),
        i_bound: args.ibound,
        seed: args.seed,
        ..InferenceConfig::default()
    };
    pipeline.concurrency = args.concurrency.max(1);
    let dataset = args.dataset_name.clone().unwrap_or_else(|| {
        args.input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let config = RunConfig::new(args.assessor, dataset, args.recall_k, pipeline);
    config.validate()?;

    let entries = load_dataset(&args.input, args.format)?;
    let cache = args.cache.as_ref().map(Cache::new);
    let http = LimitedTransport::new(
        HttpTransport::new(&args.llm_endpoint, args.max_retries)?,
        args.concurrency,
    );
    let transport: Arc<dyn ChatTransport> = match &cache {
        Some(c) => Arc::new(CachedTransport::new(http, c.clone())),
        None => Arc::new(http),
    };
    let client = LlmClient::new(transport.clone(), LlmConfig::new(&args.llm_model));
    let mut services = Services::shared(client, build_retriever(&args, cache.as_ref())?);
    if let Some(m) = &args.evaluator_model {
        services.evaluator = LlmClient::new(transport, LlmConfig::new(m));
    }

    let report = run_experiment(&entries, &config, &services).map_err(|e| {
        if matches!(e.root(), factreason_core::Error::Quota(_)) {
            anyhow::anyhow!("{e}\nthe run stopped; re-run with the same --cache to resume")
        } else {
            e.into()
        }
    })?;
    if report.aggregate.failed > 0 {
        log::warn!(
            "{} of {} entries failed: {}",
            report.aggregate.failed,
            report.aggregate.entries,
            report.aggregate.failed_ids.join(", ")
        );
    }
    let text = render(std::slice::from_ref(&report), args.report_format)?;
    emit(args.output.as_deref(), &text)
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct MarginalsOut {
    engine: Engine,
    exact: bool,
    induced_width: usize,
    log_z: f64,
    log_z_upper: Option<f64>,
    /// `(name, P(false), P(true))` per variable.
    marginals: Vec<(String, f64, f64)>,
}

fn run_infer(args: InferArgs) -> Result<()> {
    let Query::Marginals = args.query;
    let text = std::fs::read_to_string(&args.model).with_context(|| format!("cannot read {}", args.model.display()))?;
    let model = factreason_pgm::read_uai(&text)?;
    if args.ibound < 1 {
        bail!("--ibound must be at least 1");
    }
    let config = InferenceConfig {
        engine: args.engine.into(),
        i_bound: args.ibound,
        iterations: args.iterations,
        ..InferenceConfig::default()
    };
    let (result, summary) = infer(&model, &config)?;
    let out = MarginalsOut {
        engine: summary.engine,
        exact: summary.exact,
        induced_width: summary.induced_width,
        log_z: summary.log_z,
        log_z_upper: summary.log_z_upper,
        marginals: model
            .variables
            .iter()
            .map(|v| {
                let [f, t] = result.marginals.get(v.id);
                (v.name.clone(), f, t)
            })
            .collect(),
    };
    emit(None, &canonical_json(&out)?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Assess(args) => assess(*args),
        Command::Infer(args) => run_infer(args),
        Command::Version => {
            println!("factreason {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
