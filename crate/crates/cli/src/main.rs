//! Command-line entry point: task generation, plan execution, avg@n
//! evaluation, rollout-group collection and trace statistics.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{BackendKind, OrchestratorKind, RunConfig};
use maestro::backend::{ChatBackend, EchoBackend, ScriptedBackend};
use maestro::bench::{self, Axis, BenchInstance, Split};
use maestro::cost::{merge_ledgers, CostLedger, PriceTable};
use maestro::executor::{ExecOptions, Executor};
use maestro::protocol::DomLevel;
use maestro::records::{read_jsonl, FileHeader, JsonlWriter};
use maestro::retrieval::Bm25Retriever;
use maestro::rollout::{
    collect_group, render_report, ChatOrchestrator, OrchestratorBackend, SampleRun,
    ScriptedOrchestrator,
};
use maestro::templates::PromptTemplates;
use maestro::util::derive_seed;

#[derive(Parser)]
#[command(name = "maestro", version, about = "Multi-agent orchestration runtime and benchmark toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate benchmark instances with exact ground truth.
    Gen(GenArgs),
    /// Execute one orchestration per instance and write traces.
    Run(PipelineArgs),
    /// avg@n evaluation: n independent samples per instance plus a report.
    Eval(EvalArgs),
    /// Collect K-sample rollout groups with group-normalized advantages.
    Rollout(RolloutArgs),
    /// Cost and structure tables folded from a trace file.
    Stats(StatsArgs),
}

fn axis_value_parser(s: &str) -> std::result::Result<Axis, String> {
    Axis::parse(s).ok_or_else(|| {
        format!("unknown axis {s:?} (depth|horizon|breadth|parallel|robustness)")
    })
}

fn dom_value_parser(s: &str) -> std::result::Result<DomLevel, String> {
    DomLevel::parse(s).ok_or_else(|| format!("unknown dom level {s:?} (low|high)"))
}

#[derive(Args)]
struct GenArgs {
    /// Axis to generate: depth|horizon|breadth|parallel|robustness.
    #[arg(long, value_parser = axis_value_parser)]
    axis: Option<Axis>,
    /// Comma-separated axis values, e.g. 2,4,6.
    #[arg(long)]
    values: Option<String>,
    /// Instances per (axis, value) cell.
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Salt for hash-based split assignment.
    #[arg(long, default_value_t = 0)]
    salt: u64,
    /// Train fraction for hash-based splits.
    #[arg(long, default_value_t = 0.8)]
    split_ratio: f64,
    /// Generate the published per-cell counts instead of --axis/--values.
    #[arg(long, value_parser = ["reference"])]
    profile: Option<String>,
    /// Evaluate variables modulo this prime instead of plain integers.
    #[arg(long)]
    modulus: Option<i64>,
    /// Output instance file (line-delimited records).
    #[arg(long, default_value = "instances.jsonl")]
    out: PathBuf,
    /// Also write a scripted-orchestrator library stub for these
    /// instances (gold direct answer, a single-agent delegation, and a
    /// wrong answer per task), handy for smoke-testing the pipeline.
    #[arg(long)]
    emit_plan_stub: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    instances: PathBuf,
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configured DoM level.
    #[arg(long, value_parser = dom_value_parser)]
    dom: Option<DomLevel>,
    /// Run graph nodes strictly sequentially.
    #[arg(long)]
    sequential: bool,
    /// Override the configured in-flight backend call limit.
    #[arg(long)]
    limit: Option<usize>,
    /// Only process instances in this split: train|test|all.
    #[arg(long, default_value = "all", value_parser = ["train", "test", "all"])]
    split: String,
    #[arg(long, default_value = "traces.jsonl")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Independent samples per task.
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Grant per-answer partial credit on multi-answer tasks.
    #[arg(long)]
    fractional: bool,
    #[arg(long, default_value = "report.json")]
    out_report: PathBuf,
}

#[derive(Args)]
struct RolloutArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Orchestrations per task (group size).
    #[arg(long, default_value_t = 32)]
    k: usize,
    #[arg(long, default_value = "groups.jsonl")]
    out_groups: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    traces: PathBuf,
    /// Also write the totals as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Run(args) => cmd_run(args).await,
        Command::Eval(args) => cmd_eval(args).await,
        Command::Rollout(args) => cmd_rollout(args).await,
        Command::Stats(args) => cmd_stats(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let gen_config = bench::GenConfig { modulus: args.modulus };
    let mut echo = BTreeMap::new();
    echo.insert("seed".into(), args.seed.to_string());
    echo.insert("salt".into(), args.salt.to_string());
    echo.insert("split_ratio".into(), args.split_ratio.to_string());
    if let Some(m) = args.modulus {
        echo.insert("modulus".into(), m.to_string());
    }

    // (axis, value, preset train/test counts); None = hash-assigned split.
    type Cell = (Axis, usize, Option<(usize, usize)>);
    let cells: Vec<Cell> = match &args.profile {
        Some(_) => {
            echo.insert("profile".into(), "reference".into());
            bench::reference_profile()
                .into_iter()
                .map(|c| (c.axis, c.value, Some((c.train, c.test))))
                .collect()
        }
        None => {
            let axis = args.axis.context("--axis is required without --profile")?;
            let values: Vec<usize> = match &args.values {
                Some(list) => list
                    .split(',')
                    .map(|v| v.trim().parse::<usize>().map_err(anyhow::Error::from))
                    .collect::<Result<_>>()?,
                None => axis.value_range().collect(),
            };
            echo.insert("axis".into(), axis.to_string());
            values.into_iter().map(|v| (axis, v, None)).collect()
        }
    };

    let gen_seed = derive_seed(args.seed, "gen");
    let mut writer = JsonlWriter::create(&args.out, Some(&FileHeader::new("maestro gen", echo)))?;
    let mut stub_writer = match &args.emit_plan_stub {
        Some(path) => Some(JsonlWriter::create(path, None)?),
        None => None,
    };
    let mut written = 0usize;
    for (axis, value, preset) in cells {
        let counts: Vec<(Split, usize)> = match preset {
            Some((train, test)) => vec![(Split::Train, train), (Split::Test, test)],
            None => vec![(Split::Test, args.count)],
        };
        for (split, count) in counts {
            for i in 0..count {
                let stream = format!("{axis}|{value}|{split:?}|{i}");
                let seed = derive_seed(gen_seed, &stream);
                let mut instance = bench::generate_with(axis, value, seed, &gen_config)?;
                instance.split = match preset {
                    Some(_) => split,
                    None => bench::assign_split(&instance, args.salt, args.split_ratio),
                };
                assert_eq!(instance.measured_axis(), value, "axis fidelity");
                writer.append(&instance)?;
                if let Some(stub) = &mut stub_writer {
                    stub.append(&plan_stub(&instance))?;
                }
                written += 1;
            }
        }
    }
    eprintln!("wrote {written} instances to {}", args.out.display());
    if let Some(path) = &args.emit_plan_stub {
        eprintln!("plan library stub written to {}", path.display());
    }
    Ok(())
}

fn plan_stub(instance: &BenchInstance) -> maestro::rollout::PlanLibraryEntry {
    maestro::rollout::PlanLibraryEntry {
        task_fingerprint: maestro::rollout::task_fingerprint(&instance.question),
        proposals: vec![
            format!(
                "<thinking>direct solve</thinking><answer>{}</answer>",
                maestro::reward::wrap_boxed(&instance.gold)
            ),
            "<thinking>delegate everything</thinking>\
             <agent><agent_id>SOLO</agent_id><agent_name>CoTAgent</agent_name>\
             <agent_description>Solve the task in one pass.</agent_description>\
             <required_arguments><agent_input></agent_input></required_arguments></agent>"
                .to_string(),
            "<thinking>guess</thinking><answer>\\boxed{0}</answer>".to_string(),
        ],
    }
}

struct Pipeline {
    instances: Vec<BenchInstance>,
    executor: Executor,
    orchestrator: Box<dyn OrchestratorBackend>,
    dom: DomLevel,
    template_hash: Option<String>,
    header: FileHeader,
}

fn load_instances(path: &Path, split: &str) -> Result<Vec<BenchInstance>> {
    let all: Vec<BenchInstance> =
        read_jsonl(path).with_context(|| format!("reading instances from {}", path.display()))?;
    let filtered = match split {
        "all" => all,
        "train" => all.into_iter().filter(|i| i.split == Split::Train).collect(),
        "test" => all.into_iter().filter(|i| i.split == Split::Test).collect(),
        other => bail!("unknown split filter {other:?} (train|test|all)"),
    };
    if filtered.is_empty() {
        bail!("no instances selected from {}", path.display());
    }
    Ok(filtered)
}

/// Adapter so a shared backend handle can also serve as an owned value.
struct ArcBackend(Arc<dyn ChatBackend>);

#[async_trait::async_trait]
impl ChatBackend for ArcBackend {
    async fn complete(
        &self,
        request: &maestro::backend::ChatRequest,
    ) -> std::result::Result<maestro::backend::ChatResponse, maestro::backend::BackendError> {
        self.0.complete(request).await
    }
}

fn build_pipeline(args: &PipelineArgs, tool: &str) -> Result<Pipeline> {
    let mut config = RunConfig::load(args.config.as_deref())?;
    if let Some(dom) = args.dom {
        config.apply("dom_level", &dom.to_string())?;
    }
    if let Some(limit) = args.limit {
        config.apply("concurrency_limit", &limit.to_string())?;
    }
    config.validate()?;

    let backend: Arc<dyn ChatBackend> = match config.backend {
        BackendKind::Echo => Arc::new(EchoBackend),
        BackendKind::Scripted => Arc::new(ScriptedBackend::from_transcript_file(
            config.transcript.as_deref().expect("validated"),
        )?),
        BackendKind::OpenAi => Arc::new(
            maestro::backend::OpenAiBackend::new(config.backend_config.clone())
                .map_err(|e| anyhow::anyhow!("building http backend: {e}"))?,
        ),
    };

    let retriever = match &config.corpus {
        Some(path) => Some(
            Arc::new(Bm25Retriever::from_corpus_file(path)?) as Arc<dyn maestro::retrieval::Retriever>
        ),
        None => None,
    };

    let options = ExecOptions {
        parallel: !args.sequential,
        max_concurrency: config.concurrency_limit,
        strict_dataflow: config.strict_dataflow,
    };
    let price = match &config.price_table_path {
        Some(path) => {
            let table = PriceTable::from_json(&std::fs::read_to_string(path)?)?;
            table.rate(&config.backend_config.model)
        }
        None => None,
    };
    let executor =
        Executor::new(backend.clone(), retriever, config.agent.clone(), options).with_price(price);

    let (low, high) = match &config.template_dir {
        Some(dir) => (
            PromptTemplates::from_dir(dir, DomLevel::Low)?,
            PromptTemplates::from_dir(dir, DomLevel::High)?,
        ),
        None => (
            PromptTemplates::builtin(DomLevel::Low),
            PromptTemplates::builtin(DomLevel::High),
        ),
    };
    let template_hash = Some(format!("{}:{}", low.content_hash(), high.content_hash()));

    let orchestrator: Box<dyn OrchestratorBackend> = match config.orchestrator {
        OrchestratorKind::Scripted => Box::new(ScriptedOrchestrator::from_library_file(
            config.plan_library.as_deref().expect("validated"),
        )?),
        OrchestratorKind::Chat => Box::new(ChatOrchestrator::new(
            ArcBackend(backend.clone()),
            low,
            high,
            &config.backend_config.model,
        )),
    };

    let instances = load_instances(&args.instances, &args.split)?;
    let mut echo = config.echo.clone();
    echo.insert("instances".into(), args.instances.display().to_string());
    echo.insert("sequential".into(), args.sequential.to_string());
    if let Some(hash) = &template_hash {
        echo.insert("template_hash".into(), hash.clone());
    }
    Ok(Pipeline {
        instances,
        executor,
        orchestrator,
        dom: config.dom_level,
        template_hash,
        header: FileHeader::new(tool, echo),
    })
}

async fn cmd_run(args: PipelineArgs) -> Result<()> {
    let pipeline = build_pipeline(&args, "maestro run")?;
    let mut writer = JsonlWriter::create(&args.out, Some(&pipeline.header))?;
    let mut done = 0usize;
    for instance in &pipeline.instances {
        let text = pipeline
            .orchestrator
            .propose(&instance.question, pipeline.dom, &pipeline.dom.to_string(), 0)
            .await
            .unwrap_or_default();
        let sample =
            maestro::rollout::run_sample(&pipeline.executor, instance, pipeline.dom, 0, text)
                .await;
        writer.append(&sample)?;
        done += 1;
        eprint!("\rran {done}/{}", pipeline.instances.len());
    }
    eprintln!("\ntraces written to {}", args.out.display());
    Ok(())
}

async fn cmd_eval(args: EvalArgs) -> Result<()> {
    let pipeline = build_pipeline(&args.pipeline, "maestro eval")?;
    let mode = if args.fractional {
        maestro::rollout::RewardMode::Fractional
    } else {
        maestro::rollout::RewardMode::Binary
    };
    let result = maestro::rollout::evaluate_avg_at_n_mode(
        &pipeline.instances,
        pipeline.orchestrator.as_ref(),
        args.n,
        pipeline.dom,
        &pipeline.executor,
        pipeline.template_hash.clone(),
        mode,
    )
    .await;

    let mut writer = JsonlWriter::create(&args.pipeline.out, Some(&pipeline.header))?;
    for sample in &result.samples {
        writer.append(sample)?;
    }
    std::fs::write(&args.out_report, serde_json::to_string_pretty(&result.report)?)?;
    eprint!("{}", render_report(&result.report));
    eprintln!(
        "report written to {}, traces to {}",
        args.out_report.display(),
        args.pipeline.out.display()
    );
    Ok(())
}

async fn cmd_rollout(args: RolloutArgs) -> Result<()> {
    let pipeline = build_pipeline(&args.pipeline, "maestro rollout")?;
    let mut group_writer = JsonlWriter::create(&args.out_groups, Some(&pipeline.header))?;
    let mut trace_writer = JsonlWriter::create(&args.pipeline.out, Some(&pipeline.header))?;
    let mut done = 0usize;
    for instance in &pipeline.instances {
        let result = collect_group(
            instance,
            pipeline.orchestrator.as_ref(),
            args.k,
            pipeline.dom,
            &pipeline.executor,
        )
        .await
        .with_context(|| format!("collecting group for {}", instance.instance_id))?;
        group_writer.append(&result.group)?;
        for sample in &result.samples {
            trace_writer.append(sample)?;
        }
        done += 1;
        eprint!("\rcollected {done}/{}", pipeline.instances.len());
    }
    eprintln!(
        "\ngroups written to {}, traces to {}",
        args.out_groups.display(),
        args.pipeline.out.display()
    );
    Ok(())
}

#[derive(serde::Serialize)]
struct StatsTotals {
    traces: usize,
    llm_calls: u64,
    prompt_tokens: u64,
    completion_tokens: u64,
    tokens_millions: f64,
    dollars: Option<f64>,
    call_time_ks: f64,
    elapsed_ks: f64,
    status_counts: BTreeMap<String, u64>,
    agent_count_hist: BTreeMap<usize, u64>,
    sequential_length_hist: BTreeMap<usize, u64>,
    parallel_width_hist: BTreeMap<usize, u64>,
}

fn fold_stats(samples: &[SampleRun]) -> StatsTotals {
    let mut ledger = CostLedger::zero();
    let mut elapsed = std::time::Duration::ZERO;
    let mut status_counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut agent_count_hist: BTreeMap<usize, u64> = BTreeMap::new();
    let mut sequential_length_hist: BTreeMap<usize, u64> = BTreeMap::new();
    let mut parallel_width_hist: BTreeMap<usize, u64> = BTreeMap::new();
    for sample in samples {
        ledger = merge_ledgers(&ledger, &sample.trace.ledger);
        elapsed += sample.trace.elapsed;
        *status_counts
            .entry(format!("{:?}", sample.trace.status))
            .or_insert(0) += 1;
        *agent_count_hist.entry(sample.trace.stats.num_agents).or_insert(0) += 1;
        *sequential_length_hist
            .entry(sample.trace.stats.sequential_length)
            .or_insert(0) += 1;
        *parallel_width_hist
            .entry(sample.trace.stats.parallel_width)
            .or_insert(0) += 1;
    }
    StatsTotals {
        traces: samples.len(),
        llm_calls: ledger.llm_calls,
        prompt_tokens: ledger.prompt_tokens,
        completion_tokens: ledger.completion_tokens,
        tokens_millions: ledger.total_tokens() as f64 / 1e6,
        dollars: ledger.dollars,
        call_time_ks: ledger.wall_time.as_secs_f64() / 1e3,
        elapsed_ks: elapsed.as_secs_f64() / 1e3,
        status_counts,
        agent_count_hist,
        sequential_length_hist,
        parallel_width_hist,
    }
}

fn cmd_stats(args: StatsArgs) -> Result<()> {
    use std::fmt::Write as _;

    let samples: Vec<SampleRun> = read_jsonl(&args.traces)
        .with_context(|| format!("reading traces from {}", args.traces.display()))?;
    let totals = fold_stats(&samples);

    let mut table = String::new();
    let _ = writeln!(table, "traces:             {}", totals.traces);
    let _ = writeln!(table, "llm calls:          {}", totals.llm_calls);
    let _ = writeln!(table, "prompt tokens:      {}", totals.prompt_tokens);
    let _ = writeln!(table, "completion tokens:  {}", totals.completion_tokens);
    let _ = writeln!(table, "tokens (M):         {:.4}", totals.tokens_millions);
    match totals.dollars {
        Some(d) => drop(writeln!(table, "cost ($):           {d:.4}")),
        None => drop(writeln!(table, "cost ($):           unpriced")),
    }
    let _ = writeln!(table, "call time (ks):     {:.6}", totals.call_time_ks);
    let _ = writeln!(table, "elapsed (ks):       {:.6}", totals.elapsed_ks);
    let _ = writeln!(table, "\nstatus counts:");
    for (status, count) in &totals.status_counts {
        let _ = writeln!(table, "  {status:<16} {count}");
    }
    let _ = writeln!(table, "\nstructure histograms:");
    for (k, v) in &totals.agent_count_hist {
        let _ = writeln!(table, "  agents={k:<3} {v}");
    }
    for (k, v) in &totals.sequential_length_hist {
        let _ = writeln!(table, "  seqlen={k:<3} {v}");
    }
    for (k, v) in &totals.parallel_width_hist {
        let _ = writeln!(table, "  width={k:<4} {v}");
    }

    if let Some(path) = &args.json {
        std::fs::write(path, serde_json::to_string_pretty(&totals)?)?;
        eprintln!("totals written to {}", path.display());
    }

    // A downstream pager closing the pipe early is not an error.
    use std::io::Write as _;
    let _ = std::io::stdout().write_all(table.as_bytes());
    Ok(())
}
