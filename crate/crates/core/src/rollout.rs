//! End-to-end rollout collection and avg@n evaluation: sample K
//! orchestrations per task, parse → validate → execute → reward each, and
//! emit training groups plus an aggregate report.
//!
//! Every stage failure is a terminal outcome with reward 0 and a recorded
//! failure class; the pipeline is total over arbitrary orchestrator
//! output. The report is a pure fold over (trace, gold) pairs, so an
//! independent recount from trace files reproduces it exactly.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use futures::future::join_all;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, ChatBackend, ChatRequest, Message};
use crate::bench::BenchInstance;
use crate::cost::{merge_ledgers, CostLedger};
use crate::executor::{ExecutablePlan, ExecutionTrace, Executor, TraceStatus};
use crate::protocol::{parse_high_dom, parse_low_dom, DomLevel};
use crate::reward::{
    compute_fractional_reward, compute_reward, external_judge, judge_exact, JudgeBackend,
    RewardError, RolloutGroup,
};
use crate::templates::PromptTemplates;
use crate::util::fnv1a64_hex;

/// Proposes one orchestration per call. Implementations are stateless
/// across calls; independent samples differ only through backend
/// stochasticity (or the sample index, for scripted libraries).
#[async_trait]
pub trait OrchestratorBackend: Send + Sync {
    async fn propose(
        &self,
        task: &str,
        dom: DomLevel,
        prompt_profile: &str,
        sample_index: usize,
    ) -> Result<String, BackendError>;
}

/// Stable key for scripted proposal libraries.
pub fn task_fingerprint(task: &str) -> String {
    fnv1a64_hex(task.as_bytes())
}

/// One proposal library entry: the orchestrations to replay for a task.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanLibraryEntry {
    pub task_fingerprint: String,
    pub proposals: Vec<String>,
}

/// Replays a library of canned orchestrations keyed by task fingerprint;
/// sample `i` gets proposal `i % len`.
#[derive(Default)]
pub struct ScriptedOrchestrator {
    entries: HashMap<String, Vec<String>>,
}

impl ScriptedOrchestrator {
    pub fn new() -> ScriptedOrchestrator {
        ScriptedOrchestrator::default()
    }

    pub fn insert(&mut self, task: &str, proposals: Vec<String>) {
        self.entries.insert(task_fingerprint(task), proposals);
    }

    pub fn from_entries(entries: Vec<PlanLibraryEntry>) -> ScriptedOrchestrator {
        ScriptedOrchestrator {
            entries: entries
                .into_iter()
                .map(|e| (e.task_fingerprint, e.proposals))
                .collect(),
        }
    }

    pub fn from_library_file(path: &std::path::Path) -> std::io::Result<ScriptedOrchestrator> {
        Ok(ScriptedOrchestrator::from_entries(crate::records::read_jsonl(path)?))
    }
}

#[async_trait]
impl OrchestratorBackend for ScriptedOrchestrator {
    async fn propose(
        &self,
        task: &str,
        _dom: DomLevel,
        _prompt_profile: &str,
        sample_index: usize,
    ) -> Result<String, BackendError> {
        let key = task_fingerprint(task);
        match self.entries.get(&key) {
            Some(proposals) if !proposals.is_empty() => {
                Ok(proposals[sample_index % proposals.len()].clone())
            }
            _ => Err(BackendError::MissingScript(key)),
        }
    }
}

/// Orchestrator over a live chat backend: assembles the three-part prompt
/// (system, develop, user) with the task substituted at the question slot.
pub struct ChatOrchestrator<B> {
    backend: B,
    low: PromptTemplates,
    high: PromptTemplates,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    ledger: Mutex<CostLedger>,
}

impl<B: ChatBackend> ChatOrchestrator<B> {
    pub fn new(backend: B, low: PromptTemplates, high: PromptTemplates, model: &str) -> Self {
        ChatOrchestrator {
            backend,
            low,
            high,
            model: model.to_string(),
            temperature: 1.0,
            max_tokens: 8192,
            ledger: Mutex::new(CostLedger::zero()),
        }
    }

    pub fn templates(&self, dom: DomLevel) -> &PromptTemplates {
        match dom {
            DomLevel::Low => &self.low,
            DomLevel::High => &self.high,
        }
    }

    /// Orchestrator-side cost accumulated so far.
    pub fn ledger(&self) -> CostLedger {
        *self.ledger.lock().unwrap()
    }
}

#[async_trait]
impl<B: ChatBackend> OrchestratorBackend for ChatOrchestrator<B> {
    async fn propose(
        &self,
        task: &str,
        dom: DomLevel,
        _prompt_profile: &str,
        _sample_index: usize,
    ) -> Result<String, BackendError> {
        let templates = self.templates(dom);
        let request = ChatRequest {
            system: templates.render_system(&self.model),
            messages: vec![Message::user(templates.render_user(task, &self.model))],
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        };
        let started = std::time::Instant::now();
        let response = self.backend.complete(&request).await?;
        self.ledger.lock().unwrap().add(&CostLedger::for_call(
            response.prompt_tokens,
            response.completion_tokens,
            started.elapsed(),
        ));
        Ok(response.content)
    }
}

/// Where a sample's pipeline ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleOutcome {
    Correct,
    WrongAnswer,
    ParseError,
    ValidationError,
    ExecError,
}

impl SampleOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            SampleOutcome::Correct => "Correct",
            SampleOutcome::WrongAnswer => "WrongAnswer",
            SampleOutcome::ParseError => "ParseError",
            SampleOutcome::ValidationError => "ValidationError",
            SampleOutcome::ExecError => "ExecError",
        }
    }
}

/// One fully processed sample; the unit written to trace files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRun {
    pub task_id: String,
    pub sample_index: usize,
    pub orchestration_text: String,
    pub reward: f64,
    pub outcome: SampleOutcome,
    pub trace: ExecutionTrace,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RolloutError {
    #[error("all {0} proposals failed: {1}")]
    TotalProposalFailure(usize, BackendError),
    #[error("only {judged} of {needed} items could be judged within the refill budget")]
    RefillExhausted { judged: usize, needed: usize },
    #[error(transparent)]
    Reward(#[from] RewardError),
}

/// How a judgment folds into a sample reward. Binary is the default
/// task-level reward; fractional grants per-answer credit for
/// multi-answer (long-horizon) evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewardMode {
    Binary,
    Fractional,
}

fn failure_trace(task_id: &str, status: TraceStatus, error: String) -> ExecutionTrace {
    ExecutionTrace {
        task_id: task_id.to_string(),
        plan: ExecutablePlan::Direct(String::new()),
        node_results: BTreeMap::new(),
        final_answer: String::new(),
        ledger: CostLedger::zero(),
        stats: Default::default(),
        status,
        error: Some(error),
        warnings: Vec::new(),
        elapsed: Duration::ZERO,
        schedule: Vec::new(),
    }
}

/// Prediction list for judging: every boxed span in order, or the whole
/// trimmed answer when a single answer is expected and no box exists.
pub fn extract_predictions(final_answer: &str, expected: usize) -> Vec<String> {
    let boxed = crate::reward::extract_boxed(final_answer);
    if boxed.is_empty() && expected == 1 && !final_answer.trim().is_empty() {
        return vec![final_answer.trim().to_string()];
    }
    boxed
}

/// Pure reward fold over a finished trace with the given reward mode: the
/// function reports are built from, and the function an independent
/// recount replays.
pub fn judge_trace_mode(
    trace: &ExecutionTrace,
    gold: &[String],
    mode: RewardMode,
) -> (f64, SampleOutcome) {
    match trace.status {
        TraceStatus::ParseError => (0.0, SampleOutcome::ParseError),
        TraceStatus::ValidationError => (0.0, SampleOutcome::ValidationError),
        TraceStatus::BackendError => (0.0, SampleOutcome::ExecError),
        TraceStatus::Ok | TraceStatus::Incomplete => {
            let preds = extract_predictions(&trace.final_answer, gold.len());
            let judgment = judge_exact(&preds, gold);
            if judgment.overall {
                (1.0, SampleOutcome::Correct)
            } else {
                let reward = match mode {
                    RewardMode::Binary => f64::from(compute_reward(&judgment)),
                    RewardMode::Fractional => compute_fractional_reward(&judgment),
                };
                (reward, SampleOutcome::WrongAnswer)
            }
        }
    }
}

/// Binary reward fold (the default everywhere rewards feed training).
pub fn judge_trace(trace: &ExecutionTrace, gold: &[String]) -> (f64, SampleOutcome) {
    judge_trace_mode(trace, gold, RewardMode::Binary)
}

/// Parse → validate → execute, without judging. Total over arbitrary text.
pub async fn execute_orchestration(
    executor: &Executor,
    instance: &BenchInstance,
    dom: DomLevel,
    orchestration_text: &str,
) -> ExecutionTrace {
    let task_id = instance.instance_id.as_str();
    let plan = match dom {
        DomLevel::Low => parse_low_dom(orchestration_text)
            .map(ExecutablePlan::from_low)
            .map_err(|e| (TraceStatus::ParseError, e.to_string())),
        DomLevel::High => match parse_high_dom(orchestration_text) {
            Err(e) => Err((TraceStatus::ParseError, e.to_string())),
            Ok(parsed) => ExecutablePlan::from_high(parsed, executor.options().strict_dataflow)
                .map(|(plan, _violations)| plan)
                .map_err(|e| (TraceStatus::ValidationError, e.to_string())),
        },
    };
    match plan {
        Ok(plan) => executor.execute(task_id, &plan, &instance.question).await,
        Err((status, message)) => failure_trace(task_id, status, message),
    }
}

/// Runs one orchestration text through parse → validate → execute → judge.
pub async fn run_sample(
    executor: &Executor,
    instance: &BenchInstance,
    dom: DomLevel,
    sample_index: usize,
    orchestration_text: String,
) -> SampleRun {
    run_sample_mode(executor, instance, dom, sample_index, orchestration_text, RewardMode::Binary)
        .await
}

/// [`run_sample`] with an explicit reward mode.
pub async fn run_sample_mode(
    executor: &Executor,
    instance: &BenchInstance,
    dom: DomLevel,
    sample_index: usize,
    orchestration_text: String,
    mode: RewardMode,
) -> SampleRun {
    let trace = execute_orchestration(executor, instance, dom, &orchestration_text).await;
    let (reward, outcome) = judge_trace_mode(&trace, &instance.gold, mode);
    SampleRun {
        task_id: instance.instance_id.clone(),
        sample_index,
        orchestration_text,
        reward,
        outcome,
        trace,
    }
}

/// The rollout group plus everything needed to write trace files.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupResult {
    pub group: RolloutGroup,
    pub samples: Vec<SampleRun>,
}

/// Samples K orchestrations for one task and rewards each. Individual
/// proposal failures become reward-0 parse failures; only a fully failed
/// proposal stream is an error.
pub async fn collect_group(
    task: &BenchInstance,
    orchestrator: &dyn OrchestratorBackend,
    k: usize,
    dom: DomLevel,
    executor: &Executor,
) -> Result<GroupResult, RolloutError> {
    if k < 2 {
        return Err(RolloutError::Reward(RewardError::GroupTooSmall(k)));
    }
    let profile = dom.to_string();
    let proposals = join_all(
        (0..k).map(|i| orchestrator.propose(&task.question, dom, &profile, i)),
    )
    .await;

    let mut failures = 0usize;
    let mut last_error = None;
    let texts: Vec<String> = proposals
        .into_iter()
        .map(|p| match p {
            Ok(text) => text,
            Err(e) => {
                failures += 1;
                last_error = Some(e);
                String::new()
            }
        })
        .collect();
    if failures == k {
        return Err(RolloutError::TotalProposalFailure(
            k,
            last_error.expect("failures imply an error"),
        ));
    }

    let samples: Vec<SampleRun> = join_all(
        texts
            .into_iter()
            .enumerate()
            .map(|(i, text)| run_sample(executor, task, dom, i, text)),
    )
    .await;

    let group = RolloutGroup::from_rewards(
        &task.instance_id,
        samples
            .iter()
            .map(|s| {
                (
                    s.orchestration_text.clone(),
                    format!("{}#{}", s.task_id, s.sample_index),
                    s.reward,
                )
            })
            .collect(),
    )?;
    Ok(GroupResult { group, samples })
}

/// [`collect_group`] with an external judge deciding correctness. Items
/// whose judge call fails are excluded (never zero-filled) and replaced by
/// freshly sampled proposals, up to `max_refills` extras; stage failures
/// are ordinary reward-0 items and never consult the judge.
pub async fn collect_group_with_judge(
    task: &BenchInstance,
    orchestrator: &dyn OrchestratorBackend,
    k: usize,
    dom: DomLevel,
    executor: &Executor,
    judge: &dyn JudgeBackend,
    max_refills: usize,
) -> Result<GroupResult, RolloutError> {
    if k < 2 {
        return Err(RolloutError::Reward(RewardError::GroupTooSmall(k)));
    }
    let profile = dom.to_string();
    let mut samples: Vec<SampleRun> = Vec::with_capacity(k);
    let mut proposal_failures = 0usize;
    let mut last_error: Option<BackendError> = None;
    let mut next_index = 0usize;
    let budget = k + max_refills;

    while samples.len() < k && next_index < budget {
        let sample_index = next_index;
        next_index += 1;
        let text = match orchestrator
            .propose(&task.question, dom, &profile, sample_index)
            .await
        {
            Ok(text) => text,
            Err(e) => {
                proposal_failures += 1;
                last_error = Some(e);
                String::new()
            }
        };
        let trace = execute_orchestration(executor, task, dom, &text).await;
        let (reward, outcome) = match trace.status {
            TraceStatus::Ok | TraceStatus::Incomplete => {
                let preds = extract_predictions(&trace.final_answer, task.gold.len());
                match external_judge(&preds, &task.gold, &task.question, judge).await {
                    Ok(judgment) if judgment.overall => (1.0, SampleOutcome::Correct),
                    Ok(_) => (0.0, SampleOutcome::WrongAnswer),
                    Err(_) => continue, // unjudged: excluded and refilled
                }
            }
            _ => judge_trace(&trace, &task.gold),
        };
        samples.push(SampleRun {
            task_id: task.instance_id.clone(),
            sample_index,
            orchestration_text: text,
            reward,
            outcome,
            trace,
        });
    }

    if proposal_failures >= budget {
        return Err(RolloutError::TotalProposalFailure(
            budget,
            last_error.expect("failures imply an error"),
        ));
    }
    if samples.len() < k {
        return Err(RolloutError::RefillExhausted { judged: samples.len(), needed: k });
    }

    let group = RolloutGroup::from_rewards(
        &task.instance_id,
        samples
            .iter()
            .map(|s| {
                (
                    s.orchestration_text.clone(),
                    format!("{}#{}", s.task_id, s.sample_index),
                    s.reward,
                )
            })
            .collect(),
    )?;
    Ok(GroupResult { group, samples })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task_id: String,
    pub axis: String,
    pub axis_value: usize,
    pub samples: usize,
    pub mean_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub tasks: usize,
    pub samples: u64,
    pub correct: u64,
    pub accuracy: f64,
}

/// Aggregate evaluation report: avg@n accuracy, per-cell breakdowns,
/// stage-failure taxonomy, structural histograms and ledger totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub n: usize,
    pub dom: String,
    pub accuracy_avg_at_n: f64,
    pub per_task: Vec<TaskReport>,
    pub per_cell: BTreeMap<String, CellReport>,
    pub outcome_counts: BTreeMap<String, u64>,
    pub agent_count_hist: BTreeMap<usize, u64>,
    pub sequential_length_hist: BTreeMap<usize, u64>,
    pub parallel_width_hist: BTreeMap<usize, u64>,
    pub ledger_totals: CostLedger,
    pub template_hash: Option<String>,
}

/// Builds the report as a pure fold over finished samples. Exposed so a
/// recount over trace files goes through the identical code path.
pub fn fold_report(
    n: usize,
    dom: DomLevel,
    tasks: &[BenchInstance],
    samples: &[SampleRun],
    template_hash: Option<String>,
) -> RunReport {
    let mut per_task = Vec::with_capacity(tasks.len());
    let mut per_cell: BTreeMap<String, CellReport> = BTreeMap::new();
    let mut outcome_counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut agent_count_hist: BTreeMap<usize, u64> = BTreeMap::new();
    let mut sequential_length_hist: BTreeMap<usize, u64> = BTreeMap::new();
    let mut parallel_width_hist: BTreeMap<usize, u64> = BTreeMap::new();
    let mut ledger_totals = CostLedger::zero();

    for task in tasks {
        let task_samples: Vec<&SampleRun> = samples
            .iter()
            .filter(|s| s.task_id == task.instance_id)
            .collect();
        let mean_reward = if task_samples.is_empty() {
            0.0
        } else {
            task_samples.iter().map(|s| s.reward).sum::<f64>() / task_samples.len() as f64
        };
        per_task.push(TaskReport {
            task_id: task.instance_id.clone(),
            axis: task.axis.to_string(),
            axis_value: task.axis_value,
            samples: task_samples.len(),
            mean_reward,
        });

        let cell = per_cell
            .entry(format!("{}/{}", task.axis, task.axis_value))
            .or_insert(CellReport { tasks: 0, samples: 0, correct: 0, accuracy: 0.0 });
        cell.tasks += 1;
        for sample in &task_samples {
            cell.samples += 1;
            cell.correct += (sample.reward == 1.0) as u64;
        }
    }
    for cell in per_cell.values_mut() {
        cell.accuracy = if cell.samples == 0 {
            0.0
        } else {
            cell.correct as f64 / cell.samples as f64
        };
    }

    for sample in samples {
        *outcome_counts.entry(sample.outcome.as_str().to_string()).or_insert(0) += 1;
        let stats = sample.trace.stats;
        *agent_count_hist.entry(stats.num_agents).or_insert(0) += 1;
        *sequential_length_hist.entry(stats.sequential_length).or_insert(0) += 1;
        *parallel_width_hist.entry(stats.parallel_width).or_insert(0) += 1;
        ledger_totals = merge_ledgers(&ledger_totals, &sample.trace.ledger);
    }

    let accuracy_avg_at_n = if per_task.is_empty() {
        0.0
    } else {
        per_task.iter().map(|t| t.mean_reward).sum::<f64>() / per_task.len() as f64
    };

    RunReport {
        n,
        dom: dom.to_string(),
        accuracy_avg_at_n,
        per_task,
        per_cell,
        outcome_counts,
        agent_count_hist,
        sequential_length_hist,
        parallel_width_hist,
        ledger_totals,
        template_hash,
    }
}

/// Evaluation output: the report plus every processed sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub report: RunReport,
    pub samples: Vec<SampleRun>,
}

/// avg@n evaluation: n independent end-to-end samples per task (proposal
/// and sub-agent stochasticity both resample). Tasks and samples fan out
/// concurrently under the executor's backend call limit; per-task failures
/// never abort the run.
pub async fn evaluate_avg_at_n(
    tasks: &[BenchInstance],
    orchestrator: &dyn OrchestratorBackend,
    n: usize,
    dom: DomLevel,
    executor: &Executor,
    template_hash: Option<String>,
) -> EvalResult {
    evaluate_avg_at_n_mode(tasks, orchestrator, n, dom, executor, template_hash, RewardMode::Binary)
        .await
}

/// [`evaluate_avg_at_n`] with an explicit reward mode (fractional credit
/// grants per-answer partial reward on multi-answer tasks).
pub async fn evaluate_avg_at_n_mode(
    tasks: &[BenchInstance],
    orchestrator: &dyn OrchestratorBackend,
    n: usize,
    dom: DomLevel,
    executor: &Executor,
    template_hash: Option<String>,
    mode: RewardMode,
) -> EvalResult {
    let profile = dom.to_string();
    let profile = &profile;
    let task_futures = tasks.iter().map(|task| async move {
        let sample_futures = (0..n).map(|i| async move {
            match orchestrator.propose(&task.question, dom, profile, i).await {
                Ok(text) => run_sample_mode(executor, task, dom, i, text, mode).await,
                Err(e) => SampleRun {
                    task_id: task.instance_id.clone(),
                    sample_index: i,
                    orchestration_text: String::new(),
                    reward: 0.0,
                    outcome: SampleOutcome::ParseError,
                    trace: failure_trace(
                        &task.instance_id,
                        TraceStatus::ParseError,
                        format!("proposal failed: {e}"),
                    ),
                },
            }
        });
        join_all(sample_futures).await
    });
    let samples: Vec<SampleRun> = join_all(task_futures).await.into_iter().flatten().collect();
    let report = fold_report(n, dom, tasks, &samples, template_hash);
    EvalResult { report, samples }
}

/// Renders the report as a human-readable table.
pub fn render_report(report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "avg@{} accuracy: {:.4} over {} tasks ({} dom)\n",
        report.n,
        report.accuracy_avg_at_n,
        report.per_task.len(),
        report.dom
    ));
    out.push_str("\nper-cell accuracy:\n");
    for (cell, stats) in &report.per_cell {
        out.push_str(&format!(
            "  {:<16} tasks {:>4}  samples {:>6}  accuracy {:.4}\n",
            cell, stats.tasks, stats.samples, stats.accuracy
        ));
    }
    out.push_str("\noutcomes:\n");
    for (outcome, count) in &report.outcome_counts {
        out.push_str(&format!("  {outcome:<16} {count}\n"));
    }
    out.push_str("\nagent count histogram:\n");
    for (k, v) in &report.agent_count_hist {
        out.push_str(&format!("  {k:>3} agents: {v}\n"));
    }
    out.push_str(&format!(
        "\nledger: {} calls, {} prompt tokens, {} completion tokens, {}\n",
        report.ledger_totals.llm_calls,
        report.ledger_totals.prompt_tokens,
        report.ledger_totals.completion_tokens,
        match report.ledger_totals.dollars {
            Some(d) => format!("${d:.4}"),
            None => "unpriced".to_string(),
        }
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::EchoBackend;
    use crate::bench::{generate, Axis};
    use crate::executor::ExecOptions;
    use crate::reward::group_advantages;
    use crate::subagents::AgentConfig;
    use std::sync::Arc;

    fn echo_executor() -> Executor {
        Executor::new(
            Arc::new(EchoBackend),
            None,
            AgentConfig::default(),
            ExecOptions::default(),
        )
    }

    fn boxed_answer(golds: &[String]) -> String {
        format!("<answer>{}</answer>", crate::reward::wrap_boxed(golds))
    }

    #[tokio::test]
    async fn collect_group_mixed_proposals() {
        let task = generate(Axis::Parallel, 2, 5).unwrap();
        let correct = boxed_answer(&task.gold);
        let mut orchestrator = ScriptedOrchestrator::new();
        orchestrator.insert(
            &task.question,
            vec![
                correct,
                "<answer>\\boxed{999}</answer>".to_string(),
                "garbage with no channels".to_string(),
                "<thinking>only thinking</thinking>".to_string(),
            ],
        );
        let executor = echo_executor();
        let result = collect_group(&task, &orchestrator, 4, DomLevel::High, &executor)
            .await
            .unwrap();
        assert_eq!(result.group.k, 4);
        let rewards: Vec<f64> = result.group.items.iter().map(|i| i.reward).collect();
        assert_eq!(rewards, vec![1.0, 0.0, 0.0, 0.0]);
        let expected = group_advantages(&rewards).unwrap();
        for (item, adv) in result.group.items.iter().zip(expected) {
            assert!((item.advantage - adv).abs() < 1e-12);
        }
        assert_eq!(result.samples[2].outcome, SampleOutcome::ParseError);
    }

    #[tokio::test]
    async fn collect_group_zero_variance() {
        let task = generate(Axis::Depth, 2, 9).unwrap();
        let mut orchestrator = ScriptedOrchestrator::new();
        orchestrator.insert(&task.question, vec![boxed_answer(&task.gold)]);
        let executor = echo_executor();
        let result = collect_group(&task, &orchestrator, 8, DomLevel::High, &executor)
            .await
            .unwrap();
        assert!(result.group.items.iter().all(|i| i.reward == 1.0));
        assert!(result.group.items.iter().all(|i| i.advantage == 0.0));
    }

    #[tokio::test]
    async fn collect_group_k1_too_small() {
        let task = generate(Axis::Depth, 2, 9).unwrap();
        let orchestrator = ScriptedOrchestrator::new();
        let executor = echo_executor();
        assert!(matches!(
            collect_group(&task, &orchestrator, 1, DomLevel::High, &executor).await,
            Err(RolloutError::Reward(RewardError::GroupTooSmall(1)))
        ));
    }

    #[tokio::test]
    async fn collect_group_total_failure() {
        let task = generate(Axis::Depth, 2, 9).unwrap();
        let orchestrator = ScriptedOrchestrator::new(); // empty library
        let executor = echo_executor();
        assert!(matches!(
            collect_group(&task, &orchestrator, 3, DomLevel::High, &executor).await,
            Err(RolloutError::TotalProposalFailure(3, _))
        ));
    }

    #[tokio::test]
    async fn avg_at_n_always_correct_and_always_malformed() {
        let tasks: Vec<BenchInstance> =
            (0..5).map(|s| generate(Axis::Depth, 2, s).unwrap()).collect();
        let executor = echo_executor();

        let mut correct = ScriptedOrchestrator::new();
        for task in &tasks {
            correct.insert(&task.question, vec![boxed_answer(&task.gold)]);
        }
        let result = evaluate_avg_at_n(&tasks, &correct, 4, DomLevel::High, &executor, None).await;
        assert_eq!(result.report.accuracy_avg_at_n, 1.0);

        let mut malformed = ScriptedOrchestrator::new();
        for task in &tasks {
            malformed.insert(&task.question, vec!["no channels at all".to_string()]);
        }
        let result = evaluate_avg_at_n(&tasks, &malformed, 4, DomLevel::High, &executor, None).await;
        assert_eq!(result.report.accuracy_avg_at_n, 0.0);
        assert_eq!(result.report.outcome_counts["ParseError"], 20);
    }

    #[tokio::test]
    async fn report_equals_independent_recount() {
        let tasks: Vec<BenchInstance> =
            (0..6).map(|s| generate(Axis::Breadth, 3, s).unwrap()).collect();
        let mut orchestrator = ScriptedOrchestrator::new();
        for (i, task) in tasks.iter().enumerate() {
            let mut proposals = vec![boxed_answer(&task.gold)];
            if i % 2 == 0 {
                proposals.push("<answer>\\boxed{0}</answer>".to_string());
            }
            orchestrator.insert(&task.question, proposals);
        }
        let executor = echo_executor();
        let result =
            evaluate_avg_at_n(&tasks, &orchestrator, 3, DomLevel::High, &executor, None).await;

        // Recount rewards purely from traces and golds.
        let mut total = 0.0;
        for task in &tasks {
            let rewards: Vec<f64> = result
                .samples
                .iter()
                .filter(|s| s.task_id == task.instance_id)
                .map(|s| judge_trace(&s.trace, &task.gold).0)
                .collect();
            total += rewards.iter().sum::<f64>() / rewards.len() as f64;
        }
        let recounted = total / tasks.len() as f64;
        assert_eq!(result.report.accuracy_avg_at_n, recounted);
    }

    #[tokio::test]
    async fn task_order_shuffle_does_not_change_per_task_stats() {
        let tasks: Vec<BenchInstance> =
            (0..4).map(|s| generate(Axis::Depth, 3, s).unwrap()).collect();
        let mut orchestrator = ScriptedOrchestrator::new();
        for (i, task) in tasks.iter().enumerate() {
            let text = if i % 2 == 0 {
                boxed_answer(&task.gold)
            } else {
                "<answer>\\boxed{1}</answer>".to_string()
            };
            orchestrator.insert(&task.question, vec![text]);
        }
        let executor = echo_executor();
        let forward =
            evaluate_avg_at_n(&tasks, &orchestrator, 2, DomLevel::High, &executor, None).await;
        let mut reversed_tasks = tasks.clone();
        reversed_tasks.reverse();
        let reversed =
            evaluate_avg_at_n(&reversed_tasks, &orchestrator, 2, DomLevel::High, &executor, None)
                .await;

        let by_id = |report: &RunReport| -> BTreeMap<String, f64> {
            report
                .per_task
                .iter()
                .map(|t| (t.task_id.clone(), t.mean_reward))
                .collect()
        };
        assert_eq!(by_id(&forward.report), by_id(&reversed.report));
        assert_eq!(forward.report.accuracy_avg_at_n, reversed.report.accuracy_avg_at_n);
    }

    /// Judge that fails its first `failures` calls, then approves.
    struct FlakyJudge {
        remaining_failures: std::sync::atomic::AtomicUsize,
    }

    #[async_trait]
    impl ChatBackend for FlakyJudge {
        async fn complete(
            &self,
            request: &ChatRequest,
        ) -> Result<crate::backend::ChatResponse, BackendError> {
            use std::sync::atomic::Ordering;
            let left = self.remaining_failures.load(Ordering::SeqCst);
            if left > 0 {
                self.remaining_failures.store(left - 1, Ordering::SeqCst);
                return Err(BackendError::Api("judge overloaded".into()));
            }
            Ok(crate::backend::ChatResponse {
                content: "CORRECT".into(),
                prompt_tokens: crate::backend::request_prompt_tokens(request),
                completion_tokens: 1,
            })
        }
    }

    #[tokio::test]
    async fn judge_failures_refill_the_group() {
        let task = generate(Axis::Depth, 2, 21).unwrap();
        let mut orchestrator = ScriptedOrchestrator::new();
        orchestrator.insert(&task.question, vec![boxed_answer(&task.gold)]);
        let executor = echo_executor();
        let judge = FlakyJudge { remaining_failures: 2.into() };
        let result = collect_group_with_judge(
            &task,
            &orchestrator,
            3,
            DomLevel::High,
            &executor,
            &judge,
            4,
        )
        .await
        .unwrap();
        assert_eq!(result.group.k, 3);
        // Two unjudged items were excluded; replacements pushed the sample
        // indices past k.
        assert_eq!(result.samples.last().unwrap().sample_index, 4);
        assert!(result.group.items.iter().all(|i| i.reward == 1.0));
    }

    #[tokio::test]
    async fn judge_refill_budget_exhaustion_errors() {
        let task = generate(Axis::Depth, 2, 22).unwrap();
        let mut orchestrator = ScriptedOrchestrator::new();
        orchestrator.insert(&task.question, vec![boxed_answer(&task.gold)]);
        let executor = echo_executor();
        let judge = FlakyJudge { remaining_failures: 100.into() };
        assert!(matches!(
            collect_group_with_judge(&task, &orchestrator, 2, DomLevel::High, &executor, &judge, 1)
                .await,
            Err(RolloutError::RefillExhausted { judged: 0, needed: 2 })
        ));
    }

    #[tokio::test]
    async fn fractional_mode_grants_partial_credit() {
        // Two gold answers; the proposal gets exactly one of them right.
        let task = generate(Axis::Parallel, 2, 33).unwrap();
        assert_eq!(task.gold.len(), 2);
        let partially_right = format!(
            "<answer>{}</answer>",
            crate::reward::wrap_boxed(&[task.gold[0].clone(), "99999".to_string()])
        );
        let mut orchestrator = ScriptedOrchestrator::new();
        orchestrator.insert(&task.question, vec![partially_right]);
        let executor = echo_executor();

        let binary =
            evaluate_avg_at_n(std::slice::from_ref(&task), &orchestrator, 1, DomLevel::High, &executor, None)
                .await;
        assert_eq!(binary.report.accuracy_avg_at_n, 0.0);

        let fractional = evaluate_avg_at_n_mode(
            &[task],
            &orchestrator,
            1,
            DomLevel::High,
            &executor,
            None,
            RewardMode::Fractional,
        )
        .await;
        assert_eq!(fractional.report.accuracy_avg_at_n, 0.5);
    }

    #[tokio::test]
    async fn scripted_orchestrator_cycles_by_sample_index() {
        let mut orchestrator = ScriptedOrchestrator::new();
        orchestrator.insert("task", vec!["a".into(), "b".into()]);
        assert_eq!(
            orchestrator.propose("task", DomLevel::Low, "low", 0).await.unwrap(),
            "a"
        );
        assert_eq!(
            orchestrator.propose("task", DomLevel::Low, "low", 3).await.unwrap(),
            "b"
        );
        assert!(orchestrator.propose("other", DomLevel::Low, "low", 0).await.is_err());
    }

    #[tokio::test]
    async fn chat_orchestrator_assembles_templates() {
        let scripted = crate::backend::ScriptedBackend::new();
        let low = PromptTemplates::builtin(DomLevel::Low);
        let high = PromptTemplates::builtin(DomLevel::High);
        let orchestrator = ChatOrchestrator::new(scripted, low.clone(), high, "m1");
        let request = ChatRequest {
            system: low.render_system("m1"),
            messages: vec![Message::user(low.render_user("What is 2+2?", "m1"))],
            temperature: 1.0,
            max_tokens: 8192,
        };
        // Reach through to the scripted backend to install the response.
        orchestrator
            .backend
            .respond_to(&request, "<answer>4</answer>");
        let text = orchestrator
            .propose("What is 2+2?", DomLevel::Low, "low", 0)
            .await
            .unwrap();
        assert_eq!(text, "<answer>4</answer>");
        assert_eq!(orchestrator.ledger().llm_calls, 1);
    }
}
