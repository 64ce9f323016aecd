//! Deterministic execution of parsed plans: placeholder substitution,
//! sub-task composition, topological scheduling and exact cost accounting.
//!
//! Execution is a total function into [`ExecutionTrace`]: node failures set
//! the trace status and keep the partial results, they never escape the
//! trace boundary. Independent ready nodes may run concurrently; parallel
//! and sequential schedules produce identical node results because
//! placeholders resolve against ancestor outputs only and a semaphore caps
//! in-flight backend calls, not their interleaving.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::task::JoinSet;

use crate::backend::{BoundedBackend, ChatBackend};
use crate::cost::{merge_ledgers, CostLedger, PriceRate};
use crate::graph::{
    check_dataflow_consistency, graph_stats, validate, GraphError, GraphStats, OrchestrationGraph,
    Violation,
};
use crate::protocol::{AgentSpec, HighDomPlan, LowDomDecision};
use crate::retrieval::Retriever;
use crate::subagents::{run_agent, AgentAnswer, AgentConfig, AgentError};

/// A plan ready to run: parse and (for graphs) validation already happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExecutablePlan {
    /// The orchestrator answered directly; execution makes zero calls.
    Direct(String),
    /// Low-DoM single delegation.
    SingleDelegation {
        spec: AgentSpec,
        answer_ref: Option<String>,
    },
    /// Validated High-DoM graph.
    Graph(OrchestrationGraph),
}

impl ExecutablePlan {
    pub fn from_low(decision: LowDomDecision) -> ExecutablePlan {
        match decision {
            LowDomDecision::DirectAnswer(text) => ExecutablePlan::Direct(text),
            LowDomDecision::SingleDelegation { spec, answer_ref } => {
                ExecutablePlan::SingleDelegation { spec, answer_ref }
            }
        }
    }

    /// Validates a parsed High-DoM plan. In strict dataflow mode any
    /// edge/reference inconsistency rejects the plan; in lenient mode the
    /// violations come back as warnings.
    pub fn from_high(
        plan: HighDomPlan,
        strict_dataflow: bool,
    ) -> Result<(ExecutablePlan, Vec<Violation>), GraphError> {
        match plan {
            HighDomPlan::DirectAnswer(text) => Ok((ExecutablePlan::Direct(text), Vec::new())),
            HighDomPlan::Graph { agents, edges, .. } => {
                let graph = validate(&agents, &edges)?;
                let violations = check_dataflow_consistency(&graph);
                if strict_dataflow && !violations.is_empty() {
                    return Err(GraphError::DataflowViolations(violations));
                }
                Ok((ExecutablePlan::Graph(graph), violations))
            }
        }
    }

    pub fn stats(&self) -> GraphStats {
        match self {
            ExecutablePlan::Direct(_) => GraphStats::default(),
            ExecutablePlan::SingleDelegation { .. } => GraphStats {
                num_agents: 1,
                sequential_length: 1,
                parallel_width: 0,
            },
            ExecutablePlan::Graph(graph) => graph_stats(graph),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("unresolved placeholder ${{{0}}}")]
    UnresolvedPlaceholder(String),
}

/// Joins the original task with a sub-task description. Empty sub-input
/// inherits the original task unchanged.
pub fn compose_subtask(original: &str, sub_input: &str) -> String {
    if sub_input.is_empty() {
        original.to_string()
    } else {
        format!("Original task: {original}; Current Sub-task: {sub_input}")
    }
}

/// Replaces every `${id}` occurrence with `results[id]` in a single pass:
/// placeholders inside substituted results are never re-expanded. Unknown
/// ids error in strict mode and stay literal otherwise.
pub fn substitute_placeholders(
    template: &str,
    results: &BTreeMap<String, String>,
    strict: bool,
) -> Result<String, ExecError> {
    let bytes = template.as_bytes();
    let mut out = String::with_capacity(template.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'$' && i + 1 < bytes.len() && bytes[i + 1] == b'{' {
            let start = i + 2;
            let mut j = start;
            while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                j += 1;
            }
            if j > start && j < bytes.len() && bytes[j] == b'}' {
                let id = &template[start..j];
                match results.get(id) {
                    Some(value) => out.push_str(value),
                    None if strict => {
                        return Err(ExecError::UnresolvedPlaceholder(id.to_string()))
                    }
                    None => out.push_str(&template[i..=j]),
                }
                i = j + 1;
                continue;
            }
        }
        let ch_len = utf8_len(bytes[i]);
        out.push_str(&template[i..i + ch_len]);
        i += ch_len;
    }
    Ok(out)
}

fn utf8_len(first_byte: u8) -> usize {
    match first_byte {
        b if b < 0x80 => 1,
        b if b >> 5 == 0b110 => 2,
        b if b >> 4 == 0b1110 => 3,
        _ => 4,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceStatus {
    Ok,
    ParseError,
    ValidationError,
    BackendError,
    Incomplete,
}

/// Per-node record: the resolved input actually sent, both output
/// channels, and the node's exact share of the ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeResult {
    pub input_text: String,
    pub thinking: String,
    pub answer: String,
    pub ledger: CostLedger,
    pub incomplete: bool,
}

/// In-memory scheduling record, used to check topological safety in tests.
/// Not serialized: event interleaving is schedule-dependent while trace
/// files must be byte-stable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleEvent {
    pub seq: u64,
    pub node: String,
    pub started: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub task_id: String,
    pub plan: ExecutablePlan,
    pub node_results: BTreeMap<String, NodeResult>,
    pub final_answer: String,
    pub ledger: CostLedger,
    pub stats: GraphStats,
    pub status: TraceStatus,
    pub error: Option<String>,
    pub warnings: Vec<String>,
    /// End-to-end wall time; per-call latency sums live on the ledger.
    pub elapsed: Duration,
    #[serde(skip)]
    pub schedule: Vec<ScheduleEvent>,
}

impl ExecutionTrace {
    /// Copy with every wall-clock field zeroed and scheduling events
    /// dropped. Runs of the same plan against a scripted backend are
    /// identical under this normalization.
    pub fn normalized(&self) -> ExecutionTrace {
        let mut out = self.clone();
        out.elapsed = Duration::ZERO;
        out.ledger.wall_time = Duration::ZERO;
        for node in out.node_results.values_mut() {
            node.ledger.wall_time = Duration::ZERO;
        }
        out.schedule.clear();
        out
    }
}

#[derive(Debug, Clone)]
pub struct ExecOptions {
    /// Run independent ready nodes concurrently. Sequential execution is
    /// observationally identical; both stay available for comparison.
    pub parallel: bool,
    /// Cap on simultaneously in-flight backend calls.
    pub max_concurrency: usize,
    /// Reject (rather than warn on) edge/data-flow inconsistencies.
    pub strict_dataflow: bool,
}

impl Default for ExecOptions {
    fn default() -> ExecOptions {
        ExecOptions {
            parallel: true,
            max_concurrency: 128,
            strict_dataflow: false,
        }
    }
}

/// Owns the backend, retriever and configuration for a run of executions.
pub struct Executor {
    backend: Arc<dyn ChatBackend>,
    retriever: Option<Arc<dyn Retriever>>,
    agent_cfg: AgentConfig,
    options: ExecOptions,
    price: Option<PriceRate>,
}

struct NodeOutcome {
    node_id: String,
    input_text: String,
    result: Result<AgentAnswer, AgentError>,
}

impl Executor {
    pub fn new(
        backend: Arc<dyn ChatBackend>,
        retriever: Option<Arc<dyn Retriever>>,
        agent_cfg: AgentConfig,
        options: ExecOptions,
    ) -> Executor {
        let bounded: Arc<dyn ChatBackend> =
            Arc::new(BoundedBackend::new(backend, options.max_concurrency));
        Executor {
            backend: bounded,
            retriever,
            agent_cfg,
            options,
            price: None,
        }
    }

    /// Prices every node ledger at these per-token rates.
    pub fn with_price(mut self, price: Option<PriceRate>) -> Executor {
        self.price = price;
        self
    }

    pub fn options(&self) -> &ExecOptions {
        &self.options
    }

    fn priced(&self, mut ledger: CostLedger) -> CostLedger {
        if let Some(rate) = self.price {
            ledger.dollars = Some(
                ledger.prompt_tokens as f64 / 1_000_000.0 * rate.input_per_mtok
                    + ledger.completion_tokens as f64 / 1_000_000.0 * rate.output_per_mtok,
            );
        }
        ledger
    }

    /// Runs a plan against a task. Total: failures land in the trace.
    pub async fn execute(&self, task_id: &str, plan: &ExecutablePlan, task: &str) -> ExecutionTrace {
        let started = Instant::now();
        let mut trace = ExecutionTrace {
            task_id: task_id.to_string(),
            plan: plan.clone(),
            node_results: BTreeMap::new(),
            final_answer: String::new(),
            ledger: CostLedger::zero(),
            stats: plan.stats(),
            status: TraceStatus::Ok,
            error: None,
            warnings: Vec::new(),
            elapsed: Duration::ZERO,
            schedule: Vec::new(),
        };

        match plan {
            ExecutablePlan::Direct(text) => {
                trace.final_answer = text.clone();
            }
            ExecutablePlan::SingleDelegation { spec, answer_ref } => {
                self.run_single(spec, answer_ref.as_deref(), task, &mut trace)
                    .await;
            }
            ExecutablePlan::Graph(graph) => {
                self.run_graph(graph, task, &mut trace).await;
            }
        }

        trace.elapsed = started.elapsed();
        trace
    }

    async fn run_single(
        &self,
        spec: &AgentSpec,
        answer_ref: Option<&str>,
        task: &str,
        trace: &mut ExecutionTrace,
    ) {
        let input = compose_subtask(task, &spec.agent_input);
        let node_key = spec
            .output_id
            .clone()
            .or_else(|| spec.agent_id.clone())
            .unwrap_or_else(|| "agent".to_string());
        match run_agent(
            spec,
            &input,
            self.backend.as_ref(),
            self.retriever.as_deref(),
            &self.agent_cfg,
        )
        .await
        {
            Ok(answer) => {
                // The answer channel resolves to the sub-agent's output when
                // it names the output id exactly; otherwise it is literal.
                trace.final_answer = match (answer_ref, &spec.output_id) {
                    (Some(r), Some(oid)) if r.trim() == oid.trim() => answer.answer.clone(),
                    (Some(r), _) => r.trim().to_string(),
                    (None, _) => answer.answer.clone(),
                };
                if answer.incomplete {
                    trace.status = TraceStatus::Incomplete;
                }
                let ledger = self.priced(answer.ledger);
                trace.ledger = ledger;
                trace.node_results.insert(
                    node_key,
                    NodeResult {
                        input_text: input,
                        thinking: answer.thinking,
                        answer: answer.answer,
                        ledger,
                        incomplete: answer.incomplete,
                    },
                );
            }
            Err(e) => {
                trace.status = TraceStatus::BackendError;
                trace.error = Some(e.to_string());
                trace.ledger = self.priced(e.ledger);
            }
        }
    }

    async fn run_graph(&self, graph: &OrchestrationGraph, task: &str, trace: &mut ExecutionTrace) {
        // Lenient dataflow inconsistencies surface as warnings; strict mode
        // should have rejected the plan during preparation, and re-checking
        // here keeps execute safe when called directly.
        let violations = check_dataflow_consistency(graph);
        if !violations.is_empty() {
            if self.options.strict_dataflow {
                trace.status = TraceStatus::ValidationError;
                trace.error = Some(format!("dataflow violations: {violations:?}"));
                return;
            }
            trace
                .warnings
                .extend(violations.iter().map(|v| v.to_string()));
        }

        let ancestors = graph.ancestor_sets();
        let seq = Arc::new(AtomicU64::new(0));
        let mut results: BTreeMap<String, String> = BTreeMap::new();
        let mut failure: Option<String> = None;
        let mut any_incomplete = false;

        if self.options.parallel {
            let mut launched: std::collections::HashSet<String> = Default::default();
            let mut join_set: JoinSet<NodeOutcome> = JoinSet::new();
            let mut ready: Vec<String> = graph
                .topo_order
                .iter()
                .filter(|id| graph.predecessors(id).is_empty())
                .cloned()
                .collect();

            loop {
                if failure.is_none() {
                    for node_id in std::mem::take(&mut ready) {
                        if !launched.insert(node_id.clone()) {
                            continue;
                        }
                        match self.node_future(graph, &node_id, task, &results, &ancestors, &seq, trace) {
                            Ok(future) => {
                                join_set.spawn(future);
                            }
                            Err(e) => {
                                trace.status = TraceStatus::ValidationError;
                                trace.error = Some(e.to_string());
                                failure = Some(e.to_string());
                            }
                        }
                    }
                } else {
                    ready.clear();
                }

                let Some(joined) = join_set.join_next().await else {
                    break;
                };
                let outcome = joined.expect("node tasks do not panic");
                trace.schedule.push(ScheduleEvent {
                    seq: seq.fetch_add(1, Ordering::SeqCst),
                    node: outcome.node_id.clone(),
                    started: false,
                });
                self.commit_node(outcome, trace, &mut results, &mut failure, &mut any_incomplete);

                // Newly unblocked nodes become ready in declaration order.
                for id in &graph.topo_order {
                    if launched.contains(id) || results.contains_key(id) {
                        continue;
                    }
                    let blocked = graph
                        .predecessors(id)
                        .iter()
                        .any(|p| !results.contains_key(*p));
                    if !blocked {
                        ready.push(id.clone());
                    }
                }
            }
        } else {
            for node_id in &graph.topo_order {
                if failure.is_some() {
                    break;
                }
                match self.node_future(graph, node_id, task, &results, &ancestors, &seq, trace) {
                    Ok(future) => {
                        let outcome = future.await;
                        trace.schedule.push(ScheduleEvent {
                            seq: seq.fetch_add(1, Ordering::SeqCst),
                            node: outcome.node_id.clone(),
                            started: false,
                        });
                        self.commit_node(
                            outcome,
                            trace,
                            &mut results,
                            &mut failure,
                            &mut any_incomplete,
                        );
                    }
                    Err(e) => {
                        trace.status = TraceStatus::ValidationError;
                        trace.error = Some(e.to_string());
                        failure = Some(e.to_string());
                    }
                }
            }
        }

        // Ledger merges run in topological order for determinism.
        let mut ledger = CostLedger::zero();
        for id in &graph.topo_order {
            if let Some(node) = trace.node_results.get(id) {
                ledger = merge_ledgers(&ledger, &node.ledger);
            }
        }
        trace.ledger = ledger;

        if trace.status == TraceStatus::Ok {
            if let Some(answer) = results.get(&graph.sink_id) {
                trace.final_answer = answer.clone();
                if any_incomplete {
                    trace.status = TraceStatus::Incomplete;
                }
            } else {
                trace.status = TraceStatus::BackendError;
            }
        }
    }

    /// Builds the node's future. Inputs substitute ancestor results only,
    /// so both schedules observe the same substitution environment.
    #[allow(clippy::too_many_arguments)]
    fn node_future(
        &self,
        graph: &OrchestrationGraph,
        node_id: &str,
        task: &str,
        results: &BTreeMap<String, String>,
        ancestors: &HashMap<String, std::collections::BTreeSet<String>>,
        seq: &Arc<AtomicU64>,
        trace: &mut ExecutionTrace,
    ) -> Result<impl std::future::Future<Output = NodeOutcome> + Send + 'static, ExecError> {
        let spec = graph.node(node_id).expect("validated node").clone();
        let empty = Default::default();
        let anc = ancestors.get(node_id).unwrap_or(&empty);
        let visible: BTreeMap<String, String> = results
            .iter()
            .filter(|(id, _)| anc.contains(*id))
            .map(|(id, v)| (id.clone(), v.clone()))
            .collect();
        let substituted =
            substitute_placeholders(&spec.agent_input, &visible, self.options.strict_dataflow)?;
        let input = compose_subtask(task, &substituted);

        trace.schedule.push(ScheduleEvent {
            seq: seq.fetch_add(1, Ordering::SeqCst),
            node: node_id.to_string(),
            started: true,
        });

        let backend = Arc::clone(&self.backend);
        let retriever = self.retriever.clone();
        let cfg = self.agent_cfg.clone();
        let node_id = node_id.to_string();
        Ok(async move {
            let result = run_agent(&spec, &input, backend.as_ref(), retriever.as_deref(), &cfg).await;
            NodeOutcome {
                node_id,
                input_text: input,
                result,
            }
        })
    }

    fn commit_node(
        &self,
        outcome: NodeOutcome,
        trace: &mut ExecutionTrace,
        results: &mut BTreeMap<String, String>,
        failure: &mut Option<String>,
        any_incomplete: &mut bool,
    ) {
        match outcome.result {
            Ok(answer) => {
                *any_incomplete |= answer.incomplete;
                results.insert(outcome.node_id.clone(), answer.answer.clone());
                trace.node_results.insert(
                    outcome.node_id,
                    NodeResult {
                        input_text: outcome.input_text,
                        thinking: answer.thinking,
                        answer: answer.answer,
                        ledger: self.priced(answer.ledger),
                        incomplete: answer.incomplete,
                    },
                );
            }
            Err(e) => {
                // Fail fast: record the failure and stop launching new
                // nodes; in-flight siblings still land in the ledger.
                if failure.is_none() {
                    *failure = Some(format!("node {}: {e}", outcome.node_id));
                    trace.status = TraceStatus::BackendError;
                    trace.error = failure.clone();
                }
                trace.node_results.insert(
                    outcome.node_id,
                    NodeResult {
                        input_text: outcome.input_text,
                        thinking: String::new(),
                        answer: String::new(),
                        ledger: self.priced(e.ledger),
                        incomplete: false,
                    },
                );
            }
        }
    }
}
