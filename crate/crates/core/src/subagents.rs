//! The five goal-oriented sub-agent workflows: Chain-of-Thought,
//! self-consistency, debate, reflexion and multi-turn search.
//!
//! Each workflow is a pure function of its inputs and the backend's
//! responses, with exact call-count contracts:
//!
//! - CoT: 1 call
//! - SC: `sc_samples` calls
//! - Debate: `|roles| * debate_rounds + 1` calls
//! - Reflexion: `1 + 2k` calls for `k` full critic iterations, where an
//!   accepted critique adds its critic call
//! - Search: at most `search_rounds` calls
//!
//! Sub-agent completions use the same tagged-channel convention as the
//! orchestrator: `<thinking>…</thinking><answer>…</answer>`, with the whole
//! completion treated as the answer when tags are absent. The critic emits
//! `<feedback>` and `<correct>`; search turns emit `<search>query</search>`
//! until a final answer.

use std::collections::HashMap;
use std::time::Instant;

use futures::future::join_all;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, ChatBackend, ChatRequest, Message};
use crate::cost::CostLedger;
use crate::protocol::{extract_channel, AgentName, AgentSpec};
use crate::retrieval::{Retriever, RetrieverError};

pub const COT_INSTRUCTION: &str = "Please think step by step and then solve the task.";
pub const DEBATE_INSTRUCTION: &str =
    "Given solutions from other agents, consider their opinions as advice and provide an updated answer.";
pub const FINAL_DECISION_INSTRUCTION: &str =
    "Given all reasoning and answers, carefully provide a final answer.";
pub const REFLECT_INSTRUCTION: &str = "Given previous attempts and feedback, carefully consider where you could go wrong in your latest attempt. Using insights from previous attempts, try to solve the task better.";
pub const CRITIC_INSTRUCTION: &str = "Please review the answer above and criticize where it might be wrong. If you are absolutely sure it is correct, output exactly 'True' in 'correct'.";

const TAGGED_OUTPUT: &str = "Respond with your reasoning inside a <thinking> tag followed by your final answer inside an <answer> tag.";
const CRITIC_OUTPUT: &str = "Respond with your critique inside a <feedback> tag and your verdict inside a <correct> tag.";
const SEARCH_OUTPUT: &str = "You may search a document corpus: emit <search>your query</search> and the results will be returned to you. When you can answer, respond with your reasoning inside a <thinking> tag followed by your final answer inside an <answer> tag.";

/// Workflow knobs. All counts are at least 1 and temperature lies in
/// [0, 2]; [`AgentConfig::validate`] checks both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub temperature: f64,
    pub sc_samples: usize,
    pub debate_rounds: usize,
    pub reflexion_rounds: usize,
    pub search_rounds: usize,
    pub max_tokens: u32,
    pub search_top_k: usize,
}

impl Default for AgentConfig {
    fn default() -> AgentConfig {
        AgentConfig {
            temperature: 0.5,
            sc_samples: 5,
            debate_rounds: 5,
            reflexion_rounds: 5,
            search_rounds: 5,
            max_tokens: 512,
            search_top_k: 3,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.sc_samples < 1
            || self.debate_rounds < 1
            || self.reflexion_rounds < 1
            || self.search_rounds < 1
            || self.search_top_k < 1
        {
            return Err("all workflow counts must be >= 1".into());
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(format!("temperature {} outside [0, 2]", self.temperature));
        }
        Ok(())
    }
}

/// A workflow's result with its exact accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentAnswer {
    pub thinking: String,
    pub answer: String,
    pub calls_made: u64,
    pub ledger: CostLedger,
    /// Set when search ran out of rounds and the answer is best-effort.
    pub incomplete: bool,
    /// Retriever hits, accounted separately from backend calls.
    pub retrievals: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentErrorKind {
    #[error(transparent)]
    Backend(BackendError),
    #[error("debate requires at least two roles")]
    TooFewRoles,
    #[error("input must be non-empty")]
    EmptyInput,
    #[error("search workflow requires a retriever")]
    RetrieverMissing,
    #[error(transparent)]
    Retriever(RetrieverError),
}

/// Workflow failure carrying the partial ledger accumulated before the
/// failure, so callers can account for work already done.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind}")]
pub struct AgentError {
    pub kind: AgentErrorKind,
    pub calls_made: u64,
    pub ledger: CostLedger,
}

/// Running call/ledger accumulator shared by all workflows.
#[derive(Default, Clone)]
struct Meter {
    calls: u64,
    ledger: CostLedger,
}

impl Meter {
    fn absorb(&mut self, other: &Meter) {
        self.calls += other.calls;
        self.ledger.add(&other.ledger);
    }

    fn fail(&self, kind: AgentErrorKind) -> AgentError {
        AgentError { kind, calls_made: self.calls, ledger: self.ledger }
    }
}

fn tagged_system(persona: &str, role: Option<&str>, format_note: &str) -> String {
    match role {
        Some(role) => format!("You are a {persona}. Role: {role}. {format_note}"),
        None => format!("You are a {persona}. {format_note}"),
    }
}

/// Instruction first, then the input sections separated by blank lines.
fn render_user(instruction: &str, inputs: &[&str]) -> String {
    let mut parts = vec![instruction];
    parts.extend(inputs.iter().filter(|s| !s.is_empty()).copied());
    parts.join("\n\n")
}

fn split_tagged(content: &str) -> (String, String) {
    let thinking = extract_channel(content, "thinking").unwrap_or_default();
    let answer = extract_channel(content, "answer").unwrap_or_else(|| content.trim().to_string());
    (thinking, answer)
}

async fn call(
    backend: &dyn ChatBackend,
    cfg: &AgentConfig,
    system: String,
    messages: Vec<Message>,
    meter: &mut Meter,
) -> Result<String, AgentError> {
    let request = ChatRequest {
        system,
        messages,
        temperature: cfg.temperature,
        max_tokens: cfg.max_tokens,
    };
    let started = Instant::now();
    let result = backend.complete(&request).await;
    meter.calls += 1;
    match result {
        Ok(resp) => {
            meter.ledger.add(&CostLedger::for_call(
                resp.prompt_tokens,
                resp.completion_tokens,
                started.elapsed(),
            ));
            Ok(resp.content)
        }
        Err(e) => Err(meter.fail(AgentErrorKind::Backend(e))),
    }
}

/// Single Chain-of-Thought call.
pub async fn cot_agent(
    input: &str,
    backend: &dyn ChatBackend,
    cfg: &AgentConfig,
) -> Result<AgentAnswer, AgentError> {
    if input.is_empty() {
        return Err(Meter::default().fail(AgentErrorKind::EmptyInput));
    }
    let mut meter = Meter::default();
    let content = call(
        backend,
        cfg,
        tagged_system("Chain-of-Thought LLM", None, TAGGED_OUTPUT),
        vec![Message::user(render_user(COT_INSTRUCTION, &[input]))],
        &mut meter,
    )
    .await?;
    let (thinking, answer) = split_tagged(&content);
    Ok(AgentAnswer {
        thinking,
        answer,
        calls_made: meter.calls,
        ledger: meter.ledger,
        incomplete: false,
        retrievals: 0,
    })
}

/// Most frequent exact-match answer; ties break to the earliest first
/// occurrence. Equality is exact text match after trimming.
pub fn majority_vote(answers: &[String]) -> Option<String> {
    if answers.is_empty() {
        return None;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut first_seen: HashMap<&str, usize> = HashMap::new();
    for (i, a) in answers.iter().enumerate() {
        let key = a.trim();
        *counts.entry(key).or_insert(0) += 1;
        first_seen.entry(key).or_insert(i);
    }
    counts
        .into_iter()
        .max_by(|(ka, ca), (kb, cb)| {
            ca.cmp(cb)
                .then_with(|| first_seen[kb].cmp(&first_seen[ka]))
        })
        .map(|(k, _)| k.to_string())
}

/// `sc_samples` independent CoT calls ensembled by majority vote. When some
/// samples fail, the vote runs over the successes; the failed attempts'
/// calls stay on the ledger.
pub async fn sc_agent(
    input: &str,
    backend: &dyn ChatBackend,
    cfg: &AgentConfig,
) -> Result<AgentAnswer, AgentError> {
    if input.is_empty() {
        return Err(Meter::default().fail(AgentErrorKind::EmptyInput));
    }
    let system = tagged_system("Chain-of-Thought LLM", None, TAGGED_OUTPUT);
    let user = render_user(COT_INSTRUCTION, &[input]);
    let sample_futures = (0..cfg.sc_samples).map(|_| {
        let system = system.clone();
        let user = user.clone();
        async move {
            let mut meter = Meter::default();
            let result = call(backend, cfg, system, vec![Message::user(user)], &mut meter).await;
            (result, meter)
        }
    });

    let mut meter = Meter::default();
    let mut successes: Vec<(String, String)> = Vec::new();
    let mut last_error: Option<AgentErrorKind> = None;
    for (result, sample_meter) in join_all(sample_futures).await {
        meter.absorb(&sample_meter);
        match result {
            Ok(content) => {
                let (thinking, answer) = split_tagged(&content);
                successes.push((thinking, answer));
            }
            Err(e) => last_error = Some(e.kind),
        }
    }
    if successes.is_empty() {
        return Err(meter.fail(last_error.unwrap_or(AgentErrorKind::Backend(
            BackendError::Api("no samples succeeded".into()),
        ))));
    }

    let answers: Vec<String> = successes.iter().map(|(_, a)| a.clone()).collect();
    let winner = majority_vote(&answers).expect("non-empty successes");
    // Later samples overwrite earlier ones, so the winning answer pairs
    // with the thinking of its last occurrence.
    let thinking = successes
        .iter()
        .rev()
        .find(|(_, a)| a.trim() == winner)
        .map(|(t, _)| t.clone())
        .unwrap_or_default();
    Ok(AgentAnswer {
        thinking,
        answer: winner,
        calls_made: meter.calls,
        ledger: meter.ledger,
        incomplete: false,
        retrievals: 0,
    })
}

/// Multi-role debate. Round 0 answers the initial instruction; each later
/// round shows every role its own prior thinking first, then the other
/// roles' prior thinking in declaration order. A final-decision call
/// consumes the last round's thinking and answers.
pub async fn debate_agent(
    input: &str,
    roles: &[String],
    backend: &dyn ChatBackend,
    cfg: &AgentConfig,
) -> Result<AgentAnswer, AgentError> {
    if roles.len() < 2 {
        return Err(Meter::default().fail(AgentErrorKind::TooFewRoles));
    }
    let mut meter = Meter::default();
    let mut prev_thinking: Vec<String> = Vec::new();
    let mut prev_answers: Vec<String> = Vec::new();

    for round in 0..cfg.debate_rounds {
        let instruction = if round == 0 { COT_INSTRUCTION } else { DEBATE_INSTRUCTION };
        let round_futures = roles.iter().enumerate().map(|(i, role)| {
            let system = tagged_system("Debate LLM", Some(role), TAGGED_OUTPUT);
            let user = if round == 0 {
                render_user(instruction, &[input])
            } else {
                let mut inputs: Vec<&str> = vec![input, &prev_thinking[i]];
                inputs.extend(prev_thinking[..i].iter().map(String::as_str));
                inputs.extend(prev_thinking[i + 1..].iter().map(String::as_str));
                render_user(instruction, &inputs)
            };
            async move {
                let mut meter = Meter::default();
                let result =
                    call(backend, cfg, system, vec![Message::user(user)], &mut meter).await;
                (result, meter)
            }
        });

        let mut round_thinking = Vec::with_capacity(roles.len());
        let mut round_answers = Vec::with_capacity(roles.len());
        let mut failure: Option<AgentErrorKind> = None;
        for (result, role_meter) in join_all(round_futures).await {
            meter.absorb(&role_meter);
            match result {
                Ok(content) => {
                    let (thinking, answer) = split_tagged(&content);
                    round_thinking.push(thinking);
                    round_answers.push(answer);
                }
                Err(e) => failure = Some(e.kind),
            }
        }
        if let Some(kind) = failure {
            return Err(meter.fail(kind));
        }
        prev_thinking = round_thinking;
        prev_answers = round_answers;
    }

    let mut final_inputs: Vec<&str> = vec![input];
    final_inputs.extend(prev_thinking.iter().map(String::as_str));
    final_inputs.extend(prev_answers.iter().map(String::as_str));
    let content = call(
        backend,
        cfg,
        tagged_system("Final Decision LLM", None, TAGGED_OUTPUT),
        vec![Message::user(render_user(
            FINAL_DECISION_INSTRUCTION,
            &final_inputs,
        ))],
        &mut meter,
    )
    .await?;
    let (thinking, answer) = split_tagged(&content);
    Ok(AgentAnswer {
        thinking,
        answer,
        calls_made: meter.calls,
        ledger: meter.ledger,
        incomplete: false,
        retrievals: 0,
    })
}

/// Solve, then loop: critique; stop when the critic's `<correct>` field is
/// exactly the text `True` (case-sensitive); otherwise fold the attempt and
/// feedback into the growing input and re-solve.
pub async fn reflexion_agent(
    input: &str,
    backend: &dyn ChatBackend,
    cfg: &AgentConfig,
) -> Result<AgentAnswer, AgentError> {
    if input.is_empty() {
        return Err(Meter::default().fail(AgentErrorKind::EmptyInput));
    }
    let mut meter = Meter::default();
    let solver_system = tagged_system("Chain-of-Thought LLM", None, TAGGED_OUTPUT);
    let critic_system = tagged_system("Critic LLM", None, CRITIC_OUTPUT);

    let mut solve_inputs: Vec<String> = vec![input.to_string()];
    let content = call(
        backend,
        cfg,
        solver_system.clone(),
        vec![Message::user(render_user(
            COT_INSTRUCTION,
            &[&solve_inputs[0]],
        ))],
        &mut meter,
    )
    .await?;
    let (mut thinking, mut answer) = split_tagged(&content);

    for _ in 0..cfg.reflexion_rounds {
        let critic_content = call(
            backend,
            cfg,
            critic_system.clone(),
            vec![Message::user(render_user(
                CRITIC_INSTRUCTION,
                &[input, &thinking, &answer],
            ))],
            &mut meter,
        )
        .await?;
        let correct = extract_channel(&critic_content, "correct").unwrap_or_default();
        if correct == "True" {
            break;
        }
        let feedback = extract_channel(&critic_content, "feedback")
            .unwrap_or_else(|| critic_content.trim().to_string());
        solve_inputs.push(thinking.clone());
        solve_inputs.push(answer.clone());
        solve_inputs.push(feedback);

        let refs: Vec<&str> = solve_inputs.iter().map(String::as_str).collect();
        let content = call(
            backend,
            cfg,
            solver_system.clone(),
            vec![Message::user(render_user(REFLECT_INSTRUCTION, &refs))],
            &mut meter,
        )
        .await?;
        let split = split_tagged(&content);
        thinking = split.0;
        answer = split.1;
    }

    Ok(AgentAnswer {
        thinking,
        answer,
        calls_made: meter.calls,
        ledger: meter.ledger,
        incomplete: false,
        retrievals: 0,
    })
}

fn format_hits(hits: &[crate::retrieval::RetrievedDoc]) -> String {
    if hits.is_empty() {
        return "Search results: none".to_string();
    }
    let mut out = String::from("Search results:");
    for (i, hit) in hits.iter().enumerate() {
        out.push_str(&format!("\n{}. [{}] {}", i + 1, hit.doc_id, hit.snippet));
    }
    out
}

/// Multi-turn search: each turn the model either emits one
/// `<search>query</search>` directive (answered with retriever snippets) or
/// a final answer. Backend calls are capped at `search_rounds`; hitting the
/// cap while still searching yields the last turn's content as a
/// best-effort answer flagged incomplete.
pub async fn search_agent(
    input: &str,
    backend: &dyn ChatBackend,
    retriever: Option<&dyn Retriever>,
    cfg: &AgentConfig,
) -> Result<AgentAnswer, AgentError> {
    if input.is_empty() {
        return Err(Meter::default().fail(AgentErrorKind::EmptyInput));
    }
    let Some(retriever) = retriever else {
        return Err(Meter::default().fail(AgentErrorKind::RetrieverMissing));
    };
    let mut meter = Meter::default();
    let mut retrievals: u64 = 0;
    let system = tagged_system("Search LLM", None, SEARCH_OUTPUT);
    let mut messages = vec![Message::user(render_user(COT_INSTRUCTION, &[input]))];

    loop {
        let content = call(backend, cfg, system.clone(), messages.clone(), &mut meter).await?;
        match extract_channel(&content, "search") {
            Some(query) if meter.calls < cfg.search_rounds as u64 => {
                let hits = retriever
                    .search(&query, cfg.search_top_k)
                    .map_err(|e| meter.fail(AgentErrorKind::Retriever(e)))?;
                retrievals += 1;
                messages.push(Message::assistant(content));
                messages.push(Message::user(format_hits(&hits)));
            }
            Some(_) => {
                // Round budget exhausted while still searching.
                let (thinking, answer) = split_tagged(&content);
                return Ok(AgentAnswer {
                    thinking,
                    answer,
                    calls_made: meter.calls,
                    ledger: meter.ledger,
                    incomplete: true,
                    retrievals,
                });
            }
            None => {
                let (thinking, answer) = split_tagged(&content);
                return Ok(AgentAnswer {
                    thinking,
                    answer,
                    calls_made: meter.calls,
                    ledger: meter.ledger,
                    incomplete: false,
                    retrievals,
                });
            }
        }
    }
}

/// Dispatches one parsed [`AgentSpec`] to its workflow.
pub async fn run_agent(
    spec: &AgentSpec,
    input: &str,
    backend: &dyn ChatBackend,
    retriever: Option<&dyn Retriever>,
    cfg: &AgentConfig,
) -> Result<AgentAnswer, AgentError> {
    match spec.agent_name {
        AgentName::CoT => cot_agent(input, backend, cfg).await,
        AgentName::Sc => sc_agent(input, backend, cfg).await,
        AgentName::Debate => {
            let roles = spec.debate_roles.clone().unwrap_or_default();
            debate_agent(input, &roles, backend, cfg).await
        }
        AgentName::Reflexion => reflexion_agent(input, backend, cfg).await,
        AgentName::WebSearch => search_agent(input, backend, retriever, cfg).await,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{approx_tokens, request_prompt_tokens, ChatResponse};
    use async_trait::async_trait;
    use std::sync::atomic::{AtomicU64, Ordering};

    /// Counts calls and answers from a fixed script of contents (wrapping
    /// around), independent of request content.
    struct CountingBackend {
        calls: AtomicU64,
        script: Vec<String>,
    }

    impl CountingBackend {
        fn new(script: Vec<&str>) -> CountingBackend {
            CountingBackend {
                calls: AtomicU64::new(0),
                script: script.into_iter().map(String::from).collect(),
            }
        }

        fn calls(&self) -> u64 {
            self.calls.load(Ordering::SeqCst)
        }
    }

    #[async_trait]
    impl ChatBackend for CountingBackend {
        async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst) as usize;
            let content = self.script[n % self.script.len()].clone();
            Ok(ChatResponse {
                prompt_tokens: request_prompt_tokens(request),
                completion_tokens: approx_tokens(&content),
                content,
            })
        }
    }

    fn answer(text: &str) -> String {
        format!("<thinking>t</thinking><answer>{text}</answer>")
    }

    #[tokio::test]
    async fn cot_makes_exactly_one_call() {
        let backend = CountingBackend::new(vec!["<thinking>(20+9)*(30+7)</thinking><answer>1073</answer>"]);
        let out = cot_agent("compute (20+9)*(30+7)", &backend, &AgentConfig::default())
            .await
            .unwrap();
        assert_eq!(out.answer, "1073");
        assert_eq!(out.calls_made, 1);
        assert_eq!(backend.calls(), 1);
        assert_eq!(out.ledger.llm_calls, 1);
    }

    #[tokio::test]
    async fn cot_rejects_empty_input() {
        let backend = CountingBackend::new(vec!["x"]);
        let err = cot_agent("", &backend, &AgentConfig::default()).await.unwrap_err();
        assert_eq!(err.kind, AgentErrorKind::EmptyInput);
        assert_eq!(err.calls_made, 0);
    }

    #[test]
    fn majority_vote_cases() {
        let v = |xs: &[&str]| majority_vote(&xs.iter().map(|s| s.to_string()).collect::<Vec<_>>());
        assert_eq!(v(&["x", "y", "x"]), Some("x".into()));
        assert_eq!(v(&["y", "x"]), Some("y".into()));
        assert_eq!(v(&["7", "7", "3", "7", "3"]), Some("7".into()));
        assert_eq!(v(&["a ", " a", "b"]), Some("a".into()));
        assert_eq!(majority_vote(&[]), None);
    }

    #[tokio::test]
    async fn sc_votes_over_samples() {
        let backend = CountingBackend::new(vec![
            &answer("7"),
            &answer("7"),
            &answer("3"),
            &answer("7"),
            &answer("3"),
        ]);
        let out = sc_agent("task", &backend, &AgentConfig::default()).await.unwrap();
        assert_eq!(out.answer, "7");
        assert_eq!(out.calls_made, 5);
        assert_eq!(out.ledger.llm_calls, 5);
    }

    #[tokio::test]
    async fn sc_single_sample_degenerates_to_cot() {
        let backend = CountingBackend::new(vec![&answer("9")]);
        let cfg = AgentConfig { sc_samples: 1, ..AgentConfig::default() };
        let out = sc_agent("task", &backend, &cfg).await.unwrap();
        assert_eq!(out.answer, "9");
        assert_eq!(out.calls_made, 1);
    }

    #[tokio::test]
    async fn debate_call_formula() {
        let backend = CountingBackend::new(vec![&answer("yes")]);
        let roles = vec!["Mathematics Professor".to_string(), "Statistics Teacher".to_string()];
        let out = debate_agent("task", &roles, &backend, &AgentConfig::default())
            .await
            .unwrap();
        assert_eq!(out.calls_made, 11); // 2 roles * 5 rounds + 1

        let backend = CountingBackend::new(vec![&answer("yes")]);
        let roles3 = vec!["A1".into(), "B2".into(), "C3".into()];
        let cfg = AgentConfig { debate_rounds: 1, ..AgentConfig::default() };
        let out = debate_agent("task", &roles3, &backend, &cfg).await.unwrap();
        assert_eq!(out.calls_made, 4); // 3 roles * 1 round + 1
    }

    #[tokio::test]
    async fn debate_rejects_single_role() {
        let backend = CountingBackend::new(vec!["x"]);
        let err = debate_agent("t", &["only".to_string()], &backend, &AgentConfig::default())
            .await
            .unwrap_err();
        assert_eq!(err.kind, AgentErrorKind::TooFewRoles);
    }

    #[tokio::test]
    async fn reflexion_early_exit_costs_two_calls() {
        let backend = CountingBackend::new(vec![
            &answer("42"),
            "<feedback>fine</feedback><correct>True</correct>",
        ]);
        let out = reflexion_agent("task", &backend, &AgentConfig::default())
            .await
            .unwrap();
        assert_eq!(out.answer, "42");
        assert_eq!(out.calls_made, 2);
    }

    #[tokio::test]
    async fn reflexion_never_accepted_runs_full_budget() {
        let backend = CountingBackend::new(vec![
            &answer("guess"),
            "<feedback>wrong</feedback><correct>False</correct>",
        ]);
        let out = reflexion_agent("task", &backend, &AgentConfig::default())
            .await
            .unwrap();
        assert_eq!(out.calls_made, 11); // 1 + 5 * 2
    }

    #[tokio::test]
    async fn reflexion_lowercase_true_does_not_stop() {
        let backend = CountingBackend::new(vec![
            &answer("guess"),
            "<feedback>ok</feedback><correct>true</correct>",
        ]);
        let out = reflexion_agent("task", &backend, &AgentConfig::default())
            .await
            .unwrap();
        // The exact-match contract keeps the loop running to the budget.
        assert_eq!(out.calls_made, 11);
    }

    fn test_retriever() -> crate::retrieval::Bm25Retriever {
        crate::retrieval::Bm25Retriever::new(vec![
            ("doc-1".into(), "the vacancy rate in new york is 1.4 percent".into()),
        ])
    }

    #[tokio::test]
    async fn search_query_then_answer() {
        let backend = CountingBackend::new(vec![
            "<search>new york vacancy</search>",
            &answer("1.4 percent"),
        ]);
        let retriever = test_retriever();
        let out = search_agent("find the rate", &backend, Some(&retriever), &AgentConfig::default())
            .await
            .unwrap();
        assert_eq!(out.answer, "1.4 percent");
        assert_eq!(out.calls_made, 2);
        assert_eq!(out.retrievals, 1);
        assert!(!out.incomplete);
    }

    #[tokio::test]
    async fn search_immediate_answer() {
        let backend = CountingBackend::new(vec![&answer("done")]);
        let retriever = test_retriever();
        let out = search_agent("q", &backend, Some(&retriever), &AgentConfig::default())
            .await
            .unwrap();
        assert_eq!(out.calls_made, 1);
        assert_eq!(out.retrievals, 0);
    }

    #[tokio::test]
    async fn search_stops_at_round_budget() {
        let backend = CountingBackend::new(vec!["<search>more</search>"]);
        let retriever = test_retriever();
        let out = search_agent("q", &backend, Some(&retriever), &AgentConfig::default())
            .await
            .unwrap();
        assert_eq!(out.calls_made, 5);
        assert!(out.incomplete);
        assert_eq!(out.retrievals, 4);
    }

    #[tokio::test]
    async fn ledger_tokens_sum_exactly() {
        let backend = CountingBackend::new(vec![&answer("7")]);
        let out = sc_agent("task text here", &backend, &AgentConfig::default())
            .await
            .unwrap();
        let per_call_completion = approx_tokens(&answer("7"));
        assert_eq!(out.ledger.completion_tokens, 5 * per_call_completion);
        assert_eq!(out.ledger.llm_calls, 5);
    }
}
