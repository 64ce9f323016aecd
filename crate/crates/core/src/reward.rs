//! Prediction extraction, correctness judging, binary task rewards and
//! group-normalized advantages.

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, ChatBackend, ChatRequest, Message};
use crate::util::collapse_whitespace;

/// How a judgment was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JudgeKind {
    ExactMatch,
    ExternalJudge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub per_answer: Vec<bool>,
    pub overall: bool,
    pub judge_kind: JudgeKind,
    /// Raw verdict text when an external judge decided.
    pub raw_verdict: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    #[error("advantage group needs at least two rewards, got {0}")]
    GroupTooSmall(usize),
    #[error("judge backend failed: {0}")]
    JudgeBackend(BackendError),
    #[error("judge verdict unparseable: {0:?}")]
    UnparseableVerdict(String),
}

/// Contents of every `\boxed{…}` span in order, with balanced-brace
/// matching so nested braces stay intact.
pub fn extract_boxed(text: &str) -> Vec<String> {
    const MARKER: &str = "\\boxed{";
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find(MARKER) {
        let body_start = start + MARKER.len();
        let bytes = rest.as_bytes();
        let mut depth = 1usize;
        let mut i = body_start;
        let mut end = None;
        while i < bytes.len() {
            match bytes[i] {
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(i);
                        break;
                    }
                }
                _ => {}
            }
            i += 1;
        }
        match end {
            Some(end) => {
                out.push(rest[body_start..end].to_string());
                rest = &rest[end + 1..];
            }
            None => break, // unbalanced tail; ignore
        }
    }
    out
}

/// Wraps answers in `\boxed{…}` separated by blank lines; the inverse of
/// [`extract_boxed`] for brace-balanced payloads.
pub fn wrap_boxed(answers: &[String]) -> String {
    answers
        .iter()
        .map(|a| format!("\\boxed{{{a}}}"))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Trim, collapse internal whitespace, and strip leading zeros from pure
/// (optionally signed) integers.
fn normalize_answer(s: &str) -> String {
    let collapsed = collapse_whitespace(s);
    let (sign, digits) = match collapsed.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", collapsed.as_str()),
    };
    if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
        let stripped = digits.trim_start_matches('0');
        let canonical = if stripped.is_empty() { "0" } else { stripped };
        if canonical == "0" {
            return "0".to_string();
        }
        return format!("{sign}{canonical}");
    }
    collapsed
}

/// Positional string-match judgment. Length mismatches mark the unmatched
/// positions false and fail the overall verdict.
pub fn judge_exact(pred: &[String], gold: &[String]) -> Judgment {
    let n = pred.len().max(gold.len());
    let mut per_answer = Vec::with_capacity(n);
    for i in 0..n {
        let matched = match (pred.get(i), gold.get(i)) {
            (Some(p), Some(g)) => normalize_answer(p) == normalize_answer(g),
            _ => false,
        };
        per_answer.push(matched);
    }
    let overall = pred.len() == gold.len() && per_answer.iter().all(|&b| b);
    Judgment { per_answer, overall, judge_kind: JudgeKind::ExactMatch, raw_verdict: None }
}

/// Binary task reward: 1 iff the judgment holds overall.
pub fn compute_reward(judgment: &Judgment) -> u8 {
    judgment.overall as u8
}

/// Fractional per-answer credit for long-horizon evaluation; off by
/// default, selected by flag where supported.
pub fn compute_fractional_reward(judgment: &Judgment) -> f64 {
    if judgment.per_answer.is_empty() {
        return 0.0;
    }
    judgment.per_answer.iter().filter(|&&b| b).count() as f64 / judgment.per_answer.len() as f64
}

/// Group-normalized advantages: `(r - mean) / std` with the population
/// standard deviation. A zero-variance group gets all-zero advantages.
pub fn group_advantages(rewards: &[f64]) -> Result<Vec<f64>, RewardError> {
    let k = rewards.len();
    if k < 2 {
        return Err(RewardError::GroupTooSmall(k));
    }
    let mean = rewards.iter().sum::<f64>() / k as f64;
    let variance = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / k as f64;
    let std = variance.sqrt();
    if std == 0.0 {
        return Ok(vec![0.0; k]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

/// Same interface shape as a chat backend; kept separate so judge traffic
/// never mixes with sub-agent traffic.
#[async_trait]
pub trait JudgeBackend: Send + Sync {
    async fn complete(&self, request: &ChatRequest) -> Result<crate::backend::ChatResponse, BackendError>;
}

#[async_trait]
impl<T: ChatBackend + ?Sized> JudgeBackend for T {
    async fn complete(&self, request: &ChatRequest) -> Result<crate::backend::ChatResponse, BackendError> {
        ChatBackend::complete(self, request).await
    }
}

const JUDGE_RUBRIC: &str = "You are grading an answer. Compare the predicted answer to the reference answer for the given question. Judge semantic equivalence; ignore formatting. Respond with exactly one word on the first line: CORRECT or INCORRECT.";

/// Delegates correctness to an external judge with a fixed rubric. Errors
/// are surfaced, never silently mapped to reward 0.
pub async fn external_judge(
    pred: &[String],
    gold: &[String],
    question: &str,
    judge: &dyn JudgeBackend,
) -> Result<Judgment, RewardError> {
    let request = ChatRequest {
        system: JUDGE_RUBRIC.to_string(),
        messages: vec![Message::user(format!(
            "Question:\n{question}\n\nReference answer(s):\n{}\n\nPredicted answer(s):\n{}",
            gold.join("\n"),
            pred.join("\n"),
        ))],
        temperature: 0.0,
        max_tokens: 16,
    };
    let response = judge
        .complete(&request)
        .await
        .map_err(RewardError::JudgeBackend)?;
    let verdict = response.content.trim().to_string();
    let first = verdict
        .split_whitespace()
        .next()
        .unwrap_or_default()
        .to_ascii_uppercase();
    let overall = match first.as_str() {
        "CORRECT" => true,
        "INCORRECT" => false,
        _ => return Err(RewardError::UnparseableVerdict(verdict)),
    };
    Ok(Judgment {
        per_answer: vec![overall; gold.len().max(1)],
        overall,
        judge_kind: JudgeKind::ExternalJudge,
        raw_verdict: Some(verdict),
    })
}

/// One orchestration sample inside a rollout group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutItem {
    pub orchestration_text: String,
    pub trace_ref: String,
    pub reward: f64,
    pub advantage: f64,
}

/// K rewarded orchestrations for one task, with group-normalized
/// advantages. The hand-off record an external trainer consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup {
    pub task_id: String,
    pub k: usize,
    pub items: Vec<RolloutItem>,
}

impl RolloutGroup {
    /// Builds a group from rewarded samples, computing advantages.
    pub fn from_rewards(
        task_id: &str,
        samples: Vec<(String, String, f64)>,
    ) -> Result<RolloutGroup, RewardError> {
        let rewards: Vec<f64> = samples.iter().map(|(_, _, r)| *r).collect();
        let advantages = group_advantages(&rewards)?;
        Ok(RolloutGroup {
            task_id: task_id.to_string(),
            k: samples.len(),
            items: samples
                .into_iter()
                .zip(advantages)
                .map(|((orchestration_text, trace_ref, reward), advantage)| RolloutItem {
                    orchestration_text,
                    trace_ref,
                    reward,
                    advantage,
                })
                .collect(),
        })
    }
}
