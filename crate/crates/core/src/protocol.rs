//! Parsing of single-shot orchestrator output into structured decisions.
//!
//! An orchestrator emits one completion containing tagged channels:
//! `<thinking>`, zero or more `<agent>` blocks, at most one `<edge>` block
//! and an optional `<answer>`. Under Low degree-of-MAS the completion is
//! either a direct answer or a single delegation; under High degree-of-MAS
//! it may declare a full agent graph. Parse failures are ordinary values
//! (they map to reward 0 downstream), never panics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// User-chosen constraint level on the orchestration space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DomLevel {
    /// At most one sub-agent, no explicit inter-agent topology.
    Low,
    /// Unconstrained agent graphs.
    High,
}

impl DomLevel {
    pub fn parse(s: &str) -> Option<DomLevel> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Some(DomLevel::Low),
            "high" => Some(DomLevel::High),
            _ => None,
        }
    }
}

impl std::fmt::Display for DomLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DomLevel::Low => write!(f, "low"),
            DomLevel::High => write!(f, "high"),
        }
    }
}

/// The closed set of supported sub-agent workflows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentName {
    CoT,
    Sc,
    Debate,
    Reflexion,
    WebSearch,
}

impl AgentName {
    /// Names match case-insensitively; anything outside the set is rejected.
    pub fn parse(s: &str) -> Option<AgentName> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cotagent" => Some(AgentName::CoT),
            "scagent" => Some(AgentName::Sc),
            "debateagent" => Some(AgentName::Debate),
            "reflexionagent" => Some(AgentName::Reflexion),
            "websearchagent" => Some(AgentName::WebSearch),
            _ => None,
        }
    }

    /// Canonical wire spelling.
    pub fn wire_name(&self) -> &'static str {
        match self {
            AgentName::CoT => "CoTAgent",
            AgentName::Sc => "SCAgent",
            AgentName::Debate => "DebateAgent",
            AgentName::Reflexion => "ReflexionAgent",
            AgentName::WebSearch => "WebSearchAgent",
        }
    }
}

/// One declared sub-agent.
///
/// `agent_id` is present under High DoM (edge endpoints refer to it);
/// `output_id` is the Low-DoM handle the answer channel may reference.
/// An empty `agent_input` means "inherit the original question".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub agent_id: Option<String>,
    pub agent_name: AgentName,
    pub description: String,
    pub agent_input: String,
    pub debate_roles: Option<Vec<String>>,
    pub output_id: Option<String>,
}

/// The raw completion split into channels, before any semantic parsing.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OrchestratorOutput {
    pub raw_text: String,
    pub thinking: Option<String>,
    /// Maximal non-overlapping `<agent>…</agent>` spans, in document order.
    pub agent_blocks: Vec<String>,
    /// First complete `<edge>…</edge>` span, if any.
    pub edge_block: Option<String>,
    pub answer: Option<String>,
    /// Protocol violation flag: number of complete `<edge>` blocks beyond
    /// the first. The prompt mandates exactly one edge block per solution.
    pub extra_edge_blocks: usize,
}

/// Parsed decision under Low DoM.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LowDomDecision {
    DirectAnswer(String),
    SingleDelegation {
        spec: AgentSpec,
        /// Raw answer-channel content, typically the agent's output id.
        answer_ref: Option<String>,
    },
}

/// Parsed plan under High DoM. Graph validation happens downstream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum HighDomPlan {
    DirectAnswer(String),
    Graph {
        agents: Vec<AgentSpec>,
        edges: Vec<(String, String)>,
        /// True when an `<answer>` channel coexisted with agent blocks.
        /// The sink's output wins; the conflict is kept for diagnostics.
        answer_channel_conflict: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("missing required field <{0}>")]
    MissingField(&'static str),
    #[error("invalid agent name {0:?}")]
    InvalidAgentName(String),
    #[error("agent id {0:?} must match [A-Za-z0-9_]+")]
    InvalidAgentId(String),
    #[error("debate_roles is not a list of two or more quoted roles: {0}")]
    BadRoleList(String),
    #[error("low degree-of-MAS allows at most one agent, found {0}")]
    TooManyAgents(usize),
    #[error("neither an agent block nor an answer channel present")]
    MissingAnswer,
    #[error("multiple agents require edges")]
    MultipleAgentsNoEdges,
    #[error("duplicate agent id {0:?}")]
    DuplicateAgentId(String),
    #[error("more than one <edge> block in a single solution")]
    DuplicateEdgeBlock,
}

/// Returns the trimmed content of the first complete `<tag>…</tag>` span.
/// Unclosed tags yield `None`, never a partial match. Tag names match
/// exactly and case-sensitively.
pub fn extract_channel(text: &str, tag: &str) -> Option<String> {
    extract_span(text, tag).map(|(_, content, _)| content.trim().to_string())
}

/// Like [`extract_channel`] but also reports the byte range of the full
/// span (including tags), enabling iteration over repeated blocks.
fn extract_span<'a>(text: &'a str, tag: &str) -> Option<(usize, &'a str, usize)> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = text.find(&open)?;
    let content_start = start + open.len();
    let rel_end = text[content_start..].find(&close)?;
    let content_end = content_start + rel_end;
    Some((start, &text[content_start..content_end], content_end + close.len()))
}

/// All maximal non-overlapping `<tag>…</tag>` spans in document order.
fn extract_all_spans(text: &str, tag: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some((_, content, end)) = extract_span(rest, tag) {
        out.push(content.trim().to_string());
        rest = &rest[end..];
    }
    out
}

/// Splits a raw completion into its channels. This stage never fails;
/// structural violations surface during [`parse_low_dom`] / [`parse_high_dom`].
pub fn split_channels(raw: &str) -> OrchestratorOutput {
    let edge_blocks = extract_all_spans(raw, "edge");
    OrchestratorOutput {
        raw_text: raw.to_string(),
        thinking: extract_channel(raw, "thinking"),
        agent_blocks: extract_all_spans(raw, "agent"),
        edge_block: edge_blocks.first().cloned(),
        answer: extract_channel(raw, "answer"),
        extra_edge_blocks: edge_blocks.len().saturating_sub(1),
    }
}

fn valid_identifier(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

/// Extracts the quoted strings of a role list. Both the bracketed form
/// `["A", "B"]` and newline-separated quoted items are accepted; single or
/// double quotes work. Anything without at least one quoted item is
/// unparseable.
fn parse_role_list(text: &str) -> Option<Vec<String>> {
    let mut roles = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c == '"' || c == '\'' {
            let rest = &text[i + c.len_utf8()..];
            if let Some(end) = rest.find(c) {
                roles.push(rest[..end].to_string());
                // Skip past the closing quote.
                let skip_to = i + c.len_utf8() + end;
                while let Some(&(j, _)) = chars.peek() {
                    if j <= skip_to {
                        chars.next();
                    } else {
                        break;
                    }
                }
            }
        }
    }
    if roles.is_empty() {
        None
    } else {
        Some(roles)
    }
}

/// Parses one `<agent>` block into an [`AgentSpec`].
///
/// Arguments are looked up inside `<required_arguments>` when present and
/// fall back to the whole block otherwise (models drift on nesting).
/// Missing or empty `agent_input` normalizes to the empty string, meaning
/// "inherit the original question".
pub fn parse_agent_block(block: &str) -> Result<AgentSpec, ParseError> {
    let name_raw = extract_channel(block, "agent_name")
        .filter(|s| !s.is_empty())
        .ok_or(ParseError::MissingField("agent_name"))?;
    let agent_name =
        AgentName::parse(&name_raw).ok_or_else(|| ParseError::InvalidAgentName(name_raw.clone()))?;

    let agent_id = extract_channel(block, "agent_id").filter(|s| !s.is_empty());
    if let Some(id) = &agent_id {
        if !valid_identifier(id) {
            return Err(ParseError::InvalidAgentId(id.clone()));
        }
    }
    let output_id = extract_channel(block, "agent_output_id").filter(|s| !s.is_empty());

    let args_region = extract_channel(block, "required_arguments");
    let args: &str = args_region.as_deref().unwrap_or(block);

    let agent_input = extract_channel(args, "agent_input").unwrap_or_default();

    let debate_roles = match extract_channel(args, "debate_roles") {
        Some(raw) if !raw.is_empty() => {
            let roles =
                parse_role_list(&raw).ok_or_else(|| ParseError::BadRoleList(raw.clone()))?;
            Some(roles)
        }
        _ => None,
    };

    if agent_name == AgentName::Debate {
        let roles = debate_roles
            .as_ref()
            .ok_or(ParseError::MissingField("debate_roles"))?;
        if roles.len() < 2 || roles.iter().any(|r| r.trim().len() < 2) {
            return Err(ParseError::BadRoleList(format!("{roles:?}")));
        }
    }

    Ok(AgentSpec {
        agent_id,
        agent_name,
        description: extract_channel(block, "agent_description").unwrap_or_default(),
        agent_input,
        debate_roles,
        output_id,
    })
}

/// Parses a raw completion under Low DoM: a direct answer when no agent
/// block exists, otherwise a single delegation.
pub fn parse_low_dom(raw: &str) -> Result<LowDomDecision, ParseError> {
    let out = split_channels(raw);
    match out.agent_blocks.len() {
        0 => match out.answer {
            Some(answer) => Ok(LowDomDecision::DirectAnswer(answer)),
            None => Err(ParseError::MissingAnswer),
        },
        1 => {
            let spec = parse_agent_block(&out.agent_blocks[0])?;
            Ok(LowDomDecision::SingleDelegation {
                spec,
                answer_ref: out.answer,
            })
        }
        n => Err(ParseError::TooManyAgents(n)),
    }
}

/// Parses `<from>…</from><to>…</to>` pairs from an edge block, in document
/// order. A `<from>` without a following `<to>` is dropped.
fn parse_edge_pairs(edge_block: &str) -> Vec<(String, String)> {
    let mut edges = Vec::new();
    let mut rest = edge_block;
    while let Some((_, from, from_end)) = extract_span(rest, "from") {
        let after_from = &rest[from_end..];
        let Some((_, to, to_end)) = extract_span(after_from, "to") else {
            break;
        };
        edges.push((from.trim().to_string(), to.trim().to_string()));
        rest = &after_from[to_end..];
    }
    edges
}

/// Parses a raw completion under High DoM. Zero agents fall back to the
/// answer channel; multiple agents require a non-empty edge block. Agent
/// count in equals node count out, or an error — blocks are never silently
/// dropped.
pub fn parse_high_dom(raw: &str) -> Result<HighDomPlan, ParseError> {
    let out = split_channels(raw);

    if out.agent_blocks.is_empty() {
        return match out.answer {
            Some(answer) => Ok(HighDomPlan::DirectAnswer(answer)),
            None => Err(ParseError::MissingAnswer),
        };
    }
    if out.extra_edge_blocks > 0 {
        return Err(ParseError::DuplicateEdgeBlock);
    }

    let mut agents = Vec::with_capacity(out.agent_blocks.len());
    let mut seen = std::collections::HashSet::new();
    for block in &out.agent_blocks {
        let spec = parse_agent_block(block)?;
        let id = spec
            .agent_id
            .clone()
            .ok_or(ParseError::MissingField("agent_id"))?;
        if !seen.insert(id.clone()) {
            return Err(ParseError::DuplicateAgentId(id));
        }
        agents.push(spec);
    }

    let edges = out
        .edge_block
        .as_deref()
        .map(parse_edge_pairs)
        .unwrap_or_default();

    if agents.len() > 1 && edges.is_empty() {
        return Err(ParseError::MultipleAgentsNoEdges);
    }

    Ok(HighDomPlan::Graph {
        agents,
        edges,
        answer_channel_conflict: out.answer.is_some(),
    })
}

fn serialize_agent_block(spec: &AgentSpec, buf: &mut String) {
    buf.push_str("<agent>\n");
    if let Some(id) = &spec.agent_id {
        buf.push_str(&format!("<agent_id>{id}</agent_id>\n"));
    }
    buf.push_str(&format!(
        "<agent_name>{}</agent_name>\n",
        spec.agent_name.wire_name()
    ));
    buf.push_str(&format!(
        "<agent_description>{}</agent_description>\n",
        spec.description
    ));
    buf.push_str("<required_arguments>\n");
    buf.push_str(&format!("<agent_input>{}</agent_input>\n", spec.agent_input));
    if let Some(roles) = &spec.debate_roles {
        let quoted: Vec<String> = roles.iter().map(|r| format!("{r:?}")).collect();
        buf.push_str(&format!(
            "<debate_roles>[{}]</debate_roles>\n",
            quoted.join(", ")
        ));
    }
    buf.push_str("</required_arguments>\n");
    if let Some(oid) = &spec.output_id {
        buf.push_str(&format!("<agent_output_id>{oid}</agent_output_id>\n"));
    }
    buf.push_str("</agent>\n");
}

/// Renders a Low-DoM decision back to the tagged wire form. Parsing the
/// result yields an identical decision (round-trip stability).
pub fn serialize_low_dom(decision: &LowDomDecision) -> String {
    let mut buf = String::new();
    match decision {
        LowDomDecision::DirectAnswer(answer) => {
            buf.push_str(&format!("<answer>{answer}</answer>\n"));
        }
        LowDomDecision::SingleDelegation { spec, answer_ref } => {
            serialize_agent_block(spec, &mut buf);
            if let Some(r) = answer_ref {
                buf.push_str(&format!("<answer>{r}</answer>\n"));
            }
        }
    }
    buf
}

/// Renders a High-DoM plan back to the tagged wire form.
pub fn serialize_high_dom(plan: &HighDomPlan) -> String {
    let mut buf = String::new();
    match plan {
        HighDomPlan::DirectAnswer(answer) => {
            buf.push_str(&format!("<answer>{answer}</answer>\n"));
        }
        HighDomPlan::Graph {
            agents,
            edges,
            answer_channel_conflict: _,
        } => {
            for spec in agents {
                serialize_agent_block(spec, &mut buf);
                buf.push('\n');
            }
            if !edges.is_empty() {
                buf.push_str("<edge>\n");
                for (from, to) in edges {
                    buf.push_str(&format!("<from>{from}</from><to>{to}</to>\n"));
                }
                buf.push_str("</edge>\n");
            }
        }
    }
    buf
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extract_channel_first_complete_span() {
        assert_eq!(
            extract_channel("<answer>1073</answer>", "answer"),
            Some("1073".into())
        );
        assert_eq!(extract_channel("no tags here", "answer"), None);
        assert_eq!(
            extract_channel("<agent><agent_id>A1</agent_id></agent>", "agent_id"),
            Some("A1".into())
        );
        // Unclosed tags never yield partial matches.
        assert_eq!(extract_channel("<answer>dangling", "answer"), None);
        // Malformed trailing content is ignored; the first complete span wins.
        assert_eq!(
            extract_channel("<answer>first</answer> junk </answer>", "answer"),
            Some("first".into())
        );
    }

    #[test]
    fn extract_channel_is_case_sensitive_on_tags() {
        assert_eq!(extract_channel("<Answer>x</Answer>", "answer"), None);
    }

    #[test]
    fn split_channels_empty_input() {
        let out = split_channels("");
        assert!(out.thinking.is_none());
        assert!(out.agent_blocks.is_empty());
        assert!(out.edge_block.is_none());
        assert!(out.answer.is_none());
        assert_eq!(out.extra_edge_blocks, 0);
    }

    #[test]
    fn split_channels_thinking_only() {
        let out = split_channels("<thinking>plan</thinking>");
        assert_eq!(out.thinking.as_deref(), Some("plan"));
        assert!(out.agent_blocks.is_empty());
        assert!(out.answer.is_none());
    }

    #[test]
    fn split_channels_counts_extra_edge_blocks() {
        let raw = "<edge><from>A</from><to>B</to></edge><edge><from>B</from><to>C</to></edge>";
        let out = split_channels(raw);
        assert!(out.edge_block.is_some());
        assert_eq!(out.extra_edge_blocks, 1);
    }

    fn cot_block(id: &str, input: &str) -> String {
        format!(
            "<agent>\n<agent_id>{id}</agent_id>\n<agent_name>CoTAgent</agent_name>\n\
             <agent_description>d</agent_description>\n<required_arguments>\n\
             <agent_input>{input}</agent_input>\n</required_arguments>\n</agent>"
        )
    }

    #[test]
    fn parse_agent_block_low_dom_example() {
        let block = "<agent_name>CoTAgent</agent_name>\
            <agent_description>Definite integrals with one Chain-of-Thought call.</agent_description>\
            <required_arguments><agent_input></agent_input></required_arguments>\
            <agent_output_id>calc_agent_output</agent_output_id>";
        let spec = parse_agent_block(block).unwrap();
        assert_eq!(spec.agent_name, AgentName::CoT);
        assert_eq!(spec.output_id.as_deref(), Some("calc_agent_output"));
        assert_eq!(spec.agent_input, "");
        assert!(spec.agent_id.is_none());
    }

    #[test]
    fn parse_agent_block_debate_roles() {
        let block = "<agent_name>DebateAgent</agent_name><required_arguments>\
            <agent_input></agent_input>\
            <debate_roles>[\"Mathematics Professor\", \"Statistics Teacher\"]</debate_roles>\
            </required_arguments><agent_output_id>compare_agent_output</agent_output_id>";
        let spec = parse_agent_block(block).unwrap();
        assert_eq!(
            spec.debate_roles.as_deref(),
            Some(&["Mathematics Professor".to_string(), "Statistics Teacher".to_string()][..])
        );
    }

    #[test]
    fn parse_agent_block_newline_roles_normalize() {
        let block = "<agent_name>DebateAgent</agent_name><required_arguments>\
            <agent_input></agent_input>\
            <debate_roles>\"Sceptic\"\n\"Advocate\"</debate_roles>\
            </required_arguments>";
        let spec = parse_agent_block(block).unwrap();
        assert_eq!(spec.debate_roles.unwrap().len(), 2);
    }

    #[test]
    fn parse_agent_block_rejections() {
        assert_eq!(
            parse_agent_block("<agent_name>FooAgent</agent_name>"),
            Err(ParseError::InvalidAgentName("FooAgent".into()))
        );
        assert_eq!(
            parse_agent_block("<agent_description>d</agent_description>"),
            Err(ParseError::MissingField("agent_name"))
        );
        // Debate with one role fails the two-role minimum.
        let one_role = "<agent_name>DebateAgent</agent_name><required_arguments>\
            <debate_roles>[\"Solo\"]</debate_roles></required_arguments>";
        assert!(matches!(
            parse_agent_block(one_role),
            Err(ParseError::BadRoleList(_))
        ));
        // Roles present but not quoted.
        let unquoted = "<agent_name>DebateAgent</agent_name><required_arguments>\
            <debate_roles>Professor, Teacher</debate_roles></required_arguments>";
        assert!(matches!(
            parse_agent_block(unquoted),
            Err(ParseError::BadRoleList(_))
        ));
        let bad_id = "<agent_id>A 1</agent_id><agent_name>CoTAgent</agent_name>";
        assert!(matches!(
            parse_agent_block(bad_id),
            Err(ParseError::InvalidAgentId(_))
        ));
    }

    #[test]
    fn parse_low_dom_direct_answer() {
        let raw = "<thinking>(20+9)*(30+7) = 600 + 140 + 270 + 63 = 1073.</thinking>\
            <answer>1073</answer>";
        assert_eq!(
            parse_low_dom(raw).unwrap(),
            LowDomDecision::DirectAnswer("1073".into())
        );
    }

    #[test]
    fn parse_low_dom_single_delegation() {
        let raw = "<thinking>delegate</thinking>\
            <agent><agent_name>ReflexionAgent</agent_name>\
            <required_arguments><agent_input></agent_input></required_arguments>\
            <agent_output_id>reflexion_agent_output</agent_output_id></agent>\
            <answer>reflexion_agent_output</answer>";
        match parse_low_dom(raw).unwrap() {
            LowDomDecision::SingleDelegation { spec, answer_ref } => {
                assert_eq!(spec.agent_name, AgentName::Reflexion);
                assert_eq!(spec.output_id.as_deref(), Some("reflexion_agent_output"));
                assert_eq!(answer_ref.as_deref(), Some("reflexion_agent_output"));
            }
            other => panic!("unexpected decision {other:?}"),
        }
    }

    #[test]
    fn parse_low_dom_rejects_two_agents() {
        let raw = format!("{}{}", cot_block("A", ""), cot_block("B", ""));
        assert_eq!(parse_low_dom(&raw), Err(ParseError::TooManyAgents(2)));
    }

    #[test]
    fn parse_low_dom_missing_answer() {
        assert_eq!(
            parse_low_dom("<thinking>hm</thinking>"),
            Err(ParseError::MissingAnswer)
        );
    }

    #[test]
    fn parse_high_dom_single_agent_no_edges() {
        let raw = cot_block("SEARCH", "");
        match parse_high_dom(&raw).unwrap() {
            HighDomPlan::Graph { agents, edges, .. } => {
                assert_eq!(agents.len(), 1);
                assert!(edges.is_empty());
            }
            other => panic!("unexpected plan {other:?}"),
        }
    }

    #[test]
    fn parse_high_dom_multiple_agents_require_edges() {
        let raw = format!("{}{}", cot_block("A", ""), cot_block("B", "use ${A}"));
        assert_eq!(parse_high_dom(&raw), Err(ParseError::MultipleAgentsNoEdges));
    }

    #[test]
    fn parse_high_dom_duplicate_id() {
        let raw = format!(
            "{}{}<edge><from>A</from><to>A</to></edge>",
            cot_block("A", ""),
            cot_block("A", "")
        );
        assert_eq!(
            parse_high_dom(&raw),
            Err(ParseError::DuplicateAgentId("A".into()))
        );
    }

    #[test]
    fn parse_high_dom_second_edge_block_is_hard_error() {
        let raw = format!(
            "{}{}<edge><from>A</from><to>B</to></edge><edge><from>A</from><to>B</to></edge>",
            cot_block("A", ""),
            cot_block("B", "${A}")
        );
        assert_eq!(parse_high_dom(&raw), Err(ParseError::DuplicateEdgeBlock));
    }

    #[test]
    fn parse_high_dom_answer_channel_conflict_is_flagged() {
        let raw = format!("{}<answer>ignored</answer>", cot_block("A", ""));
        match parse_high_dom(&raw).unwrap() {
            HighDomPlan::Graph {
                answer_channel_conflict,
                ..
            } => assert!(answer_channel_conflict),
            other => panic!("unexpected plan {other:?}"),
        }
    }

    #[test]
    fn parse_high_dom_edge_pairs_in_document_order() {
        let raw = format!(
            "{}{}{}<edge><from>A</from><to>C</to>\n<from>B</from><to>C</to></edge>",
            cot_block("A", ""),
            cot_block("B", ""),
            cot_block("C", "${A} ${B}")
        );
        match parse_high_dom(&raw).unwrap() {
            HighDomPlan::Graph { edges, .. } => {
                assert_eq!(
                    edges,
                    vec![("A".into(), "C".into()), ("B".into(), "C".into())]
                );
            }
            other => panic!("unexpected plan {other:?}"),
        }
    }

    #[test]
    fn whitespace_outside_tags_is_irrelevant() {
        let tight = format!("{}<answer>x</answer>", cot_block("A", ""));
        let loose = format!("\n\n  {}  \n\n <answer>x</answer> \n", cot_block("A", ""));
        assert_eq!(parse_high_dom(&tight), parse_high_dom(&loose));
    }

    #[test]
    fn serialize_round_trip_low() {
        let raw = "<agent><agent_name>SCAgent</agent_name>\
            <agent_description>arith</agent_description>\
            <required_arguments><agent_input></agent_input></required_arguments>\
            <agent_output_id>math_agent_output</agent_output_id></agent>\
            <answer>math_agent_output</answer>";
        let d1 = parse_low_dom(raw).unwrap();
        let d2 = parse_low_dom(&serialize_low_dom(&d1)).unwrap();
        assert_eq!(d1, d2);
    }

    #[test]
    fn serialize_round_trip_high() {
        let raw = format!(
            "{}{}<edge><from>A</from><to>B</to></edge>",
            cot_block("A", "find rates"),
            cot_block("B", "summarize ${A}")
        );
        let p1 = parse_high_dom(&raw).unwrap();
        let reser = serialize_high_dom(&p1);
        let p2 = parse_high_dom(&reser).unwrap();
        match (p1, p2) {
            (
                HighDomPlan::Graph {
                    agents: a1,
                    edges: e1,
                    ..
                },
                HighDomPlan::Graph {
                    agents: a2,
                    edges: e2,
                    ..
                },
            ) => {
                assert_eq!(a1, a2);
                assert_eq!(e1, e2);
            }
            other => panic!("unexpected plans {other:?}"),
        }
    }
}
