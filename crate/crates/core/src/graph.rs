//! Validation of parsed High-DoM plans into executable DAGs.
//!
//! A valid orchestration graph is acyclic, has at least one start node,
//! exactly one sink (whose output is the final answer) and no node off a
//! start→sink path. Checks run in a fixed order so a graph with several
//! defects always reports the same first error: endpoint validity →
//! self-loops → start existence → unique sink → connectivity → acyclicity.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::AgentSpec;

/// Immutable, validated agent DAG. Node declaration order is preserved:
/// it seeds Kahn's queue and breaks ties deterministically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrchestrationGraph {
    /// Nodes in declaration order; every `agent_id` is present and unique.
    pub nodes: Vec<AgentSpec>,
    pub edges: Vec<(String, String)>,
    pub topo_order: Vec<String>,
    pub sink_id: String,
    pub start_ids: BTreeSet<String>,
    /// Exact duplicate edges dropped during validation (order-independent
    /// edge lists may repeat pairs; duplicates are removed and counted).
    pub deduped_edges: usize,
}

/// Structural metrics mirrored into reports and histograms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GraphStats {
    pub num_agents: usize,
    /// Number of nodes on the longest directed path (a single node counts 1).
    pub sequential_length: usize,
    /// Maximum in-degree over nodes.
    pub parallel_width: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("undefined agent referenced by edge ({0} -> {1})")]
    UndefinedEdgeEndpoint(String, String),
    #[error("self-loop on agent {0}")]
    SelfLoop(String),
    #[error("no start node")]
    NoStartNode,
    #[error("must have exactly one sink node, found none")]
    NoSink,
    #[error("must have exactly one sink node, found {0:?}")]
    MultipleSinks(Vec<String>),
    #[error("isolated agents exist: {0:?}")]
    IsolatedAgents(Vec<String>),
    #[error("cycle detected")]
    CycleDetected,
    #[error("agent {0} is missing an agent_id")]
    MissingAgentId(String),
    #[error("duplicate agent id {0:?}")]
    DuplicateAgentId(String),
    #[error("dataflow violations in strict mode: {0:?}")]
    DataflowViolations(Vec<Violation>),
}

/// One edge/data-flow inconsistency. Edges and `${id}` references must
/// mirror each other; violations are data, and whether they reject the
/// graph is a policy choice (strict vs lenient).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    /// `agent`'s input references `${referenced}` but no such edge exists.
    MissingEdge { agent: String, referenced: String },
    /// Edge `(from, to)` exists but `to`'s input never references `${from}`.
    MissingReference { from: String, to: String },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::MissingEdge { agent, referenced } => write!(
                f,
                "input of {agent} references ${{{referenced}}} but edge ({referenced} -> {agent}) is missing"
            ),
            Violation::MissingReference { from, to } => write!(
                f,
                "edge ({from} -> {to}) exists but input of {to} never references ${{{from}}}"
            ),
        }
    }
}

/// Kahn's algorithm with a FIFO queue seeded in node-declaration order.
/// An output shorter than the node count signals a cycle to the caller.
pub fn topo_sort(node_ids: &[String], edges: &[(String, String)]) -> Vec<String> {
    let mut in_deg: BTreeMap<&str, usize> = node_ids.iter().map(|id| (id.as_str(), 0)).collect();
    let mut adj: HashMap<&str, Vec<&str>> = HashMap::new();
    for (from, to) in edges {
        adj.entry(from.as_str()).or_default().push(to.as_str());
        if let Some(d) = in_deg.get_mut(to.as_str()) {
            *d += 1;
        }
    }
    let mut queue: VecDeque<&str> = node_ids
        .iter()
        .map(String::as_str)
        .filter(|id| in_deg.get(id) == Some(&0))
        .collect();
    let mut order = Vec::with_capacity(node_ids.len());
    while let Some(u) = queue.pop_front() {
        order.push(u.to_string());
        if let Some(next) = adj.get(u) {
            for &v in next {
                let d = in_deg.get_mut(v).expect("endpoint validated");
                *d -= 1;
                if *d == 0 {
                    queue.push_back(v);
                }
            }
        }
    }
    order
}

fn reachable(seeds: &BTreeSet<String>, edges: &[(String, String)], forward: bool) -> HashSet<String> {
    let mut adj: HashMap<&str, Vec<&str>> = HashMap::new();
    for (from, to) in edges {
        if forward {
            adj.entry(from.as_str()).or_default().push(to.as_str());
        } else {
            adj.entry(to.as_str()).or_default().push(from.as_str());
        }
    }
    let mut seen: HashSet<String> = seeds.iter().cloned().collect();
    let mut stack: Vec<&str> = seeds.iter().map(String::as_str).collect();
    while let Some(u) = stack.pop() {
        if let Some(next) = adj.get(u) {
            for &v in next {
                if seen.insert(v.to_string()) {
                    stack.push(v);
                }
            }
        }
    }
    seen
}

/// Validates a parsed plan's agents and edges into an [`OrchestrationGraph`],
/// or reports the first defect in the fixed check order. Total over
/// arbitrary inputs; never panics.
pub fn validate(
    agents: &[AgentSpec],
    edges: &[(String, String)],
) -> Result<OrchestrationGraph, GraphError> {
    let mut ids: Vec<String> = Vec::with_capacity(agents.len());
    for spec in agents {
        let id = spec
            .agent_id
            .clone()
            .ok_or_else(|| GraphError::MissingAgentId(spec.agent_name.wire_name().into()))?;
        ids.push(id);
    }
    let id_set: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
    if id_set.len() != ids.len() {
        let mut seen = HashSet::new();
        let duplicate = ids
            .iter()
            .find(|id| !seen.insert(id.as_str()))
            .expect("duplicate exists");
        return Err(GraphError::DuplicateAgentId(duplicate.clone()));
    }

    // Exact duplicate edges are deduplicated, preserving first occurrence.
    let mut seen_edges = HashSet::new();
    let mut deduped: Vec<(String, String)> = Vec::with_capacity(edges.len());
    for e in edges {
        if seen_edges.insert(e.clone()) {
            deduped.push(e.clone());
        }
    }
    let deduped_edges = edges.len() - deduped.len();
    let edges = deduped;

    for (from, to) in &edges {
        if !id_set.contains(from.as_str()) || !id_set.contains(to.as_str()) {
            return Err(GraphError::UndefinedEdgeEndpoint(from.clone(), to.clone()));
        }
    }
    for (from, to) in &edges {
        if from == to {
            return Err(GraphError::SelfLoop(from.clone()));
        }
    }

    let incoming: BTreeSet<&str> = edges.iter().map(|(_, to)| to.as_str()).collect();
    let start_ids: BTreeSet<String> = ids
        .iter()
        .filter(|id| !incoming.contains(id.as_str()))
        .cloned()
        .collect();
    if start_ids.is_empty() {
        return Err(GraphError::NoStartNode);
    }

    let outgoing: BTreeSet<&str> = edges.iter().map(|(from, _)| from.as_str()).collect();
    let sinks: Vec<String> = ids
        .iter()
        .filter(|id| !outgoing.contains(id.as_str()))
        .cloned()
        .collect();
    let sink_id = match sinks.len() {
        0 => return Err(GraphError::NoSink),
        1 => sinks[0].clone(),
        _ => return Err(GraphError::MultipleSinks(sinks)),
    };

    let forward = reachable(&start_ids, &edges, true);
    let backward = reachable(&BTreeSet::from([sink_id.clone()]), &edges, false);
    let isolated: Vec<String> = ids
        .iter()
        .filter(|id| !(forward.contains(*id) && backward.contains(*id)))
        .cloned()
        .collect();
    if !isolated.is_empty() {
        return Err(GraphError::IsolatedAgents(isolated));
    }

    let topo_order = topo_sort(&ids, &edges);
    if topo_order.len() != ids.len() {
        return Err(GraphError::CycleDetected);
    }

    Ok(OrchestrationGraph {
        nodes: agents.to_vec(),
        edges,
        topo_order,
        sink_id,
        start_ids,
        deduped_edges,
    })
}

impl OrchestrationGraph {
    pub fn node(&self, id: &str) -> Option<&AgentSpec> {
        self.nodes
            .iter()
            .find(|n| n.agent_id.as_deref() == Some(id))
    }

    pub fn node_ids(&self) -> Vec<String> {
        self.nodes
            .iter()
            .filter_map(|n| n.agent_id.clone())
            .collect()
    }

    /// Direct predecessors of `id`, in edge order.
    pub fn predecessors(&self, id: &str) -> Vec<&str> {
        self.edges
            .iter()
            .filter(|(_, to)| to == id)
            .map(|(from, _)| from.as_str())
            .collect()
    }

    fn node_ids_iter(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().filter_map(|n| n.agent_id.as_deref())
    }

    /// Transitive predecessors per node, computed over the topological
    /// order. Placeholder substitution resolves against ancestors only, so
    /// parallel and sequential schedules see the same result set.
    pub fn ancestor_sets(&self) -> HashMap<String, BTreeSet<String>> {
        let mut out: HashMap<String, BTreeSet<String>> = HashMap::new();
        for id in &self.topo_order {
            let mut set = BTreeSet::new();
            for pred in self.predecessors(id) {
                set.insert(pred.to_string());
                if let Some(pa) = out.get(pred) {
                    set.extend(pa.iter().cloned());
                }
            }
            out.insert(id.clone(), set);
        }
        out
    }
}

/// Structural metrics of a validated graph.
pub fn graph_stats(graph: &OrchestrationGraph) -> GraphStats {
    let mut in_deg: BTreeMap<&str, usize> = graph
        .node_ids_iter()
        .map(|id| (id, 0usize))
        .collect();
    for (_, to) in &graph.edges {
        if let Some(d) = in_deg.get_mut(to.as_str()) {
            *d += 1;
        }
    }
    // Longest path in nodes via DP over the topological order.
    let mut longest: BTreeMap<&str, usize> = graph
        .node_ids_iter()
        .map(|id| (id, 1usize))
        .collect();
    for id in &graph.topo_order {
        let here = *longest.get(id.as_str()).unwrap_or(&1);
        for (from, to) in &graph.edges {
            if from == id {
                let entry = longest.get_mut(to.as_str()).expect("endpoint validated");
                *entry = (*entry).max(here + 1);
            }
        }
    }
    GraphStats {
        num_agents: graph.nodes.len(),
        sequential_length: longest.values().copied().max().unwrap_or(0),
        parallel_width: in_deg.values().copied().max().unwrap_or(0),
    }
}

/// Scans `text` for `${identifier}` references.
pub fn placeholder_refs(text: &str) -> Vec<String> {
    let mut refs = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i + 1 < bytes.len() {
        if bytes[i] == b'$' && bytes[i + 1] == b'{' {
            let start = i + 2;
            let mut j = start;
            while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                j += 1;
            }
            if j > start && j < bytes.len() && bytes[j] == b'}' {
                refs.push(text[start..j].to_string());
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    refs
}

/// Checks the bidirectional edge/data-flow rule: a `${X}` reference in Y's
/// input requires edge (X, Y), and edge (X, Y) requires a `${X}` reference
/// in Y's input. Returns the (possibly empty) violation list.
pub fn check_dataflow_consistency(graph: &OrchestrationGraph) -> Vec<Violation> {
    let edge_set: HashSet<(&str, &str)> = graph
        .edges
        .iter()
        .map(|(f, t)| (f.as_str(), t.as_str()))
        .collect();
    let mut violations = Vec::new();
    for node in &graph.nodes {
        let Some(id) = node.agent_id.as_deref() else {
            continue;
        };
        for referenced in placeholder_refs(&node.agent_input) {
            if !edge_set.contains(&(referenced.as_str(), id)) {
                violations.push(Violation::MissingEdge {
                    agent: id.to_string(),
                    referenced,
                });
            }
        }
    }
    for (from, to) in &graph.edges {
        let refs = graph
            .node(to)
            .map(|n| placeholder_refs(&n.agent_input))
            .unwrap_or_default();
        if !refs.iter().any(|r| r == from) {
            violations.push(Violation::MissingReference {
                from: from.clone(),
                to: to.clone(),
            });
        }
    }
    violations
}
