//! Fixed-form natural-language rendering of dependency graphs. Exactly one
//! relation per sentence, so a reverse parser over the same templates can
//! reconstruct the equations (rendering-faithfulness tests rely on this).

use rand::seq::SliceRandom;
use rand::Rng;

use super::depgraph::{DepGraph, Expr};

/// Version stamp for the sentence templates; part of the split-hash input
/// so reworded templates re-split rather than silently straddle.
pub const TEMPLATE_VERSION: u32 = 1;

/// Display form of a reference to `id` from within sub-problem `group`:
/// earlier problems' queries are renamed to their `[answerK]` token.
fn reference(graph: &DepGraph, id: &str, group: usize) -> String {
    if let Some(pos) = graph.query_ids.iter().position(|q| q == id) {
        let ref_group = graph.variable(id).map(|v| v.group).unwrap_or(0);
        if ref_group < group {
            return format!("[answer{}]", pos + 1);
        }
    }
    graph
        .variable(id)
        .map(|v| v.display_name())
        .unwrap_or_else(|| id.to_string())
}

fn each_list(graph: &DepGraph, ids: &[String], group: usize) -> String {
    let parts: Vec<String> = ids
        .iter()
        .map(|id| format!("each {}", reference(graph, id, group)))
        .collect();
    match parts.len() {
        0 => String::new(),
        1 => parts[0].clone(),
        _ => format!(
            "{} and {}",
            parts[..parts.len() - 1].join(", "),
            parts[parts.len() - 1]
        ),
    }
}

/// Renders one variable definition as a sentence. Carry variables (item
/// token `[variableK]`, empty owner) use the explicit carry form.
pub fn render_sentence(graph: &DepGraph, var_id: &str) -> Option<String> {
    let var = graph.variable(var_id)?;
    let expr = graph.defs.get(var_id)?;
    let display = var.display_name();

    if var.owner.is_empty() && var.item.starts_with("[variable") {
        // Carry sentence: re-binds an earlier answer inside this problem.
        let (offset, source) = match expr {
            Expr::OffsetRef(k, id) => (*k, id.clone()),
            Expr::Sum(ids) if ids.len() == 1 => (0, ids[0].clone()),
            _ => return None,
        };
        let answer_token = reference(graph, &source, var.group);
        let rhs = if offset == 0 {
            answer_token.clone()
        } else {
            format!("{offset} + {answer_token}")
        };
        return Some(format!(
            "Using the result {answer_token} from the previous calculation, {display} = {rhs}."
        ));
    }

    let body = match expr {
        Expr::Const(n) => format!("{n}"),
        Expr::Sum(ids) if ids.len() == 1 => each_list(graph, ids, var.group),
        Expr::Sum(ids) => format!("the sum of {}", each_list(graph, ids, var.group)),
        Expr::Diff(a, b) => format!(
            "the difference of {} and {}",
            each_list(graph, std::slice::from_ref(a), var.group),
            each_list(graph, std::slice::from_ref(b), var.group)
        ),
        Expr::ScaledSum(k, ids) if ids.len() == 1 => {
            format!("{k} times as much as {}", each_list(graph, ids, var.group))
        }
        Expr::ScaledSum(k, ids) => format!(
            "{k} times as much as the sum of {}",
            each_list(graph, ids, var.group)
        ),
        Expr::OffsetRef(k, id) => format!(
            "{k} more than {}",
            each_list(graph, std::slice::from_ref(id), var.group)
        ),
    };
    Some(format!("The number of each {display} equals {body}."))
}

/// All relation sentences for one sub-problem, shuffled.
pub fn render_group_sentences(graph: &DepGraph, group: usize, rng: &mut impl Rng) -> Vec<String> {
    let mut sentences: Vec<String> = graph
        .variables
        .iter()
        .filter(|v| v.group == group)
        .filter_map(|v| render_sentence(graph, &v.id))
        .collect();
    sentences.shuffle(rng);
    sentences
}

/// The final question sentence for a query variable.
pub fn render_query_question(graph: &DepGraph, query_id: &str, style: QueryStyle) -> String {
    let var = graph.variable(query_id).expect("query variable exists");
    match style {
        QueryStyle::HowMany => format!("How many {} does {} have?", var.item, var.owner),
        QueryStyle::WhatValue => format!("What is the value of {}?", var.display_name()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryStyle {
    HowMany,
    WhatValue,
}

/// Single-paragraph question: relations then the query sentence.
pub fn render_single_problem(graph: &DepGraph, rng: &mut impl Rng) -> String {
    let mut text = render_group_sentences(graph, 0, rng).join(" ");
    text.push(' ');
    text.push_str(&render_query_question(graph, &graph.query_ids[0], QueryStyle::HowMany));
    text
}

fn final_answers_block(n: usize) -> String {
    let mut out = String::from(
        "Solve all problems step by step and provide the answers for all problems in the following format:\n\n### Final Answers\n",
    );
    for k in 1..=n {
        out.push_str(&format!("\nProblem {k}: \\boxed{{[answer{k}]}}\n"));
    }
    out
}

/// Multi-problem question with the carried-answer footer.
pub fn render_chained_problems(graph: &DepGraph, rng: &mut impl Rng) -> String {
    let mut blocks = Vec::new();
    for (k, query) in graph.query_ids.iter().enumerate() {
        let sentences = render_group_sentences(graph, k, rng).join(" ");
        let question = render_query_question(graph, query, QueryStyle::WhatValue);
        blocks.push(format!("Problem {}: {} {}", k + 1, sentences, question));
    }
    format!(
        "{}\n\nNote: In this problem set:\n\n- [variablek] represents the calculated variable needed to solve problem k.\n\n- [answerk] represents the answer to problem k.\n\n{}",
        blocks.join("\n\n"),
        final_answers_block(graph.query_ids.len())
    )
}

/// Multi-problem question where every problem is independent.
pub fn render_parallel_problems(graph: &DepGraph, rng: &mut impl Rng) -> String {
    let mut blocks = Vec::new();
    for (k, query) in graph.query_ids.iter().enumerate() {
        let sentences = render_group_sentences(graph, k, rng).join(" ");
        let question = render_query_question(graph, query, QueryStyle::WhatValue);
        blocks.push(format!("Problem {}: {} {}", k + 1, sentences, question));
    }
    format!(
        "{}\n\nNote: In this problem set:\n\n- Each problem is INDEPENDENT and can be solved in parallel.\n\n{}",
        blocks.join("\n\n"),
        final_answers_block(graph.query_ids.len())
    )
}
