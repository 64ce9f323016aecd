//! Variable dependency graphs: the exact ground-truth substrate behind
//! every generated task.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One task variable. The display name decomposes into an owner/item pair
/// ("Aldi's Canned Peaches"); carry variables in multi-problem tasks have
/// an empty owner and a token item like `[variable2]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub id: String,
    pub owner: String,
    pub item: String,
    /// Sub-problem index this variable belongs to (0 for single-problem
    /// axes).
    pub group: usize,
}

impl Variable {
    pub fn display_name(&self) -> String {
        if self.owner.is_empty() {
            self.item.clone()
        } else {
            format!("{}'s {}", self.owner, self.item)
        }
    }
}

/// Definition of one variable in terms of constants and other variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    Const(i64),
    /// Sum of the referenced variables; a single reference is a plain copy.
    Sum(Vec<String>),
    /// First minus second.
    Diff(String, String),
    /// `k * (sum of the referenced variables)`.
    ScaledSum(i64, Vec<String>),
    /// `k + referenced variable`.
    OffsetRef(i64, String),
}

impl Expr {
    /// Referenced variable ids, in expression order (may repeat).
    pub fn deps(&self) -> Vec<&str> {
        match self {
            Expr::Const(_) => Vec::new(),
            Expr::Sum(ids) | Expr::ScaledSum(_, ids) => ids.iter().map(String::as_str).collect(),
            Expr::Diff(a, b) => vec![a, b],
            Expr::OffsetRef(_, id) => vec![id],
        }
    }

    /// Distinct dependency count: the in-degree this definition induces.
    pub fn in_degree(&self) -> usize {
        self.deps().into_iter().collect::<HashSet<_>>().len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepGraph {
    pub variables: Vec<Variable>,
    pub defs: BTreeMap<String, Expr>,
    /// One query per sub-problem, in output order.
    pub query_ids: Vec<String>,
    /// Arithmetic domain: plain non-negative integers when `None`,
    /// otherwise every variable reduces modulo this prime.
    pub modulus: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("undefined variable {0}")]
    UndefinedVariable(String),
    #[error("cycle detected among variable definitions")]
    CycleDetected,
}

impl DepGraph {
    pub fn variable(&self, id: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.id == id)
    }

    fn reduce(&self, value: i128) -> i64 {
        match self.modulus {
            Some(p) => value.rem_euclid(p as i128) as i64,
            None => value as i64,
        }
    }

    /// Evaluates every defined variable in dependency order.
    pub fn eval_all(&self) -> Result<BTreeMap<String, i64>, EvalError> {
        // Kahn over the definition dependencies.
        let mut in_deg: BTreeMap<&str, usize> = BTreeMap::new();
        let mut dependents: HashMap<&str, Vec<&str>> = HashMap::new();
        for (id, expr) in &self.defs {
            let deps: HashSet<&str> = expr.deps().into_iter().collect();
            for dep in &deps {
                if !self.defs.contains_key(*dep) {
                    return Err(EvalError::UndefinedVariable(dep.to_string()));
                }
                dependents.entry(dep).or_default().push(id);
            }
            in_deg.insert(id, deps.len());
        }
        let mut queue: std::collections::VecDeque<&str> = in_deg
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(id, _)| *id)
            .collect();
        let mut values: BTreeMap<String, i64> = BTreeMap::new();
        while let Some(id) = queue.pop_front() {
            let expr = &self.defs[id];
            let value: i128 = match expr {
                Expr::Const(n) => *n as i128,
                Expr::Sum(ids) => ids.iter().map(|d| values[d.as_str()] as i128).sum(),
                Expr::Diff(a, b) => values[a.as_str()] as i128 - values[b.as_str()] as i128,
                Expr::ScaledSum(k, ids) => {
                    *k as i128 * ids.iter().map(|d| values[d.as_str()] as i128).sum::<i128>()
                }
                Expr::OffsetRef(k, d) => *k as i128 + values[d.as_str()] as i128,
            };
            values.insert(id.to_string(), self.reduce(value));
            if let Some(next) = dependents.get(id) {
                for dependent in next {
                    let d = in_deg.get_mut(dependent).expect("known def");
                    *d -= 1;
                    if *d == 0 {
                        queue.push_back(dependent);
                    }
                }
            }
        }
        if values.len() != self.defs.len() {
            return Err(EvalError::CycleDetected);
        }
        Ok(values)
    }

    /// Gold answers: the query values as decimal text, in query order.
    pub fn oracle_eval(&self) -> Result<Vec<String>, EvalError> {
        let values = self.eval_all()?;
        self.query_ids
            .iter()
            .map(|q| {
                values
                    .get(q)
                    .map(|v| v.to_string())
                    .ok_or_else(|| EvalError::UndefinedVariable(q.clone()))
            })
            .collect()
    }

    /// Longest dependency chain (in variables) ending at `id`.
    pub fn longest_chain_to(&self, id: &str) -> usize {
        let mut memo: HashMap<&str, usize> = HashMap::new();
        self.chain_len(id, &mut memo, 0)
    }

    fn chain_len<'a>(&'a self, id: &'a str, memo: &mut HashMap<&'a str, usize>, guard: usize) -> usize {
        if let Some(&len) = memo.get(id) {
            return len;
        }
        if guard > self.defs.len() {
            return 0; // cyclic input; callers only measure generated DAGs
        }
        let len = match self.defs.get(id) {
            None => 1,
            Some(expr) => {
                1 + expr
                    .deps()
                    .into_iter()
                    .map(|d| self.chain_len(d, memo, guard + 1))
                    .max()
                    .unwrap_or(0)
            }
        };
        memo.insert(id, len);
        len
    }

    /// Maximum in-degree (distinct dependencies) over all definitions.
    pub fn max_in_degree(&self) -> usize {
        self.defs.values().map(Expr::in_degree).max().unwrap_or(0)
    }

    /// Number of weakly-connected components containing at least one query.
    pub fn query_components(&self) -> usize {
        let ids: Vec<&str> = self.defs.keys().map(String::as_str).collect();
        let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let mut parent: Vec<usize> = (0..ids.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (id, expr) in &self.defs {
            let a = index[id.as_str()];
            for dep in expr.deps() {
                if let Some(&b) = index.get(dep) {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    if ra != rb {
                        parent[ra] = rb;
                    }
                }
            }
        }
        let roots: HashSet<usize> = self
            .query_ids
            .iter()
            .filter_map(|q| index.get(q.as_str()).copied())
            .map(|i| find(&mut parent, i))
            .collect();
        roots.len()
    }

    /// Whether `target`'s value transitively depends on `source`.
    pub fn depends_on(&self, target: &str, source: &str) -> bool {
        let mut stack = vec![target];
        let mut seen = HashSet::new();
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            if let Some(expr) = self.defs.get(id) {
                for dep in expr.deps() {
                    if dep == source {
                        return true;
                    }
                    stack.push(dep);
                }
            }
        }
        false
    }

    /// Length of the carry chain: one more than the number of consecutive
    /// query pairs where problem k's answer depends on problem k-1's.
    pub fn carry_chain_len(&self) -> usize {
        if self.query_ids.is_empty() {
            return 0;
        }
        let mut linked = 0;
        for pair in self.query_ids.windows(2) {
            if self.depends_on(&pair[1], &pair[0]) {
                linked += 1;
            }
        }
        1 + linked
    }

    /// Structural template key: graph shape and entity names, with all
    /// surface numbers (constants, scale factors, offsets) erased. Split
    /// assignment hashes this, so instances differing only in numbers land
    /// on the same side.
    pub fn template_key(&self) -> String {
        let index: HashMap<&str, usize> = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.id.as_str(), i))
            .collect();
        let slot = |id: &str| index.get(id).map(|i| i.to_string()).unwrap_or_else(|| "?".into());
        let mut key = String::new();
        for v in &self.variables {
            key.push_str(&format!("{}|{}|{};", v.display_name(), v.group, {
                match self.defs.get(&v.id) {
                    None => "undef".to_string(),
                    Some(Expr::Const(_)) => "const".to_string(),
                    Some(Expr::Sum(ids)) => {
                        format!("sum({})", ids.iter().map(|i| slot(i)).collect::<Vec<_>>().join(","))
                    }
                    Some(Expr::Diff(a, b)) => format!("diff({},{})", slot(a), slot(b)),
                    Some(Expr::ScaledSum(_, ids)) => format!(
                        "scaled({})",
                        ids.iter().map(|i| slot(i)).collect::<Vec<_>>().join(",")
                    ),
                    Some(Expr::OffsetRef(_, id)) => format!("offset({})", slot(id)),
                }
            }));
        }
        key.push_str(&format!(
            "q:{}",
            self.query_ids.iter().map(|q| slot(q)).collect::<Vec<_>>().join(",")
        ));
        key
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(id: &str, owner: &str, item: &str) -> Variable {
        Variable { id: id.into(), owner: owner.into(), item: item.into(), group: 0 }
    }

    fn graph(defs: &[(&str, Expr)], queries: &[&str], modulus: Option<i64>) -> DepGraph {
        DepGraph {
            variables: defs
                .iter()
                .map(|(id, _)| var(id, "Owner", id))
                .collect(),
            defs: defs
                .iter()
                .map(|(id, e)| (id.to_string(), e.clone()))
                .collect(),
            query_ids: queries.iter().map(|s| s.to_string()).collect(),
            modulus,
        }
    }

    #[test]
    fn const_only_graph_evaluates_verbatim() {
        let g = graph(&[("a", Expr::Const(17)), ("b", Expr::Const(0))], &["a", "b"], None);
        assert_eq!(g.oracle_eval().unwrap(), vec!["17", "0"]);
    }

    #[test]
    fn arithmetic_ops() {
        let g = graph(
            &[
                ("a", Expr::Const(21)),
                ("b", Expr::ScaledSum(3, vec!["a".into()])),
                ("c", Expr::OffsetRef(10, "a".into())),
                ("d", Expr::Diff("b".into(), "c".into())),
                ("e", Expr::Sum(vec!["a".into(), "d".into()])),
            ],
            &["e"],
            None,
        );
        // b=63, c=31, d=32, e=53
        assert_eq!(g.oracle_eval().unwrap(), vec!["53"]);
    }

    #[test]
    fn modular_reduction_applies_per_variable() {
        let g = graph(
            &[
                ("a", Expr::Const(21)),
                ("b", Expr::ScaledSum(15, vec!["a".into()])), // 315 mod 23 = 16
                ("c", Expr::ScaledSum(3, vec!["a".into()])),  // 63 mod 23 = 17
                ("d", Expr::Sum(vec!["b".into(), "c".into()])), // 33 mod 23 = 10
            ],
            &["d"],
            Some(23),
        );
        assert_eq!(g.oracle_eval().unwrap(), vec!["10"]);
    }

    #[test]
    fn modular_difference_wraps_non_negative() {
        let g = graph(
            &[
                ("a", Expr::Const(15)),
                ("b", Expr::Const(22)),
                ("d", Expr::Diff("a".into(), "b".into())), // -7 -> 16 mod 23
            ],
            &["d"],
            Some(23),
        );
        assert_eq!(g.oracle_eval().unwrap(), vec!["16"]);
    }

    #[test]
    fn undefined_and_cyclic_defs_error() {
        let g = graph(&[("a", Expr::OffsetRef(1, "ghost".into()))], &["a"], None);
        assert_eq!(g.eval_all(), Err(EvalError::UndefinedVariable("ghost".into())));

        let g = graph(
            &[
                ("a", Expr::OffsetRef(1, "b".into())),
                ("b", Expr::OffsetRef(1, "a".into())),
            ],
            &["a"],
            None,
        );
        assert_eq!(g.eval_all(), Err(EvalError::CycleDetected));
    }

    #[test]
    fn structural_measures() {
        let g = graph(
            &[
                ("a", Expr::Const(1)),
                ("b", Expr::OffsetRef(2, "a".into())),
                ("c", Expr::OffsetRef(3, "b".into())),
                ("d", Expr::OffsetRef(4, "c".into())),
            ],
            &["d"],
            None,
        );
        assert_eq!(g.longest_chain_to("d"), 4);
        assert_eq!(g.max_in_degree(), 1);
        assert_eq!(g.query_components(), 1);

        let wide = graph(
            &[
                ("l1", Expr::Const(1)),
                ("l2", Expr::Const(2)),
                ("l3", Expr::Const(3)),
                ("l4", Expr::Const(4)),
                ("l5", Expr::Const(5)),
                ("l6", Expr::Const(6)),
                (
                    "hub",
                    Expr::Sum(vec![
                        "l1".into(),
                        "l2".into(),
                        "l3".into(),
                        "l4".into(),
                        "l5".into(),
                        "l6".into(),
                    ]),
                ),
            ],
            &["hub"],
            None,
        );
        assert_eq!(wide.max_in_degree(), 6);

        let disjoint = graph(
            &[
                ("a", Expr::Const(1)),
                ("b", Expr::Const(2)),
                ("c", Expr::Const(3)),
            ],
            &["a", "b", "c"],
            None,
        );
        assert_eq!(disjoint.query_components(), 3);
    }

    #[test]
    fn carry_chain_measure() {
        let g = graph(
            &[
                ("q1", Expr::Const(4)),
                ("carry", Expr::OffsetRef(2, "q1".into())),
                ("q2", Expr::Sum(vec!["carry".into()])),
                ("q3", Expr::OffsetRef(1, "q2".into())),
            ],
            &["q1", "q2", "q3"],
            None,
        );
        assert_eq!(g.carry_chain_len(), 3);
    }

    #[test]
    fn template_key_ignores_surface_numbers() {
        let a = graph(
            &[("x", Expr::Const(5)), ("y", Expr::OffsetRef(3, "x".into()))],
            &["y"],
            None,
        );
        let b = graph(
            &[("x", Expr::Const(19)), ("y", Expr::OffsetRef(11, "x".into()))],
            &["y"],
            None,
        );
        assert_eq!(a.template_key(), b.template_key());

        let c = graph(
            &[("x", Expr::Const(5)), ("y", Expr::ScaledSum(3, vec!["x".into()]))],
            &["y"],
            None,
        );
        assert_ne!(a.template_key(), c.template_key());
    }
}
