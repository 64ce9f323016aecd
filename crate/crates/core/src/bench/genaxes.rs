//! Seeded construction of dependency graphs with an exact structural
//! property per axis. Generators only build candidates; the caller
//! validates values (non-negativity, caps) and retries on a fresh
//! substream when a candidate fails.

use std::collections::BTreeMap;

use rand::Rng;

use super::depgraph::{DepGraph, Expr, Variable};
use super::names::NamePool;

/// Weighted choice of a chain step referencing `prev`. Steps through
/// `Sum`/`Diff` may also attach a fresh constant leaf; leaves never extend
/// the chain since they sit at depth 1.
fn chain_step(
    prev: &str,
    rng: &mut impl Rng,
    pool: &mut NamePool,
    vars: &mut Vec<Variable>,
    defs: &mut BTreeMap<String, Expr>,
    group: usize,
) -> Expr {
    let roll = rng.gen_range(0..100);
    if roll < 40 {
        Expr::OffsetRef(rng.gen_range(1..=20), prev.to_string())
    } else if roll < 65 {
        let leaf = fresh_const(rng, pool, vars, defs, group);
        Expr::Sum(vec![prev.to_string(), leaf])
    } else if roll < 85 {
        let leaf = fresh_const_in(rng, pool, vars, defs, group, 0..=8);
        Expr::Diff(prev.to_string(), leaf)
    } else {
        Expr::ScaledSum(rng.gen_range(2..=12), vec![prev.to_string()])
    }
}

fn fresh_const(
    rng: &mut impl Rng,
    pool: &mut NamePool,
    vars: &mut Vec<Variable>,
    defs: &mut BTreeMap<String, Expr>,
    group: usize,
) -> String {
    fresh_const_in(rng, pool, vars, defs, group, 0..=22)
}

fn fresh_const_in(
    rng: &mut impl Rng,
    pool: &mut NamePool,
    vars: &mut Vec<Variable>,
    defs: &mut BTreeMap<String, Expr>,
    group: usize,
    range: std::ops::RangeInclusive<i64>,
) -> String {
    let id = format!("v{}", vars.len());
    vars.push(pool.fresh_variable(&id, group));
    defs.insert(id.clone(), Expr::Const(rng.gen_range(range)));
    id
}

/// Off-path variables consuming existing ones; they add texture without
/// changing chain length to the query, in-degree maxima or connectivity.
fn add_distractors(
    count: usize,
    sources: &[String],
    rng: &mut impl Rng,
    pool: &mut NamePool,
    vars: &mut Vec<Variable>,
    defs: &mut BTreeMap<String, Expr>,
    group: usize,
) {
    for _ in 0..count {
        let source = sources[rng.gen_range(0..sources.len())].clone();
        let id = format!("v{}", vars.len());
        vars.push(pool.fresh_variable(&id, group));
        let expr = if rng.gen_bool(0.5) {
            Expr::OffsetRef(rng.gen_range(1..=20), source)
        } else {
            Expr::ScaledSum(rng.gen_range(2..=12), vec![source])
        };
        defs.insert(id, expr);
    }
}

/// Chain whose longest dependency path ending at the query has exactly
/// `depth` variables.
pub fn gen_depth(depth: usize, rng: &mut impl Rng, pool: &mut NamePool, modulus: Option<i64>) -> DepGraph {
    let mut vars = Vec::new();
    let mut defs = BTreeMap::new();

    let mut chain = vec![fresh_const(rng, pool, &mut vars, &mut defs, 0)];
    for _ in 1..depth {
        let prev = chain.last().unwrap().clone();
        let expr = chain_step(&prev, rng, pool, &mut vars, &mut defs, 0);
        let id = format!("v{}", vars.len());
        vars.push(pool.fresh_variable(&id, 0));
        defs.insert(id.clone(), expr);
        chain.push(id);
    }

    let distractors = rng.gen_range(1..=3);
    add_distractors(distractors, &chain, rng, pool, &mut vars, &mut defs, 0);

    DepGraph {
        variables: vars,
        defs,
        query_ids: vec![chain.last().unwrap().clone()],
        modulus,
    }
}

/// Query variable aggregating exactly `breadth` distinct dependencies;
/// every other definition keeps in-degree at most 1.
pub fn gen_breadth(breadth: usize, rng: &mut impl Rng, pool: &mut NamePool, modulus: Option<i64>) -> DepGraph {
    let mut vars = Vec::new();
    let mut defs = BTreeMap::new();

    let mut leaves = Vec::with_capacity(breadth);
    for _ in 0..breadth {
        let leaf = if rng.gen_bool(0.3) {
            // Two-step leaf: a constant behind an offset.
            let base = fresh_const(rng, pool, &mut vars, &mut defs, 0);
            let id = format!("v{}", vars.len());
            vars.push(pool.fresh_variable(&id, 0));
            defs.insert(id.clone(), Expr::OffsetRef(rng.gen_range(1..=20), base));
            id
        } else {
            fresh_const(rng, pool, &mut vars, &mut defs, 0)
        };
        leaves.push(leaf);
    }

    let hub = format!("v{}", vars.len());
    vars.push(pool.fresh_variable(&hub, 0));
    let hub_expr = if rng.gen_bool(0.25) {
        Expr::ScaledSum(rng.gen_range(2..=8), leaves.clone())
    } else {
        Expr::Sum(leaves.clone())
    };
    defs.insert(hub.clone(), hub_expr);

    let distractors = rng.gen_range(1..=2);
    let mut sources = leaves;
    sources.push(hub.clone());
    add_distractors(distractors, &sources, rng, pool, &mut vars, &mut defs, 0);

    DepGraph { variables: vars, defs, query_ids: vec![hub], modulus }
}

/// One small chained problem per group.
fn gen_cluster(
    group: usize,
    rng: &mut impl Rng,
    pool: &mut NamePool,
    vars: &mut Vec<Variable>,
    defs: &mut BTreeMap<String, Expr>,
) -> String {
    let len = rng.gen_range(2..=3);
    let mut chain = vec![fresh_const(rng, pool, vars, defs, group)];
    for _ in 1..len {
        let prev = chain.last().unwrap().clone();
        let expr = chain_step(&prev, rng, pool, vars, defs, group);
        let id = format!("v{}", vars.len());
        vars.push(pool.fresh_variable(&id, group));
        defs.insert(id.clone(), expr);
        chain.push(id);
    }
    chain.last().unwrap().clone()
}

/// `parallel` mutually independent sub-problems: disjoint variable
/// clusters, one query each.
pub fn gen_parallel(parallel: usize, rng: &mut impl Rng, pool: &mut NamePool, modulus: Option<i64>) -> DepGraph {
    let mut vars = Vec::new();
    let mut defs = BTreeMap::new();
    let mut queries = Vec::with_capacity(parallel);
    for group in 0..parallel {
        queries.push(gen_cluster(group, rng, pool, &mut vars, &mut defs));
    }
    DepGraph { variables: vars, defs, query_ids: queries, modulus }
}

/// `horizon` chained sub-problems: each problem k >= 2 rebinds the previous
/// answer through a `[variableK]` carry variable its own query depends on.
pub fn gen_horizon(horizon: usize, rng: &mut impl Rng, pool: &mut NamePool, modulus: Option<i64>) -> DepGraph {
    let mut vars = Vec::new();
    let mut defs = BTreeMap::new();
    let mut queries: Vec<String> = Vec::with_capacity(horizon);

    queries.push(gen_cluster(0, rng, pool, &mut vars, &mut defs));

    for k in 1..horizon {
        let carry = format!("v{}", vars.len());
        vars.push(Variable {
            id: carry.clone(),
            owner: String::new(),
            item: format!("[variable{}]", k + 1),
            group: k,
        });
        // Offset zero is a plain copy; canonicalize so the rendered text
        // and the structural form stay in one-to-one correspondence.
        let offset = rng.gen_range(0..=15);
        let carry_expr = if offset == 0 {
            Expr::Sum(vec![queries[k - 1].clone()])
        } else {
            Expr::OffsetRef(offset, queries[k - 1].clone())
        };
        defs.insert(carry.clone(), carry_expr);

        let base = fresh_const(rng, pool, &mut vars, &mut defs, k);
        let query = format!("v{}", vars.len());
        vars.push(pool.fresh_variable(&query, k));
        let expr = match rng.gen_range(0..3) {
            0 => Expr::Sum(vec![carry.clone(), base]),
            1 => Expr::Diff(carry.clone(), base),
            _ => Expr::OffsetRef(rng.gen_range(1..=20), carry.clone()),
        };
        defs.insert(query.clone(), expr);
        queries.push(query);
    }

    DepGraph { variables: vars, defs, query_ids: queries, modulus }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::names::NameBank;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pool(rng: &mut ChaCha8Rng) -> NamePool {
        NamePool::from_random_theme(NameBank::builtin(), rng)
    }

    #[test]
    fn depth_chain_is_exact() {
        for seed in 0..30 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = pool(&mut rng);
            let g = gen_depth(6, &mut rng, &mut p, None);
            assert_eq!(g.longest_chain_to(&g.query_ids[0]), 6, "seed {seed}");
        }
    }

    #[test]
    fn breadth_in_degree_is_exact() {
        for seed in 0..30 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = pool(&mut rng);
            let g = gen_breadth(5, &mut rng, &mut p, None);
            assert_eq!(g.max_in_degree(), 5, "seed {seed}");
        }
    }

    #[test]
    fn parallel_components_are_exact() {
        for seed in 0..30 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = pool(&mut rng);
            let g = gen_parallel(4, &mut rng, &mut p, None);
            assert_eq!(g.query_components(), 4, "seed {seed}");
            assert_eq!(g.query_ids.len(), 4);
        }
    }

    #[test]
    fn horizon_chain_is_exact() {
        for seed in 0..30 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = pool(&mut rng);
            let g = gen_horizon(4, &mut rng, &mut p, None);
            assert_eq!(g.carry_chain_len(), 4, "seed {seed}");
        }
    }
}
