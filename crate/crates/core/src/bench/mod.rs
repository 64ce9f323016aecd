//! Controlled reasoning-task generation along five structural axes, with
//! exact ground truth, adversarial augmentation and hash-based splits.
//!
//! Everything is deterministic in `(axis, axis_value, seed)`: generation
//! retries on derived substreams until a candidate satisfies the value
//! constraints, so the same inputs always yield the same instance bytes.

mod adversarial;
mod depgraph;
mod genaxes;
mod names;
pub mod render;

pub use adversarial::{
    inject_adversarial, inject_adversarial_with, AdversarialConfig, AdversarialNote,
    AdversarialSpec, MagicNeedle,
};
pub use depgraph::{DepGraph, EvalError, Expr, Variable};
pub use names::{NameBank, NamePool};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::{derive_seed, fnv1a64};

/// Upper bound on any intermediate value in the plain (non-modular)
/// arithmetic domain; candidates exceeding it are regenerated.
const VALUE_CAP: i64 = 1_000_000;
const MAX_ATTEMPTS: u64 = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    Depth,
    Horizon,
    Breadth,
    Parallel,
    Robustness,
}

impl Axis {
    pub const ALL: [Axis; 5] = [
        Axis::Depth,
        Axis::Horizon,
        Axis::Breadth,
        Axis::Parallel,
        Axis::Robustness,
    ];

    pub fn parse(s: &str) -> Option<Axis> {
        match s.to_ascii_lowercase().as_str() {
            "depth" => Some(Axis::Depth),
            "horizon" => Some(Axis::Horizon),
            "breadth" => Some(Axis::Breadth),
            "parallel" => Some(Axis::Parallel),
            "robustness" => Some(Axis::Robustness),
            _ => None,
        }
    }

    /// Supported axis values: 2..=12 for Depth, 2..=8 elsewhere.
    pub fn value_range(&self) -> std::ops::RangeInclusive<usize> {
        match self {
            Axis::Depth => 2..=12,
            _ => 2..=8,
        }
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Axis::Depth => "depth",
            Axis::Horizon => "horizon",
            Axis::Breadth => "breadth",
            Axis::Parallel => "parallel",
            Axis::Robustness => "robustness",
        };
        write!(f, "{name}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BenchError {
    #[error("axis {axis} does not support value {value}")]
    UnsupportedAxisValue { axis: Axis, value: usize },
    #[error("could not satisfy value constraints for {axis}/{value} (seed {seed}) after bounded retries; reseed")]
    GenerationRetryExhausted { axis: Axis, value: usize, seed: u64 },
    #[error("{requested} attacks requested but only {available} sub-tasks available")]
    TooManyAttacks { requested: usize, available: usize },
    #[error("adversarial injection requires a Depth core, got {axis}")]
    NotDepthCore { axis: Axis },
}

/// Generation knobs beyond the (axis, value, seed) triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GenConfig {
    /// Evaluate every variable modulo this prime instead of over plain
    /// non-negative integers.
    pub modulus: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchInstance {
    pub instance_id: String,
    pub axis: Axis,
    pub axis_value: usize,
    pub question: String,
    pub graph: DepGraph,
    /// Expected answers in output order, as decimal text.
    pub gold: Vec<String>,
    pub split: Split,
    pub seed: u64,
    pub adversarial: Option<AdversarialSpec>,
}

impl BenchInstance {
    /// The instance's measured axis value; generation guarantees this
    /// equals `axis_value`.
    pub fn measured_axis(&self) -> usize {
        match self.axis {
            Axis::Robustness => self
                .adversarial
                .as_ref()
                .map(|a| a.notes.len())
                .unwrap_or(0),
            axis => measure_structural(&self.graph, axis).unwrap_or(0),
        }
    }
}

/// Structural axis measurement over a dependency graph. Robustness is not
/// structural (it counts injected notes) and returns `None` here.
pub fn measure_structural(graph: &DepGraph, axis: Axis) -> Option<usize> {
    match axis {
        Axis::Depth => graph
            .query_ids
            .first()
            .map(|q| graph.longest_chain_to(q)),
        Axis::Breadth => Some(graph.max_in_degree()),
        Axis::Parallel => Some(graph.query_components()),
        Axis::Horizon => Some(graph.carry_chain_len()),
        Axis::Robustness => None,
    }
}

fn attempt_seed(axis: Axis, value: usize, seed: u64, attempt: u64) -> u64 {
    let key = format!("gen|{axis}|{value}|{attempt}");
    derive_seed(seed, &key)
}

fn values_valid(graph: &DepGraph) -> bool {
    match graph.eval_all() {
        Err(_) => false,
        Ok(values) => match graph.modulus {
            Some(_) => true,
            None => values.values().all(|v| (0..=VALUE_CAP).contains(v)),
        },
    }
}

/// Generates one instance in the plain arithmetic domain.
pub fn generate(axis: Axis, axis_value: usize, seed: u64) -> Result<BenchInstance, BenchError> {
    generate_with(axis, axis_value, seed, &GenConfig::default())
}

/// Generates one instance. Deterministic in all arguments; retries derived
/// substreams until the candidate's values are valid (non-negative, under
/// the cap) and the measured axis equals the request.
pub fn generate_with(
    axis: Axis,
    axis_value: usize,
    seed: u64,
    config: &GenConfig,
) -> Result<BenchInstance, BenchError> {
    if !axis.value_range().contains(&axis_value) {
        return Err(BenchError::UnsupportedAxisValue { axis, value: axis_value });
    }

    if axis == Axis::Robustness {
        // Built from a Depth-4 core interleaved with needles and notes.
        // Cores too small to host the requested attack count are redrawn.
        for attempt in 0..MAX_ATTEMPTS {
            let core = generate_with(
                Axis::Depth,
                4,
                derive_seed(seed, &format!("robustness-core|{attempt}")),
                config,
            )?;
            match inject_adversarial(
                &core,
                axis_value,
                derive_seed(seed, &format!("robustness-notes|{attempt}")),
            ) {
                Ok(mut instance) => {
                    instance.instance_id = instance_id(axis, axis_value, seed);
                    instance.seed = seed;
                    return Ok(instance);
                }
                Err(BenchError::TooManyAttacks { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        return Err(BenchError::GenerationRetryExhausted { axis, value: axis_value, seed });
    }

    let bank = NameBank::builtin();
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(attempt_seed(axis, axis_value, seed, attempt));
        let mut pool = NamePool::from_random_theme(bank, &mut rng);
        let graph = match axis {
            Axis::Depth => genaxes::gen_depth(axis_value, &mut rng, &mut pool, config.modulus),
            Axis::Breadth => genaxes::gen_breadth(axis_value, &mut rng, &mut pool, config.modulus),
            Axis::Parallel => genaxes::gen_parallel(axis_value, &mut rng, &mut pool, config.modulus),
            Axis::Horizon => genaxes::gen_horizon(axis_value, &mut rng, &mut pool, config.modulus),
            Axis::Robustness => unreachable!("handled above"),
        };
        if !values_valid(&graph) {
            continue;
        }
        if measure_structural(&graph, axis) != Some(axis_value) {
            continue;
        }
        let question = match axis {
            Axis::Depth | Axis::Breadth => render::render_single_problem(&graph, &mut rng),
            Axis::Horizon => render::render_chained_problems(&graph, &mut rng),
            Axis::Parallel => render::render_parallel_problems(&graph, &mut rng),
            Axis::Robustness => unreachable!(),
        };
        let gold = graph.oracle_eval().expect("validated graph evaluates");
        return Ok(BenchInstance {
            instance_id: instance_id(axis, axis_value, seed),
            axis,
            axis_value,
            question,
            graph,
            gold,
            split: Split::Test,
            seed,
            adversarial: None,
        });
    }
    Err(BenchError::GenerationRetryExhausted { axis, value: axis_value, seed })
}

fn instance_id(axis: Axis, value: usize, seed: u64) -> String {
    format!("{axis}-{value}-{seed:016x}")
}

/// Split assignment by stable hash of the structural template (graph shape
/// and entity names, never surface numbers), so instances sharing a
/// template never straddle the train/test boundary.
pub fn assign_split(instance: &BenchInstance, salt: u64, train_ratio: f64) -> Split {
    let key = format!(
        "split|tv{}|{}|{}",
        render::TEMPLATE_VERSION,
        instance.axis,
        instance.graph.template_key()
    );
    let mut buf = salt.to_le_bytes().to_vec();
    buf.extend_from_slice(key.as_bytes());
    let bucket = fnv1a64(&buf) % 10_000;
    let threshold = (train_ratio.clamp(0.0, 1.0) * 10_000.0).round() as u64;
    if bucket < threshold {
        Split::Train
    } else {
        Split::Test
    }
}

/// One cell of a generation profile: how many train/test instances to
/// produce for an (axis, value) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileCell {
    pub axis: Axis,
    pub value: usize,
    pub train: usize,
    pub test: usize,
}

/// The published per-cell counts shipped as the `reference` profile.
pub fn reference_profile() -> Vec<ProfileCell> {
    use Axis::*;
    let cell = |axis, value, train, test| ProfileCell { axis, value, train, test };
    vec![
        cell(Depth, 2, 999, 199),
        cell(Depth, 4, 998, 200),
        cell(Depth, 6, 998, 200),
        cell(Depth, 8, 998, 200),
        cell(Depth, 10, 0, 199),
        cell(Depth, 12, 0, 197),
        cell(Horizon, 2, 725, 167),
        cell(Horizon, 4, 725, 150),
        cell(Horizon, 6, 724, 126),
        cell(Horizon, 8, 0, 124),
        cell(Breadth, 2, 667, 200),
        cell(Breadth, 4, 667, 200),
        cell(Breadth, 6, 666, 192),
        cell(Breadth, 8, 0, 84),
        cell(Parallel, 2, 603, 167),
        cell(Parallel, 4, 602, 150),
        cell(Parallel, 6, 602, 126),
        cell(Parallel, 8, 0, 124),
        cell(Robustness, 2, 1000, 200),
        cell(Robustness, 4, 1000, 200),
        cell(Robustness, 6, 1000, 200),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinism_bytes() {
        for axis in Axis::ALL {
            let a = generate(axis, 3, 42).unwrap();
            let b = generate(axis, 3, 42).unwrap();
            assert_eq!(
                serde_json::to_string(&a).unwrap(),
                serde_json::to_string(&b).unwrap()
            );
            let c = generate(axis, 3, 43).unwrap();
            assert_ne!(a.question, c.question, "different seeds should differ");
        }
    }

    #[test]
    fn unsupported_values_rejected() {
        assert!(matches!(
            generate(Axis::Depth, 13, 1),
            Err(BenchError::UnsupportedAxisValue { .. })
        ));
        assert!(matches!(
            generate(Axis::Breadth, 9, 1),
            Err(BenchError::UnsupportedAxisValue { .. })
        ));
        assert!(matches!(
            generate(Axis::Parallel, 1, 1),
            Err(BenchError::UnsupportedAxisValue { .. })
        ));
    }

    #[test]
    fn axis_fidelity_small_sweep() {
        for axis in Axis::ALL {
            for value in [2usize, 4] {
                for seed in 0..20 {
                    let inst = generate(axis, value, seed).unwrap();
                    assert_eq!(inst.measured_axis(), value, "{axis}/{value} seed {seed}");
                    // Gold is the oracle output, extended by the true
                    // needles for adversarial instances.
                    let mut expected = inst.graph.oracle_eval().unwrap();
                    if let Some(adv) = &inst.adversarial {
                        expected.extend(adv.magic_needles.iter().map(|n| n.number.to_string()));
                    }
                    assert_eq!(inst.gold, expected);
                }
            }
        }
    }

    #[test]
    fn depth_two_is_minimal_chain() {
        let inst = generate(Axis::Depth, 2, 7).unwrap();
        assert_eq!(inst.graph.longest_chain_to(&inst.graph.query_ids[0]), 2);
        assert_eq!(inst.gold.len(), 1);
    }

    #[test]
    fn plain_mode_values_are_bounded_non_negative() {
        for seed in 0..40 {
            let inst = generate(Axis::Depth, 12, seed).unwrap();
            let values = inst.graph.eval_all().unwrap();
            assert!(values.values().all(|v| (0..=VALUE_CAP).contains(v)));
        }
    }

    #[test]
    fn modular_mode_generates() {
        let cfg = GenConfig { modulus: Some(23) };
        let inst = generate_with(Axis::Depth, 6, 9, &cfg).unwrap();
        let values = inst.graph.eval_all().unwrap();
        assert!(values.values().all(|v| (0..23).contains(v)));
    }

    #[test]
    fn split_is_stable_and_ignores_constants() {
        let inst = generate(Axis::Breadth, 4, 77).unwrap();
        let s1 = assign_split(&inst, 1234, 0.8);
        let s2 = assign_split(&inst, 1234, 0.8);
        assert_eq!(s1, s2);

        // Mutating only the constants keeps the template, hence the split.
        let mut mutated = inst.clone();
        for expr in mutated.graph.defs.values_mut() {
            if let Expr::Const(n) = expr {
                *n += 1;
            }
        }
        assert_eq!(assign_split(&mutated, 1234, 0.8), s1);
    }

    #[test]
    fn split_ratio_approximates_target() {
        let mut train = 0usize;
        let total = 2000usize;
        for seed in 0..total {
            let inst = generate(Axis::Parallel, 2, seed as u64).unwrap();
            if assign_split(&inst, 99, 0.8) == Split::Train {
                train += 1;
            }
        }
        let ratio = train as f64 / total as f64;
        assert!((ratio - 0.8).abs() < 0.05, "observed ratio {ratio}");
    }

    #[test]
    fn reference_profile_totals_match_published_counts() {
        let profile = reference_profile();
        let total = |axis: Axis, train: bool| -> usize {
            profile
                .iter()
                .filter(|c| c.axis == axis)
                .map(|c| if train { c.train } else { c.test })
                .sum()
        };
        assert_eq!(total(Axis::Depth, true), 3993);
        assert_eq!(total(Axis::Depth, false), 1195);
        assert_eq!(total(Axis::Horizon, true), 2174);
        assert_eq!(total(Axis::Horizon, false), 567);
        assert_eq!(total(Axis::Breadth, true), 2000);
        assert_eq!(total(Axis::Breadth, false), 676);
        assert_eq!(total(Axis::Parallel, true), 1807);
        assert_eq!(total(Axis::Parallel, false), 567);
        assert_eq!(total(Axis::Robustness, true), 3000);
        assert_eq!(total(Axis::Robustness, false), 600);
    }
}
