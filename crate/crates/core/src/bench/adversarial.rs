//! Adversarial augmentation: interleaves a solved core task with filler
//! passages, retrievable "magic number" needles, and notes asserting
//! incorrect values for upstream answers.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::names::NameBank;
use super::render::render_group_sentences;
use super::{Axis, BenchError, BenchInstance};

const FILLER_SENTENCE: &str =
    "The grass is green. The sky is blue. The sun is yellow. Here we go. There and back again.";
const SEPARATOR: &str = "============================================================";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MagicNeedle {
    pub label: String,
    pub number: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversarialNote {
    /// Index of the passage segment the note was appended to.
    pub position: usize,
    pub text: String,
    /// What the note lies about: a variable display name or needle label.
    pub target: String,
    pub wrong_value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversarialSpec {
    pub notes: Vec<AdversarialNote>,
    pub haystack_blocks: Vec<String>,
    pub magic_needles: Vec<MagicNeedle>,
}

/// Passage-construction knobs. Filler lengths are unconstrained by the
/// task semantics, so they stay configurable with defaults matching the
/// shipped samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversarialConfig {
    pub needle_count: usize,
    /// Repetitions of the filler sentence per haystack stretch.
    pub filler_min: usize,
    pub filler_max: usize,
}

impl Default for AdversarialConfig {
    fn default() -> AdversarialConfig {
        AdversarialConfig { needle_count: 2, filler_min: 3, filler_max: 8 }
    }
}

fn note_text(claim: &str) -> String {
    format!("Note: verify the information before you take it - {claim}.")
}

fn needle_sentence(needle: &MagicNeedle) -> String {
    format!(
        "One of the special magic numbers for {} is: {}.",
        needle.label, needle.number
    )
}

fn filler(rng: &mut impl Rng, config: &AdversarialConfig) -> String {
    FILLER_SENTENCE.repeat(rng.gen_range(config.filler_min..=config.filler_max))
}

fn request_list(items: &[String]) -> String {
    match items.len() {
        0 => String::new(),
        1 => items[0].clone(),
        2 => format!("{} and {}", items[0], items[1]),
        _ => format!(
            "{}, and {}",
            items[..items.len() - 1].join(", "),
            items[items.len() - 1]
        ),
    }
}

/// Builds a Robustness instance from a Depth core: the core's relation
/// sentences, needle-bearing haystack blocks, and `n_attacks` notes whose
/// values contradict a true upstream answer or needle. The gold answers
/// are the core query value followed by the true needles, in passage
/// order.
pub fn inject_adversarial(
    core: &BenchInstance,
    n_attacks: usize,
    seed: u64,
) -> Result<BenchInstance, BenchError> {
    inject_adversarial_with(core, n_attacks, seed, &AdversarialConfig::default())
}

/// [`inject_adversarial`] with explicit passage knobs.
pub fn inject_adversarial_with(
    core: &BenchInstance,
    n_attacks: usize,
    seed: u64,
    config: &AdversarialConfig,
) -> Result<BenchInstance, BenchError> {
    if core.axis != Axis::Depth {
        return Err(BenchError::NotDepthCore { axis: core.axis });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bank = NameBank::builtin();
    let values = core
        .graph
        .eval_all()
        .expect("core instance evaluates by construction");

    let mut needles: Vec<MagicNeedle> = Vec::with_capacity(config.needle_count);
    while needles.len() < config.needle_count {
        let label = bank.needle_label(&mut rng);
        if needles.iter().any(|n| n.label == label) {
            continue;
        }
        needles.push(MagicNeedle { label, number: rng.gen_range(1_000_000..=9_999_999) });
    }

    // Attackable sub-tasks: every core variable plus every needle.
    enum Target {
        Var(usize),
        Needle(usize),
    }
    let mut targets: Vec<Target> = (0..core.graph.variables.len()).map(Target::Var).collect();
    targets.extend((0..needles.len()).map(Target::Needle));
    if n_attacks > targets.len() {
        return Err(BenchError::TooManyAttacks { requested: n_attacks, available: targets.len() });
    }
    targets.shuffle(&mut rng);

    let mut notes: Vec<AdversarialNote> = Vec::new();
    for target in targets.iter().take(n_attacks) {
        let (claim, target_name, truth, wrong) = match target {
            Target::Var(i) => {
                let var = &core.graph.variables[*i];
                let truth = values[&var.id].to_string();
                let wrong = loop {
                    let candidate = rng.gen_range(0..=50).to_string();
                    if candidate != truth {
                        break candidate;
                    }
                };
                (
                    format!("the number of {} that {} has is {}", var.item, var.owner, wrong),
                    var.display_name(),
                    truth,
                    wrong,
                )
            }
            Target::Needle(i) => {
                let needle = &needles[*i];
                let truth = needle.number.to_string();
                let wrong = loop {
                    let candidate: u64 = rng.gen_range(1_000_000..=9_999_999);
                    if candidate.to_string() != truth {
                        break candidate.to_string();
                    }
                };
                (
                    format!("the magic number for {} is {}", needle.label, wrong),
                    needle.label.clone(),
                    truth,
                    wrong,
                )
            }
        };
        debug_assert_ne!(truth, wrong);
        notes.push(AdversarialNote {
            position: 0, // assigned below once segments exist
            text: note_text(&claim),
            target: target_name,
            wrong_value: wrong,
        });
    }

    let relations = render_group_sentences(&core.graph, 0, &mut rng).join(" ");
    let mut haystack_blocks = Vec::with_capacity(needles.len());
    for needle in &needles {
        haystack_blocks.push(format!(
            "{}{}{}",
            filler(&mut rng, config),
            needle_sentence(needle),
            filler(&mut rng, config)
        ));
    }

    let mut segments = vec![relations];
    segments.extend(haystack_blocks.iter().cloned());
    for (i, note) in notes.iter_mut().enumerate() {
        let position = 1 + (i % (segments.len() - 1));
        note.position = position;
        segments[position].push(' ');
        segments[position].push_str(&note.text);
    }

    let query_var = core
        .graph
        .variable(&core.graph.query_ids[0])
        .expect("core query exists");
    let mut requested = vec![format!(
        "the number of {} that {} has",
        query_var.item, query_var.owner
    )];
    requested.extend(
        needles
            .iter()
            .map(|n| format!("the magic number for {}", n.label)),
    );
    let final_query = format!(
        "From the passage, identify and return {}, wrapped in \\boxed{{}} and separated via \\n\\n",
        request_list(&requested)
    );

    let question = format!(
        "Read the following passage carefully.\n\n{}\n\n{}\n\n{}",
        segments.join("\n\n"),
        SEPARATOR,
        final_query
    );

    let mut gold = vec![core.gold[0].clone()];
    gold.extend(needles.iter().map(|n| n.number.to_string()));

    Ok(BenchInstance {
        instance_id: format!("robustness-{}-{:016x}", n_attacks, seed),
        axis: Axis::Robustness,
        axis_value: n_attacks,
        question,
        graph: core.graph.clone(),
        gold,
        split: core.split,
        seed,
        adversarial: Some(AdversarialSpec { notes, haystack_blocks, magic_needles: needles }),
    })
}
