//! Runtime and benchmark toolkit for holistic multi-agent orchestration.
//!
//! The crate is organized around one pipeline:
//!
//! 1. [`protocol`] parses a single-shot orchestrator completion (tagged
//!    channels: `thinking` / `agent` / `edge` / `answer`) into a structured
//!    plan under a Low or High degree-of-MAS constraint.
//! 2. [`graph`] validates High-DoM plans into executable DAGs and computes
//!    structural statistics (agent count, sequential length, parallel width).
//! 3. [`subagents`] implements the five goal-oriented workflows (CoT,
//!    self-consistency, debate, reflexion, search) over a pluggable
//!    [`backend::ChatBackend`].
//! 4. [`executor`] runs a plan against a task, producing an
//!    [`executor::ExecutionTrace`] with a full cost ledger.
//! 5. [`bench`] generates five-axis controlled reasoning tasks with exact
//!    ground truth, adversarial augmentation and hash-based splits.
//! 6. [`reward`] judges predictions, computes binary rewards and
//!    group-normalized advantages.
//! 7. [`rollout`] drives end-to-end rollout collection and avg@n evaluation.
//!
//! Everything downstream of a backend call is deterministic: parsing,
//! validation, generation, scheduling and reward computation are pure given
//! their seeds, so scripted backends yield bit-reproducible runs.

pub mod backend;
pub mod bench;
pub mod cost;
pub mod executor;
pub mod graph;
pub mod protocol;
pub mod records;
pub mod retrieval;
pub mod reward;
pub mod rollout;
pub mod subagents;
pub mod templates;
pub mod util;

pub use protocol::DomLevel;
