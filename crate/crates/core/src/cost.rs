//! Exact accounting of backend usage: calls, tokens, wall time and priced
//! dollars. Ledgers merge field-wise; the merge is associative and
//! commutative so concurrent accumulation order never matters.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostLedger {
    pub llm_calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    /// Sum of per-call latencies. End-to-end elapsed time is tracked
    /// separately on traces, since concurrent calls overlap.
    pub wall_time: Duration,
    /// Priced cost under the configured rate table. `None` means unpriced
    /// (unknown model), which is distinct from zero dollars.
    pub dollars: Option<f64>,
}

impl CostLedger {
    pub fn zero() -> CostLedger {
        CostLedger::default()
    }

    pub fn for_call(prompt_tokens: u64, completion_tokens: u64, wall_time: Duration) -> CostLedger {
        CostLedger {
            llm_calls: 1,
            prompt_tokens,
            completion_tokens,
            wall_time,
            dollars: None,
        }
    }

    pub fn total_tokens(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }

    pub fn add(&mut self, other: &CostLedger) {
        *self = merge_ledgers(self, other);
    }
}

/// Field-wise sum. Unpriced (`None`) dollars act as the merge identity so
/// mixing priced and unpriced ledgers keeps the priced total.
pub fn merge_ledgers(a: &CostLedger, b: &CostLedger) -> CostLedger {
    CostLedger {
        llm_calls: a.llm_calls + b.llm_calls,
        prompt_tokens: a.prompt_tokens + b.prompt_tokens,
        completion_tokens: a.completion_tokens + b.completion_tokens,
        wall_time: a.wall_time + b.wall_time,
        dollars: match (a.dollars, b.dollars) {
            (None, None) => None,
            (x, y) => Some(x.unwrap_or(0.0) + y.unwrap_or(0.0)),
        },
    }
}

/// Per-million-token input/output rates for one model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceRate {
    pub input_per_mtok: f64,
    pub output_per_mtok: f64,
}

/// Price table keyed by model name. Unknown models price to `None` rather
/// than zero, since published rates drift.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PriceTable {
    pub rates: BTreeMap<String, PriceRate>,
}

impl PriceTable {
    pub fn from_json(json: &str) -> Result<PriceTable, serde_json::Error> {
        let rates: BTreeMap<String, PriceRate> = serde_json::from_str(json)?;
        Ok(PriceTable { rates })
    }

    pub fn rate(&self, model: &str) -> Option<PriceRate> {
        self.rates.get(model).copied()
    }

    /// Dollar cost of a ledger's tokens under `model`'s rates.
    pub fn price(&self, model: &str, ledger: &CostLedger) -> Option<f64> {
        let rate = self.rate(model)?;
        Some(
            ledger.prompt_tokens as f64 / 1_000_000.0 * rate.input_per_mtok
                + ledger.completion_tokens as f64 / 1_000_000.0 * rate.output_per_mtok,
        )
    }
}
