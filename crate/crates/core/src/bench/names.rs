//! Themed entity vocabulary. The bank ships as a versioned data file so
//! template hashing (and therefore split assignment) stays stable across
//! releases.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Deserialize;

use super::depgraph::Variable;

const NAME_BANK_JSON: &str = include_str!("name_bank.json");

#[derive(Debug, Clone, Deserialize)]
pub struct Theme {
    pub name: String,
    pub owners: Vec<String>,
    pub items: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct NameBank {
    pub version: u32,
    pub themes: Vec<Theme>,
    pub needle_adjectives: Vec<String>,
    pub needle_nouns: Vec<String>,
}

impl NameBank {
    pub fn builtin() -> &'static NameBank {
        use std::sync::OnceLock;
        static BANK: OnceLock<NameBank> = OnceLock::new();
        BANK.get_or_init(|| serde_json::from_str(NAME_BANK_JSON).expect("embedded bank parses"))
    }

    pub fn needle_label(&self, rng: &mut impl Rng) -> String {
        let adj = &self.needle_adjectives[rng.gen_range(0..self.needle_adjectives.len())];
        let noun = &self.needle_nouns[rng.gen_range(0..self.needle_nouns.len())];
        format!("{adj}-{noun}")
    }
}

/// Hands out unique (owner, item) pairs from one theme.
pub struct NamePool {
    pairs: Vec<(String, String)>,
    next: usize,
}

impl NamePool {
    pub fn from_random_theme(bank: &NameBank, rng: &mut impl Rng) -> NamePool {
        let theme = &bank.themes[rng.gen_range(0..bank.themes.len())];
        let mut pairs: Vec<(String, String)> = theme
            .owners
            .iter()
            .flat_map(|o| theme.items.iter().map(move |i| (o.clone(), i.clone())))
            .collect();
        pairs.shuffle(rng);
        NamePool { pairs, next: 0 }
    }

    pub fn fresh_variable(&mut self, id: impl Into<String>, group: usize) -> Variable {
        let (owner, item) = self.pairs[self.next % self.pairs.len()].clone();
        self.next += 1;
        Variable { id: id.into(), owner, item, group }
    }
}
