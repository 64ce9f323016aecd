//! Document retrieval for the search workflow: the trait plus a
//! deterministic BM25 retriever over a local corpus.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedDoc {
    pub doc_id: String,
    pub snippet: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RetrieverError {
    #[error("retrieval failed: {0}")]
    Failed(String),
}

/// A search index. Results must be deterministic for a fixed corpus and
/// query so scripted runs replay exactly.
pub trait Retriever: Send + Sync {
    fn search(&self, query: &str, top_k: usize) -> Result<Vec<RetrievedDoc>, RetrieverError>;
}

fn tokenize(text: &str) -> Vec<String> {
    text.to_ascii_lowercase()
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Okapi BM25 over an in-memory corpus (k1 = 1.2, b = 0.75). Ties break on
/// ascending doc id for stable ordering.
pub struct Bm25Retriever {
    docs: Vec<(String, String)>,
    doc_tokens: Vec<HashMap<String, usize>>,
    doc_lens: Vec<usize>,
    avg_len: f64,
    doc_freq: HashMap<String, usize>,
}

impl Bm25Retriever {
    pub fn new(docs: Vec<(String, String)>) -> Bm25Retriever {
        let doc_tokens: Vec<HashMap<String, usize>> = docs
            .iter()
            .map(|(_, text)| {
                let mut counts = HashMap::new();
                for tok in tokenize(text) {
                    *counts.entry(tok).or_insert(0) += 1;
                }
                counts
            })
            .collect();
        let doc_lens: Vec<usize> = doc_tokens.iter().map(|c| c.values().sum()).collect();
        let avg_len = if doc_lens.is_empty() {
            0.0
        } else {
            doc_lens.iter().sum::<usize>() as f64 / doc_lens.len() as f64
        };
        let mut doc_freq = HashMap::new();
        for counts in &doc_tokens {
            for term in counts.keys() {
                *doc_freq.entry(term.clone()).or_insert(0) += 1;
            }
        }
        Bm25Retriever { docs, doc_tokens, doc_lens, avg_len, doc_freq }
    }

    /// Loads a corpus from a line-delimited file of `{"doc_id", "text"}`
    /// records.
    pub fn from_corpus_file(path: &Path) -> std::io::Result<Bm25Retriever> {
        #[derive(Deserialize)]
        struct CorpusDoc {
            doc_id: String,
            text: String,
        }
        let raw = std::fs::read_to_string(path)?;
        let mut docs = Vec::new();
        for line in raw.lines().filter(|l| !l.trim().is_empty()) {
            let doc: CorpusDoc = serde_json::from_str(line)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            docs.push((doc.doc_id, doc.text));
        }
        Ok(Bm25Retriever::new(docs))
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

impl Retriever for Bm25Retriever {
    fn search(&self, query: &str, top_k: usize) -> Result<Vec<RetrievedDoc>, RetrieverError> {
        const K1: f64 = 1.2;
        const B: f64 = 0.75;
        let n = self.docs.len() as f64;
        let terms = tokenize(query);
        let mut scored: Vec<(f64, usize)> = Vec::new();
        for (i, counts) in self.doc_tokens.iter().enumerate() {
            let mut score = 0.0;
            for term in &terms {
                let tf = *counts.get(term).unwrap_or(&0) as f64;
                if tf == 0.0 {
                    continue;
                }
                let df = *self.doc_freq.get(term).unwrap_or(&0) as f64;
                let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
                let len_norm = K1 * (1.0 - B + B * self.doc_lens[i] as f64 / self.avg_len.max(1.0));
                score += idf * tf * (K1 + 1.0) / (tf + len_norm);
            }
            if score > 0.0 {
                scored.push((score, i));
            }
        }
        scored.sort_by(|(sa, ia), (sb, ib)| {
            sb.partial_cmp(sa)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| self.docs[*ia].0.cmp(&self.docs[*ib].0))
        });
        Ok(scored
            .into_iter()
            .take(top_k)
            .map(|(score, i)| RetrievedDoc {
                doc_id: self.docs[i].0.clone(),
                snippet: self.docs[i].1.clone(),
                score,
            })
            .collect())
    }
}
