//! BM25 retrieval of demonstration candidates from the labeled inference pool.
//!
//! ```text
//! idf(w)   = ln((N - f(w) + 0.5) / (f(w) + 0.5) + 1)
//! score(q,d) = sum over distinct w in q of
//!              idf(w) * tf(w,d) (k1 + 1) / (tf(w,d) + k1 (1 - b + b |d| / avg_len))
//! ```

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::model::{tokenize, LogRecord, Template, TokenizedLog};

#[derive(Debug, Error, PartialEq)]
pub enum SelectorError {
    #[error("cannot build an index over an empty corpus")]
    EmptyCorpus,
    #[error("document id {0} out of range")]
    BadDocId(usize),
    #[error("invalid BM25 parameters: {0}")]
    InvalidParams(String),
}

/// Order of the returned demonstrations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptOrder {
    /// Least similar first, so the best match sits next to the query.
    #[default]
    Ascending,
    Descending,
}

#[derive(Debug, Clone)]
struct Document {
    record: LogRecord,
    template: Template,
    term_freq: HashMap<String, u32>,
    len: usize,
}

#[derive(Debug, Clone)]
pub struct Bm25Index {
    docs: Vec<Document>,
    doc_freq: HashMap<String, usize>,
    avg_len: f64,
    k1: f64,
    b: f64,
}

/// A retrieved demonstration.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub record: LogRecord,
    pub template: Template,
    pub score: f64,
}

pub fn build_index(candidates: Vec<(LogRecord, Template)>, k1: f64, b: f64) -> Result<Bm25Index, SelectorError> {
    Bm25Index::build(candidates, k1, b)
}

impl Bm25Index {
    pub const DEFAULT_K1: f64 = 1.2;
    pub const DEFAULT_B: f64 = 0.75;

    pub fn build(candidates: Vec<(LogRecord, Template)>, k1: f64, b: f64) -> Result<Self, SelectorError> {
        if candidates.is_empty() {
            return Err(SelectorError::EmptyCorpus);
        }
        if k1.is_nan() || k1 <= 0.0 || !(0.0..=1.0).contains(&b) {
            return Err(SelectorError::InvalidParams(format!("k1={k1}, b={b}")));
        }
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        let mut total_len = 0usize;
        let docs: Vec<Document> = candidates
            .into_iter()
            .map(|(record, template)| {
                let tokens = tokenize(&record.content);
                let mut term_freq: HashMap<String, u32> = HashMap::new();
                for tok in &tokens.tokens {
                    *term_freq.entry(tok.clone()).or_default() += 1;
                }
                for tok in term_freq.keys() {
                    *doc_freq.entry(tok.clone()).or_default() += 1;
                }
                total_len += tokens.token_count;
                Document {
                    record,
                    template,
                    term_freq,
                    len: tokens.token_count,
                }
            })
            .collect();
        let avg_len = total_len as f64 / docs.len() as f64;
        Ok(Self {
            docs,
            doc_freq,
            avg_len,
            k1,
            b,
        })
    }

    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    pub fn doc_freq(&self, token: &str) -> usize {
        self.doc_freq.get(token).copied().unwrap_or(0)
    }

    pub fn idf(&self, token: &str) -> f64 {
        let n = self.docs.len() as f64;
        let f = self.doc_freq(token) as f64;
        ((n - f + 0.5) / (f + 0.5) + 1.0).ln()
    }

    pub fn score(&self, query: &TokenizedLog, doc_id: usize) -> Result<f64, SelectorError> {
        if doc_id >= self.docs.len() {
            return Err(SelectorError::BadDocId(doc_id));
        }
        Ok(self.score_terms(&self.weighted_terms(query), &self.docs[doc_id]))
    }

    /// Distinct query tokens with their idf, sorted. A fixed summation order
    /// keeps scores bit-identical under any permutation of the query.
    fn weighted_terms<'q>(&self, query: &'q TokenizedLog) -> Vec<(&'q str, f64)> {
        let mut terms: Vec<&str> = query.tokens.iter().map(String::as_str).collect();
        terms.sort_unstable();
        terms.dedup();
        terms.into_iter().map(|t| (t, self.idf(t))).collect()
    }

    fn score_terms(&self, terms: &[(&str, f64)], doc: &Document) -> f64 {
        // Guard avg_len == 0 (a corpus of empty documents): length norm off.
        let length_ratio = if self.avg_len > 0.0 {
            doc.len as f64 / self.avg_len
        } else {
            1.0
        };
        let norm = self.k1 * (1.0 - self.b + self.b * length_ratio);
        terms
            .iter()
            .map(|&(term, idf)| match doc.term_freq.get(term) {
                Some(&tf) => {
                    let tf = tf as f64;
                    idf * tf * (self.k1 + 1.0) / (tf + norm)
                }
                None => 0.0,
            })
            .sum()
    }

    pub fn score_all(&self, query: &TokenizedLog) -> Vec<f64> {
        self.score_all_with(query, Execution::default())
    }

    pub fn score_all_with(&self, query: &TokenizedLog, exec: Execution) -> Vec<f64> {
        let terms = self.weighted_terms(query);
        exec.map(&self.docs, |doc| self.score_terms(&terms, doc))
    }

    /// The `k` best candidates, least similar first.
    pub fn top_k(&self, query: &TokenizedLog, k: usize) -> Vec<Candidate> {
        self.top_k_with(query, k, PromptOrder::Ascending, Execution::default())
    }

    /// The `k` highest-scoring documents (ties: smaller `line_id`), returned
    /// in the requested order. Equal scores always list the smaller `line_id`
    /// first.
    pub fn top_k_with(&self, query: &TokenizedLog, k: usize, order: PromptOrder, exec: Execution) -> Vec<Candidate> {
        if k == 0 {
            return Vec::new();
        }
        let scores = self.score_all_with(query, exec);
        let by_rank = |&a: &usize, &b: &usize| {
            scores[b]
                .total_cmp(&scores[a])
                .then(self.docs[a].record.line_id.cmp(&self.docs[b].record.line_id))
        };
        let mut ids: Vec<usize> = (0..self.docs.len()).collect();
        if k < ids.len() {
            ids.select_nth_unstable_by(k - 1, by_rank);
            ids.truncate(k);
        }
        ids.sort_by(by_rank);
        if order == PromptOrder::Ascending {
            ids.sort_by(|&a, &b| {
                scores[a]
                    .total_cmp(&scores[b])
                    .then(self.docs[a].record.line_id.cmp(&self.docs[b].record.line_id))
            });
        }
        ids.into_iter()
            .map(|i| Candidate {
                record: self.docs[i].record.clone(),
                template: self.docs[i].template.clone(),
                score: scores[i],
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(contents: &[&str]) -> Vec<(LogRecord, Template)> {
        contents
            .iter()
            .enumerate()
            .map(|(i, c)| {
                (
                    LogRecord::new(i as u64 + 1, *c, "t").unwrap(),
                    Template::new(*c).unwrap(),
                )
            })
            .collect()
    }

    fn index(contents: &[&str]) -> Bm25Index {
        build_index(corpus(contents), 1.2, 0.75).unwrap()
    }

    #[test]
    fn build_counts() {
        let idx = index(&["a b", "a c"]);
        assert_eq!(idx.doc_freq("a"), 2);
        assert_eq!(idx.doc_freq("b"), 1);
        assert_eq!(idx.doc_freq("c"), 1);
        assert_eq!(idx.n_docs(), 2);
        assert_eq!(idx.avg_len(), 2.0);

        let idx = index(&["x y x"]);
        assert_eq!(idx.doc_freq("x"), 1);
        assert_eq!(idx.doc_freq("y"), 1);
        assert_eq!(idx.n_docs(), 1);

        assert_eq!(build_index(vec![], 1.2, 0.75).unwrap_err(), SelectorError::EmptyCorpus);
        assert!(build_index(corpus(&["a"]), 1.2, 1.5).is_err());
    }

    #[test]
    fn idf_values() {
        let one = index(&["a"]);
        assert!((one.idf("a") - (4.0f64 / 3.0).ln()).abs() < 1e-12);
        let two = index(&["a b", "c d"]);
        assert!((two.idf("a") - 2f64.ln()).abs() < 1e-12);
        let ten = index(&["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"]);
        assert!((ten.idf("unseen") - 22f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn score_values() {
        let idx = index(&["a b", "c d"]);
        let q = tokenize("a");
        assert!((idx.score(&q, 0).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert_eq!(idx.score(&q, 1).unwrap(), 0.0);
        assert_eq!(idx.score(&q, 2), Err(SelectorError::BadDocId(2)));
        // Repeated query tokens count once.
        assert_eq!(idx.score(&tokenize("a a a"), 0).unwrap(), idx.score(&q, 0).unwrap());
    }

    #[test]
    fn saturation() {
        let idx = index(&["a x", "a a a a", "y z w"]);
        let q = tokenize("a");
        let single = {
            let i = index(&["a x x x", "b", "c"]);
            i.score(&q, 0).unwrap()
        };
        let doubled = {
            let i = index(&["a a x x", "b", "c"]);
            i.score(&q, 0).unwrap()
        };
        assert!(doubled > single && doubled <= 2.0 * single);
        assert!(idx.score(&q, 1).unwrap() > 0.0);
    }

    #[test]
    fn top_k_order_and_ties() {
        let idx = index(&["a b", "a b", "c d", "a c"]);
        let got = idx.top_k(&tokenize("a b"), 10);
        assert_eq!(got.len(), 4);
        assert!(got.windows(2).all(|w| w[0].score <= w[1].score));
        // Docs 1 and 2 tie for best; the smaller line id comes first.
        let ids: Vec<u64> = got.iter().map(|c| c.record.line_id).collect();
        assert_eq!(&ids[2..], &[1, 2]);

        let top1 = idx.top_k(&tokenize("a b"), 1);
        assert_eq!(top1[0].record.line_id, 1);

        let desc = idx.top_k_with(&tokenize("a b"), 2, PromptOrder::Descending, Execution::Sequential);
        assert_eq!(desc.iter().map(|c| c.record.line_id).collect::<Vec<_>>(), [1, 2]);
        assert!(idx.top_k(&tokenize("a"), 0).is_empty());
    }

    #[test]
    fn no_overlap_scores_zero() {
        let idx = index(&["a b", "c d"]);
        assert!(idx.score_all(&tokenize("zzz")).iter().all(|&s| s == 0.0));
    }

    fn doc_strategy() -> impl Strategy<Value = String> {
        prop::collection::vec("[a-f]", 1..8).prop_map(|v| v.join(" "))
    }

    proptest! {
        #[test]
        fn idf_strictly_decreasing(n in 1usize..200) {
            let docs: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
            let refs: Vec<&str> = docs.iter().map(String::as_str).collect();
            let idx = index(&refs);
            // Compare f(w) = 0 against f(w) = 1.
            prop_assert!(idx.idf("unseen") > idx.idf("t0"));
        }

        #[test]
        fn bag_of_words(doc in prop::collection::vec("[a-d]", 1..8), query in doc_strategy()) {
            let forward = doc.join(" ");
            let mut rev = doc.clone();
            rev.reverse();
            let backward = rev.join(" ");
            let a = index(&[&forward, "x y"]);
            let b = index(&[&backward, "x y"]);
            let q = tokenize(&query);
            prop_assert!((a.score(&q, 0).unwrap() - b.score(&q, 0).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn zero_b_ignores_length(query in doc_strategy()) {
            let short = build_index(corpus(&["a b", "c d e f g h"]), 1.2, 0.0).unwrap();
            let long = build_index(corpus(&["a b c c c c c c", "d e f g h"]), 1.2, 0.0).unwrap();
            // Same doc frequencies for a, b; different |d| for doc 0.
            let q = tokenize(&query);
            let only_ab: Vec<String> = q.tokens.iter().filter(|t| *t == "a" || *t == "b").cloned().collect();
            let q = tokenize(&only_ab.join(" "));
            prop_assert!((short.score(&q, 0).unwrap() - long.score(&q, 0).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn parallel_scores_match(docs in prop::collection::vec(doc_strategy(), 1..700), query in doc_strategy()) {
            let refs: Vec<&str> = docs.iter().map(String::as_str).collect();
            let idx = index(&refs);
            let q = tokenize(&query);
            prop_assert_eq!(idx.score_all_with(&q, Execution::Sequential), idx.score_all_with(&q, Execution::Parallel));
        }
    }
}
