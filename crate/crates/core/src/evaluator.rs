//! Parsing accuracy (PA) and template precision / recall (PTA / RTA).
//!
//! All template comparisons are made on normalized text. A produced template
//! counts as correctly identified only if its text equals a ground-truth
//! template *and* it covers exactly that template's lines.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::CacheStats;
use crate::model::{normalize, ParseResult, Template};
use crate::preprocess::TruthRow;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("parsed output has {parsed} lines but ground truth has {truth}")]
    LengthMismatch { parsed: usize, truth: usize },
    #[error("line ids diverge at position {position}: parsed {parsed}, truth {truth}")]
    LineMismatch { position: usize, parsed: u64, truth: u64 },
    #[error("writing report: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub sample_s: f64,
    pub cache_s: f64,
    pub llm_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemplateAccuracy {
    pub pta: f64,
    pub rta: f64,
    pub n_correct: usize,
    pub n_identified: usize,
    pub n_ground_truth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pa: f64,
    pub pta: f64,
    pub rta: f64,
    pub n_correct_templates: usize,
    pub n_identified: usize,
    pub n_ground_truth: usize,
    pub total_lines: usize,
    pub timings: Timings,
    pub cache_stats: Option<CacheStats>,
}

fn check_len(results: &[ParseResult], truth: &[Template]) -> Result<(), EvalError> {
    if results.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            parsed: results.len(),
            truth: truth.len(),
        });
    }
    Ok(())
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Fraction of lines whose template matches the aligned ground truth.
pub fn parsing_accuracy(results: &[ParseResult], truth: &[Template]) -> Result<f64, EvalError> {
    check_len(results, truth)?;
    let correct = results
        .iter()
        .zip(truth)
        .filter(|(r, t)| normalize(r.template.text()) == normalize(t.text()))
        .count();
    Ok(ratio(correct, results.len()))
}

fn group_lines<'a>(items: impl Iterator<Item = (u64, &'a str)>) -> HashMap<String, BTreeSet<u64>> {
    let mut groups: HashMap<String, BTreeSet<u64>> = HashMap::new();
    for (line_id, text) in items {
        groups.entry(normalize(text)).or_default().insert(line_id);
    }
    groups
}

pub fn template_accuracy(results: &[ParseResult], truth: &[Template]) -> Result<TemplateAccuracy, EvalError> {
    check_len(results, truth)?;
    let produced = group_lines(results.iter().map(|r| (r.line_id, r.template.text())));
    let expected = group_lines(results.iter().zip(truth).map(|(r, t)| (r.line_id, t.text())));
    let n_correct = produced
        .iter()
        .filter(|(text, lines)| expected.get(*text) == Some(*lines))
        .count();
    Ok(TemplateAccuracy {
        pta: ratio(n_correct, produced.len()),
        rta: ratio(n_correct, expected.len()),
        n_correct,
        n_identified: produced.len(),
        n_ground_truth: expected.len(),
    })
}

/// Pairs parse results with ground-truth rows by `line_id`.
pub fn align<'a>(results: &[ParseResult], truth: &'a [TruthRow]) -> Result<Vec<Template>, EvalError> {
    if results.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            parsed: results.len(),
            truth: truth.len(),
        });
    }
    let by_id: HashMap<u64, &'a TruthRow> = truth.iter().map(|t| (t.line_id, t)).collect();
    results
        .iter()
        .enumerate()
        .map(|(position, r)| match by_id.get(&r.line_id) {
            Some(t) => Ok(t.template.clone()),
            None => Err(EvalError::LineMismatch {
                position,
                parsed: r.line_id,
                truth: truth[position].line_id,
            }),
        })
        .collect()
}

pub fn evaluate(
    results: &[ParseResult],
    truth: &[TruthRow],
    timings: Timings,
    cache_stats: Option<CacheStats>,
) -> Result<EvalReport, EvalError> {
    let aligned = align(results, truth)?;
    let pa = parsing_accuracy(results, &aligned)?;
    let ta = template_accuracy(results, &aligned)?;
    Ok(EvalReport {
        pa,
        pta: ta.pta,
        rta: ta.rta,
        n_correct_templates: ta.n_correct,
        n_identified: ta.n_identified,
        n_ground_truth: ta.n_ground_truth,
        total_lines: results.len(),
        timings,
        cache_stats,
    })
}

impl EvalReport {
    pub fn to_table(&self, dataset: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<14} {:>8} {:>8} {:>8} {:>6} {:>6} {:>6} {:>8}",
            "dataset", "PA", "PTA", "RTA", "N_c", "N_i", "N_g", "lines"
        );
        let _ = writeln!(
            out,
            "{:<14} {:>8.4} {:>8.4} {:>8.4} {:>6} {:>6} {:>6} {:>8}",
            dataset,
            self.pa,
            self.pta,
            self.rta,
            self.n_correct_templates,
            self.n_identified,
            self.n_ground_truth,
            self.total_lines
        );
        let t = &self.timings;
        let _ = writeln!(
            out,
            "time (s): sample {:.3}  cache {:.3}  llm {:.3}  total {:.3}",
            t.sample_s, t.cache_s, t.llm_s, t.total_s
        );
        if let Some(s) = &self.cache_stats {
            let _ = writeln!(
                out,
                "cache: lru_hits {}  pattern_hits {}  misses {}  evictions {}  hit_rate {:.4}",
                s.lru_hits,
                s.pattern_hits,
                s.misses,
                s.evictions,
                s.hit_rate()
            );
        }
        out
    }
}

/// Writes `LineId,Content,Produced,Truth` for every incorrectly parsed line.
pub fn write_mismatches(
    path: impl AsRef<Path>,
    results: &[ParseResult],
    truth: &[Template],
) -> Result<usize, EvalError> {
    check_len(results, truth)?;
    let io = |e: csv::Error| EvalError::Io(e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["LineId", "Content", "Produced", "Truth"]).map_err(io)?;
    let mut count = 0;
    for (r, t) in results.iter().zip(truth) {
        if normalize(r.template.text()) != normalize(t.text()) {
            w.write_record([r.line_id.to_string().as_str(), &r.content, r.template.text(), t.text()])
                .map_err(io)?;
            count += 1;
        }
    }
    w.flush().map_err(|e| EvalError::Io(e.to_string()))?;
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Source;
    use proptest::prelude::*;

    fn t(s: &str) -> Template {
        Template::new(s).unwrap()
    }

    fn results(templates: &[&str]) -> Vec<ParseResult> {
        templates
            .iter()
            .enumerate()
            .map(|(i, s)| ParseResult {
                line_id: i as u64 + 1,
                content: format!("line {i}"),
                template: t(s),
                source: Source::Llm,
            })
            .collect()
    }

    fn truth(templates: &[&str]) -> Vec<Template> {
        templates.iter().map(|s| t(s)).collect()
    }

    #[test]
    fn pa_counts() {
        let r = results(&["a <*>", "b <*>", "c <*>", "x"]);
        let g = truth(&["a <*>", "b <*>", "c <*>", "d <*>"]);
        assert_eq!(parsing_accuracy(&r, &g).unwrap(), 0.75);
        assert_eq!(
            parsing_accuracy(&r, &r.iter().map(|x| x.template.clone()).collect::<Vec<_>>()).unwrap(),
            1.0
        );
        let r = results(&["a  <*>"]);
        assert_eq!(parsing_accuracy(&r, &truth(&["a <*>"])).unwrap(), 1.0);
        assert!(matches!(
            parsing_accuracy(&r, &[]),
            Err(EvalError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn pta_rta_counts() {
        // Truth groups: T1{1} T2{2} T3{3} T4{4,5} T5{6}.
        // Produced: T1{1} T2{2} X{3,4,6} T4{5}: T4 text matches but covers a subset.
        let r = results(&["T1", "T2", "X", "X", "T4", "X"]);
        let g = truth(&["T1", "T2", "T3", "T4", "T4", "T5"]);
        let ta = template_accuracy(&r, &g).unwrap();
        assert_eq!((ta.n_correct, ta.n_identified, ta.n_ground_truth), (2, 4, 5));
        assert_eq!(ta.pta, 0.5);
        assert_eq!(ta.rta, 0.4);
    }

    #[test]
    fn subset_coverage_not_correct() {
        let r = results(&["a <*>", "other"]);
        let g = truth(&["a <*>", "a <*>"]);
        let ta = template_accuracy(&r, &g).unwrap();
        assert_eq!(ta.n_correct, 0);
    }

    #[test]
    fn perfect() {
        let r = results(&["a <*>", "b", "a <*>"]);
        let g = truth(&["a <*>", "b", "a <*>"]);
        let ta = template_accuracy(&r, &g).unwrap();
        assert_eq!((ta.pta, ta.rta), (1.0, 1.0));
    }

    #[test]
    fn evaluate_aligns_by_line_id() {
        let r = results(&["a <*>", "b"]);
        let rows = vec![
            TruthRow {
                line_id: 2,
                content: String::new(),
                template: t("b"),
            },
            TruthRow {
                line_id: 1,
                content: String::new(),
                template: t("a <*>"),
            },
        ];
        let report = evaluate(&r, &rows, Timings::default(), None).unwrap();
        assert_eq!((report.pa, report.pta, report.rta), (1.0, 1.0, 1.0));

        let extra = vec![
            rows[0].clone(),
            rows[1].clone(),
            TruthRow {
                line_id: 3,
                content: String::new(),
                template: t("c"),
            },
        ];
        assert!(matches!(
            evaluate(&r, &extra, Timings::default(), None),
            Err(EvalError::LengthMismatch { .. })
        ));
        assert!(report.to_table("x").contains("1.0000"));
    }

    #[test]
    fn mismatch_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let r = results(&["a <*>", "b"]);
        let n = write_mismatches(&path, &r, &truth(&["a <*>", "c"])).unwrap();
        assert_eq!(n, 1);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("2,line 1,b,c"));
    }

    proptest! {
        #[test]
        fn pa_one_implies_ta_one(labels in prop::collection::vec(0u8..6, 1..60)) {
            let names: Vec<String> = labels.iter().map(|l| format!("tpl {l} <*>")).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            let r = results(&refs);
            let g = truth(&refs);
            prop_assert_eq!(parsing_accuracy(&r, &g).unwrap(), 1.0);
            let ta = template_accuracy(&r, &g).unwrap();
            prop_assert_eq!((ta.pta, ta.rta), (1.0, 1.0));
        }

        #[test]
        fn ta_permutation_invariant(
            pairs in prop::collection::vec((0u8..4, 0u8..4), 1..40),
            seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let produced: Vec<String> = pairs.iter().map(|p| format!("p{}", p.0)).collect();
            let expected: Vec<String> = pairs.iter().map(|p| format!("p{}", p.1)).collect();
            let refs: Vec<&str> = produced.iter().map(String::as_str).collect();
            let r = results(&refs);
            let g: Vec<Template> = expected.iter().map(|s| t(s)).collect();
            let base = template_accuracy(&r, &g).unwrap();

            let mut order: Vec<usize> = (0..r.len()).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let r2: Vec<ParseResult> = order.iter().map(|&i| r[i].clone()).collect();
            let g2: Vec<Template> = order.iter().map(|&i| g[i].clone()).collect();
            prop_assert_eq!(template_accuracy(&r2, &g2).unwrap(), base);
            prop_assert!(base.n_correct <= base.n_identified.min(base.n_ground_truth));
        }
    }
}
