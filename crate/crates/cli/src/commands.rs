use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use iclparse_core::cache::{CacheStats, PreQueryCache};
use iclparse_core::evaluator::{self, EvalError, Timings};
use iclparse_core::llm::{BackendKind, HttpChatBackend, LlmBackend, OracleBackend};
use iclparse_core::metatrain;
use iclparse_core::pipeline::{self, LogParser};
use iclparse_core::preprocess::{self, DatasetConfig, TruthRow};
use iclparse_core::sampler::{self, SampleProvenance};
use iclparse_core::selector::Bm25Index;
use iclparse_core::{LogRecord, Source, Template};

use crate::config::{RunConfig, WHOLE_LINE};
use crate::{BackendArg, GlobalArgs};

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_EVAL_MISMATCH: u8 = 3;
pub const EXIT_BACKEND: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

type CliResult<T> = Result<T, CliError>;

trait OrExit<T> {
    fn or_exit(self, code: u8) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> OrExit<T> for Result<T, E> {
    fn or_exit(self, code: u8) -> CliResult<T> {
        self.map_err(|e| CliError { code, error: e.into() })
    }
}

fn input_error(msg: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_INPUT,
        error: anyhow!(msg.into()),
    }
}

struct Run {
    config: RunConfig,
    datasets: Vec<DatasetConfig>,
}

impl Run {
    fn out(&self, dataset: &str, suffix: &str) -> PathBuf {
        self.config.output_dir.join(format!("{dataset}_{suffix}"))
    }
}

fn setup(args: &GlobalArgs, need_dataset: bool) -> CliResult<Run> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path).or_exit(EXIT_INPUT)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = Some(seed);
    }
    if let Some(dir) = &args.output {
        config.output_dir = dir.clone();
    }
    match args.backend {
        Some(BackendArg::Http) => config.backend.kind = BackendKind::HttpChat,
        Some(BackendArg::Oracle) => config.backend.kind = BackendKind::Oracle,
        None => {}
    }

    let datasets = if args.log.is_some() || args.truth.is_some() {
        let stem = args
            .log
            .as_ref()
            .or(args.truth.as_ref())
            .and_then(|p| p.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into());
        vec![DatasetConfig {
            name: args.name.clone().unwrap_or(stem),
            log_file_path: args.log.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            header_pattern: args.header_pattern.clone().unwrap_or_else(|| WHOLE_LINE.to_owned()),
            ground_truth_path: args.truth.as_ref().map(|p| p.display().to_string()),
        }]
    } else {
        let mut all = config.datasets.clone();
        if let Some(name) = &args.dataset {
            all.retain(|d| &d.name == name);
            if all.is_empty() {
                return Err(input_error(format!("no dataset named {name:?} in the config")));
            }
        }
        all
    };
    config.datasets = datasets.clone();
    config.finish().or_exit(EXIT_INPUT)?;
    if need_dataset && datasets.is_empty() {
        return Err(input_error("no dataset given; use --config or --log"));
    }
    fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("creating {}", config.output_dir.display()))
        .or_exit(EXIT_INPUT)?;
    Ok(Run { config, datasets })
}

fn load_records(d: &DatasetConfig) -> CliResult<Vec<LogRecord>> {
    if d.log_file_path.is_empty() {
        return Err(input_error(format!("dataset {} has no log file", d.name)));
    }
    let records = preprocess::load_dataset(d).or_exit(EXIT_INPUT)?;
    if records.is_empty() {
        return Err(input_error(format!("{} contains no log lines", d.log_file_path)));
    }
    Ok(records)
}

fn load_truth(d: &DatasetConfig) -> CliResult<Option<Vec<TruthRow>>> {
    match &d.ground_truth_path {
        Some(p) => Ok(Some(preprocess::load_ground_truth(p).or_exit(EXIT_INPUT)?)),
        None => Ok(None),
    }
}

fn truth_labels(truth: &[TruthRow]) -> HashMap<u64, Template> {
    truth.iter().map(|t| (t.line_id, t.template.clone())).collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).or_exit(EXIT_FAILURE)?;
    fs::write(path, text + "\n")
        .with_context(|| format!("writing {}", path.display()))
        .or_exit(EXIT_FAILURE)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .or_exit(EXIT_INPUT)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .or_exit(EXIT_INPUT)
}

pub fn sample(args: &GlobalArgs, ratio: Option<f64>) -> CliResult<u8> {
    let mut run = setup(args, true)?;
    if let Some(r) = ratio {
        run.config.sampler.sample_ratio = r;
        run.config.sampler.validate().or_exit(EXIT_INPUT)?;
    }
    for d in &run.datasets {
        let records = load_records(d)?;
        let labels = load_truth(d)?.map(|t| truth_labels(&t));
        let started = Instant::now();
        let sets = sampler::sample(&records, &run.config.sampler).or_exit(EXIT_INPUT)?;
        let elapsed_s = started.elapsed().as_secs_f64();
        let unique = preprocess::deduplicate(&records).len();

        sampler::write_sample_csv(run.out(&d.name, "meta.csv"), &sets.meta_set, labels.as_ref())
            .or_exit(EXIT_FAILURE)?;
        sampler::write_sample_csv(run.out(&d.name, "inference.csv"), &sets.inference_set, labels.as_ref())
            .or_exit(EXIT_FAILURE)?;
        let provenance = SampleProvenance {
            dataset: d.name.clone(),
            config: run.config.sampler.clone(),
            input_records: records.len(),
            deduplicated_records: unique,
            target: run.config.sampler.target_count(unique),
            meta_count: sets.meta_set.len(),
            inference_count: sets.inference_set.len(),
            elapsed_s,
        };
        write_json(&run.out(&d.name, "sample.json"), &provenance)?;
        println!(
            "{}: {} lines, {} unique, sampled {} meta + {} inference in {:.3}s",
            d.name,
            records.len(),
            unique,
            sets.meta_set.len(),
            sets.inference_set.len(),
            elapsed_s
        );
    }
    Ok(0)
}

/// Reads a sampled pool and fills missing labels from ground truth.
fn labeled_pool(
    path: &Path,
    d: &DatasetConfig,
    truth: Option<&HashMap<u64, Template>>,
) -> CliResult<Vec<(LogRecord, Template)>> {
    let rows = sampler::read_sample_csv(path, &d.name).or_exit(EXIT_INPUT)?;
    let total = rows.len();
    let pool: Vec<(LogRecord, Template)> = rows
        .into_iter()
        .filter_map(|(r, t)| {
            let t = t.or_else(|| truth.and_then(|m| m.get(&r.line_id).cloned()))?;
            Some((r, t))
        })
        .collect();
    if pool.len() < total {
        warn!(
            "{}: {} of {total} rows have no label and were skipped",
            path.display(),
            total - pool.len()
        );
    }
    Ok(pool)
}

pub fn emit_train(args: &GlobalArgs, meta: Option<PathBuf>, per_shot: Option<usize>) -> CliResult<u8> {
    let run = setup(args, true)?;
    let mut emit = run.config.emit.clone();
    if let Some(k) = args.shots {
        emit.max_shot = k;
    }
    if per_shot.is_some() {
        emit.per_shot_count = per_shot;
    }
    for d in &run.datasets {
        let path = meta.clone().unwrap_or_else(|| run.out(&d.name, "meta.csv"));
        let truth = load_truth(d)?.map(|t| truth_labels(&t));
        let pool = labeled_pool(&path, d, truth.as_ref())?;
        let examples = metatrain::emit_with(&pool, &emit).or_exit(EXIT_INPUT)?;
        let out = run.out(&d.name, "train.jsonl");
        metatrain::write_jsonl(&out, &examples).or_exit(EXIT_FAILURE)?;
        println!(
            "{}: {} training examples (shots 0..={}) -> {}",
            d.name,
            examples.len(),
            emit.max_shot,
            out.display()
        );
    }
    Ok(0)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ParseStats {
    pub dataset: String,
    pub lines: usize,
    pub lru: usize,
    pub pattern: usize,
    pub llm: usize,
    pub fallback: usize,
    pub hit_rate: f64,
    pub cache: CacheStats,
    pub timings: Timings,
}

pub fn parse(args: &GlobalArgs, inference: Option<PathBuf>, warm_cache: Option<PathBuf>) -> CliResult<u8> {
    let run = setup(args, true)?;
    let mut parser_config = run.config.parser.clone();
    if let Some(k) = args.shots {
        parser_config.shots = k;
    }
    let mut exit = 0;
    for d in &run.datasets {
        let records = load_records(d)?;
        let truth = load_truth(d)?;
        let labels = truth.as_deref().map(truth_labels);

        let pool_path = inference.clone().unwrap_or_else(|| run.out(&d.name, "inference.csv"));
        let pool = if pool_path.exists() {
            labeled_pool(&pool_path, d, labels.as_ref())?
        } else {
            warn!(
                "{}: no inference pool at {}; prompting zero-shot",
                d.name,
                pool_path.display()
            );
            Vec::new()
        };
        let index = if pool.is_empty() || parser_config.shots == 0 {
            None
        } else {
            Some(Bm25Index::build(pool, parser_config.k1, parser_config.b).or_exit(EXIT_INPUT)?)
        };

        let backend: Box<dyn LlmBackend> = match run.config.backend.kind {
            BackendKind::Oracle => match &truth {
                Some(rows) => Box::new(OracleBackend::from_truth(rows)),
                None => {
                    return Err(input_error(format!(
                        "the oracle backend needs ground truth for {}",
                        d.name
                    )))
                }
            },
            BackendKind::HttpChat => Box::new(HttpChatBackend::new(&run.config.backend).or_exit(EXIT_INPUT)?),
        };
        let cache = match &warm_cache {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))
                    .or_exit(EXIT_INPUT)?;
                PreQueryCache::from_json(&text).or_exit(EXIT_INPUT)?
            }
            None => PreQueryCache::new(run.config.cache.clone()).or_exit(EXIT_INPUT)?,
        };

        let mut parser = LogParser::new(cache, index, backend.as_ref(), parser_config.clone());
        let result = parser.parse_all(&records);
        let mut timings = result.timings;
        let provenance = run.out(&d.name, "sample.json");
        if provenance.exists() {
            if let Ok(p) = read_json::<SampleProvenance>(&provenance) {
                timings.sample_s = p.elapsed_s;
            }
        }

        pipeline::write_structured_csv(run.out(&d.name, "structured.csv"), &result.results).or_exit(EXIT_FAILURE)?;
        fs::write(run.out(&d.name, "cache.json"), parser.cache().to_json() + "\n").or_exit(EXIT_FAILURE)?;
        let stats = ParseStats {
            dataset: d.name.clone(),
            lines: result.results.len(),
            lru: result.count(Source::Lru),
            pattern: result.count(Source::Pattern),
            llm: result.count(Source::Llm),
            fallback: result.count(Source::Fallback),
            hit_rate: result.stats.hit_rate(),
            cache: result.stats,
            timings,
        };
        write_json(&run.out(&d.name, "parse_stats.json"), &stats)?;
        println!(
            "{}: {} lines | lru {} pattern {} llm {} fallback {} | cache hit rate {:.2}% | {:.3}s",
            d.name,
            stats.lines,
            stats.lru,
            stats.pattern,
            stats.llm,
            stats.fallback,
            stats.hit_rate * 100.0,
            timings.total_s
        );
        if stats.fallback > 0 {
            let (line, e) = &result.failures[0];
            eprintln!(
                "{}: {} lines fell back to raw text; first failure at line {line}: {e}",
                d.name, stats.fallback
            );
            exit = EXIT_BACKEND;
        }
        info!("{}: wrote outputs to {}", d.name, run.config.output_dir.display());
    }
    Ok(exit)
}

pub fn eval(args: &GlobalArgs, parsed: Option<PathBuf>) -> CliResult<u8> {
    let run = setup(args, true)?;
    for d in &run.datasets {
        let truth = load_truth(d)?.ok_or_else(|| input_error(format!("no ground truth for {}", d.name)))?;
        let parsed_path = parsed.clone().unwrap_or_else(|| run.out(&d.name, "structured.csv"));
        let results = pipeline::read_structured_csv(&parsed_path).or_exit(EXIT_INPUT)?;

        let stats_path = run.out(&d.name, "parse_stats.json");
        let (timings, cache_stats) = if parsed.is_none() && stats_path.exists() {
            let s: ParseStats = read_json(&stats_path)?;
            (s.timings, Some(s.cache))
        } else {
            (Timings::default(), None)
        };

        let report = match evaluator::evaluate(&results, &truth, timings, cache_stats) {
            Ok(r) => r,
            Err(e @ (EvalError::LengthMismatch { .. } | EvalError::LineMismatch { .. })) => {
                return Err(CliError {
                    code: EXIT_EVAL_MISMATCH,
                    error: anyhow!("{}: {e}", d.name),
                })
            }
            Err(e) => return Err(e).or_exit(EXIT_FAILURE),
        };
        let aligned = evaluator::align(&results, &truth).or_exit(EXIT_EVAL_MISMATCH)?;
        let wrong = evaluator::write_mismatches(run.out(&d.name, "mismatches.csv"), &results, &aligned)
            .or_exit(EXIT_FAILURE)?;
        write_json(&run.out(&d.name, "report.json"), &report)?;
        let table = report.to_table(&d.name);
        fs::write(run.out(&d.name, "report.txt"), &table).or_exit(EXIT_FAILURE)?;
        print!("{table}");
        if wrong > 0 {
            println!(
                "{wrong} mismatched lines -> {}",
                run.out(&d.name, "mismatches.csv").display()
            );
        }
    }
    Ok(0)
}

pub fn cache_stats(args: &GlobalArgs, cache: Option<PathBuf>) -> CliResult<u8> {
    let paths: Vec<(String, PathBuf)> = match cache {
        Some(p) => vec![(p.display().to_string(), p)],
        None => {
            let run = setup(args, true)?;
            run.datasets
                .iter()
                .map(|d| (d.name.clone(), run.out(&d.name, "cache.json")))
                .collect()
        }
    };
    for (label, path) in paths {
        let text = fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))
            .or_exit(EXIT_INPUT)?;
        let cache = PreQueryCache::from_json(&text).or_exit(EXIT_INPUT)?;
        let s = cache.stats();
        println!("{label}:");
        println!("  lookups        {}", s.lookups());
        println!("  lru hits       {}", s.lru_hits);
        println!("  pattern hits   {}", s.pattern_hits);
        println!("  misses         {}", s.misses);
        println!("  evictions      {}", s.evictions);
        println!("  hit rate       {:.4}", s.hit_rate());
        println!("  lru entries    {} / {}", cache.lru_len(), cache.config().lru_capacity);
        println!("  patterns       {}", cache.patterns().len());
    }
    Ok(0)
}
