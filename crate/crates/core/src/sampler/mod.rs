//! Weighted density-based candidate sampling.
//!
//! Every log gets a scalar complexity `t^t + len` (token count `t`, character
//! length `len`). Logs are clustered with DBSCAN on that scalar, each cluster
//! (plus the noise points as one extra group) receives a quota proportional to
//! its size, and the quota is drawn without replacement with probability
//! proportional to `complexity + smoothing`. The drawn logs are dealt
//! alternately, heaviest first, into a meta-training set and an inference set.

pub mod dbscan;

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dbscan::{dbscan_1d, Clustering};

use crate::exec::Execution;
use crate::model::{tokenize, LogRecord, Template, TokenizedLog};
use crate::preprocess::deduplicate;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("no records to sample from")]
    EmptyInput,
    #[error("weight corpus is empty")]
    EmptyCorpus,
    #[error("sample ratio {ratio} over {records} records yields {target} logs; at least 2 are needed")]
    RatioTooSmall { ratio: f64, records: usize, target: usize },
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error("sample file {path}: {message}")]
    File { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// DBSCAN neighbourhood radius, in complexity units.
    pub epsilon: f64,
    pub min_pts: usize,
    pub sample_ratio: f64,
    pub smoothing_factor: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            epsilon: 10.0,
            min_pts: 5,
            sample_ratio: 0.0001,
            smoothing_factor: 1.0,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::InvalidConfig(m.to_owned()));
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return bad("epsilon must be >= 0");
        }
        if self.min_pts < 1 {
            return bad("min_pts must be >= 1");
        }
        if !(self.sample_ratio > 0.0 && self.sample_ratio <= 1.0) {
            return bad("sample_ratio must lie in (0, 1]");
        }
        if !self.smoothing_factor.is_finite() || self.smoothing_factor <= 0.0 {
            return bad("smoothing_factor must be > 0");
        }
        Ok(())
    }

    /// `ceil(sample_ratio * n)`, ignoring float noise below 1e-9.
    pub fn target_count(&self, n: usize) -> usize {
        let raw = self.sample_ratio * n as f64;
        ((raw - 1e-9).ceil().max(0.0) as usize).min(n)
    }
}

/// The two disjoint candidate pools, each sorted by `line_id`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct SampledSets {
    pub meta_set: Vec<LogRecord>,
    pub inference_set: Vec<LogRecord>,
}

/// `token_count^token_count + char_length`, saturating at `f64::MAX`.
pub fn complexity(log: &TokenizedLog) -> f64 {
    let t = log.token_count as f64;
    // powf(0, 0) == 1, as wanted for the empty log.
    let power = t.powf(t);
    let value = power + log.char_length as f64;
    if value.is_finite() {
        value
    } else {
        f64::MAX
    }
}

/// Normalized sampling weights `(c_i + s) / sum_j (c_j + s)`.
///
/// Terms are scaled by their maximum before summing so saturated
/// complexities cannot overflow the denominator.
pub fn weights_from_complexities(complexities: &[f64], factor_s: f64) -> Result<Vec<f64>, SamplerError> {
    if complexities.is_empty() {
        return Err(SamplerError::EmptyCorpus);
    }
    let scale = complexities
        .iter()
        .map(|c| c + factor_s)
        .fold(f64::MIN_POSITIVE, f64::max);
    let scaled: Vec<f64> = complexities.iter().map(|c| (c + factor_s) / scale).collect();
    let total: f64 = scaled.iter().sum();
    Ok(scaled.into_iter().map(|w| w / total).collect())
}

pub fn weights(corpus: &[TokenizedLog], factor_s: f64) -> Result<Vec<f64>, SamplerError> {
    let complexities: Vec<f64> = Execution::default().map(corpus, complexity);
    weights_from_complexities(&complexities, factor_s)
}

/// Weight of `corpus[index]` within `corpus`.
pub fn weight(corpus: &[TokenizedLog], index: usize, factor_s: f64) -> Result<f64, SamplerError> {
    if index >= corpus.len() {
        return Err(SamplerError::EmptyCorpus);
    }
    Ok(weights(corpus, factor_s)?[index])
}

/// Clusters records by complexity. Indices refer to `records`.
pub fn cluster(records: &[LogRecord], config: &SamplerConfig) -> Result<Clustering, SamplerError> {
    cluster_with(records, config, Execution::default())
}

pub fn cluster_with(
    records: &[LogRecord],
    config: &SamplerConfig,
    exec: Execution,
) -> Result<Clustering, SamplerError> {
    if records.is_empty() {
        return Err(SamplerError::EmptyInput);
    }
    config.validate()?;
    let complexities = exec.map(records, |r| complexity(&tokenize(&r.content)));
    Ok(dbscan_1d(&complexities, config.epsilon, config.min_pts, exec))
}

/// Largest-remainder apportionment of `target` over groups of the given sizes,
/// then at least one per group while `target` allows it.
pub fn allocate_quotas(sizes: &[usize], target: usize) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    if total == 0 || sizes.is_empty() {
        return vec![0; sizes.len()];
    }
    let target = target.min(total);
    let mut quotas: Vec<usize> = Vec::with_capacity(sizes.len());
    let mut remainders: Vec<(u128, usize)> = Vec::with_capacity(sizes.len());
    for (i, &size) in sizes.iter().enumerate() {
        let num = target as u128 * size as u128;
        quotas.push((num / total as u128) as usize);
        remainders.push((num % total as u128, i));
    }
    let assigned: usize = quotas.iter().sum();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().take(target - assigned) {
        quotas[i] += 1;
    }

    let nonempty = sizes.iter().filter(|&&s| s > 0).count();
    if target >= nonempty {
        for i in 0..sizes.len() {
            if sizes[i] > 0 && quotas[i] == 0 {
                let donor = (0..sizes.len())
                    .filter(|&j| quotas[j] > 1)
                    .max_by(|&a, &b| quotas[a].cmp(&quotas[b]).then(b.cmp(&a)))
                    .expect("a group holds more than one slot when target >= group count");
                quotas[donor] -= 1;
                quotas[i] = 1;
            }
        }
    }
    quotas
}

/// Weighted sampling without replacement (exponential-key method): each item
/// gets key `ln(u) / w` and the `count` largest keys win.
fn weighted_draw(members: &[usize], member_weights: &[f64], count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if count >= members.len() {
        // Still consume one draw per member so the stream does not depend on
        // which branch ran.
        for _ in members {
            let _: f64 = rng.gen();
        }
        return members.to_vec();
    }
    let mut keyed: Vec<(f64, usize)> = members
        .iter()
        .zip(member_weights)
        .map(|(&m, &w)| {
            let u: f64 = 1.0 - rng.gen::<f64>();
            (u.ln() / w, m)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().take(count).map(|(_, m)| m).collect()
}

pub fn sample(records: &[LogRecord], config: &SamplerConfig) -> Result<SampledSets, SamplerError> {
    sample_with(records, config, Execution::default())
}

pub fn sample_with(
    records: &[LogRecord],
    config: &SamplerConfig,
    exec: Execution,
) -> Result<SampledSets, SamplerError> {
    if records.is_empty() {
        return Err(SamplerError::EmptyInput);
    }
    config.validate()?;
    let records = deduplicate(records);
    let n = records.len();
    let target = config.target_count(n);
    if target < 2 {
        return Err(SamplerError::RatioTooSmall {
            ratio: config.sample_ratio,
            records: n,
            target,
        });
    }

    let complexities = exec.map(&records, |r| complexity(&tokenize(&r.content)));
    let global_weights = weights_from_complexities(&complexities, config.smoothing_factor)?;
    let clustering = dbscan_1d(&complexities, config.epsilon, config.min_pts, exec);

    let mut groups: Vec<&[usize]> = clustering.clusters.iter().map(Vec::as_slice).collect();
    if !clustering.noise.is_empty() {
        groups.push(&clustering.noise);
    }
    let sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
    let quotas = allocate_quotas(&sizes, target);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut drawn = Vec::with_capacity(target);
    for (group, &quota) in groups.iter().zip(&quotas) {
        let local: Vec<f64> = group.iter().map(|&i| complexities[i]).collect();
        let local_weights = weights_from_complexities(&local, config.smoothing_factor)?;
        drawn.extend(weighted_draw(group, &local_weights, quota, &mut rng));
    }

    drawn.sort_by(|&a, &b| {
        global_weights[b]
            .total_cmp(&global_weights[a])
            .then(records[a].line_id.cmp(&records[b].line_id))
    });
    let mut sets = SampledSets::default();
    for (k, &i) in drawn.iter().enumerate() {
        let target_set = if k % 2 == 0 {
            &mut sets.meta_set
        } else {
            &mut sets.inference_set
        };
        target_set.push(records[i].clone());
    }
    sets.meta_set.sort_by_key(|r| r.line_id);
    sets.inference_set.sort_by_key(|r| r.line_id);
    Ok(sets)
}

/// Provenance sidecar written next to the sampled CSVs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleProvenance {
    pub dataset: String,
    pub config: SamplerConfig,
    pub input_records: usize,
    pub deduplicated_records: usize,
    pub target: usize,
    pub meta_count: usize,
    pub inference_count: usize,
    pub elapsed_s: f64,
}

#[derive(Serialize, Deserialize)]
struct SampleRow {
    #[serde(rename = "LineId")]
    line_id: u64,
    #[serde(rename = "Content")]
    content: String,
    #[serde(rename = "EventTemplate", default)]
    template: Option<String>,
}

/// Writes `LineId,Content[,EventTemplate]`. The template column is present
/// only when `labels` is given; unlabeled rows leave it empty.
pub fn write_sample_csv(
    path: impl AsRef<Path>,
    records: &[LogRecord],
    labels: Option<&HashMap<u64, Template>>,
) -> Result<(), SamplerError> {
    let path = path.as_ref();
    let err = |e: &dyn std::fmt::Display| SamplerError::File {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut writer = csv::Writer::from_path(path).map_err(|e| err(&e))?;
    match labels {
        Some(labels) => {
            writer
                .write_record(["LineId", "Content", "EventTemplate"])
                .map_err(|e| err(&e))?;
            for r in records {
                let template = labels.get(&r.line_id).map(Template::text).unwrap_or("");
                writer
                    .write_record([r.line_id.to_string().as_str(), &r.content, template])
                    .map_err(|e| err(&e))?;
            }
        }
        None => {
            writer.write_record(["LineId", "Content"]).map_err(|e| err(&e))?;
            for r in records {
                writer
                    .write_record([r.line_id.to_string().as_str(), &r.content])
                    .map_err(|e| err(&e))?;
            }
        }
    }
    writer.flush().map_err(|e| err(&e))
}

/// Reads a sample CSV back. Rows with an empty or absent template column
/// carry `None`.
pub fn read_sample_csv(
    path: impl AsRef<Path>,
    dataset: &str,
) -> Result<Vec<(LogRecord, Option<Template>)>, SamplerError> {
    let path = path.as_ref();
    let err = |m: String| SamplerError::File {
        path: path.display().to_string(),
        message: m,
    };
    let data = fs::read(path).map_err(|e| err(e.to_string()))?;
    let mut reader = csv::Reader::from_reader(data.as_slice());
    let mut out = Vec::new();
    for row in reader.deserialize::<SampleRow>() {
        let row = row.map_err(|e| err(e.to_string()))?;
        let record = LogRecord::new(row.line_id, row.content, dataset).map_err(|e| err(e.to_string()))?;
        let template = match row.template.as_deref().map(str::trim) {
            Some(t) if !t.is_empty() => Some(Template::normalized(t).map_err(|e| err(e.to_string()))?),
            _ => None,
        };
        out.push((record, template));
    }
    Ok(out)
}
