//! Two-tier pre-query cache.
//!
//! The first tier maps normalized logs to templates with LRU eviction; only
//! logs of at most `token_threshold` tokens enter it. The second tier is an
//! insertion-ordered list of distinct templates that are matched structurally
//! against a normalized log with [`validate`]. A lookup tries the exact tier,
//! then scans the patterns; a pattern hit is promoted into the exact tier.
//!
//! The cache is a single-writer structure: every method that touches it takes
//! `&mut self`. Share it between workers behind a mutex.

mod lru;
mod validate;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lru::LruMap;
pub use validate::{validate, validate_with, MatchMode};

use crate::model::{normalize, tokenize, Template};

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("invalid cache config: {0}")]
    InvalidConfig(String),
    #[error("bad cache snapshot: {0}")]
    BadSnapshot(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CacheConfig {
    pub lru_capacity: usize,
    /// Logs with more tokens than this only enter the pattern tier.
    pub token_threshold: usize,
    pub match_mode: MatchMode,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            lru_capacity: 4096,
            token_threshold: 128,
            match_mode: MatchMode::Anchored,
        }
    }
}

impl CacheConfig {
    pub fn validate(&self) -> Result<(), CacheError> {
        if self.lru_capacity < 1 {
            return Err(CacheError::InvalidConfig("lru_capacity must be >= 1".into()));
        }
        if self.token_threshold < 1 {
            return Err(CacheError::InvalidConfig("token_threshold must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub lru_hits: u64,
    pub pattern_hits: u64,
    pub misses: u64,
    pub evictions: u64,
}

impl CacheStats {
    pub fn lookups(&self) -> u64 {
        self.lru_hits + self.pattern_hits + self.misses
    }

    pub fn hit_rate(&self) -> f64 {
        match self.lookups() {
            0 => 0.0,
            n => (self.lru_hits + self.pattern_hits) as f64 / n as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Lookup {
    LruHit(Template),
    PatternHit(Template),
    Miss,
}

impl Lookup {
    pub fn template(&self) -> Option<&Template> {
        match self {
            Lookup::LruHit(t) | Lookup::PatternHit(t) => Some(t),
            Lookup::Miss => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PreQueryCache {
    config: CacheConfig,
    lru: LruMap<String, Template>,
    patterns: Vec<Template>,
    known: HashSet<String>,
    stats: CacheStats,
}

impl PreQueryCache {
    pub fn new(config: CacheConfig) -> Result<Self, CacheError> {
        config.validate()?;
        Ok(Self {
            lru: LruMap::new(config.lru_capacity),
            config,
            patterns: Vec::new(),
            known: HashSet::new(),
            stats: CacheStats::default(),
        })
    }

    pub fn config(&self) -> &CacheConfig {
        &self.config
    }

    pub fn stats(&self) -> CacheStats {
        self.stats
    }

    pub fn lru_len(&self) -> usize {
        self.lru.len()
    }

    pub fn patterns(&self) -> &[Template] {
        &self.patterns
    }

    /// LRU entries from least to most recently used.
    pub fn lru_entries(&self) -> impl Iterator<Item = (&str, &Template)> {
        self.lru.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn lookup(&mut self, raw: &str) -> Lookup {
        let key = normalize(raw);
        if let Some(t) = self.lru.get(&key) {
            self.stats.lru_hits += 1;
            return Lookup::LruHit(t.clone());
        }
        let mode = self.config.match_mode;
        let found = self.patterns.iter().find(|p| validate_with(&key, p, mode)).cloned();
        match found {
            Some(t) => {
                self.stats.pattern_hits += 1;
                self.remember(key, t.clone());
                Lookup::PatternHit(t)
            }
            None => {
                self.stats.misses += 1;
                Lookup::Miss
            }
        }
    }

    /// Registers a freshly parsed `(raw, template)` pair in both tiers. The
    /// template text is normalized before registration.
    pub fn insert(&mut self, raw: &str, template: &Template) {
        let template = if normalize(template.text()) == template.text() {
            template.clone()
        } else {
            match Template::normalized(template.text()) {
                Ok(t) => t,
                // Whitespace-only template text: keep it as given.
                Err(_) => template.clone(),
            }
        };
        if self.known.insert(template.text().to_owned()) {
            self.patterns.push(template.clone());
        }
        self.remember(normalize(raw), template);
    }

    fn remember(&mut self, key: String, template: Template) {
        if tokenize(&key).token_count > self.config.token_threshold {
            return;
        }
        if self.lru.put(key, template).is_some() {
            self.stats.evictions += 1;
        }
    }

    pub fn snapshot(&self) -> CacheSnapshot {
        CacheSnapshot {
            config: self.config.clone(),
            patterns: self.patterns.iter().map(|t| t.text().to_owned()).collect(),
            lru_entries: self.lru.iter().map(|(k, v)| (k.clone(), v.text().to_owned())).collect(),
            stats: self.stats,
        }
    }

    pub fn from_snapshot(snapshot: CacheSnapshot) -> Result<Self, CacheError> {
        let mut cache = Self::new(snapshot.config)?;
        for text in snapshot.patterns {
            let t = Template::new(text).map_err(|e| CacheError::BadSnapshot(e.to_string()))?;
            if cache.known.insert(t.text().to_owned()) {
                cache.patterns.push(t);
            }
        }
        for (key, text) in snapshot.lru_entries {
            let t = Template::new(text).map_err(|e| CacheError::BadSnapshot(e.to_string()))?;
            if !cache.known.contains(t.text()) {
                return Err(CacheError::BadSnapshot(format!(
                    "LRU template {:?} missing from pattern list",
                    t.text()
                )));
            }
            cache.lru.put(key, t);
        }
        cache.stats = snapshot.stats;
        Ok(cache)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.snapshot()).expect("snapshot serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, CacheError> {
        let snapshot: CacheSnapshot = serde_json::from_str(json).map_err(|e| CacheError::BadSnapshot(e.to_string()))?;
        Self::from_snapshot(snapshot)
    }
}

/// Serializable cache state for warm restarts. LRU entries are listed from
/// least to most recently used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheSnapshot {
    pub config: CacheConfig,
    pub patterns: Vec<String>,
    pub lru_entries: Vec<(String, String)>,
    pub stats: CacheStats,
}
