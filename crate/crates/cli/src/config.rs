//! Run configuration: a TOML file plus command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use iclparse_core::cache::CacheConfig;
use iclparse_core::llm::BackendConfig;
use iclparse_core::metatrain::EmitConfig;
use iclparse_core::pipeline::ParserConfig;
use iclparse_core::preprocess::DatasetConfig;
use iclparse_core::sampler::SamplerConfig;

/// Used when a dataset is given on the command line without a pattern.
pub const WHOLE_LINE: &str = r"^(?P<content>.*)$";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub datasets: Vec<DatasetConfig>,
    pub sampler: SamplerConfig,
    pub cache: CacheConfig,
    pub parser: ParserConfig,
    pub backend: BackendConfig,
    pub emit: EmitConfig,
    pub output_dir: PathBuf,
    /// Overrides the sampler and emitter seeds when set.
    pub seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            sampler: SamplerConfig::default(),
            cache: CacheConfig::default(),
            parser: ParserConfig::default(),
            backend: BackendConfig::default(),
            emit: EmitConfig::default(),
            output_dir: PathBuf::from("out"),
            seed: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        // Relative dataset paths are taken from the config file's directory.
        let base = path.parent().unwrap_or(Path::new("."));
        for d in &mut config.datasets {
            d.log_file_path = rebase(base, &d.log_file_path);
            d.ground_truth_path = d.ground_truth_path.as_deref().map(|p| rebase(base, p));
        }
        Ok(config)
    }

    /// Propagates the global seed and checks every sub-config.
    pub fn finish(&mut self) -> Result<()> {
        if let Some(seed) = self.seed {
            self.sampler.seed = seed;
            self.emit.seed = seed;
        }
        if let Ok(url) = std::env::var("ICLPARSE_ENDPOINT_URL") {
            if !url.is_empty() {
                self.backend.endpoint_url = url;
            }
        }
        self.sampler.validate()?;
        self.cache.validate()?;
        self.backend.validate()?;
        for d in &self.datasets {
            d.compile_pattern()?;
            if d.name.is_empty() || d.name.contains(['/', '\\']) {
                bail!("dataset name {:?} is not usable as a file prefix", d.name);
            }
        }
        Ok(())
    }
}

fn rebase(base: &Path, p: &str) -> String {
    let path = Path::new(p);
    if path.is_absolute() {
        p.to_owned()
    } else {
        base.join(path).to_string_lossy().into_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(
            &path,
            r#"
output_dir = "results"
seed = 7

[[datasets]]
name = "HDFS"
log_file_path = "logs/HDFS.log"
header_pattern = '^(?P<content>.*)$'
ground_truth_path = "logs/HDFS_truth.csv"

[sampler]
sample_ratio = 0.01

[parser]
shots = 3
order = "descending"

[backend]
kind = "http_chat"
endpoint_url = "http://localhost:9000"
"#,
        )
        .unwrap();
        let mut c = RunConfig::load(&path).unwrap();
        c.finish().unwrap();
        assert_eq!(c.sampler.seed, 7);
        assert_eq!(c.emit.seed, 7);
        assert_eq!(c.parser.shots, 3);
        assert_eq!(c.sampler.epsilon, 10.0);
        assert!(c.datasets[0].log_file_path.ends_with("logs/HDFS.log"));
        assert!(c.datasets[0].log_file_path.starts_with(dir.path().to_str().unwrap()));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
        let mut c: RunConfig = toml::from_str("[backend]\ntemperature = 0.5").unwrap();
        assert!(c.finish().is_err());
    }
}
