//! Report envelopes, TSV rendering, and the on-disk caches.
//!
//! Every command emits one envelope: artifact identity, the fully
//! resolved configuration, cache statistics, and the command-specific
//! report.  JSON is the machine format; TSV flattens the same value into
//! `path<TAB>value` lines for scanning.  Reports of successful runs are
//! stored under the cache directory keyed by the resolved configuration,
//! and replayed byte-for-byte on a repeat run, which is what makes
//! repeated runs byte-identical by construction.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use ztower_core::lvalues::BernoulliCache;
use ztower_core::{Error, Result};

/// The resolved run configuration, echoed verbatim into every report.
#[derive(Clone, Debug, Serialize)]
pub struct ResolvedConfig {
    pub command: String,
    pub tower: Option<String>,
    pub field: Option<String>,
    pub p: Option<u64>,
    pub mode: String,
    pub prec: u32,
    pub levels: u32,
    pub policy: String,
    pub hplus: Option<String>,
    pub format: String,
    pub cache_dir: Option<String>,
    pub jobs: usize,
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub character: Option<String>,
}

#[derive(Serialize)]
struct ArtifactInfo {
    name: &'static str,
    version: &'static str,
}

#[derive(Serialize)]
struct CacheInfo {
    bernoulli_preloaded: u64,
    bernoulli_entries: u64,
}

#[derive(Serialize)]
struct Envelope<'a> {
    artifact: ArtifactInfo,
    config: &'a ResolvedConfig,
    cache: CacheInfo,
    report: &'a Value,
}

/// Renders the envelope in the configured format, trailing newline
/// included.
pub fn render(
    config: &ResolvedConfig,
    preloaded: u64,
    cache: &BernoulliCache,
    report: &Value,
) -> Result<String> {
    let envelope = Envelope {
        artifact: ArtifactInfo {
            name: "ztower",
            version: env!("CARGO_PKG_VERSION"),
        },
        config,
        cache: CacheInfo {
            bernoulli_preloaded: preloaded,
            bernoulli_entries: cache.stats().entries,
        },
        report,
    };
    let value = serde_json::to_value(&envelope)
        .map_err(|e| Error::Internal(format!("report serialization: {e}")))?;
    Ok(match config.format.as_str() {
        "tsv" => {
            let mut rows = Vec::new();
            flatten("", &value, &mut rows);
            let mut out = String::new();
            for (path, cell) in rows {
                out.push_str(&path);
                out.push('\t');
                out.push_str(&cell);
                out.push('\n');
            }
            out
        }
        _ => {
            let mut out = serde_json::to_string_pretty(&value)
                .map_err(|e| Error::Internal(format!("report serialization: {e}")))?;
            out.push('\n');
            out
        }
    })
}

/// Depth-first flattening: objects append `.key`, arrays `.index`, and
/// scalars become one row.  Strings are emitted raw (tabs and newlines
/// replaced) so the TSV stays line-oriented.
fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, String)>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let path = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&path, v, out);
            }
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push((prefix.to_string(), "[]".into()));
            }
            for (i, v) in items.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), v, out);
            }
        }
        Value::String(s) => {
            let cell = s.replace(['\t', '\n'], " ");
            out.push((prefix.to_string(), cell));
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// The cache directory layout: a Bernoulli store shared by all commands
/// and one replay file per resolved configuration.
pub struct CacheDir {
    root: PathBuf,
}

impl CacheDir {
    pub fn new(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root.join("reports"))?;
        Ok(CacheDir { root: root.to_path_buf() })
    }

    fn bernoulli_path(&self) -> PathBuf {
        self.root.join("bernoulli.cache")
    }

    /// Loads the shared Bernoulli store; a missing file is an empty cache,
    /// a corrupt one fails loudly.
    pub fn load_bernoulli(&self) -> Result<BernoulliCache> {
        let path = self.bernoulli_path();
        if path.exists() {
            BernoulliCache::load(&path)
        } else {
            Ok(BernoulliCache::new())
        }
    }

    pub fn save_bernoulli(&self, cache: &BernoulliCache) -> Result<()> {
        cache.save(&self.bernoulli_path())
    }

    fn replay_path(&self, config: &ResolvedConfig) -> Result<PathBuf> {
        let key = serde_json::to_string(config)
            .map_err(|e| Error::Internal(format!("config serialization: {e}")))?;
        Ok(self
            .root
            .join("reports")
            .join(format!("{}-{:016x}.out", config.command, fnv64(key.as_bytes()))))
    }

    /// The stored output of a previous successful run with this exact
    /// configuration, if any.
    pub fn replay(&self, config: &ResolvedConfig) -> Result<Option<String>> {
        let path = self.replay_path(config)?;
        if path.exists() {
            Ok(Some(std::fs::read_to_string(&path)?))
        } else {
            Ok(None)
        }
    }

    pub fn store(&self, config: &ResolvedConfig, payload: &str) -> Result<()> {
        std::fs::write(self.replay_path(config)?, payload)?;
        Ok(())
    }
}

/// FNV-1a, enough to key replay files by configuration.
fn fnv64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x1_0000_01b3);
    }
    h
}
