//! Embeddings computed outside this process: either a precomputed per-ticket
//! vector file, or a remote HTTP provider behind a persistent content-hash cache.
//!
//! Precomputed file (JSON lines):
//!
//! ```text
//! {"provider":"sbert-multilingual","dim":512}
//! {"external_id":"ABC123456","values":[0.01, ...]}
//! ```
//!
//! Remote contract: `POST <url>` with `{"text": "..."}`, answered by
//! `{"values": [...]}`.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DocRef, DocumentVector, Representation, Technique, TechniqueKind};
use crate::error::{Error, Result};
use crate::index::Scorer;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingProviderSpec {
    pub name: String,
    pub dim: usize,
    pub source: EmbeddingSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum EmbeddingSource {
    /// Vectors keyed by ticket id, read from a precomputed file.
    VectorFile { path: PathBuf },
    /// Vectors computed from raw text by an HTTP service.
    Remote {
        url: String,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default = "default_retries")]
        retries: u32,
    },
}

fn default_timeout_ms() -> u64 {
    10_000
}

fn default_retries() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VectorFileHeader {
    pub provider: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorRecord {
    pub external_id: String,
    pub values: Vec<f64>,
}

/// Reads a precomputed embedding file. Every record must match the header dim.
pub fn read_vector_file(path: &Path) -> Result<(VectorFileHeader, Vec<VectorRecord>)> {
    let name = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let header: VectorFileHeader = match lines.next() {
        Some((_, line)) => {
            let line = line.map_err(|e| Error::malformed(&name, 1, e))?;
            serde_json::from_str(&line).map_err(|e| Error::malformed(&name, 1, e))?
        }
        None => return Err(Error::malformed(&name, 1, "missing header record")),
    };
    let mut records = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::malformed(&name, lineno, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: VectorRecord = serde_json::from_str(&line).map_err(|e| Error::malformed(&name, lineno, e))?;
        if rec.values.len() != header.dim {
            return Err(Error::malformed(
                &name,
                lineno,
                Error::DimensionMismatch {
                    expected: header.dim,
                    found: rec.values.len(),
                },
            ));
        }
        records.push(rec);
    }
    Ok((header, records))
}

pub fn write_vector_file<'a, I>(path: &Path, header: &VectorFileHeader, records: I) -> Result<()>
where
    I: IntoIterator<Item = &'a VectorRecord>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    for rec in records {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    values: Vec<f64>,
}

/// Append-only on-disk cache of provider outputs, keyed by a hash of
/// (provider name, dim, text). Reads are concurrent; writes are serialised.
pub struct EmbeddingCache {
    path: PathBuf,
    entries: RwLock<HashMap<String, Vec<f64>>>,
    writer: Mutex<BufWriter<File>>,
}

impl EmbeddingCache {
    pub fn open(dir: &Path, provider: &str) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let safe: String = provider
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        let path = dir.join(format!("{safe}.cache.jsonl"));
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
            for line in BufReader::new(file).lines() {
                let line = line.map_err(|e| Error::io(&path, e))?;
                // a torn final line from a crash is skipped
                if let Ok(entry) = serde_json::from_str::<CacheLine>(&line) {
                    entries.insert(entry.key, entry.values);
                }
            }
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let raw_len = file.metadata().map_err(|e| Error::io(&path, e))?.len();
        if raw_len > 0 && std::fs::read(&path).map_err(|e| Error::io(&path, e))?.last() != Some(&b'\n') {
            file.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        }
        Ok(EmbeddingCache {
            path,
            entries: RwLock::new(entries),
            writer: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn key(provider: &str, dim: usize, text: &str) -> String {
        let mut h = Sha256::new();
        h.update(provider.as_bytes());
        h.update([0]);
        h.update(dim.to_le_bytes());
        h.update([0]);
        h.update(text.as_bytes());
        hex::encode(h.finalize())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<Vec<f64>> {
        self.entries.read().expect("cache lock poisoned").get(key).cloned()
    }

    pub fn put(&self, key: &str, values: &[f64]) -> Result<()> {
        let mut writer = self.writer.lock().expect("cache writer poisoned");
        if self.get(key).is_some() {
            return Ok(());
        }
        let line = CacheLine {
            key: key.to_string(),
            values: values.to_vec(),
        };
        serde_json::to_writer(&mut *writer, &line)?;
        writer
            .write_all(b"\n")
            .and_then(|_| writer.flush())
            .map_err(|e| Error::io(&self.path, e))?;
        self.entries
            .write()
            .expect("cache lock poisoned")
            .insert(line.key, line.values);
        Ok(())
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    values: Vec<f64>,
}

struct RemoteClient {
    agent: ureq::Agent,
    url: String,
    retries: u32,
}

impl RemoteClient {
    fn new(url: &str, timeout_ms: u64, retries: u32) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteClient {
            agent,
            url: url.to_string(),
            retries,
        }
    }

    fn call_once(&self, text: &str) -> std::result::Result<Vec<f64>, (bool, String)> {
        let mut resp = self
            .agent
            .post(&self.url)
            .send_json(EmbedRequest { text })
            .map_err(|e| (true, e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err((true, format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err((false, format!("HTTP {status}")));
        }
        resp.body_mut()
            .read_json::<EmbedResponse>()
            .map(|r| r.values)
            .map_err(|e| (false, format!("bad response body: {e}")))
    }

    fn embed(&self, provider: &str, text: &str) -> Result<Vec<f64>> {
        let mut last = String::new();
        for attempt in 0..=self.retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(50 << attempt.min(6)));
            }
            match self.call_once(text) {
                Ok(values) => return Ok(values),
                Err((true, msg)) => last = msg,
                Err((false, msg)) => {
                    return Err(Error::Provider {
                        provider: provider.to_string(),
                        message: msg,
                        retryable: false,
                    })
                }
            }
        }
        Err(Error::Provider {
            provider: provider.to_string(),
            message: format!("gave up after {} attempts: {last}", self.retries + 1),
            retryable: true,
        })
    }
}

enum Backend {
    VectorFile(HashMap<String, Vec<f64>>),
    Remote {
        client: RemoteClient,
        cache: Option<EmbeddingCache>,
    },
}

/// A ready-to-use external embedding source.
pub struct ExternalEmbedding {
    spec: EmbeddingProviderSpec,
    backend: Backend,
}

impl ExternalEmbedding {
    /// Loads the vector file, or prepares the HTTP client (and cache, when `cache_dir` is set).
    pub fn open(spec: EmbeddingProviderSpec, cache_dir: Option<&Path>) -> Result<Self> {
        if spec.dim == 0 {
            return Err(Error::Config(format!("provider `{}` declares dim 0", spec.name)));
        }
        let backend = match &spec.source {
            EmbeddingSource::VectorFile { path } => {
                let (header, records) = read_vector_file(path)?;
                if header.dim != spec.dim {
                    return Err(Error::Contract(format!(
                        "{}: file dim {} but provider `{}` declares {}",
                        path.display(),
                        header.dim,
                        spec.name,
                        spec.dim
                    )));
                }
                let mut map = HashMap::with_capacity(records.len());
                for r in records {
                    if map.insert(r.external_id.clone(), r.values).is_some() {
                        return Err(Error::DuplicateId(r.external_id));
                    }
                }
                Backend::VectorFile(map)
            }
            EmbeddingSource::Remote {
                url,
                timeout_ms,
                retries,
            } => Backend::Remote {
                client: RemoteClient::new(url, *timeout_ms, *retries),
                cache: cache_dir.map(|d| EmbeddingCache::open(d, &spec.name)).transpose()?,
            },
        };
        Ok(ExternalEmbedding { spec, backend })
    }

    pub fn spec(&self) -> &EmbeddingProviderSpec {
        &self.spec
    }

    fn checked(&self, values: Vec<f64>) -> Result<DocumentVector> {
        if values.len() != self.spec.dim {
            return Err(Error::Contract(format!(
                "provider `{}` returned {} values, declared dim {}",
                self.spec.name,
                values.len(),
                self.spec.dim
            )));
        }
        DocumentVector::new(values)
    }

    /// Vector for `key`: a ticket id for vector-file sources, raw text for remote ones.
    pub fn embed(&self, key: &str) -> Result<DocumentVector> {
        match &self.backend {
            Backend::VectorFile(map) => match map.get(key) {
                Some(v) => self.checked(v.clone()),
                None => Err(Error::Provider {
                    provider: self.spec.name.clone(),
                    message: format!("no precomputed vector for ticket `{key}`"),
                    retryable: false,
                }),
            },
            Backend::Remote { client, cache } => {
                let cache_key = EmbeddingCache::key(&self.spec.name, self.spec.dim, key);
                if let Some(hit) = cache.as_ref().and_then(|c| c.get(&cache_key)) {
                    return self.checked(hit);
                }
                let vector = self.checked(client.embed(&self.spec.name, key)?)?;
                if let Some(cache) = cache {
                    cache.put(&cache_key, vector.values())?;
                }
                Ok(vector)
            }
        }
    }

    pub fn cache(&self) -> Option<&EmbeddingCache> {
        match &self.backend {
            Backend::Remote { cache, .. } => cache.as_ref(),
            Backend::VectorFile(_) => None,
        }
    }
}

impl Technique for ExternalEmbedding {
    fn kind(&self) -> TechniqueKind {
        TechniqueKind::ExternalEmbed
    }

    fn represent(&self, doc: DocRef<'_>) -> Result<Representation> {
        let key = match (&self.backend, doc.id) {
            (Backend::VectorFile(_), Some(id)) => id,
            (Backend::VectorFile(_), None) => {
                return Err(Error::Provider {
                    provider: self.spec.name.clone(),
                    message: "vector-file providers can only embed stored tickets".into(),
                    retryable: false,
                })
            }
            (Backend::Remote { .. }, _) => doc.text,
        };
        self.embed(key).map(Representation::Dense)
    }

    fn scorer(&self) -> Scorer<'_> {
        Scorer::Cosine
    }
}

/// `external_embed(spec, key)` as a one-shot call.
pub fn external_embed(spec: &EmbeddingProviderSpec, cache_dir: Option<&Path>, key: &str) -> Result<DocumentVector> {
    ExternalEmbedding::open(spec.clone(), cache_dir)?.embed(key)
}
