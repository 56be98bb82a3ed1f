//! The recommendation service: a snapshot of the bootstrap corpus plus an
//! append-only journal of submitted tickets and analyst feedback.
//!
//! Store layout under `data_dir`:
//!
//! - `snapshot.jsonl`: one `{ticket, representation}` per bootstrap ticket,
//!   oldest first.
//! - `manifest.json`: model fingerprint, corpus digest and snapshot checksum.
//! - `journal.jsonl`: submitted tickets and feedback, in arrival order.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{load_tickets, Corpus, Ticket, Timestamp};
use crate::error::{Error, Result};
use crate::index::{top_k, Index};
use crate::model::{training_digest, ModelArtifact};
use crate::techniques::{DocRef, Representation, Technique};

mod config;
pub mod http;

pub use config::{ServiceConfig, ENV_PREFIX};

pub const SNAPSHOT_FILE: &str = "snapshot.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const JOURNAL_FILE: &str = "journal.jsonl";
const STORE_FORMAT: &str = "ticketsim-store/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Helpful,
    NotHelpful,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub query_ticket_id: String,
    pub recommended_ids: Vec<String>,
    pub verdict: Verdict,
    pub technique: String,
    pub timestamp: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRequest {
    pub query_ticket_id: String,
    #[serde(default)]
    pub recommended_ids: Vec<String>,
    pub verdict: Verdict,
    /// Defaults to the served technique.
    #[serde(default)]
    pub technique: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewTicket {
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub external_id: String,
    pub score: f64,
    pub title: String,
    pub solution: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub ticket_id: String,
    pub recommendations: Vec<Recommendation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub technique: String,
    pub index_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub ticket: Ticket,
    pub representation: Representation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format: String,
    model_fingerprint: String,
    corpus_digest: String,
    entries: usize,
    snapshot_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum JournalEvent {
    Ticket {
        ticket: Ticket,
        representation: Representation,
    },
    Feedback {
        record: FeedbackRecord,
    },
}

/// Tickets that could not be represented during bootstrap.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BootstrapReport {
    pub inserted: usize,
    pub loaded_from_snapshot: bool,
    pub failures: Vec<(String, String)>,
    pub replayed_tickets: usize,
    pub replayed_feedback: usize,
}

/// Represents every ticket, oldest first. Failures are logged and skipped.
pub fn bootstrap(corpus: &Corpus, technique: &dyn Technique) -> (Vec<SnapshotEntry>, Vec<(String, String)>) {
    let mut entries = Vec::with_capacity(corpus.len());
    let mut failures = Vec::new();
    for pos in corpus.recency_order() {
        let ticket = &corpus.tickets()[pos];
        let text = ticket.query_text();
        match technique.represent(DocRef::new(Some(&ticket.external_id), &text)) {
            Ok(representation) => entries.push(SnapshotEntry {
                ticket: ticket.clone(),
                representation,
            }),
            Err(e) => {
                tracing::warn!(ticket = %ticket.external_id, error = %e, "skipping ticket at bootstrap");
                failures.push((ticket.external_id.clone(), e.to_string()));
            }
        }
    }
    (entries, failures)
}

fn encode_snapshot(entries: &[SnapshotEntry]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for e in entries {
        serde_json::to_writer(&mut buf, e)?;
        buf.push(b'\n');
    }
    Ok(buf)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_snapshot(path: &Path, bytes: &[u8]) -> Result<Vec<SnapshotEntry>> {
    let name = path.display().to_string();
    bytes
        .split(|b| *b == b'\n')
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| serde_json::from_slice(l).map_err(|e| Error::malformed(&name, i + 1, e)))
        .collect()
}

/// Reads the journal, dropping a torn final line left by a crash.
fn read_journal(path: &Path) -> Result<Vec<JournalEvent>> {
    let mut file = match OpenOptions::new().read(true).write(true).open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut raw = Vec::new();
    file.read_to_end(&mut raw).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let complete = raw.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
    if complete < raw.len() {
        tracing::warn!(journal = %name, bytes = raw.len() - complete, "dropping torn journal tail");
        file.set_len(complete as u64).map_err(|e| Error::io(path, e))?;
    }
    let mut events = Vec::new();
    for (i, line) in BufReader::new(&raw[..complete]).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(serde_json::from_str(&line).map_err(|e| Error::malformed(&name, i + 1, e))?);
    }
    Ok(events)
}

struct Journal {
    path: PathBuf,
    out: BufWriter<File>,
}

impl Journal {
    fn open(path: PathBuf) -> Result<Self> {
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        file.seek(SeekFrom::End(0)).map_err(|e| Error::io(&path, e))?;
        Ok(Journal {
            out: BufWriter::new(file),
            path,
        })
    }

    fn append(&mut self, event: &JournalEvent) -> Result<()> {
        let mut line = serde_json::to_vec(event)?;
        line.push(b'\n');
        self.out.write_all(&line).map_err(|e| Error::io(&self.path, e))?;
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        self.out.get_ref().sync_data().map_err(|e| Error::io(&self.path, e))
    }
}

struct State {
    index: Index,
    tickets: HashMap<String, Ticket>,
    feedback: Vec<FeedbackRecord>,
    next_seq: u64,
}

impl State {
    fn insert_ticket(&mut self, ticket: Ticket, representation: Representation) -> Result<()> {
        self.index.insert(ticket.external_id.clone(), representation)?;
        self.tickets.insert(ticket.external_id.clone(), ticket);
        Ok(())
    }

    fn next_id(&mut self) -> String {
        loop {
            self.next_seq += 1;
            let id = format!("NEW{:08}", self.next_seq);
            if !self.tickets.contains_key(&id) {
                return id;
            }
        }
    }
}

pub struct Service {
    technique: Box<dyn Technique>,
    technique_name: String,
    candidate_window: usize,
    k: usize,
    state: RwLock<State>,
    journal: Mutex<Journal>,
    report: BootstrapReport,
}

impl Service {
    /// Loads the model and corpus named in `cfg`, then bootstraps or reopens the store.
    pub fn open(cfg: &ServiceConfig) -> Result<Self> {
        cfg.validate()?;
        let artifact = ModelArtifact::load(&cfg.model)?;
        if let Some(kind) = cfg.technique {
            if kind != artifact.kind() {
                return Err(Error::Config(format!(
                    "config selects `{kind}` but {} holds a `{}` model",
                    cfg.model.display(),
                    artifact.kind()
                )));
            }
        }
        let corpus = load_tickets(&cfg.corpus)?;
        let technique = artifact.instantiate()?;
        Self::with_technique(technique, &artifact.fingerprint, &corpus, cfg)
    }

    /// Bootstraps from an already-built technique. `fingerprint` identifies
    /// the model so a stale snapshot is rebuilt rather than reused.
    pub fn with_technique(
        technique: Box<dyn Technique>,
        fingerprint: &str,
        corpus: &Corpus,
        cfg: &ServiceConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let dir = &cfg.data_dir;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let snapshot_path = dir.join(SNAPSHOT_FILE);
        let manifest_path = dir.join(MANIFEST_FILE);
        let journal_path = dir.join(JOURNAL_FILE);
        let corpus_digest = training_digest(corpus)?;

        let mut report = BootstrapReport::default();
        let reusable = Self::reusable_snapshot(&manifest_path, &snapshot_path, fingerprint, &corpus_digest)?;
        let entries = match reusable {
            Some(entries) => {
                report.loaded_from_snapshot = true;
                entries
            }
            None => {
                if std::fs::metadata(&journal_path).is_ok_and(|m| m.len() > 0) {
                    return Err(Error::Config(format!(
                        "{} belongs to a different model or corpus; move it aside to start fresh",
                        journal_path.display()
                    )));
                }
                let (entries, failures) = bootstrap(corpus, technique.as_ref());
                let bytes = encode_snapshot(&entries)?;
                write_atomic(&snapshot_path, &bytes)?;
                let manifest = Manifest {
                    format: STORE_FORMAT.into(),
                    model_fingerprint: fingerprint.into(),
                    corpus_digest,
                    entries: entries.len(),
                    snapshot_sha256: sha256_hex(&bytes),
                };
                let mut m = serde_json::to_vec_pretty(&manifest)?;
                m.push(b'\n');
                write_atomic(&manifest_path, &m)?;
                report.failures = failures;
                entries
            }
        };

        let mut state = State {
            index: Index::new(),
            tickets: HashMap::with_capacity(entries.len()),
            feedback: Vec::new(),
            next_seq: 0,
        };
        report.inserted = entries.len();
        for e in entries {
            state.insert_ticket(e.ticket, e.representation)?;
        }
        for event in read_journal(&journal_path)? {
            match event {
                JournalEvent::Ticket { ticket, representation } => {
                    if let Some(seq) = ticket
                        .external_id
                        .strip_prefix("NEW")
                        .and_then(|s| s.parse::<u64>().ok())
                    {
                        state.next_seq = state.next_seq.max(seq);
                    }
                    state.insert_ticket(ticket, representation)?;
                    report.replayed_tickets += 1;
                }
                JournalEvent::Feedback { record } => {
                    state.feedback.push(record);
                    report.replayed_feedback += 1;
                }
            }
        }
        if !report.failures.is_empty() {
            tracing::error!(failed = report.failures.len(), "bootstrap skipped tickets");
        }
        Ok(Service {
            technique_name: technique.kind().as_str().to_string(),
            technique,
            candidate_window: cfg.candidate_window,
            k: cfg.k,
            state: RwLock::new(state),
            journal: Mutex::new(Journal::open(journal_path)?),
            report,
        })
    }

    fn reusable_snapshot(
        manifest_path: &Path,
        snapshot_path: &Path,
        fingerprint: &str,
        corpus_digest: &str,
    ) -> Result<Option<Vec<SnapshotEntry>>> {
        let Ok(raw) = std::fs::read(manifest_path) else {
            return Ok(None);
        };
        let Ok(manifest) = serde_json::from_slice::<Manifest>(&raw) else {
            tracing::warn!(path = %manifest_path.display(), "unreadable manifest; rebuilding snapshot");
            return Ok(None);
        };
        if manifest.format != STORE_FORMAT
            || manifest.model_fingerprint != fingerprint
            || manifest.corpus_digest != corpus_digest
        {
            return Ok(None);
        }
        let Ok(bytes) = std::fs::read(snapshot_path) else {
            return Ok(None);
        };
        if sha256_hex(&bytes) != manifest.snapshot_sha256 {
            tracing::warn!(path = %snapshot_path.display(), "snapshot checksum mismatch; rebuilding");
            return Ok(None);
        }
        let entries = read_snapshot(snapshot_path, &bytes)?;
        if entries.len() != manifest.entries {
            return Ok(None);
        }
        Ok(Some(entries))
    }

    pub fn report(&self) -> &BootstrapReport {
        &self.report
    }

    pub fn technique_name(&self) -> &str {
        &self.technique_name
    }

    pub fn health(&self) -> Health {
        Health {
            status: "ok".into(),
            technique: self.technique_name.clone(),
            index_size: self.index_size(),
        }
    }

    pub fn index_size(&self) -> usize {
        self.state.read().expect("state lock").index.len()
    }

    pub fn ticket(&self, id: &str) -> Result<Ticket> {
        self.state
            .read()
            .expect("state lock")
            .tickets
            .get(id)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("ticket `{id}`")))
    }

    pub fn feedback(&self) -> Vec<FeedbackRecord> {
        self.state.read().expect("state lock").feedback.clone()
    }

    /// Recommends from the most recent tickets, then stores the new ticket.
    pub fn submit_ticket(&self, new: &NewTicket) -> Result<SubmitResponse> {
        if new.title.trim().is_empty() && new.description.trim().is_empty() {
            return Err(Error::Invalid("title and description are both empty".into()));
        }
        let text = crate::corpus::query_text(&new.title, &new.description);
        let representation = self.technique.represent(DocRef::text(&text))?;

        let mut journal = self.journal.lock().expect("journal lock");
        let (ticket_id, recommendations) = {
            let state = self.state.read().expect("state lock");
            let candidates = state.index.recent_candidates(self.candidate_window, None);
            let result = top_k(&representation, &candidates, self.k, self.technique.scorer())?;
            let recs = result
                .items
                .into_iter()
                .map(|c| {
                    let t = &state.tickets[&c.external_id];
                    Recommendation {
                        title: t.title.clone(),
                        solution: t.solution.clone(),
                        external_id: c.external_id,
                        score: c.score,
                    }
                })
                .collect::<Vec<_>>();
            let mut probe = state.next_seq;
            let id = loop {
                probe += 1;
                let id = format!("NEW{probe:08}");
                if !state.tickets.contains_key(&id) {
                    break id;
                }
            };
            (id, recs)
        };

        let mut ticket = Ticket::new(&ticket_id, &new.title, &new.description);
        ticket.date_open = Some(Timestamp::now());
        let event = JournalEvent::Ticket {
            ticket: ticket.clone(),
            representation: representation.clone(),
        };
        journal.append(&event)?;
        let mut state = self.state.write().expect("state lock");
        let assigned = state.next_id();
        debug_assert_eq!(assigned, ticket_id);
        state.insert_ticket(ticket, representation)?;
        Ok(SubmitResponse {
            ticket_id,
            recommendations,
        })
    }

    pub fn record_feedback(&self, req: FeedbackRequest) -> Result<FeedbackRecord> {
        if req.recommended_ids.len() > self.k {
            return Err(Error::Invalid(format!(
                "at most {} recommended ids, got {}",
                self.k,
                req.recommended_ids.len()
            )));
        }
        let record = FeedbackRecord {
            query_ticket_id: req.query_ticket_id,
            recommended_ids: req.recommended_ids,
            verdict: req.verdict,
            technique: req.technique.unwrap_or_else(|| self.technique_name.clone()),
            timestamp: Timestamp::now(),
        };
        let mut journal = self.journal.lock().expect("journal lock");
        if !self
            .state
            .read()
            .expect("state lock")
            .tickets
            .contains_key(&record.query_ticket_id)
        {
            return Err(Error::NotFound(format!("ticket `{}`", record.query_ticket_id)));
        }
        journal.append(&JournalEvent::Feedback { record: record.clone() })?;
        self.state.write().expect("state lock").feedback.push(record.clone());
        Ok(record)
    }
}
