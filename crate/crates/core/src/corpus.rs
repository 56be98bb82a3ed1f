//! Ticket records, corpus loading, PII redaction and train/eval splitting.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use regex_automata::{meta, Anchored, Input, MatchKind};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Wall-clock timestamp without a zone. Inputs with an offset are converted to UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(pub NaiveDateTime);

impl Timestamp {
    const FORMAT: &'static str = "%Y-%m-%dT%H:%M:%S%.f";

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            return Some(Timestamp(dt.naive_utc()));
        }
        for fmt in [
            "%Y-%m-%dT%H:%M:%S%.f",
            "%Y-%m-%d %H:%M:%S%.f",
            "%Y-%m-%dT%H:%M",
            "%Y-%m-%d %H:%M",
        ] {
            if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
                return Some(Timestamp(dt));
            }
        }
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .ok()
            .and_then(|d| d.and_hms_opt(0, 0, 0))
            .map(Timestamp)
    }

    pub fn now() -> Self {
        Timestamp(chrono::Utc::now().naive_utc())
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format(Self::FORMAT))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Timestamp::parse(&raw).ok_or_else(|| serde::de::Error::custom(format!("invalid ISO-8601 timestamp `{raw}`")))
    }
}

/// One support ticket.
///
/// `category`, `date_close` and `solution` are only filled in once the ticket
/// is closed; an absent field means "not recorded", never "empty".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ticket {
    pub external_id: String,
    pub title: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date_open: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date_close: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysts: Option<String>,
}

impl Ticket {
    pub fn new(external_id: impl Into<String>, title: impl Into<String>, description: impl Into<String>) -> Self {
        Ticket {
            external_id: external_id.into(),
            title: title.into(),
            description: description.into(),
            category: None,
            date_open: None,
            date_close: None,
            location: None,
            solution: None,
            analysts: None,
        }
    }

    /// The text every technique sees: title and description joined by one space.
    pub fn query_text(&self) -> String {
        query_text(&self.title, &self.description)
    }
}

pub fn query_text(title: &str, description: &str) -> String {
    let mut out = String::with_capacity(title.len() + description.len() + 1);
    out.push_str(title);
    out.push(' ');
    out.push_str(description);
    out
}

/// An ordered, id-unique collection of tickets. Immutable once built.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    tickets: Vec<Ticket>,
    id_index: HashMap<String, usize>,
}

impl Corpus {
    pub fn from_tickets(tickets: Vec<Ticket>) -> Result<Self> {
        let mut id_index = HashMap::with_capacity(tickets.len());
        for (pos, t) in tickets.iter().enumerate() {
            if t.external_id.is_empty() {
                return Err(Error::Invalid(format!(
                    "ticket at position {pos} has an empty external_id"
                )));
            }
            if id_index.insert(t.external_id.clone(), pos).is_some() {
                return Err(Error::DuplicateId(t.external_id.clone()));
            }
        }
        Ok(Corpus { tickets, id_index })
    }

    pub fn len(&self) -> usize {
        self.tickets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tickets.is_empty()
    }

    pub fn tickets(&self) -> &[Ticket] {
        &self.tickets
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Ticket> {
        self.tickets.iter()
    }

    pub fn get(&self, id: &str) -> Option<&Ticket> {
        self.id_index.get(id).map(|&i| &self.tickets[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.id_index.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.id_index.contains_key(id)
    }

    pub fn into_tickets(self) -> Vec<Ticket> {
        self.tickets
    }

    /// Ticket positions from oldest to newest.
    ///
    /// Sorted by `date_open`; tickets without one sort before dated tickets,
    /// and ingestion order breaks ties.
    pub fn recency_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.tickets.len()).collect();
        order.sort_by_key(|&i| (self.tickets[i].date_open, i));
        order
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for t in &self.tickets {
            serde_json::to_writer(&mut out, t)?;
            out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_jsonl(&mut out)?;
        out.flush().map_err(|e| Error::io(path, e))
    }
}

/// Reads a JSON-lines ticket file. Blank lines are skipped.
pub fn load_tickets(path: &Path) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_tickets(BufReader::new(file), &path.display().to_string())
}

pub fn read_tickets<R: BufRead>(reader: R, source_name: &str) -> Result<Corpus> {
    let mut tickets = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::malformed(source_name, lineno, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let ticket: Ticket = serde_json::from_str(&line).map_err(|e| Error::malformed(source_name, lineno, e))?;
        if ticket.external_id.is_empty() {
            return Err(Error::malformed(source_name, lineno, "empty external_id"));
        }
        if let Some(first) = seen.insert(ticket.external_id.clone(), lineno) {
            return Err(Error::malformed(
                source_name,
                lineno,
                Error::DuplicateId(format!("{} (first seen on line {first})", ticket.external_id)),
            ));
        }
        tickets.push(ticket);
    }
    Corpus::from_tickets(tickets)
}

/// Partitions `corpus` into (train, eval), keeping ingestion order in both halves.
pub fn split_train_eval<S: AsRef<str>>(corpus: &Corpus, eval_ids: &[S]) -> Result<(Corpus, Corpus)> {
    let wanted: BTreeSet<&str> = eval_ids.iter().map(AsRef::as_ref).collect();
    if let Some(unknown) = wanted.iter().find(|id| !corpus.contains(id)) {
        return Err(Error::UnknownId((*unknown).to_string()));
    }
    let (eval, train): (Vec<Ticket>, Vec<Ticket>) = corpus
        .iter()
        .cloned()
        .partition(|t| wanted.contains(t.external_id.as_str()));
    Ok((Corpus::from_tickets(train)?, Corpus::from_tickets(eval)?))
}

/// A redaction rule as written in the rules file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedactionRule {
    pub pattern: String,
    pub tag: String,
}

struct CompiledRule {
    finder: regex::Regex,
    longest: meta::Regex,
    tag: String,
}

/// Compiled rule list. Rules apply in order; within a rule, matches are
/// non-overlapping and leftmost-longest.
pub struct Redactor {
    rules: Vec<CompiledRule>,
}

impl fmt::Debug for Redactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.rules.iter().map(|r| (r.finder.as_str(), &r.tag)))
            .finish()
    }
}

fn valid_tag(tag: &str) -> bool {
    tag.len() > 2
        && tag.starts_with('[')
        && tag.ends_with(']')
        && tag[1..tag.len() - 1]
            .bytes()
            .all(|b| b.is_ascii_uppercase() || b == b'_')
}

impl Redactor {
    pub fn new(rules: &[RedactionRule]) -> Result<Self> {
        let mut compiled = Vec::with_capacity(rules.len());
        for (i, rule) in rules.iter().enumerate() {
            if !valid_tag(&rule.tag) {
                return Err(Error::Config(format!(
                    "redaction rule {i}: tag `{}` must look like [UPPER_CASE]",
                    rule.tag
                )));
            }
            let finder =
                regex::Regex::new(&rule.pattern).map_err(|e| Error::Config(format!("redaction rule {i}: {e}")))?;
            let longest = meta::Regex::builder()
                .configure(meta::Regex::config().match_kind(MatchKind::All))
                .build(&rule.pattern)
                .map_err(|e| Error::Config(format!("redaction rule {i}: {e}")))?;
            compiled.push(CompiledRule {
                finder,
                longest,
                tag: rule.tag.clone(),
            });
        }
        Ok(Redactor { rules: compiled })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let rules: Vec<RedactionRule> =
            serde_json::from_str(&raw).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Redactor::new(&rules)
    }

    pub fn redact(&self, text: &str) -> String {
        let mut current = text.to_string();
        for rule in &self.rules {
            current = rule.apply(&current);
        }
        current
    }

    pub fn redact_ticket(&self, ticket: &Ticket) -> Ticket {
        let r = |s: &Option<String>| s.as_ref().map(|v| self.redact(v));
        Ticket {
            external_id: ticket.external_id.clone(),
            title: self.redact(&ticket.title),
            description: self.redact(&ticket.description),
            category: ticket.category.clone(),
            date_open: ticket.date_open,
            date_close: ticket.date_close,
            location: ticket.location.clone(),
            solution: r(&ticket.solution),
            analysts: r(&ticket.analysts),
        }
    }
}

impl CompiledRule {
    fn apply(&self, text: &str) -> String {
        let mut out = String::with_capacity(text.len());
        let mut copied = 0;
        let mut pos = 0;
        while pos <= text.len() {
            let Some(first) = self.finder.find_at(text, pos) else {
                break;
            };
            let start = first.start();
            let end = self
                .longest
                .search(&Input::new(text).range(start..).anchored(Anchored::Yes))
                .map_or(first.end(), |m| m.end().max(first.end()));
            out.push_str(&text[copied..start]);
            out.push_str(&self.tag);
            copied = end;
            pos = if end > start {
                end
            } else {
                // empty match: step over one char
                match text[end..].chars().next() {
                    Some(c) => end + c.len_utf8(),
                    None => break,
                }
            };
        }
        out.push_str(&text[copied..]);
        out
    }
}

/// Convenience wrapper over [`Redactor`].
pub fn redact(text: &str, rules: &[RedactionRule]) -> Result<String> {
    Ok(Redactor::new(rules)?.redact(text))
}
