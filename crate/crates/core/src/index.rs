//! Similarity scoring and top-k selection over stored representations.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::techniques::{jaccard, random_select, Bm25Index, DocumentVector, Representation};

/// A·B / (‖A‖‖B‖); 0 when either vector is all zeros.
pub fn cosine(a: &DocumentVector, b: &DocumentVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.values().iter().zip(b.values()) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// How two representations are compared.
#[derive(Debug, Clone, Copy)]
pub enum Scorer<'a> {
    Cosine,
    Jaccard,
    /// Query terms scored against each candidate's term bag.
    Bm25(&'a Bm25Index),
    /// Ignores content: a seeded uniform sample of the candidates, all scored 0.
    Random {
        seed: u64,
    },
}

impl Scorer<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Scorer::Cosine => "cosine",
            Scorer::Jaccard => "jaccard",
            Scorer::Bm25(_) => "bm25",
            Scorer::Random { .. } => "random",
        }
    }

    fn incompatible(&self, r: &Representation) -> Error {
        Error::IncompatibleScorer {
            scorer: self.name(),
            representation: r.kind(),
        }
    }

    pub fn score(&self, query: &Representation, doc: &Representation) -> Result<f64> {
        match (self, query, doc) {
            (Scorer::Cosine, Representation::Dense(q), Representation::Dense(d)) => cosine(q, d),
            (Scorer::Jaccard, Representation::Labels(q), Representation::Labels(d)) => Ok(jaccard(q, d)),
            (Scorer::Bm25(index), Representation::Terms(q), Representation::Terms(d)) => {
                // expand query counts back into a term multiset
                let mut total = 0.0;
                for (term, &count) in &q.counts {
                    let one = std::slice::from_ref(term);
                    total += count as f64 * index.score_bag(one, d);
                }
                Ok(total)
            }
            (Scorer::Random { .. }, Representation::Key(_), Representation::Key(_)) => Ok(0.0),
            (s, q, d) => Err(s.incompatible(if s.accepts(q) { d } else { q })),
        }
    }

    pub fn accepts(&self, r: &Representation) -> bool {
        matches!(
            (self, r),
            (Scorer::Cosine, Representation::Dense(_))
                | (Scorer::Jaccard, Representation::Labels(_))
                | (Scorer::Bm25(_), Representation::Terms(_))
                | (Scorer::Random { .. }, Representation::Key(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub external_id: String,
    pub score: f64,
}

/// Ranked recommendations, best first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub items: Vec<ScoredCandidate>,
}

impl RetrievalResult {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|c| c.external_id.as_str())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// A stored entry seen through a recency window.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub external_id: &'a str,
    pub representation: &'a Representation,
    /// 0 is the newest entry.
    pub recency_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub external_id: String,
    pub representation: Representation,
}

/// Insertion-ordered store of representations (oldest first). All entries
/// share one representation kind.
#[derive(Debug, Clone, Default)]
pub struct Index {
    entries: Vec<IndexEntry>,
    positions: HashMap<String, usize>,
}

impl Index {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.positions.contains_key(id)
    }

    pub fn kind(&self) -> Option<&'static str> {
        self.entries.first().map(|e| e.representation.kind())
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Option<&IndexEntry> {
        self.positions.get(id).map(|&i| &self.entries[i])
    }

    pub fn recency_rank(&self, id: &str) -> Option<usize> {
        self.positions.get(id).map(|&i| self.entries.len() - 1 - i)
    }

    /// Appends a new newest entry.
    pub fn insert(&mut self, external_id: String, representation: Representation) -> Result<()> {
        if let Some(kind) = self.kind() {
            if kind != representation.kind() {
                return Err(Error::Contract(format!(
                    "index holds `{kind}` representations, refusing `{}`",
                    representation.kind()
                )));
            }
        }
        if self.positions.contains_key(&external_id) {
            return Err(Error::DuplicateId(external_id));
        }
        self.positions.insert(external_id.clone(), self.entries.len());
        self.entries.push(IndexEntry {
            external_id,
            representation,
        });
        Ok(())
    }

    /// The `window` newest entries, newest first, skipping `exclude`.
    pub fn recent_candidates(&self, window: usize, exclude: Option<&str>) -> Vec<Candidate<'_>> {
        self.entries
            .iter()
            .rev()
            .enumerate()
            .take(window)
            .filter(|(_, e)| Some(e.external_id.as_str()) != exclude)
            .map(|(rank, e)| Candidate {
                external_id: &e.external_id,
                representation: &e.representation,
                recency_rank: rank,
            })
            .collect()
    }
}

fn rank_order(a: &(f64, usize, &str), b: &(f64, usize, &str)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then_with(|| a.2.cmp(b.2))
}

/// The `k` best candidates by descending score; ties go to the smaller
/// recency rank, then the smaller id.
///
/// The random scorer returns its sample in draw order with score 0.
pub fn top_k(
    query: &Representation,
    candidates: &[Candidate<'_>],
    k: usize,
    scorer: Scorer<'_>,
) -> Result<RetrievalResult> {
    if k == 0 {
        return Err(Error::Invalid("k must be >= 1".into()));
    }
    if !scorer.accepts(query) {
        return Err(scorer.incompatible(query));
    }
    if let (Scorer::Random { seed }, Representation::Key(key)) = (scorer, query) {
        if let Some(c) = candidates.iter().find(|c| !scorer.accepts(c.representation)) {
            return Err(scorer.incompatible(c.representation));
        }
        let ids: Vec<&str> = candidates.iter().map(|c| c.external_id).collect();
        let picked = random_select(&ids, k, seed ^ key);
        return Ok(RetrievalResult {
            items: picked
                .into_iter()
                .map(|id| ScoredCandidate {
                    external_id: id.to_string(),
                    score: 0.0,
                })
                .collect(),
        });
    }

    let mut scored = Vec::with_capacity(candidates.len());
    for c in candidates {
        let s = scorer.score(query, c.representation)?;
        if !s.is_finite() {
            return Err(Error::Contract(format!("non-finite score for `{}`", c.external_id)));
        }
        scored.push((s, c.recency_rank, c.external_id));
    }
    scored.sort_by(rank_order);
    scored.truncate(k);
    Ok(RetrievalResult {
        items: scored
            .into_iter()
            .map(|(score, _, id)| ScoredCandidate {
                external_id: id.to_string(),
                score,
            })
            .collect(),
    })
}
