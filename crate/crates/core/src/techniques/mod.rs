//! Document representations and the techniques that produce them.
//!
//! Every technique is fitted once (or loaded from an artifact) and then turns
//! a ticket into a [`Representation`]. The [`Scorer`](crate::index::Scorer) it
//! reports decides how two representations are compared.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::index::Scorer;

pub mod bm25;
pub mod expert;
pub mod external;
pub mod lda;
pub mod random;
pub mod tfidf;
pub mod wordvec;

pub use bm25::{Bm25Index, Bm25Params};
pub use expert::{expert_labels, jaccard, ExpertSystem, Lexicon};
pub use external::{EmbeddingCache, EmbeddingProviderSpec, EmbeddingSource, ExternalEmbedding};
pub use lda::{LdaConfig, LdaModel};
pub use random::{random_select, RandomSelector};
pub use tfidf::TfidfModel;
pub use wordvec::{embed_average, load_word_vectors, WordVecAverager, WordVectorTable};

/// A dense, finite, non-empty vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DocumentVector(Vec<f64>);

impl DocumentVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Contract("document vector must have dim >= 1".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("document vector entry {i} is not finite")));
        }
        Ok(DocumentVector(values))
    }

    pub fn zeros(dim: usize) -> Self {
        DocumentVector(vec![0.0; dim.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for DocumentVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        DocumentVector::new(values)
    }
}

impl From<DocumentVector> for Vec<f64> {
    fn from(v: DocumentVector) -> Self {
        v.0
    }
}

/// Canonical lexicon labels found in a document.
pub type LabelSet = BTreeSet<String>;

/// Term counts and length of one document, as BM25 needs them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermBag {
    pub counts: BTreeMap<String, u32>,
    pub len: u32,
}

impl TermBag {
    pub fn from_tokens<'a, I: IntoIterator<Item = &'a String>>(tokens: I) -> Self {
        let mut bag = TermBag::default();
        for t in tokens {
            *bag.counts.entry(t.clone()).or_default() += 1;
            bag.len += 1;
        }
        bag
    }

    pub fn tf(&self, term: &str) -> u32 {
        self.counts.get(term).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Dense(DocumentVector),
    Labels(LabelSet),
    Terms(TermBag),
    /// Stable per-document key; carries no content. Used by the random baseline.
    Key(u64),
}

impl Representation {
    pub fn kind(&self) -> &'static str {
        match self {
            Representation::Dense(_) => "dense",
            Representation::Labels(_) => "labels",
            Representation::Terms(_) => "terms",
            Representation::Key(_) => "key",
        }
    }
}

/// What a technique is given for one document.
#[derive(Debug, Clone, Copy)]
pub struct DocRef<'a> {
    /// Ticket id, when the document is a stored ticket.
    pub id: Option<&'a str>,
    /// Raw query text (title, space, description).
    pub text: &'a str,
}

impl<'a> DocRef<'a> {
    pub fn new(id: Option<&'a str>, text: &'a str) -> Self {
        DocRef { id, text }
    }

    pub fn text(text: &'a str) -> Self {
        DocRef { id: None, text }
    }
}

pub trait Technique: Send + Sync {
    fn kind(&self) -> TechniqueKind;

    fn represent(&self, doc: DocRef<'_>) -> Result<Representation>;

    fn scorer(&self) -> Scorer<'_>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TechniqueKind {
    Expert,
    Tfidf,
    Bm25,
    Lda,
    WordvecAvg,
    ExternalEmbed,
    Random,
}

impl TechniqueKind {
    pub const ALL: [TechniqueKind; 7] = [
        TechniqueKind::Expert,
        TechniqueKind::Tfidf,
        TechniqueKind::Bm25,
        TechniqueKind::Lda,
        TechniqueKind::WordvecAvg,
        TechniqueKind::ExternalEmbed,
        TechniqueKind::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TechniqueKind::Expert => "expert",
            TechniqueKind::Tfidf => "tfidf",
            TechniqueKind::Bm25 => "bm25",
            TechniqueKind::Lda => "lda",
            TechniqueKind::WordvecAvg => "wordvec-avg",
            TechniqueKind::ExternalEmbed => "external-embed",
            TechniqueKind::Random => "random",
        }
    }
}

impl fmt::Display for TechniqueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TechniqueKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TechniqueKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown technique `{s}`")))
    }
}

/// First 8 bytes of SHA-256, as a stable cross-platform hash.
pub(crate) fn stable_hash(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vectors_reject_non_finite_and_empty() {
        assert!(DocumentVector::new(vec![]).is_err());
        assert!(DocumentVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(serde_json::from_str::<DocumentVector>("[]").is_err());
        let v: DocumentVector = serde_json::from_str("[3.0,4.0]").unwrap();
        assert_eq!(v.norm(), 5.0);
    }

    #[test]
    fn kinds_round_trip_through_names() {
        for k in TechniqueKind::ALL {
            assert_eq!(k.as_str().parse::<TechniqueKind>().unwrap(), k);
        }
        assert!("bert".parse::<TechniqueKind>().is_err());
    }

    #[test]
    fn term_bag_counts() {
        let toks: Vec<String> = ["a", "b", "a"].iter().map(|s| s.to_string()).collect();
        let bag = TermBag::from_tokens(&toks);
        assert_eq!(bag.len, 3);
        assert_eq!(bag.tf("a"), 2);
        assert_eq!(bag.tf("z"), 0);
    }
}
