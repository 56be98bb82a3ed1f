use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{DocRef, DocumentVector, Representation, Technique, TechniqueKind};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::index::Scorer;
use crate::textprep::NormalizationConfig;

pub const DEFAULT_MAX_FEATURES: usize = 500;

/// Smoothed-idf TF-IDF over the most document-frequent training terms.
///
/// Vocabulary is kept in lexicographic order; vector component `i` belongs to
/// `vocabulary[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TfidfParts", into = "TfidfParts")]
pub struct TfidfModel {
    cfg: NormalizationConfig,
    vocabulary: Vec<String>,
    idf: Vec<f64>,
    positions: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct TfidfParts {
    cfg: NormalizationConfig,
    vocabulary: Vec<String>,
    idf: Vec<f64>,
}

impl TryFrom<TfidfParts> for TfidfModel {
    type Error = Error;

    fn try_from(p: TfidfParts) -> Result<Self> {
        TfidfModel::from_parts(p.cfg, p.vocabulary, p.idf)
    }
}

impl From<TfidfModel> for TfidfParts {
    fn from(m: TfidfModel) -> Self {
        TfidfParts {
            cfg: m.cfg,
            vocabulary: m.vocabulary,
            idf: m.idf,
        }
    }
}

impl TfidfModel {
    pub fn from_parts(cfg: NormalizationConfig, vocabulary: Vec<String>, idf: Vec<f64>) -> Result<Self> {
        if vocabulary.len() != idf.len() {
            return Err(Error::Contract(format!(
                "tf-idf vocabulary has {} terms but {} idf weights",
                vocabulary.len(),
                idf.len()
            )));
        }
        if idf.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::Contract("tf-idf idf weights must be finite and positive".into()));
        }
        let positions: HashMap<String, usize> = vocabulary.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        if positions.len() != vocabulary.len() {
            return Err(Error::Contract("tf-idf vocabulary has duplicate terms".into()));
        }
        Ok(TfidfModel {
            cfg,
            vocabulary,
            idf,
            positions,
        })
    }

    pub fn fit(train: &Corpus, cfg: NormalizationConfig, max_features: usize) -> Result<Self> {
        let texts: Vec<String> = train.iter().map(|t| t.query_text()).collect();
        Self::fit_texts(&texts, cfg, max_features)
    }

    pub fn fit_texts<S: AsRef<str>>(texts: &[S], cfg: NormalizationConfig, max_features: usize) -> Result<Self> {
        if texts.is_empty() {
            return Err(Error::Invalid("tf-idf needs a non-empty training corpus".into()));
        }
        if max_features == 0 {
            return Err(Error::Config("tf-idf max_features must be >= 1".into()));
        }
        cfg.validate()?;
        let mut df: BTreeMap<String, u64> = BTreeMap::new();
        for text in texts {
            let distinct: HashSet<String> = cfg.preprocess(text.as_ref()).into_vec().into_iter().collect();
            for term in distinct {
                *df.entry(term).or_default() += 1;
            }
        }
        if df.is_empty() {
            return Err(Error::Invalid(
                "tf-idf training corpus has no terms after preprocessing".into(),
            ));
        }
        let mut ranked: Vec<(String, u64)> = df.into_iter().collect();
        // BTreeMap iteration is lexicographic, so a stable sort on df keeps ties lexicographic
        ranked.sort_by_key(|r| std::cmp::Reverse(r.1));
        ranked.truncate(max_features);
        ranked.sort_by(|a, b| a.0.cmp(&b.0));

        let n = texts.len() as f64;
        let idf = ranked
            .iter()
            .map(|(_, d)| ((1.0 + n) / (1.0 + *d as f64)).ln() + 1.0)
            .collect();
        let vocabulary = ranked.into_iter().map(|(t, _)| t).collect();
        Self::from_parts(cfg, vocabulary, idf)
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn dim(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn config(&self) -> &NormalizationConfig {
        &self.cfg
    }

    /// Raw-count tf times idf, L2-normalised. Text without vocabulary terms maps to zeros.
    pub fn represent_text(&self, text: &str) -> DocumentVector {
        let mut values = vec![0.0; self.dim()];
        for tok in &self.cfg.preprocess(text) {
            if let Some(&i) = self.positions.get(tok) {
                values[i] += 1.0;
            }
        }
        for (v, w) in values.iter_mut().zip(&self.idf) {
            *v *= w;
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        DocumentVector(values)
    }
}

impl Technique for TfidfModel {
    fn kind(&self) -> TechniqueKind {
        TechniqueKind::Tfidf
    }

    fn represent(&self, doc: DocRef<'_>) -> Result<Representation> {
        Ok(Representation::Dense(self.represent_text(doc.text)))
    }

    fn scorer(&self) -> Scorer<'_> {
        Scorer::Cosine
    }
}
