//! Okapi BM25 with a floor on negative idf.
//!
//! Collection statistics (document frequencies, average length) come from the
//! training corpus. Candidate documents outside the training set are scored
//! from their own [`TermBag`] against those statistics.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{DocRef, Representation, Technique, TechniqueKind, TermBag};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::index::Scorer;
use crate::textprep::NormalizationConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    pub epsilon: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params {
            k1: 1.5,
            b: 0.75,
            epsilon: 0.25,
        }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1.is_finite() && self.k1 >= 0.0) {
            return Err(Error::Config(format!("bm25 k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config(format!("bm25 b must be in [0, 1], got {}", self.b)));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Config(format!(
                "bm25 epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IndexedDoc {
    id: String,
    bag: TermBag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Bm25Parts", into = "Bm25Parts")]
pub struct Bm25Index {
    params: Bm25Params,
    cfg: NormalizationConfig,
    doc_freq: BTreeMap<String, u32>,
    docs: Vec<IndexedDoc>,
    // derived
    avgdl: f64,
    idf: HashMap<String, f64>,
    idf_floor: f64,
    positions: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct Bm25Parts {
    params: Bm25Params,
    cfg: NormalizationConfig,
    doc_freq: BTreeMap<String, u32>,
    docs: Vec<IndexedDoc>,
}

impl TryFrom<Bm25Parts> for Bm25Index {
    type Error = Error;

    fn try_from(p: Bm25Parts) -> Result<Self> {
        Bm25Index::from_parts(p.params, p.cfg, p.doc_freq, p.docs)
    }
}

impl From<Bm25Index> for Bm25Parts {
    fn from(i: Bm25Index) -> Self {
        Bm25Parts {
            params: i.params,
            cfg: i.cfg,
            doc_freq: i.doc_freq,
            docs: i.docs,
        }
    }
}

impl Bm25Index {
    pub fn fit(train: &Corpus, params: Bm25Params, cfg: NormalizationConfig) -> Result<Self> {
        let docs: Vec<(String, String)> = train.iter().map(|t| (t.external_id.clone(), t.query_text())).collect();
        Self::fit_docs(&docs, params, cfg)
    }

    /// Builds an index over `(id, text)` pairs.
    pub fn fit_docs(docs: &[(String, String)], params: Bm25Params, cfg: NormalizationConfig) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::Invalid("bm25 needs a non-empty training corpus".into()));
        }
        params.validate()?;
        cfg.validate()?;
        let mut doc_freq: BTreeMap<String, u32> = BTreeMap::new();
        let mut indexed = Vec::with_capacity(docs.len());
        for (id, text) in docs {
            let bag = TermBag::from_tokens(&cfg.preprocess(text));
            for term in bag.counts.keys() {
                *doc_freq.entry(term.clone()).or_default() += 1;
            }
            indexed.push(IndexedDoc { id: id.clone(), bag });
        }
        Self::from_parts(params, cfg, doc_freq, indexed)
    }

    fn from_parts(
        params: Bm25Params,
        cfg: NormalizationConfig,
        doc_freq: BTreeMap<String, u32>,
        docs: Vec<IndexedDoc>,
    ) -> Result<Self> {
        params.validate()?;
        let n = docs.len() as f64;
        let mut positions = HashMap::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            if positions.insert(d.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(d.id.clone()));
            }
        }
        let total_len: u64 = docs.iter().map(|d| d.bag.len as u64).sum();
        let avgdl = if docs.is_empty() { 0.0 } else { total_len as f64 / n };

        let raw: HashMap<String, f64> = doc_freq
            .iter()
            .map(|(t, &df)| (t.clone(), ((n - df as f64 + 0.5) / (df as f64 + 0.5)).ln()))
            .collect();
        let positive: Vec<f64> = raw.values().copied().filter(|v| *v > 0.0).collect();
        let mean_positive = if positive.is_empty() {
            0.0
        } else {
            positive.iter().sum::<f64>() / positive.len() as f64
        };
        let idf_floor = params.epsilon * mean_positive;
        let idf = raw
            .into_iter()
            .map(|(t, v)| (t, if v < 0.0 { idf_floor } else { v }))
            .collect();

        Ok(Bm25Index {
            params,
            cfg,
            doc_freq,
            docs,
            avgdl,
            idf,
            idf_floor,
            positions,
        })
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn config(&self) -> &NormalizationConfig {
        &self.cfg
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn doc_len(&self, doc_id: &str) -> Option<u32> {
        self.positions.get(doc_id).map(|&i| self.docs[i].bag.len)
    }

    pub fn doc_freq(&self, term: &str) -> u32 {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }

    /// Value negative idfs are raised to: epsilon times the mean of the positive idfs.
    pub fn idf_floor(&self) -> f64 {
        self.idf_floor
    }

    /// Floored idf; terms never seen in training have idf 0.
    pub fn idf(&self, term: &str) -> f64 {
        self.idf.get(term).copied().unwrap_or(0.0)
    }

    pub fn bag(&self, text: &str) -> TermBag {
        TermBag::from_tokens(&self.cfg.preprocess(text))
    }

    /// Okapi score of a document bag for already-preprocessed query terms.
    /// Repeated query terms contribute once per occurrence.
    pub fn score_bag<'a, I>(&self, query_terms: I, doc: &TermBag) -> f64
    where
        I: IntoIterator<Item = &'a String>,
    {
        let Bm25Params { k1, b, .. } = self.params;
        let length_ratio = if self.avgdl > 0.0 {
            doc.len as f64 / self.avgdl
        } else {
            1.0
        };
        let norm = k1 * (1.0 - b + b * length_ratio);
        query_terms
            .into_iter()
            .map(|term| {
                let tf = doc.tf(term) as f64;
                if tf == 0.0 {
                    return 0.0;
                }
                self.idf(term) * tf * (k1 + 1.0) / (tf + norm)
            })
            .sum()
    }

    /// Scores an indexed training document against raw query text.
    pub fn score(&self, query_text: &str, doc_id: &str) -> Result<f64> {
        let &pos = self
            .positions
            .get(doc_id)
            .ok_or_else(|| Error::UnknownId(doc_id.to_string()))?;
        let query = self.cfg.preprocess(query_text);
        Ok(self.score_bag(&query, &self.docs[pos].bag))
    }
}

impl Technique for Bm25Index {
    fn kind(&self) -> TechniqueKind {
        TechniqueKind::Bm25
    }

    fn represent(&self, doc: DocRef<'_>) -> Result<Representation> {
        Ok(Representation::Terms(self.bag(doc.text)))
    }

    fn scorer(&self) -> Scorer<'_> {
        Scorer::Bm25(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn docs(texts: &[&str]) -> Vec<(String, String)> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| (format!("D{i}"), t.to_string()))
            .collect()
    }

    fn fit(texts: &[&str]) -> Bm25Index {
        Bm25Index::fit_docs(&docs(texts), Bm25Params::default(), NormalizationConfig::default()).unwrap()
    }

    #[test]
    fn default_params() {
        let p = Bm25Params::default();
        assert_eq!((p.k1, p.b, p.epsilon), (1.5, 0.75, 0.25));
        assert_eq!(fit(&["vpn"]).params(), p);
    }

    #[test]
    fn common_terms_are_floored_to_epsilon_times_mean_positive_idf() {
        // N = 4. df(vpn) = 4 -> ln(0.5/4.5) < 0; df(mail) = 1 -> ln(3.5/1.5);
        // df(disk) = 1 -> ln(3.5/1.5); df(wifi) = 2 -> ln(2.5/2.5) = 0.
        let idx = fit(&["vpn mail wifi", "vpn disk wifi", "vpn", "vpn"]);
        let pos = (3.5f64 / 1.5).ln();
        assert!((idx.idf("mail") - pos).abs() < 1e-12);
        assert_eq!(idx.idf("wifi"), 0.0);
        assert!((idx.idf_floor() - 0.25 * pos).abs() < 1e-12);
        assert!((idx.idf("vpn") - 0.25 * pos).abs() < 1e-12);
    }

    #[test]
    fn single_document_corpus() {
        let idx = fit(&["printer jam"]);
        assert_eq!(idx.avgdl(), 2.0);
        // every term has df = N = 1 -> negative idf and no positive idf to take a mean of
        assert_eq!(idx.idf_floor(), 0.0);
        let s = idx.score("printer", "D0").unwrap();
        // |d| = avgdl, tf = 1: idf * 2.5 / 2.5
        assert!((s - idx.idf("printer")).abs() < 1e-12);
    }

    #[test]
    fn hand_evaluated_score() {
        let idx = fit(&["vpn down down", "mail", "disk", "wifi"]);
        // N = 4, df(down) = 1, avgdl = 6/4, |d| = 3, tf = 2
        let idf = (3.5f64 / 1.5).ln();
        let norm = 1.5 * (1.0 - 0.75 + 0.75 * 3.0 / 1.5);
        let expected = idf * 2.0 * 2.5 / (2.0 + norm);
        assert!((idx.score("down", "D0").unwrap() - expected).abs() < 1e-12);
        assert_eq!(idx.score("mail", "D0").unwrap(), 0.0);
        assert_eq!(idx.score("", "D0").unwrap(), 0.0);
        assert!(matches!(idx.score("vpn", "nope"), Err(Error::UnknownId(_))));
    }

    #[test]
    fn unseen_query_terms_contribute_nothing() {
        let idx = fit(&["vpn", "mail"]);
        let bag = idx.bag("printer printer");
        assert_eq!(idx.score_bag(&idx.cfg.preprocess("printer"), &bag), 0.0);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = Bm25Params {
            b: 1.5,
            ..Default::default()
        };
        assert!(Bm25Index::fit_docs(&docs(&["x"]), p, NormalizationConfig::default()).is_err());
    }

    #[test]
    fn serde_round_trip_recomputes_statistics() {
        let idx = fit(&["vpn down", "mail down", "disk"]);
        let back: Bm25Index = serde_json::from_str(&serde_json::to_string(&idx).unwrap()).unwrap();
        assert_eq!(back.idf("down"), idx.idf("down"));
        assert_eq!(back.avgdl(), idx.avgdl());
    }

    proptest! {
        #[test]
        fn score_non_decreasing_in_tf(tf in 0u32..20, len in 1u32..40) {
            let idx = fit(&["vpn", "mail", "disk", "wifi", "vpn mail"]);
            prop_assume!(idx.idf("disk") > 0.0);
            let q = vec!["disk".to_string()];
            let bag = |tf: u32| TermBag {
                counts: [("disk".to_string(), tf)].into_iter().collect(),
                len: len.max(tf + 1),
            };
            let len_fixed = len.max(tf + 2);
            let mut lo = bag(tf);
            let mut hi = bag(tf + 1);
            lo.len = len_fixed;
            hi.len = len_fixed;
            prop_assert!(idx.score_bag(&q, &hi) >= idx.score_bag(&q, &lo));
        }
    }
}
