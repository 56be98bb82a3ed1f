//! Latent Dirichlet Allocation trained with collapsed Gibbs sampling.
//!
//! Unseen documents are folded in by Gibbs sampling their token topics with
//! the topic-word counts frozen. The representation is the smoothed topic
//! mixture, averaged over the post-burn-in sweeps.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DocRef, DocumentVector, Representation, Technique, TechniqueKind};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::index::Scorer;
use crate::textprep::NormalizationConfig;

pub const DEFAULT_TOPICS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub topics: usize,
    /// Document-topic prior. `None` means 50 / topics.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub fold_in_iterations: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            topics: DEFAULT_TOPICS,
            alpha: None,
            beta: 0.01,
            iterations: 200,
            fold_in_iterations: 50,
            seed: crate::DEFAULT_SEED,
        }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.topics as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.topics == 0 {
            return Err(Error::Config("lda needs at least one topic".into()));
        }
        if !(self.alpha() > 0.0 && self.alpha().is_finite()) {
            return Err(Error::Config("lda alpha must be positive".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config("lda beta must be positive".into()));
        }
        if self.iterations == 0 || self.fold_in_iterations == 0 {
            return Err(Error::Config("lda iteration counts must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LdaParts", into = "LdaParts")]
pub struct LdaModel {
    config: LdaConfig,
    cfg: NormalizationConfig,
    vocabulary: Vec<String>,
    /// Row-major `topics x vocabulary` assignment counts.
    topic_word_counts: Vec<u32>,
    topic_totals: Vec<u64>,
    word_ids: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct LdaParts {
    config: LdaConfig,
    cfg: NormalizationConfig,
    vocabulary: Vec<String>,
    topic_word_counts: Vec<u32>,
}

impl TryFrom<LdaParts> for LdaModel {
    type Error = Error;

    fn try_from(p: LdaParts) -> Result<Self> {
        p.config.validate()?;
        if p.topic_word_counts.len() != p.config.topics * p.vocabulary.len() {
            return Err(Error::Contract(
                "lda count table does not match topics x vocabulary".into(),
            ));
        }
        Ok(LdaModel::assemble(p.config, p.cfg, p.vocabulary, p.topic_word_counts))
    }
}

impl From<LdaModel> for LdaParts {
    fn from(m: LdaModel) -> Self {
        LdaParts {
            config: m.config,
            cfg: m.cfg,
            vocabulary: m.vocabulary,
            topic_word_counts: m.topic_word_counts,
        }
    }
}

/// Draws an index from unnormalised non-negative weights.
fn sample_index(rng: &mut ChaCha8Rng, weights: &[f64], total: f64) -> usize {
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        u -= w;
        if u < 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

impl LdaModel {
    fn assemble(config: LdaConfig, cfg: NormalizationConfig, vocabulary: Vec<String>, counts: Vec<u32>) -> Self {
        let v = vocabulary.len();
        let topic_totals = (0..config.topics)
            .map(|k| counts[k * v..(k + 1) * v].iter().map(|&c| c as u64).sum())
            .collect();
        let word_ids = vocabulary.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        LdaModel {
            config,
            cfg,
            vocabulary,
            topic_word_counts: counts,
            topic_totals,
            word_ids,
        }
    }

    pub fn fit(train: &Corpus, config: LdaConfig, cfg: NormalizationConfig) -> Result<Self> {
        let texts: Vec<String> = train.iter().map(|t| t.query_text()).collect();
        Self::fit_texts(&texts, config, cfg)
    }

    pub fn fit_texts<S: AsRef<str>>(texts: &[S], config: LdaConfig, cfg: NormalizationConfig) -> Result<Self> {
        if texts.is_empty() {
            return Err(Error::Invalid("lda needs a non-empty training corpus".into()));
        }
        config.validate()?;
        cfg.validate()?;
        let tokenized: Vec<Vec<String>> = texts.iter().map(|t| cfg.preprocess(t.as_ref()).into_vec()).collect();
        let vocabulary: Vec<String> = tokenized
            .iter()
            .flatten()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if vocabulary.is_empty() {
            return Err(Error::Invalid("lda vocabulary is empty after preprocessing".into()));
        }
        let ids: HashMap<&str, u32> = vocabulary
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_str(), i as u32))
            .collect();
        let docs: Vec<Vec<u32>> = tokenized
            .iter()
            .map(|d| d.iter().map(|w| ids[w.as_str()]).collect())
            .collect();

        let k_topics = config.topics;
        let v = vocabulary.len();
        let alpha = config.alpha();
        let beta = config.beta;
        let v_beta = v as f64 * beta;

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut word_topic = vec![0u32; k_topics * v];
        let mut topic_totals = vec![0u64; k_topics];
        let mut doc_topic: Vec<Vec<u32>> = vec![vec![0; k_topics]; docs.len()];
        let mut assignments: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
        for (d, doc) in docs.iter().enumerate() {
            let z: Vec<usize> = doc.iter().map(|_| rng.gen_range(0..k_topics)).collect();
            for (&w, &k) in doc.iter().zip(&z) {
                word_topic[k * v + w as usize] += 1;
                topic_totals[k] += 1;
                doc_topic[d][k] += 1;
            }
            assignments.push(z);
        }

        let mut weights = vec![0.0; k_topics];
        for _ in 0..config.iterations {
            for (d, doc) in docs.iter().enumerate() {
                for (i, &w) in doc.iter().enumerate() {
                    let w = w as usize;
                    let old = assignments[d][i];
                    word_topic[old * v + w] -= 1;
                    topic_totals[old] -= 1;
                    doc_topic[d][old] -= 1;

                    let mut total = 0.0;
                    for k in 0..k_topics {
                        let p = (doc_topic[d][k] as f64 + alpha) * (word_topic[k * v + w] as f64 + beta)
                            / (topic_totals[k] as f64 + v_beta);
                        weights[k] = p;
                        total += p;
                    }
                    let new = sample_index(&mut rng, &weights, total);
                    assignments[d][i] = new;
                    word_topic[new * v + w] += 1;
                    topic_totals[new] += 1;
                    doc_topic[d][new] += 1;
                }
            }
        }
        Ok(Self::assemble(config, cfg, vocabulary, word_topic))
    }

    pub fn topics(&self) -> usize {
        self.config.topics
    }

    pub fn config(&self) -> &LdaConfig {
        &self.config
    }

    pub fn preprocessing(&self) -> &NormalizationConfig {
        &self.cfg
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn topic_word_counts(&self) -> &[u32] {
        &self.topic_word_counts
    }

    pub fn count(&self, topic: usize, word: &str) -> u32 {
        self.word_ids
            .get(word)
            .map_or(0, |&w| self.topic_word_counts[topic * self.vocabulary.len() + w])
    }

    /// Smoothed p(word | topic).
    pub fn topic_word_probability(&self, topic: usize, word: &str) -> f64 {
        let v = self.vocabulary.len() as f64;
        (self.count(topic, word) as f64 + self.config.beta) / (self.topic_totals[topic] as f64 + v * self.config.beta)
    }

    /// Topic mixture of unseen text.
    pub fn infer(&self, text: &str, fold_in_iterations: usize, seed: u64) -> DocumentVector {
        let k_topics = self.config.topics;
        let alpha = self.config.alpha();
        let beta = self.config.beta;
        let v = self.vocabulary.len();
        let v_beta = v as f64 * beta;
        let words: Vec<usize> = self
            .cfg
            .preprocess(text)
            .iter()
            .filter_map(|t| self.word_ids.get(t).copied())
            .collect();
        if words.is_empty() {
            return DocumentVector(vec![1.0 / k_topics as f64; k_topics]);
        }

        // p(w | k) is fixed during fold-in
        let phi = |k: usize, w: usize| {
            (self.topic_word_counts[k * v + w] as f64 + beta) / (self.topic_totals[k] as f64 + v_beta)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = vec![0u32; k_topics];
        let mut z: Vec<usize> = words.iter().map(|_| rng.gen_range(0..k_topics)).collect();
        for &k in &z {
            counts[k] += 1;
        }
        let iterations = fold_in_iterations.max(1);
        let burn_in = iterations / 2;
        let mut theta_sum = vec![0.0; k_topics];
        let mut weights = vec![0.0; k_topics];
        let denom = words.len() as f64 + k_topics as f64 * alpha;
        for it in 0..iterations {
            for (i, &w) in words.iter().enumerate() {
                counts[z[i]] -= 1;
                let mut total = 0.0;
                for k in 0..k_topics {
                    let p = (counts[k] as f64 + alpha) * phi(k, w);
                    weights[k] = p;
                    total += p;
                }
                let new = sample_index(&mut rng, &weights, total);
                z[i] = new;
                counts[new] += 1;
            }
            if it >= burn_in {
                for k in 0..k_topics {
                    theta_sum[k] += (counts[k] as f64 + alpha) / denom;
                }
            }
        }
        let total: f64 = theta_sum.iter().sum();
        DocumentVector(theta_sum.into_iter().map(|t| t / total).collect())
    }
}

impl Technique for LdaModel {
    fn kind(&self) -> TechniqueKind {
        TechniqueKind::Lda
    }

    fn represent(&self, doc: DocRef<'_>) -> Result<Representation> {
        Ok(Representation::Dense(self.infer(
            doc.text,
            self.config.fold_in_iterations,
            self.config.seed,
        )))
    }

    fn scorer(&self) -> Scorer<'_> {
        Scorer::Cosine
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(topics: usize, seed: u64) -> LdaConfig {
        LdaConfig {
            topics,
            alpha: Some(0.1),
            beta: 0.01,
            iterations: 100,
            fold_in_iterations: 30,
            seed,
        }
    }

    fn two_group_corpus() -> Vec<String> {
        let mut texts = Vec::new();
        for i in 0..20 {
            texts.push(match i % 4 {
                0 => "printer toner paper jam".to_string(),
                1 => "printer paper tray jam toner".to_string(),
                2 => "vpn password login token".to_string(),
                _ => "password vpn token reset login".to_string(),
            });
        }
        texts
    }

    #[test]
    fn defaults() {
        let c = LdaConfig::default();
        assert_eq!(c.topics, 300);
        assert!((c.alpha() - 50.0 / 300.0).abs() < 1e-15);
        assert_eq!(c.beta, 0.01);
        assert_eq!((c.iterations, c.fold_in_iterations), (200, 50));
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let texts = two_group_corpus();
        let a = LdaModel::fit_texts(&texts, small_config(3, 7), NormalizationConfig::default()).unwrap();
        let b = LdaModel::fit_texts(&texts, small_config(3, 7), NormalizationConfig::default()).unwrap();
        assert_eq!(a.topic_word_counts(), b.topic_word_counts());
        assert_eq!(a.infer("printer jam", 20, 1), b.infer("printer jam", 20, 1));
    }

    #[test]
    fn disjoint_vocabularies_separate_into_topics() {
        let texts = two_group_corpus();
        let m = LdaModel::fit_texts(&texts, small_config(2, 13), NormalizationConfig::default()).unwrap();
        let dominant = |w: &str| if m.count(0, w) >= m.count(1, w) { 0 } else { 1 };
        let group_a = ["printer", "toner", "paper", "jam", "tray"];
        let group_b = ["vpn", "password", "login", "token", "reset"];
        let topic_a = dominant("printer");
        let topic_b = dominant("vpn");
        assert_ne!(topic_a, topic_b);
        // majority of each group's mass sits in its own topic
        let mass = |words: &[&str], k: usize| words.iter().map(|w| m.count(k, w)).sum::<u32>();
        assert!(mass(&group_a, topic_a) > mass(&group_a, topic_b));
        assert!(mass(&group_b, topic_b) > mass(&group_b, topic_a));

        let theta = m.infer("printer toner jam", 40, 3);
        assert!(theta.values()[topic_a] > 0.5);
    }

    #[test]
    fn representations_are_distributions() {
        let texts = two_group_corpus();
        let m = LdaModel::fit_texts(&texts, small_config(5, 1), NormalizationConfig::default()).unwrap();
        for text in ["printer", "vpn login printer", "nothing known here", ""] {
            let v = m.infer(text, 10, 9);
            assert_eq!(v.dim(), 5);
            assert!(v.values().iter().all(|p| *p >= 0.0));
            assert!((v.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn out_of_vocabulary_text_gives_uniform_mixture() {
        let m = LdaModel::fit_texts(&two_group_corpus(), small_config(4, 1), NormalizationConfig::default()).unwrap();
        assert_eq!(m.infer("zzz qqq", 10, 1).values(), &[0.25; 4]);
    }

    #[test]
    fn smoothed_topic_word_distributions_normalise() {
        let m = LdaModel::fit_texts(&two_group_corpus(), small_config(3, 2), NormalizationConfig::default()).unwrap();
        for k in 0..3 {
            let s: f64 = m.vocabulary().iter().map(|w| m.topic_word_probability(k, w)).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_vocabulary_errors() {
        let r = LdaModel::fit_texts(&["!!", "..."], small_config(2, 1), NormalizationConfig::default());
        assert!(matches!(r, Err(Error::Invalid(_))));
    }

    #[test]
    fn serde_round_trip() {
        let m = LdaModel::fit_texts(&two_group_corpus(), small_config(2, 1), NormalizationConfig::default()).unwrap();
        let back: LdaModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
