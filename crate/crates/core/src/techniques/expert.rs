//! Keyword expert system: a lexicon of IT jargon, each term with synonyms,
//! turns a ticket into a set of canonical labels compared with Jaccard.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DocRef, LabelSet, Representation, Technique, TechniqueKind};
use crate::error::{Error, Result};
use crate::index::Scorer;
use crate::textprep::NormalizationConfig;

/// Canonical term -> synonyms. Stored as the JSON object the lexicon file uses.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Lexicon {
    pub entries: BTreeMap<String, BTreeSet<String>>,
}

impl Lexicon {
    pub fn from_file(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let lexicon: Lexicon =
            serde_json::from_str(&raw).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        lexicon.validate()?;
        Ok(lexicon)
    }

    /// Each surface form (canonical term or synonym) must belong to exactly one canonical term.
    pub fn validate(&self) -> Result<()> {
        let mut owner: HashMap<&str, &str> = HashMap::new();
        for (canonical, synonyms) in &self.entries {
            if canonical.trim().is_empty() {
                return Err(Error::Config("lexicon has an empty canonical term".into()));
            }
            for form in std::iter::once(canonical).chain(synonyms) {
                if let Some(prev) = owner.insert(form.as_str(), canonical.as_str()) {
                    if prev != canonical {
                        return Err(Error::Config(format!(
                            "lexicon form `{form}` maps to both `{prev}` and `{canonical}`"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn synonym_count(&self) -> usize {
        self.entries.values().map(BTreeSet::len).sum()
    }
}

/// A lexicon compiled against one preprocessing config: every surface form
/// becomes a token phrase, bucketed by its first token.
#[derive(Debug, Clone)]
pub struct ExpertSystem {
    lexicon: Lexicon,
    cfg: NormalizationConfig,
    phrases: HashMap<String, Vec<(Vec<String>, String)>>,
}

impl ExpertSystem {
    pub fn new(lexicon: Lexicon, cfg: NormalizationConfig) -> Result<Self> {
        lexicon.validate()?;
        let mut phrases: HashMap<String, Vec<(Vec<String>, String)>> = HashMap::new();
        for (canonical, synonyms) in &lexicon.entries {
            for form in std::iter::once(canonical).chain(synonyms) {
                let tokens = cfg.preprocess(form).into_vec();
                let Some(first) = tokens.first().cloned() else {
                    return Err(Error::Config(format!(
                        "lexicon form `{form}` is empty after preprocessing"
                    )));
                };
                phrases.entry(first).or_default().push((tokens, canonical.clone()));
            }
        }
        Ok(ExpertSystem { lexicon, cfg, phrases })
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn config(&self) -> &NormalizationConfig {
        &self.cfg
    }

    pub fn labels(&self, text: &str) -> LabelSet {
        let tokens = self.cfg.preprocess(text).into_vec();
        let mut labels = LabelSet::new();
        for (i, tok) in tokens.iter().enumerate() {
            let Some(candidates) = self.phrases.get(tok) else {
                continue;
            };
            for (phrase, canonical) in candidates {
                if tokens[i..].starts_with(phrase) {
                    labels.insert(canonical.clone());
                }
            }
        }
        labels
    }
}

impl Technique for ExpertSystem {
    fn kind(&self) -> TechniqueKind {
        TechniqueKind::Expert
    }

    fn represent(&self, doc: DocRef<'_>) -> Result<Representation> {
        Ok(Representation::Labels(self.labels(doc.text)))
    }

    fn scorer(&self) -> Scorer<'_> {
        Scorer::Jaccard
    }
}

pub fn expert_labels(text: &str, lexicon: &Lexicon, cfg: &NormalizationConfig) -> Result<LabelSet> {
    Ok(ExpertSystem::new(lexicon.clone(), cfg.clone())?.labels(text))
}

/// |A ∩ B| / |A ∪ B|, with two empty sets scoring 0.
pub fn jaccard(a: &LabelSet, b: &LabelSet) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}
