//! Text normalisation, whitespace tokenisation and stopword filtering.
//!
//! The pipeline is `normalize -> tokenize -> remove_stopwords`. Contextual
//! embedding techniques skip it and see the raw query text.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// The characters replaced by a space during normalisation.
pub const DEFAULT_STRIP_CHARS: [char; 7] = ['-', '.', ',', '!', '?', '_', '*'];

const ENGLISH_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationConfig {
    pub lowercase: bool,
    pub strip_chars: Vec<char>,
    pub unicode_fold: bool,
    pub remove_stopwords: bool,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub stopword_list: BTreeSet<String>,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        NormalizationConfig {
            lowercase: true,
            strip_chars: DEFAULT_STRIP_CHARS.to_vec(),
            unicode_fold: true,
            remove_stopwords: false,
            stopword_list: BTreeSet::new(),
        }
    }
}

impl NormalizationConfig {
    /// Default normalisation plus the packaged English stopword list.
    pub fn with_english_stopwords() -> Self {
        NormalizationConfig {
            remove_stopwords: true,
            stopword_list: english_stopwords(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.remove_stopwords && self.stopword_list.is_empty() {
            return Err(Error::Config(
                "stopword removal enabled with an empty stopword list".into(),
            ));
        }
        if let Some(w) = self.stopword_list.iter().find(|w| w.chars().any(char::is_uppercase)) {
            return Err(Error::Config(format!("stopword `{w}` is not lowercase")));
        }
        Ok(())
    }

    /// normalize, tokenize, then drop stopwords when enabled.
    pub fn preprocess(&self, text: &str) -> TokenSequence {
        let tokens = tokenize(&normalize(text, self));
        if self.remove_stopwords {
            remove_stopwords(tokens, &self.stopword_list)
        } else {
            tokens
        }
    }
}

/// Parses a stopword file: one term per line, `#` starts a comment.
pub fn parse_stopwords(raw: &str) -> BTreeSet<String> {
    raw.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn english_stopwords() -> BTreeSet<String> {
    parse_stopwords(ENGLISH_STOPWORDS)
}

pub fn load_stopwords(path: &Path) -> Result<BTreeSet<String>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_stopwords(&raw))
}

fn lower_and_strip(text: &str, cfg: &NormalizationConfig) -> String {
    let lowered = if cfg.lowercase {
        text.to_lowercase()
    } else {
        text.to_string()
    };
    if cfg.strip_chars.is_empty() {
        return lowered;
    }
    lowered
        .chars()
        .map(|c| if cfg.strip_chars.contains(&c) { ' ' } else { c })
        .collect()
}

/// Lowercase, replace stripped characters with a space, then fold to the
/// closest unaccented form (NFKD with combining marks dropped).
///
/// Compatibility decomposition can surface new uppercase or stripped
/// characters (`"Ｈ！"` decomposes to `"H!"`), so the first two steps run once
/// more on folded text. That keeps the function idempotent.
pub fn normalize(text: &str, cfg: &NormalizationConfig) -> String {
    let stage = lower_and_strip(text, cfg);
    if !cfg.unicode_fold {
        return stage;
    }
    let folded: String = stage.nfkd().filter(|c| !is_combining_mark(*c)).collect();
    lower_and_strip(&folded, cfg)
}

/// Ordered, non-empty, whitespace-free tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }

    pub fn into_vec(self) -> Vec<String> {
        self.0
    }
}

impl<'a> IntoIterator for &'a TokenSequence {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

pub fn tokenize(text: &str) -> TokenSequence {
    TokenSequence(text.split_whitespace().map(str::to_string).collect())
}

pub fn remove_stopwords(tokens: TokenSequence, stopwords: &BTreeSet<String>) -> TokenSequence {
    TokenSequence(tokens.0.into_iter().filter(|t| !stopwords.contains(t)).collect())
}
