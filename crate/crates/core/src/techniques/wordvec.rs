//! Word-vector tables in the word2vec text format, mean-pooled into document vectors.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{DocRef, DocumentVector, Representation, Technique, TechniqueKind};
use crate::error::{Error, Result};
use crate::index::Scorer;
use crate::textprep::{NormalizationConfig, TokenSequence};

/// Term -> vector, all of length `dim`. Values are kept as `f32`, the
/// precision of the file format.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectorTable {
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
    duplicates: usize,
}

impl WordVectorTable {
    pub fn new(dim: usize) -> Self {
        WordVectorTable {
            dim,
            vectors: HashMap::new(),
            duplicates: 0,
        }
    }

    pub fn insert(&mut self, term: impl Into<String>, vector: Vec<f32>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        if self.vectors.insert(term.into(), vector).is_some() {
            self.duplicates += 1;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Lines that redefined an earlier term (the later line wins).
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn get(&self, term: &str) -> Option<&[f32]> {
        self.vectors.get(term).map(Vec::as_slice)
    }
}

/// Parses `count dim` then `term v1 .. vdim` lines.
pub fn load_word_vectors(path: &Path) -> Result<WordVectorTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_word_vectors(BufReader::new(file), &path.display().to_string())
}

pub fn read_word_vectors<R: BufRead>(reader: R, source_name: &str) -> Result<WordVectorTable> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line.map_err(|e| Error::malformed(source_name, 1, e))?,
        None => return Err(Error::malformed(source_name, 1, "missing `count dim` header")),
    };
    let mut fields = header.split_whitespace();
    let parse_header = |f: Option<&str>, what: &str| -> Result<usize> {
        f.and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::malformed(source_name, 1, format!("header: bad {what}")))
    };
    let declared = parse_header(fields.next(), "count")?;
    let dim = parse_header(fields.next(), "dim")?;
    if dim == 0 || fields.next().is_some() {
        return Err(Error::malformed(
            source_name,
            1,
            "header must be `count dim` with dim >= 1",
        ));
    }

    let mut table = WordVectorTable::new(dim);
    let mut rows = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::malformed(source_name, lineno, e))?;
        let mut parts = line.split(' ').filter(|s| !s.is_empty());
        let Some(term) = parts.next() else { continue };
        let values = parts
            .map(|s| s.trim_end().parse::<f32>())
            .collect::<std::result::Result<Vec<f32>, _>>()
            .map_err(|e| Error::malformed(source_name, lineno, e))?;
        if values.len() != dim {
            return Err(Error::malformed(
                source_name,
                lineno,
                format!("expected {dim} values for `{term}`, found {}", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::malformed(source_name, lineno, "non-finite value"));
        }
        table.insert(term, values)?;
        rows += 1;
    }
    if rows != declared {
        tracing::warn!(
            source = source_name,
            declared,
            rows,
            "word-vector count differs from header"
        );
    }
    if table.duplicates > 0 {
        tracing::warn!(
            source = source_name,
            duplicates = table.duplicates,
            "duplicate terms; later lines win"
        );
    }
    Ok(table)
}

/// Componentwise mean of the in-vocabulary token vectors; zeros if none are known.
pub fn embed_average(table: &WordVectorTable, tokens: &TokenSequence) -> DocumentVector {
    let mut sum = vec![0.0f64; table.dim()];
    let mut known = 0usize;
    for tok in tokens {
        if let Some(v) = table.get(tok) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += f64::from(*x);
            }
            known += 1;
        }
    }
    if known == 0 {
        return DocumentVector::zeros(table.dim());
    }
    let n = known as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    DocumentVector(sum)
}

pub struct WordVecAverager {
    table: WordVectorTable,
    cfg: NormalizationConfig,
}

impl WordVecAverager {
    pub fn new(table: WordVectorTable, cfg: NormalizationConfig) -> Self {
        WordVecAverager { table, cfg }
    }

    pub fn table(&self) -> &WordVectorTable {
        &self.table
    }
}

impl Technique for WordVecAverager {
    fn kind(&self) -> TechniqueKind {
        TechniqueKind::WordvecAvg
    }

    fn represent(&self, doc: DocRef<'_>) -> Result<Representation> {
        Ok(Representation::Dense(embed_average(
            &self.table,
            &self.cfg.preprocess(doc.text),
        )))
    }

    fn scorer(&self) -> Scorer<'_> {
        Scorer::Cosine
    }
}
