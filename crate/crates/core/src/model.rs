//! Fitted-model artifacts: fitting, on-disk format and reloading.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::techniques::tfidf::DEFAULT_MAX_FEATURES;
use crate::techniques::{
    load_word_vectors, Bm25Index, Bm25Params, EmbeddingProviderSpec, ExpertSystem, ExternalEmbedding, LdaConfig,
    LdaModel, Lexicon, RandomSelector, Technique, TechniqueKind, TfidfModel, WordVecAverager,
};
use crate::textprep::NormalizationConfig;

pub const ARTIFACT_FORMAT: &str = "ticketsim-model/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "technique", rename_all = "kebab-case")]
pub enum FittedModel {
    Expert {
        lexicon: Lexicon,
        preprocessing: NormalizationConfig,
    },
    Tfidf {
        model: TfidfModel,
    },
    Bm25 {
        index: Bm25Index,
    },
    Lda {
        model: LdaModel,
    },
    WordvecAvg {
        vectors: PathBuf,
        vectors_sha256: String,
        preprocessing: NormalizationConfig,
    },
    ExternalEmbed {
        provider: EmbeddingProviderSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cache_dir: Option<PathBuf>,
    },
    Random {
        seed: u64,
    },
}

impl FittedModel {
    pub fn kind(&self) -> TechniqueKind {
        match self {
            FittedModel::Expert { .. } => TechniqueKind::Expert,
            FittedModel::Tfidf { .. } => TechniqueKind::Tfidf,
            FittedModel::Bm25 { .. } => TechniqueKind::Bm25,
            FittedModel::Lda { .. } => TechniqueKind::Lda,
            FittedModel::WordvecAvg { .. } => TechniqueKind::WordvecAvg,
            FittedModel::ExternalEmbed { .. } => TechniqueKind::ExternalEmbed,
            FittedModel::Random { .. } => TechniqueKind::Random,
        }
    }

    /// Text normalisation the model applies, if it tokenises at all.
    pub fn preprocessing(&self) -> Option<&NormalizationConfig> {
        match self {
            FittedModel::Expert { preprocessing, .. } | FittedModel::WordvecAvg { preprocessing, .. } => {
                Some(preprocessing)
            }
            FittedModel::Tfidf { model } => Some(model.config()),
            FittedModel::Bm25 { index } => Some(index.config()),
            FittedModel::Lda { model } => Some(model.preprocessing()),
            FittedModel::ExternalEmbed { .. } | FittedModel::Random { .. } => None,
        }
    }

    fn settings(&self) -> Result<serde_json::Value> {
        Ok(match self {
            FittedModel::Expert { lexicon, .. } => serde_json::to_value(lexicon)?,
            FittedModel::Tfidf { model } => serde_json::json!({ "features": model.dim() }),
            FittedModel::Bm25 { index } => serde_json::to_value(index.params())?,
            FittedModel::Lda { model } => serde_json::to_value(model.config())?,
            FittedModel::WordvecAvg { vectors_sha256, .. } => serde_json::json!({ "vectors_sha256": vectors_sha256 }),
            FittedModel::ExternalEmbed { provider, .. } => serde_json::to_value(provider)?,
            FittedModel::Random { seed } => serde_json::json!({ "seed": seed }),
        })
    }

    /// Builds the runnable technique. Word vectors and external vector files
    /// are read here, so this is the "model loading" step.
    pub fn instantiate(&self) -> Result<Box<dyn Technique>> {
        Ok(match self {
            FittedModel::Expert { lexicon, preprocessing } => {
                Box::new(ExpertSystem::new(lexicon.clone(), preprocessing.clone())?)
            }
            FittedModel::Tfidf { model } => Box::new(model.clone()),
            FittedModel::Bm25 { index } => Box::new(index.clone()),
            FittedModel::Lda { model } => Box::new(model.clone()),
            FittedModel::WordvecAvg {
                vectors,
                vectors_sha256,
                preprocessing,
            } => {
                let actual = file_sha256(vectors)?;
                if &actual != vectors_sha256 {
                    return Err(Error::Contract(format!(
                        "{} changed since the model was fitted",
                        vectors.display()
                    )));
                }
                Box::new(WordVecAverager::new(load_word_vectors(vectors)?, preprocessing.clone()))
            }
            FittedModel::ExternalEmbed { provider, cache_dir } => {
                Box::new(ExternalEmbedding::open(provider.clone(), cache_dir.as_deref())?)
            }
            FittedModel::Random { seed } => Box::new(RandomSelector::new(*seed)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format: String,
    pub fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_digest: Option<String>,
    pub model: FittedModel,
}

impl ModelArtifact {
    pub fn new(model: FittedModel, training_digest: Option<String>) -> Result<Self> {
        let fingerprint = fingerprint(&model, training_digest.as_deref())?;
        Ok(ModelArtifact {
            format: ARTIFACT_FORMAT.to_string(),
            fingerprint,
            training_digest,
            model,
        })
    }

    pub fn kind(&self) -> TechniqueKind {
        self.model.kind()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer(&mut out, self)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads an artifact and checks its fingerprint against its contents.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let artifact: ModelArtifact = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::malformed(path.display().to_string(), e.line(), e))?;
        if artifact.format != ARTIFACT_FORMAT {
            return Err(Error::Config(format!(
                "{}: unsupported artifact format `{}`",
                path.display(),
                artifact.format
            )));
        }
        let expected = fingerprint(&artifact.model, artifact.training_digest.as_deref())?;
        if expected != artifact.fingerprint {
            return Err(Error::Config(format!(
                "{}: fingerprint mismatch (stored {}, computed {})",
                path.display(),
                artifact.fingerprint,
                expected
            )));
        }
        Ok(artifact)
    }

    pub fn instantiate(&self) -> Result<Box<dyn Technique>> {
        self.model.instantiate()
    }
}

fn fingerprint(model: &FittedModel, training_digest: Option<&str>) -> Result<String> {
    let doc = serde_json::json!({
        "format": ARTIFACT_FORMAT,
        "technique": model.kind().as_str(),
        "preprocessing": model.preprocessing(),
        "settings": model.settings()?,
        "training": training_digest,
    });
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(&doc)?)))
}

/// SHA-256 of the corpus in its canonical JSONL form.
pub fn training_digest(corpus: &Corpus) -> Result<String> {
    let mut buf = Vec::new();
    corpus.write_jsonl(&mut buf)?;
    Ok(hex::encode(Sha256::digest(&buf)))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Checks that a set of artifacts can be compared side by side: they must
/// share training data (when recorded) and the base text normalisation
/// (case folding, stripped characters, unicode folding). Stopword settings
/// are allowed to differ per technique.
pub fn check_compatible(artifacts: &[(String, &ModelArtifact)]) -> Result<()> {
    let mut digest: Option<(&str, &str)> = None;
    type BaseNorm<'a> = (bool, &'a [char], bool);
    let mut base: Option<(&str, BaseNorm<'_>)> = None;
    for (name, a) in artifacts {
        if let Some(d) = a.training_digest.as_deref() {
            match digest {
                Some((other, d0)) if d0 != d => {
                    return Err(Error::Config(format!(
                        "artifacts `{other}` and `{name}` were fitted on different training data"
                    )))
                }
                None => digest = Some((name, d)),
                _ => {}
            }
        }
        if let Some(cfg) = a.model.preprocessing() {
            let key = (cfg.lowercase, cfg.strip_chars.as_slice(), cfg.unicode_fold);
            match base {
                Some((other, k0)) if k0 != key => {
                    return Err(Error::Config(format!(
                        "artifacts `{other}` and `{name}` use different text normalisation"
                    )))
                }
                None => base = Some((name, key)),
                _ => {}
            }
        }
    }
    Ok(())
}

/// Technique-specific fitting options. Unused fields are ignored.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub seed: u64,
    pub max_features: usize,
    pub bm25: Bm25Params,
    pub lda: LdaConfig,
    pub lexicon: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub provider: Option<EmbeddingProviderSpec>,
    pub cache_dir: Option<PathBuf>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            seed: crate::DEFAULT_SEED,
            max_features: DEFAULT_MAX_FEATURES,
            bm25: Bm25Params::default(),
            lda: LdaConfig::default(),
            lexicon: None,
            vectors: None,
            provider: None,
            cache_dir: None,
        }
    }
}

fn require_train(kind: TechniqueKind, train: Option<&Corpus>) -> Result<&Corpus> {
    train.ok_or_else(|| Error::Config(format!("technique `{kind}` needs a training corpus")))
}

/// Fits `kind` and wraps the result in an artifact.
pub fn fit_model(kind: TechniqueKind, train: Option<&Corpus>, opts: &FitOptions) -> Result<ModelArtifact> {
    let digest = train.map(training_digest).transpose()?;
    let model = match kind {
        TechniqueKind::Expert => {
            let path = opts
                .lexicon
                .as_deref()
                .ok_or_else(|| Error::Config("expert needs a lexicon file".into()))?;
            let lexicon = Lexicon::from_file(path)?;
            let preprocessing = NormalizationConfig::default();
            ExpertSystem::new(lexicon.clone(), preprocessing.clone())?;
            FittedModel::Expert { lexicon, preprocessing }
        }
        TechniqueKind::Tfidf => FittedModel::Tfidf {
            model: TfidfModel::fit(
                require_train(kind, train)?,
                NormalizationConfig::with_english_stopwords(),
                opts.max_features,
            )?,
        },
        TechniqueKind::Bm25 => FittedModel::Bm25 {
            index: Bm25Index::fit(require_train(kind, train)?, opts.bm25, NormalizationConfig::default())?,
        },
        TechniqueKind::Lda => {
            let config = LdaConfig {
                seed: opts.seed,
                ..opts.lda.clone()
            };
            FittedModel::Lda {
                model: LdaModel::fit(require_train(kind, train)?, config, NormalizationConfig::default())?,
            }
        }
        TechniqueKind::WordvecAvg => {
            let path = opts
                .vectors
                .as_deref()
                .ok_or_else(|| Error::Config("wordvec-avg needs a word-vector file".into()))?;
            load_word_vectors(path)?;
            FittedModel::WordvecAvg {
                vectors: absolute(path),
                vectors_sha256: file_sha256(path)?,
                preprocessing: NormalizationConfig::default(),
            }
        }
        TechniqueKind::ExternalEmbed => {
            let mut provider = opts
                .provider
                .clone()
                .ok_or_else(|| Error::Config("external-embed needs a provider spec".into()))?;
            if let crate::techniques::EmbeddingSource::VectorFile { path } = &mut provider.source {
                *path = absolute(path);
            }
            ExternalEmbedding::open(provider.clone(), opts.cache_dir.as_deref())?;
            FittedModel::ExternalEmbed {
                provider,
                cache_dir: opts.cache_dir.as_deref().map(absolute),
            }
        }
        TechniqueKind::Random => return ModelArtifact::new(FittedModel::Random { seed: opts.seed }, None),
    };
    ModelArtifact::new(model, digest)
}

fn absolute(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf())
}
