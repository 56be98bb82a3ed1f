//! Command-line front end for the `ticketsim` binary.
//!
//! Exit codes: 0 success, 1 usage, 2 bad input data, 3 runtime failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::corpus::{load_tickets, Corpus, Redactor};
use crate::error::{Error, ErrorClass, Result};
use crate::eval::{compare_report, evaluate_technique, judge_subgroups, load_positions_dir, EvalReportRow};
use crate::model::{check_compatible, fit_model, FitOptions, ModelArtifact};
use crate::techniques::external::{write_vector_file, VectorFileHeader, VectorRecord};
use crate::techniques::{Bm25Params, EmbeddingProviderSpec, ExternalEmbedding, LdaConfig, TechniqueKind};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

pub fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Data | ErrorClass::NotFound => EXIT_DATA,
        ErrorClass::Runtime => EXIT_RUNTIME,
    }
}

#[derive(Debug, Parser)]
#[command(name = "ticketsim", version, about = "Similar-ticket retrieval for IT support desks")]
pub struct Cli {
    /// Seed for every randomised step
    #[arg(long, global = true, default_value_t = crate::DEFAULT_SEED)]
    pub seed: u64,

    /// More log output (repeat for more)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Service configuration file (TOML)
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a raw ticket file and write a (redacted) corpus
    Ingest(IngestArgs),
    /// Fit one technique and write a model artifact
    Fit(FitArgs),
    /// Evaluate model artifacts against card-layout judgments
    Compare(CompareArgs),
    /// Precompute external embeddings into a vector file
    EmbedCache(EmbedCacheArgs),
    /// Run the recommendation service (requires --config)
    Serve,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Raw tickets, one JSON object per line
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Where to write the validated corpus
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,
    /// JSON array of {pattern, tag} redaction rules
    #[arg(long, value_name = "FILE")]
    pub redact_rules: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// expert, tfidf, bm25, lda, wordvec-avg, external-embed or random
    #[arg(long)]
    pub technique: TechniqueKind,
    /// Training corpus (not needed for expert, wordvec-avg, external-embed, random)
    #[arg(long, value_name = "FILE")]
    pub train: Option<PathBuf>,
    /// Where to write the artifact
    #[arg(long, value_name = "FILE")]
    pub model_out: PathBuf,
    /// Lexicon JSON for the expert system
    #[arg(long, value_name = "FILE")]
    pub lexicon: Option<PathBuf>,
    /// Word vectors in word2vec text format
    #[arg(long, value_name = "FILE")]
    pub vectors: Option<PathBuf>,
    /// Embedding provider spec (JSON)
    #[arg(long, value_name = "FILE")]
    pub provider: Option<PathBuf>,
    /// Cache directory for remote embedding providers
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    /// TF-IDF vocabulary size
    #[arg(long, default_value_t = crate::techniques::tfidf::DEFAULT_MAX_FEATURES)]
    pub max_features: usize,
    /// BM25 term-frequency saturation
    #[arg(long, default_value_t = 1.5)]
    pub k1: f64,
    /// BM25 length normalisation
    #[arg(long, default_value_t = 0.75)]
    pub b: f64,
    /// BM25 idf floor, as a fraction of the mean positive idf
    #[arg(long, default_value_t = 0.25)]
    pub epsilon: f64,
    /// LDA topic count
    #[arg(long, default_value_t = 300)]
    pub topics: usize,
    /// LDA document-topic prior (default 50 / topics)
    #[arg(long)]
    pub alpha: Option<f64>,
    /// LDA topic-word prior
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
    /// LDA Gibbs sweeps over the training corpus
    #[arg(long, default_value_t = 200)]
    pub iterations: usize,
    /// LDA Gibbs sweeps when inferring a new document
    #[arg(long, default_value_t = 50)]
    pub fold_in_iterations: usize,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Directory of positions CSVs, one per subgroup
    #[arg(long, value_name = "DIR")]
    pub positions_dir: PathBuf,
    /// The labelled tickets referenced by the positions
    #[arg(long, value_name = "FILE")]
    pub eval_corpus: PathBuf,
    /// Model artifacts as ARTIFACT or NAME=ARTIFACT (comma-separated or repeated)
    #[arg(long, value_name = "SPEC", value_delimiter = ',', required = true)]
    pub techniques: Vec<String>,
    /// Directory for report.json and report.txt
    #[arg(long, value_name = "DIR")]
    pub report_out: PathBuf,
    /// Add the published reference numbers to each row
    #[arg(long)]
    pub with_paper_refs: bool,
    /// Recommendations per query
    #[arg(long, default_value_t = crate::DEFAULT_K)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct EmbedCacheArgs {
    /// Embedding provider spec (JSON, remote source)
    #[arg(long, value_name = "FILE")]
    pub provider: PathBuf,
    /// Tickets to embed
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Vector file to write
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,
    /// Response cache directory
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&raw).map_err(|e| Error::malformed(path.display().to_string(), e.line(), e))
}

pub fn ingest(args: &IngestArgs, out: &mut dyn Write) -> Result<()> {
    let corpus = load_tickets(&args.input)?;
    let corpus = match &args.redact_rules {
        Some(rules) => {
            let redactor = Redactor::from_file(rules)?;
            Corpus::from_tickets(corpus.iter().map(|t| redactor.redact_ticket(t)).collect())?
        }
        None => corpus,
    };
    corpus.save(&args.output)?;
    let categories: std::collections::BTreeSet<_> = corpus.iter().filter_map(|t| t.category.as_deref()).collect();
    let _ = writeln!(
        out,
        "ingested {} tickets ({} categories) -> {}",
        corpus.len(),
        categories.len(),
        args.output.display()
    );
    Ok(())
}

pub fn fit(args: &FitArgs, seed: u64, out: &mut dyn Write) -> Result<()> {
    let train = args.train.as_deref().map(load_tickets).transpose()?;
    let opts = FitOptions {
        seed,
        max_features: args.max_features,
        bm25: Bm25Params {
            k1: args.k1,
            b: args.b,
            epsilon: args.epsilon,
        },
        lda: LdaConfig {
            topics: args.topics,
            alpha: args.alpha,
            beta: args.beta,
            iterations: args.iterations,
            fold_in_iterations: args.fold_in_iterations,
            seed,
        },
        lexicon: args.lexicon.clone(),
        vectors: args.vectors.clone(),
        provider: args.provider.as_deref().map(read_json).transpose()?,
        cache_dir: args.cache_dir.clone(),
    };
    let artifact = fit_model(args.technique, train.as_ref(), &opts)?;
    artifact.save(&args.model_out)?;
    let _ = writeln!(
        out,
        "fitted {} -> {} (fingerprint {})",
        args.technique,
        args.model_out.display(),
        &artifact.fingerprint[..12]
    );
    Ok(())
}

/// Splits `NAME=PATH`; a bare path is named after its technique.
fn parse_technique_spec(spec: &str) -> (Option<String>, PathBuf) {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() => (Some(name.to_string()), PathBuf::from(path)),
        _ => (None, PathBuf::from(spec)),
    }
}

/// Runs the comparison. Returns the exit code: 0, or 3 when any technique failed.
pub fn compare(args: &CompareArgs, out: &mut dyn Write) -> Result<u8> {
    if args.k == 0 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    let eval_corpus = load_tickets(&args.eval_corpus)?;
    let positions = load_positions_dir(&args.positions_dir)?;
    if positions.is_empty() {
        return Err(Error::Invalid(format!(
            "no positions under {}",
            args.positions_dir.display()
        )));
    }
    let subgroups = judge_subgroups(&positions)?;

    let mut runs = Vec::new();
    for spec in &args.techniques {
        let (name, path) = parse_technique_spec(spec);
        let artifact = ModelArtifact::load(&path)?;
        let name = name.unwrap_or_else(|| artifact.kind().as_str().to_string());
        runs.push((name, path, artifact));
    }
    let named: Vec<(String, &ModelArtifact)> = runs.iter().map(|(n, _, a)| (n.clone(), a)).collect();
    check_compatible(&named)?;

    let mut rows = Vec::with_capacity(runs.len());
    for (name, path, _) in &runs {
        tracing::info!(technique = %name, "evaluating");
        let load = || ModelArtifact::load(path)?.instantiate();
        let row = match evaluate_technique(name, load, &eval_corpus, &subgroups, args.k) {
            Ok(outcome) => outcome.row,
            Err(e) => {
                tracing::error!(technique = %name, error = %e, "technique failed");
                EvalReportRow::failed(name.clone(), &e)
            }
        };
        rows.push(row);
    }
    let report = compare_report(rows, args.with_paper_refs)?;
    std::fs::create_dir_all(&args.report_out).map_err(|e| Error::io(&args.report_out, e))?;
    let json_path = args.report_out.join("report.json");
    let text_path = args.report_out.join("report.txt");
    std::fs::write(&json_path, report.to_json()? + "\n").map_err(|e| Error::io(&json_path, e))?;
    let text = report.to_text();
    std::fs::write(&text_path, &text).map_err(|e| Error::io(&text_path, e))?;
    let _ = write!(out, "{text}");
    Ok(if report.has_errors() { EXIT_RUNTIME } else { EXIT_OK })
}

pub fn embed_cache(args: &EmbedCacheArgs, out: &mut dyn Write) -> Result<()> {
    let spec: EmbeddingProviderSpec = read_json(&args.provider)?;
    let corpus = load_tickets(&args.input)?;
    let provider = ExternalEmbedding::open(spec.clone(), args.cache_dir.as_deref())?;
    let mut records = Vec::with_capacity(corpus.len());
    for t in corpus.iter() {
        let v = provider.embed(&t.query_text()).map_err(|e| Error::Query {
            query: t.external_id.clone(),
            source: Box::new(e),
        })?;
        records.push(VectorRecord {
            external_id: t.external_id.clone(),
            values: v.into_values(),
        });
    }
    let header = VectorFileHeader {
        provider: spec.name.clone(),
        dim: spec.dim,
    };
    write_vector_file(&args.output, &header, &records)?;
    let _ = writeln!(out, "embedded {} tickets -> {}", records.len(), args.output.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn technique_specs() {
        assert_eq!(parse_technique_spec("a.json"), (None, PathBuf::from("a.json")));
        assert_eq!(
            parse_technique_spec("sbert=m/s.json"),
            (Some("sbert".to_string()), PathBuf::from("m/s.json"))
        );
    }

    #[test]
    fn unknown_technique_is_a_usage_error() {
        let err = Cli::try_parse_from(["ticketsim", "fit", "--technique", "bert", "--model-out", "m"]).unwrap_err();
        assert_eq!(err.kind(), clap::error::ErrorKind::ValueValidation);
    }

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(exit_code(&Error::Invalid("x".into())), EXIT_DATA);
        assert_eq!(exit_code(&Error::Contract("x".into())), EXIT_RUNTIME);
        let missing = Error::io("/nope", std::io::Error::from(std::io::ErrorKind::NotFound));
        assert_eq!(exit_code(&missing), EXIT_DATA);
    }
}
