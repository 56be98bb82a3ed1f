//! C ABI over the `ticketsim` engine.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `ts_*_load`/`ts_*_new` function and released by the matching `ts_*_free`.
//! Fallible functions return a [`TsStatus`]; on failure the message is
//! available from [`ts_last_error`] on the same thread until the next call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ticketsim::corpus::{load_tickets, query_text, Corpus};
use ticketsim::index::{top_k, Index, RetrievalResult};
use ticketsim::model::{fit_model, FitOptions, ModelArtifact};
use ticketsim::techniques::{DocRef, Technique, TechniqueKind};
use ticketsim::{Error, ErrorClass};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Bad input data, configuration or arguments.
    DataError = 3,
    NotFound = 4,
    /// I/O, provider or internal failure.
    RuntimeError = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// A loaded ticket corpus.
pub struct TsCorpus {
    inner: Corpus,
}

/// A fitted model artifact.
pub struct TsModel {
    inner: ModelArtifact,
}

/// A runnable technique with every corpus ticket indexed, oldest first.
pub struct TsEngine {
    technique: Box<dyn Technique>,
    index: Index,
}

/// Ranked recommendations from one query.
pub struct TsResults {
    ids: Vec<CString>,
    scores: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

enum Failure {
    Status(TsStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, converting errors and panics into a status plus last-error message.
fn guard<F>(f: F) -> TsStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TsStatus::Ok,
        Ok(Err(Failure::Status(status, message))) => {
            set_last_error(message);
            status
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            match e.class() {
                ErrorClass::Data => TsStatus::DataError,
                ErrorClass::NotFound => TsStatus::NotFound,
                ErrorClass::Runtime => TsStatus::RuntimeError,
            }
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_last_error(format!("panic: {msg}"));
            TsStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be NULL or a valid nul-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Status(TsStatus::NullArgument, format!("`{name}` is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Status(TsStatus::InvalidUtf8, format!("`{name}` is not valid UTF-8")))
}

/// # Safety
/// `p` must be NULL or point to a live `T` created by this library.
unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::Status(TsStatus::NullArgument, format!("`{name}` is NULL")))
}

fn out_arg<T>(out: *mut *mut T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Status(TsStatus::NullArgument, "output pointer is NULL".into()));
    }
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. Valid until
/// the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ts_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ts_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a JSON-lines ticket file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ts_corpus_load(path: *const c_char, out: *mut *mut TsCorpus) -> TsStatus {
    guard(|| {
        out_arg(out)?;
        let path = str_arg(path, "path")?;
        let corpus = load_tickets(Path::new(path))?;
        *out = Box::into_raw(Box::new(TsCorpus { inner: corpus }));
        Ok(())
    })
}

/// Number of tickets, or 0 for NULL.
///
/// # Safety
/// `corpus` must be NULL or a live corpus handle.
#[no_mangle]
pub unsafe extern "C" fn ts_corpus_len(corpus: *const TsCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.inner.len())
}

/// # Safety
/// `corpus` must be NULL or a handle from [`ts_corpus_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ts_corpus_free(corpus: *mut TsCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Reads a model artifact written by `ticketsim fit` or [`ts_model_save`].
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ts_model_load(path: *const c_char, out: *mut *mut TsModel) -> TsStatus {
    guard(|| {
        out_arg(out)?;
        let path = str_arg(path, "path")?;
        let artifact = ModelArtifact::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(TsModel { inner: artifact }));
        Ok(())
    })
}

/// Fits a technique that needs only a training corpus (`tfidf`, `bm25`,
/// `lda`, `random`) with default settings. `train` may be NULL for `random`.
///
/// # Safety
/// `technique` must be a nul-terminated string, `train` NULL or a live
/// corpus handle, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ts_model_fit(
    technique: *const c_char,
    train: *const TsCorpus,
    seed: u64,
    out: *mut *mut TsModel,
) -> TsStatus {
    guard(|| {
        out_arg(out)?;
        let kind: TechniqueKind = str_arg(technique, "technique")?.parse()?;
        let train = train.as_ref().map(|c| &c.inner);
        let opts = FitOptions {
            seed,
            ..FitOptions::default()
        };
        let artifact = fit_model(kind, train, &opts)?;
        *out = Box::into_raw(Box::new(TsModel { inner: artifact }));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live model handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ts_model_save(model: *const TsModel, path: *const c_char) -> TsStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let path = str_arg(path, "path")?;
        model.inner.save(Path::new(path))?;
        Ok(())
    })
}

fn kind_name(kind: TechniqueKind) -> &'static CStr {
    match kind {
        TechniqueKind::Expert => c"expert",
        TechniqueKind::Tfidf => c"tfidf",
        TechniqueKind::Bm25 => c"bm25",
        TechniqueKind::Lda => c"lda",
        TechniqueKind::WordvecAvg => c"wordvec-avg",
        TechniqueKind::ExternalEmbed => c"external-embed",
        TechniqueKind::Random => c"random",
    }
}

/// Technique name as a static string, or NULL for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn ts_model_technique(model: *const TsModel) -> *const c_char {
    let Some(model) = model.as_ref() else {
        return ptr::null();
    };
    kind_name(model.inner.kind()).as_ptr()
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ts_model_free(model: *mut TsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Instantiates `model` and indexes every ticket of `corpus`. Both handles
/// may be freed afterwards.
///
/// # Safety
/// `model` and `corpus` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ts_engine_new(
    model: *const TsModel,
    corpus: *const TsCorpus,
    out: *mut *mut TsEngine,
) -> TsStatus {
    guard(|| {
        out_arg(out)?;
        let model = ref_arg(model, "model")?;
        let corpus = &ref_arg(corpus, "corpus")?.inner;
        let technique = model.inner.instantiate()?;
        let mut index = Index::new();
        for pos in corpus.recency_order() {
            let t = &corpus.tickets()[pos];
            let text = t.query_text();
            let rep = technique
                .represent(DocRef::new(Some(&t.external_id), &text))
                .map_err(|e| Error::Query {
                    query: t.external_id.clone(),
                    source: Box::new(e),
                })?;
            index.insert(t.external_id.clone(), rep)?;
        }
        *out = Box::into_raw(Box::new(TsEngine { technique, index }));
        Ok(())
    })
}

/// Number of indexed tickets, or 0 for NULL.
///
/// # Safety
/// `engine` must be NULL or a live engine handle.
#[no_mangle]
pub unsafe extern "C" fn ts_engine_len(engine: *const TsEngine) -> usize {
    engine.as_ref().map_or(0, |e| e.index.len())
}

/// Ranks the `window` most recent tickets (0 = all) against a new ticket
/// and returns the best `k`.
///
/// # Safety
/// `engine` must be a live engine handle, `title` and `description`
/// nul-terminated strings, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ts_engine_query(
    engine: *const TsEngine,
    title: *const c_char,
    description: *const c_char,
    k: usize,
    window: usize,
    out: *mut *mut TsResults,
) -> TsStatus {
    guard(|| {
        out_arg(out)?;
        let engine = ref_arg(engine, "engine")?;
        let text = query_text(str_arg(title, "title")?, str_arg(description, "description")?);
        let rep = engine.technique.represent(DocRef::text(&text))?;
        let window = if window == 0 { engine.index.len() } else { window };
        let candidates = engine.index.recent_candidates(window, None);
        let result: RetrievalResult = top_k(&rep, &candidates, k, engine.technique.scorer())?;
        let mut ids = Vec::with_capacity(result.len());
        let mut scores = Vec::with_capacity(result.len());
        for item in result.items {
            ids.push(CString::new(item.external_id).map_err(|e| Error::Contract(e.to_string()))?);
            scores.push(item.score);
        }
        *out = Box::into_raw(Box::new(TsResults { ids, scores }));
        Ok(())
    })
}

/// # Safety
/// `engine` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ts_engine_free(engine: *mut TsEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// # Safety
/// `results` must be NULL or a live results handle.
#[no_mangle]
pub unsafe extern "C" fn ts_results_len(results: *const TsResults) -> usize {
    results.as_ref().map_or(0, |r| r.ids.len())
}

/// Ticket id at rank `i`, or NULL when out of range. Owned by `results`.
///
/// # Safety
/// `results` must be NULL or a live results handle.
#[no_mangle]
pub unsafe extern "C" fn ts_results_id(results: *const TsResults, i: usize) -> *const c_char {
    results
        .as_ref()
        .and_then(|r| r.ids.get(i))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// Score at rank `i`, or NaN when out of range.
///
/// # Safety
/// `results` must be NULL or a live results handle.
#[no_mangle]
pub unsafe extern "C" fn ts_results_score(results: *const TsResults, i: usize) -> f64 {
    results
        .as_ref()
        .and_then(|r| r.scores.get(i).copied())
        .unwrap_or(f64::NAN)
}

/// # Safety
/// `results` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ts_results_free(results: *mut TsResults) {
    if !results.is_null() {
        drop(Box::from_raw(results));
    }
}
