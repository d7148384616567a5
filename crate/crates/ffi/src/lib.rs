//! C ABI over the topicflow models.
//!
//! Every fallible function returns a [`TfStatus`]; on failure the message is
//! kept per thread and read with [`tf_last_error_message`]. Models are
//! opaque handles created by a `*_load` function and released with the
//! matching `*_free`. Token arguments are UTF-8 strings of
//! whitespace-separated, already preprocessed tokens; [`tf_preprocess`]
//! produces them from raw text with the default normalisation.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use topicflow::cluster::KMeansModel;
use topicflow::corpus::{preprocess, PreprocessConfig, TokenizedCorpus};
use topicflow::embed::{ClassifierModel, EmbeddingModel};
use topicflow::lda::{self, LdaModel};
use topicflow::pipeline::{PipelineConfig, PipelineError, Runner, Stage};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Format = 4,
    InvalidArgument = 5,
    /// The output buffer is shorter than the result; nothing was written.
    BufferTooSmall = 6,
    /// Numeric failure or other error inside the library.
    Runtime = 7,
    /// Bad configuration file or value.
    Config = 8,
    /// A pipeline stage ran before the stage that produces its input.
    MissingDependency = 9,
    /// A Rust panic was caught at the boundary.
    Panic = 10,
}

pub struct TfLda {
    model: LdaModel,
}

pub struct TfEmbedding {
    model: EmbeddingModel,
}

pub struct TfClassifier {
    model: ClassifierModel,
}

pub struct TfKMeans {
    model: KMeansModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(TfStatus, String);

type FfiResult<T> = Result<T, Failure>;

impl From<topicflow::Error> for Failure {
    fn from(e: topicflow::Error) -> Self {
        use topicflow::Error as E;
        let status = match &e {
            E::Io { .. } => TfStatus::Io,
            E::Format { .. } | E::TooManyMalformed { .. } | E::Json(_) | E::VocabularyMismatch { .. } => {
                TfStatus::Format
            }
            E::InvalidArgument(_) | E::Empty(_) => TfStatus::InvalidArgument,
            _ => TfStatus::Runtime,
        };
        Failure(status, e.to_string())
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let status = match &e {
            PipelineError::Config(_) => TfStatus::Config,
            PipelineError::MissingDependency { .. } => TfStatus::MissingDependency,
            PipelineError::Runtime(_) => TfStatus::Runtime,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: String) {
    // Interior NULs cannot cross into C.
    let msg = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> TfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TfStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            TfStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(TfStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(TfStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, needed: usize, what: &str) -> FfiResult<&'a mut [T]> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < needed {
        return Err(Failure(
            TfStatus::BufferTooSmall,
            format!("{what} holds {len} values, {needed} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

unsafe fn write_out<T>(p: *mut T, value: T, what: &str) -> FfiResult<()> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

unsafe fn put_handle<T>(out: *mut *mut T, value: T) -> FfiResult<()> {
    write_out(out, Box::into_raw(Box::new(value)), "out")
}

unsafe fn free_handle<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn tokens(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn tf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}

/// Normalises raw text into space-separated tokens. `*needed` receives the
/// byte length including the terminating NUL even when `buf` is too small.
///
/// # Safety
/// `text` must be a NUL-terminated string; `buf` must hold `buf_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn tf_preprocess(
    text: *const c_char,
    buf: *mut c_char,
    buf_len: usize,
    needed: *mut usize,
) -> TfStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let joined = preprocess(text, &PreprocessConfig::default()).join(" ");
        write_out(needed, joined.len() + 1, "needed")?;
        let out = out_slice(buf.cast::<u8>(), buf_len, joined.len() + 1, "buf")?;
        out[..joined.len()].copy_from_slice(joined.as_bytes());
        out[joined.len()] = 0;
        Ok(())
    })
}

/// Loads an LDA model; its vocabulary comes from the ingested corpus file
/// it was trained on.
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_lda_load(
    model_path: *const c_char,
    corpus_path: *const c_char,
    out: *mut *mut TfLda,
) -> TfStatus {
    guard(|| {
        let model_path = PathBuf::from(str_arg(model_path, "model_path")?);
        let corpus = TokenizedCorpus::load(&PathBuf::from(str_arg(corpus_path, "corpus_path")?))?;
        let model = LdaModel::load(&model_path, &corpus.vocabulary)?;
        put_handle(out, TfLda { model })
    })
}

/// # Safety
/// `lda` must come from [`tf_lda_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tf_lda_free(lda: *mut TfLda) {
    free_handle(lda)
}

/// # Safety
/// `lda` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_lda_num_topics(lda: *const TfLda, out: *mut usize) -> TfStatus {
    guard(|| write_out(out, handle(lda, "lda")?.model.num_topics(), "out"))
}

/// Topic proportions of one document. Unknown tokens are ignored; a
/// document with none known gets the uniform distribution.
///
/// # Safety
/// `lda` must be a live handle; `probs` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tf_lda_infer(
    lda: *const TfLda,
    tokens_utf8: *const c_char,
    probs: *mut f64,
    len: usize,
) -> TfStatus {
    guard(|| {
        let model = &handle(lda, "lda")?.model;
        let vocab = model.vocabulary();
        let ids: Vec<u32> = tokens(str_arg(tokens_utf8, "tokens")?)
            .into_iter()
            .filter_map(|t| vocab.id_of(t))
            .collect();
        let inf = lda::infer(model, &ids);
        out_slice(probs, len, model.num_topics(), "probs")?.copy_from_slice(&inf.topics.probs);
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_embedding_load(path: *const c_char, out: *mut *mut TfEmbedding) -> TfStatus {
    guard(|| {
        let model = EmbeddingModel::load(&PathBuf::from(str_arg(path, "path")?))?;
        put_handle(out, TfEmbedding { model })
    })
}

/// # Safety
/// `emb` must come from [`tf_embedding_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tf_embedding_free(emb: *mut TfEmbedding) {
    free_handle(emb)
}

/// # Safety
/// `emb` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_embedding_dim(emb: *const TfEmbedding, out: *mut usize) -> TfStatus {
    guard(|| write_out(out, handle(emb, "embedding")?.model.dim(), "out"))
}

/// Vector of one word, built from its subwords when it is out of vocabulary.
/// All zeros when none of those subwords occurred in training.
///
/// # Safety
/// `emb` must be a live handle; `vec` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tf_embedding_word_vector(
    emb: *const TfEmbedding,
    word: *const c_char,
    vec: *mut f64,
    len: usize,
) -> TfStatus {
    guard(|| {
        let model = &handle(emb, "embedding")?.model;
        let v = model.word_vector(str_arg(word, "word")?);
        out_slice(vec, len, v.len(), "vec")?.copy_from_slice(&v);
        Ok(())
    })
}

/// Mean word vector of a document; all zeros when it has no tokens.
///
/// # Safety
/// `emb` must be a live handle; `vec` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tf_embedding_doc_vector(
    emb: *const TfEmbedding,
    tokens_utf8: *const c_char,
    vec: *mut f64,
    len: usize,
) -> TfStatus {
    guard(|| {
        let model = &handle(emb, "embedding")?.model;
        let v = model.doc_vector(&tokens(str_arg(tokens_utf8, "tokens")?)).values;
        out_slice(vec, len, v.len(), "vec")?.copy_from_slice(&v);
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_classifier_load(path: *const c_char, out: *mut *mut TfClassifier) -> TfStatus {
    guard(|| {
        let model = ClassifierModel::load(&PathBuf::from(str_arg(path, "path")?))?;
        put_handle(out, TfClassifier { model })
    })
}

/// # Safety
/// `clf` must come from [`tf_classifier_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tf_classifier_free(clf: *mut TfClassifier) {
    free_handle(clf)
}

/// # Safety
/// `clf` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_classifier_num_labels(clf: *const TfClassifier, out: *mut usize) -> TfStatus {
    guard(|| write_out(out, handle(clf, "classifier")?.model.num_labels(), "out"))
}

/// The `k` most probable topic labels, best first, with their probabilities.
///
/// # Safety
/// `clf` must be a live handle; `labels` and `probs` must hold `k` values.
#[no_mangle]
pub unsafe extern "C" fn tf_classifier_predict(
    clf: *const TfClassifier,
    tokens_utf8: *const c_char,
    k: usize,
    labels: *mut u32,
    probs: *mut f64,
) -> TfStatus {
    guard(|| {
        let model = &handle(clf, "classifier")?.model;
        let pred = model.predict_topk(&tokens(str_arg(tokens_utf8, "tokens")?), k)?;
        let labels = out_slice(labels, k, k, "labels")?;
        let probs = out_slice(probs, k, k, "probs")?;
        for (i, (label, p)) in pred.ranked.into_iter().enumerate() {
            labels[i] = label;
            probs[i] = p;
        }
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_kmeans_load(path: *const c_char, out: *mut *mut TfKMeans) -> TfStatus {
    guard(|| {
        let model = KMeansModel::load(&PathBuf::from(str_arg(path, "path")?))?;
        put_handle(out, TfKMeans { model })
    })
}

/// # Safety
/// `km` must come from [`tf_kmeans_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tf_kmeans_free(km: *mut TfKMeans) {
    free_handle(km)
}

/// # Safety
/// `km` must be a live handle; `k` and `dim` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_kmeans_shape(km: *const TfKMeans, k: *mut usize, dim: *mut usize) -> TfStatus {
    guard(|| {
        let model = &handle(km, "kmeans")?.model;
        write_out(k, model.k(), "k")?;
        write_out(dim, model.dim(), "dim")
    })
}

/// Index of the nearest centroid; ties go to the lower index.
///
/// # Safety
/// `km` must be a live handle; `vec` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tf_kmeans_assign(
    km: *const TfKMeans,
    vec: *const f64,
    len: usize,
    cluster: *mut usize,
) -> TfStatus {
    guard(|| {
        let model = &handle(km, "kmeans")?.model;
        if vec.is_null() {
            return Err(null("vec"));
        }
        let c = model.assign(std::slice::from_raw_parts(vec, len))?;
        write_out(cluster, c, "cluster")
    })
}

/// Runs one pipeline stage, or every stage when `stage` is NULL or "all".
/// `config_path` and `work_dir` may be NULL for defaults.
///
/// # Safety
/// Non-NULL arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn tf_pipeline_run(
    config_path: *const c_char,
    work_dir: *const c_char,
    stage: *const c_char,
) -> TfStatus {
    guard(|| {
        let mut cfg = if config_path.is_null() {
            PipelineConfig::default()
        } else {
            PipelineConfig::load(&PathBuf::from(str_arg(config_path, "config_path")?))?
        };
        if !work_dir.is_null() {
            cfg.paths.work_dir = PathBuf::from(str_arg(work_dir, "work_dir")?);
        }
        let stage = if stage.is_null() {
            "all"
        } else {
            str_arg(stage, "stage")?
        };
        let runner = Runner::new(cfg)?;
        if stage == "all" {
            runner.run_all()?;
        } else {
            let stage: Stage = stage.parse().map_err(|e: String| Failure(TfStatus::Config, e))?;
            runner.run(stage)?;
        }
        Ok(())
    })
}
