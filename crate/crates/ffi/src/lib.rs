//! C ABI over the `emoknn` core: similarity, evaluation and rounding
//! helpers, plus opaque handles for wkNN models and embedding stores.
//!
//! Every fallible function returns an [`EmoknnStatus`]. On failure the
//! message is kept per thread and can be read with [`emoknn_last_error`].
//! Panics never cross the boundary; they surface as
//! `EMOKNN_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use emoknn::data::EmotionClass;
use emoknn::features::{load_embeddings, EmbeddingStore};
use emoknn::knn::{Aggregation, WknnModel};
use emoknn::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmoknnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    NotFound = 5,
    Undefined = 6,
    BufferTooSmall = 7,
    Internal = 8,
}

/// Neighbour aggregation rule of a model.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmoknnAggregation {
    WeightedMean = 0,
    WeightedMajority = 1,
}

/// One entry of a neighbour trace, most similar first.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmoknnNeighbor {
    /// Row of the training matrix.
    pub train_index: usize,
    /// Similarity in `[0, 1]`.
    pub similarity: f64,
    /// Intensity class 0..=3.
    pub label: u8,
}

/// Opaque trained wkNN model.
pub struct EmoknnModel {
    inner: WknnModel,
}

/// Opaque embedding store loaded from an interchange file.
pub struct EmoknnEmbeddings {
    inner: EmbeddingStore,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(EmoknnStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => EmoknnStatus::Io,
            Error::Parse { .. } => EmoknnStatus::Parse,
            Error::Lookup(_) => EmoknnStatus::NotFound,
            Error::DegenerateInput(_)
            | Error::UndefinedCorrelation(_)
            | Error::DegenerateTest(_) => EmoknnStatus::Undefined,
            _ => EmoknnStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EmoknnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EmoknnStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            EmoknnStatus::Internal
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(EmoknnStatus::NullPointer, format!("{name} is NULL"))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure(
            EmoknnStatus::InvalidArgument,
            format!("{name} is not UTF-8"),
        )
    })
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn emoknn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn emoknn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `(1 + cos(a, b)) / 2` for two vectors of length `len`.
///
/// # Safety
/// `a` and `b` must point to `len` readable doubles; `out_similarity` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn emoknn_cos_similarity(
    a: *const f64,
    b: *const f64,
    len: usize,
    out_similarity: *mut f64,
) -> EmoknnStatus {
    guard(|| {
        let a = slice(a, len, "a")?;
        let b = slice(b, len, "b")?;
        *out(out_similarity, "out_similarity")? = emoknn::knn::cos_similarity(a, b)?;
        Ok(())
    })
}

/// Pearson correlation of two samples of length `len`.
///
/// # Safety
/// `x` and `y` must point to `len` readable doubles; `out_pcc` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn emoknn_pcc(
    x: *const f64,
    y: *const f64,
    len: usize,
    out_pcc: *mut f64,
) -> EmoknnStatus {
    guard(|| {
        let x = slice(x, len, "x")?;
        let y = slice(y, len, "y")?;
        *out(out_pcc, "out_pcc")? = emoknn::eval::pcc(x, y)?;
        Ok(())
    })
}

/// Nearest intensity class of a score in `[0, 3]`, halves rounding up.
///
/// # Safety
/// `out_label` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emoknn_round_label(score: f64, out_label: *mut u8) -> EmoknnStatus {
    guard(|| {
        *out(out_label, "out_label")? = emoknn::ensemble::round_label(score)?.value();
        Ok(())
    })
}

/// Odd neighbour count closest to `sqrt(n) / 2`.
#[no_mangle]
pub extern "C" fn emoknn_rule_of_thumb_k(n: usize) -> usize {
    emoknn::knn::rule_of_thumb_k(n)
}

/// Equal-weight mean of `len` member scores, independent of their order.
///
/// # Safety
/// `scores` must point to `len` readable doubles; `out_mean` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emoknn_ensemble_mean(
    scores: *const f64,
    len: usize,
    out_mean: *mut f64,
) -> EmoknnStatus {
    guard(|| {
        let scores = slice(scores, len, "scores")?;
        if scores.is_empty() {
            return Err(Failure(EmoknnStatus::InvalidArgument, "no scores".into()));
        }
        *out(out_mean, "out_mean")? = emoknn::ensemble::mean_vote(scores);
        Ok(())
    })
}

/// Builds a model from a row-major `rows x cols` matrix and one label
/// (0..=3) per row. `k` must be odd and at most `rows`. Free the handle with
/// [`emoknn_model_free`].
///
/// # Safety
/// `matrix` must point to `rows * cols` doubles, `labels` to `rows` bytes,
/// and `out_model` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emoknn_model_new(
    matrix: *const f64,
    rows: usize,
    cols: usize,
    labels: *const u8,
    k: usize,
    aggregation: EmoknnAggregation,
    out_model: *mut *mut EmoknnModel,
) -> EmoknnStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        *slot = ptr::null_mut();
        if rows == 0 || cols == 0 {
            return Err(Failure(
                EmoknnStatus::InvalidArgument,
                "empty training matrix".into(),
            ));
        }
        let total = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure(EmoknnStatus::InvalidArgument, "matrix too large".into()))?;
        let data = slice(matrix, total, "matrix")?;
        let labels = slice(labels, rows, "labels")?
            .iter()
            .map(|&l| EmotionClass::new(i64::from(l)))
            .collect::<emoknn::Result<Vec<_>>>()?;
        let matrix = data.chunks(cols).map(<[f64]>::to_vec).collect();
        let ids = (0..rows).map(|i| i.to_string()).collect();
        let aggregation = match aggregation {
            EmoknnAggregation::WeightedMean => Aggregation::WeightedMean,
            EmoknnAggregation::WeightedMajority => Aggregation::WeightedMajority,
        };
        let inner = WknnModel::new(matrix, ids, labels, k, aggregation)?;
        *slot = Box::into_raw(Box::new(EmoknnModel { inner }));
        Ok(())
    })
}

/// Neighbour count of a model, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle from [`emoknn_model_new`].
#[no_mangle]
pub unsafe extern "C" fn emoknn_model_k(model: *const EmoknnModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.k())
}

/// Predicts one query of length `len`. The score goes to `out_score`; when
/// `out_neighbors` is not NULL the trace is written there and `capacity`
/// must be at least k. `out_count`, if not NULL, receives k.
///
/// # Safety
/// `model` must be a live handle, `query` must point to `len` doubles, and
/// `out_neighbors` (if not NULL) to `capacity` writable entries.
#[no_mangle]
pub unsafe extern "C" fn emoknn_model_predict(
    model: *const EmoknnModel,
    query: *const f64,
    len: usize,
    out_score: *mut f64,
    out_neighbors: *mut EmoknnNeighbor,
    capacity: usize,
    out_count: *mut usize,
) -> EmoknnStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let query = slice(query, len, "query")?;
        let score_slot = out(out_score, "out_score")?;
        let k = model.inner.k();
        if let Some(count) = out_count.as_mut() {
            *count = k;
        }
        if !out_neighbors.is_null() && capacity < k {
            return Err(Failure(
                EmoknnStatus::BufferTooSmall,
                format!("neighbour buffer holds {capacity}, need {k}"),
            ));
        }
        let (score, trace) = model.inner.predict(query)?;
        *score_slot = score;
        if !out_neighbors.is_null() {
            let buf = std::slice::from_raw_parts_mut(out_neighbors, capacity);
            for (slot, n) in buf.iter_mut().zip(&trace) {
                *slot = EmoknnNeighbor {
                    train_index: n.train_index,
                    similarity: n.similarity,
                    label: n.label.value(),
                };
            }
        }
        Ok(())
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `model` must be NULL or a handle from [`emoknn_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn emoknn_model_free(model: *mut EmoknnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Loads an embedding interchange file. Free the handle with
/// [`emoknn_embeddings_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_store` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emoknn_embeddings_load(
    path: *const c_char,
    out_store: *mut *mut EmoknnEmbeddings,
) -> EmoknnStatus {
    guard(|| {
        let slot = out(out_store, "out_store")?;
        *slot = ptr::null_mut();
        let path = c_str(path, "path")?;
        let inner = load_embeddings(path)?;
        *slot = Box::into_raw(Box::new(EmoknnEmbeddings { inner }));
        Ok(())
    })
}

/// Vector width of a store, or 0 for NULL.
///
/// # Safety
/// `store` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn emoknn_embeddings_dim(store: *const EmoknnEmbeddings) -> usize {
    store.as_ref().map_or(0, |s| s.inner.dim())
}

/// Number of instances in a store, or 0 for NULL.
///
/// # Safety
/// `store` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn emoknn_embeddings_len(store: *const EmoknnEmbeddings) -> usize {
    store.as_ref().map_or(0, |s| s.inner.len())
}

/// Writes the tweet vector of `id` (token rows mean-pooled) into
/// `out_vector`, which must hold at least `dim` doubles.
///
/// # Safety
/// `store` must be a live handle, `id` a NUL-terminated string and `out`
/// `out_vector` must point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn emoknn_embeddings_vector(
    store: *const EmoknnEmbeddings,
    id: *const c_char,
    out_vector: *mut f64,
    capacity: usize,
) -> EmoknnStatus {
    guard(|| {
        let store = store.as_ref().ok_or_else(|| null("store"))?;
        let id = c_str(id, "id")?;
        if out_vector.is_null() {
            return Err(null("out_vector"));
        }
        let dim = store.inner.dim();
        if capacity < dim {
            return Err(Failure(
                EmoknnStatus::BufferTooSmall,
                format!("vector buffer holds {capacity}, need {dim}"),
            ));
        }
        let v = store.inner.vector(id)?;
        std::slice::from_raw_parts_mut(out_vector, dim).copy_from_slice(&v);
        Ok(())
    })
}

/// Releases a store. NULL is ignored.
///
/// # Safety
/// `store` must be NULL or a handle from [`emoknn_embeddings_load`] not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn emoknn_embeddings_free(store: *mut EmoknnEmbeddings) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}
