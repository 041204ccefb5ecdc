//! C ABI over the core library so other languages can bind the catalog,
//! the mock scorer, single-instance classification, and the two headline
//! metrics. Handles are opaque pointers owned by Rust; every fallible call
//! returns an `EMONLI_*` status code and leaves a message retrievable via
//! [`emonli_last_error_message`] on failure.
//!
//! The matching header is maintained by hand at `include/emonli.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::str::FromStr;

use emonli::catalog::{load_catalogs, PromptCatalog, PromptType};
use emonli::classifier::{classify, EntailmentNormalization};
use emonli::metrics::{kendall_tau_b, macro_f1, MetricsError};
use emonli::nli::{mock_score, MockScorer};

pub const EMONLI_OK: i32 = 0;
pub const EMONLI_ERR_NULL_POINTER: i32 = 1;
pub const EMONLI_ERR_INVALID_UTF8: i32 = 2;
pub const EMONLI_ERR_CATALOG: i32 = 3;
pub const EMONLI_ERR_SCORE: i32 = 4;
pub const EMONLI_ERR_METRICS: i32 = 5;
pub const EMONLI_ERR_INVALID_ARGUMENT: i32 = 6;
/// Kendall's tau undefined (all values tied in one argument).
pub const EMONLI_ERR_DEGENERATE: i32 = 7;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: impl std::fmt::Display) {
    let sanitized = message.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn emonli_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Opaque catalog handle.
pub struct EmonliCatalog {
    inner: PromptCatalog,
}

/// # Safety
/// `ptr` must be non-null and point to a valid NUL-terminated string.
unsafe fn utf8_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, i32> {
    if ptr.is_null() {
        set_last_error(format!("{name} is null"));
        return Err(EMONLI_ERR_NULL_POINTER);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error(format!("{name} is not valid UTF-8"));
        EMONLI_ERR_INVALID_UTF8
    })
}

/// # Safety
/// Pointers in `items[..len]` must be valid NUL-terminated strings.
unsafe fn utf8_array(
    items: *const *const c_char,
    len: usize,
    name: &str,
) -> Result<Vec<String>, i32> {
    if len > 0 && items.is_null() {
        set_last_error(format!("{name} is null"));
        return Err(EMONLI_ERR_NULL_POINTER);
    }
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let ptr = *items.add(i);
        out.push(utf8_arg(ptr, &format!("{name}[{i}]"))?.to_string());
    }
    Ok(out)
}

fn parse_prompt_type(s: &str) -> Result<PromptType, i32> {
    PromptType::from_str(s).map_err(|e| {
        set_last_error(e);
        EMONLI_ERR_INVALID_ARGUMENT
    })
}

/// Loads one or more catalog files merged left-to-right.
///
/// # Safety
/// `paths` must point to `n_paths` valid NUL-terminated strings and `out`
/// must be a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn emonli_catalog_load(
    paths: *const *const c_char,
    n_paths: usize,
    out: *mut *mut EmonliCatalog,
) -> i32 {
    if out.is_null() {
        set_last_error("out is null");
        return EMONLI_ERR_NULL_POINTER;
    }
    let paths = match utf8_array(paths, n_paths, "paths") {
        Ok(paths) => paths,
        Err(code) => return code,
    };
    if paths.is_empty() {
        set_last_error("at least one catalog path is required");
        return EMONLI_ERR_INVALID_ARGUMENT;
    }
    let paths: Vec<PathBuf> = paths.into_iter().map(PathBuf::from).collect();
    match load_catalogs(&paths) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(EmonliCatalog { inner }));
            EMONLI_OK
        }
        Err(e) => {
            set_last_error(e);
            EMONLI_ERR_CATALOG
        }
    }
}

/// # Safety
/// `catalog` must be a pointer returned by [`emonli_catalog_load`] that has
/// not been freed; passing null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn emonli_catalog_free(catalog: *mut EmonliCatalog) {
    if !catalog.is_null() {
        drop(Box::from_raw(catalog));
    }
}

/// Number of languages present in the catalog.
///
/// # Safety
/// `catalog` must be a live handle from [`emonli_catalog_load`].
#[no_mangle]
pub unsafe extern "C" fn emonli_catalog_language_count(catalog: *const EmonliCatalog) -> usize {
    if catalog.is_null() {
        return 0;
    }
    (*catalog).inner.languages().len()
}

/// Renders the hypothesis strings for (prompt type, language, emotion):
/// six for the synonym family, one otherwise. On success `*out` holds
/// `*out_len` NUL-terminated strings; release with [`emonli_strings_free`].
///
/// # Safety
/// All pointer arguments must be valid; string arguments NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn emonli_catalog_render(
    catalog: *const EmonliCatalog,
    prompt_type: *const c_char,
    language: *const c_char,
    emotion: *const c_char,
    out: *mut *mut *mut c_char,
    out_len: *mut usize,
) -> i32 {
    if catalog.is_null() || out.is_null() || out_len.is_null() {
        set_last_error("catalog/out/out_len is null");
        return EMONLI_ERR_NULL_POINTER;
    }
    let prompt_type = match utf8_arg(prompt_type, "prompt_type").and_then(parse_prompt_type) {
        Ok(pt) => pt,
        Err(code) => return code,
    };
    let language = match utf8_arg(language, "language") {
        Ok(s) => s,
        Err(code) => return code,
    };
    let emotion = match utf8_arg(emotion, "emotion") {
        Ok(s) => s,
        Err(code) => return code,
    };
    match (*catalog).inner.render_hypotheses(prompt_type, language, emotion) {
        Ok(hypotheses) => {
            let mut strings: Vec<*mut c_char> = hypotheses
                .into_iter()
                .map(|h| {
                    CString::new(h.replace('\0', " "))
                        .unwrap_or_default()
                        .into_raw()
                })
                .collect();
            strings.shrink_to_fit();
            *out_len = strings.len();
            let mut boxed = strings.into_boxed_slice();
            *out = boxed.as_mut_ptr();
            std::mem::forget(boxed);
            EMONLI_OK
        }
        Err(e) => {
            set_last_error(e);
            EMONLI_ERR_CATALOG
        }
    }
}

/// Releases an array returned by [`emonli_catalog_render`].
///
/// # Safety
/// `strings`/`len` must come from a single successful render call and must
/// not have been freed before.
#[no_mangle]
pub unsafe extern "C" fn emonli_strings_free(strings: *mut *mut c_char, len: usize) {
    if strings.is_null() {
        return;
    }
    let boxed = Box::from_raw(std::ptr::slice_from_raw_parts_mut(strings, len));
    for ptr in boxed.iter() {
        if !ptr.is_null() {
            drop(CString::from_raw(*ptr));
        }
    }
}

/// Deterministic token-overlap entailment score. `out_probs` receives
/// (entail, neutral, contradict).
///
/// # Safety
/// `premise`/`hypothesis` must be valid NUL-terminated strings and
/// `out_probs` must point to at least 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn emonli_mock_score(
    premise: *const c_char,
    hypothesis: *const c_char,
    out_probs: *mut f64,
) -> i32 {
    if out_probs.is_null() {
        set_last_error("out_probs is null");
        return EMONLI_ERR_NULL_POINTER;
    }
    let premise = match utf8_arg(premise, "premise") {
        Ok(s) => s,
        Err(code) => return code,
    };
    let hypothesis = match utf8_arg(hypothesis, "hypothesis") {
        Ok(s) => s,
        Err(code) => return code,
    };
    match mock_score(premise, hypothesis) {
        Ok(result) => {
            *out_probs.add(0) = result.p_entail;
            *out_probs.add(1) = result.p_neutral;
            *out_probs.add(2) = result.p_contradict;
            EMONLI_OK
        }
        Err(e) => {
            set_last_error(e);
            EMONLI_ERR_SCORE
        }
    }
}

/// Classifies one text with the mock scorer. `out_scores` receives the
/// aggregated entailment probability per label in the order given;
/// `out_predicted` receives the index of the predicted label.
///
/// # Safety
/// All pointers must be valid; `labels` must hold `n_labels` NUL-terminated
/// strings; `out_scores` must have room for `n_labels` doubles.
#[no_mangle]
pub unsafe extern "C" fn emonli_classify_mock(
    catalog: *const EmonliCatalog,
    text: *const c_char,
    labels: *const *const c_char,
    n_labels: usize,
    prompt_type: *const c_char,
    language: *const c_char,
    out_scores: *mut f64,
    out_predicted: *mut usize,
) -> i32 {
    if catalog.is_null() || out_scores.is_null() || out_predicted.is_null() {
        set_last_error("catalog/out_scores/out_predicted is null");
        return EMONLI_ERR_NULL_POINTER;
    }
    let text = match utf8_arg(text, "text") {
        Ok(s) => s,
        Err(code) => return code,
    };
    let labels = match utf8_array(labels, n_labels, "labels") {
        Ok(labels) => labels,
        Err(code) => return code,
    };
    let prompt_type = match utf8_arg(prompt_type, "prompt_type").and_then(parse_prompt_type) {
        Ok(pt) => pt,
        Err(code) => return code,
    };
    let language = match utf8_arg(language, "language") {
        Ok(s) => s,
        Err(code) => return code,
    };
    let prediction = match classify(
        &MockScorer::default(),
        &(*catalog).inner,
        "ffi",
        text,
        &labels,
        prompt_type,
        language,
        EntailmentNormalization::ThreeClassSoftmax,
    ) {
        Ok(prediction) => prediction,
        Err(e) => {
            set_last_error(e);
            return EMONLI_ERR_SCORE;
        }
    };
    for (i, label) in labels.iter().enumerate() {
        *out_scores.add(i) = prediction.label_scores[label];
    }
    let predicted_index = labels
        .iter()
        .position(|l| *l == prediction.predicted)
        .expect("predicted label is in the set");
    *out_predicted = predicted_index;
    EMONLI_OK
}

/// Macro-F1 over parallel gold/predicted label arrays.
///
/// # Safety
/// `gold`/`pred` must hold `n` strings, `labels` must hold `n_labels`, and
/// `out_f1` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emonli_macro_f1(
    gold: *const *const c_char,
    pred: *const *const c_char,
    n: usize,
    labels: *const *const c_char,
    n_labels: usize,
    out_f1: *mut f64,
) -> i32 {
    if out_f1.is_null() {
        set_last_error("out_f1 is null");
        return EMONLI_ERR_NULL_POINTER;
    }
    let gold = match utf8_array(gold, n, "gold") {
        Ok(v) => v,
        Err(code) => return code,
    };
    let pred = match utf8_array(pred, n, "pred") {
        Ok(v) => v,
        Err(code) => return code,
    };
    let labels = match utf8_array(labels, n_labels, "labels") {
        Ok(v) => v,
        Err(code) => return code,
    };
    match macro_f1(&gold, &pred, &labels) {
        Ok(f1) => {
            *out_f1 = f1;
            EMONLI_OK
        }
        Err(e) => {
            set_last_error(e);
            EMONLI_ERR_METRICS
        }
    }
}

/// Tie-corrected Kendall rank correlation of two equal-length arrays.
/// Returns `EMONLI_ERR_DEGENERATE` when tau is undefined (all values tied
/// in one argument).
///
/// # Safety
/// `x`/`y` must point to `n` readable doubles; `out_tau` must be writable.
#[no_mangle]
pub unsafe extern "C" fn emonli_kendall_tau_b(
    x: *const f64,
    y: *const f64,
    n: usize,
    out_tau: *mut f64,
) -> i32 {
    if x.is_null() || y.is_null() || out_tau.is_null() {
        set_last_error("x/y/out_tau is null");
        return EMONLI_ERR_NULL_POINTER;
    }
    let x = std::slice::from_raw_parts(x, n);
    let y = std::slice::from_raw_parts(y, n);
    match kendall_tau_b(x, y) {
        Ok(tau) => {
            *out_tau = tau;
            EMONLI_OK
        }
        Err(MetricsError::Degenerate) => {
            set_last_error(MetricsError::Degenerate);
            EMONLI_ERR_DEGENERATE
        }
        Err(e) => {
            set_last_error(e);
            EMONLI_ERR_METRICS
        }
    }
}
