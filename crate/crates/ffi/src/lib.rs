//! C ABI for the xlproject toolkit.
//!
//! Every fallible function returns an [`XlpStatus`]. On failure the message is
//! available from [`xlp_last_error`] on the same thread until the next call.
//! Handles are opaque and must be released with their matching `_free`
//! function. Sentences cross the boundary as UTF-8 text with tokens separated
//! by whitespace; masks are byte arrays where any non-zero byte marks a
//! trigger token. Emotion labels are indices in the order
//! Love, Joy, Fear, Anger, Sadness, Neutral.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use xlproject::cli::parse_llm_response;
use xlproject::corpus::{AnnotatedSentence, DatasetTag, EmotionLabel, Language};
use xlproject::metrics::{self, normalize_attributions};
use xlproject::model::{load_checkpoint, Classifier, Task};
use xlproject::projection::{mark_sentence, project_labels, MarkerScheme, ProjectionOutcome};
use xlproject::ErrorCategory;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XlpStatus {
    Ok = 0,
    /// A null pointer, bad UTF-8, an out-of-range index or a short buffer.
    Argument = 1,
    Config = 2,
    Data = 3,
    Backend = 4,
    /// A bug, including a caught panic.
    Internal = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XlpTask {
    Emotion = 0,
    Trigger = 1,
}

/// Ordered marker pairs used to wrap trigger spans before translation.
pub struct XlpScheme(MarkerScheme);

/// Outcome of projecting one sentence: either a labelled translation or a
/// discard reason.
pub struct XlpProjection {
    outcome: ProjectionOutcome,
    text: CString,
}

/// A trained emotion or trigger classifier.
pub struct XlpModel(Classifier);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: XlpStatus,
    message: String,
}

impl Failure {
    fn argument(message: impl Into<String>) -> Self {
        Failure {
            status: XlpStatus::Argument,
            message: message.into(),
        }
    }

    fn from_error(error: impl Into<xlproject::Error>) -> Self {
        let error = error.into();
        Failure {
            status: status_of(error.category()),
            message: error.to_string(),
        }
    }
}

fn status_of(category: ErrorCategory) -> XlpStatus {
    match category {
        ErrorCategory::Config => XlpStatus::Config,
        ErrorCategory::Data => XlpStatus::Data,
        ErrorCategory::Backend => XlpStatus::Backend,
        ErrorCategory::Internal => XlpStatus::Internal,
    }
}

fn set_last_error(message: Option<String>) {
    let message = message.map(|m| CString::new(m.replace('\0', "\\0")).expect("interior nuls removed"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message);
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> XlpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error(None);
            XlpStatus::Ok
        }
        Ok(Err(failure)) => {
            set_last_error(Some(failure.message));
            failure.status
        }
        Err(payload) => {
            let detail = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(Some(format!("internal error: {detail}")));
            XlpStatus::Internal
        }
    }
}

unsafe fn text_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(Failure::argument(format!("{name} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure::argument(format!("{name} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(ptr: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(Failure::argument(format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn out_arg<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut().ok_or_else(|| Failure::argument(format!("{name} is null")))
}

unsafe fn handle_arg<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| Failure::argument(format!("{name} is null")))
}

fn mask_from_bytes(bytes: &[u8]) -> Vec<bool> {
    bytes.iter().map(|&b| b != 0).collect()
}

fn label_arg(index: u32, name: &str) -> Result<EmotionLabel, Failure> {
    EmotionLabel::from_index(index as usize)
        .ok_or_else(|| Failure::argument(format!("{name} holds {index}, labels run from 0 to 5")))
}

/// Writes `len` and, when the buffer is large enough, the values.
unsafe fn fill_buffer<T: Copy>(values: &[T], out: *mut T, capacity: usize, out_len: *mut usize) -> Result<(), Failure> {
    *out_arg(out_len, "out_len")? = values.len();
    if values.is_empty() {
        return Ok(());
    }
    if capacity < values.len() {
        return Err(Failure::argument(format!(
            "buffer holds {capacity} values but {} are needed",
            values.len()
        )));
    }
    if out.is_null() {
        return Err(Failure::argument("output buffer is null"));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

fn owned_string(text: String) -> *mut c_char {
    CString::new(text.replace('\0', "\\0"))
        .expect("interior nuls removed")
        .into_raw()
}

/// Message of the last failed call on this thread, or NULL after a
/// successful one. The pointer stays valid until the next call into this
/// library on the same thread.
#[no_mangle]
pub extern "C" fn xlp_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn xlp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Static name of an emotion label index, or NULL when out of range.
#[no_mangle]
pub extern "C" fn xlp_emotion_label_name(index: u32) -> *const c_char {
    let name: &'static CStr = match EmotionLabel::from_index(index as usize) {
        Some(EmotionLabel::Love) => c"Love",
        Some(EmotionLabel::Joy) => c"Joy",
        Some(EmotionLabel::Fear) => c"Fear",
        Some(EmotionLabel::Anger) => c"Anger",
        Some(EmotionLabel::Sadness) => c"Sadness",
        Some(EmotionLabel::Neutral) => c"Neutral",
        None => return ptr::null(),
    };
    name.as_ptr()
}

/// Builds a marker scheme. A NULL `spec` selects the default pairs;
/// otherwise `spec` uses the command-line syntax, for example `"[] {} <<,>>"`.
///
/// # Safety
/// `spec` must be NULL or a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xlp_scheme_new(spec: *const c_char, out: *mut *mut XlpScheme) -> XlpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let scheme = if spec.is_null() {
            MarkerScheme::default()
        } else {
            MarkerScheme::parse(text_arg(spec, "spec")?).map_err(Failure::from_error)?
        };
        *out = Box::into_raw(Box::new(XlpScheme(scheme)));
        Ok(())
    })
}

/// # Safety
/// `scheme` must be NULL or a handle from [`xlp_scheme_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn xlp_scheme_free(scheme: *mut XlpScheme) {
    if !scheme.is_null() {
        drop(Box::from_raw(scheme));
    }
}

/// Number of marker pairs, or 0 for NULL.
///
/// # Safety
/// `scheme` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn xlp_scheme_len(scheme: *const XlpScheme) -> usize {
    scheme.as_ref().map_or(0, |s| s.0.len())
}

unsafe fn source_sentence(text: *const c_char, mask: *const u8, mask_len: usize) -> Result<AnnotatedSentence, Failure> {
    let mut sentence = AnnotatedSentence::from_text("ffi", text_arg(text, "text")?, Language::En, DatasetTag::Source);
    if !mask.is_null() {
        let mask = mask_from_bytes(slice_arg(mask, mask_len, "mask")?);
        if mask.len() != sentence.len() {
            return Err(Failure::argument(format!(
                "mask has {} entries but the text has {} tokens",
                mask.len(),
                sentence.len()
            )));
        }
        sentence = sentence.with_mask(mask);
    }
    Ok(sentence)
}

/// Renders `text` with every trigger run wrapped in its own marker pair.
/// `mask` may be NULL for an unannotated sentence. The result is written to
/// `out` and must be released with [`xlp_string_free`].
///
/// # Safety
/// Pointers must be valid for the given lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xlp_mark(
    scheme: *const XlpScheme,
    text: *const c_char,
    mask: *const u8,
    mask_len: usize,
    out: *mut *mut c_char,
) -> XlpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let scheme = handle_arg(scheme, "scheme")?;
        let sentence = source_sentence(text, mask, mask_len)?;
        let marked = mark_sentence(&sentence, &scheme.0).map_err(|reason| Failure {
            status: XlpStatus::Data,
            message: format!("sentence cannot be marked: {reason}"),
        })?;
        *out = owned_string(marked.text);
        Ok(())
    })
}

/// Projects the trigger mask of an English sentence onto `translated`, the
/// backend output for its marked form. A discarded sentence is not an error:
/// the handle reports the reason through [`xlp_projection_discard_reason`].
///
/// # Safety
/// Pointers must be valid for the given lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xlp_project(
    scheme: *const XlpScheme,
    source_text: *const c_char,
    source_mask: *const u8,
    mask_len: usize,
    translated: *const c_char,
    target_lang: *const c_char,
    out: *mut *mut XlpProjection,
) -> XlpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let scheme = handle_arg(scheme, "scheme")?;
        let source = source_sentence(source_text, source_mask, mask_len)?;
        let translated = text_arg(translated, "translated")?;
        let lang: Language = text_arg(target_lang, "target_lang")?
            .parse()
            .map_err(|e: String| Failure {
                status: XlpStatus::Config,
                message: e,
            })?;
        let outcome = project_labels(&source, translated, &scheme.0, lang).map_err(Failure::from_error)?;
        let text = match &outcome {
            ProjectionOutcome::Projected(p) => p.sentence.text(),
            ProjectionOutcome::Discarded(_) => String::new(),
        };
        *out = Box::into_raw(Box::new(XlpProjection {
            outcome,
            text: CString::new(text).map_err(|_| Failure::argument("translated contains a nul byte"))?,
        }));
        Ok(())
    })
}

/// # Safety
/// `projection` must be NULL or a handle from [`xlp_project`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn xlp_projection_free(projection: *mut XlpProjection) {
    if !projection.is_null() {
        drop(Box::from_raw(projection));
    }
}

/// Static discard reason such as `"missing_marker"`, or NULL when the
/// sentence was projected.
///
/// # Safety
/// `projection` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn xlp_projection_discard_reason(projection: *const XlpProjection) -> *const c_char {
    use xlproject::projection::DiscardReason::*;
    let Some(projection) = projection.as_ref() else {
        return ptr::null();
    };
    let reason: &'static CStr = match projection.outcome.discard_reason() {
        None => return ptr::null(),
        Some(MissingMarker) => c"missing_marker",
        Some(UnbalancedMarker) => c"unbalanced_marker",
        Some(ReorderedMarker) => c"reordered_marker",
        Some(TooManySpans) => c"too_many_spans",
        Some(EmptySpan) => c"empty_span",
        Some(EmptyText) => c"empty_text",
    };
    reason.as_ptr()
}

/// Clean translated text, tokens joined by single spaces. Empty for a
/// discarded sentence. Owned by the handle.
///
/// # Safety
/// `projection` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn xlp_projection_text(projection: *const XlpProjection) -> *const c_char {
    projection.as_ref().map_or(ptr::null(), |p| p.text.as_ptr())
}

/// Copies the projected mask into `out` as 0/1 bytes. `out_len` always
/// receives the token count; pass a NULL buffer with capacity 0 to query it.
///
/// # Safety
/// `out` must hold `capacity` bytes; `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xlp_projection_mask(
    projection: *const XlpProjection,
    out: *mut u8,
    capacity: usize,
    out_len: *mut usize,
) -> XlpStatus {
    guard(|| {
        let projection = handle_arg(projection, "projection")?;
        let bytes: Vec<u8> = match &projection.outcome {
            ProjectionOutcome::Projected(p) => match &p.sentence.trigger_mask {
                Some(mask) => mask.iter().map(|&m| m as u8).collect(),
                None => vec![0; p.sentence.len()],
            },
            ProjectionOutcome::Discarded(reason) => {
                return Err(Failure::argument(format!("sentence was discarded ({reason})")));
            }
        };
        fill_buffer(&bytes, out, capacity, out_len)
    })
}

/// Token F1 of one instance. Two empty masks score 1.
///
/// # Safety
/// `gold` and `pred` must hold `len` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xlp_token_f1(gold: *const u8, pred: *const u8, len: usize, out: *mut f64) -> XlpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let gold = mask_from_bytes(slice_arg(gold, len, "gold")?);
        let pred = mask_from_bytes(slice_arg(pred, len, "pred")?);
        *out = metrics::instance_token_f1(&gold, &pred).map_err(Failure::from_error)?;
        Ok(())
    })
}

/// Macro F1 over label indices.
///
/// # Safety
/// `gold` and `pred` must hold `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xlp_macro_f1(gold: *const u32, pred: *const u32, len: usize, out: *mut f64) -> XlpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let to_labels = |values: &[u32], name| {
            values
                .iter()
                .map(|&v| label_arg(v, name))
                .collect::<Result<Vec<_>, _>>()
        };
        let gold = to_labels(slice_arg(gold, len, "gold")?, "gold")?;
        let pred = to_labels(slice_arg(pred, len, "pred")?, "pred")?;
        *out = metrics::macro_f1(&gold, &pred).map_err(Failure::from_error)?;
        Ok(())
    })
}

/// Clamps negative scores to zero and rescales to unit sum, writing `len`
/// values to `out`. All-zero input becomes uniform.
///
/// # Safety
/// `raw` and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn xlp_normalize_attributions(raw: *const f64, len: usize, out: *mut f64) -> XlpStatus {
    guard(|| {
        let normalized = normalize_attributions(slice_arg(raw, len, "raw")?).map_err(Failure::from_error)?;
        let mut written = 0;
        fill_buffer(normalized.values(), out, len, &mut written)
    })
}

/// Share of the attribution mass on gold trigger words. `scores` are
/// normalized first, as in [`xlp_normalize_attributions`].
///
/// # Safety
/// `gold` and `scores` must hold `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xlp_accumulated_importance(
    gold: *const u8,
    scores: *const f64,
    len: usize,
    out: *mut f64,
) -> XlpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let gold = mask_from_bytes(slice_arg(gold, len, "gold")?);
        let attributions = normalize_attributions(slice_arg(scores, len, "scores")?).map_err(Failure::from_error)?;
        *out = metrics::accumulated_importance(&gold, &attributions).map_err(Failure::from_error)?;
        Ok(())
    })
}

/// Reads the label from an LLM answer of the form `Label: <emotion>`.
///
/// # Safety
/// `text` must be nul-terminated; `out_label` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xlp_parse_llm_response(text: *const c_char, out_label: *mut u32) -> XlpStatus {
    guard(|| {
        let out = out_arg(out_label, "out_label")?;
        let label = parse_llm_response(text_arg(text, "text")?).map_err(|e| Failure {
            status: XlpStatus::Data,
            message: e.to_string(),
        })?;
        *out = label.index() as u32;
        Ok(())
    })
}

/// Loads a checkpoint written by `xlproject train`.
///
/// # Safety
/// `path` must be nul-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xlp_model_load(path: *const c_char, out: *mut *mut XlpModel) -> XlpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = text_arg(path, "path")?;
        let classifier = load_checkpoint(Path::new(path)).map_err(Failure::from_error)?;
        *out = Box::into_raw(Box::new(XlpModel(classifier)));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle from [`xlp_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn xlp_model_free(model: *mut XlpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn xlp_model_task(model: *const XlpModel, out: *mut XlpTask) -> XlpStatus {
    guard(|| {
        let model = handle_arg(model, "model")?;
        *out_arg(out, "out")? = match model.0.task {
            Task::Emotion => XlpTask::Emotion,
            Task::Trigger => XlpTask::Trigger,
        };
        Ok(())
    })
}

/// Predicts the emotion label index of a sentence. Fails with
/// `XLP_STATUS_CONFIG` on a trigger model.
///
/// # Safety
/// `model` must be a live handle; `text` nul-terminated; `out_label` writable.
#[no_mangle]
pub unsafe extern "C" fn xlp_model_predict_emotion(
    model: *const XlpModel,
    text: *const c_char,
    out_label: *mut u32,
) -> XlpStatus {
    guard(|| {
        let model = handle_arg(model, "model")?;
        let out = out_arg(out_label, "out_label")?;
        let tokens: Vec<&str> = text_arg(text, "text")?.split_whitespace().collect();
        *out = model.0.predict_emotion(&tokens).map_err(Failure::from_error)?.index() as u32;
        Ok(())
    })
}

/// Predicts a 0/1 trigger mask and per-word scores summing to one.
/// `out_len` receives the word count; when `capacity` is smaller nothing
/// else is written and `XLP_STATUS_ARGUMENT` is returned. Fails with
/// `XLP_STATUS_CONFIG` on an emotion model and `XLP_STATUS_DATA` on empty
/// text.
///
/// # Safety
/// `out_mask` and `out_scores` must hold `capacity` values; `out_len` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn xlp_model_predict_triggers(
    model: *const XlpModel,
    text: *const c_char,
    out_mask: *mut u8,
    out_scores: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> XlpStatus {
    guard(|| {
        let model = handle_arg(model, "model")?;
        let tokens: Vec<&str> = text_arg(text, "text")?.split_whitespace().collect();
        let (mask, scores) = model.0.predict_triggers(&tokens).map_err(Failure::from_error)?;
        let bytes: Vec<u8> = mask.iter().map(|&m| m as u8).collect();
        fill_buffer(&bytes, out_mask, capacity, out_len)?;
        fill_buffer(scores.values(), out_scores, capacity, out_len)
    })
}
