//! C ABI over `subext`.
//!
//! Every fallible call returns a [`SubextStatus`]; on failure the message is
//! available from [`subext_last_error`] on the same thread. Strings crossing
//! the boundary are NUL-terminated UTF-8. Strings returned by the library
//! must be released with [`subext_string_free`], handles with their own
//! `*_free` function. Panics are caught and reported as
//! `SUBEXT_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use subext::align::{OcrIndex, RefineConfig};
use subext::corpus::{clip_movie, filter_short_video, FilterDecision, Language, RejectReason, Source, VideoMeta};
use subext::metrics::{evaluate, normalized_edit_distance, EvalSample, SuberConfig};
use subext::pipeline::{parse_ocr_manifest, parse_predictions, PipelineError};
use subext::s3::{forward, grad_check, FrameFeature, S3Config, S3Error, S3Params};
use subext::srt::{emit_srt, parse_srt, SrtDocument, SrtError};
use subext::Rate;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubextStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed input text (SRT, OCR manifest, predictions, parameters).
    Parse = 3,
    InvalidArgument = 4,
    /// The caller's buffer is too small; the required size was written.
    BufferTooSmall = 5,
    /// Gradient check or another internal consistency check failed.
    Invariant = 6,
    Panic = 7,
}

/// Outcome of the short-video filter.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubextFilter {
    Accept = 0,
    RejectDuration = 1,
    RejectTracklets = 2,
}

/// A parsed subtitle document.
pub struct SubextDocument {
    doc: SrtDocument,
}

/// Adapter parameters together with the sizes they were built for.
pub struct SubextS3Params {
    params: S3Params,
    cfg: S3Config,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(SubextStatus, String);

impl Failure {
    fn new(status: SubextStatus, msg: impl std::fmt::Display) -> Self {
        Failure(status, msg.to_string())
    }
}

impl From<SrtError> for Failure {
    fn from(e: SrtError) -> Self {
        let status = match e {
            SrtError::InvariantViolation { .. } => SubextStatus::InvalidArgument,
            _ => SubextStatus::Parse,
        };
        Failure::new(status, e)
    }
}

impl From<S3Error> for Failure {
    fn from(e: S3Error) -> Self {
        let status = match e {
            S3Error::Format(_) => SubextStatus::Parse,
            S3Error::GradMismatch { .. } | S3Error::NonFinite(_) => SubextStatus::Invariant,
            _ => SubextStatus::InvalidArgument,
        };
        Failure::new(status, e)
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let status = match e {
            PipelineError::Syntax { .. } => SubextStatus::Parse,
            _ => SubextStatus::InvalidArgument,
        };
        Failure::new(status, e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SubextStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SubextStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SubextStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::new(SubextStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(SubextStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::new(SubextStatus::InvalidArgument, "output contains NUL"))
}

fn rate(num: u64, den: u64) -> Result<Rate, Failure> {
    Rate::new(num, den).map_err(|e| Failure::new(SubextStatus::InvalidArgument, e))
}

/// Message for the last failed call on this thread, or NULL. Valid until
/// the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn subext_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must come from this library and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn subext_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `text` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subext_srt_parse(text: *const c_char, out: *mut *mut SubextDocument) -> SubextStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let doc = parse_srt(str_arg(text, "text")?)?;
        *out = Box::into_raw(Box::new(SubextDocument { doc }));
        Ok(())
    })
}

/// # Safety
/// `doc` must come from [`subext_srt_parse`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn subext_document_free(doc: *mut SubextDocument) {
    if !doc.is_null() {
        drop(Box::from_raw(doc));
    }
}

/// Number of cues, or 0 for NULL.
///
/// # Safety
/// `doc` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn subext_document_len(doc: *const SubextDocument) -> usize {
    doc.as_ref().map_or(0, |d| d.doc.len())
}

/// Timing and text of cue `i` (0-based). Lines are joined by `\n`; free the
/// text with [`subext_string_free`].
///
/// # Safety
/// `doc` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn subext_document_cue(
    doc: *const SubextDocument,
    i: usize,
    start_ms: *mut u64,
    end_ms: *mut u64,
    text: *mut *mut c_char,
) -> SubextStatus {
    guard(|| {
        let doc = &doc.as_ref().ok_or_else(|| null("doc"))?.doc;
        let (start_ms, end_ms, text) = (out_arg(start_ms, "start_ms")?, out_arg(end_ms, "end_ms")?, out_arg(text, "text")?);
        let cue = doc
            .cues
            .get(i)
            .ok_or_else(|| Failure::new(SubextStatus::InvalidArgument, format!("cue {i} of {}", doc.len())))?;
        *text = c_string(cue.text())?;
        *start_ms = cue.start.millis();
        *end_ms = cue.end.millis();
        Ok(())
    })
}

/// Renders the document as SRT, numbering cues by position.
///
/// # Safety
/// `doc` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subext_srt_emit(doc: *const SubextDocument, out: *mut *mut c_char) -> SubextStatus {
    guard(|| {
        let doc = &doc.as_ref().ok_or_else(|| null("doc"))?.doc;
        let out = out_arg(out, "out")?;
        *out = c_string(emit_srt(doc)?)?;
        Ok(())
    })
}

/// Normalized edit distance between two strings, in characters.
///
/// # Safety
/// `a` and `b` must be valid C strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subext_normalized_edit_distance(
    a: *const c_char,
    b: *const c_char,
    out: *mut f64,
) -> SubextStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = normalized_edit_distance(str_arg(a, "a")?, str_arg(b, "b")?);
        Ok(())
    })
}

/// Scores hypothesis SRT text against reference SRT text: `ned` in `[0, 1]`
/// (higher is better) and SubER in percent (lower is better).
///
/// # Safety
/// `hyp` and `reference` must be valid C strings; `ned` and `suber` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn subext_evaluate(
    hyp: *const c_char,
    reference: *const c_char,
    tolerance_ms: u64,
    ned: *mut f64,
    suber: *mut f64,
) -> SubextStatus {
    guard(|| {
        let (ned, suber) = (out_arg(ned, "ned")?, out_arg(suber, "suber")?);
        let sample = EvalSample {
            id: String::new(),
            hyp: parse_srt(str_arg(hyp, "hyp")?)?,
            reference: parse_srt(str_arg(reference, "reference")?)?,
        };
        let cfg = SuberConfig {
            tolerance_ms,
            ..SuberConfig::default()
        };
        let report = evaluate(&[sample], &cfg).map_err(|e| Failure::new(SubextStatus::InvalidArgument, e))?;
        *ned = report.ned;
        *suber = report.suber_percent;
        Ok(())
    })
}

/// Refines `<b><e>text` predictions against a JSON-lines OCR manifest and
/// returns SRT text. `range == 0` selects one second of frames.
///
/// # Safety
/// String arguments must be valid C strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subext_refine(
    predictions: *const c_char,
    ocr_manifest: *const c_char,
    fps_num: u64,
    fps_den: u64,
    sim: f64,
    range: u64,
    out: *mut *mut c_char,
) -> SubextStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let label = Path::new("<memory>");
        let preds = parse_predictions(str_arg(predictions, "predictions")?, label)?;
        let ocr = OcrIndex::new(parse_ocr_manifest(str_arg(ocr_manifest, "ocr_manifest")?, label)?)
            .map_err(|e| Failure::new(SubextStatus::Parse, e))?;
        let mut cfg = RefineConfig::new(rate(fps_num, fps_den)?);
        cfg.sim = sim;
        if range > 0 {
            cfg.range = range;
        }
        let refined =
            subext::align::refine_all(&preds, &ocr, &cfg).map_err(|e| Failure::new(SubextStatus::InvalidArgument, e))?;
        *out = c_string(emit_srt(&refined.document)?)?;
        Ok(())
    })
}

/// Seeded parameters for the given sizes (uniform in `[-0.1, 0.1]`).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subext_s3_params_new(
    p: usize,
    k: usize,
    window: usize,
    c: usize,
    d: usize,
    frame_index_slots: bool,
    seed: u64,
    out: *mut *mut SubextS3Params,
) -> SubextStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cfg = S3Config {
            p,
            k,
            window,
            c,
            d,
            frame_index_slots,
        };
        let params = S3Params::init(&cfg, seed)?;
        *out = Box::into_raw(Box::new(SubextS3Params { params, cfg }));
        Ok(())
    })
}

/// Loads parameters written by [`subext_s3_params_save`]. Pooling size,
/// window and slot layout are not stored in the container.
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subext_s3_params_load(
    data: *const u8,
    len: usize,
    p: usize,
    window: usize,
    frame_index_slots: bool,
    out: *mut *mut SubextS3Params,
) -> SubextStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if data.is_null() {
            return Err(null("data"));
        }
        let params = S3Params::from_bytes(std::slice::from_raw_parts(data, len))?;
        let cfg = S3Config {
            p,
            k: params.queries.len(),
            window,
            c: params.attention.channels(),
            d: params.proj_v.bias.len(),
            frame_index_slots,
        };
        cfg.validate()?;
        *out = Box::into_raw(Box::new(SubextS3Params { params, cfg }));
        Ok(())
    })
}

/// Serializes parameters into `buf`. `len` receives the size needed; when
/// `buf` is NULL or `capacity` is too small nothing is copied and
/// `SUBEXT_STATUS_BUFFER_TOO_SMALL` is returned (NULL `buf` is a size query
/// and returns OK).
///
/// # Safety
/// `params` must be a live handle; `buf` must be NULL or hold `capacity`
/// writable bytes; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subext_s3_params_save(
    params: *const SubextS3Params,
    buf: *mut u8,
    capacity: usize,
    len: *mut usize,
) -> SubextStatus {
    guard(|| {
        let h = params.as_ref().ok_or_else(|| null("params"))?;
        let len = out_arg(len, "len")?;
        let bytes = h.params.to_bytes();
        *len = bytes.len();
        if buf.is_null() {
            return Ok(());
        }
        if capacity < bytes.len() {
            return Err(Failure::new(
                SubextStatus::BufferTooSmall,
                format!("need {} bytes, have {capacity}", bytes.len()),
            ));
        }
        ptr::copy_nonoverlapping(bytes.as_ptr(), buf, bytes.len());
        Ok(())
    })
}

/// # Safety
/// `params` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn subext_s3_params_free(params: *mut SubextS3Params) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Output rows for `frames` frames: `frames * (p*p + K)`, plus one per frame
/// with frame-index slots. Output width is `D`.
///
/// # Safety
/// `params` must be NULL (returns 0) or a live handle.
#[no_mangle]
pub unsafe extern "C" fn subext_s3_output_rows(params: *const SubextS3Params, frames: usize) -> usize {
    params.as_ref().map_or(0, |h| h.cfg.output_rows(frames))
}

unsafe fn frames_arg(data: *const f64, n: usize, h: usize, w: usize, c: usize) -> Result<Vec<FrameFeature>, Failure> {
    if data.is_null() {
        return Err(null("frames"));
    }
    let per = h * w * c;
    let all = std::slice::from_raw_parts(data, n * per);
    all.chunks(per.max(1))
        .take(n)
        .map(|chunk| FrameFeature::new(h, w, c, chunk.to_vec()).map_err(Failure::from))
        .collect()
}

/// Adapter forward pass over `n` frames stored row-major as `n×h×w×C`.
/// `out` must hold `subext_s3_output_rows(params, n) * D` values.
///
/// # Safety
/// `params` must be a live handle; `frames` must hold `n*h*w*C` values and
/// `out` `out_len` writable values.
#[no_mangle]
pub unsafe extern "C" fn subext_s3_forward(
    params: *const SubextS3Params,
    frames: *const f64,
    n: usize,
    h: usize,
    w: usize,
    out: *mut f64,
    out_len: usize,
) -> SubextStatus {
    guard(|| {
        let hd = params.as_ref().ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let need = hd.cfg.output_rows(n) * hd.cfg.d;
        if out_len < need {
            return Err(Failure::new(
                SubextStatus::BufferTooSmall,
                format!("need {need} values, have {out_len}"),
            ));
        }
        let frames = frames_arg(frames, n, h, w, hd.cfg.c)?;
        let result = forward(&hd.params, &frames, &hd.cfg)?;
        ptr::copy_nonoverlapping(result.data().as_ptr(), out, need);
        Ok(())
    })
}

/// Compares analytic and finite-difference gradients of the sum of squared
/// outputs. Writes the largest relative error; returns
/// `SUBEXT_STATUS_INVARIANT` when it reaches `tol`.
///
/// # Safety
/// As for [`subext_s3_forward`]; `max_rel_error` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subext_s3_grad_check(
    params: *const SubextS3Params,
    frames: *const f64,
    n: usize,
    h: usize,
    w: usize,
    step: f64,
    tol: f64,
    max_rel_error: *mut f64,
) -> SubextStatus {
    guard(|| {
        let hd = params.as_ref().ok_or_else(|| null("params"))?;
        let out = out_arg(max_rel_error, "max_rel_error")?;
        let frames = frames_arg(frames, n, h, w, hd.cfg.c)?;
        match grad_check(&hd.params, &frames, &hd.cfg, step, tol) {
            Ok(report) => {
                *out = report.max_rel_error;
                Ok(())
            }
            Err(e @ S3Error::GradMismatch { rel_error, .. }) => {
                *out = rel_error;
                Err(e.into())
            }
            Err(e) => Err(e.into()),
        }
    })
}

/// Short-video rule: 10 to 120 seconds and at least five tracklets.
#[no_mangle]
pub extern "C" fn subext_filter_short_video(duration: f64, tracklet_count: u32) -> SubextFilter {
    let meta = VideoMeta {
        id: String::new(),
        duration,
        fps: None,
        tracklet_count,
        language: Language::NoneText,
        source: Source::ShortVideo,
    };
    match filter_short_video(&meta) {
        FilterDecision::Accept => SubextFilter::Accept,
        FilterDecision::Reject(RejectReason::Duration) => SubextFilter::RejectDuration,
        FilterDecision::Reject(RejectReason::Tracklets) => SubextFilter::RejectTracklets,
    }
}

/// Cuts a movie into clips of 15 to 60 seconds. Writes `2 * count` values
/// (start, end pairs) into `bounds`; `count` always receives the number of
/// clips, so a NULL `bounds` is a size query.
///
/// # Safety
/// `bounds` must be NULL or hold `capacity` writable values (clip pairs);
/// `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn subext_clip_movie(
    total_duration: f64,
    seed: u64,
    bounds: *mut f64,
    capacity: usize,
    count: *mut usize,
) -> SubextStatus {
    guard(|| {
        let count = out_arg(count, "count")?;
        let clips = clip_movie(total_duration, seed).map_err(|e| Failure::new(SubextStatus::InvalidArgument, e))?;
        *count = clips.len();
        if bounds.is_null() {
            return Ok(());
        }
        if capacity < clips.len() {
            return Err(Failure::new(
                SubextStatus::BufferTooSmall,
                format!("need {} clips, have {capacity}", clips.len()),
            ));
        }
        let out = std::slice::from_raw_parts_mut(bounds, 2 * clips.len());
        for (pair, (s, e)) in out.chunks_exact_mut(2).zip(clips) {
            pair[0] = s;
            pair[1] = e;
        }
        Ok(())
    })
}
