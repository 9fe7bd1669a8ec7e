//! C ABI over the collarnet pipeline.
//!
//! Waveforms and models cross the boundary as opaque handles created by a
//! `cn_*_new`/`cn_*_load`/`cn_*_read` call and released with the matching
//! `cn_*_free`. Every fallible call returns a [`CnStatus`]; on failure the
//! message is available from [`cn_last_error`] on the same thread until the
//! next failing call. Panics never cross the boundary.
//!
//! Array outputs share one protocol: the required element count is always
//! stored in `*len_out`; a NULL buffer only queries that count, and a
//! buffer shorter than it yields `CN_STATUS_BUFFER_TOO_SMALL`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use collarnet::infer::{self, MatchReport};
use collarnet::nn::{checkpoint, ModelParams};
use collarnet::signal::{self, Waveform};
use collarnet::synth::{self, SynthSpec};
use collarnet::Error;

/// Result codes. `CN_STATUS_OK` is zero; everything else is a failure.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    ShapeMismatch = 5,
    UnsortedInput = 6,
    BufferTooSmall = 7,
    Internal = 8,
}

/// Opaque waveform handle.
pub struct CnWaveform(Waveform);

/// Opaque model handle.
pub struct CnModel(ModelParams);

/// Counts and scores from matching detected marks to annotated ones.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CnMatchReport {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tolerance: usize,
}

impl From<MatchReport> for CnMatchReport {
    fn from(r: MatchReport) -> Self {
        CnMatchReport {
            tp: r.tp,
            fp: r.fp,
            fn_: r.fn_,
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            tolerance: r.tolerance,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CnStatus {
    match e {
        Error::Io { .. } => CnStatus::Io,
        Error::Format { .. } | Error::Checkpoint(_) => CnStatus::Format,
        Error::ShapeMismatch(_) | Error::UnsupportedInputLen(_) => CnStatus::ShapeMismatch,
        Error::UnsortedInput => CnStatus::UnsortedInput,
        _ => CnStatus::InvalidArgument,
    }
}

struct Fail(CnStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CnStatus::NullPointer, format!("{what} is NULL"))
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CnStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            CnStatus::Internal
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(CnStatus::InvalidArgument, format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Copies `src` into a caller buffer of `cap` elements and stores the
/// required length in `*len_out`. A NULL `buf` only queries the length.
unsafe fn copy_out<T: Copy>(src: &[T], buf: *mut T, cap: usize, len_out: *mut usize) -> Result<(), Fail> {
    *out_arg(len_out, "len_out")? = src.len();
    if buf.is_null() {
        return Ok(());
    }
    if cap < src.len() {
        return Err(Fail(CnStatus::BufferTooSmall, format!("buffer holds {cap}, need {}", src.len())));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

unsafe fn give<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    *out_arg(out, "out")? = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cn_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a waveform from `len` samples. `marks` may be NULL when `n_marks` is 0.
///
/// # Safety
/// `samples` must point to `len` readable doubles and `marks` to `n_marks`
/// readable `size_t` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cn_waveform_new(
    samples: *const f64,
    len: usize,
    sample_rate_hz: f64,
    marks: *const usize,
    n_marks: usize,
    out: *mut *mut CnWaveform,
) -> CnStatus {
    guard(|| {
        let s = slice_arg(samples, len, "samples")?.to_vec();
        let m = slice_arg(marks, n_marks, "marks")?.to_vec();
        let w = Waveform::new(s, sample_rate_hz, Some(m))?;
        give(out, CnWaveform(w))
    })
}

/// Reads a CCLW waveform from `<stem>.json` and `<stem>.bin`.
///
/// # Safety
/// `stem` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cn_waveform_read(stem: *const c_char, out: *mut *mut CnWaveform) -> CnStatus {
    guard(|| {
        let w = signal::read_waveform(path_arg(stem, "stem")?)?;
        give(out, CnWaveform(w))
    })
}

/// Writes a waveform in CCLW format.
///
/// # Safety
/// `w` must be a live handle and `stem` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cn_waveform_write(w: *const CnWaveform, stem: *const c_char) -> CnStatus {
    guard(|| {
        let w = w.as_ref().ok_or_else(|| null("waveform"))?;
        signal::write_waveform(&w.0, path_arg(stem, "stem")?)?;
        Ok(())
    })
}

/// Generates a synthetic waveform from a JSON spec (an empty object gives
/// every default).
///
/// # Safety
/// `spec_json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cn_synth(spec_json: *const c_char, out: *mut *mut CnWaveform) -> CnStatus {
    guard(|| {
        if spec_json.is_null() {
            return Err(null("spec_json"));
        }
        let text = CStr::from_ptr(spec_json)
            .to_str()
            .map_err(|_| Fail(CnStatus::InvalidArgument, "spec_json is not valid UTF-8".into()))?;
        let spec: SynthSpec =
            serde_json::from_str(text).map_err(|e| Fail(CnStatus::InvalidArgument, format!("synth spec: {e}")))?;
        give(out, CnWaveform(synth::generate(&spec)?))
    })
}

/// Number of samples; 0 for a NULL handle.
///
/// # Safety
/// `w` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cn_waveform_len(w: *const CnWaveform) -> usize {
    w.as_ref().map_or(0, |w| w.0.len())
}

/// Copies the samples out.
///
/// # Safety
/// `w` must be a live handle, `buf` NULL or writable for `cap` doubles,
/// `len_out` writable.
#[no_mangle]
pub unsafe extern "C" fn cn_waveform_samples(w: *const CnWaveform, buf: *mut f64, cap: usize, len_out: *mut usize) -> CnStatus {
    guard(|| {
        let w = w.as_ref().ok_or_else(|| null("waveform"))?;
        copy_out(w.0.samples(), buf, cap, len_out)
    })
}

/// Copies the collar marks out (none for an unannotated waveform).
///
/// # Safety
/// As for [`cn_waveform_samples`].
#[no_mangle]
pub unsafe extern "C" fn cn_waveform_marks(w: *const CnWaveform, buf: *mut usize, cap: usize, len_out: *mut usize) -> CnStatus {
    guard(|| {
        let w = w.as_ref().ok_or_else(|| null("waveform"))?;
        copy_out(w.0.collar_marks().unwrap_or(&[]), buf, cap, len_out)
    })
}

/// Z-score normalization into a new handle.
///
/// # Safety
/// `w` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cn_standardize(w: *const CnWaveform, out: *mut *mut CnWaveform) -> CnStatus {
    guard(|| {
        let w = w.as_ref().ok_or_else(|| null("waveform"))?;
        give(out, CnWaveform(signal::standardize(&w.0)?))
    })
}

/// # Safety
/// `w` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cn_waveform_free(w: *mut CnWaveform) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// Loads a CCLM checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cn_model_load(path: *const c_char, out: *mut *mut CnModel) -> CnStatus {
    guard(|| {
        let m = checkpoint::load(path_arg(path, "path")?)?;
        give(out, CnModel(m))
    })
}

/// Input window length `W`; 0 for a NULL handle.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cn_model_window_len(m: *const CnModel) -> usize {
    m.as_ref().map_or(0, |m| m.0.window_len())
}

/// # Safety
/// `m` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cn_model_free(m: *mut CnModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Sliding-window probability map over an already normalized waveform;
/// one value per sample.
///
/// # Safety
/// `m` and `w` must be live handles, `buf` NULL or writable for `cap`
/// doubles, `len_out` writable.
#[no_mangle]
pub unsafe extern "C" fn cn_sliding_infer(
    m: *const CnModel,
    w: *const CnWaveform,
    workers: usize,
    buf: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> CnStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("model"))?;
        let w = w.as_ref().ok_or_else(|| null("waveform"))?;
        let n = w.0.len();
        *out_arg(len_out, "len_out")? = n;
        if buf.is_null() {
            return Ok(());
        }
        if cap < n {
            return Err(Fail(CnStatus::BufferTooSmall, format!("buffer holds {cap}, need {n}")));
        }
        let map = infer::sliding_infer(&m.0, w.0.samples(), workers.max(1))?;
        copy_out(&map.values, buf, cap, len_out)
    })
}

/// Thresholds a probability map and writes the region centers.
///
/// # Safety
/// `values` must point to `len` readable doubles, `centers` NULL or
/// writable for `cap` values, `n_out` writable.
#[no_mangle]
pub unsafe extern "C" fn cn_postprocess(
    values: *const f64,
    len: usize,
    threshold: f64,
    min_width: usize,
    centers: *mut usize,
    cap: usize,
    n_out: *mut usize,
) -> CnStatus {
    guard(|| {
        let v = slice_arg(values, len, "values")?;
        let det = infer::postprocess(v, threshold, min_width)?;
        copy_out(&det.collars, centers, cap, n_out)
    })
}

/// Greedy neighborhood matching of sorted predictions against sorted truth.
///
/// # Safety
/// `pred` and `truth` must point to `n_pred` and `n_truth` readable values
/// (either may be NULL when its count is 0); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cn_match_collars(
    pred: *const usize,
    n_pred: usize,
    truth: *const usize,
    n_truth: usize,
    tolerance: usize,
    out: *mut CnMatchReport,
) -> CnStatus {
    guard(|| {
        let p = slice_arg(pred, n_pred, "pred")?;
        let t = slice_arg(truth, n_truth, "truth")?;
        let r = infer::match_collars(p, t, tolerance)?;
        *out_arg(out, "out")? = r.into();
        Ok(())
    })
}
