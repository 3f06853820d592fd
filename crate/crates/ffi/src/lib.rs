//! C interface to `bitrobust`.
//!
//! Every fallible function returns a [`BrStatus`]. On failure the message is
//! kept per thread and can be read with [`br_last_error_message`]. Bundles and
//! datasets are opaque handles owned by the caller and released with their
//! `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bitrobust::channel::{corrupt_bundle, BscChannel, InjectionTarget};
use bitrobust::codec::{self, BitWord, CodecKind, CodecSpec};
use bitrobust::distortion::{self, Method, Mode, Neighborhood};
use bitrobust::model::{self, DecodeOptions, LabeledDataset, ModelBundle, Network};
use bitrobust::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Checksum = 5,
    Shape = 6,
    BufferTooSmall = 7,
    Panic = 99,
}

/// Opaque quantized model.
pub struct BrBundle(ModelBundle);

/// Opaque labeled dataset.
pub struct BrDataset(LabeledDataset);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> BrStatus {
    match e {
        Error::Io(_) => BrStatus::Io,
        Error::Format(_) | Error::Truncated(_) | Error::Json(_) => BrStatus::Format,
        Error::Checksum { .. } => BrStatus::Checksum,
        Error::Shape { .. } => BrStatus::Shape,
        Error::Trial { source, .. } => status_of(source),
        _ => BrStatus::InvalidArgument,
    }
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Small(usize),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> BrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BrStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            BrStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            BrStatus::InvalidArgument
        }
        Ok(Err(Fail::Small(need))) => {
            set_error(format!("output buffer too small, need {need} elements"));
            BrStatus::BufferTooSmall
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            BrStatus::Panic
        }
    }
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null("path"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Arg("path is not valid UTF-8".into()))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

fn spec_arg(codec: u8, q: u32, parity: bool) -> Result<CodecSpec, Fail> {
    let kind = CodecKind::from_id(codec).map_err(|_| Fail::Arg(format!("unknown codec id {codec}")))?;
    Ok(CodecSpec::new(kind, q, parity)?)
}

/// Message of the last failed call on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn br_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn br_bundle_load(path: *const c_char, out: *mut *mut BrBundle) -> BrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let bundle = model::load_bundle(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(BrBundle(bundle)));
        Ok(())
    })
}

/// # Safety
/// `bundle` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn br_bundle_save(bundle: *const BrBundle, path: *const c_char) -> BrStatus {
    guard(|| {
        let b = ref_arg(bundle, "bundle")?;
        model::save_bundle(&b.0, path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `bundle` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn br_bundle_free(bundle: *mut BrBundle) {
    if !bundle.is_null() {
        drop(Box::from_raw(bundle));
    }
}

/// Number of stored weights, or 0 for a null handle.
///
/// # Safety
/// `bundle` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_bundle_parameter_count(bundle: *const BrBundle) -> usize {
    bundle.as_ref().map_or(0, |b| b.0.parameter_count())
}

/// Passes every tensor through a binary symmetric channel. `flips` may be null.
///
/// # Safety
/// `bundle` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn br_bundle_corrupt(
    bundle: *const BrBundle,
    rber: f64,
    master_seed: u64,
    trial: u64,
    out: *mut *mut BrBundle,
    flips: *mut u64,
) -> BrStatus {
    guard(|| {
        let b = ref_arg(bundle, "bundle")?;
        let out = out_arg(out, "out")?;
        let channel = BscChannel::new(rber, master_seed)?;
        let (corrupted, n) = corrupt_bundle(&b.0, &channel, &InjectionTarget::all(trial))?;
        if let Some(f) = flips.as_mut() {
            *f = n;
        }
        *out = Box::into_raw(Box::new(BrBundle(corrupted)));
        Ok(())
    })
}

/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn br_dataset_load(path: *const c_char, out: *mut *mut BrDataset) -> BrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let data = LabeledDataset::load(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(BrDataset(data)));
        Ok(())
    })
}

/// # Safety
/// `data` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_dataset_free(data: *mut BrDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// # Safety
/// `data` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn br_dataset_len(data: *const BrDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.len())
}

/// Top-k accuracy. With `sanitize`, non-finite decoded weights become zero.
///
/// # Safety
/// Handles must be live and `accuracy` writable.
#[no_mangle]
pub unsafe extern "C" fn br_evaluate_accuracy(
    bundle: *const BrBundle,
    data: *const BrDataset,
    top_k: usize,
    sanitize: bool,
    accuracy: *mut f64,
) -> BrStatus {
    guard(|| {
        let b = ref_arg(bundle, "bundle")?;
        let d = ref_arg(data, "data")?;
        let acc = out_arg(accuracy, "accuracy")?;
        let net = Network::from_bundle(&b.0, DecodeOptions { sanitize })?;
        *acc = model::evaluate_accuracy(&net, &d.0, top_k)?;
        Ok(())
    })
}

/// Runs one input through the decoded model. The output length is written to
/// `written`; if `output_cap` is too small, nothing is copied and
/// `BufferTooSmall` is returned with `written` set to the required length.
///
/// # Safety
/// `input` must point to `input_len` doubles, `output` to `output_cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn br_forward(
    bundle: *const BrBundle,
    input: *const f64,
    input_len: usize,
    output: *mut f64,
    output_cap: usize,
    written: *mut usize,
) -> BrStatus {
    guard(|| {
        let b = ref_arg(bundle, "bundle")?;
        let written = out_arg(written, "written")?;
        if input.is_null() {
            return Err(Fail::Null("input"));
        }
        let x = std::slice::from_raw_parts(input, input_len);
        let y = model::forward(&b.0, x)?;
        *written = y.len();
        if y.len() > output_cap {
            return Err(Fail::Small(y.len()));
        }
        if output.is_null() {
            return Err(Fail::Null("output"));
        }
        std::slice::from_raw_parts_mut(output, y.len()).copy_from_slice(&y);
        Ok(())
    })
}

/// # Safety
/// `bits` must be writable.
#[no_mangle]
pub unsafe extern "C" fn br_half_encode(value: f64, bits: *mut u16) -> BrStatus {
    guard(|| {
        let out = out_arg(bits, "bits")?;
        *out = codec::half_encode(value)?.bits() as u16;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn br_half_decode(bits: u16) -> f64 {
    let word = BitWord::new(16, u64::from(bits)).expect("16-bit word");
    codec::half_decode(&word).expect("16-bit word")
}

/// Data word for `index` under codec id `codec` (0 binary, 1 gray, 2 hamming).
///
/// # Safety
/// `word` must be writable.
#[no_mangle]
pub unsafe extern "C" fn br_index_to_word(codec: u8, q: u32, index: u64, word: *mut u64) -> BrStatus {
    guard(|| {
        let out = out_arg(word, "word")?;
        *out = codec::index_to_word(&spec_arg(codec, q, false)?, index)?.bits();
        Ok(())
    })
}

/// # Safety
/// `index` must be writable.
#[no_mangle]
pub unsafe extern "C" fn br_word_to_index(codec: u8, q: u32, word: u64, index: *mut u64) -> BrStatus {
    guard(|| {
        let out = out_arg(index, "index")?;
        let spec = spec_arg(codec, q, false)?;
        *out = codec::word_to_index(&spec, &BitWord::new(q, word)?)?;
        Ok(())
    })
}

/// Exhaustive distortion over the ball of radius `k`; `mode` 0 is the
/// maximum, 1 the average. The exact value is `numer / denom`.
///
/// # Safety
/// The three output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn br_distortion(
    codec: u8,
    q: u32,
    k: u32,
    mode: u32,
    numer: *mut u64,
    denom: *mut u64,
    value: *mut f64,
) -> BrStatus {
    guard(|| {
        let numer = out_arg(numer, "numer")?;
        let denom = out_arg(denom, "denom")?;
        let value = out_arg(value, "value")?;
        let mode = match mode {
            0 => Mode::Max,
            1 => Mode::Ave,
            m => return Err(Fail::Arg(format!("mode {m} is neither 0 (max) nor 1 (ave)"))),
        };
        let spec = spec_arg(codec, q, false)?;
        let report = distortion::distortion_profile(&spec, k, Neighborhood::Ball, Method::Exhaustive)?;
        let v = report.value(mode);
        let exact = v.exact.ok_or_else(|| Fail::Arg("no exact value".into()))?;
        let narrow = |x: u128| u64::try_from(x).map_err(|_| Fail::Arg("exact value exceeds 64 bits".into()));
        *numer = narrow(*exact.numer())?;
        *denom = narrow(*exact.denom())?;
        *value = v.float;
        Ok(())
    })
}
