//! C ABI over `lesionseg`.
//!
//! Networks are opaque [`LsNetwork`] handles owned by the caller and
//! released with [`ls_network_free`]. Every fallible function returns an
//! [`LsStatus`]; on failure [`ls_last_error_message`] describes the error
//! for the calling thread. Panics never cross the boundary.
//!
//! Images are interleaved 8-bit RGB, row-major. Probability maps and masks
//! are row-major `height * width` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use lesionseg::imageproc::{preprocess_to, RawImage};
use lesionseg::network::{load_weights, save_weights};
use lesionseg::pipeline::{jaccard_index, predict_probability};
use lesionseg::postprocess::{dual_threshold_segment, BinaryMask, ProbabilityMap};
use lesionseg::{Error, Network};

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    WeightFile = 4,
    Shape = 5,
    Image = 6,
    Panic = 7,
}

/// Opaque network handle.
pub struct LsNetwork {
    inner: Network,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LsStatus {
    match e {
        Error::Shape { .. } | Error::Layer { .. } => LsStatus::Shape,
        Error::WeightFile(_) => LsStatus::WeightFile,
        Error::Io { .. } => LsStatus::Io,
        Error::Image { .. } => LsStatus::Image,
        _ => LsStatus::InvalidArgument,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (LsStatus, String)>) -> LsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            LsStatus::Panic
        }
    }
}

fn lib<T>(r: lesionseg::Result<T>) -> Result<T, (LsStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (LsStatus, String) {
    (LsStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (LsStatus, String) {
    (LsStatus::InvalidArgument, msg.into())
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, (LsStatus, String)> {
    if path.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| invalid("path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (LsStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut_arg<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], (LsStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn area(height: usize, width: usize) -> Result<usize, (LsStatus, String)> {
    height
        .checked_mul(width)
        .filter(|&n| n > 0)
        .ok_or_else(|| invalid(format!("invalid extent {height}x{width}")))
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ls_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a freshly initialized seven-plane network.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ls_network_new(seed: u64, out: *mut *mut LsNetwork) -> LsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(LsNetwork {
            inner: Network::cdnn(seed),
        }));
        Ok(())
    })
}

/// Loads a weight file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` as in [`ls_network_new`].
#[no_mangle]
pub unsafe extern "C" fn ls_network_load(path: *const c_char, out: *mut *mut LsNetwork) -> LsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let net = lib(load_weights(path_arg(path)?))?;
        *out = Box::into_raw(Box::new(LsNetwork { inner: net }));
        Ok(())
    })
}

/// Writes the network to `path` atomically.
///
/// # Safety
/// `net` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ls_network_save(net: *const LsNetwork, path: *const c_char) -> LsStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("network"))?;
        lib(save_weights(&net.inner, path_arg(path)?))
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `net` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ls_network_free(net: *mut LsNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Number of trainable parameters.
///
/// # Safety
/// `net` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ls_network_param_count(net: *const LsNetwork, out: *mut usize) -> LsStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("network"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = net.inner.param_count();
        Ok(())
    })
}

/// Seven-plane preprocessing (R, G, B, H, S, V, L) of an RGB image into
/// `out`, which holds `7 * out_height * out_width` floats.
///
/// # Safety
/// `rgb` must hold `3 * width * height` bytes and `out` the stated floats.
#[no_mangle]
pub unsafe extern "C" fn ls_preprocess(
    rgb: *const u8,
    width: usize,
    height: usize,
    out_height: usize,
    out_width: usize,
    out: *mut f32,
) -> LsStatus {
    guard(|| {
        let n = area(height, width)?;
        let m = area(out_height, out_width)?;
        let pixels = slice_arg(rgb, n * 3, "rgb")?;
        let dst = slice_mut_arg(out, m * 7, "out")?;
        let raw = lib(RawImage::new(width, height, pixels.to_vec()))?;
        dst.copy_from_slice(lib(preprocess_to(&raw, out_height, out_width))?.data());
        Ok(())
    })
}

/// Mean lesion probability of `count` networks for an RGB image, written
/// at the image's own resolution. The networks run at
/// `input_height x input_width` (multiples of 16).
///
/// # Safety
/// `nets` must point to `count` live handles, `rgb` to `3 * width *
/// height` bytes and `out` to `width * height` floats.
#[no_mangle]
pub unsafe extern "C" fn ls_predict_probability(
    nets: *const *const LsNetwork,
    count: usize,
    rgb: *const u8,
    width: usize,
    height: usize,
    input_height: usize,
    input_width: usize,
    out: *mut f32,
) -> LsStatus {
    guard(|| {
        let n = area(height, width)?;
        let handles = slice_arg(nets, count, "nets")?;
        if handles.is_empty() {
            return Err(invalid("at least one network is required"));
        }
        let networks = handles
            .iter()
            .map(|&h| h.as_ref().map(|h| &h.inner).ok_or_else(|| null("network")))
            .collect::<Result<Vec<_>, _>>()?;
        let pixels = slice_arg(rgb, n * 3, "rgb")?;
        let dst = slice_mut_arg(out, n, "out")?;
        let raw = lib(RawImage::new(width, height, pixels.to_vec()))?;
        let map = lib(predict_probability(&networks, &raw, input_height, input_width))?;
        dst.copy_from_slice(map.values());
        Ok(())
    })
}

/// Dual-threshold segmentation of a probability map into `out_mask`
/// (0 or 1 per pixel).
///
/// # Safety
/// `probs` must hold `height * width` floats in [0, 1] and `out_mask`
/// as many bytes.
#[no_mangle]
pub unsafe extern "C" fn ls_segment(
    probs: *const f32,
    height: usize,
    width: usize,
    th_high: f32,
    th_low: f32,
    out_mask: *mut u8,
) -> LsStatus {
    guard(|| {
        let n = area(height, width)?;
        if !(th_low > 0.0 && th_low <= th_high && th_high < 1.0) {
            return Err(invalid(format!(
                "thresholds must satisfy 0 < low <= high < 1, got {th_low}, {th_high}"
            )));
        }
        let map = lib(ProbabilityMap::new(
            height,
            width,
            slice_arg(probs, n, "probs")?.to_vec(),
        ))?;
        let dst = slice_mut_arg(out_mask, n, "out_mask")?;
        for (d, &b) in dst.iter_mut().zip(dual_threshold_segment(&map, th_high, th_low).data()) {
            *d = u8::from(b);
        }
        Ok(())
    })
}

/// Jaccard index of two masks (nonzero = foreground); 1 when both are empty.
///
/// # Safety
/// `a` and `b` must each hold `len` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ls_jaccard_index(a: *const u8, b: *const u8, len: usize, out: *mut f64) -> LsStatus {
    guard(|| {
        let to_mask = |s: &[u8]| lib(BinaryMask::new(1, len, s.iter().map(|&v| v != 0).collect()));
        let a = to_mask(slice_arg(a, len, "a")?)?;
        let b = to_mask(slice_arg(b, len, "b")?)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = lib(jaccard_index(&a, &b))?;
        Ok(())
    })
}
