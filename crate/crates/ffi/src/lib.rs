//! C interface to the restoration pipeline.
//!
//! Every fallible function returns a [`TlStatus`]; on failure the message is
//! available from [`tl_last_error`] on the same thread. Handles are opaque and
//! must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use turblucky::analysis::{psnr, ssim};
use turblucky::data::{load_sample, Image, Sample};
use turblucky::edem::{voxelize, VoxelConfig};
use turblucky::fusion::{egtm_restore, inverse_voxel_restore};
use turblucky::net::{count_params_flops, ModelParams, NetConfig};
use turblucky::Error;

/// Result codes; the non-zero values match the command line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TlStatus {
    Ok = 0,
    /// Null pointer, bad enum value or otherwise invalid argument.
    InvalidArgument = 1,
    Io = 2,
    Validation = 3,
    Numeric = 4,
    /// The library panicked; this indicates a bug.
    Internal = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TlMethod {
    Mean = 0,
    InverseVoxel = 1,
    Egtm = 2,
}

/// A loaded dataset sample.
pub struct TlSample(Sample);

/// A trained network.
pub struct TlModel(ModelParams);

/// A restored image, channel-last values in `[0, 1]`.
pub struct TlImage(Image);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let text = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn status_of(err: &Error) -> TlStatus {
    match err.exit_code() {
        1 => TlStatus::InvalidArgument,
        2 => TlStatus::Io,
        4 => TlStatus::Numeric,
        _ => TlStatus::Validation,
    }
}

fn invalid(message: &str) -> TlStatus {
    set_error(message.to_owned());
    TlStatus::InvalidArgument
}

/// Runs `f`, recording any error or panic message.
fn guard(f: impl FnOnce() -> Result<(), Error>) -> TlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TlStatus::Ok,
        Ok(Err(e)) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            TlStatus::Internal
        }
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, TlStatus> {
    if path.is_null() {
        return Err(invalid("path is null"));
    }
    match CStr::from_ptr(path).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => Err(invalid("path is not valid UTF-8")),
    }
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a `sample_<id>` directory.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tl_sample_load(dir: *const c_char, out: *mut *mut TlSample) -> TlStatus {
    if out.is_null() {
        return invalid("out is null");
    }
    *out = ptr::null_mut();
    let dir = match path_arg(dir) {
        Ok(p) => p,
        Err(s) => return s,
    };
    guard(|| {
        let sample = load_sample(&dir)?;
        *out = Box::into_raw(Box::new(TlSample(sample)));
        Ok(())
    })
}

/// # Safety
/// `sample` must come from [`tl_sample_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tl_sample_free(sample: *mut TlSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Image size, channel and frame counts, and number of events of a sample.
///
/// # Safety
/// `sample` must be a live handle; the out pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn tl_sample_info(
    sample: *const TlSample,
    width: *mut usize,
    height: *mut usize,
    channels: *mut usize,
    frames: *mut usize,
    events: *mut usize,
) -> TlStatus {
    let Some(TlSample(s)) = sample.as_ref() else {
        return invalid("sample is null");
    };
    let values = [
        (width, s.gt.width()),
        (height, s.gt.height()),
        (channels, s.gt.channels()),
        (frames, s.turbulent.len()),
        (events, s.events.len()),
    ];
    for (dst, v) in values {
        if !dst.is_null() {
            *dst = v;
        }
    }
    TlStatus::Ok
}

/// Writes the `bins x height x width` event voxel of a sample into `buffer`.
///
/// # Safety
/// `sample` must be a live handle and `buffer` must hold `len` floats.
#[no_mangle]
pub unsafe extern "C" fn tl_sample_voxelize(
    sample: *const TlSample,
    bins: usize,
    buffer: *mut f32,
    len: usize,
) -> TlStatus {
    let Some(TlSample(s)) = sample.as_ref() else {
        return invalid("sample is null");
    };
    if buffer.is_null() {
        return invalid("buffer is null");
    }
    let needed = bins.saturating_mul(s.gt.width() * s.gt.height());
    if len != needed {
        set_error(format!("buffer holds {len} floats, voxel needs {needed}"));
        return TlStatus::InvalidArgument;
    }
    guard(|| {
        let voxel = voxelize(&s.events, &VoxelConfig::new(bins, s.events.duration_us())?)?;
        std::slice::from_raw_parts_mut(buffer, len).copy_from_slice(voxel.data());
        Ok(())
    })
}

/// Loads an EGTM model file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tl_model_load(path: *const c_char, out: *mut *mut TlModel) -> TlStatus {
    if out.is_null() {
        return invalid("out is null");
    }
    *out = ptr::null_mut();
    let path = match path_arg(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    guard(|| {
        let model = ModelParams::load(&path)?;
        *out = Box::into_raw(Box::new(TlModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`tl_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tl_model_free(model: *mut TlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of scalar parameters of a loaded model.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tl_model_param_count(model: *const TlModel, out: *mut usize) -> TlStatus {
    match (model.as_ref(), out.is_null()) {
        (Some(TlModel(m)), false) => {
            *out = m.param_count();
            TlStatus::Ok
        }
        _ => invalid("model or out is null"),
    }
}

/// Analytic parameter and FLOP counts for `frames` frames of `channels`
/// channels at `width x height`.
///
/// # Safety
/// `params` and `flops` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tl_count_params_flops(
    frames: usize,
    channels: usize,
    width: usize,
    height: usize,
    params: *mut usize,
    flops: *mut u64,
) -> TlStatus {
    if params.is_null() || flops.is_null() {
        return invalid("output pointer is null");
    }
    guard(|| {
        let cost = count_params_flops(NetConfig::for_frames(frames, channels), height, width)?;
        *params = cost.params;
        *flops = cost.flops;
        Ok(())
    })
}

/// Restores a sample. `model` is required for [`TlMethod::Egtm`] and ignored otherwise.
///
/// # Safety
/// `sample` must be a live handle, `model` a live handle or null, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tl_restore(
    sample: *const TlSample,
    method: TlMethod,
    model: *const TlModel,
    out: *mut *mut TlImage,
) -> TlStatus {
    if out.is_null() {
        return invalid("out is null");
    }
    *out = ptr::null_mut();
    let Some(TlSample(s)) = sample.as_ref() else {
        return invalid("sample is null");
    };
    let model = model.as_ref().map(|m| &m.0);
    guard(|| {
        let image = match method {
            TlMethod::Mean => s.turbulent.temporal_mean(),
            TlMethod::InverseVoxel => inverse_voxel_restore(&s.turbulent, &s.events)?,
            TlMethod::Egtm => {
                let m = model.ok_or_else(|| Error::Usage("egtm needs a model".into()))?;
                egtm_restore(&s.turbulent, &s.events, m)?
            }
        };
        *out = Box::into_raw(Box::new(TlImage(image)));
        Ok(())
    })
}

/// # Safety
/// `image` must come from [`tl_restore`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tl_image_free(image: *mut TlImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

/// Copies the channel-last pixel values into `buffer`, which must hold exactly
/// `width * height * channels` doubles.
///
/// # Safety
/// `image` must be a live handle and `buffer` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tl_image_copy(image: *const TlImage, buffer: *mut f64, len: usize) -> TlStatus {
    let Some(TlImage(img)) = image.as_ref() else {
        return invalid("image is null");
    };
    if buffer.is_null() || len != img.data().len() {
        set_error(format!("buffer must hold {} doubles", img.data().len()));
        return TlStatus::InvalidArgument;
    }
    std::slice::from_raw_parts_mut(buffer, len).copy_from_slice(img.data());
    TlStatus::Ok
}

/// # Safety
/// `image` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tl_image_save_png(image: *const TlImage, path: *const c_char) -> TlStatus {
    let Some(TlImage(img)) = image.as_ref() else {
        return invalid("image is null");
    };
    let path = match path_arg(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    guard(|| img.save_png(&path))
}

/// PSNR (dB, `INFINITY` for an exact match) and SSIM of `image` against the
/// sample's clean reference.
///
/// # Safety
/// `image` and `sample` must be live handles; `psnr_out` and `ssim_out` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tl_score(
    image: *const TlImage,
    sample: *const TlSample,
    psnr_out: *mut f64,
    ssim_out: *mut f64,
) -> TlStatus {
    let (Some(TlImage(img)), Some(TlSample(s))) = (image.as_ref(), sample.as_ref()) else {
        return invalid("image or sample is null");
    };
    if psnr_out.is_null() || ssim_out.is_null() {
        return invalid("output pointer is null");
    }
    guard(|| {
        *psnr_out = psnr(img, &s.gt)?;
        *ssim_out = ssim(img, &s.gt)?;
        Ok(())
    })
}
