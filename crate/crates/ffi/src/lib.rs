//! C interface to `lsfbound`.
//!
//! Every function returns an [`LsfbStatus`]; on failure a message is
//! available from [`lsfb_last_error_message`] on the same thread. Models are
//! opaque heap handles released with [`lsfb_model_free`]. No function unwinds
//! across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use lsfbound::bound::{
    distortion_rate, min_transparent_rate, quantization_coefficient, BoundConfig,
    CoefficientMode, LsdPolynomial, RateGrid, TransformMode, DEFAULT_LSD_COEFFS,
};
use lsfbound::dirichlet::SimplexData;
use lsfbound::dmm::{fit_em, DirichletMixture, EmConfig};
use lsfbound::lsf::{log_spectral_distortion, lpc_to_lsf, lsf_to_lpc, LsfVector, SpectrumGrid};
use lsfbound::signal::LpcFrame;
use lsfbound::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsfbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Format = 4,
    Io = 5,
    Parse = 6,
    Unstable = 7,
    Numeric = 8,
    InsufficientRate = 9,
    NotBracketed = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

/// Passing a value outside the listed variants is undefined behavior.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsfbCoefficientMode {
    GammaRatio = 0,
    Sphere = 1,
}

/// Passing a value outside the listed variants is undefined behavior.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsfbTransformMode {
    Isotropic = 0,
    Jacobian = 1,
}

/// Bound settings; obtain defaults from [`lsfb_bound_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LsfbBoundConfig {
    pub coefficient_mode: LsfbCoefficientMode,
    pub transform_mode: LsfbTransformMode,
    pub lsd_target_db: f64,
    pub rate_min: f64,
    pub rate_max: f64,
    pub rate_step: f64,
    pub poly: [f64; 4],
    pub poly_scale_exponent: i32,
    pub poly_mse_max: f64,
}

/// Opaque fitted or loaded mixture model.
pub struct LsfbModel {
    inner: DirichletMixture,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LsfbStatus {
    match e {
        Error::Domain(_) | Error::Channel { .. } | Error::EmptyOutput(_) | Error::Order { .. } => {
            LsfbStatus::Domain
        }
        Error::Format(_) => LsfbStatus::Format,
        Error::Io { .. } => LsfbStatus::Io,
        Error::Parse { .. } => LsfbStatus::Parse,
        Error::Unstable(_) | Error::DegenerateFrame(_) => LsfbStatus::Unstable,
        Error::Numeric(_) | Error::NonMonotone(_) => LsfbStatus::Numeric,
        Error::InsufficientRate { .. } => LsfbStatus::InsufficientRate,
        Error::NotBracketed { .. } => LsfbStatus::NotBracketed,
    }
}

struct Fail(LsfbStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(LsfbStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LsfbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LsfbStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".to_string());
            LsfbStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(LsfbStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn model_arg<'a>(p: *const LsfbModel) -> Result<&'a DirichletMixture, Fail> {
    p.as_ref().map(|m| &m.inner).ok_or_else(|| null("model"))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn emit_model(out: *mut *mut LsfbModel, inner: DirichletMixture) -> Result<(), Fail> {
    write_out(out, Box::into_raw(Box::new(LsfbModel { inner })), "out")
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lsfb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lsfb_model_load(path: *const c_char, out: *mut *mut LsfbModel) -> LsfbStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        emit_model(out, DirichletMixture::load(Path::new(path))?)
    })
}

/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lsfb_model_from_json(json: *const c_char, out: *mut *mut LsfbModel) -> LsfbStatus {
    guard(|| {
        let json = str_arg(json, "json")?;
        emit_model(out, DirichletMixture::from_json(json)?)
    })
}

/// Fits a mixture by EM to `n` ΔLSF rows of `k` coordinates stored
/// row-major, with default EM settings apart from `components` and `seed`.
///
/// # Safety
/// `data` must hold `n * k` values and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn lsfb_model_fit(
    data: *const f64,
    n: usize,
    k: usize,
    components: usize,
    seed: u64,
    out: *mut *mut LsfbModel,
) -> LsfbStatus {
    guard(|| {
        if k == 0 || n == 0 {
            return Err(Fail(LsfbStatus::InvalidArgument, "n and k must be positive".into()));
        }
        let len = n
            .checked_mul(k)
            .ok_or_else(|| Fail(LsfbStatus::InvalidArgument, "n * k overflows".into()))?;
        let values = slice_arg(data, len, "data")?;
        let rows: Vec<&[f64]> = values.chunks_exact(k).collect();
        let data = SimplexData::from_rows(&rows)?;
        let cfg = EmConfig {
            seed,
            ..EmConfig::with_components(components)
        };
        emit_model(out, fit_em(&data, &cfg)?.model)
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lsfb_model_free(model: *mut LsfbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lsfb_model_dim(model: *const LsfbModel, out: *mut usize) -> LsfbStatus {
    guard(|| write_out(out, model_arg(model)?.dim(), "out"))
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lsfb_model_num_components(model: *const LsfbModel, out: *mut usize) -> LsfbStatus {
    guard(|| write_out(out, model_arg(model)?.num_components(), "out"))
}

/// Serializes the model as JSON into `buf` (NUL-terminated). `needed`
/// receives the required size including the terminator, also when the
/// buffer is too small.
///
/// # Safety
/// `buf` must have room for `cap` bytes (it may be null when `cap` is 0).
#[no_mangle]
pub unsafe extern "C" fn lsfb_model_to_json(
    model: *const LsfbModel,
    buf: *mut c_char,
    cap: usize,
    needed: *mut usize,
) -> LsfbStatus {
    guard(|| {
        let text = model_arg(model)?.to_json();
        let size = text.len() + 1;
        if !needed.is_null() {
            needed.write(size);
        }
        if cap < size || buf.is_null() {
            return Err(Fail(LsfbStatus::BufferTooSmall, format!("need {size} bytes")));
        }
        ptr::copy_nonoverlapping(text.as_ptr().cast::<c_char>(), buf, text.len());
        buf.add(text.len()).write(0);
        Ok(())
    })
}

fn coefficient_mode(m: LsfbCoefficientMode) -> CoefficientMode {
    match m {
        LsfbCoefficientMode::GammaRatio => CoefficientMode::GammaRatio,
        LsfbCoefficientMode::Sphere => CoefficientMode::SphereBound,
    }
}

fn transform_mode(m: LsfbTransformMode) -> TransformMode {
    match m {
        LsfbTransformMode::Isotropic => TransformMode::IsotropicCell,
        LsfbTransformMode::Jacobian => TransformMode::JacobianOnly,
    }
}

#[no_mangle]
pub extern "C" fn lsfb_bound_config_default() -> LsfbBoundConfig {
    let grid = RateGrid::default();
    LsfbBoundConfig {
        coefficient_mode: LsfbCoefficientMode::GammaRatio,
        transform_mode: LsfbTransformMode::Isotropic,
        lsd_target_db: 1.0,
        rate_min: grid.min,
        rate_max: grid.max,
        rate_step: grid.step,
        poly: DEFAULT_LSD_COEFFS,
        poly_scale_exponent: 5,
        poly_mse_max: 0.01,
    }
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lsfb_quantization_coefficient(
    k: usize,
    mode: LsfbCoefficientMode,
    out: *mut f64,
) -> LsfbStatus {
    guard(|| write_out(out, quantization_coefficient(k, coefficient_mode(mode))?, "out"))
}

/// Per-dimension ΔLSF-domain MSE at `rate` bits per vector.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lsfb_distortion_rate(
    model: *const LsfbModel,
    rate: f64,
    mode: LsfbCoefficientMode,
    out: *mut f64,
) -> LsfbStatus {
    guard(|| {
        let d = distortion_rate(model_arg(model)?, rate, coefficient_mode(mode))?;
        write_out(out, d, "out")
    })
}

/// # Safety
/// `model` must be a live handle, `cfg` readable and both outputs writable.
#[no_mangle]
pub unsafe extern "C" fn lsfb_min_transparent_rate(
    model: *const LsfbModel,
    cfg: *const LsfbBoundConfig,
    out_rate: *mut f64,
    out_ceil: *mut u64,
) -> LsfbStatus {
    guard(|| {
        let model = model_arg(model)?;
        let c = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let poly = LsdPolynomial::new(c.poly, c.poly_scale_exponent, c.poly_mse_max)?;
        let bound = BoundConfig {
            coefficient_mode: coefficient_mode(c.coefficient_mode),
            transform_mode: transform_mode(c.transform_mode),
            lsd_target_db: c.lsd_target_db,
            rate_grid: RateGrid {
                min: c.rate_min,
                max: c.rate_max,
                step: c.rate_step,
            },
        };
        let r = min_transparent_rate(model, &bound, &poly)?;
        write_out(out_rate, r.rate, "out_rate")?;
        write_out(out_ceil, r.rate_ceil, "out_ceil")
    })
}

/// LPC `a_1..a_K` (K even) to ascending LSFs in radians.
///
/// # Safety
/// `a` and `out_lsf` must each hold `k` values.
#[no_mangle]
pub unsafe extern "C" fn lsfb_lpc_to_lsf(a: *const f64, k: usize, out_lsf: *mut f64) -> LsfbStatus {
    guard(|| {
        let a = slice_arg(a, k, "a")?;
        if out_lsf.is_null() {
            return Err(null("out_lsf"));
        }
        let lsf = lpc_to_lsf(&LpcFrame::from_coefficients(a.to_vec())?)?;
        ptr::copy_nonoverlapping(lsf.values().as_ptr(), out_lsf, k);
        Ok(())
    })
}

/// # Safety
/// `lsf` and `out_a` must each hold `k` values.
#[no_mangle]
pub unsafe extern "C" fn lsfb_lsf_to_lpc(lsf: *const f64, k: usize, out_a: *mut f64) -> LsfbStatus {
    guard(|| {
        let lsf = slice_arg(lsf, k, "lsf")?;
        if out_a.is_null() {
            return Err(null("out_a"));
        }
        let frame = lsf_to_lpc(&LsfVector::new(lsf.to_vec())?)?;
        ptr::copy_nonoverlapping(frame.coefficients().as_ptr(), out_a, k);
        Ok(())
    })
}

/// RMS log spectral distortion in dB between two order-`k` filters.
///
/// # Safety
/// `a` and `a_hat` must each hold `k` values and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn lsfb_log_spectral_distortion(
    a: *const f64,
    a_hat: *const f64,
    k: usize,
    num_points: usize,
    sample_rate_hz: u32,
    out: *mut f64,
) -> LsfbStatus {
    guard(|| {
        let fa = LpcFrame::from_coefficients(slice_arg(a, k, "a")?.to_vec())?;
        let fb = LpcFrame::from_coefficients(slice_arg(a_hat, k, "a_hat")?.to_vec())?;
        let grid = SpectrumGrid {
            num_points,
            sample_rate_hz,
        };
        write_out(out, log_spectral_distortion(&fa, &fb, &grid)?, "out")
    })
}
