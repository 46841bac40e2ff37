//! C ABI over `spd-emg`.
//!
//! Points and models are opaque heap handles owned by the caller and
//! released with the matching `*_free` function. Every entry point returns
//! an [`SpdStatus`]; on failure [`spd_last_error_message`] describes the
//! error for the calling thread. Matrices cross the boundary as row-major
//! `double` arrays of `dim * dim` entries.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use spd_emg::classify::{MdmModel, Model, SvmModel, SvmParams};
use spd_emg::linalg::Matrix;
use spd_emg::{
    cholesky, exp_map, frechet_mean, geodesic_distance, log_map, parallel_transport, reconstruct, CholeskyPoint,
    Error, LabeledManifoldSet, SpdMatrix, TangentVector,
};

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpdStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Invalid argument: shape, symmetry, configuration, model document, bad UTF-8.
    InvalidArgument = 2,
    /// Data error: not positive definite, malformed trial, I/O.
    DataError = 3,
    /// SVM training did not converge.
    NonConvergence = 4,
    /// Output buffer shorter than required.
    BufferTooSmall = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// A point of the Cholesky space (lower triangular, positive diagonal).
pub struct SpdPoint {
    inner: CholeskyPoint,
}

/// A trained MDM or SVM classifier.
pub struct SpdModel {
    inner: Model,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure {
    status: SpdStatus,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.exit_code() {
            2 => SpdStatus::InvalidArgument,
            4 => SpdStatus::NonConvergence,
            _ => SpdStatus::DataError,
        };
        Failure {
            status,
            message: e.to_string(),
        }
    }
}

fn fail(status: SpdStatus, message: impl Into<String>) -> Failure {
    Failure {
        status,
        message: message.into(),
    }
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SpdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SpdStatus::Ok
        }
        Ok(Err(failure)) => {
            set_error(&failure.message);
            failure.status
        }
        Err(_) => {
            set_error("internal panic");
            SpdStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(SpdStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(SpdStatus::NullPointer, format!("{name} is null")))
}

unsafe fn read_matrix(dim: usize, entries: *const f64) -> Result<Matrix, Failure> {
    if dim == 0 {
        return Err(fail(SpdStatus::InvalidArgument, "dim must be positive"));
    }
    if entries.is_null() {
        return Err(fail(SpdStatus::NullPointer, "entries is null"));
    }
    let slice = std::slice::from_raw_parts(entries, dim * dim);
    Ok(Matrix::from_row_slice(dim, dim, slice))
}

unsafe fn write_matrix(m: &Matrix, out: *mut f64, len: usize) -> Result<(), Failure> {
    let need = m.nrows() * m.ncols();
    if out.is_null() {
        return Err(fail(SpdStatus::NullPointer, "out is null"));
    }
    if len < need {
        return Err(fail(SpdStatus::BufferTooSmall, format!("need {need} entries, got {len}")));
    }
    let buf = std::slice::from_raw_parts_mut(out, need);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            buf[i * m.ncols() + j] = m[(i, j)];
        }
    }
    Ok(())
}

unsafe fn point_list(points: *const *const SpdPoint, n: usize) -> Result<Vec<CholeskyPoint>, Failure> {
    if n == 0 {
        return Err(fail(SpdStatus::InvalidArgument, "no points given"));
    }
    if points.is_null() {
        return Err(fail(SpdStatus::NullPointer, "points is null"));
    }
    std::slice::from_raw_parts(points, n)
        .iter()
        .enumerate()
        .map(|(i, &p)| deref(p, &format!("points[{i}]")).map(|p| p.inner.clone()))
        .collect()
}

fn boxed_point(p: CholeskyPoint) -> *mut SpdPoint {
    Box::into_raw(Box::new(SpdPoint { inner: p }))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn spd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn spd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Factorises a symmetric positive-definite `dim × dim` matrix.
///
/// # Safety
/// `entries` must point to `dim * dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spd_point_from_spd(dim: usize, entries: *const f64, out: *mut *mut SpdPoint) -> SpdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let p = SpdMatrix::new(read_matrix(dim, entries)?)?;
        *out = boxed_point(cholesky(&p)?);
        Ok(())
    })
}

/// Wraps a lower-triangular matrix with a positive diagonal.
///
/// # Safety
/// `entries` must point to `dim * dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spd_point_from_cholesky(
    dim: usize,
    entries: *const f64,
    out: *mut *mut SpdPoint,
) -> SpdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = boxed_point(CholeskyPoint::new(read_matrix(dim, entries)?)?);
        Ok(())
    })
}

/// Releases a point. Null is ignored.
///
/// # Safety
/// `point` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn spd_point_free(point: *mut SpdPoint) {
    if !point.is_null() {
        drop(Box::from_raw(point));
    }
}

/// # Safety
/// `point` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spd_point_dim(point: *const SpdPoint, out: *mut usize) -> SpdStatus {
    guard(|| {
        *out_ref(out, "out")? = deref(point, "point")?.inner.dim();
        Ok(())
    })
}

/// Copies the Cholesky factor `L` into `out` (row-major).
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn spd_point_cholesky(point: *const SpdPoint, out: *mut f64, len: usize) -> SpdStatus {
    guard(|| write_matrix(deref(point, "point")?.inner.entries(), out, len))
}

/// Copies `L·Lᵀ` into `out` (row-major).
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn spd_point_spd(point: *const SpdPoint, out: *mut f64, len: usize) -> SpdStatus {
    guard(|| write_matrix(reconstruct(&deref(point, "point")?.inner).entries(), out, len))
}

/// # Safety
/// `a`, `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spd_geodesic_distance(a: *const SpdPoint, b: *const SpdPoint, out: *mut f64) -> SpdStatus {
    guard(|| {
        let d = geodesic_distance(&deref(a, "a")?.inner, &deref(b, "b")?.inner)?;
        *out_ref(out, "out")? = d;
        Ok(())
    })
}

/// `exp(-gamma · d²)`.
///
/// # Safety
/// `a`, `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spd_kernel(a: *const SpdPoint, b: *const SpdPoint, gamma: f64, out: *mut f64) -> SpdStatus {
    guard(|| {
        let k = spd_emg::classify::kernel(&deref(a, "a")?.inner, &deref(b, "b")?.inner, gamma)?;
        *out_ref(out, "out")? = k;
        Ok(())
    })
}

/// # Safety
/// `points` must hold `n` live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spd_frechet_mean(
    points: *const *const SpdPoint,
    n: usize,
    out: *mut *mut SpdPoint,
) -> SpdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = boxed_point(frechet_mean(&point_list(points, n)?)?);
        Ok(())
    })
}

/// Tangent at `base` pointing to `target`, written as a lower-triangular
/// `dim × dim` matrix.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn spd_log_map(
    base: *const SpdPoint,
    target: *const SpdPoint,
    out: *mut f64,
    len: usize,
) -> SpdStatus {
    guard(|| {
        let v = log_map(&deref(base, "base")?.inner, &deref(target, "target")?.inner)?;
        write_matrix(v.entries(), out, len)
    })
}

/// # Safety
/// `tangent` must point to `dim * dim` doubles (lower triangular); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spd_exp_map(
    base: *const SpdPoint,
    tangent: *const f64,
    out: *mut *mut SpdPoint,
) -> SpdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let base = &deref(base, "base")?.inner;
        let v = TangentVector::new(base.clone(), read_matrix(base.dim(), tangent)?)?;
        *out = boxed_point(exp_map(base, &v)?);
        Ok(())
    })
}

/// Transports a tangent at `from` to the tangent space at `to`.
///
/// # Safety
/// `tangent` must point to `dim * dim` doubles; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn spd_parallel_transport(
    from: *const SpdPoint,
    to: *const SpdPoint,
    tangent: *const f64,
    out: *mut f64,
    len: usize,
) -> SpdStatus {
    guard(|| {
        let from = &deref(from, "from")?.inner;
        let to = &deref(to, "to")?.inner;
        let v = TangentVector::new(from.clone(), read_matrix(from.dim(), tangent)?)?;
        write_matrix(parallel_transport(&v, from, to)?.entries(), out, len)
    })
}

unsafe fn training_set(
    points: *const *const SpdPoint,
    labels: *const u32,
    n: usize,
) -> Result<LabeledManifoldSet, Failure> {
    let pts = point_list(points, n)?;
    if labels.is_null() {
        return Err(fail(SpdStatus::NullPointer, "labels is null"));
    }
    let labels = std::slice::from_raw_parts(labels, n).to_vec();
    Ok(LabeledManifoldSet::from_labeled(pts, labels)?)
}

fn boxed_model(m: Model) -> *mut SpdModel {
    Box::into_raw(Box::new(SpdModel { inner: m }))
}

/// Trains a minimum-distance-to-mean classifier.
///
/// # Safety
/// `points` and `labels` must hold `n` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spd_mdm_train(
    points: *const *const SpdPoint,
    labels: *const u32,
    n: usize,
    out: *mut *mut SpdModel,
) -> SpdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let set = training_set(points, labels, n)?;
        *out = boxed_model(Model::Mdm(MdmModel::train(&set)?));
        Ok(())
    })
}

/// Trains a one-vs-one geodesic-kernel SVM.
///
/// # Safety
/// `points` and `labels` must hold `n` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spd_svm_train(
    points: *const *const SpdPoint,
    labels: *const u32,
    n: usize,
    gamma: f64,
    c: f64,
    out: *mut *mut SpdModel,
) -> SpdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let set = training_set(points, labels, n)?;
        *out = boxed_model(Model::Svm(SvmModel::train(&set, &SvmParams::new(gamma, c))?));
        Ok(())
    })
}

/// # Safety
/// `model` and `point` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spd_model_predict(
    model: *const SpdModel,
    point: *const SpdPoint,
    out: *mut u32,
) -> SpdStatus {
    guard(|| {
        let label = deref(model, "model")?.inner.predict(&deref(point, "point")?.inner)?;
        *out_ref(out, "out")? = label;
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spd_model_dim(model: *const SpdModel, out: *mut usize) -> SpdStatus {
    guard(|| {
        *out_ref(out, "out")? = deref(model, "model")?.inner.dim();
        Ok(())
    })
}

/// Serialises a model; release the string with [`spd_string_free`].
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spd_model_to_json(model: *const SpdModel, out: *mut *mut c_char) -> SpdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let json = deref(model, "model")?.inner.to_json();
        *out = CString::new(json)
            .map_err(|_| fail(SpdStatus::DataError, "model JSON contains NUL"))?
            .into_raw();
        Ok(())
    })
}

unsafe fn read_str<'a>(s: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(fail(SpdStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(SpdStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spd_model_from_json(json: *const c_char, out: *mut *mut SpdModel) -> SpdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = boxed_model(Model::from_json(read_str(json, "json")?)?);
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn spd_model_save(model: *const SpdModel, path: *const c_char) -> SpdStatus {
    guard(|| {
        let model = deref(model, "model")?;
        Ok(model.inner.save(Path::new(read_str(path, "path")?))?)
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spd_model_load(path: *const c_char, out: *mut *mut SpdModel) -> SpdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = boxed_model(Model::load(Path::new(read_str(path, "path")?))?);
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn spd_model_free(model: *mut SpdModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn spd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
