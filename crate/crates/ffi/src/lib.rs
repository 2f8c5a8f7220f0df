//! C ABI over the pacinv toolkit.
//!
//! Models and datasets cross the boundary as opaque handles. Every fallible
//! call returns a [`PacinvStatus`]; the message of the most recent failure on
//! the calling thread is available through [`pacinv_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DVector;
use pacinv::bounds::{self, BudgetKind};
use pacinv::config::parse_sem_str;
use pacinv::experiment::rho_statistic;
use pacinv::invariance::{self, Head, Representation};
use pacinv::{apply, Dataset, Error, Intervention, SemModel};

/// Result codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacinvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Cycle = 4,
    TargetIntervened = 5,
    IndexOutOfRange = 6,
    DimensionMismatch = 7,
    InsufficientSamples = 8,
    ZeroHead = 9,
    Validation = 10,
    Io = 11,
    Panic = 12,
}

/// Opaque linear SEM.
pub struct PacinvSem {
    inner: SemModel,
}

/// Opaque sampled dataset.
pub struct PacinvDataset {
    inner: Dataset,
}

/// Selects the interventional budget formula.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacinvBudgetKind {
    HardK = 0,
    SoftKDegreeD = 1,
    General = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> PacinvStatus {
    match err.root() {
        Error::CycleDetected => PacinvStatus::Cycle,
        Error::TargetIntervened(_) => PacinvStatus::TargetIntervened,
        Error::IndexOutOfRange { .. } => PacinvStatus::IndexOutOfRange,
        Error::DimensionMismatch(_) => PacinvStatus::DimensionMismatch,
        Error::InsufficientSamples { .. } | Error::EmptyBin { .. } => {
            PacinvStatus::InsufficientSamples
        }
        Error::ZeroHead | Error::ZeroMeanHead => PacinvStatus::ZeroHead,
        Error::Parse { .. } => PacinvStatus::Parse,
        Error::Io(_) => PacinvStatus::Io,
        Error::Validation(_) => PacinvStatus::Validation,
        _ => PacinvStatus::InvalidArgument,
    }
}

struct Fail(PacinvStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PacinvStatus::NullPointer, format!("{what} is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> PacinvStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => PacinvStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_last_error(msg);
            code
        }
        Err(_) => {
            set_last_error("panic inside pacinv".into());
            PacinvStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn sem_ref<'a>(sem: *const PacinvSem) -> Result<&'a SemModel, Fail> {
    sem.as_ref().map(|s| &s.inner).ok_or_else(|| null("sem"))
}

unsafe fn data_ref<'a>(data: *const PacinvDataset) -> Result<&'a Dataset, Fail> {
    data.as_ref().map(|d| &d.inner).ok_or_else(|| null("dataset"))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn pair(
    n: usize,
    phi: *const f64,
    head: *const f64,
) -> Result<(Representation, Head), Fail> {
    let phi = Representation::from_slice(slice(phi, n, "phi")?)?;
    let head = Head::from_slice(slice(head, n, "head")?)?;
    Ok((phi, head))
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pacinv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a SEM from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out_sem` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn pacinv_sem_from_toml(
    toml: *const c_char,
    out_sem: *mut *mut PacinvSem,
) -> PacinvStatus {
    guard(|| {
        let slot = out(out_sem, "out_sem")?;
        if toml.is_null() {
            return Err(null("toml"));
        }
        let text = CStr::from_ptr(toml)
            .to_str()
            .map_err(|e| Fail(PacinvStatus::InvalidArgument, e.to_string()))?;
        let inner = parse_sem_str(text)?;
        *slot = Box::into_raw(Box::new(PacinvSem { inner }));
        Ok(())
    })
}

/// # Safety
/// `sem` must be null or a handle returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn pacinv_sem_free(sem: *mut PacinvSem) {
    if !sem.is_null() {
        drop(Box::from_raw(sem));
    }
}

/// Number of covariates, or 0 for a null handle.
///
/// # Safety
/// `sem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pacinv_sem_num_covariates(sem: *const PacinvSem) -> usize {
    sem.as_ref().map_or(0, |s| s.inner.num_covariates())
}

/// Applies a hard intervention fixing `vars[i]` to `values[i]`.
///
/// # Safety
/// `vars` and `values` must hold `len` elements; `out_sem` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pacinv_sem_apply_hard(
    sem: *const PacinvSem,
    vars: *const usize,
    values: *const f64,
    len: usize,
    out_sem: *mut *mut PacinvSem,
) -> PacinvStatus {
    guard(|| {
        let base = sem_ref(sem)?;
        let slot = out(out_sem, "out_sem")?;
        let vars = slice(vars, len, "vars")?;
        let values = slice(values, len, "values")?;
        let iv = Intervention::hard_only(vars.iter().copied().zip(values.iter().copied()));
        let inner = apply(base, &iv)?;
        *slot = Box::into_raw(Box::new(PacinvSem { inner }));
        Ok(())
    })
}

/// Population gradient of the invariance penalty for a diagonal
/// representation and head, both of length `n`. Writes `n` values to `grad`.
///
/// # Safety
/// `phi`, `head` and `grad` must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn pacinv_population_gradient(
    sem: *const PacinvSem,
    phi: *const f64,
    head: *const f64,
    n: usize,
    grad: *mut f64,
) -> PacinvStatus {
    guard(|| {
        let sem = sem_ref(sem)?;
        let (phi, head) = pair(n, phi, head)?;
        let g = invariance::population_gradient(sem, &phi, &head)?;
        if grad.is_null() {
            return Err(null("grad"));
        }
        std::slice::from_raw_parts_mut(grad, n).copy_from_slice(g.as_slice());
        Ok(())
    })
}

/// # Safety
/// `phi` and `head` must hold `n` elements; `out_flag` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pacinv_is_eps_invariant(
    sem: *const PacinvSem,
    phi: *const f64,
    head: *const f64,
    n: usize,
    eps: f64,
    out_flag: *mut bool,
) -> PacinvStatus {
    guard(|| {
        let sem = sem_ref(sem)?;
        let slot = out(out_flag, "out_flag")?;
        let (phi, head) = pair(n, phi, head)?;
        *slot = invariance::is_eps_invariant(sem, &phi, &head, eps)?;
        Ok(())
    })
}

/// Draws `n_samples` rows from the model.
///
/// # Safety
/// `out_data` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pacinv_sample_dataset(
    sem: *const PacinvSem,
    n_samples: usize,
    seed: u64,
    out_data: *mut *mut PacinvDataset,
) -> PacinvStatus {
    guard(|| {
        let sem = sem_ref(sem)?;
        let slot = out(out_data, "out_data")?;
        let inner = sem.sample_dataset(n_samples, seed)?;
        *slot = Box::into_raw(Box::new(PacinvDataset { inner }));
        Ok(())
    })
}

/// # Safety
/// `data` must be null or a handle returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn pacinv_dataset_free(data: *mut PacinvDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// # Safety
/// `data` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pacinv_dataset_rows(data: *const PacinvDataset) -> usize {
    data.as_ref().map_or(0, |d| d.inner.n_rows())
}

/// Number of columns including the target.
///
/// # Safety
/// `data` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pacinv_dataset_vars(data: *const PacinvDataset) -> usize {
    data.as_ref().map_or(0, |d| d.inner.num_vars())
}

/// Copies the samples in row-major order into `buf`, which must hold
/// `rows * vars` values.
///
/// # Safety
/// `buf` must hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn pacinv_dataset_copy(
    data: *const PacinvDataset,
    buf: *mut f64,
    len: usize,
) -> PacinvStatus {
    guard(|| {
        let data = data_ref(data)?;
        let x = data.samples();
        if len != x.len() {
            return Err(Error::DimensionMismatch(format!(
                "buffer holds {len} values, dataset has {}",
                x.len()
            ))
            .into());
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        let dst = std::slice::from_raw_parts_mut(buf, len);
        let cols = x.ncols();
        for (r, row) in x.row_iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                dst[r * cols + c] = *v;
            }
        }
        Ok(())
    })
}

/// Least-squares head on the representation `phi` (length `n`).
///
/// # Safety
/// `phi` and `head` must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn pacinv_least_squares_head(
    data: *const PacinvDataset,
    phi: *const f64,
    n: usize,
    head: *mut f64,
) -> PacinvStatus {
    guard(|| {
        let data = data_ref(data)?;
        let phi = Representation::from_slice(slice(phi, n, "phi")?)?;
        let f = invariance::least_squares_head(data, &phi)?;
        if head.is_null() {
            return Err(null("head"));
        }
        std::slice::from_raw_parts_mut(head, n).copy_from_slice(f.coeffs().as_slice());
        Ok(())
    })
}

/// Sample-split estimate of the gradient norm.
///
/// # Safety
/// `phi` and `head` must hold `n` elements; `out_norm` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pacinv_split_gradient_norm(
    data: *const PacinvDataset,
    phi: *const f64,
    head: *const f64,
    n: usize,
    out_norm: *mut f64,
) -> PacinvStatus {
    guard(|| {
        let data = data_ref(data)?;
        let slot = out(out_norm, "out_norm")?;
        let (phi, head) = pair(n, phi, head)?;
        *slot = invariance::empirical_gradient_norm_split(data, &phi, &head)?;
        Ok(())
    })
}

/// Number of training interventions. `n`, `k` and `d` are read according to
/// `kind`.
///
/// # Safety
/// `out_m` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn pacinv_interventional_complexity(
    kind: PacinvBudgetKind,
    n: u64,
    k: u64,
    d: u64,
    delta: f64,
    delta_prime: f64,
    c: f64,
    out_m: *mut u64,
) -> PacinvStatus {
    guard(|| {
        let slot = out(out_m, "out_m")?;
        let kind = match kind {
            PacinvBudgetKind::HardK => BudgetKind::HardK,
            PacinvBudgetKind::SoftKDegreeD => BudgetKind::SoftKDegreeD,
            PacinvBudgetKind::General => BudgetKind::General,
        };
        *slot = bounds::interventional_complexity(kind, n, k, d, delta, delta_prime, c)?;
        Ok(())
    })
}

/// Samples per dataset.
///
/// # Safety
/// `out_n` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pacinv_sample_complexity(
    n: u64,
    l: f64,
    eps: f64,
    delta: f64,
    m: u64,
    c: f64,
    out_n: *mut u64,
) -> PacinvStatus {
    guard(|| {
        let slot = out(out_n, "out_n")?;
        *slot = bounds::sample_complexity(n, l, eps, delta, m, c)?;
        Ok(())
    })
}

/// Log of the covering number of diagonal representations.
///
/// # Safety
/// `out_log` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pacinv_covering_number_log(
    n: u64,
    eps: f64,
    out_log: *mut f64,
) -> PacinvStatus {
    guard(|| {
        let slot = out(out_log, "out_log")?;
        *slot = bounds::covering_number_log(n, eps)?;
        Ok(())
    })
}

/// Spread statistic over `count` heads of length `n`, stored row by row in
/// `heads`.
///
/// # Safety
/// `heads` must hold `count * n` elements; `out_rho` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pacinv_rho_statistic(
    heads: *const f64,
    count: usize,
    n: usize,
    out_rho: *mut f64,
) -> PacinvStatus {
    guard(|| {
        let slot = out(out_rho, "out_rho")?;
        let total = count.checked_mul(n).ok_or_else(|| {
            Fail(PacinvStatus::InvalidArgument, "count * n overflows".into())
        })?;
        let flat = slice(heads, total, "heads")?;
        let hs: Vec<DVector<f64>> = flat
            .chunks(n.max(1))
            .take(count)
            .map(DVector::from_row_slice)
            .collect();
        *slot = rho_statistic(&hs)?;
        Ok(())
    })
}
