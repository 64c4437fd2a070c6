//! C ABI for `kplab`.
//!
//! Mixtures and contraction pairs live behind opaque handles created by
//! `*_new` and released by `*_free`. Every fallible function returns a
//! [`KplabStatus`]; on failure a message is available from
//! [`kplab_last_error_message`] on the same thread until the next failing
//! call. Panics are caught at the boundary and reported as
//! `KPLAB_STATUS_PANIC`.
//!
//! Points are passed as `k·dim` doubles in row-major order. Weight arrays
//! may be `NULL` for uniform weights.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use kplab::capacity::{blahut_arimoto, BaOptions};
use kplab::geovol::{union_volume_mc, BallUnion};
use kplab::kpverify::{verify_kp_entropy, Verdict};
use kplab::{
    make_contraction_pair, ContractionPair, Error, EstimatorPolicy, GaussianMixture,
    PointConfiguration, PolicyMode,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KplabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotAContraction = 4,
    /// The requested estimator cannot handle the input (dimension, budget).
    Unsupported = 5,
    Infeasible = 6,
    Internal = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KplabPolicyMode {
    Auto = 0,
    Quadrature = 1,
    MonteCarlo = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KplabVerdict {
    Holds = 0,
    HoldsWithinNoise = 1,
    Violation = 2,
    Skipped = 3,
}

/// Estimator settings. `nodes_per_axis = 0` keeps the default grid.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct KplabPolicy {
    pub mode: KplabPolicyMode,
    pub samples: u64,
    pub seed: u64,
    pub nodes_per_axis: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct KplabGap {
    pub h_source: f64,
    pub h_target: f64,
    pub gap: f64,
    pub std_err: f64,
    pub verdict: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct KplabCapacity {
    pub capacity: f64,
    pub lower: f64,
    pub upper: f64,
    pub iterations: u64,
    pub converged: bool,
}

/// A Gaussian mixture `Σ w_i N(x_i, sI)`.
pub struct KplabMixture(GaussianMixture);

/// A certified contraction pair.
pub struct KplabPair(ContractionPair);

struct Failure(KplabStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::DimensionMismatch { .. } => KplabStatus::DimensionMismatch,
            Error::NotAContraction { .. } | Error::InconsistentCollapse { .. } => {
                KplabStatus::NotAContraction
            }
            Error::BudgetExceeded { .. } | Error::UnsupportedDimension(_) => {
                KplabStatus::Unsupported
            }
            Error::NotInRelativeInterior { .. } | Error::Infeasible(_) => KplabStatus::Infeasible,
            Error::Io(_) => KplabStatus::Internal,
            _ => KplabStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard<F: FnOnce() -> FfiResult<()>>(f: F) -> KplabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KplabStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("panic: {msg}"));
            KplabStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(KplabStatus::NullPointer, format!("{what} is NULL"))
}

/// # Safety
///
/// `p` must be NULL with `len == 0`, or point to `len` readable doubles.
unsafe fn doubles<'a>(p: *const f64, len: usize, what: &str) -> FfiResult<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
///
/// As [`doubles`] for the coordinates; `weights` is NULL or has `k` entries.
unsafe fn configuration(
    dim: usize,
    k: usize,
    coords: *const f64,
    weights: *const f64,
) -> FfiResult<PointConfiguration> {
    let n = dim
        .checked_mul(k)
        .ok_or_else(|| Failure(KplabStatus::InvalidArgument, "size overflow".into()))?;
    let c = doubles(coords, n, "coords")?.to_vec();
    let w = if weights.is_null() {
        vec![1.0 / k.max(1) as f64; k]
    } else {
        doubles(weights, k, "weights")?.to_vec()
    };
    Ok(PointConfiguration::from_flat(dim, c, w)?)
}

fn policy_from(p: *const KplabPolicy) -> EstimatorPolicy {
    // SAFETY: callers pass NULL or a valid pointer, as documented on each
    // entry point.
    let Some(p) = (unsafe { p.as_ref() }) else {
        return EstimatorPolicy::default();
    };
    let mode = match p.mode {
        KplabPolicyMode::Auto => PolicyMode::Auto,
        KplabPolicyMode::Quadrature => PolicyMode::Quadrature,
        KplabPolicyMode::MonteCarlo => PolicyMode::MonteCarlo,
    };
    let mut out = EstimatorPolicy::default()
        .with_mode(mode)
        .with_samples(p.samples as usize)
        .with_seed(p.seed);
    if p.nodes_per_axis > 0 {
        out = out.with_nodes(p.nodes_per_axis as usize);
    }
    out
}

fn write<T>(out: *mut T, value: T, what: &str) -> FfiResult<()> {
    if out.is_null() {
        return Err(null(what));
    }
    // SAFETY: non-null, and the caller guarantees it is writable.
    unsafe { out.write(value) };
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn kplab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn kplab_status_string(status: KplabStatus) -> *const c_char {
    let s: &'static CStr = match status {
        KplabStatus::Ok => c"ok",
        KplabStatus::NullPointer => c"null pointer argument",
        KplabStatus::InvalidArgument => c"invalid argument",
        KplabStatus::DimensionMismatch => c"dimension mismatch",
        KplabStatus::NotAContraction => c"target is not a contraction of the source",
        KplabStatus::Unsupported => c"unsupported by the selected estimator",
        KplabStatus::Infeasible => c"infeasible",
        KplabStatus::Internal => c"internal error",
        KplabStatus::Panic => c"panic caught at the FFI boundary",
    };
    s.as_ptr()
}

/// Message of the last failure on this thread, or NULL. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn kplab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Defaults: automatic method choice, 100000 samples, seed 0.
#[no_mangle]
pub extern "C" fn kplab_policy_default() -> KplabPolicy {
    let p = EstimatorPolicy::default();
    KplabPolicy {
        mode: KplabPolicyMode::Auto,
        samples: p.samples as u64,
        seed: p.seed,
        nodes_per_axis: 0,
    }
}

/// Create the mixture `Σ w_i N(x_i, sI)` of `k` points in `R^dim`.
///
/// # Safety
///
/// `centers` points to `k·dim` doubles, `weights` is NULL or points to `k`
/// doubles, and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn kplab_mixture_new(
    dim: usize,
    k: usize,
    centers: *const f64,
    weights: *const f64,
    s: f64,
    out: *mut *mut KplabMixture,
) -> KplabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = configuration(dim, k, centers, weights)?;
        let m = GaussianMixture::isotropic(&cfg, s)?;
        write(out, Box::into_raw(Box::new(KplabMixture(m))), "out")
    })
}

/// Release a mixture; NULL is ignored.
///
/// # Safety
///
/// `m` is NULL or a handle from [`kplab_mixture_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kplab_mixture_free(m: *mut KplabMixture) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
///
/// `m` is a live handle or NULL (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn kplab_mixture_dim(m: *const KplabMixture) -> usize {
    m.as_ref().map_or(0, |m| m.0.dim())
}

/// `log f(x)` for `x` of length `len`.
///
/// # Safety
///
/// `m` is a live handle, `x` points to `len` doubles, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn kplab_mixture_log_density(
    m: *const KplabMixture,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> KplabStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("mixture"))?;
        let x = doubles(x, len, "x")?;
        write(out, m.0.log_density(x)?, "out")
    })
}

/// Rényi entropy `h_α` in nats; `alpha` may be `INFINITY`. `policy` may be
/// NULL for defaults; `std_err` may be NULL.
///
/// # Safety
///
/// `m` is a live handle; `policy` is NULL or valid; `value` is writable;
/// `std_err` is NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn kplab_mixture_renyi(
    m: *const KplabMixture,
    alpha: f64,
    policy: *const KplabPolicy,
    value: *mut f64,
    std_err: *mut f64,
) -> KplabStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("mixture"))?;
        let e = kplab::gaussmix::estimate_renyi(&m.0, alpha, &policy_from(policy))?;
        write(value, e.value, "value")?;
        if !std_err.is_null() {
            std_err.write(e.std_err);
        }
        Ok(())
    })
}

/// Certify `target` as a contraction of `source` (both `k` points in
/// `R^dim`) and create a pair handle.
///
/// # Safety
///
/// `source` and `target` point to `k·dim` doubles, `weights` is NULL or has
/// `k` entries, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn kplab_pair_new(
    dim: usize,
    k: usize,
    source: *const f64,
    target: *const f64,
    weights: *const f64,
    out: *mut *mut KplabPair,
) -> KplabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = configuration(dim, k, source, weights)?;
        let t = configuration(dim, k, target, weights)?;
        let pair = make_contraction_pair(s, t)?;
        write(out, Box::into_raw(Box::new(KplabPair(pair))), "out")
    })
}

/// Release a pair; NULL is ignored.
///
/// # Safety
///
/// `p` is NULL or a handle from [`kplab_pair_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kplab_pair_free(p: *mut KplabPair) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Largest ratio `|T x_i − T x_j| / |x_i − x_j|` over distinct source points.
///
/// # Safety
///
/// `p` is a live handle and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn kplab_pair_lipschitz(p: *const KplabPair, out: *mut f64) -> KplabStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("pair"))?;
        write(out, p.0.lipschitz_bound(), "out")
    })
}

/// `h_α(X + √s Z) − h_α(T(X) + √s Z)` with its verdict.
///
/// # Safety
///
/// `p` is a live handle; `policy` is NULL or valid; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn kplab_kp_gap(
    p: *const KplabPair,
    alpha: f64,
    s: f64,
    policy: *const KplabPolicy,
    out: *mut KplabGap,
) -> KplabStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("pair"))?;
        let report = verify_kp_entropy(&p.0, &[alpha], &[s], &policy_from(policy))?;
        let r = &report.rows[0];
        let verdict = match r.verdict {
            Verdict::Holds => KplabVerdict::Holds,
            Verdict::HoldsWithinNoise => KplabVerdict::HoldsWithinNoise,
            Verdict::Violation => KplabVerdict::Violation,
            Verdict::Skipped => KplabVerdict::Skipped,
        };
        write(
            out,
            KplabGap {
                h_source: r.h_source,
                h_target: r.h_target,
                gap: r.gap,
                std_err: r.std_err,
                verdict: verdict as i32,
            },
            "out",
        )
    })
}

/// Blahut–Arimoto capacity of the channel `x ↦ x + √s Z` on `k` letters.
/// Optimal input weights are written to `weights_out` when it is not NULL.
///
/// # Safety
///
/// `alphabet` points to `k·dim` doubles; `weights_out` is NULL or has room
/// for `k` doubles; `policy` is NULL or valid; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn kplab_capacity(
    dim: usize,
    k: usize,
    alphabet: *const f64,
    s: f64,
    tol: f64,
    max_iter: u64,
    policy: *const KplabPolicy,
    weights_out: *mut f64,
    out: *mut KplabCapacity,
) -> KplabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = configuration(dim, k, alphabet, ptr::null())?;
        let opts = BaOptions {
            tol,
            max_iter: max_iter as usize,
            policy: policy_from(policy),
        };
        let r = blahut_arimoto(&cfg, s, &opts)?;
        if !weights_out.is_null() {
            std::slice::from_raw_parts_mut(weights_out, k).copy_from_slice(&r.weights);
        }
        write(
            out,
            KplabCapacity {
                capacity: r.capacity,
                lower: r.lower,
                upper: r.upper,
                iterations: r.history.len() as u64,
                converged: r.converged,
            },
            "out",
        )
    })
}

/// Monte Carlo volume of the union of radius-`r` balls around `k` centers.
///
/// # Safety
///
/// `centers` points to `k·dim` doubles; `volume` is writable; `std_err` is
/// NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn kplab_union_volume(
    dim: usize,
    k: usize,
    centers: *const f64,
    radius: f64,
    samples: u64,
    seed: u64,
    volume: *mut f64,
    std_err: *mut f64,
) -> KplabStatus {
    guard(|| {
        let n = dim
            .checked_mul(k)
            .ok_or_else(|| Failure(KplabStatus::InvalidArgument, "size overflow".into()))?;
        let c = doubles(centers, n, "centers")?.to_vec();
        let u = BallUnion::new(dim, c, radius)?;
        let e = union_volume_mc(&u, samples as usize, seed)?;
        write(volume, e.volume, "volume")?;
        if !std_err.is_null() {
            std_err.write(e.std_err);
        }
        Ok(())
    })
}
