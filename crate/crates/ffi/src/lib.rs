//! C ABI over the hullforge core.
//!
//! Every function returns an [`HfStatus`]; on failure the message is kept per
//! thread and read with [`hf_last_error`]. Handles are opaque and must be
//! released with their `_free` function. Strings returned to the caller are
//! released with [`hf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use num_complex::Complex64;

use hullforge::exact::{parse_rational, to_f64};
use hullforge::geometry::{ArcSpec, ComplexPoint, Hole, PerforatedDisc};
use hullforge::harmonic_measure::{estimate, exact_annulus, TargetSet, WalkConfig};
use hullforge::pipeline::{assemble_counterexample, write_bundle, RunConfig};
use hullforge::series::certify::{default_threshold, radius_witness};
use hullforge::series::LacunarySeries;
use hullforge::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    VerificationFailed = 3,
    Internal = 4,
    Panic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HfStatus {
    match e {
        Error::WitnessNotFound { .. } | Error::StaleManifest(_) => HfStatus::VerificationFailed,
        e if e.is_config() => HfStatus::InvalidArgument,
        Error::Precondition(_) | Error::Bundle(_) => HfStatus::InvalidArgument,
        _ => HfStatus::Internal,
    }
}

fn fail(status: HfStatus, msg: impl Into<String>) -> HfStatus {
    set_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), HfStatus>) -> HfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HfStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(HfStatus::Panic, "panic inside hullforge"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, HfStatus>;
}

impl<T> OrStatus<T> for hullforge::Result<T> {
    fn or_status(self) -> Result<T, HfStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, HfStatus> {
    if p.is_null() {
        return Err(fail(HfStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(HfStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, HfStatus> {
    // SAFETY: non-null pointers are required by the caller contract to be valid for writes.
    unsafe { p.as_mut() }.ok_or_else(|| fail(HfStatus::NullPointer, format!("{name} is null")))
}

/// Message of the last failed call on this thread, or NULL. Valid until the next call.
#[no_mangle]
pub extern "C" fn hf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn hf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Opaque lacunary series Σ ε_j / (r_j^{2^j} − z^{2^j}).
pub struct HfLacunary {
    inner: LacunarySeries,
}

/// Builds a series from `n` ring weights given as exact rationals ("1/10", "3").
///
/// # Safety
/// `eps` must point to `n` valid NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hf_lacunary_new(eps: *const *const c_char, n: usize, out: *mut *mut HfLacunary) -> HfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        if eps.is_null() {
            return Err(fail(HfStatus::NullPointer, "eps is null"));
        }
        let mut v = Vec::with_capacity(n);
        for i in 0..n {
            v.push(parse_rational(str_arg(*eps.add(i), "eps[i]")?).or_status()?);
        }
        let inner = LacunarySeries::new(v).or_status()?;
        *out = Box::into_raw(Box::new(HfLacunary { inner }));
        Ok(())
    })
}

/// # Safety
/// `h` must be NULL or a handle from [`hf_lacunary_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hf_lacunary_free(h: *mut HfLacunary) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Taylor coefficient d_k, exactly as "p/q" (free with [`hf_string_free`]) and as a double.
///
/// # Safety
/// `h` must be a live handle; `exact` may be NULL; `approx` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn hf_lacunary_coefficient(
    h: *const HfLacunary,
    k: u64,
    exact: *mut *mut c_char,
    approx: *mut f64,
) -> HfStatus {
    guard(|| {
        let s = h.as_ref().ok_or_else(|| fail(HfStatus::NullPointer, "handle is null"))?;
        let d = s.inner.coefficient(k);
        if let Some(a) = approx.as_mut() {
            *a = to_f64(&d);
        }
        if let Some(e) = exact.as_mut() {
            *e = CString::new(d.to_string()).expect("digits only").into_raw();
        }
        Ok(())
    })
}

/// f(z) in double precision.
///
/// # Safety
/// `h` must be a live handle; `re_out` and `im_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hf_lacunary_eval(h: *const HfLacunary, re: f64, im: f64, re_out: *mut f64, im_out: *mut f64) -> HfStatus {
    guard(|| {
        let s = h.as_ref().ok_or_else(|| fail(HfStatus::NullPointer, "handle is null"))?;
        let (ro, io) = (out_arg(re_out, "re_out")?, out_arg(im_out, "im_out")?);
        let v = s.inner.eval(Complex64::new(re, im));
        *ro = v.re;
        *io = v.im;
        Ok(())
    })
}

/// Smallest k <= k_max with d_{stage,k} > threshold^-k. `threshold` NULL selects the default.
///
/// # Safety
/// `h` must be a live handle; `threshold` NULL or a valid string; `k_out` writable.
#[no_mangle]
pub unsafe extern "C" fn hf_lacunary_witness(
    h: *const HfLacunary,
    stage: usize,
    threshold: *const c_char,
    k_max: u64,
    k_out: *mut u64,
) -> HfStatus {
    guard(|| {
        let s = h.as_ref().ok_or_else(|| fail(HfStatus::NullPointer, "handle is null"))?;
        let k_out = out_arg(k_out, "k_out")?;
        let t = if threshold.is_null() {
            default_threshold(stage)
        } else {
            parse_rational(str_arg(threshold, "threshold")?).or_status()?
        };
        *k_out = radius_witness(&s.inner, stage, &t, k_max).or_status()?.k;
        Ok(())
    })
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct HfHole {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

/// Opaque perforated disc.
pub struct HfDomain {
    inner: PerforatedDisc,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct HfEstimate {
    pub value: f64,
    pub std_err: f64,
    pub hits: u64,
    pub n_walks: u64,
    pub timeouts: u64,
    pub valid: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HfTarget {
    OuterCircle = 0,
    Arc = 1,
}

/// Disc of radius `rho` with `n` disjoint holes and target arc k0/n0.
///
/// # Safety
/// `holes` must point to `n` entries (may be NULL when n = 0); `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hf_domain_new(
    rho: f64,
    holes: *const HfHole,
    n: usize,
    k0: u64,
    n0: u64,
    out: *mut *mut HfDomain,
) -> HfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        if n > 0 && holes.is_null() {
            return Err(fail(HfStatus::NullPointer, "holes is null"));
        }
        let mut hs = Vec::with_capacity(n);
        for i in 0..n {
            let h = *holes.add(i);
            hs.push(Hole::new(ComplexPoint::new(h.cx, h.cy).or_status()?, h.r));
        }
        let arc = ArcSpec::new(k0, n0).or_status()?;
        let inner = PerforatedDisc::new_general(rho, hs, arc).or_status()?;
        *out = Box::into_raw(Box::new(HfDomain { inner }));
        Ok(())
    })
}

/// # Safety
/// `d` must be NULL or a handle from [`hf_domain_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hf_domain_free(d: *mut HfDomain) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Walk-on-spheres harmonic measure of the target seen from (x, y).
///
/// # Safety
/// `d` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hf_estimate(
    d: *const HfDomain,
    x: f64,
    y: f64,
    target: HfTarget,
    n_walks: u64,
    seed: u64,
    eps_boundary: f64,
    out: *mut HfEstimate,
) -> HfStatus {
    guard(|| {
        let d = d.as_ref().ok_or_else(|| fail(HfStatus::NullPointer, "domain is null"))?;
        let out = out_arg(out, "out")?;
        let cfg = WalkConfig { n_walks, eps_boundary, max_steps: 1_000_000, rng_seed: seed };
        cfg.validate(&d.inner).or_status()?;
        let t = match target {
            HfTarget::OuterCircle => TargetSet::OuterCircle,
            HfTarget::Arc => TargetSet::arc(d.inner.arc()),
        };
        let start = ComplexPoint::new(x, y).or_status()?;
        let e = estimate(&d.inner, start, &t, &cfg).or_status()?;
        *out = HfEstimate {
            value: e.value,
            std_err: e.stderr,
            hits: e.hits,
            n_walks: e.n_walks,
            timeouts: e.histogram.timeouts,
            valid: e.valid,
        };
        Ok(())
    })
}

/// log(r/r_in) / log(r_out/r_in).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hf_exact_annulus(r: f64, r_in: f64, r_out: f64, out: *mut f64) -> HfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = exact_annulus(r, r_in, r_out).or_status()?;
        Ok(())
    })
}

/// Runs the pipeline for a JSON run configuration and writes the bundle to `out_dir`.
/// Returns [`HfStatus::VerificationFailed`] when the bundle is written but invalid.
///
/// # Safety
/// `config_json` and `out_dir` must be valid strings; `valid` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn hf_construct(config_json: *const c_char, out_dir: *const c_char, valid: *mut bool) -> HfStatus {
    guard(|| {
        let cfg = RunConfig::from_json(str_arg(config_json, "config_json")?).or_status()?;
        let dir = str_arg(out_dir, "out_dir")?;
        let bundle = assemble_counterexample(&cfg).or_status()?;
        write_bundle(&bundle, Path::new(dir)).or_status()?;
        if let Some(v) = valid.as_mut() {
            *v = bundle.valid();
        }
        if !bundle.valid() {
            return Err(fail(
                HfStatus::VerificationFailed,
                format!("certificate failed: {}", bundle.manifest.failed.join(", ")),
            ));
        }
        Ok(())
    })
}
