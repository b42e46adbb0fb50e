use std::ffi::{CStr, CString};
use std::ptr;

use hullforge_ffi::*;

fn last_error() -> String {
    let p = hf_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn lacunary(eps: &[&str]) -> *mut HfLacunary {
    let owned: Vec<CString> = eps.iter().map(|e| CString::new(*e).unwrap()).collect();
    let ptrs: Vec<*const std::ffi::c_char> = owned.iter().map(|c| c.as_ptr()).collect();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { hf_lacunary_new(ptrs.as_ptr(), ptrs.len(), &mut h) }, HfStatus::Ok);
    assert!(!h.is_null());
    h
}

#[test]
fn coefficients_and_eval() {
    let h = lacunary(&["1", "1"]);
    let mut s = ptr::null_mut();
    let mut approx = 0.0;
    assert_eq!(unsafe { hf_lacunary_coefficient(h, 2, &mut s, &mut approx) }, HfStatus::Ok);
    assert_eq!(unsafe { CStr::from_ptr(s) }.to_str().unwrap(), "209/648");
    assert!((approx - 209.0 / 648.0).abs() < 1e-15);
    unsafe { hf_string_free(s) };
    let (mut re, mut im) = (0.0, 0.0);
    assert_eq!(unsafe { hf_lacunary_eval(h, 0.0, 0.0, &mut re, &mut im) }, HfStatus::Ok);
    assert!((re - (0.5 + 4.0 / 9.0)).abs() < 1e-15 && im == 0.0);
    unsafe { hf_lacunary_free(h) };
}

#[test]
fn witness_single_stage() {
    let h = lacunary(&["1"]);
    let t = CString::new("3").unwrap();
    let mut k = 0;
    assert_eq!(unsafe { hf_lacunary_witness(h, 0, t.as_ptr(), 1000, &mut k) }, HfStatus::Ok);
    assert_eq!(k, 2);
    let low = CString::new("3/2").unwrap();
    assert_eq!(unsafe { hf_lacunary_witness(h, 0, low.as_ptr(), 1000, &mut k) }, HfStatus::InvalidArgument);
    assert!(last_error().contains("must exceed"));
    unsafe { hf_lacunary_free(h) };
}

#[test]
fn rejects_bad_input() {
    let mut h = ptr::null_mut();
    let bad = [CString::new("0").unwrap()];
    let ptrs = [bad[0].as_ptr()];
    assert_eq!(unsafe { hf_lacunary_new(ptrs.as_ptr(), 1, &mut h) }, HfStatus::InvalidArgument);
    assert!(h.is_null());
    assert!(last_error().contains("positive"));
    assert_eq!(unsafe { hf_lacunary_new(ptr::null(), 1, &mut h) }, HfStatus::NullPointer);
    let mut v = 0.0;
    assert_eq!(unsafe { hf_exact_annulus(0.5, 0.6, 1.0, &mut v) }, HfStatus::InvalidArgument);
    assert_eq!(unsafe { hf_exact_annulus(0.5, 0.25, 1.0, ptr::null_mut()) }, HfStatus::NullPointer);
}

#[test]
fn annulus_estimate_matches_closed_form() {
    let holes = [HfHole { cx: 0.0, cy: 0.0, r: 0.25 }];
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { hf_domain_new(1.0, holes.as_ptr(), 1, 0, 1, &mut d) }, HfStatus::Ok);
    let mut e = HfEstimate::default();
    let st = unsafe { hf_estimate(d, 0.5, 0.0, HfTarget::OuterCircle, 20_000, 11, 1e-6, &mut e) };
    assert_eq!(st, HfStatus::Ok);
    let mut exact = 0.0;
    assert_eq!(unsafe { hf_exact_annulus(0.5, 0.25, 1.0, &mut exact) }, HfStatus::Ok);
    assert!((e.value - exact).abs() <= 3.0 * e.std_err + 1e-4, "{} vs {exact}", e.value);
    assert!(e.valid && e.n_walks == 20_000);
    unsafe { hf_domain_free(d) };
}

#[test]
fn overlapping_holes_rejected() {
    let holes = [HfHole { cx: 0.3, cy: 0.0, r: 0.2 }, HfHole { cx: 0.4, cy: 0.0, r: 0.2 }];
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { hf_domain_new(1.0, holes.as_ptr(), 2, 0, 4, &mut d) }, HfStatus::InvalidArgument);
    assert!(d.is_null());
    assert!(last_error().contains("overlap"));
}

#[test]
fn construct_rejects_bad_config() {
    let cfg = CString::new(r#"{"mode":"lacunary"}"#).unwrap();
    let dir = CString::new("unused").unwrap();
    let mut valid = true;
    assert_eq!(unsafe { hf_construct(cfg.as_ptr(), dir.as_ptr(), &mut valid) }, HfStatus::InvalidArgument);
    assert!(last_error().contains("domains"));
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(hf_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
