use std::ffi::{CStr, CString};
use std::ptr;

use adiaband_ffi::*;

fn last_error() -> String {
    let p = adiaband_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn grover(n: u32, schedule: &str) -> *mut AdiabandFamily {
    let name = CString::new(schedule).unwrap();
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { adiaband_grover_new(n, name.as_ptr(), &mut f) }, AdiabandStatus::Ok);
    assert!(!f.is_null());
    f
}

#[test]
fn grover_gap_matches_closed_form() {
    let f = grover(3, "linear");
    let mut dim = 0usize;
    assert_eq!(unsafe { adiaband_family_dim(f, &mut dim) }, AdiabandStatus::Ok);
    assert_eq!(dim, 8);
    for s in [0.0, 0.2, 0.5, 0.9] {
        let mut g = 0.0;
        assert_eq!(unsafe { adiaband_family_gap(f, s, &mut g) }, AdiabandStatus::Ok);
        let want = (1.0 - 4.0 * (1.0 - 1.0 / 8.0) * s * (1.0 - s)).sqrt();
        assert!((g - want).abs() < 1e-10, "s={s}: {g} vs {want}");
    }
    unsafe { adiaband_family_free(f) };
}

#[test]
fn diagonal_spectrum_and_buffer_checks() {
    let h0 = [0.0, 0.0, 0.0, 1.0];
    let h1 = [1.0, 0.0, 0.0, 0.0];
    let lin = CString::new("linear").unwrap();
    let mut f = ptr::null_mut();
    let st = unsafe { adiaband_interpolating_new(2, h0.as_ptr(), ptr::null(), h1.as_ptr(), ptr::null(), lin.as_ptr(), &mut f) };
    assert_eq!(st, AdiabandStatus::Ok);
    let mut buf = [0.0; 2];
    assert_eq!(unsafe { adiaband_family_spectrum(f, 0.25, buf.as_mut_ptr(), 2) }, AdiabandStatus::Ok);
    assert!((buf[0] - 0.25).abs() < 1e-14 && (buf[1] - 0.75).abs() < 1e-14);
    assert_eq!(unsafe { adiaband_family_spectrum(f, 0.25, buf.as_mut_ptr(), 1) }, AdiabandStatus::BufferTooSmall);
    assert_eq!(unsafe { adiaband_family_spectrum(f, 1.5, buf.as_mut_ptr(), 2) }, AdiabandStatus::InvalidArgument);
    // The crossing at s = 1/2 closes the ground gap.
    let mut g = 0.0;
    assert_eq!(unsafe { adiaband_family_gap(f, 0.5, &mut g) }, AdiabandStatus::GapCollapse);
    assert!(!last_error().is_empty());
    unsafe { adiaband_family_free(f) };
}

#[test]
fn non_hermitian_input_is_rejected() {
    let h0 = [0.0, 1.0, 0.0, 1.0];
    let h1 = [1.0, 0.0, 0.0, 0.0];
    let lin = CString::new("linear").unwrap();
    let mut f = ptr::null_mut();
    let st = unsafe { adiaband_interpolating_new(2, h0.as_ptr(), ptr::null(), h1.as_ptr(), ptr::null(), lin.as_ptr(), &mut f) };
    assert_eq!(st, AdiabandStatus::InvalidArgument);
    assert!(f.is_null());
    assert!(last_error().contains("Hermitian"));
}

#[test]
fn null_pointers_are_reported() {
    let mut d = 0usize;
    assert_eq!(unsafe { adiaband_family_dim(ptr::null(), &mut d) }, AdiabandStatus::NullPointer);
    assert_eq!(unsafe { adiaband_grover_new(2, ptr::null(), ptr::null_mut()) }, AdiabandStatus::NullPointer);
    let f = grover(2, "linear");
    assert_eq!(unsafe { adiaband_family_dim(f, ptr::null_mut()) }, AdiabandStatus::NullPointer);
    unsafe {
        adiaband_family_free(f);
        adiaband_family_free(ptr::null_mut());
        adiaband_string_free(ptr::null_mut());
    }
}

#[test]
fn evolution_respects_bound() {
    let f = grover(2, "linear");
    let (mut tp, mut pd) = (0.0, 0.0);
    assert_eq!(unsafe { adiaband_evolve(f, 200.0, 512, &mut tp, &mut pd) }, AdiabandStatus::Ok);
    let (mut tight, mut coarse) = (0.0, 0.0);
    assert_eq!(unsafe { adiaband_theorem3_bound(f, 200.0, 1.0, 257, &mut tight, &mut coarse) }, AdiabandStatus::Ok);
    assert!(pd > 0.0 && pd <= tight && tight <= coarse, "{pd} {tight} {coarse}");
    assert!((0.0..=1.0).contains(&tp));
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { adiaband_random_new(4, 3, 2, &mut r) }, AdiabandStatus::Ok);
    unsafe {
        adiaband_family_free(r);
        adiaband_family_free(f);
    }
}

#[test]
fn run_config_produces_csv() {
    let cfg = CString::new(
        r#"{"problem": {"grover": {"n": [2]}}, "schedule": "linear", "tau": [10.0], "grid": 64}"#,
    )
    .unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { adiaband_run_config_json(cfg.as_ptr(), &mut out) }, AdiabandStatus::Ok);
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    unsafe { adiaband_string_free(out) };
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("run_id,"));
    assert_eq!(lines.len(), 65);

    let bad = CString::new(r#"{"problem": {"grover": {"n": [2]}}, "schedule": "linear", "tau": []}"#).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { adiaband_run_config_json(bad.as_ptr(), &mut out) }, AdiabandStatus::ConfigError);
    assert!(out.is_null());
    assert!(last_error().contains("tau"));
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(adiaband_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
