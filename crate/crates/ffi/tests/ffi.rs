use std::ffi::{CStr, CString};
use std::ptr;

use lgen_ffi::*;

fn uniform(bins: usize) -> *mut LgenPrior {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { lgen_prior_beta_mixture(1.0, 0.5, 2.0, bins, &mut p) }, LgenStatus::Ok);
    assert!(!p.is_null());
    p
}

fn last_error() -> String {
    let e = lgen_last_error();
    assert!(!e.is_null());
    unsafe { CStr::from_ptr(e) }.to_string_lossy().into_owned()
}

#[test]
fn grid_round_trip() {
    let p = uniform(100);
    assert_eq!(unsafe { lgen_prior_len(p) }, 100);
    let (mut support, mut mass) = (vec![0.0; 100], vec![0.0; 100]);
    assert_eq!(unsafe { lgen_prior_grid(p, support.as_mut_ptr(), mass.as_mut_ptr(), 100) }, LgenStatus::Ok);
    for (i, (x, m)) in support.iter().zip(&mass).enumerate() {
        assert!((x - (i as f64 + 0.5) / 100.0).abs() < 1e-12);
        assert!((m - 0.01).abs() < 1e-9);
    }
    let mut small = vec![0.0; 10];
    let s = unsafe { lgen_prior_grid(p, small.as_mut_ptr(), small.as_mut_ptr(), 10) };
    assert_eq!(s, LgenStatus::BufferTooSmall);
    unsafe { lgen_prior_free(p) };
}

#[test]
fn generalization_on_uniform_prior() {
    // posterior is proportional to P(threshold < p_i) = (i + 1) / K
    let k = 100;
    let p = uniform(k);
    let u = CString::new("gen").unwrap();
    let mut mass = vec![0.0; k];
    let mut mean = 0.0;
    assert_eq!(unsafe { lgen_interpret(p, u.as_ptr(), mass.as_mut_ptr(), k, &mut mean) }, LgenStatus::Ok);
    let z = (k * (k + 1) / 2) as f64;
    let mut want_mean = 0.0;
    for (i, m) in mass.iter().enumerate() {
        let w = (i + 1) as f64 / z;
        assert!((m - w).abs() < 1e-9, "{i}: {m} vs {w}");
        want_mean += w * (i as f64 + 0.5) / k as f64;
    }
    assert!((mean - want_mean).abs() < 1e-9);
    unsafe { lgen_prior_free(p) };
}

#[test]
fn endorsement_calls() {
    let p = uniform(100);
    let mut s = 0.0;
    assert_eq!(unsafe { lgen_endorse(p, 0.5, 1.0, &mut s) }, LgenStatus::Ok);
    assert!((s - 0.5).abs() <= 0.01, "{s}");

    // 30% of the mass sits at or below 0.3
    let mut f = 0.0;
    assert_eq!(unsafe { lgen_endorse_fixed(p, 0.8, 0.3, 0.2, 2.0, &mut f) }, LgenStatus::Ok);
    let core = 1.0 / (1.0 + 0.7f64.powi(2));
    assert!((f - (0.8 * core + 0.1)).abs() < 1e-9, "{f}");
    assert_eq!(unsafe { lgen_endorse_fixed(p, 0.2, 0.3, 0.0, 2.0, &mut f) }, LgenStatus::Ok);
    assert_eq!(f, 0.0);

    // a point-mass belief matches the point endorsement
    let mut belief = vec![0.0; 100];
    belief[49] = 1.0;
    let mut e = 0.0;
    assert_eq!(unsafe { lgen_endorse_expectation(p, belief.as_ptr(), 100, 1.0, &mut e) }, LgenStatus::Ok);
    assert!((e - s).abs() < 1e-12);
    assert_eq!(unsafe { lgen_endorse_expectation(p, belief.as_ptr(), 50, 1.0, &mut e) }, LgenStatus::InvalidArgument);
    unsafe { lgen_prior_free(p) };
}

#[test]
fn fixtures_and_rates() {
    let name = CString::new("climbs mountains").unwrap();
    let runs = CString::new("runs").unwrap();
    let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(lgen_prior_fixture(name.as_ptr(), 100, &mut a), LgenStatus::Ok);
        assert_eq!(lgen_prior_fixture(runs.as_ptr(), 100, &mut b), LgenStatus::Ok);
        let (mut sa, mut sb) = (0.0, 0.0);
        assert_eq!(lgen_endorse(a, 0.6, 2.0, &mut sa), LgenStatus::Ok);
        assert_eq!(lgen_endorse(b, 0.6, 2.0, &mut sb), LgenStatus::Ok);
        assert!(sa > sb);
        lgen_prior_free(a);
        lgen_prior_free(b);
    }
    let mut r = 0.0;
    let month = CString::new("month").unwrap();
    assert_eq!(unsafe { lgen_rate_from_frequency(2.0, month.as_ptr(), &mut r) }, LgenStatus::Ok);
    assert_eq!(r, 24.0);
    let bad = CString::new("fortnightish").unwrap();
    assert_eq!(unsafe { lgen_rate_from_frequency(2.0, bad.as_ptr(), &mut r) }, LgenStatus::InvalidArgument);
    assert!(last_error().contains("fortnightish"));
}

#[test]
fn error_paths() {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { lgen_prior_beta_mixture(1.5, 0.5, 2.0, 100, &mut p) }, LgenStatus::InvalidArgument);
    assert!(p.is_null());
    assert_eq!(unsafe { lgen_prior_beta_mixture(1.0, 0.5, 2.0, 100, ptr::null_mut()) }, LgenStatus::NullPointer);
    let mut s = 0.0;
    assert_eq!(unsafe { lgen_endorse(ptr::null(), 0.5, 1.0, &mut s) }, LgenStatus::NullPointer);
    assert!(last_error().contains("prior"));

    let u = uniform(100);
    let q = CString::new("quant:1").unwrap();
    let st = unsafe { lgen_interpret(u, q.as_ptr(), ptr::null_mut(), 0, ptr::null_mut()) };
    assert_eq!(st, LgenStatus::VacuousUtterance);
    let unknown = CString::new("no such fixture").unwrap();
    assert_ne!(unsafe { lgen_prior_fixture(unknown.as_ptr(), 100, &mut p) }, LgenStatus::Ok);
    unsafe { lgen_prior_free(u) };
    unsafe { lgen_prior_free(ptr::null_mut()) };
    let ok = unsafe { CStr::from_ptr(lgen_status_str(LgenStatus::Ok)) };
    assert_eq!(ok.to_str().unwrap(), "ok");
    let v = unsafe { CStr::from_ptr(lgen_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/lgen.h")).unwrap();
    assert!(header.contains("#ifndef LGEN_H"));
    assert!(header.contains("typedef struct LgenPrior LgenPrior;"));
    assert!(header.contains("LGEN_STATUS_OK = 0"));
    for f in [
        "lgen_last_error",
        "lgen_status_str",
        "lgen_prior_beta_mixture",
        "lgen_prior_rate_mixture",
        "lgen_prior_fixture",
        "lgen_prior_free",
        "lgen_prior_len",
        "lgen_prior_grid",
        "lgen_interpret",
        "lgen_endorse",
        "lgen_endorse_expectation",
        "lgen_endorse_fixed",
        "lgen_rate_from_frequency",
        "lgen_version",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
}
