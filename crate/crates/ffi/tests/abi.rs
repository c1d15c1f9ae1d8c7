use std::ffi::{c_char, CStr, CString};
use std::ptr;

use blowup_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { blowup_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(blowup_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn power_round_trip() {
    unsafe {
        let mut nl = ptr::null_mut();
        assert_eq!(blowup_nonlinearity_power(3.0, &mut nl), BlowupStatus::Ok);
        let (mut f, mut big_f) = (0.0, 0.0);
        assert_eq!(blowup_nonlinearity_eval(nl, 2.0, &mut f, &mut big_f), BlowupStatus::Ok);
        assert_eq!(f, 8.0);
        assert!((big_f - 4.0).abs() < 1e-12);

        let mut v = BlowupVerdict::Inconclusive;
        assert_eq!(blowup_keller_osserman(nl, &mut v), BlowupStatus::Ok);
        assert_eq!(v, BlowupVerdict::Yes);
        assert_eq!(blowup_classify(nl, &mut v), BlowupStatus::Ok);
        assert_eq!(v, BlowupVerdict::No);

        let mut sol = ptr::null_mut();
        assert_eq!(blowup_solve(nl, 3, 1e-8, &mut sol), BlowupStatus::Ok);
        let (mut u1, mut u2, mut c) = (0.0, 0.0, 0.0);
        assert_eq!(blowup_solution_u_at(sol, 0.99, &mut u1), BlowupStatus::Ok);
        assert_eq!(blowup_solution_u_at(sol, 0.999, &mut u2), BlowupStatus::Ok);
        assert_eq!(blowup_solution_center_value(sol, &mut c), BlowupStatus::Ok);
        assert!(c > 0.0 && u1 > c && u2 > u1);
        // u ≈ √2/d near the boundary.
        assert!((u2 * 1e-3 / 2f64.sqrt() - 1.0).abs() < 1e-3);
        assert_eq!(blowup_solution_u_at(sol, 1.5, &mut u1), BlowupStatus::OutOfRange);

        let (mut k, mut res) = (99usize, 1.0);
        assert_eq!(blowup_picard(nl, 1, 0.2, 1e-10, 50, &mut k, &mut res), BlowupStatus::Ok);
        assert_eq!(k, 1);
        assert_eq!(res, 0.0);

        blowup_solution_free(sol);
        blowup_nonlinearity_free(nl);
    }
}

#[test]
fn expansion_buffer_protocol() {
    unsafe {
        let mut n = 0usize;
        assert_eq!(blowup_power_expansion(2.0, 3, 4, ptr::null_mut(), 0, &mut n), BlowupStatus::BufferTooSmall);
        assert_eq!(n, 5);
        let mut buf = vec![0.0; n];
        assert_eq!(blowup_power_expansion(2.0, 3, 4, buf.as_mut_ptr(), n, &mut n), BlowupStatus::Ok);
        assert!((buf[0] - 6.0).abs() < 1e-12);
        assert!((buf[1] - 2.4).abs() < 1e-12);
        assert_eq!(blowup_power_expansion(5.0, 3, 3, buf.as_mut_ptr(), buf.len(), &mut n), BlowupStatus::InvalidArgument);
        assert!(last_error().contains("request at most 2"));
    }
}

#[test]
fn expression_and_errors() {
    unsafe {
        let expr = CString::new("u").unwrap();
        let mut nl = ptr::null_mut();
        let st = blowup_nonlinearity_expression(expr.as_ptr(), 1.0, BlowupTail::Power, 0.5, 2.0, 1e3, &mut nl);
        assert_eq!(st, BlowupStatus::Ok);
        let mut v = BlowupVerdict::Yes;
        assert_eq!(blowup_keller_osserman(nl, &mut v), BlowupStatus::Ok);
        assert_eq!(v, BlowupVerdict::No);
        let mut sol = ptr::null_mut();
        assert_eq!(blowup_solve(nl, 3, 1e-8, &mut sol), BlowupStatus::NoLargeSolution);
        assert!(sol.is_null());
        blowup_nonlinearity_free(nl);

        let bad = CString::new("u +* 2").unwrap();
        let mut nl = ptr::null_mut();
        let st = blowup_nonlinearity_expression(bad.as_ptr(), 0.0, BlowupTail::Numeric, 0.0, 0.0, 1e3, &mut nl);
        assert_eq!(st, BlowupStatus::InvalidArgument);
        assert!(nl.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(blowup_nonlinearity_power(0.5, &mut nl), BlowupStatus::InvalidArgument);
        assert_eq!(blowup_nonlinearity_power(3.0, ptr::null_mut()), BlowupStatus::NullPointer);
        let mut v = BlowupVerdict::Yes;
        assert_eq!(blowup_classify(ptr::null(), &mut v), BlowupStatus::NullPointer);
        blowup_nonlinearity_free(ptr::null_mut());
        blowup_solution_free(ptr::null_mut());
    }
}

#[test]
fn header_is_valid_c() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/blowup.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["blowup_solve", "blowup_power_expansion", "blowup_last_error_message", "BLOWUP_STATUS_OK"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let src = std::env::temp_dir().join(format!("blowup-header-{}.c", std::process::id()));
    std::fs::write(
        &src,
        "#include \"blowup.h\"\nint main(void) { BlowupNonlinearity *nl = 0; BlowupStatus s = blowup_nonlinearity_power(3.0, &nl); blowup_nonlinearity_free(nl); return (int)s; }\n",
    )
    .unwrap();
    let status = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(&src)
        .status()
        .expect("a C compiler is available");
    assert!(status.success());
}
