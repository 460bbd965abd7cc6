use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use pointmatch_ffi::*;

fn last_error() -> String {
    let p = pm_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// Seven points in general position and their image under a rotation by 0.4
/// and a shift, listed in reverse order.
fn instance() -> (Vec<f64>, Vec<f64>) {
    let model = [
        [0.0, 0.0],
        [1.0, 0.1],
        [0.3, 0.9],
        [-0.7, 0.4],
        [-0.2, -0.8],
        [0.8, -0.6],
        [0.5, 0.45],
    ];
    let (c, s) = (0.4f64.cos(), 0.4f64.sin());
    let scene: Vec<[f64; 2]> =
        model.iter().rev().map(|p| [c * p[0] - s * p[1] + 0.3, s * p[0] + c * p[1] - 0.2]).collect();
    (model.concat(), scene.concat())
}

#[test]
fn match_recovers_rotation() {
    let (x, y) = instance();
    let mut opts = pm_options_default();
    opts.max_iterations = 300;
    opts.workers = 1;
    let mut res: *mut PmResult = ptr::null_mut();
    let status = unsafe { pm_match(x.as_ptr(), 7, y.as_ptr(), 7, 2, &opts, &mut res) };
    assert_eq!(status, PmStatus::Ok);
    unsafe {
        assert_eq!(pm_result_pair_count(res), 7);
        assert_eq!(pm_result_dim(res), 2);
        let pairs = std::slice::from_raw_parts(pm_result_pairs(res), 14);
        for pair in pairs.chunks(2) {
            assert_eq!(pair[0] + pair[1], 6);
        }
        assert!(pm_result_energy(res).abs() < 1e-8);
        assert!(pm_result_iterations(res) <= 300);
        assert!(pm_result_certificate(res) <= PM_CERT_ITERATION_LIMIT);
        let mut l = [0.0; 4];
        let mut t = [0.0; 2];
        assert_eq!(pm_result_linear(res, l.as_mut_ptr()), PmStatus::Ok);
        assert_eq!(pm_result_translation(res, t.as_mut_ptr()), PmStatus::Ok);
        assert!((l[2].atan2(l[0]) - 0.4).abs() < 1e-6);
        assert!((t[0] - 0.3).abs() < 1e-6 && (t[1] + 0.2).abs() < 1e-6);
        pm_result_free(res);
    }
}

#[test]
fn null_and_invalid_arguments() {
    let (x, y) = instance();
    let mut res: *mut PmResult = ptr::null_mut();
    let status = unsafe { pm_match(ptr::null(), 7, y.as_ptr(), 7, 2, ptr::null(), &mut res) };
    assert_eq!(status, PmStatus::NullPointer);
    assert!(res.is_null());
    assert!(last_error().contains("model"));

    let status = unsafe { pm_match(x.as_ptr(), 7, y.as_ptr(), 7, 2, ptr::null(), ptr::null_mut()) };
    assert_eq!(status, PmStatus::NullPointer);

    let mut opts = pm_options_default();
    opts.mode = 99;
    let status = unsafe { pm_match(x.as_ptr(), 7, y.as_ptr(), 7, 2, &opts, &mut res) };
    assert_eq!(status, PmStatus::Input);
    assert!(last_error().contains("mode"));

    let mut opts = pm_options_default();
    opts.n_p = 8;
    let status = unsafe { pm_match(x.as_ptr(), 7, y.as_ptr(), 7, 2, &opts, &mut res) };
    assert_eq!(status, PmStatus::Input);

    let mut opts = pm_options_default();
    opts.scale_lo = 2.0;
    opts.scale_hi = 1.0;
    let status = unsafe { pm_match(x.as_ptr(), 7, y.as_ptr(), 7, 2, &opts, &mut res) };
    assert_eq!(status, PmStatus::Input);

    // 2D points for a 3D mode
    let mut opts = pm_options_default();
    opts.mode = PM_MODE_SIM3D;
    let status = unsafe { pm_match(x.as_ptr(), 7, y.as_ptr(), 7, 2, &opts, &mut res) };
    assert_eq!(status, PmStatus::Input);
    assert!(res.is_null());

    unsafe {
        assert!(pm_result_energy(ptr::null()).is_nan());
        assert_eq!(pm_result_pair_count(ptr::null()), 0);
        assert!(pm_result_pairs(ptr::null()).is_null());
        assert_eq!(pm_result_certificate(ptr::null()), u32::MAX);
        assert_eq!(pm_result_linear(ptr::null(), ptr::null_mut()), PmStatus::NullPointer);
        pm_result_free(ptr::null_mut());
    }
}

#[test]
fn success_clears_error() {
    let mut pairs = [0usize; 2];
    let mut value = 0.0;
    let status = unsafe { pm_solve_k_lap(ptr::null(), 2, 2, 1, pairs.as_mut_ptr(), &mut value) };
    assert_eq!(status, PmStatus::NullPointer);
    let cost = [1.0, 2.0, 3.0, 4.0];
    let status = unsafe { pm_solve_k_lap(cost.as_ptr(), 2, 2, 1, pairs.as_mut_ptr(), &mut value) };
    assert_eq!(status, PmStatus::Ok);
    assert!(pm_last_error_message().is_null());
}

#[test]
fn k_lap_picks_cheapest_pairs() {
    // row-major 3 x 4
    let cost = [
        5.0, 1.0, 9.0, 9.0, //
        1.0, 2.0, 9.0, 9.0, //
        9.0, 9.0, 9.0, 0.5,
    ];
    let mut pairs = [0usize; 4];
    let mut value = 0.0;
    let status = unsafe { pm_solve_k_lap(cost.as_ptr(), 3, 4, 2, pairs.as_mut_ptr(), &mut value) };
    assert_eq!(status, PmStatus::Ok);
    assert!((value - 1.5).abs() < 1e-12);
    let mut got: Vec<(usize, usize)> = pairs.chunks(2).map(|p| (p[0], p[1])).collect();
    got.sort();
    assert!(got == vec![(0, 1), (2, 3)] || got == vec![(1, 0), (2, 3)]);

    let status = unsafe { pm_solve_k_lap(cost.as_ptr(), 3, 4, 4, pairs.as_mut_ptr(), &mut value) };
    assert_eq!(status, PmStatus::Input);
    assert!(last_error().contains("cardinality"));
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(pm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/pointmatch.h");
    let text = std::fs::read_to_string(&header).expect("build script writes the header");
    for name in [
        "pm_options_default",
        "pm_match",
        "pm_result_free",
        "pm_result_energy",
        "pm_result_pair_count",
        "pm_result_pairs",
        "pm_result_iterations",
        "pm_result_certificate",
        "pm_result_dim",
        "pm_result_linear",
        "pm_result_translation",
        "pm_solve_k_lap",
        "pm_last_error_message",
        "pm_version",
        "typedef struct PmResult PmResult",
        "PM_STATUS_PANIC = 5",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    match Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"]).arg(&header).status() {
        Ok(status) => assert!(status.success(), "header does not compile as C"),
        Err(_) => eprintln!("no C compiler on PATH, syntax check not run"),
    }
}
