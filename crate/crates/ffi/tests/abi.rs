use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use localnet_ffi::*;

fn circle_atlas() -> *mut LnAtlas {
    let spec = CString::new(r#"{"kind":"circle","radius":1.0}"#).unwrap();
    let mut atlas = ptr::null_mut();
    assert_eq!(unsafe { ln_atlas_build(spec.as_ptr(), 1, &mut atlas) }, LnStatus::Ok);
    atlas
}

fn last_error() -> String {
    let p = ln_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn build_predict_and_round_trip() {
    let atlas = circle_atlas();
    let mut q = 0;
    assert_eq!(unsafe { ln_atlas_q_star(atlas, &mut q) }, LnStatus::Ok);
    assert!(q >= 1);

    let m = 200;
    let mut x = Vec::with_capacity(2 * m);
    let mut y = Vec::with_capacity(m);
    for i in 0..m {
        let t = std::f64::consts::TAU * i as f64 / m as f64;
        x.extend([t.cos(), t.sin()]);
        y.push(t.sin() * 0.5);
    }
    let mut est = ptr::null_mut();
    let s = unsafe { ln_estimator_build(atlas, x.as_ptr(), y.as_ptr(), m, 2, 1.0, 0, &mut est) };
    assert_eq!(s, LnStatus::Ok);

    let mut batch = vec![0.0; m];
    let s = unsafe { ln_estimator_predict_batch(est, x.as_ptr(), m, 2, LnMode::Interior, batch.as_mut_ptr()) };
    assert_eq!(s, LnStatus::Ok);
    for i in 0..m {
        let mut one = 0.0;
        let s = unsafe { ln_estimator_predict(est, x[2 * i..].as_ptr(), 2, LnMode::Interior, &mut one) };
        assert_eq!(s, LnStatus::Ok);
        assert_eq!(one, batch[i]);
        assert!(one.abs() <= 0.5);
    }

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { ln_estimator_to_json(est, &mut json) }, LnStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { ln_estimator_from_json(json, &mut back) }, LnStatus::Ok);
    let (mut a, mut b) = (0.0, 0.0);
    unsafe {
        ln_estimator_predict(est, x.as_ptr(), 2, LnMode::Feedback, &mut a);
        ln_estimator_predict(back, x.as_ptr(), 2, LnMode::Feedback, &mut b);
        ln_string_free(json);
        ln_estimator_free(back);
        ln_estimator_free(est);
        ln_atlas_free(atlas);
    }
    assert_eq!(a, b);
}

#[test]
fn errors_map_to_codes() {
    let mut n = 0;
    assert_eq!(unsafe { ln_choose_n(1000, 1.0, 1, &mut n) }, LnStatus::Ok);
    assert_eq!(n, 10);
    assert_eq!(unsafe { ln_choose_n(0, 1.0, 1, &mut n) }, LnStatus::Config);
    assert!(last_error().contains("m must be at least 1"));
    assert_eq!(unsafe { ln_choose_n(10, 1.0, 1, ptr::null_mut()) }, LnStatus::NullPointer);

    let bad = CString::new(r#"{"kind":"klein_bottle"}"#).unwrap();
    let mut atlas = ptr::null_mut();
    assert_eq!(unsafe { ln_atlas_build(bad.as_ptr(), 1, &mut atlas) }, LnStatus::Json);
    assert!(atlas.is_null());
    assert_eq!(unsafe { ln_atlas_build(ptr::null(), 1, &mut atlas) }, LnStatus::NullPointer);

    let atlas = circle_atlas();
    let mut est = ptr::null_mut();
    let x = [f64::NAN, 0.0];
    let s = unsafe { ln_estimator_build(atlas, x.as_ptr(), [0.0].as_ptr(), 1, 2, 1.0, 1, &mut est) };
    assert_eq!(s, LnStatus::NonFinite);
    let s = unsafe { ln_estimator_build(atlas, x.as_ptr(), [0.0].as_ptr(), 1, 3, 1.0, 1, &mut est) };
    assert_eq!(s, LnStatus::Domain);
    unsafe { ln_atlas_free(atlas) };

    // success clears the message
    assert_eq!(unsafe { ln_choose_n(5, 1.0, 1, &mut n) }, LnStatus::Ok);
    assert!(ln_last_error_message().is_null());
}

#[test]
fn rates_json_matches_library() {
    let cfg = r#"{"m_values":[32,64],"trials":2,"test_points":32,"seed":3}"#;
    let c = CString::new(cfg).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { ln_rates_json(c.as_ptr(), &mut out) }, LnStatus::Ok);
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    unsafe { ln_string_free(out) };
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed[0]["points"].as_array().unwrap().len(), 2);
}

#[test]
fn header_is_current_and_links_from_c() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(root.join("include/localnet.h")).unwrap();
    for name in ["ln_atlas_build", "ln_estimator_predict_batch", "ln_rates_json", "LN_STATUS_NO_CHART"] {
        assert!(header.contains(name), "{name} missing from header");
    }

    // the static library sits next to the test binary's deps directory
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap();
    let lib = profile_dir.join("liblocalnet_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping C link check: no static library or C compiler");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(root.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
