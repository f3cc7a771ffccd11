use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use qjs_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(qjs_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn resonant(nbar: f64) -> *mut QjsParams {
    let mut p = ptr::null_mut();
    let st = unsafe { qjs_params_new_detuning(0.0, 380.0, 10.0, nbar, &mut p) };
    assert_eq!(st, QjsStatus::Ok);
    assert!(!p.is_null());
    p
}

#[test]
fn coefficients_match_rust_api() {
    let p = resonant(0.01);
    let rust = qjs::DetectorParams::from_detuning(0.0, 380.0, 10.0, 0.01).unwrap();
    let (mut b, mut d) = (0.0, 0.0);
    unsafe {
        assert_eq!(qjs_bright_coeff(p, 3, &mut b), QjsStatus::Ok);
        assert_eq!(qjs_dark_coeff(p, 3, &mut d), QjsStatus::Ok);
    }
    assert_eq!(b, qjs::bright_coeff(3, &rust).unwrap());
    assert_eq!(d, qjs::dark_coeff(3, &rust).unwrap());

    let (mut rb, mut rd, mut s) = (0.0, 0.0, 0.0);
    assert_eq!(unsafe { qjs_counting_rates(p, &mut rb, &mut rd, &mut s) }, QjsStatus::Ok);
    assert!((s - rb / rd).abs() <= 1e-12 * s);
    unsafe { qjs_params_free(p) };
}

#[test]
fn table_and_jump_round_trip() {
    let p = resonant(0.01);
    let mut table = ptr::null_mut();
    assert_eq!(unsafe { qjs_table_new(p, 20, 0, 1e-8, &mut table) }, QjsStatus::Ok);
    assert_eq!(unsafe { qjs_table_len(table) }, 21);

    let mut row = [f64::NAN; 3];
    let st = unsafe { qjs_table_get(table, 1, &mut row[0], &mut row[1], &mut row[2]) };
    assert_eq!(st, QjsStatus::Ok);
    assert!(row[0] > 0.0 && row[1] > 0.0 && row[2] == 0.0);
    // null outputs are skipped
    let st = unsafe { qjs_table_get(table, 0, ptr::null_mut(), &mut row[1], ptr::null_mut()) };
    assert_eq!(st, QjsStatus::Ok);
    let st = unsafe { qjs_table_get(table, 21, &mut row[0], ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(st, QjsStatus::Domain);
    assert!(last_error().contains("n_max"));

    let mut state = ptr::null_mut();
    assert_eq!(unsafe { qjs_state_new_thermal(1.0, 20, &mut state) }, QjsStatus::Ok);
    assert_eq!(unsafe { qjs_state_len(state) }, 21);

    let mut post = ptr::null_mut();
    let mut rate = 0.0;
    assert_eq!(unsafe { qjs_apply_jump(state, table, 1, &mut post, &mut rate) }, QjsStatus::Ok);
    assert!(rate > 0.0);
    assert_eq!(last_error(), "");
    let mut probs = vec![0.0; unsafe { qjs_state_len(post) }];
    assert_eq!(unsafe { qjs_state_copy(post, probs.as_mut_ptr(), probs.len()) }, QjsStatus::Ok);
    let total: f64 = probs.iter().sum();
    assert!((total - 1.0).abs() < 1e-12);

    unsafe {
        qjs_state_free(post);
        qjs_state_free(state);
        qjs_table_free(table);
        qjs_params_free(p);
    }
}

#[test]
fn weights_are_normalized() {
    let w = [1.0, 3.0];
    let mut state = ptr::null_mut();
    assert_eq!(unsafe { qjs_state_new_weights(w.as_ptr(), 2, &mut state) }, QjsStatus::Ok);
    let mut out = [0.0; 4];
    assert_eq!(unsafe { qjs_state_copy(state, out.as_mut_ptr(), 4) }, QjsStatus::Ok);
    assert_eq!(&out[..2], &[0.25, 0.75]);
    assert_eq!(out[2], 0.0);
    unsafe { qjs_state_free(state) };
}

#[test]
fn errors_map_to_status_codes() {
    let mut p = ptr::null_mut();
    let st = unsafe { qjs_params_new_detuning(0.0, -1.0, 10.0, 0.01, &mut p) };
    assert_eq!(st, QjsStatus::Domain);
    assert!(p.is_null());
    assert!(!last_error().is_empty());

    let st = unsafe { qjs_params_new_detuning(0.0, 380.0, 10.0, 0.01, ptr::null_mut()) };
    assert_eq!(st, QjsStatus::NullPointer);

    let mut x = 0.0;
    assert_eq!(unsafe { qjs_bright_coeff(ptr::null(), 0, &mut x) }, QjsStatus::NullPointer);

    // no thermal noise: the dark rate vanishes and the ratio is undefined
    let quiet = resonant(0.0);
    let (mut rb, mut rd, mut s) = (0.0, 0.0, 0.0);
    let st = unsafe { qjs_counting_rates(quiet, &mut rb, &mut rd, &mut s) };
    assert_eq!(st, QjsStatus::Noiseless);

    // vacuum with no dark counts cannot click
    let mut table = ptr::null_mut();
    assert_eq!(unsafe { qjs_table_new(quiet, 4, 0, 1e-8, &mut table) }, QjsStatus::Ok);
    let vac = [1.0];
    let mut state = ptr::null_mut();
    assert_eq!(unsafe { qjs_state_new_weights(vac.as_ptr(), 1, &mut state) }, QjsStatus::Ok);
    let mut post = ptr::null_mut();
    let mut rate = 0.0;
    let st = unsafe { qjs_apply_jump(state, table, 0, &mut post, &mut rate) };
    assert_eq!(st, QjsStatus::NoClickPossible);
    assert!(post.is_null());

    unsafe {
        qjs_state_free(state);
        qjs_table_free(table);
        qjs_params_free(quiet);
        qjs_params_free(ptr::null_mut());
    }
    assert_eq!(unsafe { qjs_table_len(ptr::null()) }, 0);
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/qjs.h")
}

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "qjs_last_error_message",
        "qjs_params_new_wavelengths",
        "qjs_params_new_detuning",
        "qjs_params_free",
        "qjs_counting_rates",
        "qjs_bright_coeff",
        "qjs_dark_coeff",
        "qjs_table_new",
        "qjs_table_free",
        "qjs_table_len",
        "qjs_table_get",
        "qjs_state_new_thermal",
        "qjs_state_new_weights",
        "qjs_state_free",
        "qjs_state_len",
        "qjs_state_copy",
        "qjs_apply_jump",
        "typedef struct QjsParams QjsParams;",
        "QJS_STATUS_PANIC = 15",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
}

fn cc() -> Option<String> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    Command::new(&cc).arg("--version").output().ok().filter(|o| o.status.success())?;
    Some(cc)
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let Some(cc) = cc() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    for lang in ["c", "c++"] {
        let out = Command::new(&cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(header())
            .output()
            .unwrap();
        assert!(out.status.success(), "{lang}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
