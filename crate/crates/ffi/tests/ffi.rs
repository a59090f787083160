use std::ffi::{CStr, CString};
use std::ptr;

use fragsim_ffi::*;

const ALL_ONES: &str = r#"
[chemistry]
species = ["S"]
reactions = [
  { product = { S = 1 }, rate = 1.0 },
  { source = { S = 1 }, rate = 1.0 },
]
[compartments]
kappa_I = 1.0
kappa_E = 1.0
kappa_F = 1.0
kappa_C = 1.0
fragmentation_species = "S"
[inflow]
kind = "point_mass"
[kernel]
kind = "binomial_half"
[simulation]
t_max = 20.0
"#;

fn model(text: &str) -> (FragsimStatus, *mut FragsimModel) {
    let c = CString::new(text).unwrap();
    let mut m = ptr::null_mut();
    let s = unsafe { fragsim_model_from_toml(c.as_ptr(), &mut m) };
    (s, m)
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(fragsim_last_error()) }
        .to_str()
        .unwrap()
        .to_string()
}

#[test]
fn simulate_and_summarize() {
    let (s, m) = model(ALL_ONES);
    assert_eq!(s, FragsimStatus::Ok);
    let mut d = 0;
    assert_eq!(
        unsafe { fragsim_model_species_count(m, &mut d) },
        FragsimStatus::Ok
    );
    assert_eq!(d, 1);

    let mut r = ptr::null_mut();
    assert_eq!(
        unsafe { fragsim_simulate(m, 7, 0.0, 0, &mut r) },
        FragsimStatus::Ok
    );
    let mut sum = std::mem::MaybeUninit::<FragsimSummary>::uninit();
    assert_eq!(
        unsafe { fragsim_report_summary(r, sum.as_mut_ptr()) },
        FragsimStatus::Ok
    );
    let sum = unsafe { sum.assume_init() };
    assert_eq!(sum.final_time, 20.0);
    assert_eq!(sum.stop_reason, FragsimStopReason::Time);
    assert!(sum.event_count > 0);

    let mut buf = [0u64; 1];
    let mut n = 0;
    assert_eq!(
        unsafe { fragsim_report_species_totals(r, buf.as_mut_ptr(), 1, &mut n) },
        FragsimStatus::Ok
    );
    assert_eq!(n, 1);
    assert_eq!(buf[0], sum.final_mass);
    assert_eq!(
        unsafe { fragsim_report_species_totals(r, buf.as_mut_ptr(), 0, &mut n) },
        FragsimStatus::BufferTooSmall
    );

    let mut json = ptr::null_mut();
    assert_eq!(
        unsafe { fragsim_report_json(r, &mut json) },
        FragsimStatus::Ok
    );
    let text = unsafe { CStr::from_ptr(json) }
        .to_str()
        .unwrap()
        .to_string();
    assert!(text.contains("\"stop_reason\":\"time\""));
    unsafe {
        fragsim_string_free(json);
        fragsim_report_free(r);
        fragsim_model_free(m);
    }
}

#[test]
fn same_seed_same_report() {
    let (_, m) = model(ALL_ONES);
    let run = || {
        let mut r = ptr::null_mut();
        let mut json = ptr::null_mut();
        unsafe {
            assert_eq!(fragsim_simulate(m, 3, 5.0, 0, &mut r), FragsimStatus::Ok);
            assert_eq!(fragsim_report_json(r, &mut json), FragsimStatus::Ok);
            let s = CStr::from_ptr(json).to_owned();
            fragsim_string_free(json);
            fragsim_report_free(r);
            s
        }
    };
    assert_eq!(run(), run());
    unsafe { fragsim_model_free(m) };
}

#[test]
fn classify_all_ones() {
    let (_, m) = model(ALL_ONES);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { fragsim_classify(m, &mut json) }, FragsimStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }
        .to_str()
        .unwrap()
        .to_string();
    assert!(text.contains("\"positive_recurrent\""), "{text}");
    unsafe {
        fragsim_string_free(json);
        fragsim_model_free(m);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let (s, m) = model(&ALL_ONES.replace("kappa_F", "kapa_F"));
    assert_eq!(s, FragsimStatus::ParseError);
    assert!(m.is_null());
    assert!(last_error().contains("kapa_F"));

    let (s, _) = model(&ALL_ONES.replace(
        "fragmentation_species = \"S\"",
        "fragmentation_species = \"Q\"",
    ));
    assert_eq!(s, FragsimStatus::InvalidModel);
    assert!(last_error().contains('Q'));

    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { fragsim_model_from_toml(ptr::null(), &mut out) },
        FragsimStatus::NullPointer
    );
    assert_eq!(
        unsafe { fragsim_simulate(ptr::null(), 0, 1.0, 0, &mut ptr::null_mut()) },
        FragsimStatus::NullPointer
    );
    unsafe {
        fragsim_model_free(ptr::null_mut());
        fragsim_report_free(ptr::null_mut());
        fragsim_string_free(ptr::null_mut());
    }
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(fragsim_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Compiles a C program against the generated header when a C compiler is
/// available.
#[test]
fn header_compiles_as_c() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/fragsim.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in [
        "fragsim_model_from_toml",
        "fragsim_simulate",
        "fragsim_report_summary",
        "fragsim_classify",
        "fragsim_last_error",
    ] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let tmp = std::env::temp_dir().join(format!("fragsim_ffi_{}.c", std::process::id()));
    std::fs::write(
        &tmp,
        r#"#include "fragsim.h"
int main(void) {
    FragsimModel *m = 0;
    FragsimStatus s = fragsim_model_from_toml("", &m);
    FragsimSummary sum;
    (void)sum;
    return s == FRAGSIM_STATUS_OK ? 0 : 1;
}
"#,
    )
    .unwrap();
    let status = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
        .arg(dir.join("include"))
        .arg(&tmp)
        .status();
    let _ = std::fs::remove_file(&tmp);
    match status {
        Ok(s) => assert!(s.success(), "header does not compile"),
        Err(_) => eprintln!("no C compiler; skipped"),
    }
}
