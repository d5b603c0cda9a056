use std::ffi::{CStr, CString};
use std::ptr;

use crowdmine_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0i8; 512];
    let n = unsafe { cm_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0, "no error recorded");
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn config(json: &str) -> *mut CmConfig {
    let json = CString::new(json).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { cm_config_from_json(json.as_ptr(), &mut cfg) }, CmStatus::Ok);
    cfg
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(cm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn run_write_and_verify_round_trip() {
    let cfg = config(r#"{"nodes": 2, "ticks": 1000, "window": 250, "sample_interval": 50, "seed": 11}"#);
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { cm_run_experiment(cfg, &mut run) }, CmStatus::Ok);

    let mut s = CmRunSummary::default();
    assert_eq!(unsafe { cm_run_summary(run, &mut s) }, CmStatus::Ok);
    assert_eq!((s.ticks, s.violations), (1000, 0));
    assert!(s.height > 0 && s.rows > 0);

    let mut last = CmMetricsRow::default();
    assert_eq!(unsafe { cm_run_row(run, s.rows - 1, &mut last) }, CmStatus::Ok);
    assert_eq!(last.supply, s.supply);
    assert_eq!(last.height, s.height);
    assert_eq!(unsafe { cm_run_row(run, s.rows, &mut last) }, CmStatus::OutOfRange);
    assert!(last_error().contains(&s.rows.to_string()));

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("chain.jsonl").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { cm_run_write_chain(run, path.as_ptr()) }, CmStatus::Ok);
    let mut v = CmVerifySummary::default();
    assert_eq!(unsafe { cm_verify_chain(cfg, path.as_ptr(), &mut v) }, CmStatus::Ok);
    assert_eq!((v.height, v.supply, v.conservation_gap), (s.height, s.supply, 0));

    unsafe {
        cm_run_free(run);
        cm_config_free(cfg);
    }
}

#[test]
fn config_json_round_trips() {
    let cfg = config(r#"{"nodes": 5}"#);
    let mut text = ptr::null_mut();
    assert_eq!(unsafe { cm_config_to_json(cfg, &mut text) }, CmStatus::Ok);
    let json = unsafe { CStr::from_ptr(text) }.to_str().unwrap().to_owned();
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed["nodes"], 5);
    let again = config(&json);
    unsafe {
        cm_string_free(text);
        cm_config_free(cfg);
        cm_config_free(again);
    }

    let mut def = ptr::null_mut();
    assert_eq!(unsafe { cm_config_new(&mut def) }, CmStatus::Ok);
    unsafe { cm_config_free(def) };
}

#[test]
fn bad_inputs_map_to_status_codes() {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { cm_config_from_json(ptr::null(), &mut cfg) }, CmStatus::NullPointer);
    let bad = CString::new("{not json").unwrap();
    assert_eq!(unsafe { cm_config_from_json(bad.as_ptr(), &mut cfg) }, CmStatus::InvalidConfig);
    assert!(cfg.is_null());
    let zero = CString::new(r#"{"nodes": 0}"#).unwrap();
    assert_eq!(unsafe { cm_config_from_json(zero.as_ptr(), &mut cfg) }, CmStatus::InvalidConfig);
    assert!(!last_error().is_empty());
    let bytes = [0xffu8, 0];
    assert_eq!(unsafe { cm_config_from_json(bytes.as_ptr().cast(), &mut cfg) }, CmStatus::InvalidUtf8);

    let def = config("{}");
    let missing = CString::new("/nonexistent/chain.jsonl").unwrap();
    let mut v = CmVerifySummary::default();
    assert_eq!(unsafe { cm_verify_chain(def, missing.as_ptr(), &mut v) }, CmStatus::Io);
    assert_eq!(unsafe { cm_run_summary(ptr::null(), ptr::null_mut()) }, CmStatus::NullPointer);
    unsafe { cm_config_free(def) };
}

#[test]
fn corrupt_dump_reports_its_status() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.jsonl");
    std::fs::write(&path, "{\"broken\n").unwrap();
    let cfg = config("{}");
    let p = CString::new(path.to_str().unwrap()).unwrap();
    let mut v = CmVerifySummary::default();
    assert_eq!(unsafe { cm_verify_chain(cfg, p.as_ptr(), &mut v) }, CmStatus::CorruptDump);
    unsafe { cm_config_free(cfg) };
}

#[test]
fn last_error_truncates_and_terminates() {
    let mut cfg = ptr::null_mut();
    unsafe { cm_config_from_json(ptr::null(), &mut cfg) };
    let full = unsafe { cm_last_error(ptr::null_mut(), 0) };
    let mut buf = [1i8; 4];
    assert_eq!(unsafe { cm_last_error(buf.as_mut_ptr(), buf.len()) }, full);
    assert_eq!(buf[3], 0);
    // A successful call clears it.
    let _ = config("{}");
    assert_eq!(unsafe { cm_last_error(ptr::null_mut(), 0) }, 0);
}

#[test]
fn attacks_through_the_abi_lose_the_burn() {
    let k_ppm = 50_000;
    let burn = |r: u64| (r * k_ppm as u64).div_ceil(1_000_000);
    let params = CmDoubleSpendParams { k_ppm, v_tx: burn(20_000) - 1, r_problem: 20_000, r_attacker: 20_500, conflict_amount: 0, seed: 1 };
    let mut out = CmAttackOutcome::default();
    assert_eq!(unsafe { cm_attack_double_spend(&params, &mut out) }, CmStatus::Ok);
    assert!(out.succeeded && out.validated && out.has_analytic);
    assert_eq!(out.realized_payoff, params.v_tx as i64 - burn(20_500) as i64);
    assert!(out.analytic_micro < 0);

    let cap = burn(10_000) - 1;
    let amounts = [cap];
    let fees = [cap];
    assert_eq!(unsafe { cm_attack_fee_grab(k_ppm, 10_000, amounts.as_ptr(), fees.as_ptr(), 1, 2, &mut out) }, CmStatus::Ok);
    assert!(out.validated);
    assert_eq!(out.realized_payoff, cap as i64 - burn(10_000) as i64);
    assert_eq!(unsafe { cm_attack_fee_grab(k_ppm, 10_000, ptr::null(), ptr::null(), 1, 2, &mut out) }, CmStatus::NullPointer);

    let mut micro = 0i64;
    assert_eq!(unsafe { cm_analytic_double_spend(40, 45, 1_000, 1_000, k_ppm, &mut micro) }, CmStatus::Ok);
    assert_eq!(micro, 40 * 1_000_000 - k_ppm as i64 * 1_000);
    assert_eq!(unsafe { cm_analytic_double_spend(60, 60, 1_000, 1_000, k_ppm, &mut micro) }, CmStatus::Precondition);
}
