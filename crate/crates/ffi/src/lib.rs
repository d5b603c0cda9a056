//! C ABI over the crowdmine library.
//!
//! Handles are opaque and owned by the caller once returned; each has a matching `_free`.
//! Every fallible call returns a [`CmStatus`]; the message for the most recent failure on
//! the calling thread is available from [`cm_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use crowdmine::adversary::{analytic_double_spend_payoff, run_double_spend, run_fee_grab, AttackOutcome, DoubleSpendParams, FeeGrabParams};
use crowdmine::harness::{run_experiment, verify_chain, write_chain_dump, ExperimentConfig, HarnessError, RunOutput, VerifyError};
use crowdmine::ledger::{Amount, Ratio};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    Io = 4,
    CorruptDump = 5,
    ValidationFailure = 6,
    /// The run finished but an online check failed; the run handle is still returned.
    InvariantViolation = 7,
    Precondition = 8,
    OutOfRange = 9,
    Panic = 10,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl std::fmt::Display) {
    let text = msg.to_string().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: CmStatus, msg: impl std::fmt::Display) -> CmStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning a panic into [`CmStatus::Panic`].
fn guard(f: impl FnOnce() -> CmStatus) -> CmStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned());
            fail(CmStatus::Panic, msg.unwrap_or_else(|| "panic".into()))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, CmStatus> {
    if p.is_null() {
        return Err(fail(CmStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|e| fail(CmStatus::InvalidUtf8, e))
}

fn harness_status(e: &HarnessError) -> CmStatus {
    match e {
        HarnessError::ConfigInvalid(_) | HarnessError::EmptySeries => CmStatus::InvalidConfig,
        HarnessError::OutputUnwritable { .. } => CmStatus::Io,
        HarnessError::InvariantViolation { .. } => CmStatus::InvariantViolation,
        HarnessError::Verify(v) => verify_status(v),
    }
}

fn verify_status(e: &VerifyError) -> CmStatus {
    match e {
        VerifyError::Io(_) => CmStatus::Io,
        VerifyError::CorruptDump { .. } => CmStatus::CorruptDump,
        VerifyError::ValidationFailure { .. } => CmStatus::ValidationFailure,
    }
}

fn to_i64(v: i128) -> Result<i64, CmStatus> {
    i64::try_from(v).map_err(|_| fail(CmStatus::OutOfRange, format!("{v} does not fit in 64 bits")))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (truncated, always terminated)
/// and returns the full message length without the terminator. Returns 0 when no error is set.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cm_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must be null or a string returned by this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn cm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------------------------------
// Experiment configuration

/// Opaque experiment configuration.
pub struct CmConfig(ExperimentConfig);

/// Creates the default configuration.
///
/// # Safety
/// `out` must be a valid pointer to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn cm_config_new(out: *mut *mut CmConfig) -> CmStatus {
    guard(|| {
        if out.is_null() {
            return fail(CmStatus::NullPointer, "null output slot");
        }
        *out = Box::into_raw(Box::new(CmConfig(ExperimentConfig::default())));
        CmStatus::Ok
    })
}

/// Creates a configuration from a JSON object deep-merged over the defaults, so partial
/// objects such as `{"nodes": 3}` are accepted.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` a valid pointer to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn cm_config_from_json(json: *const c_char, out: *mut *mut CmConfig) -> CmStatus {
    guard(|| {
        if out.is_null() {
            return fail(CmStatus::NullPointer, "null output slot");
        }
        let text = match str_arg(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let overlay: serde_json::Value = match serde_json::from_str(text) {
            Ok(v) => v,
            Err(e) => return fail(CmStatus::InvalidConfig, e),
        };
        let cfg = match ExperimentConfig::default().overlay(&overlay) {
            Ok(c) => c,
            Err(e) => return fail(harness_status(&e), e),
        };
        if let Err(e) = cfg.validate() {
            return fail(harness_status(&e), e);
        }
        *out = Box::into_raw(Box::new(CmConfig(cfg)));
        CmStatus::Ok
    })
}

/// Serializes a configuration as JSON; free the result with [`cm_string_free`].
///
/// # Safety
/// `cfg` must be a live handle; `out` a valid pointer to a writable string slot.
#[no_mangle]
pub unsafe extern "C" fn cm_config_to_json(cfg: *const CmConfig, out: *mut *mut c_char) -> CmStatus {
    guard(|| {
        let (Some(cfg), false) = (cfg.as_ref(), out.is_null()) else {
            return fail(CmStatus::NullPointer, "null argument");
        };
        let text = serde_json::to_string(&cfg.0).expect("config serializes");
        *out = CString::new(text).expect("JSON has no NUL").into_raw();
        CmStatus::Ok
    })
}

/// # Safety
/// `cfg` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cm_config_free(cfg: *mut CmConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

// ---------------------------------------------------------------------------------------
// Runs

/// Opaque finished experiment.
pub struct CmRun(RunOutput);

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CmRunSummary {
    pub ticks: u64,
    pub height: u64,
    pub rows: usize,
    pub violations: usize,
    pub reorgs: u64,
    pub supply: i64,
    pub minted: u64,
    pub burned: u64,
}

/// One metrics window.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CmMetricsRow {
    pub start: u64,
    pub end: u64,
    pub blocks: u64,
    pub user_blocks: u64,
    pub txs: u64,
    pub block_rate: f64,
    pub problem_rate: f64,
    pub tx_rate: f64,
    pub utilization: f64,
    pub height: u64,
    pub supply: i64,
    pub minted: u64,
    pub burned: u64,
    pub locked: u64,
}

/// Runs an experiment in memory (the config's output directory, if any, is also written).
/// On [`CmStatus::Ok`] or [`CmStatus::InvariantViolation`] `*out` holds the run.
///
/// # Safety
/// `cfg` must be a live handle; `out` a valid pointer to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn cm_run_experiment(cfg: *const CmConfig, out: *mut *mut CmRun) -> CmStatus {
    guard(|| {
        let (Some(cfg), false) = (cfg.as_ref(), out.is_null()) else {
            return fail(CmStatus::NullPointer, "null argument");
        };
        match run_experiment(&cfg.0) {
            Ok(run) => {
                let checked = run.check();
                *out = Box::into_raw(Box::new(CmRun(run)));
                match checked {
                    Ok(()) => CmStatus::Ok,
                    Err(e) => fail(harness_status(&e), e),
                }
            }
            Err(e) => fail(harness_status(&e), e),
        }
    })
}

/// # Safety
/// `run` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cm_run_summary(run: *const CmRun, out: *mut CmRunSummary) -> CmStatus {
    guard(|| {
        let (Some(run), false) = (run.as_ref(), out.is_null()) else {
            return fail(CmStatus::NullPointer, "null argument");
        };
        let s = &run.0.series;
        let last = s.rows.last();
        let supply = match to_i64(last.map_or(0, |r| r.supply)) {
            Ok(v) => v,
            Err(st) => return st,
        };
        *out = CmRunSummary {
            ticks: s.ticks,
            height: s.stats.main_height,
            rows: s.rows.len(),
            violations: run.0.violations.len(),
            reorgs: s.stats.reorgs,
            supply,
            minted: last.map_or(0, |r| r.minted),
            burned: last.map_or(0, |r| r.burned),
        };
        CmStatus::Ok
    })
}

/// Copies metrics window `index` into `out`.
///
/// # Safety
/// `run` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cm_run_row(run: *const CmRun, index: usize, out: *mut CmMetricsRow) -> CmStatus {
    guard(|| {
        let (Some(run), false) = (run.as_ref(), out.is_null()) else {
            return fail(CmStatus::NullPointer, "null argument");
        };
        let rows = &run.0.series.rows;
        let Some(r) = rows.get(index) else {
            return fail(CmStatus::OutOfRange, format!("row {index} of {}", rows.len()));
        };
        let supply = match to_i64(r.supply) {
            Ok(v) => v,
            Err(st) => return st,
        };
        *out = CmMetricsRow {
            start: r.start,
            end: r.end,
            blocks: r.blocks,
            user_blocks: r.user_blocks,
            txs: r.txs,
            block_rate: r.block_rate,
            problem_rate: r.problem_rate,
            tx_rate: r.tx_rate,
            utilization: r.utilization,
            height: r.height,
            supply,
            minted: r.minted,
            burned: r.burned,
            locked: r.locked,
        };
        CmStatus::Ok
    })
}

/// Writes the run's main chain as a JSON-lines dump readable by [`cm_verify_chain`].
///
/// # Safety
/// `run` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cm_run_write_chain(run: *const CmRun, path: *const c_char) -> CmStatus {
    guard(|| {
        let Some(run) = run.as_ref() else {
            return fail(CmStatus::NullPointer, "null run");
        };
        let path = match str_arg(path) {
            Ok(p) => PathBuf::from(p),
            Err(s) => return s,
        };
        match write_chain_dump(&path, &run.0.genesis, &run.0.main_chain) {
            Ok(()) => CmStatus::Ok,
            Err(e) => fail(CmStatus::Io, format!("{}: {e}", path.display())),
        }
    })
}

/// # Safety
/// `run` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn cm_run_free(run: *mut CmRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

// ---------------------------------------------------------------------------------------
// Replay

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CmVerifySummary {
    pub height: u64,
    pub tip: [u8; 32],
    pub supply: i64,
    pub conservation_gap: i64,
    /// Height of the first invalid block on [`CmStatus::ValidationFailure`], else 0.
    pub failed_height: u64,
}

/// Replays a chain dump under `cfg`'s protocol parameters.
///
/// # Safety
/// `cfg` must be a live handle, `path` a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cm_verify_chain(cfg: *const CmConfig, path: *const c_char, out: *mut CmVerifySummary) -> CmStatus {
    guard(|| {
        let (Some(cfg), false) = (cfg.as_ref(), out.is_null()) else {
            return fail(CmStatus::NullPointer, "null argument");
        };
        let path = match str_arg(path) {
            Ok(p) => PathBuf::from(p),
            Err(s) => return s,
        };
        *out = CmVerifySummary::default();
        match verify_chain(&path, &cfg.0.chain) {
            Ok(r) => {
                let st = r.final_state();
                let (supply, gap) = match (to_i64(st.total_supply()), to_i64(st.conservation_gap())) {
                    (Ok(a), Ok(b)) => (a, b),
                    (Err(s), _) | (_, Err(s)) => return s,
                };
                *out = CmVerifySummary { height: r.height, tip: r.tip.0, supply, conservation_gap: gap, failed_height: 0 };
                CmStatus::Ok
            }
            Err(e) => {
                if let VerifyError::ValidationFailure { height, .. } = &e {
                    (*out).failed_height = *height;
                }
                fail(verify_status(&e), e)
            }
        }
    })
}

// ---------------------------------------------------------------------------------------
// Attacks

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CmAttackOutcome {
    pub succeeded: bool,
    pub validated: bool,
    pub realized_payoff: i64,
    /// Analytic bound in millionths of a token; meaningful only when `has_analytic`.
    pub analytic_micro: i64,
    pub has_analytic: bool,
    pub ticks: u64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CmDoubleSpendParams {
    /// Burn ratio in parts per million.
    pub k_ppm: u32,
    pub v_tx: u64,
    pub r_problem: u64,
    pub r_attacker: u64,
    pub conflict_amount: u64,
    pub seed: u64,
}

fn outcome(o: AttackOutcome) -> Result<CmAttackOutcome, CmStatus> {
    let analytic = o.analytic_payoff.map(|p| to_i64(p.micro)).transpose()?;
    Ok(CmAttackOutcome {
        succeeded: o.succeeded,
        validated: o.validated,
        realized_payoff: to_i64(o.realized_payoff)?,
        analytic_micro: analytic.unwrap_or(0),
        has_analytic: analytic.is_some(),
        ticks: o.ticks,
    })
}

fn write_outcome(result: Result<AttackOutcome, crowdmine::adversary::AttackError>, out: &mut CmAttackOutcome) -> CmStatus {
    match result.map_err(|e| fail(CmStatus::Precondition, e)).and_then(outcome) {
        Ok(o) => {
            *out = o;
            CmStatus::Ok
        }
        Err(s) => s,
    }
}

/// Scripted double spend against a block carrying a payment of `v_tx`.
///
/// # Safety
/// `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cm_attack_double_spend(params: *const CmDoubleSpendParams, out: *mut CmAttackOutcome) -> CmStatus {
    guard(|| {
        let (Some(p), Some(out)) = (params.as_ref(), out.as_mut()) else {
            return fail(CmStatus::NullPointer, "null argument");
        };
        let p = DoubleSpendParams {
            k: Ratio::from_ppm(p.k_ppm),
            v_tx: Amount(p.v_tx),
            r_problem: Amount(p.r_problem),
            r_attacker: Amount(p.r_attacker),
            conflict_amount: Amount(p.conflict_amount),
            seed: p.seed,
        };
        write_outcome(run_double_spend(&p), out)
    })
}

/// Scripted fee grab: the attacker mines its own problem's block holding `count` transfers
/// with the given amounts and fees.
///
/// # Safety
/// `amounts` and `fees` must each point to `count` readable values (or be null when
/// `count` is 0); `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cm_attack_fee_grab(
    k_ppm: u32,
    r_attacker: u64,
    amounts: *const u64,
    fees: *const u64,
    count: usize,
    seed: u64,
    out: *mut CmAttackOutcome,
) -> CmStatus {
    guard(|| {
        let Some(out) = out.as_mut() else {
            return fail(CmStatus::NullPointer, "null output");
        };
        if count > 0 && (amounts.is_null() || fees.is_null()) {
            return fail(CmStatus::NullPointer, "null transfer arrays");
        }
        let transfers = if count == 0 {
            Vec::new()
        } else {
            let a = std::slice::from_raw_parts(amounts, count);
            let f = std::slice::from_raw_parts(fees, count);
            a.iter().zip(f).map(|(&a, &f)| (Amount(a), Amount(f))).collect()
        };
        let p = FeeGrabParams { k: Ratio::from_ppm(k_ppm), r_attacker: Amount(r_attacker), transfers, seed };
        write_outcome(run_fee_grab(&p), out)
    })
}

/// Closed-form double-spend payoff `v_tx - k * r_attacker`, in millionths of a token.
///
/// # Safety
/// `out_micro` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cm_analytic_double_spend(
    v_tx: u64,
    volume: u64,
    r_problem: u64,
    r_attacker: u64,
    k_ppm: u32,
    out_micro: *mut i64,
) -> CmStatus {
    guard(|| {
        let Some(out) = out_micro.as_mut() else {
            return fail(CmStatus::NullPointer, "null output");
        };
        match analytic_double_spend_payoff(Amount(v_tx), Amount(volume), Amount(r_problem), Amount(r_attacker), Ratio::from_ppm(k_ppm)) {
            Ok(p) => match to_i64(p.micro) {
                Ok(v) => {
                    *out = v;
                    CmStatus::Ok
                }
                Err(s) => s,
            },
            Err(e) => fail(CmStatus::Precondition, e),
        }
    })
}
