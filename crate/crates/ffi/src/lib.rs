//! C ABI over the `ttj` crate.
//!
//! Cases and reports are opaque heap handles owned by the caller and
//! released with their `_free` function. Strings returned through `char **`
//! out-parameters are owned by the caller and released with
//! [`ttj_string_free`]. Every entry point returns a [`TtjStatus`]; on failure
//! [`ttj_last_error_message`] describes the problem for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ttj::casefile::CaseFile;
use ttj::engine::DefectFlags;
use ttj::harness::{run_case_traced, shrink, DefectReport, SynthesisPath, TestCase, Verdict};
use ttj::oracle::emit_sql;
use ttj::synth::SynthConfig;

/// Opaque test case.
pub struct TtjCase {
    inner: TestCase,
}

/// Opaque result of running a case.
pub struct TtjReport {
    inner: DefectReport,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TtjStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed case JSON or inconsistent case content.
    InvalidCase = 3,
    InvalidArgument = 4,
    /// Shrinking was asked for a case that does not fail.
    NotFailing = 5,
    /// A Rust panic was caught at the boundary.
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TtjVerdict {
    Pass = 0,
    Mismatch = 1,
    StructuredError = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn guard(f: impl FnOnce() -> Result<(), (TtjStatus, String)>) -> TtjStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TtjStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            TtjStatus::Internal
        }
    }
}

fn null() -> (TtjStatus, String) {
    (TtjStatus::NullPointer, "null pointer argument".into())
}

unsafe fn as_ref<'a, T>(p: *const T) -> Result<&'a T, (TtjStatus, String)> {
    p.as_ref().ok_or_else(null)
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, (TtjStatus, String)> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p).to_str().map_err(|e| (TtjStatus::InvalidUtf8, e.to_string()))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), (TtjStatus, String)> {
    if out.is_null() {
        return Err(null());
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), (TtjStatus, String)> {
    if out.is_null() {
        return Err(null());
    }
    let c = CString::new(s).map_err(|e| (TtjStatus::Internal, e.to_string()))?;
    *out = c.into_raw();
    Ok(())
}

/// Parses a case file document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ttj_case_from_json(json: *const c_char, out: *mut *mut TtjCase) -> TtjStatus {
    guard(|| {
        let text = read_str(json)?;
        let tc = CaseFile::parse(text)
            .and_then(|f| f.to_case())
            .map_err(|e| (TtjStatus::InvalidCase, e.to_string()))?;
        write_out(out, TtjCase { inner: tc })
    })
}

/// Synthesizes a case. `path` is 0 for tree-first, 1 for plan-first.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ttj_case_generate(
    seed: u64,
    max_size: u32,
    max_rel_size: u32,
    path: u32,
    out: *mut *mut TtjCase,
) -> TtjStatus {
    guard(|| {
        let cfg = SynthConfig { seed, max_size: max_size as usize, max_rel_size: max_rel_size as usize, ..SynthConfig::default() };
        cfg.validate().map_err(|e| (TtjStatus::InvalidArgument, e))?;
        let path = match path {
            0 => SynthesisPath::A,
            1 => SynthesisPath::B,
            p => return Err((TtjStatus::InvalidArgument, format!("unknown synthesis path {p}"))),
        };
        write_out(out, TtjCase { inner: path.generate(&cfg) })
    })
}

/// Canonical case file JSON.
///
/// # Safety
/// `tc` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ttj_case_to_json(tc: *const TtjCase, out: *mut *mut c_char) -> TtjStatus {
    guard(|| write_string(out, CaseFile::from_case(&as_ref(tc)?.inner).to_json()))
}

/// Sets the defect flags: bit 0 = m1, bit 1 = m2, bit 2 = m3.
///
/// # Safety
/// `tc` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ttj_case_set_defects(tc: *mut TtjCase, bits: u32) -> TtjStatus {
    guard(|| {
        if bits > 0b111 {
            return Err((TtjStatus::InvalidArgument, format!("unknown defect bits {bits:#x}")));
        }
        let c = tc.as_mut().ok_or_else(null)?;
        c.inner.flags = DefectFlags::from_bits(bits);
        Ok(())
    })
}

/// Number of relations and total tuples.
///
/// # Safety
/// `tc` must be a live handle; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ttj_case_size(tc: *const TtjCase, relations: *mut u32, tuples: *mut u32) -> TtjStatus {
    guard(|| {
        let c = as_ref(tc)?;
        if relations.is_null() || tuples.is_null() {
            return Err(null());
        }
        *relations = c.inner.relation_count() as u32;
        *tuples = c.inner.tuple_count() as u32;
        Ok(())
    })
}

/// DDL, inserts and the equivalent SELECT.
///
/// # Safety
/// `tc` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ttj_case_emit_sql(tc: *const TtjCase, out: *mut *mut c_char) -> TtjStatus {
    guard(|| write_string(out, emit_sql(&as_ref(tc)?.inner.db)))
}

/// Shrinks a failing case to a smaller one with the same verdict kind.
///
/// # Safety
/// `tc` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ttj_case_shrink(tc: *const TtjCase, out: *mut *mut TtjCase) -> TtjStatus {
    guard(|| {
        let tc = &as_ref(tc)?.inner;
        let kind = ttj::harness::run_case(tc).verdict.kind();
        let mre = shrink(tc, &kind).map_err(|e| (TtjStatus::NotFailing, e.to_string()))?;
        write_out(out, TtjCase { inner: mre })
    })
}

/// # Safety
/// `tc` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ttj_case_free(tc: *mut TtjCase) {
    if !tc.is_null() {
        drop(Box::from_raw(tc));
    }
}

/// Runs the case through all evaluators; `trace` nonzero records the
/// physical event log.
///
/// # Safety
/// `tc` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ttj_run(tc: *const TtjCase, trace: bool, out: *mut *mut TtjReport) -> TtjStatus {
    guard(|| {
        let report = run_case_traced(&as_ref(tc)?.inner, trace);
        write_out(out, TtjReport { inner: report })
    })
}

/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ttj_report_verdict(report: *const TtjReport, out: *mut TtjVerdict) -> TtjStatus {
    guard(|| {
        let r = as_ref(report)?;
        if out.is_null() {
            return Err(null());
        }
        *out = match r.inner.verdict {
            Verdict::Pass { .. } => TtjVerdict::Pass,
            Verdict::Mismatch { .. } => TtjVerdict::Mismatch,
            Verdict::StructuredError { .. } => TtjVerdict::StructuredError,
        };
        Ok(())
    })
}

/// The report as a JSON document.
///
/// # Safety
/// `report` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ttj_report_to_json(report: *const TtjReport, out: *mut *mut c_char) -> TtjStatus {
    guard(|| {
        let json = serde_json::to_string(&as_ref(report)?.inner.to_json()).map_err(|e| (TtjStatus::Internal, e.to_string()))?;
        write_string(out, json)
    })
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ttj_report_free(report: *mut TtjReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ttj_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn ttj_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn ttj_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn null_arguments_are_reported() {
        unsafe {
            let mut out = ptr::null_mut();
            assert_eq!(ttj_case_from_json(ptr::null(), &mut out), TtjStatus::NullPointer);
            let msg = CStr::from_ptr(ttj_last_error_message()).to_str().unwrap();
            assert!(msg.contains("null"));
            assert_eq!(ttj_case_set_defects(ptr::null_mut(), 1), TtjStatus::NullPointer);
            ttj_case_free(ptr::null_mut());
            ttj_report_free(ptr::null_mut());
            ttj_string_free(ptr::null_mut());
        }
    }

    #[test]
    fn panics_are_contained() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, TtjStatus::Internal);
        let msg = unsafe { CStr::from_ptr(ttj_last_error_message()) }.to_str().unwrap().to_string();
        assert!(msg.contains("boom"));
    }
}
