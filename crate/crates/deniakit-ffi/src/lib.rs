//! C ABI over deniakit.
//!
//! Every function returns a [`DkStatus`]; on failure the message is kept per
//! thread and read back with [`dk_last_error_message`]. Handles are opaque
//! and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use deniakit::channel::{is_physically_degraded, BroadcastChannel, LoadError};
use deniakit::regions::{
    bec_closed_form_rate, closed_form_region, message_region, receiver_region, transmitter_region,
    ClosedForm, RegionBoundary, RegionConfig,
};
use deniakit::zeroinfo::zero_info_partition;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DkStatus {
    Ok = 0,
    NullPointer = 1,
    /// Malformed JSON or text that is not UTF-8.
    Parse = 2,
    /// Well-formed input describing an invalid object or parameter.
    Invalid = 3,
    /// The computation does not apply, e.g. a non-degraded channel.
    Domain = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DkSide {
    /// Inputs, classified by the eavesdropper's channel.
    Transmitter = 0,
    /// Bob's outputs, classified by the degradation map.
    Receiver = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DkRegionKind {
    Message = 0,
    Transmitter = 1,
    Receiver = 2,
    Equivocation = 3,
    Bcc = 4,
}

/// Opaque broadcast channel.
pub struct DkChannel(BroadcastChannel);

/// Opaque region frontier.
pub struct DkRegion(RegionBoundary);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: DkStatus, msg: impl Into<String>) -> DkStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn domain(e: deniakit::error::Error) -> DkStatus {
    let status = match e {
        deniakit::error::Error::NotDegraded { .. } | deniakit::error::Error::BudgetExceeded { .. } => DkStatus::Domain,
        _ => DkStatus::Invalid,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> DkStatus) -> DkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(DkStatus::Panic, "internal panic"),
    }
}

/// Copies the last error message of this thread into `buf` (NUL
/// terminated, truncated to `len`). Returns the full length including the
/// terminator; `buf` may be null to query it.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn dk_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parses a channel from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dk_channel_from_json(json: *const c_char, out: *mut *mut DkChannel) -> DkStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return fail(DkStatus::NullPointer, "null argument");
        }
        let Ok(text) = CStr::from_ptr(json).to_str() else {
            return fail(DkStatus::Parse, "channel text is not UTF-8");
        };
        match BroadcastChannel::from_json_str(text) {
            Ok(ch) => {
                *out = Box::into_raw(Box::new(DkChannel(ch)));
                DkStatus::Ok
            }
            Err(LoadError::Parse(e)) => fail(
                DkStatus::Parse,
                format!("malformed channel at line {} column {}: {e}", e.line(), e.column()),
            ),
            Err(LoadError::Invalid(e)) => domain(e),
        }
    })
}

/// The erasure example: `Y = X` binary, `Z` an erasure of `X` with
/// probability `p`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dk_channel_erasure(p: f64, out: *mut *mut DkChannel) -> DkStatus {
    guard(|| {
        if out.is_null() {
            return fail(DkStatus::NullPointer, "null argument");
        }
        match BroadcastChannel::erasure_example(p) {
            Ok(ch) => {
                *out = Box::into_raw(Box::new(DkChannel(ch)));
                DkStatus::Ok
            }
            Err(e) => domain(e),
        }
    })
}

/// # Safety
/// `ch` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dk_channel_free(ch: *mut DkChannel) {
    if !ch.is_null() {
        drop(Box::from_raw(ch));
    }
}

/// Alphabet sizes of `X`, `Y` and `Z`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dk_channel_sizes(ch: *const DkChannel, x: *mut usize, y: *mut usize, z: *mut usize) -> DkStatus {
    if ch.is_null() || x.is_null() || y.is_null() || z.is_null() {
        return fail(DkStatus::NullPointer, "null argument");
    }
    let ch = &(*ch).0;
    *x = ch.x_size();
    *y = ch.y_size();
    *z = ch.z_size();
    DkStatus::Ok
}

/// Degradedness test; `residual` is the composition error of the best map.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dk_channel_is_degraded(
    ch: *const DkChannel,
    tol: f64,
    degraded: *mut bool,
    residual: *mut f64,
) -> DkStatus {
    guard(|| {
        if ch.is_null() || degraded.is_null() || residual.is_null() {
            return fail(DkStatus::NullPointer, "null argument");
        }
        let d = is_physically_degraded(&(*ch).0, tol);
        *degraded = d.degraded;
        *residual = d.residual;
        DkStatus::Ok
    })
}

/// Zero-information class label of every symbol on `side`, written to
/// `labels[0..len]`; `len` must equal the alphabet size. Labels follow
/// first appearance.
///
/// # Safety
/// `labels` must hold `len` entries; the other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dk_zero_info_classes(
    ch: *const DkChannel,
    side: DkSide,
    row_tol: f64,
    labels: *mut usize,
    len: usize,
    num_classes: *mut usize,
) -> DkStatus {
    guard(|| {
        if ch.is_null() || labels.is_null() || num_classes.is_null() {
            return fail(DkStatus::NullPointer, "null argument");
        }
        let ch = &(*ch).0;
        let part = match side {
            DkSide::Transmitter => zero_info_partition(&ch.judy(), row_tol),
            DkSide::Receiver => {
                let d = is_physically_degraded(ch, deniakit::channel::DEGRADED_TOL);
                match d.witness.filter(|_| d.degraded) {
                    Some(w) => zero_info_partition(&w, row_tol),
                    None => return domain(deniakit::error::Error::NotDegraded { residual: d.residual }),
                }
            }
        };
        if len != part.alphabet_size() {
            return fail(
                DkStatus::BufferTooSmall,
                format!("labels needs {} entries, got {len}", part.alphabet_size()),
            );
        }
        std::slice::from_raw_parts_mut(labels, len).copy_from_slice(part.labels());
        *num_classes = part.num_classes();
        DkStatus::Ok
    })
}

unsafe fn grid_arg<'a>(grid: *const f64, len: usize) -> Option<&'a [f64]> {
    (!grid.is_null() && len > 0).then(|| std::slice::from_raw_parts(grid, len))
}

fn closed_of(kind: DkRegionKind) -> Option<ClosedForm> {
    match kind {
        DkRegionKind::Message => Some(ClosedForm::Rm),
        DkRegionKind::Equivocation => Some(ClosedForm::Req),
        DkRegionKind::Bcc => Some(ClosedForm::Rbcc),
        DkRegionKind::Transmitter | DkRegionKind::Receiver => None,
    }
}

/// Frontier of `kind` on the `D` values in `grid` (null or `len` 0: the
/// default 101-point grid), computed by the optimizer with `seed`.
/// Equivocation and BCC regions exist only as closed forms.
///
/// # Safety
/// `grid` must be null or hold `len` values; `ch` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dk_region_compute(
    ch: *const DkChannel,
    kind: DkRegionKind,
    grid: *const f64,
    len: usize,
    seed: u64,
    out: *mut *mut DkRegion,
) -> DkStatus {
    guard(|| {
        if ch.is_null() || out.is_null() {
            return fail(DkStatus::NullPointer, "null argument");
        }
        let ch = &(*ch).0;
        let grid = grid_arg(grid, len);
        let mut cfg = RegionConfig::default();
        cfg.opt.seed = seed;
        let res = match kind {
            DkRegionKind::Message => message_region(ch, grid, None, &cfg),
            DkRegionKind::Transmitter => transmitter_region(ch, grid, &cfg),
            DkRegionKind::Receiver => receiver_region(ch, grid, &cfg),
            DkRegionKind::Equivocation | DkRegionKind::Bcc => {
                return fail(DkStatus::Invalid, "use dk_region_closed_form for this region")
            }
        };
        match res {
            Ok(b) => {
                *out = Box::into_raw(Box::new(DkRegion(b)));
                DkStatus::Ok
            }
            Err(e) => domain(e),
        }
    })
}

/// Closed-form frontier of the erasure example with parameter `p`.
///
/// # Safety
/// `grid` must be null or hold `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dk_region_closed_form(
    kind: DkRegionKind,
    p: f64,
    grid: *const f64,
    len: usize,
    out: *mut *mut DkRegion,
) -> DkStatus {
    guard(|| {
        if out.is_null() {
            return fail(DkStatus::NullPointer, "null argument");
        }
        let Some(cf) = closed_of(kind) else {
            return fail(DkStatus::Invalid, "no closed form for this region");
        };
        match closed_form_region(cf, p, grid_arg(grid, len), 101) {
            Ok(b) => {
                *out = Box::into_raw(Box::new(DkRegion(b)));
                DkStatus::Ok
            }
            Err(e) => domain(e),
        }
    })
}

/// Largest rate of the closed form at deniability `d`; `feasible` is false
/// when `d` exceeds the largest deniability.
///
/// # Safety
/// `rate` and `feasible` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dk_closed_form_rate(
    kind: DkRegionKind,
    p: f64,
    d: f64,
    rate: *mut f64,
    feasible: *mut bool,
) -> DkStatus {
    guard(|| {
        if rate.is_null() || feasible.is_null() {
            return fail(DkStatus::NullPointer, "null argument");
        }
        let Some(cf) = closed_of(kind) else {
            return fail(DkStatus::Invalid, "no closed form for this region");
        };
        match bec_closed_form_rate(cf, p, d) {
            Ok(r) => {
                *feasible = r.is_some();
                *rate = r.unwrap_or(f64::NAN);
                DkStatus::Ok
            }
            Err(e) => domain(e),
        }
    })
}

/// Number of frontier points (grid values above the largest deniability
/// are omitted).
///
/// # Safety
/// `r` must be a valid region handle.
#[no_mangle]
pub unsafe extern "C" fn dk_region_len(r: *const DkRegion) -> usize {
    if r.is_null() {
        0
    } else {
        let r = &*r;
        r.0.points.len()
    }
}

/// Point `i` of the frontier.
///
/// # Safety
/// `r`, `d` and `rate` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dk_region_point(r: *const DkRegion, i: usize, d: *mut f64, rate: *mut f64) -> DkStatus {
    if r.is_null() || d.is_null() || rate.is_null() {
        return fail(DkStatus::NullPointer, "null argument");
    }
    let r = &*r;
    match r.0.points.get(i) {
        Some(p) => {
            *d = p.d;
            *rate = p.r;
            DkStatus::Ok
        }
        None => fail(DkStatus::Invalid, format!("point {i} out of range")),
    }
}

/// # Safety
/// `r` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dk_region_free(r: *mut DkRegion) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
