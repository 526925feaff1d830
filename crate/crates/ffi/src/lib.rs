//! C ABI over the qfi library.
//!
//! Every fallible function returns a [`QfiStatus`]; on failure a message is
//! available from [`qfi_last_error_message`] on the calling thread. Handles
//! are opaque and released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;

use qfi::floquet::QfiEvaluator;
use qfi::henon_heiles::{HHQuantumModel, HenonHeilesFlow};
use qfi::kicked_top::{kicked_top_bundle, KickedTopFlow, KickedTopParams};
use qfi::rotor::{rotor_bundle, rotor_coherent_state, RotorFlow, RotorParams};
use qfi::semiclassical::{
    build_mc_ensemble, build_square_grid, semiclassical_qfi, CapGridTemplate, CapProjection,
    McCutoff,
};
use qfi::spin::coherent_state;
use qfi::Error;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QfiStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Usage = 3,
    Numerical = 4,
    Truncation = 5,
    Config = 6,
    Resources = 7,
    Io = 8,
    Panic = 9,
}

impl From<&Error> for QfiStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => QfiStatus::Domain,
            Error::Usage(_) => QfiStatus::Usage,
            Error::Numerical(_) => QfiStatus::Numerical,
            Error::Truncation(_) => QfiStatus::Truncation,
            Error::Config(_) => QfiStatus::Config,
            Error::Resources(_) => QfiStatus::Resources,
            Error::Io(_) | Error::Json(_) => QfiStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Runs `f`, storing its value in `out`, and converts errors and panics.
fn guard<T>(out: *mut T, f: impl FnOnce() -> qfi::Result<T>) -> QfiStatus {
    if out.is_null() {
        set_error("output pointer is null");
        return QfiStatus::NullPointer;
    }
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => {
            // SAFETY: checked non-null above; the caller provides writable storage.
            unsafe { out.write(v) };
            QfiStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(&e.to_string());
            QfiStatus::from(&e)
        }
        Err(_) => {
            set_error("internal panic");
            QfiStatus::Panic
        }
    }
}

fn deref<'a, T>(handle: *const T) -> qfi::Result<&'a T> {
    // SAFETY: non-null handles come from the matching `_new` function and
    // stay valid until `_free`.
    unsafe { handle.as_ref() }.ok_or_else(|| Error::Usage("handle is null".into()))
}

/// Message of the last failed call on this thread (empty if none). The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qfi_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qfi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `|I - I_sc|/(I + I_sc)`, with `0/0` taken as 0.
#[no_mangle]
pub extern "C" fn qfi_delta(i_exact: f64, i_sc: f64) -> f64 {
    qfi::scan::delta(i_exact, i_sc)
}

/// Kicked top at fixed `(J, β, k, t)`. The exact propagator is built on the
/// first exact query and reused.
pub struct QfiKickedTop {
    params: KickedTopParams,
    exact: OnceLock<Result<QfiEvaluator, (QfiStatus, String)>>,
}

/// # Safety
/// `out` must be null or point to writable storage for a handle pointer.
#[no_mangle]
pub unsafe extern "C" fn qfi_kicked_top_new(
    j: f64,
    beta: f64,
    k: f64,
    t: u64,
    out: *mut *mut QfiKickedTop,
) -> QfiStatus {
    guard(out, || {
        let params = KickedTopParams { j, beta, k, t };
        params.validate()?;
        Ok(Box::into_raw(Box::new(QfiKickedTop {
            params,
            exact: OnceLock::new(),
        })))
    })
}

/// # Safety
/// `handle` must be null or come from [`qfi_kicked_top_new`] and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn qfi_kicked_top_free(handle: *mut QfiKickedTop) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Exact QFI of the coherent state at `(φ, z)`.
///
/// # Safety
/// `handle` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qfi_kicked_top_exact(
    handle: *const QfiKickedTop,
    phi: f64,
    z: f64,
    out: *mut f64,
) -> QfiStatus {
    guard(out, || {
        let h = deref(handle)?;
        let eval = h.exact.get_or_init(|| {
            kicked_top_bundle(&h.params)
                .map(QfiEvaluator::new)
                .map_err(|e| (QfiStatus::from(&e), e.to_string()))
        });
        let eval = match eval {
            Ok(e) => e,
            Err((_, msg)) => return Err(Error::Numerical(msg.clone())),
        };
        let psi = coherent_state(h.params.j, z.clamp(-1.0, 1.0).acos(), phi)?;
        eval.qfi(&psi.amplitudes)
    })
}

/// Semiclassical QFI at `(φ, z)` on an `r`-resolution cap of radius
/// `reff_multiple` widths.
///
/// # Safety
/// `handle` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qfi_kicked_top_semiclassical(
    handle: *const QfiKickedTop,
    phi: f64,
    z: f64,
    r: u32,
    reff_multiple: f64,
    out: *mut f64,
) -> QfiStatus {
    guard(out, || {
        let h = deref(handle)?;
        let p = h.params;
        let template = CapGridTemplate::new(p.j, r, reff_multiple, CapProjection::Orthographic)?;
        let cap = template.place(z.clamp(-1.0, 1.0).acos(), phi);
        Ok(semiclassical_qfi(&cap, &KickedTopFlow::new(p.beta, p.k), p.t)?.i_sc)
    })
}

/// Kicked rotor at fixed `(M, k, t)`.
pub struct QfiRotor {
    params: RotorParams,
    eval: QfiEvaluator,
}

/// Builds the rotor propagator (dense, `M x M`).
///
/// # Safety
/// `out` must be null or point to writable storage for a handle pointer.
#[no_mangle]
pub unsafe extern "C" fn qfi_rotor_new(m: usize, k: f64, t: u64, out: *mut *mut QfiRotor) -> QfiStatus {
    guard(out, || {
        let params = RotorParams { m, k, t };
        let eval = QfiEvaluator::new(rotor_bundle(&params)?);
        Ok(Box::into_raw(Box::new(QfiRotor { params, eval })))
    })
}

/// # Safety
/// `handle` must be null or come from [`qfi_rotor_new`] and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn qfi_rotor_free(handle: *mut QfiRotor) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `handle` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qfi_rotor_exact(handle: *const QfiRotor, x: f64, p: f64, out: *mut f64) -> QfiStatus {
    guard(out, || {
        let h = deref(handle)?;
        h.eval.qfi(&rotor_coherent_state(h.params.m, x, p)?)
    })
}

/// # Safety
/// `handle` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qfi_rotor_semiclassical(
    handle: *const QfiRotor,
    x: f64,
    p: f64,
    r: u32,
    reff_multiple: f64,
    out: *mut f64,
) -> QfiStatus {
    guard(out, || {
        let h = deref(handle)?;
        let grid = build_square_grid([x, p], h.params.hbar_eff(), r, reff_multiple)?;
        Ok(semiclassical_qfi(&grid, &RotorFlow { k: h.params.k }, h.params.t)?.i_sc)
    })
}

/// Hénon–Heiles quantum model in a truncated oscillator basis.
pub struct QfiHenonHeiles {
    model: HHQuantumModel,
}

/// # Safety
/// `out` must be null or point to writable storage for a handle pointer.
#[no_mangle]
pub unsafe extern "C" fn qfi_henon_heiles_new(
    hbar: f64,
    n_max: usize,
    lambda: f64,
    out: *mut *mut QfiHenonHeiles,
) -> QfiStatus {
    guard(out, || {
        let model = qfi::henon_heiles::hh_build_quantum(hbar, n_max, lambda)?;
        Ok(Box::into_raw(Box::new(QfiHenonHeiles { model })))
    })
}

/// # Safety
/// `handle` must be null or come from [`qfi_henon_heiles_new`] and not be
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qfi_henon_heiles_free(handle: *mut QfiHenonHeiles) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Exact QFI at time `t` for the coherent state centered at
/// `(x, y, p_x, p_y)`.
///
/// # Safety
/// `handle` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qfi_henon_heiles_exact(
    handle: *const QfiHenonHeiles,
    x: f64,
    y: f64,
    px: f64,
    py: f64,
    t: f64,
    out: *mut f64,
) -> QfiStatus {
    guard(out, || {
        let h = deref(handle)?;
        let psi = h.model.coherent_state_eigen([x, y, px, py])?;
        h.model.exact_qfi(&psi, t)
    })
}

/// Heisenberg time `ħ/Δ` around `energy`.
///
/// # Safety
/// `handle` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qfi_henon_heiles_heisenberg_time(
    handle: *const QfiHenonHeiles,
    energy: f64,
    out: *mut f64,
) -> QfiStatus {
    guard(out, || deref(handle)?.model.heisenberg_time(energy))
}

/// Monte Carlo semiclassical QFI with `n` samples and the scaled cutoff
/// `|z - z0|^2/ħ < cutoff` (no cutoff if `cutoff <= 0`).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qfi_henon_heiles_semiclassical(
    hbar: f64,
    lambda: f64,
    x: f64,
    y: f64,
    px: f64,
    py: f64,
    t: f64,
    dt: f64,
    n: usize,
    seed: u64,
    cutoff: f64,
    out: *mut f64,
) -> QfiStatus {
    guard(out, || {
        let cut = if cutoff > 0.0 { McCutoff::Scaled(cutoff) } else { McCutoff::None };
        let ens = build_mc_ensemble([x, y, px, py], hbar, n, seed, cut)?;
        let flow = HenonHeilesFlow::new(lambda, dt)?;
        Ok(semiclassical_qfi(&ens, &flow, t)?.i_sc)
    })
}
