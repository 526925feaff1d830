use std::ffi::CStr;
use std::ptr;

use qfi_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(qfi_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn version_and_delta() {
    let v = unsafe { CStr::from_ptr(qfi_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    assert_eq!(qfi_delta(0.0, 0.0), 0.0);
    assert_eq!(qfi_delta(3.0, 1.0), 0.5);
}

#[test]
fn kicked_top_k0_is_linear_in_t_squared() {
    // k = 0: U = exp(-iβJy t), I = 4 t² Var(Jy) = 2 J t² for the pole state.
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { qfi_kicked_top_new(10.0, 1.5, 0.0, 3, &mut h) }, QfiStatus::Ok);
    let mut i = f64::NAN;
    assert_eq!(unsafe { qfi_kicked_top_exact(h, 0.0, 1.0, &mut i) }, QfiStatus::Ok);
    assert!((i - 2.0 * 10.0 * 9.0).abs() < 1e-8, "{i}");
    let mut sc = f64::NAN;
    assert_eq!(
        unsafe { qfi_kicked_top_semiclassical(h, 0.0, 1.0, 30, 5.0, &mut sc) },
        QfiStatus::Ok
    );
    assert!(((sc - 21.0 * 9.0) / (21.0 * 9.0)).abs() < 5e-3, "{sc}");
    unsafe { qfi_kicked_top_free(h) };
}

#[test]
fn kicked_top_matches_core() {
    use qfi::floquet::exact_qfi;
    use qfi::kicked_top::{kicked_top_bundle, KickedTopParams};
    use qfi::spin::coherent_state;
    let p = KickedTopParams { j: 12.0, beta: 1.5, k: 3.0, t: 5 };
    let bundle = kicked_top_bundle(&p).unwrap();
    let psi = coherent_state(p.j, 0.3f64.acos(), 1.1).unwrap();
    let want = exact_qfi(&bundle, &psi.amplitudes).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { qfi_kicked_top_new(p.j, p.beta, p.k, p.t, &mut h) }, QfiStatus::Ok);
    let mut got = 0.0;
    for _ in 0..2 {
        assert_eq!(unsafe { qfi_kicked_top_exact(h, 1.1, 0.3, &mut got) }, QfiStatus::Ok);
        assert!((got - want).abs() <= 1e-9 * want.max(1.0), "{got} vs {want}");
    }
    unsafe { qfi_kicked_top_free(h) };
}

#[test]
fn invalid_parameters_report_domain() {
    let mut h = ptr::null_mut();
    let s = unsafe { qfi_kicked_top_new(2.3, 1.5, 3.0, 1, &mut h) };
    assert_ne!(s, QfiStatus::Ok);
    assert!(h.is_null());
    assert!(!last_error().is_empty());

    let mut r = ptr::null_mut();
    let s = unsafe { qfi_rotor_new(0, 1.3, 4, &mut r) };
    assert_ne!(s, QfiStatus::Ok);
    assert!(r.is_null());
}

#[test]
fn null_pointers() {
    assert_eq!(
        unsafe { qfi_kicked_top_new(5.0, 1.5, 3.0, 1, ptr::null_mut()) },
        QfiStatus::NullPointer
    );
    let mut out = 0.0;
    assert_eq!(
        unsafe { qfi_kicked_top_exact(ptr::null(), 0.0, 0.0, &mut out) },
        QfiStatus::Usage
    );
    assert!(last_error().ends_with("handle is null"));
    unsafe {
        qfi_kicked_top_free(ptr::null_mut());
        qfi_rotor_free(ptr::null_mut());
        qfi_henon_heiles_free(ptr::null_mut());
    }
}

#[test]
fn rotor_matches_core() {
    use qfi::floquet::exact_qfi;
    use qfi::rotor::{rotor_bundle, rotor_coherent_state, RotorParams};
    let p = RotorParams { m: 40, k: 1.3, t: 6 };
    let want = exact_qfi(&rotor_bundle(&p).unwrap(), &rotor_coherent_state(p.m, 1.0, 2.0).unwrap()).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { qfi_rotor_new(p.m, p.k, p.t, &mut h) }, QfiStatus::Ok);
    let mut got = 0.0;
    assert_eq!(unsafe { qfi_rotor_exact(h, 1.0, 2.0, &mut got) }, QfiStatus::Ok);
    assert!((got - want).abs() <= 1e-9 * want.max(1.0));
    let mut sc = 0.0;
    assert_eq!(unsafe { qfi_rotor_semiclassical(h, 1.0, 2.0, 10, 5.0, &mut sc) }, QfiStatus::Ok);
    assert!(sc.is_finite() && sc > 0.0);
    unsafe { qfi_rotor_free(h) };
}

#[test]
fn henon_heiles_round_trip() {
    let hbar = 1.0 / 20.0;
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { qfi_henon_heiles_new(hbar, 20, 1.0, &mut h) }, QfiStatus::Ok);
    let (x, y, px): (f64, f64, f64) = (0.25, 0.0, 0.0);
    let e = 1.0 / 12.0;
    let py = (2.0 * e - px * px - x * x - y * y - 2.0 * (x * x * y - y * y * y / 3.0)).sqrt();
    let mut i = 0.0;
    assert_eq!(unsafe { qfi_henon_heiles_exact(h, x, y, px, py, 0.5, &mut i) }, QfiStatus::Ok);
    let mut sc = 0.0;
    assert_eq!(
        unsafe { qfi_henon_heiles_semiclassical(hbar, 1.0, x, y, px, py, 0.5, 1e-3, 4000, 7, 9.0, &mut sc) },
        QfiStatus::Ok
    );
    assert!(i > 0.0 && sc > 0.0);
    assert!(qfi_delta(i, sc) < 0.1, "{i} vs {sc}");
    let mut th = 0.0;
    assert_eq!(unsafe { qfi_henon_heiles_heisenberg_time(h, e, &mut th) }, QfiStatus::Ok);
    assert!(th > 0.0);
    unsafe { qfi_henon_heiles_free(h) };
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/qfi.h");
    for name in [
        "qfi_last_error_message",
        "qfi_version",
        "qfi_delta",
        "qfi_kicked_top_new",
        "qfi_kicked_top_free",
        "qfi_kicked_top_exact",
        "qfi_kicked_top_semiclassical",
        "qfi_rotor_new",
        "qfi_rotor_free",
        "qfi_rotor_exact",
        "qfi_rotor_semiclassical",
        "qfi_henon_heiles_new",
        "qfi_henon_heiles_free",
        "qfi_henon_heiles_exact",
        "qfi_henon_heiles_heisenberg_time",
        "qfi_henon_heiles_semiclassical",
        "QFI_STATUS_OK = 0",
        "QFI_STATUS_PANIC = 9",
        "typedef struct QfiKickedTop QfiKickedTop;",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}
