use std::f64::consts::{PI, TAU};

use proptest::prelude::*;

use qfi::floquet::exact_qfi;
use qfi::kicked_top::{kicked_top_bundle, KickedTopMap, KickedTopParams, SpherePoint};
use qfi::linalg::{c64, cis};
use qfi::rotor::{standard_map_inverse, standard_map_step, TorusPoint};
use qfi::scan::{delta, ScanRecord};
use qfi::stats::weighted_moments;
use qfi::spin::coherent_state;

/// Signed difference on the circle, in `(-π, π]`.
fn circ(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

fn phi_z(p: SpherePoint) -> (f64, f64) {
    (p.y.atan2(p.x), p.z)
}

/// Two-pass weighted variance.
fn two_pass_variance(w: &[f64], a: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    let mean = w.iter().zip(a).map(|(w, a)| w * a).sum::<f64>() / total;
    w.iter().zip(a).map(|(w, a)| w * (a - mean).powi(2)).sum::<f64>() / total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn qfi_ignores_global_phase(two_j in 1u32..40, k in 0.0..5.0f64, t in 1u64..6,
                                z in -0.99..0.99f64, phi in 0.0..TAU, alpha in 0.0..TAU) {
        let j = two_j as f64 / 2.0;
        let bundle = kicked_top_bundle(&KickedTopParams { j, beta: 1.5, k, t }).unwrap();
        let psi = coherent_state(j, z.acos(), phi).unwrap().amplitudes;
        let rotated: Vec<c64> = psi.iter().map(|a| a * cis(alpha)).collect();
        let a = exact_qfi(&bundle, &psi).unwrap();
        let b = exact_qfi(&bundle, &rotated).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn qfi_bounded_by_generator_norm(two_j in 1u32..30, k in 0.0..5.0f64, t in 1u64..5,
                                     z in -0.99..0.99f64, phi in 0.0..TAU) {
        // The generator is a sum of t conjugated copies of Jy, so its spectral
        // spread is at most 2tJ.
        let j = two_j as f64 / 2.0;
        let bundle = kicked_top_bundle(&KickedTopParams { j, beta: 1.5, k, t }).unwrap();
        let psi = coherent_state(j, z.acos(), phi).unwrap().amplitudes;
        let i = exact_qfi(&bundle, &psi).unwrap();
        let bound = 2.0 * t as f64 * j;
        prop_assert!(i >= 0.0 && i <= bound * bound * (1.0 + 1e-9));
    }

    #[test]
    fn weighted_variance_matches_two_pass(
        data in prop::collection::vec((0.0..1.0f64, -1e3..1e3f64), 2..3000),
        shift in -1e4..1e4f64,
    ) {
        let (w, a): (Vec<f64>, Vec<f64>) = data.into_iter().unzip();
        prop_assume!(w.iter().sum::<f64>() > 1e-3);
        let oracle = two_pass_variance(&w, &a);
        let m = weighted_moments(&w, &a);
        prop_assert!((m.variance() - oracle).abs() <= 1e-9 * oracle.max(1.0));
        // Adding a constant to every action derivative leaves I_sc unchanged.
        let shifted: Vec<f64> = a.iter().map(|x| x + shift).collect();
        let s = weighted_moments(&w, &shifted);
        prop_assert!((s.variance() - oracle).abs() <= 1e-8 * oracle.max(1.0));
    }

    #[test]
    fn kicked_top_map_inverts_and_preserves_area(beta in 0.0..3.0f64, k in 0.0..6.0f64,
                                                  z in -0.9..0.9f64, phi in 0.0..TAU) {
        let map = KickedTopMap::new(beta, k);
        let p = SpherePoint::from_phi_z(phi, z);
        let back = map.inverse_step(map.step(p));
        prop_assert!((back.x - p.x).abs() < 1e-12 && (back.y - p.y).abs() < 1e-12 && (back.z - p.z).abs() < 1e-12);
        prop_assert!((map.step(p).norm() - 1.0).abs() < 1e-14);

        // Jacobian of (φ, z) -> (φ', z') has unit determinant.
        let h = 1e-6;
        let image = |phi: f64, z: f64| phi_z(map.step(SpherePoint::from_phi_z(phi, z)));
        let (fp, zp) = image(phi + h, z);
        let (fm, zm) = image(phi - h, z);
        let (gp, wp) = image(phi, z + h);
        let (gm, wm) = image(phi, z - h);
        let img = image(phi, z);
        prop_assume!((1.0 - img.1 * img.1) > 1e-3);
        let det = (circ(fp, fm) * (wp - wm) - circ(gp, gm) * (zp - zm)) / (4.0 * h * h);
        prop_assert!((det - 1.0).abs() < 1e-5, "det = {}", det);
    }

    #[test]
    fn standard_map_inverts_and_preserves_area(k in 0.0..5.0f64, x in 0.0..TAU, p in 0.0..TAU) {
        let pt = TorusPoint::new(x, p);
        let back = standard_map_inverse(standard_map_step(pt, k), k);
        prop_assert!(circ(back.x, pt.x).abs() < 1e-12 && circ(back.p, pt.p).abs() < 1e-12);
        let h = 1e-6;
        let f = |x: f64, p: f64| standard_map_step(TorusPoint::new(x, p), k);
        let (a, b) = (f(x + h, p), f(x - h, p));
        let (c, d) = (f(x, p + h), f(x, p - h));
        let det = (circ(a.x, b.x) * circ(c.p, d.p) - circ(c.x, d.x) * circ(a.p, b.p)) / (4.0 * h * h);
        prop_assert!((det - 1.0).abs() < 1e-6, "det = {}", det);
    }

    #[test]
    fn delta_in_unit_interval(i in 0.0..1e12f64, s in 0.0..1e12f64) {
        let d = delta(i, s);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, delta(s, i));
    }

    #[test]
    fn scan_record_round_trips(phi in any::<f64>(), z in any::<f64>(), i in any::<f64>(), s in any::<f64>()) {
        prop_assume!(!phi.is_nan() && !z.is_nan());
        let r = ScanRecord::new(phi, z, i, s);
        let back = ScanRecord::parse(&r.to_csv()).unwrap();
        for (a, b) in [(r.phi, back.phi), (r.z, back.z), (r.i_exact, back.i_exact), (r.i_sc, back.i_sc), (r.delta_i, back.delta_i)] {
            prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
    }
}
