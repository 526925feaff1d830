use crate::error::{Error, Result};
use crate::floquet::{propagate_bundle, FloquetBundle};
use crate::kicked_top::KickedTopParams;
use crate::linalg::{self, c64, CMat};
use crate::spin::{build_spin_operators, SpinOperatorSet};

/// One-kick Floquet operator `U = exp(-ik J_z^2/(2J+1)) V_y exp(-iβ J_z) V_y^†`
/// and its β-derivative `-i U J_y`.
///
/// Both exponentials are diagonal phases in the `J_z` basis.
pub fn floquet_one_step(ops: &SpinOperatorSet, beta: f64, k: f64) -> Result<FloquetBundle> {
    if !beta.is_finite() || !k.is_finite() {
        return Err(Error::Domain(format!("beta = {beta}, k = {k} must be finite")));
    }
    let m = ops.jz_diag();
    let n = ops.dim();
    let vy = ops.vy();
    let mut a = vy.clone();
    for (c, &mc) in m.iter().enumerate() {
        let phase = linalg::cis(-beta * mc);
        for x in a.col_as_slice_mut(c) {
            *x *= phase;
        }
    }
    let mut u = linalg::matmul_new(a.as_ref(), vy.adjoint());
    drop(a);
    let torsion: Vec<c64> = m
        .iter()
        .map(|&mr| linalg::cis(-k * mr * mr / n as f64))
        .collect();
    for c in 0..n {
        for (x, p) in u.col_as_slice_mut(c).iter_mut().zip(&torsion) {
            *x *= p;
        }
    }
    let mut du = ops.right_mul_jy(&u);
    for c in 0..n {
        for x in du.col_as_slice_mut(c) {
            *x = c64::new(x.im, -x.re);
        }
    }
    Ok(FloquetBundle { u, du, t: 1 })
}

/// `(U(t), dU(t)/dβ)` for the given parameters. The operator set is released
/// before the doubling products start.
pub fn kicked_top_bundle(params: &KickedTopParams) -> Result<FloquetBundle> {
    params.validate()?;
    let one = {
        let ops = build_spin_operators(params.j)?;
        floquet_one_step(&ops, params.beta, params.k)?
    };
    propagate_bundle(one, params.t)
}

fn propagate_state(u: &CMat, state: &[c64], t: u64) -> Vec<c64> {
    let mut psi = state.to_vec();
    for _ in 0..t {
        psi = linalg::matvec(u.as_ref(), &psi);
    }
    psi
}

fn evolved(ops: &SpinOperatorSet, params: &KickedTopParams, beta: f64, state: &[c64]) -> Result<Vec<c64>> {
    let u = floquet_one_step(ops, beta, params.k)?.u;
    Ok(propagate_state(&u, state, params.t))
}

fn check_dim(ops: &SpinOperatorSet, state: &[c64]) -> Result<()> {
    if state.len() != ops.dim() {
        return Err(Error::Usage(format!(
            "state dimension {} does not match 2J+1 = {}",
            state.len(),
            ops.dim()
        )));
    }
    Ok(())
}

/// Echo amplitude `χ(ε) = ⟨ψ|U_{β-ε}^†(t) U_{β+ε}(t)|ψ⟩`.
pub fn loschmidt_echo(
    ops: &SpinOperatorSet,
    params: &KickedTopParams,
    state: &[c64],
    epsilon: f64,
) -> Result<c64> {
    params.validate()?;
    check_dim(ops, state)?;
    let back = evolved(ops, params, params.beta - epsilon, state)?;
    let fwd = evolved(ops, params, params.beta + epsilon, state)?;
    Ok(linalg::inner(&back, &fwd))
}

/// QFI from the echo amplitude, `(χ')^2 - χ''` at `ε = 0`, with five-point
/// central differences of step `h`.
pub fn echo_qfi(
    ops: &SpinOperatorSet,
    params: &KickedTopParams,
    state: &[c64],
    h: f64,
) -> Result<f64> {
    params.validate()?;
    check_dim(ops, state)?;
    let shifted: Vec<Vec<c64>> = [-2.0, -1.0, 0.0, 1.0, 2.0]
        .iter()
        .map(|s| evolved(ops, params, params.beta + s * h, state))
        .collect::<Result<_>>()?;
    // chi(s h) pairs the states at beta - s h and beta + s h.
    let chi: Vec<c64> = (0..5).map(|s| linalg::inner(&shifted[4 - s], &shifted[s])).collect();
    let derivatives = |c: &[c64]| {
        let d1 = (c[0] - c[1] * 8.0 + c[3] * 8.0 - c[4]) / (12.0 * h);
        let d2 = (-c[0] + c[1] * 16.0 - c[2] * 30.0 + c[3] * 16.0 - c[4]) / (12.0 * h * h);
        (d1, d2)
    };
    // (χ')² - χ'' is unchanged by χ(ε) -> e^{-iaε} χ(ε). Removing the mean
    // phase slope avoids cancellation between two large terms.
    let slope = derivatives(&chi).0.im;
    let gauged: Vec<c64> = chi
        .iter()
        .enumerate()
        .map(|(s, &c)| c * linalg::cis(-slope * (s as f64 - 2.0) * h))
        .collect();
    let (d1, d2) = derivatives(&gauged);
    let qfi = d1 * d1 - d2;
    if !qfi.re.is_finite() {
        return Err(Error::Numerical("non-finite echo derivative".into()));
    }
    Ok(qfi.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::exact_qfi;
    use crate::linalg::{max_abs_diff, unitarity_defect, ONE};
    use crate::spin::coherent_state;

    #[test]
    fn trivial_parameters_give_identity() {
        let ops = build_spin_operators(3.0).unwrap();
        let b = floquet_one_step(&ops, 0.0, 0.0).unwrap();
        assert!(max_abs_diff(b.u.as_ref(), CMat::identity(7, 7).as_ref()) < 1e-13);
        let minus_i_jy = CMat::from_fn(7, 7, |r, c| ops.jy()[(r, c)] * c64::new(0.0, -1.0));
        assert!(max_abs_diff(b.du.as_ref(), minus_i_jy.as_ref()) < 1e-13);
    }

    #[test]
    fn spin_half_pi_rotation_flips() {
        let ops = build_spin_operators(0.5).unwrap();
        let b = floquet_one_step(&ops, std::f64::consts::PI, 0.0).unwrap();
        let out = linalg::matvec(b.u.as_ref(), &[ONE, c64::new(0.0, 0.0)]);
        assert!(out[0].norm() < 1e-14);
        assert!((out[1].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let ops = build_spin_operators(40.0).unwrap();
        let (beta, k, d) = (1.5, 3.0, 1e-5);
        let b = floquet_one_step(&ops, beta, k).unwrap();
        assert!(unitarity_defect(b.u.as_ref()) < 1e-12);
        let up = floquet_one_step(&ops, beta + d, k).unwrap().u;
        let dn = floquet_one_step(&ops, beta - d, k).unwrap().u;
        let fd = CMat::from_fn(81, 81, |r, c| (up[(r, c)] - dn[(r, c)]) / (2.0 * d));
        assert!(max_abs_diff(fd.as_ref(), b.du.as_ref()) < 1e-6);
    }

    #[test]
    fn echo_at_zero_is_one() {
        let ops = build_spin_operators(5.0).unwrap();
        let p = KickedTopParams { j: 5.0, beta: 1.5, k: 3.0, t: 4 };
        let s = coherent_state(5.0, 1.0, 0.3).unwrap();
        let chi = loschmidt_echo(&ops, &p, &s.amplitudes, 0.0).unwrap();
        assert!((chi - ONE).norm() < 1e-10);
    }

    #[test]
    fn echo_qfi_matches_exact_small_case() {
        let ops = build_spin_operators(12.0).unwrap();
        let p = KickedTopParams { j: 12.0, beta: 1.5, k: 3.0, t: 3 };
        let s = coherent_state(12.0, 0.8, 2.0).unwrap();
        let bundle = kicked_top_bundle(&p).unwrap();
        let exact = exact_qfi(&bundle, &s.amplitudes).unwrap();
        let echo = echo_qfi(&ops, &p, &s.amplitudes, 1e-4).unwrap();
        assert!((exact - echo).abs() < 1e-4 * exact, "{exact} vs {echo}");
    }
}
