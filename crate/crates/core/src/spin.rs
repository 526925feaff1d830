//! Collective spin operators and SU(2) coherent states.
//!
//! Basis vectors are ordered by decreasing magnetic quantum number: index `i`
//! holds `|J, m⟩` with `m = J - i`, so `J_z = diag(J, J-1, ..., -J)`.

use faer::diag::{DiagMut, DiagRef};
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat, I, ZERO};

/// Relative threshold selecting the component used to fix eigenvector phases.
const PHASE_PIN_THRESHOLD: f64 = 1e-8;

/// Validates a spin quantum number and returns `2J`.
pub fn two_j_of(j: f64) -> Result<u64> {
    let two_j = 2.0 * j;
    if !j.is_finite() || j < 0.0 || two_j.fract() != 0.0 || two_j > u32::MAX as f64 {
        return Err(Error::Domain(format!(
            "J = {j} is not a nonnegative half-integer"
        )));
    }
    Ok(two_j as u64)
}

/// Operators of a spin-`J` representation.
///
/// `J_z`, `J_+` and `J_y` are banded and are kept as their nonzero bands; the
/// dense forms are available on demand. `V_y` is dense.
#[derive(Clone, Debug)]
pub struct SpinOperatorSet {
    two_j: u64,
    /// Diagonal of `J_z`: `m_i = J - i`.
    jz: Vec<f64>,
    /// Superdiagonal of `J_+`: `(J_+)_{i,i+1} = sqrt((J + m_i)(J - m_i + 1))`.
    jplus: Vec<f64>,
    /// Columns are `J_y` eigenvectors; column `i` has eigenvalue `m_i`.
    vy: CMat,
}

impl SpinOperatorSet {
    pub fn j(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    pub fn two_j(&self) -> u64 {
        self.two_j
    }

    pub fn dim(&self) -> usize {
        self.jz.len()
    }

    /// Magnetic quantum numbers in basis order.
    pub fn jz_diag(&self) -> &[f64] {
        &self.jz
    }

    pub fn jplus_superdiag(&self) -> &[f64] {
        &self.jplus
    }

    pub fn vy(&self) -> &CMat {
        &self.vy
    }

    pub fn into_vy(self) -> CMat {
        self.vy
    }

    pub fn jz(&self) -> CMat {
        let n = self.dim();
        CMat::from_fn(n, n, |r, c| if r == c { c64::new(self.jz[r], 0.0) } else { ZERO })
    }

    pub fn jplus(&self) -> CMat {
        let n = self.dim();
        CMat::from_fn(n, n, |r, c| {
            if c == r + 1 {
                c64::new(self.jplus[r], 0.0)
            } else {
                ZERO
            }
        })
    }

    /// `J_x = (J_+ + J_+^†)/2`.
    pub fn jx(&self) -> CMat {
        let n = self.dim();
        CMat::from_fn(n, n, |r, c| {
            if c == r + 1 {
                c64::new(self.jplus[r] / 2.0, 0.0)
            } else if r == c + 1 {
                c64::new(self.jplus[c] / 2.0, 0.0)
            } else {
                ZERO
            }
        })
    }

    /// `J_y = i(J_+^† - J_+)/2`.
    pub fn jy(&self) -> CMat {
        let n = self.dim();
        CMat::from_fn(n, n, |r, c| self.jy_entry(r, c))
    }

    #[inline]
    fn jy_entry(&self, r: usize, c: usize) -> c64 {
        if c == r + 1 {
            c64::new(0.0, -self.jplus[r] / 2.0)
        } else if r == c + 1 {
            c64::new(0.0, self.jplus[c] / 2.0)
        } else {
            ZERO
        }
    }

    /// `J_y |ψ⟩` in `O(dim)`.
    pub fn apply_jy(&self, psi: &[c64]) -> Vec<c64> {
        let n = self.dim();
        assert_eq!(psi.len(), n);
        (0..n)
            .map(|r| {
                let mut acc = ZERO;
                if r + 1 < n {
                    acc += self.jy_entry(r, r + 1) * psi[r + 1];
                }
                if r > 0 {
                    acc += self.jy_entry(r, r - 1) * psi[r - 1];
                }
                acc
            })
            .collect()
    }

    /// `A J_y` for a dense `A`, in `O(dim^2)`.
    pub fn right_mul_jy(&self, a: &CMat) -> CMat {
        let n = self.dim();
        assert_eq!(a.ncols(), n);
        let mut out = CMat::zeros(a.nrows(), n);
        for c in 0..n {
            let dst = out.col_as_slice_mut(c);
            if c > 0 {
                let w = self.jy_entry(c - 1, c);
                for (d, s) in dst.iter_mut().zip(a.col_as_slice(c - 1)) {
                    *d += s * w;
                }
            }
            if c + 1 < n {
                let w = self.jy_entry(c + 1, c);
                for (d, s) in dst.iter_mut().zip(a.col_as_slice(c + 1)) {
                    *d += s * w;
                }
            }
        }
        out
    }
}

/// Builds `J_z`, `J_+`, `J_y` and the `J_y` eigenbasis for spin `j`.
///
/// `J_y = D J_x D^†` with `D = diag(i^0, i^1, ...)`, so the eigenvectors come
/// from the real symmetric tridiagonal `J_x`. Columns of `V_y` are ordered by
/// decreasing eigenvalue so that `V_y^† J_y V_y = J_z`, and each column's
/// phase is fixed by making its first non-negligible component real positive.
pub fn build_spin_operators(j: f64) -> Result<SpinOperatorSet> {
    let two_j = two_j_of(j)?;
    let n = two_j as usize + 1;
    let jz: Vec<f64> = (0..n).map(|i| j - i as f64).collect();
    let jplus: Vec<f64> = jz[..n - 1]
        .iter()
        .map(|&m| ((j + m) * (j - m + 1.0)).sqrt())
        .collect();

    let diag = vec![0.0f64; n];
    let mut offdiag: Vec<f64> = jplus.iter().map(|s| s / 2.0).collect();
    offdiag.push(0.0);
    let mut eigvals = vec![0.0f64; n];
    let mut vx = Mat::<f64>::zeros(n, n);
    let par = linalg::par();
    let req = evd::self_adjoint_evd_scratch::<f64>(
        n,
        ComputeEigenvectors::Yes,
        par,
        Default::default(),
    );
    let mut buf = MemBuffer::new(req);
    evd::tridiagonal_self_adjoint_evd(
        DiagRef::from_slice(&diag),
        DiagRef::from_slice(&offdiag),
        DiagMut::from_slice_mut(&mut eigvals),
        Some(vx.as_mut()),
        par,
        MemStack::new(&mut buf),
        Default::default(),
    )
    .map_err(|e| Error::Numerical(format!("J_x eigensolve failed for J = {j}: {e:?}")))?;

    // faer returns ascending eigenvalues; the basis runs from m = J down.
    let worst = eigvals
        .iter()
        .rev()
        .zip(&jz)
        .map(|(e, m)| (e - m).abs())
        .fold(0.0f64, f64::max);
    if !(worst < 1e-8 * (1.0 + j)) {
        return Err(Error::Numerical(format!(
            "J_x spectrum deviates from {{-J..J}} by {worst:e} for J = {j}"
        )));
    }

    let quarter = [c64::new(1.0, 0.0), I, c64::new(-1.0, 0.0), -I];
    let mut vy = CMat::zeros(n, n);
    for c in 0..n {
        let src = vx.col(n - 1 - c);
        let max = (0..n).map(|r| src[r].abs()).fold(0.0f64, f64::max);
        let pin = (0..n)
            .find(|&r| src[r].abs() > PHASE_PIN_THRESHOLD * max)
            .expect("eigenvector has a nonzero entry");
        let pinned = quarter[pin % 4] * src[pin].signum();
        let fix = pinned.conj();
        let dst = vy.col_as_slice_mut(c);
        for (r, d) in dst.iter_mut().enumerate() {
            *d = quarter[r % 4] * src[r] * fix;
        }
    }
    Ok(SpinOperatorSet {
        two_j,
        jz,
        jplus,
        vy,
    })
}

/// SU(2) coherent state `|J, θ, φ⟩`.
#[derive(Clone, Debug)]
pub struct CoherentStateVector {
    pub j: f64,
    pub theta: f64,
    pub phi: f64,
    /// Amplitudes in basis order (`m = J - i`).
    pub amplitudes: Vec<c64>,
}

/// Builds `|J, θ, φ⟩ = Σ_m sqrt(C(2J, J-m)) (e^{iφ} sin(θ/2))^{J-m} cos(θ/2)^{J+m} |J, m⟩`.
///
/// Each modulus is assembled in log space, so no binomial or power is ever
/// formed explicitly.
pub fn coherent_state(j: f64, theta: f64, phi: f64) -> Result<CoherentStateVector> {
    let two_j = two_j_of(j)?;
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::Domain(format!("theta = {theta} outside [0, pi]")));
    }
    if !phi.is_finite() {
        return Err(Error::Domain(format!("phi = {phi} is not finite")));
    }
    let n = two_j as usize + 1;
    let (s, c) = (theta / 2.0).sin_cos();
    let (ln_s, ln_c) = (s.ln(), c.ln());
    // 0 * ln 0 is taken as 0, i.e. 0^0 = 1.
    let power = |count: f64, ln: f64| if count == 0.0 { 0.0 } else { count * ln };
    let two_j_f = two_j as f64;
    let mut ln_binom = 0.0f64;
    let mut amplitudes = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            ln_binom += ((two_j_f - (i - 1) as f64) / i as f64).ln();
        }
        let fi = i as f64;
        let ln_mod = 0.5 * ln_binom + power(fi, ln_s) + power(two_j_f - fi, ln_c);
        amplitudes.push(linalg::cis(phi * fi) * ln_mod.exp());
    }
    Ok(CoherentStateVector {
        j,
        theta,
        phi,
        amplitudes,
    })
}

/// `⟨ψ|A|ψ⟩` for a Hermitian `A` given as a dense matrix.
pub fn expectation(a: &CMat, psi: &[c64]) -> f64 {
    let apsi = linalg::matvec(a.as_ref(), psi);
    linalg::inner(psi, &apsi).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermiticity_defect, matmul_new, max_abs_diff, unitarity_defect};
    use std::f64::consts::PI;

    fn commutator(a: &CMat, b: &CMat) -> CMat {
        let ab = matmul_new(a.as_ref(), b.as_ref());
        let ba = matmul_new(b.as_ref(), a.as_ref());
        CMat::from_fn(a.nrows(), a.ncols(), |r, c| ab[(r, c)] - ba[(r, c)])
    }

    fn scaled(a: &CMat, s: c64) -> CMat {
        CMat::from_fn(a.nrows(), a.ncols(), |r, c| a[(r, c)] * s)
    }

    #[test]
    fn rejects_non_half_integers() {
        assert!(matches!(build_spin_operators(0.3), Err(Error::Domain(_))));
        assert!(matches!(build_spin_operators(-1.0), Err(Error::Domain(_))));
        assert!(matches!(coherent_state(1.25, 0.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn spin_half_jy_is_half_pauli_y() {
        let ops = build_spin_operators(0.5).unwrap();
        let jy = ops.jy();
        assert_eq!(jy[(0, 1)], c64::new(0.0, -0.5));
        assert_eq!(jy[(1, 0)], c64::new(0.0, 0.5));
        assert_eq!(jy[(0, 0)], ZERO);
    }

    #[test]
    fn spin_one_matrices() {
        let ops = build_spin_operators(1.0).unwrap();
        assert_eq!(ops.jz_diag(), &[1.0, 0.0, -1.0]);
        for s in ops.jplus_superdiag() {
            assert!((s - 2f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn commutation_relations() {
        for j in [0.5, 1.0, 5.0, 50.0] {
            let ops = build_spin_operators(j).unwrap();
            let (x, y, z) = (ops.jx(), ops.jy(), ops.jz());
            for (a, b, c) in [(&x, &y, &z), (&y, &z, &x), (&z, &x, &y)] {
                let err = max_abs_diff(commutator(a, b).as_ref(), scaled(c, I).as_ref());
                assert!(err < 1e-10, "J={j}: {err:e}");
            }
        }
    }

    #[test]
    fn vy_diagonalises_jy() {
        for j in [0.5, 1.0, 3.5, 20.0, 64.0] {
            let ops = build_spin_operators(j).unwrap();
            assert!(hermiticity_defect(ops.jy().as_ref()) == 0.0);
            let vy = ops.vy();
            assert!(unitarity_defect(vy.as_ref()) < 1e-10);
            let t = matmul_new(vy.adjoint(), matmul_new(ops.jy().as_ref(), vy.as_ref()).as_ref());
            let err = max_abs_diff(t.as_ref(), ops.jz().as_ref());
            assert!(err < 1e-9 * (1.0 + j), "J={j}: {err:e}");
        }
    }

    #[test]
    fn jy_spectrum_is_integer_ladder() {
        let ops = build_spin_operators(20.0).unwrap();
        let eig = ops.jy().self_adjoint_eigen(faer::Side::Lower).unwrap();
        let s = eig.S().column_vector();
        for i in 0..41 {
            assert!((s[i].re - (i as f64 - 20.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn jy_band_products_match_dense() {
        let ops = build_spin_operators(3.0).unwrap();
        let a = CMat::from_fn(7, 7, |r, c| c64::new(r as f64 - 0.5 * c as f64, 0.1 * (r * c) as f64));
        let dense = matmul_new(a.as_ref(), ops.jy().as_ref());
        assert!(max_abs_diff(ops.right_mul_jy(&a).as_ref(), dense.as_ref()) < 1e-13);
        let psi: Vec<c64> = (0..7).map(|i| c64::new(i as f64, 1.0)).collect();
        let lhs = ops.apply_jy(&psi);
        let rhs = linalg::matvec(ops.jy().as_ref(), &psi);
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn polar_states() {
        let north = coherent_state(10.0, 0.0, 2.3).unwrap();
        assert_eq!(north.amplitudes[0], c64::new(1.0, 0.0));
        assert!(north.amplitudes[1..].iter().all(|a| *a == ZERO));
        let south = coherent_state(10.0, PI, 0.0).unwrap();
        assert!((south.amplitudes[20] - c64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(south.amplitudes[..20].iter().all(|a| a.norm() < 1e-15));
    }

    #[test]
    fn large_j_state_is_normalised() {
        let s = coherent_state(4096.0, PI / 3.0, 1.2).unwrap();
        let norm = linalg::norm_sqr(&s.amplitudes);
        assert!((norm - 1.0).abs() < 1e-10, "{norm}");
    }

    #[test]
    fn amplitudes_match_direct_formula() {
        let (j, theta, phi) = (3.0f64, 1.1f64, 0.7f64);
        let s = coherent_state(j, theta, phi).unwrap();
        let binom: [f64; 7] = [1.0, 6.0, 15.0, 20.0, 15.0, 6.0, 1.0];
        for (i, b) in binom.iter().enumerate() {
            let expected = linalg::cis(phi * i as f64)
                * (b.sqrt()
                    * (theta / 2.0).sin().powi(i as i32)
                    * (theta / 2.0).cos().powi(6 - i as i32));
            assert!((s.amplitudes[i] - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn bloch_vector_and_polar_variance() {
        let j = 7.5;
        let ops = build_spin_operators(j).unwrap();
        let (theta, phi) = (0.9, 2.2);
        let s = coherent_state(j, theta, phi).unwrap();
        let ey = expectation(&ops.jy(), &s.amplitudes);
        let expected = j * theta.sin() * phi.sin();
        assert!((ey - expected).abs() < 1e-9 * expected.abs());
        let ex = expectation(&ops.jx(), &s.amplitudes);
        assert!((ex - j * theta.sin() * phi.cos()).abs() < 1e-9 * j);
        let ez = expectation(&ops.jz(), &s.amplitudes);
        assert!((ez - j * theta.cos()).abs() < 1e-9 * j);

        let north = coherent_state(j, 0.0, 0.0).unwrap();
        let jy_psi = ops.apply_jy(&north.amplitudes);
        let var = linalg::norm_sqr(&jy_psi) - linalg::inner(&north.amplitudes, &jy_psi).re.powi(2);
        assert!((var - j / 2.0).abs() < 1e-10);
    }
}
