//! Hénon–Heiles Hamiltonian in a truncated two-dimensional oscillator basis
//! and the QFI with respect to `λ` from the eigenbasis generator.

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::floquet::RawQfi;
use crate::linalg::{self, c64, CMat};

/// Smallest truncated-basis norm accepted for an initial state.
pub const MIN_STATE_NORM: f64 = 0.999;

/// Relative level spacing below which two levels are treated as degenerate
/// in the generator.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

/// Product states `|n_x, n_y⟩` with `n_x + n_y <= n_max`, ordered by shell
/// `n_x + n_y` and then by `n_y`.
#[derive(Clone, Debug)]
pub struct OscillatorBasis {
    pub n_max: usize,
    states: Vec<(usize, usize)>,
}

impl OscillatorBasis {
    pub fn new(n_max: usize) -> Self {
        let states = (0..=n_max)
            .flat_map(|shell| (0..=shell).map(move |ny| (shell - ny, ny)))
            .collect();
        Self { n_max, states }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn quanta(&self, i: usize) -> (usize, usize) {
        self.states[i]
    }

    /// Position of `|n_x, n_y⟩`, if inside the truncation.
    pub fn index(&self, nx: usize, ny: usize) -> Option<usize> {
        let shell = nx + ny;
        (shell <= self.n_max).then(|| shell * (shell + 1) / 2 + ny)
    }
}

/// Number of basis states for `n_max`.
pub fn basis_size(n_max: usize) -> usize {
    (n_max + 1) * (n_max + 2) / 2
}

/// `⟨n + d| x^2 |n⟩` for `x = sqrt(ħ/2)(a + a^†)`, `d ∈ {-2, 0, 2}`.
pub fn x2_element(n: usize, d: i64, hbar: f64) -> f64 {
    let n = n as f64;
    let s = hbar / 2.0;
    match d {
        -2 => s * (n * (n - 1.0)).max(0.0).sqrt(),
        0 => s * (2.0 * n + 1.0),
        2 => s * ((n + 1.0) * (n + 2.0)).sqrt(),
        _ => 0.0,
    }
}

/// `⟨n + d| y^3 |n⟩`, `d ∈ {-3, -1, 1, 3}`.
pub fn y3_element(n: usize, d: i64, hbar: f64) -> f64 {
    let n = n as f64;
    let s = (hbar / 2.0).powf(1.5);
    match d {
        -3 => s * (n * (n - 1.0) * (n - 2.0)).max(0.0).sqrt(),
        -1 => s * 3.0 * n * n.sqrt(),
        1 => s * 3.0 * (n + 1.0) * (n + 1.0).sqrt(),
        3 => s * ((n + 1.0) * (n + 2.0) * (n + 3.0)).sqrt(),
        _ => 0.0,
    }
}

/// `⟨n + d| y |n⟩`, `d ∈ {-1, 1}`.
pub fn y_element(n: usize, d: i64, hbar: f64) -> f64 {
    let s = (hbar / 2.0).sqrt();
    match d {
        -1 => s * (n as f64).sqrt(),
        1 => s * (n as f64 + 1.0).sqrt(),
        _ => 0.0,
    }
}

/// `H' = x^2 y - y^3/3` in the truncated basis (dense, real symmetric).
pub fn perturbation_matrix(basis: &OscillatorBasis, hbar: f64) -> Mat<f64> {
    let n = basis.len();
    let mut h = Mat::<f64>::zeros(n, n);
    for col in 0..n {
        let (nx, ny) = basis.quanta(col);
        for dx in [-2i64, 0, 2] {
            let nx2 = nx as i64 + dx;
            if nx2 < 0 {
                continue;
            }
            let ax = x2_element(nx, dx, hbar);
            for dy in [-1i64, 1] {
                let ny2 = ny as i64 + dy;
                if ny2 < 0 {
                    continue;
                }
                if let Some(row) = basis.index(nx2 as usize, ny2 as usize) {
                    h[(row, col)] += ax * y_element(ny, dy, hbar);
                }
            }
        }
        for dy in [-3i64, -1, 1, 3] {
            let ny2 = ny as i64 + dy;
            if ny2 < 0 {
                continue;
            }
            if let Some(row) = basis.index(nx, ny2 as usize) {
                h[(row, col)] -= y3_element(ny, dy, hbar) / 3.0;
            }
        }
    }
    h
}

/// Quantum model: basis, `H'`, and eigenpairs of `H = H_0 + λ H'`.
#[derive(Clone, Debug)]
pub struct HHQuantumModel {
    pub hbar: f64,
    pub lambda: f64,
    pub basis: OscillatorBasis,
    /// Eigenvalues, ascending.
    pub energies: Vec<f64>,
    /// Eigenvectors as columns, in the oscillator basis.
    pub eigenvectors: Mat<f64>,
    /// `H'` in the energy eigenbasis.
    pub perturbation_eigen: Mat<f64>,
}

/// Assembles and diagonalizes the Hamiltonian for `n_x + n_y <= n_max`.
pub fn hh_build_quantum(hbar: f64, n_max: usize, lambda: f64) -> Result<HHQuantumModel> {
    if !(hbar > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("invalid hbar = {hbar} or lambda = {lambda}")));
    }
    let basis = OscillatorBasis::new(n_max);
    let n = basis.len();
    let hp = perturbation_matrix(&basis, hbar);
    let mut h = Mat::<f64>::from_fn(n, n, |r, c| lambda * hp[(r, c)]);
    for i in 0..n {
        let (nx, ny) = basis.quanta(i);
        h[(i, i)] += hbar * (nx + ny + 1) as f64;
    }
    let eig = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Hénon–Heiles eigensolve failed: {e:?}")))?;
    let energies: Vec<f64> = (0..n).map(|i| eig.S()[i]).collect();
    let v = eig.U().to_owned();
    let tmp = &hp * &v;
    let perturbation_eigen = v.transpose() * &tmp;
    Ok(HHQuantumModel {
        hbar,
        lambda,
        basis,
        energies,
        eigenvectors: v,
        perturbation_eigen,
    })
}

fn oscillator_coherent(alpha: c64, n_max: usize) -> Vec<c64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut term = c64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    out.push(term);
    for n in 1..=n_max {
        term = term * alpha / (n as f64).sqrt();
        out.push(term);
    }
    out
}

/// Product of one-dimensional oscillator coherent states centered at
/// `(x, y, p_x, p_y)`, in the oscillator basis. Errors if the truncated
/// basis holds less than [`MIN_STATE_NORM`] of the state.
pub fn hh_coherent_state(basis: &OscillatorBasis, hbar: f64, center: [f64; 4]) -> Result<Vec<c64>> {
    let [x, y, px, py] = center;
    let scale = 1.0 / (2.0 * hbar).sqrt();
    let cx = oscillator_coherent(c64::new(x * scale, px * scale), basis.n_max);
    let cy = oscillator_coherent(c64::new(y * scale, py * scale), basis.n_max);
    let psi: Vec<c64> = (0..basis.len())
        .map(|i| {
            let (nx, ny) = basis.quanta(i);
            cx[nx] * cy[ny]
        })
        .collect();
    let norm = linalg::norm_sqr(&psi);
    if norm < MIN_STATE_NORM {
        return Err(Error::Truncation(format!(
            "coherent state at {center:?} keeps only {norm:.6} of its norm for n_max = {}",
            basis.n_max
        )));
    }
    Ok(psi)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

impl HHQuantumModel {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Coherent state expanded in the energy eigenbasis.
    pub fn coherent_state_eigen(&self, center: [f64; 4]) -> Result<Vec<c64>> {
        let psi = hh_coherent_state(&self.basis, self.hbar, center)?;
        let n = self.dim();
        Ok((0..n)
            .map(|e| {
                let v = self.eigenvectors.col(e);
                (0..n).fold(c64::new(0.0, 0.0), |acc, i| acc + psi[i] * v[i])
            })
            .collect())
    }

    /// Generator `L` in the eigenbasis:
    /// `L_nm = H'_nm (e^{i(E_n - E_m)t/ħ} - 1)/(i(E_n - E_m))`, `L_nn = (t/ħ) H'_nn`.
    ///
    /// Written as `(t/ħ) H'_nm e^{iθ/2} sinc(θ/2)` with `θ = (E_n - E_m)t/ħ`;
    /// pairs closer than the degeneracy threshold use the limit `(t/ħ) H'_nm`.
    pub fn generator(&self, t: f64) -> CMat {
        let n = self.dim();
        let scale = self.energies.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        let tol = DEGENERACY_THRESHOLD * scale;
        let tau = t / self.hbar;
        CMat::from_fn(n, n, |r, c| {
            let hp = self.perturbation_eigen[(r, c)];
            let de = self.energies[r] - self.energies[c];
            if de.abs() < tol {
                return c64::new(tau * hp, 0.0);
            }
            let half = 0.5 * de * tau;
            linalg::cis(half) * (tau * hp * sinc(half))
        })
    }

    /// `I(t) = 4(⟨L^2⟩ - ⟨L⟩^2)` for an eigenbasis state.
    pub fn qfi_raw(&self, state_eigen: &[c64], t: f64) -> Result<RawQfi> {
        if state_eigen.len() != self.dim() {
            return Err(Error::Usage(format!(
                "state dimension {} does not match basis size {}",
                state_eigen.len(),
                self.dim()
            )));
        }
        let l = self.generator(t);
        let lpsi = linalg::matvec(l.as_ref(), state_eigen);
        let second = linalg::norm_sqr(&lpsi);
        let first = linalg::inner(state_eigen, &lpsi).re;
        Ok(RawQfi {
            raw: 4.0 * (second - first * first),
            scale: 4.0 * second,
        })
    }

    pub fn exact_qfi(&self, state_eigen: &[c64], t: f64) -> Result<f64> {
        self.qfi_raw(state_eigen, t)?.clamped()
    }

    /// `(4/ħ^2) var_ψ(H')`, the small-`t` coefficient of `I(t)/t^2`.
    pub fn short_time_coefficient(&self, state_eigen: &[c64]) -> f64 {
        let hp = linalg::to_complex(self.perturbation_eigen.as_ref());
        let v = linalg::matvec(hp.as_ref(), state_eigen);
        let mean = linalg::inner(state_eigen, &v).re;
        4.0 / (self.hbar * self.hbar) * (linalg::norm_sqr(&v) - mean * mean)
    }

    /// `ħ/Δ` with `Δ` the mean spacing of the ten levels closest to `energy`.
    pub fn heisenberg_time(&self, energy: f64) -> Result<f64> {
        const LEVELS: usize = 10;
        if self.energies.len() < LEVELS + 1 {
            return Err(Error::Numerical(format!(
                "only {} levels available, need at least {}",
                self.energies.len(),
                LEVELS + 1
            )));
        }
        let mut nearest: Vec<f64> = self.energies.clone();
        nearest.sort_by(|a, b| (a - energy).abs().total_cmp(&(b - energy).abs()));
        nearest.truncate(LEVELS);
        nearest.sort_by(f64::total_cmp);
        let spacing = (nearest[LEVELS - 1] - nearest[0]) / (LEVELS - 1) as f64;
        if !(spacing > 0.0) {
            return Err(Error::Numerical("degenerate levels around the energy".into()));
        }
        Ok(self.hbar / spacing)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_indexing_round_trips() {
        let b = OscillatorBasis::new(6);
        assert_eq!(b.len(), basis_size(6));
        for i in 0..b.len() {
            let (nx, ny) = b.quanta(i);
            assert_eq!(b.index(nx, ny), Some(i));
        }
        assert_eq!(b.index(4, 3), None);
    }

    #[test]
    fn ladder_elements_match_matrix_powers() {
        let hbar = 0.3;
        let size = 14;
        let x = Mat::<f64>::from_fn(size, size, |r, c| {
            if r + 1 == c {
                y_element(c, -1, hbar)
            } else if r == c + 1 {
                y_element(c, 1, hbar)
            } else {
                0.0
            }
        });
        let x2 = &x * &x;
        let x3 = &x2 * &x;
        for n in 0..size - 4 {
            for d in [-2i64, 0, 2] {
                let m = n as i64 + d;
                if m >= 0 {
                    assert!((x2[(m as usize, n)] - x2_element(n, d, hbar)).abs() < 1e-14);
                }
            }
            for d in [-3i64, -1, 1, 3] {
                let m = n as i64 + d;
                if m >= 0 {
                    assert!((x3[(m as usize, n)] - y3_element(n, d, hbar)).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn uncoupled_spectrum_and_parity() {
        let hbar = 0.1;
        let model = hh_build_quantum(hbar, 8, 0.0).unwrap();
        let mut expected: Vec<f64> = (0..=8usize)
            .flat_map(|s| std::iter::repeat_n(hbar * (s + 1) as f64, s + 1))
            .collect();
        expected.sort_by(f64::total_cmp);
        for (e, x) in model.energies.iter().zip(&expected) {
            assert!((e - x).abs() < 1e-12);
        }
        let hp = perturbation_matrix(&model.basis, hbar);
        for i in 0..model.dim() {
            assert_eq!(hp[(i, i)], 0.0);
        }
        for r in 0..model.dim() {
            for c in 0..model.dim() {
                assert!((hp[(r, c)] - hp[(c, r)]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_time_qfi_vanishes_and_generator_is_hermitian() {
        let model = hh_build_quantum(1.0 / 20.0, 20, 1.0).unwrap();
        let psi = model.coherent_state_eigen([0.25, 0.0, 0.0, 0.2]).unwrap();
        assert_eq!(model.exact_qfi(&psi, 0.0).unwrap(), 0.0);
        let l = model.generator(3.0);
        assert!(linalg::hermiticity_defect(l.as_ref()) < 1e-10);
    }

    #[test]
    fn truncation_is_reported() {
        let b = OscillatorBasis::new(3);
        assert!(matches!(
            hh_coherent_state(&b, 0.01, [0.3, 0.0, 0.0, 0.3]),
            Err(Error::Truncation(_))
        ));
    }
}
