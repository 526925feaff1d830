//! Stroboscopic propagators together with their parametric derivative, and
//! the pure-state quantum Fisher information evaluated from them.
//!
//! A [`FloquetBundle`] holds `(U(t), dU(t)/dθ)` for an estimation parameter θ.
//! Powers are assembled by the product rule: doubling uses
//! `dG(u+1) = dG(u) G(u) + G(u) dG(u)`, `G(u+1) = G(u) G(u)` (derivative
//! first), and an arbitrary `t` is assembled from its binary digits.

use faer::linalg::matmul::matmul;
use faer::{Accum, MatRef};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat, I, ONE};

/// Round-off tolerance below which a negative QFI is clamped to zero.
pub const NEGATIVE_QFI_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct FloquetBundle {
    /// Propagator `U(t)`.
    pub u: CMat,
    /// Parametric derivative `dU(t)/dθ`.
    pub du: CMat,
    /// Stroboscopic time both matrices refer to.
    pub t: u64,
}

impl FloquetBundle {
    /// `(1, 0)` at `t = 0`.
    pub fn identity(dim: usize) -> Self {
        Self {
            u: CMat::identity(dim, dim),
            du: CMat::zeros(dim, dim),
            t: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    /// Product-rule composition `(A B, dA B + A dB)`; the time is `t_A + t_B`.
    pub fn compose(&self, rhs: &FloquetBundle) -> FloquetBundle {
        let par = linalg::par();
        let n = self.dim();
        let mut du = CMat::zeros(n, n);
        matmul(du.as_mut(), Accum::Replace, &self.du, &rhs.u, ONE, par);
        matmul(du.as_mut(), Accum::Add, &self.u, &rhs.du, ONE, par);
        let u = linalg::matmul_new(self.u.as_ref(), rhs.u.as_ref());
        FloquetBundle {
            u,
            du,
            t: self.t + rhs.t,
        }
    }

    /// One doubling step. Holds at most three `n x n` matrices at a time.
    pub fn doubled(self) -> FloquetBundle {
        let par = linalg::par();
        let FloquetBundle { u: g, du: dg, t } = self;
        let n = g.nrows();
        let mut next_du = CMat::zeros(n, n);
        matmul(next_du.as_mut(), Accum::Replace, &dg, &g, ONE, par);
        matmul(next_du.as_mut(), Accum::Add, &g, &dg, ONE, par);
        // dG is no longer needed: reuse its storage for G G.
        let mut next_u = dg;
        matmul(next_u.as_mut(), Accum::Replace, &g, &g, ONE, par);
        FloquetBundle {
            u: next_u,
            du: next_du,
            t: 2 * t,
        }
    }

    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(self.u.as_ref())
    }

    /// Hermitian generator `L = i U^† dU`, so that `I = 4 var_ψ(L)`.
    pub fn generator(&self) -> CMat {
        let n = self.dim();
        let mut l = CMat::zeros(n, n);
        matmul(l.as_mut(), Accum::Replace, self.u.adjoint(), &self.du, I, linalg::par());
        hermitize(&mut l);
        l
    }
}

fn hermitize(a: &mut CMat) {
    let n = a.nrows();
    for j in 0..n {
        a[(j, j)] = c64::new(a[(j, j)].re, 0.0);
        for i in 0..j {
            let avg = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
}

/// Propagates a one-step bundle to time `t` (`t = 0` gives `(1, 0)`).
///
/// `t` is decomposed in binary; for `t = 2^u` this is exactly `u` doubling
/// steps with no extra products.
pub fn propagate_bundle(one_step: FloquetBundle, t: u64) -> Result<FloquetBundle> {
    if one_step.t != 1 {
        return Err(Error::Usage(format!(
            "propagate_bundle expects a one-step bundle, got t = {}",
            one_step.t
        )));
    }
    if t == 0 {
        return Ok(FloquetBundle::identity(one_step.dim()));
    }
    let mut acc: Option<FloquetBundle> = None;
    let mut power = one_step;
    let mut bits = t;
    loop {
        let last = bits >> 1 == 0;
        if bits & 1 == 1 {
            acc = Some(match acc {
                None if last => return Ok(power),
                None => power.clone(),
                Some(a) => a.compose(&power),
            });
        }
        if last {
            break;
        }
        bits >>= 1;
        power = power.doubled();
    }
    Ok(acc.expect("t > 0 has a set bit"))
}

/// Calls `visit` with the bundles at `t = 1, 2, 4, ...` up to `max_t`.
pub fn for_each_doubling(
    one_step: FloquetBundle,
    max_t: u64,
    mut visit: impl FnMut(&FloquetBundle) -> Result<()>,
) -> Result<()> {
    let mut g = one_step;
    loop {
        visit(&g)?;
        if 2 * g.t > max_t {
            return Ok(());
        }
        g = g.doubled();
    }
}

/// QFI before clamping, together with the scale used for the round-off test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawQfi {
    pub raw: f64,
    /// `4 <ψ|dU^† dU|ψ>`, the leading term.
    pub scale: f64,
}

impl RawQfi {
    fn from_terms(lead: f64, overlap: f64) -> Self {
        let scale = 4.0 * lead;
        RawQfi {
            raw: scale - 4.0 * overlap,
            scale,
        }
    }

    /// Clamps negative round-off to zero; a clearly negative value is an error.
    pub fn clamped(self) -> Result<f64> {
        if self.raw >= 0.0 {
            return Ok(self.raw);
        }
        if self.raw >= -NEGATIVE_QFI_TOLERANCE * self.scale.abs().max(f64::MIN_POSITIVE) {
            log::debug!("clamping QFI round-off {:e} to zero", self.raw);
            Ok(0.0)
        } else {
            Err(Error::Numerical(format!(
                "negative QFI {:e} (leading term {:e})",
                self.raw, self.scale
            )))
        }
    }
}

/// `I = 4(<ψ|dU^† dU|ψ> - |<ψ|U^† dU|ψ>|^2)`, two matrix-vector products.
pub fn exact_qfi_raw(bundle: &FloquetBundle, state: &[c64]) -> Result<RawQfi> {
    if state.len() != bundle.dim() {
        return Err(Error::Usage(format!(
            "state dimension {} does not match propagator dimension {}",
            state.len(),
            bundle.dim()
        )));
    }
    let dpsi = linalg::matvec(bundle.du.as_ref(), state);
    let psi = linalg::matvec(bundle.u.as_ref(), state);
    let lead = linalg::norm_sqr(&dpsi);
    let overlap = linalg::inner(&psi, &dpsi).norm_sqr();
    Ok(RawQfi::from_terms(lead, overlap))
}

pub fn exact_qfi(bundle: &FloquetBundle, state: &[c64]) -> Result<f64> {
    exact_qfi_raw(bundle, state)?.clamped()
}

/// [`exact_qfi`] for each column of `states`, with two matrix products
/// instead of two matrix-vector products per state.
pub fn exact_qfi_columns(bundle: &FloquetBundle, states: MatRef<'_, c64>) -> Result<Vec<f64>> {
    if states.nrows() != bundle.dim() {
        return Err(Error::Usage(format!(
            "state dimension {} does not match propagator dimension {}",
            states.nrows(),
            bundle.dim()
        )));
    }
    let dpsi = linalg::matmul_new(bundle.du.as_ref(), states);
    let psi = linalg::matmul_new(bundle.u.as_ref(), states);
    (0..states.ncols())
        .map(|j| {
            let (d, p) = (dpsi.col_as_slice(j), psi.col_as_slice(j));
            RawQfi::from_terms(linalg::norm_sqr(d), linalg::inner(p, d).norm_sqr()).clamped()
        })
        .collect()
}

/// Evaluates the QFI of many states against one propagator through the
/// Hermitian generator `L = i U^† dU`: one matrix product per batch of states.
pub struct QfiEvaluator {
    generator: CMat,
    t: u64,
}

/// Number of states multiplied against the generator at once.
pub const STATE_BATCH: usize = 256;

impl QfiEvaluator {
    /// Consumes the bundle so that `U` and `dU` are released once `L` exists.
    pub fn new(bundle: FloquetBundle) -> Self {
        let generator = bundle.generator();
        Self {
            generator,
            t: bundle.t,
        }
    }

    pub fn dim(&self) -> usize {
        self.generator.nrows()
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn generator(&self) -> MatRef<'_, c64> {
        self.generator.as_ref()
    }

    pub fn qfi(&self, state: &[c64]) -> Result<f64> {
        Ok(self.qfi_batch(&[state.to_vec()])?[0])
    }

    /// QFI for each column of `states` (each column a normalized state).
    pub fn qfi_columns(&self, states: MatRef<'_, c64>) -> Result<Vec<f64>> {
        if states.nrows() != self.dim() {
            return Err(Error::Usage(format!(
                "state dimension {} does not match generator dimension {}",
                states.nrows(),
                self.dim()
            )));
        }
        let mut applied = CMat::zeros(states.nrows(), states.ncols());
        matmul(
            applied.as_mut(),
            Accum::Replace,
            &self.generator,
            states,
            ONE,
            linalg::par(),
        );
        (0..states.ncols())
            .map(|j| {
                let psi = states.col(j);
                let lpsi = applied.col_as_slice(j);
                let mut second = 0.0;
                let mut first = c64::new(0.0, 0.0);
                for (i, l) in lpsi.iter().enumerate() {
                    second += l.norm_sqr();
                    first += psi[i].conj() * l;
                }
                RawQfi::from_terms(second, first.re * first.re).clamped()
            })
            .collect()
    }

    pub fn qfi_batch(&self, states: &[Vec<c64>]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(states.len());
        for chunk in states.chunks(STATE_BATCH) {
            let m = linalg::columns_to_mat(chunk);
            out.extend(self.qfi_columns(m.as_ref())?);
        }
        Ok(out)
    }
}
