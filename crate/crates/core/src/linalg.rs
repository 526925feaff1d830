//! Dense complex matrix conventions shared by every engine.
//!
//! Matrices are `faer` column-major `Mat<c64>`; state vectors are plain
//! `Vec<c64>` indexed like the matrix rows.

use faer::linalg::matmul::matmul;
use faer::traits::Conjugate;
use faer::mat::AsMatRef;
use faer::{Accum, ColRef, Mat, MatRef, Par};

pub use faer::c64;

pub type CMat = Mat<c64>;

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub const I: c64 = c64 { re: 0.0, im: 1.0 };

/// Parallelism used for dense kernels (configured once by the CLI).
pub fn par() -> Par {
    faer::get_global_parallelism()
}

/// Sets the parallelism of dense kernels. `threads <= 1` selects sequential
/// kernels, which are bit-reproducible.
pub fn set_threads(threads: usize) {
    let par = match std::num::NonZeroUsize::new(threads) {
        Some(n) if n.get() > 1 => Par::Rayon(n),
        _ => Par::Seq,
    };
    faer::set_global_parallelism(par);
}

/// `exp(i * angle)`.
#[inline]
pub fn cis(angle: f64) -> c64 {
    let (s, c) = angle.sin_cos();
    c64::new(c, s)
}

/// Largest entry-wise modulus of `a - b`.
pub fn max_abs_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
    assert_eq!(a.nrows(), b.nrows());
    assert_eq!(a.ncols(), b.ncols());
    let mut max = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            max = max.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    max
}

/// `max |(U^H U - 1)_{ij}|`.
pub fn unitarity_defect(u: MatRef<'_, c64>) -> f64 {
    let n = u.nrows();
    let mut gram = CMat::zeros(n, n);
    matmul(gram.as_mut(), Accum::Replace, u.adjoint(), u, ONE, par());
    let id = CMat::identity(n, n);
    max_abs_diff(gram.as_ref(), id.as_ref())
}

/// `max |A - A^H|` entry-wise.
pub fn hermiticity_defect(a: MatRef<'_, c64>) -> f64 {
    let n = a.nrows();
    let mut max = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            max = max.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    max
}

pub fn matmul_new<L, R>(
    a: impl AsMatRef<T = L, Rows = usize, Cols = usize>,
    b: impl AsMatRef<T = R, Rows = usize, Cols = usize>,
) -> CMat
where
    L: Conjugate<Canonical = c64>,
    R: Conjugate<Canonical = c64>,
{
    let (a, b) = (a.as_mat_ref(), b.as_mat_ref());
    let mut out = CMat::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a, b, ONE, par());
    out
}

/// Dense matrix-vector product.
pub fn matvec(a: MatRef<'_, c64>, x: &[c64]) -> Vec<c64> {
    assert_eq!(a.ncols(), x.len());
    let mut out = CMat::zeros(a.nrows(), 1);
    matmul(
        out.as_mut(),
        Accum::Replace,
        a,
        ColRef::from_slice(x).as_mat(),
        ONE,
        par(),
    );
    out.col_as_slice(0).to_vec()
}

/// `<a|b>`, antilinear in the first argument.
pub fn inner(a: &[c64], b: &[c64]) -> c64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

pub fn norm_sqr(a: &[c64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Builds a matrix whose columns are the given vectors.
pub fn columns_to_mat(columns: &[Vec<c64>]) -> CMat {
    let n = columns.first().map_or(0, Vec::len);
    let mut m = CMat::zeros(n, columns.len());
    for (j, col) in columns.iter().enumerate() {
        assert_eq!(col.len(), n);
        m.col_as_slice_mut(j).copy_from_slice(col);
    }
    m
}

/// Converts a real matrix to complex storage.
pub fn to_complex(a: MatRef<'_, f64>) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| c64::new(a[(i, j)], 0.0))
}

/// Bytes occupied by a dense complex `n x n` matrix.
pub fn cmat_bytes(n: usize) -> u64 {
    (n as u64) * (n as u64) * std::mem::size_of::<c64>() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_unitary_and_hermitian() {
        let id = CMat::identity(5, 5);
        assert_eq!(unitarity_defect(id.as_ref()), 0.0);
        assert_eq!(hermiticity_defect(id.as_ref()), 0.0);
    }

    #[test]
    fn matvec_matches_manual_product() {
        let a = CMat::from_fn(3, 3, |i, j| c64::new(i as f64, j as f64));
        let x = vec![ONE, I, c64::new(2.0, -1.0)];
        let y = matvec(a.as_ref(), &x);
        for i in 0..3 {
            let expected = (0..3).fold(ZERO, |acc, j| acc + a[(i, j)] * x[j]);
            assert!((y[i] - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn inner_is_conjugate_linear() {
        let a = vec![I, ONE];
        let b = vec![ONE, ONE];
        assert_eq!(inner(&a, &b), c64::new(1.0, -1.0));
    }
}
