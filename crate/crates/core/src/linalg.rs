//! Dense complex helpers on top of `nalgebra`.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

pub use nalgebra::Complex;

pub type Complex64 = Complex<f64>;
pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `exp(j * phase)`.
#[inline]
pub fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

/// Sum of squared magnitudes of every entry.
pub fn frob_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Hermitian part `(A + A^H) / 2`.
pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Largest eigenvalue of a Hermitian matrix.
///
/// The matrix is symmetrized first so tiny asymmetries from accumulation do
/// not leak into the eigen-solver.
pub fn hermitian_max_eigenvalue(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    hermitize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn hermitian_min_eigenvalue(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    hermitize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Accumulates `scale * v v^H` into `acc`.
pub fn add_outer(acc: &mut CMat, v: &CVec, scale: f64) {
    let n = v.len();
    for j in 0..n {
        let vj = v[j].conj() * scale;
        for i in 0..n {
            acc[(i, j)] += v[i] * vj;
        }
    }
}

/// Column `i` of a matrix as an owned vector.
pub fn column(m: &CMat, i: usize) -> CVec {
    m.column(i).into_owned()
}

pub fn columns(m: &CMat) -> Vec<CVec> {
    (0..m.ncols()).map(|i| column(m, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_extremes_of_diagonal() {
        let m = CMat::from_diagonal(&CVec::from_vec(alloc::vec![real(3.0), real(-1.0), real(2.0)]));
        assert!((hermitian_max_eigenvalue(&m) - 3.0).abs() < 1e-12);
        assert!((hermitian_min_eigenvalue(&m) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn outer_product_is_hermitian_rank_one() {
        let v = CVec::from_vec(alloc::vec![c(1.0, 2.0), c(-0.5, 0.25)]);
        let mut acc = CMat::zeros(2, 2);
        add_outer(&mut acc, &v, 2.0);
        let expected = (&v * v.adjoint()).scale(2.0);
        assert!((acc - expected).norm() < 1e-14);
    }
}
