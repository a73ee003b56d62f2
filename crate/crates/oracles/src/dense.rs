//! Row-major complex matrices and Gaussian elimination.

use rsma_core::{CMat, CVec, Complex64};

pub type Mat = Vec<Vec<Complex64>>;
pub type Vector = Vec<Complex64>;

pub fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

pub fn from_cvec(v: &CVec) -> Vector {
    v.iter().copied().collect()
}

pub fn from_cmat(m: &CMat) -> Mat {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn to_cmat(m: &Mat) -> CMat {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    CMat::from_fn(rows, cols, |i, j| m[i][j])
}

/// `a^H b`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sq(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn mat_vec(m: &Mat, v: &[Complex64]) -> Vector {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Solves `a x = b` by elimination with partial pivoting.
pub fn solve(mut a: Mat, mut b: Vector) -> Option<Vector> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))?;
        if a[pivot][col].norm() == 0.0 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != zero() {
                for k in col..n {
                    let sub = f * a[col][k];
                    a[row][k] -= sub;
                }
                let sub = f * b[col];
                b[row] -= sub;
            }
        }
    }
    let mut x = vec![zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}
