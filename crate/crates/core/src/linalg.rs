//! Complex dense linear-algebra aliases and a handful of helpers shared by
//! the subproblem builders.

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

#[inline]
pub const fn c64(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// `(M + M^H) / 2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    let mut out = m + m.adjoint();
    out.scale_mut(0.5);
    out
}

/// `v v^H`.
pub fn outer(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

/// `Re Tr(A B)`.
pub fn trace_product_re(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            let x = a[(i, k)];
            let y = b[(k, i)];
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

/// Row vector `v^H diag(d)` stored as a column of its entries
/// `conj(v_k) d_k`; callers treat it as a 1xK row.
pub fn conj_hadamard(v: &CVector, d: &CVector) -> CVector {
    v.zip_map(d, |a, b| a.conj() * b)
}

/// Inner product `row · x` where `row` holds the row entries (no conjugation).
pub fn row_dot(row: &CVector, x: &CVector) -> C64 {
    row.iter().zip(x.iter()).map(|(a, b)| a * b).sum()
}

/// Frobenius norm of a complex matrix.
pub fn fro_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Block matrix `[[top_left, 0], [0, 0]]` of size `(n + 1) x (n + 1)`.
pub fn pad_corner(top_left: &CMatrix) -> CMatrix {
    let n = top_left.nrows();
    let mut out = CMatrix::zeros(n + 1, n + 1);
    out.view_mut((0, 0), (n, n)).copy_from(top_left);
    out
}

/// Block matrix `[[0, r^H], [r, 0]]` built from a row vector `r` (length n).
pub fn lift_row(row: &CVector) -> CMatrix {
    let n = row.len();
    let mut out = CMatrix::zeros(n + 1, n + 1);
    for k in 0..n {
        out[(n, k)] = row[k];
        out[(k, n)] = row[k].conj();
    }
    out
}

/// `[v; 1]`.
pub fn homogenize(v: &CVector) -> CVector {
    let n = v.len();
    CVector::from_fn(n + 1, |i, _| if i < n { v[i] } else { c64(1.0, 0.0) })
}
