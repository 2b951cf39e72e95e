//! Dense complex helpers built on nalgebra: norms, Hermitian spectra,
//! rank-revealing orthonormalization and square roots of PSD matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{CMatrix, C64};

pub fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

pub fn one() -> C64 {
    C64::new(1.0, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Largest singular value; zero for empty matrices.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.iter().all(|z| *z == zero()) {
        return 0.0;
    }
    // The SVD costs O(rows·cols·min); go through the smaller side.
    let sv = if m.nrows() >= m.ncols() {
        m.clone().svd(false, false).singular_values
    } else {
        m.adjoint().svd(false, false).singular_values
    };
    sv.iter().cloned().fold(0.0, f64::max)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (DVector<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), CMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Smallest eigenvalue of the Hermitian part; `+∞` for an empty matrix.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Principal square root of a PSD matrix; negative rounding eigenvalues are clamped to zero.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    psd_sqrt_floor(m, 0.0)
}

/// Square root with every eigenvalue `≤ floor` treated as zero.
pub fn psd_sqrt_floor(m: &CMatrix, floor: f64) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let roots = vals.map(|v| C64::new(if v > floor { v.sqrt() } else { 0.0 }, 0.0));
    &vecs * CMatrix::from_diagonal(&roots) * vecs.adjoint()
}

/// Orthonormal basis of the column space, keeping singular values above
/// `rank_tol·σ_max`. Returns the basis and the number of discarded directions.
pub fn orthonormal_columns(a: &CMatrix, rank_tol: f64) -> (CMatrix, usize) {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return (CMatrix::zeros(rows, 0), cols);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if sigma_max == 0.0 {
        return (CMatrix::zeros(rows, 0), cols);
    }
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > rank_tol * sigma_max)
        .collect();
    let mut basis = CMatrix::zeros(rows, keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        basis.set_column(dst, &u.column(src));
    }
    (basis, cols - keep.len())
}

/// Orthonormal basis of the range of an orthogonal projection (eigenvalues near 1).
pub fn projection_range(p: &CMatrix) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(p);
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 0.5).collect();
    let mut basis = CMatrix::zeros(p.nrows(), keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        basis.set_column(dst, &vecs.column(src));
    }
    basis
}

/// Moore–Penrose pseudo-inverse with the same relative rank cutoff as
/// [`orthonormal_columns`].
pub fn pseudo_inverse(a: &CMatrix, rank_tol: f64) -> CMatrix {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return CMatrix::zeros(cols, rows);
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut out = CMatrix::zeros(cols, rows);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > rank_tol * sigma_max && s > 0.0 {
            let ui = u.column(i);
            let vi = v_t.row(i).adjoint();
            out += (vi * ui.adjoint()).scale(1.0 / s);
        }
    }
    out
}

/// Rows `rows` and columns `cols` of `m`.
pub fn select(m: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn select_rows(m: &CMatrix, rows: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// Columns of the identity of size `n` at the given positions.
pub fn selector(n: usize, cols: &[usize]) -> CMatrix {
    let mut s = CMatrix::zeros(n, cols.len());
    for (j, &i) in cols.iter().enumerate() {
        s[(i, j)] = one();
    }
    s
}

pub fn real_matrix_to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}
