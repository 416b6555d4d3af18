//! Small dense linear-algebra helpers shared by the analysis modules.
//!
//! Block states are stored as `n x d` matrices: row `i` holds the `i`-th
//! block of a `(.) kron I_d` state vector. Flattening is block-major, so the
//! entry `(i, j)` maps to index `i * d + j` of the full vector.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// `m kron I_d`.
pub fn kron_identity(m: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    kron(m, &DMatrix::identity(d, d))
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Flatten a block state (`n x d`) into the full `n d` vector.
pub fn flatten_blocks(x: &DMatrix<f64>) -> DVector<f64> {
    let (n, d) = x.shape();
    DVector::from_fn(n * d, |k, _| x[(k / d, k % d)])
}

pub fn unflatten_blocks(v: &DVector<f64>, d: usize) -> DMatrix<f64> {
    let n = v.len() / d;
    DMatrix::from_fn(n, d, |i, j| v[i * d + j])
}

/// Weighted norm `sqrt(trace(x^T (P kron I) x))` of a block state.
pub fn block_pnorm(p: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    let px = p * x;
    x.component_mul(&px).sum().max(0.0).sqrt()
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

/// Ascending eigenvalues of the symmetric part of `m`.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(f64::NEG_INFINITY)
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Numerical rank: singular values above `rel_tol * sigma_max`.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    let Some(&top) = sv.first() else { return 0 };
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// Moore-Penrose pseudo-inverse via SVD.
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let svd = m.clone().svd(true, true);
    let top = svd.singular_values.max();
    let tol = top * (r.max(c) as f64) * f64::EPSILON;
    svd.pseudo_inverse(tol).expect("svd computed with both factors")
}

/// Orthonormal basis (as rows) of the orthogonal complement of the row space of `m`.
pub fn row_space_complement(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let cols = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    // Pad with zero rows so the full right-singular basis is returned.
    let mut padded = DMatrix::zeros(m.nrows().max(cols), cols);
    padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let top = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| top == 0.0 || svd.singular_values[k] <= rel_tol * top)
        .collect();
    DMatrix::from_fn(keep.len(), cols, |i, j| v_t[(keep[i], j)])
}

/// Relative Frobenius deviation `||a - b|| / max(||b||, tiny)`.
pub fn relative_deviation(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let diff = (a - b).norm();
    let scale = b.norm();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Build a matrix from nested rows; `None` when the rows are ragged.
pub fn from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return None;
    }
    Some(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_with_identity_places_blocks_on_the_diagonal() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let k = kron_identity(&m, 2);
        assert_eq!(k.shape(), (4, 4));
        assert_eq!(k[(0, 2)], 2.0);
        assert_eq!(k[(1, 3)], 2.0);
        assert_eq!(k[(0, 3)], 0.0);
        assert_eq!(k[(3, 1)], 3.0);
    }

    #[test]
    fn flatten_roundtrip_is_block_major() {
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let v = flatten_blocks(&x);
        assert_eq!(v.as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(unflatten_blocks(&v, 3), x);
    }

    #[test]
    fn complement_is_orthogonal_to_rows() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let s = row_space_complement(&m, 1e-12);
        assert_eq!(s.nrows(), 2);
        assert!((&s * m.transpose()).amax() < 1e-12);
        assert!((&s * s.transpose() - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_none());
    }
}
