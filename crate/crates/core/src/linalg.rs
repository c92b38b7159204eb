//! Tiny dense helpers for the 4-state chain: solves, products and
//! compensated sums. Everything here works on fixed 4x4 storage.

use crate::error::{Error, Result};

pub type Mat4 = [[f64; 4]; 4];

pub const IDENTITY: Mat4 = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

/// Solves the leading `n`×`n` block of `a · x = b` by Gaussian elimination
/// with partial pivoting. Both inputs are consumed as scratch space.
pub fn solve(n: usize, mut a: Mat4, mut b: [f64; 4]) -> Result<[f64; 4]> {
    debug_assert!(n <= 4);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::Singular);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

pub fn transpose(m: &Mat4) -> Mat4 {
    let mut t = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            t[j][i] = m[i][j];
        }
    }
    t
}

pub fn mat_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for k in 0..4 {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..4 {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

pub fn vec_mat(v: &[f64; 4], m: &Mat4) -> [f64; 4] {
    let mut out = [0.0; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[j] += v[i] * m[i][j];
        }
    }
    out
}

pub fn max_abs_diff(a: &Mat4, b: &Mat4) -> f64 {
    let mut m = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

pub fn dot(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    sum4([a[0] * b[0], a[1] * b[1], a[2] * b[2], a[3] * b[3]])
}

/// Neumaier-compensated sum of four terms.
#[inline]
pub fn sum4(v: [f64; 4]) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for x in v {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

/// Determinant of a 3x3 matrix given by rows.
#[inline]
pub fn det3(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// Singular values of a small dense row-major matrix, largest first.
pub fn singular_values(rows: &[[f64; 4]]) -> Vec<f64> {
    let m = nalgebra::DMatrix::from_fn(rows.len(), 4, |i, j| rows[i][j]);
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Dimension of the right null space of a matrix with four columns, with
/// rank counted as singular values above `rel_tol` times the largest one.
pub fn kernel_dimension(rows: &[[f64; 4]], rel_tol: f64) -> usize {
    let sv = singular_values(rows);
    let largest = sv.first().copied().unwrap_or(0.0);
    if largest == 0.0 || !largest.is_finite() {
        return 4;
    }
    let rank = sv.iter().filter(|&&s| s > rel_tol * largest).count();
    4 - rank
}

/// Unit vectors spanning the right null space (same thresholding as
/// [`kernel_dimension`]).
pub fn kernel_basis(rows: &[[f64; 4]], rel_tol: f64) -> Vec<[f64; 4]> {
    let n = rows.len();
    // pad to at least 4 rows so the thin SVD exposes the full V
    let padded = n.max(4);
    let m = nalgebra::DMatrix::from_fn(padded, 4, |i, j| if i < n { rows[i][j] } else { 0.0 });
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let largest = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
    let mut basis = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if largest == 0.0 || s <= rel_tol * largest {
            let row = v_t.row(k);
            basis.push([row[0], row[1], row[2], row[3]]);
        }
    }
    basis
}
