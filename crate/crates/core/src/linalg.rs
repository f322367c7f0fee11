//! Dense helpers for the `n ≤ 3` matrices that appear at a single point.
//!
//! Everything works on the padded `[f64; 3]` layout; only the leading `n`
//! entries are read or written.

use crate::{Matrix, Vector, MAX_DIM};

pub fn zero_vector() -> Vector {
    [0.0; MAX_DIM]
}

pub fn zero_matrix() -> Matrix {
    [[0.0; MAX_DIM]; MAX_DIM]
}

pub fn identity(n: usize) -> Matrix {
    let mut m = zero_matrix();
    for (i, row) in m.iter_mut().enumerate().take(n) {
        row[i] = 1.0;
    }
    m
}

pub fn to_vector(x: &[f64]) -> Vector {
    let mut v = zero_vector();
    v[..x.len()].copy_from_slice(x);
    v
}

pub fn mat_vec(n: usize, m: &Matrix, v: &Vector) -> Vector {
    let mut out = zero_vector();
    for i in 0..n {
        out[i] = (0..n).map(|j| m[i][j] * v[j]).sum();
    }
    out
}

pub fn dot(n: usize, a: &Vector, b: &Vector) -> f64 {
    (0..n).map(|i| a[i] * b[i]).sum()
}

/// `(a, b)_g = g_ij a^i b^j`.
pub fn inner(n: usize, g: &Matrix, a: &Vector, b: &Vector) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += g[i][j] * a[i] * b[j];
        }
    }
    s
}

pub fn norm(n: usize, g: &Matrix, a: &Vector) -> f64 {
    inner(n, g, a, a).sqrt()
}

pub fn det(n: usize, m: &Matrix) -> f64 {
    match n {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        3 => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
        _ => panic!("unsupported dimension {n}"),
    }
}

/// Gauss–Jordan inverse with partial pivoting; `None` if singular.
pub fn inverse(n: usize, m: &Matrix) -> Option<Matrix> {
    let mut a = *m;
    let mut inv = identity(n);
    let scale = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| m[i][j].abs())
        .fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .expect("nonempty range");
        if a[pivot][col].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = 1.0 / a[col][col];
        for j in 0..n {
            a[col][j] *= d;
            inv[col][j] *= d;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for j in 0..n {
                        a[r][j] -= f * a[col][j];
                        inv[r][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Lower Cholesky factor `L` with `m = L Lᵀ`; `None` unless positive definite.
pub fn cholesky(n: usize, m: &Matrix) -> Option<Matrix> {
    let mut l = zero_matrix();
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = m[i][i] - s;
                if d <= 0.0 || !d.is_finite() {
                    return None;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// Columns of `L⁻ᵀ`: a g-orthonormal basis of `ℝⁿ`.
pub fn orthonormal_frame(n: usize, g: &Matrix) -> Option<[Vector; MAX_DIM]> {
    let l = cholesky(n, g)?;
    let linv = inverse(n, &l)?;
    let mut frame = [zero_vector(); MAX_DIM];
    for (c, e) in frame.iter_mut().enumerate().take(n) {
        // (L⁻ᵀ)_{r c} = (L⁻¹)_{c r}
        e[..n].copy_from_slice(&linv[c][..n]);
    }
    Some(frame)
}

/// Gram–Schmidt in the metric `g`: returns the part of `v` g-orthogonal to every
/// vector in `basis` (assumed g-orthonormal).
pub fn orthogonalize(n: usize, g: &Matrix, v: &Vector, basis: &[Vector]) -> Vector {
    let mut out = *v;
    for b in basis {
        let c = inner(n, g, &out, b);
        for i in 0..n {
            out[i] -= c * b[i];
        }
    }
    out
}

pub fn scale(n: usize, v: &Vector, s: f64) -> Vector {
    let mut out = zero_vector();
    for i in 0..n {
        out[i] = v[i] * s;
    }
    out
}

pub fn axpy(n: usize, a: f64, x: &Vector, y: &Vector) -> Vector {
    let mut out = zero_vector();
    for i in 0..n {
        out[i] = a * x[i] + y[i];
    }
    out
}

pub fn euclidean_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip_3x3() {
        let m = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let inv = inverse(3, &m).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| m[i][k] * inv[k][j]).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        assert!(inverse(2, &[[1.0, 2.0, 0.0], [2.0, 4.0, 0.0], [0.0; 3]]).is_none());
    }

    #[test]
    fn frame_is_orthonormal() {
        let g = [[2.0, 0.3, 0.0], [0.3, 1.5, 0.0], [0.0, 0.0, 0.0]];
        let f = orthonormal_frame(2, &g).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((inner(2, &g, &f[a], &f[b]) - want).abs() < 1e-14);
            }
        }
        assert!(cholesky(2, &[[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0; 3]]).is_none());
    }
}
