//! Dense kernels for the small (m <= 4) matrices carried per node.

use crate::scalar::Real;

/// Cholesky factor of a symmetric matrix; `None` unless positive definite.
pub fn cholesky<T: Real>(a: &[T], m: usize) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k];
            }
            if i == j {
                if !(s > T::zero()) {
                    return None;
                }
                l[i * m + i] = s.sqrt();
            } else {
                l[i * m + j] = s / l[j * m + j];
            }
        }
    }
    Some(l)
}

/// Inverse and determinant of an SPD matrix via its Cholesky factor.
pub fn spd_inverse<T: Real>(a: &[T], m: usize) -> Option<(Vec<T>, T)> {
    let l = cholesky(a, m)?;
    let det = (0..m).fold(T::one(), |acc, i| acc * l[i * m + i] * l[i * m + i]);
    let mut inv = vec![T::zero(); m * m];
    let mut col = vec![T::zero(); m];
    for c in 0..m {
        // solve L y = e_c, then L^T x = y
        for i in 0..m {
            let mut s = if i == c { T::one() } else { T::zero() };
            for k in 0..i {
                s -= l[i * m + k] * col[k];
            }
            col[i] = s / l[i * m + i];
        }
        for i in (0..m).rev() {
            let mut s = col[i];
            for k in (i + 1)..m {
                s -= l[k * m + i] * inv[k * m + c];
            }
            inv[i * m + c] = s / l[i * m + i];
        }
    }
    for i in 0..m {
        for j in (i + 1)..m {
            let s = (inv[i * m + j] + inv[j * m + i]) * T::lit(0.5);
            inv[i * m + j] = s;
            inv[j * m + i] = s;
        }
    }
    Some((inv, det))
}

/// `sum_ij a_ij x_i y_j`.
#[inline]
pub fn bilinear<T: Real>(a: &[T], x: &[T], y: &[T]) -> T {
    let m = x.len();
    let mut s = T::zero();
    for i in 0..m {
        if x[i] == T::zero() {
            continue;
        }
        let mut row = T::zero();
        for j in 0..y.len() {
            row += a[i * y.len() + j] * y[j];
        }
        s += x[i] * row;
    }
    s
}

/// `y = A x` for a square matrix.
#[inline]
pub fn mat_vec<T: Real>(a: &[T], x: &[T]) -> Vec<T> {
    let m = x.len();
    (0..m).map(|i| (0..m).map(|j| a[i * m + j] * x[j]).sum()).collect()
}

/// Full contraction `g^{ia} g^{jb} A_ij B_ab` of two covariant 2-tensors.
#[inline]
pub fn contract2<T: Real>(ginv: &[T], a: &[T], b: &[T], m: usize) -> T {
    let mut s = T::zero();
    for i in 0..m {
        for j in 0..m {
            if a[i * m + j] == T::zero() {
                continue;
            }
            let mut inner = T::zero();
            for p in 0..m {
                for q in 0..m {
                    inner += ginv[i * m + p] * ginv[j * m + q] * b[p * m + q];
                }
            }
            s += a[i * m + j] * inner;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_spd() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let (inv, det) = spd_inverse(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        let expected = 4.0 * (6.0 - 0.04) - 1.0 * (2.0 - 0.1) + 0.5 * (0.2 - 1.5);
        assert!((det - expected).abs() < 1e-12);
    }

    #[test]
    fn indefinite_rejected() {
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
    }
}
