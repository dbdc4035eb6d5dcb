//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::scalar::Real;

/// X'WX for a diagonal weight vector, skipping zero-weight rows.
pub fn weighted_gram<T: Real>(x: &DMatrix<T>, w: &[T]) -> DMatrix<T> {
    let p = x.ncols();
    let mut g = DMatrix::<T>::zeros(p, p);
    for (i, &wi) in w.iter().enumerate() {
        if wi == T::zero() {
            continue;
        }
        for a in 0..p {
            let xa = x[(i, a)] * wi;
            for b in a..p {
                g[(a, b)] += xa * x[(i, b)];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
    }
    g
}

/// X'Wv.
pub fn weighted_cross<T: Real>(x: &DMatrix<T>, w: &[T], v: &[T]) -> DVector<T> {
    let p = x.ncols();
    let mut out = DVector::<T>::zeros(p);
    for (i, &wi) in w.iter().enumerate() {
        if wi == T::zero() {
            continue;
        }
        let s = wi * v[i];
        for a in 0..p {
            out[a] += x[(i, a)] * s;
        }
    }
    out
}

/// Inverse of a symmetric positive definite matrix, `None` when the
/// Cholesky factorization fails or the matrix is numerically singular.
pub fn spd_inverse<T: Real>(a: &DMatrix<T>) -> Option<DMatrix<T>> {
    let chol = a.clone().cholesky()?;
    let l = chol.l_dirty();
    let p = a.nrows();
    // reject pivots that are tiny relative to the diagonal scale
    let scale = (0..p)
        .map(|i| a[(i, i)].abs())
        .fold(T::zero(), |m, v| if v > m { v } else { m });
    let tol = T::machine_epsilon() * T::from_usize_lossy(p.max(1)) * scale;
    if (0..p).any(|i| l[(i, i)] * l[(i, i)] <= tol) {
        return None;
    }
    Some(chol.inverse())
}

/// Columns of `x` that are (numerically) linear combinations of the columns
/// before them, found by modified Gram–Schmidt.
pub fn dependent_columns<T: Real>(x: &DMatrix<T>) -> Vec<usize> {
    let tol = T::machine_epsilon().sqrt();
    let mut basis: Vec<DVector<T>> = Vec::new();
    let mut dependent = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let norm = col.norm();
        if norm == T::zero() {
            dependent.push(j);
            continue;
        }
        let mut r = col;
        for q in &basis {
            let c = q.dot(&r);
            r.axpy(-c, q, T::one());
        }
        let rn = r.norm();
        if rn <= tol * norm {
            dependent.push(j);
        } else {
            basis.push(r / rn);
        }
    }
    dependent
}

/// Sum of squares of every entry.
pub fn frobenius_sq<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, &v| acc + v * v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_matches_dense_product() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0f64, 2.0, 1.0, -1.0, 1.0, 0.5, 1.0, 3.0]);
        let w = [0.5, 0.0, 2.0, 1.0];
        let wd = DMatrix::from_diagonal(&DVector::from_column_slice(&w));
        let dense = x.transpose() * &wd * &x;
        assert!((weighted_gram(&x, &w) - dense).norm() < 1e-12);
        let v = [1.0, 2.0, 3.0, 4.0];
        let dense_v = x.transpose() * &wd * DVector::from_column_slice(&v);
        assert!((weighted_cross(&x, &w, &v) - dense_v).norm() < 1e-12);
    }

    #[test]
    fn finds_dependent_columns() {
        let x = DMatrix::from_row_slice(
            4,
            3,
            &[
                1.0f64, 2.0, 4.0, 1.0, 3.0, 6.0, 1.0, 5.0, 10.0, 1.0, 7.0, 14.0,
            ],
        );
        assert_eq!(dependent_columns(&x), vec![2]);
        assert!(spd_inverse(&(x.transpose() * &x)).is_none());
    }
}
