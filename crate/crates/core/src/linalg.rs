//! Small dense helpers for the `(1+q) × (1+q)` systems that show up in
//! weighted fits.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Reciprocal condition numbers below this are treated as singular.
pub const RCOND_THRESHOLD: f64 = 1e-12;

/// Reciprocal 2-norm condition estimate of a symmetric matrix,
/// `min |λ| / max |λ|`; zero for the zero matrix.
pub fn rcond_symmetric(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(symmetrize(m));
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &l in eig.eigenvalues.iter() {
        if !l.is_finite() {
            return 0.0;
        }
        lo = lo.min(l.abs());
        hi = hi.max(l.abs());
    }
    if hi == 0.0 {
        0.0
    } else {
        lo / hi
    }
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Solves `m x = b` for a symmetric matrix that passed the condition check.
/// Cholesky first, LU if `m` is indefinite.
pub fn solve_symmetric(m: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = m.clone().cholesky() {
        return Some(ch.solve(b));
    }
    m.clone().lu().solve(b)
}

pub fn inverse_symmetric(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if let Some(ch) = m.clone().cholesky() {
        return Some(symmetrize(&ch.inverse()));
    }
    m.clone().try_inverse().map(|inv| symmetrize(&inv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rcond_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0, 2.0]));
        assert!((rcond_symmetric(&m) - 0.25).abs() < 1e-15);
        assert_eq!(rcond_symmetric(&DMatrix::zeros(2, 2)), 0.0);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(rcond_symmetric(&singular) < RCOND_THRESHOLD);
    }

    #[test]
    fn solve_two_by_two() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 3.0, 3.0, 5.0]);
        let x = solve_symmetric(&m, &DVector::from_vec(vec![1.0, 1.0])).unwrap();
        assert!((x[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!(x[1].abs() < 1e-15);
    }
}
