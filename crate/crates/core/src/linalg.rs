use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Matrices with a 2-norm condition estimate above this are treated as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Ratio of extreme singular values; infinite for a singular or empty-rank matrix.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    let sv = a.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `a x = b` with partial-pivoting LU after a regularity check.
pub fn solve_regular(a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let condition = condition_number(a);
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::Regularity { condition });
    }
    let rhs = DVector::from_column_slice(b);
    a.clone()
        .lu()
        .solve(&rhs)
        .map(|x| x.iter().copied().collect())
        .ok_or(Error::Regularity {
            condition: f64::INFINITY,
        })
}

/// Inverse after the same regularity check.
pub fn inverse_regular(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let condition = condition_number(a);
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::Regularity { condition });
    }
    a.clone().try_inverse().ok_or(Error::Regularity {
        condition: f64::INFINITY,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_matrix_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(solve_regular(&a, &[1.0, 1.0]), Err(Error::Regularity { .. })));
        let z = DMatrix::<f64>::zeros(1, 1);
        assert!(matches!(inverse_regular(&z), Err(Error::Regularity { .. })));
    }

    #[test]
    fn solves_diagonal() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        assert_eq!(solve_regular(&a, &[2.0, 3.0]).unwrap(), vec![1.0, 1.0]);
    }
}
