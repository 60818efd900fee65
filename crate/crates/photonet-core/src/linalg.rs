//! Small dense solvers. Nothing here is clever; the systems are 3x3
//! complex (steady states) or <=16x16 real symmetric (fit normal
//! equations), so plain Gaussian elimination with partial pivoting wins
//! on clarity.

#![allow(clippy::needless_range_loop)] // index-based elimination reads best

use alloc::vec::Vec;
use num_complex::Complex64;

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

/// Solve `a x = b` for a 3x3 complex system in place.
pub(crate) fn solve_complex_3x3(
    mut a: [[Complex64; 3]; 3],
    mut b: [Complex64; 3],
) -> Result<[Complex64; 3]> {
    let scale = a
        .iter()
        .flatten()
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return Err(Error::Singular("zero coefficient matrix"));
    }
    for col in 0..3 {
        let pivot_row = (col..3)
            .max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))
            .expect("non-empty range");
        if a[pivot_row][col].norm() < 1e-14 * scale {
            return Err(Error::Singular("steady-state matrix is singular"));
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in (col + 1)..3 {
            let factor = a[row][col] / a[col][col];
            for k in col..3 {
                let sub = factor * a[col][k];
                a[row][k] -= sub;
            }
            let sub = factor * b[col];
            b[row] -= sub;
        }
    }
    let mut x = [Complex64::new(0.0, 0.0); 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in (row + 1)..3 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Solve a dense real `n x n` system (row-major) in place. Used for the
/// damped normal equations of the spectrum fit.
pub(crate) fn solve_real(n: usize, a: &mut [f64], b: &mut [f64]) -> Result<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let scale = a.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::Singular("zero normal matrix"));
    }
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .expect("non-empty range");
        if a[pivot_row * n + col].abs() < 1e-14 * scale {
            return Err(Error::Singular("normal equations are singular"));
        }
        if pivot_row != col {
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
            }
            b.swap(col, pivot_row);
        }
        for row in (col + 1)..n {
            let factor = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = alloc::vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    Ok(x)
}
