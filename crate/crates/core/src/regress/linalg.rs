//! Dense symmetric positive-definite solves via Cholesky, enough for the
//! normal equations and kernel systems in this crate.

use crate::scalar::Real;

/// Factor `a` (n×n, row-major, symmetric) in place into its lower Cholesky
/// triangle. Returns the failing pivot column on non-positive-definiteness.
pub(crate) fn cholesky_in_place<T: Real>(a: &mut [T], n: usize) -> Result<(), usize> {
    debug_assert_eq!(a.len(), n * n);
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if !(diag > T::zero()) || !diag.is_finite() {
            return Err(j);
        }
        let diag = diag.sqrt();
        a[j * n + j] = diag;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / diag;
        }
    }
    Ok(())
}

/// Solve L z = b in place (forward substitution, lower triangle of `l`).
pub(crate) fn forward_solve<T: Real>(l: &[T], n: usize, b: &mut [T]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solve Lᵀ x = z in place (backward substitution).
pub(crate) fn backward_solve<T: Real>(l: &[T], n: usize, b: &mut [T]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solve (L Lᵀ) x = b in place.
pub(crate) fn cholesky_solve<T: Real>(l: &[T], n: usize, b: &mut [T]) {
    forward_solve(l, n, b);
    backward_solve(l, n, b);
}

/// log det(L Lᵀ) = 2 Σ ln L_ii.
pub(crate) fn log_det<T: Real>(l: &[T], n: usize) -> T {
    let mut s = T::zero();
    for i in 0..n {
        s += l[i * n + i].ln();
    }
    s + s
}
