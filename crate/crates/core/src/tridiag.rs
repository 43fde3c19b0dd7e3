//! Thomas algorithm for the tridiagonal systems of the implicit steps.

/// Solves `A x = rhs` with `A` tridiagonal. `lower[i]` multiplies `x[i]` in
/// row `i + 1`, `upper[i]` multiplies `x[i + 1]` in row `i`. Returns `None`
/// on a vanishing pivot.
pub(crate) fn solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    debug_assert_eq!(lower.len(), n - 1);
    debug_assert_eq!(upper.len(), n - 1);
    debug_assert_eq!(rhs.len(), n);

    let mut c = vec![0.0; n - 1];
    let mut d = vec![0.0; n];
    if diag[0] == 0.0 || !diag[0].is_finite() {
        return None;
    }
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let pivot = diag[i] - lower[i - 1] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return None;
        }
        if i < n - 1 {
            c[i] = upper[i] / pivot;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Some(x)
}
