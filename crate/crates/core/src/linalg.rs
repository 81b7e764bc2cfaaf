//! Small dense symmetric solves for the p×p normal equations.

use nalgebra::{DMatrix, DVector};

/// Relative pivot threshold below which a symmetric matrix is treated as
/// singular (relative to its largest diagonal entry).
pub const SINGULAR_RTOL: f64 = 1e-12;

/// Cholesky factorization with symmetric (diagonal) pivoting:
/// `Pᵀ A P = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct PivotedCholesky {
    l: DMatrix<f64>,
    perm: Vec<usize>,
}

impl PivotedCholesky {
    /// Returns `None` when a pivot falls below `SINGULAR_RTOL × max diag(A)`
    /// or the matrix is not square.
    pub fn new(a: &DMatrix<f64>) -> Option<Self> {
        let n = a.nrows();
        if a.ncols() != n || n == 0 {
            return None;
        }
        let max_diag = a.diagonal().iter().fold(0.0_f64, |m, &d| m.max(d));
        if !(max_diag > 0.0) || !max_diag.is_finite() {
            return None;
        }
        let tol = SINGULAR_RTOL * max_diag;
        let mut w = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (m, _) = (k..n)
                .map(|i| (i, w[(i, i)]))
                .fold((k, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
            if m != k {
                w.swap_rows(k, m);
                w.swap_columns(k, m);
                perm.swap(k, m);
            }
            let pivot = w[(k, k)];
            if !(pivot > tol) {
                return None;
            }
            let d = pivot.sqrt();
            w[(k, k)] = d;
            for i in k + 1..n {
                w[(i, k)] /= d;
            }
            // Full trailing block: later symmetric swaps read both triangles.
            for j in k + 1..n {
                let ljk = w[(j, k)];
                for i in k + 1..n {
                    w[(i, j)] -= w[(i, k)] * ljk;
                }
            }
        }
        let l = DMatrix::from_fn(n, n, |i, j| if i >= j { w[(i, j)] } else { 0.0 });
        Some(Self { l, perm })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.perm.len();
        let mut z = DVector::from_fn(n, |i, _| b[self.perm[i]]);
        for i in 0..n {
            let mut s = z[i];
            for k in 0..i {
                s -= self.l[(i, k)] * z[k];
            }
            z[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * z[k];
            }
            z[i] = s / self.l[(i, i)];
        }
        let mut x = DVector::zeros(n);
        for i in 0..n {
            x[self.perm[i]] = z[i];
        }
        x
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.perm.len();
        let mut inv = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            inv.set_column(j, &self.solve(&e));
        }
        (&inv + inv.transpose()) * 0.5
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 9.0, 2.0, 0.5, 2.0, 3.0]);
        let x_true = DVector::from_vec(vec![1.0, -2.0, 0.25]);
        let b = &a * &x_true;
        let chol = PivotedCholesky::new(&a).unwrap();
        let x = chol.solve(&b);
        assert!((x - x_true).amax() < 1e-13);
        let prod = &a * chol.inverse();
        assert!((prod - DMatrix::identity(3, 3)).amax() < 1e-13);
    }

    #[test]
    fn pivot_order_differs_from_natural() {
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[
                1959.354859462204, 78813.84008979391, 83507.96160203122,
                78813.84008979391, 7631178.580489931, 5209054.98096893,
                83507.96160203122, 5209054.98096893, 4410212.34740086,
            ],
        );
        let inv = PivotedCholesky::new(&a).unwrap().inverse();
        let prod = &a * inv;
        assert!((prod - DMatrix::identity(3, 3)).amax() < 1e-9);
    }

    #[test]
    fn detects_singularity() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(PivotedCholesky::new(&a).is_none());
        assert!(PivotedCholesky::new(&DMatrix::zeros(2, 2)).is_none());
    }

    #[test]
    fn pivots_small_leading_entry() {
        let a = DMatrix::from_row_slice(2, 2, &[1e-3, 0.0, 0.0, 1e6]);
        let chol = PivotedCholesky::new(&a).unwrap();
        let x = chol.solve(&DVector::from_vec(vec![1e-3, 1e6]));
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }
}
