//! Dense LU factorization with partial pivoting for the small square
//! systems that arise in support reconstruction.

use crate::error::{Error, Result};

/// Row-major square matrix factored as `P·A = L·U`.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactors {
    /// Factors the `n × n` row-major matrix `a`. Fails when a pivot is
    /// numerically zero relative to the largest entry of its column.
    pub fn factor(n: usize, a: &[f64]) -> Result<Self> {
        assert_eq!(a.len(), n * n, "matrix must be n x n");
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for col in 0..n {
            let (pivot_row, pivot_abs) = (col..n)
                .map(|r| (r, lu[r * n + col].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_abs <= scale * 1e-14 {
                return Err(Error::Degenerate(format!("singular matrix at column {col}")));
            }
            if pivot_row != col {
                for j in 0..n {
                    lu.swap(col * n + j, pivot_row * n + j);
                }
                perm.swap(col, pivot_row);
            }
            let pivot = lu[col * n + col];
            for r in col + 1..n {
                let factor = lu[r * n + col] / pivot;
                lu[r * n + col] = factor;
                if factor != 0.0 {
                    for j in col + 1..n {
                        lu[r * n + j] -= factor * lu[col * n + j];
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let mut s = x[r];
            for j in 0..r {
                s -= self.lu[r * n + j] * x[j];
            }
            x[r] = s;
        }
        for r in (0..n).rev() {
            let mut s = x[r];
            for j in r + 1..n {
                s -= self.lu[r * n + j] * x[j];
            }
            x[r] = s / self.lu[r * n + r];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_pivoting_system() {
        // Needs a row swap: leading entry is zero.
        let a = [0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 2.0, 0.0, 3.0];
        let x_true = [1.0, -2.0, 0.5];
        let b: Vec<f64> = (0..3).map(|r| (0..3).map(|j| a[r * 3 + j] * x_true[j]).sum()).collect();
        let x = LuFactors::factor(3, &a).unwrap().solve(&b);
        for (u, v) in x.iter().zip(x_true) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_is_exact() {
        let a = [1.0, 0.0, 0.0, 1.0];
        assert_eq!(LuFactors::factor(2, &a).unwrap().solve(&[3.0, 7.0]), vec![3.0, 7.0]);
    }

    #[test]
    fn singular_is_rejected() {
        assert!(LuFactors::factor(2, &[0.5, 0.5, 0.5, 0.5]).is_err());
    }
}
