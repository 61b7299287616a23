//! Small dense symmetric-matrix helpers (row-major `Vec<f64>`, dimension ≤ ~20).

/// Lower-triangular Cholesky factor of a symmetric matrix, or `None` when the
/// matrix is not numerically positive definite.
pub(crate) fn cholesky(a: &[f64], dim: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), dim * dim);
    let mut l = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut sum = a[i * dim + j];
            for k in 0..j {
                sum -= l[i * dim + k] * l[j * dim + k];
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return None;
                }
                l[i * dim + i] = sum.sqrt();
            } else {
                l[i * dim + j] = sum / l[j * dim + j];
            }
        }
    }
    Some(l)
}

/// Cholesky with the `floor` added to the diagonal when the plain factorisation
/// fails. The floor is grown tenfold until it succeeds (bounded).
pub(crate) fn cholesky_floored(a: &[f64], dim: usize, floor: f64) -> Option<(Vec<f64>, bool)> {
    if let Some(l) = cholesky(a, dim) {
        return Some((l, false));
    }
    let mut eps = floor;
    for _ in 0..12 {
        let mut b = a.to_vec();
        for i in 0..dim {
            b[i * dim + i] += eps;
        }
        if let Some(l) = cholesky(&b, dim) {
            return Some((l, true));
        }
        eps *= 10.0;
    }
    None
}

/// log|A| from its Cholesky factor.
pub(crate) fn chol_log_det(l: &[f64], dim: usize) -> f64 {
    (0..dim).map(|i| l[i * dim + i].ln()).sum::<f64>() * 2.0
}

/// Squared Mahalanobis norm `xᵀ A⁻¹ x` via forward substitution on the factor.
pub(crate) fn chol_quad_form(l: &[f64], dim: usize, x: &[f64], scratch: &mut [f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..dim {
        let mut s = x[i];
        for k in 0..i {
            s -= l[i * dim + k] * scratch[k];
        }
        let z = s / l[i * dim + i];
        scratch[i] = z;
        acc += z * z;
    }
    acc
}

/// Symmetric 2×2 matrix `[[a, b], [b, c]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Sym2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Sym2 {
    pub fn det(&self) -> f64 {
        self.a * self.c - self.b * self.b
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        let half_tr = 0.5 * (self.a + self.c);
        let disc = (0.25 * (self.a - self.c).powi(2) + self.b * self.b).sqrt();
        half_tr - disc
    }

    /// Squared Mahalanobis distance of `(dx, dy)`; requires `det > 0`.
    pub fn mahalanobis_sq(&self, dx: f64, dy: f64) -> f64 {
        (self.c * dx * dx - 2.0 * self.b * dx * dy + self.a * dy * dy) / self.det()
    }

    /// Lower Cholesky factor `(l11, l21, l22)`, or zeros for the null matrix.
    pub fn cholesky(&self) -> (f64, f64, f64) {
        if self.a <= 0.0 {
            return (0.0, 0.0, self.c.max(0.0).sqrt());
        }
        let l11 = self.a.sqrt();
        let l21 = self.b / l11;
        let l22 = (self.c - l21 * l21).max(0.0).sqrt();
        (l11, l21, l22)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_reconstructs() {
        let a = [4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0];
        let l = cholesky(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
                assert!((v - a[i * 3 + j]).abs() < 1e-12);
            }
        }
        let mut s = [0.0; 3];
        // x = A e_0 => xᵀA⁻¹x = A_00
        let x = [4.0, 2.0, 0.4];
        assert!((chol_quad_form(&l, 3, &x, &mut s) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn singular_needs_floor() {
        let a = [1.0, 1.0, 1.0, 1.0];
        assert!(cholesky(&a, 2).is_none());
        let (_, floored) = cholesky_floored(&a, 2, 1e-9).unwrap();
        assert!(floored);
    }

    #[test]
    fn sym2_eigen() {
        let m = Sym2 { a: 2.0, b: 1.0, c: 2.0 };
        assert!((m.min_eigenvalue() - 1.0).abs() < 1e-12);
        assert!((m.det() - 3.0).abs() < 1e-12);
    }
}
