//! Dense LU factorisation with transpose solves and a 1-norm condition estimate.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};

pub struct DenseLu {
    lu: LU<f64, Dyn, Dyn>,
    norm1: f64,
    n: usize,
}

/// Maximum absolute column sum.
pub fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl DenseLu {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                what: "LU factorisation",
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("system matrix".into()));
        }
        Ok(Self {
            norm1: norm1(a),
            n: a.nrows(),
            lu: a.clone().lu(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn determinant(&self) -> f64 {
        self.lu.determinant()
    }

    pub fn is_singular(&self) -> bool {
        !self.lu.is_invertible()
    }

    pub fn solve(&self, b: &DVector<f64>) -> Option<DVector<f64>> {
        self.lu.solve(b)
    }

    /// Solves `Aᵀ x = b` using `PA = LU`, i.e. `Uᵀ Lᵀ (P x) = b`.
    pub fn solve_transpose(&self, b: &DVector<f64>) -> Option<DVector<f64>> {
        let u = self.lu.u();
        let l = self.lu.l();
        let y = u.tr_solve_upper_triangular(b)?;
        let mut x = l.tr_solve_lower_triangular(&y)?;
        self.lu.p().inv_permute_rows(&mut x);
        Some(x)
    }

    /// Hager's estimate of `‖A⁻¹‖₁ ‖A‖₁`; infinite if singular.
    pub fn condition_estimate(&self) -> f64 {
        if self.is_singular() || self.n == 0 {
            return f64::INFINITY;
        }
        let n = self.n;
        let mut x = DVector::from_element(n, 1.0 / n as f64);
        let mut est = 0.0;
        for _ in 0..5 {
            let Some(y) = self.solve(&x) else {
                return f64::INFINITY;
            };
            est = y.iter().map(|v| v.abs()).sum::<f64>();
            let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
            let Some(z) = self.solve_transpose(&xi) else {
                return f64::INFINITY;
            };
            let j = z.iamax();
            if z[j].abs() <= z.dot(&x) {
                break;
            }
            x.fill(0.0);
            x[j] = 1.0;
        }
        // Higham's alternating-sign safeguard.
        let alt = DVector::from_fn(n, |i, _| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            s * (1.0 + i as f64 / (n.max(2) - 1) as f64)
        });
        if let Some(y) = self.solve(&alt) {
            let alt_est = 2.0 * y.iter().map(|v| v.abs()).sum::<f64>() / (3.0 * n as f64);
            est = est.max(alt_est);
        }
        let c = est * self.norm1;
        if c.is_finite() {
            c
        } else {
            f64::INFINITY
        }
    }
}
