use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Invertible affine map `x ↦ T x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    matrix: DMatrix<f64>,
    shift: DVector<f64>,
    inverse: DMatrix<f64>,
    log_abs_det: f64,
    norm: f64,
}

impl AffineMap {
    pub fn new(matrix: DMatrix<f64>, shift: DVector<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n || shift.len() != n {
            return Err(Error::input("affine map needs a square matrix and a matching shift"));
        }
        if matrix.iter().chain(shift.iter()).any(|v| !v.is_finite()) {
            return Err(Error::input("affine map entries must be finite"));
        }
        let svd = matrix.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smin > 1e-13 * smax) {
            return Err(Error::input("affine map matrix is singular"));
        }
        let inverse = matrix.clone().try_inverse().ok_or_else(|| Error::input("affine map matrix is singular"))?;
        let log_abs_det = svd.singular_values.iter().map(|s| s.ln()).sum();
        Ok(Self { matrix, shift, inverse, log_abs_det, norm: smax })
    }

    pub fn linear(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        Self::new(matrix, DVector::zeros(n))
    }

    pub fn identity(n: usize) -> Self {
        Self::linear(DMatrix::identity(n, n)).expect("identity is invertible")
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn shift(&self) -> &DVector<f64> {
        &self.shift
    }

    pub fn inverse_matrix(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn log_abs_det(&self) -> f64 {
        self.log_abs_det
    }

    /// Spectral norm of the linear part.
    pub fn operator_norm(&self) -> f64 {
        self.norm
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x + &self.shift
    }

    pub fn invert(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.inverse * (y - &self.shift)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &AffineMap) -> AffineMap {
        let matrix = &self.matrix * &inner.matrix;
        let shift = &self.matrix * &inner.shift + &self.shift;
        Self::new(matrix, shift).expect("composition of invertible maps is invertible")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_compose() {
        let t = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, -0.1, 1.0, 0.5, 0.0, 0.2, 0.7]);
        let m = AffineMap::new(t, DVector::from_vec(vec![0.1, -0.2, 0.3])).unwrap();
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        assert!((m.invert(&m.apply(&x)) - &x).amax() < 1e-12);
        let c = m.compose(&m);
        assert!((c.apply(&x) - m.apply(&m.apply(&x))).amax() < 1e-12);
        assert!((c.log_abs_det() - 2.0 * m.log_abs_det()).abs() < 1e-12);
        assert!(AffineMap::linear(DMatrix::zeros(2, 2)).is_err());
    }
}
