//! Trace-free symmetric forms on the tangent space of the boundary: the
//! second fundamental form `h_ij(q)` in the gauge where the mean curvature
//! vanishes.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracelessSymmetricForm {
    n: usize,
    entries: DMatrix<f64>,
}

impl TracelessSymmetricForm {
    /// Validates an `(n-1) x (n-1)` matrix as symmetric and trace-free.
    pub fn new(n: usize, entries: DMatrix<f64>) -> Result<Self> {
        let d = n.checked_sub(1).filter(|d| *d >= 1).ok_or_else(|| Error::InvalidForm(format!("dimension n = {n} too small")))?;
        if entries.nrows() != d || entries.ncols() != d {
            return Err(Error::InvalidForm(format!(
                "expected a {d}x{d} matrix for n = {n}, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidForm("non-finite entry".into()));
        }
        let scale = entries.amax().max(1.0);
        let asym = (&entries - entries.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::InvalidForm(format!("not symmetric (max |h_ij - h_ji| = {asym:e})")));
        }
        let trace = entries.trace();
        if trace.abs() > 1e-12 * scale * d as f64 {
            return Err(Error::InvalidForm(format!("not trace-free (trace = {trace:e})")));
        }
        Ok(Self { n, entries })
    }

    pub fn from_rows(n: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidForm("ragged matrix".into()));
        }
        Self::new(n, DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    /// `diag(values)` padded with zeros to size `n-1`.
    pub fn diagonal(n: usize, values: &[f64]) -> Result<Self> {
        let d = n.saturating_sub(1);
        if values.len() > d {
            return Err(Error::InvalidForm(format!("{} diagonal values for n = {n}", values.len())));
        }
        let mut m = DMatrix::zeros(d, d);
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        Self::new(n, m)
    }

    pub fn zero(n: usize) -> Self {
        let d = n - 1;
        Self { n, entries: DMatrix::zeros(d, d) }
    }

    /// Gaussian random symmetric matrix with its trace removed.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let d = n - 1;
        let mut m = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
        m = 0.5 * (&m + m.transpose());
        let shift = m.trace() / d as f64;
        for i in 0..d {
            m[(i, i)] -= shift;
        }
        Self { n, entries: m }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Tangential dimension `n - 1`.
    pub fn dim(&self) -> usize {
        self.n - 1
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// `sum_ij h_ij^2`.
    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { n: self.n, entries: &self.entries * c }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|x| *x == 0.0)
    }

    /// `h_ij z_i z_j`.
    pub fn quadratic(&self, z: &[f64]) -> f64 {
        let d = self.dim();
        let mut s = 0.0;
        for i in 0..d {
            let mut row = 0.0;
            for j in 0..d {
                row += self.entries[(i, j)] * z[j];
            }
            s += z[i] * row;
        }
        s
    }

    /// `h z`.
    pub fn apply(&self, z: &[f64]) -> DVector<f64> {
        &self.entries * DVector::from_column_slice(&z[..self.dim()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_identity_and_asymmetric() {
        assert!(TracelessSymmetricForm::new(7, DMatrix::identity(6, 6)).is_err());
        let mut m = DMatrix::zeros(6, 6);
        m[(0, 1)] = 1.0;
        assert!(TracelessSymmetricForm::new(7, m).is_err());
        assert!(TracelessSymmetricForm::new(7, DMatrix::zeros(5, 5)).is_err());
    }

    #[test]
    fn diag_example() {
        let h = TracelessSymmetricForm::diagonal(7, &[1.0, -1.0]).unwrap();
        assert_eq!(h.norm_sq(), 2.0);
        assert_eq!(h.quadratic(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]), 1.0);
        assert_eq!(h.quadratic(&[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]), -1.0);
    }

    #[test]
    fn random_is_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let h = TracelessSymmetricForm::random(9, &mut rng);
            assert!(TracelessSymmetricForm::new(9, h.entries().clone()).is_ok());
        }
    }
}
