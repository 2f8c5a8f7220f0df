//! Indirect observations `Z = S X` of a latent SEM.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::invariance::{Head, Representation};
use crate::sem::SemModel;

/// Linear observation map `S` (`m x (n+1)`); row `target_row` defines `Z_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMap {
    matrix: DMatrix<f64>,
    target_row: usize,
}

impl ObservationMap {
    pub fn new(matrix: DMatrix<f64>, target_row: usize) -> Result<Self> {
        if matrix.nrows() < 2 {
            return Err(Error::DimensionMismatch(
                "observation map needs a target row and at least one covariate row".into(),
            ));
        }
        if target_row >= matrix.nrows() {
            return Err(Error::IndexOutOfRange {
                index: target_row,
                len: matrix.nrows(),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameters("observation map must be finite".into()));
        }
        Ok(ObservationMap { matrix, target_row })
    }

    /// Observes the listed variables directly, in the given order.
    pub fn selection(num_vars: usize, observed: &[usize], target: usize) -> Result<Self> {
        let target_row = observed
            .iter()
            .position(|&v| v == target)
            .ok_or_else(|| Error::InvalidParameters("the target must be observed".into()))?;
        let mut s = DMatrix::zeros(observed.len(), num_vars);
        for (r, &v) in observed.iter().enumerate() {
            if v >= num_vars {
                return Err(Error::IndexOutOfRange { index: v, len: num_vars });
            }
            s[(r, v)] = 1.0;
        }
        Self::new(s, target_row)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn target_row(&self) -> usize {
        self.target_row
    }

    fn covariate_rows(&self) -> Vec<usize> {
        (0..self.matrix.nrows()).filter(|&r| r != self.target_row).collect()
    }
}

/// `2 Phi (E[Z_{-t} Z_{-t}^T] Phi f - E[Z_{-t} Z_t])` with the `Z` moments
/// pushed forward from the latent second moments.
pub fn indirect_population_gradient(
    sem: &SemModel,
    obs: &ObservationMap,
    phi: &Representation,
    f: &Head,
) -> Result<DVector<f64>> {
    let s = obs.matrix();
    if s.ncols() != sem.num_vars() {
        return Err(Error::DimensionMismatch(format!(
            "observation map has {} columns for {} variables",
            s.ncols(),
            sem.num_vars()
        )));
    }
    let rows = obs.covariate_rows();
    let k = rows.len();
    if phi.len() != k || f.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "{k} observed covariates, representation of length {}, head of length {}",
            phi.len(),
            f.len()
        )));
    }
    let s_cov = s.select_rows(&rows);
    let s_t = s.row(obs.target_row()).transpose();
    let full = sem.full_second_moment();
    let ezz = &s_cov * &full * s_cov.transpose();
    let ezt = &s_cov * (&full * s_t);
    let d = phi.diag();
    let inner = ezz * d.component_mul(f.coeffs()) - ezt;
    Ok(d.component_mul(&inner) * 2.0)
}
