//! Compressed least-squares designs.
//!
//! Every head in the crate solves `min_f ||X_{-t} Phi f - X_t||`. Writing
//! `[X_{-t} | X_t] = Q R`, the residual norm equals `||R_x Phi f - r_t||`
//! for every `f`, so a dataset can be replaced by its `(n+1) x (n+1)`
//! triangular factor once and each of the `2^n` subset fits afterwards costs
//! only a tiny solve.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{pinv, r_factor, PINV_RTOL};
use crate::sem::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDesign {
    /// `R[:, :n]`
    rx: DMatrix<f64>,
    /// `R[:, n]`
    rt: DVector<f64>,
    n_rows: usize,
}

impl ReducedDesign {
    pub fn from_dataset(data: &Dataset) -> Self {
        let mut cols = data.covariate_indices();
        cols.push(data.target());
        let stacked = data.samples().select_columns(&cols);
        Self::from_stacked(stacked, data.n_rows())
    }

    /// `stacked` holds the covariates followed by the target column.
    fn from_stacked(stacked: DMatrix<f64>, n_rows: usize) -> Self {
        let n = stacked.ncols() - 1;
        let r = r_factor(stacked);
        ReducedDesign {
            rx: r.columns(0, n).into_owned(),
            rt: r.column(n).into_owned(),
            n_rows,
        }
    }

    /// Design equivalent to stacking all rows of `parts`.
    pub fn pooled(parts: &[ReducedDesign]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParameters("no designs to pool".into()))?;
        let n = first.num_covariates();
        if parts.iter().any(|p| p.num_covariates() != n) {
            return Err(Error::DimensionMismatch("pooled designs differ in width".into()));
        }
        let total: usize = parts.iter().map(|p| p.rx.nrows()).sum();
        let mut stacked = DMatrix::zeros(total, n + 1);
        let mut row = 0;
        for p in parts {
            let h = p.rx.nrows();
            stacked.view_mut((row, 0), (h, n)).copy_from(&p.rx);
            stacked.view_mut((row, n), (h, 1)).copy_from(&p.rt);
            row += h;
        }
        let n_rows = parts.iter().map(|p| p.n_rows).sum();
        Ok(Self::from_stacked(stacked, n_rows))
    }

    pub fn num_covariates(&self) -> usize {
        self.rx.ncols()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// Minimum-norm `argmin_f ||X Phi f - y||` for diagonal `Phi`.
    pub fn solve(&self, phi: &DVector<f64>) -> DVector<f64> {
        let n = self.num_covariates();
        let active: Vec<usize> = (0..n).filter(|&i| phi[i] != 0.0).collect();
        let mut head = DVector::zeros(n);
        if active.is_empty() {
            return head;
        }
        let a = DMatrix::from_fn(self.rx.nrows(), active.len(), |r, c| {
            self.rx[(r, active[c])] * phi[active[c]]
        });
        let sol = pinv(&a, PINV_RTOL) * &self.rt;
        for (k, &i) in active.iter().enumerate() {
            head[i] = sol[k];
        }
        head
    }

    /// Empirical `E[X_{-t} X_{-t}^T]` and `E[X_{-t} X_t]`.
    pub fn moments(&self) -> (DMatrix<f64>, DVector<f64>) {
        let scale = 1.0 / self.n_rows as f64;
        (
            self.rx.tr_mul(&self.rx) * scale,
            self.rx.tr_mul(&self.rt) * scale,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::linalg::min_norm_solve;

    #[test]
    fn reduced_solve_matches_direct_solve() {
        let sem = fixtures::example_one(1.0, -1.0);
        let data = sem.sample_dataset(500, 1).unwrap();
        let design = ReducedDesign::from_dataset(&data);
        let phi = DVector::from_vec(vec![0.0, 1.0, 0.5]);
        let x = data.covariates() * DMatrix::from_diagonal(&phi);
        let direct = min_norm_solve(&x, &data.target_column());
        let reduced = design.solve(&phi);
        assert!((direct - reduced).amax() < 1e-10);
    }

    #[test]
    fn pooled_equals_concatenated() {
        let sem = fixtures::example_one(1.0, -1.0);
        let a = sem.sample_dataset(300, 1).unwrap();
        let b = sem.sample_dataset(200, 2).unwrap();
        let pooled =
            ReducedDesign::pooled(&[ReducedDesign::from_dataset(&a), ReducedDesign::from_dataset(&b)])
                .unwrap();
        let mut all = DMatrix::zeros(500, 4);
        all.rows_mut(0, 300).copy_from(a.samples());
        all.rows_mut(300, 200).copy_from(b.samples());
        let joint = crate::sem::Dataset::new(all, 3, "joint", 0, a.names().to_vec()).unwrap();
        let direct = ReducedDesign::from_dataset(&joint);
        let phi = DVector::from_element(3, 1.0);
        assert!((pooled.solve(&phi) - direct.solve(&phi)).amax() < 1e-10);
        assert_eq!(pooled.n_rows(), 500);
    }

    #[test]
    fn moments_match_dataset() {
        let sem = fixtures::seven_node(0.02);
        let data = sem.sample_dataset(100, 5).unwrap();
        let (sigma, cross) = ReducedDesign::from_dataset(&data).moments();
        let x = data.covariates();
        let y = data.target_column();
        assert!((sigma - x.tr_mul(&x) / 100.0).amax() < 1e-12);
        assert!((cross - x.tr_mul(&y) / 100.0).amax() < 1e-12);
    }
}
