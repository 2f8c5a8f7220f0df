//! Moving a head into the representation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sem::PopulationMoments;

/// Representation `Phi' = Phi A` together with the change of basis `A`,
/// whose first column is `f` and whose remaining columns are an orthonormal
/// basis of the complement of `f`. Predictions of `(Phi', f_o)` and
/// `(Phi, f)` coincide, and the gradients are related by
/// `grad' = A^T grad`, so one vanishes exactly when the other does.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadTransfer {
    pub a: DMatrix<f64>,
    pub phi_prime: DMatrix<f64>,
}

pub fn head_transfer(phi: &DMatrix<f64>, f: &DVector<f64>) -> Result<HeadTransfer> {
    let n = f.len();
    if phi.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "representation has {} columns, head has {n} entries",
            phi.ncols()
        )));
    }
    let norm = f.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroHead);
    }
    let mut basis: Vec<DVector<f64>> = vec![f / norm];
    for k in 0..n {
        if basis.len() == n {
            break;
        }
        let mut v = DVector::zeros(n);
        v[k] = 1.0;
        // two passes of modified Gram-Schmidt for stability
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v -= q * c;
            }
        }
        let vn = v.norm();
        if vn > 1e-8 {
            basis.push(v / vn);
        }
    }
    let mut a = DMatrix::zeros(n, n);
    a.set_column(0, f);
    for (k, q) in basis.iter().enumerate().skip(1) {
        a.set_column(k, q);
    }
    Ok(HeadTransfer {
        phi_prime: phi * &a,
        a,
    })
}

/// `2 (Phi^T Sigma Phi f - Phi^T c)` for a general `n x r` representation.
pub fn gradient_general(
    moments: &PopulationMoments,
    phi: &DMatrix<f64>,
    f: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = moments.cross.len();
    if phi.nrows() != n || phi.ncols() != f.len() {
        return Err(Error::DimensionMismatch(format!(
            "representation is {}x{}, expected {n} rows and {} columns",
            phi.nrows(),
            phi.ncols(),
            f.len()
        )));
    }
    let pf = phi * f;
    Ok(phi.tr_mul(&(&moments.sigma * pf - &moments.cross)) * 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::invariance::{population_gradient, population_loss, Head, Representation};

    #[test]
    fn canonical_head_gives_identity() {
        let phi = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.0, -0.2]));
        let t = head_transfer(&phi, &DVector::from_vec(vec![1.0, 0.0, 0.0])).unwrap();
        assert_eq!(t.a, DMatrix::identity(3, 3));
        assert_eq!(t.phi_prime, phi);
    }

    #[test]
    fn scaled_canonical_head() {
        let phi = DMatrix::identity(3, 3);
        let t = head_transfer(&phi, &DVector::from_vec(vec![2.0, 0.0, 0.0])).unwrap();
        assert_eq!(t.a, DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, 1.0])));
    }

    #[test]
    fn zero_head_rejected() {
        let phi = DMatrix::identity(2, 2);
        assert_eq!(head_transfer(&phi, &DVector::zeros(2)), Err(Error::ZeroHead));
    }

    #[test]
    fn predictions_and_gradients_transform() {
        let sem = fixtures::example_one(0.7, -0.2);
        let m = sem.moments();
        let phi = Representation::from_slice(&[0.3, -0.8, 1.0]).unwrap();
        let f = DVector::from_vec(vec![1.2, 0.4, -2.0]);
        let t = head_transfer(&phi.matrix(), &f).unwrap();
        let e0 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        assert!((&t.a * &e0 - &f).amax() < 1e-15);
        let g = population_gradient(&sem, &phi, &Head::new(f.clone()).unwrap()).unwrap();
        let g2 = gradient_general(&m, &t.phi_prime, &e0).unwrap();
        assert!((t.a.tr_mul(&g) - &g2).amax() < 1e-12);
        let l1 = population_loss(&m, &phi, &Head::new(f).unwrap()).unwrap();
        let pf = &t.phi_prime * &e0;
        let l2 = pf.dot(&(&m.sigma * &pf)) - 2.0 * pf.dot(&m.cross) + m.target_second;
        assert!((l1 - l2).abs() < 1e-12);
    }
}
