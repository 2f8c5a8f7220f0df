//! Polynomial (lifted) form of the gradient in the entries of a diagonal
//! representation: `grad = U * r(phi)` where `r(phi)` lists every monomial
//! of degree at most 2 in `phi` in graded order.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::invariance::Head;
use crate::linalg::{eval_monomial, monomial_exponents};
use crate::sem::SemModel;

fn column_of(exps: &[Vec<usize>], want: &[usize]) -> usize {
    exps.iter().position(|e| e == want).expect("monomial present")
}

/// `U` with `n` rows and `(n+1)(n+2)/2` columns for head `f0`.
pub fn lift_gradient_matrix(sem: &SemModel, f0: &Head) -> Result<DMatrix<f64>> {
    let m = sem.moments();
    let n = m.cross.len();
    if f0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "head has {} entries for {n} covariates",
            f0.len()
        )));
    }
    let exps = monomial_exponents(n, 2);
    let f = f0.coeffs();
    let mut u = DMatrix::zeros(n, exps.len());
    let mut e = vec![0; n];
    for a in 0..n {
        e[a] = 1;
        u[(a, column_of(&exps, &e))] = -2.0 * m.cross[a];
        for k in 0..n {
            e[k] += 1;
            u[(a, column_of(&exps, &e))] += 2.0 * m.sigma[(a, k)] * f[k];
            e[k] -= 1;
        }
        e[a] = 0;
    }
    Ok(u)
}

/// `r(phi)`: every monomial of degree at most 2, graded order.
pub fn lifted_monomials(phi: &DVector<f64>) -> DVector<f64> {
    let x: Vec<f64> = phi.iter().copied().collect();
    let exps = monomial_exponents(x.len(), 2);
    DVector::from_iterator(exps.len(), exps.iter().map(|e| eval_monomial(&x, e)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariance::{population_gradient, Representation};
    use crate::sem::{build_sem, Edge, Noise};

    #[test]
    fn single_edge_by_hand() {
        // X0 -> Xt with weight w, unit noise: Sigma = 1, c = w
        let w = 0.6;
        let sem = build_sem(&[Edge::new(0, 1, w)], vec![Noise::gaussian(1.0); 2], 1).unwrap();
        let f = 1.7;
        let u = lift_gradient_matrix(&sem, &Head::from_slice(&[f]).unwrap()).unwrap();
        // columns: 1, phi, phi^2
        let expected = DMatrix::from_row_slice(1, 3, &[0.0, -2.0 * w, 2.0 * f]);
        assert!((u - expected).amax() < 1e-15);
    }

    #[test]
    fn zero_representation_lifts_to_zero() {
        let sem = crate::fixtures::example_one(1.0, -1.0);
        let u = lift_gradient_matrix(&sem, &Head::ones(3)).unwrap();
        let r = lifted_monomials(&DVector::zeros(3));
        assert_eq!(r[0], 1.0);
        assert!(u.column(0).iter().all(|&v| v == 0.0));
        assert!((u * r).amax() == 0.0);
    }

    #[test]
    fn lifted_form_matches_gradient() {
        let sem = crate::fixtures::seven_node(0.3);
        let f = Head::from_slice(&[0.2, -1.0, 0.5, 1.5, 0.0, 0.9]).unwrap();
        let phi = Representation::from_slice(&[0.1, -0.4, 1.0, 0.0, 0.8, -0.9]).unwrap();
        let u = lift_gradient_matrix(&sem, &f).unwrap();
        let g = population_gradient(&sem, &phi, &f).unwrap();
        assert!((u * lifted_monomials(phi.diag()) - g).amax() < 1e-12);
    }
}
