//! Numerical degree checks: fit a polynomial of fixed degree to
//! `||grad||^2` as a function of intervention parameters and measure how
//! well it predicts held-out points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::intervention::{apply, Intervention};
use crate::invariance::{population_gradient, Head, Representation};
use crate::linalg::{eval_monomial, monomial_exponents, pinv};
use crate::sem::SemModel;

/// Points at which the probed function is fitted and checked.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentGrid {
    pub fit: Vec<Vec<f64>>,
    pub held_out: Vec<Vec<f64>>,
}

impl AssignmentGrid {
    pub fn new(fit: Vec<Vec<f64>>, held_out: Vec<Vec<f64>>) -> Result<Self> {
        let k = fit.first().map(Vec::len).unwrap_or(0);
        if k == 0 || held_out.is_empty() {
            return Err(Error::InvalidParameters(
                "grid needs fit and held-out points of positive dimension".into(),
            ));
        }
        if fit.iter().chain(&held_out).any(|p| p.len() != k) {
            return Err(Error::DimensionMismatch("grid points differ in dimension".into()));
        }
        Ok(AssignmentGrid { fit, held_out })
    }

    /// Points drawn uniformly from `[-half_width, half_width]^k`.
    pub fn random(k: usize, n_fit: usize, n_held: usize, half_width: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |count: usize| -> Vec<Vec<f64>> {
            (0..count)
                .map(|_| (0..k).map(|_| rng.random_range(-half_width..=half_width)).collect())
                .collect()
        };
        let fit = draw(n_fit);
        let held = draw(n_held);
        Self::new(fit, held)
    }

    pub fn dim(&self) -> usize {
        self.fit[0].len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeFitReport {
    pub degree: usize,
    pub terms: usize,
    pub fit_points: usize,
    pub held_out_points: usize,
    /// Max absolute residual on the fit points, divided by `max(1, max |y|)`.
    pub fit_residual: f64,
    /// Same, on the held-out points.
    pub held_out_residual: f64,
}

/// Least-squares fit of a degree-`degree` polynomial to `func` on the grid.
pub fn polynomial_degree_probe<F>(mut func: F, grid: &AssignmentGrid, degree: usize) -> Result<DegreeFitReport>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let exps = monomial_exponents(grid.dim(), degree);
    if grid.fit.len() <= exps.len() {
        return Err(Error::InvalidParameters(format!(
            "{} fit points cannot pin down {} coefficients",
            grid.fit.len(),
            exps.len()
        )));
    }
    let y_fit = grid.fit.iter().map(|p| func(p)).collect::<Result<Vec<_>>>()?;
    let y_held = grid.held_out.iter().map(|p| func(p)).collect::<Result<Vec<_>>>()?;
    let vander = |pts: &[Vec<f64>]| {
        DMatrix::from_fn(pts.len(), exps.len(), |r, c| eval_monomial(&pts[r], &exps[c]))
    };
    let v = vander(&grid.fit);
    let coeffs = pinv(&v, 1e-14) * DVector::from_column_slice(&y_fit);
    let scale = y_fit
        .iter()
        .chain(&y_held)
        .fold(1.0_f64, |acc, y| acc.max(y.abs()));
    let resid = |pts: &[Vec<f64>], ys: &[f64]| {
        let pred = vander(pts) * &coeffs;
        ys.iter()
            .zip(pred.iter())
            .fold(0.0_f64, |acc, (y, p)| acc.max((y - p).abs()))
            / scale
    };
    Ok(DegreeFitReport {
        degree,
        terms: exps.len(),
        fit_points: grid.fit.len(),
        held_out_points: grid.held_out.len(),
        fit_residual: resid(&grid.fit, &y_fit),
        held_out_residual: resid(&grid.held_out, &y_held),
    })
}

fn squared_norm(env: &SemModel, phi: &Representation, f0: &Head) -> Result<f64> {
    Ok(population_gradient(env, phi, f0)?.norm_squared())
}

/// `||grad||^2` as a function of hard assignments at `sites`.
pub fn atomic_degree_probe(
    base: &SemModel,
    sites: &[usize],
    phi: &Representation,
    f0: &Head,
    grid: &AssignmentGrid,
    degree: usize,
) -> Result<DegreeFitReport> {
    if sites.is_empty() || grid.dim() != sites.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} sites, grid of dimension {}",
            sites.len(),
            grid.dim()
        )));
    }
    polynomial_degree_probe(
        |a| {
            let iv = Intervention::hard_only(sites.iter().copied().zip(a.iter().copied()));
            squared_norm(&apply(base, &iv)?, phi, f0)
        },
        grid,
        degree,
    )
}

/// `||grad||^2` as a function of soft weights on `edges`.
pub fn soft_degree_probe(
    base: &SemModel,
    edges: &[(usize, usize)],
    phi: &Representation,
    f0: &Head,
    grid: &AssignmentGrid,
    degree: usize,
) -> Result<DegreeFitReport> {
    if edges.is_empty() || grid.dim() != edges.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} edges, grid of dimension {}",
            edges.len(),
            grid.dim()
        )));
    }
    polynomial_degree_probe(
        |w| {
            let iv = Intervention::soft_only(edges.iter().copied().zip(w.iter().copied()));
            squared_norm(&apply(base, &iv)?, phi, f0)
        },
        grid,
        degree,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn exact_polynomial_is_recovered() {
        let grid = AssignmentGrid::random(2, 30, 5, 2.0, 1).unwrap();
        let rep = polynomial_degree_probe(|x| Ok(x[0].powi(3) * x[1] - 2.0 * x[1] + 0.5), &grid, 4)
            .unwrap();
        assert!(rep.held_out_residual < 1e-12);
        let low = polynomial_degree_probe(|x| Ok(x[0].powi(3) * x[1]), &grid, 3).unwrap();
        assert!(low.held_out_residual > 1e-3);
    }

    #[test]
    fn too_few_points_rejected() {
        let grid = AssignmentGrid::random(1, 5, 2, 1.0, 0).unwrap();
        assert!(polynomial_degree_probe(|x| Ok(x[0]), &grid, 4).is_err());
    }

    #[test]
    fn soft_weight_gives_quartic() {
        let base = fixtures::seven_node(0.5);
        let phi = Representation::identity(6);
        let f0 = Head::ones(6);
        let grid = AssignmentGrid::random(1, 9, 3, 1.5, 4).unwrap();
        let rep = soft_degree_probe(&base, &[(2, 4)], &phi, &f0, &grid, 4).unwrap();
        assert!(rep.held_out_residual < 1e-9, "{rep:?}");
    }
}
