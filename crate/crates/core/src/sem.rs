//! Linear structural equation models.
//!
//! Variable `i` is generated as `X_i = sum_j B[j, i] X_j + eta_i`, so the
//! weight matrix is indexed `(from, to)` and the joint vector satisfies
//! `X = M^T eta` with `M = (I - B)^{-1}`. Every moment here is an
//! uncentered second moment: the regression heads carry no intercept.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exogenous term of one structural equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Noise {
    /// Independent Gaussian noise.
    Gaussian {
        variance: f64,
        #[serde(default)]
        mean: f64,
    },
    /// A constant, which is how a hard assignment `X_i := a` is represented.
    Constant { constant: f64 },
}

impl Noise {
    pub fn gaussian(variance: f64) -> Self {
        Noise::Gaussian {
            variance,
            mean: 0.0,
        }
    }

    pub fn constant(value: f64) -> Self {
        Noise::Constant { constant: value }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Noise::Gaussian { mean, .. } => mean,
            Noise::Constant { constant } => constant,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Noise::Gaussian { variance, .. } => variance,
            Noise::Constant { .. } => 0.0,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Noise::Constant { .. })
    }

    fn validate(&self, index: usize) -> Result<()> {
        match *self {
            Noise::Gaussian { variance, mean } => {
                if !variance.is_finite() || variance < 0.0 {
                    return Err(Error::InvalidNoiseSpec(format!(
                        "variable {index}: variance must be finite and non-negative, got {variance}"
                    )));
                }
                if !mean.is_finite() {
                    return Err(Error::InvalidNoiseSpec(format!(
                        "variable {index}: mean must be finite"
                    )));
                }
            }
            Noise::Constant { constant } => {
                if !constant.is_finite() {
                    return Err(Error::InvalidNoiseSpec(format!(
                        "variable {index}: constant must be finite"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(from: usize, to: usize, weight: f64) -> Self {
        Edge { from, to, weight }
    }
}

/// An immutable, validated linear SEM over `n + 1` variables, one of which
/// is the prediction target.
#[derive(Clone, PartialEq)]
pub struct SemModel {
    weights: DMatrix<f64>,
    topo_order: Vec<usize>,
    target: usize,
    noise: Vec<Noise>,
    names: Vec<String>,
}

impl fmt::Debug for SemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SemModel")
            .field("names", &self.names)
            .field("target", &self.target)
            .field("edges", &self.edges())
            .field("noise", &self.noise)
            .finish()
    }
}

/// Builds a SEM from an edge list. Variable count is `noise.len()`.
pub fn build_sem(edges: &[Edge], noise: Vec<Noise>, target: usize) -> Result<SemModel> {
    let len = noise.len();
    if len < 2 {
        return Err(Error::InvalidParameters(
            "a SEM needs at least one covariate and a target".into(),
        ));
    }
    check_index(target, len)?;
    let mut weights = DMatrix::zeros(len, len);
    let mut seen = BTreeSet::new();
    for e in edges {
        check_index(e.from, len)?;
        check_index(e.to, len)?;
        if !e.weight.is_finite() {
            return Err(Error::InvalidEdge(format!(
                "{} -> {} has non-finite weight",
                e.from, e.to
            )));
        }
        if e.from == e.to {
            return Err(Error::CycleDetected);
        }
        if !seen.insert((e.from, e.to)) {
            return Err(Error::InvalidEdge(format!(
                "duplicate edge {} -> {}",
                e.from, e.to
            )));
        }
        weights[(e.from, e.to)] = e.weight;
    }
    SemModel::from_parts(weights, noise, target, default_names(len))
}

pub(crate) fn default_names(len: usize) -> Vec<String> {
    (0..len).map(|i| format!("X{i}")).collect()
}

fn check_index(index: usize, len: usize) -> Result<()> {
    if index >= len {
        Err(Error::IndexOutOfRange { index, len })
    } else {
        Ok(())
    }
}

/// Kahn's algorithm, smallest ready index first, over nonzero entries.
fn topological_order(weights: &DMatrix<f64>) -> Option<Vec<usize>> {
    let len = weights.nrows();
    let mut indegree = vec![0usize; len];
    for j in 0..len {
        for i in 0..len {
            if weights[(j, i)] != 0.0 {
                indegree[i] += 1;
            }
        }
    }
    let mut ready: BTreeSet<usize> = (0..len).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(len);
    while let Some(&v) = ready.iter().next() {
        ready.remove(&v);
        order.push(v);
        for i in 0..len {
            if weights[(v, i)] != 0.0 {
                indegree[i] -= 1;
                if indegree[i] == 0 {
                    ready.insert(i);
                }
            }
        }
    }
    (order.len() == len).then_some(order)
}

impl SemModel {
    /// Validates and assembles a model from a dense `(from, to)` weight matrix.
    pub fn from_parts(
        weights: DMatrix<f64>,
        noise: Vec<Noise>,
        target: usize,
        names: Vec<String>,
    ) -> Result<Self> {
        let len = noise.len();
        if weights.nrows() != len || weights.ncols() != len {
            return Err(Error::DimensionMismatch(format!(
                "weights are {}x{}, noise has {} entries",
                weights.nrows(),
                weights.ncols(),
                len
            )));
        }
        if names.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} variables",
                names.len(),
                len
            )));
        }
        check_index(target, len)?;
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidEdge("non-finite weight".into()));
        }
        for (i, nz) in noise.iter().enumerate() {
            nz.validate(i)?;
        }
        if noise[target].is_constant() {
            return Err(Error::InvalidNoiseSpec(
                "the target's noise must be exogenous, not a constant".into(),
            ));
        }
        let topo_order = topological_order(&weights).ok_or(Error::CycleDetected)?;
        Ok(SemModel {
            weights,
            topo_order,
            target,
            noise,
            names,
        })
    }

    /// Same model with new variable names.
    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.num_vars() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} variables",
                names.len(),
                self.num_vars()
            )));
        }
        self.names = names;
        Ok(self)
    }

    /// Total variable count `n + 1`.
    pub fn num_vars(&self) -> usize {
        self.noise.len()
    }

    /// Number of non-target covariates `n`.
    pub fn num_covariates(&self) -> usize {
        self.num_vars() - 1
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn noise(&self) -> &[Noise] {
        &self.noise
    }

    pub fn topo_order(&self) -> &[usize] {
        &self.topo_order
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Nonzero edges in row-major `(from, to)` order.
    pub fn edges(&self) -> Vec<Edge> {
        let len = self.num_vars();
        let mut out = Vec::new();
        for j in 0..len {
            for i in 0..len {
                let w = self.weights[(j, i)];
                if w != 0.0 {
                    out.push(Edge::new(j, i, w));
                }
            }
        }
        out
    }

    pub fn parents(&self, i: usize) -> Vec<usize> {
        (0..self.num_vars())
            .filter(|&j| self.weights[(j, i)] != 0.0)
            .collect()
    }

    /// Variable indices of the covariates, ascending. Position `p` in any
    /// covariate-space vector refers to variable `covariate_indices()[p]`.
    pub fn covariate_indices(&self) -> Vec<usize> {
        (0..self.num_vars()).filter(|&i| i != self.target).collect()
    }

    /// Covariate-space position of a variable, `None` for the target.
    pub fn covariate_position(&self, var: usize) -> Option<usize> {
        if var == self.target || var >= self.num_vars() {
            None
        } else if var < self.target {
            Some(var)
        } else {
            Some(var - 1)
        }
    }

    /// Zero-padded target parent weights over covariate space.
    pub fn target_parent_weights(&self) -> DVector<f64> {
        let idx = self.covariate_indices();
        DVector::from_iterator(idx.len(), idx.iter().map(|&j| self.weights[(j, self.target)]))
    }

    /// True when some variable is reachable from the target.
    pub fn target_has_descendants(&self) -> bool {
        (0..self.num_vars()).any(|i| self.weights[(self.target, i)] != 0.0)
    }

    /// `(I - B)^{-1}` as the finite power sum `sum_{k=0}^{n} B^k`; exact
    /// because `B` is nilpotent on a DAG.
    pub fn fundamental_matrix(&self) -> DMatrix<f64> {
        let len = self.num_vars();
        let mut acc = DMatrix::identity(len, len);
        let mut power = DMatrix::identity(len, len);
        for _ in 1..len {
            power = &power * &self.weights;
            if power.iter().all(|&v| v == 0.0) {
                break;
            }
            acc += &power;
        }
        acc
    }

    /// `Xi = E[eta eta^T]`: variances plus products of means.
    pub fn noise_second_moment(&self) -> DMatrix<f64> {
        let len = self.num_vars();
        let means = DVector::from_iterator(len, self.noise.iter().map(Noise::mean));
        let mut xi = &means * means.transpose();
        for (i, nz) in self.noise.iter().enumerate() {
            xi[(i, i)] += nz.variance();
        }
        xi
    }

    /// `E[X X^T]` over all `n + 1` variables.
    pub fn full_second_moment(&self) -> DMatrix<f64> {
        let m = self.fundamental_matrix();
        m.transpose() * self.noise_second_moment() * m
    }

    /// `Sigma = J E[X X^T] J^T`, the covariate second-moment matrix.
    pub fn population_covariance(&self) -> DMatrix<f64> {
        let full = self.full_second_moment();
        let idx = self.covariate_indices();
        DMatrix::from_fn(idx.len(), idx.len(), |a, b| full[(idx[a], idx[b])])
    }

    /// `E[X_{-t} X_t] = Sigma beta_t + J M^T E[eta eta_t]`, where the second
    /// term vanishes unless some covariate descends from the target.
    pub fn cross_moment(&self) -> DVector<f64> {
        let sigma = self.population_covariance();
        self.cross_moment_with(&sigma)
    }

    fn cross_moment_with(&self, sigma: &DMatrix<f64>) -> DVector<f64> {
        let m = self.fundamental_matrix();
        let xi_t = self.noise_second_moment().column(self.target).into_owned();
        let leak = m.transpose() * xi_t;
        let idx = self.covariate_indices();
        let leak = DVector::from_iterator(idx.len(), idx.iter().map(|&i| leak[i]));
        sigma * self.target_parent_weights() + leak
    }

    /// Every population quantity the gradient and loss need.
    pub fn moments(&self) -> PopulationMoments {
        let full = self.full_second_moment();
        let idx = self.covariate_indices();
        let sigma = DMatrix::from_fn(idx.len(), idx.len(), |a, b| full[(idx[a], idx[b])]);
        let cross = self.cross_moment_with(&sigma);
        PopulationMoments {
            sigma,
            cross,
            target_second: full[(self.target, self.target)],
        }
    }

    /// Ancestral sampling in topological order. Deterministic in `seed`.
    pub fn sample_dataset(&self, n_samples: usize, seed: u64) -> Result<Dataset> {
        self.sample_labeled(n_samples, seed, "observational")
    }

    pub fn sample_labeled(&self, n_samples: usize, seed: u64, label: &str) -> Result<Dataset> {
        if n_samples < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                got: n_samples,
            });
        }
        let len = self.num_vars();
        let parents: Vec<Vec<(usize, f64)>> = (0..len)
            .map(|i| {
                self.parents(i)
                    .into_iter()
                    .map(|j| (j, self.weights[(j, i)]))
                    .collect()
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut row = vec![0.0; len];
        let mut data = Vec::with_capacity(n_samples * len);
        for _ in 0..n_samples {
            for &i in &self.topo_order {
                let mut v: f64 = parents[i].iter().map(|&(j, w)| w * row[j]).sum();
                v += match self.noise[i] {
                    Noise::Constant { constant } => constant,
                    Noise::Gaussian { variance, mean } => {
                        if variance == 0.0 {
                            mean
                        } else {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            mean + variance.sqrt() * z
                        }
                    }
                };
                row[i] = v;
            }
            data.extend_from_slice(&row);
        }
        Ok(Dataset {
            samples: DMatrix::from_row_slice(n_samples, len, &data),
            target: self.target,
            intervention_id: label.to_string(),
            seed,
            names: self.names.clone(),
        })
    }
}

/// Population second moments of one environment.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationMoments {
    /// `E[X_{-t} X_{-t}^T]`
    pub sigma: DMatrix<f64>,
    /// `E[X_{-t} X_t]`
    pub cross: DVector<f64>,
    /// `E[X_t^2]`
    pub target_second: f64,
}

/// Samples drawn from one interventional distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: DMatrix<f64>,
    target: usize,
    intervention_id: String,
    seed: u64,
    names: Vec<String>,
}

impl Dataset {
    pub fn new(
        samples: DMatrix<f64>,
        target: usize,
        intervention_id: impl Into<String>,
        seed: u64,
        names: Vec<String>,
    ) -> Result<Self> {
        if samples.nrows() < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                got: samples.nrows(),
            });
        }
        if samples.ncols() < 2 || names.len() != samples.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} columns, {} names",
                samples.ncols(),
                names.len()
            )));
        }
        check_index(target, samples.ncols())?;
        Ok(Dataset {
            samples,
            target,
            intervention_id: intervention_id.into(),
            seed,
            names,
        })
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn n_rows(&self) -> usize {
        self.samples.nrows()
    }

    pub fn num_vars(&self) -> usize {
        self.samples.ncols()
    }

    pub fn num_covariates(&self) -> usize {
        self.num_vars() - 1
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn intervention_id(&self) -> &str {
        &self.intervention_id
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn covariate_indices(&self) -> Vec<usize> {
        (0..self.num_vars()).filter(|&i| i != self.target).collect()
    }

    /// `X_{-t}` as an `N x n` matrix.
    pub fn covariates(&self) -> DMatrix<f64> {
        self.samples.select_columns(&self.covariate_indices())
    }

    /// `X_t`.
    pub fn target_column(&self) -> DVector<f64> {
        self.samples.column(self.target).into_owned()
    }

    /// Row subset as a new dataset with the same provenance and a new label.
    pub fn select_rows(&self, rows: &[usize], label: impl Into<String>) -> Result<Dataset> {
        Dataset::new(
            self.samples.select_rows(rows),
            self.target,
            label,
            self.seed,
            self.names.clone(),
        )
    }

    /// Empirical `E[X X^T]` over all columns.
    pub fn second_moment(&self) -> DMatrix<f64> {
        self.samples.tr_mul(&self.samples) / self.n_rows() as f64
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.names.join(","))?;
        let mut buf = ryu::Buffer::new();
        for r in 0..self.n_rows() {
            let mut line = String::new();
            for c in 0..self.num_vars() {
                if c > 0 {
                    line.push(',');
                }
                line.push_str(crate::io::format_f64(self.samples[(r, c)], &mut buf));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Reads a CSV written by [`Dataset::write_csv`]; `target` names a column.
    pub fn read_csv<R: std::io::BufRead>(
        r: R,
        target: &str,
        label: impl Into<String>,
        seed: u64,
    ) -> Result<Dataset> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse {
                line: 1,
                column: 1,
                message: "empty file".into(),
            })??;
        let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let target_idx = names
            .iter()
            .position(|n| n == target)
            .ok_or_else(|| Error::Validation(format!("no column named {target:?}")))?;
        let mut data = Vec::new();
        let mut rows = 0;
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != names.len() {
                return Err(Error::Parse {
                    line: k + 2,
                    column: 1,
                    message: format!("expected {} fields, found {}", names.len(), fields.len()),
                });
            }
            for (c, f) in fields.iter().enumerate() {
                let v: f64 = f.trim().parse().map_err(|_| Error::Parse {
                    line: k + 2,
                    column: c + 1,
                    message: format!("not a number: {f:?}"),
                })?;
                data.push(v);
            }
            rows += 1;
        }
        let cols = names.len();
        Dataset::new(
            DMatrix::from_row_slice(rows, cols, &data),
            target_idx,
            label,
            seed,
            names,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    fn unit(len: usize) -> Vec<Noise> {
        vec![Noise::gaussian(1.0); len]
    }

    pub(crate) fn example_one() -> SemModel {
        let edges = [
            Edge::new(0, 1, 1.0),
            Edge::new(0, 2, 1.0),
            Edge::new(1, 2, -1.0),
            Edge::new(1, 3, 1.0),
            Edge::new(2, 3, 1.0),
        ];
        build_sem(&edges, unit(4), 3).unwrap()
    }

    #[test]
    fn smallest_chain() {
        let sem = build_sem(&[Edge::new(0, 1, 1.0)], unit(2), 1).unwrap();
        assert_eq!(sem.num_covariates(), 1);
        assert_eq!(sem.target_parent_weights(), DVector::from_vec(vec![1.0]));
        assert_eq!(sem.topo_order(), &[0, 1]);
    }

    #[test]
    fn example_one_builds() {
        let sem = example_one();
        assert_eq!(sem.target_parent_weights().as_slice(), &[0.0, 1.0, 1.0]);
        assert_eq!(sem.edges().len(), 5);
    }

    #[test]
    fn two_cycle_rejected() {
        let err = build_sem(&[Edge::new(0, 1, 1.0), Edge::new(1, 0, 1.0)], unit(2), 1);
        assert_eq!(err.unwrap_err(), Error::CycleDetected);
    }

    #[test]
    fn constant_target_noise_rejected() {
        let noise = vec![Noise::gaussian(1.0), Noise::constant(0.0)];
        assert!(matches!(
            build_sem(&[], noise, 1),
            Err(Error::InvalidNoiseSpec(_))
        ));
    }

    #[test]
    fn bad_indices_and_weights() {
        assert!(matches!(
            build_sem(&[Edge::new(0, 5, 1.0)], unit(2), 1),
            Err(Error::IndexOutOfRange { index: 5, len: 2 })
        ));
        assert!(matches!(
            build_sem(&[Edge::new(0, 1, f64::NAN)], unit(2), 1),
            Err(Error::InvalidEdge(_))
        ));
        assert!(matches!(
            build_sem(&[Edge::new(0, 1, 1.0), Edge::new(0, 1, 2.0)], unit(2), 1),
            Err(Error::InvalidEdge(_))
        ));
    }

    #[test]
    fn fundamental_matrix_small_cases() {
        let empty = build_sem(&[], unit(3), 2).unwrap();
        assert_eq!(empty.fundamental_matrix(), DMatrix::identity(3, 3));

        let chain = build_sem(&[Edge::new(0, 1, 0.7)], unit(2), 1).unwrap();
        let m = chain.fundamental_matrix();
        assert_eq!(m[(0, 1)], 0.7);
        assert_eq!(m[(1, 0)], 0.0);
    }

    #[test]
    fn fundamental_matrix_inverts() {
        let sem = example_one();
        let m = sem.fundamental_matrix();
        let id = (DMatrix::identity(4, 4) - sem.weights()) * m;
        assert!(max_abs(&(id - DMatrix::identity(4, 4))) < 1e-12);
    }

    #[test]
    fn covariance_two_chain() {
        let chain = build_sem(&[Edge::new(0, 1, 1.0)], unit(2), 1).unwrap();
        assert_eq!(chain.population_covariance(), DMatrix::from_element(1, 1, 1.0));
        assert_eq!(chain.cross_moment(), DVector::from_element(1, 1.0));
    }

    #[test]
    fn covariance_isolated_target() {
        // hand expansion: X1 = b X0 + e1 -> [[1, b], [b, 1 + b^2]]
        let b = 0.6;
        let sem = build_sem(&[Edge::new(0, 1, b)], unit(3), 2).unwrap();
        let sigma = sem.population_covariance();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, b, b, 1.0 + b * b]);
        assert!(max_abs(&(sigma - expected)) < 1e-15);
    }

    #[test]
    fn zero_noise_means_zero_moments() {
        let sem = build_sem(&[Edge::new(0, 1, 2.0)], vec![Noise::gaussian(0.0); 2], 1).unwrap();
        assert_eq!(sem.population_covariance(), DMatrix::zeros(1, 1));
        let data = sem.sample_dataset(5, 3).unwrap();
        assert!(data.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn anti_causal_leak() {
        // 0 -> t (weight 1), t -> c (weight w): E[X_c X_t] picks up w Var(eta_t)
        // beyond Sigma beta_t. Hand expansion with unit noises:
        // X_t = X0 + e_t, X_c = w X_t + e_c;
        // E[X0 X_t] = 1, E[X_c X_t] = w * 2.
        let w = 0.5;
        let noise = vec![Noise::gaussian(1.0), Noise::gaussian(1.0), Noise::gaussian(1.0)];
        let sem = build_sem(&[Edge::new(0, 1, 1.0), Edge::new(1, 2, w)], noise, 1).unwrap();
        let c = sem.cross_moment();
        assert!((c[0] - 1.0).abs() < 1e-15);
        assert!((c[1] - 2.0 * w).abs() < 1e-15);
        let naive = sem.population_covariance() * sem.target_parent_weights();
        // the difference is Var(eta_t) times the t -> c path weight
        assert!((c[1] - naive[1] - w).abs() < 1e-15);
        assert_eq!(c[0] - naive[0], 0.0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let sem = example_one();
        let a = sem.sample_dataset(100, 42).unwrap();
        let b = sem.sample_dataset(100, 42).unwrap();
        assert_eq!(a, b);
        let c = sem.sample_dataset(100, 43).unwrap();
        assert_ne!(a.samples(), c.samples());
    }

    #[test]
    fn sampling_needs_two_rows() {
        assert!(matches!(
            example_one().sample_dataset(1, 0),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let sem = example_one();
        let data = sem.sample_dataset(20, 7).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(&buf[..], "X3", "observational", 7).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn covariate_positions() {
        let sem = build_sem(&[], unit(4), 1).unwrap();
        assert_eq!(sem.covariate_indices(), vec![0, 2, 3]);
        assert_eq!(sem.covariate_position(0), Some(0));
        assert_eq!(sem.covariate_position(1), None);
        assert_eq!(sem.covariate_position(3), Some(2));
    }
}
