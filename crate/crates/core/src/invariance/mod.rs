//! Gradient-norm invariance for diagonal representations.
//!
//! For a representation `Phi = diag(phi)` and head `f`, the risk in one
//! environment is `R(f) = E[(f^T Phi X_{-t} - X_t)^2]` and its gradient is
//! `2 (Phi Sigma Phi f - Phi E[X_{-t} X_t])`. A representation is
//! `eps`-invariant at `f` when that gradient has norm at most `eps`.

mod indirect;
mod lifted;
mod probe;
mod transfer;

pub use indirect::{indirect_population_gradient, ObservationMap};
pub use lifted::{lift_gradient_matrix, lifted_monomials};
pub use probe::{
    atomic_degree_probe, polynomial_degree_probe, soft_degree_probe, AssignmentGrid,
    DegreeFitReport,
};
pub use transfer::{gradient_general, head_transfer, HeadTransfer};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::design::ReducedDesign;
use crate::error::{Error, Result};
use crate::io::derive_seed;
use crate::linalg::{pinv, PINV_RTOL};
use crate::sem::{Dataset, PopulationMoments, SemModel};

/// Diagonal representation over the `n` covariates, in ascending variable
/// order with the target removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    diag: DVector<f64>,
}

impl Representation {
    /// Fails unless every entry is finite with magnitude at most 1.
    pub fn new(diag: DVector<f64>) -> Result<Self> {
        if let Some(v) = diag.iter().find(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(Error::InvalidParameters(format!(
                "representation entries must lie in [-1, 1], got {v}"
            )));
        }
        Ok(Representation { diag })
    }

    pub fn from_slice(diag: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(diag))
    }

    pub fn zeros(n: usize) -> Self {
        Representation {
            diag: DVector::zeros(n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Representation {
            diag: DVector::from_element(n, 1.0),
        }
    }

    /// 0/1 selector with ones at the given covariate positions.
    pub fn from_subset(n: usize, positions: &[usize]) -> Result<Self> {
        let mut diag = DVector::zeros(n);
        for &p in positions {
            if p >= n {
                return Err(Error::IndexOutOfRange { index: p, len: n });
            }
            diag[p] = 1.0;
        }
        Ok(Representation { diag })
    }

    /// Selector from a bitmask over covariate positions.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        Representation {
            diag: DVector::from_fn(n, |i, _| if mask >> i & 1 == 1 { 1.0 } else { 0.0 }),
        }
    }

    /// `diag(beta_t)` restricted to covariates.
    pub fn realizable(sem: &SemModel) -> Result<Self> {
        Self::new(sem.target_parent_weights())
    }

    pub fn diag(&self) -> &DVector<f64> {
        &self.diag
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Covariate positions with nonzero weight.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.diag[i] != 0.0).collect()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.diag)
    }
}

/// Linear head `f` on top of a representation.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    coeffs: DVector<f64>,
}

impl Head {
    pub fn new(coeffs: DVector<f64>) -> Result<Self> {
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameters("head entries must be finite".into()));
        }
        Ok(Head { coeffs })
    }

    pub fn from_slice(coeffs: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(coeffs))
    }

    /// `f_o = (1, 0, ..., 0)`.
    pub fn canonical(n: usize) -> Self {
        let mut coeffs = DVector::zeros(n);
        if n > 0 {
            coeffs[0] = 1.0;
        }
        Head { coeffs }
    }

    pub fn ones(n: usize) -> Self {
        Head {
            coeffs: DVector::from_element(n, 1.0),
        }
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }
}

fn check_dims(n: usize, phi: &Representation, f: &Head) -> Result<()> {
    if phi.len() != n || f.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} covariates, representation of length {}, head of length {}",
            phi.len(),
            f.len()
        )));
    }
    Ok(())
}

/// `2 (Phi Sigma Phi f - Phi c)` from precomputed moments.
pub fn gradient_from_moments(
    sigma: &DMatrix<f64>,
    cross: &DVector<f64>,
    phi: &Representation,
    f: &Head,
) -> Result<DVector<f64>> {
    check_dims(cross.len(), phi, f)?;
    let d = phi.diag();
    let pf = d.component_mul(f.coeffs());
    let inner = sigma * pf - cross;
    Ok(d.component_mul(&inner) * 2.0)
}

pub fn population_gradient(sem: &SemModel, phi: &Representation, f: &Head) -> Result<DVector<f64>> {
    let m = sem.moments();
    gradient_from_moments(&m.sigma, &m.cross, phi, f)
}

/// `f^T Phi Sigma Phi f - 2 f^T Phi c + E[X_t^2]`.
pub fn population_loss(moments: &PopulationMoments, phi: &Representation, f: &Head) -> Result<f64> {
    check_dims(moments.cross.len(), phi, f)?;
    let pf = phi.diag().component_mul(f.coeffs());
    Ok(pf.dot(&(&moments.sigma * &pf)) - 2.0 * pf.dot(&moments.cross) + moments.target_second)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidParameters(format!("eps must be positive, got {eps}")));
    }
    Ok(())
}

/// `||grad|| <= eps` in the given environment.
pub fn is_eps_invariant(sem: &SemModel, phi: &Representation, f: &Head, eps: f64) -> Result<bool> {
    check_eps(eps)?;
    Ok(population_gradient(sem, phi, f)?.norm() <= eps)
}

/// Minimum-norm population least-squares head for `phi`.
pub fn population_least_squares_head(
    moments: &PopulationMoments,
    phi: &Representation,
) -> Result<Head> {
    let n = moments.cross.len();
    check_dims(n, phi, &Head::canonical(n))?;
    let d = phi.diag();
    let a = DMatrix::from_fn(n, n, |i, j| d[i] * moments.sigma[(i, j)] * d[j]);
    let b = d.component_mul(&moments.cross);
    Head::new(pinv(&a, PINV_RTOL) * b)
}

/// Minimum-norm empirical least-squares head.
pub fn least_squares_head(data: &Dataset, phi: &Representation) -> Result<Head> {
    let n = data.num_covariates();
    check_dims(n, phi, &Head::canonical(n))?;
    Head::new(ReducedDesign::from_dataset(data).solve(phi.diag()))
}

/// Split-sample estimate of the population gradient norm. Rows are shuffled
/// with a seed derived from the dataset seed, paired, and
/// `sqrt(S_even . S_odd) / m` is returned, truncated at 0 when the inner
/// product is negative. Here `g(x) = 2 (Phi x x^T Phi f - Phi x x_t)`, so
/// the estimate targets the same scaled norm as [`population_gradient`].
pub fn empirical_gradient_norm_split(data: &Dataset, phi: &Representation, f: &Head) -> Result<f64> {
    let len = data.n_rows();
    if len < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: len });
    }
    let n = data.num_covariates();
    check_dims(n, phi, f)?;
    let mut rows: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(data.seed(), &[], "split-pairs"));
    rows.shuffle(&mut rng);
    let pairs = len / 2;
    let cov = data.covariate_indices();
    let t = data.target();
    let x = data.samples();
    let d = phi.diag();
    let coeffs = f.coeffs();
    let mut sums = [DVector::<f64>::zeros(n), DVector::<f64>::zeros(n)];
    let mut u = vec![0.0; n];
    for (k, &r) in rows[..2 * pairs].iter().enumerate() {
        let mut pred = 0.0;
        for (a, &c) in cov.iter().enumerate() {
            u[a] = d[a] * x[(r, c)];
            pred += u[a] * coeffs[a];
        }
        let resid = 2.0 * (pred - x[(r, t)]);
        let s = &mut sums[k % 2];
        for a in 0..n {
            s[a] += u[a] * resid;
        }
    }
    let inner = sums[0].dot(&sums[1]);
    Ok(if inner > 0.0 { inner.sqrt() / pairs as f64 } else { 0.0 })
}

/// Result of certifying one representation against a set of environments
/// with a single shared head.
#[derive(Debug, Clone, PartialEq)]
pub struct Certification {
    pub head: Head,
    pub norms: Vec<f64>,
}

impl Certification {
    pub fn max_norm(&self) -> f64 {
        self.norms.iter().cloned().fold(0.0, f64::max)
    }

    pub fn is_invariant(&self, eps: f64) -> bool {
        self.max_norm() <= eps
    }
}

/// Finds the head minimising the stacked gradient residual across all
/// environments and reports the per-environment gradient norms at it. If a
/// head exists whose gradient vanishes everywhere, this finds it.
pub fn certify_representation(
    environments: &[PopulationMoments],
    phi: &Representation,
) -> Result<Certification> {
    let first = environments
        .first()
        .ok_or_else(|| Error::InvalidParameters("no environments to certify against".into()))?;
    let n = first.cross.len();
    check_dims(n, phi, &Head::canonical(n))?;
    let d = phi.diag();
    let k = environments.len();
    let mut a = DMatrix::zeros(k * n, n);
    let mut b = DVector::zeros(k * n);
    for (e, m) in environments.iter().enumerate() {
        if m.cross.len() != n {
            return Err(Error::DimensionMismatch("environments differ in width".into()));
        }
        for i in 0..n {
            for j in 0..n {
                a[(e * n + i, j)] = 2.0 * d[i] * m.sigma[(i, j)] * d[j];
            }
            b[e * n + i] = 2.0 * d[i] * m.cross[i];
        }
    }
    let head = Head::new(pinv(&a, PINV_RTOL) * &b)?;
    let norms = environments
        .iter()
        .map(|m| gradient_from_moments(&m.sigma, &m.cross, phi, &head).map(|g| g.norm()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Certification { head, norms })
}

/// Per-environment certification record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationReport {
    pub intervention_id: String,
    pub phi: Vec<f64>,
    pub head: Vec<f64>,
    pub population_norm: f64,
    pub empirical_norm: Option<f64>,
    pub eps: f64,
    pub invariant: bool,
}

/// Certifies `(phi, f)` in one environment. When a dataset is supplied the
/// split estimate is reported as well; the verdict uses the population norm.
pub fn certify(
    env: &SemModel,
    intervention_id: &str,
    phi: &Representation,
    f: &Head,
    eps: f64,
    data: Option<&Dataset>,
) -> Result<CertificationReport> {
    check_eps(eps)?;
    let population_norm = population_gradient(env, phi, f)?.norm();
    let empirical_norm = data
        .map(|d| empirical_gradient_norm_split(d, phi, f))
        .transpose()?;
    Ok(CertificationReport {
        intervention_id: intervention_id.to_string(),
        phi: phi.diag().iter().copied().collect(),
        head: f.coeffs().iter().copied().collect(),
        population_norm,
        empirical_norm,
        eps,
        invariant: population_norm <= eps,
    })
}
