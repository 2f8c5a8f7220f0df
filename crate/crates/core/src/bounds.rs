//! Closed-form interventional and sample complexity budgets. Logarithms
//! are natural; the leading constant `C` is a parameter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetKind {
    /// Hard interventions on at most `k` nodes.
    HardK,
    /// Soft interventions on `k` nodes of in-degree at most `d`.
    SoftKDegreeD,
    /// Arbitrary interventions over `n` variables.
    General,
}

impl BudgetKind {
    pub fn label(self) -> &'static str {
        match self {
            BudgetKind::HardK => "hard",
            BudgetKind::SoftKDegreeD => "soft",
            BudgetKind::General => "general",
        }
    }
}

fn check_prob(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::InvalidParameters(format!("{name} must lie in (0, 1), got {v}")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidParameters(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

fn check_count(name: &str, v: u64) -> Result<()> {
    if v == 0 {
        return Err(Error::InvalidParameters(format!("{name} must be at least 1")));
    }
    Ok(())
}

fn to_count(v: f64) -> Result<u64> {
    if !v.is_finite() || v >= u64::MAX as f64 {
        return Err(Error::InvalidParameters(format!("budget {v} overflows a 64-bit count")));
    }
    Ok((v.ceil() as u64).max(1))
}

/// Number of training interventions `m`.
pub fn interventional_complexity(
    kind: BudgetKind,
    n: u64,
    k: u64,
    d: u64,
    delta: f64,
    delta_prime: f64,
    c: f64,
) -> Result<u64> {
    check_prob("delta", delta)?;
    check_prob("delta_prime", delta_prime)?;
    check_positive("C", c)?;
    let vc = match kind {
        BudgetKind::HardK => {
            check_count("k", k)?;
            (k as f64).powi(4)
        }
        BudgetKind::SoftKDegreeD => {
            check_count("k", k)?;
            check_count("d", d)?;
            (d as f64).powf(4.0 * k as f64)
        }
        BudgetKind::General => {
            check_count("n", n)?;
            (n as f64).powi(4)
        }
    };
    to_count(c * (vc + (1.0 / delta).ln()) / delta_prime)
}

/// Samples per dataset `N`.
pub fn sample_complexity(n: u64, l: f64, eps: f64, delta: f64, m: u64, c: f64) -> Result<u64> {
    check_count("n", n)?;
    check_count("m", m)?;
    check_positive("L", l)?;
    check_positive("eps", eps)?;
    check_prob("delta", delta)?;
    check_positive("C", c)?;
    let nf = n as f64;
    let lead = 4.0 * nf * l * l / (eps * eps);
    let tail = (2.0 * nf * m as f64 / delta).ln() + nf * nf * (1.0 + 8.0 * nf.powf(1.5) / eps).ln();
    to_count(c * lead * tail)
}

/// `log N_eps = n^2 log(1 + 4 n^{3/2} / eps)`.
pub fn covering_number_log(n: u64, eps: f64) -> Result<f64> {
    check_positive("eps", eps)?;
    let nf = n as f64;
    Ok(nf * nf * (4.0 * nf.powf(1.5) / eps).ln_1p())
}

/// One row of the `bounds` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacBudget {
    pub kind: BudgetKind,
    pub n: u64,
    pub k: u64,
    pub d: u64,
    pub delta: f64,
    pub delta_prime: f64,
    pub eps: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub m_interventions: u64,
    pub n_samples_per_env: u64,
}

impl PacBudget {
    /// Evaluates both budgets; `N` is computed for the resulting `m`.
    #[allow(clippy::too_many_arguments)]
    pub fn compute(
        kind: BudgetKind,
        n: u64,
        k: u64,
        d: u64,
        delta: f64,
        delta_prime: f64,
        eps: f64,
        l: f64,
        c: f64,
    ) -> Result<Self> {
        let m = interventional_complexity(kind, n, k, d, delta, delta_prime, c)?;
        let big_n = sample_complexity(n, l, eps, delta, m, c)?;
        Ok(PacBudget {
            kind,
            n,
            k,
            d,
            delta,
            delta_prime,
            eps,
            l,
            c,
            m_interventions: m,
            n_samples_per_env: big_n,
        })
    }

    pub fn caveat(&self) -> String {
        format!("asymptotic constant C={}", crate::io::fmt_f64(self.c))
    }

    pub const CSV_HEADER: &'static str = "kind,n,k,d,delta,delta_prime,eps,L,C,m,N";

    pub fn csv_row(&self) -> String {
        use crate::io::fmt_f64;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.kind.label(),
            self.n,
            self.k,
            self.d,
            fmt_f64(self.delta),
            fmt_f64(self.delta_prime),
            fmt_f64(self.eps),
            fmt_f64(self.l),
            fmt_f64(self.c),
            self.m_interventions,
            self.n_samples_per_env
        )
    }
}
