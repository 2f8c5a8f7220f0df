//! Monte-Carlo generalization harness: discover approximately invariant
//! subsets from training environments with the rho statistic, then count
//! how often their heads carry over to fresh test environments.

use std::collections::HashMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentSpec;
use crate::design::ReducedDesign;
use crate::error::{Error, Result};
use crate::intervention::{apply, sample_intervention, InterventionDistribution};
use crate::io::derive_seed;
use crate::sem::{Dataset, SemModel};

pub const MAX_ENUMERATED_VARS: usize = 20;

/// `sum_{j1 < j2} ||f_j1 - f_j2|| / ((m - 1) ||sum_j f_j||)`; `+inf` when the
/// heads sum to zero.
pub fn rho_statistic(heads: &[DVector<f64>]) -> Result<f64> {
    let m = heads.len();
    if m < 2 {
        return Err(Error::InvalidParameters(format!("rho needs at least 2 heads, got {m}")));
    }
    let n = heads[0].len();
    if heads.iter().any(|h| h.len() != n) {
        return Err(Error::DimensionMismatch("heads differ in length".into()));
    }
    let mut pairs = 0.0;
    for a in 0..m {
        for b in a + 1..m {
            pairs += (&heads[a] - &heads[b]).norm();
        }
    }
    let mut total = DVector::zeros(n);
    for h in heads {
        total += h;
    }
    let denom = (m - 1) as f64 * total.norm();
    Ok(if denom == 0.0 { f64::INFINITY } else { pairs / denom })
}

/// A subset that passed the rho test, by covariate position.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSubset {
    pub positions: Vec<usize>,
    pub rho: f64,
    pub mean_head: DVector<f64>,
}

fn mask_positions(mask: u64, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask >> i & 1 == 1).collect()
}

fn positions_phi(positions: &[usize], n: usize) -> DVector<f64> {
    let mut phi = DVector::zeros(n);
    for &p in positions {
        phi[p] = 1.0;
    }
    phi
}

fn designs_of(datasets: &[Dataset]) -> Vec<ReducedDesign> {
    datasets.iter().map(ReducedDesign::from_dataset).collect()
}

fn check_width(designs: &[ReducedDesign]) -> Result<usize> {
    let n = designs
        .first()
        .map(ReducedDesign::num_covariates)
        .ok_or_else(|| Error::InvalidParameters("no datasets supplied".into()))?;
    if designs.iter().any(|d| d.num_covariates() != n) {
        return Err(Error::DimensionMismatch("datasets differ in width".into()));
    }
    Ok(n)
}

/// Enumerates every nonempty covariate subset and keeps those with
/// `rho < threshold`, in increasing bitmask order.
pub fn discover_invariant_subsets(datasets: &[Dataset], threshold: f64) -> Result<Vec<InvariantSubset>> {
    if datasets.len() < 2 {
        return Err(Error::InvalidParameters("need at least 2 datasets".into()));
    }
    discover_from_designs(&designs_of(datasets), threshold)
}

pub fn discover_from_designs(designs: &[ReducedDesign], threshold: f64) -> Result<Vec<InvariantSubset>> {
    if designs.len() < 2 {
        return Err(Error::InvalidParameters("need at least 2 datasets".into()));
    }
    let n = check_width(designs)?;
    if n > MAX_ENUMERATED_VARS {
        return Err(Error::TooManyVariables(n));
    }
    let mut out = Vec::new();
    for mask in 1..(1u64 << n) {
        let positions = mask_positions(mask, n);
        let phi = positions_phi(&positions, n);
        let heads: Vec<DVector<f64>> = designs.iter().map(|d| d.solve(&phi)).collect();
        let rho = rho_statistic(&heads)?;
        if rho < threshold {
            let mut mean = DVector::zeros(n);
            for h in &heads {
                mean += h;
            }
            mean /= heads.len() as f64;
            out.push(InvariantSubset {
                positions,
                rho,
                mean_head: mean,
            });
        }
    }
    Ok(out)
}

fn relative_close(f_test: &DVector<f64>, mean: &DVector<f64>, threshold: f64) -> bool {
    (f_test - mean).norm() < threshold * mean.norm()
}

/// Percentage of test datasets whose head on the subset stays within
/// `threshold` relative distance of `mean_head`.
pub fn generalization_percentage(
    positions: &[usize],
    mean_head: &DVector<f64>,
    test: &[Dataset],
    threshold: f64,
) -> Result<f64> {
    generalization_from_designs(positions, mean_head, &designs_of(test), threshold)
}

pub fn generalization_from_designs(
    positions: &[usize],
    mean_head: &DVector<f64>,
    test: &[ReducedDesign],
    threshold: f64,
) -> Result<f64> {
    let n = check_width(test)?;
    if mean_head.len() != n {
        return Err(Error::DimensionMismatch("mean head width".into()));
    }
    if mean_head.norm() == 0.0 {
        return Err(Error::ZeroMeanHead);
    }
    let phi = positions_phi(positions, n);
    let hits = test
        .iter()
        .filter(|d| relative_close(&d.solve(&phi), mean_head, threshold))
        .count();
    Ok(100.0 * hits as f64 / test.len() as f64)
}

/// Pools every training row into one full-feature least-squares fit and
/// scores it like a subset. A zero pooled head generalizes nowhere.
pub fn erm_baseline(train: &[Dataset], test: &[Dataset], threshold: f64) -> Result<f64> {
    erm_from_designs(&designs_of(train), &designs_of(test), threshold)
}

pub fn erm_from_designs(train: &[ReducedDesign], test: &[ReducedDesign], threshold: f64) -> Result<f64> {
    let n = check_width(train)?;
    if check_width(test)? != n {
        return Err(Error::DimensionMismatch("train and test widths differ".into()));
    }
    let phi = DVector::from_element(n, 1.0);
    let head = ReducedDesign::pooled(train)?.solve(&phi);
    let hits = test
        .iter()
        .filter(|d| relative_close(&d.solve(&phi), &head, threshold))
        .count();
    Ok(100.0 * hits as f64 / test.len() as f64)
}

/// Splits rows into `num_bins` equal-frequency bins of the first rule
/// variable. Each bin keeps the original row order and provenance.
pub fn conditional_subsample(data: &Dataset, rule_vars: &[usize], num_bins: usize) -> Result<Vec<Dataset>> {
    let &var = rule_vars
        .first()
        .ok_or_else(|| Error::InvalidParameters("empty rule variable set".into()))?;
    for &v in rule_vars {
        if v >= data.num_vars() {
            return Err(Error::IndexOutOfRange {
                index: v,
                len: data.num_vars(),
            });
        }
        if v == data.target() {
            return Err(Error::InvalidParameters("rule variables must exclude the target".into()));
        }
    }
    if num_bins == 0 {
        return Err(Error::InvalidParameters("num_bins must be at least 1".into()));
    }
    if num_bins == 1 {
        return Ok(vec![data.clone()]);
    }
    let len = data.n_rows();
    let col = data.samples().column(var);
    let mut order: Vec<usize> = (0..len).collect();
    order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
    let base = len / num_bins;
    let extra = len % num_bins;
    let mut out = Vec::with_capacity(num_bins);
    let mut start = 0;
    for bin in 0..num_bins {
        let size = base + usize::from(bin < extra);
        if size < 2 {
            return Err(Error::EmptyBin { bin, rows: size });
        }
        let mut rows = order[start..start + size].to_vec();
        rows.sort_unstable();
        let label = format!("{}/bin{bin}", data.intervention_id());
        out.push(data.select_rows(&rows, label)?);
        start += size;
    }
    Ok(out)
}

/// Validated experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub sem: SemModel,
    pub train_dist: InterventionDistribution,
    pub test_dist: InterventionDistribution,
    pub m_train_range: Vec<usize>,
    pub m_test: usize,
    pub n_samples: usize,
    pub rho_threshold: f64,
    pub gen_threshold: f64,
    pub repeats: usize,
    pub master_seed: u64,
}

impl ExperimentConfig {
    /// Defaults for everything but the model and the two distributions.
    pub fn new(sem: SemModel, train_dist: InterventionDistribution, test_dist: InterventionDistribution) -> Self {
        ExperimentConfig {
            sem,
            train_dist,
            test_dist,
            m_train_range: (3..=20).collect(),
            m_test: 100,
            n_samples: 30_000,
            rho_threshold: 0.02,
            gen_threshold: 0.02,
            repeats: 5,
            master_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train_dist
            .validate(&self.sem)
            .map_err(|e| e.context("train_dist"))?;
        self.test_dist
            .validate(&self.sem)
            .map_err(|e| e.context("test_dist"))?;
        let bad = |msg: String| Err(Error::Validation(msg));
        if self.m_train_range.is_empty() {
            return bad("m_train_range must not be empty".into());
        }
        if let Some(m) = self.m_train_range.iter().find(|&&m| m < 2) {
            return bad(format!("every m in m_train_range must be at least 2, got {m}"));
        }
        if self.m_test < 1 {
            return bad("m_test must be at least 1".into());
        }
        if self.n_samples < 2 {
            return bad("n_samples must be at least 2".into());
        }
        if self.repeats < 1 {
            return bad("repeats must be at least 1".into());
        }
        for (name, v) in [("rho_threshold", self.rho_threshold), ("gen_threshold", self.gen_threshold)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.sem.num_covariates() > MAX_ENUMERATED_VARS {
            return Err(Error::TooManyVariables(self.sem.num_covariates()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetRecord {
    pub subset: Vec<String>,
    pub rho: f64,
    pub mean_head: Vec<f64>,
    pub generalization_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRecord {
    pub repeat: usize,
    pub train_interventions: Vec<String>,
    pub subsets: Vec<SubsetRecord>,
    pub erm_generalization_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MRecord {
    pub m: usize,
    pub repeats: Vec<RepeatRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool_version: String,
    pub master_seed: u64,
    /// How every seed in the run is derived from `master_seed`.
    pub seed_scheme: String,
    /// Test intervention ids per repeat.
    pub test_interventions: Vec<Vec<String>>,
    pub config: ExperimentSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub per_m: Vec<MRecord>,
    pub metadata: ReportMetadata,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let k = values.len();
    Some(if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    })
}

impl ExperimentReport {
    pub fn entry(&self, m: usize) -> Option<&MRecord> {
        self.per_m.iter().find(|e| e.m == m)
    }

    /// Median over every (repeat, subset) percentage at `m`; `None` when no
    /// subset was found in any repeat.
    pub fn median_subset_pct(&self, m: usize) -> Option<f64> {
        let mut v: Vec<f64> = self
            .entry(m)?
            .repeats
            .iter()
            .flat_map(|r| r.subsets.iter().map(|s| s.generalization_pct))
            .collect();
        median(&mut v)
    }

    pub fn median_erm_pct(&self, m: usize) -> Option<f64> {
        let mut v: Vec<f64> = self
            .entry(m)?
            .repeats
            .iter()
            .map(|r| r.erm_generalization_pct)
            .collect();
        median(&mut v)
    }

    pub const GENERALIZATION_HEADER: &'static str = "m,repeat,subset,rho,generalization_pct";
    pub const ERM_HEADER: &'static str = "m,repeat,erm_generalization_pct";

    /// Subsets are written as variable names joined by `+`.
    pub fn generalization_csv(&self) -> String {
        use crate::io::fmt_f64;
        let mut s = String::from(Self::GENERALIZATION_HEADER);
        s.push('\n');
        for e in &self.per_m {
            for r in &e.repeats {
                for sub in &r.subsets {
                    s.push_str(&format!(
                        "{},{},{},{},{}\n",
                        e.m,
                        r.repeat,
                        sub.subset.join("+"),
                        fmt_f64(sub.rho),
                        fmt_f64(sub.generalization_pct)
                    ));
                }
            }
        }
        s
    }

    pub fn erm_csv(&self) -> String {
        use crate::io::fmt_f64;
        let mut s = String::from(Self::ERM_HEADER);
        s.push('\n');
        for e in &self.per_m {
            for r in &e.repeats {
                s.push_str(&format!("{},{},{}\n", e.m, r.repeat, fmt_f64(r.erm_generalization_pct)));
            }
        }
        s
    }
}

pub const SEED_SCHEME: &str = "dataset j of repeat r uses SHA-256(master_seed, r, j, role) with role in \
{train-intervention, train-data, test-intervention, test-data}; the training sets for different m \
are nested prefixes of one sequence and every m of a repeat is scored on the same test batch";

fn draw_environments(
    config: &ExperimentConfig,
    dist: &InterventionDistribution,
    repeat: usize,
    count: usize,
    role: &str,
) -> Result<(Vec<ReducedDesign>, Vec<String>)> {
    let mut designs = Vec::with_capacity(count);
    let mut ids = Vec::with_capacity(count);
    for j in 0..count {
        let parts = [repeat as u64, j as u64];
        let iv_seed = derive_seed(config.master_seed, &parts, &format!("{role}-intervention"));
        let data_seed = derive_seed(config.master_seed, &parts, &format!("{role}-data"));
        let iv = sample_intervention(dist, &config.sem, iv_seed)
            .map_err(|e| e.context(format!("{role} environment {j} of repeat {repeat}")))?;
        let env = apply(&config.sem, &iv)
            .map_err(|e| e.context(format!("{role} environment {j} of repeat {repeat}")))?;
        let data = env.sample_labeled(config.n_samples, data_seed, iv.id())?;
        designs.push(ReducedDesign::from_dataset(&data));
        ids.push(iv.id().to_string());
    }
    Ok((designs, ids))
}

/// Runs the full protocol. Deterministic in `config.master_seed`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let names: Vec<String> = config
        .sem
        .covariate_indices()
        .iter()
        .map(|&i| config.sem.names()[i].clone())
        .collect();
    let n = names.len();
    let max_m = *config.m_train_range.iter().max().expect("validated non-empty");
    let mut per_m: Vec<MRecord> = config
        .m_train_range
        .iter()
        .map(|&m| MRecord { m, repeats: Vec::new() })
        .collect();
    let mut test_ids = Vec::with_capacity(config.repeats);
    for repeat in 0..config.repeats {
        let (train, train_ids) = draw_environments(config, &config.train_dist, repeat, max_m, "train")?;
        let (test, ids) = draw_environments(config, &config.test_dist, repeat, config.m_test, "test")?;
        test_ids.push(ids);
        let mut test_heads: HashMap<Vec<usize>, Vec<DVector<f64>>> = HashMap::new();
        for record in per_m.iter_mut() {
            let m = record.m;
            let found = discover_from_designs(&train[..m], config.rho_threshold)?;
            let mut subsets = Vec::with_capacity(found.len());
            for s in found {
                let heads = test_heads.entry(s.positions.clone()).or_insert_with(|| {
                    let phi = positions_phi(&s.positions, n);
                    test.iter().map(|d| d.solve(&phi)).collect()
                });
                let pct = if s.mean_head.norm() == 0.0 {
                    0.0
                } else {
                    let hits = heads
                        .iter()
                        .filter(|h| relative_close(h, &s.mean_head, config.gen_threshold))
                        .count();
                    100.0 * hits as f64 / heads.len() as f64
                };
                subsets.push(SubsetRecord {
                    subset: s.positions.iter().map(|&p| names[p].clone()).collect(),
                    rho: s.rho,
                    mean_head: s.mean_head.iter().copied().collect(),
                    generalization_pct: pct,
                });
            }
            let erm = erm_from_designs(&train[..m], &test, config.gen_threshold)?;
            record.repeats.push(RepeatRecord {
                repeat,
                train_interventions: train_ids[..m].to_vec(),
                subsets,
                erm_generalization_pct: erm,
            });
        }
    }
    Ok(ExperimentReport {
        per_m,
        metadata: ReportMetadata {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: config.master_seed,
            seed_scheme: SEED_SCHEME.to_string(),
            test_interventions: test_ids,
            config: ExperimentSpec::from_config(config),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::sem::{build_sem, Edge, Noise};
    use proptest::prelude::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn rho_of_identical_heads_is_zero() {
        let h = v(&[1.0, -2.0]);
        assert_eq!(rho_statistic(&[h.clone(), h.clone(), h]).unwrap(), 0.0);
    }

    #[test]
    fn rho_of_unit_vectors() {
        let r = rho_statistic(&[v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rho_of_cancelling_heads_is_infinite() {
        assert_eq!(rho_statistic(&[v(&[1.0, 2.0]), v(&[-1.0, -2.0])]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn rho_needs_two_heads() {
        assert!(rho_statistic(&[v(&[1.0])]).is_err());
    }

    proptest! {
        #[test]
        fn rho_is_order_and_scale_invariant(
            raw in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 3), 2..6),
            c in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
        ) {
            let heads: Vec<DVector<f64>> = raw.iter().map(|h| v(h)).collect();
            let r = rho_statistic(&heads).unwrap();
            prop_assume!(r.is_finite());
            let mut rev = heads.clone();
            rev.reverse();
            prop_assert!((rho_statistic(&rev).unwrap() - r).abs() <= 1e-12 * (1.0 + r));
            let scaled: Vec<DVector<f64>> = heads.iter().map(|h| h * c).collect();
            prop_assert!((rho_statistic(&scaled).unwrap() - r).abs() <= 1e-12 * (1.0 + r));
        }
    }

    #[test]
    fn duplicated_dataset_passes_every_subset() {
        let sem = fixtures::example_one(1.0, -1.0);
        let d = sem.sample_dataset(200, 1).unwrap();
        let found = discover_invariant_subsets(&[d.clone(), d], 0.02).unwrap();
        assert_eq!(found.len(), 7);
        assert!(found.iter().all(|s| s.rho == 0.0));
    }

    #[test]
    fn enumeration_guard() {
        let len = 22;
        let edges: Vec<Edge> = (0..len - 1).map(|i| Edge::new(i, len - 1, 0.1)).collect();
        let sem = build_sem(&edges, vec![Noise::gaussian(1.0); len], len - 1).unwrap();
        let a = sem.sample_dataset(30, 1).unwrap();
        let b = sem.sample_dataset(30, 2).unwrap();
        assert_eq!(discover_invariant_subsets(&[a, b], 0.02).unwrap_err(), Error::TooManyVariables(21));
    }

    #[test]
    fn identical_noiseless_environment_generalizes_fully() {
        let sem = build_sem(
            &[Edge::new(0, 1, 0.5), Edge::new(1, 2, 2.0)],
            vec![
                Noise::Gaussian { variance: 0.0, mean: 1.0 },
                Noise::Gaussian { variance: 0.0, mean: -1.0 },
                Noise::gaussian(0.0),
            ],
            2,
        )
        .unwrap();
        let train = sem.sample_dataset(20, 1).unwrap();
        let test: Vec<Dataset> = (2..6).map(|s| sem.sample_dataset(20, s).unwrap()).collect();
        let found = discover_invariant_subsets(&[train.clone(), train], 0.02).unwrap();
        for s in found {
            let pct = generalization_percentage(&s.positions, &s.mean_head, &test, 0.02).unwrap();
            assert_eq!(pct, 100.0);
        }
    }

    #[test]
    fn zero_mean_head_rejected() {
        let sem = fixtures::example_one(1.0, -1.0);
        let d = sem.sample_dataset(50, 1).unwrap();
        assert_eq!(
            generalization_percentage(&[0], &DVector::zeros(3), &[d], 0.02).unwrap_err(),
            Error::ZeroMeanHead
        );
    }

    #[test]
    fn erm_on_identical_data_is_full() {
        let sem = fixtures::seven_node(0.02);
        let d = sem.sample_dataset(500, 3).unwrap();
        assert_eq!(erm_baseline(std::slice::from_ref(&d), &[d.clone(), d.clone()], 0.02).unwrap(), 100.0);
    }

    #[test]
    fn subsample_single_bin_is_identity() {
        let sem = fixtures::seven_node(0.02);
        let d = sem.sample_dataset(101, 3).unwrap();
        assert_eq!(conditional_subsample(&d, &[0], 1).unwrap(), vec![d]);
    }

    #[test]
    fn subsample_bins_are_balanced_and_ordered() {
        let sem = fixtures::chain_noisy(5, 0.5);
        let d = sem.sample_dataset(1001, 3).unwrap();
        let bins = conditional_subsample(&d, &[0], 4).unwrap();
        let sizes: Vec<usize> = bins.iter().map(Dataset::n_rows).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 1001);
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let means: Vec<f64> = bins.iter().map(|b| b.samples().column(0).mean()).collect();
        assert!(means.windows(2).all(|w| w[0] < w[1]));
        assert!(bins.iter().all(|b| b.seed() == d.seed()));
    }

    #[test]
    fn subsample_errors() {
        let sem = fixtures::seven_node(0.02);
        let d = sem.sample_dataset(5, 3).unwrap();
        assert_eq!(conditional_subsample(&d, &[0], 3).unwrap_err(), Error::EmptyBin { bin: 2, rows: 1 });
        assert!(conditional_subsample(&d, &[6], 2).is_err());
    }

    #[test]
    fn smoke_run_on_two_chain() {
        let sem = build_sem(
            &[Edge::new(0, 1, 1.0)],
            vec![Noise::gaussian(1.0), Noise::gaussian(0.01)],
            1,
        )
        .unwrap();
        let dist = InterventionDistribution::soft_gaussian(vec![0], 1.0);
        let mut config = ExperimentConfig::new(sem, dist.clone(), dist);
        config.m_train_range = vec![3];
        config.m_test = 5;
        config.n_samples = 1000;
        config.repeats = 1;
        let report = run_experiment(&config).unwrap();
        assert_eq!(report.per_m.len(), 1);
        assert!(!report.per_m[0].repeats[0].subsets.is_empty());
        assert_eq!(run_experiment(&config).unwrap(), report);
    }
}
