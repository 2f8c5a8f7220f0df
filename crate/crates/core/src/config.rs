//! TOML configuration files. Variables are referenced by name; unknown
//! keys are rejected and every module invariant is checked at load time.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::ExperimentConfig;
use crate::intervention::{DistributionKind, InterventionDistribution, MixtureComponent};
use crate::sem::{build_sem, Edge, Noise, SemModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub from: String,
    pub to: String,
    pub weight: f64,
}

/// `{variance, mean?}` or `{constant}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
}

impl NoiseSpec {
    fn to_noise(&self, name: &str) -> Result<Noise> {
        match (self.variance, self.mean, self.constant) {
            (Some(variance), mean, None) => Ok(Noise::Gaussian {
                variance,
                mean: mean.unwrap_or(0.0),
            }),
            (None, None, Some(constant)) => Ok(Noise::constant(constant)),
            _ => Err(Error::Validation(format!(
                "noise for {name:?} must be {{variance, mean?}} or {{constant}}"
            ))),
        }
    }

    fn from_noise(noise: &Noise) -> Self {
        match *noise {
            Noise::Gaussian { variance, mean } => NoiseSpec {
                variance: Some(variance),
                mean: (mean != 0.0).then_some(mean),
                constant: None,
            },
            Noise::Constant { constant } => NoiseSpec {
                variance: None,
                mean: None,
                constant: Some(constant),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemSpec {
    pub variables: Vec<String>,
    pub target: String,
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
    pub noise: BTreeMap<String, NoiseSpec>,
}

fn lookup(names: &[String], name: &str, what: &str) -> Result<usize> {
    names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| Error::Validation(format!("{what} refers to unknown variable {name:?}")))
}

impl SemSpec {
    pub fn from_model(sem: &SemModel) -> Self {
        let names = sem.names();
        SemSpec {
            variables: names.to_vec(),
            target: names[sem.target()].clone(),
            edges: sem
                .edges()
                .iter()
                .map(|e| EdgeSpec {
                    from: names[e.from].clone(),
                    to: names[e.to].clone(),
                    weight: e.weight,
                })
                .collect(),
            noise: names
                .iter()
                .zip(sem.noise())
                .map(|(n, z)| (n.clone(), NoiseSpec::from_noise(z)))
                .collect(),
        }
    }

    /// `source` is the document text, used to locate duplicate names.
    fn to_model(&self, source: &str) -> Result<SemModel> {
        let names = &self.variables;
        for (i, name) in names.iter().enumerate() {
            if name.trim().is_empty() {
                return Err(Error::Validation("variable names must be non-empty".into()));
            }
            if names[..i].contains(name) {
                let (line, column) = locate_duplicate(source, name);
                return Err(Error::Parse {
                    line,
                    column,
                    message: format!("duplicate variable name {name:?}"),
                });
            }
        }
        let target = lookup(names, &self.target, "target")?;
        let mut edges = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            edges.push(Edge::new(
                lookup(names, &e.from, "edge")?,
                lookup(names, &e.to, "edge")?,
                e.weight,
            ));
        }
        for key in self.noise.keys() {
            lookup(names, key, "noise")?;
        }
        let mut noise = Vec::with_capacity(names.len());
        for name in names {
            let spec = self
                .noise
                .get(name)
                .ok_or_else(|| Error::Validation(format!("no noise given for variable {name:?}")))?;
            noise.push(spec.to_noise(name)?);
        }
        build_sem(&edges, noise, target)
            .and_then(|s| s.with_names(names.clone()))
            .map_err(|e| e.context("invalid SEM"))
    }
}

/// Finds the second quoted occurrence of `name` after the `variables` key.
fn locate_duplicate(source: &str, name: &str) -> (usize, usize) {
    let start = source.find("variables").unwrap_or(0);
    let mut hits = Vec::new();
    for quote in ['"', '\''] {
        let needle = format!("{quote}{name}{quote}");
        hits.extend(source[start..].match_indices(&needle).map(|(i, _)| start + i));
    }
    hits.sort_unstable();
    match hits.get(1) {
        Some(&offset) => line_col(source, offset),
        None => (0, 0),
    }
}

fn line_col(source: &str, offset: usize) -> (usize, usize) {
    let before = &source[..offset.min(source.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, column)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub weight: f64,
    pub distribution: DistSpec,
}

/// Intervention distribution with sites given by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistSpec {
    pub kind: DistributionKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sites: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flip_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<ComponentSpec>,
}

impl DistSpec {
    pub fn from_dist(dist: &InterventionDistribution, names: &[String]) -> Self {
        DistSpec {
            kind: dist.kind,
            sites: dist.sites.iter().map(|&s| names[s].clone()).collect(),
            flip_prob: Some(dist.flip_prob),
            scale: Some(dist.scale),
            components: dist
                .components
                .iter()
                .map(|c| ComponentSpec {
                    weight: c.weight,
                    distribution: DistSpec::from_dist(&c.distribution, names),
                })
                .collect(),
        }
    }

    pub fn to_dist(&self, sem: &SemModel) -> Result<InterventionDistribution> {
        let dist = self.resolve(sem.names())?;
        dist.validate(sem)
            .map_err(|e| Error::Validation(format!("intervention distribution: {e}")))?;
        Ok(dist)
    }

    fn resolve(&self, names: &[String]) -> Result<InterventionDistribution> {
        Ok(InterventionDistribution {
            kind: self.kind,
            sites: self
                .sites
                .iter()
                .map(|s| lookup(names, s, "site"))
                .collect::<Result<_>>()?,
            flip_prob: self.flip_prob.unwrap_or(0.5),
            scale: self.scale.unwrap_or(1.0),
            components: self
                .components
                .iter()
                .map(|c| {
                    Ok(MixtureComponent {
                        weight: c.weight,
                        distribution: c.distribution.resolve(names)?,
                    })
                })
                .collect::<Result<_>>()?,
        })
    }
}

/// The `sem` entry of an experiment file: a path (relative to the file)
/// or an inline table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SemSource {
    Path(String),
    Inline(SemSpec),
}

fn default_m_range() -> Vec<usize> {
    (3..=20).collect()
}
fn default_m_test() -> usize {
    100
}
fn default_n_samples() -> usize {
    30_000
}
fn default_threshold() -> f64 {
    0.02
}
fn default_repeats() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub sem: SemSource,
    pub train_dist: DistSpec,
    pub test_dist: DistSpec,
    #[serde(default = "default_m_range")]
    pub m_train_range: Vec<usize>,
    #[serde(default = "default_m_test")]
    pub m_test: usize,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_threshold")]
    pub rho_threshold: f64,
    #[serde(default = "default_threshold")]
    pub gen_threshold: f64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub master_seed: u64,
}

impl ExperimentSpec {
    pub fn from_config(config: &ExperimentConfig) -> Self {
        let names = config.sem.names();
        ExperimentSpec {
            sem: SemSource::Inline(SemSpec::from_model(&config.sem)),
            train_dist: DistSpec::from_dist(&config.train_dist, names),
            test_dist: DistSpec::from_dist(&config.test_dist, names),
            m_train_range: config.m_train_range.clone(),
            m_test: config.m_test,
            n_samples: config.n_samples,
            rho_threshold: config.rho_threshold,
            gen_threshold: config.gen_threshold,
            repeats: config.repeats,
            master_seed: config.master_seed,
        }
    }

    /// `base_dir` resolves a relative SEM path; `source` is this document.
    fn to_config(&self, base_dir: &Path, source: &str) -> Result<(ExperimentConfig, Vec<PathBuf>)> {
        let (sem, inputs) = match &self.sem {
            SemSource::Path(p) => {
                let path = base_dir.join(p);
                (load_sem(&path)?, vec![path])
            }
            SemSource::Inline(spec) => (spec.to_model(source)?, Vec::new()),
        };
        let config = ExperimentConfig {
            train_dist: self.train_dist.to_dist(&sem).map_err(|e| e.context("train_dist"))?,
            test_dist: self.test_dist.to_dist(&sem).map_err(|e| e.context("test_dist"))?,
            sem,
            m_train_range: self.m_train_range.clone(),
            m_test: self.m_test,
            n_samples: self.n_samples,
            rho_threshold: self.rho_threshold,
            gen_threshold: self.gen_threshold,
            repeats: self.repeats,
            master_seed: self.master_seed,
        };
        config.validate()?;
        Ok((config, inputs))
    }
}

/// Reads a config file; failures are reported as validation errors.
pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))
}

fn parse_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        Error::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })
}

pub fn parse_sem_str(text: &str) -> Result<SemModel> {
    parse_toml::<SemSpec>(text)?.to_model(text)
}

pub fn load_sem(path: &Path) -> Result<SemModel> {
    parse_sem_str(&read_text(path)?).map_err(|e| e.context(path.display().to_string()))
}

pub fn parse_dist_str(text: &str, sem: &SemModel) -> Result<InterventionDistribution> {
    parse_toml::<DistSpec>(text)?.to_dist(sem)
}

pub fn load_dist(path: &Path, sem: &SemModel) -> Result<InterventionDistribution> {
    parse_dist_str(&read_text(path)?, sem).map_err(|e| e.context(path.display().to_string()))
}

/// `base_dir` resolves a relative SEM path.
pub fn parse_experiment_str(text: &str, base_dir: &Path) -> Result<(ExperimentConfig, Vec<PathBuf>)> {
    parse_toml::<ExperimentSpec>(text)?.to_config(base_dir, text)
}

/// Loads an experiment file; also returns every other file it read.
pub fn load_experiment(path: &Path) -> Result<(ExperimentConfig, Vec<PathBuf>)> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_experiment_str(&read_text(path)?, base).map_err(|e| e.context(path.display().to_string()))
}

pub fn sem_to_toml(sem: &SemModel) -> String {
    toml::to_string(&SemSpec::from_model(sem)).expect("SEM spec serializes")
}

pub fn dist_to_toml(dist: &InterventionDistribution, names: &[String]) -> String {
    toml::to_string(&DistSpec::from_dist(dist, names)).expect("distribution spec serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    const MINIMAL: &str = r#"
variables = ["X0", "Xt"]
target = "Xt"

[[edges]]
from = "X0"
to = "Xt"
weight = 1.0

[noise]
X0 = { variance = 1.0 }
Xt = { variance = 1.0 }
"#;

    #[test]
    fn minimal_sem() {
        let sem = parse_sem_str(MINIMAL).unwrap();
        assert_eq!(sem.num_vars(), 2);
        assert_eq!(sem.target(), 1);
        assert_eq!(sem.weights()[(0, 1)], 1.0);
    }

    #[test]
    fn duplicate_names_are_parse_errors() {
        let text = MINIMAL.replace(r#"["X0", "Xt"]"#, r#"["X0", "Xt", "X0"]"#);
        match parse_sem_str(&text) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 26)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("target = \"Xt\"", "target = \"Xt\"\ncolour = 3");
        assert!(matches!(parse_sem_str(&text), Err(Error::Parse { line: 4, .. })));
    }

    #[test]
    fn cycles_reported() {
        let text = format!("{MINIMAL}\n[[edges]]\nfrom = \"Xt\"\nto = \"X0\"\nweight = 1.0\n");
        // array of tables after [noise] continues the edges list
        let err = parse_sem_str(&text).unwrap_err();
        assert_eq!(err.root(), &Error::CycleDetected);
    }

    #[test]
    fn missing_noise_rejected() {
        let text = MINIMAL.replace("Xt = { variance = 1.0 }", "");
        assert!(matches!(parse_sem_str(&text), Err(Error::Validation(_))));
    }

    #[test]
    fn soft_distribution_on_target_rejected() {
        let sem = parse_sem_str(MINIMAL).unwrap();
        let err = parse_dist_str("kind = \"soft_gaussian\"\nsites = [\"Xt\"]\n", &sem).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn sem_round_trip() {
        for sem in [fixtures::seven_node(0.02), fixtures::chain(5), fixtures::example_one(0.5, 2.0)] {
            let text = sem_to_toml(&sem);
            assert_eq!(parse_sem_str(&text).unwrap(), sem);
        }
    }

    #[test]
    fn dist_round_trip() {
        let sem = fixtures::seven_node(0.02);
        let dist = InterventionDistribution::hard_gaussian(fixtures::seven_node_sites(), 2.0);
        let text = dist_to_toml(&dist, sem.names());
        assert_eq!(parse_dist_str(&text, &sem).unwrap(), dist);
    }

    #[test]
    fn experiment_defaults_and_inline_sem() {
        let text = r#"
master_seed = 9
[sem]
variables = ["a", "b", "t"]
target = "t"
edges = [{ from = "a", to = "b", weight = 1.0 }, { from = "b", to = "t", weight = 1.0 }]
noise = { a = { variance = 0.02 }, b = { variance = 0.02 }, t = { variance = 0.02 } }
[train_dist]
kind = "hard_gaussian"
sites = ["a", "b"]
[test_dist]
kind = "rademacher_flip"
"#;
        let (config, inputs) = parse_experiment_str(text, Path::new(".")).unwrap();
        assert!(inputs.is_empty());
        assert_eq!(config.m_train_range, (3..=20).collect::<Vec<_>>());
        assert_eq!(config.m_test, 100);
        assert_eq!(config.n_samples, 30_000);
        assert_eq!(config.repeats, 5);
        assert_eq!(config.master_seed, 9);
        assert_eq!(config.test_dist.flip_prob, 0.5);
        let echo = toml::to_string(&ExperimentSpec::from_config(&config)).unwrap();
        let (back, _) = parse_experiment_str(&echo, Path::new(".")).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn experiment_invariants_checked() {
        let text = r#"
sem = "missing.toml"
[train_dist]
kind = "hard_gaussian"
sites = ["a"]
[test_dist]
kind = "rademacher_flip"
"#;
        let err = parse_experiment_str(text, Path::new("/nonexistent")).unwrap_err();
        assert!(matches!(err.root(), Error::Validation(_)));
    }
}
