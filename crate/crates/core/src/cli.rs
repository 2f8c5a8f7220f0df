//! Command-line front end. Exit codes: 0 success, 1 usage or validation
//! error, 2 runtime failure.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bounds::{BudgetKind, PacBudget};
use crate::config::{load_dist, load_experiment, load_sem, read_text};
use crate::error::{Error, Result};
use crate::experiment::{conditional_subsample, run_experiment, ExperimentReport};
use crate::intervention::{apply, sample_intervention, Intervention};
use crate::invariance::{certify, certify_representation, Head, Representation};
use crate::io::{derive_seed, sha256_hex, to_json_pretty};
use crate::sem::{Dataset, SemModel};

#[derive(Debug, Parser)]
#[command(name = "pacinv", version, about = "Linear SEM simulation, invariance certification and PAC budgets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample datasets from environments of a SEM.
    Simulate(SimulateArgs),
    /// Certify a representation across environments.
    Certify(CertifyArgs),
    /// Evaluate interventional and sample complexity budgets.
    Bounds(BoundsArgs),
    /// Run the generalization experiment.
    Experiment(ExperimentArgs),
    /// Split a dataset into equal-frequency bins of one variable.
    Subsample(SubsampleArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// SEM config (TOML)
    #[arg(long)]
    sem: PathBuf,
    /// Intervention distribution config (TOML); observational if omitted
    #[arg(long)]
    dist: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    environments: usize,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[arg(long)]
    sem: PathBuf,
    /// Distribution to draw environments from
    #[arg(long)]
    dist: Option<PathBuf>,
    /// Number of environments drawn from --dist
    #[arg(long, default_value_t = 10)]
    environments: usize,
    /// JSON array of interventions, as written by `simulate`
    #[arg(long)]
    interventions: Option<PathBuf>,
    /// Covariate names to select, or one diagonal entry per covariate
    #[arg(long)]
    phi: String,
    /// Head coefficients; defaults to the shared least-squares head
    #[arg(long)]
    head: Option<String>,
    #[arg(long)]
    eps: f64,
    /// Also report the split-sample estimate on this many samples
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum KindArg {
    Hard,
    Soft,
    General,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Number of covariates (defaults to k)
    #[arg(long)]
    n: Option<u64>,
    /// Number of intervened nodes (defaults to n)
    #[arg(long)]
    k: Option<u64>,
    /// In-degree bound
    #[arg(long, default_value_t = 1)]
    d: u64,
    #[arg(long)]
    delta: f64,
    #[arg(long = "delta-prime")]
    delta_prime: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long = "L", alias = "l", default_value_t = 1.0)]
    l: f64,
    #[arg(long = "C", alias = "c", default_value_t = 1.0)]
    c: f64,
    /// Also write the table to this CSV file
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// 5000 samples per dataset and 2 repeats
    #[arg(long)]
    quick: bool,
    /// Overrides master_seed from the config
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct SubsampleArgs {
    /// Dataset CSV with a header row
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    target: String,
    /// Comma-separated rule variables; bins use the first
    #[arg(long)]
    rule: String,
    #[arg(long)]
    bins: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub name: String,
    pub flags: BTreeMap<String, String>,
}

/// Written to every output directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: CommandRecord,
    pub master_seed: u64,
    /// SHA-256 of every input file, keyed by path as given.
    pub input_digests: BTreeMap<String, String>,
}

impl RunManifest {
    fn new(name: &str, flags: BTreeMap<String, String>, seed: u64, inputs: &[PathBuf]) -> Result<Self> {
        let mut input_digests = BTreeMap::new();
        for p in inputs {
            let bytes = std::fs::read(p)
                .map_err(|e| Error::Validation(format!("cannot read {}: {e}", p.display())))?;
            input_digests.insert(p.display().to_string(), sha256_hex(&bytes));
        }
        Ok(RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: CommandRecord {
                name: name.to_string(),
                flags,
            },
            master_seed: seed,
            input_digests,
        })
    }
}

struct Failure {
    code: i32,
    error: Error,
}

fn invalid(error: Error) -> Failure {
    Failure { code: 1, error }
}

fn runtime(error: Error) -> Failure {
    Failure { code: 2, error }
}

type Outcome = std::result::Result<(), Failure>;

fn resolve_seed(flag: Option<u64>, env_seed: Option<&str>) -> Result<Option<u64>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match env_seed {
        None => Ok(None),
        Some(s) => s
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| Error::Validation(format!("SEED must be an unsigned 64-bit integer, got {s:?}"))),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

fn flags<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

/// Parses argv (including the program name) and runs the subcommand.
/// `env_seed` is the value of the `SEED` environment variable.
pub fn dispatch<I, T>(argv: I, env_seed: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    1
                }
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a, env_seed, out),
        Command::Certify(a) => certify_cmd(a, env_seed, out),
        Command::Bounds(a) => bounds_cmd(a, out, err),
        Command::Experiment(a) => experiment_cmd(a, env_seed, out, err),
        Command::Subsample(a) => subsample_cmd(a, env_seed, out),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.error);
            f.code
        }
    }
}

fn sample_env(
    sem: &SemModel,
    dist: Option<&crate::intervention::InterventionDistribution>,
    seed: u64,
    j: usize,
) -> Result<Intervention> {
    match dist {
        Some(d) => sample_intervention(d, sem, derive_seed(seed, &[j as u64], "intervention")),
        None => Ok(Intervention::observational()),
    }
}

fn simulate(a: SimulateArgs, env_seed: Option<&str>, out: &mut dyn Write) -> Outcome {
    let seed = resolve_seed(a.seed, env_seed).map_err(invalid)?.unwrap_or(0);
    let sem = load_sem(&a.sem).map_err(invalid)?;
    let dist = a.dist.as_ref().map(|p| load_dist(p, &sem)).transpose().map_err(invalid)?;
    if a.samples < 2 {
        return Err(invalid(Error::InsufficientSamples { needed: 2, got: a.samples }));
    }
    if a.environments < 1 {
        return Err(invalid(Error::Validation("--environments must be at least 1".into())));
    }
    let mut inputs = vec![a.sem.clone()];
    inputs.extend(a.dist.clone());
    let manifest = RunManifest::new(
        "simulate",
        flags([
            ("sem", a.sem.display().to_string()),
            ("dist", opt_path(&a.dist)),
            ("environments", a.environments.to_string()),
            ("samples", a.samples.to_string()),
            ("seed", seed.to_string()),
            ("out", a.out.display().to_string()),
        ]),
        seed,
        &inputs,
    )
    .map_err(invalid)?;
    create_dir(&a.out).map_err(runtime)?;
    let mut ivs = Vec::with_capacity(a.environments);
    for j in 0..a.environments {
        let iv = sample_env(&sem, dist.as_ref(), seed, j).map_err(runtime)?;
        let env = apply(&sem, &iv).map_err(runtime)?;
        let data = env
            .sample_labeled(a.samples, derive_seed(seed, &[j as u64], "data"), iv.id())
            .map_err(runtime)?;
        let mut buf = Vec::new();
        data.write_csv(&mut buf).map_err(runtime)?;
        let name = format!("env_{j:03}.csv");
        write_file(&a.out.join(&name), &String::from_utf8(buf).expect("utf-8 csv")).map_err(runtime)?;
        let _ = writeln!(out, "{name}\t{}", iv.id());
        ivs.push(iv.to_json(sem.names()));
    }
    write_file(&a.out.join("interventions.json"), &to_json_pretty(&ivs)).map_err(runtime)?;
    write_file(&a.out.join("manifest.json"), &to_json_pretty(&manifest)).map_err(runtime)?;
    Ok(())
}

fn parse_numbers(s: &str) -> Option<Vec<f64>> {
    s.split(',').map(|t| t.trim().parse::<f64>().ok()).collect()
}

fn parse_phi(spec: &str, sem: &SemModel) -> Result<Representation> {
    let n = sem.num_covariates();
    if let Some(values) = parse_numbers(spec) {
        if values.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "--phi has {} entries for {n} covariates",
                values.len()
            )));
        }
        return Representation::from_slice(&values);
    }
    let mut positions = Vec::new();
    for name in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let idx = sem
            .index_of(name)
            .ok_or_else(|| Error::Validation(format!("--phi names unknown variable {name:?}")))?;
        let pos = sem
            .covariate_position(idx)
            .ok_or_else(|| Error::Validation("--phi cannot select the target".into()))?;
        positions.push(pos);
    }
    Representation::from_subset(n, &positions)
}

fn load_interventions(path: &Path, sem: &SemModel) -> Result<Vec<Intervention>> {
    let text = read_text(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let items = value
        .as_array()
        .ok_or_else(|| Error::Validation("interventions file must hold a JSON array".into()))?;
    items
        .iter()
        .map(|v| {
            let iv = Intervention::from_json(v, sem.names())?;
            iv.validate(sem)?;
            Ok(iv)
        })
        .collect()
}

fn certify_cmd(a: CertifyArgs, env_seed: Option<&str>, out: &mut dyn Write) -> Outcome {
    let seed = resolve_seed(a.seed, env_seed).map_err(invalid)?.unwrap_or(0);
    let sem = load_sem(&a.sem).map_err(invalid)?;
    if !(a.eps.is_finite() && a.eps > 0.0) {
        return Err(invalid(Error::InvalidParameters(format!("--eps must be positive, got {}", a.eps))));
    }
    let phi = parse_phi(&a.phi, &sem).map_err(invalid)?;
    let mut ivs = match &a.interventions {
        Some(p) => load_interventions(p, &sem).map_err(invalid)?,
        None => Vec::new(),
    };
    let mut inputs = vec![a.sem.clone()];
    inputs.extend(a.interventions.clone());
    if let Some(p) = &a.dist {
        let dist = load_dist(p, &sem).map_err(invalid)?;
        inputs.push(p.clone());
        for j in 0..a.environments {
            ivs.push(sample_env(&sem, Some(&dist), seed, j).map_err(runtime)?);
        }
    }
    if ivs.is_empty() {
        ivs.push(Intervention::observational());
    }
    if let Some(n) = a.samples {
        if n < 2 {
            return Err(invalid(Error::InsufficientSamples { needed: 2, got: n }));
        }
    }
    let envs = ivs
        .iter()
        .map(|iv| apply(&sem, iv))
        .collect::<Result<Vec<_>>>()
        .map_err(invalid)?;
    let (head, head_source) = match &a.head {
        Some(s) => {
            let values = parse_numbers(s)
                .ok_or_else(|| Error::Validation(format!("--head must be numbers, got {s:?}")))
                .map_err(invalid)?;
            if values.len() != sem.num_covariates() {
                return Err(invalid(Error::DimensionMismatch(format!(
                    "--head has {} entries for {} covariates",
                    values.len(),
                    sem.num_covariates()
                ))));
            }
            (Head::from_slice(&values).map_err(invalid)?, "given")
        }
        None => {
            let moments: Vec<_> = envs.iter().map(SemModel::moments).collect();
            (certify_representation(&moments, &phi).map_err(runtime)?.head, "shared least squares")
        }
    };
    let manifest = RunManifest::new(
        "certify",
        flags([
            ("sem", a.sem.display().to_string()),
            ("dist", opt_path(&a.dist)),
            ("environments", a.environments.to_string()),
            ("interventions", opt_path(&a.interventions)),
            ("phi", a.phi.clone()),
            ("head", a.head.clone().unwrap_or_default()),
            ("eps", crate::io::fmt_f64(a.eps)),
            ("samples", a.samples.map(|n| n.to_string()).unwrap_or_default()),
            ("seed", seed.to_string()),
        ]),
        seed,
        &inputs,
    )
    .map_err(invalid)?;
    let mut reports = Vec::with_capacity(envs.len());
    for (j, (env, iv)) in envs.iter().zip(&ivs).enumerate() {
        let data = match a.samples {
            Some(n) => Some(
                env.sample_labeled(n, derive_seed(seed, &[j as u64], "certify-data"), iv.id())
                    .map_err(runtime)?,
            ),
            None => None,
        };
        reports.push(certify(env, iv.id(), &phi, &head, a.eps, data.as_ref()).map_err(runtime)?);
    }
    let summary = json!({
        "head": head.coeffs().iter().copied().collect::<Vec<f64>>(),
        "head_source": head_source,
        "eps": a.eps,
        "invariant_everywhere": reports.iter().all(|r| r.invariant),
        "environments": reports,
    });
    let text = to_json_pretty(&summary);
    let _ = write!(out, "{text}");
    if let Some(dir) = &a.out {
        create_dir(dir).map_err(runtime)?;
        write_file(&dir.join("certification.json"), &text).map_err(runtime)?;
        write_file(&dir.join("manifest.json"), &to_json_pretty(&manifest)).map_err(runtime)?;
    }
    Ok(())
}

fn bounds_cmd(a: BoundsArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let (n, k) = match (a.n, a.k) {
        (Some(n), Some(k)) => (n, k),
        (Some(n), None) => (n, n),
        (None, Some(k)) => (k, k),
        (None, None) => return Err(invalid(Error::Validation("give --n or --k".into()))),
    };
    let kind = match a.kind {
        KindArg::Hard => BudgetKind::HardK,
        KindArg::Soft => BudgetKind::SoftKDegreeD,
        KindArg::General => BudgetKind::General,
    };
    let budget =
        PacBudget::compute(kind, n, k, a.d, a.delta, a.delta_prime, a.eps, a.l, a.c).map_err(invalid)?;
    let table = format!("{}\n{}\n", PacBudget::CSV_HEADER, budget.csv_row());
    let _ = write!(out, "{table}");
    let _ = writeln!(err, "# {}; natural logarithms", budget.caveat());
    if let Some(p) = &a.out {
        write_file(p, &table).map_err(runtime)?;
    }
    Ok(())
}

fn experiment_cmd(a: ExperimentArgs, env_seed: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let (mut config, extra) = load_experiment(&a.config).map_err(invalid)?;
    if let Some(seed) = resolve_seed(a.seed, env_seed).map_err(invalid)? {
        config.master_seed = seed;
    }
    if a.quick {
        config.n_samples = 5_000;
        config.repeats = 2;
    }
    let mut inputs = vec![a.config.clone()];
    inputs.extend(extra);
    let manifest = RunManifest::new(
        "experiment",
        flags([
            ("config", a.config.display().to_string()),
            ("out", a.out.display().to_string()),
            ("quick", a.quick.to_string()),
            ("seed", config.master_seed.to_string()),
        ]),
        config.master_seed,
        &inputs,
    )
    .map_err(invalid)?;
    let started = Instant::now();
    let report = run_experiment(&config).map_err(runtime)?;
    write_report(&a.out, &report, &manifest).map_err(runtime)?;
    let _ = writeln!(out, "m\tmedian_subset_pct\tmedian_erm_pct");
    for e in &report.per_m {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.1}"));
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            e.m,
            fmt(report.median_subset_pct(e.m)),
            fmt(report.median_erm_pct(e.m))
        );
    }
    let _ = writeln!(err, "wall-clock: {:.2}s", started.elapsed().as_secs_f64());
    Ok(())
}

/// Writes report.json, generalization.csv, erm.csv and manifest.json.
pub fn write_report(dir: &Path, report: &ExperimentReport, manifest: &RunManifest) -> Result<()> {
    create_dir(dir)?;
    write_file(&dir.join("report.json"), &to_json_pretty(report))?;
    write_file(&dir.join("generalization.csv"), &report.generalization_csv())?;
    write_file(&dir.join("erm.csv"), &report.erm_csv())?;
    write_file(&dir.join("manifest.json"), &to_json_pretty(manifest))
}

fn subsample_cmd(a: SubsampleArgs, env_seed: Option<&str>, out: &mut dyn Write) -> Outcome {
    let seed = resolve_seed(a.seed, env_seed).map_err(invalid)?.unwrap_or(0);
    let file = std::fs::File::open(&a.data)
        .map_err(|e| invalid(Error::Validation(format!("cannot read {}: {e}", a.data.display()))))?;
    let label = a.data.display().to_string();
    let data = Dataset::read_csv(std::io::BufReader::new(file), &a.target, label, seed).map_err(invalid)?;
    let mut rule = Vec::new();
    for name in a.rule.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let idx = data
            .names()
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| invalid(Error::Validation(format!("--rule names unknown column {name:?}"))))?;
        rule.push(idx);
    }
    let bins = conditional_subsample(&data, &rule, a.bins).map_err(invalid)?;
    let manifest = RunManifest::new(
        "subsample",
        flags([
            ("data", a.data.display().to_string()),
            ("target", a.target.clone()),
            ("rule", a.rule.clone()),
            ("bins", a.bins.to_string()),
            ("seed", seed.to_string()),
            ("out", a.out.display().to_string()),
        ]),
        seed,
        std::slice::from_ref(&a.data),
    )
    .map_err(invalid)?;
    create_dir(&a.out).map_err(runtime)?;
    for (k, b) in bins.iter().enumerate() {
        let mut buf = Vec::new();
        b.write_csv(&mut buf).map_err(runtime)?;
        let name = format!("bin_{k:03}.csv");
        write_file(&a.out.join(&name), &String::from_utf8(buf).expect("utf-8 csv")).map_err(runtime)?;
        let _ = writeln!(out, "{name}\t{} rows", b.n_rows());
    }
    write_file(&a.out.join("manifest.json"), &to_json_pretty(&manifest)).map_err(runtime)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv: Vec<&str> = std::iter::once("pacinv").chain(args.iter().copied()).collect();
        let code = dispatch(argv, None, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(3), Some("9")).unwrap(), Some(3));
        assert_eq!(resolve_seed(None, Some("9")).unwrap(), Some(9));
        assert_eq!(resolve_seed(None, None).unwrap(), None);
        assert!(resolve_seed(None, Some("x")).is_err());
    }

    #[test]
    fn bounds_row() {
        let (code, out, err) = run(&["bounds", "--kind", "hard", "--k", "3", "--delta", "0.1", "--delta-prime", "0.1"]);
        assert_eq!(code, 0, "{err}");
        let row = out.lines().nth(1).unwrap();
        assert!(row.starts_with("hard,3,3,1,0.1,0.1,0.1,1.0,1.0,834,"), "{row}");
        assert!(err.contains("asymptotic constant C=1.0"));
    }

    #[test]
    fn unknown_subcommand() {
        let (code, _, err) = run(&["frobnicate"]);
        assert_eq!(code, 1);
        assert!(err.contains("Usage"));
    }

    #[test]
    fn missing_experiment_config() {
        let (code, _, err) = run(&["experiment", "--config", "/nonexistent/x.toml", "--out", "/tmp/x"]);
        assert_eq!(code, 1);
        assert!(err.contains("validation error"), "{err}");
    }
}
