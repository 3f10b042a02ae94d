use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use smoothcert::eval::{comparison_csv, sweep_recipe, CertScheme, ComparisonRow, Recipe, SweepSettings, TrainScheme};
use smoothcert::training::{Regularizer, TrainConfig};
use smoothcert::{CertifyParams, Dataset, NoiseSpec};

use super::{write_file, Command};
use crate::error::{CliError, CliResult, OrExit, EXIT_UNREACHABLE};
use crate::layered::{absolute, default_seed, required, resolve};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCmdSettings {
    pub data: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// `train:cert` pairs; train is one of `gaussian`, `uniform`, `nu`,
    /// `nu-rs`, `nu-rn`, `nu-ru`, `consistency`; cert is `gaussian`,
    /// `uniform` or `hybrid`.
    pub schemes: Vec<String>,
    /// Target clean accuracies, as fractions or percentages.
    pub targets: Vec<f64>,
    pub tolerance: f64,
    /// Regularizer weight for `nu-rs` / `nu-rn` / `nu-ru`.
    pub beta: f64,
    /// When non-empty, every β-weighted scheme is swept once per value.
    pub betas: Vec<f64>,
    /// Kurtosis that fixes σ_U given σ_N for NU training.
    pub kurtosis: f64,
    pub lambda_c: f64,
    pub eta: f64,
    pub m: usize,
    pub knob_lo: f64,
    pub knob_hi: f64,
    /// Certification σ offsets tried at each training σ.
    pub offsets: Vec<f64>,
    pub max_evals: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_max: f64,
    pub hidden: Vec<usize>,
    pub n: u64,
    pub alpha: f64,
    pub seed: u64,
    pub threads: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Training CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Test CSV used for certification.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Repeatable `train:cert` pair, e.g. `--scheme nu-rs:hybrid`.
    #[arg(long = "scheme")]
    #[serde(rename = "schemes")]
    pub schemes: Option<Vec<String>>,
    /// Comma-separated target accuracies, e.g. `45,50,55` or `0.8`.
    #[arg(long = "target", value_delimiter = ',')]
    #[serde(rename = "targets")]
    pub targets: Option<Vec<f64>>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Comma-separated β values for an ablation.
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    #[arg(long)]
    pub kurtosis: Option<f64>,
    #[arg(long)]
    pub lambda_c: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub knob_lo: Option<f64>,
    #[arg(long)]
    pub knob_hi: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub offsets: Option<Vec<f64>>,
    #[arg(long)]
    pub max_evals: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr_max: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
}

impl SweepArgs {
    pub fn resolve(&self) -> CliResult<SweepCmdSettings> {
        let defaults = SweepCmdSettings {
            data: None,
            test: None,
            out: None,
            schemes: vec!["nu-rs:hybrid".into(), "gaussian:gaussian".into()],
            targets: vec![0.8],
            tolerance: 0.01,
            beta: 3.0,
            betas: Vec::new(),
            kurtosis: -0.22,
            lambda_c: 10.0,
            eta: 0.5,
            m: 2,
            knob_lo: 0.05,
            knob_hi: 1.0,
            offsets: vec![0.0],
            max_evals: 20,
            epochs: 30,
            batch_size: 32,
            lr_max: 0.1,
            hidden: vec![32, 32],
            n: 10_000,
            alpha: 0.001,
            seed: default_seed()?,
            threads: None,
        };
        let mut s = resolve(&defaults, self.config.as_deref(), self)?;
        s.data = Some(absolute(required(&s.data, "data")?)?);
        s.test = Some(absolute(required(&s.test, "test")?)?);
        s.out = Some(absolute(required(&s.out, "out")?)?);
        s.jobs()?;
        Ok(s)
    }
}

/// Accepts `0.45` or `45` for 45%.
fn fraction(v: f64) -> f64 {
    if v > 1.0 {
        v / 100.0
    } else {
        v
    }
}

fn parse_scheme(s: &str) -> CliResult<(TrainScheme, Regularizer, CertScheme)> {
    let (train, cert) = s.split_once(':').ok_or_else(|| CliError::config(format!("scheme {s:?} is not train:cert")))?;
    let cert: CertScheme = cert.parse().or_config("scheme")?;
    let nu = |k| TrainScheme::NormalUniform { kurtosis: k };
    let (t, r) = match train.to_ascii_lowercase().as_str() {
        "gaussian" => (TrainScheme::Gaussian, Regularizer::None),
        "uniform" => (TrainScheme::Uniform, Regularizer::None),
        "nu" => (nu(0.0), Regularizer::None),
        "nu-rs" => (nu(0.0), Regularizer::Similarity),
        "nu-rn" => (nu(0.0), Regularizer::NormalOnly),
        "nu-ru" => (nu(0.0), Regularizer::UniformOnly),
        "consistency" => (TrainScheme::Gaussian, Regularizer::Consistency),
        other => return Err(CliError::config(format!("unknown training scheme {other:?}"))),
    };
    Ok((t, r, cert))
}

/// One sweep to run.
struct Job {
    scheme: String,
    beta: Option<f64>,
    target: f64,
    recipe: Recipe,
}

impl SweepCmdSettings {
    fn settings_for(&self, target: f64) -> SweepSettings {
        SweepSettings {
            target_acc: fraction(target),
            tolerance: fraction(self.tolerance),
            knob_lo: self.knob_lo,
            knob_hi: self.knob_hi,
            cert_offsets: self.offsets.clone(),
            max_evals: self.max_evals,
        }
    }

    fn jobs(&self) -> CliResult<Vec<Job>> {
        if self.schemes.is_empty() || self.targets.is_empty() {
            return Err(CliError::config("need at least one --scheme and one --target"));
        }
        if self.hidden.contains(&0) {
            return Err(CliError::config("hidden widths must be >= 1"));
        }
        let certify = CertifyParams::new(self.n, self.alpha).or_config("certification parameters")?;
        let mut jobs = Vec::new();
        for &target in &self.targets {
            self.settings_for(target).validate()?;
            for scheme in &self.schemes {
                let (mut train_scheme, reg, cert_scheme) = parse_scheme(scheme)?;
                if let TrainScheme::NormalUniform { kurtosis } = &mut train_scheme {
                    *kurtosis = self.kurtosis;
                }
                let weighted = matches!(reg, Regularizer::Similarity | Regularizer::NormalOnly | Regularizer::UniformOnly);
                let betas: Vec<Option<f64>> = if weighted && !self.betas.is_empty() {
                    self.betas.iter().map(|&b| Some(b)).collect()
                } else if weighted {
                    vec![Some(self.beta)]
                } else {
                    vec![None]
                };
                for beta in betas {
                    let template = NoiseSpec::normal_uniform(0.5, 0.5)?;
                    let train = TrainConfig {
                        beta: beta.unwrap_or(0.0),
                        lambda_c: self.lambda_c,
                        eta: self.eta,
                        m: self.m,
                        epochs: self.epochs,
                        batch_size: self.batch_size,
                        lr_max: self.lr_max,
                        seed: self.seed,
                        ..TrainConfig::new(template, reg)
                    };
                    let recipe = Recipe {
                        train_scheme,
                        cert_scheme,
                        train,
                        hidden: self.hidden.clone(),
                        init_seed: self.seed,
                        certify,
                        cert_seed: self.seed,
                    };
                    // Surface invalid combinations before any training.
                    recipe.train_config(self.knob_lo)?;
                    recipe.train_config(self.knob_hi)?;
                    jobs.push(Job { scheme: scheme.clone(), beta, target: fraction(target), recipe });
                }
            }
        }
        Ok(jobs)
    }
}

impl Command for SweepCmdSettings {
    const NAME: &'static str = "sweep";

    fn out_dir(&self) -> CliResult<&Path> {
        Ok(required(&self.out, "out")?)
    }

    fn set_out_dir(&mut self, dir: PathBuf) {
        self.out = Some(dir);
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn threads(&self) -> Option<usize> {
        self.threads
    }

    fn inputs(&self) -> Vec<PathBuf> {
        self.data.iter().chain(&self.test).cloned().collect()
    }

    fn execute(&self, out: &Path) -> CliResult<(Value, Vec<String>)> {
        let load = |p: &Option<PathBuf>, flag| -> CliResult<Dataset> {
            let path = required(p, flag)?;
            Dataset::load(path).map_err(|e| CliError::from(e).context(format!("loading {}", path.display())))
        };
        let train = load(&self.data, "data")?;
        let test = load(&self.test, "test")?.with_num_classes(train.num_classes)?;
        let mut rows = Vec::new();
        let mut chosen = Vec::new();
        let mut unreachable = Vec::new();
        let mut trace = String::from("target,scheme,beta,eval,knob,offset,clean_acc,acr_l1,acr_l2,acr_avg,qualifies\n");
        for job in self.jobs()? {
            let beta = job.beta.map_or(String::new(), |b| b.to_string());
            match sweep_recipe(&job.recipe, &train, &test, &self.settings_for(job.target)) {
                Ok(outcome) => {
                    for p in &outcome.trace {
                        let _ = writeln!(
                            trace,
                            "{},{},{beta},{},{},{},{},{},{},{},{}",
                            job.target, job.scheme, p.eval, p.knob, p.offset, p.clean_acc, p.acr_l1, p.acr_l2, p.acr_avg, p.qualifies
                        );
                    }
                    let train_label = job.recipe.train_label(outcome.knob)?;
                    let cert_label = job.recipe.mode_for(outcome.knob, outcome.offset)?.label();
                    rows.push(ComparisonRow::new(train_label, cert_label, &outcome.report));
                    chosen.push(json!({
                        "target": job.target, "scheme": job.scheme, "beta": job.beta,
                        "knob": outcome.knob, "offset": outcome.offset, "aggregates": outcome.report.aggregates,
                    }));
                }
                Err(smoothcert::Error::UnreachableTarget { target, closest }) => {
                    unreachable.push(json!({ "target": target, "scheme": job.scheme, "beta": job.beta, "closest": closest }));
                }
                Err(e) => return Err(e.into()),
            }
        }
        let mut outputs = Vec::new();
        write_file(out, "comparison.csv", &comparison_csv(&rows), &mut outputs)?;
        write_file(out, "trace.csv", &trace, &mut outputs)?;
        let summary = json!({ "chosen": chosen, "unreachable": unreachable });
        write_file(out, "sweep.json", &(serde_json::to_string_pretty(&summary).or_config("summary")? + "\n"), &mut outputs)?;
        Ok((summary, outputs))
    }

    fn failure(summary: &Value) -> Option<CliError> {
        let missed = summary.get("unreachable")?.as_array()?;
        let first = missed.first()?;
        Some(CliError::new(
            EXIT_UNREACHABLE,
            format!("{} target(s) unreachable; first: {first}", missed.len()),
        ))
    }
}
