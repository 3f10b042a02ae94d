use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use smoothcert::eval::certify_dataset;
use smoothcert::smoothing::{CertifyMode, DEFAULT_ALPHA, DEFAULT_N};
use smoothcert::{CertifyParams, Dataset, Mlp};

use super::{write_file, Command};
use crate::error::{CliError, CliResult, OrExit};
use crate::layered::{absolute, default_seed, required, resolve};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySettings {
    pub model: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// `gaussian`, `uniform` or `hybrid`.
    pub mode: String,
    pub sigma_g: Option<f64>,
    pub sigma_u: Option<f64>,
    pub n: u64,
    pub alpha: f64,
    /// Separate top-class selection sample; unset means one sample.
    pub selection_n: Option<u64>,
    pub seed: u64,
    pub threads: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct CertifyArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Model JSON written by `train`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Test CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub mode: Option<String>,
    /// Gaussian σ (also accepted as `--sigma`).
    #[arg(long, alias = "sigma")]
    pub sigma_g: Option<f64>,
    /// Uniform σ; the half-width is √3·σ.
    #[arg(long)]
    pub sigma_u: Option<f64>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub selection_n: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
}

impl CertifyArgs {
    pub fn resolve(&self) -> CliResult<CertifySettings> {
        let defaults = CertifySettings {
            model: None,
            data: None,
            out: None,
            mode: "gaussian".into(),
            sigma_g: None,
            sigma_u: None,
            n: DEFAULT_N,
            alpha: DEFAULT_ALPHA,
            selection_n: None,
            seed: default_seed()?,
            threads: None,
        };
        let mut s = resolve(&defaults, self.config.as_deref(), self)?;
        s.model = Some(absolute(required(&s.model, "model")?)?);
        s.data = Some(absolute(required(&s.data, "data")?)?);
        s.out = Some(absolute(required(&s.out, "out")?)?);
        s.certify_mode()?;
        s.params()?;
        Ok(s)
    }
}

impl CertifySettings {
    pub fn certify_mode(&self) -> CliResult<CertifyMode> {
        let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| CliError::config(format!("mode {} needs --{flag}", self.mode)));
        let mode = match self.mode.to_ascii_lowercase().as_str() {
            "gaussian" => CertifyMode::Gaussian { sigma: need(self.sigma_g, "sigma-g")? },
            "uniform" => CertifyMode::Uniform { sigma_u: need(self.sigma_u, "sigma-u")? },
            "hybrid" => CertifyMode::Hybrid { sigma_g: need(self.sigma_g, "sigma-g")?, sigma_u: need(self.sigma_u, "sigma-u")? },
            other => return Err(CliError::config(format!("unknown mode {other:?}; expected gaussian, uniform or hybrid"))),
        };
        let sigmas = [self.sigma_g, self.sigma_u];
        if sigmas.iter().flatten().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(CliError::config("certification sigmas must be finite and > 0"));
        }
        Ok(mode)
    }

    pub fn params(&self) -> CliResult<CertifyParams> {
        let p = CertifyParams::new(self.n, self.alpha).or_config("certification parameters")?;
        match self.selection_n {
            Some(n0) => p.two_stage(n0).or_config("--selection-n"),
            None => Ok(p),
        }
    }
}

impl Command for CertifySettings {
    const NAME: &'static str = "certify";

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
        self.model.iter().chain(&self.data).cloned().collect()
    }

    fn execute(&self, out: &Path) -> CliResult<(Value, Vec<String>)> {
        let mode = self.certify_mode()?;
        let params = self.params()?;
        let model_path = required(&self.model, "model")?;
        let text = std::fs::read_to_string(model_path).or_input(&format!("reading {}", model_path.display()))?;
        let model = Mlp::from_json(&text).map_err(|e| CliError::from(e).context(format!("loading {}", model_path.display())))?;
        let data_path = required(&self.data, "data")?;
        let data: Dataset = Dataset::load(data_path).map_err(|e| CliError::from(e).context(format!("loading {}", data_path.display())))?;
        let report = certify_dataset(&model, &data, &mode, &params, self.seed)?;
        let mut outputs = Vec::new();
        write_file(out, "certificates.csv", &report.to_csv(), &mut outputs)?;
        write_file(out, "aggregates.json", &(report.aggregates_json()? + "\n"), &mut outputs)?;
        Ok((json!({ "certification": mode.label(), "aggregates": report.aggregates }), outputs))
    }
}
