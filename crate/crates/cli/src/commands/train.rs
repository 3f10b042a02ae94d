use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use smoothcert::training::{train, EpochLog, Regularizer, TrainConfig};
use smoothcert::{Dataset, Mlp, NoiseSpec};

use super::{write_file, Command};
use crate::error::{CliError, CliResult, OrExit};
use crate::layered::{absolute, default_seed, required, resolve};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Noise grammar, e.g. `nu:0.5:0.433`.
    pub noise: String,
    pub reg: String,
    pub beta: f64,
    pub lambda_c: f64,
    pub eta: f64,
    pub m: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_max: f64,
    /// Hidden layer widths.
    pub hidden: Vec<usize>,
    pub seed: u64,
    pub threads: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// JSON file with any of the settings below.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Training CSV (`x0,...,label`).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `gaussian:<σ>`, `uniform:<σ>`, `nu:<σ_N>:<σ_U>` or `nu-k:<σ_N>:<K>`.
    #[arg(long)]
    pub noise: Option<String>,
    /// `none`, `rs`, `rn`, `ru` or `consistency`.
    #[arg(long)]
    pub reg: Option<String>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub lambda_c: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr_max: Option<f64>,
    /// Comma-separated hidden widths, e.g. `32,32`.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
}

impl TrainArgs {
    pub fn resolve(&self) -> CliResult<TrainSettings> {
        let defaults = TrainSettings {
            data: None,
            out: None,
            noise: "gaussian:0.5".into(),
            reg: "none".into(),
            beta: 0.0,
            lambda_c: 10.0,
            eta: 0.5,
            m: 2,
            epochs: 30,
            batch_size: 32,
            lr_max: 0.1,
            hidden: vec![32, 32],
            seed: default_seed()?,
            threads: None,
        };
        let mut s = resolve(&defaults, self.config.as_deref(), self)?;
        s.data = Some(absolute(required(&s.data, "data")?)?);
        s.out = Some(absolute(required(&s.out, "out")?)?);
        s.train_config()?;
        Ok(s)
    }
}

impl TrainSettings {
    pub fn train_config(&self) -> CliResult<TrainConfig> {
        let noise: NoiseSpec = self.noise.parse().or_config("--noise")?;
        let regularizer: Regularizer = self.reg.parse().or_config("--reg")?;
        let cfg = TrainConfig {
            noise,
            regularizer,
            beta: self.beta,
            lambda_c: self.lambda_c,
            eta: self.eta,
            m: self.m,
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr_max: self.lr_max,
            seed: self.seed,
            ..TrainConfig::new(noise, regularizer)
        };
        cfg.validate()?;
        if self.hidden.contains(&0) {
            return Err(CliError::config("hidden widths must be >= 1"));
        }
        Ok(cfg)
    }
}

impl Command for TrainSettings {
    const NAME: &'static str = "train";

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
        self.data.iter().cloned().collect()
    }

    fn execute(&self, out: &Path) -> CliResult<(Value, Vec<String>)> {
        let cfg = self.train_config()?;
        let path = required(&self.data, "data")?;
        let data: Dataset = Dataset::load(path).map_err(|e| CliError::from(e).context(format!("loading {}", path.display())))?;
        let mut sizes = vec![data.dim()];
        sizes.extend(&self.hidden);
        sizes.push(data.num_classes);
        let model = Mlp::init(&sizes, self.seed)?;
        let result = train(model, &data, &cfg)?;
        let mut outputs = Vec::new();
        write_file(out, "model.json", &(result.model.to_json()? + "\n"), &mut outputs)?;
        write_file(out, "train_log.csv", &EpochLog::to_csv(&result.log), &mut outputs)?;
        let summary = json!({
            "scheme": cfg.label(),
            "sizes": sizes,
            "num_params": result.model.num_params(),
            "final": result.log.last(),
        });
        Ok((summary, outputs))
    }
}
