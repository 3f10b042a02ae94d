use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use smoothcert::data::{two_blobs, two_moons};
use smoothcert::Dataset;

use super::{write_file, Command};
use crate::error::{CliError, CliResult};
use crate::layered::{absolute, default_seed, required, resolve};

/// Keeps the test split's generator stream apart from the training split's.
const TEST_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenDataSettings {
    /// `moons` or `blobs`.
    pub kind: String,
    pub n_train: usize,
    pub n_test: usize,
    /// Blob centre distance.
    pub separation: f64,
    /// Blob standard deviation.
    pub spread: f64,
    /// Moons coordinate noise.
    pub jitter: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct GenDataArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub spread: Option<f64>,
    #[arg(long)]
    pub jitter: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}

impl GenDataArgs {
    pub fn resolve(&self) -> CliResult<GenDataSettings> {
        let defaults = GenDataSettings {
            kind: "moons".into(),
            n_train: 500,
            n_test: 200,
            separation: 4.0,
            spread: 0.6,
            jitter: 0.15,
            seed: default_seed()?,
            out: None,
            threads: None,
        };
        let mut s = resolve(&defaults, self.config.as_deref(), self)?;
        s.out = Some(absolute(required(&s.out, "out")?)?);
        if !matches!(s.kind.as_str(), "moons" | "blobs") {
            return Err(CliError::config(format!("unknown dataset kind {:?}; expected moons or blobs", s.kind)));
        }
        if s.n_train == 0 || s.n_test == 0 {
            return Err(CliError::config("--n-train and --n-test must be >= 1"));
        }
        Ok(s)
    }
}

impl GenDataSettings {
    fn generate(&self, n: usize, seed: u64) -> CliResult<Dataset> {
        let data = match self.kind.as_str() {
            "blobs" => two_blobs(n, self.separation, self.spread, seed),
            _ => two_moons(n, self.jitter, seed),
        };
        data.map_err(|e| CliError::config(e.to_string()))
    }
}

impl Command for GenDataSettings {
    const NAME: &'static str = "gen-data";

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
        Vec::new()
    }

    fn execute(&self, out: &Path) -> CliResult<(Value, Vec<String>)> {
        let train = self.generate(self.n_train, self.seed)?;
        let test = self.generate(self.n_test, self.seed ^ TEST_SEED_SALT)?;
        let mut outputs = Vec::new();
        write_file(out, "train.csv", &train.to_csv(), &mut outputs)?;
        write_file(out, "test.csv", &test.to_csv(), &mut outputs)?;
        Ok((json!({ "kind": self.kind, "n_train": train.len(), "n_test": test.len() }), outputs))
    }
}
