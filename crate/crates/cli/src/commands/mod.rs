pub mod certify;
pub mod gen_data;
pub mod plot;
pub mod sweep;
pub mod train;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult, OrExit};
use crate::manifest::RunManifest;

/// A command whose resolved settings fully determine its outputs.
pub trait Command: Serialize + DeserializeOwned + Sync {
    const NAME: &'static str;

    fn out_dir(&self) -> CliResult<&Path>;
    fn set_out_dir(&mut self, dir: PathBuf);
    fn seed(&self) -> u64;
    fn threads(&self) -> Option<usize>;
    fn inputs(&self) -> Vec<PathBuf>;

    /// Writes outputs into `out`; returns a summary and the file names.
    fn execute(&self, out: &Path) -> CliResult<(Value, Vec<String>)>;

    /// A non-fatal failure reported after outputs are written.
    fn failure(_summary: &Value) -> Option<CliError> {
        None
    }
}

pub struct Outcome {
    pub summary: Value,
    pub failure: Option<CliError>,
}

/// Runs `cmd` on a pool of the requested size and writes its manifest.
pub fn run<C: Command>(cmd: &C) -> CliResult<Outcome> {
    let out = cmd.out_dir()?.to_path_buf();
    std::fs::create_dir_all(&out).map_err(|e| CliError::from(e).context(format!("creating {}", out.display())))?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cmd.threads() {
        if n == 0 {
            return Err(CliError::config("--threads must be >= 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().or_config("building thread pool")?;
    let start = Instant::now();
    let (mut summary, outputs) = pool.install(|| cmd.execute(&out))?;
    let manifest = RunManifest {
        command: C::NAME.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cmd.seed(),
        config: serde_json::to_value(cmd).or_config("serializing settings")?,
        inputs: cmd.inputs(),
        outputs,
        duration_secs: start.elapsed().as_secs_f64(),
    };
    let path = manifest.write(&out)?;
    if let Value::Object(m) = &mut summary {
        m.insert("command".into(), json!(C::NAME));
        m.insert("out".into(), json!(out));
        m.insert("manifest".into(), json!(path));
    }
    let failure = C::failure(&summary);
    Ok(Outcome { summary, failure })
}

/// Re-runs the command recorded in `manifest`, optionally elsewhere.
pub fn replay(manifest: &Path, out: Option<PathBuf>) -> CliResult<Outcome> {
    let m = RunManifest::load(manifest)?;
    fn again<C: Command>(config: Value, out: Option<PathBuf>) -> CliResult<Outcome> {
        let mut cmd: C = serde_json::from_value(config).or_input("manifest settings")?;
        if let Some(dir) = out {
            cmd.set_out_dir(crate::layered::absolute(&dir)?);
        }
        run(&cmd)
    }
    match m.command.as_str() {
        train::TrainSettings::NAME => again::<train::TrainSettings>(m.config, out),
        certify::CertifySettings::NAME => again::<certify::CertifySettings>(m.config, out),
        sweep::SweepCmdSettings::NAME => again::<sweep::SweepCmdSettings>(m.config, out),
        plot::PlotSettings::NAME => again::<plot::PlotSettings>(m.config, out),
        gen_data::GenDataSettings::NAME => again::<gen_data::GenDataSettings>(m.config, out),
        other => Err(CliError::input(format!("manifest names unknown command {other:?}"))),
    }
}

pub(crate) fn write_file(out: &Path, name: &str, contents: &str, outputs: &mut Vec<String>) -> CliResult<()> {
    std::fs::write(out.join(name), contents).map_err(|e| CliError::from(e).context(format!("writing {name}")))?;
    outputs.push(name.to_string());
    Ok(())
}
