use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use smoothcert::eval::{certified_accuracy_curve, CertReport};
use smoothcert::smoothing::Norm;

use super::{write_file, Command};
use crate::error::{CliError, CliResult};
use crate::layered::{absolute, required, resolve};
use crate::svg::{render, Series};

pub const DEFAULT_POINTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotSettings {
    /// Certificate CSVs, or directories holding `certificates.csv`.
    pub reports: Vec<PathBuf>,
    /// Legend entries; defaults to the report names.
    pub labels: Vec<String>,
    /// Radii to evaluate; empty means `points` values over `[0, max radius]`.
    pub grid: Vec<f64>,
    pub points: usize,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct PlotArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Certificate CSVs in legend order.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub reports: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub labels: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}

impl PlotArgs {
    pub fn resolve(&self) -> CliResult<PlotSettings> {
        let defaults =
            PlotSettings { reports: Vec::new(), labels: Vec::new(), grid: Vec::new(), points: DEFAULT_POINTS, out: None, threads: None };
        let mut s = resolve(&defaults, self.config.as_deref(), self)?;
        s.out = Some(absolute(required(&s.out, "out")?)?);
        s.reports = s.reports.iter().map(|p| absolute(p)).collect::<CliResult<_>>()?;
        if s.reports.is_empty() {
            return Err(CliError::config("plot needs at least one report"));
        }
        if !s.labels.is_empty() && s.labels.len() != s.reports.len() {
            return Err(CliError::config("need one label per report"));
        }
        if s.grid.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(CliError::config("--grid must be sorted ascending"));
        }
        if s.grid.is_empty() && s.points < 2 {
            return Err(CliError::config("--points must be >= 2"));
        }
        Ok(s)
    }
}

fn report_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("certificates.csv")
    } else {
        p.to_path_buf()
    }
}

fn label_for(p: &Path) -> String {
    let p = if p.file_name().is_some_and(|n| n == "certificates.csv") { p.parent().unwrap_or(p) } else { p };
    p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned())
}

impl Command for PlotSettings {
    const NAME: &'static str = "plot";

    fn out_dir(&self) -> CliResult<&Path> {
        Ok(required(&self.out, "out")?)
    }

    fn set_out_dir(&mut self, dir: PathBuf) {
        self.out = Some(dir);
    }

    fn seed(&self) -> u64 {
        0
    }

    fn threads(&self) -> Option<usize> {
        self.threads
    }

    fn inputs(&self) -> Vec<PathBuf> {
        self.reports.clone()
    }

    fn execute(&self, out: &Path) -> CliResult<(Value, Vec<String>)> {
        let mut reports = Vec::new();
        for (i, p) in self.reports.iter().enumerate() {
            let path = report_path(p);
            let rep = CertReport::load_csv(&path).map_err(|e| CliError::input(format!("reading {}: {e}", path.display())))?;
            let label = self.labels.get(i).cloned().unwrap_or_else(|| label_for(&path));
            reports.push((label, rep));
        }
        let mut outputs = Vec::new();
        let mut summary = serde_json::Map::new();
        for (norm, name) in [(Norm::L1, "l1"), (Norm::L2, "l2")] {
            let grid = if self.grid.is_empty() {
                let max = reports.iter().flat_map(|(_, r)| &r.rows).map(|r| r.cert.radius(norm)).fold(0.0, f64::max);
                (0..self.points).map(|i| max * i as f64 / (self.points - 1) as f64).collect()
            } else {
                self.grid.clone()
            };
            let mut series = Vec::new();
            for (label, rep) in &reports {
                series.push(Series { label: label.clone(), points: certified_accuracy_curve(&rep.rows, norm, &grid)? });
            }
            let title = format!("Certified accuracy vs ℓ{} radius", &name[1..]);
            let file = format!("certified_accuracy_{name}.svg");
            write_file(out, &file, &render(&title, &format!("ℓ{} radius", &name[1..]), &series), &mut outputs)?;
            summary.insert(name.into(), json!({ "file": file, "grid_points": grid.len(), "series": series.len() }));
        }
        Ok((Value::Object(summary), outputs))
    }
}
