//! Certificate CSV, aggregate JSON and comparison tables.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CertReport, CertRow};
use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::numerics::Probability;
use crate::smoothing::{Certificate, Smoothing, Status};

pub const CERT_CSV_HEADER: &str = "input_id,label_true,status,label_pred,p_lower,r_l1,r_l2,n,alpha,spec_kind,sigma_n,sigma_u";

impl CertReport {
    /// One line per row; `label_pred` is empty for abstentions.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{CERT_CSV_HEADER}\n");
        for r in &self.rows {
            let c = &r.cert;
            let (status, pred) = match c.status {
                Status::Certified { label } => ("certified", label.to_string()),
                Status::Abstained => ("abstained", String::new()),
            };
            let (sn, su) = c.smoothing.sigmas();
            let _ = writeln!(
                out,
                "{},{},{status},{pred},{},{},{},{},{},{},{sn},{su}",
                r.input_id,
                r.label_true,
                c.p_lower,
                c.r_l1,
                c.r_l2,
                c.n,
                c.alpha,
                c.smoothing.kind_str()
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == CERT_CSV_HEADER => {}
            _ => return Err(Error::Parse(format!("certificate CSV must start with {CERT_CSV_HEADER}"))),
        }
        let rows = lines.map(|(i, l)| parse_row(l).map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))).collect::<Result<Vec<_>>>()?;
        CertReport::from_rows(rows)
    }

    pub fn aggregates_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.aggregates)?)
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::write(dir.join(format!("{stem}.csv")), self.to_csv())?;
        std::fs::write(dir.join(format!("{stem}.json")), self.aggregates_json()? + "\n")?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        CertReport::from_csv(&std::fs::read_to_string(path)?)
    }
}

fn parse_row(line: &str) -> std::result::Result<CertRow, String> {
    let f: Vec<&str> = line.split(',').map(str::trim).collect();
    if f.len() != 12 {
        return Err(format!("expected 12 fields, got {}", f.len()));
    }
    fn num<V: std::str::FromStr>(s: &str, what: &str) -> std::result::Result<V, String> {
        s.parse().map_err(|_| format!("bad {what} {s:?}"))
    }
    let status = match f[2] {
        "certified" => Status::Certified { label: num(f[3], "label_pred")? },
        "abstained" => Status::Abstained,
        other => return Err(format!("bad status {other:?}")),
    };
    let (sn, su): (f64, f64) = (num(f[10], "sigma_n")?, num(f[11], "sigma_u")?);
    let spec_err = |e: Error| e.to_string();
    let smoothing = match f[9] {
        "gaussian" => Smoothing::Single(NoiseSpec::gaussian(sn).map_err(spec_err)?),
        "uniform" => Smoothing::Single(NoiseSpec::uniform(su).map_err(spec_err)?),
        "normal_uniform" => Smoothing::Single(NoiseSpec::normal_uniform(sn, su).map_err(spec_err)?),
        "hybrid" => Smoothing::Hybrid {
            gaussian: NoiseSpec::gaussian(sn).map_err(spec_err)?,
            uniform: NoiseSpec::uniform(su).map_err(spec_err)?,
        },
        other => return Err(format!("bad spec_kind {other:?}")),
    };
    let input_id = num(f[0], "input_id")?;
    let cert = Certificate {
        input_id: Some(input_id),
        status,
        r_l1: num(f[5], "r_l1")?,
        r_l2: num(f[6], "r_l2")?,
        p_lower: Probability::new(num(f[4], "p_lower")?).map_err(spec_err)?,
        n: num(f[7], "n")?,
        alpha: num(f[8], "alpha")?,
        smoothing,
    };
    Ok(CertRow { input_id, label_true: num(f[1], "label_true")?, cert })
}

/// One line of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub training_scheme: String,
    pub certification_scheme: String,
    pub clean_acc: f64,
    pub acr_l1: f64,
    pub acr_l2: f64,
    pub acr_avg: f64,
}

impl ComparisonRow {
    pub fn new(training_scheme: impl Into<String>, certification_scheme: impl Into<String>, report: &CertReport) -> Self {
        let a = &report.aggregates;
        ComparisonRow {
            training_scheme: training_scheme.into(),
            certification_scheme: certification_scheme.into(),
            clean_acc: a.clean_acc.value(),
            acr_l1: a.acr_l1,
            acr_l2: a.acr_l2,
            acr_avg: a.acr_avg,
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("training_scheme,certification_scheme,clean_acc,acr_l1,acr_l2,acr_avg\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.4},{:.4},{:.4},{:.4}",
            csv_field(&r.training_scheme),
            csv_field(&r.certification_scheme),
            r.clean_acc,
            r.acr_l1,
            r.acr_l2,
            r.acr_avg
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::tests::row;
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut rows = vec![row(0, 1, Status::Certified { label: 1 }, 0.123456789, 0.5), row(1, 0, Status::Abstained, 0.0, 0.0)];
        rows[1].cert.smoothing = Smoothing::Hybrid {
            gaussian: NoiseSpec::gaussian(0.6).unwrap(),
            uniform: NoiseSpec::uniform(0.65).unwrap(),
        };
        let rep = CertReport::from_rows(rows).unwrap();
        let text = rep.to_csv();
        assert!(text.starts_with(CERT_CSV_HEADER));
        assert!(text.contains("\n1,0,abstained,,0.9,0,0,100,0.001,hybrid,0.6,0.65\n"));
        assert_eq!(CertReport::from_csv(&text).unwrap(), rep);
        assert!(CertReport::from_csv("input_id\n").is_err());
        assert!(CertReport::from_csv(&format!("{CERT_CSV_HEADER}\n0,1,maybe,,0.9,0,0,1,0.1,gaussian,1,0\n")).is_err());
    }

    #[test]
    fn comparison_table_quotes_labels() {
        let rep = CertReport::from_rows(vec![row(0, 0, Status::Certified { label: 0 }, 0.823, 0.769)]).unwrap();
        let r = ComparisonRow::new("NU(σ_N=0.50,σ_U=0.433)+R_S(β=3)", "Gaussian(σ=0.60)+Uniform(σ=0.65)", &rep);
        let csv = comparison_csv(&[r]);
        assert_eq!(
            csv.lines().nth(1).unwrap(),
            "\"NU(σ_N=0.50,σ_U=0.433)+R_S(β=3)\",Gaussian(σ=0.60)+Uniform(σ=0.65),1.0000,0.8230,0.7690,0.7960"
        );
    }
}
