use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{CheckKind, ExperimentConfig};
use super::format::{csv_number, csv_optional, to_json};
use super::run::{run_checks, with_workers, ReportBundle};
use crate::error::{DynError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub parameter: f64,
    pub ld_margin: Option<f64>,
    pub bc_margin: Option<f64>,
    pub ld_verdict: Option<String>,
    pub bc_verdict: Option<String>,
    /// First check error of the row, if any.
    pub error: Option<String>,
}

/// Rows with both verdicts, split by LD pass/fail and BC pass/fail.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Consistency {
    pub ld_pass_bc_pass: usize,
    pub ld_pass_bc_fail: usize,
    pub ld_fail_bc_pass: usize,
    pub ld_fail_bc_fail: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub parameter: String,
    pub config_hash: String,
    pub rows: Vec<ScanRow>,
    pub consistency: Consistency,
    /// On a `bc_r` axis: the largest r whose BC check passed. BC(r) only
    /// gets harder as r grows, so this is an empirical stand-in for how far
    /// the finite-depth condition reaches, not a certified constant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub largest_passing_bc_r: Option<f64>,
    #[serde(skip)]
    pub bundles: Vec<ReportBundle>,
}

const PASS: &str = "no-violation-within-budget";

impl ScanResult {
    pub fn json(&self) -> Result<String> {
        to_json(self)
    }

    pub fn csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| DynError::Io(e.to_string());
        w.write_record([self.parameter.as_str(), "ld_margin", "bc_margin", "ld_verdict", "bc_verdict", "error"])
            .map_err(io)?;
        for r in &self.rows {
            w.write_record([
                csv_number(r.parameter).as_str(),
                &csv_optional(r.ld_margin),
                &csv_optional(r.bc_margin),
                r.ld_verdict.as_deref().unwrap_or(""),
                r.bc_verdict.as_deref().unwrap_or(""),
                r.error.as_deref().unwrap_or(""),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| DynError::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    /// `scan.json`, `scan.csv`, and each row's bundle in `row-<i>/`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("scan.json"), self.json()?)?;
        std::fs::write(dir.join("scan.csv"), self.csv()?)?;
        for (i, b) in self.bundles.iter().enumerate() {
            b.write(&dir.join(format!("row-{i}")))?;
        }
        Ok(())
    }
}

/// Runs the config's checks once per value of `parameter`. Rows run in
/// parallel and are assembled in axis order; a failing row is recorded and
/// the scan goes on.
pub fn scan_family(cfg: &ExperimentConfig, parameter: &str, values: &[f64]) -> Result<ScanResult> {
    if values.is_empty() {
        return Err(DynError::Config("scan axis is empty".into()));
    }
    cfg.validate()?;
    let configs: Vec<ExperimentConfig> = values
        .iter()
        .map(|&v| cfg.with_parameter(parameter, v))
        .collect::<Result<_>>()?;
    let bundles: Vec<ReportBundle> = with_workers(cfg.workers, || configs.par_iter().map(run_checks).collect())?;
    let rows: Vec<ScanRow> = values
        .iter()
        .zip(&bundles)
        .map(|(&parameter, b)| {
            let pick = |k: CheckKind| b.output(k).filter(|o| o.error.is_none()).map(|o| o.summary.clone());
            let (ld, bc) = (pick(CheckKind::Ld), pick(CheckKind::Bc));
            ScanRow {
                parameter,
                ld_margin: ld.as_ref().and_then(|s| s.margin),
                bc_margin: bc.as_ref().and_then(|s| s.margin),
                ld_verdict: ld.and_then(|s| s.verdict),
                bc_verdict: bc.and_then(|s| s.verdict),
                error: b.outputs.iter().find_map(|o| o.error.clone()),
            }
        })
        .collect();
    let mut consistency = Consistency::default();
    for r in &rows {
        if let (Some(ld), Some(bc)) = (&r.ld_verdict, &r.bc_verdict) {
            match (ld == PASS, bc == PASS) {
                (true, true) => consistency.ld_pass_bc_pass += 1,
                (true, false) => consistency.ld_pass_bc_fail += 1,
                (false, true) => consistency.ld_fail_bc_pass += 1,
                (false, false) => consistency.ld_fail_bc_fail += 1,
            }
        }
    }
    let largest_passing_bc_r = (parameter == "bc_r")
        .then(|| {
            rows.iter()
                .filter(|r| r.bc_verdict.as_deref() == Some(PASS))
                .map(|r| r.parameter)
                .reduce(f64::max)
        })
        .flatten();
    Ok(ScanResult {
        parameter: parameter.to_string(),
        config_hash: cfg.hash(),
        rows,
        consistency,
        largest_passing_bc_r,
        bundles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::{run_experiment, Family};

    fn logistic_cfg() -> ExperimentConfig {
        ExperimentConfig {
            family: Family::Logistic,
            checks: vec![CheckKind::Ld, CheckKind::Bc],
            ld_k: 4.0,
            bc_depth: 8,
            bc_levels: 2,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn one_row_per_parameter() {
        let scan = scan_family(&logistic_cfg(), "a", &[3.6, 3.9, 4.0]).unwrap();
        assert_eq!(scan.rows.len(), 3);
        let c = scan.consistency;
        assert_eq!(c.ld_pass_bc_pass + c.ld_pass_bc_fail + c.ld_fail_bc_pass + c.ld_fail_bc_fail, 3);
        assert!(scan.csv().unwrap().lines().count() == 4);
    }

    #[test]
    fn singleton_scan_equals_a_run() {
        let cfg = logistic_cfg();
        let scan = scan_family(&cfg, "a", &[3.9]).unwrap();
        let single = run_experiment(&cfg.with_parameter("a", 3.9).unwrap()).unwrap();
        assert_eq!(scan.bundles[0], single);
    }

    #[test]
    fn failures_stay_in_their_row() {
        let scan = scan_family(&logistic_cfg(), "a", &[4.0, 5.0]).unwrap();
        assert!(scan.rows[0].error.is_none());
        assert!(scan.rows[1].error.is_some());
    }

    #[test]
    fn bc_r_axis_reports_the_largest_passing_r() {
        let cfg = ExperimentConfig {
            bc_delta0: 0.01,
            ..logistic_cfg()
        };
        let scan = scan_family(&cfg, "bc_r", &[2.0, 4.0, 16.0, 32.0]).unwrap();
        let verdicts: Vec<_> = scan.rows.iter().map(|r| r.bc_verdict.as_deref() == Some(PASS)).collect();
        assert_eq!(verdicts, [true, true, false, false]);
        assert_eq!(scan.largest_passing_bc_r, Some(4.0));
        assert!(scan_family(&logistic_cfg(), "a", &[4.0]).unwrap().largest_passing_bc_r.is_none());
    }

    #[test]
    fn csv_is_reproducible() {
        let a = scan_family(&logistic_cfg(), "a", &[3.7, 4.0]).unwrap().csv().unwrap();
        let b = scan_family(&logistic_cfg(), "a", &[3.7, 4.0]).unwrap().csv().unwrap();
        assert_eq!(a, b);
        assert!(scan_family(&logistic_cfg(), "a", &[]).is_err());
    }
}
