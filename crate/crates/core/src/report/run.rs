use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{CheckKind, ExperimentConfig};
use super::format::{csv_optional, svg_plot, to_json, Series, PALETTE};
use crate::conditions::{
    check_bc_with, check_ld_with, check_univalent_pullback_with, estimate_kappa0, return_decomposition, BcOptions,
    ConditionReport, ScaleStructure, SCHEMA_VERSION,
};
use crate::critical::{classify_critical_points, ClassifyOptions, CriticalSet};
use crate::error::{DynError, Result};
use crate::geometry::JordanDisk;
use crate::interval::{
    check_bc_interval_with, check_ld_interval_with, interval_pullback_capped, real_schwarz_probe_with,
    CriticalSelection, IntervalBcOptions, IntervalMap, SchwarzOptions,
};
use crate::orbit::orbit;
use crate::poly::Polynomial;
use crate::pullback::{EnumerateOptions, KeepDisks, PullbackEngine};
use crate::puzzle::{build_puzzle, markov_audit, trace_external_ray, Angle, Puzzle};

/// The headline numbers of one check, as they appear in the CSV summary.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub verdict: Option<String>,
    pub margin: Option<f64>,
    pub witnesses: Option<usize>,
    pub complete: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutput {
    pub check: CheckKind,
    /// `None` when the check ran; otherwise the engine error, verbatim.
    pub error: Option<String>,
    pub summary: CheckSummary,
    pub result: Value,
    #[serde(skip)]
    pub svg: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub outputs: Vec<CheckOutput>,
}

#[derive(Serialize)]
struct Envelope<'a> {
    schema_version: u32,
    name: &'a str,
    check: CheckKind,
    config_hash: &'a str,
    config: &'a ExperimentConfig,
    error: &'a Option<String>,
    summary: &'a CheckSummary,
    result: &'a Value,
}

impl ReportBundle {
    pub fn errored(&self) -> bool {
        self.outputs.iter().any(|o| o.error.is_some())
    }

    pub fn output(&self, check: CheckKind) -> Option<&CheckOutput> {
        self.outputs.iter().find(|o| o.check == check)
    }

    /// The JSON report of one check, with the config and its hash embedded.
    pub fn json(&self, output: &CheckOutput) -> Result<String> {
        to_json(&Envelope {
            schema_version: SCHEMA_VERSION,
            name: &self.config.name,
            check: output.check,
            config_hash: &self.config_hash,
            config: &self.config,
            error: &output.error,
            summary: &output.summary,
            result: &output.result,
        })
    }

    pub fn csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| DynError::Io(e.to_string());
        w.write_record(["name", "check", "status", "verdict", "margin", "witnesses", "complete", "error"])
            .map_err(io)?;
        for o in &self.outputs {
            let s = &o.summary;
            w.write_record([
                self.config.name.as_str(),
                o.check.name(),
                if o.error.is_some() { "error" } else { "ok" },
                s.verdict.as_deref().unwrap_or(""),
                &csv_optional(s.margin),
                &s.witnesses.map(|n| n.to_string()).unwrap_or_default(),
                &s.complete.map(|b| b.to_string()).unwrap_or_default(),
                o.error.as_deref().unwrap_or(""),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| DynError::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    /// File name and contents of every artifact: one JSON per check, the
    /// CSV summary and whatever plots the checks produced.
    pub fn files(&self) -> Result<Vec<(String, String)>> {
        let mut files = Vec::new();
        for o in &self.outputs {
            files.push((format!("{}-{}.json", self.config.name, o.check.name()), self.json(o)?));
            if let Some(svg) = &o.svg {
                files.push((format!("{}-{}.svg", self.config.name, o.check.name()), svg.clone()));
            }
        }
        files.push((format!("{}-summary.csv", self.config.name), self.csv()?));
        Ok(files)
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, contents) in self.files()? {
            std::fs::write(dir.join(&name), contents)?;
            written.push(name);
        }
        Ok(written)
    }
}

/// Runs `job` on a pool of `workers` threads, or on the global pool when
/// `workers` is 0.
pub fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| DynError::Config(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(job))
}

/// Validates the config and runs its checks in order. Engine failures are
/// recorded per check; only an invalid config is an error here.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ReportBundle> {
    cfg.validate()?;
    with_workers(cfg.workers, || run_checks(cfg))
}

pub(crate) fn run_checks(cfg: &ExperimentConfig) -> ReportBundle {
    let hash = cfg.hash();
    let outputs = cfg
        .checks
        .iter()
        .map(|&check| {
            let outcome = if cfg.family.is_real() {
                cfg.interval_map().and_then(|map| real_check(cfg, &map, check, &hash))
            } else {
                cfg.polynomial().and_then(|poly| complex_check(cfg, &poly, check, &hash))
            };
            match outcome {
                Ok((result, summary, svg)) => CheckOutput {
                    check,
                    error: None,
                    summary,
                    result,
                    svg,
                },
                Err(e) => CheckOutput {
                    check,
                    error: Some(e.to_string()),
                    summary: CheckSummary::default(),
                    result: Value::Null,
                    svg: None,
                },
            }
        })
        .collect();
    ReportBundle {
        config: cfg.clone(),
        config_hash: hash,
        outputs,
    }
}

type Outcome = (Value, CheckSummary, Option<String>);

fn value<T: Serialize>(x: &T) -> Result<Value> {
    serde_json::to_value(x).map_err(|e| DynError::Io(format!("serializing result: {e}")))
}

fn verdict_name(report: &ConditionReport) -> String {
    match value(&report.verdict) {
        Ok(Value::String(s)) => s,
        _ => report.verdict.describe().to_string(),
    }
}

fn condition_outcome(mut report: ConditionReport, hash: &str, svg: Option<String>) -> Result<Outcome> {
    report.config_hash = Some(hash.to_string());
    let summary = CheckSummary {
        verdict: Some(verdict_name(&report)),
        margin: report.margin,
        witnesses: Some(report.witnesses.len()),
        complete: Some(report.complete),
    };
    Ok((value(&report)?, summary, svg))
}

fn pair(z: Complex64) -> (f64, f64) {
    (z.re, z.im)
}

fn witness_plot(title: &str, report: &ConditionReport, critical_values: &[Complex64]) -> String {
    let witnesses: Vec<(f64, f64)> = report.witnesses.iter().filter_map(|w| w.point.map(pair)).collect();
    let critical: Vec<(f64, f64)> = report.critical_points.iter().map(|&z| pair(z)).collect();
    let values: Vec<(f64, f64)> = critical_values.iter().map(|&z| pair(z)).collect();
    svg_plot(
        title,
        "Re",
        "Im",
        &[
            Series::points(critical, PALETTE[0]),
            Series::points(values, PALETTE[2]),
            Series::points(witnesses, PALETTE[1]),
        ],
        true,
    )
}

fn growth_plot(curves: Vec<Vec<f64>>) -> String {
    let series: Vec<Series> = curves
        .into_iter()
        .enumerate()
        .map(|(i, logs)| {
            let pts = logs
                .iter()
                .enumerate()
                .map(|(n, l)| (n as f64, l / std::f64::consts::LN_10))
                .collect();
            Series::line(pts, PALETTE[i % PALETTE.len()])
        })
        .collect();
    svg_plot("derivative growth along critical orbits", "n", "log10 |Df^n(f(c))|", &series, false)
}

fn classified(cfg: &ExperimentConfig, poly: &Polynomial, budget: usize) -> Result<CriticalSet> {
    classify_critical_points(
        poly,
        &ClassifyOptions {
            budget: cfg.classify_budget.max(budget),
            ..ClassifyOptions::default()
        },
    )
}

fn puzzle_for(cfg: &ExperimentConfig, poly: &Polynomial) -> Result<Puzzle> {
    if cfg.puzzle_angles.is_empty() {
        return Err(DynError::Config("puzzle_angles is empty".into()));
    }
    let angles: Vec<Angle> = cfg.puzzle_angles.iter().map(|a| a.parse()).collect::<Result<_>>()?;
    build_puzzle(poly, &angles, cfg.puzzle_epsilon, cfg.puzzle_depth)
}

fn boundaries_plot(title: &str, disks: &[&JordanDisk]) -> String {
    let series: Vec<Series> = disks
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let mut pts: Vec<(f64, f64)> = d.boundary().iter().map(|&z| pair(z)).collect();
            if let Some(&first) = pts.first() {
                pts.push(first);
            }
            Series::line(pts, PALETTE[i % PALETTE.len()])
        })
        .collect();
    svg_plot(title, "Re", "Im", &series, true)
}

fn complex_check(cfg: &ExperimentConfig, poly: &Polynomial, check: CheckKind, hash: &str) -> Result<Outcome> {
    let engine = || PullbackEngine::new(poly);
    match check {
        CheckKind::Orbit => {
            let start = Complex64::new(cfg.orbit_start_re, cfg.orbit_start_im);
            let rec = orbit(poly, start, cfg.orbit_iterations, poly.escape_radius());
            let summary = CheckSummary {
                verdict: Some(if rec.escaped_at.is_some() { "escapes" } else { "bounded" }.into()),
                ..CheckSummary::default()
            };
            let pts = rec.points.iter().map(|&z| pair(z)).collect();
            let svg = svg_plot("forward orbit", "Re", "Im", &[Series::points(pts, PALETTE[0])], true);
            Ok((value(&rec)?, summary, Some(svg)))
        }
        CheckKind::Classify => {
            let set = classified(cfg, poly, 0)?;
            let summary = CheckSummary {
                witnesses: Some(set.julia_critical.len()),
                ..CheckSummary::default()
            };
            Ok((value(&set)?, summary, None))
        }
        CheckKind::Pullback => {
            let disk = JordanDisk::circle(Complex64::new(cfg.pullback_center_re, cfg.pullback_center_im), cfg.pullback_radius)?;
            let tree = engine()?.enumerate(
                &disk,
                &EnumerateOptions {
                    depth: cfg.pullback_depth,
                    branch_cap: cfg.branch_cap,
                    keep: KeepDisks::Deepest,
                },
            )?;
            let summary = CheckSummary {
                complete: Some(tree.complete),
                ..CheckSummary::default()
            };
            let mut disks: Vec<&JordanDisk> = vec![&disk];
            disks.extend(tree.nodes.iter().filter_map(|n| n.disk.as_ref()));
            let svg = boundaries_plot("pullback components", &disks);
            Ok((value(&tree)?, summary, Some(svg)))
        }
        CheckKind::Bc => {
            let set = classified(cfg, poly, 0)?;
            let report = check_bc_with(
                &engine()?,
                &set,
                &BcOptions {
                    r: cfg.bc_r,
                    delta0: cfg.bc_delta0,
                    delta_levels: cfg.bc_levels,
                    depth: cfg.bc_depth,
                    branch_cap: cfg.branch_cap,
                },
            )?;
            let svg = witness_plot("BC witnesses", &report, &set.critical_values);
            condition_outcome(report, hash, Some(svg))
        }
        CheckKind::Ld => {
            let set = classified(cfg, poly, cfg.ld_iterations)?;
            let report = check_ld_with(poly, &set, cfg.ld_k, cfg.ld_radius, cfg.ld_iterations)?;
            let curves = set
                .julia_critical
                .iter()
                .map(|c| orbit(poly, poly.eval(c.point), cfg.ld_iterations, poly.escape_radius()).log_derivatives)
                .collect();
            condition_outcome(report, hash, Some(growth_plot(curves)))
        }
        CheckKind::Upb => {
            let set = classified(cfg, poly, 0)?;
            let report = check_univalent_pullback_with(
                &engine()?,
                &set,
                cfg.upb_delta,
                cfg.upb_delta_prime,
                cfg.upb_depth,
                cfg.branch_cap,
            )?;
            let svg = witness_plot("univalent pullback witnesses", &report, &set.critical_values);
            condition_outcome(report, hash, Some(svg))
        }
        CheckKind::Kappa0 | CheckKind::Decompose => {
            let set = classified(cfg, poly, 0)?;
            if set.julia_critical.is_empty() {
                return Err(DynError::Precondition("no critical points in the Julia set".into()));
            }
            let engine = engine()?;
            let scale = ScaleStructure::build(&engine, &set.julia_critical, cfg.kappa0_delta0, cfg.kappa0_levels)?;
            if check == CheckKind::Kappa0 {
                let estimate = estimate_kappa0(&engine, &scale, cfg.kappa0_samples, cfg.seed)?;
                let summary = CheckSummary {
                    margin: Some(estimate.kappa0),
                    ..CheckSummary::default()
                };
                Ok((json!({ "nested": scale.nested, "estimate": value(&estimate)? }), summary, None))
            } else {
                let blocks = set
                    .julia_critical
                    .iter()
                    .map(|c| return_decomposition(&engine, c.point, cfg.decompose_s, &scale))
                    .collect::<Result<Vec<_>>>()?;
                let worst = blocks.iter().map(|b| b.product_relative_error).fold(0.0, f64::max);
                let summary = CheckSummary {
                    margin: Some(worst),
                    complete: Some(blocks.iter().all(|b| !b.capped)),
                    ..CheckSummary::default()
                };
                Ok((value(&blocks)?, summary, None))
            }
        }
        CheckKind::Ray => {
            let angle: Angle = cfg.ray_angle.parse()?;
            let ray = trace_external_ray(poly, angle, cfg.ray_g_start, cfg.ray_g_min)?;
            let summary = CheckSummary {
                verdict: Some(if ray.landed { "landed" } else { "not-landed" }.into()),
                margin: Some(ray.landing_spread),
                ..CheckSummary::default()
            };
            let pts = ray.points.iter().map(|&z| pair(z)).collect();
            let mut series = vec![Series::line(pts, PALETTE[0])];
            if let Some(z) = ray.landing {
                series.push(Series::points(vec![pair(z)], PALETTE[1]));
            }
            let svg = svg_plot(&format!("external ray {angle}"), "Re", "Im", &series, true);
            Ok((value(&ray)?, summary, Some(svg)))
        }
        CheckKind::Puzzle => {
            let puzzle = puzzle_for(cfg, poly)?;
            let audit = markov_audit(&puzzle);
            let markov = audit.iter().all(|r| r.unique && r.matches_symbolic);
            let worst = audit.iter().map(|r| r.hausdorff).fold(0.0, f64::max);
            let summary = CheckSummary {
                verdict: Some(if markov { "markov" } else { "not-markov" }.into()),
                margin: Some(worst),
                complete: Some(puzzle.depth_built() == puzzle.depth_requested),
                ..CheckSummary::default()
            };
            let deepest: Vec<&JordanDisk> = puzzle.levels.last().into_iter().flatten().map(|p| &p.disk).collect();
            let svg = boundaries_plot(&format!("puzzle pieces of depth {}", puzzle.depth_built()), &deepest);
            Ok((json!({ "puzzle": value(&puzzle)?, "markov": value(&audit)? }), summary, Some(svg)))
        }
        CheckKind::Nice => {
            let puzzle = puzzle_for(cfg, poly)?;
            let depth = puzzle.depth_built();
            let reports = (0..puzzle.levels[depth].len())
                .map(|i| puzzle.nice_check_piece(depth, i, cfg.nice_horizon))
                .collect::<Result<Vec<_>>>()?;
            let bad = reports.iter().filter(|r| !r.nice).count();
            let summary = CheckSummary {
                verdict: Some(if bad == 0 { "nice" } else { "not-nice" }.into()),
                witnesses: Some(bad),
                ..CheckSummary::default()
            };
            Ok((json!({ "depth": depth, "pieces": value(&reports)? }), summary, None))
        }
        CheckKind::Schwarz => Err(DynError::Config("schwarz applies to real families".into())),
    }
}

fn real_check(cfg: &ExperimentConfig, map: &IntervalMap, check: CheckKind, hash: &str) -> Result<Outcome> {
    let selection = if cfg.exclude_attracted {
        CriticalSelection::NotAttracted
    } else {
        CriticalSelection::All
    };
    match check {
        CheckKind::Orbit => {
            let mut points = vec![cfg.orbit_start_re];
            let mut logs = vec![0.0];
            for _ in 0..cfg.orbit_iterations {
                let (y, dy) = map.evaluate(*points.last().unwrap());
                logs.push(logs.last().unwrap() + dy.abs().ln());
                points.push(y);
            }
            let pts = points.iter().enumerate().map(|(n, &x)| (n as f64, x)).collect();
            let svg = svg_plot("forward orbit", "n", "x", &[Series::points(pts, PALETTE[0])], false);
            Ok((
                json!({ "start": cfg.orbit_start_re, "points": points, "log_derivatives": logs }),
                CheckSummary::default(),
                Some(svg),
            ))
        }
        CheckKind::Pullback => {
            let [a, b] = map.domain();
            let target = [
                (cfg.pullback_center_re - cfg.pullback_radius).max(a),
                (cfg.pullback_center_re + cfg.pullback_radius).min(b),
            ];
            let tree = interval_pullback_capped(map, target, cfg.pullback_depth, cfg.branch_cap)?;
            let components: Vec<Value> = (0..=tree.depth)
                .map(|n| value(&tree.components(n)))
                .collect::<Result<_>>()?;
            let summary = CheckSummary {
                complete: Some(tree.complete),
                margin: Some(tree.forward_audit(map)),
                ..CheckSummary::default()
            };
            Ok((json!({ "tree": value(&tree)?, "components": components }), summary, None))
        }
        CheckKind::Bc => {
            let report = check_bc_interval_with(
                map,
                &IntervalBcOptions {
                    r: cfg.bc_r,
                    delta0: cfg.bc_delta0,
                    delta_levels: cfg.bc_levels,
                    depth: cfg.bc_depth,
                    node_cap: cfg.branch_cap.max(IntervalBcOptions::default().node_cap),
                    critical: selection,
                },
            )?;
            let values: Vec<Complex64> = map.critical_values().into_iter().map(|v| Complex64::new(v, 0.0)).collect();
            let svg = witness_plot("BC witnesses", &report, &values);
            condition_outcome(report, hash, Some(svg))
        }
        CheckKind::Ld => {
            let report = check_ld_interval_with(map, cfg.ld_k, cfg.ld_radius, cfg.ld_iterations, selection)?;
            let curves = report
                .critical_points
                .iter()
                .map(|c| {
                    let mut x = map.eval(c.re);
                    let mut logs = vec![0.0];
                    for _ in 0..cfg.ld_iterations {
                        let (y, dy) = map.evaluate(x);
                        logs.push(logs.last().unwrap() + dy.abs().ln());
                        x = y;
                    }
                    logs
                })
                .collect();
            condition_outcome(report, hash, Some(growth_plot(curves)))
        }
        CheckKind::Schwarz => {
            let probe = real_schwarz_probe_with(
                map,
                &SchwarzOptions {
                    eta: cfg.schwarz_eta,
                    trials: cfg.schwarz_trials,
                    max_depth: cfg.schwarz_depth,
                    seed: cfg.seed,
                },
            )?;
            let summary = CheckSummary {
                margin: probe.min,
                witnesses: Some(probe.ratios.len()),
                ..CheckSummary::default()
            };
            let pts = probe.depths.iter().zip(&probe.ratios).map(|(&n, &r)| (n as f64, r)).collect();
            let svg = svg_plot("real Schwarz ratios", "depth", "|Df^n(x)| |U| / |V|", &[Series::points(pts, PALETTE[0])], false);
            Ok((value(&probe)?, summary, Some(svg)))
        }
        other => Err(DynError::Config(format!("check {} needs a complex family", other.name()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::Family;

    #[test]
    fn chebyshev_ld_bundle() {
        let cfg = ExperimentConfig {
            c_re: -2.0,
            checks: vec![CheckKind::Ld],
            ..ExperimentConfig::default()
        };
        let bundle = run_experiment(&cfg).unwrap();
        assert_eq!(bundle.outputs.len(), 1);
        let out = &bundle.outputs[0];
        assert!(out.error.is_none());
        assert_eq!(out.summary.verdict.as_deref(), Some("no-violation-within-budget"));
        let json = bundle.json(out).unwrap();
        assert!(json.contains(&bundle.config_hash));
        assert!(json.contains("\"budget\""));
        assert!(bundle.files().unwrap().iter().any(|(n, _)| n.ends_with(".svg")));
    }

    #[test]
    fn empty_check_list_gives_empty_bundle() {
        let bundle = run_experiment(&ExperimentConfig::default()).unwrap();
        assert!(bundle.outputs.is_empty() && !bundle.errored());
        assert_eq!(bundle.files().unwrap().len(), 1);
    }

    #[test]
    fn engine_errors_are_recorded_verbatim() {
        let cfg = ExperimentConfig {
            family: Family::Logistic,
            a: 4.5,
            checks: vec![CheckKind::Ld],
            ..ExperimentConfig::default()
        };
        let bundle = run_experiment(&cfg).unwrap();
        assert!(bundle.errored());
        let expected = IntervalMap::logistic(4.5).unwrap_err().to_string();
        assert_eq!(bundle.outputs[0].error.as_deref(), Some(expected.as_str()));
        assert!(bundle.csv().unwrap().contains("error"));
    }

    #[test]
    fn written_files_match_the_rendered_ones() {
        let cfg = ExperimentConfig {
            name: "cheb".into(),
            c_re: -2.0,
            checks: vec![CheckKind::Orbit, CheckKind::Ld],
            ..ExperimentConfig::default()
        };
        let bundle = run_experiment(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let written = bundle.write(&dir.path().join("out")).unwrap();
        assert!(written.contains(&"cheb-summary.csv".to_string()));
        for (name, contents) in bundle.files().unwrap() {
            assert_eq!(std::fs::read_to_string(dir.path().join("out").join(&name)).unwrap(), contents);
        }
    }
}
