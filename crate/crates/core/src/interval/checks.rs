use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::map::IntervalMap;
use super::tree::{interval_pullback_capped, solve_on_branch, IntervalPullbackTree};
use crate::conditions::{Budget, Condition, ConditionReport, Witness};
use crate::critical::{classify_critical_points, ClassifyOptions};
use crate::error::{DynError, Result};

/// Which critical points the real checks run over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticalSelection {
    /// Every critical point, the usual convention for interval maps.
    #[default]
    All,
    /// Drop critical points attracted to cycles, judged by the complex
    /// classifier. Polynomial families only.
    NotAttracted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalBcOptions {
    pub r: f64,
    pub delta0: f64,
    /// `δ = 2^{-k} δ0` for `k = 0..delta_levels`.
    pub delta_levels: usize,
    pub depth: usize,
    pub node_cap: usize,
    pub critical: CriticalSelection,
}

impl Default for IntervalBcOptions {
    fn default() -> Self {
        Self {
            r: 2.0,
            delta0: 0.05,
            delta_levels: 4,
            depth: 15,
            node_cap: 2_000_000,
            critical: CriticalSelection::All,
        }
    }
}

/// Indices into `map.critical()` selected by `mode`.
pub fn selected_critical(map: &IntervalMap, mode: CriticalSelection) -> Result<Vec<usize>> {
    let all = 0..map.critical().len();
    match mode {
        CriticalSelection::All => Ok(all.collect()),
        CriticalSelection::NotAttracted => {
            let poly = map.as_polynomial().ok_or_else(|| {
                DynError::Precondition("attracted critical points can only be classified for polynomial maps".into())
            })?;
            let set = classify_critical_points(&poly, &ClassifyOptions::default())?;
            Ok(all
                .filter(|&i| {
                    let c = map.critical()[i].point;
                    set.julia_critical
                        .iter()
                        .any(|j| (j.point - Complex64::new(c, 0.0)).norm() < 1e-8 * c.abs().max(1.0))
                })
                .collect())
        }
    }
}

/// Real `B̃(c, ρ)`: the maximal interval around the critical point with index
/// `ci` on which `|f(x) - f(c)| < ρ`, clipped to the domain.
pub fn tilde_interval(map: &IntervalMap, ci: usize, rho: f64) -> Result<[f64; 2]> {
    if !(rho > 0.0) {
        return Err(DynError::Precondition(format!("radius must be positive, got {rho}")));
    }
    let value = map.eval(map.critical()[ci].point);
    let branches = map.branches();
    // the branch ending at critical point ci is branch ci
    let crossing = |j: usize, end: f64| -> Result<Option<f64>> {
        let fe = map.eval(end);
        if (fe - value).abs() < rho {
            return Ok(None);
        }
        let y = if fe > value { value + rho } else { value - rho };
        solve_on_branch(map, j, y).map(Some)
    };
    let mut left = branches[0][0];
    for j in (0..=ci).rev() {
        if let Some(x) = crossing(j, branches[j][0])? {
            left = x;
            break;
        }
    }
    let mut right = branches[branches.len() - 1][1];
    for j in ci + 1..branches.len() {
        if let Some(x) = crossing(j, branches[j][1])? {
            right = x;
            break;
        }
    }
    Ok([left, right])
}

pub fn check_bc_interval(map: &IntervalMap, r: f64, delta0: f64, grid: usize, depth: usize) -> Result<ConditionReport> {
    check_bc_interval_with(
        map,
        &IntervalBcOptions {
            r,
            delta0,
            delta_levels: grid,
            depth,
            ..IntervalBcOptions::default()
        },
    )
}

/// `BC(r)` on the line with every pullback enumerated: lengths and distances
/// to the critical values are exact up to the endpoint tolerance, so a pass
/// is definitive for the depths and radii covered.
pub fn check_bc_interval_with(map: &IntervalMap, opts: &IntervalBcOptions) -> Result<ConditionReport> {
    if !(opts.r > 1.0) || !(opts.delta0 > 0.0) {
        return Err(DynError::Precondition("BC needs r > 1 and delta0 > 0".into()));
    }
    let budget = Budget {
        depth: Some(opts.depth),
        branch_cap: Some(opts.node_cap),
        delta_levels: Some(opts.delta_levels),
        ..Budget::default()
    };
    let mut report = ConditionReport::new(
        Condition::BackwardContraction,
        &[("r", opts.r), ("delta0", opts.delta0)],
        budget,
    );
    let chosen = selected_critical(map, opts.critical)?;
    report.critical_points = chosen
        .iter()
        .map(|&i| Complex64::new(map.critical()[i].point, 0.0))
        .collect();
    if chosen.is_empty() {
        report.notes.push("no critical points selected: vacuous pass".into());
        return Ok(report.finish());
    }
    let critical_values = map.critical_values();

    let tasks: Vec<(usize, f64)> = chosen
        .iter()
        .flat_map(|&ci| (0..opts.delta_levels).map(move |k| (ci, opts.delta0 / 2f64.powi(k as i32))))
        .collect();
    let trees: Vec<IntervalPullbackTree> = tasks
        .par_iter()
        .map(|&(ci, delta)| {
            let target = tilde_interval(map, ci, opts.r * delta)?;
            interval_pullback_capped(map, target, opts.depth, opts.node_cap)
        })
        .collect::<Result<_>>()?;

    let mut collapsed = 0;
    for (&(ci, delta), tree) in tasks.iter().zip(&trees) {
        report.complete &= tree.complete;
        collapsed += tree.collapsed;
        let c = Complex64::new(map.critical()[ci].point, 0.0);
        for n in 1..=opts.depth {
            for w in tree.components(n) {
                let dist = w.distance_to(&critical_values);
                if dist > delta {
                    continue;
                }
                report.merge_margin(w.length() / delta, true);
                if w.length() >= delta {
                    let mut witness = Witness::bare(c, n);
                    witness.delta = Some(delta);
                    witness.point = Some(Complex64::new(0.5 * (w.interval[0] + w.interval[1]), 0.0));
                    witness.diameter = Some(w.length());
                    witness.dist_to_critical_values = Some(dist);
                    witness.interval = Some(w.interval);
                    report.witnesses.push(witness);
                }
            }
        }
    }
    if collapsed > 0 {
        report
            .notes
            .push(format!("{collapsed} preimage pieces narrower than 1e-13 were dropped"));
    }
    Ok(report.finish())
}

/// `LD(K)` on the line, with `V` the `radius`-neighbourhood of the selected
/// critical points: every `n <= iterations` with `f^n(c) ∈ V` must have
/// `|Df^n(f(c))| >= K`. The derivative is the exact product along the orbit.
pub fn check_ld_interval(map: &IntervalMap, k: f64, radius: f64, iterations: usize) -> Result<ConditionReport> {
    check_ld_interval_with(map, k, radius, iterations, CriticalSelection::All)
}

pub fn check_ld_interval_with(
    map: &IntervalMap,
    k: f64,
    radius: f64,
    iterations: usize,
    selection: CriticalSelection,
) -> Result<ConditionReport> {
    if iterations == 0 || !(radius > 0.0) {
        return Err(DynError::Precondition("LD needs iterations >= 1 and radius > 0".into()));
    }
    let budget = Budget {
        iterations: Some(iterations),
        ..Budget::default()
    };
    let mut report = ConditionReport::new(Condition::LargeDerivative, &[("K", k), ("radius", radius)], budget);
    let chosen = selected_critical(map, selection)?;
    let points: Vec<f64> = chosen.iter().map(|&i| map.critical()[i].point).collect();
    report.critical_points = points.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    if points.is_empty() {
        report.notes.push("no critical points selected: vacuous pass".into());
        return Ok(report.finish());
    }
    for &c in &points {
        // x = f^n(c); log_derivative = log|Df^{n-1}(f(c))| before the update
        let mut x = map.eval(c);
        let mut log_derivative = 0.0;
        for n in 1..=iterations {
            let (next, dx) = map.evaluate(x);
            if points.iter().any(|&p| (x - p).abs() < radius) {
                // |Df^n(f(c))| runs from f(c) to f^{n+1}(c) and includes Df(f^n(c))
                let derivative = (log_derivative + dx.abs().ln()).exp();
                report.merge_margin(derivative / k, false);
                if derivative < k {
                    let mut w = Witness::bare(Complex64::new(c, 0.0), n);
                    w.point = Some(Complex64::new(x, 0.0));
                    w.derivative = Some(derivative);
                    report.witnesses.push(w);
                }
            }
            log_derivative += dx.abs().ln();
            x = next;
        }
    }
    Ok(report.finish())
}
