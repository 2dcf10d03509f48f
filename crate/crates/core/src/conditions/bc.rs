use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Budget, Condition, ConditionReport, Witness};
use crate::critical::{classify_critical_points, ClassifyOptions, CriticalSet};
use crate::error::{DynError, Result};
use crate::geometry::JordanDisk;
use crate::poly::Polynomial;
use crate::pullback::{dist_to_points, EnumerateOptions, KeepDisks, PullbackEngine, PullbackTree, DEGENERACY_SHRINK};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BcOptions {
    pub r: f64,
    pub delta0: f64,
    /// Number of dyadic levels `δ = 2^{-k} δ0`, `k = 0..delta_levels`.
    pub delta_levels: usize,
    pub depth: usize,
    pub branch_cap: usize,
}

impl Default for BcOptions {
    fn default() -> Self {
        Self {
            r: 2.0,
            delta0: 0.05,
            delta_levels: 4,
            depth: 12,
            branch_cap: 100_000,
        }
    }
}

pub fn check_bc(
    poly: &Polynomial,
    r: f64,
    delta0: f64,
    delta_levels: usize,
    depth: usize,
    branch_cap: usize,
) -> Result<ConditionReport> {
    let engine = PullbackEngine::new(poly)?;
    let set = classify_critical_points(poly, &ClassifyOptions::default())?;
    check_bc_with(
        &engine,
        &set,
        &BcOptions {
            r,
            delta0,
            delta_levels,
            depth,
            branch_cap,
        },
    )
}

/// Pulls back `B̃(c, radius)` to the depth budget, shrinking the radius once
/// when some boundary on the way meets a critical value.
fn enumerate_tilde(
    engine: &PullbackEngine,
    c: Complex64,
    radius: f64,
    depth: usize,
    branch_cap: usize,
) -> Result<(PullbackTree, bool)> {
    let opts = EnumerateOptions {
        depth,
        branch_cap,
        keep: KeepDisks::None,
    };
    let run = |rad: f64| -> Result<PullbackTree> {
        let target = engine.tilde_ball(c, rad)?.component;
        engine.enumerate(&target, &opts)
    };
    match run(radius) {
        Err(DynError::NearCriticalValue { .. }) => Ok((run(radius * DEGENERACY_SHRINK)?, true)),
        other => other.map(|t| (t, false)),
    }
}

pub fn check_bc_with(engine: &PullbackEngine, set: &CriticalSet, opts: &BcOptions) -> Result<ConditionReport> {
    if !(opts.r > 1.0) || !(opts.delta0 > 0.0) {
        return Err(DynError::Precondition("BC needs r > 1 and delta0 > 0".into()));
    }
    let budget = Budget {
        depth: Some(opts.depth),
        branch_cap: Some(opts.branch_cap),
        delta_levels: Some(opts.delta_levels),
        classification: Some(set.budget),
        ..Budget::default()
    };
    let mut report = ConditionReport::new(
        Condition::BackwardContraction,
        &[("r", opts.r), ("delta0", opts.delta0)],
        budget,
    );
    report.critical_points = set.julia_critical.iter().map(|c| c.point).collect();
    if set.julia_critical.is_empty() {
        report.notes.push("Crit' is empty: vacuous pass".into());
        return Ok(report.finish());
    }

    let tasks: Vec<(Complex64, f64)> = set
        .julia_critical
        .iter()
        .flat_map(|c| (0..opts.delta_levels).map(move |k| (c.point, opts.delta0 / 2f64.powi(k as i32))))
        .collect();
    let results: Vec<(PullbackTree, bool)> = tasks
        .par_iter()
        .map(|&(c, delta)| enumerate_tilde(engine, c, opts.r * delta, opts.depth, opts.branch_cap))
        .collect::<Result<_>>()?;

    for (&(c, delta), (tree, shrunk)) in tasks.iter().zip(&results) {
        if *shrunk {
            report.notes.push(format!(
                "c = {c}, delta = {delta:e}: a boundary met a critical value, radius shrunk by 1e-6"
            ));
        }
        report.complete &= tree.complete;
        for node in &tree.nodes {
            if node.dist_to_critical_values > delta {
                continue;
            }
            report.merge_margin(node.diameter / delta, true);
            if node.diameter >= delta {
                let mut w = Witness::bare(c, node.depth);
                w.delta = Some(delta);
                w.point = Some(node.basepoint);
                w.diameter = Some(node.diameter);
                w.dist_to_critical_values = Some(node.dist_to_critical_values);
                w.total_degree = Some(node.total_degree);
                report.witnesses.push(w);
            }
        }
    }
    Ok(report.finish())
}

/// Re-derives a BC witness found at some `r` for the larger constant
/// `r_prime`, by pulling `B̃(c, r'δ)` back along the forward orbit of the
/// witness basepoint. Returns the enlarged component, which must again be a
/// witness.
pub fn confirm_bc_witness(engine: &PullbackEngine, witness: &Witness, r_prime: f64) -> Result<(JordanDisk, bool)> {
    let (Some(delta), Some(point)) = (witness.delta, witness.point) else {
        return Err(DynError::Precondition("not a BC witness".into()));
    };
    let mut forward = vec![point];
    for _ in 0..witness.depth {
        let z = engine.poly().eval(*forward.last().unwrap());
        forward.push(z);
    }
    forward.reverse();
    let target = engine.tilde_ball(witness.critical_point, r_prime * delta)?.component;
    let chain = engine.chain(&target, &forward)?;
    let last = chain
        .steps
        .last()
        .ok_or_else(|| DynError::Precondition("witness at depth 0".into()))?;
    let dist = dist_to_points(&last.component, engine.critical_values());
    Ok((last.component.clone(), dist <= delta && last.diameter >= delta))
}

pub fn check_univalent_pullback(poly: &Polynomial, delta: f64, delta_prime: f64, depth: usize) -> Result<ConditionReport> {
    let engine = PullbackEngine::new(poly)?;
    let set = classify_critical_points(poly, &ClassifyOptions::default())?;
    check_univalent_pullback_with(&engine, &set, delta, delta_prime, depth, 100_000)
}

/// Enumerates pullbacks of `B̃(c, δ')`. A component whose basepoint orbit
/// stays out of `∪ B̃(c', δ)` at the intermediate times but which maps with
/// degree above one is a violation.
pub fn check_univalent_pullback_with(
    engine: &PullbackEngine,
    set: &CriticalSet,
    delta: f64,
    delta_prime: f64,
    depth: usize,
    branch_cap: usize,
) -> Result<ConditionReport> {
    if !(delta > 0.0) || !(delta_prime > delta) {
        return Err(DynError::Precondition(format!(
            "univalent pullback needs delta' > delta > 0, got delta = {delta}, delta' = {delta_prime}"
        )));
    }
    let budget = Budget {
        depth: Some(depth),
        branch_cap: Some(branch_cap),
        classification: Some(set.budget),
        ..Budget::default()
    };
    let mut report = ConditionReport::new(
        Condition::UnivalentPullback,
        &[("delta", delta), ("delta_prime", delta_prime)],
        budget,
    );
    report.critical_points = set.julia_critical.iter().map(|c| c.point).collect();
    if set.julia_critical.is_empty() {
        report.notes.push("Crit' is empty: vacuous pass".into());
        return Ok(report.finish());
    }
    let small: Vec<JordanDisk> = set
        .julia_critical
        .iter()
        .map(|c| engine.tilde_ball(c.point, delta).map(|p| p.component))
        .collect::<Result<_>>()?;
    let in_small = |z: Complex64| small.iter().any(|d| d.contains(z));

    let trees: Vec<(PullbackTree, bool)> = set
        .julia_critical
        .par_iter()
        .map(|c| enumerate_tilde(engine, c.point, delta_prime, depth, branch_cap))
        .collect::<Result<_>>()?;

    for (cp, (tree, shrunk)) in set.julia_critical.iter().zip(&trees) {
        if *shrunk {
            report.notes.push(format!("c = {}: radius shrunk by 1e-6 after a critical-value hit", cp.point));
        }
        report.complete &= tree.complete;
        let mut avoids = vec![false; tree.nodes.len()];
        for (i, node) in tree.nodes.iter().enumerate() {
            avoids[i] = match node.parent {
                None => true,
                Some(p) => avoids[p] && !in_small(tree.nodes[p].basepoint),
            };
            if avoids[i] && node.total_degree > 1 {
                let mut w = Witness::bare(cp.point, node.depth);
                w.delta = Some(delta_prime);
                w.point = Some(node.basepoint);
                w.diameter = Some(node.diameter);
                w.total_degree = Some(node.total_degree);
                report.witnesses.push(w);
            }
        }
    }
    Ok(report.finish())
}
