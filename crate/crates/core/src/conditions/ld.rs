use super::{Budget, Condition, ConditionReport, Witness};
use crate::critical::{classify_critical_points, ClassifyOptions, CriticalSet};
use crate::error::{DynError, Result};
use crate::orbit::orbit;
use crate::poly::Polynomial;

/// `LD(K)` with `V` the union of the `radius`-balls about `Crit'(f)`, checked
/// for return times `1..=iterations`.
pub fn check_ld(poly: &Polynomial, k: f64, radius: f64, iterations: usize) -> Result<ConditionReport> {
    let opts = ClassifyOptions {
        budget: ClassifyOptions::default().budget.max(iterations),
        ..ClassifyOptions::default()
    };
    let set = classify_critical_points(poly, &opts)?;
    check_ld_with(poly, &set, k, radius, iterations)
}

pub fn check_ld_with(
    poly: &Polynomial,
    set: &CriticalSet,
    k: f64,
    radius: f64,
    iterations: usize,
) -> Result<ConditionReport> {
    if iterations == 0 || !(radius > 0.0) {
        return Err(DynError::Precondition("LD needs iterations >= 1 and radius > 0".into()));
    }
    let budget = Budget {
        iterations: Some(iterations),
        classification: Some(set.budget),
        ..Budget::default()
    };
    let mut report = ConditionReport::new(Condition::LargeDerivative, &[("K", k), ("radius", radius)], budget);
    report.critical_points = set.julia_critical.iter().map(|c| c.point).collect();
    if set.julia_critical.is_empty() {
        report.notes.push("Crit' is empty: vacuous pass".into());
        return Ok(report.finish());
    }

    let escape = poly.escape_radius();
    for cp in &set.julia_critical {
        let c = cp.point;
        // rec.points[m - 1] = f^m(c), rec.log_derivatives[m] = log|Df^m(f(c))|
        let rec = orbit(poly, poly.eval(c), iterations, escape);
        if let Some(at) = rec.escaped_at {
            return Err(DynError::Precondition(format!(
                "orbit of critical point {c} escapes at step {}; it is not in the Julia set",
                at + 1
            )));
        }
        for m in 1..=iterations {
            let z = rec.points[m - 1];
            let near = set
                .julia_critical
                .iter()
                .any(|other| (z - other.point).norm() < radius);
            if !near {
                continue;
            }
            let derivative = rec.log_derivatives[m].exp();
            report.merge_margin(derivative / k, false);
            if derivative < k {
                let mut w = Witness::bare(c, m);
                w.point = Some(z);
                w.derivative = Some(derivative);
                report.witnesses.push(w);
            }
        }
    }
    Ok(report.finish())
}
