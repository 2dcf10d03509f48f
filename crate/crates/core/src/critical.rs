//! Critical points, their orders, and the finite-budget split into Julia and
//! Fatou critical points.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DynError, Result};
use crate::orbit::{detect_tail_cycle, CycleInfo, CycleKind, CYCLE_TOLERANCE, MAX_PERIOD};
use crate::poly::{sort_lex, Polynomial};
use crate::roots::find_roots;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    #[serde(with = "crate::cser::one")]
    pub point: Complex64,
    /// Local degree `ℓ_c` of `f` at the point.
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fate", rename_all = "kebab-case")]
pub enum CriticalFate {
    Escapes { at: usize },
    Attracted { cycle: CycleInfo },
    /// Bounded for the whole budget and not captured by an attracting cycle.
    /// This is the conservative "in the Julia set" verdict.
    Bounded { repelling_tail: Option<CycleInfo> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub budget: usize,
    pub transient: usize,
    pub cycle_tolerance: f64,
    pub cluster_radius: f64,
    pub root_tolerance: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            budget: 4000,
            transient: 1000,
            cycle_tolerance: CYCLE_TOLERANCE,
            cluster_radius: 1e-8,
            root_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalSet {
    pub all_critical: Vec<CriticalPoint>,
    pub fates: Vec<CriticalFate>,
    /// `Crit'(f)`: the critical points whose fate is `Bounded`.
    pub julia_critical: Vec<CriticalPoint>,
    /// `CV(f) = f(Crit(f))`, in the order of `all_critical`.
    #[serde(with = "crate::cser::vec")]
    pub critical_values: Vec<Complex64>,
    pub budget: usize,
}

impl CriticalSet {
    pub fn max_order(&self) -> usize {
        self.julia_critical.iter().map(|c| c.order).max().unwrap_or(1)
    }

    /// Builds a set that treats the given critical points as Julia critical
    /// points regardless of their orbits.
    pub fn assume_julia(poly: &Polynomial, all: Vec<CriticalPoint>) -> Self {
        let critical_values = all.iter().map(|c| poly.eval(c.point)).collect();
        Self {
            fates: all
                .iter()
                .map(|_| CriticalFate::Bounded {
                    repelling_tail: None,
                })
                .collect(),
            julia_critical: all.clone(),
            all_critical: all,
            critical_values,
            budget: 0,
        }
    }
}

/// Roots of `Df` clustered into critical points with orders.
pub fn critical_points(poly: &Polynomial, opts: &ClassifyOptions) -> Result<Vec<CriticalPoint>> {
    let deriv = poly.derivative_coefficients(1);
    let mut roots = find_roots(&deriv, opts.root_tolerance)?;
    sort_lex(&mut roots);

    let mut used = vec![false; roots.len()];
    let mut out = Vec::new();
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let mut members = vec![roots[i]];
        // grow the cluster transitively so a chain of nearby estimates merges
        let mut k = 0;
        while k < members.len() {
            let anchor = members[k];
            for j in 0..roots.len() {
                let r = opts.cluster_radius * anchor.norm().max(1.0);
                if !used[j] && (roots[j] - anchor).norm() < r {
                    used[j] = true;
                    members.push(roots[j]);
                }
            }
            k += 1;
        }
        let multiplicity = members.len();
        let mean = members.iter().sum::<Complex64>() / multiplicity as f64;
        let point = polish_critical(poly, mean, multiplicity);
        out.push(CriticalPoint {
            point,
            order: multiplicity + 1,
        });
    }
    sort_by_point(&mut out);
    Ok(out)
}

fn sort_by_point(v: &mut [CriticalPoint]) {
    v.sort_by(|a, b| {
        a.point
            .re
            .partial_cmp(&b.point.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(
                a.point
                    .im
                    .partial_cmp(&b.point.im)
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
    });
}

/// A root of `Df` of multiplicity `m` is a simple root of `f^{(m)}`; Newton
/// there converges quadratically.
fn polish_critical(poly: &Polynomial, start: Complex64, multiplicity: usize) -> Complex64 {
    let g = poly.derivative_coefficients(multiplicity);
    let dg = poly.derivative_coefficients(multiplicity + 1);
    let eval = |c: &[Complex64], z: Complex64| {
        c.iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, a| acc * z + a)
    };
    let mut z = start;
    for _ in 0..20 {
        let d = eval(&dg, z);
        if d.norm() == 0.0 {
            break;
        }
        let step = eval(&g, z) / d;
        z -= step;
        if step.norm() <= 1e-16 * z.norm().max(1.0) {
            break;
        }
    }
    z
}

/// Classifies each critical point by following its orbit for `opts.budget`
/// iterations.
///
/// A critical point is left out of `Crit'(f)` only when its orbit escapes or
/// settles on an attracting cycle within the budget. Indifferent cycles are
/// reported as errors.
pub fn classify_critical_points(poly: &Polynomial, opts: &ClassifyOptions) -> Result<CriticalSet> {
    let all = critical_points(poly, opts)?;
    let escape = poly.escape_radius();
    let mut fates = Vec::with_capacity(all.len());
    for cp in &all {
        fates.push(critical_fate(poly, cp.point, escape, opts)?);
    }
    let julia_critical = all
        .iter()
        .zip(&fates)
        .filter(|(_, fate)| matches!(fate, CriticalFate::Bounded { .. }))
        .map(|(c, _)| *c)
        .collect();
    let critical_values = all.iter().map(|c| poly.eval(c.point)).collect();
    Ok(CriticalSet {
        all_critical: all,
        fates,
        julia_critical,
        critical_values,
        budget: opts.budget,
    })
}

fn critical_fate(
    poly: &Polynomial,
    c: Complex64,
    escape: f64,
    opts: &ClassifyOptions,
) -> Result<CriticalFate> {
    let mut window: Vec<Complex64> = Vec::with_capacity(MAX_PERIOD + 1);
    let mut z = c;
    let mut first_tail: Option<CycleInfo> = None;

    // exact (pre)periodicity shows up before the transient, check it early too
    let mut history = vec![z];
    for k in 1..=opts.budget {
        z = poly.eval(z);
        if !(z.norm() <= escape) {
            return Ok(CriticalFate::Escapes { at: k });
        }
        if k <= opts.transient {
            history.push(z);
            if let Some(cyc) = exact_tail(poly, &history) {
                if cyc.kind == CycleKind::Attracting {
                    return Ok(CriticalFate::Attracted { cycle: cyc });
                }
                first_tail.get_or_insert(cyc);
            }
            continue;
        }
        window.push(z);
        if window.len() > MAX_PERIOD + 1 {
            window.remove(0);
        }
        if let Some(cyc) = detect_tail_cycle(poly, &window, opts.cycle_tolerance) {
            match cyc.kind {
                CycleKind::Attracting => return Ok(CriticalFate::Attracted { cycle: cyc }),
                CycleKind::Indifferent => {
                    return Err(DynError::IndifferentCycle {
                        period: cyc.period,
                        modulus: cyc.multiplier.norm(),
                        point: cyc.point,
                    })
                }
                CycleKind::Repelling => {
                    first_tail.get_or_insert(cyc);
                }
            }
        }
    }
    Ok(CriticalFate::Bounded {
        repelling_tail: first_tail,
    })
}

fn exact_tail(poly: &Polynomial, history: &[Complex64]) -> Option<CycleInfo> {
    let n = history.len() - 1;
    let last = history[n];
    for p in 1..=MAX_PERIOD.min(n) {
        if history[n - p] == last {
            // any positive tolerance accepts an exact repeat
            return detect_tail_cycle(poly, &history[n - p..], f64::MIN_POSITIVE);
        }
    }
    None
}
