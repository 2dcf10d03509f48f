//! The acceptance suite. Each criterion prints one PASS/FAIL line with the
//! measured numbers; the test fails if any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dynlab::conditions::{check_bc, check_ld, ConditionReport, Verdict};
use dynlab::geometry::JordanDisk;
use dynlab::interval::{check_bc_interval, check_ld_interval, interval_pullback, real_schwarz_probe_with, IntervalMap, SchwarzOptions};
use dynlab::julia::{inverse_orbit, sample_julia};
use dynlab::pullback::PullbackEngine;
use dynlab::puzzle::{build_puzzle, green, markov_audit, trace_external_ray, Angle};
use dynlab::report::{run_experiment, CheckKind, ExperimentConfig, Family};
use dynlab::{orbit, Complex64, Polynomial};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn quadratic(re: f64, im: f64) -> Polynomial {
    Polynomial::quadratic(Complex64::new(re, im))
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn green_exactness() -> Outcome {
    let start = Instant::now();
    let f = quadratic(0.0, 0.0);
    let g2 = green(&f, Complex64::new(2.0, 0.0), 64).unwrap().value;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let r = rng.gen_range(1.05..10.0);
        let z = Complex64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU));
        let gz = green(&f, z, 64).unwrap().value;
        let gfz = green(&f, f.eval(z), 64).unwrap().value;
        worst = worst.max((gfz - 2.0 * gz).abs());
    }
    let elapsed = start.elapsed();
    let err = (g2 - 2f64.ln()).abs();
    outcome(
        err < 1e-9 && worst < 1e-8 && secs(elapsed) < 0.1,
        format!("|G(2) - log 2| = {err:.2e}, worst functional residual {worst:.2e}, {:.3} s", secs(elapsed)),
    )
}

fn ray_landing() -> Outcome {
    let start = Instant::now();
    let basilica = trace_external_ray(&quadratic(-1.0, 0.0), Angle::zero(), 1.0, 1e-6).unwrap();
    let t1 = start.elapsed();
    let golden = 0.5 * (1.0 + 5f64.sqrt());
    let miss = basilica.landing.map_or(f64::INFINITY, |z| (z - golden).norm());

    let start = Instant::now();
    let square = trace_external_ray(&quadratic(0.0, 0.0), Angle::zero(), 1.0, 1e-6).unwrap();
    let t2 = start.elapsed();
    let deviation = square
        .points
        .iter()
        .map(|z| if z.re > 0.0 { z.im.abs() } else { f64::INFINITY })
        .fold(0.0, f64::max);
    outcome(
        miss < 1e-4 && deviation < 1e-8 && secs(t1) < 2.0 && secs(t2) < 2.0,
        format!(
            "z^2-1 lands {miss:.2e} from the golden ratio, z^2 ray leaves R+ by {deviation:.2e}, {:.2} s / {:.2} s",
            secs(t1),
            secs(t2)
        ),
    )
}

fn derivative_cocycle() -> Outcome {
    let rec = orbit(&quadratic(-2.0, 0.0), Complex64::new(0.0, 0.0), 21, 1e6);
    let complex_worst = (1..=20)
        .map(|n| ((rec.log_derivative_between(1, n) - n as f64 * 4f64.ln()).exp() - 1.0).abs())
        .fold(0.0, f64::max);

    let cfg = ExperimentConfig {
        family: Family::Logistic,
        checks: vec![CheckKind::Orbit],
        orbit_start_re: 1.0,
        orbit_iterations: 20,
        ..ExperimentConfig::default()
    };
    let bundle = run_experiment(&cfg).unwrap();
    let logs: Vec<f64> = serde_json::from_value(bundle.outputs[0].result["log_derivatives"].clone()).unwrap();
    let real_worst = (1..=20)
        .map(|n| ((logs[n] - n as f64 * 4f64.ln()).exp() - 1.0).abs())
        .fold(0.0, f64::max);
    outcome(
        complex_worst < 1e-9 && real_worst < 1e-9,
        format!("worst relative error z^2-2 {complex_worst:.2e}, logistic {real_worst:.2e}"),
    )
}

/// Connected pieces of `{z : |f^n(z) - center| < radius}` on a 2000 x 2000
/// grid, as (count, diameters).
fn grid_pullback(f: &Polynomial, depth: usize, center: Complex64, radius: f64) -> Vec<f64> {
    const N: usize = 2000;
    const HALF: f64 = 1.6;
    let step = 2.0 * HALF / N as f64;
    let at = |k: usize| Complex64::new(-HALF + ((k % N) as f64 + 0.5) * step, -HALF + ((k / N) as f64 + 0.5) * step);
    let hit: Vec<bool> = (0..N * N)
        .map(|k| ((0..depth).fold(at(k), |z, _| f.eval(z)) - center).norm() < radius)
        .collect();
    let mut seen = vec![false; N * N];
    let mut diameters = Vec::new();
    for k0 in 0..N * N {
        if !hit[k0] || seen[k0] {
            continue;
        }
        seen[k0] = true;
        let mut stack = vec![k0];
        let mut cells = Vec::new();
        while let Some(k) = stack.pop() {
            cells.push(at(k));
            let (i, j) = (k % N, k / N);
            for (ok, n) in [(i > 0, k.wrapping_sub(1)), (i + 1 < N, k + 1), (j > 0, k.wrapping_sub(N)), (j + 1 < N, k + N)] {
                if ok && hit[n] && !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
        // extreme points along 64 directions bound the diameter from below
        // to within 1 - cos(pi/64)
        let mut diameter = 0.0f64;
        for a in 0..64 {
            let dir = Complex64::from_polar(1.0, a as f64 * std::f64::consts::PI / 64.0);
            let proj = |z: &Complex64| z.re * dir.re + z.im * dir.im;
            let (lo, hi) = cells
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), z| (lo.min(proj(z)), hi.max(proj(z))));
            diameter = diameter.max(hi - lo);
        }
        diameters.push(diameter + step);
    }
    diameters.sort_by(f64::total_cmp);
    diameters
}

fn pullback_oracle() -> Outcome {
    let start = Instant::now();
    let f = quadratic(0.0, 0.0);
    let mut worst = 0.0f64;
    let mut counts_ok = true;
    let mut counts = Vec::new();
    for (center, radius) in [(Complex64::new(1.0, 0.3), 0.5), (Complex64::new(0.2, -0.1), 0.6)] {
        let disk = JordanDisk::circle(center, radius).unwrap();
        let tree = dynlab::pullback::enumerate_pullbacks(&f, &disk, 3, 10_000).unwrap();
        for n in 1..=3 {
            let mut engine: Vec<f64> = tree.at_depth(n).map(|(_, node)| node.diameter).collect();
            engine.sort_by(f64::total_cmp);
            let grid = grid_pullback(&f, n, center, radius);
            counts.push(format!("{}/{}", engine.len(), grid.len()));
            if engine.len() != grid.len() {
                counts_ok = false;
                continue;
            }
            for (e, g) in engine.iter().zip(&grid) {
                worst = worst.max((e - g).abs() / g);
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        counts_ok && worst < 0.05 && secs(elapsed) < 30.0,
        format!(
            "counts engine/grid {}, worst diameter deviation {:.2}%, {:.1} s",
            counts.join(" "),
            100.0 * worst,
            secs(elapsed)
        ),
    )
}

fn riemann_hurwitz_audit() -> Outcome {
    let maps = [quadratic(-2.0, 0.0), quadratic(0.0, 1.0), quadratic(-1.0, 0.2)];
    let engines: Vec<PullbackEngine> = maps.iter().map(|f| PullbackEngine::new(f).unwrap()).collect();
    let (mut steps, mut violations, mut branched, mut failed) = (0usize, 0usize, 0usize, 0usize);
    for chain in 0..500u64 {
        let which = chain as usize % 3;
        let (f, engine) = (&maps[which], &engines[which]);
        let mut rng = ChaCha8Rng::seed_from_u64(chain);
        // a third of the disks sit on the critical value, the rest on J
        let base = if chain % 3 == 0 {
            engine.critical_values()[0]
        } else {
            sample_julia(f, 1, 40, &mut rng).unwrap()[0]
        };
        let center = base + Complex64::from_polar(rng.gen_range(0.0..0.05), rng.gen_range(0.0..std::f64::consts::TAU));
        let disk = JordanDisk::circle(center, rng.gen_range(0.05..0.5)).unwrap();
        let length = rng.gen_range(1..=6);
        let backward = inverse_orbit(f, center, length, &mut rng).unwrap();
        match engine.chain(&disk, &backward) {
            Ok(c) => {
                for s in &c.steps {
                    steps += 1;
                    let orders: usize = s
                        .contains_critical
                        .iter()
                        .map(|p| engine.critical().iter().find(|c| c.point == *p).map_or(0, |c| c.order - 1))
                        .sum();
                    if s.local_degree != 1 + orders {
                        violations += 1;
                    }
                    if s.local_degree > 1 {
                        branched += 1;
                    }
                }
            }
            Err(_) => failed += 1,
        }
    }
    outcome(
        violations == 0 && failed < 50 && branched > 0,
        format!("{steps} steps audited ({branched} branched), {violations} violations, {failed} chains refused a step"),
    )
}

/// Lap count of `f^n` for the full logistic map: one more than the number of
/// turning points, which are the preimages of 1/2 of order below `n`. The
/// preimages come from the closed-form inverse `x = (1 ± sqrt(1 - y)) / 2`.
fn logistic_laps(n: usize) -> usize {
    let mut level = vec![0.5f64];
    let mut turning = 0;
    for _ in 0..n {
        turning += level.len();
        let mut next = Vec::with_capacity(2 * level.len());
        for &y in &level {
            let s = (1.0 - y).max(0.0).sqrt();
            next.push(0.5 * (1.0 - s));
            if s > 0.0 {
                next.push(0.5 * (1.0 + s));
            }
        }
        level = next;
    }
    turning + 1
}

fn interval_completeness() -> Outcome {
    let start = Instant::now();
    let f = IntervalMap::logistic(4.0).unwrap();
    let tree = interval_pullback(&f, [0.0, 1.0], 12).unwrap();
    let mismatches: Vec<usize> = (1..=12).filter(|&n| tree.count_at_depth(n) != logistic_laps(n)).collect();
    let elapsed = start.elapsed();
    outcome(
        mismatches.is_empty() && tree.complete && secs(elapsed) < 5.0,
        format!(
            "depth 12: {} nodes vs {} laps, mismatching depths {mismatches:?}, {:.2} s",
            tree.count_at_depth(12),
            logistic_laps(12),
            secs(elapsed)
        ),
    )
}

/// One base scale for the whole panel. At 0.05 the real maps already show
/// BC(4) witnesses (logistic: depth 2 at delta = 0.025), a scale too coarse
/// for the small-delta regime the condition is about.
const PANEL_DELTA0: f64 = 0.01;
const LD_RADIUS: f64 = 0.1;

enum PanelMap {
    Complex(&'static str, Polynomial),
    Real(&'static str, IntervalMap),
}

impl PanelMap {
    fn name(&self) -> &'static str {
        match self {
            PanelMap::Complex(n, _) | PanelMap::Real(n, _) => n,
        }
    }

    fn bc(&self, r: f64) -> ConditionReport {
        match self {
            PanelMap::Complex(_, f) => check_bc(f, r, PANEL_DELTA0, 4, 12, 100_000).unwrap(),
            PanelMap::Real(_, f) => check_bc_interval(f, r, PANEL_DELTA0, 4, 12).unwrap(),
        }
    }

    fn ld(&self, k: f64) -> ConditionReport {
        match self {
            PanelMap::Complex(_, f) => check_ld(f, k, LD_RADIUS, 1000).unwrap(),
            PanelMap::Real(_, f) => check_ld_interval(f, k, LD_RADIUS, 1000).unwrap(),
        }
    }
}

fn passed(report: &ConditionReport) -> bool {
    report.verdict == Verdict::NoViolationWithinBudget
}

fn condition_implications() -> (Outcome, Vec<String>) {
    let start = Instant::now();
    let panel = [
        PanelMap::Complex("z^2-2", quadratic(-2.0, 0.0)),
        PanelMap::Complex("z^2+i", quadratic(0.0, 1.0)),
        PanelMap::Real("logistic 4", IntervalMap::logistic(4.0).unwrap()),
        PanelMap::Real("x^2-1.9", IntervalMap::quadratic(-1.9).unwrap()),
    ];
    let surrogate = 8.0;
    let mut lines = Vec::new();
    let mut ok = true;
    for map in &panel {
        let mut row = format!("  {}:", map.name());
        for k in [2.0, 4.0] {
            let bc = passed(&map.bc(surrogate * k));
            let ld = passed(&map.ld(k));
            ok &= !bc || ld;
            row += &format!(" BC({})={bc} => LD({k})={ld};", surrogate * k);
        }
        for r in [2.0, 4.0] {
            let ld = passed(&map.ld(surrogate * r));
            let bc = passed(&map.bc(r));
            ok &= !ld || bc;
            row += &format!(" LD({})={ld} => BC({r})={bc};", surrogate * r);
        }
        lines.push(row);
    }
    let control = PanelMap::Real("x^2-1.401155", IntervalMap::quadratic(-1.401155).unwrap());
    let (ld, bc) = (control.ld(100.0), control.bc(4.0));
    let control_ok = !passed(&ld) && !passed(&bc);
    lines.push(format!(
        "  near-Feigenbaum x^2-1.401155: LD(100) {:?}, BC(4) {:?}",
        ld.verdict, bc.verdict
    ));
    let elapsed = start.elapsed();
    (
        outcome(
            ok && control_ok && secs(elapsed) < 600.0,
            format!(
                "implications hold: {ok}, negative control fails both: {control_ok}, {:.0} s",
                secs(elapsed)
            ),
        ),
        lines,
    )
}

fn puzzle_markov() -> Outcome {
    let start = Instant::now();
    let f = quadratic(0.0, 1.0);
    let angles: Vec<Angle> = ["1/7", "2/7", "4/7"].iter().map(|s| s.parse().unwrap()).collect();
    let puzzle = build_puzzle(&f, &angles, 1.0, 5).unwrap();
    let audit = markov_audit(&puzzle);
    let markov = audit.iter().all(|r| r.unique && r.matches_symbolic && r.hausdorff < 1e-5);
    let worst = audit.iter().map(|r| r.hausdorff).fold(0.0, f64::max);
    let mut not_nice = 0;
    let mut total = 0;
    for (depth, level) in puzzle.levels.iter().enumerate() {
        for piece in level {
            total += 1;
            if !puzzle.nice_check_piece(depth, piece.index, 100).unwrap().nice {
                not_nice += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        puzzle.depth_built() == 5 && markov && not_nice == 0 && secs(elapsed) < 120.0,
        format!(
            "depth built {}, {} pieces audited, worst Hausdorff {worst:.2e}, {not_nice}/{total} pieces not nice, {:.1} s",
            puzzle.depth_built(),
            audit.len(),
            secs(elapsed)
        ),
    )
}

fn schwarz_probe() -> Outcome {
    let f = IntervalMap::logistic(4.0).unwrap();
    let probe = |eta: f64, trials: usize| {
        real_schwarz_probe_with(
            &f,
            &SchwarzOptions {
                eta,
                trials,
                max_depth: 12,
                seed: 0,
            },
        )
        .unwrap()
        .min
        .unwrap_or(0.0)
    };
    let base = probe(0.05, 200);
    let doubled = probe(0.05, 400);
    let halved = probe(0.025, 200);
    let stable = |x: f64| (x - base).abs() <= 0.2 * base;
    outcome(
        base > 0.0 && stable(doubled) && stable(halved),
        format!("min ratio {base:.4}, doubled trials {doubled:.4}, halved eta {halved:.4}"),
    )
}

/// The configs behind criteria 1 to 9, as report runs.
fn acceptance_runs() -> Vec<ExperimentConfig> {
    let base = ExperimentConfig::default;
    let complex = |name: &str, re: f64, im: f64, checks: Vec<CheckKind>| ExperimentConfig {
        name: name.into(),
        c_re: re,
        c_im: im,
        checks,
        ..base()
    };
    let real = |name: &str, family: Family, checks: Vec<CheckKind>| ExperimentConfig {
        name: name.into(),
        family,
        checks,
        ..base()
    };
    let mut runs = vec![
        complex("run1-squaring", 0.0, 0.0, vec![CheckKind::Ray, CheckKind::Orbit]),
        complex("run2-basilica", -1.0, 0.0, vec![CheckKind::Ray]),
        complex("run3-chebyshev", -2.0, 0.0, vec![CheckKind::Orbit]),
        ExperimentConfig {
            orbit_start_re: 1.0,
            orbit_iterations: 20,
            ..real("run3-logistic", Family::Logistic, vec![CheckKind::Orbit])
        },
        ExperimentConfig {
            pullback_center_re: 1.0,
            pullback_center_im: 0.3,
            ..complex("run4-squaring", 0.0, 0.0, vec![CheckKind::Pullback])
        },
    ];
    for (i, (re, im)) in [(-2.0, 0.0), (0.0, 1.0), (-1.0, 0.2)].into_iter().enumerate() {
        runs.push(ExperimentConfig {
            pullback_center_re: re,
            pullback_center_im: im,
            pullback_radius: 0.3,
            ..complex(&format!("run5-map{i}"), re, im, vec![CheckKind::Pullback, CheckKind::Upb])
        });
    }
    runs.push(ExperimentConfig {
        pullback_depth: 12,
        ..real("run6-logistic", Family::Logistic, vec![CheckKind::Pullback])
    });
    for (name, re, im) in [("run7-chebyshev", -2.0, 0.0), ("run7-i", 0.0, 1.0)] {
        runs.push(ExperimentConfig {
            bc_delta0: PANEL_DELTA0,
            ld_k: 2.0,
            ..complex(name, re, im, vec![CheckKind::Bc, CheckKind::Ld])
        });
    }
    runs.push(ExperimentConfig {
        bc_delta0: PANEL_DELTA0,
        ld_k: 2.0,
        ..real("run7-logistic", Family::Logistic, vec![CheckKind::Bc, CheckKind::Ld])
    });
    runs.push(ExperimentConfig {
        c_re: -1.9,
        bc_delta0: PANEL_DELTA0,
        ld_k: 2.0,
        ..real("run7-real-quadratic", Family::RealQuadratic, vec![CheckKind::Bc, CheckKind::Ld])
    });
    runs.push(ExperimentConfig {
        puzzle_angles: vec!["1/7".into(), "2/7".into(), "4/7".into()],
        puzzle_depth: 5,
        ..complex("run8-puzzle", 0.0, 1.0, vec![CheckKind::Puzzle, CheckKind::Nice])
    });
    runs.push(real("run9-schwarz", Family::Logistic, vec![CheckKind::Schwarz]));
    runs
}

fn determinism() -> Outcome {
    let mut mismatched = Vec::new();
    let mut reports = 0;
    for cfg in acceptance_runs() {
        let render = |workers: usize| {
            let bundle = run_experiment(&ExperimentConfig { workers, ..cfg.clone() }).unwrap();
            bundle
                .outputs
                .iter()
                .map(|o| bundle.json(o).unwrap())
                .collect::<Vec<String>>()
        };
        let one = render(1);
        reports += one.len();
        if render(4) != one || render(8) != one {
            mismatched.push(cfg.name.clone());
        }
    }
    outcome(
        mismatched.is_empty(),
        format!("{reports} JSON reports compared across 1, 4 and 8 workers, mismatching runs {mismatched:?}"),
    )
}

#[test]
fn acceptance_criteria() {
    let mut results: Vec<(usize, Outcome)> = vec![
        (1, green_exactness()),
        (2, ray_landing()),
        (3, derivative_cocycle()),
        (4, pullback_oracle()),
        (5, riemann_hurwitz_audit()),
        (6, interval_completeness()),
    ];
    let (implications, panel) = condition_implications();
    results.push((7, implications));
    results.push((8, puzzle_markov()));
    results.push((9, schwarz_probe()));
    results.push((10, determinism()));

    for (n, o) in &results {
        println!("criterion {n:>2}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if *n == 7 {
            for line in &panel {
                println!("{line}");
            }
        }
    }
    let failed: Vec<usize> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
