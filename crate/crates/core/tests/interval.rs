//! Interval dynamics against independent oracles: lap counting on a grid,
//! forward images of witnesses, and the complex pullback engine.

use dynlab::interval::{
    check_bc_interval, interval_pullback, real_schwarz_probe, real_schwarz_probe_with, tilde_interval, IntervalMap,
    SchwarzOptions,
};
use dynlab::conditions::Verdict;
use dynlab::geometry::JordanDisk;
use dynlab::pullback::{EnumerateOptions, KeepDisks, PullbackEngine};
use dynlab::{Complex64, Polynomial};

/// Laps of `f^n` on a uniform grid: maximal runs where `Df^n` keeps its sign.
/// Returns the grid endpoints of each run.
fn grid_laps(f: &IntervalMap, n: usize, points: usize) -> Vec<[f64; 2]> {
    let [a, b] = f.domain();
    let sign_at = |x: f64| {
        let mut y = x;
        let mut s = 1.0;
        for _ in 0..n {
            let (next, d) = f.evaluate(y);
            s *= d.signum();
            y = next;
        }
        s
    };
    let mut laps = Vec::new();
    let mut start = a;
    let mut prev = sign_at(a + (b - a) * 0.5 / points as f64);
    for i in 1..points {
        let x = a + (b - a) * (i as f64 + 0.5) / points as f64;
        let s = sign_at(x);
        if s != prev {
            let cut = a + (b - a) * i as f64 / points as f64;
            laps.push([start, cut]);
            start = cut;
            prev = s;
        }
    }
    laps.push([start, b]);
    laps
}

fn iterate(f: &IntervalMap, x: f64, n: usize) -> f64 {
    (0..n).fold(x, |y, _| f.eval(y))
}

#[test]
fn full_interval_node_count_is_the_lap_count() {
    for a in [4.0, 3.83, 3.6] {
        let f = IntervalMap::logistic(a).unwrap();
        let tree = interval_pullback(&f, f.domain(), 8).unwrap();
        for n in 1..=8 {
            let laps = grid_laps(&f, n, 1 << 20);
            assert_eq!(tree.count_at_depth(n), laps.len(), "a = {a}, n = {n}");
        }
    }
}

#[test]
fn depth_ten_nodes_match_laps_meeting_the_target() {
    for (a, target) in [(4.0, [0.9, 1.0]), (3.8, [0.3, 0.5])] {
        let f = IntervalMap::logistic(a).unwrap();
        let tree = interval_pullback(&f, target, 10).unwrap();
        let meeting = grid_laps(&f, 10, 1 << 22)
            .into_iter()
            .filter(|lap| {
                let (u, v) = (iterate(&f, lap[0], 10), iterate(&f, lap[1], 10));
                u.max(v) > target[0] && u.min(v) < target[1]
            })
            .count();
        assert_eq!(tree.count_at_depth(10), meeting, "a = {a}");
        assert!(tree.forward_audit(&f) < 1e-8);
    }
}

#[test]
fn chebyshev_passes_bc_at_depth_fifteen() {
    let f = IntervalMap::logistic(4.0).unwrap();
    let rep = check_bc_interval(&f, 2.0, 0.05, 4, 15).unwrap();
    assert_eq!(rep.verdict, Verdict::NoViolationWithinBudget);
    assert!(rep.complete);
}

#[test]
fn near_feigenbaum_bc_witnesses_map_forward() {
    let c = -1.401155;
    let (r, delta0) = (4.0, 0.02);
    let f = IntervalMap::quadratic(c).unwrap();
    let rep = check_bc_interval(&f, r, delta0, 4, 15).unwrap();
    assert_eq!(rep.verdict, Verdict::Violated);
    for w in &rep.witnesses {
        let delta = w.delta.unwrap();
        let [lo, hi] = w.interval.unwrap();
        assert!(hi - lo >= delta);
        // the critical value c is the only one
        let dist = (lo - c).max(c - hi).max(0.0);
        assert!(dist <= delta);
        let target = tilde_interval(&f, 0, r * delta).unwrap();
        for k in 0..=100 {
            let y = iterate(&f, lo + (hi - lo) * k as f64 / 100.0, w.depth);
            assert!(y >= target[0] - 1e-9 && y <= target[1] + 1e-9, "depth {}: {y} outside {target:?}", w.depth);
        }
    }
}

#[test]
fn witnesses_persist_for_larger_r() {
    let f = IntervalMap::quadratic(-1.401155).unwrap();
    let small = check_bc_interval(&f, 4.0, 0.02, 3, 12).unwrap();
    let large = check_bc_interval(&f, 8.0, 0.02, 3, 12).unwrap();
    assert!(!small.witnesses.is_empty());
    for w in &small.witnesses {
        let [lo, hi] = w.interval.unwrap();
        let held = large.witnesses.iter().any(|v| {
            let [a, b] = v.interval.unwrap();
            v.depth == w.depth && v.delta == w.delta && a <= lo + 1e-12 && b >= hi - 1e-12
        });
        assert!(held, "witness at depth {} not enlarged", w.depth);
    }
}

#[test]
fn schwarz_minimum_is_stable_under_more_trials() {
    let f = IntervalMap::logistic(4.0).unwrap();
    let few = real_schwarz_probe(&f, 0.05, 200, 12).unwrap().min.unwrap();
    let many = real_schwarz_probe(&f, 0.05, 400, 12).unwrap().min.unwrap();
    assert!(few > 0.0);
    assert!(many <= few && many >= 0.8 * few, "{few} vs {many}");
}

#[test]
fn halving_eta_never_lowers_the_paired_minimum() {
    for a in [4.0, 3.9] {
        let f = IntervalMap::logistic(a).unwrap();
        for seed in 0..3 {
            let run = |eta: f64| {
                real_schwarz_probe_with(&f, &SchwarzOptions { eta, trials: 200, max_depth: 12, seed })
                    .unwrap()
                    .min
                    .unwrap()
            };
            let (wide, narrow) = (run(0.05), run(0.025));
            assert!(narrow >= wide, "a = {a}, seed {seed}: {narrow} < {wide}");
        }
    }
}

#[test]
fn real_tree_matches_complex_components_on_the_line() {
    let f = IntervalMap::quadratic(-2.0).unwrap();
    let poly = Polynomial::quadratic(Complex64::new(-2.0, 0.0));
    let engine = PullbackEngine::new(&poly).unwrap();
    let (center, radius) = (0.5, 0.3);
    let disk = JordanDisk::circle(Complex64::new(center, 0.0), radius).unwrap();
    let complex = engine
        .enumerate(
            &disk,
            &EnumerateOptions {
                depth: 5,
                branch_cap: 10_000,
                keep: KeepDisks::All,
            },
        )
        .unwrap();
    // the polygon's real trace is slightly inside the round disk
    let boundary = disk.boundary();
    let half = boundary
        .iter()
        .filter(|z| z.im.abs() < 1e-12)
        .map(|z| (z.re - center).abs())
        .fold(f64::INFINITY, f64::min);
    let real = interval_pullback(&f, [center - half, center + half], 5).unwrap();
    for n in 1..=5 {
        let on_line = complex
            .at_depth(n)
            .filter(|(_, node)| {
                let b = node.disk.as_ref().unwrap().boundary();
                let lo = b.iter().map(|z| z.im).fold(f64::INFINITY, f64::min);
                let hi = b.iter().map(|z| z.im).fold(f64::NEG_INFINITY, f64::max);
                lo < 0.0 && hi > 0.0
            })
            .count();
        assert_eq!(real.components(n).len(), on_line, "depth {n}");
        // grid oracle: runs of real points landing in the disk
        let points = 1 << 18;
        let mut runs = 0;
        let mut inside_prev = false;
        for i in 0..=points {
            let x = -2.0 + 4.0 * i as f64 / points as f64;
            let inside = disk.contains(Complex64::new(iterate(&f, x, n), 0.0));
            if inside && !inside_prev {
                runs += 1;
            }
            inside_prev = inside;
        }
        assert_eq!(runs, on_line, "grid at depth {n}");
    }
}
