//! Pullback enumeration against brute force: classify a 2000 x 2000 grid by
//! whether `f^n(z)` lands in the target, flood-fill the hits into connected
//! pieces, and compare counts and diameters.

use dynlab::geometry::JordanDisk;
use dynlab::pullback::enumerate_pullbacks;
use dynlab::{Complex64, Polynomial};

const GRID: usize = 2000;
const HALF_WIDTH: f64 = 1.6;

struct GridPiece {
    diameter: f64,
}

fn convex_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn grid_pieces(f: &Polynomial, depth: usize, center: Complex64, radius: f64) -> Vec<GridPiece> {
    let step = 2.0 * HALF_WIDTH / GRID as f64;
    let at = |i: usize, j: usize| Complex64::new(-HALF_WIDTH + (i as f64 + 0.5) * step, -HALF_WIDTH + (j as f64 + 0.5) * step);
    let hit: Vec<bool> = (0..GRID * GRID)
        .map(|k| {
            let z = (0..depth).fold(at(k % GRID, k / GRID), |z, _| f.eval(z));
            (z - center).norm() < radius
        })
        .collect();
    let mut seen = vec![false; GRID * GRID];
    let mut pieces = Vec::new();
    for k0 in 0..GRID * GRID {
        if !hit[k0] || seen[k0] {
            continue;
        }
        seen[k0] = true;
        let mut stack = vec![k0];
        let mut edge = Vec::new();
        while let Some(k) = stack.pop() {
            let (i, j) = (k % GRID, k / GRID);
            let mut interior = true;
            let neighbours = [
                (i > 0).then(|| k - 1),
                (i + 1 < GRID).then(|| k + 1),
                (j > 0).then(|| k - GRID),
                (j + 1 < GRID).then(|| k + GRID),
            ];
            for n in neighbours {
                match n {
                    Some(n) if hit[n] => {
                        if !seen[n] {
                            seen[n] = true;
                            stack.push(n);
                        }
                    }
                    _ => interior = false,
                }
            }
            if !interior {
                let z = at(i, j);
                edge.push((z.re, z.im));
            }
        }
        let hull = convex_hull(edge);
        let mut diameter = 0.0f64;
        for a in &hull {
            for b in &hull {
                diameter = diameter.max(((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt());
            }
        }
        // cell centres sit half a cell inside the true boundary on each side
        pieces.push(GridPiece { diameter: diameter + step });
    }
    pieces
}

fn compare(center: Complex64, radius: f64) {
    let f = Polynomial::quadratic(Complex64::new(0.0, 0.0));
    let target = JordanDisk::circle(center, radius).unwrap();
    let tree = enumerate_pullbacks(&f, &target, 3, 10_000).unwrap();
    assert!(tree.complete);
    for n in 1..=3 {
        let mut engine: Vec<f64> = tree.at_depth(n).map(|(_, node)| node.diameter).collect();
        let mut grid: Vec<f64> = grid_pieces(&f, n, center, radius).iter().map(|p| p.diameter).collect();
        assert_eq!(engine.len(), grid.len(), "depth {n}: component count");
        engine.sort_by(f64::total_cmp);
        grid.sort_by(f64::total_cmp);
        for (e, g) in engine.iter().zip(&grid) {
            assert!((e - g).abs() <= 0.05 * g, "depth {n}: diameter {e} vs grid {g}");
        }
    }
}

#[test]
fn disk_away_from_the_critical_value() {
    compare(Complex64::new(1.0, 0.3), 0.5);
}

#[test]
fn disk_around_the_critical_value() {
    compare(Complex64::new(0.2, -0.1), 0.6);
}
