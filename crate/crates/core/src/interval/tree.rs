use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::map::IntervalMap;
use crate::error::{DynError, Result};

/// Preimage endpoints are solved to this accuracy.
pub const ENDPOINT_TOLERANCE: f64 = 1e-12;
/// Pieces narrower than this are dropped and counted in
/// [`IntervalPullbackTree::collapsed`].
pub const COLLAPSE_WIDTH: f64 = 1e-13;

/// `x` in branch `i` with `f(x) = y`, by Newton's method safeguarded with
/// bisection. `y` must lie between the branch's endpoint values.
pub fn solve_on_branch(map: &IntervalMap, i: usize, y: f64) -> Result<f64> {
    let [u, v] = map.branches()[i];
    let (fu, fv) = (map.eval(u), map.eval(v));
    if y == fu {
        return Ok(u);
    }
    if y == fv {
        return Ok(v);
    }
    let fail = |reason: String| DynError::IntervalSolve { branch: i, reason };
    let (low_val, high_val) = if fu < fv { (fu, fv) } else { (fv, fu) };
    if !(y > low_val && y < high_val) {
        return Err(fail(format!("value {y} outside the branch image [{low_val}, {high_val}]")));
    }
    // bracket [lo, hi] with g(lo) < 0 < g(hi) for g = sign * (f - y)
    let sign = if fv > fu { 1.0 } else { -1.0 };
    let (mut lo, mut hi) = (u, v);
    let mut x = 0.5 * (u + v);
    for _ in 0..200 {
        let (fx, dfx) = map.evaluate(x);
        let g = sign * (fx - y);
        if g == 0.0 {
            return Ok(x);
        }
        if g < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - (fx - y) / dfx;
        let next = if dfx != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let scale = x.abs().max(1.0);
        if (next - x).abs() <= 1e-16 * scale || hi - lo <= 1e-16 * scale {
            return Ok(next);
        }
        x = next;
    }
    if hi - lo <= ENDPOINT_TOLERANCE {
        Ok(x)
    } else {
        Err(fail(format!("no convergence for value {y}; bracket width {:e}", hi - lo)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalNode {
    pub interval: [f64; 2],
    pub depth: usize,
    pub parent: Option<usize>,
    /// Branch of `f` that maps this node into its parent.
    pub branch: Option<usize>,
    /// `f^depth` maps the node onto the whole root (not just part of it).
    pub covers_root: bool,
    /// Critical points of `f` in the closed node.
    pub contains_critical: Vec<f64>,
}

/// A connected component of `f^{-n}(root)`: a maximal run of nodes of
/// equal depth sharing endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalComponent {
    pub interval: [f64; 2],
    pub depth: usize,
    pub nodes: Vec<usize>,
    pub contains_critical: Vec<f64>,
}

impl IntervalComponent {
    pub fn length(&self) -> f64 {
        self.interval[1] - self.interval[0]
    }

    /// 0 when a point is inside, else the gap to the nearest one.
    pub fn distance_to(&self, points: &[f64]) -> f64 {
        let [a, b] = self.interval;
        points
            .iter()
            .map(|&p| (a - p).max(p - b).max(0.0))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalPullbackTree {
    pub root: [f64; 2],
    pub depth: usize,
    /// Depth 0 holds the root; each level is sorted by left endpoint.
    pub nodes: Vec<IntervalNode>,
    pub complete: bool,
    pub collapsed: usize,
}

impl IntervalPullbackTree {
    pub fn at_depth(&self, n: usize) -> impl Iterator<Item = (usize, &IntervalNode)> {
        self.nodes.iter().enumerate().filter(move |(_, node)| node.depth == n)
    }

    pub fn count_at_depth(&self, n: usize) -> usize {
        self.at_depth(n).count()
    }

    pub fn components(&self, n: usize) -> Vec<IntervalComponent> {
        let mut out: Vec<IntervalComponent> = Vec::new();
        for (i, node) in self.at_depth(n) {
            match out.last_mut() {
                Some(last) if node.interval[0] <= last.interval[1] + ENDPOINT_TOLERANCE => {
                    last.interval[1] = last.interval[1].max(node.interval[1]);
                    last.nodes.push(i);
                    for &c in &node.contains_critical {
                        if !last.contains_critical.contains(&c) {
                            last.contains_critical.push(c);
                        }
                    }
                }
                _ => out.push(IntervalComponent {
                    interval: node.interval,
                    depth: n,
                    nodes: vec![i],
                    contains_critical: node.contains_critical.clone(),
                }),
            }
        }
        out
    }

    /// Largest endpoint mismatch after mapping every node forward `depth`
    /// times: against the root for covering nodes, and against containment
    /// in the root otherwise.
    pub fn forward_audit(&self, map: &IntervalMap) -> f64 {
        let [p, q] = self.root;
        self.nodes
            .iter()
            .map(|node| {
                let mut a = node.interval[0];
                let mut b = node.interval[1];
                for _ in 0..node.depth {
                    a = map.eval(a);
                    b = map.eval(b);
                }
                let (lo, hi) = (a.min(b), a.max(b));
                if node.covers_root {
                    (lo - p).abs().max((hi - q).abs())
                } else {
                    (p - lo).max(hi - q).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }
}

/// The part of `f^{-1}([p, q])` inside branch `i`, and whether it maps onto
/// all of `[p, q]`. `None` when the branch image misses the target or only
/// touches it in a piece narrower than [`COLLAPSE_WIDTH`] (second field true).
fn branch_preimage(map: &IntervalMap, i: usize, target: [f64; 2]) -> Result<(Option<([f64; 2], bool)>, bool)> {
    let [u, v] = map.branches()[i];
    let (fu, fv) = (map.eval(u), map.eval(v));
    let (lo, hi) = (fu.min(fv), fu.max(fv));
    let a = target[0].max(lo);
    let b = target[1].min(hi);
    if a > b {
        return Ok((None, false));
    }
    let xa = if a == lo { if fu == lo { u } else { v } } else { solve_on_branch(map, i, a)? };
    let xb = if b == hi { if fu == hi { u } else { v } } else { solve_on_branch(map, i, b)? };
    let piece = [xa.min(xb), xa.max(xb)];
    if piece[1] - piece[0] < COLLAPSE_WIDTH {
        return Ok((None, true));
    }
    Ok((Some((piece, a == target[0] && b == target[1])), false))
}

/// Complete enumeration of the monotone pullbacks of `target` to `depth`:
/// every node is a maximal interval on which `f^n` is monotone with image in
/// the target. Stops (marking the tree incomplete) once more than
/// `node_cap` nodes would be stored.
pub fn interval_pullback(map: &IntervalMap, target: [f64; 2], depth: usize) -> Result<IntervalPullbackTree> {
    interval_pullback_capped(map, target, depth, usize::MAX)
}

pub fn interval_pullback_capped(
    map: &IntervalMap,
    target: [f64; 2],
    depth: usize,
    node_cap: usize,
) -> Result<IntervalPullbackTree> {
    let [a, b] = map.domain();
    if !(target[0] <= target[1]) || target[0] < a || target[1] > b {
        return Err(DynError::Precondition(format!(
            "target {target:?} is not inside the domain [{a}, {b}]"
        )));
    }
    let critical: Vec<f64> = map.critical().iter().map(|c| c.point).collect();
    let inside = |iv: [f64; 2]| -> Vec<f64> {
        critical
            .iter()
            .copied()
            .filter(|&c| c >= iv[0] - ENDPOINT_TOLERANCE && c <= iv[1] + ENDPOINT_TOLERANCE)
            .collect()
    };
    let mut tree = IntervalPullbackTree {
        root: target,
        depth,
        nodes: vec![IntervalNode {
            interval: target,
            depth: 0,
            parent: None,
            branch: None,
            covers_root: true,
            contains_critical: inside(target),
        }],
        complete: true,
        collapsed: 0,
    };
    let mut level: Vec<usize> = vec![0];
    for n in 1..=depth {
        let children: Vec<Vec<(IntervalNode, bool)>> = level
            .par_iter()
            .map(|&pi| {
                let parent = &tree.nodes[pi];
                let mut out = Vec::new();
                for bi in 0..map.branches().len() {
                    let (piece, collapsed) = branch_preimage(map, bi, parent.interval)?;
                    if let Some((iv, covers)) = piece {
                        out.push((
                            IntervalNode {
                                interval: iv,
                                depth: n,
                                parent: Some(pi),
                                branch: Some(bi),
                                covers_root: covers && parent.covers_root,
                                contains_critical: inside(iv),
                            },
                            false,
                        ));
                    } else if collapsed {
                        out.push((
                            IntervalNode {
                                interval: [0.0, 0.0],
                                depth: n,
                                parent: None,
                                branch: None,
                                covers_root: false,
                                contains_critical: Vec::new(),
                            },
                            true,
                        ));
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let mut fresh: Vec<IntervalNode> = Vec::new();
        for (node, collapsed) in children.into_iter().flatten() {
            if collapsed {
                tree.collapsed += 1;
            } else {
                fresh.push(node);
            }
        }
        if fresh.is_empty() {
            break;
        }
        if tree.nodes.len() + fresh.len() > node_cap {
            tree.complete = false;
            break;
        }
        fresh.sort_by(|x, y| x.interval[0].total_cmp(&y.interval[0]).then(x.interval[1].total_cmp(&y.interval[1])));
        let start = tree.nodes.len();
        tree.nodes.extend(fresh);
        level = (start..tree.nodes.len()).collect();
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn logistic_depth_one() {
        let f = IntervalMap::logistic(4.0).unwrap();
        let t = interval_pullback(&f, [0.9, 1.0], 1).unwrap();
        assert_eq!(t.count_at_depth(1), 2);
        let comps = t.components(1);
        assert_eq!(comps.len(), 1);
        // 4x(1 - x) = 0.9 at x = (1 ± sqrt(0.1)) / 2
        let r = 0.1f64.sqrt();
        assert!((comps[0].interval[0] - (1.0 - r) / 2.0).abs() < 1e-12);
        assert!((comps[0].interval[1] - (1.0 + r) / 2.0).abs() < 1e-12);
        assert_eq!(comps[0].contains_critical.len(), 1);
        let full = interval_pullback(&f, [0.0, 1.0], 1).unwrap();
        let comps = full.components(1);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].interval, [0.0, 1.0]);
    }

    #[test]
    fn full_interval_gives_all_laps() {
        let f = IntervalMap::logistic(4.0).unwrap();
        let t = interval_pullback(&f, [0.0, 1.0], 10).unwrap();
        for n in 0..=10 {
            assert_eq!(t.count_at_depth(n), 1 << n);
        }
        assert!(t.forward_audit(&f) < 1e-8);
    }

    #[test]
    fn partial_images_are_contained() {
        let f = IntervalMap::quadratic(-1.9).unwrap();
        let t = interval_pullback(&f, [-1.95, -1.5], 8).unwrap();
        assert!(t.complete);
        assert!(t.forward_audit(&f) < 1e-8, "{}", t.forward_audit(&f));
        assert!(t.nodes.iter().any(|n| !n.covers_root));
    }

    #[test]
    fn node_cap_marks_incomplete() {
        let f = IntervalMap::logistic(4.0).unwrap();
        let t = interval_pullback_capped(&f, [0.0, 1.0], 10, 100).unwrap();
        assert!(!t.complete);
        assert!(t.nodes.len() <= 100);
    }

    #[test]
    fn rejects_targets_outside_the_domain() {
        let f = IntervalMap::logistic(4.0).unwrap();
        assert!(interval_pullback(&f, [0.5, 1.5], 2).is_err());
    }

    proptest! {
        #[test]
        fn siblings_are_disjoint(lo in 0.0f64..0.9, width in 0.01f64..0.5, a in 3.6f64..4.0) {
            let f = IntervalMap::logistic(a).unwrap();
            let target = [lo, (lo + width).min(1.0)];
            let t = interval_pullback(&f, target, 6).unwrap();
            for n in 1..=6 {
                let nodes: Vec<&IntervalNode> = t.at_depth(n).map(|(_, x)| x).collect();
                for w in nodes.windows(2) {
                    prop_assert!(w[1].interval[0] >= w[0].interval[1] - ENDPOINT_TOLERANCE);
                }
            }
            prop_assert!(t.forward_audit(&f) < 1e-8);
        }

        #[test]
        fn solves_hit_the_value(y in 0.0f64..1.0) {
            let f = IntervalMap::logistic(4.0).unwrap();
            for b in 0..2 {
                let x = solve_on_branch(&f, b, y).unwrap();
                prop_assert!((f.eval(x) - y).abs() < 1e-12);
            }
        }
    }
}
