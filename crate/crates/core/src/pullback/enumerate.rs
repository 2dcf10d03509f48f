use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{dist_to_points, ChainStep, PullbackChain, PullbackEngine};
use crate::error::{DynError, Result};
use crate::geometry::JordanDisk;
use crate::poly::Polynomial;

/// Which component boundaries an enumeration keeps after it is done.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeepDisks {
    None,
    Deepest,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnumerateOptions {
    pub depth: usize,
    pub branch_cap: usize,
    pub keep: KeepDisks,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        Self {
            depth: 1,
            branch_cap: 100_000,
            keep: KeepDisks::None,
        }
    }
}

/// One component of `f^{-n}(target)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullbackNode {
    pub depth: usize,
    /// Index of the depth-`(n-1)` node it maps onto; `None` at depth 1.
    pub parent: Option<usize>,
    #[serde(with = "crate::cser::one")]
    pub basepoint: Complex64,
    pub diameter: f64,
    pub local_degree: usize,
    /// Degree of `f^n` from this component onto the target.
    pub total_degree: usize,
    #[serde(with = "crate::cser::vec")]
    pub critical_inside: Vec<Complex64>,
    pub dist_to_critical_values: f64,
    pub degree_consistent: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub disk: Option<JordanDisk>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullbackTree {
    pub target: JordanDisk,
    /// Sorted by depth, then basepoint lexicographically.
    pub nodes: Vec<PullbackNode>,
    pub counts_per_depth: Vec<usize>,
    pub depth: usize,
    pub branch_cap: usize,
    /// False when some depth was truncated at `branch_cap`.
    pub complete: bool,
}

impl PullbackTree {
    pub fn at_depth(&self, n: usize) -> impl Iterator<Item = (usize, &PullbackNode)> {
        self.nodes.iter().enumerate().filter(move |(_, node)| node.depth == n)
    }

    /// The chain from the target down to `node`. Needs `KeepDisks::All`.
    pub fn chain(&self, node: usize) -> Option<PullbackChain> {
        let mut idx = Some(node);
        let mut path = Vec::new();
        while let Some(i) = idx {
            path.push(i);
            idx = self.nodes[i].parent;
        }
        path.reverse();
        let mut steps = Vec::with_capacity(path.len());
        for &i in &path {
            let n = &self.nodes[i];
            steps.push(ChainStep {
                component: n.disk.clone()?,
                local_degree: n.local_degree,
                contains_critical: n.critical_inside.clone(),
                diameter: n.diameter,
                dist_to_critical_values: n.dist_to_critical_values,
            });
        }
        Some(PullbackChain {
            target: self.target.clone(),
            total_degree: self.nodes[node].total_degree,
            steps,
        })
    }
}

struct Child {
    parent: Option<usize>,
    pullback: super::Pullback,
    total_degree: usize,
}

fn lex(a: Complex64, b: Complex64) -> std::cmp::Ordering {
    a.re.partial_cmp(&b.re)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
}

impl PullbackEngine {
    /// Components of `f^{-1}(disk)`, seeded from all preimages of its basepoint.
    pub fn components(&self, disk: &JordanDisk) -> Result<Vec<super::Pullback>> {
        let pre = self.poly.preimages(disk.basepoint())?;
        let mut covered = vec![false; pre.len()];
        let mut out = Vec::new();
        for i in 0..pre.len() {
            if covered[i] {
                continue;
            }
            let pb = self.step(disk, pre[i])?;
            covered[i] = true;
            for (j, &z) in pre.iter().enumerate() {
                if !covered[j] && pb.component.contains(z) {
                    covered[j] = true;
                }
            }
            out.push(pb);
        }
        Ok(out)
    }

    /// Breadth-first enumeration of all components of `f^{-n}(disk)` for
    /// `1 <= n <= depth`. The frontier is expanded in parallel and merged in a
    /// fixed order, so the output does not depend on the thread count.
    pub fn enumerate(&self, disk: &JordanDisk, opts: &EnumerateOptions) -> Result<PullbackTree> {
        if opts.depth == 0 {
            return Err(DynError::Precondition("depth must be at least 1".into()));
        }
        let mut nodes: Vec<PullbackNode> = Vec::new();
        let mut counts = Vec::with_capacity(opts.depth);
        let mut complete = true;
        // (node index, disk, total degree); the root has no index
        let mut frontier: Vec<(Option<usize>, JordanDisk, usize)> = vec![(None, disk.clone(), 1)];

        for depth in 1..=opts.depth {
            let expanded: Vec<Vec<Child>> = frontier
                .par_iter()
                .map(|(idx, parent_disk, deg)| {
                    Ok(self
                        .components(parent_disk)?
                        .into_iter()
                        .map(|pb| Child {
                            parent: *idx,
                            total_degree: deg * pb.local_degree,
                            pullback: pb,
                        })
                        .collect())
                })
                .collect::<Result<_>>()?;
            let mut children: Vec<Child> = expanded.into_iter().flatten().collect();
            children.sort_by(|a, b| lex(a.pullback.component.basepoint(), b.pullback.component.basepoint()));
            children.dedup_by(|b, a| {
                let (za, zb) = (a.pullback.component.basepoint(), b.pullback.component.basepoint());
                (za - zb).norm_sqr().sqrt() <= 1e-9 * za.norm_sqr().sqrt().max(1.0)
            });
            if children.len() > opts.branch_cap {
                children.truncate(opts.branch_cap);
                complete = false;
            }
            counts.push(children.len());

            let keep_disk = match opts.keep {
                KeepDisks::All => true,
                KeepDisks::Deepest => depth == opts.depth,
                KeepDisks::None => false,
            };
            let mut next = Vec::with_capacity(children.len());
            for child in children {
                let pb = child.pullback;
                let index = nodes.len();
                nodes.push(PullbackNode {
                    depth,
                    parent: child.parent,
                    basepoint: pb.component.basepoint(),
                    diameter: pb.component.diameter(),
                    local_degree: pb.local_degree,
                    total_degree: child.total_degree,
                    critical_inside: pb.critical_inside.iter().map(|c| c.point).collect(),
                    dist_to_critical_values: dist_to_points(&pb.component, &self.critical_values),
                    degree_consistent: pb.degree_is_consistent(),
                    disk: keep_disk.then(|| pb.component.clone()),
                });
                if depth < opts.depth {
                    next.push((Some(index), pb.component, child.total_degree));
                }
            }
            frontier = next;
        }
        Ok(PullbackTree {
            target: disk.clone(),
            nodes,
            counts_per_depth: counts,
            depth: opts.depth,
            branch_cap: opts.branch_cap,
            complete,
        })
    }
}

pub fn enumerate_pullbacks(
    poly: &Polynomial,
    disk: &JordanDisk,
    depth: usize,
    branch_cap: usize,
) -> Result<PullbackTree> {
    let engine = PullbackEngine::new(poly)?;
    engine.enumerate(
        disk,
        &EnumerateOptions {
            depth,
            branch_cap,
            keep: KeepDisks::All,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn central_disk_has_one_connected_preimage() {
        let f = Polynomial::quadratic(c(0.0, 0.0));
        let disk = JordanDisk::circle(c(0.0, 0.0), 0.25).unwrap();
        let tree = enumerate_pullbacks(&f, &disk, 1, 100).unwrap();
        assert_eq!(tree.counts_per_depth, vec![1]);
        assert_eq!(tree.nodes[0].local_degree, 2);
        assert!((tree.nodes[0].diameter - 1.0).abs() < 1e-6);
    }

    #[test]
    fn two_square_root_branches() {
        let f = Polynomial::quadratic(c(0.0, 0.0));
        let disk = JordanDisk::circle(c(1.0, 0.0), 0.1).unwrap();
        let tree = enumerate_pullbacks(&f, &disk, 1, 100).unwrap();
        assert_eq!(tree.counts_per_depth, vec![2]);
        assert!((tree.nodes[0].basepoint - c(-1.0, 0.0)).norm_sqr().sqrt() < 1e-12);
        assert!((tree.nodes[1].basepoint - c(1.0, 0.0)).norm_sqr().sqrt() < 1e-12);
    }

    #[test]
    fn chebyshev_counts_and_chain_reconstruction() {
        let f = Polynomial::quadratic(c(-2.0, 0.0));
        let disk = JordanDisk::circle(c(2.0, 0.0), 0.1).unwrap();
        let tree = enumerate_pullbacks(&f, &disk, 3, 100).unwrap();
        // 2 seeds per parent give 2, 4, 8 chains; the critical pullback at
        // depth 2 merges two of them
        assert_eq!(tree.counts_per_depth, vec![2, 3, 5]);
        assert!(tree.complete);
        let seeds_at_3: usize = tree.at_depth(3).map(|(_, n)| n.total_degree).sum();
        assert_eq!(seeds_at_3, 8);
        for (i, node) in tree.nodes.iter().enumerate() {
            assert!(node.degree_consistent);
            let chain = tree.chain(i).unwrap();
            assert_eq!(chain.steps.len(), node.depth);
            let product: usize = chain.steps.iter().map(|s| s.local_degree).product();
            assert_eq!(product, chain.total_degree);
        }
        let capped = enumerate_pullbacks(&f, &disk, 3, 4).unwrap();
        assert!(!capped.complete);
        assert_eq!(capped.counts_per_depth, vec![2, 3, 4]);
    }

    #[test]
    fn forward_images_lie_on_parent_boundaries() {
        let f = Polynomial::quadratic(c(0.0, 1.0));
        let disk = JordanDisk::circle(c(0.0, 1.0), 0.3).unwrap();
        let tree = enumerate_pullbacks(&f, &disk, 3, 100).unwrap();
        for node in &tree.nodes {
            let parent = match node.parent {
                Some(p) => tree.nodes[p].disk.as_ref().unwrap(),
                None => &tree.target,
            };
            let tol = 1e-6 * parent.diameter();
            for &z in node.disk.as_ref().unwrap().boundary() {
                assert!(parent.polyline_distance(f.eval(z)) < tol);
            }
        }
    }
}
