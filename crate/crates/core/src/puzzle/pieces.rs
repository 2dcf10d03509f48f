use std::collections::{BTreeSet, HashMap};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rays::{refine_periodic, Angle, Bottcher, LANDING_TOLERANCE, RAY_STEPS_PER_LEVEL};
use crate::critical::{classify_critical_points, ClassifyOptions, CriticalFate};
use crate::error::{DynError, Result};
use crate::geometry::{segment_distance, JordanDisk};
use crate::poly::Polynomial;

/// Images of child boundaries must lie this close to their parent's boundary.
pub const MARKOV_TOLERANCE: f64 = 1e-5;
/// Boundary iterates closer than this fraction of `diam V` to `∂V` count as
/// on the boundary in [`nice_check`].
pub const NICE_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PuzzleOptions {
    pub arc_samples: usize,
    /// Ray segments of a depth-`n` piece run from `ε_n` down to `ε_n d^{-ray_levels}`.
    pub ray_levels: usize,
    /// Depth-0 rays are traced at least down to this potential to verify landing.
    pub landing_floor: f64,
    /// The critical nest counts as stalled when `diam P_n(c)` stays above
    /// `stall_ratio · diam P_{n - stall_window}(c)`. Nests of non-renormalizable
    /// maps can keep their diameter for a few levels before shrinking.
    pub stall_ratio: f64,
    pub stall_window: usize,
}

impl Default for PuzzleOptions {
    fn default() -> Self {
        Self {
            arc_samples: 32,
            ray_levels: 40,
            landing_floor: 1e-14,
            stall_ratio: 0.99,
            stall_window: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SampleLabel {
    Arc { turns: f64 },
    Ray { angle: Angle, potential: f64 },
    Landing { angle: Angle },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundarySegment {
    /// Counterclockwise along `{G = potential}`.
    Arc { from: Angle, to: Angle, potential: f64 },
    Ray { angle: Angle, descending: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PuzzlePiece {
    pub depth: usize,
    pub index: usize,
    pub segments: Vec<BoundarySegment>,
    pub disk: JordanDisk,
    /// One label per vertex of `disk`.
    pub labels: Vec<SampleLabel>,
    /// `address[k]` is the depth-0 piece containing `f^k` of this piece.
    pub address: Vec<usize>,
    #[serde(with = "crate::cser::vec")]
    pub contains: Vec<Complex64>,
    /// Index of the containing piece one level up.
    pub parent: Option<usize>,
    /// Index of `f(P)` at depth `n - 1`.
    pub image: Option<usize>,
    pub degree: Option<usize>,
}

impl PuzzlePiece {
    /// Arc start angles, the symbolic identity of the piece.
    pub fn arc_angles(&self) -> Vec<Angle> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                BoundarySegment::Arc { from, .. } => Some(*from),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandingRecord {
    pub angle: Angle,
    #[serde(with = "crate::cser::one")]
    pub point: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalNest {
    #[serde(with = "crate::cser::one")]
    pub point: Complex64,
    /// `diam P_n(c)` for each built depth, `None` where `c` lies in no piece.
    pub diameters: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Puzzle {
    pub poly: Polynomial,
    /// The forward-invariant closure of the requested cut angles.
    pub cut_angles: Vec<Angle>,
    pub epsilon: f64,
    pub options: PuzzleOptions,
    pub depth_requested: usize,
    pub levels: Vec<Vec<PuzzlePiece>>,
    pub landing: Vec<LandingRecord>,
    pub critical_nests: Vec<CriticalNest>,
    /// Depth at which refinement stopped because a critical nest stalled.
    pub suspected_renormalization: Option<usize>,
    pub notes: Vec<String>,
}

impl Puzzle {
    pub fn depth_built(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn pieces(&self) -> impl Iterator<Item = &PuzzlePiece> {
        self.levels.iter().flatten()
    }

    pub fn piece(&self, depth: usize, index: usize) -> Option<&PuzzlePiece> {
        self.levels.get(depth)?.get(index)
    }

    pub fn landing_point(&self, angle: Angle) -> Option<Complex64> {
        self.landing
            .binary_search_by(|r| r.angle.cmp(&angle))
            .ok()
            .map(|i| self.landing[i].point)
    }

    /// Potential of the equipotential bounding depth-`n` pieces.
    pub fn level_potential(&self, n: usize) -> f64 {
        self.epsilon / (self.poly.degree() as f64).powi(n as i32)
    }

    /// [`nice_check`] for a piece, with landing points iterated through the
    /// landing table instead of numerically: they sit on repelling orbits,
    /// where plain iteration drifts off the graph.
    pub fn nice_check_piece(&self, depth: usize, index: usize, horizon: usize) -> Result<NiceReport> {
        let piece = self
            .piece(depth, index)
            .ok_or_else(|| DynError::Precondition(format!("no piece ({depth}, {index})")))?;
        let d = self.poly.degree() as u64;
        let mut landing_orbits = Vec::new();
        let mut samples = Vec::new();
        for (&z, label) in piece.disk.boundary().iter().zip(&piece.labels) {
            match label {
                SampleLabel::Landing { angle } => landing_orbits.push(*angle),
                _ => samples.push(z),
            }
        }
        if horizon == 0 {
            return Err(DynError::Precondition("nice_check needs horizon >= 1".into()));
        }
        let mut report = NiceReport {
            nice: true,
            horizon,
            samples: piece.labels.len(),
            violation: None,
        };
        let tol = NICE_TOLERANCE * piece.disk.diameter();
        let check = |w: Complex64| piece.disk.contains(w) && piece.disk.polyline_distance(w) > tol;
        let escape = self.poly.escape_radius();
        'numeric: for (i, &z) in samples.iter().enumerate() {
            let mut w = z;
            for k in 1..=horizon {
                w = self.poly.eval(w);
                if w.norm() > escape {
                    break;
                }
                if check(w) {
                    report.violation = Some(NiceViolation { sample: i, time: k, point: w });
                    break 'numeric;
                }
            }
        }
        if report.violation.is_none() {
            'symbolic: for (i, &angle) in landing_orbits.iter().enumerate() {
                let mut t = angle;
                for k in 1..=horizon {
                    t = t.times(d);
                    let w = self
                        .landing_point(t)
                        .ok_or_else(|| DynError::Puzzle(format!("angle {t} missing from the landing table")))?;
                    if check(w) {
                        report.violation = Some(NiceViolation {
                            sample: samples.len() + i,
                            time: k,
                            point: w,
                        });
                        break 'symbolic;
                    }
                }
            }
        }
        report.nice = report.violation.is_none();
        Ok(report)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NiceViolation {
    pub sample: usize,
    pub time: usize,
    #[serde(with = "crate::cser::one")]
    pub point: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NiceReport {
    pub nice: bool,
    pub horizon: usize,
    pub samples: usize,
    pub violation: Option<NiceViolation>,
}

/// Iterates the boundary vertices of `V` up to `horizon` times. An iterate
/// violates niceness when it lies inside `V` farther than
/// `NICE_TOLERANCE · diam V` from the boundary. Orbits stop once they leave
/// the escape radius.
pub fn nice_check(poly: &Polynomial, v: &JordanDisk, horizon: usize) -> Result<NiceReport> {
    if horizon == 0 {
        return Err(DynError::Precondition("nice_check needs horizon >= 1".into()));
    }
    let tol = NICE_TOLERANCE * v.diameter();
    let escape = poly.escape_radius();
    let mut violation = None;
    'outer: for (i, &z) in v.boundary().iter().enumerate() {
        let mut w = z;
        for k in 1..=horizon {
            w = poly.eval(w);
            if w.norm() > escape {
                break;
            }
            if v.contains(w) && v.polyline_distance(w) > tol {
                violation = Some(NiceViolation { sample: i, time: k, point: w });
                break 'outer;
            }
        }
    }
    Ok(NiceReport {
        nice: violation.is_none(),
        horizon,
        samples: v.len(),
        violation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovRecord {
    pub depth: usize,
    pub index: usize,
    /// Depth `n - 1` piece whose boundary is closest to `f(∂P)`.
    pub image: Option<usize>,
    pub hausdorff: f64,
    /// Lower bound on the distance to every other depth `n - 1` piece.
    pub runner_up: f64,
    /// Exactly one candidate is within [`MARKOV_TOLERANCE`].
    pub unique: bool,
    pub matches_symbolic: bool,
}

/// Max over `pts` of the distance to the closed polyline `ring`.
fn directed_distance(pts: &[Complex64], ring: &[Complex64]) -> f64 {
    let n = ring.len();
    pts.iter()
        .map(|&p| {
            (0..n)
                .map(|i| segment_distance(p, ring[i], ring[(i + 1) % n]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

fn bbox_of(pts: &[Complex64]) -> [f64; 4] {
    let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for z in pts {
        b[0] = b[0].min(z.re);
        b[1] = b[1].min(z.im);
        b[2] = b[2].max(z.re);
        b[3] = b[3].max(z.im);
    }
    b
}

fn bbox_gap(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let dx = (b[0] - a[2]).max(a[0] - b[2]).max(0.0);
    let dy = (b[1] - a[3]).max(a[1] - b[3]).max(0.0);
    dx.hypot(dy)
}

/// Compares `f(∂P)` with every depth `n - 1` boundary, for every piece of
/// depth `n >= 1`. Candidates are screened with a subsampled lower bound and
/// only plausible ones get the full two-sided Hausdorff distance.
pub fn markov_audit(puzzle: &Puzzle) -> Vec<MarkovRecord> {
    let poly = &puzzle.poly;
    let tasks: Vec<&PuzzlePiece> = puzzle.levels.iter().skip(1).flatten().collect();
    tasks
        .par_iter()
        .map(|piece| {
            let mapped: Vec<Complex64> = piece.disk.boundary().iter().map(|&z| poly.eval(z)).collect();
            let mb = bbox_of(&mapped);
            let coarse: Vec<Complex64> = mapped.iter().step_by(8).copied().collect();
            let mut full: Vec<(f64, usize)> = Vec::new();
            let mut runner_up = f64::INFINITY;
            for q in &puzzle.levels[piece.depth - 1] {
                let gap = bbox_gap(&mb, &q.disk.bounding_box());
                let lower = if gap > MARKOV_TOLERANCE {
                    gap
                } else {
                    let qc: Vec<Complex64> = q.disk.boundary().iter().step_by(8).copied().collect();
                    directed_distance(&qc, &mapped).max(directed_distance(&coarse, q.disk.boundary()))
                };
                if lower > MARKOV_TOLERANCE {
                    runner_up = runner_up.min(lower);
                    continue;
                }
                let h = directed_distance(&mapped, q.disk.boundary()).max(directed_distance(q.disk.boundary(), &mapped));
                full.push((h, q.index));
            }
            full.sort_by(|a, b| a.0.total_cmp(&b.0));
            if let Some(&(h, _)) = full.get(1) {
                runner_up = runner_up.min(h);
            }
            let best = full.first().copied();
            let unique = best.is_some_and(|(h, _)| h < MARKOV_TOLERANCE) && runner_up >= MARKOV_TOLERANCE;
            MarkovRecord {
                depth: piece.depth,
                index: piece.index,
                image: best.map(|b| b.1),
                hausdorff: best.map_or(f64::INFINITY, |b| b.0),
                runner_up,
                unique,
                matches_symbolic: best.map(|b| b.1) == piece.image,
            }
        })
        .collect()
}

/// Ray points on the lattice `ε d^{-k/S}`, `k = first..=last`.
struct RayTrack {
    first: usize,
    points: Vec<Complex64>,
}

impl RayTrack {
    fn at(&self, k: usize) -> Complex64 {
        self.points[k - self.first]
    }

    fn tail(&self) -> Complex64 {
        *self.points.last().unwrap()
    }
}

fn key(z: Complex64) -> (u64, u64) {
    (z.re.to_bits(), z.im.to_bits())
}

/// The largest angle of the sorted set that is `<= t`, cyclically.
fn arc_start(sorted: &[Angle], t: Angle) -> Angle {
    let i = sorted.partition_point(|&a| a <= t);
    if i == 0 {
        *sorted.last().unwrap()
    } else {
        sorted[i - 1]
    }
}

fn mid_angle(a: Angle, b: Angle) -> Result<Angle> {
    // (a + b') / 2 with b' = b or b + 1 so that b' > a
    let den = a.den() as u128 * b.den() as u128 * 2;
    let mut num = a.num() as u128 * b.den() as u128 + b.num() as u128 * a.den() as u128;
    if b <= a {
        num += a.den() as u128 * b.den() as u128;
    }
    let g = {
        let (mut x, mut y) = (num, den);
        while y != 0 {
            (x, y) = (y, x % y);
        }
        x.max(1)
    };
    let (num, den) = (num / g, den / g);
    if den > u64::MAX as u128 {
        return Err(DynError::Puzzle("angle denominators overflow; reduce the depth".into()));
    }
    Angle::new((num % den) as u64, den as u64)
}

pub fn build_puzzle(poly: &Polynomial, cut_angles: &[Angle], epsilon: f64, depth: usize) -> Result<Puzzle> {
    build_puzzle_with(poly, cut_angles, epsilon, depth, &PuzzleOptions::default())
}

/// Depth-0 pieces are the components of `{G < ε}` cut along the rays of the
/// forward-invariant closure `A_0` of `cut_angles`; depth-`n` pieces are cut
/// by `A_n = {t : d^n t ∈ A_0}` inside `{G < ε / d^n}`.
///
/// Pieces are traced symbolically: walking counterclockwise along the arc
/// from `a` to the next angle `b` of `A_n`, down the ray `b` to its landing
/// point and back up the ray landing there just before `b` in the cyclic
/// order of angles.
pub fn build_puzzle_with(
    poly: &Polynomial,
    cut_angles: &[Angle],
    epsilon: f64,
    depth: usize,
    opts: &PuzzleOptions,
) -> Result<Puzzle> {
    if !(epsilon > 0.0) || cut_angles.is_empty() || opts.arc_samples < 2 || opts.ray_levels == 0 {
        return Err(DynError::Precondition(
            "build_puzzle needs epsilon > 0, at least one cut angle, arc_samples >= 2 and ray_levels >= 1".into(),
        ));
    }
    let set = classify_critical_points(poly, &ClassifyOptions::default())?;
    for (cp, fate) in set.all_critical.iter().zip(&set.fates) {
        match fate {
            CriticalFate::Attracted { .. } => {
                return Err(DynError::Puzzle(format!(
                    "critical point {} is attracted to a cycle; bounded Fatou components are not supported",
                    cp.point
                )))
            }
            CriticalFate::Escapes { .. } => {
                return Err(DynError::Puzzle(format!(
                    "critical point {} escapes; the Julia set is disconnected",
                    cp.point
                )))
            }
            CriticalFate::Bounded { .. } => {}
        }
    }
    let d = poly.degree() as u64;
    let s = RAY_STEPS_PER_LEVEL;
    let bottcher = Bottcher::new(poly);
    let mut notes = Vec::new();

    let mut closure: BTreeSet<Angle> = cut_angles.iter().copied().collect();
    loop {
        let images: Vec<Angle> = closure.iter().map(|t| t.times(d)).filter(|t| !closure.contains(t)).collect();
        if images.is_empty() {
            break;
        }
        closure.extend(images);
        if closure.len() > 256 {
            return Err(DynError::Puzzle("forward closure of the cut angles exceeds 256 angles".into()));
        }
    }
    if closure.len() > cut_angles.len() {
        notes.push(format!("cut angles closed under t -> {d}t: {} angles", closure.len()));
    }

    let mut sets: Vec<Vec<Angle>> = vec![closure.iter().copied().collect()];
    for n in 1..=depth {
        let mut next = BTreeSet::new();
        for t in &sets[n - 1] {
            next.extend(t.preimages(d)?);
        }
        sets.push(next.into_iter().collect());
    }
    let mut first_level: HashMap<Angle, usize> = HashMap::new();
    for (n, set_n) in sets.iter().enumerate() {
        for &t in set_n {
            first_level.entry(t).or_insert(n);
        }
    }

    // ray lattices: every ray runs to the deepest level; depth-0 rays go at
    // least to the landing floor
    let floor_index = (s as f64 * (epsilon / opts.landing_floor).ln() / (d as f64).ln()).ceil().max(0.0) as usize;
    let last_index = (depth + opts.ray_levels) * s;
    let all_angles: Vec<Angle> = sets[depth].clone();
    let tracks: Vec<RayTrack> = all_angles
        .par_iter()
        .map(|&t| {
            let first = first_level[&t] * s;
            let last = if first == 0 { last_index.max(floor_index) } else { last_index };
            let potentials: Vec<f64> = (first..=last)
                .map(|k| epsilon * (d as f64).powf(-(k as f64) / s as f64))
                .collect();
            Ok(RayTrack {
                first,
                points: bottcher.ray_points(t, &potentials)?,
            })
        })
        .collect::<Result<_>>()?;
    let track: HashMap<Angle, &RayTrack> = all_angles.iter().copied().zip(&tracks).collect();

    // landing points of A_0: periodic angles by Newton, then preperiodic
    // ones as preimages in order of preperiod
    let mut landing: HashMap<Angle, Complex64> = HashMap::new();
    let mut by_preperiod: Vec<(usize, Angle)> = sets[0].iter().map(|&t| (t.orbit_type(d).0, t)).collect();
    by_preperiod.sort();
    let critical: Vec<Complex64> = set.all_critical.iter().map(|c| c.point).collect();
    for &(pre, t) in &by_preperiod {
        let tr = track[&t];
        let m = tr.points.len();
        let ends = [tr.points[m - 1 - 2 * s], tr.points[m - 1 - s], tr.points[m - 1]];
        let spread = (ends[0] - ends[1])
            .norm()
            .max((ends[1] - ends[2]).norm())
            .max((ends[0] - ends[2]).norm());
        if spread >= LANDING_TOLERANCE {
            return Err(DynError::RayNotLanded(format!("{t} (spread {spread:e})")));
        }
        let x = if pre == 0 {
            let (_, period) = t.orbit_type(d);
            let (x, multiplier) = refine_periodic(poly, period, tr.tail())
                .ok_or_else(|| DynError::Puzzle(format!("periodic point for ray {t} not found")))?;
            if (x - tr.tail()).norm() > 1e-4 {
                return Err(DynError::Puzzle(format!("ray {t} does not end near a periodic point")));
            }
            if !(multiplier > 1.0 + 1e-9) {
                return Err(DynError::Puzzle(format!(
                    "ray {t} lands at a non-repelling point (|multiplier| = {multiplier})"
                )));
            }
            x
        } else {
            choose_preimage(poly, &critical, landing[&t.times(d)], tr.tail(), t)?
        };
        landing.insert(t, x);
    }
    // identical landing points must be bitwise equal so that the groups below
    // are exact
    let mut reps: Vec<Complex64> = Vec::new();
    for t in &sets[0] {
        let x = landing[t];
        match reps.iter().find(|r| (**r - x).norm() < 1e-8) {
            Some(&r) => {
                landing.insert(*t, r);
            }
            None => reps.push(x),
        }
    }
    for n in 1..=depth {
        for &t in &sets[n] {
            if first_level[&t] == n {
                let x = choose_preimage(poly, &critical, landing[&t.times(d)], track[&t].tail(), t)?;
                landing.insert(t, x);
            }
        }
    }

    let mut levels: Vec<Vec<PuzzlePiece>> = Vec::new();
    let mut owners: Vec<HashMap<Angle, usize>> = Vec::new();
    let mut critical_nests: Vec<CriticalNest> = critical
        .iter()
        .map(|&c| CriticalNest {
            point: c,
            diameters: Vec::new(),
        })
        .collect();
    let mut suspected_renormalization = None;

    for n in 0..=depth {
        let angles = &sets[n];
        let g_n = epsilon / (d as f64).powi(n as i32);
        let next: HashMap<Angle, Angle> = angles
            .iter()
            .enumerate()
            .map(|(i, &a)| (a, angles[(i + 1) % angles.len()]))
            .collect();
        let mut groups: HashMap<(u64, u64), Vec<Angle>> = HashMap::new();
        for &a in angles {
            groups.entry(key(landing[&a])).or_default().push(a);
        }
        if n == 0 {
            if let Some(lonely) = groups.values().find(|g| g.len() < 2) {
                return Err(DynError::Puzzle(format!(
                    "ray {} is the only cut ray landing at its point, so it cuts nothing",
                    lonely[0]
                )));
            }
        }
        let prev_at_landing = |b: Angle| -> Angle {
            let g = &groups[&key(landing[&b])];
            let i = g.iter().position(|&x| x == b).unwrap();
            g[(i + g.len() - 1) % g.len()]
        };

        let arcs: Vec<Vec<Complex64>> = angles
            .par_iter()
            .map(|&a| {
                let b = next[&a];
                let start = track[&a].at(n * s);
                let arc = bottcher.arc_points(g_n, a, a.gap_to(b), opts.arc_samples, start)?;
                let end = track[&b].at(n * s);
                let miss = (arc[opts.arc_samples] - end).norm();
                if miss > 1e-9 * end.norm().max(1.0) {
                    return Err(DynError::Puzzle(format!(
                        "equipotential arc from {a} misses ray {b} by {miss:e}"
                    )));
                }
                Ok(arc)
            })
            .collect::<Result<_>>()?;
        let arc_of: HashMap<Angle, &Vec<Complex64>> = angles.iter().copied().zip(&arcs).collect();

        // cycles of the successor permutation, each started at its least angle
        let mut cycles: Vec<Vec<Angle>> = Vec::new();
        let mut seen: BTreeSet<Angle> = BTreeSet::new();
        for &a in angles {
            if seen.contains(&a) {
                continue;
            }
            let mut cycle = Vec::new();
            let mut x = a;
            while seen.insert(x) {
                cycle.push(x);
                x = prev_at_landing(next[&x]);
            }
            if x != a {
                return Err(DynError::Puzzle(format!("boundary walk from {a} does not close")));
            }
            cycles.push(cycle);
        }

        let built: Vec<(Vec<BoundarySegment>, Vec<Complex64>, Vec<SampleLabel>, Angle)> = cycles
            .iter()
            .map(|cycle| {
                let mut segments = Vec::new();
                let mut points = Vec::new();
                let mut labels = Vec::new();
                for &a in cycle {
                    let b = next[&a];
                    let up = prev_at_landing(b);
                    let arc = arc_of[&a];
                    let gap = a.gap_to(b);
                    segments.push(BoundarySegment::Arc {
                        from: a,
                        to: b,
                        potential: g_n,
                    });
                    points.push(arc[0]);
                    labels.push(SampleLabel::Ray {
                        angle: a,
                        potential: g_n,
                    });
                    for (j, &z) in arc.iter().enumerate().take(opts.arc_samples).skip(1) {
                        points.push(z);
                        labels.push(SampleLabel::Arc {
                            turns: (a.turns() + gap * j as f64 / opts.arc_samples as f64).rem_euclid(1.0),
                        });
                    }
                    let lattice = n * s..=(n + opts.ray_levels) * s;
                    segments.push(BoundarySegment::Ray {
                        angle: b,
                        descending: true,
                    });
                    let x = landing[&b];
                    // ray points this close to the landing point carry no
                    // shape information and may repeat it exactly
                    let cut = 1e-10 * x.norm().max(1.0);
                    for k in lattice.clone() {
                        if (track[&b].at(k) - x).norm() <= cut {
                            continue;
                        }
                        points.push(track[&b].at(k));
                        labels.push(SampleLabel::Ray {
                            angle: b,
                            potential: epsilon * (d as f64).powf(-(k as f64) / s as f64),
                        });
                    }
                    points.push(x);
                    labels.push(SampleLabel::Landing { angle: b });
                    segments.push(BoundarySegment::Ray {
                        angle: up,
                        descending: false,
                    });
                    for k in lattice.rev().take_while(|&k| k > n * s) {
                        if (track[&up].at(k) - x).norm() <= cut {
                            continue;
                        }
                        points.push(track[&up].at(k));
                        labels.push(SampleLabel::Ray {
                            angle: up,
                            potential: epsilon * (d as f64).powf(-(k as f64) / s as f64),
                        });
                    }
                }
                (segments, points, labels, cycle[0])
            })
            .collect();

        let disks: Vec<JordanDisk> = built
            .par_iter()
            .map(|(_, points, _, a)| {
                let mid = mid_angle(*a, next[a])?;
                let basepoint = bottcher.ray_points(mid, &[g_n / (d as f64).sqrt()])?[0];
                let disk = JordanDisk::from_polyline(points.clone(), basepoint)
                    .map_err(|e| DynError::Puzzle(format!("depth {n} piece at {a}: {e}")))?;
                if disk.len() != points.len() || disk.boundary()[..2] != points[..2] {
                    return Err(DynError::Puzzle(format!(
                        "depth {n} piece at {a}: boundary samples were merged or reordered"
                    )));
                }
                Ok(disk)
            })
            .collect::<Result<_>>()?;

        for i in 0..disks.len() {
            for j in 0..disks.len() {
                if i != j
                    && bbox_gap(&disks[i].bounding_box(), &disks[j].bounding_box()) == 0.0
                    && disks[i].contains(disks[j].basepoint())
                {
                    return Err(DynError::Puzzle(format!(
                        "depth {n} pieces {i} and {j} overlap"
                    )));
                }
            }
        }

        let mut owner: HashMap<Angle, usize> = HashMap::new();
        for (i, cycle) in cycles.iter().enumerate() {
            for &a in cycle {
                owner.insert(a, i);
            }
        }
        let gap_sum = |cycle: &[Angle]| -> f64 { cycle.iter().map(|&a| a.gap_to(next[&a])).sum() };
        let mut pieces = Vec::with_capacity(cycles.len());
        for (i, ((segments, _, labels, a), disk)) in built.into_iter().zip(disks).enumerate() {
            let mid = mid_angle(a, next[&a])?;
            let address = (0..=n)
                .map(|k| owners.first().unwrap_or(&owner)[&arc_start(&sets[0], mid.times_pow(d, k as u32))])
                .collect();
            let (parent, image, degree) = if n == 0 {
                (None, None, None)
            } else {
                let up = &levels[n - 1];
                let parent = owners[n - 1][&arc_start(&sets[n - 1], mid)];
                let holders: Vec<usize> = up
                    .iter()
                    .filter(|q: &&PuzzlePiece| q.disk.contains(disk.basepoint()))
                    .map(|q| q.index)
                    .collect();
                if holders != [parent] {
                    return Err(DynError::Puzzle(format!(
                        "depth {n} piece {i} lies in depth {} pieces {holders:?}, expected [{parent}]",
                        n - 1
                    )));
                }
                let image = owners[n - 1][&a.times(d)];
                let image_total: f64 = up[image]
                    .segments
                    .iter()
                    .filter_map(|s| match s {
                        BoundarySegment::Arc { from, to, .. } => Some(from.gap_to(*to)),
                        _ => None,
                    })
                    .sum();
                let degree = (d as f64 * gap_sum(&cycles[i]) / image_total).round() as usize;
                (Some(parent), Some(image), Some(degree))
            };
            let contains = critical.iter().copied().filter(|&c| disk.contains(c)).collect();
            pieces.push(PuzzlePiece {
                depth: n,
                index: i,
                segments,
                disk,
                labels,
                address,
                contains,
                parent,
                image,
                degree,
            });
        }

        for nest in critical_nests.iter_mut() {
            let diam = pieces.iter().find(|p| p.contains.contains(&nest.point)).map(|p| p.disk.diameter());
            nest.diameters.push(diam);
        }
        levels.push(pieces);
        owners.push(owner);

        let w = opts.stall_window;
        if w > 0 && n >= w {
            let stalled = critical_nests.iter().find(|nest| match (nest.diameters[n - w], nest.diameters[n]) {
                (Some(before), Some(now)) => now >= opts.stall_ratio * before,
                _ => false,
            });
            if let Some(nest) = stalled {
                notes.push(format!(
                    "critical piece around {} stopped shrinking at depth {n}: suspected renormalization, refinement stopped",
                    nest.point
                ));
                suspected_renormalization = Some(n);
                break;
            }
        }
    }

    let mut landing: Vec<LandingRecord> = landing
        .into_iter()
        .map(|(angle, point)| LandingRecord { angle, point })
        .collect();
    landing.sort_by(|a, b| a.angle.cmp(&b.angle));
    Ok(Puzzle {
        poly: poly.clone(),
        cut_angles: sets[0].clone(),
        epsilon,
        options: *opts,
        depth_requested: depth,
        levels,
        landing,
        critical_nests,
        suspected_renormalization,
        notes,
    })
}

/// The preimage of `target` that the ray of `angle` ends at. A preimage near
/// a critical point is snapped to it, so that all rays landing at a critical
/// point share one vertex.
fn choose_preimage(
    poly: &Polynomial,
    critical: &[Complex64],
    target: Complex64,
    tail: Complex64,
    angle: Angle,
) -> Result<Complex64> {
    let mut candidates = poly.preimages(target)?;
    for z in candidates.iter_mut() {
        if let Some(&c) = critical.iter().find(|&&c| (c - *z).norm() < 1e-6) {
            *z = c;
        }
    }
    candidates.sort_by(|a, b| (a - tail).norm().total_cmp(&(b - tail).norm()));
    candidates.dedup();
    let best = candidates[0];
    let dist = (best - tail).norm();
    let runner_up = candidates.get(1).map_or(f64::INFINITY, |z| (z - tail).norm());
    if dist > 1e-4 || runner_up < 10.0 * dist {
        return Err(DynError::Puzzle(format!(
            "landing point of ray {angle} is ambiguous (nearest preimage at {dist:e}, next at {runner_up:e})"
        )));
    }
    Ok(best)
}
