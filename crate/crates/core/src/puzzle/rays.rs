use std::cmp::Ordering;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{DynError, Result};
use crate::poly::Polynomial;

/// A rational angle `num/den` in turns, reduced, with `0 <= num < den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Angle {
    num: u64,
    den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Angle {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(DynError::Precondition("angle with zero denominator".into()));
        }
        let num = num % den;
        let g = gcd(num, den).max(1);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn zero() -> Self {
        Self { num: 0, den: 1 }
    }

    pub fn num(self) -> u64 {
        self.num
    }

    pub fn den(self) -> u64 {
        self.den
    }

    pub fn turns(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `d^k · t mod 1`.
    pub fn times_pow(self, d: u64, k: u32) -> Self {
        let mut num = self.num as u128;
        let den = self.den as u128;
        for _ in 0..k {
            num = num * d as u128 % den;
        }
        Self::new(num as u64, self.den).expect("nonzero denominator")
    }

    pub fn times(self, d: u64) -> Self {
        self.times_pow(d, 1)
    }

    /// The `d` angles `s` with `d·s = t mod 1`, in increasing order.
    pub fn preimages(self, d: u64) -> Result<Vec<Self>> {
        let den = self
            .den
            .checked_mul(d)
            .ok_or_else(|| DynError::Precondition(format!("angle {self} is too deep to pull back")))?;
        (0..d).map(|k| Self::new(self.num + k * self.den, den)).collect()
    }

    /// `(preperiod, period)` under `t -> d·t`.
    pub fn orbit_type(self, d: u64) -> (usize, usize) {
        let mut seen: Vec<Angle> = vec![self];
        loop {
            let next = seen.last().unwrap().times(d);
            if let Some(i) = seen.iter().position(|&a| a == next) {
                return (i, seen.len() - i);
            }
            seen.push(next);
        }
    }

    /// `(to - self) mod 1` in turns, computed exactly before rounding.
    pub fn gap_to(self, to: Angle) -> f64 {
        let den = self.den as u128 * to.den as u128;
        let a = self.num as u128 * to.den as u128;
        let b = to.num as u128 * self.den as u128;
        let diff = if b >= a { b - a } else { b + den - a };
        diff as f64 / den as f64
    }
}

impl Ord for Angle {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl PartialOrd for Angle {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.num == 0 {
            write!(f, "0")
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Angle {
    type Err = DynError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || DynError::Config(format!("cannot parse angle {s:?}; expected p/q"));
        let s = s.trim();
        match s.split_once('/') {
            Some((p, q)) => Angle::new(p.trim().parse().map_err(|_| bad())?, q.trim().parse().map_err(|_| bad())?),
            None => Angle::new(s.parse().map_err(|_| bad())?, 1),
        }
    }
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Newton solves against `f^n(z) = ψ(w^{d^n})` are set up so that
/// `|w^{d^n}|` exceeds this radius, where `ψ` is the first-order inverse
/// Böttcher map.
const BOTTCHER_RADIUS: f64 = 1e10;
const MAX_NEWTON: usize = 60;

/// Points of given potential and angle, found by Newton's method on an
/// iterate of `f` near infinity.
#[derive(Debug, Clone)]
pub(crate) struct Bottcher {
    poly: Polynomial,
    d: u64,
    log_radius: f64,
    /// `a^{1/(d-1)}`, principal branch: it fixes which ray is angle 0.
    root: Complex64,
    /// `b / (d a)` for `f = a z^d + b z^{d-1} + ...`.
    shift: Complex64,
}

impl Bottcher {
    pub(crate) fn new(poly: &Polynomial) -> Self {
        let d = poly.degree();
        let a = poly.leading();
        let b = poly.coefficients()[d - 1];
        Self {
            poly: poly.clone(),
            d: d as u64,
            log_radius: BOTTCHER_RADIUS.max(poly.escape_radius()).ln(),
            root: a.powf(1.0 / (d as f64 - 1.0)),
            shift: b / (a * d as f64),
        }
    }

    pub(crate) fn degree(&self) -> u64 {
        self.d
    }

    /// Smallest `n` with `d^n g >= log R`.
    fn level(&self, g: f64) -> u32 {
        let mut n = 0;
        let mut scaled = g;
        while scaled < self.log_radius {
            scaled *= self.d as f64;
            n += 1;
        }
        n
    }

    fn psi(&self, w: Complex64) -> Complex64 {
        w / self.root - self.shift
    }

    /// Target for `f^n` at potential `g`, with `frac` the fractional part of
    /// `d^n` times the angle.
    fn target(&self, g: f64, frac: f64, n: u32) -> Complex64 {
        let log_modulus = g * (self.d as f64).powi(n as i32);
        self.psi(Complex64::from_polar(log_modulus.exp(), TAU * frac))
    }

    fn newton(&self, start: Complex64, n: u32, target: Complex64) -> Option<Complex64> {
        let mut z = start;
        // rounding in f^n puts a floor of a few ulps per iteration under |dz|
        let floor = 1e-15f64.max(4.0 * n as f64 * f64::EPSILON);
        for _ in 0..MAX_NEWTON {
            let mut w = z;
            let mut dw = Complex64::new(1.0, 0.0);
            for _ in 0..n {
                let (v, dv) = self.poly.evaluate(w);
                dw *= dv;
                w = v;
            }
            let residual = w - target;
            if residual.norm() <= 1e-14 * target.norm() {
                return Some(z);
            }
            if dw == Complex64::new(0.0, 0.0) {
                return None;
            }
            let dz = residual / dw;
            z -= dz;
            if !z.re.is_finite() || !z.im.is_finite() {
                return None;
            }
            if dz.norm() <= floor * z.norm().max(1.0) {
                return Some(z);
            }
        }
        None
    }

    /// Ray points at the given strictly decreasing potentials. Potentials
    /// above the first one are traversed silently to obtain a start point.
    pub(crate) fn ray_points(&self, angle: Angle, potentials: &[f64]) -> Result<Vec<Complex64>> {
        self.ray_trace(angle, potentials).map(|(points, _)| points)
    }

    /// Like [`Bottcher::ray_points`], also returning the index from which the
    /// ray could no longer be separated from its landing point in double
    /// precision. Those points repeat the last resolvable one.
    pub(crate) fn ray_trace(&self, angle: Angle, potentials: &[f64]) -> Result<(Vec<Complex64>, Option<usize>)> {
        let Some(&first) = potentials.first() else {
            return Ok((Vec::new(), None));
        };
        let step = (self.d as f64).powf(1.0 / RAY_STEPS_PER_LEVEL as f64);
        let mut lead_in = Vec::new();
        let mut g = first;
        while g < self.log_radius {
            g *= step;
            lead_in.push(g);
        }
        lead_in.reverse();
        let mut z = self.psi(Complex64::from_polar(
            lead_in.first().copied().unwrap_or(first).exp(),
            TAU * angle.turns(),
        ));
        let mut previous = None;
        let mut last_good = f64::INFINITY;
        let mut out = Vec::with_capacity(potentials.len());
        for (k, &g) in lead_in.iter().chain(potentials).enumerate() {
            let n = self.level(g);
            let target = self.target(g, angle.times_pow(self.d, n).turns(), n);
            match self.newton(z, n, target) {
                Some(next) => {
                    previous = Some(z);
                    z = next;
                }
                None => {
                    let collapsed = previous.is_some_and(|p: Complex64| (z - p).norm() <= 1e-12 * z.norm().max(1.0));
                    if collapsed && !out.is_empty() {
                        let at = out.len();
                        out.resize(potentials.len(), z);
                        return Ok((out, Some(at)));
                    }
                    return Err(DynError::RayDivergence {
                        angle: angle.to_string(),
                        last_potential: last_good,
                    });
                }
            }
            last_good = g;
            if k >= lead_in.len() {
                out.push(z);
            }
        }
        Ok((out, None))
    }

    /// Equipotential points at potential `g` and angles `from + gap·j/samples`,
    /// `j = 0..=samples`, continued from `start` (the point at `from`).
    pub(crate) fn arc_points(
        &self,
        g: f64,
        from: Angle,
        gap: f64,
        samples: usize,
        start: Complex64,
    ) -> Result<Vec<Complex64>> {
        let n = self.level(g);
        let scale = (self.d as f64).powi(n as i32);
        let base = from.times_pow(self.d, n).turns();
        let per_sample = gap / samples as f64;
        // at most 0.1 rad of rotation per Newton solve in the f^n plane
        let sub = ((TAU * scale * per_sample) / 0.1).ceil().max(1.0) as usize;
        let mut z = start;
        let mut out = vec![start];
        for j in 0..samples {
            for s in 1..=sub {
                let t = (j as f64 + s as f64 / sub as f64) * per_sample;
                let frac = (base + scale * t).rem_euclid(1.0);
                let target = self.target(g, frac, n);
                z = self.newton(z, n, target).ok_or_else(|| DynError::Puzzle(format!(
                    "equipotential continuation failed at potential {g:e} from angle {from}"
                )))?;
            }
            out.push(z);
        }
        Ok(out)
    }
}

/// Potential steps per factor `d`.
pub const RAY_STEPS_PER_LEVEL: usize = 8;
/// Default floor for ray tracing.
pub const DEFAULT_G_MIN: f64 = 1e-8;
pub const LANDING_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalRay {
    pub angle: Angle,
    /// Strictly decreasing.
    pub potentials: Vec<f64>,
    #[serde(with = "crate::cser::vec")]
    pub points: Vec<Complex64>,
    #[serde(with = "crate::cser::opt")]
    pub landing: Option<Complex64>,
    pub landed: bool,
    /// Diameter of the points at `G_min`, `G_min/2`, `G_min/4`.
    pub landing_spread: f64,
    /// Potential below which the ray is closer to its landing point than
    /// double precision resolves; the polyline is constant from there on.
    pub resolution_floor: Option<f64>,
}

impl ExternalRay {
    /// Largest relative mismatch `|G(z) - g| / g` along the polyline.
    pub fn potential_residual(&self, poly: &Polynomial) -> Result<f64> {
        let mut worst = 0.0f64;
        for (&z, &g) in self.points.iter().zip(&self.potentials) {
            let depth = 64 + (g.recip().log2().max(0.0) as usize) * 2;
            let value = super::green(poly, z, depth)?.value;
            worst = worst.max((value - g).abs() / g);
        }
        Ok(worst)
    }
}

/// `g_start · d^{-k/S}` down to the last value at or above `g_min`, followed by
/// `g_min · 2^{-j/S}` for `j = 0..=2S` so that `g_min/2` and `g_min/4` are
/// hit exactly.
fn ray_schedule(d: u64, g_start: f64, g_min: f64) -> Vec<f64> {
    let s = RAY_STEPS_PER_LEVEL as f64;
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let g = g_start * (d as f64).powf(-(k as f64) / s);
        if g <= g_min * (1.0 + 1e-12) {
            break;
        }
        out.push(g);
        k += 1;
    }
    for j in 0..=2 * RAY_STEPS_PER_LEVEL {
        out.push(g_min * 2f64.powf(-(j as f64) / s));
    }
    out
}

/// Traces the external ray of `angle` from potential `g_start` down to
/// `g_min/4`. The ray is declared landed when the points at `g_min`,
/// `g_min/2` and `g_min/4` are within [`LANDING_TOLERANCE`] of each other.
pub fn trace_external_ray(poly: &Polynomial, angle: Angle, g_start: f64, g_min: f64) -> Result<ExternalRay> {
    if !(g_min > 0.0) || !(g_start > g_min) {
        return Err(DynError::Precondition(format!(
            "ray tracing needs G_start > G_min > 0, got {g_start:e} and {g_min:e}"
        )));
    }
    let bottcher = Bottcher::new(poly);
    let potentials = ray_schedule(bottcher.degree(), g_start, g_min);
    let (points, collapsed) = bottcher.ray_trace(angle, &potentials)?;
    let m = points.len();
    let tail = [points[m - 1 - 2 * RAY_STEPS_PER_LEVEL], points[m - 1 - RAY_STEPS_PER_LEVEL], points[m - 1]];
    let spread = (tail[0] - tail[1])
        .norm()
        .max((tail[1] - tail[2]).norm())
        .max((tail[0] - tail[2]).norm());
    let landed = spread < LANDING_TOLERANCE;
    let resolution_floor = collapsed.map(|i| potentials[i]);
    Ok(ExternalRay {
        angle,
        potentials,
        landing: landed.then_some(points[m - 1]),
        points,
        landed,
        landing_spread: spread,
        resolution_floor,
    })
}

/// Repelling periodic point of the ray's period, found by Newton's method from
/// the ray's last point. Returns the point and `|(f^p)'|` there.
pub fn periodic_landing_point(poly: &Polynomial, ray: &ExternalRay) -> Option<(Complex64, f64)> {
    let (preperiod, period) = ray.angle.orbit_type(poly.degree() as u64);
    if preperiod != 0 {
        return None;
    }
    refine_periodic(poly, period, *ray.points.last()?)
}

fn iterate_with_derivative(poly: &Polynomial, z: Complex64, n: usize) -> (Complex64, Complex64) {
    let mut w = z;
    let mut dw = Complex64::new(1.0, 0.0);
    for _ in 0..n {
        let (v, dv) = poly.evaluate(w);
        dw *= dv;
        w = v;
    }
    (w, dw)
}

/// Newton's method for `f^period(z) = z` from `start`; returns the point and
/// the modulus of its multiplier.
pub(crate) fn refine_periodic(poly: &Polynomial, period: usize, start: Complex64) -> Option<(Complex64, f64)> {
    let mut z = start;
    for _ in 0..100 {
        let (w, dw) = iterate_with_derivative(poly, z, period);
        let denom = dw - 1.0;
        if denom == Complex64::new(0.0, 0.0) {
            return None;
        }
        let dz = (w - z) / denom;
        z -= dz;
        if dz.norm() <= 1e-15 * z.norm().max(1.0) {
            return Some((z, iterate_with_derivative(poly, z, period).1.norm()));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn a(s: &str) -> Angle {
        s.parse().unwrap()
    }

    #[test]
    fn angle_arithmetic() {
        assert_eq!(a("2/4"), a("1/2"));
        assert_eq!(a("1/7").times(2), a("2/7"));
        assert_eq!(a("4/7").times(2), a("1/7"));
        assert_eq!(a("1/6").orbit_type(2), (1, 2));
        assert_eq!(a("1/7").orbit_type(2), (0, 3));
        assert_eq!(a("0").orbit_type(2), (0, 1));
        assert_eq!(a("1/3").preimages(2).unwrap(), vec![a("1/6"), a("2/3")]);
        assert!(a("1/7") < a("1/6"));
        assert!((a("6/7").gap_to(a("1/7")) - 2.0 / 7.0).abs() < 1e-15);
        assert_eq!(a("3/7").to_string(), "3/7");
        assert!("x/2".parse::<Angle>().is_err());
        let json = serde_json::to_string(&a("2/7")).unwrap();
        assert_eq!(json, "\"2/7\"");
        assert_eq!(serde_json::from_str::<Angle>(&json).unwrap(), a("2/7"));
    }

    #[test]
    fn squaring_rays_are_radial() {
        let f = Polynomial::quadratic(c(0.0, 0.0));
        let ray = trace_external_ray(&f, Angle::zero(), 2.0, DEFAULT_G_MIN).unwrap();
        for (&z, &g) in ray.points.iter().zip(&ray.potentials) {
            assert!(z.im.abs() < 1e-8 && z.re > 0.0);
            assert!((z.re - g.exp()).abs() < 1e-9 * z.re);
        }
        assert!(ray.landed);
        assert!((ray.landing.unwrap() - 1.0).norm() < 1e-6);
        let quarter = trace_external_ray(&f, a("1/4"), 1.0, 1e-3).unwrap();
        for (&z, &g) in quarter.points.iter().zip(&quarter.potentials) {
            assert!((z - c(0.0, g.exp())).norm() < 1e-9);
        }
    }

    #[test]
    fn basilica_beta_ray_lands() {
        let f = Polynomial::quadratic(c(-1.0, 0.0));
        let ray = trace_external_ray(&f, Angle::zero(), 4.0, DEFAULT_G_MIN).unwrap();
        assert!(ray.landed);
        // beta solves z^2 - z - 1 = 0
        let beta = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((ray.landing.unwrap() - beta).norm() < 1e-4);
        assert!(ray.potentials.windows(2).all(|w| w[1] < w[0]));
        // near the Julia set G stops being resolvable in double precision,
        // so the potential check uses a shallower trace
        let shallow = trace_external_ray(&f, Angle::zero(), 4.0, 1e-4).unwrap();
        assert!(shallow.potential_residual(&f).unwrap() < 1e-8);
    }

    #[test]
    fn rays_of_the_misiurewicz_map() {
        let f = Polynomial::quadratic(c(0.0, 1.0));
        // 1/6 lands at the critical value, 1/3 at its image
        let r6 = trace_external_ray(&f, a("1/6"), 4.0, DEFAULT_G_MIN).unwrap();
        let r3 = trace_external_ray(&f, a("1/3"), 4.0, DEFAULT_G_MIN).unwrap();
        assert!(r6.landed && r3.landed);
        assert!((r6.landing.unwrap() - c(0.0, 1.0)).norm() < 1e-4);
        assert!((r3.landing.unwrap() - c(-1.0, 1.0)).norm() < 1e-4);
        // the alpha rays land together at a repelling fixed point
        let mut ends = Vec::new();
        for t in ["1/7", "2/7", "4/7"] {
            let ray = trace_external_ray(&f, a(t), 4.0, 1e-14).unwrap();
            assert!(ray.landed, "{t}: spread {}", ray.landing_spread);
            let (x, mult) = periodic_landing_point(&f, &ray).unwrap();
            assert!(mult > 1.0);
            assert!((f.eval(x) - x).norm() < 1e-12);
            ends.push(x);
        }
        assert!((ends[0] - ends[1]).norm() < 1e-12 && (ends[1] - ends[2]).norm() < 1e-12);
    }

    #[test]
    fn image_of_a_ray_is_the_doubled_ray() {
        let f = Polynomial::quadratic(c(0.0, 1.0));
        let b = Bottcher::new(&f);
        let t = a("3/14");
        let gs: Vec<f64> = (0..40).map(|k| 0.5 * 2f64.powf(-(k as f64) / 8.0)).collect();
        let doubled: Vec<f64> = gs.iter().map(|g| 2.0 * g).collect();
        let ray = b.ray_points(t, &gs).unwrap();
        let image = b.ray_points(t.times(2), &doubled).unwrap();
        for (z, w) in ray.iter().zip(&image) {
            assert!((f.eval(*z) - w).norm() < 1e-5);
        }
    }

    #[test]
    fn arcs_close_up_on_the_next_ray() {
        let f = Polynomial::quadratic(c(0.0, 1.0));
        let b = Bottcher::new(&f);
        let g = 0.05;
        let start = b.ray_points(a("1/7"), &[g]).unwrap()[0];
        let end = b.ray_points(a("2/7"), &[g]).unwrap()[0];
        let arc = b.arc_points(g, a("1/7"), a("1/7").gap_to(a("2/7")), 16, start).unwrap();
        assert_eq!(arc.len(), 17);
        assert!((arc[16] - end).norm() < 1e-10);
    }

    #[test]
    fn bad_potentials_are_rejected() {
        let f = Polynomial::quadratic(c(0.0, 0.0));
        assert!(trace_external_ray(&f, Angle::zero(), 1e-9, 1e-8).is_err());
    }
}
