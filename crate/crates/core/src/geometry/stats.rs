use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::JordanDisk;
use crate::error::{DynError, Result};

/// Koebe distortion factor between the Euclidean surrogate ball and the true
/// hyperbolic ball it stands in for.
pub const SURROGATE_DISTORTION: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeStats {
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub shape: f64,
}

/// `IR`, `OR` and their ratio as seen from `z`.
pub fn shape_stats(disk: &JordanDisk, z: Complex64) -> Result<ShapeStats> {
    if !disk.contains(z) {
        return Err(DynError::NotInside(z));
    }
    let inner_radius = disk.boundary_distance(z);
    if !(inner_radius > 0.0) {
        return Err(DynError::NotInside(z));
    }
    let outer_radius = disk.max_boundary_distance(z);
    Ok(ShapeStats {
        inner_radius,
        outer_radius,
        shape: outer_radius / inner_radius,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModulusMethod {
    RoundAnnulus,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulusBound {
    pub lower: f64,
    pub method: ModulusMethod,
}

/// Certified lower bound for the modulus of `outer \ closure(inner)`: the
/// widest round annulus about a candidate center that separates the two
/// boundaries.
pub fn modulus_lower_bound(outer: &JordanDisk, inner: &JordanDisk) -> Result<ModulusBound> {
    if !outer.contains_disk(inner) {
        return Err(DynError::Containment(
            "inner disk closure is not inside the outer disk".into(),
        ));
    }
    let mut best = 0.0f64;
    for a in [inner.centroid(), inner.basepoint()] {
        if !inner.contains(a) {
            continue;
        }
        let ir = outer.boundary_distance(a);
        let or = inner.max_boundary_distance(a);
        if or > 0.0 && ir > or {
            best = best.max((ir / or).ln() / TAU);
        }
    }
    let method = if best > 0.0 {
        ModulusMethod::RoundAnnulus
    } else {
        ModulusMethod::Degenerate
    };
    Ok(ModulusBound {
        lower: best,
        method,
    })
}

/// Euclidean stand-in for the hyperbolic ball `B_V(z0, λ)`: the round disk of
/// radius `tanh(λ/2)·IR(V, z0)`. It is exact for round `V` centred at `z0`
/// and within [`SURROGATE_DISTORTION`] of the true ball in general.
pub fn pseudo_hyperbolic_ball(ambient: &JordanDisk, z0: Complex64, lambda: f64) -> Result<JordanDisk> {
    if !(lambda > 0.0) {
        return Err(DynError::Precondition(format!("lambda must be positive, got {lambda}")));
    }
    let stats = shape_stats(ambient, z0)?;
    JordanDisk::circle(z0, (lambda / 2.0).tanh() * stats.inner_radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn shape_of_circles_and_ellipse() {
        let unit = JordanDisk::circle(c(0.0, 0.0), 1.0).unwrap();
        assert_eq!(shape_stats(&unit, c(0.0, 0.0)).unwrap().shape, 1.0);
        let off = shape_stats(&unit, c(0.5, 0.0)).unwrap();
        assert!((off.inner_radius - 0.5).abs() < 1e-15);
        assert!((off.outer_radius - 1.5).abs() < 1e-15);
        assert!((off.shape - 3.0).abs() < 1e-14);

        let ell = JordanDisk::ellipse(c(0.0, 0.0), 2.0, 1.0).unwrap();
        let s = shape_stats(&ell, c(0.0, 0.0)).unwrap();
        // 512 samples hit both axis extremes; IR is the distance to a chord
        // next to (0, ±1)
        assert!((s.outer_radius - 2.0).abs() < 1e-12);
        assert!((s.shape - 2.0).abs() < 1e-3);
        assert!(shape_stats(&ell, c(3.0, 0.0)).is_err());
    }

    #[test]
    fn polyline_circle_matches_on_vertices() {
        let pts: Vec<_> = (0..512)
            .map(|k| Complex64::from_polar(1.0, TAU * k as f64 / 512.0))
            .collect();
        let d = JordanDisk::from_polyline(pts, c(0.0, 0.0)).unwrap();
        let s = shape_stats(&d, c(0.5, 0.0)).unwrap();
        assert!((s.outer_radius - 1.5).abs() < 1e-12);
        assert!((s.inner_radius - 0.5).abs() < 1e-4);
    }

    #[test]
    fn modulus_examples() {
        let outer = JordanDisk::circle(c(0.0, 0.0), TAU.exp()).unwrap();
        let inner = JordanDisk::circle(c(0.0, 0.0), 1.0).unwrap();
        let m = modulus_lower_bound(&outer, &inner).unwrap();
        assert!((m.lower - 1.0).abs() < 1e-12);
        assert_eq!(m.method, ModulusMethod::RoundAnnulus);

        let unit = JordanDisk::circle(c(0.0, 0.0), 1.0).unwrap();
        let shrunk = JordanDisk::circle(c(0.0, 0.0), 1.0 - 1e-9).unwrap();
        let m = modulus_lower_bound(&unit, &shrunk).unwrap();
        assert!(m.lower < 1e-9);

        let square = JordanDisk::square(c(0.0, 0.0), 4.0).unwrap();
        let small = JordanDisk::circle(c(0.0, 0.0), 0.5).unwrap();
        let m = modulus_lower_bound(&square, &small).unwrap();
        // oracle: inscribed circle of the square has radius 2
        let oracle = (2.0f64 / 0.5).ln() / TAU;
        assert!(m.lower >= oracle - 1e-12);
        assert!((m.lower - 0.2206).abs() < 1e-4);

        assert!(modulus_lower_bound(&small, &square).is_err());
    }

    #[test]
    fn surrogate_hyperbolic_ball() {
        let unit = JordanDisk::circle(c(0.0, 0.0), 1.0).unwrap();
        let b = pseudo_hyperbolic_ball(&unit, c(0.0, 0.0), 1.0).unwrap();
        assert!((b.round().unwrap().1 - 0.5f64.tanh()).abs() < 1e-15);
        assert!((0.5f64.tanh() - 0.4621).abs() < 1e-4);

        let two = JordanDisk::circle(c(0.0, 0.0), 2.0).unwrap();
        let b = pseudo_hyperbolic_ball(&two, c(0.0, 0.0), 1.0).unwrap();
        assert!((b.round().unwrap().1 - 0.9242).abs() < 1e-4);

        let tiny = pseudo_hyperbolic_ball(&unit, c(0.0, 0.0), 1e-9).unwrap();
        assert!(tiny.diameter() < 1e-8);
        assert!(pseudo_hyperbolic_ball(&unit, c(0.0, 0.0), 0.0).is_err());
        assert!(unit.contains_disk(&tiny));
    }

    proptest! {
        #[test]
        fn concentric_round_annuli_are_exact(r in 0.01f64..10.0, ratio in 1.001f64..1e4, x in -5.0f64..5.0) {
            let center = c(x, -x / 3.0);
            let outer = JordanDisk::circle(center, r * ratio).unwrap();
            let inner = JordanDisk::circle(center, r).unwrap();
            let m = modulus_lower_bound(&outer, &inner).unwrap();
            prop_assert!((m.lower - ratio.ln() / TAU).abs() < 1e-9);
        }

        #[test]
        fn shape_is_scale_covariant(s in 0.01f64..100.0, a in 0.3f64..3.0, b in 0.3f64..3.0, px in -0.2f64..0.2, py in -0.2f64..0.2) {
            let ell = JordanDisk::ellipse(c(0.0, 0.0), a, b).unwrap();
            let z = c(px * a, py * b);
            let base = shape_stats(&ell, z).unwrap().shape;
            let scaled = shape_stats(&ell.affine(s, c(0.0, 0.0)), z * s).unwrap().shape;
            prop_assert!((base - scaled).abs() <= 1e-12 * base);
        }
    }
}
