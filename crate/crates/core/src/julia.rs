//! Julia-set sampling by inverse iteration with random branch choice.

use num_complex::Complex64;
use rand::Rng;

use crate::error::Result;
use crate::poly::Polynomial;

/// `out[0] = start` and `f(out[k+1]) = out[k]`, with the branch at each step
/// drawn from `rng`.
pub fn inverse_orbit<R: Rng>(
    poly: &Polynomial,
    start: Complex64,
    length: usize,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let mut out = Vec::with_capacity(length + 1);
    out.push(start);
    let mut z = start;
    for _ in 0..length {
        let pre = poly.preimages(z)?;
        z = pre[rng.gen_range(0..pre.len())];
        out.push(z);
    }
    Ok(out)
}

/// Points of (numerically) the Julia set: an inverse orbit started far out,
/// with the first `burn_in` points discarded.
pub fn sample_julia<R: Rng>(
    poly: &Polynomial,
    count: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let start = Complex64::new(poly.escape_radius() + 1.0, 0.5);
    let orbit = inverse_orbit(poly, start, burn_in + count, rng)?;
    Ok(orbit[burn_in + 1..].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn squaring_samples_lie_on_unit_circle() {
        let f = Polynomial::quadratic(Complex64::new(0.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = sample_julia(&f, 200, 60, &mut rng).unwrap();
        assert_eq!(pts.len(), 200);
        for z in pts {
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn chebyshev_samples_lie_on_segment() {
        let f = Polynomial::quadratic(Complex64::new(-2.0, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for z in sample_julia(&f, 200, 60, &mut rng).unwrap() {
            assert!(z.im.abs() < 1e-6 && z.re.abs() <= 2.0 + 1e-9, "{z}");
        }
    }

    #[test]
    fn inverse_orbit_is_exact_backwards() {
        let f = Polynomial::quadratic(Complex64::new(0.0, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let orb = inverse_orbit(&f, Complex64::new(0.3, 0.1), 30, &mut rng).unwrap();
        for k in 0..30 {
            assert!((f.eval(orb[k + 1]) - orb[k]).norm() < 1e-12);
        }
    }
}
