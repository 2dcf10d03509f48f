//! Complex polynomials: evaluation with the derivative, preimages, Taylor data.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{DynError, Result};
use crate::roots::{find_roots, horner};

/// A polynomial of degree `d >= 2`, coefficients stored constant term first.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coefficients: Vec<Complex64>,
}

impl Polynomial {
    pub fn new(coefficients: Vec<Complex64>) -> Result<Self> {
        let n = coefficients.len();
        if n < 3 || coefficients[n - 1].norm() == 0.0 {
            return Err(DynError::InvalidPolynomial(n));
        }
        if coefficients.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(DynError::InvalidPolynomial(n));
        }
        Ok(Self { coefficients })
    }

    pub fn from_real(coefficients: &[f64]) -> Result<Self> {
        Self::new(coefficients.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    /// `z^2 + c`.
    pub fn quadratic(c: Complex64) -> Self {
        Self {
            coefficients: vec![c, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        }
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn leading(&self) -> Complex64 {
        self.coefficients[self.degree()]
    }

    pub fn is_real(&self) -> bool {
        self.coefficients.iter().all(|a| a.im == 0.0)
    }

    /// `(f(z), Df(z))` by Horner's scheme.
    #[inline]
    pub fn evaluate(&self, z: Complex64) -> (Complex64, Complex64) {
        horner(&self.coefficients, z)
    }

    #[inline]
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut value = Complex64::new(0.0, 0.0);
        for a in self.coefficients.iter().rev() {
            value = value * z + a;
        }
        value
    }

    /// Bound on the rounding error of evaluating `f` at `z`.
    pub fn rounding_level(&self, z: Complex64) -> f64 {
        crate::roots::rounding_level(&self.coefficients, z)
    }

    /// Like [`evaluate`](Self::evaluate), but returns `None` (the escape
    /// signal) once `|z|` exceeds the overflow guard.
    pub fn evaluate_guarded(&self, z: Complex64) -> Option<(Complex64, Complex64)> {
        if !(z.norm() <= self.overflow_guard()) {
            return None;
        }
        Some(self.evaluate(z))
    }

    /// Largest modulus at which `f` and `Df` are still far from overflow.
    pub fn overflow_guard(&self) -> f64 {
        10f64.powf(250.0 / self.degree() as f64)
    }

    /// Radius beyond which every orbit escapes to infinity monotonically.
    pub fn escape_radius(&self) -> f64 {
        let d = self.degree();
        let lead = self.leading().norm();
        let tail: f64 = self.coefficients[..d].iter().map(|a| a.norm()).sum();
        1f64.max(2.0 * tail / lead)
            .max((4.0 / lead).powf(1.0 / (d as f64 - 1.0)))
    }

    /// Coefficients of the `k`-th derivative (constant first).
    pub fn derivative_coefficients(&self, k: usize) -> Vec<Complex64> {
        let mut c = self.coefficients.clone();
        for _ in 0..k {
            if c.len() <= 1 {
                return vec![Complex64::new(0.0, 0.0)];
            }
            c = c
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, a)| a * j as f64)
                .collect();
        }
        c
    }

    /// `f^{(k)}(z) / k!`.
    pub fn taylor_coefficient(&self, z: Complex64, k: usize) -> Complex64 {
        let coeffs = self.derivative_coefficients(k);
        let mut v = Complex64::new(0.0, 0.0);
        for a in coeffs.iter().rev() {
            v = v * z + a;
        }
        let fact: f64 = (1..=k).map(|j| j as f64).product();
        v / fact
    }

    /// All `d` solutions of `f(z) = w`, sorted lexicographically by (re, im).
    pub fn preimages(&self, w: Complex64) -> Result<Vec<Complex64>> {
        let mut shifted = self.coefficients.clone();
        shifted[0] -= w;
        let mut roots = find_roots(&shifted, 1e-14)?;
        for r in roots.iter_mut() {
            *r = self.polish_preimage(*r, w);
        }
        sort_lex(&mut roots);
        Ok(roots)
    }

    /// A few Newton steps on `f(z) = w`, stopped as soon as they stop helping.
    pub fn polish_preimage(&self, mut z: Complex64, w: Complex64) -> Complex64 {
        let mut best = (self.eval(z) - w).norm();
        for _ in 0..4 {
            let (v, dv) = self.evaluate(z);
            if dv.norm() == 0.0 {
                break;
            }
            let next = z - (v - w) / dv;
            let r = (self.eval(next) - w).norm();
            if !(r < best) {
                break;
            }
            best = r;
            z = next;
        }
        z
    }
}

pub(crate) fn sort_lex(v: &mut [Complex64]) {
    v.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

impl Serialize for Polynomial {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        crate::cser::vec::serialize(&self.coefficients, s)
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let coeffs = crate::cser::vec::deserialize(d)?;
        Polynomial::new(coeffs).map_err(serde::de::Error::custom)
    }
}
