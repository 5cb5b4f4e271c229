//! Rational functions of the Laplace variable.

use num_complex::Complex64;

/// `N(s) / D(s)` with coefficients in ascending powers of `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTransferFunction {
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
}

impl RationalTransferFunction {
    pub fn new(numerator: Vec<f64>, denominator: Vec<f64>) -> Self {
        Self {
            numerator,
            denominator,
        }
    }

    /// Evaluates at `s`; `None` when `s` is a root of the denominator.
    pub fn eval(&self, s: Complex64) -> Option<Complex64> {
        let den = poly_eval(&self.denominator, s);
        let scale = self
            .denominator
            .iter()
            .enumerate()
            .map(|(k, c)| c.abs() * s.norm().powi(k as i32))
            .fold(0.0, f64::max);
        if den.norm() <= 1e-12 * scale {
            return None;
        }
        Some(poly_eval(&self.numerator, s) / den)
    }

    pub fn poles(&self) -> Vec<Complex64> {
        poly_roots(&self.denominator)
    }

    pub fn zeros(&self) -> Vec<Complex64> {
        poly_roots(&self.numerator)
    }
}

/// Horner evaluation, ascending coefficients.
pub fn poly_eval(coeffs: &[f64], s: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

/// Roots of a polynomial of effective degree at most two.
///
/// # Panics
/// On higher effective degree.
pub fn poly_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let degree = coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0);
    match degree {
        0 => Vec::new(),
        1 => vec![Complex64::new(-coeffs[0] / coeffs[1], 0.0)],
        2 => {
            let (c, b, a) = (coeffs[0], coeffs[1], coeffs[2]);
            let disc = Complex64::new(b * b - 4.0 * a * c, 0.0).sqrt();
            // avoid cancellation: q = -(b + sign(b) sqrt(disc)) / 2
            if b == 0.0 {
                let r = disc / (2.0 * a);
                vec![r, -r]
            } else {
                let q = -(Complex64::new(b, 0.0) + disc * b.signum()) / 2.0;
                vec![q / a, Complex64::new(c, 0.0) / q]
            }
        }
        _ => panic!("poly_roots supports degree <= 2, got {degree}"),
    }
}
