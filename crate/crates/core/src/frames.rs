//! Amplitude-invariant Clarke and Park transforms.
//!
//! Angle convention: `theta = omega_s * t`, and `theta = 0` puts the d-axis on
//! the phase-a peak, so a balanced set `X cos(theta - k 2pi/3)` maps to
//! `(X, 0, 0)`.

use std::f64::consts::PI;

const TWO_THIRDS_PI: f64 = 2.0 * PI / 3.0;

pub type Matrix3 = [[f64; 3]; 3];

/// Instantaneous phase quantities.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AbcTriple {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl AbcTriple {
    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    /// Balanced set of peak `amplitude` whose phase-a component peaks at `theta = 0`.
    pub fn balanced(amplitude: f64, theta: f64) -> Self {
        Self {
            a: amplitude * theta.cos(),
            b: amplitude * (theta - TWO_THIRDS_PI).cos(),
            c: amplitude * (theta - 2.0 * TWO_THIRDS_PI).cos(),
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn from_array([a, b, c]: [f64; 3]) -> Self {
        Self { a, b, c }
    }

    pub fn sum(&self) -> f64 {
        self.a + self.b + self.c
    }
}

/// Synchronous-frame components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dq0Triple {
    pub d: f64,
    pub q: f64,
    pub zero: f64,
}

impl Dq0Triple {
    pub const fn new(d: f64, q: f64, zero: f64) -> Self {
        Self { d, q, zero }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.d, self.q, self.zero]
    }

    pub fn from_array([d, q, zero]: [f64; 3]) -> Self {
        Self { d, q, zero }
    }

    /// Length of the d-q vector.
    pub fn magnitude(&self) -> f64 {
        self.d.hypot(self.q)
    }
}

/// Stationary-frame components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AlphaBetaZero {
    pub alpha: f64,
    pub beta: f64,
    pub zero: f64,
}

/// `alpha + j beta = 2/3 (a + b e^{j2pi/3} + c e^{j4pi/3})`, `zero = (a+b+c)/3`.
pub fn clarke_forward(abc: AbcTriple) -> AlphaBetaZero {
    let half_sqrt3 = 3f64.sqrt() / 2.0;
    AlphaBetaZero {
        alpha: 2.0 / 3.0 * (abc.a - 0.5 * abc.b - 0.5 * abc.c),
        beta: 2.0 / 3.0 * half_sqrt3 * (abc.b - abc.c),
        zero: abc.sum() / 3.0,
    }
}

/// Forward Park matrix including the 2/3 prefactor.
pub fn park_matrix(theta: f64) -> Matrix3 {
    let k = 2.0 / 3.0;
    let (t0, t1, t2) = (theta, theta - TWO_THIRDS_PI, theta - 2.0 * TWO_THIRDS_PI);
    [
        [k * t0.cos(), k * t1.cos(), k * t2.cos()],
        [-k * t0.sin(), -k * t1.sin(), -k * t2.sin()],
        [k * 0.5, k * 0.5, k * 0.5],
    ]
}

/// Inverse Park matrix; the zero-sequence column is all ones.
pub fn inverse_park_matrix(theta: f64) -> Matrix3 {
    let (t0, t1, t2) = (theta, theta - TWO_THIRDS_PI, theta - 2.0 * TWO_THIRDS_PI);
    [
        [t0.cos(), -t0.sin(), 1.0],
        [t1.cos(), -t1.sin(), 1.0],
        [t2.cos(), -t2.sin(), 1.0],
    ]
}

pub fn park_forward(abc: AbcTriple, theta: f64) -> Dq0Triple {
    Dq0Triple::from_array(mat_vec(&park_matrix(theta), abc.to_array()))
}

pub fn park_inverse(dq0: Dq0Triple, theta: f64) -> AbcTriple {
    AbcTriple::from_array(mat_vec(&inverse_park_matrix(theta), dq0.to_array()))
}

/// Rotation coupling `-T(theta) d(T^-1)/dt` for `theta = omega t`, the term
/// the frame rotation adds to the dq inductor equations. Constant in time.
pub fn rotation_coupling_matrix(omega: f64) -> Matrix3 {
    [[0.0, omega, 0.0], [-omega, 0.0, 0.0], [0.0, 0.0, 0.0]]
}

pub fn mat_vec(m: &Matrix3, v: [f64; 3]) -> [f64; 3] {
    let row = |r: &[f64; 3]| r[0] * v[0] + r[1] * v[1] + r[2] * v[2];
    [row(&m[0]), row(&m[1]), row(&m[2])]
}

pub fn mat_mul(a: &Matrix3, b: &Matrix3) -> Matrix3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn clarke_balanced_at_zero() {
        let out = clarke_forward(AbcTriple::balanced(8.6, 0.0));
        assert!(close(out.alpha, 8.6, 1e-14));
        assert!(close(out.beta, 0.0, 1e-14));
        assert!(close(out.zero, 0.0, 1e-14));
    }

    #[test]
    fn clarke_pure_zero_sequence() {
        let out = clarke_forward(AbcTriple::new(1.0, 1.0, 1.0));
        assert_eq!((out.alpha, out.beta, out.zero), (0.0, 0.0, 1.0));
    }

    #[test]
    fn clarke_unit_phase_a() {
        let out = clarke_forward(AbcTriple::new(1.0, 0.0, 0.0));
        assert!(close(out.alpha, 2.0 / 3.0, 1e-15));
        assert_eq!(out.beta, 0.0);
        assert!(close(out.zero, 1.0 / 3.0, 1e-15));
    }

    #[test]
    fn clarke_matches_complex_definition() {
        use num_complex::Complex64;
        let abc = AbcTriple::new(0.3, -1.7, 2.2);
        let e = |phi: f64| Complex64::from_polar(1.0, phi);
        let x = (e(0.0) * abc.a + e(TWO_THIRDS_PI) * abc.b + e(2.0 * TWO_THIRDS_PI) * abc.c)
            * (2.0 / 3.0);
        let out = clarke_forward(abc);
        assert!(close(out.alpha, x.re, 1e-14));
        assert!(close(out.beta, x.im, 1e-14));
    }

    #[test]
    fn park_at_zero_angle_equals_clarke() {
        let abc = AbcTriple::new(0.3, -1.7, 2.2);
        let p = park_forward(abc, 0.0);
        let c = clarke_forward(abc);
        assert!(close(p.d, c.alpha, 1e-14));
        assert!(close(p.q, c.beta, 1e-14));
        assert!(close(p.zero, c.zero, 1e-14));
    }

    #[test]
    fn park_orients_balanced_set() {
        for theta in [0.0, 0.4, 2.0, -3.0, 10.0] {
            let dq0 = park_forward(AbcTriple::balanced(8.6, theta), theta);
            assert!(close(dq0.d, 8.6, 1e-13));
            assert!(close(dq0.q, 0.0, 1e-13));
            assert!(close(dq0.zero, 0.0, 1e-13));
        }
    }

    #[test]
    fn park_zero_and_common_mode() {
        for theta in [0.0, 1.0, 5.5] {
            assert_eq!(
                park_forward(AbcTriple::default(), theta),
                Dq0Triple::default()
            );
            let z = park_forward(AbcTriple::new(1.0, 1.0, 1.0), theta);
            assert!(close(z.d, 0.0, 1e-15) && close(z.q, 0.0, 1e-15));
            assert!(close(z.zero, 1.0, 1e-15));
        }
    }

    #[test]
    fn inverse_park_duty_example() {
        let abc = park_inverse(Dq0Triple::new(0.3103, 0.0033, 0.5), 0.0);
        assert!(close(abc.a, 0.8103, 1e-15));
    }

    #[test]
    fn inverse_park_zero_sequence_column() {
        for theta in [0.0, 0.7, 4.0] {
            let abc = park_inverse(Dq0Triple::new(0.0, 0.0, 0.25), theta);
            assert_eq!(abc, AbcTriple::new(0.25, 0.25, 0.25));
        }
    }

    #[test]
    fn coupling_matrix_structure() {
        let w = 314.159;
        assert_eq!(
            rotation_coupling_matrix(w),
            [[0.0, w, 0.0], [-w, 0.0, 0.0], [0.0, 0.0, 0.0]]
        );
        assert_eq!(rotation_coupling_matrix(0.0), [[0.0; 3]; 3]);
    }

    #[test]
    fn park_matrices_are_mutual_inverses() {
        let prod = mat_mul(&park_matrix(0.9), &inverse_park_matrix(0.9));
        for (i, row) in prod.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(close(*v, want, 1e-15));
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip_dq0_abc_dq0(
            d in -100f64..100.0, q in -100f64..100.0, z in -100f64..100.0, theta in -20f64..20.0
        ) {
            let v = Dq0Triple::new(d, q, z);
            let back = park_forward(park_inverse(v, theta), theta);
            prop_assert!(close(back.d, d, 1e-12));
            prop_assert!(close(back.q, q, 1e-12));
            prop_assert!(close(back.zero, z, 1e-12));
        }

        #[test]
        fn round_trip_abc_dq0_abc(
            a in -100f64..100.0, b in -100f64..100.0, c in -100f64..100.0, theta in -20f64..20.0
        ) {
            let x = AbcTriple::new(a, b, c);
            let back = park_inverse(park_forward(x, theta), theta);
            prop_assert!(close(back.a, a, 1e-12));
            prop_assert!(close(back.b, b, 1e-12));
            prop_assert!(close(back.c, c, 1e-12));
        }

        #[test]
        fn balanced_amplitude_is_preserved(amp in 0f64..100.0, theta in -20f64..20.0, frame in -20f64..20.0) {
            let dq0 = park_forward(AbcTriple::balanced(amp, theta), frame);
            prop_assert!(close(dq0.magnitude(), amp, 1e-12));
        }
    }
}
