//! Closed-form steady-state operating point.
//!
//! The d-axis is aligned with the grid voltage and the converter runs at unity
//! power factor, so `I_Lq = 0`. With `U_in`, `I_in` and `U_od` given, the
//! d-channel voltage balance and the input-current balance reduce to a
//! quadratic in `D_d`; everything else follows from it.
//!
//! Real and reactive power carry the 3/2 factor of the amplitude-invariant
//! frame, so that `P = U_in I_in` in the lossless case.

use crate::error::{Error, Result};
use crate::params::ConverterParams;

/// Default zero-sequence duty: centers the three duty waveforms in [0, 1].
pub const DEFAULT_ZERO_SEQUENCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub d_d: f64,
    pub d_q: f64,
    pub d_0: f64,
    /// d-channel inductor current; equals the d-channel grid current.
    pub i_ld: f64,
    /// q-channel inductor current; zero at unity power factor.
    pub i_lq: f64,
    /// q-channel grid voltage the point was solved for.
    pub u_oq_set: f64,
}

impl OperatingPoint {
    /// Peak of the a-b-c duty swing around `d_0`.
    pub fn modulation_amplitude(&self) -> f64 {
        self.d_d.hypot(self.d_q)
    }

    /// Open interval of zero-sequence duties that keep every phase duty in [0, 1].
    pub fn zero_sequence_range(&self) -> (f64, f64) {
        let a = self.modulation_amplitude();
        (a, 1.0 - a)
    }

    pub fn with_zero_sequence(self, d_0: f64) -> Result<Self> {
        let (low, high) = self.zero_sequence_range();
        if d_0 > low && d_0 < high {
            Ok(Self { d_0, ..self })
        } else {
            Err(Error::InfeasibleZeroSequence { d_0, low, high })
        }
    }
}

/// How the zero-sequence duty `d_0` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZeroSequencePolicy {
    Constant(f64),
}

impl Default for ZeroSequencePolicy {
    fn default() -> Self {
        ZeroSequencePolicy::Constant(DEFAULT_ZERO_SEQUENCE)
    }
}

/// Positive root of `U_in D^2 - U_od D - (2/3) r_eq I_in = 0`.
pub fn solve_duty_d(params: &ConverterParams) -> Result<f64> {
    let discriminant =
        params.u_od * params.u_od + 8.0 / 3.0 * params.r_eq() * params.u_in * params.i_in;
    if discriminant < 0.0 {
        return Err(Error::NoRealOperatingPoint { discriminant });
    }
    Ok((params.u_od + discriminant.sqrt()) / (2.0 * params.u_in))
}

/// `I_Ld = (2/3) I_in / D_d`.
pub fn solve_inductor_current_d(params: &ConverterParams, d_d: f64) -> Result<f64> {
    if d_d == 0.0 {
        return Err(Error::ZeroDuty);
    }
    Ok(2.0 / 3.0 * params.i_in / d_d)
}

/// `D_q = 2 omega_s L I_in / (3 U_in D_d)`, plus `U_oq / U_in` when the grid
/// voltage has a q component.
pub fn solve_duty_q(params: &ConverterParams, d_d: f64) -> Result<f64> {
    if d_d == 0.0 {
        return Err(Error::ZeroDuty);
    }
    let coupling =
        2.0 * params.omega_s() * params.inductance * params.i_in / (3.0 * params.u_in * d_d);
    Ok(coupling + params.u_oq / params.u_in)
}

pub fn operating_point(
    params: &ConverterParams,
    policy: ZeroSequencePolicy,
) -> Result<OperatingPoint> {
    let d_d = solve_duty_d(params)?;
    let i_ld = solve_inductor_current_d(params, d_d)?;
    let d_q = solve_duty_q(params, d_d)?;
    let ZeroSequencePolicy::Constant(d_0) = policy;
    OperatingPoint {
        d_d,
        d_q,
        d_0,
        i_ld,
        i_lq: 0.0,
        u_oq_set: params.u_oq,
    }
    .with_zero_sequence(d_0)
}

/// Steady-state balance residuals: d-voltage (V), q-voltage (V), input current (A).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub r_d: f64,
    pub r_q: f64,
    pub r_in: f64,
}

impl Residuals {
    pub fn max_abs(&self) -> f64 {
        self.r_d.abs().max(self.r_q.abs()).max(self.r_in.abs())
    }
}

pub fn residuals(params: &ConverterParams, op: &OperatingPoint) -> Residuals {
    let w_l = params.omega_s() * params.inductance;
    let r = params.r_eq();
    Residuals {
        r_d: -r * op.i_ld + w_l * op.i_lq + op.d_d * params.u_in - params.u_od,
        r_q: -r * op.i_lq - w_l * op.i_ld + op.d_q * params.u_in - params.u_oq,
        r_in: params.i_in - 1.5 * (op.d_d * op.i_ld + op.d_q * op.i_lq),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexPower {
    /// Real power, W.
    pub p: f64,
    /// Reactive power, var.
    pub q: f64,
}

pub fn complex_power(u_od: f64, u_oq: f64, i_ld: f64, i_lq: f64) -> ComplexPower {
    ComplexPower {
        p: 1.5 * (u_od * i_ld + u_oq * i_lq),
        q: 1.5 * (u_oq * i_ld - u_od * i_lq),
    }
}
