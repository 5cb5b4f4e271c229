//! Switch-level simulation of the PWM bridge feeding a balanced grid.
//!
//! Duty ratios come from the inverse Park transform of `(d_d, d_q, d_0)` and
//! are compared with a rising sawtooth carrier. The bridge currents are
//! integrated in the abc frame with the common-mode voltage `u_nN` obtained
//! algebraically from the number of closed upper switches.
//!
//! Within one integration step the duties are held at their value at the step
//! start, but every carrier crossing and carrier wrap inside the step becomes
//! an integration breakpoint. The applied pulse widths are therefore exact
//! rather than rounded to the step size.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::frames::{park_forward, park_inverse, AbcTriple, Dq0Triple};
use crate::ode::rk4_step;
use crate::params::ConverterParams;
use crate::sim_avg::{step_count, DIVERGENCE_LIMIT};
use crate::steady_state::OperatingPoint;
use crate::trace::{SimTrace, TraceMetadata};

/// Integration steps per switching period used by default.
pub const STEPS_PER_PERIOD: f64 = 20.0;

/// Default simulated time, s.
pub const DEFAULT_DURATION: f64 = 0.1;

pub const CHANNELS: [&str; 11] = [
    "i_a_a", "i_b_a", "i_c_a", "i_in_a", "u_nn_v", "u_an_v", "d_a", "d_b", "d_c", "i_od_a",
    "i_oq_a",
];

/// Upper-switch states of the three legs; each lower switch is the complement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SwitchState {
    pub a: bool,
    pub b: bool,
    pub c: bool,
}

impl SwitchState {
    pub const fn new(a: bool, b: bool, c: bool) -> Self {
        Self { a, b, c }
    }

    pub fn closed_count(&self) -> u8 {
        u8::from(self.a) + u8::from(self.b) + u8::from(self.c)
    }

    pub fn legs(&self) -> [bool; 3] {
        [self.a, self.b, self.c]
    }

    /// Number of legs in which two states differ.
    pub fn distance(&self, other: &SwitchState) -> u32 {
        self.legs()
            .iter()
            .zip(other.legs())
            .filter(|(x, y)| **x != *y)
            .count() as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SwitchedState {
    pub i_a: f64,
    pub i_b: f64,
    pub i_c: f64,
    pub t: f64,
}

impl SwitchedState {
    pub fn rest() -> Self {
        Self::default()
    }
}

/// Phase duty ratios at grid angle `theta`.
pub fn duty_waveforms(op: &OperatingPoint, theta: f64) -> Result<[f64; 3]> {
    let duties = park_inverse(Dq0Triple::new(op.d_d, op.d_q, op.d_0), theta).to_array();
    for (phase, value) in ['a', 'b', 'c'].into_iter().zip(duties) {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InfeasibleDuty {
                phase,
                value,
                theta,
            });
        }
    }
    Ok(duties)
}

/// Snaps `x` onto a nearby integer so carrier periods wrap cleanly despite
/// rounding in `t * f_sw`.
fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 64.0 * f64::EPSILON * x.abs().max(1.0) {
        r
    } else {
        x
    }
}

/// Rising sawtooth in [0, 1) with period `1 / f_sw`.
pub fn carrier(t: f64, f_sw: f64) -> f64 {
    let x = snap(t * f_sw);
    x - x.floor()
}

/// Comparator: a leg's upper switch is on while the carrier is below its duty.
pub fn switch_states(duties: [f64; 3], carrier_value: f64) -> SwitchState {
    SwitchState::new(
        carrier_value < duties[0],
        carrier_value < duties[1],
        carrier_value < duties[2],
    )
}

/// Neutral-point voltage `k u_dc / 3` for `k` closed upper switches.
pub fn u_nn_of_state(state: SwitchState, u_dc: f64) -> f64 {
    f64::from(state.closed_count()) * u_dc / 3.0
}

/// Grid phase voltages at time `t`, aligned so that the d-axis carries `u_od`.
pub fn grid_voltages(params: &ConverterParams, t: f64) -> [f64; 3] {
    park_inverse(
        Dq0Triple::new(params.u_od, params.u_oq, 0.0),
        params.omega_s() * t,
    )
    .to_array()
}

pub fn bridge_derivative(
    params: &ConverterParams,
    state: &SwitchedState,
    switch: SwitchState,
    t: f64,
) -> [f64; 3] {
    let u_nn = u_nn_of_state(switch, params.u_in);
    let grid = grid_voltages(params, t);
    let r = params.r_eq();
    let i = [state.i_a, state.i_b, state.i_c];
    std::array::from_fn(|x| {
        let leg = if switch.legs()[x] { params.u_in } else { 0.0 };
        (leg - r * i[x] - grid[x] - u_nn) / params.inductance
    })
}

/// Default step: `STEPS_PER_PERIOD` steps per carrier period.
pub fn default_dt(params: &ConverterParams) -> f64 {
    1.0 / (STEPS_PER_PERIOD * params.f_sw)
}

/// Sorted carrier-unit breakpoints from `tau0` to `tau1` inclusive. Edges
/// closer than `EDGE_EPS` to either end are dropped.
fn breakpoints(tau0: f64, tau1: f64, duties: [f64; 3]) -> Vec<f64> {
    const EDGE_EPS: f64 = 1e-12;
    let mut points = vec![tau0];
    let first = tau0.floor() as i64;
    let last = tau1.ceil() as i64;
    for n in first..=last {
        let base = n as f64;
        for edge in [base, base + duties[0], base + duties[1], base + duties[2]] {
            if edge > tau0 + EDGE_EPS && edge < tau1 - EDGE_EPS {
                points.push(edge);
            }
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    points.push(tau1);
    points
}

/// Advances the phase currents across one step with the duties held,
/// splitting at every carrier crossing. Returns the new currents and the
/// mean DC-side current over the step.
fn advance(
    params: &ConverterParams,
    duties: [f64; 3],
    t: f64,
    dt: f64,
    i: [f64; 3],
) -> ([f64; 3], f64) {
    let f_sw = params.f_sw;
    let knots = breakpoints(snap(t * f_sw), snap((t + dt) * f_sw), duties);
    let mut i = i;
    let mut charge = 0.0;
    for pair in knots.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let phase = 0.5 * (a + b);
        let switch = switch_states(duties, phase - phase.floor());
        let rhs = |t: f64, x: &[f64; 3]| {
            let s = SwitchedState {
                i_a: x[0],
                i_b: x[1],
                i_c: x[2],
                t,
            };
            bridge_derivative(params, &s, switch, t)
        };
        let next = rk4_step(rhs, a / f_sw, i, (b - a) / f_sw);
        // trapezoid over a sub-interval on which every current is nearly linear
        let dc = |x: &[f64; 3]| {
            (0..3)
                .filter(|&k| switch.legs()[k])
                .map(|k| x[k])
                .sum::<f64>()
        };
        charge += 0.5 * (dc(&i) + dc(&next)) * (b - a) / f_sw;
        i = next;
    }
    (i, charge / dt)
}

/// Open-loop switched run with the duties of `op`.
///
/// Sample `k` describes the step `[t_k, t_k + dt)`: `u_nn_v` and `u_an_v`
/// are the comparator outputs at the step midpoint and `i_in_a` is the mean
/// DC-side current over the step.
pub fn simulate_switched(
    params: &ConverterParams,
    op: &OperatingPoint,
    duration: f64,
    dt: f64,
    initial: SwitchedState,
) -> Result<SimTrace> {
    let steps = step_count(duration, dt)?;
    if dt * STEPS_PER_PERIOD * params.f_sw > 1.0 + 1e-9 {
        return Err(Error::Usage(format!(
            "time step {dt} s is longer than 1/({STEPS_PER_PERIOD} f_sw) = {} s",
            default_dt(params)
        )));
    }

    let metadata = TraceMetadata {
        params: *params,
        scenario: format!("switched d_0={}", op.d_0),
        integrator: format!("rk4 carrier-synchronous dt={dt}"),
    };
    let mut trace = SimTrace::new(dt, initial.t, &CHANNELS, metadata);
    let w = params.omega_s();
    let u_in = params.u_in;

    let mut i = [initial.i_a, initial.i_b, initial.i_c];
    for k in 0..=steps {
        let t = initial.t + k as f64 * dt;
        let theta = w * t;
        let duties = duty_waveforms(op, theta)?;
        // the step after the last sample is integrated only for its diagnostics
        let (next, i_in) = advance(params, duties, t, dt, i);

        let mid = switch_states(duties, carrier(t + 0.5 * dt, params.f_sw));
        let u_nn = u_nn_of_state(mid, u_in);
        let u_an = if mid.a { u_in - u_nn } else { -u_nn };
        let dq = park_forward(AbcTriple::from_array(i), theta);
        trace.push(&[
            i[0], i[1], i[2], i_in, u_nn, u_an, duties[0], duties[1], duties[2], dq.d, dq.q,
        ]);

        if k < steps && next.iter().any(|x| !(x.abs() <= DIVERGENCE_LIMIT)) {
            return Err(Error::Diverged { sample: k + 1 });
        }
        i = next;
    }
    Ok(trace)
}

/// Trailing moving average of every channel over `window` seconds.
pub fn switching_average(trace: &SimTrace, window: f64) -> Result<SimTrace> {
    let n = trace.samples_in(window).ok_or_else(|| {
        Error::Usage(format!(
            "averaging window {window} s is not a multiple of dt = {} s",
            trace.dt
        ))
    })?;
    if n < 2 {
        return Err(Error::Usage(format!(
            "averaging window {window} s must span at least two steps"
        )));
    }
    Ok(trace.moving_average(n))
}

/// Frequency of the largest non-DC spectral line, Hz.
pub fn dominant_frequency(samples: &[f64], dt: f64) -> Option<f64> {
    if samples.len() < 4 {
        return None;
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let mut buf: Vec<Complex<f64>> = samples
        .iter()
        .map(|x| Complex::new(x - mean, 0.0))
        .collect();
    FftPlanner::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    let half = buf.len() / 2;
    let (bin, _) = buf[1..=half]
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))?;
    Some((bin + 1) as f64 / (samples.len() as f64 * dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steady_state::{operating_point, ZeroSequencePolicy};

    const L: f64 = 73e-6;

    fn table_duties(d_0: f64) -> OperatingPoint {
        OperatingPoint {
            d_d: 0.3103,
            d_q: 0.0033,
            d_0,
            i_ld: 4.2969,
            i_lq: 0.0,
            u_oq_set: 0.0,
        }
    }

    #[test]
    fn duties_at_zero_angle() {
        let [a, b, c] = duty_waveforms(&table_duties(0.5), 0.0).unwrap();
        assert!((a - 0.8103).abs() < 1e-12);
        let s = 3f64.sqrt() / 2.0;
        assert!((b - (0.5 - 0.5 * 0.3103 + 0.0033 * s)).abs() < 1e-12);
        assert!((c - (0.5 - 0.5 * 0.3103 - 0.0033 * s)).abs() < 1e-12);
        assert!((b - 0.3477).abs() < 5e-5);
        assert!((c - 0.3420).abs() < 5e-5);
    }

    #[test]
    fn pure_zero_sequence_duties() {
        let op = OperatingPoint {
            d_d: 0.0,
            d_q: 0.0,
            ..table_duties(0.5)
        };
        for theta in [0.0, 1.0, 4.0] {
            let d = duty_waveforms(&op, theta).unwrap();
            for x in d {
                assert!((x - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn no_zero_sequence_is_infeasible() {
        let op = table_duties(0.0);
        let hit = (0..360).any(|k| {
            matches!(
                duty_waveforms(&op, (k as f64).to_radians()),
                Err(Error::InfeasibleDuty { .. })
            )
        });
        assert!(hit);
    }

    #[test]
    fn carrier_values() {
        assert_eq!(carrier(0.0, 1e5), 0.0);
        assert!((carrier(0.5e-5, 1e5) - 0.5).abs() < 1e-12);
        assert_eq!(carrier(1e-5, 1e5), 0.0);
        assert_eq!(carrier(3.0 * 1e-5, 1e5), 0.0);
    }

    #[test]
    fn comparator() {
        assert_eq!(
            switch_states([0.8, 0.3, 0.3], 0.5),
            SwitchState::new(true, false, false)
        );
        assert_eq!(
            switch_states([0.1, 0.2, 0.3], 0.0),
            SwitchState::new(true, true, true)
        );
        assert_eq!(
            switch_states([0.0; 3], 0.3),
            SwitchState::new(false, false, false)
        );
    }

    #[test]
    fn neutral_voltage_levels() {
        assert_eq!(
            u_nn_of_state(SwitchState::new(false, false, false), 30.0),
            0.0
        );
        assert_eq!(
            u_nn_of_state(SwitchState::new(true, false, false), 30.0),
            10.0
        );
        assert_eq!(
            u_nn_of_state(SwitchState::new(true, true, false), 30.0),
            20.0
        );
        assert_eq!(
            u_nn_of_state(SwitchState::new(true, true, true), 30.0),
            30.0
        );
    }

    #[test]
    fn grid_voltage_orientation() {
        let p = ConverterParams::reference();
        let v = grid_voltages(&p, 0.0);
        assert!((v[0] - 8.6).abs() < 1e-12);
        assert!((v[1] + 4.3).abs() < 1e-12);
        assert!((v[2] + 4.3).abs() < 1e-12);
        for t in [1e-3, 7.3e-3, 0.0123] {
            let v = grid_voltages(&p, t);
            assert!(v.iter().sum::<f64>().abs() < 1e-12);
            let dq = park_forward(AbcTriple::from_array(v), p.omega_s() * t);
            assert!((dq.d - 8.6).abs() < 1e-12 && dq.q.abs() < 1e-12 && dq.zero.abs() < 1e-12);
        }
    }

    #[test]
    fn bridge_derivative_at_rest() {
        let p = ConverterParams::reference();
        let expect = [-8.6 / L, 4.3 / L, 4.3 / L];
        for sw in [
            SwitchState::new(false, false, false),
            SwitchState::new(true, true, true),
        ] {
            let d = bridge_derivative(&p, &SwitchedState::rest(), sw, 0.0);
            for (x, y) in d.iter().zip(expect) {
                assert!((x - y).abs() < 1e-6 * y.abs());
            }
        }
    }

    #[test]
    fn bridge_derivative_sums_to_zero() {
        let p = ConverterParams::reference();
        let s = SwitchedState {
            i_a: 3.0,
            i_b: -1.0,
            i_c: -2.0,
            t: 0.0,
        };
        for bits in 0..8u8 {
            let sw = SwitchState::new(bits & 1 != 0, bits & 2 != 0, bits & 4 != 0);
            let d = bridge_derivative(&p, &s, sw, 1.7e-3);
            assert!(d.iter().sum::<f64>().abs() < 1e-6, "{bits}: {d:?}");
        }
    }

    #[test]
    fn breakpoints_cover_crossings() {
        let k = breakpoints(0.9, 1.4, [0.2, 0.95, 0.5]);
        assert_eq!(k, vec![0.9, 0.95, 1.0, 1.2, 1.4]);
    }

    #[test]
    fn short_run_invariants() {
        let p = ConverterParams::reference();
        let op = operating_point(&p, ZeroSequencePolicy::default()).unwrap();
        let trace =
            simulate_switched(&p, &op, 2e-3, default_dt(&p), SwitchedState::rest()).unwrap();
        assert_eq!(trace.len(), 4001);
        let (a, b, c) = (
            trace.channel("i_a_a").unwrap(),
            trace.channel("i_b_a").unwrap(),
            trace.channel("i_c_a").unwrap(),
        );
        for k in 0..trace.len() {
            assert!((a[k] + b[k] + c[k]).abs() < 1e-9);
        }
        assert!(trace
            .channel("u_nn_v")
            .unwrap()
            .iter()
            .all(|v| [0.0, 10.0, 20.0, 30.0].contains(v)));
    }

    #[test]
    fn step_guard() {
        let p = ConverterParams::reference();
        let op = operating_point(&p, ZeroSequencePolicy::default()).unwrap();
        assert!(matches!(
            simulate_switched(&p, &op, 1e-3, 1e-6, SwitchedState::rest()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn averaging_window_rules() {
        let p = ConverterParams::reference();
        let op = operating_point(&p, ZeroSequencePolicy::default()).unwrap();
        let trace = simulate_switched(&p, &op, 1e-4, 0.5e-6, SwitchedState::rest()).unwrap();
        assert!(switching_average(&trace, 0.75e-6).is_err());
        assert!(switching_average(&trace, 0.5e-6).is_err());
        let avg = switching_average(&trace, 1e-5).unwrap();
        assert_eq!(avg.warmup_samples, 19);
        assert_eq!(avg.len(), trace.len());
    }

    #[test]
    fn dominant_line() {
        let dt = 1e-4;
        let x: Vec<f64> = (0..2000)
            .map(|k| (2.0 * std::f64::consts::PI * 50.0 * k as f64 * dt).sin() + 0.1)
            .collect();
        assert_eq!(dominant_frequency(&x, dt), Some(50.0));
    }
}
