//! Time-domain integration of the nonlinear averaged dq model.

use crate::error::{Error, Result};
use crate::ode::rk4_step;
use crate::params::ConverterParams;
use crate::steady_state::OperatingPoint;
use crate::trace::{trailing_stats, SimTrace, TraceMetadata, WindowStats};

/// Default step for the averaged model, s.
pub const DEFAULT_DT: f64 = 1e-6;

/// Any state component above this magnitude (A) counts as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

pub const CHANNELS: [&str; 5] = ["i_ld_a", "i_lq_a", "i_in_a", "i_od_a", "i_oq_a"];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AvgState {
    pub i_ld: f64,
    pub i_lq: f64,
    pub t: f64,
}

impl AvgState {
    pub fn rest() -> Self {
        Self::default()
    }
}

/// Averaged inputs applied to the model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AvgInputs {
    pub d_d: f64,
    pub d_q: f64,
    pub u_in: f64,
    pub u_od: f64,
    pub u_oq: f64,
}

impl AvgInputs {
    /// Steady-state duties with the configured source and grid voltages.
    pub fn from_operating_point(params: &ConverterParams, op: &OperatingPoint) -> Self {
        Self {
            d_d: op.d_d,
            d_q: op.d_q,
            u_in: params.u_in,
            u_od: params.u_od,
            u_oq: params.u_oq,
        }
    }
}

/// Inputs as a function of time.
pub trait InputSchedule {
    fn inputs_at(&self, t: f64) -> AvgInputs;
}

impl InputSchedule for AvgInputs {
    fn inputs_at(&self, _t: f64) -> AvgInputs {
        *self
    }
}

impl<F: Fn(f64) -> AvgInputs> InputSchedule for F {
    fn inputs_at(&self, t: f64) -> AvgInputs {
        self(t)
    }
}

/// `(d i_ld / dt, d i_lq / dt)` of the averaged inductor equations.
pub fn average_derivative(
    params: &ConverterParams,
    state: &AvgState,
    inputs: &AvgInputs,
) -> [f64; 2] {
    let l = params.inductance;
    let r = params.r_eq();
    let w_l = params.omega_s() * l;
    [
        (-r * state.i_ld + w_l * state.i_lq + inputs.d_d * inputs.u_in - inputs.u_od) / l,
        (-w_l * state.i_ld - r * state.i_lq + inputs.d_q * inputs.u_in - inputs.u_oq) / l,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvgOutputs {
    pub i_in: f64,
    pub i_od: f64,
    pub i_oq: f64,
}

pub fn average_outputs(state: &AvgState, inputs: &AvgInputs) -> AvgOutputs {
    AvgOutputs {
        i_in: 1.5 * (inputs.d_d * state.i_ld + inputs.d_q * state.i_lq),
        i_od: state.i_ld,
        i_oq: state.i_lq,
    }
}

/// Largest step accepted for a parameter set: one tenth of `1 / |A|`.
pub fn max_stable_dt(params: &ConverterParams) -> f64 {
    let sigma = params.r_eq() / params.inductance;
    0.1 / sigma.hypot(params.omega_s())
}

/// Number of steps covering `duration`; shared by both simulators.
pub(crate) fn step_count(duration: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Usage(format!(
            "time step must be positive, got {dt}"
        )));
    }
    if !(duration.is_finite() && duration >= dt * (1.0 - 1e-9)) {
        return Err(Error::Usage(format!(
            "duration {duration} s must be at least one time step ({dt} s)"
        )));
    }
    Ok(((duration / dt).round() as usize).max(1))
}

/// Fixed-step RK4 integration from `initial` over `duration`.
///
/// The trace holds `n + 1` samples for `n` steps, starting at `initial.t`.
pub fn simulate_average(
    params: &ConverterParams,
    schedule: &impl InputSchedule,
    initial: AvgState,
    duration: f64,
    dt: f64,
) -> Result<SimTrace> {
    let steps = step_count(duration, dt)?;
    let limit = max_stable_dt(params);
    if dt > limit {
        return Err(Error::Usage(format!(
            "time step {dt} s exceeds the stability limit {limit} s"
        )));
    }

    let metadata = TraceMetadata {
        params: *params,
        scenario: "averaged".into(),
        integrator: format!("rk4 fixed dt={dt}"),
    };
    let mut trace = SimTrace::new(dt, initial.t, &CHANNELS, metadata);
    let record = |trace: &mut SimTrace, s: &AvgState| {
        let o = average_outputs(s, &schedule.inputs_at(s.t));
        trace.push(&[s.i_ld, s.i_lq, o.i_in, o.i_od, o.i_oq]);
    };

    let rhs = |t: f64, x: &[f64; 2]| {
        let s = AvgState {
            i_ld: x[0],
            i_lq: x[1],
            t,
        };
        average_derivative(params, &s, &schedule.inputs_at(t))
    };

    let mut state = initial;
    record(&mut trace, &state);
    for k in 0..steps {
        let t = initial.t + k as f64 * dt;
        let [i_ld, i_lq] = rk4_step(rhs, t, [state.i_ld, state.i_lq], dt);
        state = AvgState {
            i_ld,
            i_lq,
            t: initial.t + (k + 1) as f64 * dt,
        };
        if !(i_ld.abs() <= DIVERGENCE_LIMIT && i_lq.abs() <= DIVERGENCE_LIMIT) {
            return Err(Error::Diverged { sample: k + 1 });
        }
        record(&mut trace, &state);
    }
    Ok(trace)
}

/// Mean and peak-to-peak ripple of every channel over the trailing window.
pub fn steady_state_of_trace(trace: &SimTrace, window: f64) -> Result<WindowStats> {
    trailing_stats(trace, window)
}
