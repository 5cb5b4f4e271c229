//! Linearized dq model and its transfer functions.
//!
//! State `[i_Ld, i_Lq]`, inputs `[u_in, u_od, u_oq, d_d, d_q]`, outputs
//! `[i_in, i_od, i_oq]`; all quantities are small-signal deviations.
//!
//! Two independent routes to the 3x5 transfer matrix are provided: the
//! numeric `C (sI - A)^-1 B + D` and closed-form rational functions derived
//! with `r_eq` neglected. The closed forms are stored expanded over
//! `s^2 + omega_s^2`, so no entry has a duty ratio in a denominator.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::{hz_to_rad, ConverterParams};
use crate::rational::RationalTransferFunction;
use crate::steady_state::OperatingPoint;

pub const NUM_STATES: usize = 2;
pub const NUM_INPUTS: usize = 5;
pub const NUM_OUTPUTS: usize = 3;

pub type TransferMatrix = [[Complex64; NUM_INPUTS]; NUM_OUTPUTS];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSpaceModel {
    pub a: [[f64; NUM_STATES]; NUM_STATES],
    pub b: [[f64; NUM_INPUTS]; NUM_STATES],
    pub c: [[f64; NUM_STATES]; NUM_OUTPUTS],
    pub d: [[f64; NUM_INPUTS]; NUM_OUTPUTS],
}

fn state_matrix(params: &ConverterParams) -> [[f64; 2]; 2] {
    let sigma = params.r_eq() / params.inductance;
    let w = params.omega_s();
    [[-sigma, w], [-w, -sigma]]
}

fn input_matrix(params: &ConverterParams, op: &OperatingPoint) -> [[f64; 5]; 2] {
    let l = params.inductance;
    let u = params.u_in;
    [
        [op.d_d / l, -1.0 / l, 0.0, u / l, 0.0],
        [op.d_q / l, 0.0, -1.0 / l, 0.0, u / l],
    ]
}

pub fn build_state_space(params: &ConverterParams, op: &OperatingPoint) -> Result<StateSpaceModel> {
    if op.d_d == 0.0 {
        return Err(Error::ZeroDuty);
    }
    let mut d = [[0.0; NUM_INPUTS]; NUM_OUTPUTS];
    d[0][3] = params.i_in / op.d_d;
    Ok(StateSpaceModel {
        a: state_matrix(params),
        b: input_matrix(params, op),
        c: [[1.5 * op.d_d, 1.5 * op.d_q], [1.0, 0.0], [0.0, 1.0]],
        d,
    })
}

impl StateSpaceModel {
    /// `A dx + B du`.
    pub fn derivative(&self, dx: [f64; 2], du: [f64; 5]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.a[i][0] * dx[0]
                + self.a[i][1] * dx[1]
                + (0..NUM_INPUTS).map(|j| self.b[i][j] * du[j]).sum::<f64>();
        }
        out
    }

    /// `C dx + D du`.
    pub fn output(&self, dx: [f64; 2], du: [f64; 5]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.c[i][0] * dx[0]
                + self.c[i][1] * dx[1]
                + (0..NUM_INPUTS).map(|j| self.d[i][j] * du[j]).sum::<f64>();
        }
        out
    }

    /// Both eigenvalues of `A`, upper half-plane first.
    pub fn eigenvalues(&self) -> [Complex64; 2] {
        let [[a, b], [c, d]] = self.a;
        let half_trace = 0.5 * (a + d);
        let disc = Complex64::new(0.25 * (a - d) * (a - d) + b * c, 0.0).sqrt();
        let (l1, l2) = (half_trace + disc, half_trace - disc);
        if l1.im >= l2.im {
            [l1, l2]
        } else {
            [l2, l1]
        }
    }

    /// `C (sI - A)^-1 B + D` with the 2x2 inverse taken via the adjugate.
    pub fn transfer_matrix(&self, s: Complex64) -> Result<TransferMatrix> {
        let [[a11, a12], [a21, a22]] = self.a;
        let m11 = s - a11;
        let m22 = s - a22;
        let det = m11 * m22 - a12 * a21;
        let scale = s
            .norm_sqr()
            .max(a11 * a11 + a12 * a12 + a21 * a21 + a22 * a22);
        if det.norm() <= 1e-12 * scale {
            let eigenvalue = self
                .eigenvalues()
                .into_iter()
                .min_by(|x, y| (x - s).norm().total_cmp(&(y - s).norm()))
                .expect("two eigenvalues");
            return Err(Error::PoleEvaluation { s, eigenvalue });
        }
        // (sI - A)^-1 = adj / det
        let inv = [[m22 / det, a12 / det], [a21 / det, m11 / det]];

        let mut x = [[Complex64::new(0.0, 0.0); NUM_INPUTS]; NUM_STATES];
        for i in 0..NUM_STATES {
            for j in 0..NUM_INPUTS {
                x[i][j] = inv[i][0] * self.b[0][j] + inv[i][1] * self.b[1][j];
            }
        }
        let mut g = [[Complex64::new(0.0, 0.0); NUM_INPUTS]; NUM_OUTPUTS];
        for i in 0..NUM_OUTPUTS {
            for j in 0..NUM_INPUTS {
                g[i][j] = x[0][j] * self.c[i][0] + x[1][j] * self.c[i][1] + self.d[i][j];
            }
        }
        Ok(g)
    }
}

pub fn transfer_matrix_numeric(model: &StateSpaceModel, s: Complex64) -> Result<TransferMatrix> {
    model.transfer_matrix(s)
}

/// `A dx + B du` around `op`, straight from the parameters.
pub fn linearized_derivative(
    params: &ConverterParams,
    op: &OperatingPoint,
    dx: [f64; 2],
    du: [f64; 5],
) -> [f64; 2] {
    let a = state_matrix(params);
    let b = input_matrix(params, op);
    let mut out = [0.0; 2];
    for i in 0..2 {
        out[i] = a[i][0] * dx[0] + a[i][1] * dx[1] + (0..5).map(|j| b[i][j] * du[j]).sum::<f64>();
    }
    out
}

/// The fifteen entries of the transfer matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TransferFunctionId {
    /// Input admittance, `i_in / u_in`.
    YIn,
    TOiD,
    TOiQ,
    GCiD,
    GCiQ,
    GIoD,
    GIoQ,
    /// d-channel output admittance, `-i_od / u_od`.
    YOD,
    /// q-channel output admittance, `-i_oq / u_oq`.
    YOQ,
    /// `i_od / u_oq`.
    GCrQd,
    /// `i_oq / u_od`.
    GCrDq,
    GCoD,
    GCoQ,
    /// `i_od / d_q`.
    GCoQd,
    /// `i_oq / d_d`.
    GCoDq,
}

impl TransferFunctionId {
    pub const ALL: [TransferFunctionId; 15] = [
        Self::YIn,
        Self::TOiD,
        Self::TOiQ,
        Self::GCiD,
        Self::GCiQ,
        Self::GIoD,
        Self::GIoQ,
        Self::YOD,
        Self::YOQ,
        Self::GCrQd,
        Self::GCrDq,
        Self::GCoD,
        Self::GCoQ,
        Self::GCoQd,
        Self::GCoDq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::YIn => "Y_in",
            Self::TOiD => "T_oi_d",
            Self::TOiQ => "T_oi_q",
            Self::GCiD => "G_ci_d",
            Self::GCiQ => "G_ci_q",
            Self::GIoD => "G_io_d",
            Self::GIoQ => "G_io_q",
            Self::YOD => "Y_o_d",
            Self::YOQ => "Y_o_q",
            Self::GCrQd => "G_cr_qd",
            Self::GCrDq => "G_cr_dq",
            Self::GCoD => "G_co_d",
            Self::GCoQ => "G_co_q",
            Self::GCoQd => "G_co_qd",
            Self::GCoDq => "G_co_dq",
        }
    }

    /// `(output row, input column, sign)` in the transfer matrix. The output
    /// admittances appear negated because they are defined with the current
    /// flowing into the converter's output port.
    pub fn position(self) -> (usize, usize, f64) {
        match self {
            Self::YIn => (0, 0, 1.0),
            Self::TOiD => (0, 1, 1.0),
            Self::TOiQ => (0, 2, 1.0),
            Self::GCiD => (0, 3, 1.0),
            Self::GCiQ => (0, 4, 1.0),
            Self::GIoD => (1, 0, 1.0),
            Self::YOD => (1, 1, -1.0),
            Self::GCrQd => (1, 2, 1.0),
            Self::GCoD => (1, 3, 1.0),
            Self::GCoQd => (1, 4, 1.0),
            Self::GIoQ => (2, 0, 1.0),
            Self::GCrDq => (2, 1, 1.0),
            Self::YOQ => (2, 2, -1.0),
            Self::GCoDq => (2, 3, 1.0),
            Self::GCoQ => (2, 4, 1.0),
        }
    }

    pub fn from_matrix(self, g: &TransferMatrix) -> Complex64 {
        let (row, col, sign) = self.position();
        g[row][col] * sign
    }

    pub fn valid_names() -> String {
        Self::ALL.map(Self::name).join(", ")
    }
}

impl fmt::Display for TransferFunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransferFunctionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown transfer function `{s}`; valid names: {}",
                    Self::valid_names()
                ))
            })
    }
}

/// Closed-form entry with `r_eq` neglected, as `N(s) / (s^2 + omega_s^2)`.
pub fn closed_form_tf(
    params: &ConverterParams,
    op: &OperatingPoint,
    which: TransferFunctionId,
) -> RationalTransferFunction {
    use TransferFunctionId::*;

    let l = params.inductance;
    let w = params.omega_s();
    let u = params.u_in;
    let (dd, dq) = (op.d_d, op.d_q);
    let k = 1.5 / l;

    let numerator = match which {
        YIn => vec![0.0, k * (dd * dd + dq * dq)],
        TOiD => vec![k * dq * w, -k * dd],
        TOiQ => vec![-k * dd * w, -k * dq],
        // The constant term cancels when d_q satisfies the q-channel balance.
        GCiD => {
            let feedthrough = params.i_in / dd;
            vec![
                feedthrough * w * w - k * u * dq * w,
                k * u * dd,
                feedthrough,
            ]
        }
        GCiQ => vec![k * u * dd * w, k * u * dq],
        GIoD => vec![dq * w / l, dd / l],
        GIoQ => vec![-dd * w / l, dq / l],
        YOD | YOQ => vec![0.0, 1.0 / l],
        GCrQd => vec![-w / l],
        GCrDq => vec![w / l],
        GCoD | GCoQ => vec![0.0, u / l],
        GCoQd => vec![u * w / l],
        GCoDq => vec![-u * w / l],
    };
    RationalTransferFunction::new(numerator, vec![w * w, 0.0, 1.0])
}

/// Something that can evaluate transfer-matrix entries at a complex frequency.
pub trait TransferEvaluator: Sync {
    /// `Ok(None)` marks an evaluation exactly at a pole.
    fn eval(&self, which: TransferFunctionId, s: Complex64) -> Result<Option<Complex64>>;
}

impl TransferEvaluator for StateSpaceModel {
    fn eval(&self, which: TransferFunctionId, s: Complex64) -> Result<Option<Complex64>> {
        match self.transfer_matrix(s) {
            Ok(g) => Ok(Some(which.from_matrix(&g))),
            Err(Error::PoleEvaluation { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// All fifteen closed forms for one parameter set and operating point.
#[derive(Debug, Clone)]
pub struct ClosedForms {
    entries: Vec<(TransferFunctionId, RationalTransferFunction)>,
}

impl ClosedForms {
    pub fn new(params: &ConverterParams, op: &OperatingPoint) -> Self {
        Self {
            entries: TransferFunctionId::ALL
                .into_iter()
                .map(|id| (id, closed_form_tf(params, op, id)))
                .collect(),
        }
    }

    pub fn get(&self, which: TransferFunctionId) -> &RationalTransferFunction {
        &self
            .entries
            .iter()
            .find(|(id, _)| *id == which)
            .expect("all identifiers present")
            .1
    }
}

impl TransferEvaluator for ClosedForms {
    fn eval(&self, which: TransferFunctionId, s: Complex64) -> Result<Option<Complex64>> {
        Ok(self.get(which).eval(s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponsePoint {
    pub freq_hz: f64,
    pub entry: TransferFunctionId,
    /// `None` at an undamped pole.
    pub value: Option<Complex64>,
    pub mag_db: f64,
    pub phase_deg: f64,
    pub phase_unwrapped_deg: f64,
}

impl ResponsePoint {
    pub fn is_pole(&self) -> bool {
        self.value.is_none()
    }
}

/// Points ordered by frequency, then by entry in request order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseTable {
    pub points: Vec<ResponsePoint>,
}

pub const RESPONSE_CSV_HEADER: &str = "freq_hz,entry,re,im,mag_db,phase_deg,phase_unwrapped_deg";

impl ResponseTable {
    /// Writes the response CSV. Pole rows carry `NaN` in every numeric column.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{RESPONSE_CSV_HEADER}")?;
        for p in &self.points {
            let (re, im) = p.value.map_or((f64::NAN, f64::NAN), |v| (v.re, v.im));
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                p.freq_hz, p.entry, re, im, p.mag_db, p.phase_deg, p.phase_unwrapped_deg
            )?;
        }
        Ok(())
    }

    pub fn entry(&self, which: TransferFunctionId) -> impl Iterator<Item = &ResponsePoint> {
        self.points.iter().filter(move |p| p.entry == which)
    }
}

/// Evaluates `entries` at `s = j 2 pi f` for every frequency.
///
/// `threads`: `None` uses the global rayon pool, `Some(0)` runs sequentially,
/// `Some(n)` caps the sweep at `n` worker threads. Output order never depends
/// on the thread count.
pub fn frequency_response(
    evaluator: &dyn TransferEvaluator,
    entries: &[TransferFunctionId],
    frequencies: &[f64],
    threads: Option<usize>,
) -> Result<ResponseTable> {
    if entries.is_empty() {
        return Err(Error::Usage(
            "no transfer-function entries requested".into(),
        ));
    }
    if frequencies.is_empty() {
        return Err(Error::Usage("frequency list is empty".into()));
    }
    if let Some(bad) = frequencies.iter().find(|f| !(**f > 0.0) || !f.is_finite()) {
        return Err(Error::Usage(format!("frequency {bad} Hz is not positive")));
    }

    let eval_row = |f: &f64| -> Result<Vec<Option<Complex64>>> {
        let s = Complex64::new(0.0, hz_to_rad(*f));
        entries.iter().map(|id| evaluator.eval(*id, s)).collect()
    };
    let rows: Vec<Vec<Option<Complex64>>> = match threads {
        Some(0) => frequencies.iter().map(eval_row).collect::<Result<_>>()?,
        None => frequencies
            .par_iter()
            .map(eval_row)
            .collect::<Result<_>>()?,
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Usage(format!("thread pool: {e}")))?
            .install(|| frequencies.par_iter().map(eval_row).collect::<Result<_>>())?,
    };

    let mut points = Vec::with_capacity(frequencies.len() * entries.len());
    let mut last_phase: Vec<Option<(f64, f64)>> = vec![None; entries.len()];
    for (f, row) in frequencies.iter().zip(rows) {
        for (k, (id, value)) in entries.iter().zip(row).enumerate() {
            let (mag_db, phase_deg, phase_unwrapped_deg) = match value {
                Some(v) => {
                    let phase = v.arg().to_degrees();
                    let unwrapped = match last_phase[k] {
                        Some((prev_wrapped, prev_unwrapped)) => {
                            prev_unwrapped + wrap_degrees(phase - prev_wrapped)
                        }
                        None => phase,
                    };
                    last_phase[k] = Some((phase, unwrapped));
                    (20.0 * v.norm().log10(), phase, unwrapped)
                }
                None => (f64::NAN, f64::NAN, f64::NAN),
            };
            points.push(ResponsePoint {
                freq_hz: *f,
                entry: *id,
                value,
                mag_db,
                phase_deg,
                phase_unwrapped_deg,
            });
        }
    }
    Ok(ResponseTable { points })
}

/// Maps an angle difference into (-180, 180].
fn wrap_degrees(x: f64) -> f64 {
    let y = (x + 180.0).rem_euclid(360.0) - 180.0;
    if y == -180.0 {
        180.0
    } else {
        y
    }
}

/// `n` logarithmically spaced frequencies from `f_min` to `f_max` inclusive.
pub fn log_space(f_min: f64, f_max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![f_min],
        _ => {
            let ratio = (f_max / f_min).ln();
            (0..n)
                .map(|k| match k {
                    0 => f_min,
                    _ if k == n - 1 => f_max,
                    _ => f_min * (ratio * k as f64 / (n - 1) as f64).exp(),
                })
                .collect()
        }
    }
}

/// Relative distance, normalized by the larger magnitude.
pub fn relative_error(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}
