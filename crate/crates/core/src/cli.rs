//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification failed, 2 usage or config error,
//! 3 infeasible model, 4 numerical divergence.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::{hz_to_rad, load_params_file, ConverterParams};
use crate::sim_avg::{self, simulate_average, steady_state_of_trace, AvgInputs, AvgState};
use crate::sim_switched::{self, simulate_switched, switching_average, SwitchedState};
use crate::smallsignal::{
    build_state_space, frequency_response, log_space, relative_error, ClosedForms, ResponseTable,
    TransferFunctionId,
};
use crate::steady_state::{
    operating_point, residuals, OperatingPoint, ZeroSequencePolicy, DEFAULT_ZERO_SEQUENCE,
};
use crate::svm::all_sector_sequences;

/// Environment variable capping the frequency-sweep thread count; 0 runs
/// sequentially.
pub const THREADS_ENV: &str = "VSI_SSA_THREADS";

pub const FREQRESP_CSV_HEADER: &str =
    "freq_hz,entry,source,re,im,mag_db,phase_deg,phase_unwrapped_deg,status";

/// Simulated time of the averaged model when none is given, s.
pub const DEFAULT_AVERAGED_DURATION: f64 = 25e-3;

#[derive(Debug, Parser)]
#[command(
    name = "vsi-ssa",
    version,
    about = "Averaged, small-signal and switched models of a grid-tied three-phase inverter"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve and print the steady-state operating point.
    OperatingPoint {
        #[arg(long)]
        config: PathBuf,
    },
    /// Export the frequency response of the small-signal transfer functions.
    Freqresp {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated entry names; all fifteen when omitted.
        #[arg(long, value_delimiter = ',')]
        entries: Vec<String>,
        #[arg(long, default_value_t = 1.0)]
        f_min: f64,
        #[arg(long, default_value_t = 1e4)]
        f_max: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Simulate from rest with the operating-point duties applied open loop.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Seconds; 25 ms averaged, 100 ms switched by default.
        #[arg(long)]
        duration: Option<f64>,
        /// Seconds; 1 us averaged, 1/(20 f_sw) switched by default.
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_ZERO_SEQUENCE)]
        d0: f64,
        #[arg(long)]
        output: PathBuf,
        /// Switched mode only: switching-period averaged trace. Defaults to
        /// the output path with an `.avg.csv` suffix.
        #[arg(long)]
        averaged_output: Option<PathBuf>,
    },
    /// Run the full analytic, averaged and switched chain and compare.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        tolerances: Tolerances,
    },
    /// Print the per-sector state sequences and u_nN levels.
    SvmTable {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Averaged,
    Switched,
}

#[derive(Debug, Clone, Copy, PartialEq, clap::Args)]
pub struct Tolerances {
    /// Relative deviation of switched <i_od> from the averaged model.
    #[arg(long, default_value_t = 0.05)]
    pub tol_i_od: f64,
    /// Absolute bound on switched <i_oq>, A.
    #[arg(long, default_value_t = 0.1)]
    pub tol_i_oq: f64,
    /// Relative deviation of switched <i_in> from the configured input current.
    #[arg(long, default_value_t = 0.05)]
    pub tol_i_in: f64,
    /// Relative mismatch between closed-form and numeric transfer functions.
    #[arg(long, default_value_t = 1e-9)]
    pub tol_tf: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_i_od: 0.05,
            tol_i_oq: 0.1,
            tol_i_in: 0.05,
            tol_tf: 1e-9,
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::OperatingPoint { config } => cmd_operating_point(&config, out),
        Command::Freqresp {
            config,
            entries,
            f_min,
            f_max,
            points,
            output,
        } => thread_setting().and_then(|threads| {
            let opts = FreqrespOptions {
                entries,
                f_min,
                f_max,
                points,
                threads,
            };
            cmd_freqresp(&config, &opts, &output, out)
        }),
        Command::Simulate {
            config,
            mode,
            duration,
            dt,
            d0,
            output,
            averaged_output,
        } => {
            let opts = SimulateOptions {
                mode,
                duration,
                dt,
                d_0: d0,
                averaged_output,
            };
            cmd_simulate(&config, &opts, &output, out)
        }
        Command::Verify { config, tolerances } => {
            return match cmd_verify(&config, &tolerances) {
                Ok(report) => {
                    let _ = write!(out, "{report}");
                    if report.passed() {
                        0
                    } else {
                        1
                    }
                }
                Err(StageError { stage, error }) => {
                    let _ = writeln!(err, "error: verify stage `{stage}` failed: {error}");
                    error.exit_code()
                }
            };
        }
        Command::SvmTable { config } => cmd_svm_table(&config, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn thread_setting() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse::<usize>().map(Some).map_err(|_| {
            Error::Usage(format!(
                "{THREADS_ENV} must be a non-negative integer, got `{v}`"
            ))
        }),
        Err(_) => Ok(None),
    }
}

fn solve(config: &Path, d_0: f64) -> Result<(ConverterParams, OperatingPoint)> {
    let params = load_params_file(config)?;
    let op = operating_point(&params, ZeroSequencePolicy::Constant(d_0))?;
    Ok((params, op))
}

pub fn cmd_operating_point(config: &Path, out: &mut dyn Write) -> Result<()> {
    let (params, op) = solve(config, DEFAULT_ZERO_SEQUENCE)?;
    let r = residuals(&params, &op);
    writeln!(out, "d_d  = {:.6}", op.d_d)?;
    writeln!(out, "d_q  = {:.6}", op.d_q)?;
    writeln!(out, "d_0  = {:.6}", op.d_0)?;
    writeln!(out, "i_ld = {:.6} A", op.i_ld)?;
    writeln!(out, "i_lq = {:.6} A", op.i_lq)?;
    writeln!(out, "residual d-voltage  = {:.3e} V", r.r_d)?;
    writeln!(out, "residual q-voltage  = {:.3e} V", r.r_q)?;
    writeln!(out, "residual dc-current = {:.3e} A", r.r_in)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreqrespOptions {
    pub entries: Vec<String>,
    pub f_min: f64,
    pub f_max: f64,
    pub points: usize,
    pub threads: Option<usize>,
}

fn parse_entries(names: &[String]) -> Result<Vec<TransferFunctionId>> {
    if names.is_empty() {
        return Ok(TransferFunctionId::ALL.to_vec());
    }
    names.iter().map(|n| n.trim().parse()).collect()
}

fn write_response_rows(
    table: &ResponseTable,
    source: &str,
    out: &mut dyn Write,
) -> std::io::Result<()> {
    for p in &table.points {
        let (re, im) = p.value.map_or((f64::NAN, f64::NAN), |v| (v.re, v.im));
        let status = if p.is_pole() { "pole" } else { "ok" };
        writeln!(
            out,
            "{},{},{source},{re},{im},{},{},{},{status}",
            p.freq_hz, p.entry, p.mag_db, p.phase_deg, p.phase_unwrapped_deg
        )?;
    }
    Ok(())
}

/// Writes numeric rows (losses as configured) followed by closed-form rows
/// (losses neglected).
pub fn cmd_freqresp(
    config: &Path,
    opts: &FreqrespOptions,
    output: &Path,
    out: &mut dyn Write,
) -> Result<()> {
    let entries = parse_entries(&opts.entries)?;
    if !(opts.f_min > 0.0 && opts.f_min < opts.f_max && opts.f_max.is_finite()) {
        return Err(Error::Usage(format!(
            "need 0 < f_min < f_max, got f_min = {} and f_max = {}",
            opts.f_min, opts.f_max
        )));
    }
    if opts.points < 2 {
        return Err(Error::Usage(format!(
            "need at least 2 points, got {}",
            opts.points
        )));
    }
    let (params, op) = solve(config, DEFAULT_ZERO_SEQUENCE)?;
    let freqs = log_space(opts.f_min, opts.f_max, opts.points);

    let numeric = frequency_response(
        &build_state_space(&params, &op)?,
        &entries,
        &freqs,
        opts.threads,
    )?;
    let closed = frequency_response(
        &ClosedForms::new(&params, &op),
        &entries,
        &freqs,
        opts.threads,
    )?;

    let mut file = BufWriter::new(File::create(output)?);
    writeln!(file, "{FREQRESP_CSV_HEADER}")?;
    write_response_rows(&numeric, "numeric", &mut file)?;
    write_response_rows(&closed, "closed_form", &mut file)?;
    file.flush()?;

    let rows = numeric.points.len() + closed.points.len();
    let poles = closed.points.iter().filter(|p| p.is_pole()).count();
    writeln!(
        out,
        "wrote {rows} rows to {} ({poles} closed-form pole rows)",
        output.display()
    )?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOptions {
    pub mode: Mode,
    pub duration: Option<f64>,
    pub dt: Option<f64>,
    pub d_0: f64,
    pub averaged_output: Option<PathBuf>,
}

fn check_positive(name: &str, value: Option<f64>) -> Result<()> {
    match value {
        Some(v) if !(v > 0.0 && v.is_finite()) => {
            Err(Error::Usage(format!("--{name} must be positive, got {v}")))
        }
        _ => Ok(()),
    }
}

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    write(&mut file)?;
    file.flush()?;
    Ok(())
}

fn default_averaged_path(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map_or_else(|| "trace".into(), |s| s.to_string_lossy().into_owned());
    output.with_file_name(format!("{stem}.avg.csv"))
}

pub fn cmd_simulate(
    config: &Path,
    opts: &SimulateOptions,
    output: &Path,
    out: &mut dyn Write,
) -> Result<()> {
    check_positive("duration", opts.duration)?;
    check_positive("dt", opts.dt)?;
    let (params, op) = solve(config, opts.d_0)?;
    let period = 1.0 / params.f_grid;

    match opts.mode {
        Mode::Averaged => {
            let dt = opts.dt.unwrap_or(sim_avg::DEFAULT_DT);
            let duration = opts.duration.unwrap_or(DEFAULT_AVERAGED_DURATION);
            let inputs = AvgInputs::from_operating_point(&params, &op);
            let trace = simulate_average(&params, &inputs, AvgState::rest(), duration, dt)?;
            write_file(output, |f| Ok(trace.write_csv(f)?))?;
            let window = period.min(trace.duration());
            let stats = steady_state_of_trace(&trace, window)?;
            writeln!(out, "wrote {} samples to {}", trace.len(), output.display())?;
            for name in ["i_od_a", "i_oq_a", "i_in_a"] {
                let c = stats.get(name).expect("channel present");
                writeln!(
                    out,
                    "trailing mean {name} = {:.6} (ripple {:.3e})",
                    c.mean, c.ripple
                )?;
            }
        }
        Mode::Switched => {
            let dt = opts.dt.unwrap_or_else(|| sim_switched::default_dt(&params));
            let duration = opts.duration.unwrap_or(sim_switched::DEFAULT_DURATION);
            let trace = simulate_switched(&params, &op, duration, dt, SwitchedState::rest())?;
            let window = (1.0 / params.f_sw / dt).round() * dt;
            let averaged = switching_average(&trace, window)?;
            let avg_path = opts
                .averaged_output
                .clone()
                .unwrap_or_else(|| default_averaged_path(output));
            write_file(output, |f| Ok(trace.write_csv(f)?))?;
            write_file(&avg_path, |f| trace.write_averaged_csv(&averaged, f))?;
            let stats = steady_state_of_trace(&trace, period.min(trace.duration()))?;
            writeln!(out, "wrote {} samples to {}", trace.len(), output.display())?;
            writeln!(
                out,
                "wrote switching-period averages to {}",
                avg_path.display()
            )?;
            for name in ["i_od_a", "i_oq_a", "i_in_a", "u_nn_v"] {
                let c = stats.get(name).expect("channel present");
                writeln!(out, "trailing mean {name} = {:.6}", c.mean)?;
            }
        }
    }
    Ok(())
}

pub fn cmd_svm_table(config: &Path, out: &mut dyn Write) -> Result<()> {
    let params = load_params_file(config)?;
    for seq in all_sector_sequences(params.u_in) {
        let states: Vec<String> = seq.states.iter().map(ToString::to_string).collect();
        let levels: Vec<String> = seq.u_nn_levels.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "sector {}", seq.sector)?;
        writeln!(out, "  states {}", states.join(" "))?;
        writeln!(out, "  u_nN   {}", levels.join(" "))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Relative,
    Absolute,
}

/// One tracked quantity of a verification run.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub name: &'static str,
    pub expected: f64,
    pub measured: f64,
    pub abs_dev: f64,
    pub rel_dev: f64,
    pub bound: Bound,
    pub tolerance: f64,
}

impl Comparison {
    pub fn new(
        name: &'static str,
        expected: f64,
        measured: f64,
        bound: Bound,
        tolerance: f64,
    ) -> Self {
        let abs_dev = (measured - expected).abs();
        let rel_dev = if expected == 0.0 {
            f64::INFINITY
        } else {
            abs_dev / expected.abs()
        };
        Self {
            name,
            expected,
            measured,
            abs_dev,
            rel_dev,
            bound,
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        match self.bound {
            Bound::Relative => self.rel_dev <= self.tolerance,
            Bound::Absolute => self.abs_dev <= self.tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub operating_point: OperatingPoint,
    pub averaged_i_od: f64,
    pub averaged_i_oq: f64,
    pub averaged_i_in: f64,
    pub switched_i_od: f64,
    pub switched_i_oq: f64,
    pub switched_i_in: f64,
    pub comparisons: Vec<Comparison>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.comparisons.iter().all(Comparison::passed)
    }

    pub fn get(&self, name: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = &self.operating_point;
        writeln!(
            f,
            "operating point: d_d = {:.6}, d_q = {:.6}, d_0 = {}, i_ld = {:.6} A",
            op.d_d, op.d_q, op.d_0, op.i_ld
        )?;
        writeln!(
            f,
            "averaged model:  i_od = {:.6} A, i_oq = {:.3e} A, i_in = {:.6} A",
            self.averaged_i_od, self.averaged_i_oq, self.averaged_i_in
        )?;
        writeln!(
            f,
            "switched model:  i_od = {:.6} A, i_oq = {:.3e} A, i_in = {:.6} A",
            self.switched_i_od, self.switched_i_oq, self.switched_i_in
        )?;
        for c in &self.comparisons {
            let (dev, kind) = match c.bound {
                Bound::Relative => (c.rel_dev, "rel"),
                Bound::Absolute => (c.abs_dev, "abs"),
            };
            writeln!(
                f,
                "{} {:<14} expected {:<12.6} measured {:<12.6} {kind} dev {:.3e} <= {:.3e}",
                if c.passed() { "PASS" } else { "FAIL" },
                c.name,
                c.expected,
                c.measured,
                dev,
                c.tolerance
            )?;
        }
        writeln!(f, "{}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

fn stage<T>(name: &'static str, r: Result<T>) -> std::result::Result<T, StageError> {
    r.map_err(|error| StageError { stage: name, error })
}

/// Largest relative mismatch between closed forms and `C (sI - A)^-1 B + D`
/// with losses removed, over 50 log-spaced frequencies from 1 Hz to 10 kHz.
pub fn transfer_function_mismatch(params: &ConverterParams) -> Result<f64> {
    let lossless = params.lossless();
    let op = operating_point(&lossless, ZeroSequencePolicy::default())?;
    let model = build_state_space(&lossless, &op)?;
    let closed = ClosedForms::new(&lossless, &op);
    let mut worst = 0.0f64;
    for f in log_space(1.0, 1e4, 50) {
        let s = Complex64::new(0.0, hz_to_rad(f));
        let g = model.transfer_matrix(s)?;
        for id in TransferFunctionId::ALL {
            let numeric = id.from_matrix(&g);
            let analytic = closed
                .get(id)
                .eval(s)
                .ok_or(Error::PoleEvaluation { s, eigenvalue: s })?;
            worst = worst.max(relative_error(numeric, analytic));
        }
    }
    Ok(worst)
}

pub fn cmd_verify(
    config: &Path,
    tol: &Tolerances,
) -> std::result::Result<VerifyReport, StageError> {
    let params = stage("config", load_params_file(config))?;
    let op = stage(
        "operating-point",
        operating_point(&params, ZeroSequencePolicy::default()),
    )?;
    let period = 1.0 / params.f_grid;

    let inputs = AvgInputs::from_operating_point(&params, &op);
    let avg = stage("averaged-sim", {
        simulate_average(
            &params,
            &inputs,
            AvgState::rest(),
            DEFAULT_AVERAGED_DURATION,
            sim_avg::DEFAULT_DT,
        )
        .and_then(|t| steady_state_of_trace(&t, 1e-3))
    })?;
    let sw = stage("switched-sim", {
        simulate_switched(
            &params,
            &op,
            sim_switched::DEFAULT_DURATION,
            sim_switched::default_dt(&params),
            SwitchedState::rest(),
        )
        .and_then(|t| steady_state_of_trace(&t, period))
    })?;
    let tf = stage("transfer-functions", transfer_function_mismatch(&params))?;

    let mean = |s: &crate::trace::WindowStats, n: &str| s.mean(n).expect("channel present");
    let (a_od, a_oq, a_in) = (
        mean(&avg, "i_od_a"),
        mean(&avg, "i_oq_a"),
        mean(&avg, "i_in_a"),
    );
    let (s_od, s_oq, s_in) = (
        mean(&sw, "i_od_a"),
        mean(&sw, "i_oq_a"),
        mean(&sw, "i_in_a"),
    );

    let comparisons = vec![
        Comparison::new("i_od", a_od, s_od, Bound::Relative, tol.tol_i_od),
        Comparison::new("i_oq", 0.0, s_oq, Bound::Absolute, tol.tol_i_oq),
        Comparison::new("i_in", params.i_in, s_in, Bound::Relative, tol.tol_i_in),
        Comparison::new("tf_mismatch", 0.0, tf, Bound::Absolute, tol.tol_tf),
    ];
    Ok(VerifyReport {
        operating_point: op,
        averaged_i_od: a_od,
        averaged_i_oq: a_oq,
        averaged_i_in: a_in,
        switched_i_od: s_od,
        switched_i_oq: s_oq,
        switched_i_in: s_in,
        comparisons,
    })
}
