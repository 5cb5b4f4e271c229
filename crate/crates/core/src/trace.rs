//! Uniformly sampled simulation output.

use std::io::Write;

use crate::error::{Error, Result};
use crate::params::ConverterParams;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMetadata {
    pub params: ConverterParams,
    pub scenario: String,
    pub integrator: String,
}

/// Column-major time series sampled at `t_k = t0 + k dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub dt: f64,
    pub t0: f64,
    pub metadata: TraceMetadata,
    /// Leading samples whose value is not yet a full-window average.
    pub warmup_samples: usize,
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl SimTrace {
    pub fn new(dt: f64, t0: f64, names: &[&str], metadata: TraceMetadata) -> Self {
        Self {
            dt,
            t0,
            metadata,
            warmup_samples: 0,
            names: names.iter().map(|s| s.to_string()).collect(),
            columns: vec![Vec::new(); names.len()],
        }
    }

    /// Appends one sample.
    ///
    /// # Panics
    /// If `values` does not have one entry per channel.
    pub fn push(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.columns.len(), "channel count mismatch");
        for (col, v) in self.columns.iter_mut().zip(values) {
            col.push(*v);
        }
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Time span from the first to the last sample.
    pub fn duration(&self) -> f64 {
        self.len().saturating_sub(1) as f64 * self.dt
    }

    /// Number of samples spanning `window` seconds, if `window` is an integer
    /// multiple of `dt`.
    pub fn samples_in(&self, window: f64) -> Option<usize> {
        let n = window / self.dt;
        let rounded = n.round();
        ((n - rounded).abs() <= 1e-9 * rounded.max(1.0) && rounded >= 0.0)
            .then_some(rounded as usize)
    }

    /// Trailing moving average over `n` samples at the original rate. The
    /// first `n - 1` samples average whatever history exists.
    pub fn moving_average(&self, n: usize) -> SimTrace {
        assert!(n >= 1);
        let columns = self
            .columns
            .iter()
            .map(|col| {
                let mut out = Vec::with_capacity(col.len());
                // compensated running sum keeps constant channels exact
                let mut sum = 0.0;
                let mut carry = 0.0;
                let mut add = |sum: &mut f64, v: f64| {
                    let y = v - carry;
                    let t = *sum + y;
                    carry = (t - *sum) - y;
                    *sum = t;
                };
                for (k, &v) in col.iter().enumerate() {
                    add(&mut sum, v);
                    if k >= n {
                        add(&mut sum, -col[k - n]);
                    }
                    out.push(sum / (k + 1).min(n) as f64);
                }
                out
            })
            .collect();
        SimTrace {
            dt: self.dt,
            t0: self.t0,
            metadata: self.metadata.clone(),
            warmup_samples: (n - 1).min(self.len()),
            names: self.names.clone(),
            columns,
        }
    }

    /// CSV with a leading `t_s` column. Numbers use the shortest round-trip
    /// decimal form, so identical traces produce identical bytes.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "t_s")?;
        for name in &self.names {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for k in 0..self.len() {
            write!(out, "{}", self.time(k))?;
            for col in &self.columns {
                write!(out, ",{}", col[k])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Raw channels followed by `<name>_avg` channels from `averaged` and a
    /// `warmup` flag column.
    pub fn write_averaged_csv<W: Write>(&self, averaged: &SimTrace, mut out: W) -> Result<()> {
        if averaged.names != self.names || averaged.len() != self.len() {
            return Err(Error::Usage(
                "averaged trace does not match raw trace".into(),
            ));
        }
        write!(out, "t_s")?;
        for name in &self.names {
            write!(out, ",{name}")?;
        }
        for name in &self.names {
            write!(out, ",{name}_avg")?;
        }
        writeln!(out, ",warmup")?;
        for k in 0..self.len() {
            write!(out, "{}", self.time(k))?;
            for col in self.columns.iter().chain(&averaged.columns) {
                write!(out, ",{}", col[k])?;
            }
            writeln!(out, ",{}", u8::from(k < averaged.warmup_samples))?;
        }
        Ok(())
    }
}

/// Mean and peak-to-peak ripple of one channel over a window.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    pub name: String,
    pub mean: f64,
    pub ripple: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowStats {
    pub window: f64,
    pub samples: usize,
    pub channels: Vec<ChannelStats>,
}

impl WindowStats {
    pub fn get(&self, name: &str) -> Option<&ChannelStats> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn mean(&self, name: &str) -> Option<f64> {
        self.get(name).map(|c| c.mean)
    }
}

/// Per-channel mean and ripple over the trailing `window` seconds.
pub fn trailing_stats(trace: &SimTrace, window: f64) -> Result<WindowStats> {
    if !(window > 0.0) || window > trace.duration() * (1.0 + 1e-12) {
        return Err(Error::Usage(format!(
            "window {window} s must be positive and at most the trace duration {} s",
            trace.duration()
        )));
    }
    let samples = (window / trace.dt).round() as usize;
    if samples < 2 {
        return Err(Error::Usage(format!(
            "window {window} s spans fewer than 2 samples at dt = {} s",
            trace.dt
        )));
    }
    let start = trace.len() - samples;
    let channels = trace
        .names
        .iter()
        .zip(&trace.columns)
        .map(|(name, col)| {
            let tail = &col[start..];
            let mean = tail.iter().sum::<f64>() / samples as f64;
            let max = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = tail.iter().copied().fold(f64::INFINITY, f64::min);
            ChannelStats {
                name: name.clone(),
                mean,
                ripple: max - min,
            }
        })
        .collect();
    Ok(WindowStats {
        window,
        samples,
        channels,
    })
}
