//! Converter parameters and the flat `key = value` configuration format.
//!
//! AC-side voltages are peak phase-to-neutral values, matching the
//! amplitude-invariant Clarke/Park scaling used everywhere else in the crate.
//! Every quantity is SI; config keys carry the unit as a suffix so that
//! millis and micros cannot be confused.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result, Violation};

/// Minimum ratio between carrier and grid frequency.
pub const MIN_CARRIER_RATIO: f64 = 100.0;

/// Config keys in canonical order.
pub const CONFIG_KEYS: [&str; 10] = [
    "f_sw_hz",
    "f_grid_hz",
    "u_in_v",
    "i_in_a",
    "u_od_v",
    "u_oq_v",
    "l_h",
    "r_l_ohm",
    "r_on_ohm",
    "r_s_ohm",
];

/// Electrical and PWM parameters of the inverter.
///
/// `omega_s` and `r_eq` are derived on demand, so they can never go stale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverterParams {
    /// Switching (carrier) frequency, Hz.
    pub f_sw: f64,
    /// Grid fundamental frequency, Hz.
    pub f_grid: f64,
    /// DC input voltage, V.
    pub u_in: f64,
    /// DC input current setpoint, A.
    pub i_in: f64,
    /// d-channel grid voltage (phase peak), V.
    pub u_od: f64,
    /// q-channel grid voltage, V.
    pub u_oq: f64,
    /// Per-phase filter inductance, H.
    pub inductance: f64,
    /// Inductor series resistance, ohm.
    pub r_l: f64,
    /// Switch on-state resistance, ohm.
    pub r_on: f64,
    /// Equivalent grid resistance, ohm.
    pub r_s: f64,
}

impl ConverterParams {
    /// The 30 V / 2 A, 73 uH, 100 kHz reference design used by the CLI
    /// examples and the test suites.
    pub fn reference() -> Self {
        Self {
            f_sw: 100e3,
            f_grid: 50.0,
            u_in: 30.0,
            i_in: 2.0,
            u_od: 8.6,
            u_oq: 0.0,
            inductance: 73e-6,
            r_l: 0.015,
            r_on: 0.1,
            r_s: 0.05,
        }
    }

    /// Grid angular frequency, rad/s.
    pub fn omega_s(&self) -> f64 {
        hz_to_rad(self.f_grid)
    }

    /// Total series resistance seen by each phase current.
    pub fn r_eq(&self) -> f64 {
        self.r_l + self.r_on + self.r_s
    }

    /// Same parameters with every resistance set to zero.
    pub fn lossless(&self) -> Self {
        Self {
            r_l: 0.0,
            r_on: 0.0,
            r_s: 0.0,
            ..*self
        }
    }

    /// Checks every invariant and returns one entry per violation.
    pub fn validate(&self) -> Vec<Violation> {
        let mut report = Vec::new();
        let mut flag = |key, message: String| report.push(Violation { key, message });

        for (key, value) in CONFIG_KEYS.iter().zip(self.values()) {
            if !value.is_finite() {
                flag(key, format!("{value} is not finite"));
            }
        }
        if !(self.f_sw > 0.0) {
            flag("f_sw_hz", format!("must be positive, got {}", self.f_sw));
        }
        if !(self.f_grid > 0.0) {
            flag(
                "f_grid_hz",
                format!("must be positive, got {}", self.f_grid),
            );
        }
        if self.f_sw > 0.0 && self.f_grid > 0.0 && self.f_sw < MIN_CARRIER_RATIO * self.f_grid {
            flag(
                "f_sw_hz",
                format!(
                    "carrier ratio {} below the minimum {MIN_CARRIER_RATIO} (f_sw >= 100 f_grid)",
                    self.f_sw / self.f_grid
                ),
            );
        }
        if !(self.u_in > 0.0) {
            flag("u_in_v", format!("must be positive, got {}", self.u_in));
        }
        if !(self.inductance > 0.0) {
            flag("l_h", format!("must be positive, got {}", self.inductance));
        }
        for (key, r) in [
            ("r_l_ohm", self.r_l),
            ("r_on_ohm", self.r_on),
            ("r_s_ohm", self.r_s),
        ] {
            if !(r >= 0.0) {
                flag(key, format!("must be non-negative, got {r}"));
            }
        }
        report
    }

    fn values(&self) -> [f64; 10] {
        [
            self.f_sw,
            self.f_grid,
            self.u_in,
            self.i_in,
            self.u_od,
            self.u_oq,
            self.inductance,
            self.r_l,
            self.r_on,
            self.r_s,
        ]
    }

    /// Serializes to the config format. Numbers use the shortest decimal
    /// representation that parses back to the same bits.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for (key, value) in CONFIG_KEYS.iter().zip(self.values()) {
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }
}

/// Radians per second for a frequency in hertz.
pub fn hz_to_rad(f: f64) -> f64 {
    2.0 * PI * f
}

/// Parses and validates a config document.
pub fn load_params(source: &str) -> Result<ConverterParams> {
    let mut values: HashMap<&'static str, f64> = HashMap::new();

    for (idx, raw) in source.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Syntax {
            line: idx + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        let canonical = CONFIG_KEYS
            .iter()
            .copied()
            .find(|k| *k == key)
            .ok_or_else(|| Error::UnknownKey(key.to_string()))?;
        let parsed = value
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::NotANumber {
                key: key.to_string(),
                value: value.to_string(),
            })?;
        if values.insert(canonical, parsed).is_some() {
            return Err(Error::DuplicateKey(key.to_string()));
        }
    }

    let get = |key: &'static str| values.get(key).copied().ok_or(Error::MissingKey(key));
    let params = ConverterParams {
        f_sw: get("f_sw_hz")?,
        f_grid: get("f_grid_hz")?,
        u_in: get("u_in_v")?,
        i_in: get("i_in_a")?,
        u_od: get("u_od_v")?,
        u_oq: get("u_oq_v")?,
        inductance: get("l_h")?,
        r_l: get("r_l_ohm")?,
        r_on: get("r_on_ohm")?,
        r_s: get("r_s_ohm")?,
    };

    let report = params.validate();
    if report.is_empty() {
        Ok(params)
    } else {
        Err(Error::Invalid(report))
    }
}

pub fn load_params_file(path: impl AsRef<Path>) -> Result<ConverterParams> {
    let text = std::fs::read_to_string(path)?;
    load_params(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const REFERENCE_DOC: &str = "\
f_sw_hz = 100000
u_od_v = 8.6
u_oq_v = 0
i_in_a = 2
u_in_v = 30
f_grid_hz = 50
l_h = 73e-6
r_l_ohm = 0.015
r_on_ohm = 0.1
r_s_ohm = 0.05
";

    #[test]
    fn reference_document_loads() {
        let p = load_params(REFERENCE_DOC).unwrap();
        assert_eq!(p, ConverterParams::reference());
        assert!((p.r_eq() - 0.165).abs() < 1e-15);
        assert!((p.omega_s() - 314.159_265_358_979_3).abs() < 1e-12);
        assert!(p.validate().is_empty());
    }

    #[test]
    fn shipped_config_matches_reference() {
        let text = include_str!("../configs/reference.conf");
        assert_eq!(load_params(text).unwrap(), ConverterParams::reference());
    }

    #[test]
    fn zero_inductance_rejected() {
        let doc = REFERENCE_DOC.replace("l_h = 73e-6", "l_h = 0");
        match load_params(&doc) {
            Err(Error::Invalid(v)) => assert_eq!(v[0].key, "l_h"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn lossless_accepted() {
        let doc = REFERENCE_DOC
            .replace("r_l_ohm = 0.015", "r_l_ohm = 0")
            .replace("r_on_ohm = 0.1", "r_on_ohm = 0")
            .replace("r_s_ohm = 0.05", "r_s_ohm = 0");
        let p = load_params(&doc).unwrap();
        assert_eq!(p.r_eq(), 0.0);
    }

    #[test]
    fn missing_key_is_named() {
        let doc = REFERENCE_DOC.replace("r_s_ohm = 0.05\n", "");
        assert!(matches!(
            load_params(&doc),
            Err(Error::MissingKey("r_s_ohm"))
        ));
    }

    #[test]
    fn unknown_and_duplicate_keys_rejected() {
        let doc = format!("{REFERENCE_DOC}c_f = 1e-6\n");
        assert!(matches!(load_params(&doc), Err(Error::UnknownKey(k)) if k == "c_f"));
        let doc = format!("{REFERENCE_DOC}u_in_v = 31\n");
        assert!(matches!(load_params(&doc), Err(Error::DuplicateKey(k)) if k == "u_in_v"));
    }

    #[test]
    fn non_numeric_value_names_key() {
        let doc = REFERENCE_DOC.replace("u_in_v = 30", "u_in_v = thirty");
        match load_params(&doc) {
            Err(e @ Error::NotANumber { .. }) => assert!(e.to_string().contains("u_in_v")),
            other => panic!("unexpected {other:?}"),
        }
        let doc = REFERENCE_DOC.replace("u_in_v = 30", "u_in_v = inf");
        assert!(matches!(load_params(&doc), Err(Error::NotANumber { .. })));
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let doc = format!(
            "# header\n\n{}",
            REFERENCE_DOC.replace("= 30", "= 30   # volts")
        );
        assert_eq!(load_params(&doc).unwrap(), ConverterParams::reference());
    }

    #[test]
    fn syntax_error_reports_line() {
        let doc = format!("{REFERENCE_DOC}garbage\n");
        assert!(matches!(
            load_params(&doc),
            Err(Error::Syntax { line: 11, .. })
        ));
    }

    #[test]
    fn validate_flags_carrier_ratio() {
        let p = ConverterParams {
            f_sw: 200.0,
            ..ConverterParams::reference()
        };
        let report = p.validate();
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].key, "f_sw_hz");
        assert!(report[0].message.contains("carrier ratio"));
    }

    #[test]
    fn validate_flags_negative_input_voltage() {
        let p = ConverterParams {
            u_in: -30.0,
            ..ConverterParams::reference()
        };
        let report = p.validate();
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].key, "u_in_v");
    }

    #[test]
    fn validate_reports_every_violation() {
        let p = ConverterParams {
            u_in: 0.0,
            inductance: -1.0,
            r_on: -0.1,
            ..ConverterParams::reference()
        };
        let keys: Vec<_> = p.validate().into_iter().map(|v| v.key).collect();
        assert_eq!(keys, ["u_in_v", "l_h", "r_on_ohm"]);
    }

    fn arb_params() -> impl Strategy<Value = ConverterParams> {
        (
            (1e3f64..1e6, 1f64..10.0),
            (1f64..1e3, -10f64..10.0),
            (0f64..500.0, -50f64..50.0),
            (1e-7f64..1e-1),
            (0f64..1.0, 0f64..1.0, 0f64..1.0),
        )
            .prop_map(
                |((f_sw, f_grid), (u_in, i_in), (u_od, u_oq), inductance, (r_l, r_on, r_s))| {
                    ConverterParams {
                        f_sw,
                        f_grid,
                        u_in,
                        i_in,
                        u_od,
                        u_oq,
                        inductance,
                        r_l,
                        r_on,
                        r_s,
                    }
                },
            )
    }

    proptest! {
        #[test]
        fn config_round_trip_is_bit_exact(p in arb_params()) {
            let text = p.to_config_string();
            let back = load_params(&text).unwrap();
            prop_assert_eq!(back, p);
            prop_assert_eq!(back.to_config_string(), text);
            prop_assert_eq!(back.r_eq(), p.r_l + p.r_on + p.r_s);
        }
    }
}
