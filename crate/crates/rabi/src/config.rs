//! Experiment configuration: one `key = value` per line, `#` starts a
//! comment. Unknown and repeated keys are errors. Every key has a default
//! except `mode` (which the command line can supply), `omega_true` and
//! `record_file`.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use rabi_core::seed::PRNG_FAMILY;
use rabi_core::{DetectorModel, DetectorParams, StepScheme};

use crate::error::ConfigError;
use crate::format::round_trip;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    SimulateRecord,
    Posterior,
    ConditionalState,
    InfoGain,
    Wtd,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::SimulateRecord, Mode::Posterior, Mode::ConditionalState, Mode::InfoGain, Mode::Wtd];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::SimulateRecord => "simulate-record",
            Mode::Posterior => "posterior",
            Mode::ConditionalState => "conditional-state",
            Mode::InfoGain => "info-gain",
            Mode::Wtd => "wtd",
        }
    }
}

impl FromStr for Mode {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Mode::ALL.into_iter().find(|m| m.as_str() == s).ok_or(())
    }
}

/// `ideal`: photon counter with efficiency `eta` only. `avalanche`: the
/// photodiode model with `gamma_r`, `gamma_dk`, `tau_dd` as well.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    Ideal,
    Avalanche,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Option<Mode>,
    pub gamma: f64,
    pub detector: DetectorKind,
    pub eta: f64,
    pub gamma_r: f64,
    pub gamma_dk: f64,
    pub tau_dd: f64,
    pub omega_true: Option<f64>,
    pub omega_max: f64,
    pub n_nodes: usize,
    pub dt: f64,
    pub duration: f64,
    /// Spacing of posterior / state / information snapshots.
    pub snapshot_every: f64,
    pub ensemble_size: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub scheme: StepScheme,
    pub tau_max: f64,
    pub tau_step: f64,
    /// Posterior mode only: analyse this record instead of simulating one.
    pub record_file: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: None,
            gamma: 1.0,
            detector: DetectorKind::Ideal,
            eta: 1.0,
            gamma_r: 7.0,
            gamma_dk: 0.0,
            tau_dd: 0.0,
            omega_true: None,
            omega_max: 10.0,
            n_nodes: 100,
            dt: rabi_core::dynamics::DEFAULT_DT,
            duration: 50.0,
            snapshot_every: 0.1,
            ensemble_size: 50,
            master_seed: 1,
            output_dir: PathBuf::from("out"),
            scheme: StepScheme::Exact,
            tau_max: 10.0,
            tau_step: 0.01,
            record_file: None,
        }
    }
}

const KEYS: [&str; 21] = [
    "mode",
    "gamma",
    "detector",
    "eta",
    "gamma_r",
    "gamma_dk",
    "tau_dd",
    "omega_true",
    "omega_max",
    "n_nodes",
    "dt",
    "duration",
    "snapshot_every",
    "ensemble_size",
    "master_seed",
    "output_dir",
    "scheme",
    "tau_max",
    "tau_step",
    "record_file",
    "prng",
];

fn parse_num<T: FromStr>(key: &'static str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError::BadValue { key, value: v.to_string() })
}

fn parse_real(key: &'static str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = parse_num(key, v)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(ConfigError::BadValue { key, value: v.to_string() })
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen: Vec<&'static str> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: line_no })?;
            let (k, v) = (k.trim(), v.trim());
            let key =
                *KEYS.iter().find(|x| **x == k).ok_or_else(|| ConfigError::UnknownKey { line: line_no, key: k.to_string() })?;
            if seen.contains(&key) {
                return Err(ConfigError::DuplicateKey { line: line_no, key: k.to_string() });
            }
            seen.push(key);
            cfg.set(key, v)?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &'static str, v: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue { key, value: v.to_string() };
        match key {
            "mode" => self.mode = Some(v.parse().map_err(|_| bad())?),
            "gamma" => self.gamma = parse_real(key, v)?,
            "detector" => {
                self.detector = match v {
                    "ideal" => DetectorKind::Ideal,
                    "avalanche" => DetectorKind::Avalanche,
                    _ => return Err(bad()),
                }
            }
            "eta" => self.eta = parse_real(key, v)?,
            "gamma_r" => self.gamma_r = parse_real(key, v)?,
            "gamma_dk" => self.gamma_dk = parse_real(key, v)?,
            "tau_dd" => self.tau_dd = parse_real(key, v)?,
            "omega_true" => self.omega_true = Some(parse_real(key, v)?),
            "omega_max" => self.omega_max = parse_real(key, v)?,
            "n_nodes" => self.n_nodes = parse_num(key, v)?,
            "dt" => self.dt = parse_real(key, v)?,
            "duration" => self.duration = parse_real(key, v)?,
            "snapshot_every" => self.snapshot_every = parse_real(key, v)?,
            "ensemble_size" => self.ensemble_size = parse_num(key, v)?,
            "master_seed" => self.master_seed = parse_num(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "scheme" => {
                self.scheme = match v {
                    "exact" => StepScheme::Exact,
                    "euler" => StepScheme::Euler,
                    _ => return Err(bad()),
                }
            }
            "tau_max" => self.tau_max = parse_real(key, v)?,
            "tau_step" => self.tau_step = parse_real(key, v)?,
            "record_file" => self.record_file = Some(PathBuf::from(v)),
            "prng" if v == PRNG_FAMILY => {}
            _ => return Err(bad()),
        }
        Ok(())
    }

    pub fn detector_params(&self) -> Result<DetectorParams, ConfigError> {
        DetectorParams::new(self.eta, self.gamma_r, self.gamma_dk, self.tau_dd).map_err(|_| ConfigError::OutOfRange {
            key: "detector",
            reason: "needs eta in [0, 1], gamma_r > 0, gamma_dk >= 0, tau_dd >= 0",
        })
    }

    pub fn detector_model(&self) -> Result<DetectorModel, ConfigError> {
        let d = self.detector_params()?;
        Ok(match self.detector {
            DetectorKind::Ideal => DetectorModel::Ideal { eta: d.eta },
            DetectorKind::Avalanche => DetectorModel::Realistic(d),
        })
    }

    pub fn require_omega_true(&self) -> Result<f64, ConfigError> {
        let mode = self.mode.map_or("?", Mode::as_str);
        self.omega_true.ok_or(ConfigError::MissingKey { key: "omega_true", mode })
    }

    /// Checks everything the resolved mode needs, before any work starts.
    pub fn validate(&self) -> Result<Mode, ConfigError> {
        let mode = self.mode.ok_or(ConfigError::MissingKey { key: "mode", mode: "?" })?;
        let positive = |key: &'static str, x: f64| {
            if x > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange { key, reason: "must be > 0" })
            }
        };
        positive("gamma", self.gamma)?;
        positive("dt", self.dt)?;
        positive("duration", self.duration)?;
        positive("snapshot_every", self.snapshot_every)?;
        positive("omega_max", self.omega_max)?;
        let det = self.detector_params()?;
        if let Some(w) = self.omega_true {
            if w.abs() > self.omega_max {
                return Err(ConfigError::OutOfRange { key: "omega_true", reason: "must satisfy |omega_true| <= omega_max" });
            }
        }
        let estimating = matches!(mode, Mode::Posterior | Mode::ConditionalState | Mode::InfoGain);
        if estimating && (self.n_nodes < 2 || self.n_nodes % 2 == 1) {
            return Err(ConfigError::OutOfRange { key: "n_nodes", reason: "must be even and >= 2" });
        }
        if estimating && det.eta == 0.0 {
            return Err(ConfigError::OutOfRange { key: "eta", reason: "must be > 0 to estimate anything" });
        }
        if self.record_file.is_some() && mode != Mode::Posterior {
            return Err(ConfigError::OutOfRange { key: "record_file", reason: "is only used by mode posterior" });
        }
        match mode {
            Mode::SimulateRecord | Mode::ConditionalState => {
                self.require_omega_true()?;
            }
            Mode::Posterior => {
                if self.record_file.is_none() {
                    self.require_omega_true()?;
                }
            }
            Mode::InfoGain => {
                if self.ensemble_size < 2 {
                    return Err(ConfigError::OutOfRange { key: "ensemble_size", reason: "must be >= 2" });
                }
            }
            Mode::Wtd => {
                self.require_omega_true()?;
                positive("tau_max", self.tau_max)?;
                positive("tau_step", self.tau_step)?;
                if det.eta == 0.0 {
                    return Err(ConfigError::OutOfRange { key: "eta", reason: "must be > 0 for a waiting-time curve" });
                }
                if self.detector == DetectorKind::Avalanche && det.gamma_dk != 0.0 {
                    return Err(ConfigError::OutOfRange {
                        key: "gamma_dk",
                        reason: "must be 0 for the avalanche waiting-time curve",
                    });
                }
            }
        }
        Ok(mode)
    }

    /// The resolved configuration in the same format [`parse`](Self::parse)
    /// reads; reals use shortest round-trip decimals.
    pub fn to_manifest(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("write to String");
        if let Some(m) = self.mode {
            kv("mode", m.as_str().into());
        }
        kv("gamma", round_trip(self.gamma));
        kv(
            "detector",
            match self.detector {
                DetectorKind::Ideal => "ideal".into(),
                DetectorKind::Avalanche => "avalanche".into(),
            },
        );
        kv("eta", round_trip(self.eta));
        kv("gamma_r", round_trip(self.gamma_r));
        kv("gamma_dk", round_trip(self.gamma_dk));
        kv("tau_dd", round_trip(self.tau_dd));
        if let Some(w) = self.omega_true {
            kv("omega_true", round_trip(w));
        }
        kv("omega_max", round_trip(self.omega_max));
        kv("n_nodes", self.n_nodes.to_string());
        kv("dt", round_trip(self.dt));
        kv("duration", round_trip(self.duration));
        kv("snapshot_every", round_trip(self.snapshot_every));
        kv("ensemble_size", self.ensemble_size.to_string());
        kv("master_seed", self.master_seed.to_string());
        kv("output_dir", self.output_dir.display().to_string());
        kv(
            "scheme",
            match self.scheme {
                StepScheme::Exact => "exact".into(),
                StepScheme::Euler => "euler".into(),
            },
        );
        kv("tau_max", round_trip(self.tau_max));
        kv("tau_step", round_trip(self.tau_step));
        if let Some(p) = &self.record_file {
            kv("record_file", p.display().to_string());
        }
        kv("prng", PRNG_FAMILY.into());
        s
    }
}
