//! Run configuration: flat `key = value` settings resolved into a validated
//! [`RunConfig`].
//!
//! Keys are the long flag names without the leading dashes. Matching ignores
//! case and treats `_` and `-` alike, so `kT0`, `kt0` and `zeta_over_m_omega`
//! all work. Temperatures and the friction are given in units of `ħω` and
//! `mω`; times and rates are absolute.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::Vector3;
use qme_core::oscillator::{OscillatorParams, QuenchEquation};
use qme_core::solver::{Method, SolverConfig};
use qme_core::two_level::{BlochEquation, TwoLevelParams};

use crate::error::CliError;

/// Every key the configuration understands, in the order they are written
/// to `run_meta`.
pub const KEYS: &[&str] = &[
    "experiment",
    "equation",
    "omega",
    "kt0",
    "kte",
    "zeta-over-m-omega",
    "gamma0",
    "q3-weight",
    "m0",
    "n-states",
    "dt",
    "t-end",
    "record-stride",
    "method",
    "points",
    "m-max",
    "seed",
    "output-dir",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    TwoLevelRelax,
    OscillatorQuench,
    MuTable,
    BlochJacobian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    Thermodynamic,
    Linearized,
    CaldeiraLeggett,
    LindbladBloch,
}

macro_rules! named_enum {
    ($ty:ident, $what:literal, { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn name(&self) -> &'static str {
                match self {
                    $($ty::$variant => $name,)+
                }
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
                    $($name => Ok($ty::$variant),)+
                    other => Err(format!(
                        "unknown {} '{other}' (expected one of: {})",
                        $what,
                        [$($name),+].join(", ")
                    )),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

named_enum!(Experiment, "experiment", {
    TwoLevelRelax => "two_level_relax",
    OscillatorQuench => "oscillator_quench",
    MuTable => "mu_table",
    BlochJacobian => "bloch_jacobian",
});

named_enum!(Equation, "equation", {
    Thermodynamic => "thermodynamic",
    Linearized => "linearized",
    CaldeiraLeggett => "caldeira_leggett",
    LindbladBloch => "lindblad_bloch",
});

/// Initial Bloch vector of a two-level run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialBloch {
    Vector(Vector3<f64>),
    /// Canonical state at `kT0`.
    Canonical,
    /// Uniform in the unit ball, drawn from the run seed.
    Random,
}

impl fmt::Display for InitialBloch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialBloch::Vector(v) => write!(f, "{:?},{:?},{:?}", v.x, v.y, v.z),
            InitialBloch::Canonical => f.write_str("canonical"),
            InitialBloch::Random => f.write_str("random"),
        }
    }
}

impl FromStr for InitialBloch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "canonical" => return Ok(InitialBloch::Canonical),
            "random" => return Ok(InitialBloch::Random),
            _ => {}
        }
        let parts = s
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format!("m0 '{s}': {e}"))?;
        match parts.as_slice() {
            [x, y, z] => Ok(InitialBloch::Vector(Vector3::new(*x, *y, *z))),
            _ => Err(format!(
                "m0 '{s}': expected three comma-separated components, 'canonical' or 'random'"
            )),
        }
    }
}

/// Raw settings keyed by normalized name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

/// Lower-case, `_` → `-`.
pub fn normalize_key(key: &str) -> String {
    key.trim()
        .trim_start_matches("--")
        .to_ascii_lowercase()
        .replace('_', "-")
}

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parse `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut s = Settings::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "{origin}:{}: expected key = value, got '{line}'",
                    n + 1
                ))
            })?;
            s.set(k, v.trim())
                .map_err(|e| CliError::Config(format!("{origin}:{}: {e}", n + 1)))?;
        }
        Ok(s)
    }

    /// Whitespace-separated `key=value` tokens, as used on a sweep line.
    pub fn parse_inline(line: &str, origin: &str) -> Result<Self, CliError> {
        let mut s = Settings::new();
        for token in line.split_whitespace() {
            let (k, v) = token.split_once('=').ok_or_else(|| {
                CliError::Config(format!("{origin}: expected key=value, got '{token}'"))
            })?;
            s.set(k, v)
                .map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let key = normalize_key(key);
        if !KEYS.contains(&key.as_str()) {
            return Err(format!("unknown key '{key}'"));
        }
        self.0.insert(key, value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// Entries of `other` replace those of `self`.
    pub fn overlay(&mut self, other: &Settings) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.trim()
                    .parse::<T>()
                    .map_err(|e| CliError::Config(format!("{key} = '{v}': {e}")))
            })
            .transpose()
    }
}

/// Fully resolved run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub equation: Equation,
    pub omega: f64,
    /// Initial oscillator temperature, in units of `ħω`.
    pub kt0: f64,
    /// Bath temperature, in units of `ħω`.
    pub kte: f64,
    pub zeta_over_m_omega: f64,
    pub gamma0: f64,
    pub q3_weight: f64,
    pub m0: InitialBloch,
    pub n_states: usize,
    pub solver: SolverConfig,
    pub points: usize,
    pub m_max: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn from_settings(s: &Settings) -> Result<Self, CliError> {
        let experiment: Experiment = s
            .parsed("experiment")?
            .ok_or_else(|| CliError::Config("no experiment given (use --experiment)".into()))?;
        let omega = s.parsed("omega")?.unwrap_or(1.0);
        let solver = SolverConfig {
            dt: s
                .parsed("dt")?
                .unwrap_or(1e-3 * std::f64::consts::TAU / omega),
            t_end: s.parsed("t-end")?.unwrap_or(100.0 / omega),
            method: s
                .parsed::<MethodName>("method")?
                .map_or(Method::Direct, |m| m.0),
            record_stride: s.parsed("record-stride")?.unwrap_or(10),
            ..SolverConfig::default()
        };
        let config = RunConfig {
            experiment,
            equation: s.parsed("equation")?.unwrap_or(Equation::Thermodynamic),
            omega,
            kt0: s.parsed("kt0")?.unwrap_or(1.5),
            kte: s.parsed("kte")?.unwrap_or(0.5),
            zeta_over_m_omega: s.parsed("zeta-over-m-omega")?.unwrap_or(0.1),
            gamma0: s.parsed("gamma0")?.unwrap_or(0.1),
            q3_weight: s.parsed("q3-weight")?.unwrap_or(0.0),
            m0: s
                .parsed("m0")?
                .unwrap_or(InitialBloch::Vector(Vector3::new(0.6, 0.0, 0.8) * 0.999)),
            n_states: s.parsed("n-states")?.unwrap_or(10),
            solver,
            points: s.parsed("points")?.unwrap_or(1000),
            m_max: s.parsed("m-max")?.unwrap_or(0.999),
            seed: s.parsed("seed")?.unwrap_or(0),
            output_dir: s
                .get("output-dir")
                .map_or_else(|| PathBuf::from("qme_out"), PathBuf::from),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        use Equation::*;
        use Experiment::*;
        let allowed: &[Equation] = match self.experiment {
            OscillatorQuench => &[Thermodynamic, Linearized, CaldeiraLeggett],
            TwoLevelRelax | BlochJacobian => &[Thermodynamic, Linearized, LindbladBloch],
            MuTable => &[Thermodynamic],
        };
        if !allowed.contains(&self.equation) {
            return Err(CliError::Config(format!(
                "equation {} cannot be used with experiment {} (allowed: {})",
                self.equation,
                self.experiment,
                allowed
                    .iter()
                    .map(Equation::name)
                    .collect::<Vec<_>>()
                    .join(", ")
            )));
        }
        let positive = [
            ("omega", self.omega),
            ("kT0", self.kt0),
            ("kTe", self.kte),
            ("dt", self.solver.dt),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        let non_negative = [
            ("zeta-over-m-omega", self.zeta_over_m_omega),
            ("gamma0", self.gamma0),
            ("q3-weight", self.q3_weight),
            ("t-end", self.solver.t_end),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!(
                    "{name} must be non-negative and finite, got {v}"
                )));
            }
        }
        if self.n_states < 2 {
            return Err(CliError::Config(format!(
                "n-states must be at least 2, got {}",
                self.n_states
            )));
        }
        if self.solver.record_stride == 0 {
            return Err(CliError::Config("record-stride must be positive".into()));
        }
        if self.points < 2 {
            return Err(CliError::Config(format!(
                "points must be at least 2, got {}",
                self.points
            )));
        }
        if !(0.0..1.0).contains(&self.m_max) {
            return Err(CliError::Config(format!(
                "m-max must lie in [0, 1), got {}",
                self.m_max
            )));
        }
        if let InitialBloch::Vector(v) = self.m0 {
            if v.norm() > 1.0 || !v.iter().all(|c| c.is_finite()) {
                return Err(CliError::Config(format!(
                    "m0 must lie in the unit ball, |m0| = {}",
                    v.norm()
                )));
            }
        }
        Ok(())
    }

    pub fn oscillator_params(&self) -> OscillatorParams {
        let base = OscillatorParams::default();
        let hw = base.hbar * self.omega;
        OscillatorParams {
            n_max: self.n_states - 1,
            omega: self.omega,
            zeta: self.zeta_over_m_omega * base.mass * self.omega,
            kt0: self.kt0 * hw,
            kte: self.kte * hw,
            ..base
        }
    }

    /// Two-level parameters at the bath temperature `kTe`.
    pub fn two_level_params(&self) -> Result<TwoLevelParams, CliError> {
        self.two_level_params_at(self.kte)
    }

    pub fn two_level_params_at(&self, kt_over_hw: f64) -> Result<TwoLevelParams, CliError> {
        TwoLevelParams::new(self.omega, self.gamma0, kt_over_hw * self.omega)
            .and_then(|p| p.with_q3_weight(self.q3_weight))
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn quench_equation(&self) -> QuenchEquation {
        match self.equation {
            Equation::Linearized => QuenchEquation::Linearized,
            Equation::CaldeiraLeggett => QuenchEquation::CaldeiraLeggett,
            _ => QuenchEquation::Thermodynamic,
        }
    }

    pub fn bloch_equation(&self) -> BlochEquation {
        match self.equation {
            Equation::Linearized => BlochEquation::Linear,
            Equation::LindbladBloch => BlochEquation::Lindblad,
            _ => BlochEquation::Thermodynamic,
        }
    }

    /// Resolved settings as `(key, value)` pairs in [`KEYS`] order.
    pub fn resolved(&self) -> Vec<(&'static str, String)> {
        KEYS.iter()
            .map(|&k| {
                let v = match k {
                    "experiment" => self.experiment.to_string(),
                    "equation" => self.equation.to_string(),
                    "omega" => fmt_f64(self.omega),
                    "kt0" => fmt_f64(self.kt0),
                    "kte" => fmt_f64(self.kte),
                    "zeta-over-m-omega" => fmt_f64(self.zeta_over_m_omega),
                    "gamma0" => fmt_f64(self.gamma0),
                    "q3-weight" => fmt_f64(self.q3_weight),
                    "m0" => self.m0.to_string(),
                    "n-states" => self.n_states.to_string(),
                    "dt" => fmt_f64(self.solver.dt),
                    "t-end" => fmt_f64(self.solver.t_end),
                    "record-stride" => self.solver.record_stride.to_string(),
                    "method" => self.solver.method.name().to_string(),
                    "points" => self.points.to_string(),
                    "m-max" => fmt_f64(self.m_max),
                    "seed" => self.seed.to_string(),
                    "output-dir" => self.output_dir.display().to_string(),
                    _ => unreachable!("key list and match arms agree"),
                };
                (k, v)
            })
            .collect()
    }
}

/// Shortest representation that round-trips.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

struct MethodName(Method);

impl FromStr for MethodName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "direct" => Ok(MethodName(Method::Direct)),
            "eigensystem" => Ok(MethodName(Method::Eigensystem)),
            other => Err(format!(
                "unknown method '{other}' (expected direct or eigensystem)"
            )),
        }
    }
}
