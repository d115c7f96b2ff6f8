//! Run configuration: TOML scenario descriptions and the initial-state
//! expression mini-language.
//!
//! A run is described by one TOML file.  The `scenario` key picks the
//! pipeline, `[model]` the couplings and geometry, and the remaining tables
//! configure that pipeline; sections that a scenario does not use must be
//! absent, so a config never silently carries dead settings.
//!
//! ```toml
//! scenario = "breaking"
//!
//! [model]
//! sector = "one"
//! x = 1.0
//! g_par2 = 2.0
//! g_perp2 = 0.8
//! n_plaquettes = 3
//!
//! [evolution]
//! t_max = 4.0
//! n_points = 161
//! method = "exact"
//!
//! [initial_state]
//! preset = "dressed-plus"
//! ```
//!
//! Initial states are either presets resolved against the model (the string
//! state, the broken-string state, the dressed pair combinations, the bare
//! vacuum) or free-form expressions such as
//!
//! ```text
//! 0.5|543> + (0.5+0.5i)|435> - 0.25i|555>
//! ```
//!
//! parsed by [`parse_state_expr`]: one complex coefficient per ket (defaults
//! to 1), kets labelled like register states, the sum normalized at the end.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{ModelParams, PairForm};
use crate::qudit::{MixedRadixRegister, StateVector};
use crate::Result;

/// Which pipeline a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Four-level chain: populations of the first excited band over time,
    /// next to the closed-form six-state predictions.
    Fluctuations,
    /// Eight-level chain: string, broken-string and dressed populations.
    Breaking,
    /// Coupling-ratio sweep locating the string–broken resonance.
    ResonanceScan,
    /// Entangling budget of fixed-step circuits vs duration, plus the
    /// qubit-register comparison.
    Gatecount,
    /// Numeric band dynamics against the closed forms, with the deviation.
    EffectiveCompare,
    /// Every register population, reflection partners merged.
    FullPopulations,
}

impl ScenarioKind {
    /// Kebab-case name, used as the default output prefix.
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Fluctuations => "fluctuations",
            ScenarioKind::Breaking => "breaking",
            ScenarioKind::ResonanceScan => "resonance-scan",
            ScenarioKind::Gatecount => "gatecount",
            ScenarioKind::EffectiveCompare => "effective-compare",
            ScenarioKind::FullPopulations => "full-populations",
        }
    }
}

/// Exact eigendecomposition or fixed-step product formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvolutionMethod {
    #[default]
    Exact,
    /// One circuit per grid time, each with `n_steps` symmetric steps —
    /// the same shape the gate compiler targets.
    Trotter,
}

/// Time grid and integrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionConfig {
    /// Last grid time; the grid is `n_points` uniform samples of `[0, t_max]`.
    pub t_max: f64,
    pub n_points: usize,
    pub method: EvolutionMethod,
    /// Symmetric steps per circuit (`method = "trotter"` only).
    pub n_steps: usize,
    /// Pair-term flavour for product formulas.
    pub pair_form: PairForm,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            t_max: 1.0,
            n_points: 51,
            method: EvolutionMethod::Exact,
            n_steps: 2,
            pair_form: PairForm::default(),
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.t_max.is_finite() || self.t_max <= 0.0 {
            return Err(Error::ConfigError(format!(
                "evolution.t_max must be positive and finite, got {}",
                self.t_max
            )));
        }
        if self.n_points < 2 {
            return Err(Error::ConfigError(
                "evolution.n_points must be at least 2".into(),
            ));
        }
        if self.n_steps == 0 {
            return Err(Error::ConfigError(
                "evolution.n_steps must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Named initial states resolved against the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatePreset {
    /// The confined string configuration.
    String,
    /// The lowest broken-string (two-meson) configuration.
    Broken,
    /// Even combination of the dressed-string pair, `(|L⟩+|R⟩)/√2`.
    DressedPlus,
    /// Odd combination, `(|L⟩−|R⟩)/√2` — dark under reflection symmetry.
    DressedMinus,
    /// The electric vacuum `|0…0⟩`.
    Vacuum,
}

/// Initial state: exactly one of `preset` or `expr`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<StatePreset>,
    /// Free-form superposition, see [`parse_state_expr`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
}

impl InitialStateSpec {
    pub fn validate(&self) -> Result<()> {
        match (&self.preset, &self.expr) {
            (Some(_), Some(_)) => Err(Error::ConfigError(
                "initial_state: give either a preset or an expr, not both".into(),
            )),
            (None, None) => Err(Error::ConfigError(
                "initial_state: empty — give a preset or an expr".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Projective readout of the final state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub shots: u64,
    /// RNG seed; identical configs and seeds reproduce identical counts.
    pub seed: u64,
    /// Discard samples outside the physical subspace.
    #[serde(default = "default_true")]
    pub post_select: bool,
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(Error::ConfigError("sampling.shots must be positive".into()));
        }
        Ok(())
    }
}

/// Coupling-ratio sweep (resonance-scan only): `g⊥²/g∥²` runs from
/// `ratio_min` to `ratio_max` in steps of `ratio_step`, and each point
/// integrates the broken-string population over `[0, t_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub ratio_step: f64,
    pub t_max: f64,
    pub n_points: usize,
    /// Divide the profile by its own maximum before reporting.
    #[serde(default = "default_true")]
    pub normalize: bool,
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("ratio_min", self.ratio_min),
            ("ratio_max", self.ratio_max),
            ("ratio_step", self.ratio_step),
            ("t_max", self.t_max),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::ConfigError(format!(
                    "scan.{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.ratio_max < self.ratio_min {
            return Err(Error::ConfigError(
                "scan.ratio_max must not be below scan.ratio_min".into(),
            ));
        }
        if self.n_points < 2 {
            return Err(Error::ConfigError(
                "scan.n_points must be at least 2".into(),
            ));
        }
        Ok(())
    }

    /// The swept ratios, inclusive of both ends up to grid rounding.
    pub fn ratios(&self) -> Vec<f64> {
        let count = ((self.ratio_max - self.ratio_min) / self.ratio_step).round() as usize + 1;
        (0..count)
            .map(|k| self.ratio_min + k as f64 * self.ratio_step)
            .filter(|&r| r <= self.ratio_max + 1e-9 * self.ratio_step)
            .collect()
    }
}

/// Circuit-budget sweep (gatecount only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompileConfig {
    /// Durations `t_step, 2·t_step, …` up to `t_max`, one circuit each.
    pub t_max: f64,
    pub t_step: f64,
    #[serde(default = "default_two")]
    pub n_steps: usize,
    #[serde(default)]
    pub pair_form: PairForm,
    /// Largest single-pulse angle.
    #[serde(default = "default_max_angle")]
    pub max_angle: f64,
    #[serde(default = "default_true")]
    pub respect_physicality: bool,
    /// Also tabulate the binary-encoded qubit cost (eight-level,
    /// three-plaquette chains only).
    #[serde(default)]
    pub qubit_estimate: bool,
}

impl CompileConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("t_max", self.t_max),
            ("t_step", self.t_step),
            ("max_angle", self.max_angle),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::ConfigError(format!(
                    "compile.{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.t_step > self.t_max {
            return Err(Error::ConfigError(
                "compile.t_step must not exceed compile.t_max".into(),
            ));
        }
        if self.n_steps == 0 {
            return Err(Error::ConfigError(
                "compile.n_steps must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// The compiled durations: multiples of `t_step` up to `t_max`.
    pub fn times(&self) -> Vec<f64> {
        let count = (self.t_max / self.t_step).round() as usize;
        (1..=count)
            .map(|k| k as f64 * self.t_step)
            .filter(|&t| t <= self.t_max + 1e-9 * self.t_step)
            .collect()
    }
}

/// Where result files land.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// File-name prefix; defaults to the scenario name.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            prefix: None,
        }
    }
}

impl OutputConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(prefix) = &self.prefix {
            if prefix.is_empty() || prefix.contains(['/', '\\']) || prefix.contains("..") {
                return Err(Error::ConfigError(format!(
                    "output.prefix '{prefix}' must be a bare file-name stem"
                )));
            }
        }
        Ok(())
    }
}

/// One complete run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub model: ModelParams,
    #[serde(default)]
    pub evolution: EvolutionConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<InitialStateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compile: Option<CompileConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_true() -> bool {
    true
}

fn default_two() -> usize {
    2
}

fn default_max_angle() -> f64 {
    std::f64::consts::FRAC_PI_2
}

impl ScenarioConfig {
    /// Parses and validates a TOML description.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::ConfigError(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads and validates a TOML file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::ConfigError(msg) => Error::ConfigError(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Serializes back to TOML (used for the run-metadata sidecar).
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::ConfigError(e.to_string()))
    }

    /// Cross-field validation: every section present exactly when its
    /// scenario uses it.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.evolution.validate()?;
        self.output.validate()?;
        if let Some(spec) = &self.initial_state {
            spec.validate()?;
        }
        if let Some(sampling) = &self.sampling {
            sampling.validate()?;
        }
        if let Some(scan) = &self.scan {
            scan.validate()?;
        }
        if let Some(compile) = &self.compile {
            compile.validate()?;
        }

        let kind = self.scenario;
        let want_scan = kind == ScenarioKind::ResonanceScan;
        if want_scan != self.scan.is_some() {
            return Err(Error::ConfigError(if want_scan {
                "resonance-scan needs a [scan] section".into()
            } else {
                format!("[scan] is only used by resonance-scan, not {}", kind.name())
            }));
        }
        let want_compile = kind == ScenarioKind::Gatecount;
        if want_compile != self.compile.is_some() {
            return Err(Error::ConfigError(if want_compile {
                "gatecount needs a [compile] section".into()
            } else {
                format!("[compile] is only used by gatecount, not {}", kind.name())
            }));
        }
        let takes_initial = matches!(kind, ScenarioKind::Breaking | ScenarioKind::FullPopulations);
        if self.initial_state.is_some() && !takes_initial {
            return Err(Error::ConfigError(format!(
                "{} fixes its own initial state; drop [initial_state]",
                kind.name()
            )));
        }
        let takes_sampling = takes_initial;
        if self.sampling.is_some() && !takes_sampling {
            return Err(Error::ConfigError(format!(
                "[sampling] is not used by {}",
                kind.name()
            )));
        }
        Ok(())
    }

    /// The output prefix: explicit or the scenario name.
    pub fn prefix(&self) -> String {
        self.output
            .prefix
            .clone()
            .unwrap_or_else(|| self.scenario.name().to_string())
    }
}

// --- state expressions -----------------------------------------------------------

/// Parses a superposition expression like
///
/// ```text
/// 0.5|543> + (0.5-0.5i)|435> - 0.25i|555>
/// ```
///
/// Each term is an optional complex coefficient (default 1, `*` optional)
/// followed by a ket whose label the register understands (digit strings, or
/// dot-separated digits for wide sites).  Coefficients accept `2`, `-0.5i`,
/// `1e-3+2i`, `(0.5+0.5i)` and whitespace anywhere.  Terms add up — repeated
/// kets accumulate — and the result is normalized, so overall scale never
/// matters, only ratios.
pub fn parse_state_expr(reg: &MixedRadixRegister, expr: &str) -> Result<StateVector> {
    let mut amps = vec![Complex64::ZERO; reg.dim()];
    let mut rest = expr;
    let mut n_terms = 0usize;
    loop {
        let Some(open) = rest.find('|') else {
            if !rest.trim().is_empty() {
                return Err(Error::InvalidState(format!(
                    "trailing '{}' after the last ket",
                    rest.trim()
                )));
            }
            break;
        };
        let coefficient = parse_segment(&rest[..open])?;
        let after = &rest[open + 1..];
        let Some(close) = after.find('>') else {
            return Err(Error::InvalidState(format!(
                "unterminated ket '|{}'",
                after.trim()
            )));
        };
        let index = reg.parse_label(after[..close].trim())?;
        amps[index] += coefficient;
        n_terms += 1;
        rest = &after[close + 1..];
    }
    if n_terms == 0 {
        return Err(Error::InvalidState(
            "state expression contains no |…> term".into(),
        ));
    }
    let mut state = StateVector::from_amplitudes(reg, amps)?;
    state.normalize()?;
    Ok(state)
}

/// Glue between two kets: sign, optional coefficient, optional `*`.
fn parse_segment(text: &str) -> Result<Complex64> {
    let mut s = text.trim();
    let mut sign = 1.0;
    if let Some(r) = s.strip_prefix('+') {
        s = r.trim_start();
    } else if let Some(r) = s.strip_prefix('-') {
        sign = -1.0;
        s = r.trim_start();
    }
    if let Some(r) = s.strip_suffix('*') {
        s = r.trim_end();
    }
    if s.is_empty() {
        return Ok(Complex64::new(sign, 0.0));
    }
    Ok(sign * parse_complex(s)?)
}

/// `2`, `.5`, `1e-3`, `i`, `-0.5i`, `1+2i`, `(0.5-0.5i)` — whitespace free
/// after the caller's filtering.
fn parse_complex(raw: &str) -> Result<Complex64> {
    let bad = || Error::InvalidState(format!("cannot parse coefficient '{raw}'"));
    let mut s: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
    while s.starts_with('(') && s.ends_with(')') && s.len() >= 2 {
        s = s[1..s.len() - 1].to_string();
    }
    if s.is_empty() {
        return Err(bad());
    }
    if let Ok(re) = s.parse::<f64>() {
        return Ok(Complex64::new(re, 0.0));
    }
    let body = s.strip_suffix('i').ok_or_else(bad)?;
    // Split a compound `a±bi` at the last sign that is not an exponent's.
    let mut split = None;
    let mut prev = '\0';
    for (pos, c) in s.char_indices() {
        if pos > 0 && (c == '+' || c == '-') && prev != 'e' && prev != 'E' {
            split = Some(pos);
        }
        prev = c;
    }
    match split {
        Some(pos) => {
            let re: f64 = s[..pos].parse().map_err(|_| bad())?;
            let imag_str = s[pos..].strip_suffix('i').ok_or_else(bad)?;
            let im: f64 = match imag_str {
                "+" => 1.0,
                "-" => -1.0,
                other => other.parse().map_err(|_| bad())?,
            };
            Ok(Complex64::new(re, im))
        }
        None => {
            let im: f64 = match body {
                "" => 1.0,
                other => other.parse().map_err(|_| bad())?,
            };
            Ok(Complex64::new(0.0, im))
        }
    }
}

// --- presets ---------------------------------------------------------------------

impl ScenarioConfig {
    /// The built-in parameter sets, one per scenario; the files under
    /// `configs/` are these, serialized.
    pub fn preset(kind: ScenarioKind) -> Self {
        use crate::model::Sector;
        let half = ModelParams {
            x: 0.3,
            g_par2: 1.5,
            g_perp2: 1.0,
            n_plaquettes: 3,
            sector: Sector::Half,
        };
        let one = ModelParams {
            x: 1.0,
            g_par2: 2.0,
            g_perp2: 0.8,
            n_plaquettes: 3,
            sector: Sector::One,
        };
        match kind {
            ScenarioKind::Fluctuations => Self {
                scenario: kind,
                model: half,
                evolution: EvolutionConfig {
                    t_max: 3.0,
                    n_points: 61,
                    ..EvolutionConfig::default()
                },
                initial_state: None,
                sampling: None,
                scan: None,
                compile: None,
                output: OutputConfig::default(),
            },
            ScenarioKind::Breaking => Self {
                scenario: kind,
                model: one,
                evolution: EvolutionConfig {
                    t_max: 4.0,
                    n_points: 161,
                    ..EvolutionConfig::default()
                },
                initial_state: Some(InitialStateSpec {
                    preset: Some(StatePreset::DressedPlus),
                    expr: None,
                }),
                sampling: None,
                scan: None,
                compile: None,
                output: OutputConfig::default(),
            },
            ScenarioKind::ResonanceScan => Self {
                scenario: kind,
                model: ModelParams {
                    x: 0.02,
                    g_perp2: 2.0,
                    ..one
                },
                evolution: EvolutionConfig::default(),
                initial_state: None,
                sampling: None,
                scan: Some(ScanConfig {
                    ratio_min: 0.5,
                    ratio_max: 1.5,
                    ratio_step: 0.05,
                    t_max: 200.0,
                    n_points: 101,
                    normalize: true,
                }),
                compile: None,
                output: OutputConfig::default(),
            },
            ScenarioKind::Gatecount => Self {
                scenario: kind,
                model: ModelParams {
                    x: -0.78,
                    g_par2: 2.8,
                    g_perp2: 2.0,
                    ..one
                },
                evolution: EvolutionConfig::default(),
                initial_state: None,
                sampling: None,
                scan: None,
                compile: Some(CompileConfig {
                    t_max: 10.0,
                    t_step: 0.25,
                    n_steps: 2,
                    pair_form: PairForm::Simplified,
                    max_angle: default_max_angle(),
                    respect_physicality: true,
                    qubit_estimate: true,
                }),
                output: OutputConfig::default(),
            },
            ScenarioKind::EffectiveCompare => Self {
                scenario: kind,
                model: ModelParams { x: 0.05, ..half },
                evolution: EvolutionConfig {
                    t_max: 20.0,
                    n_points: 51,
                    ..EvolutionConfig::default()
                },
                initial_state: None,
                sampling: None,
                scan: None,
                compile: None,
                output: OutputConfig::default(),
            },
            ScenarioKind::FullPopulations => Self {
                scenario: kind,
                model: one,
                evolution: EvolutionConfig {
                    t_max: 4.0,
                    n_points: 161,
                    ..EvolutionConfig::default()
                },
                initial_state: Some(InitialStateSpec {
                    preset: Some(StatePreset::DressedPlus),
                    expr: None,
                }),
                sampling: Some(SamplingConfig {
                    shots: 2000,
                    seed: 7,
                    post_select: true,
                }),
                scan: None,
                compile: None,
                output: OutputConfig::default(),
            },
        }
    }
}
