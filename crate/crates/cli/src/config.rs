//! Experiment configuration: JSON file, command-line overrides, validation.
//!
//! Level and basis labels are one-based here, as in the usual physics
//! notation (`|b_1|^2`, levels `(1, 2)`); the library is zero-based.

use std::f64::consts::PI;
use std::path::PathBuf;

use faquad::dynamics::{StateLabel, StepPolicy};
use faquad::model::{
    BoseHubbard3Params, DeltaCoupling, ModelParams, RingParams, TwoLevelParams,
};
use faquad::numeric::linspace;
use faquad::{LevelPair, ModelSpec, ProtocolKind};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const MIN_RING_CUTOFF: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    TwoLevel {
        u: f64,
        #[serde(default = "one")]
        j: f64,
        delta_start: f64,
        delta_end: f64,
    },
    BoseHubbard3 {
        u: f64,
        #[serde(default = "one")]
        j: f64,
        delta_start: f64,
        delta_end: f64,
    },
    Ring {
        u0: f64,
        #[serde(default = "default_cutoff")]
        cutoff: usize,
        #[serde(default)]
        coupling: DeltaCoupling,
        #[serde(default)]
        omega_start: f64,
        #[serde(default = "pi")]
        omega_end: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn pi() -> f64 {
    PI
}

fn default_cutoff() -> usize {
    RingParams::DEFAULT_CUTOFF
}

impl ModelConfig {
    /// Defaults per kind: the two-level sweep and Bose-Hubbard splitting of
    /// the built-in figures, and the weakly stirred ring.
    pub fn default_for(kind: &str) -> Result<Self, CliError> {
        match kind {
            "two-level" => Ok(Self::TwoLevel { u: 22.3, j: 1.0, delta_start: 66.7, delta_end: 0.0 }),
            "bose-hubbard3" => {
                Ok(Self::BoseHubbard3 { u: 33.45, j: 1.0, delta_start: 100.0, delta_end: 0.0 })
            }
            "ring" => Ok(Self::Ring {
                u0: 0.5,
                cutoff: default_cutoff(),
                coupling: DeltaCoupling::default(),
                omega_start: 0.0,
                omega_end: PI,
            }),
            other => Err(CliError::config(
                "model.kind",
                format!("unknown model `{other}` (expected two-level, bose-hubbard3 or ring)"),
            )),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::TwoLevel { .. } => "two-level",
            Self::BoseHubbard3 { .. } => "bose-hubbard3",
            Self::Ring { .. } => "ring",
        }
    }

    pub fn is_ring(&self) -> bool {
        matches!(self, Self::Ring { .. })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::TwoLevel { .. } => 2,
            Self::BoseHubbard3 { .. } => 3,
            Self::Ring { cutoff, .. } => 2 * cutoff + 1,
        }
    }

    pub fn spec(&self) -> Result<ModelSpec, CliError> {
        let spec = match *self {
            Self::TwoLevel { u, j, delta_start, delta_end } => {
                ModelSpec::new(ModelParams::TwoLevel(TwoLevelParams { u, j }), delta_start, delta_end)
            }
            Self::BoseHubbard3 { u, j, delta_start, delta_end } => ModelSpec::new(
                ModelParams::BoseHubbard3(BoseHubbard3Params { u, j }),
                delta_start,
                delta_end,
            ),
            Self::Ring { u0, cutoff, coupling, omega_start, omega_end } => ModelSpec::new(
                ModelParams::Ring(RingParams { u0, cutoff, coupling }),
                omega_start,
                omega_end,
            ),
        };
        spec.map_err(|e| CliError::config("model", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub kind: ProtocolKind,
    /// One-based level pair the schedule is designed for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<[usize; 2]>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Control value of a constant protocol.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    /// `s,lambda` table of a tabulated protocol.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

fn default_grid_points() -> usize {
    faquad::protocol::DEFAULT_GRID_POINTS
}

impl ProtocolConfig {
    pub fn of_kind(kind: ProtocolKind) -> Self {
        Self { kind, pair: None, grid_points: default_grid_points(), value: None, table: None, label: None }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.kind.name().to_string())
    }
}

/// One-based state label: `{"bare": 2}` or `{"adiabatic": 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum LevelLabel {
    Bare(usize),
    Adiabatic(usize),
}

impl LevelLabel {
    /// Parse `bare:2` or `adiabatic:1`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let (kind, index) = text
            .split_once(':')
            .ok_or_else(|| format!("expected `bare:<n>` or `adiabatic:<n>`, got `{text}`"))?;
        let index: usize = index.trim().parse().map_err(|_| format!("bad level index in `{text}`"))?;
        match kind.trim() {
            "bare" => Ok(Self::Bare(index)),
            "adiabatic" => Ok(Self::Adiabatic(index)),
            other => Err(format!("unknown basis `{other}`")),
        }
    }

    fn index(&self) -> usize {
        match *self {
            Self::Bare(i) | Self::Adiabatic(i) => i,
        }
    }

    pub fn to_state(self) -> StateLabel {
        match self {
            Self::Bare(i) => StateLabel::Bare(i - 1),
            Self::Adiabatic(i) => StateLabel::Adiabatic(i - 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRange {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

impl SweepRange {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            vec![self.from]
        } else {
            linspace(self.from, self.to, self.count)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    #[serde(default = "default_min_steps")]
    pub min_steps: usize,
    #[serde(default = "default_steps_per_period")]
    pub steps_per_period: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<usize>,
}

fn default_min_steps() -> usize {
    StepPolicy::default().min_steps
}

fn default_steps_per_period() -> f64 {
    StepPolicy::default().steps_per_period
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            n_steps: None,
            min_steps: default_min_steps(),
            steps_per_period: default_steps_per_period(),
            record_every: None,
        }
    }
}

impl IntegratorConfig {
    pub fn policy(&self) -> StepPolicy {
        StepPolicy {
            min_steps: self.min_steps,
            steps_per_period: self.steps_per_period,
            fixed: self.n_steps,
            pair: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default = "default_spectrum_points")]
    pub points: usize,
    /// Number of lowest levels written; all levels when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
}

fn default_spectrum_points() -> usize {
    401
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { points: default_spectrum_points(), levels: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default = "default_protocols")]
    pub protocols: Vec<ProtocolConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<LevelLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<LevelLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tf_sweep: Option<SweepRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_sweep: Option<SweepRange>,
    /// Tonks-Girardeau particle numbers (ring only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub particles: Vec<usize>,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    /// One-based levels written by `evolve` to the projection table.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub projection_levels: Vec<usize>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_protocols() -> Vec<ProtocolConfig> {
    vec![ProtocolConfig::of_kind(ProtocolKind::Faquad)]
}

impl ExperimentConfig {
    pub fn new(model: ModelConfig) -> Self {
        Self {
            model,
            protocols: default_protocols(),
            start: None,
            target: None,
            t_f: None,
            tf_sweep: None,
            epsilon_sweep: None,
            particles: Vec::new(),
            spectrum: SpectrumConfig::default(),
            projection_levels: Vec::new(),
            integrator: IntegratorConfig::default(),
            output_dir: None,
        }
    }

    /// Particle numbers to simulate on the ring (3 when none are given).
    pub fn particle_numbers(&self) -> Vec<usize> {
        if self.particles.is_empty() {
            vec![3]
        } else {
            self.particles.clone()
        }
    }

    /// Check every field before any computation; errors name the field.
    pub fn validate(&self) -> Result<(), CliError> {
        self.validate_model()?;
        let dim = self.model.dim();
        if self.protocols.is_empty() {
            return Err(CliError::config("protocols", "at least one protocol is required"));
        }
        let mut labels = Vec::new();
        for (i, p) in self.protocols.iter().enumerate() {
            let at = |field: &str| format!("protocols[{i}].{field}");
            if let Some([a, b]) = p.pair {
                if a == 0 || b <= a || b > dim {
                    return Err(CliError::config(
                        at("pair"),
                        format!("need 1 <= lower < upper <= {dim}, got [{a}, {b}]"),
                    ));
                }
            }
            if p.grid_points < 2 {
                return Err(CliError::config(at("grid_points"), "need at least 2 grid points"));
            }
            match p.kind {
                ProtocolKind::Constant => match p.value {
                    Some(v) if v.is_finite() => {}
                    _ => return Err(CliError::config(at("value"), "constant protocol needs a finite value")),
                },
                ProtocolKind::Tabulated if p.table.is_none() => {
                    return Err(CliError::config(at("table"), "tabulated protocol needs a table path"));
                }
                _ => {}
            }
            if p.kind != ProtocolKind::Constant && p.value.is_some() {
                return Err(CliError::config(at("value"), "only constant protocols take a value"));
            }
            let label = p.label();
            if label.is_empty() || !label.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return Err(CliError::config(at("label"), format!("label `{label}` must be [A-Za-z0-9_-]+")));
            }
            if labels.contains(&label) {
                return Err(CliError::config(at("label"), format!("duplicate protocol label `{label}`")));
            }
            labels.push(label);
        }
        for (field, label) in [("start", self.start), ("target", self.target)] {
            if let Some(l) = label {
                if l.index() == 0 || l.index() > dim {
                    return Err(CliError::config(field, format!("level must be in 1..={dim}")));
                }
            }
        }
        if let Some(t) = self.t_f {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::config("t_f", "process duration must be positive"));
            }
        }
        if let Some(r) = self.tf_sweep {
            check_range("tf_sweep", &r)?;
            if !(r.from > 0.0) {
                return Err(CliError::config("tf_sweep.from", "durations must be positive"));
            }
        }
        if let Some(r) = self.epsilon_sweep {
            check_range("epsilon_sweep", &r)?;
            if !(r.from >= -1.0) {
                return Err(CliError::config("epsilon_sweep.from", "relative error must be at least -1"));
            }
        }
        if !self.particles.is_empty() && !self.model.is_ring() {
            return Err(CliError::config("particles", "particle numbers apply to the ring model only"));
        }
        for (i, &n) in self.particles.iter().enumerate() {
            if n % 2 == 0 || n > dim - 2 {
                return Err(CliError::config(
                    format!("particles[{i}]"),
                    format!("particle number must be odd and at most {}, got {n}", dim - 2),
                ));
            }
        }
        for (i, &l) in self.projection_levels.iter().enumerate() {
            if l == 0 || l > dim {
                return Err(CliError::config(format!("projection_levels[{i}]"), format!("level must be in 1..={dim}")));
            }
        }
        if self.spectrum.points < 2 {
            return Err(CliError::config("spectrum.points", "need at least 2 points"));
        }
        if let Some(l) = self.spectrum.levels {
            if l == 0 || l > dim {
                return Err(CliError::config("spectrum.levels", format!("must be in 1..={dim}")));
            }
        }
        let ig = &self.integrator;
        if ig.n_steps == Some(0) {
            return Err(CliError::config("integrator.n_steps", "must be positive"));
        }
        if !(ig.steps_per_period > 0.0 && ig.steps_per_period.is_finite()) {
            return Err(CliError::config("integrator.steps_per_period", "must be positive"));
        }
        if ig.record_every == Some(0) {
            return Err(CliError::config("integrator.record_every", "must be positive"));
        }
        Ok(())
    }

    fn validate_model(&self) -> Result<(), CliError> {
        let finite = |field: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(CliError::config(format!("model.{field}"), "must be finite"))
            }
        };
        match self.model {
            ModelConfig::TwoLevel { u, j, delta_start, delta_end }
            | ModelConfig::BoseHubbard3 { u, j, delta_start, delta_end } => {
                finite("delta_start", delta_start)?;
                finite("delta_end", delta_end)?;
                if !(u > 0.0 && u.is_finite()) {
                    return Err(CliError::config("model.u", "U must be positive"));
                }
                if !(j > 0.0 && j.is_finite()) {
                    return Err(CliError::config("model.j", "J must be positive"));
                }
                if delta_start == delta_end {
                    return Err(CliError::config("model.delta_end", "must differ from delta_start"));
                }
            }
            ModelConfig::Ring { u0, cutoff, omega_start, omega_end, .. } => {
                finite("omega_start", omega_start)?;
                finite("omega_end", omega_end)?;
                if !(u0 >= 0.0 && u0.is_finite()) {
                    return Err(CliError::config("model.u0", "u0 must be non-negative"));
                }
                if cutoff < MIN_RING_CUTOFF {
                    return Err(CliError::config(
                        "model.cutoff",
                        format!("plane-wave cutoff must be at least {MIN_RING_CUTOFF}, got {cutoff}"),
                    ));
                }
                if omega_start == omega_end {
                    return Err(CliError::config("model.omega_end", "must differ from omega_start"));
                }
            }
        }
        Ok(())
    }

    /// Zero-based design pair of protocol `i` for `particles` (ring) or the
    /// two lowest levels.
    pub fn design_pair(&self, protocol: &ProtocolConfig, particles: Option<usize>) -> Result<LevelPair, CliError> {
        let pair = match (protocol.pair, particles) {
            (Some([a, b]), _) => LevelPair::new(a - 1, b - 1),
            (None, Some(n)) => LevelPair::highest_occupied(n),
            (None, None) => Ok(LevelPair::ground()),
        };
        pair.map_err(|e| CliError::config("protocols.pair", e.to_string()))
    }
}

fn check_range(field: &str, r: &SweepRange) -> Result<(), CliError> {
    if !r.from.is_finite() || !r.to.is_finite() {
        return Err(CliError::config(field, "range bounds must be finite"));
    }
    if r.count == 0 {
        return Err(CliError::config(format!("{field}.count"), "must be positive"));
    }
    if r.to < r.from {
        return Err(CliError::config(format!("{field}.to"), "must not be below `from`"));
    }
    Ok(())
}

/// Parse and validate a JSON configuration.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "config".to_string() } else { path };
        CliError::config(path, e.into_inner().to_string())
    })?;
    config.validate()?;
    Ok(config)
}
