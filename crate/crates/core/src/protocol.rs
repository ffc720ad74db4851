//! Normalized control schedules `lambda(s)`, `s = t / t_f`, and their
//! rescaling to a physical duration.
//!
//! The adiabatic designers share one construction: the control speed is
//! `d lambda / ds = c / F(lambda)` for a schedule-specific weight `F`, so
//! `s(lambda)` is the normalized running integral of `F` and `lambda(s)`
//! follows by monotone inversion. The constant `c` equals the integral of `F`
//! over the whole control range.

use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ControlledHamiltonian;
use crate::numeric::{gradient, linspace, MonotoneCubic};
use crate::spectral::{frame_at, track_frames, FrameTrack, LevelPair, SpectralFrame};

pub const DEFAULT_GRID_POINTS: usize = 2001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    /// Constant adiabaticity parameter.
    Faquad,
    /// Speed proportional to the squared gap.
    LocalAdiabatic,
    /// Speed proportional to gap^2 / |d gap / d lambda|.
    UniformAdiabatic,
    Linear,
    Constant,
    /// Read from a table; no design constant attached.
    Tabulated,
}

impl ProtocolKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Faquad => "faquad",
            Self::LocalAdiabatic => "local-adiabatic",
            Self::UniformAdiabatic => "uniform-adiabatic",
            Self::Linear => "linear",
            Self::Constant => "constant",
            Self::Tabulated => "tabulated",
        }
    }
}

/// Control schedule on `s` in `[0, 1]`, independent of the process duration.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedTrajectory {
    kind: ProtocolKind,
    curve: MonotoneCubic,
    c_tilde: Option<f64>,
    pair: Option<LevelPair>,
}

impl NormalizedTrajectory {
    pub fn kind(&self) -> ProtocolKind {
        self.kind
    }

    /// `c * t_f`, the duration-free adiabaticity constant (hbar = 1).
    pub fn c_tilde(&self) -> Option<f64> {
        self.c_tilde
    }

    pub fn pair(&self) -> Option<LevelPair> {
        self.pair
    }

    pub fn s_grid(&self) -> &[f64] {
        self.curve.nodes().0
    }

    pub fn values(&self) -> &[f64] {
        self.curve.nodes().1
    }

    pub fn start(&self) -> f64 {
        self.values()[0]
    }

    pub fn end(&self) -> f64 {
        *self.values().last().expect("trajectory has at least two nodes")
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.curve.eval(s)
    }

    /// `d lambda / ds`.
    pub fn derivative(&self, s: f64) -> f64 {
        self.curve.derivative(s)
    }

    /// Schedule given directly as nodes `(s, lambda)`; `s` must run from 0 to 1.
    pub fn tabulated(s: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        if s.first() != Some(&0.0) || s.last() != Some(&1.0) {
            return Err(Error::Table("s must start at 0 and end at 1".into()));
        }
        let curve = MonotoneCubic::new(s, lambda).map_err(|e| Error::Table(e.to_string()))?;
        Ok(Self { kind: ProtocolKind::Tabulated, curve, c_tilde: None, pair: None })
    }

    /// Two-column CSV with header `s,lambda`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "s,lambda")?;
        for (s, l) in self.s_grid().iter().zip(self.values()) {
            writeln!(out, "{s:.12e},{l:.12e}")?;
        }
        Ok(())
    }

    /// Parse a table written by [`Self::write_csv`] (or any `s,lambda` table).
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = reader.headers().map_err(|e| Error::Table(e.to_string()))?;
        if headers.len() != 2 || &headers[0] != "s" || &headers[1] != "lambda" {
            return Err(Error::Table("expected header `s,lambda`".into()));
        }
        let mut s = Vec::new();
        let mut lambda = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Table(e.to_string()))?;
            if record.len() != 2 {
                return Err(Error::Table(format!("row {}: expected two fields", row + 1)));
            }
            let parse = |field: &str| -> Result<f64> {
                field
                    .parse::<f64>()
                    .map_err(|_| Error::Table(format!("row {}: bad number `{field}`", row + 1)))
            };
            s.push(parse(&record[0])?);
            lambda.push(parse(&record[1])?);
        }
        Self::tabulated(s, lambda)
    }
}

/// `n` uniform control samples between the boundary values.
pub fn default_grid(ham: &dyn ControlledHamiltonian, n: usize) -> Vec<f64> {
    let (a, b) = ham.boundary();
    linspace(a, b, n)
}

fn separable(
    kind: ProtocolKind,
    pair: LevelPair,
    grid: &[f64],
    weight: &[f64],
) -> Result<NormalizedTrajectory> {
    let mut running = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    running.push(0.0);
    for k in 1..grid.len() {
        acc += 0.5 * (weight[k] + weight[k - 1]) * (grid[k] - grid[k - 1]).abs();
        running.push(acc);
    }
    if !(acc > 0.0 && acc.is_finite()) {
        return Err(Error::Consistency(format!("schedule integral is {acc}")));
    }
    let mut s: Vec<f64> = running.iter().map(|g| g / acc).collect();
    let last = s.len() - 1;
    s[last] = 1.0;
    if let Some(k) = s.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::Consistency(format!(
            "normalized time not strictly increasing between lambda = {} and {}",
            grid[k],
            grid[k + 1]
        )));
    }
    let sign = (grid[last] - grid[0]).signum();
    let slope = weight.iter().map(|w| sign * acc / w).collect();
    let curve = MonotoneCubic::with_slopes(s, grid.to_vec(), slope)?;
    Ok(NormalizedTrajectory { kind, curve, c_tilde: Some(acc), pair: Some(pair) })
}

fn checked_track(
    ham: &dyn ControlledHamiltonian,
    pair: LevelPair,
    grid: &[f64],
) -> Result<FrameTrack> {
    let (a, b) = ham.boundary();
    if grid.first() != Some(&a) || grid.last() != Some(&b) {
        return Err(Error::InvalidInput(
            "design grid must start and end at the boundary control values".into(),
        ));
    }
    track_frames(ham, grid, &[pair])
}

/// Relative weight change across one grid interval above which the interval
/// is bisected.
pub const REFINE_TOLERANCE: f64 = 0.05;
pub const REFINE_ROUNDS: usize = 8;

/// The design grid with intervals bisected wherever `weight` (a function of
/// one spectral frame) changes by more than [`REFINE_TOLERANCE`], for at most
/// [`REFINE_ROUNDS`] rounds. Returns the refined grid and the weight on it.
fn refine<F>(
    ham: &dyn ControlledHamiltonian,
    pair: LevelPair,
    grid: &[f64],
    weight: F,
) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&SpectralFrame) -> f64,
{
    let track = checked_track(ham, pair, grid)?;
    let mut nodes: Vec<(f64, f64)> =
        grid.iter().zip(&track.frames).map(|(&l, f)| (l, weight(f))).collect();
    for _ in 0..REFINE_ROUNDS {
        let mut next = Vec::with_capacity(nodes.len());
        let mut added = 0;
        for w in nodes.windows(2) {
            next.push(w[0]);
            let (x, y) = (w[0].1.abs(), w[1].1.abs());
            if (x - y).abs() > REFINE_TOLERANCE * x.max(y) {
                let mid = 0.5 * (w[0].0 + w[1].0);
                if mid != w[0].0 && mid != w[1].0 {
                    next.push((mid, weight(&frame_at(ham, mid, &[pair])?)));
                    added += 1;
                }
            }
        }
        next.push(nodes[nodes.len() - 1]);
        nodes = next;
        if added == 0 {
            break;
        }
    }
    Ok(nodes.into_iter().unzip())
}

fn faquad_weight(pair: LevelPair) -> impl Fn(&SpectralFrame) -> f64 {
    move |f| (f.coupling(pair.lower, pair.upper).unwrap_or(f64::NAN) / f.gap(pair)).abs()
}

fn inverse_square_gap(pair: LevelPair) -> impl Fn(&SpectralFrame) -> f64 {
    move |f| f.gap(pair).powi(-2)
}

/// Schedule with constant adiabaticity parameter `|<phi_1|d_t phi_2> / (E_1 - E_2)|`.
/// The design grid is refined where the weight varies quickly.
pub fn design_faquad(
    ham: &dyn ControlledHamiltonian,
    pair: LevelPair,
    grid: &[f64],
) -> Result<NormalizedTrajectory> {
    let (grid, weight) = refine(ham, pair, grid, faquad_weight(pair))?;
    separable(ProtocolKind::Faquad, pair, &grid, &weight)
}

/// Local-adiabatic schedule: the FAQUAD rule without the coupling factor,
/// `d lambda / dt` proportional to the squared gap.
pub fn design_local_adiabatic(
    ham: &dyn ControlledHamiltonian,
    pair: LevelPair,
    grid: &[f64],
) -> Result<NormalizedTrajectory> {
    let (grid, weight) = refine(ham, pair, grid, inverse_square_gap(pair))?;
    separable(ProtocolKind::LocalAdiabatic, pair, &grid, &weight)
}

/// Uniform-adiabatic schedule, `d lambda / dt` proportional to
/// `gap^2 / |d gap / d lambda|`. The gap slope is taken by centered differences
/// on the grid, refined as for the local-adiabatic schedule.
pub fn design_uniform_adiabatic(
    ham: &dyn ControlledHamiltonian,
    pair: LevelPair,
    grid: &[f64],
) -> Result<NormalizedTrajectory> {
    let (grid, inv_sq) = refine(ham, pair, grid, inverse_square_gap(pair))?;
    let gaps: Vec<f64> = inv_sq.iter().map(|w| w.powf(-0.5)).collect();
    let slope = gradient(&grid, &gaps);
    let scale = slope.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let flat = |v: f64| v.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE);
    if let Some(k) = slope.windows(2).position(|w| flat(w[0]) && flat(w[1])) {
        return Err(Error::FlatGap { from: grid[k], to: grid[k + 1] });
    }
    let weight: Vec<f64> =
        slope.iter().zip(&gaps).map(|(d, g)| d.abs() / (g * g)).collect();
    separable(ProtocolKind::UniformAdiabatic, pair, &grid, &weight)
}

pub fn linear_ramp(ham: &dyn ControlledHamiltonian) -> NormalizedTrajectory {
    let (a, b) = ham.boundary();
    NormalizedTrajectory {
        kind: ProtocolKind::Linear,
        curve: MonotoneCubic::new(vec![0.0, 1.0], vec![a, b]).expect("two distinct nodes"),
        c_tilde: None,
        pair: None,
    }
}

/// Control frozen at `value` for the whole process.
pub fn constant_protocol(value: f64) -> Result<NormalizedTrajectory> {
    if !value.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite constant control {value}")));
    }
    Ok(NormalizedTrajectory {
        kind: ProtocolKind::Constant,
        curve: MonotoneCubic::new(vec![0.0, 1.0], vec![value, value])?,
        c_tilde: None,
        pair: None,
    })
}

/// Dispatch on the protocol kind for the designers that need spectral data.
pub fn design(
    ham: &dyn ControlledHamiltonian,
    kind: ProtocolKind,
    pair: LevelPair,
    grid: &[f64],
) -> Result<NormalizedTrajectory> {
    match kind {
        ProtocolKind::Faquad => design_faquad(ham, pair, grid),
        ProtocolKind::LocalAdiabatic => design_local_adiabatic(ham, pair, grid),
        ProtocolKind::UniformAdiabatic => design_uniform_adiabatic(ham, pair, grid),
        ProtocolKind::Linear => Ok(linear_ramp(ham)),
        ProtocolKind::Constant | ProtocolKind::Tabulated => Err(Error::InvalidInput(format!(
            "{} schedules are not designed from the spectrum",
            kind.name()
        ))),
    }
}

/// `|d lambda/ds * <phi_i|d_lambda phi_j> / (E_j - E_i)|` at each `s`, i.e. the
/// adiabaticity parameter times `t_f`. Constant (= c-tilde) for FAQUAD.
pub fn adiabaticity_profile(
    ham: &dyn ControlledHamiltonian,
    traj: &NormalizedTrajectory,
    pair: LevelPair,
    s_values: &[f64],
) -> Result<Vec<f64>> {
    s_values
        .iter()
        .map(|&s| {
            let frame = frame_at(ham, traj.eval(s), &[pair])?;
            let c = frame.coupling(pair.lower, pair.upper).unwrap_or(0.0);
            Ok((traj.derivative(s) * c / frame.gap(pair)).abs())
        })
        .collect()
}

/// A normalized trajectory stretched over a duration `t_f`, optionally with a
/// multiplicative control error `lambda(t) = (1 + eps) lambda~(t / t_f)`.
#[derive(Debug, Clone)]
pub struct TimedControl {
    traj: Arc<NormalizedTrajectory>,
    t_f: f64,
    gain: f64,
}

impl TimedControl {
    pub fn t_f(&self) -> f64 {
        self.t_f
    }

    pub fn trajectory(&self) -> &NormalizedTrajectory {
        &self.traj
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// `c = c~ / t_f`.
    pub fn c(&self) -> Option<f64> {
        self.traj.c_tilde().map(|c| c / self.t_f)
    }

    pub fn lambda_at(&self, t: f64) -> f64 {
        self.gain * self.traj.eval(t / self.t_f)
    }

    /// Same schedule with the control multiplied by `1 + eps`.
    pub fn with_relative_error(&self, eps: f64) -> Result<Self> {
        if !(eps >= -1.0) || !eps.is_finite() {
            return Err(Error::InvalidInput(format!("relative control error must be at least -1, got {eps}")));
        }
        Ok(Self { traj: Arc::clone(&self.traj), t_f: self.t_f, gain: 1.0 + eps })
    }
}

pub fn rescale(traj: Arc<NormalizedTrajectory>, t_f: f64) -> Result<TimedControl> {
    if !(t_f > 0.0) || !t_f.is_finite() {
        return Err(Error::InvalidInput(format!("process duration must be positive, got {t_f}")));
    }
    Ok(TimedControl { traj, t_f, gain: 1.0 })
}
