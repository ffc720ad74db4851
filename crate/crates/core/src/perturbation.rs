//! First-order adiabatic perturbation theory for a schedule with (nearly)
//! constant adiabaticity parameter.
//!
//! Starting in level `m`, the amplitude leaked to level `n` is
//! `g_n(t) = i c r (exp(i W_nm(t)) - 1)` with `c = c~ / t_f` and
//! `W_nm(t) = t_f * int_0^{t/t_f} (E_n - E_m)(lambda~(s)) ds`. Its modulus
//! squared at the end of the process is `4 c^2 sin^2(t_f Phi / 2)`.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::ControlledHamiltonian;
use crate::numeric::{cumulative_trapezoid, linspace};
use crate::protocol::{NormalizedTrajectory, ProtocolKind};
use crate::spectral::{continue_frames, LevelPair};

const UNIFORM_SAMPLES: usize = 2001;

/// `Phi = int_0^1 (E_upper - E_lower)(lambda~(s)) ds` together with its
/// running value on the quadrature nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseIntegral {
    pub pair: LevelPair,
    pub phi: f64,
    /// Set when the trajectory is not a FAQUAD design; the first-order
    /// formulas then only hold approximately.
    pub approximate: bool,
    s: Vec<f64>,
    running: Vec<f64>,
}

impl PhaseIntegral {
    /// `int_0^s gap ds'`, linear between quadrature nodes.
    pub fn partial(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        let k = self.s.partition_point(|&x| x <= s).clamp(1, self.s.len() - 1);
        let (s0, s1) = (self.s[k - 1], self.s[k]);
        let w = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
        self.running[k - 1] + w * (self.running[k] - self.running[k - 1])
    }
}

/// Quadrature nodes: the trajectory's own nodes when it carries a designed
/// table, otherwise a uniform grid in `s`.
fn quadrature_nodes(traj: &NormalizedTrajectory, samples: Option<usize>) -> Vec<f64> {
    match samples {
        Some(n) => linspace(0.0, 1.0, n.max(2)),
        None if traj.s_grid().len() >= 201 => traj.s_grid().to_vec(),
        None => linspace(0.0, 1.0, UNIFORM_SAMPLES),
    }
}

pub fn phase_integral(
    ham: &dyn ControlledHamiltonian,
    traj: &NormalizedTrajectory,
    pair: LevelPair,
) -> Result<PhaseIntegral> {
    phase_integral_with(ham, traj, pair, None)
}

/// As [`phase_integral`] on `samples` uniform nodes in `s` when given.
pub fn phase_integral_with(
    ham: &dyn ControlledHamiltonian,
    traj: &NormalizedTrajectory,
    pair: LevelPair,
    samples: Option<usize>,
) -> Result<PhaseIntegral> {
    if pair.upper >= ham.dim() {
        return Err(Error::InvalidInput(format!("level {} out of range", pair.upper)));
    }
    let s = quadrature_nodes(traj, samples);
    let lambdas: Vec<f64> = s.iter().map(|&x| traj.eval(x)).collect();
    let frames = continue_frames(ham, &lambdas, &[])?;
    let gaps: Vec<f64> = frames.iter().map(|f| f.gap(pair)).collect();
    let running = cumulative_trapezoid(&s, &gaps);
    let phi = *running.last().expect("at least two nodes");
    if !(phi > 0.0) {
        return Err(Error::Consistency(format!("phase integral {phi} is not positive")));
    }
    Ok(PhaseIntegral {
        pair,
        phi,
        approximate: traj.kind() != ProtocolKind::Faquad,
        s,
        running,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationPrediction {
    pub phase: PhaseIntegral,
    pub c_tilde: f64,
    /// Sign of `<phi_n|d_t phi_m> omega_nm` along the schedule.
    pub r: f64,
}

impl PerturbationPrediction {
    pub fn new(
        ham: &dyn ControlledHamiltonian,
        traj: &NormalizedTrajectory,
        pair: LevelPair,
    ) -> Result<Self> {
        let c_tilde = traj.c_tilde().ok_or_else(|| {
            Error::InvalidInput(format!("{} schedule carries no adiabaticity constant", traj.kind().name()))
        })?;
        let phase = phase_integral(ham, traj, pair)?;
        let s = 0.5;
        let frame = crate::spectral::frame_at(ham, traj.eval(s), &[pair])?;
        let coupling = frame.coupling(pair.upper, pair.lower).unwrap_or(0.0) * traj.derivative(s);
        let omega = frame.energies[pair.upper] - frame.energies[pair.lower];
        let r = if coupling * omega >= 0.0 { 1.0 } else { -1.0 };
        Ok(Self { phase, c_tilde, r })
    }

    pub fn phi(&self) -> f64 {
        self.phase.phi
    }

    /// Time between interference zeros, `2 pi / Phi`.
    pub fn period(&self) -> f64 {
        TAU / self.phase.phi
    }

    /// `4 c~^2 / t_f^2`.
    pub fn envelope(&self, t_f: f64) -> f64 {
        4.0 * self.c_tilde * self.c_tilde / (t_f * t_f)
    }

    /// `4 c~^2 / t_f^2 * sin^2(t_f Phi / 2)`.
    pub fn predicted_infidelity(&self, t_f: f64) -> f64 {
        self.envelope(t_f) * (0.5 * t_f * self.phase.phi).sin().powi(2)
    }

    /// First-order amplitude of the upper level at `t = s t_f`.
    pub fn amplitude(&self, t_f: f64, s: f64) -> C64 {
        let w = t_f * self.phase.partial(s);
        let c = self.c_tilde / t_f;
        C64::new(0.0, c * self.r) * (C64::from_polar(1.0, w) - 1.0)
    }

    /// Durations `k * period` for `k = 1..=count`.
    pub fn zeros(&self, count: usize) -> Vec<f64> {
        (1..=count).map(|k| k as f64 * self.period()).collect()
    }
}
