//! Time-dependent Schrodinger propagation under a timed control, readout in
//! the bare or instantaneous basis, and projection onto the adiabatic frame.
//!
//! Each step freezes the Hamiltonian at the step midpoint and applies its
//! exact exponential through an eigendecomposition, so every step is unitary
//! to rounding error (second order in the step size overall).

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ControlledHamiltonian;
use crate::protocol::{rescale, NormalizedTrajectory, TimedControl};
use crate::spectral::{continue_frames, eigensystem, LevelPair};

pub const NORM_TOLERANCE: f64 = 1e-9;

/// Number of integration steps for one evolution: at least `min_steps`, and
/// at least `steps_per_period` steps per period of the largest gap of the
/// reference pair met along the control path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub min_steps: usize,
    pub steps_per_period: f64,
    /// Overrides the rule above when set.
    pub fixed: Option<usize>,
    /// Reference pair; defaults to the trajectory's design pair, else the
    /// two lowest levels.
    pub pair: Option<LevelPair>,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self { min_steps: 2000, steps_per_period: 200.0, fixed: None, pair: None }
    }
}

impl StepPolicy {
    pub fn fixed(n_steps: usize) -> Self {
        Self { fixed: Some(n_steps), ..Self::default() }
    }

    pub fn steps_for(&self, ham: &dyn ControlledHamiltonian, control: &TimedControl) -> Result<usize> {
        if let Some(n) = self.fixed {
            return Ok(n.max(1));
        }
        let pair = self
            .pair
            .or_else(|| control.trajectory().pair())
            .unwrap_or_else(LevelPair::ground);
        let mut max_gap = 0.0_f64;
        for k in 0..=64 {
            let t = control.t_f() * k as f64 / 64.0;
            let (e, _) = eigensystem(&ham.hamiltonian(control.lambda_at(t))?)?;
            if pair.upper >= e.len() {
                return Err(Error::InvalidInput(format!("reference level {} out of range", pair.upper)));
            }
            max_gap = max_gap.max(e[pair.upper] - e[pair.lower]);
        }
        let by_phase = (self.steps_per_period * control.t_f() * max_gap / TAU).ceil() as usize;
        Ok(self.min_steps.max(by_phase).max(1))
    }
}

/// Advance every column of `states` from 0 to `t_f` in `n_steps` midpoint
/// exponential steps. `observe(step, t, states)` runs after every step.
/// Returns the largest deviation of any column norm from its initial value.
pub fn propagate<F>(
    ham: &dyn ControlledHamiltonian,
    control: &TimedControl,
    states: &mut DMatrix<C64>,
    n_steps: usize,
    mut observe: F,
) -> Result<f64>
where
    F: FnMut(usize, f64, &DMatrix<C64>),
{
    let n = ham.dim();
    if states.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: states.nrows() });
    }
    let n_steps = n_steps.max(1);
    let dt = control.t_f() / n_steps as f64;
    let norms0: Vec<f64> = states.column_iter().map(|c| c.norm()).collect();
    let mut drift = 0.0_f64;
    let m = states.ncols();
    let mut re = DMatrix::<f64>::zeros(n, m);
    let mut im = DMatrix::<f64>::zeros(n, m);
    for step in 0..n_steps {
        let t_mid = (step as f64 + 0.5) * dt;
        let eig = ham.hamiltonian(control.lambda_at(t_mid))?.symmetric_eigen();
        let v = &eig.eigenvectors;
        for (dst, z) in re.iter_mut().zip(states.iter()) {
            *dst = z.re;
        }
        for (dst, z) in im.iter_mut().zip(states.iter()) {
            *dst = z.im;
        }
        let mut a_re = v.tr_mul(&re);
        let mut a_im = v.tr_mul(&im);
        for (row, &e) in eig.eigenvalues.iter().enumerate() {
            let (sin, cos) = (-e * dt).sin_cos();
            for col in 0..m {
                let (x, y) = (a_re[(row, col)], a_im[(row, col)]);
                a_re[(row, col)] = cos * x - sin * y;
                a_im[(row, col)] = sin * x + cos * y;
            }
        }
        v.mul_to(&a_re, &mut re);
        v.mul_to(&a_im, &mut im);
        for ((z, &x), &y) in states.iter_mut().zip(re.iter()).zip(im.iter()) {
            *z = C64::new(x, y);
        }
        for (col, n0) in states.column_iter().zip(&norms0) {
            drift = drift.max((col.norm() - n0).abs());
        }
        let t = if step + 1 == n_steps { control.t_f() } else { (step + 1) as f64 * dt };
        observe(step + 1, t, states);
    }
    Ok(drift)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvolveOptions {
    /// Integration steps; `None` applies [`StepPolicy::default`].
    pub n_steps: Option<usize>,
    /// Keep every k-th state (the initial and final states are always kept).
    /// `None` keeps about 200 samples.
    pub record_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    /// Bare-basis amplitudes at each recorded time.
    pub states: Vec<DVector<C64>>,
    /// Largest `| ||psi|| - 1 |` over all steps.
    pub norm_drift: f64,
    pub n_steps: usize,
}

impl EvolutionResult {
    pub fn final_state(&self) -> &DVector<C64> {
        self.states.last().expect("evolution keeps the initial state")
    }

    /// `|<index|psi(t_f)>|^2` in the bare basis.
    pub fn final_population(&self, index: usize) -> Result<f64> {
        let psi = self.final_state();
        if index >= psi.len() {
            return Err(Error::InvalidInput(format!("basis index {index} out of range")));
        }
        Ok(psi[index].norm_sqr())
    }
}

pub fn evolve(
    ham: &dyn ControlledHamiltonian,
    control: &TimedControl,
    psi0: &DVector<C64>,
    options: EvolveOptions,
) -> Result<EvolutionResult> {
    if psi0.len() != ham.dim() {
        return Err(Error::DimensionMismatch { expected: ham.dim(), found: psi0.len() });
    }
    if (psi0.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput("initial state must be normalized".into()));
    }
    let n_steps = match options.n_steps {
        Some(n) => n.max(1),
        None => StepPolicy::default().steps_for(ham, control)?,
    };
    let every = options.record_every.unwrap_or((n_steps / 200).max(1)).max(1);
    let mut times = vec![0.0];
    let mut states = vec![psi0.clone()];
    let mut work = DMatrix::from_column_slice(psi0.len(), 1, psi0.as_slice());
    let drift = propagate(ham, control, &mut work, n_steps, |step, t, psi| {
        if step % every == 0 || step == n_steps {
            times.push(t);
            states.push(psi.column(0).clone_owned());
        }
    })?;
    if drift > NORM_TOLERANCE {
        return Err(Error::StepSizeTooCoarse { drift });
    }
    Ok(EvolutionResult { times, states, norm_drift: drift, n_steps })
}

/// A state of the bare basis or of the instantaneous eigenbasis (zero-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateLabel {
    Bare(usize),
    Adiabatic(usize),
}

impl StateLabel {
    /// The normalized state this label denotes at control value `lambda`.
    pub fn state_at(&self, ham: &dyn ControlledHamiltonian, lambda: f64) -> Result<DVector<C64>> {
        let n = ham.dim();
        match *self {
            StateLabel::Bare(i) if i < n => {
                let mut v = DVector::zeros(n);
                v[i] = C64::new(1.0, 0.0);
                Ok(v)
            }
            StateLabel::Adiabatic(m) if m < n => {
                let (_, vecs) = eigensystem(&ham.hamiltonian(lambda)?)?;
                Ok(vecs.column(m).map(|x| C64::new(x, 0.0)))
            }
            StateLabel::Bare(i) | StateLabel::Adiabatic(i) => {
                Err(Error::InvalidInput(format!("state index {i} out of range for dimension {n}")))
            }
        }
    }

    /// `|<label(lambda)|psi>|^2`.
    pub fn population(&self, ham: &dyn ControlledHamiltonian, lambda: f64, psi: &DVector<C64>) -> Result<f64> {
        let target = self.state_at(ham, lambda)?;
        Ok(target.dotc(psi).norm_sqr())
    }
}

/// `|<phi_level(lambda(t_f))|psi(t_f)>|^2`.
pub fn adiabatic_population(
    ham: &dyn ControlledHamiltonian,
    control: &TimedControl,
    result: &EvolutionResult,
    level: usize,
) -> Result<f64> {
    StateLabel::Adiabatic(level).population(ham, control.lambda_at(control.t_f()), result.final_state())
}

/// Coefficients of the state in the instantaneous eigenbasis with the
/// dynamical phases removed: `psi = sum_n g_n exp(-i int E_n) phi_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticProjection {
    pub times: Vec<f64>,
    pub levels: Vec<usize>,
    /// `g[k][i]` is `g_{levels[i]}(times[k])`.
    pub g: Vec<Vec<C64>>,
    energies: Vec<Vec<f64>>,
}

impl AdiabaticProjection {
    fn column(&self, level: usize) -> Result<usize> {
        self.levels
            .iter()
            .position(|&l| l == level)
            .ok_or_else(|| Error::InvalidInput(format!("level {level} was not projected")))
    }

    pub fn probability(&self, level: usize) -> Result<Vec<f64>> {
        let i = self.column(level)?;
        Ok(self.g.iter().map(|row| row[i].norm_sqr()).collect())
    }

    /// Dynamical-gap phase `W_nm(t) = int_0^t (E_n - E_m) dt'` at every
    /// recorded time (trapezoid rule over the recorded samples).
    pub fn gap_phase(&self, n: usize, m: usize) -> Result<Vec<f64>> {
        let (i, j) = (self.column(n)?, self.column(m)?);
        let w: Vec<f64> = self.energies.iter().map(|e| e[i] - e[j]).collect();
        Ok(crate::numeric::cumulative_trapezoid(&self.times, &w))
    }
}

pub fn adiabatic_projection(
    ham: &dyn ControlledHamiltonian,
    control: &TimedControl,
    result: &EvolutionResult,
    levels: &[usize],
) -> Result<AdiabaticProjection> {
    let n = ham.dim();
    if let Some(&bad) = levels.iter().find(|&&l| l >= n) {
        return Err(Error::InvalidInput(format!("level {bad} out of range for dimension {n}")));
    }
    let lambdas: Vec<f64> = result.times.iter().map(|&t| control.lambda_at(t)).collect();
    let frames = continue_frames(ham, &lambdas, &[])?;
    let energies: Vec<Vec<f64>> =
        frames.iter().map(|f| levels.iter().map(|&l| f.energies[l]).collect()).collect();
    let mut dyn_phase = vec![0.0; levels.len()];
    let mut g = Vec::with_capacity(frames.len());
    for (k, (frame, psi)) in frames.iter().zip(&result.states).enumerate() {
        if k > 0 {
            let dt = result.times[k] - result.times[k - 1];
            for i in 0..levels.len() {
                dyn_phase[i] += 0.5 * dt * (energies[k][i] + energies[k - 1][i]);
            }
        }
        let row = levels
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let overlap: C64 = frame
                    .vectors
                    .column(l)
                    .iter()
                    .zip(psi.iter())
                    .map(|(&v, &z)| z * v)
                    .sum();
                overlap * C64::from_polar(1.0, dyn_phase[i])
            })
            .collect();
        g.push(row);
    }
    Ok(AdiabaticProjection { times: result.times.clone(), levels: levels.to_vec(), g, energies })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub t_f: f64,
    pub population: f64,
}

/// Final populations against process duration. Points that fail are listed
/// separately and do not abort the sweep.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepCurve {
    pub points: Vec<SweepPoint>,
    pub failures: Vec<(f64, Error)>,
}

impl SweepCurve {
    pub fn t_f(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t_f).collect()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.population).collect()
    }
}

/// Evolve once for a given duration and read out `target`.
pub fn final_population_for(
    ham: &dyn ControlledHamiltonian,
    traj: &Arc<NormalizedTrajectory>,
    t_f: f64,
    start: StateLabel,
    target: StateLabel,
    policy: &StepPolicy,
) -> Result<f64> {
    let control = rescale(Arc::clone(traj), t_f)?;
    let psi0 = start.state_at(ham, control.lambda_at(0.0))?;
    let n_steps = policy.steps_for(ham, &control)?;
    let result = evolve(
        ham,
        &control,
        &psi0,
        EvolveOptions { n_steps: Some(n_steps), record_every: Some(n_steps) },
    )?;
    target.population(ham, control.lambda_at(t_f), result.final_state())
}

pub fn fidelity_sweep(
    ham: &dyn ControlledHamiltonian,
    traj: &Arc<NormalizedTrajectory>,
    durations: &[f64],
    start: StateLabel,
    target: StateLabel,
    policy: &StepPolicy,
) -> SweepCurve {
    let results: Vec<(f64, Result<f64>)> = durations
        .par_iter()
        .map(|&t_f| (t_f, final_population_for(ham, traj, t_f, start, target, policy)))
        .collect();
    let mut curve = SweepCurve::default();
    for (t_f, r) in results {
        match r {
            Ok(population) => curve.points.push(SweepPoint { t_f, population }),
            Err(e) => curve.failures.push((t_f, e)),
        }
    }
    curve
}

/// Local maxima of a sampled curve, as `(abscissa, value)`.
pub fn local_maxima(x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    (1..y.len().saturating_sub(1))
        .filter(|&k| y[k] > y[k - 1] && y[k] >= y[k + 1])
        .map(|k| (x[k], y[k]))
        .collect()
}

/// Local minima of a sampled curve, as `(abscissa, value)`.
pub fn local_minima(x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    (1..y.len().saturating_sub(1))
        .filter(|&k| y[k] < y[k - 1] && y[k] <= y[k + 1])
        .map(|k| (x[k], y[k]))
        .collect()
}

/// First abscissa at which `y` reaches `threshold`.
pub fn first_crossing(x: &[f64], y: &[f64], threshold: f64) -> Option<f64> {
    x.iter().zip(y).find(|(_, &v)| v >= threshold).map(|(&t, _)| t)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;
    use crate::protocol::{constant_protocol, linear_ramp};
    use std::f64::consts::{PI, SQRT_2};

    fn basis(n: usize, i: usize) -> DVector<C64> {
        let mut v = DVector::zeros(n);
        v[i] = C64::new(1.0, 0.0);
        v
    }

    #[test]
    fn vanishing_duration_keeps_state() {
        let spec = ModelSpec::two_level(22.3, 66.7, 0.0).unwrap();
        let ctl = rescale(Arc::new(linear_ramp(&spec)), 1e-12).unwrap();
        let r = evolve(&spec, &ctl, &basis(2, 1), EvolveOptions { n_steps: Some(1), record_every: None })
            .unwrap();
        assert!((r.final_population(1).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(r.times, vec![0.0, 1e-12]);
    }

    #[test]
    fn rabi_flop_at_resonance() {
        // H = [[0, -sqrt2], [-sqrt2, 0]]: |b1|^2 = sin^2(sqrt2 t)
        let spec = ModelSpec::two_level(22.3, 66.7, 0.0).unwrap();
        let traj = Arc::new(constant_protocol(22.3).unwrap());
        for (t, expect) in [(PI / (2.0 * SQRT_2), 1.0), (PI / SQRT_2, 0.0), (0.3, (SQRT_2 * 0.3).sin().powi(2))] {
            let ctl = rescale(traj.clone(), t).unwrap();
            let r = evolve(&spec, &ctl, &basis(2, 1), EvolveOptions::default()).unwrap();
            assert!((r.final_population(0).unwrap() - expect).abs() < 1e-12);
            assert!(r.norm_drift < 1e-12);
        }
    }

    #[test]
    fn constant_hamiltonian_preserves_eigen_populations() {
        let spec = ModelSpec::bose_hubbard3(22.3, 66.7, -66.7).unwrap();
        let traj = Arc::new(constant_protocol(5.0).unwrap());
        let ctl = rescale(traj, 3.0).unwrap();
        let psi0 = DVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8), C64::new(0.0, 0.0)]);
        let r = evolve(&spec, &ctl, &psi0, EvolveOptions { n_steps: Some(50), record_every: Some(5) }).unwrap();
        let before: Vec<f64> =
            (0..3).map(|m| StateLabel::Adiabatic(m).population(&spec, 5.0, &psi0).unwrap()).collect();
        for psi in &r.states {
            for m in 0..3 {
                let p = StateLabel::Adiabatic(m).population(&spec, 5.0, psi).unwrap();
                assert!((p - before[m]).abs() < 1e-12);
            }
        }
        assert_eq!(r.times.len(), 11);
        assert_eq!(*r.times.last().unwrap(), 3.0);
    }

    #[test]
    fn projection_starts_in_initial_eigenstate() {
        let spec = ModelSpec::two_level(22.3, 66.7, 0.0).unwrap();
        let ctl = rescale(Arc::new(linear_ramp(&spec)), 5.0).unwrap();
        let psi0 = StateLabel::Adiabatic(0).state_at(&spec, 66.7).unwrap();
        let r = evolve(&spec, &ctl, &psi0, EvolveOptions { n_steps: Some(4000), record_every: Some(10) })
            .unwrap();
        let proj = adiabatic_projection(&spec, &ctl, &r, &[0, 1]).unwrap();
        assert!((proj.g[0][0] - C64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(proj.g[0][1].norm() < 1e-14);
        for row in &proj.g {
            let total: f64 = row.iter().map(|z| z.norm_sqr()).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
        let w = proj.gap_phase(0, 1).unwrap();
        let w_rev = proj.gap_phase(1, 0).unwrap();
        assert_eq!(w[0], 0.0);
        for (a, b) in w.iter().zip(&w_rev) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn rejects_unnormalized_and_mismatched_states() {
        let spec = ModelSpec::two_level(22.3, 66.7, 0.0).unwrap();
        let ctl = rescale(Arc::new(linear_ramp(&spec)), 1.0).unwrap();
        let bad = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        assert!(evolve(&spec, &ctl, &bad, EvolveOptions::default()).is_err());
        assert!(evolve(&spec, &ctl, &basis(3, 0), EvolveOptions::default()).is_err());
    }

    #[test]
    fn extrema_helpers() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [0.0, 2.0, 1.0, 3.0, 0.5];
        assert_eq!(local_maxima(&x, &y), vec![(1.0, 2.0), (3.0, 3.0)]);
        assert_eq!(local_minima(&x, &y), vec![(2.0, 1.0)]);
        assert_eq!(first_crossing(&x, &y, 2.5), Some(3.0));
        assert_eq!(first_crossing(&x, &y, 5.0), None);
    }
}
