//! Tonks-Girardeau gas on the stirred ring.
//!
//! Under the Bose-Fermi mapping the many-body state is a Slater determinant
//! of the `N` lowest single-particle orbitals, each of which evolves under
//! the single-particle Hamiltonian. Overlaps of two such states reduce to
//! the determinant of the `N x N` orbital overlap matrix.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::dynamics::{propagate, StepPolicy};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::protocol::{rescale, NormalizedTrajectory, TimedControl};
use crate::spectral::{eigensystem, LevelPair};

pub const GRAM_TOLERANCE: f64 = 1e-8;

/// `N` single-particle orbitals (columns, plane-wave basis) at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitalStack {
    orbitals: DMatrix<C64>,
    t: f64,
}

impl OrbitalStack {
    /// Columns must be orthonormal to [`GRAM_TOLERANCE`].
    pub fn new(orbitals: DMatrix<C64>, t: f64) -> Result<Self> {
        let stack = Self { orbitals, t };
        let dev = stack.gram_deviation();
        if dev > GRAM_TOLERANCE {
            return Err(Error::InvalidInput(format!("orbitals not orthonormal (deviation {dev:e})")));
        }
        Ok(stack)
    }

    pub fn n_particles(&self) -> usize {
        self.orbitals.ncols()
    }

    pub fn orbitals(&self) -> &DMatrix<C64> {
        &self.orbitals
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// `max |<orbital_i|orbital_j> - delta_ij|`.
    pub fn gram_deviation(&self) -> f64 {
        let gram = self.orbitals.adjoint() * &self.orbitals;
        let mut dev = 0.0_f64;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let delta = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((gram[(i, j)] - delta).norm());
            }
        }
        dev
    }

    /// Keep the first `n` orbitals.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n_particles() {
            return Err(Error::InvalidInput(format!("cannot keep {n} of {} orbitals", self.n_particles())));
        }
        Ok(Self { orbitals: self.orbitals.columns(0, n).clone_owned(), t: self.t })
    }
}

fn check_ring(spec: &ModelSpec, n: usize) -> Result<()> {
    let ring = spec
        .ring_params()
        .ok_or_else(|| Error::InvalidInput(format!("{:?} model has no Tonks-Girardeau layer", spec.kind())))?;
    if n % 2 == 0 {
        return Err(Error::InvalidInput(format!("particle number must be odd, got {n}")));
    }
    if n > 2 * ring.cutoff - 1 {
        return Err(Error::InvalidInput(format!(
            "N = {n} needs cutoff K >= {}, got {}",
            n.div_ceil(2) + 1,
            ring.cutoff
        )));
    }
    Ok(())
}

/// The `n` lowest eigenvectors of `H(lambda)`.
pub fn ground_stack(spec: &ModelSpec, lambda: f64, n: usize) -> Result<OrbitalStack> {
    check_ring(spec, n)?;
    let (_, vecs) = eigensystem(&crate::model::ControlledHamiltonian::hamiltonian(spec, lambda)?)?;
    let orbitals = vecs.columns(0, n).map(|x| C64::new(x, 0.0));
    Ok(OrbitalStack { orbitals, t: 0.0 })
}

/// Ground state at the start of the stir (Omega = 0 for the built-in ring).
pub fn initial_stack(spec: &ModelSpec, n: usize) -> Result<OrbitalStack> {
    ground_stack(spec, spec.lambda_start(), n)
}

/// Ground state at the end of the stir (Omega = pi for the built-in ring).
pub fn target_stack(spec: &ModelSpec, n: usize) -> Result<OrbitalStack> {
    ground_stack(spec, spec.lambda_end(), n)
}

/// Design pair for `n` fermions: the highest occupied level and the one above.
pub fn design_pair(n: usize) -> Result<LevelPair> {
    LevelPair::highest_occupied(n)
}

fn policy_for(policy: &StepPolicy, n: usize) -> Result<StepPolicy> {
    let mut p = *policy;
    if p.pair.is_none() {
        p.pair = Some(design_pair(n)?);
    }
    Ok(p)
}

/// Evolve every orbital with the same single-particle propagator.
pub fn evolve_stack(
    spec: &ModelSpec,
    stack: &OrbitalStack,
    control: &TimedControl,
    policy: &StepPolicy,
) -> Result<OrbitalStack> {
    let n_steps = policy_for(policy, stack.n_particles())?.steps_for(spec, control)?;
    let mut orbitals = stack.orbitals.clone();
    let drift = propagate(spec, control, &mut orbitals, n_steps, |_, _, _| {})?;
    let out = OrbitalStack { orbitals, t: stack.t + control.t_f() };
    let dev = out.gram_deviation().max(drift);
    if dev > GRAM_TOLERANCE {
        return Err(Error::StepSizeTooCoarse { drift: dev });
    }
    Ok(out)
}

/// `|det A|`, `A_jk = <evolved_j|target_k>`.
pub fn tg_fidelity(evolved: &OrbitalStack, target: &OrbitalStack) -> Result<f64> {
    if evolved.orbitals.nrows() != target.orbitals.nrows() {
        return Err(Error::DimensionMismatch {
            expected: target.orbitals.nrows(),
            found: evolved.orbitals.nrows(),
        });
    }
    if evolved.n_particles() != target.n_particles() {
        return Err(Error::DimensionMismatch {
            expected: target.n_particles(),
            found: evolved.n_particles(),
        });
    }
    let overlap = evolved.orbitals.adjoint() * &target.orbitals;
    Ok(overlap.determinant().norm().min(1.0))
}

/// Many-body fidelity against a scanned parameter.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ManyBodyFidelityCurve {
    pub n_particles: usize,
    pub abscissa: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub failures: Vec<(f64, Error)>,
}

impl ManyBodyFidelityCurve {
    fn collect(n: usize, results: Vec<(f64, Result<f64>)>) -> Self {
        let mut curve = Self { n_particles: n, ..Self::default() };
        for (x, r) in results {
            match r {
                Ok(f) => {
                    curve.abscissa.push(x);
                    curve.fidelity.push(f);
                }
                Err(e) => curve.failures.push((x, e)),
            }
        }
        curve
    }

    pub fn at(&self, x: f64) -> Option<f64> {
        self.abscissa.iter().position(|&a| a == x).map(|k| self.fidelity[k])
    }
}

/// Fidelity after stirring for `t_f` with the control scaled by `1 + eps`.
pub fn fidelity_after(
    spec: &ModelSpec,
    n: usize,
    traj: &Arc<NormalizedTrajectory>,
    t_f: f64,
    eps: f64,
    policy: &StepPolicy,
) -> Result<f64> {
    let control = rescale(Arc::clone(traj), t_f)?.with_relative_error(eps)?;
    let (a, b) = (spec.lambda_start(), spec.lambda_end());
    let (lo, hi) = spec.admissible();
    let scaled = [a * (1.0 + eps), b * (1.0 + eps)];
    let widened = spec.with_admissible(
        scaled.iter().fold(lo, |m, &v| m.min(v)),
        scaled.iter().fold(hi, |m, &v| m.max(v)),
    )?;
    let start = initial_stack(&widened, n)?;
    let target = target_stack(&widened, n)?;
    let evolved = evolve_stack(&widened, &start, &control, policy)?;
    tg_fidelity(&evolved, &target)
}

pub fn tf_sweep(
    spec: &ModelSpec,
    n: usize,
    traj: &Arc<NormalizedTrajectory>,
    durations: &[f64],
    policy: &StepPolicy,
) -> Result<ManyBodyFidelityCurve> {
    check_ring(spec, n)?;
    let results = durations
        .par_iter()
        .map(|&t_f| (t_f, fidelity_after(spec, n, traj, t_f, 0.0, policy)))
        .collect();
    Ok(ManyBodyFidelityCurve::collect(n, results))
}

pub fn epsilon_sweep(
    spec: &ModelSpec,
    n: usize,
    traj: &Arc<NormalizedTrajectory>,
    t_f: f64,
    epsilons: &[f64],
    policy: &StepPolicy,
) -> Result<ManyBodyFidelityCurve> {
    check_ring(spec, n)?;
    let results = epsilons
        .par_iter()
        .map(|&eps| (eps, fidelity_after(spec, n, traj, t_f, eps, policy)))
        .collect();
    Ok(ManyBodyFidelityCurve::collect(n, results))
}

/// First duration in the doubling sequence `start, 2 start, ...` (at most
/// `max_doublings` doublings) whose fidelity reaches `threshold`.
pub fn plateau_time(
    spec: &ModelSpec,
    n: usize,
    traj: &Arc<NormalizedTrajectory>,
    threshold: f64,
    start: f64,
    max_doublings: usize,
    policy: &StepPolicy,
) -> Result<Option<(f64, f64)>> {
    let mut t_f = start;
    for _ in 0..=max_doublings {
        let f = fidelity_after(spec, n, traj, t_f, 0.0, policy)?;
        if f >= threshold {
            return Ok(Some((t_f, f)));
        }
        t_f *= 2.0;
    }
    Ok(None)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{constant_protocol, linear_ramp};

    #[test]
    fn free_ring_ground_stack_is_plane_waves() {
        let spec = ModelSpec::ring(0.0, 5).unwrap();
        let stack = initial_stack(&spec, 3).unwrap();
        // basis index K + k holds plane wave k
        let weight = |col: usize, k: i64| stack.orbitals()[((5 + k) as usize, col)].norm_sqr();
        assert!((weight(0, 0) - 1.0).abs() < 1e-12);
        let pm1: f64 = (1..3).map(|c| weight(c, 1) + weight(c, -1)).sum();
        assert!((pm1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn stack_validation() {
        let spec = ModelSpec::ring(0.5, 4).unwrap();
        assert!(initial_stack(&spec, 2).is_err());
        assert!(initial_stack(&spec, 9).is_err());
        assert!(initial_stack(&spec, 7).is_ok());
        let two = ModelSpec::two_level(22.3, 66.7, 0.0).unwrap();
        assert!(initial_stack(&two, 1).is_err());
        let stack = initial_stack(&spec, 3).unwrap();
        assert!(stack.gram_deviation() < 1e-12);
        assert!(OrbitalStack::new(stack.orbitals().map(|z| z * 2.0), 0.0).is_err());
    }

    #[test]
    fn fidelity_of_identical_and_orthogonal_stacks() {
        let spec = ModelSpec::ring(0.5, 6).unwrap();
        let a = initial_stack(&spec, 3).unwrap();
        assert!((tg_fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let mut orbitals = a.orbitals().clone();
        let (_, vecs) = eigensystem(&crate::model::ControlledHamiltonian::hamiltonian(&spec, 0.0).unwrap())
            .unwrap();
        orbitals.set_column(1, &vecs.column(5).map(|x| C64::new(x, 0.0)));
        let b = OrbitalStack::new(orbitals, 0.0).unwrap();
        assert!(tg_fidelity(&b, &a).unwrap() < 1e-12);
        assert!(tg_fidelity(&a.truncate(1).unwrap(), &a).is_err());
    }

    #[test]
    fn frozen_control_only_rotates_phases() {
        let spec = ModelSpec::ring(0.5, 6).unwrap();
        let traj = Arc::new(constant_protocol(0.0).unwrap());
        let ctl = rescale(traj, 7.0).unwrap();
        let a = initial_stack(&spec, 3).unwrap();
        let b = evolve_stack(&spec, &a, &ctl, &StepPolicy::fixed(10)).unwrap();
        assert!((tg_fidelity(&b, &a).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(b.time(), 7.0);
    }

    #[test]
    fn frozen_epsilon_gives_static_overlap() {
        let spec = ModelSpec::ring(0.5, 6).unwrap();
        let traj = Arc::new(linear_ramp(&spec));
        let f = fidelity_after(&spec, 3, &traj, 2.0, -1.0, &StepPolicy::fixed(20)).unwrap();
        let direct = tg_fidelity(&initial_stack(&spec, 3).unwrap(), &target_stack(&spec, 3).unwrap()).unwrap();
        assert!((f - direct).abs() < 1e-12);

    }
}
