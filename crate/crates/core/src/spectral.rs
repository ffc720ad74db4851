//! Instantaneous eigenbasis along a control path, with continuous eigenvector
//! signs and off-diagonal Hellmann-Feynman couplings.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ControlledHamiltonian;

/// Two instantaneous levels, zero-based and ordered by energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LevelPair {
    pub lower: usize,
    pub upper: usize,
}

impl LevelPair {
    pub fn new(lower: usize, upper: usize) -> Result<Self> {
        if lower >= upper {
            return Err(Error::InvalidInput(format!(
                "level pair must satisfy lower < upper, got ({lower}, {upper})"
            )));
        }
        Ok(Self { lower, upper })
    }

    /// Ground state and first excited state.
    pub const fn ground() -> Self {
        Self { lower: 0, upper: 1 }
    }

    /// The pair (N, N+1) in one-based level labels, i.e. the highest
    /// occupied single-particle level and the one above it.
    pub fn highest_occupied(n_particles: usize) -> Result<Self> {
        if n_particles == 0 {
            return Err(Error::InvalidInput("particle number must be positive".into()));
        }
        Self::new(n_particles - 1, n_particles)
    }
}

/// Eigenvalues in ascending order and orthonormal eigenvectors as columns.
/// Each column is signed so that its largest-magnitude entry is positive.
pub fn eigensystem(h: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch { expected: h.nrows(), found: h.ncols() });
    }
    let asym = (h - h.transpose()).amax();
    if asym > 1e-12 * h.amax().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    let eig = h.clone().symmetric_eigen();
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).clone_owned();
        let pivot = v.iamax();
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(col, &v);
    }
    Ok((energies, vectors))
}

/// Spectral data at a single control value.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFrame {
    pub lambda: f64,
    pub energies: DVector<f64>,
    pub vectors: DMatrix<f64>,
    couplings: BTreeMap<LevelPair, f64>,
}

impl SpectralFrame {
    /// `<phi_i | d phi_j / d lambda>`; zero on the diagonal, `None` for pairs
    /// that were not requested.
    pub fn coupling(&self, i: usize, j: usize) -> Option<f64> {
        if i == j {
            return Some(0.0);
        }
        let (key, sign) = if i < j {
            (LevelPair { lower: i, upper: j }, 1.0)
        } else {
            (LevelPair { lower: j, upper: i }, -1.0)
        };
        self.couplings.get(&key).map(|c| sign * c)
    }

    pub fn gap(&self, pair: LevelPair) -> f64 {
        self.energies[pair.upper] - self.energies[pair.lower]
    }

    pub fn vector(&self, level: usize) -> DVector<f64> {
        self.vectors.column(level).clone_owned()
    }
}

fn compute_couplings(
    ham: &dyn ControlledHamiltonian,
    lambda: f64,
    energies: &DVector<f64>,
    vectors: &DMatrix<f64>,
    pairs: &[LevelPair],
) -> Result<BTreeMap<LevelPair, f64>> {
    let mut out = BTreeMap::new();
    if pairs.is_empty() {
        return Ok(out);
    }
    let n = energies.len();
    let range = (energies[n - 1] - energies[0]).abs();
    let scale = if range > 0.0 { range } else { 1.0 };
    let dh = ham.d_hamiltonian(lambda)?;
    for &p in pairs {
        if p.upper >= n {
            return Err(Error::InvalidInput(format!(
                "level {} requested in a {n}-dimensional space",
                p.upper
            )));
        }
        let gap = energies[p.upper] - energies[p.lower];
        if gap.abs() < 1e-12 * scale {
            return Err(Error::DegenerateGap { lambda, lower: p.lower, upper: p.upper });
        }
        let dv = &dh * vectors.column(p.upper);
        out.insert(p, vectors.column(p.lower).dot(&dv) / gap);
    }
    Ok(out)
}

/// Frame at `lambda` with canonical eigenvector signs.
pub fn frame_at(
    ham: &dyn ControlledHamiltonian,
    lambda: f64,
    pairs: &[LevelPair],
) -> Result<SpectralFrame> {
    let (energies, vectors) = eigensystem(&ham.hamiltonian(lambda)?)?;
    let couplings = compute_couplings(ham, lambda, &energies, &vectors, pairs)?;
    Ok(SpectralFrame { lambda, energies, vectors, couplings })
}

/// Frames along an arbitrary sequence of control values. The first frame has
/// canonical signs; every later eigenvector is flipped to have positive
/// overlap with its predecessor.
pub fn continue_frames(
    ham: &dyn ControlledHamiltonian,
    lambdas: &[f64],
    pairs: &[LevelPair],
) -> Result<Vec<SpectralFrame>> {
    let mut frames: Vec<SpectralFrame> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let (energies, mut vectors) = eigensystem(&ham.hamiltonian(lambda)?)?;
        if let Some(prev) = frames.last() {
            for n in 0..vectors.ncols() {
                if prev.vectors.column(n).dot(&vectors.column(n)) < 0.0 {
                    vectors.column_mut(n).neg_mut();
                }
            }
        }
        let couplings = compute_couplings(ham, lambda, &energies, &vectors, pairs)?;
        frames.push(SpectralFrame { lambda, energies, vectors, couplings });
    }
    Ok(frames)
}

/// Sign-continuous frames on a strictly monotone control grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTrack {
    pub grid: Vec<f64>,
    pub frames: Vec<SpectralFrame>,
}

impl FrameTrack {
    pub fn gaps(&self, pair: LevelPair) -> Vec<f64> {
        self.frames.iter().map(|f| f.gap(pair)).collect()
    }

    pub fn couplings(&self, pair: LevelPair) -> Vec<f64> {
        self.frames
            .iter()
            .map(|f| f.coupling(pair.lower, pair.upper).unwrap_or(f64::NAN))
            .collect()
    }
}

pub fn track_frames(
    ham: &dyn ControlledHamiltonian,
    grid: &[f64],
    pairs: &[LevelPair],
) -> Result<FrameTrack> {
    if grid.len() < 2 {
        return Err(Error::InvalidInput("a frame track needs at least two grid points".into()));
    }
    let increasing = grid[1] > grid[0];
    let monotone = grid
        .windows(2)
        .all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] });
    if !monotone {
        return Err(Error::InvalidInput("tracking grid must be strictly monotone".into()));
    }
    let frames = continue_frames(ham, grid, pairs)?;
    Ok(FrameTrack { grid: grid.to_vec(), frames })
}
