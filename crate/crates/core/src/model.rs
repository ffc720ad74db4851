//! Hamiltonian families driven by a single scalar control.
//!
//! Units: hbar = 1. The two-mode and Bose-Hubbard models measure energy in
//! units of the hopping J (so times are `J t / hbar`); the ring measures energy
//! in `E0 = 2 pi^2 hbar^2 / (M L^2)` and its control is the dimensionless
//! stirring phase Omega.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::hurwitz_zeta;

/// A real-symmetric Hamiltonian `H(lambda)` with an analytic control derivative.
pub trait ControlledHamiltonian: Sync {
    fn dim(&self) -> usize;
    fn hamiltonian(&self, lambda: f64) -> Result<DMatrix<f64>>;
    fn d_hamiltonian(&self, lambda: f64) -> Result<DMatrix<f64>>;
    /// Control values at the start and the end of the sweep.
    fn boundary(&self) -> (f64, f64);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    TwoLevel,
    BoseHubbard3,
    Ring,
}

/// `H = [[0, -sqrt2 J], [-sqrt2 J, U - Delta]]`, control `Delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelParams {
    pub u: f64,
    pub j: f64,
}

/// Two bosons on two sites in the basis |2,0>, |1,1>, |0,2>, control `Delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoseHubbard3Params {
    pub u: f64,
    pub j: f64,
}

/// How the plane-wave matrix element of the delta barrier is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaCoupling {
    /// `U0 / L` between every pair of retained plane waves.
    Bare,
    /// Coupling rescaled so the truncated secular equation carries the
    /// discarded plane-wave tail (evaluated at zero energy). Removes the
    /// 1/K truncation error of the bare coupling.
    #[default]
    Renormalized,
}

/// Stirred ring in a co-moving frame, plane waves `k = -K..=K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingParams {
    /// Dimensionless barrier strength `U0 M L / hbar^2`.
    pub u0: f64,
    /// Plane-wave cutoff K.
    pub cutoff: usize,
    #[serde(default)]
    pub coupling: DeltaCoupling,
}

impl RingParams {
    pub const DEFAULT_CUTOFF: usize = 40;

    pub fn new(u0: f64, cutoff: usize) -> Self {
        Self { u0, cutoff, coupling: DeltaCoupling::default() }
    }

    /// Barrier matrix element in units of E0, and its derivative with respect
    /// to Omega.
    fn coupling_at(&self, omega: f64) -> (f64, f64) {
        let bare = self.u0 / (2.0 * PI * PI);
        if self.u0 == 0.0 || self.coupling == DeltaCoupling::Bare {
            return (bare, 0.0);
        }
        let a = omega / (2.0 * PI);
        let q = self.cutoff as f64 + 1.0;
        let tail = hurwitz_zeta(2, q - a) + hurwitz_zeta(2, q + a);
        let dtail_da = 2.0 * hurwitz_zeta(3, q - a) - 2.0 * hurwitz_zeta(3, q + a);
        let v = 1.0 / (1.0 / bare + tail);
        (v, -v * v * dtail_da / (2.0 * PI))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    TwoLevel(TwoLevelParams),
    BoseHubbard3(BoseHubbard3Params),
    Ring(RingParams),
}

/// A Hamiltonian family together with the sweep boundary values of its control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    params: ModelParams,
    lambda_start: f64,
    lambda_end: f64,
    admissible: (f64, f64),
}

impl ModelSpec {
    pub fn new(params: ModelParams, lambda_start: f64, lambda_end: f64) -> Result<Self> {
        if !lambda_start.is_finite() || !lambda_end.is_finite() {
            return Err(Error::InvalidInput("boundary control values must be finite".into()));
        }
        if lambda_start == lambda_end {
            return Err(Error::InvalidInput(
                "lambda_start and lambda_end must differ for a sweep".into(),
            ));
        }
        match params {
            ModelParams::TwoLevel(TwoLevelParams { u, j })
            | ModelParams::BoseHubbard3(BoseHubbard3Params { u, j }) => {
                if !(u > 0.0 && u.is_finite()) {
                    return Err(Error::InvalidInput(format!("U must be positive, got {u}")));
                }
                if !(j > 0.0 && j.is_finite()) {
                    return Err(Error::InvalidInput(format!("J must be positive, got {j}")));
                }
            }
            ModelParams::Ring(r) => {
                if !(r.u0 >= 0.0 && r.u0.is_finite()) {
                    return Err(Error::InvalidInput(format!("u0 must be >= 0, got {}", r.u0)));
                }
                if r.cutoff == 0 {
                    return Err(Error::InvalidInput("ring cutoff K must be >= 1".into()));
                }
            }
        }
        let lo = lambda_start.min(lambda_end);
        let hi = lambda_start.max(lambda_end);
        Ok(Self { params, lambda_start, lambda_end, admissible: (lo, hi) })
    }

    pub fn two_level(u: f64, delta_start: f64, delta_end: f64) -> Result<Self> {
        Self::new(ModelParams::TwoLevel(TwoLevelParams { u, j: 1.0 }), delta_start, delta_end)
    }

    pub fn bose_hubbard3(u: f64, delta_start: f64, delta_end: f64) -> Result<Self> {
        Self::new(ModelParams::BoseHubbard3(BoseHubbard3Params { u, j: 1.0 }), delta_start, delta_end)
    }

    /// Ring stirred from Omega = 0 to Omega = pi.
    pub fn ring(u0: f64, cutoff: usize) -> Result<Self> {
        Self::new(ModelParams::Ring(RingParams::new(u0, cutoff)), 0.0, PI)
    }

    /// Replace the admissible control interval (defaults to the hull of the
    /// boundary values).
    pub fn with_admissible(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidInput(format!("bad admissible interval [{lo}, {hi}]")));
        }
        self.admissible = (lo, hi);
        Ok(self)
    }

    pub fn with_boundary(self, lambda_start: f64, lambda_end: f64) -> Result<Self> {
        Self::new(self.params, lambda_start, lambda_end)
    }

    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::TwoLevel(_) => ModelKind::TwoLevel,
            ModelParams::BoseHubbard3(_) => ModelKind::BoseHubbard3,
            ModelParams::Ring(_) => ModelKind::Ring,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn ring_params(&self) -> Option<&RingParams> {
        match &self.params {
            ModelParams::Ring(r) => Some(r),
            _ => None,
        }
    }

    pub fn lambda_start(&self) -> f64 {
        self.lambda_start
    }

    pub fn lambda_end(&self) -> f64 {
        self.lambda_end
    }

    pub fn admissible(&self) -> (f64, f64) {
        self.admissible
    }

    fn check(&self, lambda: f64) -> Result<()> {
        if !lambda.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite control value {lambda}")));
        }
        let (lo, hi) = self.admissible;
        let slack = 1e-12 * (hi - lo).abs().max(1.0);
        if lambda < lo - slack || lambda > hi + slack {
            return Err(Error::OutOfRange { lambda, lo, hi });
        }
        Ok(())
    }
}

impl ControlledHamiltonian for ModelSpec {
    fn dim(&self) -> usize {
        match self.params {
            ModelParams::TwoLevel(_) => 2,
            ModelParams::BoseHubbard3(_) => 3,
            ModelParams::Ring(r) => 2 * r.cutoff + 1,
        }
    }

    fn hamiltonian(&self, lambda: f64) -> Result<DMatrix<f64>> {
        self.check(lambda)?;
        Ok(match self.params {
            ModelParams::TwoLevel(p) => {
                let t = -SQRT_2 * p.j;
                DMatrix::from_row_slice(2, 2, &[0.0, t, t, p.u - lambda])
            }
            ModelParams::BoseHubbard3(p) => {
                let t = -SQRT_2 * p.j;
                DMatrix::from_row_slice(
                    3,
                    3,
                    &[p.u + lambda, t, 0.0, t, 0.0, t, 0.0, t, p.u - lambda],
                )
            }
            ModelParams::Ring(r) => {
                let n = 2 * r.cutoff + 1;
                let shift = lambda / (2.0 * PI);
                let (v, _) = r.coupling_at(lambda);
                let mut h = DMatrix::from_element(n, n, v);
                for i in 0..n {
                    let k = i as f64 - r.cutoff as f64;
                    h[(i, i)] += (k - shift).powi(2);
                }
                h
            }
        })
    }

    fn d_hamiltonian(&self, lambda: f64) -> Result<DMatrix<f64>> {
        self.check(lambda)?;
        Ok(match self.params {
            ModelParams::TwoLevel(_) => DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, -1.0])),
            ModelParams::BoseHubbard3(_) => DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, -1.0])),
            ModelParams::Ring(r) => {
                let n = 2 * r.cutoff + 1;
                let shift = lambda / (2.0 * PI);
                let (_, dv) = r.coupling_at(lambda);
                let mut h = DMatrix::from_element(n, n, dv);
                for i in 0..n {
                    let k = i as f64 - r.cutoff as f64;
                    h[(i, i)] += -(k - shift) / PI;
                }
                h
            }
        })
    }

    fn boundary(&self) -> (f64, f64) {
        (self.lambda_start, self.lambda_end)
    }
}

/// One solution of the ring's transcendental eigenvalue condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingRoot {
    /// Non-negative root alpha; the energy is `alpha^2` in units of E0.
    pub alpha: f64,
    pub energy: f64,
    /// Index of the cotangent branch (interval between consecutive poles)
    /// the root was found in, counted from the origin.
    pub branch: usize,
}

/// Roots of `4 pi alpha / u0 = cot(pi alpha - Omega/2) + cot(pi alpha + Omega/2)`,
/// one per cotangent branch, ordered by energy `E0 alpha^2`.
///
/// Where two poles coincide (Omega = 0 or pi) the states odd about the barrier
/// sit exactly on the pole and are returned there. For `u0 = 0` the free
/// values `|n - Omega / 2 pi|` are returned.
pub fn ring_alpha_roots(omega: f64, u0: f64, count: usize) -> Result<Vec<RingRoot>> {
    if !omega.is_finite() || !u0.is_finite() || u0 < 0.0 {
        return Err(Error::InvalidInput(format!("bad ring parameters omega={omega}, u0={u0}")));
    }
    let a = omega / (2.0 * PI);
    let m_max = count as i64 / 2 + 3;
    if u0 == 0.0 {
        let mut alphas: Vec<f64> = (-m_max..=m_max).map(|n| (n as f64 - a).abs()).collect();
        alphas.sort_by(f64::total_cmp);
        return Ok(alphas
            .into_iter()
            .take(count)
            .enumerate()
            .map(|(branch, alpha)| RingRoot { alpha, energy: alpha * alpha, branch })
            .collect());
    }

    // poles of the cotangent pair on alpha > 0, merged when they coincide
    let mut poles: Vec<f64> = (-m_max..=m_max)
        .flat_map(|m| [m as f64 - a, m as f64 + a])
        .filter(|p| *p > 1e-12)
        .collect();
    poles.sort_by(f64::total_cmp);
    let mut merged: Vec<(f64, bool)> = Vec::new();
    for p in poles {
        match merged.last_mut() {
            Some((q, double)) if (p - *q).abs() < 1e-12 => *double = true,
            _ => merged.push((p, false)),
        }
    }

    let f = |x: f64| {
        let t1 = (PI * x - omega / 2.0).tan();
        let t2 = (PI * x + omega / 2.0).tan();
        1.0 / t1 + 1.0 / t2 - 4.0 * PI * x / u0
    };

    let mut roots = Vec::new();
    // (0, first pole): f(0) = 0 and f is strictly decreasing, no root there
    // unless 0 is itself a pole (Omega = 0), in which case it was filtered and
    // the first interval starts at the origin.
    let mut left = ((a - a.round()).abs() < 1e-12).then_some(0.0);
    for (branch, &(pole, double)) in merged.iter().enumerate() {
        if let Some(lo) = left {
            roots.push(bisect_branch(&f, lo, pole, branch)?);
        }
        if double {
            roots.push(RingRoot { alpha: pole, energy: pole * pole, branch });
        }
        left = Some(pole);
    }
    roots.sort_by(|x, y| x.energy.total_cmp(&y.energy));
    if roots.len() < count {
        return Err(Error::RootNotBracketed { branch: roots.len() });
    }
    roots.truncate(count);
    Ok(roots)
}

// f decreases from +inf to -inf between consecutive poles.
fn bisect_branch(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, branch: usize) -> Result<RingRoot> {
    let width = hi - lo;
    let mut a = lo + 1e-13 * width.max(1e-3);
    let mut b = hi - 1e-13 * width.max(1e-3);
    let (fa, fb) = (f(a), f(b));
    if !(fa > 0.0 && fb < 0.0) {
        return Err(Error::RootNotBracketed { branch });
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if f(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let alpha = 0.5 * (a + b);
    Ok(RingRoot { alpha, energy: alpha * alpha, branch })
}
