//! Reference computations shared by the oracle and acceptance targets.

#![allow(dead_code)]

use std::sync::Arc;

use faquad::dynamics::{final_population_for, StateLabel, StepPolicy};
use faquad::protocol::constant_protocol;
use faquad::spectral::eigensystem;
use faquad::{ControlledHamiltonian, ModelSpec};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// `<phi_i | d phi_j / d lambda>` by centered differences of sign-aligned
/// eigenvectors.
pub fn fd_coupling(ham: &dyn ControlledHamiltonian, lambda: f64, i: usize, j: usize, h: f64) -> f64 {
    let (_, v0) = eigensystem(&ham.hamiltonian(lambda).unwrap()).unwrap();
    let aligned = |l: f64| {
        let (_, v) = eigensystem(&ham.hamiltonian(l).unwrap()).unwrap();
        let mut col = v.column(j).clone_owned();
        if col.dot(&v0.column(j)) < 0.0 {
            col.neg_mut();
        }
        col
    };
    let d = (aligned(lambda + h) - aligned(lambda - h)) / (2.0 * h);
    v0.column(i).dot(&d)
}

/// Maximum of a unimodal function on `[a, b]` by golden-section search.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    while b - a > tol {
        let (x1, x2) = (b - g * (b - a), a + g * (b - a));
        if f(x1) > f(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// First full transfer `|2> -> |1>` under the resonant constant bias, as
/// `(duration, population)`.
pub fn pi_pulse_time() -> (f64, f64) {
    let spec = ModelSpec::two_level(22.3, 66.7, 0.0).unwrap();
    let traj = Arc::new(constant_protocol(22.3).unwrap());
    let pop = |t: f64| {
        final_population_for(&spec, &traj, t, StateLabel::Bare(1), StateLabel::Bare(0), &StepPolicy::default())
            .unwrap()
    };
    golden_max(pop, 0.5, 1.5, 1e-7)
}

pub fn det3(m: [[C64; 3]; 3]) -> C64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Amplitudes of the Slater determinant on every occupation `i < j < k`.
pub fn fock_amplitudes(orbitals: &DMatrix<C64>) -> Vec<C64> {
    let m = orbitals.nrows();
    let mut out = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            for k in j + 1..m {
                let rows = [i, j, k];
                let mut a = [[C64::new(0.0, 0.0); 3]; 3];
                for (r, &row) in rows.iter().enumerate() {
                    for c in 0..3 {
                        a[r][c] = orbitals[(row, c)];
                    }
                }
                out.push(det3(a));
            }
        }
    }
    out
}
