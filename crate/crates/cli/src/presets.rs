//! Built-in experiments reproducing the standard figures.

use std::f64::consts::PI;

use faquad::model::DeltaCoupling;
use faquad::ProtocolKind;

use crate::config::{ExperimentConfig, IntegratorConfig, ModelConfig, ProtocolConfig, SweepRange};
use crate::run::Command;

#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    /// Subdirectory of the preset output; empty for single-job presets.
    pub name: &'static str,
    pub command: Command,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub jobs: Vec<Job>,
}

fn protocols(kinds: &[ProtocolKind]) -> Vec<ProtocolConfig> {
    kinds.iter().map(|&k| ProtocolConfig::of_kind(k)).collect()
}

fn two_level() -> ModelConfig {
    ModelConfig::TwoLevel { u: 22.3, j: 1.0, delta_start: 66.7, delta_end: 0.0 }
}

fn ring(u0: f64, cutoff: usize) -> ModelConfig {
    ModelConfig::Ring { u0, cutoff, coupling: DeltaCoupling::Renormalized, omega_start: 0.0, omega_end: PI }
}

/// Many-body sweeps integrate 41 x 41 systems at 50 steps per period of
/// the design gap; both settings are converged to about 1e-6 in fidelity.
fn tg_integrator() -> IntegratorConfig {
    IntegratorConfig { steps_per_period: 50.0, ..IntegratorConfig::default() }
}

const TG_CUTOFF: usize = 20;

pub fn builtin_figures() -> Vec<Preset> {
    use ProtocolKind::*;
    let mut fig1b = ExperimentConfig::new(two_level());
    let mut constant = ProtocolConfig::of_kind(Constant);
    constant.value = Some(22.3);
    fig1b.protocols = vec![ProtocolConfig::of_kind(Faquad), ProtocolConfig::of_kind(Linear), constant];
    fig1b.tf_sweep = Some(SweepRange { from: 0.02, to: 10.0, count: 500 });

    let mut fig1d = ExperimentConfig::new(two_level());
    fig1d.protocols = protocols(&[Faquad, LocalAdiabatic, UniformAdiabatic]);
    fig1d.tf_sweep = Some(SweepRange { from: 0.02, to: 10.0, count: 500 });

    let mut fig3b = ExperimentConfig::new(ModelConfig::BoseHubbard3 {
        u: 33.45,
        j: 1.0,
        delta_start: 100.0,
        delta_end: 0.0,
    });
    fig3b.protocols = protocols(&[Faquad, Linear]);
    fig3b.tf_sweep = Some(SweepRange { from: 0.1, to: 50.0, count: 500 });

    let mut fig4b = ExperimentConfig::new(ModelConfig::BoseHubbard3 {
        u: 22.3,
        j: 1.0,
        delta_start: 66.7,
        delta_end: -66.7,
    });
    fig4b.protocols = protocols(&[Faquad, Linear]);
    fig4b.tf_sweep = Some(SweepRange { from: 0.1, to: 80.0, count: 500 });

    let spectrum = |u0: f64| {
        let mut c = ExperimentConfig::new(ring(u0, faquad::model::RingParams::DEFAULT_CUTOFF));
        c.spectrum.levels = Some(9);
        c
    };

    let mut fig5b = ExperimentConfig::new(ring(0.5, faquad::model::RingParams::DEFAULT_CUTOFF));
    fig5b.particles = vec![1, 3, 5, 7, 9];

    let mut fig6a = ExperimentConfig::new(ring(0.5, TG_CUTOFF));
    fig6a.protocols = protocols(&[Faquad, Linear]);
    fig6a.particles = vec![3, 9];
    fig6a.tf_sweep = Some(SweepRange { from: 2.0, to: 120.0, count: 60 });
    fig6a.integrator = tg_integrator();

    let mut fig6b = ExperimentConfig::new(ring(0.5, TG_CUTOFF));
    fig6b.particles = vec![3, 9];
    fig6b.epsilon_sweep = Some(SweepRange { from: -0.1, to: 0.1, count: 41 });
    fig6b.integrator = tg_integrator();

    let single = |command, config| vec![Job { name: "", command, config }];
    vec![
        Preset {
            name: "fig1b",
            description: "two-level: FAQUAD, linear ramp and pi-pulse, final population vs duration",
            jobs: single(Command::SweepTf, fig1b),
        },
        Preset {
            name: "fig1d",
            description: "two-level: FAQUAD, local and uniform adiabatic, final population vs duration",
            jobs: single(Command::SweepTf, fig1d),
        },
        Preset {
            name: "fig3b",
            description: "Bose-Hubbard splitting: FAQUAD and linear ramp vs duration",
            jobs: single(Command::SweepTf, fig3b),
        },
        Preset {
            name: "fig4b",
            description: "Bose-Hubbard cotunneling: FAQUAD and linear ramp vs duration",
            jobs: single(Command::SweepTf, fig4b),
        },
        Preset {
            name: "fig5a",
            description: "ring single-particle spectrum for u0 = 0 and u0 = 4",
            jobs: vec![
                Job { name: "u0-0", command: Command::Spectrum, config: spectrum(0.0) },
                Job { name: "u0-4", command: Command::Spectrum, config: spectrum(4.0) },
            ],
        },
        Preset {
            name: "fig5b",
            description: "ring FAQUAD schedules for N = 1, 3, 5, 7, 9",
            jobs: single(Command::Design, fig5b),
        },
        Preset {
            name: "fig6a",
            description: "Tonks-Girardeau fidelity vs duration, FAQUAD and linear, N = 3 and 9",
            jobs: single(Command::SweepTf, fig6a),
        },
        Preset {
            name: "fig6b",
            description: "Tonks-Girardeau fidelity vs relative control error, N = 3 and 9",
            jobs: single(Command::SweepEps, fig6b),
        },
    ]
}

pub fn preset(name: &str) -> Option<Preset> {
    builtin_figures().into_iter().find(|p| p.name == name)
}
