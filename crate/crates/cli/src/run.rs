//! Execution of one experiment: design, simulate, write artifacts.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use faquad::dynamics::{
    adiabatic_projection, evolve, fidelity_sweep, local_maxima, EvolveOptions, StateLabel,
};
use faquad::model::ControlledHamiltonian;
use faquad::perturbation::{phase_integral, PerturbationPrediction};
use faquad::protocol::{constant_protocol, default_grid, design, linear_ramp, rescale};
use faquad::spectral::eigensystem;
use faquad::numeric::linspace;
use faquad::{tg, LevelPair, ModelSpec, NormalizedTrajectory, ProtocolKind};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, LevelLabel, ProtocolConfig};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Design,
    Spectrum,
    Evolve,
    SweepTf,
    SweepEps,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Design => "design",
            Self::Spectrum => "spectrum",
            Self::Evolve => "evolve",
            Self::SweepTf => "sweep-tf",
            Self::SweepEps => "sweep-eps",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolSummary {
    pub label: String,
    pub kind: ProtocolKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub particles: Option<usize>,
    /// One-based design pair.
    pub pair: [usize; 2],
    pub c_tilde: Option<f64>,
    pub phi: Option<f64>,
    pub period: Option<f64>,
    pub approximate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureRecord {
    pub label: String,
    pub abscissa: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub protocols: Vec<ProtocolSummary>,
    pub results: Value,
    pub artifacts: Vec<String>,
    pub failures: Vec<FailureRecord>,
    /// True when every requested point failed.
    pub total_failure: bool,
    pub wall_time_seconds: f64,
}

struct Resolved {
    label: String,
    base: String,
    particles: Option<usize>,
    pair: LevelPair,
    traj: Arc<NormalizedTrajectory>,
}

fn sci(x: f64) -> String {
    format!("{x:.12e}")
}

struct Writer<'a> {
    dir: &'a Path,
    artifacts: Vec<String>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }
}

/// Bare basis state carrying most of the ground state at `lambda`.
fn dominant_bare_state(spec: &ModelSpec, lambda: f64) -> Result<usize, CliError> {
    let (_, vecs) = eigensystem(&spec.hamiltonian(lambda)?)?;
    let ground = vecs.column(0);
    Ok(ground.iamax() + 1)
}

fn load_table(path: &Path, index: usize) -> Result<NormalizedTrajectory, CliError> {
    let field = format!("protocols[{index}].table");
    let file = fs::File::open(path).map_err(|e| CliError::config(&field, format!("{}: {e}", path.display())))?;
    NormalizedTrajectory::read_csv(file).map_err(|e| CliError::config(field, e.to_string()))
}

fn build_trajectory(
    spec: &ModelSpec,
    protocol: &ProtocolConfig,
    index: usize,
    pair: LevelPair,
) -> Result<NormalizedTrajectory, CliError> {
    Ok(match protocol.kind {
        ProtocolKind::Linear => linear_ramp(spec),
        ProtocolKind::Constant => constant_protocol(protocol.value.unwrap_or_default())?,
        ProtocolKind::Tabulated => {
            let path = protocol.table.as_deref().expect("validated");
            load_table(path, index)?
        }
        kind => design(spec, kind, pair, &default_grid(spec, protocol.grid_points))?,
    })
}

fn resolve(
    config: &ExperimentConfig,
    spec: &ModelSpec,
) -> Result<(Vec<Resolved>, Vec<ProtocolSummary>), CliError> {
    let particle_sets: Vec<Option<usize>> = if config.model.is_ring() {
        config.particle_numbers().into_iter().map(Some).collect()
    } else {
        vec![None]
    };
    let mut resolved = Vec::new();
    let mut summaries = Vec::new();
    for (i, protocol) in config.protocols.iter().enumerate() {
        for &n in &particle_sets {
            let pair = config.design_pair(protocol, n)?;
            if pair.upper >= spec.dim() {
                return Err(CliError::config(format!("protocols[{i}].pair"), "level out of range"));
            }
            let traj = Arc::new(build_trajectory(spec, protocol, i, pair)?);
            let label = match n {
                Some(n) => format!("{}-N{n}", protocol.label()),
                None => protocol.label(),
            };
            let phase = phase_integral(spec, &traj, pair).ok();
            summaries.push(ProtocolSummary {
                label: label.clone(),
                kind: protocol.kind,
                particles: n,
                pair: [pair.lower + 1, pair.upper + 1],
                c_tilde: traj.c_tilde(),
                phi: phase.as_ref().map(|p| p.phi),
                period: phase.as_ref().map(|p| TAU / p.phi),
                approximate: phase.as_ref().map_or(true, |p| p.approximate),
            });
            resolved.push(Resolved { label, base: protocol.label(), particles: n, pair, traj });
        }
    }
    Ok((resolved, summaries))
}

/// Fill in defaults that depend on the model so the manifest can replay the run.
fn complete(config: &ExperimentConfig, spec: &ModelSpec) -> Result<ExperimentConfig, CliError> {
    let mut c = config.clone();
    if !c.model.is_ring() {
        if c.start.is_none() {
            c.start = Some(LevelLabel::Bare(dominant_bare_state(spec, spec.lambda_start())?));
        }
        if c.target.is_none() {
            c.target = Some(LevelLabel::Bare(dominant_bare_state(spec, spec.lambda_end())?));
        }
    }
    Ok(c)
}

fn required<T: Copy>(value: Option<T>, field: &str, command: Command) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::config(field, format!("`{}` needs this field", command.name())))
}

/// Run `command` and write its artifacts and `manifest.json` into `out_dir`.
pub fn execute(command: Command, config: &ExperimentConfig, out_dir: &Path) -> Result<Manifest, CliError> {
    let clock = Instant::now();
    config.validate()?;
    let spec = config.model.spec()?;
    let config = complete(config, &spec)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut out = Writer { dir: out_dir, artifacts: Vec::new() };
    let mut failures = Vec::new();
    let mut total_failure = false;

    let (resolved, summaries) = if command == Command::Spectrum {
        (Vec::new(), Vec::new())
    } else {
        resolve(&config, &spec)?
    };
    for r in &resolved {
        let mut buf = Vec::new();
        r.traj.write_csv(&mut buf).map_err(|e| CliError::io(out_dir, e))?;
        out.write(&format!("trajectory_{}.csv", r.label), &String::from_utf8_lossy(&buf))?;
    }

    let results = match command {
        Command::Design => json!({}),
        Command::Spectrum => spectrum(&config, &spec, &mut out)?,
        Command::Evolve => {
            let t_f = required(config.t_f, "t_f", command)?;
            if config.model.is_ring() {
                evolve_ring(&config, &spec, &resolved, t_f)?
            } else {
                evolve_single(&config, &spec, &resolved, t_f, &mut out)?
            }
        }
        Command::SweepTf => {
            let range = required(config.tf_sweep, "tf_sweep", command)?;
            let durations = range.values();
            let (value, failed, all_failed) = if config.model.is_ring() {
                sweep_tf_ring(&config, &spec, &resolved, &durations, &mut out)?
            } else {
                sweep_tf_single(&config, &spec, &resolved, &durations, &mut out)?
            };
            failures = failed;
            total_failure = all_failed;
            value
        }
        Command::SweepEps => {
            let (value, failed, all_failed) = sweep_eps(&config, &spec, &resolved, &mut out)?;
            failures = failed;
            total_failure = all_failed;
            value
        }
    };

    let manifest = Manifest {
        command: command.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config,
        protocols: summaries,
        results,
        artifacts: out.artifacts.clone(),
        failures,
        total_failure,
        wall_time_seconds: clock.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    out.write("manifest.json", &(text + "\n"))?;
    Ok(manifest)
}

fn spectrum(config: &ExperimentConfig, spec: &ModelSpec, out: &mut Writer) -> Result<Value, CliError> {
    let levels = config.spectrum.levels.unwrap_or(spec.dim());
    let grid = linspace(spec.lambda_start(), spec.lambda_end(), config.spectrum.points);
    let mut csv = String::from("lambda,level,energy\n");
    let mut min_gap = f64::INFINITY;
    for &lambda in &grid {
        let (e, _) = eigensystem(&spec.hamiltonian(lambda)?)?;
        for level in 0..levels {
            writeln!(csv, "{},{},{}", sci(lambda), level + 1, sci(e[level])).unwrap();
        }
        if e.len() > 1 {
            min_gap = min_gap.min(e[1] - e[0]);
        }
    }
    out.write("spectrum.csv", &csv)?;
    Ok(json!({ "points": grid.len(), "levels": levels, "min_ground_gap": min_gap }))
}

fn evolve_single(
    config: &ExperimentConfig,
    spec: &ModelSpec,
    resolved: &[Resolved],
    t_f: f64,
    out: &mut Writer,
) -> Result<Value, CliError> {
    let start = config.start.expect("completed").to_state();
    let target = config.target.expect("completed").to_state();
    let levels: Vec<usize> = if config.projection_levels.is_empty() {
        (0..spec.dim()).collect()
    } else {
        config.projection_levels.iter().map(|l| l - 1).collect()
    };
    let policy = config.integrator.policy();
    let mut runs = Vec::new();
    for r in resolved {
        let control = rescale(Arc::clone(&r.traj), t_f)?;
        let psi0 = start.state_at(spec, control.lambda_at(0.0))?;
        let n_steps = policy.steps_for(spec, &control)?;
        let result = evolve(
            spec,
            &control,
            &psi0,
            EvolveOptions { n_steps: Some(n_steps), record_every: config.integrator.record_every },
        )?;
        let projection = adiabatic_projection(spec, &control, &result, &levels)?;
        let mut csv = String::from("t,n,re_g,im_g\n");
        for (t, row) in projection.times.iter().zip(&projection.g) {
            for (level, g) in levels.iter().zip(row) {
                writeln!(csv, "{},{},{},{}", sci(*t), level + 1, sci(g.re), sci(g.im)).unwrap();
            }
        }
        out.write(&format!("projection_{}.csv", r.label), &csv)?;
        let lambda_end = control.lambda_at(t_f);
        let final_adiabatic: Vec<f64> = (0..spec.dim())
            .map(|m| StateLabel::Adiabatic(m).population(spec, lambda_end, result.final_state()))
            .collect::<faquad::Result<_>>()?;
        runs.push(json!({
            "label": r.label,
            "n_steps": result.n_steps,
            "norm_drift": result.norm_drift,
            "target_population": target.population(spec, lambda_end, result.final_state())?,
            "final_adiabatic_populations": final_adiabatic,
        }));
    }
    Ok(json!({ "t_f": t_f, "runs": runs }))
}

fn evolve_ring(
    config: &ExperimentConfig,
    spec: &ModelSpec,
    resolved: &[Resolved],
    t_f: f64,
) -> Result<Value, CliError> {
    let policy = config.integrator.policy();
    let mut runs = Vec::new();
    for r in resolved {
        let n = r.particles.expect("ring protocols carry N");
        let control = rescale(Arc::clone(&r.traj), t_f)?;
        let evolved = tg::evolve_stack(spec, &tg::initial_stack(spec, n)?, &control, &policy)?;
        let fidelity = tg::tg_fidelity(&evolved, &tg::target_stack(spec, n)?)?;
        runs.push(json!({
            "label": r.label,
            "particles": n,
            "fidelity": fidelity,
            "gram_deviation": evolved.gram_deviation(),
        }));
    }
    Ok(json!({ "t_f": t_f, "runs": runs }))
}

type SweepOutcome = (Value, Vec<FailureRecord>, bool);

fn sweep_tf_single(
    config: &ExperimentConfig,
    spec: &ModelSpec,
    resolved: &[Resolved],
    durations: &[f64],
    out: &mut Writer,
) -> Result<SweepOutcome, CliError> {
    let start = config.start.expect("completed").to_state();
    let target = config.target.expect("completed").to_state();
    let policy = config.integrator.policy();
    let mut failures = Vec::new();
    let mut successes = 0;
    let mut curves = Vec::new();
    for r in resolved {
        let curve = fidelity_sweep(spec, &r.traj, durations, start, target, &policy);
        let mut csv = String::from("tf,population\n");
        for p in &curve.points {
            writeln!(csv, "{},{}", sci(p.t_f), sci(p.population)).unwrap();
        }
        out.write(&format!("sweep_{}.csv", r.label), &csv)?;
        successes += curve.points.len();
        failures.extend(curve.failures.iter().map(|(t, e)| FailureRecord {
            label: r.label.clone(),
            abscissa: *t,
            error: e.to_string(),
        }));
        if r.traj.c_tilde().is_some() {
            let pred = PerturbationPrediction::new(spec, &r.traj, r.pair)?;
            let mut csv = String::from("tf,predicted_infidelity,envelope\n");
            for &t in durations {
                writeln!(csv, "{},{},{}", sci(t), sci(pred.predicted_infidelity(t)), sci(pred.envelope(t)))
                    .unwrap();
            }
            out.write(&format!("prediction_{}.csv", r.label), &csv)?;
        }
        let maxima = local_maxima(&curve.t_f(), &curve.populations());
        let best = curve.points.iter().map(|p| p.population).fold(f64::NAN, f64::max);
        curves.push(json!({
            "label": r.label,
            "points": curve.points.len(),
            "max_population": best,
            "maxima": maxima.iter().map(|(t, p)| json!([t, p])).collect::<Vec<_>>(),
        }));
    }
    Ok((json!({ "curves": curves }), failures, successes == 0))
}

fn sweep_tf_ring(
    config: &ExperimentConfig,
    spec: &ModelSpec,
    resolved: &[Resolved],
    durations: &[f64],
    out: &mut Writer,
) -> Result<SweepOutcome, CliError> {
    let policy = config.integrator.policy();
    let mut failures = Vec::new();
    let mut rows: Vec<(f64, usize, usize, f64)> = Vec::new();
    let mut curves = Vec::new();
    for (order, r) in resolved.iter().enumerate() {
        let n = r.particles.expect("ring protocols carry N");
        let curve = tg::tf_sweep(spec, n, &r.traj, durations, &policy)?;
        rows.extend(curve.abscissa.iter().zip(&curve.fidelity).map(|(&t, &f)| (t, n, order, f)));
        failures.extend(curve.failures.iter().map(|(t, e)| FailureRecord {
            label: r.label.clone(),
            abscissa: *t,
            error: e.to_string(),
        }));
        let best = curve.fidelity.iter().copied().fold(f64::NAN, f64::max);
        curves.push(json!({ "label": r.label, "particles": n, "points": curve.fidelity.len(), "max_fidelity": best }));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut csv = String::from("tf,fidelity,N,protocol\n");
    for (t, n, order, f) in &rows {
        writeln!(csv, "{},{},{},{}", sci(*t), sci(*f), n, resolved[*order].base).unwrap();
    }
    out.write("tg_sweep.csv", &csv)?;
    Ok((json!({ "curves": curves }), failures, rows.is_empty()))
}

pub const PLATEAU_THRESHOLD: f64 = 0.999;
pub const PLATEAU_START: f64 = 10.0;
pub const PLATEAU_DOUBLINGS: usize = 6;

fn sweep_eps(
    config: &ExperimentConfig,
    spec: &ModelSpec,
    resolved: &[Resolved],
    out: &mut Writer,
) -> Result<SweepOutcome, CliError> {
    if !config.model.is_ring() {
        return Err(CliError::config("model.kind", "`sweep-eps` needs the ring model"));
    }
    if config.protocols.len() != 1 {
        return Err(CliError::config("protocols", "`sweep-eps` takes exactly one protocol"));
    }
    let range = required(config.epsilon_sweep, "epsilon_sweep", Command::SweepEps)?;
    let epsilons = range.values();
    let policy = config.integrator.policy();
    let mut plateaus = Vec::new();
    let t_f = match config.t_f {
        Some(t) => t,
        None => {
            let mut t_max = 0.0_f64;
            for r in resolved {
                let n = r.particles.expect("ring protocols carry N");
                let found = tg::plateau_time(
                    spec,
                    n,
                    &r.traj,
                    PLATEAU_THRESHOLD,
                    PLATEAU_START,
                    PLATEAU_DOUBLINGS,
                    &policy,
                )?;
                let (t, f) = found.ok_or(faquad::Error::Consistency(format!(
                    "no fidelity plateau above {PLATEAU_THRESHOLD} for N = {n}"
                )))?;
                plateaus.push(json!({ "particles": n, "t_f": t, "fidelity": f }));
                t_max = t_max.max(t);
            }
            t_max
        }
    };
    let mut rows: Vec<(f64, usize, f64)> = Vec::new();
    let mut failures = Vec::new();
    let mut curves = Vec::new();
    for r in resolved {
        let n = r.particles.expect("ring protocols carry N");
        let curve = tg::epsilon_sweep(spec, n, &r.traj, t_f, &epsilons, &policy)?;
        rows.extend(curve.abscissa.iter().zip(&curve.fidelity).map(|(&e, &f)| (e, n, f)));
        failures.extend(curve.failures.iter().map(|(e, err)| FailureRecord {
            label: r.label.clone(),
            abscissa: *e,
            error: err.to_string(),
        }));
        let best = curve
            .abscissa
            .iter()
            .zip(&curve.fidelity)
            .fold((f64::NAN, f64::NEG_INFINITY), |b, (&e, &f)| if f > b.1 { (e, f) } else { b });
        curves.push(json!({ "label": r.label, "particles": n, "best_epsilon": best.0, "best_fidelity": best.1 }));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut csv = String::from("epsilon,fidelity,N\n");
    for (e, n, f) in &rows {
        writeln!(csv, "{},{},{}", sci(*e), sci(*f), n).unwrap();
    }
    out.write("eps_sweep.csv", &csv)?;
    Ok((json!({ "t_f": t_f, "plateaus": plateaus, "curves": curves }), failures, rows.is_empty()))
}

/// Default output directory when neither flag nor config names one.
pub fn default_out_dir(command: Command) -> PathBuf {
    PathBuf::from("out").join(command.name())
}
