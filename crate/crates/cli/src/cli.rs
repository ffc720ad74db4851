//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use faquad::ProtocolKind;

use crate::config::{parse_config, ExperimentConfig, LevelLabel, ModelConfig, ProtocolConfig, SweepRange};
use crate::error::CliError;
use crate::presets::{builtin_figures, preset};
use crate::run::{default_out_dir, execute, Command, Manifest};

pub const THREADS_ENV: &str = "FAQUAD_THREADS";

#[derive(Debug, Parser)]
#[command(name = "faquad", version, about = "Fast quasi-adiabatic control design and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Design the control schedules and write them as `s,lambda` tables.
    Design(CommonArgs),
    /// Instantaneous energy levels along the control range.
    Spectrum {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        points: Option<usize>,
        /// Number of lowest levels to write.
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Evolve once for a fixed duration.
    Evolve {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long = "tf")]
        t_f: Option<f64>,
        /// Use an `s,lambda` table instead of a designed schedule.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// One-based levels written to the projection table.
        #[arg(long, value_delimiter = ',')]
        levels: Vec<usize>,
    },
    /// Final population (or many-body fidelity) against process duration.
    SweepTf {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        tf_from: Option<f64>,
        #[arg(long)]
        tf_to: Option<f64>,
        #[arg(long)]
        tf_count: Option<usize>,
    },
    /// Many-body fidelity against a relative control error.
    SweepEps {
        #[command(flatten)]
        common: CommonArgs,
        /// Process duration; found from the fidelity plateau when absent.
        #[arg(long = "tf")]
        t_f: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        eps_from: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        eps_to: Option<f64>,
        #[arg(long)]
        eps_count: Option<usize>,
    },
    /// Run a built-in figure preset.
    Figure {
        /// Preset name; omit with --list.
        preset: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        list: bool,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON experiment file; flags below override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// two-level, bose-hubbard3 or ring.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub u: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub j: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta_start: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta_end: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub u0: Option<f64>,
    #[arg(long)]
    pub cutoff: Option<usize>,
    /// Protocol kind (repeatable); `constant:<value>` for a frozen control.
    #[arg(long = "protocol")]
    pub protocols: Vec<String>,
    /// One-based design pair, e.g. `1,2`.
    #[arg(long, value_delimiter = ',')]
    pub pair: Vec<usize>,
    /// Initial state, `bare:<n>` or `adiabatic:<n>`.
    #[arg(long)]
    pub start: Option<String>,
    /// Read-out state, `bare:<n>` or `adiabatic:<n>`.
    #[arg(long)]
    pub target: Option<String>,
    /// Particle number on the ring (repeatable).
    #[arg(short = 'N', long = "particles", visible_alias = "N")]
    pub particles: Vec<usize>,
    #[arg(long)]
    pub n_steps: Option<usize>,
    #[arg(long)]
    pub steps_per_period: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_protocol(text: &str) -> Result<ProtocolConfig, CliError> {
    let (name, value) = match text.split_once(':') {
        Some((n, v)) => (n, Some(v)),
        None => (text, None),
    };
    let kind = match name {
        "faquad" => ProtocolKind::Faquad,
        "local-adiabatic" | "la" => ProtocolKind::LocalAdiabatic,
        "uniform-adiabatic" | "ua" => ProtocolKind::UniformAdiabatic,
        "linear" => ProtocolKind::Linear,
        "constant" => ProtocolKind::Constant,
        other => return Err(CliError::config("--protocol", format!("unknown protocol `{other}`"))),
    };
    let mut p = ProtocolConfig::of_kind(kind);
    if let Some(v) = value {
        if kind != ProtocolKind::Constant {
            return Err(CliError::config("--protocol", "only `constant` takes a value"));
        }
        p.value = Some(v.parse().map_err(|_| CliError::config("--protocol", format!("bad value `{v}`")))?);
    }
    Ok(p)
}

fn read_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config("--config", format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl CommonArgs {
    /// File values (or model defaults) with flag overrides applied, validated.
    pub fn build(&self) -> Result<ExperimentConfig, CliError> {
        let mut config = match (&self.config, &self.model) {
            (Some(path), _) => read_config(path)?,
            (None, Some(kind)) => ExperimentConfig::new(ModelConfig::default_for(kind)?),
            (None, None) => {
                return Err(CliError::config("--model", "pass --config FILE or --model KIND"));
            }
        };
        if let Some(kind) = &self.model {
            if kind != config.model.kind_name() {
                config.model = ModelConfig::default_for(kind)?;
            }
        }
        match &mut config.model {
            ModelConfig::TwoLevel { u, j, delta_start, delta_end }
            | ModelConfig::BoseHubbard3 { u, j, delta_start, delta_end } => {
                set(u, self.u);
                set(j, self.j);
                set(delta_start, self.delta_start);
                set(delta_end, self.delta_end);
                if self.u0.is_some() || self.cutoff.is_some() {
                    return Err(CliError::config("--u0", "u0 and cutoff apply to the ring model only"));
                }
            }
            ModelConfig::Ring { u0, cutoff, .. } => {
                set(u0, self.u0);
                set(cutoff, self.cutoff);
                if self.u.is_some() || self.j.is_some() || self.delta_start.is_some() || self.delta_end.is_some() {
                    return Err(CliError::config("--u", "u, j and delta apply to the two-mode models only"));
                }
            }
        }
        if !self.protocols.is_empty() {
            config.protocols = self.protocols.iter().map(|p| parse_protocol(p)).collect::<Result<_, _>>()?;
        }
        if !self.pair.is_empty() {
            let [a, b] = self.pair[..] else {
                return Err(CliError::config("--pair", "expected two levels, e.g. `1,2`"));
            };
            for p in &mut config.protocols {
                p.pair = Some([a, b]);
            }
        }
        if let Some(s) = &self.start {
            config.start = Some(LevelLabel::parse(s).map_err(|e| CliError::config("--start", e))?);
        }
        if let Some(s) = &self.target {
            config.target = Some(LevelLabel::parse(s).map_err(|e| CliError::config("--target", e))?);
        }
        if !self.particles.is_empty() {
            config.particles = self.particles.clone();
        }
        if self.n_steps.is_some() {
            config.integrator.n_steps = self.n_steps;
        }
        set(&mut config.integrator.steps_per_period, self.steps_per_period);
        if self.out.is_some() {
            config.output_dir = self.out.clone();
        }
        Ok(config)
    }
}

fn override_range(
    range: &mut Option<SweepRange>,
    field: &str,
    from: Option<f64>,
    to: Option<f64>,
    count: Option<usize>,
) -> Result<(), CliError> {
    if from.is_none() && to.is_none() && count.is_none() {
        return Ok(());
    }
    let mut r = match (*range, from, to, count) {
        (Some(r), ..) => r,
        (None, Some(from), Some(to), Some(count)) => SweepRange { from, to, count },
        _ => return Err(CliError::config(field, "give --*-from, --*-to and --*-count together")),
    };
    set(&mut r.from, from);
    set(&mut r.to, to);
    set(&mut r.count, count);
    *range = Some(r);
    Ok(())
}

fn run_one(command: Command, config: ExperimentConfig) -> Result<Vec<Manifest>, CliError> {
    config.validate()?;
    let dir = config.output_dir.clone().unwrap_or_else(|| default_out_dir(command));
    Ok(vec![execute(command, &config, &dir)?])
}

/// Resolve arguments into runs and execute them.
pub fn dispatch(cmd: Cmd) -> Result<Vec<Manifest>, CliError> {
    match cmd {
        Cmd::Design(common) => run_one(Command::Design, common.build()?),
        Cmd::Spectrum { common, points, levels } => {
            let mut c = common.build()?;
            set(&mut c.spectrum.points, points);
            if levels.is_some() {
                c.spectrum.levels = levels;
            }
            run_one(Command::Spectrum, c)
        }
        Cmd::Evolve { common, t_f, trajectory, levels } => {
            let mut c = common.build()?;
            if t_f.is_some() {
                c.t_f = t_f;
            }
            if let Some(path) = trajectory {
                let mut p = ProtocolConfig::of_kind(ProtocolKind::Tabulated);
                p.table = Some(path);
                c.protocols = vec![p];
            }
            if !levels.is_empty() {
                c.projection_levels = levels;
            }
            run_one(Command::Evolve, c)
        }
        Cmd::SweepTf { common, tf_from, tf_to, tf_count } => {
            let mut c = common.build()?;
            override_range(&mut c.tf_sweep, "tf_sweep", tf_from, tf_to, tf_count)?;
            run_one(Command::SweepTf, c)
        }
        Cmd::SweepEps { common, t_f, eps_from, eps_to, eps_count } => {
            let mut c = common.build()?;
            if t_f.is_some() {
                c.t_f = t_f;
            }
            override_range(&mut c.epsilon_sweep, "epsilon_sweep", eps_from, eps_to, eps_count)?;
            run_one(Command::SweepEps, c)
        }
        Cmd::Figure { preset: name, out, list } => {
            if list || name.is_none() {
                for p in builtin_figures() {
                    println!("{:<6} {}", p.name, p.description);
                }
                return Ok(Vec::new());
            }
            let name = name.expect("checked");
            let p = preset(&name).ok_or_else(|| CliError::config("preset", format!("unknown preset `{name}`")))?;
            let root = out.unwrap_or_else(|| PathBuf::from("out")).join(p.name);
            let mut manifests = Vec::new();
            for job in p.jobs {
                let dir = if job.name.is_empty() { root.clone() } else { root.join(job.name) };
                manifests.push(execute(job.command, &job.config, &dir)?);
            }
            Ok(manifests)
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::config(THREADS_ENV, format!("expected a positive integer, got `{value}`")))?;
    // a second initialization (e.g. in tests) keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parse the process arguments, run, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = configure_threads().and_then(|_| dispatch(cli.command));
    match result {
        Ok(manifests) => {
            for m in &manifests {
                for f in &m.failures {
                    eprintln!("warning: {} at {}: {}", f.label, f.abscissa, f.error);
                }
                println!("{}: wrote {}", m.command, m.artifacts.join(", "));
            }
            if manifests.iter().any(|m| m.total_failure) {
                eprintln!("error: every point of the sweep failed");
                3
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
