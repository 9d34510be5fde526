//! Command-line front end: scenario parsing and the subcommands behind the
//! `rigidcirc` binary.

pub mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rigidcirc::algebra::{casimir_magnetic, coefficients, Normalization, Se2Element, Se2Momentum};
use rigidcirc::dynamics::{body_velocity, hamiltonian, integrate, SimConfig, Trajectory};
use rigidcirc::geometry::{make_body, BodyBoundary, Point};
use rigidcirc::potential::{added_mass_with_asymmetry, FlowModel, MassModel};
use rigidcirc::verify::{exit_code, Verifier};
use rigidcirc::Error;
use thiserror::Error;

pub use config::{ConfigError, ScenarioFile};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Config { path: PathBuf, source: ConfigError },
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },
    #[error("{context}: {source}")]
    Core {
        context: &'static str,
        source: Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config { .. } | CliError::Read { .. } => EXIT_VALIDATION,
            CliError::Write { .. } => EXIT_NUMERIC,
            CliError::Core { source, .. } => match source {
                Error::TooFewPanels(_)
                | Error::InvalidShape { .. }
                | Error::DegenerateBody(_)
                | Error::SelfIntersection(..)
                | Error::DataLength { .. }
                | Error::Dimension { .. }
                | Error::PointInsideBody(..)
                | Error::SingularCirculation
                | Error::Anisotropic(_)
                | Error::InvalidConfig(_) => EXIT_VALIDATION,
                Error::IncompatibleFlux { .. }
                | Error::SingularInfluence
                | Error::AddedMassAsymmetry(_)
                | Error::NotPositiveDefinite
                | Error::MidpointDivergence { .. }
                | Error::NonFinite(_) => EXIT_NUMERIC,
            },
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn core<T>(context: &'static str, r: rigidcirc::Result<T>) -> Result<T> {
    r.map_err(|source| CliError::Core { context, source })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Paper,
    Verified,
}

impl From<Mode> for Normalization {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Paper => Normalization::Paper,
            Mode::Verified => Normalization::Verified,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "rigidcirc",
    version,
    about = "Rigid body with circulation in potential flow"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the randomized checks of `verify`.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Casimir normalization for summaries and leaf traces.
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the scenario and write the trajectory and a summary.
    Simulate,
    /// Write Casimir leaf traces in the (Pi, Px) plane with the trajectory.
    Leaves,
    /// Write velocity-field snapshots on the configured grid.
    Field,
    /// Write the mass matrices of the configured body.
    AddedMass,
    /// Run the consistency suite.
    Verify,
}

pub struct Options {
    pub out: PathBuf,
    pub mode: Option<Normalization>,
}

pub fn load(path: &Path) -> Result<ScenarioFile> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    text.parse().map_err(|source| CliError::Config {
        path: path.to_path_buf(),
        source,
    })
}

fn write_output(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf> {
    let path = dir.join(name);
    let wrap = |source| CliError::Write {
        path: path.clone(),
        source,
    };
    fs::create_dir_all(dir).map_err(wrap)?;
    fs::write(&path, contents).map_err(wrap)?;
    Ok(path)
}

/// Body, mass model and raw added-mass asymmetry of a scenario.
pub fn prepare(s: &ScenarioFile) -> Result<(BodyBoundary, MassModel, f64)> {
    let body = core("geometry", make_body(&s.body.shape, s.body.panels))?;
    let am = core(
        "potential",
        added_mass_with_asymmetry(&body, s.body.density),
    )?;
    if am.asymmetry > s.body.asymmetry_tolerance {
        return Err(CliError::Core {
            context: "potential",
            source: Error::AddedMassAsymmetry(am.asymmetry),
        });
    }
    Ok((body, am.model, am.asymmetry))
}

pub fn sim_config(s: &ScenarioFile, mass: MassModel) -> SimConfig {
    let d = &s.dynamics;
    let mut config = SimConfig::new(mass, d.circulation, d.dt, d.steps);
    config.integrator = d.integrator;
    config.initial_momentum = Se2Momentum::new(d.momentum[0], d.momentum[1], d.momentum[2]);
    config.initial_pose = Se2Element::new(d.pose[0], d.pose[1], d.pose[2]);
    config.space = d.space;
    config
}

fn simulate(s: &ScenarioFile) -> Result<(BodyBoundary, MassModel, f64, Trajectory)> {
    let (body, mass, asymmetry) = prepare(s)?;
    let trajectory = core("dynamics", integrate(&sim_config(s, mass.clone())))?;
    Ok((body, mass, asymmetry, trajectory))
}

fn summary(
    s: &ScenarioFile,
    mass: &MassModel,
    asymmetry: f64,
    traj: &Trajectory,
    mode: Normalization,
) -> String {
    let gamma = s.dynamics.circulation;
    let (first, last) = (traj.momenta[0], traj.momenta[traj.len() - 1]);
    let mut out = String::new();
    let _ = writeln!(out, "shape = {:?}", s.body.shape);
    let _ = writeln!(out, "panels = {}", s.body.panels);
    let _ = writeln!(out, "added_mass_asymmetry = {asymmetry:.3e}\n");
    out.push_str(&mass.to_text());
    let _ = writeln!(out, "\n[diagnostics]");
    let _ = writeln!(out, "integrator = {}", s.dynamics.integrator);
    let _ = writeln!(out, "samples = {}", traj.len());
    let _ = writeln!(out, "H_initial = {:.16e}", hamiltonian(&first, mass));
    let _ = writeln!(out, "H_final = {:.16e}", hamiltonian(&last, mass));
    let _ = writeln!(out, "casimir_mode = {mode}");
    if let (Ok(c0), Ok(c1)) = (
        casimir_magnetic(&first, gamma, mode),
        casimir_magnetic(&last, gamma, mode),
    ) {
        let _ = writeln!(out, "Casimir_initial = {c0:.16e}");
        let _ = writeln!(out, "Casimir_final = {c1:.16e}");
    }
    let _ = writeln!(out, "max_energy_drift = {:.3e}", traj.energy_drift());
    let _ = writeln!(out, "max_casimir_drift = {:.3e}", traj.casimir_drift());
    // R_theta P is only conserved without circulation
    if gamma == 0.0 {
        let _ = writeln!(
            out,
            "spatial_momentum_drift = {:.3e}",
            traj.spatial_momentum_drift()
        );
    }
    out
}

pub fn run_simulate(s: &ScenarioFile, opts: &Options) -> Result<String> {
    let (_, mass, asymmetry, traj) = simulate(s)?;
    let mut csv = Vec::new();
    traj.write_csv(&mut csv).expect("writing to memory");
    write_output(&opts.out, &s.outputs.trajectory, &csv)?;
    let text = summary(s, &mass, asymmetry, &traj, opts.mode.unwrap_or_default());
    write_output(&opts.out, &s.outputs.summary, text.as_bytes())?;
    Ok(text)
}

pub const LEAVES_HEADER: &str = "kind,mode,level,Pi,Px,Py,Casimir";

pub fn run_leaves(s: &ScenarioFile, opts: &Options) -> Result<String> {
    let gamma = s.dynamics.circulation;
    if gamma == 0.0 {
        return Err(CliError::Core {
            context: "leaves",
            source: Error::SingularCirculation,
        });
    }
    let (_, _, _, traj) = simulate(s)?;
    let o = &s.outputs;
    let verified = Normalization::Verified;
    let phi0 = core(
        "leaves",
        casimir_magnetic(&traj.momenta[0], gamma, verified),
    )?;
    let modes = match opts.mode {
        Some(m) => vec![m],
        None => vec![Normalization::Paper, Normalization::Verified],
    };
    let mut csv = String::from(LEAVES_HEADER);
    csv.push('\n');
    let row = |csv: &mut String, kind: &str, mode: Normalization, level: f64, pi: &Se2Momentum| {
        let phi = casimir_magnetic(pi, gamma, mode).expect("nonzero circulation");
        let _ = writeln!(
            csv,
            "{kind},{mode},{level:.16e},{:.16e},{:.16e},{:.16e},{phi:.16e}",
            pi.angular, pi.linear.x, pi.linear.y
        );
    };
    for &mode in &modes {
        let c = coefficients(mode).casimir;
        for k in 0..o.leaf_levels {
            let level = phi0 + (k as f64 - 0.5 * (o.leaf_levels as f64 - 1.0)) * o.leaf_spacing;
            for j in 0..o.leaf_points {
                let px = if o.leaf_points == 1 {
                    0.0
                } else {
                    -o.leaf_px_max + 2.0 * o.leaf_px_max * j as f64 / (o.leaf_points - 1) as f64
                };
                let pi = Se2Momentum::new(level - c * px * px / gamma, px, 0.0);
                row(&mut csv, "trace", mode, level, &pi);
            }
        }
    }
    for pi in &traj.momenta {
        row(&mut csv, "sample", verified, phi0, pi);
    }
    write_output(&opts.out, &o.leaves, csv.as_bytes())?;
    Ok(format!(
        "{} levels x {} modes, {} trajectory samples, Casimir_initial = {phi0:.16e}\n",
        o.leaf_levels,
        modes.len(),
        traj.len()
    ))
}

pub const FIELD_HEADER: &str = "t,x,y,u,v,inside";

pub fn run_field(s: &ScenarioFile, opts: &Options) -> Result<String> {
    let (body, mass, _, traj) = simulate(s)?;
    let flow = core("potential", FlowModel::new(&body))?;
    let points: Vec<Point> = s
        .outputs
        .grid
        .points()
        .into_iter()
        .map(|(x, y)| Point::new(x, y))
        .collect();
    let mut csv = String::from(FIELD_HEADER);
    csv.push('\n');
    for &t in &s.outputs.field_times {
        let k = (t / s.dynamics.dt).round();
        if !(0.0..=s.dynamics.steps as f64).contains(&k) {
            return Err(CliError::Core {
                context: "field",
                source: Error::InvalidConfig(format!("field time {t} is outside the trajectory")),
            });
        }
        let k = k as usize;
        let zeta = body_velocity(&traj.momenta[k], &mass);
        let velocities = flow.velocity_field(&zeta, s.dynamics.circulation, &points);
        for (x, u) in points.iter().zip(velocities) {
            let (u, inside) = match u {
                Ok(u) => (u, 0),
                Err(_) => (Point::zeros(), 1),
            };
            let _ = writeln!(
                csv,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{inside}",
                traj.times[k], x.x, x.y, u.x, u.y
            );
        }
    }
    write_output(&opts.out, &s.outputs.field, csv.as_bytes())?;
    Ok(format!(
        "{} points x {} instants\n",
        points.len(),
        s.outputs.field_times.len()
    ))
}

pub fn run_added_mass(s: &ScenarioFile, opts: &Options) -> Result<String> {
    let (_, mass, asymmetry) = prepare(s)?;
    let text = format!(
        "# added_mass_asymmetry = {asymmetry:.3e}\n{}",
        mass.to_text()
    );
    write_output(&opts.out, &s.outputs.added_mass, text.as_bytes())?;
    Ok(text)
}

/// Runs `verifier`; the report goes to `verify.txt` under `out` if given.
/// Returns the report text and the exit status.
pub fn run_verify(verifier: &Verifier, out: Option<&Path>) -> Result<(String, i32)> {
    let report = core("verify", verifier.run())?;
    let text = format!("{report}\n");
    if let Some(dir) = out {
        write_output(dir, "verify.txt", text.as_bytes())?;
    }
    Ok((text, exit_code(&report)))
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<i32> {
    if let Command::Verify = cli.command {
        let (text, code) = run_verify(&Verifier::new(cli.seed), cli.out.as_deref())?;
        let _ = stdout.write_all(text.as_bytes());
        return Ok(code);
    }
    let path = cli
        .config
        .ok_or_else(|| CliError::Usage("this subcommand needs --config PATH".into()))?;
    let scenario = load(&path)?;
    let opts = Options {
        out: cli.out.unwrap_or_else(|| PathBuf::from(".")),
        mode: cli.mode.map(Into::into),
    };
    let text = match cli.command {
        Command::Simulate => run_simulate(&scenario, &opts)?,
        Command::Leaves => run_leaves(&scenario, &opts)?,
        Command::Field => run_field(&scenario, &opts)?,
        Command::AddedMass => run_added_mass(&scenario, &opts)?,
        Command::Verify => unreachable!("handled above"),
    };
    let _ = stdout.write_all(text.as_bytes());
    Ok(0)
}

/// Parses `args` (program name first) and runs the subcommand. Returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                let _ = write!(stdout, "{}", e.render());
                return 0;
            }
            let _ = write!(stderr, "{}", e.render());
            return EXIT_USAGE;
        }
    };
    match dispatch(cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
