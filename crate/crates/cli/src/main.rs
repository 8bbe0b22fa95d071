//! `dlp`: command-line front end for the dicke-lattice engine.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 I/O failure.

mod config;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{Map, Value};

use dicke_lattice::dynamics::{integrate, perturbed_normal_state};
use dicke_lattice::spectrum::{mode_frequencies, xi_stability_window};
use dicke_lattice::sweep::{
    self, analyze_point, critical_line_scan, header_line, order_parameter_cut, phase_diagram,
    site_profile, GridAxis, PointAnalysis, SweepSpec,
};
use dicke_lattice::{classify, MeanFieldState};

use config::{
    flag_map, GGridArgs, InitKind, IntegrationArgs, LatticeArgs, RunConfig, SolverArgs, SweepMode,
    XiGridArgs,
};

const UNITS: &str =
    "All frequencies, rates and couplings are in units of the resonator frequency ω; \
times are in units of 1/ω.";

#[derive(Debug, Parser)]
#[command(name = "dlp", version, about = "Mean-field dissipative Dicke lattice simulator", long_about = None, after_help = UNITS)]
struct Cli {
    /// JSON config file with flat keys (e.g. {"xi": 0.2, "bc": "obc"}); flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Output file; stdout if omitted. The resolved config is written beside it as
    /// <stem>.config.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Photon mode frequencies and the ξ window in which the normal phase is stable.
    #[command(after_help = UNITS)]
    Dispersion {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Normal-phase critical coupling by bisection next to the closed form, over a ξ
    /// grid and several lattice sizes (CSV).
    #[command(after_help = UNITS)]
    Critical {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        xi_grid: XiGridArgs,
        #[command(flatten)]
        extra: CriticalArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Integrate the mean-field equations and write the trajectory (CSV).
    #[command(after_help = UNITS)]
    Trajectory {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        integration: IntegrationArgs,
        #[command(flatten)]
        extra: TrajectoryArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Every fixed point at one (ξ, g) with its stability and pattern label (JSON).
    #[command(after_help = UNITS)]
    Steady {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Phase diagram, order-parameter cut or site profile (CSV).
    #[command(after_help = UNITS)]
    Sweep {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        xi_grid: XiGridArgs,
        #[command(flatten)]
        g_grid: GGridArgs,
        #[command(flatten)]
        integration: IntegrationArgs,
        #[command(flatten)]
        extra: SweepArgs,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Clone, Default, Args, Serialize)]
struct CriticalArgs {
    /// Comma-separated lattice sizes [default: 3,6,10,50].
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Bisection tolerance in g [default: 1e-6].
    #[arg(long)]
    bisection_tol: Option<f64>,
    /// Bisection iteration cap [default: 60].
    #[arg(long)]
    max_bisection: Option<usize>,
    /// Add the infinite-lattice critical coupling as a column.
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    infinite: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
struct TrajectoryArgs {
    /// Final time, in 1/ω [default: 400].
    #[arg(long)]
    t_end: Option<f64>,
    /// Recording interval, in 1/ω [default: 0.5].
    #[arg(long)]
    record_every: Option<f64>,
    /// Initial state [default: perturbed].
    #[arg(long, value_enum)]
    init: Option<InitKind>,
    /// JSON state file for --init file.
    #[arg(long)]
    init_file: Option<PathBuf>,
    /// Size of the random kick for --init perturbed [default: 1e-3].
    #[arg(long)]
    perturbation: Option<f64>,
    /// Seed for the random kick [default: 0].
    #[arg(long)]
    rng_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
struct SweepArgs {
    /// What to compute [default: phase]. A cut runs along g at the --xi value; a
    /// profile relaxes a single (--xi, --g) point.
    #[arg(long, value_enum)]
    mode: Option<SweepMode>,
    /// Worker threads for the grid; falls back to DLP_WORKERS, then to all cores.
    #[arg(long, env = "DLP_WORKERS")]
    workers: Option<usize>,
    /// Relaxation time limit for profiles, in 1/ω [default: 400].
    #[arg(long)]
    t_max: Option<f64>,
    /// rhs sup-norm at which a profile counts as settled, in ω [default: 1e-9].
    #[arg(long)]
    settle_tol: Option<f64>,
    /// Re of the homogeneous initial photon amplitude for profiles [default: 0.1].
    #[arg(long)]
    init_re: Option<f64>,
    /// Im of the homogeneous initial photon amplitude for profiles [default: 0].
    #[arg(long)]
    init_im: Option<f64>,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn io(path: &Path, e: io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "invalid input: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<dicke_lattice::Error> for CliError {
    fn from(e: dicke_lattice::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

fn merge(groups: &[Map<String, Value>]) -> Map<String, Value> {
    groups.iter().flat_map(|m| m.clone()).collect()
}

/// Writes `body` to `out` (or stdout) and the resolved config beside it.
fn emit(out: &OutArgs, cfg: &RunConfig, body: &[u8]) -> Result<(), CliError> {
    match &out.out {
        None => match io::stdout().write_all(body) {
            Err(e) if e.kind() != io::ErrorKind::BrokenPipe => {
                Err(CliError::Io(format!("stdout: {e}")))
            }
            _ => Ok(()),
        },
        Some(path) => {
            fs::write(path, body).map_err(|e| CliError::io(path, e))?;
            let cfg_path = path.with_extension("config.json");
            let mut text =
                serde_json::to_string_pretty(cfg).map_err(|e| CliError::Io(e.to_string()))?;
            text.push('\n');
            fs::write(&cfg_path, text).map_err(|e| CliError::io(&cfg_path, e))
        }
    }
}

fn buffer(f: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(buf)
}

fn single_threaded() {
    // Ignored if a pool already exists.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build_global();
}

fn cmd_dispersion(cfg: &RunConfig, out: &OutArgs) -> Result<(), CliError> {
    let params = cfg.params();
    params.validate()?;
    let modes = mode_frequencies(&params);
    let window = xi_stability_window(params.n_sites, params.omega_c, params.bc);
    if !window.contains(params.xi) {
        eprintln!(
            "WARNING: xi={} is outside the normal-phase stability window ({}, {}); the lowest photon mode is not positive",
            params.xi, window.lower, window.upper
        );
    }
    let body = buffer(|w| {
        writeln!(w, "{}", header_line(&params, ""))?;
        writeln!(w, "# xi_window=({}, {})", window.lower, window.upper)?;
        writeln!(w, "k,omega_k")?;
        for (k, v) in modes.values.iter().enumerate() {
            writeln!(w, "{},{}", k + 1, v)?;
        }
        Ok(())
    })?;
    emit(out, cfg, &body)
}

fn cmd_critical(cfg: &RunConfig, out: &OutArgs) -> Result<(), CliError> {
    let params = cfg.params();
    params.validate()?;
    if cfg.xi_steps == 0 || cfg.sizes.is_empty() || cfg.sizes.iter().any(|&n| n < 2) {
        return Err(CliError::Input(
            "need xi_steps >= 1 and at least one size, each >= 2".into(),
        ));
    }
    if cfg.xi_min.is_nan() || cfg.xi_max.is_nan() || cfg.xi_min > cfg.xi_max {
        return Err(CliError::Input(format!(
            "xi_min {} exceeds xi_max {}",
            cfg.xi_min, cfg.xi_max
        )));
    }
    let rows = critical_line_scan(
        &params,
        params.bc,
        &cfg.sizes,
        &cfg.xi_grid(),
        &cfg.bisection(),
    );
    let header = header_line(
        &params,
        &format!("sizes={:?} xi_grid={}", cfg.sizes, cfg.xi_grid()),
    );
    let body = buffer(|w| sweep::write_critical_csv(&rows, &header, cfg.infinite, w))?;
    emit(out, cfg, &body)
}

fn initial_state(cfg: &RunConfig) -> Result<MeanFieldState, CliError> {
    match cfg.init {
        InitKind::Np => Ok(MeanFieldState::normal(cfg.n_sites)),
        InitKind::Perturbed => Ok(perturbed_normal_state(
            cfg.n_sites,
            cfg.perturbation,
            cfg.rng_seed,
        )),
        InitKind::File => {
            let path = cfg
                .init_file
                .as_ref()
                .ok_or_else(|| CliError::Input("--init file needs --init-file".into()))?;
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let st: MeanFieldState = serde_json::from_str(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            st.check_shape(cfg.n_sites)?;
            Ok(st)
        }
    }
}

fn cmd_trajectory(cfg: &RunConfig, out: &OutArgs) -> Result<(), CliError> {
    let params = cfg.params();
    params.validate()?;
    if cfg.t_end.is_nan() || cfg.t_end <= 0.0 {
        return Err(CliError::Input(format!(
            "t_end must be positive, got {}",
            cfg.t_end
        )));
    }
    let state0 = initial_state(cfg)?;
    let traj = integrate(&state0, &params, cfg.t_end, &cfg.integration())?;
    eprintln!(
        "steps={} max_constraint_drift={:e} final_max_abs_a={:e}",
        traj.accepted_steps,
        traj.max_constraint_drift,
        traj.final_state().max_photon_amplitude()
    );
    let header = header_line(
        &params,
        &format!(
            "init={} rng_seed={}",
            format!("{:?}", cfg.init).to_lowercase(),
            cfg.rng_seed
        ),
    );
    let body = buffer(|w| traj.write_csv(w, header.trim_start_matches("# ")))?;
    emit(out, cfg, &body)
}

#[derive(Serialize)]
struct Dossier<'a> {
    version: &'static str,
    region: Option<char>,
    region_inferred: bool,
    #[serde(flatten)]
    analysis: &'a PointAnalysis,
}

fn cmd_steady(cfg: &RunConfig, out: &OutArgs) -> Result<(), CliError> {
    let params = cfg.params();
    params.validate()?;
    let pa = analyze_point(&params, &cfg.strategy(), &cfg.stability(), cfg.eps_pattern)?;
    let region = classify::phase_letter(params.bc, params.n_sites, &pa.stable.kinds());
    let dossier = Dossier {
        version: sweep::VERSION,
        region: region.map(|r| r.0),
        region_inferred: region.is_some_and(|r| r.1),
        analysis: &pa,
    };
    let mut text =
        serde_json::to_string_pretty(&dossier).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    emit(out, cfg, text.as_bytes())
}

fn cmd_sweep(cfg: &RunConfig, out: &OutArgs) -> Result<(), CliError> {
    let params = cfg.params();
    params.validate()?;
    let body = match cfg.mode {
        SweepMode::Phase => {
            let spec = cfg.sweep_spec();
            let cells = phase_diagram(&spec)?;
            let header = header_line(
                &params,
                &format!(
                    "xi_grid={} g_grid={} rng_seed={}",
                    spec.xi_grid, spec.g_grid, spec.rng_seed
                ),
            );
            buffer(|w| sweep::write_phase_csv(&cells, &header, w))?
        }
        SweepMode::Cut => {
            let spec = SweepSpec {
                xi_grid: GridAxis::single(cfg.xi),
                ..cfg.sweep_spec()
            };
            let rows = order_parameter_cut(&spec)?;
            let header = header_line(
                &params,
                &format!("g_grid={} rng_seed={}", spec.g_grid, spec.rng_seed),
            );
            buffer(|w| sweep::write_cut_csv(&rows, params.n_sites, &header, w))?
        }
        SweepMode::Profile => {
            let init = Complex64::new(cfg.init_re, cfg.init_im);
            let profile = site_profile(&params, init, &cfg.relax())?;
            if !profile.settled {
                eprintln!(
                    "WARNING: not settled by t={}; writing the state reached",
                    profile.time
                );
            }
            eprintln!("homogeneity={:e}", profile.homogeneity);
            let header = header_line(
                &params,
                &format!(
                    "init={init} settled={} t={} homogeneity={:e}",
                    profile.settled, profile.time, profile.homogeneity
                ),
            );
            buffer(|w| sweep::write_profile_csv(&profile, &header, w))?
        }
    };
    emit(out, cfg, &body)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = cli.config.as_deref();
    match cli.command {
        Command::Dispersion { lattice, out } => {
            let cfg = RunConfig::resolve(file, flag_map(&lattice))?;
            cmd_dispersion(&cfg, &out)
        }
        Command::Critical {
            lattice,
            xi_grid,
            extra,
            out,
        } => {
            let cfg = RunConfig::resolve(
                file,
                merge(&[flag_map(&lattice), flag_map(&xi_grid), flag_map(&extra)]),
            )?;
            cmd_critical(&cfg, &out)
        }
        Command::Trajectory {
            lattice,
            integration,
            extra,
            out,
        } => {
            single_threaded();
            let cfg = RunConfig::resolve(
                file,
                merge(&[flag_map(&lattice), flag_map(&integration), flag_map(&extra)]),
            )?;
            cmd_trajectory(&cfg, &out)
        }
        Command::Steady {
            lattice,
            solver,
            out,
        } => {
            single_threaded();
            let cfg = RunConfig::resolve(file, merge(&[flag_map(&lattice), flag_map(&solver)]))?;
            cmd_steady(&cfg, &out)
        }
        Command::Sweep {
            lattice,
            solver,
            xi_grid,
            g_grid,
            integration,
            extra,
            out,
        } => {
            let cfg = RunConfig::resolve(
                file,
                merge(&[
                    flag_map(&lattice),
                    flag_map(&solver),
                    flag_map(&xi_grid),
                    flag_map(&g_grid),
                    flag_map(&integration),
                    flag_map(&extra),
                ]),
            )?;
            cmd_sweep(&cfg, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dlp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
