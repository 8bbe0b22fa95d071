//! Run configuration: a flat JSON object whose keys match the long flag names
//! (with `_` for `-`). Flags override file values; anything left unset takes the
//! defaults below.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use dicke_lattice::dynamics::{IntegrationControls, RelaxControls};
use dicke_lattice::stability::StabilityControls;
use dicke_lattice::steady_state::{FindAllStrategy, NewtonControls};
use dicke_lattice::sweep::{BisectionControls, GridAxis, SweepSpec};
use dicke_lattice::{BoundaryCondition, LatticeParams};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    /// Exact normal phase.
    Np,
    /// Normal phase plus a seeded random kick of size `perturbation`.
    Perturbed,
    /// State read from `init_file` (JSON with `a`, `s`, `z`).
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    /// Stable-class map over the (xi, g) grid.
    Phase,
    /// Stable branches |a_j| along g at fixed xi.
    Cut,
    /// Relaxed site profile from a homogeneous start.
    Profile,
}

/// Fully resolved settings for one run. Written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n_sites: usize,
    pub bc: BoundaryCondition,
    pub omega_c: f64,
    pub omega_a: f64,
    pub g: f64,
    pub xi: f64,
    pub kappa: f64,

    pub t_end: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub record_every: Option<f64>,
    pub renormalize: bool,
    pub init: InitKind,
    pub init_file: Option<PathBuf>,
    pub perturbation: f64,
    pub rng_seed: u64,

    pub t_max: f64,
    pub settle_tol: f64,
    pub init_re: f64,
    pub init_im: f64,

    pub n_random_seeds: usize,
    pub dedup_tol: f64,
    pub newton_tol: f64,
    pub max_iter: usize,
    pub damping: usize,
    pub eps_marginal: f64,
    pub eps_zero: f64,
    pub eps_pattern: f64,

    pub mode: SweepMode,
    pub xi_min: f64,
    pub xi_max: f64,
    pub xi_steps: usize,
    pub g_min: f64,
    pub g_max: f64,
    pub g_steps: usize,
    pub sizes: Vec<usize>,
    pub bisection_tol: f64,
    pub max_bisection: usize,
    pub infinite: bool,
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let integ = IntegrationControls::default();
        let relax = RelaxControls::default();
        let find = FindAllStrategy::default();
        let stab = StabilityControls::default();
        let bis = BisectionControls::default();
        RunConfig {
            n_sites: 3,
            bc: BoundaryCondition::Periodic,
            omega_c: 1.0,
            omega_a: 1.0,
            g: 0.6,
            xi: 0.2,
            kappa: 0.4,
            t_end: 400.0,
            rtol: integ.rtol,
            atol: integ.atol,
            max_step: integ.max_step,
            record_every: integ.record_every,
            renormalize: integ.renormalize,
            init: InitKind::Perturbed,
            init_file: None,
            perturbation: 1e-3,
            rng_seed: 0,
            t_max: relax.t_max,
            settle_tol: relax.settle_tol,
            init_re: 0.1,
            init_im: 0.0,
            n_random_seeds: find.n_random_seeds,
            dedup_tol: find.dedup_tol,
            newton_tol: find.newton.newton_tol,
            max_iter: find.newton.max_iter,
            damping: find.newton.damping,
            eps_marginal: stab.eps_marginal,
            eps_zero: stab.eps_zero,
            eps_pattern: dicke_lattice::classify::DEFAULT_EPS_PATTERN,
            mode: SweepMode::Phase,
            xi_min: 0.0,
            xi_max: 0.49,
            xi_steps: 140,
            g_min: 0.3,
            g_max: 1.0,
            g_steps: 140,
            sizes: vec![3, 6, 10, 50],
            bisection_tol: bis.tol,
            max_bisection: bis.max_iter,
            infinite: false,
            workers: None,
        }
    }
}

impl RunConfig {
    /// Merges the optional JSON file with flag overrides. `flags` holds only the
    /// keys given on the command line.
    pub fn resolve(file: Option<&Path>, flags: Map<String, Value>) -> Result<RunConfig, CliError> {
        let mut merged = match file {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                match serde_json::from_str::<Value>(&text) {
                    Ok(Value::Object(map)) => map,
                    Ok(_) => {
                        return Err(CliError::Input(format!(
                            "{}: config must be a JSON object",
                            path.display()
                        )))
                    }
                    Err(e) => return Err(CliError::Input(format!("{}: {e}", path.display()))),
                }
            }
            None => Map::new(),
        };
        merged.extend(flags);
        serde_json::from_value(Value::Object(merged))
            .map_err(|e| CliError::Input(format!("config: {e}")))
    }

    pub fn params(&self) -> LatticeParams {
        LatticeParams {
            n_sites: self.n_sites,
            omega_c: self.omega_c,
            omega_a: self.omega_a,
            g: self.g,
            xi: self.xi,
            kappa: self.kappa,
            bc: self.bc,
        }
    }

    pub fn integration(&self) -> IntegrationControls {
        IntegrationControls {
            rtol: self.rtol,
            atol: self.atol,
            max_step: self.max_step,
            record_every: self.record_every,
            renormalize: self.renormalize,
        }
    }

    pub fn relax(&self) -> RelaxControls {
        RelaxControls {
            t_max: self.t_max,
            settle_tol: self.settle_tol,
            integration: self.integration(),
        }
    }

    pub fn strategy(&self) -> FindAllStrategy {
        FindAllStrategy {
            n_random_seeds: self.n_random_seeds,
            rng_seed: self.rng_seed,
            dedup_tol: self.dedup_tol,
            newton: NewtonControls {
                newton_tol: self.newton_tol,
                max_iter: self.max_iter,
                damping: self.damping,
            },
        }
    }

    pub fn stability(&self) -> StabilityControls {
        StabilityControls {
            eps_marginal: self.eps_marginal,
            eps_zero: self.eps_zero,
        }
    }

    pub fn bisection(&self) -> BisectionControls {
        BisectionControls {
            tol: self.bisection_tol,
            max_iter: self.max_bisection,
        }
    }

    pub fn xi_grid(&self) -> GridAxis {
        GridAxis::new(self.xi_min, self.xi_max, self.xi_steps)
    }

    pub fn g_grid(&self) -> GridAxis {
        GridAxis::new(self.g_min, self.g_max, self.g_steps)
    }

    pub fn sweep_spec(&self) -> SweepSpec {
        SweepSpec {
            params_base: self.params(),
            xi_grid: self.xi_grid(),
            g_grid: self.g_grid(),
            strategy: self.strategy(),
            stability: self.stability(),
            eps_pattern: self.eps_pattern,
            rng_seed: self.rng_seed,
            workers: self.workers,
        }
    }
}

/// Serializes a flag group, keeping only the flags that were given.
pub fn flag_map<T: Serialize>(args: &T) -> Map<String, Value> {
    match serde_json::to_value(args) {
        Ok(Value::Object(map)) => map.into_iter().filter(|(_, v)| !v.is_null()).collect(),
        _ => Map::new(),
    }
}

fn skip_false(b: &bool) -> bool {
    !*b
}

/// Lattice and coupling. All frequencies in units of ω (= ω_c = ω_a by default).
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct LatticeArgs {
    /// Number of sites N [default: 3].
    #[arg(long = "n", visible_alias = "n-sites")]
    pub n_sites: Option<usize>,
    /// Boundary condition: pbc or obc [default: pbc].
    #[arg(long)]
    pub bc: Option<BoundaryCondition>,
    /// Resonator frequency ω_c [default: 1].
    #[arg(long)]
    pub omega_c: Option<f64>,
    /// Atomic frequency ω_a [default: 1].
    #[arg(long)]
    pub omega_a: Option<f64>,
    /// Atom-photon coupling g, in units of ω [default: 0.6].
    #[arg(long)]
    pub g: Option<f64>,
    /// Nearest-neighbour photon hopping ξ, in units of ω [default: 0.2].
    #[arg(long)]
    pub xi: Option<f64>,
    /// Resonator loss rate κ, in units of ω [default: 0.4].
    #[arg(long)]
    pub kappa: Option<f64>,
}

/// Time integration. Times in units of 1/ω.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct IntegrationArgs {
    /// Relative error tolerance per step [default: 1e-10].
    #[arg(long)]
    pub rtol: Option<f64>,
    /// Absolute error tolerance per step [default: 1e-12].
    #[arg(long)]
    pub atol: Option<f64>,
    /// Largest allowed step, in 1/ω [default: 1].
    #[arg(long)]
    pub max_step: Option<f64>,
    /// Project spins back onto the sphere |s|^2 + z^2 = 1/4 after every step.
    #[arg(long)]
    #[serde(skip_serializing_if = "skip_false")]
    pub renormalize: bool,
}

/// Root finding, stability and pattern thresholds.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct SolverArgs {
    /// Random seeds added to the structured seeds [default: 64].
    #[arg(long)]
    pub n_random_seeds: Option<usize>,
    /// Seed for every random draw [default: 0].
    #[arg(long)]
    pub rng_seed: Option<u64>,
    /// Sup-norm distance below which two roots are the same [default: 1e-6].
    #[arg(long)]
    pub dedup_tol: Option<f64>,
    /// Newton residual tolerance [default: 1e-11].
    #[arg(long)]
    pub newton_tol: Option<f64>,
    /// Newton iteration cap [default: 100].
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Spectral abscissa band treated as marginal, in units of ω [default: 1e-7].
    #[arg(long)]
    pub eps_marginal: Option<f64>,
    /// Eigenvalue modulus counted as zero, in units of ω [default: 1e-8].
    #[arg(long)]
    pub eps_zero: Option<f64>,
    /// Tolerance for site equalities and signs in pattern labels [default: 1e-5].
    #[arg(long)]
    pub eps_pattern: Option<f64>,
}

/// ξ grid, in units of ω.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct XiGridArgs {
    /// Smallest ξ [default: 0].
    #[arg(long)]
    pub xi_min: Option<f64>,
    /// Largest ξ [default: 0.49].
    #[arg(long)]
    pub xi_max: Option<f64>,
    /// Number of ξ values, both ends included [default: 140].
    #[arg(long)]
    pub xi_steps: Option<usize>,
}

/// g grid, in units of ω.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct GGridArgs {
    /// Smallest g [default: 0.3].
    #[arg(long)]
    pub g_min: Option<f64>,
    /// Largest g [default: 1].
    #[arg(long)]
    pub g_max: Option<f64>,
    /// Number of g values, both ends included [default: 140].
    #[arg(long)]
    pub g_steps: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"xi": 0.3, "g": 0.9, "bc": "obc"}"#).unwrap();
        let mut flags = Map::new();
        flags.insert("g".into(), Value::from(0.5));
        let cfg = RunConfig::resolve(Some(&path), flags).unwrap();
        assert_eq!((cfg.xi, cfg.g, cfg.bc), (0.3, 0.5, BoundaryCondition::Open));
        assert_eq!(cfg.kappa, 0.4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"gee": 0.9}"#).unwrap();
        assert!(matches!(
            RunConfig::resolve(Some(&path), Map::new()),
            Err(CliError::Input(_))
        ));
    }

    #[test]
    fn unset_flags_are_dropped() {
        let args = LatticeArgs {
            xi: Some(0.1),
            ..Default::default()
        };
        let map = flag_map(&args);
        assert_eq!(map.len(), 1);
        assert_eq!(map["xi"], Value::from(0.1));
    }
}
