//! Parameter sweeps: phase diagrams over `(ξ, g)`, order-parameter cuts at fixed
//! `ξ`, critical-coupling lines for several lattice sizes and relaxed site
//! profiles.
//!
//! Grid cells are independent; results are gathered in grid order so output does
//! not depend on the number of workers.

use std::fmt;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{self, PatternKind, StableClassSet, DEFAULT_EPS_PATTERN};
use crate::dynamics::{relax_to_steady, RelaxControls};
use crate::error::{Error, Result};
use crate::model::{BoundaryCondition, LatticeParams, MeanFieldState};
use crate::spectrum::{critical_coupling_np, critical_coupling_np_infinite};
use crate::stability::{self, StabilityControls, StabilityReport, Verdict};
use crate::steady_state::{find_all, homogeneous_srp_branch, FindAllStrategy, FixedPoint};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// First line written to every output file.
pub fn header_line(params: &LatticeParams, extra: &str) -> String {
    let mut line = format!("# dicke-lattice {VERSION} {params}");
    if !extra.is_empty() {
        line.push(' ');
        line.push_str(extra);
    }
    line
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl GridAxis {
    pub fn new(min: f64, max: f64, steps: usize) -> Self {
        GridAxis { min, max, steps }
    }

    pub fn single(value: f64) -> Self {
        GridAxis::new(value, value, 1)
    }

    /// Evenly spaced values including both ends.
    pub fn values(&self) -> Vec<f64> {
        match self.steps {
            0 => Vec::new(),
            1 => vec![self.min],
            n => (0..n)
                .map(|i| self.min + (self.max - self.min) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }

    pub fn spacing(&self) -> f64 {
        if self.steps > 1 {
            (self.max - self.min) / (self.steps - 1) as f64
        } else {
            0.0
        }
    }
}

impl fmt::Display for GridAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]x{}", self.min, self.max, self.steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// `xi` and `g` are taken from the grids.
    pub params_base: LatticeParams,
    pub xi_grid: GridAxis,
    pub g_grid: GridAxis,
    pub strategy: FindAllStrategy,
    pub stability: StabilityControls,
    pub eps_pattern: f64,
    pub rng_seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl SweepSpec {
    pub fn new(params_base: LatticeParams, xi_grid: GridAxis, g_grid: GridAxis) -> Self {
        SweepSpec {
            params_base,
            xi_grid,
            g_grid,
            strategy: FindAllStrategy::default(),
            stability: StabilityControls::default(),
            eps_pattern: DEFAULT_EPS_PATTERN,
            rng_seed: 0,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.xi_grid.steps == 0 || self.g_grid.steps == 0 {
            return Err(Error::domain("grid", "steps must be at least 1"));
        }
        self.params_base.validate()
    }
}

/// Every root at one parameter point with its stability report and label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzedRoot {
    pub fixed_point: FixedPoint,
    pub label: classify::PatternLabel,
    pub stability: std::result::Result<StabilityReport, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointAnalysis {
    pub params: LatticeParams,
    pub roots: Vec<AnalyzedRoot>,
    pub stable: StableClassSet,
    pub n_seeds: usize,
    pub n_converged: usize,
    pub n_failed: usize,
}

impl PointAnalysis {
    pub fn marginal(&self) -> bool {
        self.roots
            .iter()
            .any(|r| matches!(&r.stability, Ok(rep) if rep.verdict == Verdict::Marginal))
    }

    /// Roots whose stability could not be classified.
    pub fn n_unclassified(&self) -> usize {
        self.roots.iter().filter(|r| r.stability.is_err()).count()
    }
}

/// Finds, classifies and labels every fixed point at `params`.
pub fn analyze_point(
    params: &LatticeParams,
    strategy: &FindAllStrategy,
    controls: &StabilityControls,
    eps_pattern: f64,
) -> Result<PointAnalysis> {
    let set = find_all(params, strategy)?;
    let roots: Vec<AnalyzedRoot> = set
        .roots
        .into_iter()
        .map(|fp| {
            let stability = stability::classify(&fp, params, controls).map_err(|e| e.to_string());
            AnalyzedRoot {
                label: classify::label(&fp, params, eps_pattern),
                fixed_point: fp,
                stability,
            }
        })
        .collect();
    let classified: Vec<(FixedPoint, StabilityReport)> = roots
        .iter()
        .filter_map(|r| {
            r.stability
                .as_ref()
                .ok()
                .map(|s| (r.fixed_point.clone(), s.clone()))
        })
        .collect();
    let stable = classify::stable_class_set(&classified, params, eps_pattern, strategy.dedup_tol);
    Ok(PointAnalysis {
        params: *params,
        roots,
        stable,
        n_seeds: set.n_seeds,
        n_converged: set.n_converged,
        n_failed: set.n_failed,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedMetadata {
    pub n_seeds: usize,
    pub n_converged: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub xi: f64,
    pub g: f64,
    pub stable_classes: StableClassSet,
    pub n_roots_total: usize,
    pub marginal_flag: bool,
    /// No root is stable: the lattice is dynamically unstable here.
    pub no_stable_state: bool,
    pub seed_metadata: SeedMetadata,
    /// Region letter for three-site lattices, with an "inferred" flag.
    pub region: Option<(char, bool)>,
    pub error: Option<String>,
}

impl PhaseCell {
    pub fn n_stable(&self) -> usize {
        self.stable_classes.cardinality()
    }

    pub fn kinds(&self) -> Vec<PatternKind> {
        self.stable_classes.kinds()
    }
}

fn cell_seed(base: u64, index: usize) -> u64 {
    base ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn compute_cell(spec: &SweepSpec, index: usize, xi: f64, g: f64) -> PhaseCell {
    let params = spec.params_base.with_point(xi, g);
    let strategy = FindAllStrategy {
        rng_seed: cell_seed(spec.rng_seed, index),
        ..spec.strategy
    };
    match analyze_point(&params, &strategy, &spec.stability, spec.eps_pattern) {
        Ok(pa) => {
            let region = classify::phase_letter(params.bc, params.n_sites, &pa.stable.kinds());
            PhaseCell {
                xi,
                g,
                n_roots_total: pa.roots.len(),
                marginal_flag: pa.marginal(),
                no_stable_state: pa.stable.cardinality() == 0,
                seed_metadata: SeedMetadata {
                    n_seeds: pa.n_seeds,
                    n_converged: pa.n_converged,
                    n_failed: pa.n_failed,
                },
                region,
                error: None,
                stable_classes: pa.stable,
            }
        }
        Err(e) => PhaseCell {
            xi,
            g,
            stable_classes: StableClassSet::default(),
            n_roots_total: 0,
            marginal_flag: false,
            no_stable_state: true,
            seed_metadata: SeedMetadata::default(),
            region: None,
            error: Some(e.to_string()),
        },
    }
}

fn run_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::domain("workers", e.to_string()))?;
            Ok(pool.install(job))
        }
    }
}

/// Stable-class map over the `(ξ, g)` grid, `ξ` outer, `g` inner.
pub fn phase_diagram(spec: &SweepSpec) -> Result<Vec<PhaseCell>> {
    spec.validate()?;
    let points: Vec<(f64, f64)> = spec
        .xi_grid
        .values()
        .into_iter()
        .flat_map(|xi| spec.g_grid.values().into_iter().map(move |g| (xi, g)))
        .collect();
    run_pool(spec.workers, || {
        points
            .par_iter()
            .enumerate()
            .map(|(i, &(xi, g))| compute_cell(spec, i, xi, g))
            .collect()
    })
}

pub fn write_phase_csv<W: Write>(cells: &[PhaseCell], header: &str, mut w: W) -> io::Result<()> {
    writeln!(w, "{header}")?;
    writeln!(
        w,
        "xi,g,n_stable,labels,region,marginal_flag,no_stable_state,n_roots_total"
    )?;
    for c in cells {
        let region = c.region.map(|(l, _)| l.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            c.xi,
            c.g,
            c.n_stable(),
            c.stable_classes.joined_labels(),
            region,
            c.marginal_flag,
            c.no_stable_state,
            c.n_roots_total
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutBranch {
    pub label: String,
    /// `|a_j|` for each site of the canonical representative.
    pub amplitudes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutRow {
    pub g: f64,
    pub branches: Vec<CutBranch>,
}

impl CutRow {
    /// Largest `|a_j|` over every stable branch (zero if none).
    pub fn max_amplitude(&self) -> f64 {
        self.branches
            .iter()
            .flat_map(|b| b.amplitudes.iter().copied())
            .fold(0.0, f64::max)
    }
}

/// Stable branches along a line of constant `ξ` (the first `xi_grid` value).
pub fn order_parameter_cut(spec: &SweepSpec) -> Result<Vec<CutRow>> {
    let line = SweepSpec {
        xi_grid: GridAxis::single(spec.xi_grid.min),
        ..*spec
    };
    let cells = phase_diagram(&line)?;
    Ok(cells
        .into_iter()
        .map(|c| CutRow {
            g: c.g,
            branches: c
                .stable_classes
                .classes
                .iter()
                .map(|cls| CutBranch {
                    label: cls.label.to_string(),
                    amplitudes: cls.canonical.a.iter().map(|a| a.norm()).collect(),
                })
                .collect(),
        })
        .collect())
}

pub fn write_cut_csv<W: Write>(
    rows: &[CutRow],
    n_sites: usize,
    header: &str,
    mut w: W,
) -> io::Result<()> {
    writeln!(w, "{header}")?;
    let cols: Vec<String> = (1..=n_sites).map(|j| format!("abs_a_{j}")).collect();
    writeln!(w, "g,label,{}", cols.join(","))?;
    for r in rows {
        if r.branches.is_empty() {
            writeln!(w, "{},none{}", r.g, ",".repeat(n_sites))?;
        }
        for b in &r.branches {
            let amps: Vec<String> = b.amplitudes.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{},{}", r.g, b.label, amps.join(","))?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionControls {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BisectionControls {
    fn default() -> Self {
        BisectionControls {
            tol: 1e-6,
            max_iter: 60,
        }
    }
}

fn np_abscissa(params: &LatticeParams, g: f64) -> Result<f64> {
    let p = params.with_point(params.xi, g);
    stability::spectral_abscissa(&MeanFieldState::normal(p.n_sites), &p)
}

/// Coupling at which the normal phase's spectral abscissa crosses zero, located by
/// bisection without reference to the analytic threshold.
pub fn np_critical_coupling_numeric(
    params: &LatticeParams,
    controls: &BisectionControls,
) -> Result<f64> {
    params.validate()?;
    let mut lo = 1e-3;
    if np_abscissa(params, lo)? >= 0.0 {
        return Err(Error::BisectionFailure(format!(
            "normal phase not stable at g={lo} (xi={})",
            params.xi
        )));
    }
    let mut hi = 1.0;
    while np_abscissa(params, hi)? <= 0.0 {
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::BisectionFailure("no instability below g=1e4".into()));
        }
    }
    for _ in 0..controls.max_iter {
        if hi - lo <= controls.tol {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        if np_abscissa(params, mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if hi - lo <= controls.tol {
        Ok(0.5 * (lo + hi))
    } else {
        Err(Error::BisectionFailure(format!(
            "interval {lo}..{hi} after {} iterations",
            controls.max_iter
        )))
    }
}

fn hsrp_is_stable(params: &LatticeParams, g: f64) -> Result<bool> {
    let p = params.with_point(params.xi, g);
    match homogeneous_srp_branch(&p)? {
        Some([fp, _]) => Ok(stability::spectral_abscissa(&fp.state, &p)? < 0.0),
        None => Ok(false),
    }
}

/// Coupling above which the homogeneous superradiant branch exists and is linearly
/// stable on a periodic lattice, located by bisection on its spectral abscissa.
pub fn hsrp_stability_onset(params: &LatticeParams, controls: &BisectionControls) -> Result<f64> {
    params.validate()?;
    let mut lo = 1e-3;
    if hsrp_is_stable(params, lo)? {
        return Err(Error::BisectionFailure(format!(
            "homogeneous branch already stable at g={lo}"
        )));
    }
    let mut hi = 1.0;
    while !hsrp_is_stable(params, hi)? {
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::BisectionFailure(
                "homogeneous branch not stable below g=1e4".into(),
            ));
        }
    }
    for _ in 0..controls.max_iter {
        if hi - lo <= controls.tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if hsrp_is_stable(params, mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if hi - lo <= controls.tol {
        Ok(0.5 * (lo + hi))
    } else {
        Err(Error::BisectionFailure(format!(
            "interval {lo}..{hi} after {} iterations",
            controls.max_iter
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalRow {
    pub n_sites: usize,
    pub xi: f64,
    pub g_c_numeric: Option<f64>,
    pub g_c_analytic: Option<f64>,
    /// Infinite-lattice value at the same `ξ`, where defined.
    pub g_c_infinite: Option<f64>,
    pub error: Option<String>,
}

impl CriticalRow {
    pub fn abs_error(&self) -> Option<f64> {
        Some((self.g_c_numeric? - self.g_c_analytic?).abs())
    }
}

/// Numeric (bisection) and analytic normal-phase thresholds for each size and `ξ`.
pub fn critical_line_scan(
    params_base: &LatticeParams,
    bc: BoundaryCondition,
    n_list: &[usize],
    xi_grid: &GridAxis,
    controls: &BisectionControls,
) -> Vec<CriticalRow> {
    let jobs: Vec<(usize, f64)> = n_list
        .iter()
        .flat_map(|&n| xi_grid.values().into_iter().map(move |xi| (n, xi)))
        .collect();
    jobs.par_iter()
        .map(|&(n, xi)| {
            let p = params_base
                .with_bc(bc)
                .with_sites(n)
                .with_point(xi, params_base.g);
            let analytic = critical_coupling_np(&p).map(|c| c.g_c);
            let numeric = np_critical_coupling_numeric(&p, controls);
            let error = match (&numeric, &analytic) {
                (Err(e), _) | (_, Err(e)) => Some(e.to_string()),
                _ => None,
            };
            CriticalRow {
                n_sites: n,
                xi,
                g_c_numeric: numeric.ok(),
                g_c_analytic: analytic.ok(),
                g_c_infinite: critical_coupling_np_infinite(p.omega_a, p.omega_c, p.kappa, xi).ok(),
                error,
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// With `infinite`, a trailing `g_c_infinite` column is added.
pub fn write_critical_csv<W: Write>(
    rows: &[CriticalRow],
    header: &str,
    infinite: bool,
    mut w: W,
) -> io::Result<()> {
    writeln!(w, "{header}")?;
    write!(w, "N,xi,g_c_numeric,g_c_analytic,abs_error")?;
    writeln!(w, "{}", if infinite { ",g_c_infinite" } else { "" })?;
    for r in rows {
        write!(
            w,
            "{},{},{},{},{}",
            r.n_sites,
            r.xi,
            opt(r.g_c_numeric),
            opt(r.g_c_analytic),
            opt(r.abs_error())
        )?;
        if infinite {
            write!(w, ",{}", opt(r.g_c_infinite))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteProfile {
    pub state: MeanFieldState,
    pub settled: bool,
    pub time: f64,
    /// `max_{j,k} |a_j - a_k|`.
    pub homogeneity: f64,
}

impl SiteProfile {
    /// `|Re a_j - median_k Re a_k|` for each site.
    pub fn deviation_from_median(&self) -> Vec<f64> {
        let mut re: Vec<f64> = self.state.a.iter().map(|a| a.re).collect();
        re.sort_by(f64::total_cmp);
        let n = re.len();
        let median = if n % 2 == 1 {
            re[n / 2]
        } else {
            0.5 * (re[n / 2 - 1] + re[n / 2])
        };
        self.state.a.iter().map(|a| (a.re - median).abs()).collect()
    }
}

/// Relaxes from a spatially homogeneous start: every resonator holds `init`, every
/// spin points down.
pub fn site_profile(
    params: &LatticeParams,
    init: Complex64,
    controls: &RelaxControls,
) -> Result<SiteProfile> {
    params.validate()?;
    let mut start = MeanFieldState::normal(params.n_sites);
    start.a.iter_mut().for_each(|a| *a = init);
    let r = relax_to_steady(&start, params, controls)?;
    Ok(SiteProfile {
        homogeneity: r.state.inhomogeneity(),
        state: r.state,
        settled: r.settled,
        time: r.time,
    })
}

pub fn write_profile_csv<W: Write>(
    profile: &SiteProfile,
    header: &str,
    mut w: W,
) -> io::Result<()> {
    writeln!(w, "{header}")?;
    writeln!(w, "j,re_a,im_a,z")?;
    for (j, (a, z)) in profile.state.a.iter().zip(&profile.state.z).enumerate() {
        writeln!(w, "{},{},{},{}", j + 1, a.re, a.im, z)?;
    }
    Ok(())
}
