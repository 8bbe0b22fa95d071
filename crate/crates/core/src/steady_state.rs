//! Fixed points of the mean-field flow.
//!
//! Roots are found with a damped Newton iteration on an augmented system in which
//! each site's `dz_j/dt = 0` equation is replaced by the spin constraint
//! `|s_j|^2 + z_j^2 = 1/4`. Without the replacement the normal-phase family
//! (`a = s = 0`, any `z`) makes the Jacobian singular. The dropped equation is
//! checked after convergence.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify;
use crate::dynamics::{rhs_real, rhs_sup_norm_real};
use crate::error::{Error, Result};
use crate::model::{BoundaryCondition, LatticeParams, MeanFieldState, DEFAULT_EPS_SPIN, SITE_DIM};
use crate::spectrum::mode_frequencies;
use crate::stability::jacobian_real;

/// Where a Newton run started.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedTag {
    Normal,
    InvertedNormal,
    HomogeneousBranch,
    /// Photon sign/zero pattern or lattice mode profile.
    Template(String),
    Random(usize),
    SymmetryImage,
    User,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub state: MeanFieldState,
    /// Sup-norm of the full right-hand side.
    pub residual: f64,
    pub converged: bool,
    pub seed_tag: SeedTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonControls {
    pub newton_tol: f64,
    pub max_iter: usize,
    /// Maximum number of step halvings per iteration.
    pub damping: usize,
}

impl Default for NewtonControls {
    fn default() -> Self {
        NewtonControls {
            newton_tol: 1e-11,
            max_iter: 100,
            damping: 30,
        }
    }
}

/// Augmented residual: per site `Re/Im da`, `Re/Im ds`, spin constraint.
fn augmented_residual(
    x: &[f64],
    params: &LatticeParams,
    hops: &[(usize, usize, f64)],
    out: &mut [f64],
) {
    rhs_real(x, params, hops, out);
    for (b, o) in x.chunks_exact(SITE_DIM).zip(out.chunks_exact_mut(SITE_DIM)) {
        o[4] = b[2] * b[2] + b[3] * b[3] + b[4] * b[4] - 0.25;
    }
}

fn augmented_jacobian(x: &[f64], params: &LatticeParams) -> DMatrix<f64> {
    let mut jac = jacobian_real(x, params);
    for (site, b) in x.chunks_exact(SITE_DIM).enumerate() {
        let row = SITE_DIM * site + 4;
        jac.row_mut(row).fill(0.0);
        jac[(row, SITE_DIM * site + 2)] = 2.0 * b[2];
        jac[(row, SITE_DIM * site + 3)] = 2.0 * b[3];
        jac[(row, SITE_DIM * site + 4)] = 2.0 * b[4];
    }
    jac
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn condition_estimate(m: DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let (max, min) = (sv.max(), sv.min());
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Damped Newton iteration from `seed`.
pub fn newton_solve(
    seed: &MeanFieldState,
    params: &LatticeParams,
    controls: &NewtonControls,
) -> Result<FixedPoint> {
    newton_tagged(seed, params, controls, SeedTag::User)
}

fn newton_tagged(
    seed: &MeanFieldState,
    params: &LatticeParams,
    controls: &NewtonControls,
    tag: SeedTag,
) -> Result<FixedPoint> {
    seed.check_shape(params.n_sites)?;
    let hops = params.hopping_entries();
    let mut x = seed.to_real();
    let dim = x.len();
    let mut f = vec![0.0; dim];
    let mut trial = vec![0.0; dim];
    let mut f_trial = vec![0.0; dim];
    augmented_residual(&x, params, &hops, &mut f);

    let mut iterations = 0;
    while sup(&f) > controls.newton_tol {
        if iterations == controls.max_iter {
            return Err(Error::NotConverged {
                iterations,
                residual: sup(&f),
            });
        }
        iterations += 1;
        let jac = augmented_jacobian(&x, params);
        let rhs = DVector::from_iterator(dim, f.iter().map(|v| -v));
        let step = match jac.clone().lu().solve(&rhs) {
            Some(step) if step.iter().all(|v| v.is_finite()) => step,
            _ => {
                return Err(Error::SingularJacobian {
                    condition: condition_estimate(jac),
                })
            }
        };
        let merit = l2(&f);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=controls.damping {
            for i in 0..dim {
                trial[i] = x[i] + t * step[i];
            }
            augmented_residual(&trial, params, &hops, &mut f_trial);
            if l2(&f_trial) < merit {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NotConverged {
                iterations,
                residual: sup(&f),
            });
        }
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut f, &mut f_trial);
    }

    let state = MeanFieldState::from_real(&x);
    let residual = rhs_sup_norm_real(&x, params);
    // The z-equation was replaced by the constraint; it must hold on its own.
    if residual > controls.newton_tol || !state.satisfies_spin_constraint(DEFAULT_EPS_SPIN) {
        return Err(Error::NotConverged {
            iterations,
            residual,
        });
    }
    Ok(FixedPoint {
        state,
        residual,
        converged: true,
        seed_tag: tag,
    })
}

/// Homogeneous superradiant state on a periodic lattice, both ℤ₂ partners.
///
/// Returns `Ok(None)` when the inversion the formula requires has `|z| >= 1/2`,
/// i.e. at or below the normal-phase threshold of the `k = 1` mode.
pub fn homogeneous_srp_branch(params: &LatticeParams) -> Result<Option<[FixedPoint; 2]>> {
    params.validate()?;
    if params.bc != BoundaryCondition::Periodic {
        return Err(Error::Boundary {
            required: "periodic",
        });
    }
    let w1 = mode_frequencies(params).mode(1);
    if w1 <= 0.0 {
        return Err(Error::UnstableWindow {
            mode: 1,
            min_frequency: w1,
        });
    }
    if params.g == 0.0 {
        return Ok(None);
    }
    let (g, kappa, wa) = (params.g, params.kappa, params.omega_a);
    let z = -(wa * w1) / (8.0 * g * g) * (1.0 + kappa * kappa / (w1 * w1));
    if z.abs() >= 0.5 {
        return Ok(None);
    }
    let root = (1.0 / (4.0 * z * z) - 1.0).sqrt();
    let n = params.n_sites;
    let hops = params.hopping_entries();
    let make = |sign: f64| {
        let s = Complex64::new(sign * z * root, 0.0);
        // Photon amplitude slaved to the spin: a = -2 i g Re(s) / (κ + i ω_{P,1}).
        let a = Complex64::new(0.0, -2.0 * g) * s.re / Complex64::new(kappa, w1);
        let state = MeanFieldState {
            a: vec![a; n],
            s: vec![s; n],
            z: vec![z; n],
        };
        let x = state.to_real();
        let mut out = vec![0.0; x.len()];
        rhs_real(&x, params, &hops, &mut out);
        FixedPoint {
            state,
            residual: sup(&out),
            converged: true,
            seed_tag: SeedTag::HomogeneousBranch,
        }
    };
    Ok(Some([make(1.0), make(-1.0)]))
}

/// `κ Re a = coefficient · Im a`, the real part of `da_j/dt = 0` for a homogeneous
/// amplitude at a site with a given number of neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearCondition {
    pub kappa: f64,
    pub coefficient: f64,
}

/// Proof that no homogeneous superradiant state exists on a finite open chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityCertificate {
    /// End sites, one neighbour: coefficient `ω_c - ξ`.
    pub boundary: LinearCondition,
    /// Interior sites, two neighbours: coefficient `ω_c - 2ξ`.
    pub bulk: LinearCondition,
    /// Determinant `κ ξ` of the two conditions viewed as a 2x2 system in `(Re a, Im a)`.
    pub determinant: f64,
    /// Only `a = 0` satisfies every site's equations simultaneously.
    pub only_trivial_solution: bool,
}

pub fn no_homogeneous_witness(params: &LatticeParams) -> Result<HomogeneityCertificate> {
    params.validate()?;
    if params.bc != BoundaryCondition::Open {
        return Err(Error::domain(
            "bc",
            "certificate only applies to open boundaries",
        ));
    }
    if params.n_sites < 3 {
        return Err(Error::domain("n_sites", "need an interior site (N >= 3)"));
    }
    if params.xi == 0.0 {
        return Err(Error::domain(
            "xi",
            "decoupled sites impose identical conditions",
        ));
    }
    let boundary = LinearCondition {
        kappa: params.kappa,
        coefficient: params.omega_c - params.xi,
    };
    let bulk = LinearCondition {
        kappa: params.kappa,
        coefficient: params.omega_c - 2.0 * params.xi,
    };
    // Subtracting the two conditions leaves ξ Im a = 0. With κ > 0 this forces
    // Re a = 0 too. With κ = 0 the imaginary parts do the same job:
    // (ω_c - ξ) Re a + 2g Re s = 0 at the ends against (ω_c - 2ξ) Re a + 2g Re s = 0
    // in the bulk differ by ξ Re a.
    let determinant = boundary.kappa * (-bulk.coefficient) - bulk.kappa * (-boundary.coefficient);
    Ok(HomogeneityCertificate {
        boundary,
        bulk,
        determinant,
        only_trivial_solution: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FindAllStrategy {
    pub n_random_seeds: usize,
    pub rng_seed: u64,
    pub dedup_tol: f64,
    pub newton: NewtonControls,
}

impl Default for FindAllStrategy {
    fn default() -> Self {
        FindAllStrategy {
            n_random_seeds: 64,
            rng_seed: 0,
            dedup_tol: 1e-6,
            newton: NewtonControls::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    pub params: LatticeParams,
    pub roots: Vec<FixedPoint>,
    pub n_seeds: usize,
    pub n_converged: usize,
    pub n_failed: usize,
}

/// Photon amplitudes used for structured seeds.
const TEMPLATE_AMPLITUDES: [f64; 4] = [0.2, 0.6, 1.2, 2.5];

/// Seed state with the given photon profile and each spin at its local steady
/// orientation for that photon field.
fn slaved_seed(params: &LatticeParams, photons: &[Complex64]) -> MeanFieldState {
    let mut st = MeanFieldState::normal(params.n_sites);
    for (j, &a) in photons.iter().enumerate() {
        // ds/dt = 0 with real s: s = 2 g X z / ω_a, X = 2 Re a.
        let tilt = 2.0 * params.g * 2.0 * a.re / params.omega_a;
        let z = -0.5 / (1.0 + tilt * tilt).sqrt();
        st.a[j] = a;
        st.s[j] = Complex64::new(tilt * z, 0.0);
        st.z[j] = z;
    }
    st
}

/// Sign/zero patterns for small lattices, sign patterns for medium ones, and the
/// hopping eigenmode profiles for every size.
fn template_profiles(params: &LatticeParams) -> Vec<(String, Vec<f64>)> {
    let n = params.n_sites;
    let mut out = Vec::new();
    let symbols = |p: &[f64]| {
        p.iter()
            .map(|v| match v.partial_cmp(&0.0) {
                Some(std::cmp::Ordering::Greater) => '+',
                Some(std::cmp::Ordering::Less) => '-',
                _ => '0',
            })
            .collect::<String>()
    };
    let values: &[f64] = if n <= 4 {
        &[-1.0, 0.0, 1.0]
    } else if n <= 8 {
        &[-1.0, 1.0]
    } else {
        &[]
    };
    if !values.is_empty() {
        let base = values.len();
        for code in 0..base.pow(n as u32) {
            let mut c = code;
            let profile: Vec<f64> = (0..n)
                .map(|_| {
                    let v = values[c % base];
                    c /= base;
                    v
                })
                .collect();
            if profile.iter().all(|v| *v == 0.0) {
                continue;
            }
            out.push((format!("pattern[{}]", symbols(&profile)), profile));
        }
    }
    for k in 1..=n {
        let profiles: Vec<Vec<f64>> = match params.bc {
            BoundaryCondition::Open => {
                vec![(1..=n)
                    .map(|j| (PI * (k * j) as f64 / (n as f64 + 1.0)).sin())
                    .collect()]
            }
            BoundaryCondition::Periodic => {
                let q = 2.0 * PI * (k - 1) as f64 / n as f64;
                vec![
                    (0..n).map(|j| (q * j as f64).cos()).collect(),
                    (0..n).map(|j| (q * j as f64).sin()).collect(),
                ]
            }
        };
        for (i, p) in profiles.into_iter().enumerate() {
            let peak = p.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
            if peak < 1e-12 {
                continue;
            }
            let p: Vec<f64> = p.iter().map(|v| v / peak).collect();
            out.push((format!("mode[{k}.{i}]"), p.clone()));
            out.push((format!("mode[{k}.{i}]-"), p.iter().map(|v| -v).collect()));
        }
    }
    out
}

fn random_seed_state(n: usize, rng: &mut ChaCha8Rng) -> MeanFieldState {
    let mut st = MeanFieldState::normal(n);
    for j in 0..n {
        // Uniform in the unit disk.
        let r = rng.random_range(0.0f64..1.0).sqrt();
        let phi = rng.random_range(0.0..2.0 * PI);
        st.a[j] = Complex64::from_polar(r, phi);
        // Uniform on the lower hemisphere of radius 1/2.
        let z = -0.5 * rng.random_range(0.0f64..1.0);
        let psi = rng.random_range(0.0..2.0 * PI);
        st.s[j] = Complex64::from_polar((0.25 - z * z).sqrt(), psi);
        st.z[j] = z;
    }
    st
}

fn initial_seeds(
    params: &LatticeParams,
    strategy: &FindAllStrategy,
) -> Vec<(SeedTag, MeanFieldState)> {
    let n = params.n_sites;
    let mut seeds = vec![
        (SeedTag::Normal, MeanFieldState::normal(n)),
        (SeedTag::InvertedNormal, MeanFieldState::inverted(n)),
    ];
    if params.bc == BoundaryCondition::Periodic {
        if let Ok(Some(branch)) = homogeneous_srp_branch(params) {
            for fp in branch {
                seeds.push((SeedTag::HomogeneousBranch, fp.state));
            }
        }
    }
    let phase = Complex64::from_polar(1.0, params.kappa.atan2(params.omega_c));
    for (name, profile) in template_profiles(params) {
        for amp in TEMPLATE_AMPLITUDES {
            let photons: Vec<Complex64> = profile.iter().map(|v| phase * (amp * v)).collect();
            seeds.push((
                SeedTag::Template(format!("{name}@{amp}")),
                slaved_seed(params, &photons),
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(strategy.rng_seed);
    for i in 0..strategy.n_random_seeds {
        seeds.push((SeedTag::Random(i), random_seed_state(n, &mut rng)));
    }
    seeds
}

/// Lexicographic order on the real coordinates, used to make output order
/// independent of evaluation order.
pub(crate) fn state_order(x: &MeanFieldState, y: &MeanFieldState) -> std::cmp::Ordering {
    let (xr, yr) = (x.to_real(), y.to_real());
    for (a, b) in xr.iter().zip(&yr) {
        match a.total_cmp(b) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}

/// Keeps the first representative of every cluster of states closer than `tol`.
fn dedup(mut roots: Vec<FixedPoint>, tol: f64) -> Vec<FixedPoint> {
    roots.sort_by(|a, b| state_order(&a.state, &b.state).then_with(|| a.seed_tag.cmp(&b.seed_tag)));
    let mut kept: Vec<FixedPoint> = Vec::new();
    for r in roots {
        if kept.iter().all(|k| k.state.distance(&r.state) >= tol) {
            kept.push(r);
        }
    }
    kept
}

/// Multistart search for every fixed point at `params`.
///
/// Seeds: the normal and inverted states, the homogeneous branch (periodic),
/// structured photon patterns at several amplitudes, and random states. All
/// symmetry images of the converged roots are added, then duplicates removed.
pub fn find_all(params: &LatticeParams, strategy: &FindAllStrategy) -> Result<RootSet> {
    params.validate()?;
    let seeds = initial_seeds(params, strategy);
    let n_seeds = seeds.len();
    let results: Vec<Option<FixedPoint>> = seeds
        .into_par_iter()
        .map(|(tag, st)| newton_tagged(&st, params, &strategy.newton, tag).ok())
        .collect();
    let n_converged = results.iter().filter(|r| r.is_some()).count();
    let roots = dedup(results.into_iter().flatten().collect(), strategy.dedup_tol);

    // Close the set under ℤ₂ and the lattice symmetries.
    let mut all = roots.clone();
    let hops = params.hopping_entries();
    for r in &roots {
        for image in classify::symmetry_orbit(&r.state, params.bc) {
            let x = image.to_real();
            let mut f = vec![0.0; x.len()];
            rhs_real(&x, params, &hops, &mut f);
            let residual = sup(&f);
            let fp = if residual <= strategy.newton.newton_tol {
                Some(FixedPoint {
                    state: image,
                    residual,
                    converged: true,
                    seed_tag: SeedTag::SymmetryImage,
                })
            } else {
                newton_tagged(&image, params, &strategy.newton, SeedTag::SymmetryImage).ok()
            };
            all.extend(fp);
        }
    }
    let roots = dedup(all, strategy.dedup_tol);
    Ok(RootSet {
        params: *params,
        roots,
        n_seeds,
        n_converged,
        n_failed: n_seeds - n_converged,
    })
}

/// Random constraint-respecting state, as used for random Newton seeds.
pub fn random_state(n_sites: usize, rng_seed: u64) -> MeanFieldState {
    random_seed_state(n_sites, &mut ChaCha8Rng::seed_from_u64(rng_seed))
}
