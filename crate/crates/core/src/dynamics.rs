//! Mean-field equations of motion and their time integration.
//!
//! In rescaled variables, for every site `j`:
//!
//! ```text
//! da_j/dt = -(κ + iω_c) a_j - i g (s_j + s_j*) + i Σ_k h_jk a_k
//! ds_j/dt = -i ω_a s_j + 2 i g (a_j + a_j*) z_j
//! dz_j/dt = -2 g (a_j + a_j*) Im s_j
//! ```
//!
//! where `h` is the hopping matrix (nearest neighbours `ξ`, end-to-end hop `λ`).
//! The flow conserves `|s_j|^2 + z_j^2` exactly.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LatticeParams, MeanFieldState, SITE_DIM};

/// Time derivative of a [`MeanFieldState`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateRate {
    pub a: Vec<Complex64>,
    pub s: Vec<Complex64>,
    pub z: Vec<f64>,
}

impl StateRate {
    pub fn sup_norm(&self) -> f64 {
        let a = self.a.iter().map(|v| v.re.abs().max(v.im.abs()));
        let s = self.s.iter().map(|v| v.re.abs().max(v.im.abs()));
        let z = self.z.iter().map(|v| v.abs());
        a.chain(s).chain(z).fold(0.0, f64::max)
    }

    /// Site-blocked real coordinates, same layout as [`MeanFieldState::to_real`].
    pub fn as_real(&self) -> Vec<f64> {
        MeanFieldState {
            a: self.a.clone(),
            s: self.s.clone(),
            z: self.z.clone(),
        }
        .to_real()
    }

    fn from_real(x: &[f64]) -> Self {
        let st = MeanFieldState::from_real(x);
        StateRate {
            a: st.a,
            s: st.s,
            z: st.z,
        }
    }
}

/// Right-hand side on the site-blocked real coordinate vector.
///
/// `hops` must come from [`LatticeParams::hopping_entries`].
pub(crate) fn rhs_real(
    x: &[f64],
    params: &LatticeParams,
    hops: &[(usize, usize, f64)],
    out: &mut [f64],
) {
    let (wc, wa, g, kappa) = (params.omega_c, params.omega_a, params.g, params.kappa);
    for (b, o) in x.chunks_exact(SITE_DIM).zip(out.chunks_exact_mut(SITE_DIM)) {
        let (ar, ai, sr, si, z) = (b[0], b[1], b[2], b[3], b[4]);
        o[0] = -kappa * ar + wc * ai;
        o[1] = -wc * ar - kappa * ai - 2.0 * g * sr;
        o[2] = wa * si;
        o[3] = -wa * sr + 4.0 * g * ar * z;
        o[4] = -4.0 * g * ar * si;
    }
    for &(j, k, h) in hops {
        let (ar, ai) = (x[SITE_DIM * k], x[SITE_DIM * k + 1]);
        out[SITE_DIM * j] -= h * ai;
        out[SITE_DIM * j + 1] += h * ar;
    }
}

pub(crate) fn rhs_sup_norm_real(x: &[f64], params: &LatticeParams) -> f64 {
    let hops = params.hopping_entries();
    let mut out = vec![0.0; x.len()];
    rhs_real(x, params, &hops, &mut out);
    out.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn rhs(state: &MeanFieldState, params: &LatticeParams) -> Result<StateRate> {
    state.check_shape(params.n_sites)?;
    let x = state.to_real();
    let mut out = vec![0.0; x.len()];
    rhs_real(&x, params, &params.hopping_entries(), &mut out);
    Ok(StateRate::from_real(&out))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationControls {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    /// Recording interval; `None` records every accepted step.
    pub record_every: Option<f64>,
    /// Project every site back onto the spin sphere after each accepted step.
    pub renormalize: bool,
}

impl Default for IntegrationControls {
    fn default() -> Self {
        IntegrationControls {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: 1.0,
            record_every: Some(0.5),
            renormalize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<MeanFieldState>,
    pub params: LatticeParams,
    /// Largest spin-conservation residual seen at any accepted step.
    pub max_constraint_drift: f64,
    pub accepted_steps: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &MeanFieldState {
        self.states
            .last()
            .expect("trajectory always holds the initial state")
    }

    /// Columns `t`, then per site `Re a_j, Im a_j, Re s_j, Im s_j, z_j`.
    pub fn write_csv<W: Write>(&self, mut w: W, header_comment: &str) -> io::Result<()> {
        writeln!(w, "# {header_comment}")?;
        let mut cols = vec!["t".to_string()];
        for j in 1..=self.params.n_sites {
            for c in ["re_a", "im_a", "re_s", "im_s", "z"] {
                cols.push(format!("{c}_{j}"));
            }
        }
        writeln!(w, "{}", cols.join(","))?;
        for (t, st) in self.times.iter().zip(&self.states) {
            write!(w, "{t}")?;
            for v in st.to_real() {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

// Dormand–Prince 5(4) tableau. The flow is autonomous, so the nodes are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Difference between the 5th- and 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// What the per-step observer wants the driver to do next.
enum Flow {
    Continue,
    Stop,
}

struct DriveOutcome {
    t: f64,
    x: Vec<f64>,
    max_drift: f64,
    steps: usize,
    /// Step size proposed for continuing past `t`.
    h_next: f64,
}

fn spin_drift_real(x: &[f64]) -> f64 {
    x.chunks_exact(SITE_DIM)
        .map(|b| (b[2] * b[2] + b[3] * b[3] + b[4] * b[4] - 0.25).abs())
        .fold(0.0, f64::max)
}

fn renormalize_real(x: &mut [f64]) {
    for b in x.chunks_exact_mut(SITE_DIM) {
        let r = (b[2] * b[2] + b[3] * b[3] + b[4] * b[4]).sqrt();
        if r > 0.0 {
            let f = 0.5 / r;
            b[2] *= f;
            b[3] *= f;
            b[4] *= f;
        }
    }
}

/// Adaptive Dormand–Prince integration from `t0` to `t_end`.
///
/// `observe(t, x, f)` is called after every accepted step with the state and its
/// derivative; the initial point is not observed.
fn drive(
    x0: &[f64],
    params: &LatticeParams,
    t0: f64,
    t_end: f64,
    controls: &IntegrationControls,
    h_init: Option<f64>,
    mut observe: impl FnMut(f64, &[f64], &[f64]) -> Flow,
) -> Result<DriveOutcome> {
    let dim = x0.len();
    let hops = params.hopping_entries();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
    let mut x = x0.to_vec();
    let mut stage = vec![0.0; dim];
    let mut x_new = vec![0.0; dim];
    let mut t = t0;
    let mut max_drift = spin_drift_real(&x);
    let mut steps = 0usize;

    rhs_real(&x, params, &hops, &mut k[0]);
    let mut h = h_init.unwrap_or_else(|| {
        let scaled = |v: &[f64]| {
            let sum: f64 = v
                .iter()
                .zip(&x)
                .map(|(vi, xi)| (vi / (controls.atol + controls.rtol * xi.abs())).powi(2))
                .sum();
            (sum / dim as f64).sqrt()
        };
        let (d0, d1) = (scaled(&x), scaled(&k[0]));
        if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        }
    });
    h = h.min(controls.max_step);
    let mut h_next = h;

    while t < t_end {
        let remaining = t_end - t;
        let last = h >= remaining;
        if last {
            h_next = h;
            h = remaining;
        }
        for s in 1..7 {
            for i in 0..dim {
                let mut acc = x[i];
                for (r, ks) in k.iter().enumerate().take(s) {
                    acc += h * A[s][r] * ks[i];
                }
                stage[i] = acc;
            }
            rhs_real(&stage, params, &hops, &mut k[s]);
        }
        // The seventh stage point is the 5th-order solution (FSAL).
        x_new.copy_from_slice(&stage);
        let mut err: f64 = 0.0;
        for i in 0..dim {
            let mut e = 0.0;
            for (r, kr) in k.iter().enumerate() {
                e += E[r] * kr[i];
            }
            e *= h;
            let sc = controls.atol + controls.rtol * x[i].abs().max(x_new[i].abs());
            err = err.max((e / sc).abs());
        }
        if !err.is_finite() {
            h *= 0.1;
        } else if err <= 1.0 {
            t = if last { t_end } else { t + h };
            std::mem::swap(&mut x, &mut x_new);
            if controls.renormalize {
                renormalize_real(&mut x);
                rhs_real(&x, params, &hops, &mut k[6]);
            }
            k.swap(0, 6);
            steps += 1;
            max_drift = max_drift.max(spin_drift_real(&x));
            if let Flow::Stop = observe(t, &x, &k[0]) {
                break;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * factor).min(controls.max_step);
            if !last {
                h_next = h;
            }
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
        }
        if t < t_end && h < 1e-13 * t.abs().max(1.0) {
            return Err(Error::StepFailure {
                time: t,
                step: h,
                last_good: Box::new(MeanFieldState::from_real(&x)),
            });
        }
    }
    Ok(DriveOutcome {
        t,
        x,
        max_drift,
        steps,
        h_next,
    })
}

fn check_start(state0: &MeanFieldState, params: &LatticeParams, t_end: f64) -> Result<()> {
    state0.check_shape(params.n_sites)?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::domain(
            "t_end",
            format!("must be positive, got {t_end}"),
        ));
    }
    if !state0.satisfies_spin_constraint(1e-6) {
        return Err(Error::domain(
            "state0",
            format!("spin constraint violated by {:e}", state0.spin_residual()),
        ));
    }
    Ok(())
}

pub fn integrate(
    state0: &MeanFieldState,
    params: &LatticeParams,
    t_end: f64,
    controls: &IntegrationControls,
) -> Result<Trajectory> {
    check_start(state0, params, t_end)?;
    let x0 = state0.to_real();
    let mut times = vec![0.0];
    let mut states = vec![state0.clone()];
    let every = controls.record_every.filter(|dt| *dt > 0.0);

    // With a fixed cadence, integrate segment by segment so records land exactly.
    let mut max_drift = state0.spin_residual();
    let mut steps = 0;
    match every {
        None => {
            let out = drive(&x0, params, 0.0, t_end, controls, None, |t, x, _| {
                times.push(t);
                states.push(MeanFieldState::from_real(x));
                Flow::Continue
            })?;
            max_drift = max_drift.max(out.max_drift);
            steps += out.steps;
        }
        Some(dt) => {
            let mut x = x0;
            let mut t = 0.0;
            let mut segment = 1usize;
            let mut h = None;
            while t < t_end {
                let target = (segment as f64 * dt).min(t_end);
                let out = drive(&x, params, t, target, controls, h, |_, _, _| Flow::Continue)?;
                h = Some(out.h_next);
                max_drift = max_drift.max(out.max_drift);
                steps += out.steps;
                t = target;
                x = out.x;
                times.push(t);
                states.push(MeanFieldState::from_real(&x));
                segment += 1;
            }
        }
    }
    Ok(Trajectory {
        times,
        states,
        params: *params,
        max_constraint_drift: max_drift,
        accepted_steps: steps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxControls {
    pub t_max: f64,
    /// Settled once the sup-norm of the right-hand side drops below this.
    pub settle_tol: f64,
    pub integration: IntegrationControls,
}

impl Default for RelaxControls {
    fn default() -> Self {
        RelaxControls {
            t_max: 400.0,
            settle_tol: 1e-9,
            integration: IntegrationControls::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relaxation {
    pub state: MeanFieldState,
    pub settled: bool,
    pub time: f64,
    /// Sup-norm of the right-hand side at the final state.
    pub residual: f64,
    pub max_constraint_drift: f64,
}

/// Integrates until the flow comes to rest or `t_max` is reached.
pub fn relax_to_steady(
    state0: &MeanFieldState,
    params: &LatticeParams,
    controls: &RelaxControls,
) -> Result<Relaxation> {
    check_start(state0, params, controls.t_max)?;
    let x0 = state0.to_real();
    let r0 = rhs_sup_norm_real(&x0, params);
    if r0 < controls.settle_tol {
        return Ok(Relaxation {
            state: state0.clone(),
            settled: true,
            time: 0.0,
            residual: r0,
            max_constraint_drift: state0.spin_residual(),
        });
    }
    let mut residual = r0;
    let mut settled = false;
    let ctrl = controls.integration;
    let out = drive(&x0, params, 0.0, controls.t_max, &ctrl, None, |_, _, f| {
        residual = f.iter().fold(0.0, |m, v| m.max(v.abs()));
        if residual < controls.settle_tol {
            settled = true;
            Flow::Stop
        } else {
            Flow::Continue
        }
    })?;
    Ok(Relaxation {
        state: MeanFieldState::from_real(&out.x),
        settled,
        time: out.t,
        residual,
        max_constraint_drift: out.max_drift,
    })
}

/// Normal phase with a seeded random kick of size `scale`.
///
/// Each photon amplitude gets a complex offset of modulus `scale` and random phase;
/// each spin is tilted off the south pole by `scale` along a random tangent
/// direction, staying on the sphere.
pub fn perturbed_normal_state(n_sites: usize, scale: f64, rng_seed: u64) -> MeanFieldState {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut st = MeanFieldState::normal(n_sites);
    for j in 0..n_sites {
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        st.a[j] = Complex64::from_polar(scale, phi);
        let psi: f64 = rng.random_range(0.0..2.0 * PI);
        st.s[j] = Complex64::from_polar(scale, psi);
        st.z[j] = -(0.25 - scale * scale).sqrt();
    }
    st
}
