//! Linear stability of fixed points.
//!
//! Each site conserves `|s_j|^2 + z_j^2`, so at any fixed point the gradients of
//! these invariants are left null vectors of the Jacobian and contribute `N`
//! structural zero eigenvalues. They carry no dynamical information: the verdict
//! is taken from the Jacobian compressed onto the tangent space of the constraint
//! manifold, whose `4N` eigenvalues are exactly the remaining ones.

use std::io::{self, Write};

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LatticeParams, MeanFieldState, SITE_DIM};
use crate::steady_state::FixedPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityControls {
    pub eps_marginal: f64,
    pub eps_zero: f64,
}

impl Default for StabilityControls {
    fn default() -> Self {
        StabilityControls {
            eps_marginal: 1e-7,
            eps_zero: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub verdict: Verdict,
    /// Largest real part among the physical (non-structural) eigenvalues.
    pub spectral_abscissa: f64,
    /// All `5N` eigenvalues of the full Jacobian.
    pub eigenvalues: Vec<Complex64>,
    /// `structural[i]` marks `eigenvalues[i]` as a conservation-law null mode.
    pub structural: Vec<bool>,
    /// The `4N` eigenvalues of the Jacobian restricted to the constraint manifold.
    pub physical_eigenvalues: Vec<Complex64>,
    pub n_structural_zeros: usize,
}

impl StabilityReport {
    /// Columns `re, im, structural`.
    pub fn write_eigenvalue_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "re,im,structural")?;
        for (ev, flag) in self.eigenvalues.iter().zip(&self.structural) {
            writeln!(w, "{},{},{}", ev.re, ev.im, u8::from(*flag))?;
        }
        Ok(())
    }
}

/// Analytic Jacobian of the real right-hand side with respect to the site-blocked
/// coordinates `(Re a_j, Im a_j, Re s_j, Im s_j, z_j)`.
pub fn jacobian(state: &MeanFieldState, params: &LatticeParams) -> Result<DMatrix<f64>> {
    state.check_shape(params.n_sites)?;
    Ok(jacobian_real(&state.to_real(), params))
}

pub(crate) fn jacobian_real(x: &[f64], params: &LatticeParams) -> DMatrix<f64> {
    let dim = x.len();
    let (wc, wa, g, kappa) = (params.omega_c, params.omega_a, params.g, params.kappa);
    let mut jac = DMatrix::zeros(dim, dim);
    for (site, b) in x.chunks_exact(SITE_DIM).enumerate() {
        let o = SITE_DIM * site;
        let (ar, si, z) = (b[0], b[3], b[4]);
        jac[(o, o)] = -kappa;
        jac[(o, o + 1)] = wc;
        jac[(o + 1, o)] = -wc;
        jac[(o + 1, o + 1)] = -kappa;
        jac[(o + 1, o + 2)] = -2.0 * g;
        jac[(o + 2, o + 3)] = wa;
        jac[(o + 3, o)] = 4.0 * g * z;
        jac[(o + 3, o + 2)] = -wa;
        jac[(o + 3, o + 4)] = 4.0 * g * ar;
        jac[(o + 4, o)] = -4.0 * g * si;
        jac[(o + 4, o + 3)] = -4.0 * g * ar;
    }
    for (j, k, h) in params.hopping_entries() {
        let (oj, ok) = (SITE_DIM * j, SITE_DIM * k);
        jac[(oj, ok + 1)] -= h;
        jac[(oj + 1, ok)] += h;
    }
    jac
}

/// Gradients of `|s_j|^2 + z_j^2`, one column per site.
fn constraint_gradients(x: &[f64]) -> DMatrix<f64> {
    let n = x.len() / SITE_DIM;
    let mut grads = DMatrix::zeros(x.len(), n);
    for (site, b) in x.chunks_exact(SITE_DIM).enumerate() {
        let o = SITE_DIM * site;
        grads[(o + 2, site)] = 2.0 * b[2];
        grads[(o + 3, site)] = 2.0 * b[3];
        grads[(o + 4, site)] = 2.0 * b[4];
    }
    grads
}

/// Orthonormal basis (columns) of the tangent space of the constraint manifold:
/// both photon quadratures plus two directions tangent to each Bloch sphere.
pub(crate) fn tangent_basis(x: &[f64]) -> DMatrix<f64> {
    let n = x.len() / SITE_DIM;
    let mut q = DMatrix::zeros(x.len(), 4 * n);
    for (site, b) in x.chunks_exact(SITE_DIM).enumerate() {
        let (o, c) = (SITE_DIM * site, 4 * site);
        q[(o, c)] = 1.0;
        q[(o + 1, c + 1)] = 1.0;
        let r = (b[2] * b[2] + b[3] * b[3] + b[4] * b[4]).sqrt();
        let normal = if r > 0.0 {
            [b[2] / r, b[3] / r, b[4] / r]
        } else {
            [0.0, 0.0, -1.0]
        };
        // Start from the axis least aligned with the normal.
        let axis = (0..3)
            .min_by(|&i, &j| normal[i].abs().total_cmp(&normal[j].abs()))
            .unwrap_or(0);
        let mut e1 = [0.0; 3];
        e1[axis] = 1.0;
        let dot = normal[axis];
        for i in 0..3 {
            e1[i] -= dot * normal[i];
        }
        let len = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
        for v in &mut e1 {
            *v /= len;
        }
        let e2 = [
            normal[1] * e1[2] - normal[2] * e1[1],
            normal[2] * e1[0] - normal[0] * e1[2],
            normal[0] * e1[1] - normal[1] * e1[0],
        ];
        for i in 0..3 {
            q[(o + 2 + i, c + 2)] = e1[i];
            q[(o + 2 + i, c + 3)] = e2[i];
        }
    }
    q
}

/// The `4N x 4N` Jacobian compressed onto the constraint tangent space.
pub fn reduced_jacobian(state: &MeanFieldState, params: &LatticeParams) -> Result<DMatrix<f64>> {
    state.check_shape(params.n_sites)?;
    let x = state.to_real();
    let q = tangent_basis(&x);
    Ok(q.transpose() * jacobian_real(&x, params) * q)
}

/// Iteration cap for the Schur solver.
const MAX_SOLVER_ITER: usize = 10_000;

fn eigenvalues(m: DMatrix<f64>) -> Result<Vec<Complex64>> {
    let dim = m.nrows();
    let schur =
        Schur::try_new(m, f64::EPSILON, MAX_SOLVER_ITER).ok_or(Error::EigenSolver { dim })?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|c| Complex64::new(c.re, c.im))
        .collect())
}

fn abscissa(evs: &[Complex64]) -> f64 {
    evs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Spectral abscissa of the physical modes at `state`, skipping the structural checks.
pub fn spectral_abscissa(state: &MeanFieldState, params: &LatticeParams) -> Result<f64> {
    Ok(abscissa(&eigenvalues(reduced_jacobian(state, params)?)?))
}

pub fn verdict_from_abscissa(abscissa: f64, eps_marginal: f64) -> Verdict {
    if abscissa < -eps_marginal {
        Verdict::Stable
    } else if abscissa > eps_marginal {
        Verdict::Unstable
    } else {
        Verdict::Marginal
    }
}

/// Stability of an arbitrary on-manifold state (normally a fixed point).
pub fn classify_state(
    state: &MeanFieldState,
    params: &LatticeParams,
    controls: &StabilityControls,
) -> Result<StabilityReport> {
    state.check_shape(params.n_sites)?;
    let n = params.n_sites;
    let x = state.to_real();
    let jac = jacobian_real(&x, params);

    // Structural modes: constraint gradients lying in the left null space of J.
    let scale = jac.norm().max(1.0);
    let grads = constraint_gradients(&x);
    let found = grads
        .column_iter()
        .filter(|g| {
            let norm = g.norm();
            norm > 0.0 && (g.transpose() * &jac).norm() <= controls.eps_zero * norm * scale
        })
        .count();
    let full = eigenvalues(jac)?;
    let near_zero = full.iter().filter(|e| e.norm() < controls.eps_zero).count();
    if found != n || near_zero < n {
        return Err(Error::ZeroModeMismatch {
            expected: n,
            found: if found != n { found } else { near_zero },
        });
    }

    // Flag the n eigenvalues closest to the origin as the structural ones.
    let mut order: Vec<usize> = (0..full.len()).collect();
    order.sort_by(|&i, &j| full[i].norm().total_cmp(&full[j].norm()));
    let mut structural = vec![false; full.len()];
    for &i in order.iter().take(n) {
        structural[i] = true;
    }

    let q = tangent_basis(&x);
    let reduced = q.transpose() * jacobian_real(&x, params) * q;
    let physical = eigenvalues(reduced)?;
    let spectral_abscissa = abscissa(&physical);
    Ok(StabilityReport {
        verdict: verdict_from_abscissa(spectral_abscissa, controls.eps_marginal),
        spectral_abscissa,
        eigenvalues: full,
        structural,
        physical_eigenvalues: physical,
        n_structural_zeros: n,
    })
}

pub fn classify(
    fp: &FixedPoint,
    params: &LatticeParams,
    controls: &StabilityControls,
) -> Result<StabilityReport> {
    if !fp.converged {
        return Err(Error::domain(
            "fixed_point",
            "stability requires a converged fixed point",
        ));
    }
    classify_state(&fp.state, params, controls)
}

/// Characteristic polynomial `det(λI - M)`, coefficients from the leading (monic)
/// term down to the constant, via Hessenberg reduction and the La Budde recurrence.
pub fn characteristic_polynomial(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let h = m.clone().hessenberg().h();
    // p[i] holds the characteristic polynomial of the leading i x i block,
    // stored lowest degree first.
    let mut p: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    p.push(vec![1.0]);
    for i in 1..=n {
        let hii = h[(i - 1, i - 1)];
        let prev = &p[i - 1];
        let mut next = vec![0.0; i + 1];
        for (d, c) in prev.iter().enumerate() {
            next[d + 1] += c;
            next[d] -= hii * c;
        }
        let mut sub_prod = 1.0;
        for m_back in 1..i {
            // h_{i-m, i} * prod_{j=i-m+1}^{i} h_{j, j-1}   (1-based)
            sub_prod *= h[(i - m_back, i - m_back - 1)];
            let coef = h[(i - m_back - 1, i - 1)] * sub_prod;
            if coef == 0.0 {
                continue;
            }
            for (d, c) in p[i - m_back - 1].iter().enumerate() {
                next[d] -= coef * c;
            }
        }
        p.push(next);
    }
    let mut out = p.pop().unwrap_or_else(|| vec![1.0]);
    out.reverse();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RouthVerdict {
    /// All roots in the open left half-plane.
    Stable,
    /// Number of sign changes in the first column (roots in the right half-plane).
    Unstable(usize),
    /// A first-column entry vanished; the plain test is inconclusive.
    Indeterminate,
}

/// Routh–Hurwitz test on a polynomial given from the leading coefficient down.
pub fn routh_hurwitz(coeffs: &[f64]) -> RouthVerdict {
    let lead = coeffs.iter().position(|c| *c != 0.0);
    let Some(lead) = lead else {
        return RouthVerdict::Indeterminate;
    };
    let sign = coeffs[lead].signum();
    let c: Vec<f64> = coeffs[lead..].iter().map(|v| v * sign).collect();
    let degree = c.len() - 1;
    if degree == 0 {
        return RouthVerdict::Stable;
    }
    let width = degree / 2 + 1;
    let mut prev: Vec<f64> = (0..width)
        .map(|i| c.get(2 * i).copied().unwrap_or(0.0))
        .collect();
    let mut cur: Vec<f64> = (0..width)
        .map(|i| c.get(2 * i + 1).copied().unwrap_or(0.0))
        .collect();
    let mut first = vec![prev[0], cur[0]];
    let scale = c.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    for _ in 2..=degree {
        let pivot = cur[0];
        let row_scale = cur
            .iter()
            .fold(0.0, |m: f64, v| m.max(v.abs()))
            .max(scale * 1e-300);
        if pivot.abs() <= 1e-12 * row_scale {
            return RouthVerdict::Indeterminate;
        }
        let mut next = vec![0.0; width];
        for j in 0..width - 1 {
            next[j] = (pivot * prev[j + 1] - prev[0] * cur[j + 1]) / pivot;
        }
        first.push(next[0]);
        prev = cur;
        cur = next;
    }
    let last_scale = prev.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if first.last().is_none_or(|v| {
        v.abs() <= 1e-12 * last_scale.max(f64::MIN_POSITIVE)
    }) {
        return RouthVerdict::Indeterminate;
    }
    let changes = first
        .windows(2)
        .filter(|w| (w[0] > 0.0) != (w[1] > 0.0))
        .count();
    if changes == 0 {
        RouthVerdict::Stable
    } else {
        RouthVerdict::Unstable(changes)
    }
}

/// Routh–Hurwitz verdict on the reduced Jacobian at `state`.
pub fn routh_hurwitz_verdict(
    state: &MeanFieldState,
    params: &LatticeParams,
) -> Result<RouthVerdict> {
    Ok(routh_hurwitz(&characteristic_polynomial(
        &reduced_jacobian(state, params)?,
    )))
}
