//! Lattice parameters and the rescaled mean-field state.
//!
//! Photon amplitudes are stored as `a_j = <c_j>/sqrt(N_a)`, spin coherences as
//! `s_j = <S_j^->/N_a` and inversions as `z_j = <S_j^z>/N_a`, so the atom number
//! never appears. Every site then lives on the Bloch sphere `|s_j|^2 + z_j^2 = 1/4`.
//!
//! All frequencies are in units of a reference frequency `ω`, times in `1/ω`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance on the per-site spin-conservation residual.
pub const DEFAULT_EPS_SPIN: f64 = 1e-9;

/// Number of real coordinates per site: `Re a, Im a, Re s, Im s, z`.
pub const SITE_DIM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    /// End-to-end hop equal to the nearest-neighbour hop.
    #[serde(alias = "pbc")]
    Periodic,
    /// No hop between the first and last resonator.
    #[serde(alias = "obc")]
    Open,
}

impl BoundaryCondition {
    pub fn short_name(self) -> &'static str {
        match self {
            BoundaryCondition::Periodic => "pbc",
            BoundaryCondition::Open => "obc",
        }
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pbc" | "periodic" => Ok(BoundaryCondition::Periodic),
            "obc" | "open" => Ok(BoundaryCondition::Open),
            other => Err(Error::domain(
                "bc",
                format!("unknown boundary condition '{other}'"),
            )),
        }
    }
}

/// Physical parameters of the lattice. The end-to-end hop is derived from `bc`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    pub n_sites: usize,
    pub omega_c: f64,
    pub omega_a: f64,
    pub g: f64,
    pub xi: f64,
    pub kappa: f64,
    pub bc: BoundaryCondition,
}

impl LatticeParams {
    /// Resonant units (`ω_a = ω_c = 1`), `κ = 0.4`, with the given geometry and couplings.
    pub fn resonant(n_sites: usize, bc: BoundaryCondition, xi: f64, g: f64) -> Self {
        LatticeParams {
            n_sites,
            omega_c: 1.0,
            omega_a: 1.0,
            g,
            xi,
            kappa: 0.4,
            bc,
        }
    }

    pub fn with_point(self, xi: f64, g: f64) -> Self {
        LatticeParams { xi, g, ..self }
    }

    pub fn with_bc(self, bc: BoundaryCondition) -> Self {
        LatticeParams { bc, ..self }
    }

    pub fn with_sites(self, n_sites: usize) -> Self {
        LatticeParams { n_sites, ..self }
    }

    /// Hop between the first and last resonator.
    pub fn boundary_hop(&self) -> f64 {
        match self.bc {
            BoundaryCondition::Periodic => self.xi,
            BoundaryCondition::Open => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::domain(
                "n_sites",
                format!("need at least 2 sites, got {}", self.n_sites),
            ));
        }
        let positive = [("omega_c", self.omega_c), ("omega_a", self.omega_a)];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::domain(
                    field,
                    format!("must be positive, got {value}"),
                ));
            }
        }
        let non_negative = [("kappa", self.kappa), ("g", self.g)];
        for (field, value) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::domain(
                    field,
                    format!("must be non-negative, got {value}"),
                ));
            }
        }
        if !self.xi.is_finite() {
            return Err(Error::domain(
                "xi",
                format!("must be finite, got {}", self.xi),
            ));
        }
        Ok(())
    }

    /// Nonzero entries `(j, k, h_jk)` of the real symmetric hopping matrix, 0-based.
    ///
    /// Entries that coincide (N = 2 periodic, where the neighbour and the end-to-end
    /// hop connect the same pair) are accumulated.
    pub fn hopping_entries(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n_sites;
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * n);
        let mut push = |j: usize, k: usize, h: f64| {
            if h == 0.0 {
                return;
            }
            if let Some(e) = entries.iter_mut().find(|e| e.0 == j && e.1 == k) {
                e.2 += h;
            } else {
                entries.push((j, k, h));
            }
        };
        for j in 0..n.saturating_sub(1) {
            push(j, j + 1, self.xi);
            push(j + 1, j, self.xi);
        }
        let lambda = self.boundary_hop();
        if n >= 1 {
            push(0, n - 1, lambda);
            push(n - 1, 0, lambda);
        }
        entries.sort_by_key(|e| (e.0, e.1));
        entries
    }
}

impl fmt::Display for LatticeParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n_sites={} bc={} omega_c={} omega_a={} g={} xi={} kappa={}",
            self.n_sites, self.bc, self.omega_c, self.omega_a, self.g, self.xi, self.kappa
        )
    }
}

/// Per-site rescaled order parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldState {
    pub a: Vec<Complex64>,
    pub s: Vec<Complex64>,
    pub z: Vec<f64>,
}

impl MeanFieldState {
    /// Normal phase: empty resonators, every spin pointing down.
    pub fn normal(n_sites: usize) -> Self {
        Self::uniform_spin(n_sites, -0.5)
    }

    /// Population-inverted counterpart of the normal phase (`z_j = +1/2`).
    pub fn inverted(n_sites: usize) -> Self {
        Self::uniform_spin(n_sites, 0.5)
    }

    fn uniform_spin(n_sites: usize, z: f64) -> Self {
        MeanFieldState {
            a: vec![Complex64::new(0.0, 0.0); n_sites],
            s: vec![Complex64::new(0.0, 0.0); n_sites],
            z: vec![z; n_sites],
        }
    }

    pub fn n_sites(&self) -> usize {
        self.a.len()
    }

    /// Checks that all three per-site vectors have the same length.
    pub fn check_shape(&self, expected: usize) -> Result<()> {
        for got in [self.a.len(), self.s.len(), self.z.len()] {
            if got != expected {
                return Err(Error::Shape { expected, got });
            }
        }
        Ok(())
    }

    /// `max_j | |s_j|^2 + z_j^2 - 1/4 |`.
    pub fn spin_residual(&self) -> f64 {
        self.s
            .iter()
            .zip(&self.z)
            .map(|(s, z)| (s.norm_sqr() + z * z - 0.25).abs())
            .fold(0.0, f64::max)
    }

    pub fn satisfies_spin_constraint(&self, eps_spin: f64) -> bool {
        self.spin_residual() <= eps_spin && self.z.iter().all(|z| z.abs() <= 0.5 + eps_spin)
    }

    /// Rescales each `(s_j, z_j)` back onto the sphere of radius 1/2.
    pub fn renormalize_spins(&mut self) {
        for (s, z) in self.s.iter_mut().zip(self.z.iter_mut()) {
            let r = (s.norm_sqr() + *z * *z).sqrt();
            if r > 0.0 {
                let f = 0.5 / r;
                *s *= f;
                *z *= f;
            } else {
                *z = -0.5;
            }
        }
    }

    /// Site-blocked real coordinates `[Re a_j, Im a_j, Re s_j, Im s_j, z_j]`.
    pub fn to_real(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(SITE_DIM * self.n_sites());
        for j in 0..self.n_sites() {
            out.extend_from_slice(&[
                self.a[j].re,
                self.a[j].im,
                self.s[j].re,
                self.s[j].im,
                self.z[j],
            ]);
        }
        out
    }

    pub fn from_real(x: &[f64]) -> Self {
        debug_assert_eq!(x.len() % SITE_DIM, 0);
        let n = x.len() / SITE_DIM;
        let mut st = MeanFieldState::normal(n);
        for (j, b) in x.chunks_exact(SITE_DIM).enumerate() {
            st.a[j] = Complex64::new(b[0], b[1]);
            st.s[j] = Complex64::new(b[2], b[3]);
            st.z[j] = b[4];
        }
        st
    }

    /// Sup-norm distance over all real coordinates.
    pub fn distance(&self, other: &MeanFieldState) -> f64 {
        self.to_real()
            .iter()
            .zip(other.to_real())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_photon_amplitude(&self) -> f64 {
        self.a.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// `max_{j,k} |a_j - a_k|`.
    pub fn inhomogeneity(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, aj) in self.a.iter().enumerate() {
            for ak in &self.a[j + 1..] {
                worst = worst.max((aj - ak).norm());
            }
        }
        worst
    }

    /// The ℤ₂ image `(a, s, z) -> (-a, -s, z)`.
    pub fn flipped(&self) -> Self {
        MeanFieldState {
            a: self.a.iter().map(|a| -a).collect(),
            s: self.s.iter().map(|s| -s).collect(),
            z: self.z.clone(),
        }
    }

    /// Cyclic shift: site `j` of the result holds site `j + shift (mod N)` of `self`.
    pub fn shifted(&self, shift: usize) -> Self {
        let n = self.n_sites();
        let idx = |j: usize| (j + shift) % n;
        MeanFieldState {
            a: (0..n).map(|j| self.a[idx(j)]).collect(),
            s: (0..n).map(|j| self.s[idx(j)]).collect(),
            z: (0..n).map(|j| self.z[idx(j)]).collect(),
        }
    }

    /// Site order reversal `j -> N + 1 - j`.
    pub fn reflected(&self) -> Self {
        let mut out = self.clone();
        out.a.reverse();
        out.s.reverse();
        out.z.reverse();
        out
    }
}

/// The normal-phase state of an `n_sites` lattice.
pub fn normal_state(n_sites: usize) -> MeanFieldState {
    MeanFieldState::normal(n_sites)
}
