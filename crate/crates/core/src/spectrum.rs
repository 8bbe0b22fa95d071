//! Closed-form photonic dispersion, normal-phase stability windows in the hop
//! strength, and analytic critical couplings.
//!
//! Mode indices are 1-based throughout (`k = 1..=N`).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoundaryCondition, LatticeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeFrequencies {
    /// `values[k - 1]` is the frequency of mode `k`.
    pub values: Vec<f64>,
    pub bc: BoundaryCondition,
}

impl ModeFrequencies {
    /// Frequency of the 1-based mode `k`.
    pub fn mode(&self, k: usize) -> f64 {
        self.values[k - 1]
    }

    /// Lowest frequency and its 1-based index (smallest index on ties).
    pub fn lowest(&self) -> (usize, f64) {
        let mut best = (1, self.values[0]);
        for (i, &w) in self.values.iter().enumerate().skip(1) {
            if w < best.1 {
                best = (i + 1, w);
            }
        }
        best
    }

    pub fn all_positive(&self) -> bool {
        self.values.iter().all(|&w| w > 0.0)
    }
}

/// Cosine argument of mode `k` (1-based).
fn mode_angle(n_sites: usize, bc: BoundaryCondition, k: usize) -> f64 {
    match bc {
        BoundaryCondition::Periodic => 2.0 * PI * (k as f64 - 1.0) / n_sites as f64,
        BoundaryCondition::Open => PI * k as f64 / (n_sites as f64 + 1.0),
    }
}

pub fn mode_frequencies(params: &LatticeParams) -> ModeFrequencies {
    let values = (1..=params.n_sites)
        .map(|k| params.omega_c - 2.0 * params.xi * mode_angle(params.n_sites, params.bc, k).cos())
        .collect();
    ModeFrequencies {
        values,
        bc: params.bc,
    }
}

/// Open interval of hop strengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiWindow {
    pub lower: f64,
    pub upper: f64,
}

impl XiWindow {
    pub fn contains(&self, xi: f64) -> bool {
        xi > self.lower && xi < self.upper
    }
}

/// Range of `ξ` for which every photonic mode frequency is positive.
pub fn xi_stability_window(n_sites: usize, omega_c: f64, bc: BoundaryCondition) -> XiWindow {
    let (mut cmin, mut cmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 1..=n_sites {
        let c = mode_angle(n_sites, bc, k).cos();
        cmin = cmin.min(c);
        cmax = cmax.max(c);
    }
    // ω_c - 2ξc > 0 for all c: ξ < ω_c/(2 c_max) when c_max > 0, ξ > ω_c/(2 c_min) when c_min < 0.
    let upper = if cmax > 0.0 {
        omega_c / (2.0 * cmax)
    } else {
        f64::INFINITY
    };
    let lower = if cmin < 0.0 {
        omega_c / (2.0 * cmin)
    } else {
        f64::NEG_INFINITY
    };
    XiWindow { lower, upper }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalCoupling {
    pub g_c: f64,
    /// Minimising (or maximising) mode, 1-based.
    pub mode: usize,
}

/// Instability threshold of a single mode of frequency `w`: `(1/2) sqrt(ω_a w (1 + κ²/w²))`.
fn mode_threshold(omega_a: f64, kappa: f64, w: f64) -> f64 {
    0.5 * (omega_a * w * (1.0 + kappa * kappa / (w * w))).sqrt()
}

fn require_positive_modes(modes: &ModeFrequencies) -> Result<()> {
    let (k, w) = modes.lowest();
    if w <= 0.0 {
        return Err(Error::UnstableWindow {
            mode: k,
            min_frequency: w,
        });
    }
    Ok(())
}

/// Coupling above which the normal phase loses stability: minimum over modes of the
/// single-mode threshold.
pub fn critical_coupling_np(params: &LatticeParams) -> Result<CriticalCoupling> {
    params.validate()?;
    let modes = mode_frequencies(params);
    require_positive_modes(&modes)?;
    let mut best = CriticalCoupling {
        g_c: f64::INFINITY,
        mode: 0,
    };
    for (i, &w) in modes.values.iter().enumerate() {
        let g = mode_threshold(params.omega_a, params.kappa, w);
        if g < best.g_c {
            best = CriticalCoupling {
                g_c: g,
                mode: i + 1,
            };
        }
    }
    Ok(best)
}

/// Lower edge of the coupling range in which the homogeneous superradiant state is
/// stable on a periodic lattice.
pub fn critical_coupling_hsrp(params: &LatticeParams) -> Result<CriticalCoupling> {
    params.validate()?;
    if params.bc != BoundaryCondition::Periodic {
        return Err(Error::Boundary {
            required: "periodic",
        });
    }
    let modes = mode_frequencies(params);
    let w1 = modes.mode(1);
    if w1 <= 0.0 {
        return Err(Error::UnstableWindow {
            mode: 1,
            min_frequency: w1,
        });
    }
    let (wa, k2) = (params.omega_a, params.kappa * params.kappa);
    let mut best = CriticalCoupling {
        g_c: f64::NEG_INFINITY,
        mode: 0,
    };
    for (i, &wk) in modes.values.iter().enumerate() {
        let inner = wa * wa * wk * (k2 + w1 * w1).powi(3) / (w1.powi(3) * (k2 + wk * wk));
        let g = 0.5 * inner.powf(0.25);
        if g > best.g_c {
            best = CriticalCoupling {
                g_c: g,
                mode: i + 1,
            };
        }
    }
    Ok(best)
}

/// Infinite-lattice critical coupling for `0 < ξ < ω_c/2`.
pub fn critical_coupling_np_infinite(
    omega_a: f64,
    omega_c: f64,
    kappa: f64,
    xi: f64,
) -> Result<f64> {
    if !(xi > 0.0 && xi < omega_c / 2.0) {
        return Err(Error::domain(
            "xi",
            format!(
                "infinite-lattice formula needs 0 < xi < omega_c/2 = {}, got {xi}",
                omega_c / 2.0
            ),
        ));
    }
    if xi < (omega_c - kappa) / 2.0 {
        Ok(mode_threshold(omega_a, kappa, omega_c - 2.0 * xi))
    } else {
        Ok((omega_a * kappa / 2.0).sqrt())
    }
}
