//! Pattern labels for steady states and canonical forms under the symmetry group.
//!
//! The symmetry group is ℤ₂ (`a, s -> -a, -s`) combined with cyclic shifts on a
//! periodic lattice, or with site reversal on an open chain.
//!
//! Three-site patterns, in order of precedence:
//!
//! | label | photon amplitudes |
//! |-------|-------------------|
//! | `P1`  | all equal, nonzero (periodic only) |
//! | `P2`  | two equal, third different, Re of the pair opposite to the third (periodic) |
//! | `O2`  | `a_1 = -a_3`, `a_2 = 0` (open) |
//! | `O1`  | `a_1 = a_3 != a_2 != 0`, all Re parts the same sign (open) |
//! | `O4`  | `a_1 = a_3 != a_2 != 0`, ends opposite in sign to the middle (open) |
//! | `O3`  | all different and nonzero, Re `a_2` shares its sign with one end only (open) |

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{BoundaryCondition, LatticeParams, MeanFieldState};
use crate::stability::{StabilityReport, Verdict};
use crate::steady_state::FixedPoint;

pub const DEFAULT_EPS_PATTERN: f64 = 1e-5;

/// Coordinates closer than this compare equal when choosing a canonical image.
const CANONICAL_TIE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PatternKind {
    NP,
    InvertedNP,
    P1,
    P2,
    O1,
    O2,
    O3,
    O4,
    Other,
}

impl PatternKind {
    pub fn name(self) -> &'static str {
        match self {
            PatternKind::NP => "NP",
            PatternKind::InvertedNP => "INV",
            PatternKind::P1 => "P1",
            PatternKind::P2 => "P2",
            PatternKind::O1 => "O1",
            PatternKind::O2 => "O2",
            PatternKind::O3 => "O3",
            PatternKind::O4 => "O4",
            PatternKind::Other => "OTHER",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PatternLabel {
    pub kind: PatternKind,
    /// Matched template, or a site fingerprint for `Other`.
    pub detail: String,
}

impl fmt::Display for PatternLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            PatternKind::Other => write!(f, "OTHER{{{}}}", self.detail),
            kind => f.write_str(kind.name()),
        }
    }
}

fn make(kind: PatternKind, detail: impl Into<String>) -> PatternLabel {
    PatternLabel {
        kind,
        detail: detail.into(),
    }
}

/// Every image of `state` under ℤ₂ and the lattice symmetry, identity first.
pub fn symmetry_orbit(state: &MeanFieldState, bc: BoundaryCondition) -> Vec<MeanFieldState> {
    let lattice: Vec<MeanFieldState> = match bc {
        BoundaryCondition::Periodic => (0..state.n_sites()).map(|k| state.shifted(k)).collect(),
        BoundaryCondition::Open => vec![state.clone(), state.reflected()],
    };
    let mut out = Vec::with_capacity(2 * lattice.len());
    for img in &lattice {
        out.push(img.clone());
    }
    for img in &lattice {
        out.push(img.flipped());
    }
    out
}

fn tolerant_order(x: &[f64], y: &[f64]) -> Ordering {
    for (a, b) in x.iter().zip(y) {
        if (a - b).abs() > CANONICAL_TIE {
            return a.total_cmp(b);
        }
    }
    Ordering::Equal
}

/// Lexicographically smallest image of the state over its symmetry orbit.
pub fn canonical_state(state: &MeanFieldState, bc: BoundaryCondition) -> MeanFieldState {
    let mut best: Option<(Vec<f64>, MeanFieldState)> = None;
    for img in symmetry_orbit(state, bc) {
        let key = img.to_real();
        let better = match &best {
            None => true,
            Some((k, _)) => tolerant_order(&key, k) == Ordering::Less,
        };
        if better {
            best = Some((key, img));
        }
    }
    best.map(|(_, s)| s).unwrap_or_else(|| state.clone())
}

pub fn canonicalize(fp: &FixedPoint, params: &LatticeParams) -> MeanFieldState {
    canonical_state(&fp.state, params.bc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sign {
    Pos,
    Neg,
    /// Too close to zero to assert a sign.
    Unknown,
}

fn re_sign(v: f64, eps: f64) -> Sign {
    if v > eps {
        Sign::Pos
    } else if v < -eps {
        Sign::Neg
    } else {
        Sign::Unknown
    }
}

fn opposite(x: Sign, y: Sign) -> bool {
    matches!((x, y), (Sign::Pos, Sign::Neg) | (Sign::Neg, Sign::Pos))
}

fn same(x: Sign, y: Sign) -> bool {
    x != Sign::Unknown && x == y
}

/// Site fingerprint of an arbitrary state: each site gets the index of the first
/// site with the same amplitude (`=k`), of opposite amplitude (`-k`), or `0` if
/// it is dark.
fn fingerprint(state: &MeanFieldState, eps: f64) -> String {
    let a = &state.a;
    let mut parts = Vec::with_capacity(a.len());
    for j in 0..a.len() {
        if a[j].norm() < eps {
            parts.push("0".to_string());
            continue;
        }
        let mut tag = format!("={}", j + 1);
        for k in 0..j {
            if (a[j] - a[k]).norm() < eps {
                tag = format!("={}", k + 1);
                break;
            }
            if (a[j] + a[k]).norm() < eps {
                tag = format!("-{}", k + 1);
                break;
            }
        }
        parts.push(tag);
    }
    parts.join(" ")
}

fn label_state(state: &MeanFieldState, bc: BoundaryCondition, eps: f64) -> PatternLabel {
    let a = &state.a;
    let n = a.len();
    let eq = |i: usize, j: usize| (a[i] - a[j]).norm() < eps;
    let dark = |i: usize| a[i].norm() < eps;

    if (0..n).all(dark) {
        if state.z.iter().all(|z| (z + 0.5).abs() < eps) {
            return make(PatternKind::NP, "a = 0, z = -1/2");
        }
        if state.z.iter().all(|z| (z - 0.5).abs() < eps) {
            return make(PatternKind::InvertedNP, "a = 0, z = +1/2");
        }
        let canon = canonical_state(state, bc);
        let signs: String = canon
            .z
            .iter()
            .map(|z| if *z < 0.0 { 'd' } else { 'u' })
            .collect();
        return make(PatternKind::Other, format!("dark {signs}"));
    }
    if bc == BoundaryCondition::Periodic && (1..n).all(|j| eq(0, j)) {
        return make(PatternKind::P1, "all sites identical");
    }
    if n == 3 {
        let sign = |i: usize| re_sign(a[i].re, eps);
        match bc {
            BoundaryCondition::Periodic => {
                for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
                    if eq(i, j) && !eq(i, k) && opposite(sign(i), sign(k)) {
                        return make(
                            PatternKind::P2,
                            format!("pair ({},{}) against {}", i + 1, j + 1, k + 1),
                        );
                    }
                }
            }
            BoundaryCondition::Open => {
                if dark(1) && (a[0] + a[2]).norm() < eps && !dark(0) {
                    return make(PatternKind::O2, "a1 = -a3, a2 = 0");
                }
                if eq(0, 2) && !eq(0, 1) && !dark(1) && !dark(0) {
                    if same(sign(0), sign(1)) {
                        return make(PatternKind::O1, "a1 = a3 != a2, same signs");
                    }
                    if opposite(sign(0), sign(1)) {
                        return make(PatternKind::O4, "a1 = a3 != a2, ends opposite middle");
                    }
                }
                let distinct = !eq(0, 1) && !eq(1, 2) && !eq(0, 2);
                if distinct && (0..3).all(|j| !dark(j)) {
                    let (s1, s2, s3) = (sign(0), sign(1), sign(2));
                    if s1 != Sign::Unknown
                        && s2 != Sign::Unknown
                        && s3 != Sign::Unknown
                        && (s2 == s1) != (s2 == s3)
                    {
                        return make(PatternKind::O3, "all distinct, middle matches one end");
                    }
                }
            }
        }
    }
    let canon = canonical_state(state, bc);
    make(PatternKind::Other, fingerprint(&canon, eps))
}

/// Template match of a fixed point against the pattern taxonomy.
pub fn label(fp: &FixedPoint, params: &LatticeParams, eps_pattern: f64) -> PatternLabel {
    label_state(&fp.state, params.bc, eps_pattern)
}

pub fn label_of_state(
    state: &MeanFieldState,
    bc: BoundaryCondition,
    eps_pattern: f64,
) -> PatternLabel {
    label_state(state, bc, eps_pattern)
}

/// One symmetry class of stable roots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableClass {
    pub label: PatternLabel,
    pub canonical: MeanFieldState,
    /// Number of stable roots belonging to the class.
    pub members: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StableClassSet {
    pub classes: Vec<StableClass>,
}

impl StableClassSet {
    /// 1 = monostable, 2 = bistable, 3 = tristable.
    pub fn cardinality(&self) -> usize {
        self.classes.len()
    }

    pub fn kinds(&self) -> Vec<PatternKind> {
        self.classes.iter().map(|c| c.label.kind).collect()
    }

    /// Semicolon-joined label strings.
    pub fn joined_labels(&self) -> String {
        self.classes
            .iter()
            .map(|c| c.label.to_string())
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Distinct symmetry classes among the stable roots.
pub fn stable_class_set(
    roots: &[(FixedPoint, StabilityReport)],
    params: &LatticeParams,
    eps_pattern: f64,
    dedup_tol: f64,
) -> StableClassSet {
    let mut classes: Vec<StableClass> = Vec::new();
    for (fp, report) in roots {
        if report.verdict != Verdict::Stable {
            continue;
        }
        let canonical = canonicalize(fp, params);
        if let Some(c) = classes
            .iter_mut()
            .find(|c| c.canonical.distance(&canonical) < dedup_tol)
        {
            c.members += 1;
            continue;
        }
        classes.push(StableClass {
            label: label_state(&canonical, params.bc, eps_pattern),
            canonical,
            members: 1,
        });
    }
    classes.sort_by(|x, y| {
        x.label
            .cmp(&y.label)
            .then_with(|| tolerant_order(&x.canonical.to_real(), &y.canonical.to_real()))
    });
    StableClassSet { classes }
}

/// Region letter of a three-site phase diagram for a given multiset of stable
/// pattern kinds. The flag is `true` when the entry was inferred from numerical
/// reproduction rather than stated explicitly in the pattern definitions.
pub fn phase_letter(
    bc: BoundaryCondition,
    n_sites: usize,
    kinds: &[PatternKind],
) -> Option<(char, bool)> {
    use PatternKind::*;
    if n_sites != 3 {
        return None;
    }
    let mut k = kinds.to_vec();
    k.sort();
    let letter = match (bc, k.as_slice()) {
        (_, [NP]) => ('A', false),
        (BoundaryCondition::Periodic, [P1]) => ('B', false),
        (BoundaryCondition::Periodic, [P2]) => ('C', false),
        (BoundaryCondition::Periodic, [P1, P2]) => ('D', false),
        (BoundaryCondition::Open, _) => return open_letter(&k).map(|c| (c, true)),
        _ => return None,
    };
    Some(letter)
}

fn open_letter(kinds: &[PatternKind]) -> Option<char> {
    use PatternKind::*;
    match kinds {
        [O1] => Some('B'),
        [O2] => Some('C'),
        [O3] => Some('D'),
        [O1, O2] => Some('E'),
        [O1, O3] => Some('F'),
        [O2, O4] => Some('G'),
        [O3, O4] => Some('H'),
        [O1, O3, O4] => Some('I'),
        _ => None,
    }
}
