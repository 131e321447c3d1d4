//! Per-sample phase resolution for two superposed constant-modulus signals.
//!
//! Given `y = A·e^{iθ} + B·e^{iφ}` with known `A` and `B`, only the cosine of
//! `θ − φ` is fixed by `|y|`, which leaves two mirror-image solutions. The
//! decoder picks between them by comparing the four cross-sample phase
//! differences against its own known phase step.

use crate::channel::wrap_angle;
use crate::error::{Error, Result};
use crate::modem::ComplexSample;

/// Default slack on |D| before the amplitudes are declared inconsistent.
pub const DEFAULT_CLAMP_TOLERANCE: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// `θ` from `+iB√(1−D²)`, `φ` from `−iA√(1−D²)`.
    Plus,
    /// `θ` from `−iB√(1−D²)`, `φ` from `+iA√(1−D²)`.
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePairSolution {
    pub theta: f64,
    pub phi: f64,
    pub branch: Branch,
    /// `(|y|² − A² − B²) / (2AB)` before clamping.
    pub d_value: f64,
}

/// Solves for both `(θ, φ)` pairs; index 0 is the plus branch, index 1 the
/// minus branch.
///
/// `D` is clamped into `[−1, 1]` when it is within `clamp_tolerance` of that
/// range and rejected otherwise.
pub fn possible_phase_pairs(
    y: ComplexSample,
    a: f64,
    b: f64,
    clamp_tolerance: f64,
) -> Result<[PhasePairSolution; 2]> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "amplitudes must be positive, got A={a}, B={b}"
        )));
    }
    let d = (y.norm_sqr() - a * a - b * b) / (2.0 * a * b);
    if d.abs() > 1.0 + clamp_tolerance || d.is_nan() {
        return Err(Error::InconsistentAmplitudes { d });
    }
    Ok(solve_clamped(y, a, b, d))
}

/// Same as [`possible_phase_pairs`] but always clamps `D`.
pub(crate) fn solve_clamped(y: ComplexSample, a: f64, b: f64, d: f64) -> [PhasePairSolution; 2] {
    let dc = d.clamp(-1.0, 1.0);
    let root = (1.0 - dc * dc).sqrt();
    let pair = |sign: f64, branch| PhasePairSolution {
        theta: (y * ComplexSample::new(a + b * dc, sign * b * root)).arg(),
        phi: (y * ComplexSample::new(b + a * dc, -sign * a * root)).arg(),
        branch,
        d_value: d,
    };
    [pair(1.0, Branch::Plus), pair(-1.0, Branch::Minus)]
}

/// Outcome of choosing among the four phase-difference candidates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairSelection {
    /// Chosen solution at sample n+1 (index x).
    pub next: PhasePairSolution,
    /// Chosen solution at sample n (index y).
    pub current: PhasePairSolution,
    /// `(x, y)` as 0-based indices into the solution arrays.
    pub indices: (usize, usize),
    /// Chosen Δθ, wrapped.
    pub delta_theta: f64,
    /// Implied Δφ of the other party, wrapped.
    pub delta_phi: f64,
    /// err for (x,y) = (0,0), (0,1), (1,0), (1,1).
    pub err_values: [f64; 4],
}

impl PairSelection {
    pub fn err(&self) -> f64 {
        self.err_values[2 * self.indices.0 + self.indices.1]
    }
}

/// Picks the candidate `(x, y)` minimizing `|wrap(θ_x[n+1] − θ_y[n] − Δθ_s)|`.
/// Ties go to the lowest `(x, y)` in lexicographic order.
#[allow(clippy::needless_range_loop)]
pub fn select_pair(
    pairs_n: &[PhasePairSolution; 2],
    pairs_n1: &[PhasePairSolution; 2],
    known_delta_theta: f64,
) -> PairSelection {
    let mut err_values = [0.0; 4];
    let mut best = 0;
    for x in 0..2 {
        for y in 0..2 {
            let k = 2 * x + y;
            let dt = pairs_n1[x].theta - pairs_n[y].theta;
            err_values[k] = wrap_angle(dt - known_delta_theta).abs();
            if err_values[k] < err_values[best] {
                best = k;
            }
        }
    }
    let (x, y) = (best / 2, best % 2);
    PairSelection {
        next: pairs_n1[x],
        current: pairs_n[y],
        indices: (x, y),
        delta_theta: wrap_angle(pairs_n1[x].theta - pairs_n[y].theta),
        delta_phi: wrap_angle(pairs_n1[x].phi - pairs_n[y].phi),
        err_values,
    }
}
