//! Joint estimation of the two interfering amplitudes.
//!
//! Three estimators are provided:
//!
//! * **direct**: `√mean|y|²` over a segment where only one party is present;
//! * **legacy**: inverts the moment pair `μ = A²+B²`, `σ = A²+B²+4AB/π`.
//!   For MSK the cross term does not average over the positive lobe of a
//!   cosine: within a packet `cos(θ−φ)` only takes the values `±cos R`, so
//!   the measured statistic is `σ = A²+B²+2AB|cos R|` and the inversion is
//!   biased. The result is also symmetric in A and B, so it cannot say which
//!   amplitude belongs to whom;
//! * **geometric**: at every sample where the two senders' bits differ the
//!   interference flips between constructive and destructive, and the pair
//!   `(X₁, X₂) = (y[n−1], y[n])` spans two parallelograms whose diagonals give
//!   `A² , B² = ¼(|X₁|²+|X₂|²) ± ½|X₁||X₂|·sin∠(X₂/X₁)`. The sign of the sine
//!   together with the decoder's own next bit tells which root is its own.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modem::{Bit, ComplexSample};

/// Which amplitude estimator to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Direct,
    Legacy,
    Geometric,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Direct => "direct",
            Strategy::Legacy => "legacy",
            Strategy::Geometric => "geometric",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Strategy::Direct),
            "legacy" => Ok(Strategy::Legacy),
            "geometric" => Ok(Strategy::Geometric),
            _ => Err(Error::InvalidArgument(format!("unknown strategy `{s}`"))),
        }
    }
}

/// Mean energy `μ` and above-mean statistic `σ` of an interfered region.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyStats {
    pub mu: f64,
    pub sigma: f64,
    pub n_samples: usize,
}

impl EnergyStats {
    pub fn measure(samples: &[ComplexSample]) -> Result<Self> {
        let mu = mean_energy(samples)?;
        Ok(Self {
            mu,
            sigma: sigma_statistic(samples, mu)?,
            n_samples: samples.len(),
        })
    }
}

pub fn mean_energy(samples: &[ComplexSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("mean energy of an empty region".into()));
    }
    Ok(samples.iter().map(|y| y.norm_sqr()).sum::<f64>() / samples.len() as f64)
}

/// `2/N · Σ_{|y|² > μ} |y|²` with `N` the total sample count.
pub fn sigma_statistic(samples: &[ComplexSample], mu: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("sigma statistic of an empty region".into()));
    }
    let above: f64 = samples
        .iter()
        .map(|y| y.norm_sqr())
        .filter(|&e| e > mu)
        .sum();
    Ok(2.0 * above / samples.len() as f64)
}

/// `A² + B² + 2AB|cos R|`: what `σ` converges to for an MSK frame.
pub fn msk_sigma(a: f64, b: f64, initial_angle: f64) -> f64 {
    a * a + b * b + 2.0 * a * b * initial_angle.cos().abs()
}

/// `A² + B² + 4AB/π`: the value the legacy estimator assumes for `σ`.
pub fn legacy_sigma(a: f64, b: f64) -> f64 {
    a * a + b * b + 4.0 * a * b / PI
}

/// Inverts `μ = A²+B²`, `σ − μ = 4AB/π`. Returns `(larger, smaller)`; the
/// result is not attributable to either party.
pub fn legacy_joint_estimate(mu: f64, sigma: f64) -> Result<(f64, f64)> {
    if !(sigma >= mu) {
        return Err(Error::InconsistentStatistics(format!("sigma {sigma} below mu {mu}")));
    }
    let product = PI * (sigma - mu) / 4.0;
    let sum_sq = mu + 2.0 * product;
    let diff_sq = mu - 2.0 * product;
    if diff_sq < 0.0 {
        return Err(Error::InconsistentStatistics(format!(
            "mu − 2AB = {diff_sq} is negative"
        )));
    }
    let (s, d) = (sum_sq.sqrt(), diff_sq.sqrt());
    let (larger, smaller) = ((s + d) / 2.0, (s - d) / 2.0);
    if !(smaller > 0.0) {
        return Err(Error::InconsistentStatistics("zero amplitude".into()));
    }
    Ok((larger, smaller))
}

/// Parameters of transformation detection and per-event assignment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometricConfig {
    /// Multiplies the `σ − μ` detection threshold.
    pub threshold_factor: f64,
    /// Minimum usable threshold, as a fraction of `μ`.
    pub noise_floor: f64,
    /// Events whose angle is this close to 0 or π are discarded.
    pub tie_epsilon: f64,
    /// Drop per-event amplitudes more than 3 MADs from the median.
    pub reject_outliers: bool,
    /// Keep per-event amplitude pairs in the estimate.
    pub keep_diagnostics: bool,
}

impl Default for GeometricConfig {
    fn default() -> Self {
        Self {
            threshold_factor: 1.0,
            noise_floor: 1e-6,
            tie_epsilon: 1e-3,
            reject_outliers: false,
            keep_diagnostics: false,
        }
    }
}

/// A constructive/destructive flip between `y[index−1]` and `y[index]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransformationEvent {
    pub index: usize,
    pub x1_mag: f64,
    pub x2_mag: f64,
    /// `arg(X₂/X₁)` in `[0, 2π)`.
    pub angle: f64,
    pub self_next_bit: Bit,
}

impl TransformationEvent {
    pub fn new(samples: &[ComplexSample], index: usize, self_next_bit: Bit) -> Self {
        let (x1, x2) = (samples[index - 1], samples[index]);
        Self {
            index,
            x1_mag: x1.norm(),
            x2_mag: x2.norm(),
            angle: (x2 * x1.conj()).arg().rem_euclid(TAU),
            self_next_bit,
        }
    }
}

/// Indices `n` where `| |y[n]|² − |y[n−1]|² |` exceeds
/// `threshold_factor · (σ − μ)`.
pub fn detect_transformations(
    samples: &[ComplexSample],
    stats: &EnergyStats,
    cfg: &GeometricConfig,
) -> Result<Vec<usize>> {
    let threshold = cfg.threshold_factor * (stats.sigma - stats.mu);
    let floor = cfg.noise_floor * stats.mu;
    if !(threshold > floor) {
        return Err(Error::UndetectableTransformations { threshold, floor });
    }
    Ok(samples
        .windows(2)
        .enumerate()
        .filter(|(_, w)| (w[1].norm_sqr() - w[0].norm_sqr()).abs() > threshold)
        .map(|(i, _)| i + 1)
        .collect())
}

/// Both parallelogram sides from one event: `(P, Q)` with `P` taking `+`.
pub fn geometric_amplitudes(x1_mag: f64, x2_mag: f64, angle: f64) -> Result<(f64, f64)> {
    if !(x1_mag > 0.0 && x2_mag > 0.0) {
        return Err(Error::DegenerateEvent);
    }
    let base = 0.25 * (x1_mag * x1_mag + x2_mag * x2_mag);
    let cross = 0.5 * x1_mag * x2_mag * angle.sin();
    let p = (base + cross).max(0.0);
    let q = (base - cross).max(0.0);
    if p == 0.0 && q == 0.0 {
        return Err(Error::DegenerateEvent);
    }
    Ok((p.sqrt(), q.sqrt()))
}

/// Attributes `(P, Q)` to `(self, other)`.
///
/// When the own next bit is 1 the own amplitude is the larger one iff the
/// angle lies in (0, π); when it is 0, iff the angle lies in (π, 2π).
pub fn assign_amplitudes(pair: (f64, f64), angle: f64, self_next_bit: Bit, tie_epsilon: f64) -> Result<(f64, f64)> {
    let angle = angle.rem_euclid(TAU);
    let near = |x: f64| (angle - x).abs() < tie_epsilon;
    if near(0.0) || near(PI) || near(TAU) {
        return Err(Error::AmbiguousEvent { angle });
    }
    let upper_half = angle < PI;
    let self_is_larger = match self_next_bit {
        Bit::One => upper_half,
        Bit::Zero => !upper_half,
    };
    let (larger, smaller) = if pair.0 >= pair.1 { pair } else { (pair.1, pair.0) };
    Ok(if self_is_larger {
        (larger, smaller)
    } else {
        (smaller, larger)
    })
}

/// Resolved `(own, other)` amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeEstimate {
    pub a_self: f64,
    pub b_other: f64,
    pub method: Strategy,
    pub n_events: usize,
    pub diagnostics: Option<Vec<(f64, f64)>>,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mad_keep_mask(values: &[f64]) -> Vec<bool> {
    let mut tmp = values.to_vec();
    let med = median(&mut tmp);
    let mut dev: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    let mad = median(&mut dev);
    values.iter().map(|v| (v - med).abs() <= 3.0 * mad).collect()
}

/// Averages per-event amplitudes over every detected transformation.
///
/// `self_next_bit_at(n)` gives the decoder's own bit on the step from
/// `samples[n−1]` to `samples[n]`, or `None` if unknown there.
pub fn estimate_geometric<F>(
    samples: &[ComplexSample],
    stats: &EnergyStats,
    self_next_bit_at: F,
    cfg: &GeometricConfig,
) -> Result<AmplitudeEstimate>
where
    F: Fn(usize) -> Option<Bit>,
{
    let indices = detect_transformations(samples, stats, cfg)?;
    let mut per_event: Vec<(f64, f64)> = indices
        .into_iter()
        .filter_map(|n| {
            let bit = self_next_bit_at(n)?;
            let ev = TransformationEvent::new(samples, n, bit);
            let pq = geometric_amplitudes(ev.x1_mag, ev.x2_mag, ev.angle).ok()?;
            assign_amplitudes(pq, ev.angle, ev.self_next_bit, cfg.tie_epsilon).ok()
        })
        .collect();

    if cfg.reject_outliers && per_event.len() >= 3 {
        let a: Vec<f64> = per_event.iter().map(|p| p.0).collect();
        let b: Vec<f64> = per_event.iter().map(|p| p.1).collect();
        let (ka, kb) = (mad_keep_mask(&a), mad_keep_mask(&b));
        per_event = per_event
            .into_iter()
            .zip(ka.into_iter().zip(kb))
            .filter(|(_, (x, y))| *x && *y)
            .map(|(p, _)| p)
            .collect();
    }

    if per_event.is_empty() {
        return Err(Error::EstimationFailed("no usable transformation events".into()));
    }
    let n = per_event.len() as f64;
    let a_self = per_event.iter().map(|p| p.0).sum::<f64>() / n;
    let b_other = per_event.iter().map(|p| p.1).sum::<f64>() / n;
    if !(a_self > 0.0 && b_other > 0.0) {
        return Err(Error::EstimationFailed("non-positive averaged amplitude".into()));
    }
    Ok(AmplitudeEstimate {
        a_self,
        b_other,
        method: Strategy::Geometric,
        n_events: per_event.len(),
        diagnostics: cfg.keep_diagnostics.then_some(per_event),
    })
}

/// `√mean|y|²` over an interference-free segment. Biased upward by noise:
/// converges to `√(A² + noise_variance)`.
pub fn estimate_direct(samples: &[ComplexSample]) -> Result<f64> {
    Ok(mean_energy(samples)?.sqrt())
}
