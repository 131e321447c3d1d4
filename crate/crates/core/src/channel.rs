//! Quasi-static flat-fading links, AWGN and the relay superposition.
//!
//! The relay is transparent: each sender reaches a receiver through one
//! composite (gain, phase) pair, and noise is added once, at the receiver.

use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::modem::ComplexSample;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelParams {
    /// Composite attenuation h, must be positive.
    pub gain: f64,
    /// Composite phase shift γ in radians.
    pub phase_shift: f64,
    /// Total complex noise variance (half per real dimension).
    pub noise_variance: f64,
}

impl ChannelParams {
    pub fn new(gain: f64, phase_shift: f64, noise_variance: f64) -> Result<Self> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::InvalidArgument(format!("gain must be positive, got {gain}")));
        }
        if !(noise_variance >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be non-negative, got {noise_variance}"
            )));
        }
        Ok(Self {
            gain,
            phase_shift,
            noise_variance,
        })
    }

    fn rotation(&self) -> ComplexSample {
        ComplexSample::from_polar(self.gain, self.phase_shift)
    }
}

/// Multiplies every sample by `h·e^{iγ}`.
pub fn apply_channel(samples: &[ComplexSample], params: &ChannelParams) -> Vec<ComplexSample> {
    let g = params.rotation();
    samples.iter().map(|s| s * g).collect()
}

/// Adds circularly-symmetric complex Gaussian noise of total variance
/// `noise_variance`.
pub fn add_awgn<R: Rng + ?Sized>(
    samples: &[ComplexSample],
    noise_variance: f64,
    rng: &mut R,
) -> Result<Vec<ComplexSample>> {
    if !(noise_variance >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be non-negative, got {noise_variance}"
        )));
    }
    if noise_variance == 0.0 {
        return Ok(samples.to_vec());
    }
    let std = (noise_variance / 2.0).sqrt();
    Ok(samples
        .iter()
        .map(|s| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            s + ComplexSample::new(std * re, std * im)
        })
        .collect())
}

/// Noiseless per-sample description of the two superposed signals.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    /// Received amplitude of the first signal.
    pub a: f64,
    /// Received amplitude of the second signal.
    pub b: f64,
    /// Phase of the first signal at each of its samples, in (−π, π].
    pub theta: Vec<f64>,
    /// Phase of the second signal at each of its samples, in (−π, π].
    pub phi: Vec<f64>,
    /// θ − φ at the first overlapping sample, wrapped to (−π, π].
    pub initial_angle: f64,
}

/// Superposition of two signals as seen by a receiver.
#[derive(Clone, Debug, PartialEq)]
pub struct InterferedFrame {
    pub samples: Vec<ComplexSample>,
    pub overlap_start: usize,
    pub overlap_end: usize,
    /// Sample span of the first signal (always starts at 0).
    pub first: Range<usize>,
    /// Sample span of the second signal.
    pub second: Range<usize>,
    pub truth: Option<GroundTruth>,
}

impl InterferedFrame {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn overlap(&self) -> Range<usize> {
        self.overlap_start..self.overlap_end
    }

    pub fn overlap_samples(&self) -> &[ComplexSample] {
        &self.samples[self.overlap()]
    }

    /// Replaces the samples with a noisy copy; spans and truth are kept.
    pub fn with_noise<R: Rng + ?Sized>(mut self, noise_variance: f64, rng: &mut R) -> Result<Self> {
        self.samples = add_awgn(&self.samples, noise_variance, rng)?;
        Ok(self)
    }
}

/// Adds `sig_b` onto `sig_a` starting at `offset`.
///
/// Ground truth is read from the inputs, so they should be noiseless
/// constant-modulus signals.
pub fn superpose(sig_a: &[ComplexSample], sig_b: &[ComplexSample], offset: usize) -> Result<InterferedFrame> {
    if offset >= sig_a.len() {
        return Err(Error::InvalidArgument(format!(
            "offset {offset} outside first signal of length {}",
            sig_a.len()
        )));
    }
    if sig_b.is_empty() {
        return Err(Error::NoInterference);
    }
    let len = sig_a.len().max(offset + sig_b.len());
    let mut samples = vec![ComplexSample::new(0.0, 0.0); len];
    samples[..sig_a.len()].copy_from_slice(sig_a);
    for (y, b) in samples[offset..].iter_mut().zip(sig_b) {
        *y += b;
    }
    let overlap_end = sig_a.len().min(offset + sig_b.len());

    let theta: Vec<f64> = sig_a.iter().map(|s| s.arg()).collect();
    let phi: Vec<f64> = sig_b.iter().map(|s| s.arg()).collect();
    let initial_angle = wrap_angle(theta[offset] - phi[0]);
    let truth = GroundTruth {
        a: sig_a[0].norm(),
        b: sig_b[0].norm(),
        theta,
        phi,
        initial_angle,
    };

    Ok(InterferedFrame {
        samples,
        overlap_start: offset,
        overlap_end,
        first: 0..sig_a.len(),
        second: offset..offset + sig_b.len(),
        truth: Some(truth),
    })
}

/// Draws the start offset of the second packet so that the expected overlap
/// fraction is `mean_overlap`. The offset is uniform on
/// `[m/2, 3m/2]` where `m = (1 - mean_overlap)·len`, capped at `len - 1`.
pub fn draw_offset<R: Rng + ?Sized>(len: usize, mean_overlap: f64, rng: &mut R) -> Result<usize> {
    if !(mean_overlap > 0.0 && mean_overlap <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "mean overlap must be in (0, 1], got {mean_overlap}"
        )));
    }
    if len == 0 {
        return Err(Error::InvalidArgument("empty packet".into()));
    }
    let mean = (1.0 - mean_overlap) * len as f64;
    let lo = (0.5 * mean).round() as usize;
    let hi = (1.5 * mean).round() as usize;
    Ok(rng.random_range(lo..=hi).min(len - 1))
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(x: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Noise variance realizing `snr_db` relative to a reference power.
pub fn noise_variance_for_snr(snr_db: f64, reference_power: f64) -> f64 {
    reference_power * 10f64.powf(-snr_db / 10.0)
}

/// Amplitude ratio B/A realizing `sir_db = 10·log10(A²/B²)`.
pub fn amplitude_ratio_for_sir(sir_db: f64) -> f64 {
    10f64.powf(-sir_db / 20.0)
}
