//! MSK bit/baseband mapping at one complex sample per bit.
//!
//! A `1` advances the carrier phase by +π/2 between consecutive samples and a
//! `0` retards it by π/2. Demodulation only looks at the phase of
//! `y[n+1] / y[n]`, so any common complex gain applied by a flat channel
//! cancels out.
//!
//! Payloads are whitened with a PRBS-23 scrambler (x²³ + x¹⁸ + 1) before
//! modulation so that the cross term between two interfering packets
//! averages to zero.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::ops::BitXor;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Baseband sample.
pub type ComplexSample = Complex64;

/// Samples below this magnitude have no usable phase.
pub const DEGENERATE_EPSILON: f64 = 1e-12;

/// Default pilot length in bits.
pub const DEFAULT_PILOT_BITS: usize = 64;

/// Value of the first pilot bit, shared by every packet.
pub const FIRST_PILOT_BIT: Bit = Bit::One;

const PRBS_DEGREE: u32 = 23;
const PRBS_TAP: u32 = 18;
const PRBS_MASK: u32 = (1 << PRBS_DEGREE) - 1;

/// Seed used to fill the tail of the default pilot pattern.
const PILOT_PATTERN_SEED: u64 = 0x5A_C3E1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bit {
    Zero = 0,
    One = 1,
}

impl Bit {
    /// MSK phase step for this bit.
    pub fn phase_step(self) -> f64 {
        match self {
            Bit::One => FRAC_PI_2,
            Bit::Zero => -FRAC_PI_2,
        }
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }
}

impl From<bool> for Bit {
    fn from(b: bool) -> Self {
        if b {
            Bit::One
        } else {
            Bit::Zero
        }
    }
}

impl TryFrom<u8> for Bit {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Bit::Zero),
            1 => Ok(Bit::One),
            _ => Err(Error::InvalidArgument(format!("{v} is not a bit"))),
        }
    }
}

impl BitXor for Bit {
    type Output = Bit;

    fn bitxor(self, rhs: Bit) -> Bit {
        Bit::from(self != rhs)
    }
}

impl fmt::Display for Bit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Converts a slice of 0/1 values into bits. Panics on any other value.
pub fn bits(values: &[u8]) -> Vec<Bit> {
    values
        .iter()
        .map(|&v| Bit::try_from(v).expect("bit values must be 0 or 1"))
        .collect()
}

/// Fibonacci PRBS-23 generator.
///
/// The low 23 bits of the seed form the initial register; an all-zero
/// register is replaced by all ones.
#[derive(Clone, Debug)]
pub struct Prbs23 {
    state: u32,
}

impl Prbs23 {
    pub fn new(seed: u64) -> Self {
        let state = (seed as u32) & PRBS_MASK;
        Self {
            state: if state == 0 { PRBS_MASK } else { state },
        }
    }
}

impl Iterator for Prbs23 {
    type Item = Bit;

    fn next(&mut self) -> Option<Bit> {
        // register bit k holds x[n+k]; x[n+23] = x[n] ^ x[n+5]
        let new = (self.state ^ (self.state >> (PRBS_DEGREE - PRBS_TAP))) & 1;
        self.state = (self.state >> 1) | (new << (PRBS_DEGREE - 1));
        Some(Bit::from(new == 1))
    }
}

/// XORs `input` with the PRBS-23 sequence for `seed`. Applying it twice with
/// the same seed is the identity.
pub fn scramble(input: &[Bit], seed: u64) -> Vec<Bit> {
    input
        .iter()
        .zip(Prbs23::new(seed))
        .map(|(&b, pn)| b ^ pn)
        .collect()
}

/// Default known pilot: the fixed first bit followed by a PRBS pattern.
pub fn default_pilot(len: usize) -> Vec<Bit> {
    pilot_from_seed(len, PILOT_PATTERN_SEED)
}

/// Pilot made of the fixed first bit followed by PRBS-23 output for `seed`.
pub fn pilot_from_seed(len: usize, seed: u64) -> Vec<Bit> {
    if len == 0 {
        return Vec::new();
    }
    std::iter::once(FIRST_PILOT_BIT)
        .chain(Prbs23::new(seed).take(len - 1))
        .collect()
}

/// A sender's packet: what it knows about its own transmission.
#[derive(Clone, Debug, PartialEq)]
pub struct Packet {
    pub payload: Vec<Bit>,
    pub pilot: Vec<Bit>,
    pub scrambler_seed: u64,
    pub amplitude: f64,
    pub initial_phase: f64,
}

impl Packet {
    pub fn new(payload: Vec<Bit>, scrambler_seed: u64) -> Self {
        Self {
            payload,
            pilot: default_pilot(DEFAULT_PILOT_BITS),
            scrambler_seed,
            amplitude: 1.0,
            initial_phase: 0.0,
        }
    }

    pub fn with_pilot(mut self, pilot: Vec<Bit>) -> Self {
        self.pilot = pilot;
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_initial_phase(mut self, phase: f64) -> Self {
        self.initial_phase = phase;
        self
    }

    /// Bits actually put on the air: pilot, scrambled payload, pilot.
    pub fn frame_bits(&self) -> Vec<Bit> {
        let mut frame = Vec::with_capacity(self.frame_len());
        frame.extend_from_slice(&self.pilot);
        frame.extend(scramble(&self.payload, self.scrambler_seed));
        frame.extend_from_slice(&self.pilot);
        frame
    }

    pub fn frame_len(&self) -> usize {
        2 * self.pilot.len() + self.payload.len()
    }

    /// Number of modulated samples (one more than the frame bits).
    pub fn sample_len(&self) -> usize {
        self.frame_len() + 1
    }

    /// Frame-bit index range holding the scrambled payload.
    pub fn payload_range(&self) -> std::ops::Range<usize> {
        self.pilot.len()..self.pilot.len() + self.payload.len()
    }

    /// Recovers the payload from a decoded frame by descrambling its middle.
    pub fn payload_from_frame(&self, frame: &[Bit]) -> Vec<Bit> {
        scramble(&frame[self.payload_range()], self.scrambler_seed)
    }
}

/// Absolute phase of each modulated sample, starting from `initial_phase`.
pub fn phase_trajectory(frame_bits: &[Bit], initial_phase: f64) -> Vec<f64> {
    let mut phases = Vec::with_capacity(frame_bits.len() + 1);
    let mut phase = initial_phase;
    phases.push(phase);
    for b in frame_bits {
        phase += b.phase_step();
        phases.push(phase);
    }
    phases
}

/// Modulates a bit sequence directly, without pilot or scrambling.
pub fn msk_modulate_bits(frame_bits: &[Bit], amplitude: f64, initial_phase: f64) -> Result<Vec<ComplexSample>> {
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "amplitude must be positive, got {amplitude}"
        )));
    }
    Ok(phase_trajectory(frame_bits, initial_phase)
        .into_iter()
        .map(|phase| ComplexSample::from_polar(amplitude, phase))
        .collect())
}

/// Modulates `pilot ∥ scramble(payload) ∥ pilot`.
pub fn msk_modulate(packet: &Packet) -> Result<Vec<ComplexSample>> {
    msk_modulate_bits(&packet.frame_bits(), packet.amplitude, packet.initial_phase)
}

/// Sign of the phase step between two samples.
pub(crate) fn phase_step_bit(prev: ComplexSample, next: ComplexSample) -> Bit {
    Bit::from((next * prev.conj()).arg() > 0.0)
}

/// Decides each bit from the sign of `arg(y[n+1] / y[n])`.
pub fn msk_demodulate(samples: &[ComplexSample]) -> Result<Vec<Bit>> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least two samples, got {}",
            samples.len()
        )));
    }
    if let Some((index, s)) = samples
        .iter()
        .enumerate()
        .find(|(_, s)| !(s.norm() >= DEGENERATE_EPSILON))
    {
        return Err(Error::DegenerateSample {
            index,
            magnitude: s.norm(),
        });
    }
    Ok(samples
        .windows(2)
        .map(|w| phase_step_bit(w[0], w[1]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_bits(n: usize, rng: &mut impl Rng) -> Vec<Bit> {
        (0..n).map(|_| Bit::from(rng.random::<bool>())).collect()
    }

    /// Reference PRBS from the linear recurrence x[n] = x[n-23] ^ x[n-18].
    fn prbs_by_recurrence(seed: u64, n: usize) -> Vec<u8> {
        let mut init = (seed as u32) & 0x7F_FFFF;
        if init == 0 {
            init = 0x7F_FFFF;
        }
        let mut x: Vec<u8> = (0..23).map(|k| ((init >> k) & 1) as u8).collect();
        for m in 23..23 + n {
            let v = x[m - 23] ^ x[m - 18];
            x.push(v);
        }
        x[23..].to_vec()
    }

    #[test]
    fn prbs_matches_recurrence() {
        for seed in [1u64, 7, 0x12345, 0] {
            let got: Vec<u8> = Prbs23::new(seed).take(200).map(Bit::as_u8).collect();
            assert_eq!(got, prbs_by_recurrence(seed, 200), "seed {seed}");
        }
    }

    #[test]
    fn prbs_period_is_maximal() {
        let mut reg = Prbs23::new(1);
        let start = reg.state;
        let mut period = 0u32;
        loop {
            reg.next();
            period += 1;
            if reg.state == start {
                break;
            }
        }
        assert_eq!(period, (1 << 23) - 1);
    }

    #[test]
    fn scramble_zeros_gives_pn() {
        let pn: Vec<Bit> = Prbs23::new(99).take(4).collect();
        assert_eq!(scramble(&bits(&[0, 0, 0, 0]), 99), pn);
    }

    #[test]
    fn scramble_seed7_all_ones() {
        // seed 7: x[0..3] = 1, x[3..23] = 0. x[23+k] = x[k] ^ x[k+5], so the
        // first eight PN bits are 1,1,1,0,0,0,0,0 and the scrambled ones
        // are their complement.
        let out = scramble(&[Bit::One; 8], 7);
        assert_eq!(out, bits(&[0, 0, 0, 1, 1, 1, 1, 1]));
    }

    #[test]
    fn scramble_is_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_bits(1000, &mut rng);
        assert_eq!(scramble(&scramble(&x, 4242), 4242), x);
    }

    #[test]
    fn pilot_first_bit_fixed() {
        let p = default_pilot(64);
        assert_eq!(p.len(), 64);
        assert_eq!(p[0], FIRST_PILOT_BIT);
        assert!(default_pilot(0).is_empty());
    }

    #[test]
    fn modulate_single_one() {
        let s = msk_modulate_bits(&[Bit::One], 1.0, 0.0).unwrap();
        assert_eq!(s.len(), 2);
        assert_close!(s[0].re, 1.0, 1e-15);
        assert_close!(s[0].im, 0.0, 1e-15);
        assert_close!(s[1].re, 0.0, 1e-15);
        assert_close!(s[1].im, 1.0, 1e-15);
    }

    #[test]
    fn modulate_up_then_down() {
        let s = msk_modulate_bits(&bits(&[1, 0]), 2.0, 0.0).unwrap();
        let expect = [ComplexSample::new(2.0, 0.0), ComplexSample::new(0.0, 2.0), ComplexSample::new(2.0, 0.0)];
        for (a, b) in s.iter().zip(expect) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn modulate_rejects_bad_amplitude() {
        for a in [0.0, -1.0, f64::NAN] {
            let p = Packet::new(bits(&[1]), 1).with_amplitude(a);
            assert!(matches!(msk_modulate(&p), Err(Error::InvalidArgument(_))));
        }
    }

    #[test]
    fn frame_layout_has_pilot_at_both_ends() {
        let p = Packet::new(bits(&[1, 1, 0, 1]), 5).with_pilot(bits(&[1, 0, 0]));
        let f = p.frame_bits();
        assert_eq!(f.len(), 10);
        assert_eq!(&f[..3], &p.pilot[..]);
        assert_eq!(&f[7..], &p.pilot[..]);
        assert_eq!(p.payload_from_frame(&f), p.payload);
        assert_eq!(msk_modulate(&p).unwrap().len(), p.sample_len());
    }

    #[test]
    fn constant_modulus_and_quarter_turns() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = random_bits(1000, &mut rng);
        let s = msk_modulate_bits(&b, 0.37, 1.1).unwrap();
        for w in s.windows(2) {
            assert_close!(w[0].norm(), 0.37, 1e-12);
            let d = (w[1] * w[0].conj()).arg();
            assert_close!(d.abs(), FRAC_PI_2, 1e-9);
        }
    }

    #[test]
    fn demodulate_quarter_turns() {
        let s = [ComplexSample::new(1.0, 0.0), ComplexSample::new(0.0, 1.0), ComplexSample::new(1.0, 0.0)];
        assert_eq!(msk_demodulate(&s).unwrap(), bits(&[1, 0]));
    }

    #[test]
    fn demodulate_errors() {
        assert!(matches!(
            msk_demodulate(&[ComplexSample::new(1.0, 0.0)]),
            Err(Error::InvalidArgument(_))
        ));
        let s = [ComplexSample::new(1.0, 0.0), ComplexSample::new(0.0, 0.0)];
        assert!(matches!(
            msk_demodulate(&s),
            Err(Error::DegenerateSample { index: 1, .. })
        ));
    }

    #[test]
    fn round_trip_and_fading_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = Packet::new(random_bits(300, &mut rng), 77).with_initial_phase(2.0);
        let s = msk_modulate(&p).unwrap();
        assert_eq!(msk_demodulate(&s).unwrap(), p.frame_bits());
        let g = ComplexSample::from_polar(0.013, -2.7);
        let faded: Vec<_> = s.iter().map(|x| x * g).collect();
        assert_eq!(msk_demodulate(&faded).unwrap(), p.frame_bits());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn round_trip(raw in proptest::collection::vec(any::<bool>(), 0..200),
                          seed in any::<u64>(),
                          amp in 1e-3f64..1e3,
                          phase in -10.0f64..10.0,
                          h in 1e-3f64..1e3,
                          gamma in -10.0f64..10.0) {
                let payload: Vec<Bit> = raw.into_iter().map(Bit::from).collect();
                let p = Packet::new(payload, seed).with_amplitude(amp).with_initial_phase(phase);
                let g = ComplexSample::from_polar(h, gamma);
                let s: Vec<_> = msk_modulate(&p).unwrap().into_iter().map(|x| x * g).collect();
                let frame = msk_demodulate(&s).unwrap();
                prop_assert_eq!(&frame, &p.frame_bits());
                prop_assert_eq!(p.payload_from_frame(&frame), p.payload);
            }

            #[test]
            fn scramble_involution(raw in proptest::collection::vec(any::<bool>(), 0..500), seed in any::<u64>()) {
                let x: Vec<Bit> = raw.into_iter().map(Bit::from).collect();
                prop_assert_eq!(scramble(&scramble(&x, seed), seed), x);
            }
        }
    }
}
