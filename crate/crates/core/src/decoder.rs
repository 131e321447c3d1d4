//! End-to-end receive pipeline for one interfered frame.
//!
//! The receiver knows its own packet and where it sits in the frame. It
//! estimates `(A, B)`, solves both phase pairs at every overlapping sample,
//! keeps the pair whose own phase step best matches the step it actually
//! sent, and reads the other party's bit off the sign of the implied `Δφ`.
//! Wherever the other party is alone in the frame plain MSK demodulation is
//! used.

use std::f64::consts::FRAC_PI_2;
use std::ops::Range;

use crate::amplitude::{
    estimate_direct, estimate_geometric, legacy_joint_estimate, AmplitudeEstimate, EnergyStats,
    GeometricConfig, Strategy,
};
use crate::channel::{wrap_angle, InterferedFrame};
use crate::error::{Error, Result};
use crate::modem::{default_pilot, phase_step_bit, scramble, Bit, ComplexSample, Packet, DEFAULT_PILOT_BITS};
use crate::phase_solver::{possible_phase_pairs, select_pair, solve_clamped, PhasePairSolution, DEFAULT_CLAMP_TOLERANCE};

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderConfig {
    pub strategy: Strategy,
    pub clamp_tolerance: f64,
    pub tie_epsilon: f64,
    pub threshold_factor: f64,
    /// Minimum detection threshold as a fraction of the mean overlap energy.
    pub noise_floor: f64,
    pub reject_outliers: bool,
    /// Fall back to the direct estimate when the chosen joint estimator fails.
    pub allow_fallback: bool,
    /// Pilot pattern used by the other party.
    pub pilot: Vec<Bit>,
    /// Scrambler seed of the other party (pre-shared).
    pub peer_scrambler_seed: u64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        let g = GeometricConfig::default();
        Self {
            strategy: Strategy::Geometric,
            clamp_tolerance: DEFAULT_CLAMP_TOLERANCE,
            tie_epsilon: g.tie_epsilon,
            threshold_factor: g.threshold_factor,
            noise_floor: g.noise_floor,
            reject_outliers: g.reject_outliers,
            allow_fallback: true,
            pilot: default_pilot(DEFAULT_PILOT_BITS),
            peer_scrambler_seed: 0,
        }
    }
}

impl DecoderConfig {
    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_peer_seed(mut self, seed: u64) -> Self {
        self.peer_scrambler_seed = seed;
        self
    }

    pub fn with_pilot(mut self, pilot: Vec<Bit>) -> Self {
        self.pilot = pilot;
        self
    }

    fn geometric(&self) -> GeometricConfig {
        GeometricConfig {
            threshold_factor: self.threshold_factor,
            noise_floor: self.noise_floor,
            tie_epsilon: self.tie_epsilon,
            reject_outliers: self.reject_outliers,
            keep_diagnostics: false,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("clamp_tolerance", self.clamp_tolerance),
            ("tie_epsilon", self.tie_epsilon),
            ("threshold_factor", self.threshold_factor),
            ("noise_floor", self.noise_floor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DecodeFlags {
    /// The configured joint estimator failed and the direct estimate was used.
    pub fallback_used: bool,
    /// The first bit decoded from the interfered region is unreliable.
    pub first_bit_unreliable: bool,
    /// Overlap samples whose `D` had to be force-clamped.
    pub inconsistent_samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeResult {
    /// The other party's descrambled payload.
    pub other_bits: Vec<Bit>,
    /// The other party's frame bits (pilot, scrambled payload, pilot) as decoded.
    pub other_frame_bits: Vec<Bit>,
    /// Frame-bit indices of the other party decoded from interfered samples.
    pub interfered_bits: Range<usize>,
    /// Frame-bit index flagged as unreliable, if any.
    pub unreliable_bit: Option<usize>,
    pub amplitude_estimate: AmplitudeEstimate,
    /// Chosen `err_xy` for each bit decoded by pair selection.
    pub per_bit_err: Vec<f64>,
    pub flags: DecodeFlags,
}

/// Samples of `span` not covered by `overlap`.
fn clean_samples(samples: &[ComplexSample], span: &Range<usize>, overlap: &Range<usize>) -> Vec<ComplexSample> {
    span.clone()
        .filter(|n| !overlap.contains(n))
        .map(|n| samples[n])
        .collect()
}

fn direct_amplitudes(
    frame: &InterferedFrame,
    own: &Range<usize>,
    other: &Range<usize>,
) -> Result<AmplitudeEstimate> {
    let overlap = frame.overlap();
    let own_clean = clean_samples(&frame.samples, own, &overlap);
    let other_clean = clean_samples(&frame.samples, other, &overlap);
    if own_clean.is_empty() || other_clean.is_empty() {
        return Err(Error::EstimationFailed("no interference-free segment for both parties".into()));
    }
    Ok(AmplitudeEstimate {
        a_self: estimate_direct(&own_clean)?,
        b_other: estimate_direct(&other_clean)?,
        method: Strategy::Direct,
        n_events: 0,
        diagnostics: None,
    })
}

/// Bit across the edge of the overlap, where the other party's phase is
/// known exactly on the clean side. Picks the candidate whose step is
/// closest to ±π/2; `hint` (the branch picked by pair selection) wins ties.
fn boundary_step(candidates: &[PhasePairSolution; 2], hint: Option<usize>, step: impl Fn(f64) -> f64) -> Bit {
    let misfit = |k: usize| (step(candidates[k].phi).abs() - FRAC_PI_2).abs();
    let preferred = hint.unwrap_or(0);
    let other = 1 - preferred;
    let k = if misfit(other) < misfit(preferred) { other } else { preferred };
    Bit::from(step(candidates[k].phi) > 0.0)
}

/// Frame-bit indices of a packet spanning `span` whose phase step touches an
/// interfered sample.
pub fn interfered_bit_range(span: &Range<usize>, overlap: &Range<usize>) -> Range<usize> {
    if overlap.is_empty() || span.len() < 2 {
        return 0..0;
    }
    let first = overlap.start.saturating_sub(1).max(span.start);
    let last = (overlap.end - 1).min(span.end - 2);
    if last < first {
        return 0..0;
    }
    (first - span.start)..(last + 1 - span.start)
}

/// Decodes the other party's packet from `frame`.
///
/// `own_offset` is the sample index at which the decoder's own signal
/// starts in the frame.
pub fn decode_packet(
    frame: &InterferedFrame,
    own: &Packet,
    own_offset: usize,
    cfg: &DecoderConfig,
) -> Result<DecodeResult> {
    cfg.validate()?;
    let own_span = own_offset..own_offset + own.sample_len();
    let other_span = if frame.first == own_span {
        frame.second.clone()
    } else if frame.second == own_span {
        frame.first.clone()
    } else {
        return Err(Error::InvalidArgument(format!(
            "own packet at {own_span:?} does not match the frame spans {:?}, {:?}",
            frame.first, frame.second
        )));
    };
    let overlap = frame.overlap();
    if overlap.is_empty() {
        return Err(Error::NoInterference);
    }
    let other_frame_len = other_span.len().saturating_sub(1);
    if other_frame_len < 2 * cfg.pilot.len() {
        return Err(Error::InvalidArgument("other packet shorter than its pilots".into()));
    }

    let own_bits = own.frame_bits();
    let own_step = |n: usize| own_bits[n - own_span.start];
    let y = &frame.samples;
    let stats = EnergyStats::measure(&y[overlap.clone()])?;

    let mut flags = DecodeFlags::default();
    let joint = match cfg.strategy {
        Strategy::Direct => None,
        Strategy::Legacy => Some(legacy_joint_estimate(stats.mu, stats.sigma).map(|(larger, smaller)| {
            AmplitudeEstimate {
                a_self: larger,
                b_other: smaller,
                method: Strategy::Legacy,
                n_events: 0,
                diagnostics: None,
            }
        })),
        Strategy::Geometric => Some(estimate_geometric(
            &y[overlap.clone()],
            &stats,
            |n| Some(own_step(overlap.start + n - 1)),
            &cfg.geometric(),
        )),
    };
    let estimate = match joint {
        None => direct_amplitudes(frame, &own_span, &other_span)
            .map_err(|e| Error::DecodeFailed(e.to_string()))?,
        Some(Ok(est)) => est,
        Some(Err(e)) if cfg.allow_fallback => {
            log::debug!("{} estimate failed ({e}), using direct", cfg.strategy);
            flags.fallback_used = true;
            direct_amplitudes(frame, &own_span, &other_span)
                .map_err(|d| Error::DecodeFailed(format!("{e}; fallback: {d}")))?
        }
        Some(Err(e)) => return Err(Error::DecodeFailed(e.to_string())),
    };
    let (a, b) = (estimate.a_self, estimate.b_other);

    let solutions: Vec<[PhasePairSolution; 2]> = y[overlap.clone()]
        .iter()
        .map(|&s| match possible_phase_pairs(s, a, b, cfg.clamp_tolerance) {
            Ok(p) => p,
            Err(_) => {
                flags.inconsistent_samples += 1;
                let d = (s.norm_sqr() - a * a - b * b) / (2.0 * a * b);
                solve_clamped(s, a, b, d)
            }
        })
        .collect();
    let sol = |n: usize| &solutions[n - overlap.start];

    // chosen branch at each overlap sample, as the "next" and "current" end
    // of a selected pair
    let mut as_next = vec![None; overlap.len()];
    let mut as_current = vec![None; overlap.len()];
    let mut selected_dphi = vec![0.0; overlap.len()];
    let mut per_bit_err = Vec::with_capacity(overlap.len());
    for n in overlap.start..overlap.end.saturating_sub(1) {
        let sel = select_pair(sol(n), sol(n + 1), own_step(n).phase_step());
        as_current[n - overlap.start] = Some(sel.indices.1);
        as_next[n + 1 - overlap.start] = Some(sel.indices.0);
        selected_dphi[n - overlap.start] = sel.delta_phi;
        per_bit_err.push(sel.err());
    }

    let mut other_frame_bits = Vec::with_capacity(other_frame_len);
    for n in other_span.start..other_span.end - 1 {
        let (here, there) = (overlap.contains(&n), overlap.contains(&(n + 1)));
        let bit = match (here, there) {
            (true, true) => Bit::from(selected_dphi[n - overlap.start] > 0.0),
            (false, false) => phase_step_bit(y[n], y[n + 1]),
            (true, false) => {
                let hint = as_next[n - overlap.start];
                boundary_step(sol(n), hint, |phi| wrap_angle(y[n + 1].arg() - phi))
            }
            (false, true) => {
                let hint = as_current[n + 1 - overlap.start];
                boundary_step(sol(n + 1), hint, |phi| wrap_angle(phi - y[n].arg()))
            }
        };
        other_frame_bits.push(bit);
    }

    let interfered_bits = interfered_bit_range(&other_span, &overlap);
    let unreliable_bit = (!interfered_bits.is_empty()).then_some(interfered_bits.start);
    flags.first_bit_unreliable = unreliable_bit.is_some();

    let pl = cfg.pilot.len();
    let other_bits = scramble(&other_frame_bits[pl..other_frame_len - pl], cfg.peer_scrambler_seed);

    Ok(DecodeResult {
        other_bits,
        other_frame_bits,
        interfered_bits,
        unreliable_bit,
        amplitude_estimate: estimate,
        per_bit_err,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_channel, superpose, ChannelParams};
    use crate::modem::msk_modulate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Scenario {
        alice: Packet,
        bob: Packet,
        frame: InterferedFrame,
        offset: usize,
    }

    fn scenario(rng: &mut ChaCha8Rng, payload: usize, a: f64, b: f64, offset: usize) -> Scenario {
        let mk = |rng: &mut ChaCha8Rng| -> Vec<Bit> { (0..payload).map(|_| Bit::from(rng.random::<bool>())).collect() };
        let alice = Packet::new(mk(rng), rng.random());
        let bob = Packet::new(mk(rng), rng.random());
        let ca = ChannelParams::new(a, rng.random_range(0.0..6.3), 0.0).unwrap();
        let cb = ChannelParams::new(b, rng.random_range(0.0..6.3), 0.0).unwrap();
        let sa = apply_channel(&msk_modulate(&alice).unwrap(), &ca);
        let sb = apply_channel(&msk_modulate(&bob).unwrap(), &cb);
        let frame = superpose(&sa, &sb, offset).unwrap();
        Scenario { alice, bob, frame, offset }
    }

    fn errors_outside_flag(res: &DecodeResult, truth: &Packet) -> usize {
        let expect = truth.frame_bits();
        res.other_frame_bits
            .iter()
            .zip(&expect)
            .enumerate()
            .filter(|(k, (x, y))| Some(*k) != res.unreliable_bit && x != y)
            .count()
    }

    #[test]
    fn noiseless_all_strategies_recover_payload() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for strategy in [Strategy::Direct, Strategy::Geometric] {
            for _ in 0..20 {
                let s = scenario(&mut rng, 500, 1.0, 0.6, 120);
                let cfg_a = DecoderConfig::default().with_strategy(strategy).with_peer_seed(s.bob.scrambler_seed);
                let res = decode_packet(&s.frame, &s.alice, 0, &cfg_a).unwrap();
                assert_eq!(errors_outside_flag(&res, &s.bob), 0);
                assert_eq!(res.other_bits, s.bob.payload);

                let cfg_b = DecoderConfig::default().with_strategy(strategy).with_peer_seed(s.alice.scrambler_seed);
                let res = decode_packet(&s.frame, &s.bob, s.offset, &cfg_b).unwrap();
                assert_eq!(errors_outside_flag(&res, &s.alice), 0);
                assert_eq!(res.other_bits, s.alice.payload);
            }
        }
    }

    #[test]
    fn interfered_range_and_flag() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = scenario(&mut rng, 100, 1.0, 0.5, 30);
        let n_frame = s.alice.frame_len();
        let cfg = DecoderConfig::default().with_peer_seed(s.bob.scrambler_seed);
        let res = decode_packet(&s.frame, &s.alice, 0, &cfg).unwrap();
        // Bob starts inside Alice's frame and runs past its end
        assert_eq!(res.interfered_bits, 0..(n_frame + 1 - 30));
        assert_eq!(res.unreliable_bit, Some(0));
        assert!(res.flags.first_bit_unreliable);

        let cfg = DecoderConfig::default().with_peer_seed(s.alice.scrambler_seed);
        let res = decode_packet(&s.frame, &s.bob, 30, &cfg).unwrap();
        assert_eq!(res.interfered_bits, 29..n_frame);
        assert_eq!(res.unreliable_bit, Some(29));
    }

    #[test]
    fn full_overlap_direct_fails_but_geometric_works() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = scenario(&mut rng, 300, 0.7, 1.2, 0);
        let cfg = DecoderConfig::default().with_peer_seed(s.bob.scrambler_seed);
        let res = decode_packet(&s.frame, &s.alice, 0, &cfg).unwrap();
        assert_eq!(res.other_bits, s.bob.payload);
        let direct = cfg.clone().with_strategy(Strategy::Direct);
        assert!(matches!(decode_packet(&s.frame, &s.alice, 0, &direct), Err(Error::DecodeFailed(_))));
    }

    #[test]
    fn legacy_falls_back_or_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut fell_back = 0;
        for _ in 0..20 {
            let s = scenario(&mut rng, 400, 1.0, 0.5, 80);
            let cfg = DecoderConfig::default()
                .with_strategy(Strategy::Legacy)
                .with_peer_seed(s.bob.scrambler_seed);
            let res = decode_packet(&s.frame, &s.alice, 0, &cfg).unwrap();
            if res.flags.fallback_used {
                fell_back += 1;
                assert_eq!(res.amplitude_estimate.method, Strategy::Direct);
                let strict = DecoderConfig { allow_fallback: false, ..cfg };
                assert!(matches!(decode_packet(&s.frame, &s.alice, 0, &strict), Err(Error::DecodeFailed(_))));
            } else {
                assert_eq!(res.amplitude_estimate.method, Strategy::Legacy);
            }
        }
        assert!(fell_back > 0);
    }

    #[test]
    fn rejects_misaligned_own_packet_and_bad_config() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = scenario(&mut rng, 100, 1.0, 0.5, 30);
        let cfg = DecoderConfig::default();
        assert!(matches!(decode_packet(&s.frame, &s.alice, 3, &cfg), Err(Error::InvalidArgument(_))));
        let bad = DecoderConfig {
            tie_epsilon: 0.0,
            ..DecoderConfig::default()
        };
        assert!(matches!(decode_packet(&s.frame, &s.alice, 0, &bad), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn silent_peer_has_nothing_to_decode() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let alice = Packet::new((0..50).map(|_| Bit::from(rng.random::<bool>())).collect(), 1);
        let sa = msk_modulate(&alice).unwrap();
        assert_eq!(superpose(&sa, &[], 0), Err(Error::NoInterference));
    }
}
