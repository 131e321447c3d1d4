//! Seeded Monte-Carlo BER sweeps over SNR × SIR grids.
//!
//! Alice's received amplitude is fixed at 1 and Bob's is `10^(−SIR/20)`, so
//! `SIR = 10·log10(A²/B²)`. The noise variance is `10^(−SNR/10)`, i.e. SNR is
//! measured against Alice's received power. Each trial draws fresh payloads,
//! scrambler seeds, channel phases and packet offset, superposes the two
//! packets and decodes the result from both ends. The two parties use
//! different pilot patterns (same fixed first bit).
//!
//! Every trial gets its own RNG seeded from `(master_seed, grid index, trial
//! index)` and results are aggregated in grid order, so the output does not
//! depend on how many threads ran the trials.

mod csv_io;
mod plot;

use std::f64::consts::TAU;
use std::fmt;
use std::fs::File;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitude::Strategy;
use crate::channel::{
    amplitude_ratio_for_sir, apply_channel, draw_offset, noise_variance_for_snr, superpose, ChannelParams,
};
use crate::decoder::{decode_packet, interfered_bit_range, DecodeResult, DecoderConfig};
use crate::error::{Error, HarnessError, Result};
use crate::modem::{default_pilot, msk_modulate, pilot_from_seed, Bit, Packet};

pub use csv_io::{emit_csv, read_csv, read_records, write_csv, CSV_HEADER};
pub use plot::emit_plot;

/// PRBS seed of Bob's pilot tail; Alice uses the default pilot.
pub const BOB_PILOT_SEED: u64 = 0x3D_94B7;

/// Inclusive arithmetic grid `min, min+step, …, max`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl Grid {
    pub fn range(min: f64, max: f64, step: f64) -> Result<Self, HarnessError> {
        if !(min.is_finite() && max.is_finite()) || max < min {
            return Err(HarnessError::Config(format!("bad grid bounds {min}:{max}")));
        }
        if min == max {
            return Ok(Grid(vec![min]));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(HarnessError::Config(format!("grid step must be positive, got {step}")));
        }
        let n = ((max - min) / step + 1e-9).floor() as usize;
        Ok(Grid((0..=n).map(|i| min + i as f64 * step).collect()))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl FromStr for Grid {
    type Err = HarnessError;

    /// Parses `min:max:step` or a single value.
    fn from_str(s: &str) -> Result<Self, HarnessError> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| HarnessError::Config(format!("bad number `{p}` in grid `{s}`")))
        };
        match parts.as_slice() {
            [v] => Grid::range(num(v)?, num(v)?, 1.0),
            [lo, hi, step] => Grid::range(num(lo)?, num(hi)?, num(step)?),
            _ => Err(HarnessError::Config(format!("grid `{s}` is not min:max:step"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub snr_db: Grid,
    pub sir_db: Grid,
    pub packet_bits: usize,
    pub pilot_bits: usize,
    pub mean_overlap: f64,
    pub trials_per_point: usize,
    pub master_seed: u64,
    pub strategy: Strategy,
    pub out_path: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            snr_db: Grid::range(20.0, 30.0, 2.0).unwrap(),
            sir_db: Grid::range(-3.0, 3.0, 1.0).unwrap(),
            packet_bits: 2048,
            pilot_bits: 64,
            mean_overlap: 0.8,
            trials_per_point: 120,
            master_seed: 1,
            strategy: Strategy::Geometric,
            out_path: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.snr_db.0.is_empty() || self.sir_db.0.is_empty() {
            return Err(HarnessError::Config("empty SNR or SIR grid".into()));
        }
        if self.trials_per_point == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        if !(self.mean_overlap > 0.0 && self.mean_overlap <= 1.0) {
            return Err(HarnessError::Config(format!(
                "mean overlap must be in (0, 1], got {}",
                self.mean_overlap
            )));
        }
        if self.packet_bits == 0 {
            return Err(HarnessError::Config("packet must carry at least one bit".into()));
        }
        Ok(())
    }

    fn points(&self) -> Vec<(f64, f64)> {
        self.snr_db
            .0
            .iter()
            .flat_map(|&snr| self.sir_db.0.iter().map(move |&sir| (snr, sir)))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Party::Alice => "alice",
            Party::Bob => "bob",
        })
    }
}

/// Aggregated result for one (SNR, SIR, party) point. `party` is the
/// receiver doing the decoding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub snr_db: f64,
    pub sir_db: f64,
    pub party: Party,
    pub strategy: Strategy,
    pub bits_total: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub mean_amp_rel_err: f64,
    pub trials: u64,
}

/// Error counts of one receiver in one trial.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PartyCounts {
    pub bits: u64,
    pub errors: u64,
    /// Mean relative error of the two amplitude estimates; NaN on failure.
    pub amp_rel_err: f64,
    pub failed: bool,
    pub fallback_used: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrialOutcome {
    pub alice: PartyCounts,
    pub bob: PartyCounts,
}

/// Mixes `(master, grid index, trial index)` into a trial seed.
pub fn trial_seed(master_seed: u64, grid_index: u64, trial_index: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(splitmix(splitmix(master_seed) ^ grid_index) ^ trial_index.rotate_left(32))
}

fn random_payload(n: usize, rng: &mut impl Rng) -> Vec<Bit> {
    (0..n).map(|_| Bit::from(rng.random::<bool>())).collect()
}

/// Counts errors over the payload bits decoded from interfered samples,
/// skipping the flagged first bit.
fn count_errors(
    decoded: &Result<DecodeResult>,
    truth: &Packet,
    counted: &[usize],
    true_amps: (f64, f64),
) -> PartyCounts {
    match decoded {
        Ok(res) => {
            let expect = truth.frame_bits();
            let errors = counted
                .iter()
                .filter(|&&k| res.other_frame_bits[k] != expect[k])
                .count() as u64;
            let est = &res.amplitude_estimate;
            let amp_rel_err = 0.5
                * ((est.a_self - true_amps.0).abs() / true_amps.0 + (est.b_other - true_amps.1).abs() / true_amps.1);
            PartyCounts {
                bits: counted.len() as u64,
                errors,
                amp_rel_err,
                failed: false,
                fallback_used: res.flags.fallback_used,
            }
        }
        Err(e) => {
            log::warn!("decode failed: {e}");
            PartyCounts {
                bits: counted.len() as u64,
                errors: counted.len() as u64,
                amp_rel_err: f64::NAN,
                failed: true,
                fallback_used: false,
            }
        }
    }
}

/// Runs one two-way exchange at `(snr_db, sir_db)` and decodes it at both ends.
pub fn run_trial(point: (f64, f64), cfg: &SweepConfig, seed: u64) -> Result<TrialOutcome> {
    run_trial_with_noise(point, cfg, seed, noise_variance_for_snr(point.0, 1.0))
}

/// [`run_trial`] with an explicit noise variance in place of the SNR.
pub fn run_trial_with_noise(point: (f64, f64), cfg: &SweepConfig, seed: u64, noise_variance: f64) -> Result<TrialOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (amp_a, amp_b) = (1.0, amplitude_ratio_for_sir(point.1));
    let pilot_a = default_pilot(cfg.pilot_bits);
    let pilot_b = pilot_from_seed(cfg.pilot_bits, BOB_PILOT_SEED);

    let alice = Packet::new(random_payload(cfg.packet_bits, &mut rng), rng.random()).with_pilot(pilot_a.clone());
    let bob = Packet::new(random_payload(cfg.packet_bits, &mut rng), rng.random()).with_pilot(pilot_b.clone());
    let ch_a = ChannelParams::new(amp_a, rng.random_range(0.0..TAU), noise_variance)?;
    let ch_b = ChannelParams::new(amp_b, rng.random_range(0.0..TAU), noise_variance)?;
    let sig_a = apply_channel(&msk_modulate(&alice)?, &ch_a);
    let sig_b = apply_channel(&msk_modulate(&bob)?, &ch_b);
    let offset = draw_offset(sig_a.len(), cfg.mean_overlap, &mut rng)?;
    let frame = superpose(&sig_a, &sig_b, offset)?.with_noise(noise_variance, &mut rng)?;

    let overlap = frame.overlap();
    let counted = |span: &std::ops::Range<usize>, packet: &Packet| -> Vec<usize> {
        let range = interfered_bit_range(span, &overlap);
        let skip = range.start;
        let payload = packet.payload_range();
        range.filter(|k| *k != skip && payload.contains(k)).collect()
    };

    let base = DecoderConfig::default().with_strategy(cfg.strategy);
    let at_alice = decode_packet(
        &frame,
        &alice,
        0,
        &base.clone().with_pilot(pilot_b).with_peer_seed(bob.scrambler_seed),
    );
    let at_bob = decode_packet(
        &frame,
        &bob,
        offset,
        &base.with_pilot(pilot_a).with_peer_seed(alice.scrambler_seed),
    );

    Ok(TrialOutcome {
        alice: count_errors(&at_alice, &bob, &counted(&frame.second, &bob), (amp_a, amp_b)),
        bob: count_errors(&at_bob, &alice, &counted(&frame.first, &alice), (amp_b, amp_a)),
    })
}

fn aggregate(snr: f64, sir: f64, party: Party, strategy: Strategy, counts: &[PartyCounts]) -> BerRecord {
    let bits_total: u64 = counts.iter().map(|c| c.bits).sum();
    let bit_errors: u64 = counts.iter().map(|c| c.errors).sum();
    let ok: Vec<f64> = counts.iter().filter(|c| !c.failed).map(|c| c.amp_rel_err).collect();
    let mean_amp_rel_err = if ok.is_empty() {
        f64::NAN
    } else {
        ok.iter().sum::<f64>() / ok.len() as f64
    };
    BerRecord {
        snr_db: snr,
        sir_db: sir,
        party,
        strategy,
        bits_total,
        bit_errors,
        ber: if bits_total == 0 {
            0.0
        } else {
            bit_errors as f64 / bits_total as f64
        },
        mean_amp_rel_err,
        trials: counts.len() as u64,
    }
}

/// Runs every grid point and returns one record per (point, party) in
/// SNR-major, SIR-minor, Alice-then-Bob order. If `out_path` is set the file
/// is created before any trial runs and the CSV is written at the end.
pub fn sweep(cfg: &SweepConfig) -> Result<Vec<BerRecord>, HarnessError> {
    cfg.validate()?;
    let out = cfg
        .out_path
        .as_ref()
        .map(|p| {
            File::create(p).map_err(|source| HarnessError::Io {
                path: p.clone(),
                source,
            })
        })
        .transpose()?;

    let points = cfg.points();
    let trials = cfg.trials_per_point;
    let outcomes: Vec<TrialOutcome> = (0..points.len() * trials)
        .into_par_iter()
        .map(|i| {
            let (g, t) = (i / trials, i % trials);
            run_trial(points[g], cfg, trial_seed(cfg.master_seed, g as u64, t as u64))
        })
        .collect::<Result<_>>()
        .map_err(|e: Error| HarnessError::Config(e.to_string()))?;

    let mut records = Vec::with_capacity(points.len() * 2);
    for (g, &(snr, sir)) in points.iter().enumerate() {
        let chunk = &outcomes[g * trials..(g + 1) * trials];
        let alice: Vec<PartyCounts> = chunk.iter().map(|o| o.alice).collect();
        let bob: Vec<PartyCounts> = chunk.iter().map(|o| o.bob).collect();
        let failures = chunk.iter().filter(|o| o.alice.failed || o.bob.failed).count();
        if failures > 0 {
            log::warn!("SNR {snr} dB, SIR {sir} dB: {failures} trial(s) failed to decode");
        }
        records.push(aggregate(snr, sir, Party::Alice, cfg.strategy, &alice));
        records.push(aggregate(snr, sir, Party::Bob, cfg.strategy, &bob));
    }

    if let (Some(file), Some(path)) = (out, cfg.out_path.as_ref()) {
        write_csv(&records, file).map_err(|source| HarnessError::Csv {
            path: path.clone(),
            source,
        })?;
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(strategy: Strategy) -> SweepConfig {
        SweepConfig {
            snr_db: Grid(vec![25.0]),
            sir_db: Grid(vec![3.0]),
            packet_bits: 256,
            trials_per_point: 4,
            strategy,
            ..Default::default()
        }
    }

    #[test]
    fn grid_parsing() {
        assert_eq!("20:30:2".parse::<Grid>().unwrap().0, vec![20.0, 22.0, 24.0, 26.0, 28.0, 30.0]);
        assert_eq!("-3:3:1".parse::<Grid>().unwrap().0.len(), 7);
        assert_eq!("5".parse::<Grid>().unwrap().0, vec![5.0]);
        assert_eq!("0:0.3:0.1".parse::<Grid>().unwrap().0.len(), 4);
        for bad in ["1:2", "a:b:c", "3:1:1", "1:2:0", "1:2:-1"] {
            assert!(bad.parse::<Grid>().is_err(), "{bad}");
        }
    }

    #[test]
    fn config_validation() {
        let mut c = small(Strategy::Geometric);
        c.trials_per_point = 0;
        assert!(matches!(c.validate(), Err(HarnessError::Config(_))));
        let mut c = small(Strategy::Geometric);
        c.mean_overlap = 1.5;
        assert!(c.validate().is_err());
        let mut c = small(Strategy::Geometric);
        c.sir_db = Grid(vec![]);
        assert!(c.validate().is_err());
    }

    #[test]
    fn noiseless_trial_has_no_errors() {
        let cfg = small(Strategy::Geometric);
        for seed in 0..10 {
            let out = run_trial_with_noise((f64::INFINITY, 3.0), &cfg, seed, 0.0).unwrap();
            assert_eq!(out.alice.errors, 0);
            assert_eq!(out.bob.errors, 0);
            assert!(out.alice.bits > 0 && out.bob.bits > 0);
            assert!(out.alice.amp_rel_err < 1e-9);
        }
    }

    #[test]
    fn trial_is_deterministic() {
        let cfg = small(Strategy::Geometric);
        let a = run_trial((22.0, 1.0), &cfg, 77).unwrap();
        let b = run_trial((22.0, 1.0), &cfg, 77).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn single_point_single_trial_matches_run_trial() {
        let mut cfg = small(Strategy::Direct);
        cfg.trials_per_point = 1;
        let recs = sweep(&cfg).unwrap();
        assert_eq!(recs.len(), 2);
        let t = run_trial((25.0, 3.0), &cfg, trial_seed(cfg.master_seed, 0, 0)).unwrap();
        assert_eq!(recs[0].bits_total, t.alice.bits);
        assert_eq!(recs[0].bit_errors, t.alice.errors);
        assert_eq!(recs[1].bits_total, t.bob.bits);
        assert_eq!(recs[1].party, Party::Bob);
        assert_eq!(recs[0].trials, 1);
    }

    #[test]
    fn aggregation_is_pooled_not_mean_of_means() {
        let counts = [
            PartyCounts {
                bits: 100,
                errors: 10,
                amp_rel_err: 0.1,
                ..Default::default()
            },
            PartyCounts {
                bits: 900,
                errors: 0,
                amp_rel_err: 0.3,
                ..Default::default()
            },
        ];
        let r = aggregate(20.0, 0.0, Party::Alice, Strategy::Geometric, &counts);
        assert_eq!(r.ber, 0.01);
        assert!((r.mean_amp_rel_err - 0.2).abs() < 1e-12);
    }

    #[test]
    fn unwritable_output_fails_before_running() {
        let mut cfg = small(Strategy::Geometric);
        cfg.out_path = Some(PathBuf::from("/nonexistent-dir/for/sure/out.csv"));
        cfg.trials_per_point = 1_000_000;
        assert!(matches!(sweep(&cfg), Err(HarnessError::Io { .. })));
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for g in 0..50 {
            for t in 0..200 {
                assert!(seen.insert(trial_seed(1, g, t)));
            }
        }
    }
}
