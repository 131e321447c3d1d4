use std::f64::consts::FRAC_PI_2;

use anc::channel::{apply_channel, superpose, ChannelParams};
use anc::decoder::{decode_packet, DecoderConfig};
use anc::harness::{run_trial, run_trial_with_noise, SweepConfig};
use anc::modem::{msk_modulate, Bit, Packet};
use anc::{Error, Strategy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn payload(n: usize, rng: &mut impl Rng) -> Vec<Bit> {
    (0..n).map(|_| Bit::from(rng.random::<bool>())).collect()
}

#[test]
fn payload_survives_partial_overlap_in_both_directions() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let alice = Packet::new(payload(400, &mut rng), 11);
    let bob = Packet::new(payload(400, &mut rng), 22);
    let sa = apply_channel(&msk_modulate(&alice).unwrap(), &ChannelParams::new(1.0, 0.4, 0.0).unwrap());
    let sb = apply_channel(&msk_modulate(&bob).unwrap(), &ChannelParams::new(0.7, 2.9, 0.0).unwrap());
    let offset = 90;
    let frame = superpose(&sa, &sb, offset).unwrap();

    for strategy in [Strategy::Direct, Strategy::Geometric] {
        let cfg = DecoderConfig::default().with_strategy(strategy);
        let at_alice = decode_packet(&frame, &alice, 0, &cfg.clone().with_peer_seed(22)).unwrap();
        let at_bob = decode_packet(&frame, &bob, offset, &cfg.with_peer_seed(11)).unwrap();
        assert_eq!(at_alice.other_bits, bob.payload, "{strategy}");
        assert_eq!(at_bob.other_bits, alice.payload, "{strategy}");
        assert!(at_alice.flags.first_bit_unreliable);
    }
}

#[test]
fn quadrature_phases_with_complete_overlap_cannot_be_resolved() {
    // |cos R| = 0 leaves no energy jumps, and there is no clean segment to fall back on
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let alice = Packet::new(payload(300, &mut rng), 3);
    let bob = Packet::new(payload(300, &mut rng), 4);
    let sa = apply_channel(&msk_modulate(&alice).unwrap(), &ChannelParams::new(1.0, FRAC_PI_2, 0.0).unwrap());
    let sb = apply_channel(&msk_modulate(&bob).unwrap(), &ChannelParams::new(0.6, 0.0, 0.0).unwrap());
    let frame = superpose(&sa, &sb, 0).unwrap();
    let err = decode_packet(&frame, &alice, 0, &DecoderConfig::default().with_peer_seed(4)).unwrap_err();
    assert!(matches!(err, Error::DecodeFailed(_)), "{err:?}");
}

#[test]
fn noiseless_trials_are_error_free() {
    let cfg = SweepConfig {
        packet_bits: 300,
        ..SweepConfig::default()
    };
    for seed in 0..50 {
        let sir = if seed % 2 == 0 { 2.0 } else { -2.5 };
        let out = run_trial_with_noise((f64::INFINITY, sir), &cfg, seed, 0.0).unwrap();
        assert_eq!((out.alice.errors, out.bob.errors), (0, 0), "seed {seed}");
        assert!(out.alice.bits > 0 && out.bob.bits > 0);
    }
}

#[test]
fn geometric_amplitude_error_shrinks_with_snr() {
    let cfg = SweepConfig::default();
    let mean_err = |snr: f64| -> f64 {
        let total: f64 = (0..30)
            .map(|s| {
                let o = run_trial((snr, 1.0), &cfg, 1000 + s).unwrap();
                o.alice.amp_rel_err + o.bob.amp_rel_err
            })
            .sum();
        total / 60.0
    };
    let (low, high) = (mean_err(15.0), mean_err(35.0));
    assert!(high < low, "{high} !< {low}");
}

#[test]
fn trials_are_reproducible_from_their_seed() {
    let cfg = SweepConfig::default();
    let a = run_trial((22.0, -1.0), &cfg, 314).unwrap();
    let b = run_trial((22.0, -1.0), &cfg, 314).unwrap();
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
}
