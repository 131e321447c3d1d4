//! Analog network coding over the two-way relay channel with MSK.
//!
//! Two senders transmit MSK packets at the same time; the relay forwards the
//! superposition and each sender recovers the other's packet noncoherently
//! from the interfered signal, using only knowledge of its own packet.
//!
//! * [`modem`]: MSK modulation/demodulation, scrambling, packets.
//! * [`channel`]: flat fading, AWGN and superposition with partial overlap.
//! * [`phase_solver`]: per-sample phase pairs and pair selection.
//! * [`amplitude`]: direct, moment-based and geometric amplitude estimators.
//! * [`decoder`]: the end-to-end receive pipeline.
//! * [`harness`]: seeded Monte-Carlo BER sweeps and CSV/SVG output.

// negated comparisons are used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(test)]
#[macro_use]
mod test_util;

pub mod amplitude;
pub mod channel;
pub mod decoder;
pub mod error;
pub mod harness;
pub mod modem;
pub mod phase_solver;

pub use amplitude::{AmplitudeEstimate, EnergyStats, Strategy};
pub use channel::{ChannelParams, InterferedFrame};
pub use decoder::{decode_packet, DecodeResult, DecoderConfig};
pub use error::{Error, HarnessError, Result};
pub use modem::{Bit, ComplexSample, Packet};
