//! Multi-factor authentication toolkit for short-blocklength wireless links.
//!
//! The crate simulates every layer of a physical-layer authentication stack:
//!
//! * [`bits`] / [`gf2`]: packed bit vectors and GF(2) linear algebra.
//! * [`crypto`]: hashing, AEAD, MACs, and deterministic randomness.
//! * [`coding`]: syndrome-based Slepian-Wolf reconciliation with three code
//!   families (LDPC with ordered-statistics reprocessing, CRC-aided
//!   successive-cancellation-list polar codes, and BCH bounded-distance list
//!   decoding).
//! * [`skg`]: correlated-source simulation and frame-error-rate experiments.
//! * [`proximity`]: log-distance path-loss synthesis, Kalman smoothing, and
//!   distance-region decisions.
//! * [`puf`]: simulated physically unclonable functions and a code-offset
//!   fuzzy extractor.
//! * [`protocol`]: enrollment, mutual authentication, and zero-round-trip
//!   resumption state machines for an IoT node and a server.
//! * [`harness`]: a message-level adversary (drop / replay / inject / modify)
//!   with scripted attack scenarios and deterministic reports.
//!
//! Everything is deterministic given a master seed: experiments derive one RNG
//! per trial, so results are identical whether trials run in parallel (the
//! default `parallel` feature, backed by rayon) or sequentially.

pub mod bits;
pub mod coding;
pub mod crypto;
pub mod gf2;
pub mod harness;
pub mod protocol;
pub mod proximity;
pub mod puf;
pub mod rng;
pub mod skg;
