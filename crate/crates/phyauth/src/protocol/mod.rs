//! Multi-factor authentication protocol: enrollment over a secure channel,
//! mutual authentication, and 0-RTT session resumption.
//!
//! Three factors gate every session: the peer must sit at the expected
//! distance (RSSI proximity), hold the device's PUF (fuzzy-extractor keys
//! wrap every ciphertext), and share the wireless channel (the session key
//! comes from reconciled channel measurements). Devices address each other
//! through one-time alias IDs that rotate every session, with pre-shared
//! emergency entries covering de-synchronization after blocked messages.

pub mod driver;
pub mod messages;
pub mod node;
pub mod server;

use crate::bits::BitVector;
use crate::coding::fixture::by_name;
use crate::coding::{DecoderParams, SlepianWolfCode};
use crate::crypto::{self, KeyHalf, SymmetricKey};
use crate::proximity::{PathLossParams, Region};
use crate::puf::FuzzyExtractor;
use thiserror::Error;

pub use driver::{
    audit_synchronization, deal_materials, enroll, run_honest_session, run_injected_message,
    run_lifecycle, run_session_with, Direction, DriverError, Flow, SessionMaterials,
    SessionReport, SessionScene, SyncAudit, TranscriptEntry,
};
pub use node::{NodeEmergencyEntry, NodeSession, NodeState, SessionStep};
pub use server::{DeviceRecord, ServerEmergencyEntry, ServerSession, ServerState};

/// Real device identifiers are 64 bits.
pub const REAL_ID_BITS: usize = 64;
/// One-time alias IDs and nonces are 128 bits.
pub const ALIAS_BITS: usize = 128;
/// Look-up identifiers naming a resumption secret are 128 bits.
pub const LOOKUP_ID_BITS: usize = 128;
/// Emergency entries provisioned at enrollment.
pub const EMERGENCY_ENTRIES: usize = 4;

/// Everything both parties agree on out of band.
#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    /// Reconciliation code for channel-derived sequences.
    pub code: SlepianWolfCode,
    pub decoder: DecoderParams,
    pub fe: FuzzyExtractor,
    /// Design crossover probability of the measurement channel.
    pub crossover: f64,
    /// Per-bit PUF re-measurement flip probability.
    pub p_intra: f64,
    pub path_loss: PathLossParams,
    /// Where the node expects the server to be (and vice versa).
    pub expected_distance_m: f64,
    pub emergency_entries: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            code: by_name("polar-512-267").expect("builtin code"),
            decoder: DecoderParams::PolarList { list_size: 128 },
            fe: FuzzyExtractor::deployed(),
            crossover: 0.05,
            p_intra: 0.05,
            path_loss: PathLossParams::auditorium(),
            expected_distance_m: 3.0,
            emergency_entries: EMERGENCY_ENTRIES,
        }
    }
}

impl ProtocolConfig {
    /// The distance band a verifier holds its peer to.
    pub fn expected_region(&self) -> Region {
        Region::expected_at(self.expected_distance_m)
    }

    /// The deployment parameters with log-normal shadowing switched off, so
    /// proximity decisions depend only on the true distance. Use when a
    /// run's outcome must be decided by protocol events rather than fading.
    pub fn without_shadowing(mut self) -> Self {
        self.path_loss.sigma_x = 0.0;
        self
    }

    /// Noise-free miniature configuration for fast protocol-logic tests:
    /// every run is deterministic and decode work is negligible.
    pub fn toy() -> Self {
        ProtocolConfig {
            code: by_name("bch-15-7-2").expect("builtin code"),
            decoder: DecoderParams::BchList { flip_order: 0 },
            fe: FuzzyExtractor::toy(),
            crossover: 0.0,
            p_intra: 0.0,
            ..Self::default()
        }
        .without_shadowing()
    }
}

/// Why a party refused to continue. Each variant names the check that
/// failed, in pipeline order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RejectReason {
    /// The peer is not at the expected distance.
    Proximity,
    /// The presented alias matches no live record.
    BadAlias,
    /// An alias or nonce was seen on the wire before.
    Replay,
    /// Ciphertext signature or authenticated decryption failed.
    Mac,
    /// The helper data does not reproduce the enrolled response's key.
    FeMismatch,
    /// The syndrome decoder found no consistent sequence.
    ReconciliationFailure,
    /// Reconciliation produced a key the peer evidently does not hold.
    KeyMismatch,
    /// A message failed structural parsing.
    Malformed,
    /// The peer went silent mid-flow.
    Timeout,
    /// A de-synchronized node has no emergency entries left; re-enrollment
    /// is required.
    EmergencyExhausted,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::Proximity => "proximity",
            RejectReason::BadAlias => "bad-alias",
            RejectReason::Replay => "replay",
            RejectReason::Mac => "mac",
            RejectReason::FeMismatch => "fe-mismatch",
            RejectReason::ReconciliationFailure => "reconciliation-failure",
            RejectReason::KeyMismatch => "key-mismatch",
            RejectReason::Malformed => "malformed",
            RejectReason::Timeout => "timeout",
            RejectReason::EmergencyExhausted => "emergency-exhausted",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        Some(match s {
            "proximity" => RejectReason::Proximity,
            "bad-alias" => RejectReason::BadAlias,
            "replay" => RejectReason::Replay,
            "mac" => RejectReason::Mac,
            "fe-mismatch" => RejectReason::FeMismatch,
            "reconciliation-failure" => RejectReason::ReconciliationFailure,
            "key-mismatch" => RejectReason::KeyMismatch,
            "malformed" => RejectReason::Malformed,
            "timeout" => RejectReason::Timeout,
            "emergency-exhausted" => RejectReason::EmergencyExhausted,
            _ => return None,
        })
    }
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionStatus {
    Success,
    /// The session succeeded through the emergency path.
    DesyncRecovered,
    Rejected(RejectReason),
}

impl SessionStatus {
    pub fn is_accepting(&self) -> bool {
        matches!(self, SessionStatus::Success | SessionStatus::DesyncRecovered)
    }

    pub fn render(&self) -> String {
        match self {
            SessionStatus::Success => "success".into(),
            SessionStatus::DesyncRecovered => "desync-recovered".into(),
            SessionStatus::Rejected(reason) => format!("reject-{reason}"),
        }
    }
}

/// One party's view of how a session ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionOutcome {
    pub status: SessionStatus,
    pub session_key: Option<SymmetricKey>,
    /// 0-RTT payload recovered by the server during resumption.
    pub early_data: Option<Vec<u8>>,
}

impl SessionOutcome {
    pub fn rejected(reason: RejectReason) -> Self {
        SessionOutcome {
            status: SessionStatus::Rejected(reason),
            session_key: None,
            early_data: None,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnrollError {
    #[error("device ID is already registered")]
    DuplicateRegistration,
    #[error("device answers {got} bits but the extractor expects {expected}")]
    ResponseLength { expected: usize, got: usize },
}

/// Next one-time alias: the leading bits of `Hash(A || N_B || R3)`.
pub fn derive_alias(real_id: &BitVector, nonce: &BitVector, response: &BitVector) -> BitVector {
    crypto::hash(&BitVector::concat(&[real_id, nonce, response])).truncate(ALIAS_BITS)
}

/// Next challenge in the chain: `Hash(Ch || nonce)`.
pub fn derive_challenge(challenge: &BitVector, nonce: &BitVector) -> BitVector {
    crypto::hash(&BitVector::concat(&[challenge, nonce]))
}

/// Alias rotation during resumption: the leading bits of `Hash(A || Y_A)`.
pub fn derive_resumption_alias(real_id: &BitVector, y_a: &BitVector) -> BitVector {
    crypto::hash(&BitVector::concat(&[real_id, y_a])).truncate(ALIAS_BITS)
}

/// Resumption secret: the session key and the server-issued look-up
/// identifier stretched to the measurement length, so the resumed key mixes
/// a past secret with fresh channel randomness.
pub fn derive_resumption_secret(key: &SymmetricKey, lookup: &BitVector, n: usize) -> BitVector {
    crypto::expand("resumption-secret", &[key.bits(), lookup], n)
}

/// Which role one half of a split key served.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KeyRole {
    Encrypt,
    Mac,
}

/// One use of a split-key half, for the role-separation audit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyUse {
    pub half: String,
    pub role: KeyRole,
}

/// One recorded derivation: `output = f(inputs)`, values as hex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivationEntry {
    pub label: &'static str,
    pub output: String,
    pub inputs: Vec<String>,
}

/// Per-party audit trail of derivations and key-half uses.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionLogs {
    pub derivations: Vec<DerivationEntry>,
    pub key_uses: Vec<KeyUse>,
}

impl SessionLogs {
    pub(crate) fn derived(&mut self, label: &'static str, output: &BitVector, inputs: &[&BitVector]) {
        self.derivations.push(DerivationEntry {
            label,
            output: output.to_hex(),
            inputs: inputs.iter().map(|b| b.to_hex()).collect(),
        });
    }

    pub(crate) fn used(&mut self, half: &KeyHalf, role: KeyRole) {
        self.key_uses.push(KeyUse {
            half: half.bits().to_hex(),
            role,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use std::collections::HashSet;

    #[test]
    fn alias_and_challenge_chains_are_deterministic_and_sensitive() {
        let mut rng = derive_rng(0, "chain", &[]);
        let id = BitVector::random(&mut rng, REAL_ID_BITS);
        let nonce = BitVector::random(&mut rng, ALIAS_BITS);
        let r3 = BitVector::random(&mut rng, 511);

        let alias = derive_alias(&id, &nonce, &r3);
        assert_eq!(alias.len(), ALIAS_BITS);
        assert_eq!(alias, derive_alias(&id, &nonce, &r3));
        let mut r3_bent = r3.clone();
        r3_bent.flip(17);
        assert_ne!(alias, derive_alias(&id, &nonce, &r3_bent));

        let ch = BitVector::random(&mut rng, 256);
        let next = derive_challenge(&ch, &nonce);
        assert_eq!(next.len(), 256);
        assert_ne!(next, derive_challenge(&next, &nonce));
    }

    #[test]
    fn alias_collisions_are_absent_over_many_draws() {
        let mut rng = derive_rng(1, "alias-collision", &[]);
        let id = BitVector::random(&mut rng, REAL_ID_BITS);
        let mut seen = HashSet::new();
        for _ in 0..100_000 {
            let nonce = BitVector::random(&mut rng, ALIAS_BITS);
            let r3 = BitVector::random(&mut rng, 64);
            assert!(seen.insert(derive_alias(&id, &nonce, &r3).to_hex()));
        }
    }

    #[test]
    fn resumption_secret_has_measurement_length_and_spreads() {
        let mut rng = derive_rng(2, "resumption", &[]);
        let key = SymmetricKey::from_bits(BitVector::random(&mut rng, 256));
        let lookup = BitVector::random(&mut rng, LOOKUP_ID_BITS);
        let z = derive_resumption_secret(&key, &lookup, 512);
        assert_eq!(z.len(), 512);
        assert_eq!(z, derive_resumption_secret(&key, &lookup, 512));

        let mut seen = HashSet::new();
        for _ in 0..10_000 {
            let lookup = BitVector::random(&mut rng, LOOKUP_ID_BITS);
            assert!(seen.insert(derive_resumption_secret(&key, &lookup, 64).to_hex()));
        }
    }

    #[test]
    fn reject_reasons_round_trip_through_labels() {
        for reason in [
            RejectReason::Proximity,
            RejectReason::BadAlias,
            RejectReason::Replay,
            RejectReason::Mac,
            RejectReason::FeMismatch,
            RejectReason::ReconciliationFailure,
            RejectReason::KeyMismatch,
            RejectReason::Malformed,
            RejectReason::Timeout,
            RejectReason::EmergencyExhausted,
        ] {
            assert_eq!(RejectReason::from_str(reason.as_str()), Some(reason));
        }
        assert_eq!(RejectReason::from_str("bogus"), None);
    }
}
