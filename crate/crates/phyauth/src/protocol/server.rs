//! Server side of the protocol.

use std::collections::{HashMap, HashSet};

use crate::bits::BitVector;
use crate::crypto::{self, SymmetricKey, NONCE_BITS};
use crate::proximity::decide_proximity;
use crate::puf::CHALLENGE_BITS;
use crate::rng::derive_rng;
use rand_chacha::ChaCha8Rng;

use super::messages::{
    pack_fields, unpack_fields, ProtocolMessage, CONTEXT_NODE_PROOF, CONTEXT_RESUME_CONFIRM,
    CONTEXT_RESUME_EARLY, CONTEXT_SERVER_CHALLENGE, CONTEXT_SESSION_CONFIRM,
};
use super::node::SessionStep;
use super::{
    derive_alias, derive_challenge, derive_resumption_alias, derive_resumption_secret, KeyRole,
    ProtocolConfig, RejectReason, SessionLogs, SessionOutcome, SessionStatus, LOOKUP_ID_BITS,
    REAL_ID_BITS,
};

/// A pre-shared emergency identity as the server stores it: the alias to
/// recognize, the fuzzy key protecting the recovery challenge, and the
/// challenge/reference pair to fall back on.
#[derive(Debug, Clone)]
pub struct ServerEmergencyEntry {
    pub(crate) alias: BitVector,
    pub(crate) key: SymmetricKey,
    pub(crate) challenge: BitVector,
    pub(crate) response: BitVector,
}

/// Everything the server persists about one enrolled device.
#[derive(Clone)]
pub struct DeviceRecord {
    pub(crate) real_id: BitVector,
    pub(crate) alias: BitVector,
    pub(crate) k_r: SymmetricKey,
    /// Challenge to issue at the next authentication.
    pub(crate) challenge: BitVector,
    /// Reference response to that challenge, captured over the enrollment
    /// channel or inside an authenticated ciphertext; never a noisy reading.
    pub(crate) response: BitVector,
    pub(crate) emergency: Vec<ServerEmergencyEntry>,
    pub(crate) z: Option<BitVector>,
}

impl DeviceRecord {
    pub fn current_alias(&self) -> &BitVector {
        &self.alias
    }

    pub fn fuzzy_key(&self) -> &SymmetricKey {
        &self.k_r
    }

    pub fn next_challenge(&self) -> &BitVector {
        &self.challenge
    }

    pub fn reference_response(&self) -> &BitVector {
        &self.response
    }

    pub fn resumption_secret(&self) -> Option<&BitVector> {
        self.z.as_ref()
    }

    pub fn emergency_remaining(&self) -> usize {
        self.emergency.len()
    }
}

/// The server's registry plus its replay memory.
pub struct ServerState {
    pub(crate) server_id: BitVector,
    /// Keyed by the hex of the device's real identifier.
    pub(crate) records: HashMap<String, DeviceRecord>,
    /// Current alias -> record key.
    pub(crate) alias_index: HashMap<String, String>,
    /// Outstanding emergency alias -> record key.
    pub(crate) emergency_index: HashMap<String, String>,
    pub(crate) seen_aliases: HashSet<String>,
    pub(crate) seen_nonces: HashSet<String>,
}

impl ServerState {
    pub fn new(server_id: u64) -> Self {
        ServerState {
            server_id: BitVector::from_u64(server_id, REAL_ID_BITS),
            records: HashMap::new(),
            alias_index: HashMap::new(),
            emergency_index: HashMap::new(),
            seen_aliases: HashSet::new(),
            seen_nonces: HashSet::new(),
        }
    }

    pub fn server_id(&self) -> &BitVector {
        &self.server_id
    }

    pub fn record(&self, real_id: &BitVector) -> Option<&DeviceRecord> {
        self.records.get(&real_id.to_hex())
    }
}

enum ServerPhase {
    AwaitRequest,
    AwaitProof,
    Done,
}

/// The server's view of one protocol run.
pub struct ServerSession<'a> {
    server: &'a mut ServerState,
    config: &'a ProtocolConfig,
    rng: ChaCha8Rng,
    logs: SessionLogs,
    phase: ServerPhase,
    y_b: BitVector,
    rssi: Vec<f64>,
    recovery: bool,
    record_key: Option<String>,
    link_key: Option<SymmetricKey>,
    challenge: Option<BitVector>,
    reference: Option<BitVector>,
    n1: Option<BitVector>,
    n_b: Option<BitVector>,
}

impl<'a> ServerSession<'a> {
    pub fn new(
        server: &'a mut ServerState,
        config: &'a ProtocolConfig,
        y_b: BitVector,
        rssi: Vec<f64>,
        seed: u64,
    ) -> Self {
        assert_eq!(y_b.len(), config.code.n(), "measurement length mismatch");
        ServerSession {
            server,
            config,
            rng: derive_rng(seed, "server-session", &[]),
            logs: SessionLogs::default(),
            phase: ServerPhase::AwaitRequest,
            y_b,
            rssi,
            recovery: false,
            record_key: None,
            link_key: None,
            challenge: None,
            reference: None,
            n1: None,
            n_b: None,
        }
    }

    pub fn take_logs(&mut self) -> SessionLogs {
        std::mem::take(&mut self.logs)
    }

    pub fn receive(&mut self, bytes: &[u8]) -> SessionStep {
        let Some(message) = ProtocolMessage::from_bytes(bytes) else {
            return self.reject(RejectReason::Malformed);
        };
        match (&self.phase, message) {
            (ServerPhase::AwaitRequest, ProtocolMessage::AuthRequest { alias, nonce }) => {
                self.on_auth_request(alias, nonce)
            }
            (
                ServerPhase::AwaitRequest,
                ProtocolMessage::ResumeRequest {
                    syndrome,
                    alias,
                    nonce,
                    ciphertext,
                    tag,
                },
            ) => self.on_resume_request(syndrome, alias, nonce, ciphertext, tag),
            (ServerPhase::AwaitProof, ProtocolMessage::NodeProof { ciphertext, tag, helper }) => {
                self.on_node_proof(ciphertext, tag, helper)
            }
            _ => self.reject(RejectReason::Malformed),
        }
    }

    /// The peer went silent. `None` means the session never started from the
    /// server's point of view.
    pub fn timeout(&mut self) -> Option<SessionOutcome> {
        let outcome = match self.phase {
            ServerPhase::AwaitRequest => None,
            _ => Some(SessionOutcome::rejected(RejectReason::Timeout)),
        };
        self.phase = ServerPhase::Done;
        outcome
    }

    fn reject(&mut self, reason: RejectReason) -> SessionStep {
        self.phase = ServerPhase::Done;
        SessionStep {
            outgoing: None,
            outcome: Some(SessionOutcome::rejected(reason)),
        }
    }

    fn proximity_ok(&self) -> bool {
        decide_proximity(&self.config.path_loss, &self.rssi, self.config.expected_region())
            .map(|decision| decision.accepted)
            .unwrap_or(false)
    }

    fn on_auth_request(&mut self, alias: BitVector, nonce: BitVector) -> SessionStep {
        if !self.proximity_ok() {
            return self.reject(RejectReason::Proximity);
        }
        let alias_hex = alias.to_hex();
        let nonce_hex = nonce.to_hex();
        if self.server.seen_aliases.contains(&alias_hex) || self.server.seen_nonces.contains(&nonce_hex) {
            return self.reject(RejectReason::Replay);
        }
        self.server.seen_aliases.insert(alias_hex.clone());
        self.server.seen_nonces.insert(nonce_hex);

        // Aliases resolve either through the current index or, for a node
        // that lost synchronization, through a single-use emergency entry
        // that is deleted the moment it is presented.
        let (record_key, link_key, challenge, reference) =
            if let Some(key) = self.server.alias_index.get(&alias_hex).cloned() {
                let record = self.server.records.get(&key).expect("index points at record");
                (
                    key,
                    record.k_r.clone(),
                    record.challenge.clone(),
                    record.response.clone(),
                )
            } else if let Some(key) = self.server.emergency_index.remove(&alias_hex) {
                let record = self.server.records.get_mut(&key).expect("index points at record");
                let position = record
                    .emergency
                    .iter()
                    .position(|entry| entry.alias.to_hex() == alias_hex)
                    .expect("index points at entry");
                let entry = record.emergency.remove(position);
                self.recovery = true;
                (key, entry.key, entry.challenge, entry.response)
            } else {
                return self.reject(RejectReason::BadAlias);
            };

        let record = &self.server.records[&record_key];
        let n_b = BitVector::random(&mut self.rng, NONCE_BITS);
        let plain = pack_fields(&[
            &record.real_id,
            &self.server.server_id,
            &challenge,
            &nonce,
            &n_b,
        ]);
        let (enc_half, mac_half) = link_key.split();
        self.logs.used(&enc_half, KeyRole::Encrypt);
        let ciphertext = crypto::aead_encrypt(&enc_half, &plain, CONTEXT_SERVER_CHALLENGE, &mut self.rng);
        self.logs.used(&mac_half, KeyRole::Mac);
        let tag = crypto::mac_sign(&mac_half, &ciphertext.to_bytes());

        self.record_key = Some(record_key);
        self.link_key = Some(link_key);
        self.challenge = Some(challenge);
        self.reference = Some(reference);
        self.n1 = Some(nonce);
        self.n_b = Some(n_b);
        self.phase = ServerPhase::AwaitProof;
        SessionStep {
            outgoing: Some(ProtocolMessage::ServerChallenge { ciphertext, tag }),
            outcome: None,
        }
    }

    fn on_node_proof(
        &mut self,
        ciphertext: crypto::CipherText,
        tag: crypto::AuthTag,
        helper: BitVector,
    ) -> SessionStep {
        let reference = self.reference.clone().expect("set on request");
        // The stored reference plus the wire helper must resolve to the same
        // key the node just derived from its fresh reading; more drift than
        // the code radius means a different physical device.
        let Ok(fuzzy_key) = self.config.fe.rep(&reference, &helper) else {
            return self.reject(RejectReason::FeMismatch);
        };
        self.logs.derived("fuzzy-key", fuzzy_key.bits(), &[&reference, &helper]);

        let (enc_half, mac_half) = fuzzy_key.split();
        self.logs.used(&mac_half, KeyRole::Mac);
        if !crypto::mac_verify(&mac_half, &ciphertext.to_bytes(), &tag) {
            return self.reject(RejectReason::Mac);
        }
        self.logs.used(&enc_half, KeyRole::Encrypt);
        let Ok(plain) = crypto::aead_decrypt(&enc_half, &ciphertext, CONTEXT_NODE_PROOF) else {
            return self.reject(RejectReason::Mac);
        };
        let Some(fields) = unpack_fields(
            &plain,
            &[
                REAL_ID_BITS,
                REAL_ID_BITS,
                self.config.code.syndrome_len(),
                NONCE_BITS,
                self.config.fe.n(),
                self.config.fe.n(),
            ],
        ) else {
            return self.reject(RejectReason::Malformed);
        };
        let [id_a, id_b, syndrome, n_a, r3, r4] = <[BitVector; 6]>::try_from(fields).expect("six fields");

        let record_key = self.record_key.clone().expect("set on request");
        let record = &self.server.records[&record_key];
        if id_a != record.real_id || id_b != self.server.server_id {
            return self.reject(RejectReason::Malformed);
        }

        let challenge = self.challenge.clone().expect("set on request");
        let n_b = self.n_b.clone().expect("set on request");
        let ch3 = derive_challenge(&challenge, &n_a);
        self.logs.derived("challenge-chain", &ch3, &[&challenge, &n_a]);
        let ch4 = derive_challenge(&ch3, &n_b);
        self.logs.derived("challenge-chain", &ch4, &[&ch3, &n_b]);
        debug_assert_eq!(ch3.len(), CHALLENGE_BITS);

        let next_key = self
            .config
            .fe
            .gen(&r3)
            .expect("lengths checked by unpack")
            .key;
        self.logs.derived("next-fuzzy-key", next_key.bits(), &[&r3]);
        let next_alias = derive_alias(&record.real_id, &n_b, &r3);
        self.logs.derived("next-alias", &next_alias, &[&record.real_id, &n_b, &r3]);

        // Channel-reciprocity check: our own measurement, corrected by the
        // node's syndrome, must land on the node's exact measurement.
        let decoded = match self
            .config
            .code
            .decode(&self.y_b, &syndrome, self.config.crossover, &self.config.decoder)
        {
            Ok(result) if result.verified => result.estimate,
            _ => return self.reject(RejectReason::ReconciliationFailure),
        };
        let session_key = SymmetricKey::from_bits(crypto::hash(&decoded));
        self.logs.derived("session-key", session_key.bits(), &[&decoded]);

        let lookup = BitVector::random(&mut self.rng, LOOKUP_ID_BITS);
        let z = derive_resumption_secret(&session_key, &lookup, self.config.code.n());
        self.logs.derived("resumption-secret", &z, &[session_key.bits(), &lookup]);

        // Commit the rotated identity before answering: if our confirmation
        // is lost the node re-enters through an emergency alias, never
        // through state we have already discarded.
        let record = self.server.records.get_mut(&record_key).expect("looked up above");
        self.server.alias_index.remove(&record.alias.to_hex());
        self.server.alias_index.insert(next_alias.to_hex(), record_key.clone());
        record.alias = next_alias;
        record.k_r = next_key;
        record.challenge = ch4;
        record.response = r4;
        record.z = Some(z);

        let confirm_plain = pack_fields(&[&lookup]);
        let (enc_half, mac_half) = session_key.split();
        self.logs.used(&enc_half, KeyRole::Encrypt);
        let confirm = crypto::aead_encrypt(&enc_half, &confirm_plain, CONTEXT_SESSION_CONFIRM, &mut self.rng);
        self.logs.used(&mac_half, KeyRole::Mac);
        let confirm_tag = crypto::mac_sign(&mac_half, &confirm.to_bytes());

        self.phase = ServerPhase::Done;
        SessionStep {
            outgoing: Some(ProtocolMessage::SessionConfirm {
                ciphertext: confirm,
                tag: confirm_tag,
            }),
            outcome: Some(SessionOutcome {
                status: if self.recovery {
                    SessionStatus::DesyncRecovered
                } else {
                    SessionStatus::Success
                },
                session_key: Some(session_key),
                early_data: None,
            }),
        }
    }

    fn on_resume_request(
        &mut self,
        syndrome: BitVector,
        alias: BitVector,
        nonce: BitVector,
        ciphertext: crypto::CipherText,
        tag: crypto::AuthTag,
    ) -> SessionStep {
        if !self.proximity_ok() {
            return self.reject(RejectReason::Proximity);
        }
        let alias_hex = alias.to_hex();
        let nonce_hex = nonce.to_hex();
        if self.server.seen_aliases.contains(&alias_hex) || self.server.seen_nonces.contains(&nonce_hex) {
            return self.reject(RejectReason::Replay);
        }
        self.server.seen_aliases.insert(alias_hex.clone());
        self.server.seen_nonces.insert(nonce_hex);

        let Some(record_key) = self.server.alias_index.get(&alias_hex).cloned() else {
            return self.reject(RejectReason::BadAlias);
        };
        let record = &self.server.records[&record_key];
        let Some(z) = record.z.clone() else {
            return self.reject(RejectReason::BadAlias);
        };
        if syndrome.len() != self.config.code.syndrome_len() {
            return self.reject(RejectReason::Malformed);
        }

        // Both sides mask their measurement with the shared secret; the
        // masked words still differ only by the channel noise, so the same
        // reconciliation machinery applies.
        let masked_measurement = z.xor(&self.y_b);
        let masked = match self
            .config
            .code
            .decode(&masked_measurement, &syndrome, self.config.crossover, &self.config.decoder)
        {
            Ok(result) if result.verified => result.estimate,
            _ => return self.reject(RejectReason::ReconciliationFailure),
        };
        let session_key = SymmetricKey::from_bits(crypto::hash(&masked));
        self.logs.derived("session-key", session_key.bits(), &[&masked]);

        let (enc_half, mac_half) = session_key.split();
        self.logs.used(&mac_half, KeyRole::Mac);
        if !crypto::mac_verify(&mac_half, &ciphertext.to_bytes(), &tag) {
            return self.reject(RejectReason::KeyMismatch);
        }
        self.logs.used(&enc_half, KeyRole::Encrypt);
        let Ok(early_data) = crypto::aead_decrypt(&enc_half, &ciphertext, CONTEXT_RESUME_EARLY) else {
            return self.reject(RejectReason::KeyMismatch);
        };

        let measurement = masked.xor(&z);
        let next_alias = derive_resumption_alias(&record.real_id, &measurement);
        self.logs.derived("next-alias", &next_alias, &[&record.real_id, &measurement]);

        let lookup = BitVector::random(&mut self.rng, LOOKUP_ID_BITS);
        let z_new = derive_resumption_secret(&session_key, &lookup, self.config.code.n());
        self.logs.derived("resumption-secret", &z_new, &[session_key.bits(), &lookup]);

        let record = self.server.records.get_mut(&record_key).expect("looked up above");
        self.server.alias_index.remove(&record.alias.to_hex());
        self.server.alias_index.insert(next_alias.to_hex(), record_key.clone());
        record.alias = next_alias;
        record.z = Some(z_new);

        let confirm_plain = pack_fields(&[&lookup]);
        self.logs.used(&enc_half, KeyRole::Encrypt);
        let confirm = crypto::aead_encrypt(&enc_half, &confirm_plain, CONTEXT_RESUME_CONFIRM, &mut self.rng);
        self.logs.used(&mac_half, KeyRole::Mac);
        let confirm_tag = crypto::mac_sign(&mac_half, &confirm.to_bytes());

        self.phase = ServerPhase::Done;
        SessionStep {
            outgoing: Some(ProtocolMessage::ResumeConfirm {
                ciphertext: confirm,
                tag: confirm_tag,
            }),
            outcome: Some(SessionOutcome {
                status: SessionStatus::Success,
                session_key: Some(session_key),
                early_data: Some(early_data),
            }),
        }
    }
}
