//! IoT-node side of the protocol.

use crate::bits::BitVector;
use crate::crypto::{self, SymmetricKey, NONCE_BITS};
use crate::proximity::decide_proximity;
use crate::puf::{PufDevice, CHALLENGE_BITS};
use crate::rng::derive_rng;
use rand_chacha::ChaCha8Rng;

use super::messages::{
    pack_fields, unpack_fields, ProtocolMessage, CONTEXT_NODE_PROOF, CONTEXT_RESUME_CONFIRM,
    CONTEXT_RESUME_EARLY, CONTEXT_SERVER_CHALLENGE, CONTEXT_SESSION_CONFIRM,
};
use super::{
    derive_alias, derive_challenge, derive_resumption_alias, derive_resumption_secret, KeyRole,
    ProtocolConfig, RejectReason, SessionLogs, SessionOutcome, SessionStatus, LOOKUP_ID_BITS,
    REAL_ID_BITS,
};

/// One pre-shared emergency identity: an alias the node may present after
/// de-synchronization and the fuzzy key the server will wrap the matching
/// emergency challenge under.
#[derive(Debug, Clone)]
pub struct NodeEmergencyEntry {
    pub(crate) alias: BitVector,
    pub(crate) key: SymmetricKey,
}

/// Everything the node persists between sessions.
#[derive(Clone)]
pub struct NodeState {
    pub(crate) real_id: BitVector,
    pub(crate) server_id: BitVector,
    pub(crate) device: PufDevice,
    pub(crate) alias: BitVector,
    pub(crate) k_r: SymmetricKey,
    pub(crate) emergency: Vec<NodeEmergencyEntry>,
    pub(crate) z: Option<BitVector>,
    /// Set while the node cannot be sure the server shares its state:
    /// from first send until a confirmed session completion.
    pub(crate) desynced: bool,
    pub(crate) expected_region: crate::proximity::Region,
}

impl std::fmt::Debug for NodeState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NodeState")
            .field("real_id", &self.real_id.to_hex())
            .field("alias", &self.alias.to_hex())
            .field("desynced", &self.desynced)
            .field("emergency_remaining", &self.emergency.len())
            .field("has_resumption_secret", &self.z.is_some())
            .finish_non_exhaustive()
    }
}

impl NodeState {
    pub fn real_id(&self) -> &BitVector {
        &self.real_id
    }

    pub fn current_alias(&self) -> &BitVector {
        &self.alias
    }

    pub fn fuzzy_key(&self) -> &SymmetricKey {
        &self.k_r
    }

    pub fn resumption_secret(&self) -> Option<&BitVector> {
        self.z.as_ref()
    }

    pub fn is_desynchronized(&self) -> bool {
        self.desynced
    }

    pub fn emergency_remaining(&self) -> usize {
        self.emergency.len()
    }

    /// Ready for 0-RTT: a resumption secret exists and the last session
    /// completed cleanly.
    pub fn resumption_ready(&self) -> bool {
        self.z.is_some() && !self.desynced
    }

    /// The same stored secrets driven by a different physical device, as a
    /// cloned-storage adversary would hold them.
    pub fn with_device(&self, device: PufDevice) -> NodeState {
        let mut copy = self.clone();
        copy.device = device;
        copy
    }

    /// Swaps the device for a behaviorally perturbed one, modeling physical
    /// tampering.
    pub fn tamper(&mut self, seed: u64) {
        self.device = self.device.perturbed(seed);
    }

    /// Scrambles the stored resumption secret, modeling storage corruption
    /// or an attacker guessing at `Z`. No-op if no secret is stored.
    pub fn corrupt_resumption_secret(&mut self, seed: u64) {
        use rand::Rng;
        let Some(z) = self.z.as_mut() else { return };
        let mut rng = crate::rng::derive_rng(seed, "z-corrupt", &[]);
        for i in 0..z.len() {
            if rng.gen_bool(0.5) {
                z.flip(i);
            }
        }
    }
}

/// What a party did in response to one driver prompt: possibly a message
/// to send, possibly a final outcome, possibly both.
#[derive(Debug)]
pub struct SessionStep {
    pub outgoing: Option<ProtocolMessage>,
    pub outcome: Option<SessionOutcome>,
}

impl SessionStep {
    fn send(message: ProtocolMessage) -> Self {
        SessionStep {
            outgoing: Some(message),
            outcome: None,
        }
    }

    fn finish(outcome: SessionOutcome) -> Self {
        SessionStep {
            outgoing: None,
            outcome: Some(outcome),
        }
    }
}

enum NodePhase {
    AuthStart,
    AuthAwaitChallenge,
    AuthAwaitConfirm,
    ResumeStart,
    ResumeAwaitConfirm,
    Done,
}

/// A node's view of one protocol run.
pub struct NodeSession<'a> {
    node: &'a mut NodeState,
    config: &'a ProtocolConfig,
    rng: ChaCha8Rng,
    logs: SessionLogs,
    phase: NodePhase,
    recovery: bool,
    y_a: BitVector,
    rssi: Vec<f64>,
    early_data: Vec<u8>,
    link_key: Option<SymmetricKey>,
    session_key: Option<SymmetricKey>,
    n1: Option<BitVector>,
}

impl<'a> NodeSession<'a> {
    pub fn new_auth(
        node: &'a mut NodeState,
        config: &'a ProtocolConfig,
        y_a: BitVector,
        rssi: Vec<f64>,
        seed: u64,
    ) -> Self {
        assert_eq!(y_a.len(), config.code.n(), "measurement length mismatch");
        NodeSession {
            node,
            config,
            rng: derive_rng(seed, "node-session", &[]),
            logs: SessionLogs::default(),
            phase: NodePhase::AuthStart,
            recovery: false,
            y_a,
            rssi,
            early_data: Vec::new(),
            link_key: None,
            session_key: None,
            n1: None,
        }
    }

    /// Caller must check `node.resumption_ready()` first.
    pub fn new_resume(
        node: &'a mut NodeState,
        config: &'a ProtocolConfig,
        y_a: BitVector,
        early_data: Vec<u8>,
        seed: u64,
    ) -> Self {
        assert!(node.resumption_ready(), "resumption requires a synchronized secret");
        assert_eq!(y_a.len(), config.code.n(), "measurement length mismatch");
        NodeSession {
            node,
            config,
            rng: derive_rng(seed, "node-session", &[]),
            logs: SessionLogs::default(),
            phase: NodePhase::ResumeStart,
            recovery: false,
            y_a,
            rssi: Vec::new(),
            early_data,
            link_key: None,
            session_key: None,
            n1: None,
        }
    }

    pub fn take_logs(&mut self) -> SessionLogs {
        std::mem::take(&mut self.logs)
    }

    /// Produces the opening message, or an immediate abort.
    pub fn start(&mut self) -> SessionStep {
        match self.phase {
            NodePhase::AuthStart => self.start_auth(),
            NodePhase::ResumeStart => self.start_resume(),
            _ => unreachable!("start called twice"),
        }
    }

    pub fn receive(&mut self, bytes: &[u8]) -> SessionStep {
        let Some(message) = ProtocolMessage::from_bytes(bytes) else {
            return self.reject(RejectReason::Malformed);
        };
        match (&self.phase, message) {
            (NodePhase::AuthAwaitChallenge, ProtocolMessage::ServerChallenge { ciphertext, tag }) => {
                self.on_server_challenge(ciphertext, tag)
            }
            (NodePhase::AuthAwaitConfirm, ProtocolMessage::SessionConfirm { ciphertext, tag }) => {
                self.on_session_confirm(ciphertext, tag)
            }
            (NodePhase::ResumeAwaitConfirm, ProtocolMessage::ResumeConfirm { ciphertext, tag }) => {
                self.on_resume_confirm(ciphertext, tag)
            }
            _ => self.reject(RejectReason::Malformed),
        }
    }

    /// The peer went silent; the session is over for this node.
    pub fn timeout(&mut self) -> SessionOutcome {
        self.phase = NodePhase::Done;
        SessionOutcome::rejected(RejectReason::Timeout)
    }

    fn reject(&mut self, reason: RejectReason) -> SessionStep {
        self.phase = NodePhase::Done;
        SessionStep::finish(SessionOutcome::rejected(reason))
    }

    fn start_auth(&mut self) -> SessionStep {
        // Proximity gates everything: nothing is sent to a server that is
        // not where this node expects it to be.
        let acceptable = decide_proximity(&self.config.path_loss, &self.rssi, self.node.expected_region)
            .map(|decision| decision.accepted)
            .unwrap_or(false);
        if !acceptable {
            return self.reject(RejectReason::Proximity);
        }

        let session_key = SymmetricKey::from_bits(crypto::hash(&self.y_a));
        self.logs.derived("session-key", session_key.bits(), &[&self.y_a]);
        self.session_key = Some(session_key);

        // A de-synchronized node must not reuse an alias the server may
        // already have seen; it spends an emergency identity instead.
        let (alias, link_key) = if self.node.desynced {
            if self.node.emergency.is_empty() {
                return self.reject(RejectReason::EmergencyExhausted);
            }
            let entry = self.node.emergency.remove(0);
            self.recovery = true;
            (entry.alias, entry.key)
        } else {
            (self.node.alias.clone(), self.node.k_r.clone())
        };
        self.link_key = Some(link_key);

        let nonce = BitVector::random(&mut self.rng, NONCE_BITS);
        self.n1 = Some(nonce.clone());

        // From the first transmission on, this node cannot know whether the
        // server shares its view until a session completes.
        self.node.desynced = true;
        self.phase = NodePhase::AuthAwaitChallenge;
        SessionStep::send(ProtocolMessage::AuthRequest { alias, nonce })
    }

    fn on_server_challenge(&mut self, ciphertext: crypto::CipherText, tag: crypto::AuthTag) -> SessionStep {
        let link_key = self.link_key.clone().expect("set at start");
        let (enc_half, mac_half) = link_key.split();
        self.logs.used(&mac_half, KeyRole::Mac);
        if !crypto::mac_verify(&mac_half, &ciphertext.to_bytes(), &tag) {
            return self.reject(RejectReason::Mac);
        }
        self.logs.used(&enc_half, KeyRole::Encrypt);
        let Ok(plain) = crypto::aead_decrypt(&enc_half, &ciphertext, CONTEXT_SERVER_CHALLENGE) else {
            return self.reject(RejectReason::Mac);
        };
        let Some(fields) = unpack_fields(
            &plain,
            &[REAL_ID_BITS, REAL_ID_BITS, CHALLENGE_BITS, NONCE_BITS, NONCE_BITS],
        ) else {
            return self.reject(RejectReason::Malformed);
        };
        let [id_a, id_b, challenge, n1_echo, n_b] = <[BitVector; 5]>::try_from(fields).expect("five fields");

        if id_a != self.node.real_id || id_b != self.node.server_id {
            return self.reject(RejectReason::Mac);
        }
        // A stale ciphertext under a still-current key carries the wrong
        // session nonce.
        if Some(&n1_echo) != self.n1.as_ref() {
            return self.reject(RejectReason::Replay);
        }

        // Fresh noisy measurement of the challenged response; helper data
        // lets the server strip the noise against its stored reference.
        let measured = self.node.device.respond_noisy(&challenge, &mut self.rng);
        let pair = self.config.fe.gen(&measured).expect("response length fixed at enrollment");
        self.logs.derived("fuzzy-key", pair.key.bits(), &[&measured]);

        let n_a = BitVector::random(&mut self.rng, NONCE_BITS);
        let ch3 = derive_challenge(&challenge, &n_a);
        self.logs.derived("challenge-chain", &ch3, &[&challenge, &n_a]);
        let ch4 = derive_challenge(&ch3, &n_b);
        self.logs.derived("challenge-chain", &ch4, &[&ch3, &n_b]);

        // Reference-grade responses for the next rounds travel inside the
        // ciphertext, so both sides hold them exactly.
        let r3 = self.node.device.respond(&ch3);
        let r4 = self.node.device.respond(&ch4);
        let next_key = self.config.fe.gen(&r3).expect("response length fixed at enrollment").key;
        self.logs.derived("next-fuzzy-key", next_key.bits(), &[&r3]);
        let next_alias = derive_alias(&self.node.real_id, &n_b, &r3);
        self.logs
            .derived("next-alias", &next_alias, &[&self.node.real_id, &n_b, &r3]);

        let syndrome = self.config.code.syndrome(&self.y_a);
        let plain = pack_fields(&[
            &self.node.real_id,
            &self.node.server_id,
            &syndrome,
            &n_a,
            &r3,
            &r4,
        ]);
        let (enc_half, mac_half) = pair.key.split();
        self.logs.used(&enc_half, KeyRole::Encrypt);
        let proof = crypto::aead_encrypt(&enc_half, &plain, CONTEXT_NODE_PROOF, &mut self.rng);
        self.logs.used(&mac_half, KeyRole::Mac);
        let proof_tag = crypto::mac_sign(&mac_half, &proof.to_bytes());

        // Rotate before transmission: the outgoing alias request is burnt
        // either way, and the server derives the same pair on acceptance.
        self.node.alias = next_alias;
        self.node.k_r = next_key;

        self.phase = NodePhase::AuthAwaitConfirm;
        SessionStep::send(ProtocolMessage::NodeProof {
            ciphertext: proof,
            tag: proof_tag,
            helper: pair.helper,
        })
    }

    fn on_session_confirm(&mut self, ciphertext: crypto::CipherText, tag: crypto::AuthTag) -> SessionStep {
        let session_key = self.session_key.clone().expect("set at start");
        let (enc_half, mac_half) = session_key.split();
        self.logs.used(&mac_half, KeyRole::Mac);
        if !crypto::mac_verify(&mac_half, &ciphertext.to_bytes(), &tag) {
            return self.reject(RejectReason::KeyMismatch);
        }
        self.logs.used(&enc_half, KeyRole::Encrypt);
        let Ok(plain) = crypto::aead_decrypt(&enc_half, &ciphertext, CONTEXT_SESSION_CONFIRM) else {
            return self.reject(RejectReason::KeyMismatch);
        };
        let Some(fields) = unpack_fields(&plain, &[LOOKUP_ID_BITS]) else {
            return self.reject(RejectReason::Malformed);
        };
        let lookup = &fields[0];

        let z = derive_resumption_secret(&session_key, lookup, self.config.code.n());
        self.logs.derived("resumption-secret", &z, &[session_key.bits(), lookup]);
        self.node.z = Some(z);
        self.node.desynced = false;

        self.phase = NodePhase::Done;
        SessionStep::finish(SessionOutcome {
            status: if self.recovery {
                SessionStatus::DesyncRecovered
            } else {
                SessionStatus::Success
            },
            session_key: Some(session_key),
            early_data: None,
        })
    }

    fn start_resume(&mut self) -> SessionStep {
        let z = self.node.z.clone().expect("checked by constructor");
        let y_star = z.xor(&self.y_a);
        let syndrome = self.config.code.syndrome(&y_star);
        let session_key = SymmetricKey::from_bits(crypto::hash(&y_star));
        self.logs.derived("session-key", session_key.bits(), &[&y_star]);

        let next_alias = derive_resumption_alias(&self.node.real_id, &self.y_a);
        self.logs
            .derived("next-alias", &next_alias, &[&self.node.real_id, &self.y_a]);

        let nonce = BitVector::random(&mut self.rng, NONCE_BITS);
        let (enc_half, mac_half) = session_key.split();
        self.logs.used(&enc_half, KeyRole::Encrypt);
        let ciphertext = crypto::aead_encrypt(&enc_half, &self.early_data, CONTEXT_RESUME_EARLY, &mut self.rng);
        self.logs.used(&mac_half, KeyRole::Mac);
        let tag = crypto::mac_sign(&mac_half, &ciphertext.to_bytes());

        let alias = std::mem::replace(&mut self.node.alias, next_alias);
        self.session_key = Some(session_key);
        self.node.desynced = true;
        self.phase = NodePhase::ResumeAwaitConfirm;
        SessionStep::send(ProtocolMessage::ResumeRequest {
            syndrome,
            alias,
            nonce,
            ciphertext,
            tag,
        })
    }

    fn on_resume_confirm(&mut self, ciphertext: crypto::CipherText, tag: crypto::AuthTag) -> SessionStep {
        let session_key = self.session_key.clone().expect("set at start");
        let (enc_half, mac_half) = session_key.split();
        self.logs.used(&mac_half, KeyRole::Mac);
        if !crypto::mac_verify(&mac_half, &ciphertext.to_bytes(), &tag) {
            return self.reject(RejectReason::KeyMismatch);
        }
        self.logs.used(&enc_half, KeyRole::Encrypt);
        let Ok(plain) = crypto::aead_decrypt(&enc_half, &ciphertext, CONTEXT_RESUME_CONFIRM) else {
            return self.reject(RejectReason::KeyMismatch);
        };
        let Some(fields) = unpack_fields(&plain, &[LOOKUP_ID_BITS]) else {
            return self.reject(RejectReason::Malformed);
        };

        let z = derive_resumption_secret(&session_key, &fields[0], self.config.code.n());
        self.logs
            .derived("resumption-secret", &z, &[session_key.bits(), &fields[0]]);
        self.node.z = Some(z);
        self.node.desynced = false;

        self.phase = NodePhase::Done;
        SessionStep::finish(SessionOutcome {
            status: SessionStatus::Success,
            session_key: Some(session_key),
            early_data: None,
        })
    }
}
