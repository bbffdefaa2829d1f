//! Session orchestration: enrollment, honest runs, intercepted runs, and
//! state audits.
//!
//! The driver owns everything the radio environment decides (channel
//! measurements, received signal strengths) and feeds both parties from a
//! single seeded source, so whole sessions replay bit-for-bit.

use rand::Rng;
use thiserror::Error;

use crate::bits::BitVector;
use crate::proximity::{synthesize_rssi, ProximityError, Region, DECISION_STEPS};
use crate::puf::{PufDevice, CHALLENGE_BITS};
use crate::rng::derive_rng;
use crate::skg::{sample_pair, SkgError};

use super::messages::ProtocolMessage;
use super::node::{NodeEmergencyEntry, NodeSession, NodeState};
use super::server::{DeviceRecord, ServerEmergencyEntry, ServerSession, ServerState};
use super::{
    EnrollError, ProtocolConfig, SessionLogs, SessionOutcome, ALIAS_BITS, REAL_ID_BITS,
};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("channel synthesis failed: {0}")]
    Skg(#[from] SkgError),
    #[error("signal synthesis failed: {0}")]
    Proximity(#[from] ProximityError),
    #[error("enrollment failed: {0}")]
    Enroll(#[from] EnrollError),
    #[error("node has no synchronized resumption secret")]
    ResumeUnavailable,
}

/// Which protocol run the node initiates.
#[derive(Debug, Clone)]
pub enum Flow {
    Authenticate,
    Resume { early_data: Vec<u8> },
}

/// Physical conditions for one session.
#[derive(Debug, Clone, Copy)]
pub struct SessionScene {
    /// Where the counterpart actually transmits from.
    pub true_distance_m: f64,
    /// Bit-disagreement probability between the two channel measurements.
    pub crossover: f64,
}

impl SessionScene {
    /// The counterpart is exactly where the configuration expects it.
    pub fn honest(config: &ProtocolConfig) -> Self {
        SessionScene {
            true_distance_m: config.expected_distance_m,
            crossover: config.crossover,
        }
    }
}

/// Everything the environment hands the two parties for one session.
pub struct SessionMaterials {
    pub y_a: BitVector,
    pub y_b: BitVector,
    pub node_rssi: Vec<f64>,
    pub server_rssi: Vec<f64>,
}

/// Draws correlated channel measurements and signal-strength traces for one
/// session. Deterministic in `seed`.
pub fn deal_materials(
    config: &ProtocolConfig,
    scene: &SessionScene,
    seed: u64,
) -> Result<SessionMaterials, DriverError> {
    let mut rng = derive_rng(seed, "session-materials", &[]);
    let pair = sample_pair(config.code.n(), scene.crossover, rng.gen())?;
    let node_rssi = synthesize_rssi(&config.path_loss, scene.true_distance_m, DECISION_STEPS, rng.gen())?;
    let server_rssi = synthesize_rssi(&config.path_loss, scene.true_distance_m, DECISION_STEPS, rng.gen())?;
    Ok(SessionMaterials {
        y_a: pair.y_a,
        y_b: pair.y_b,
        node_rssi,
        server_rssi,
    })
}

/// Registers a device over the enrollment channel (assumed secure and
/// out of band). The server issues the initial challenges, alias, and
/// emergency identities; the device answers with reference responses.
pub fn enroll(
    server: &mut ServerState,
    device: PufDevice,
    real_id: u64,
    config: &ProtocolConfig,
    seed: u64,
) -> Result<NodeState, EnrollError> {
    if device.response_length() != config.fe.n() {
        return Err(EnrollError::ResponseLength {
            expected: config.fe.n(),
            got: device.response_length(),
        });
    }
    let real_id = BitVector::from_u64(real_id, REAL_ID_BITS);
    let record_key = real_id.to_hex();
    if server.records.contains_key(&record_key) {
        return Err(EnrollError::DuplicateRegistration);
    }

    let mut rng = derive_rng(seed, "enrollment", &[]);
    let ch1 = BitVector::random(&mut rng, CHALLENGE_BITS);
    let ch2 = BitVector::random(&mut rng, CHALLENGE_BITS);
    let alias = BitVector::random(&mut rng, ALIAS_BITS);

    let r1 = device.respond(&ch1);
    let k_r1 = config.fe.gen(&r1).expect("length checked above").key;
    let r2 = device.respond(&ch2);

    let mut server_emergency = Vec::with_capacity(config.emergency_entries);
    let mut node_emergency = Vec::with_capacity(config.emergency_entries);
    for _ in 0..config.emergency_entries {
        let e_alias = BitVector::random(&mut rng, ALIAS_BITS);
        let e_challenge = BitVector::random(&mut rng, CHALLENGE_BITS);
        let e_response = device.respond(&e_challenge);
        let e_key = config.fe.gen(&e_response).expect("length checked above").key;
        server.emergency_index.insert(e_alias.to_hex(), record_key.clone());
        server_emergency.push(ServerEmergencyEntry {
            alias: e_alias.clone(),
            key: e_key.clone(),
            challenge: e_challenge,
            response: e_response,
        });
        node_emergency.push(NodeEmergencyEntry {
            alias: e_alias,
            key: e_key,
        });
    }

    server.alias_index.insert(alias.to_hex(), record_key.clone());
    server.records.insert(
        record_key,
        DeviceRecord {
            real_id: real_id.clone(),
            alias: alias.clone(),
            k_r: k_r1.clone(),
            challenge: ch2,
            response: r2,
            emergency: server_emergency,
            z: None,
        },
    );

    Ok(NodeState {
        real_id,
        server_id: server.server_id.clone(),
        device,
        alias,
        k_r: k_r1,
        emergency: node_emergency,
        z: None,
        desynced: false,
        expected_region: Region::expected_at(config.expected_distance_m),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    NodeToServer,
    ServerToNode,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::NodeToServer => "node->server",
            Direction::ServerToNode => "server->node",
        }
    }

    fn flip(self) -> Self {
        match self {
            Direction::NodeToServer => Direction::ServerToNode,
            Direction::ServerToNode => Direction::NodeToServer,
        }
    }
}

/// One message as it appeared on the wire, before any interference.
pub struct TranscriptEntry {
    pub phase: &'static str,
    pub direction: Direction,
    pub bytes: Vec<u8>,
    /// What the channel did with it, as reported by the interceptor.
    pub action: String,
}

/// Everything observable about one completed session.
pub struct SessionReport {
    pub transcript: Vec<TranscriptEntry>,
    pub node_outcome: Option<SessionOutcome>,
    pub server_outcome: Option<SessionOutcome>,
    pub node_logs: SessionLogs,
    pub server_logs: SessionLogs,
}

/// Runs one session, routing every message through `interceptor`. The
/// interceptor sees the message index within this session and the honest
/// bytes, and returns what (if anything) actually arrives plus a label for
/// the transcript. Returning `None` silences the channel; both waiting
/// parties then time out.
pub fn run_session_with<F>(
    node: &mut NodeState,
    server: &mut ServerState,
    config: &ProtocolConfig,
    scene: &SessionScene,
    flow: Flow,
    seed: u64,
    mut interceptor: F,
) -> Result<SessionReport, DriverError>
where
    F: FnMut(usize, &[u8]) -> (Option<Vec<u8>>, String),
{
    let materials = deal_materials(config, scene, seed)?;
    let mut seed_rng = derive_rng(seed, "session-seeds", &[]);
    let node_seed = seed_rng.gen();
    let server_seed = seed_rng.gen();

    let mut node_session = match flow {
        Flow::Authenticate => {
            NodeSession::new_auth(node, config, materials.y_a, materials.node_rssi, node_seed)
        }
        Flow::Resume { early_data } => {
            if !node.resumption_ready() {
                return Err(DriverError::ResumeUnavailable);
            }
            NodeSession::new_resume(node, config, materials.y_a, early_data, node_seed)
        }
    };
    let mut server_session = ServerSession::new(server, config, materials.y_b, materials.server_rssi, server_seed);

    let mut transcript = Vec::new();
    let mut node_outcome: Option<SessionOutcome> = None;
    let mut server_outcome: Option<SessionOutcome> = None;

    let mut step = node_session.start();
    node_outcome = node_outcome.or(step.outcome.take());
    let mut direction = Direction::NodeToServer;
    let mut index = 0;

    while let Some(message) = step.outgoing.take() {
        let phase = message.phase();
        let bytes = message.to_bytes();
        let (delivered, action) = interceptor(index, &bytes);
        index += 1;
        transcript.push(TranscriptEntry {
            phase,
            direction,
            bytes,
            action,
        });
        let Some(payload) = delivered else { break };
        step = match direction {
            Direction::NodeToServer => {
                let s = server_session.receive(&payload);
                server_outcome = server_outcome.or(s.outcome.clone());
                s
            }
            Direction::ServerToNode => {
                let s = node_session.receive(&payload);
                node_outcome = node_outcome.or(s.outcome.clone());
                s
            }
        };
        step.outcome = None;
        direction = direction.flip();
    }

    if node_outcome.is_none() {
        node_outcome = Some(node_session.timeout());
    }
    if server_outcome.is_none() {
        server_outcome = server_session.timeout();
    }

    Ok(SessionReport {
        transcript,
        node_outcome,
        server_outcome,
        node_logs: node_session.take_logs(),
        server_logs: server_session.take_logs(),
    })
}

/// A session over a faithful channel.
pub fn run_honest_session(
    node: &mut NodeState,
    server: &mut ServerState,
    config: &ProtocolConfig,
    scene: &SessionScene,
    flow: Flow,
    seed: u64,
) -> Result<SessionReport, DriverError> {
    run_session_with(node, server, config, scene, flow, seed, |_, bytes| {
        (Some(bytes.to_vec()), "deliver".to_string())
    })
}

/// Feeds one adversary-supplied message to a fresh server session, as an
/// attacker opening a connection would. No node participates.
pub fn run_injected_message(
    server: &mut ServerState,
    config: &ProtocolConfig,
    scene: &SessionScene,
    bytes: &[u8],
    seed: u64,
) -> Result<SessionReport, DriverError> {
    let materials = deal_materials(config, scene, seed)?;
    let mut seed_rng = derive_rng(seed, "session-seeds", &[]);
    let _node_seed: u64 = seed_rng.gen();
    let server_seed = seed_rng.gen();
    let mut session = ServerSession::new(server, config, materials.y_b, materials.server_rssi, server_seed);

    let mut transcript = vec![TranscriptEntry {
        phase: ProtocolMessage::from_bytes(bytes).map(|m| m.phase()).unwrap_or("unparsed"),
        direction: Direction::NodeToServer,
        bytes: bytes.to_vec(),
        action: "inject".to_string(),
    }];
    let mut step = session.receive(bytes);
    let mut server_outcome = step.outcome.take();
    if let Some(message) = step.outgoing {
        transcript.push(TranscriptEntry {
            phase: message.phase(),
            direction: Direction::ServerToNode,
            bytes: message.to_bytes(),
            action: "unanswered".to_string(),
        });
    }
    if server_outcome.is_none() {
        server_outcome = session.timeout();
    }
    Ok(SessionReport {
        transcript,
        node_outcome: None,
        server_outcome,
        node_logs: SessionLogs::default(),
        server_logs: session.take_logs(),
    })
}

/// Enrolls a device and runs one authentication followed by a chain of
/// resumptions, all honestly. Returns the node plus one report per session.
pub fn run_lifecycle(
    server: &mut ServerState,
    device: PufDevice,
    real_id: u64,
    config: &ProtocolConfig,
    resumptions: usize,
    seed: u64,
) -> Result<(NodeState, Vec<SessionReport>), DriverError> {
    let mut seed_rng = derive_rng(seed, "lifecycle", &[]);
    let mut node = enroll(server, device, real_id, config, seed_rng.gen())?;
    let scene = SessionScene::honest(config);
    let mut reports = Vec::with_capacity(resumptions + 1);
    reports.push(run_honest_session(
        &mut node,
        server,
        config,
        &scene,
        Flow::Authenticate,
        seed_rng.gen(),
    )?);
    for round in 0..resumptions {
        let early_data = format!("sensor-report-{round}").into_bytes();
        reports.push(run_honest_session(
            &mut node,
            server,
            config,
            &scene,
            Flow::Resume { early_data },
            seed_rng.gen(),
        )?);
    }
    Ok((node, reports))
}

/// Field-by-field comparison of what the two parties currently store about
/// each other.
#[derive(Debug)]
pub struct SyncAudit {
    pub alias_match: bool,
    pub key_match: bool,
    /// The stored challenge/response pair still matches what the physical
    /// device would answer.
    pub crp_match: bool,
    pub z_match: bool,
    /// Every emergency identity the node still holds is also live on the
    /// server.
    pub emergencies_usable: bool,
    pub node_emergency_remaining: usize,
    pub server_emergency_remaining: usize,
    pub node_desynced: bool,
}

impl SyncAudit {
    pub fn fully_synchronized(&self) -> bool {
        self.alias_match && self.key_match && self.crp_match && self.z_match && !self.node_desynced
    }

    /// Either in sync, or out of sync with a live recovery path.
    pub fn synchronized_or_recoverable(&self) -> bool {
        self.fully_synchronized()
            || (self.node_emergency_remaining > 0 && self.emergencies_usable && self.crp_match)
    }
}

pub fn audit_synchronization(node: &NodeState, server: &ServerState) -> SyncAudit {
    let record = server
        .records
        .get(&node.real_id.to_hex())
        .expect("node is enrolled");
    let emergencies_usable = node.emergency.iter().all(|mine| {
        record
            .emergency
            .iter()
            .any(|theirs| theirs.alias == mine.alias && theirs.key.bits() == mine.key.bits())
    });
    SyncAudit {
        alias_match: node.alias == record.alias,
        key_match: node.k_r.bits() == record.k_r.bits(),
        crp_match: record.response == node.device.respond(&record.challenge),
        z_match: node.z == record.z,
        emergencies_usable,
        node_emergency_remaining: node.emergency.len(),
        server_emergency_remaining: record.emergency.len(),
        node_desynced: node.desynced,
    }
}
