//! Builtin attack scenarios.
//!
//! Each scenario tells one self-contained story against a freshly enrolled
//! device: a control run, a replay, a forgery, a distance violation, message
//! suppression, cloned storage, or physical tampering. Expected outcomes are
//! stated per episode; the runner additionally checks that no episode ends
//! in an acceptance the adversary shaped.

use rand::Rng;

use super::{Action, Actor, AttackScenario, Episode, Expectation, InjectSource, SessionEpisode};
use crate::bits::BitVector;
use crate::crypto::{AuthTag, CipherText};
use crate::protocol::messages::ProtocolMessage;
use crate::protocol::{Flow, ProtocolConfig, RejectReason, SessionScene, SessionStatus};
use crate::rng::derive_rng;

fn deliver(count: usize) -> Vec<Action> {
    vec![Action::Deliver; count]
}

fn status(s: SessionStatus) -> Expectation {
    Expectation::Status(s)
}

fn auth(label: &str, script: Vec<Action>, node: Expectation, server: Expectation) -> Episode {
    Episode::Session(SessionEpisode {
        label: label.into(),
        flow: Flow::Authenticate,
        actor: Actor::Node,
        scene: None,
        script,
        expect_node: node,
        expect_server: server,
    })
}

fn resume(label: &str, script: Vec<Action>, node: Expectation, server: Expectation) -> Episode {
    Episode::Session(SessionEpisode {
        label: label.into(),
        flow: Flow::Resume {
            early_data: b"queued sensor frame".to_vec(),
        },
        actor: Actor::Node,
        scene: None,
        script,
        expect_node: node,
        expect_server: server,
    })
}

fn honest_auth(label: &str) -> Episode {
    auth(
        label,
        deliver(4),
        status(SessionStatus::Success),
        status(SessionStatus::Success),
    )
}

fn recovered_auth(label: &str) -> Episode {
    auth(
        label,
        deliver(4),
        status(SessionStatus::DesyncRecovered),
        status(SessionStatus::DesyncRecovered),
    )
}

/// A structurally valid proof message filled with unrelated material, as
/// from an attacker who watched the wire format but holds no device.
fn forged_node_proof(config: &ProtocolConfig, seed: u64) -> Vec<u8> {
    let mut rng = derive_rng(seed, "forged-proof", &[]);
    let mut nonce = [0u8; 12];
    rng.fill(&mut nonce[..]);
    let body: Vec<u8> = (0..160).map(|_| rng.gen()).collect();
    ProtocolMessage::NodeProof {
        ciphertext: CipherText { nonce, body },
        tag: AuthTag(rng.gen()),
        helper: BitVector::random(&mut rng, config.fe.n()),
    }
    .to_bytes()
}

/// The full builtin suite. Every scenario runs the deployed configuration
/// with shadow fading disabled, so outcomes are decided by protocol events
/// rather than by the fading draw.
pub fn builtin_scenarios() -> Vec<AttackScenario> {
    let config = ProtocolConfig::default().without_shadowing();
    let mut suite = Vec::new();

    suite.push(AttackScenario {
        name: "honest-auth".into(),
        description: "control run: a faithful channel authenticates".into(),
        config: config.clone(),
        seed: 101,
        episodes: vec![honest_auth("auth")],
    });

    suite.push(AttackScenario {
        name: "honest-resume".into(),
        description: "control run: resumption rides the stored secret".into(),
        config: config.clone(),
        seed: 102,
        episodes: vec![
            honest_auth("auth"),
            resume(
                "resume",
                deliver(2),
                status(SessionStatus::Success),
                status(SessionStatus::Success),
            ),
        ],
    });

    suite.push(AttackScenario {
        name: "replay-request".into(),
        description: "an observed authentication request is re-sent later".into(),
        config: config.clone(),
        seed: 103,
        episodes: vec![
            honest_auth("auth"),
            Episode::Inject {
                label: "replayed-request".into(),
                source: InjectSource::Transcript(0),
                scene: None,
                expect_server: Expectation::reject(RejectReason::Replay),
            },
        ],
    });

    suite.push(AttackScenario {
        name: "replay-server-challenge".into(),
        description: "a stale challenge from a past session is substituted".into(),
        config: config.clone(),
        seed: 104,
        episodes: vec![
            honest_auth("auth"),
            auth(
                "stale-challenge",
                vec![Action::Deliver, Action::Replay(1)],
                Expectation::reject(RejectReason::Mac),
                Expectation::reject(RejectReason::Timeout),
            ),
        ],
    });

    suite.push(AttackScenario {
        name: "replay-node-proof".into(),
        description: "a captured proof is re-sent in a fresh session".into(),
        config: config.clone(),
        seed: 105,
        episodes: vec![
            honest_auth("auth"),
            auth(
                "stale-proof",
                vec![Action::Deliver, Action::Deliver, Action::Replay(2)],
                Expectation::reject(RejectReason::Timeout),
                Expectation::reject(RejectReason::FeMismatch),
            ),
            recovered_auth("recover"),
        ],
    });

    let forged = forged_node_proof(&config, 106);
    suite.push(AttackScenario {
        name: "forge-node-proof".into(),
        description: "an attacker without the device fabricates a proof".into(),
        config: config.clone(),
        seed: 106,
        episodes: vec![
            auth(
                "forged-proof",
                vec![Action::Deliver, Action::Deliver, Action::Inject(forged)],
                Expectation::reject(RejectReason::Timeout),
                Expectation::reject(RejectReason::FeMismatch),
            ),
            recovered_auth("recover"),
        ],
    });

    suite.push(AttackScenario {
        name: "impersonate-server-wrong-location".into(),
        description: "a fake access point answers from 25 m away; the node aborts before transmitting".into(),
        config: config.clone(),
        seed: 107,
        episodes: vec![Episode::Session(SessionEpisode {
            label: "far-server".into(),
            flow: Flow::Authenticate,
            actor: Actor::Node,
            scene: Some(SessionScene {
                true_distance_m: 25.0,
                crossover: config.crossover,
            }),
            script: Vec::new(),
            expect_node: Expectation::reject(RejectReason::Proximity),
            expect_server: Expectation::Absent,
        })],
    });

    suite.push(AttackScenario {
        name: "impersonate-node-wrong-location".into(),
        description: "a captured request is re-sent from outside the expected region".into(),
        config: config.clone(),
        seed: 108,
        episodes: vec![
            honest_auth("auth"),
            Episode::Inject {
                label: "far-replay".into(),
                source: InjectSource::Transcript(0),
                scene: Some(SessionScene {
                    true_distance_m: 25.0,
                    crossover: config.crossover,
                }),
                expect_server: Expectation::reject(RejectReason::Proximity),
            },
        ],
    });

    let mut episodes = Vec::new();
    let server_views = [
        Expectation::Absent,
        Expectation::reject(RejectReason::Timeout),
        Expectation::reject(RejectReason::Timeout),
        status(SessionStatus::Success),
    ];
    for (k, server_view) in server_views.into_iter().enumerate() {
        let mut script = deliver(k);
        script.push(Action::Drop);
        episodes.push(auth(
            &format!("block-message-{k}"),
            script,
            Expectation::reject(RejectReason::Timeout),
            server_view,
        ));
        episodes.push(recovered_auth(&format!("recover-{k}")));
    }
    episodes.push(honest_auth("steady-state"));
    suite.push(AttackScenario {
        name: "dos-block-each-index-recover".into(),
        description: "every message of the handshake is blocked in turn; emergency identities recover each time".into(),
        config: config.clone(),
        seed: 109,
        episodes,
    });

    let mut episodes: Vec<Episode> = (0..5)
        .map(|k| {
            auth(
                &format!("block-{k}"),
                vec![Action::Deliver, Action::Drop],
                Expectation::reject(RejectReason::Timeout),
                Expectation::reject(RejectReason::Timeout),
            )
        })
        .collect();
    episodes.push(auth(
        "exhausted",
        Vec::new(),
        Expectation::reject(RejectReason::EmergencyExhausted),
        Expectation::Absent,
    ));
    suite.push(AttackScenario {
        name: "dos-exhaustion".into(),
        description: "sustained blocking burns the emergency identities and silences the node".into(),
        config: config.clone(),
        seed: 110,
        episodes,
    });

    suite.push(AttackScenario {
        name: "clone-copied-storage".into(),
        description: "an attacker copies the node's stored secrets onto different silicon".into(),
        config: config.clone(),
        seed: 111,
        episodes: vec![
            honest_auth("auth"),
            Episode::Session(SessionEpisode {
                label: "clone-attempt".into(),
                flow: Flow::Authenticate,
                actor: Actor::Clone { chip_seed: 0xC10 },
                scene: None,
                script: deliver(3),
                expect_node: Expectation::reject(RejectReason::Timeout),
                expect_server: Expectation::reject(RejectReason::FeMismatch),
            }),
            auth(
                "burnt-alias",
                deliver(1),
                Expectation::reject(RejectReason::Timeout),
                Expectation::reject(RejectReason::Replay),
            ),
            recovered_auth("recover"),
        ],
    });

    suite.push(AttackScenario {
        name: "tamper-puf".into(),
        description: "physical tampering perturbs the PUF; even emergency identities stop working".into(),
        config: config.clone(),
        seed: 112,
        episodes: vec![
            honest_auth("auth"),
            Episode::Tamper { seed: 0x7A3 },
            auth(
                "tampered",
                deliver(3),
                Expectation::reject(RejectReason::Timeout),
                Expectation::reject(RejectReason::FeMismatch),
            ),
            auth(
                "tampered-emergency",
                deliver(3),
                Expectation::reject(RejectReason::Timeout),
                Expectation::reject(RejectReason::FeMismatch),
            ),
        ],
    });

    suite.push(AttackScenario {
        name: "resumption-replay".into(),
        description: "a recorded resumption request is re-sent".into(),
        config: config.clone(),
        seed: 113,
        episodes: vec![
            honest_auth("auth"),
            resume(
                "resume",
                deliver(2),
                status(SessionStatus::Success),
                status(SessionStatus::Success),
            ),
            Episode::Inject {
                label: "replayed-resume".into(),
                source: InjectSource::Transcript(4),
                scene: None,
                expect_server: Expectation::reject(RejectReason::Replay),
            },
        ],
    });

    suite.push(AttackScenario {
        name: "bitflip-server-challenge".into(),
        description: "the challenge ciphertext is corrupted in flight".into(),
        config,
        seed: 114,
        episodes: vec![auth(
            "flipped-bits",
            vec![Action::Deliver, Action::Modify(vec![83, 84])],
            Expectation::reject(RejectReason::Mac),
            Expectation::reject(RejectReason::Timeout),
        )],
    });

    suite
}

/// Looks up one builtin scenario by name.
pub fn builtin_scenario(name: &str) -> Option<AttackScenario> {
    builtin_scenarios().into_iter().find(|s| s.name == name)
}
