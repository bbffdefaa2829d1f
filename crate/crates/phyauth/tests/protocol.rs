//! End-to-end protocol flows: enrollment, authentication, resumption,
//! de-synchronization recovery, and the failure paths an attacker or a
//! broken channel can force.

use phyauth::bits::BitVector;
use phyauth::crypto::{aead_encrypt, mac_sign};
use phyauth::protocol::messages::{pack_fields, ProtocolMessage, CONTEXT_SERVER_CHALLENGE};
use phyauth::protocol::{
    audit_synchronization, deal_materials, enroll, run_honest_session, run_injected_message,
    run_lifecycle, run_session_with, DriverError, EnrollError, Flow, NodeSession, NodeState,
    ProtocolConfig, RejectReason, ServerState, SessionScene, SessionStatus, EMERGENCY_ENTRIES,
};
use phyauth::puf::PufDevice;
use phyauth::rng::derive_rng;

fn toy_pair(device_seed: u64, enroll_seed: u64) -> (NodeState, ServerState, ProtocolConfig) {
    let config = ProtocolConfig::toy();
    let mut server = ServerState::new(0xB0B);
    let device = PufDevice::new("node-a", device_seed, config.p_intra, config.fe.n());
    let node = enroll(&mut server, device, 0xA11CE, &config, enroll_seed).expect("fresh id");
    (node, server, config)
}

fn status_of(outcome: &Option<phyauth::protocol::SessionOutcome>) -> SessionStatus {
    outcome.as_ref().expect("party reached an outcome").status.clone()
}

#[test]
fn honest_authentication_synchronizes_both_parties() {
    let (mut node, mut server, config) = toy_pair(1, 2);
    let enrollment_alias = node.current_alias().clone();
    let scene = SessionScene::honest(&config);

    let report = run_honest_session(&mut node, &mut server, &config, &scene, Flow::Authenticate, 3)
        .expect("materials are valid");

    let phases: Vec<&str> = report.transcript.iter().map(|t| t.phase).collect();
    assert_eq!(
        phases,
        ["auth-request", "server-challenge", "node-proof", "session-confirm"]
    );
    assert_eq!(status_of(&report.node_outcome), SessionStatus::Success);
    assert_eq!(status_of(&report.server_outcome), SessionStatus::Success);

    let node_key = report.node_outcome.unwrap().session_key.expect("key on success");
    let server_key = report.server_outcome.unwrap().session_key.expect("key on success");
    assert_eq!(node_key, server_key, "both sides distill the same session key");

    assert_ne!(node.current_alias(), &enrollment_alias, "alias rotates every session");
    assert!(node.resumption_ready());
    let audit = audit_synchronization(&node, &server);
    assert!(audit.fully_synchronized(), "{audit:?}");
    assert_eq!(audit.node_emergency_remaining, EMERGENCY_ENTRIES);
}

#[test]
fn full_scale_lifecycle_survives_channel_and_puf_noise() {
    let config = ProtocolConfig::default().without_shadowing();
    let mut server = ServerState::new(0xB0B);
    let device = PufDevice::new("node-full", 11, config.p_intra, config.fe.n());

    let (node, reports) =
        run_lifecycle(&mut server, device, 0xF00D, &config, 2, 17).expect("lifecycle runs");

    assert_eq!(reports.len(), 3);
    for (i, report) in reports.iter().enumerate() {
        assert!(
            status_of(&report.node_outcome).is_accepting(),
            "session {i} node outcome"
        );
        assert!(
            status_of(&report.server_outcome).is_accepting(),
            "session {i} server outcome"
        );
        assert_eq!(
            report.node_outcome.as_ref().unwrap().session_key,
            report.server_outcome.as_ref().unwrap().session_key,
        );
    }
    let audit = audit_synchronization(&node, &server);
    assert!(audit.fully_synchronized(), "{audit:?}");
}

#[test]
fn enrollment_rejects_duplicates_and_mismatched_devices() {
    let config = ProtocolConfig::toy();
    let mut server = ServerState::new(0xB0B);
    let device = PufDevice::new("node-a", 1, config.p_intra, config.fe.n());
    enroll(&mut server, device.clone(), 7, &config, 1).expect("first registration");
    assert_eq!(
        enroll(&mut server, device, 7, &config, 2).unwrap_err(),
        EnrollError::DuplicateRegistration
    );

    let wrong_length = PufDevice::new("node-b", 2, config.p_intra, config.fe.n() + 1);
    assert_eq!(
        enroll(&mut server, wrong_length, 8, &config, 3).unwrap_err(),
        EnrollError::ResponseLength {
            expected: config.fe.n(),
            got: config.fe.n() + 1
        }
    );
}

#[test]
fn resumption_rotates_secrets_and_delivers_early_data() {
    let (mut node, mut server, config) = toy_pair(3, 4);
    let scene = SessionScene::honest(&config);
    run_honest_session(&mut node, &mut server, &config, &scene, Flow::Authenticate, 5).unwrap();

    let mut previous_z = node.resumption_secret().unwrap().clone();
    for round in 0u64..3 {
        let payload = format!("telemetry-{round}").into_bytes();
        let alias_before = node.current_alias().clone();
        let report = run_honest_session(
            &mut node,
            &mut server,
            &config,
            &scene,
            Flow::Resume {
                early_data: payload.clone(),
            },
            100 + round,
        )
        .unwrap();

        let phases: Vec<&str> = report.transcript.iter().map(|t| t.phase).collect();
        assert_eq!(phases, ["resume-request", "resume-confirm"]);
        assert_eq!(status_of(&report.node_outcome), SessionStatus::Success);
        let server_outcome = report.server_outcome.unwrap();
        assert_eq!(server_outcome.status, SessionStatus::Success);
        assert_eq!(
            server_outcome.early_data.as_deref(),
            Some(payload.as_slice()),
            "0-RTT payload arrives with the first message"
        );

        let z = node.resumption_secret().unwrap().clone();
        assert_ne!(z, previous_z, "resumption secret rotates every session");
        previous_z = z;
        assert_ne!(node.current_alias(), &alias_before, "alias rotates every session");
        let audit = audit_synchronization(&node, &server);
        assert!(audit.fully_synchronized(), "round {round}: {audit:?}");
    }
}

#[test]
fn resume_before_any_authentication_is_unavailable() {
    let (mut node, mut server, config) = toy_pair(5, 6);
    let scene = SessionScene::honest(&config);
    let result = run_honest_session(
        &mut node,
        &mut server,
        &config,
        &scene,
        Flow::Resume { early_data: vec![1] },
        7,
    );
    assert!(matches!(result, Err(DriverError::ResumeUnavailable)));
}

#[test]
fn replayed_requests_are_rejected_by_the_seen_sets() {
    let (mut node, mut server, config) = toy_pair(7, 8);
    let scene = SessionScene::honest(&config);
    let auth = run_honest_session(&mut node, &mut server, &config, &scene, Flow::Authenticate, 9).unwrap();
    let resume = run_honest_session(
        &mut node,
        &mut server,
        &config,
        &scene,
        Flow::Resume { early_data: vec![2] },
        10,
    )
    .unwrap();

    for (label, bytes) in [
        ("auth-request", &auth.transcript[0].bytes),
        ("resume-request", &resume.transcript[0].bytes),
    ] {
        let report = run_injected_message(&mut server, &config, &scene, bytes, 11).unwrap();
        assert_eq!(
            status_of(&report.server_outcome),
            SessionStatus::Rejected(RejectReason::Replay),
            "replayed {label}"
        );
    }
}

#[test]
fn server_challenge_with_stale_nonce_is_flagged_as_replay() {
    // Hand the node a syntactically perfect challenge under the correct
    // link key, embedding either a stale nonce or the session's own.
    let run_case = |echo_fresh_nonce: bool| {
        let (mut node, server, config) = toy_pair(9, 10);
        let scene = SessionScene::honest(&config);
        let materials = deal_materials(&config, &scene, 12).unwrap();

        let record = server.record(node.real_id()).unwrap();
        let link_key = record.fuzzy_key().clone();
        let challenge = record.next_challenge().clone();
        let real_id = node.real_id().clone();
        let server_id = server.server_id().clone();

        let mut session =
            NodeSession::new_auth(&mut node, &config, materials.y_a, materials.node_rssi, 13);
        let step = session.start();
        let ProtocolMessage::AuthRequest { nonce: n1, .. } = step.outgoing.expect("request sent")
        else {
            panic!("authentication opens with a request");
        };

        let mut rng = derive_rng(14, "forged-challenge", &[]);
        let embedded = if echo_fresh_nonce {
            n1
        } else {
            BitVector::random(&mut rng, 128)
        };
        let n_b = BitVector::random(&mut rng, 128);
        let plain = pack_fields(&[&real_id, &server_id, &challenge, &embedded, &n_b]);
        let (enc_half, mac_half) = link_key.split();
        let ciphertext = aead_encrypt(&enc_half, &plain, CONTEXT_SERVER_CHALLENGE, &mut rng);
        let tag = mac_sign(&mac_half, &ciphertext.to_bytes());
        let bytes = ProtocolMessage::ServerChallenge { ciphertext, tag }.to_bytes();
        session.receive(&bytes)
    };

    let stale = run_case(false);
    assert!(stale.outgoing.is_none());
    assert_eq!(
        stale.outcome.unwrap().status,
        SessionStatus::Rejected(RejectReason::Replay)
    );

    let fresh = run_case(true);
    assert!(fresh.outcome.is_none(), "fresh nonce passes the staleness check");
    assert!(fresh.outgoing.is_some(), "node answers with its proof");
}

#[test]
fn corrupted_resumption_secret_cannot_resume() {
    let (mut node, mut server, config) = toy_pair(11, 12);
    let scene = SessionScene::honest(&config);
    run_honest_session(&mut node, &mut server, &config, &scene, Flow::Authenticate, 15).unwrap();

    node.corrupt_resumption_secret(16);
    let report = run_honest_session(
        &mut node,
        &mut server,
        &config,
        &scene,
        Flow::Resume { early_data: vec![3] },
        17,
    )
    .unwrap();

    let server_status = status_of(&report.server_outcome);
    assert!(
        matches!(
            server_status,
            SessionStatus::Rejected(RejectReason::ReconciliationFailure)
                | SessionStatus::Rejected(RejectReason::KeyMismatch)
        ),
        "a wrong mask cannot reconcile or confirm: {server_status:?}"
    );
    assert_eq!(status_of(&report.node_outcome), SessionStatus::Rejected(RejectReason::Timeout));

    // The node can still recover through a full authentication.
    let recovery = run_honest_session(&mut node, &mut server, &config, &scene, Flow::Authenticate, 18).unwrap();
    assert_eq!(status_of(&recovery.node_outcome), SessionStatus::DesyncRecovered);
    assert!(audit_synchronization(&node, &server).fully_synchronized());
}

#[test]
fn blocked_messages_desynchronize_and_emergency_aliases_recover() {
    // Block each of the four authentication messages in turn; the node must
    // always come back through an emergency alias.
    for blocked in 0..4usize {
        let (mut node, mut server, config) = toy_pair(20 + blocked as u64, 30 + blocked as u64);
        let scene = SessionScene::honest(&config);

        let report = run_session_with(
            &mut node,
            &mut server,
            &config,
            &scene,
            Flow::Authenticate,
            40 + blocked as u64,
            |index, bytes| {
                if index == blocked {
                    (None, "drop".to_string())
                } else {
                    (Some(bytes.to_vec()), "deliver".to_string())
                }
            },
        )
        .unwrap();

        assert_eq!(
            status_of(&report.node_outcome),
            SessionStatus::Rejected(RejectReason::Timeout),
            "blocked message {blocked}: node view"
        );
        match blocked {
            0 => assert!(report.server_outcome.is_none(), "server never contacted"),
            3 => assert_eq!(
                status_of(&report.server_outcome),
                SessionStatus::Success,
                "the server committed before its lost confirmation"
            ),
            _ => assert_eq!(
                status_of(&report.server_outcome),
                SessionStatus::Rejected(RejectReason::Timeout),
                "blocked message {blocked}: server view"
            ),
        }

        assert!(node.is_desynchronized());
        let audit = audit_synchronization(&node, &server);
        assert!(
            audit.synchronized_or_recoverable(),
            "blocked message {blocked}: {audit:?}"
        );

        let recovery =
            run_honest_session(&mut node, &mut server, &config, &scene, Flow::Authenticate, 50).unwrap();
        assert_eq!(
            status_of(&recovery.node_outcome),
            SessionStatus::DesyncRecovered,
            "blocked message {blocked}: recovery node view"
        );
        assert_eq!(
            status_of(&recovery.server_outcome),
            SessionStatus::DesyncRecovered,
            "blocked message {blocked}: recovery server view"
        );
        let audit = audit_synchronization(&node, &server);
        assert!(audit.fully_synchronized(), "blocked message {blocked}: {audit:?}");
        assert_eq!(audit.node_emergency_remaining, EMERGENCY_ENTRIES - 1);
        assert_eq!(audit.server_emergency_remaining, EMERGENCY_ENTRIES - 1);
    }
}

#[test]
fn emergency_entries_exhaust_after_repeated_blocking() {
    let (mut node, mut server, config) = toy_pair(60, 61);
    let scene = SessionScene::honest(&config);

    // One normal alias plus every emergency alias dies to a blocked
    // server challenge.
    for attempt in 0..=EMERGENCY_ENTRIES as u64 {
        let report = run_session_with(
            &mut node,
            &mut server,
            &config,
            &scene,
            Flow::Authenticate,
            70 + attempt,
            |index, bytes| {
                if index == 1 {
                    (None, "drop".to_string())
                } else {
                    (Some(bytes.to_vec()), "deliver".to_string())
                }
            },
        )
        .unwrap();
        assert_eq!(status_of(&report.node_outcome), SessionStatus::Rejected(RejectReason::Timeout));
        assert_eq!(report.transcript.len(), 2);
    }

    assert_eq!(node.emergency_remaining(), 0);
    let report = run_honest_session(&mut node, &mut server, &config, &scene, Flow::Authenticate, 80).unwrap();
    assert_eq!(
        status_of(&report.node_outcome),
        SessionStatus::Rejected(RejectReason::EmergencyExhausted),
        "nothing left but re-enrollment"
    );
    assert!(report.transcript.is_empty(), "exhaustion is silent");
    assert!(report.server_outcome.is_none());
}

#[test]
fn cloned_storage_fails_without_the_physical_device() {
    let (node, mut server, config) = toy_pair(62, 63);
    let scene = SessionScene::honest(&config);

    // The attacker copied every stored secret but holds a different chip.
    let foreign_chip = PufDevice::new("attacker-chip", 9999, config.p_intra, config.fe.n());
    let mut clone = node.with_device(foreign_chip);

    let report = run_honest_session(&mut clone, &mut server, &config, &scene, Flow::Authenticate, 64).unwrap();
    assert_eq!(
        status_of(&report.server_outcome),
        SessionStatus::Rejected(RejectReason::FeMismatch),
        "the fresh reading never matches the enrolled reference"
    );
    assert_eq!(status_of(&report.node_outcome), SessionStatus::Rejected(RejectReason::Timeout));
}

#[test]
fn tampered_device_fails_authentication() {
    let (mut node, mut server, config) = toy_pair(65, 66);
    let scene = SessionScene::honest(&config);
    run_honest_session(&mut node, &mut server, &config, &scene, Flow::Authenticate, 67).unwrap();

    node.tamper(68);
    let report = run_honest_session(&mut node, &mut server, &config, &scene, Flow::Authenticate, 69).unwrap();
    assert_eq!(
        status_of(&report.server_outcome),
        SessionStatus::Rejected(RejectReason::FeMismatch),
        "a disturbed fingerprint no longer answers its enrolled challenges"
    );
}
