//! Adversarial scenario harness: scripted attacks against live protocol
//! sessions, with expected-outcome checking and cross-suite audits.
//!
//! A scenario owns one enrolled device/server pair and plays a list of
//! episodes against it: protocol sessions whose messages pass through a
//! scripted channel (deliver, drop, replay, inject, modify), direct
//! injections of recorded or fabricated bytes, and physical events such as
//! tampering. Every episode states the outcome each party must reach, and
//! the runner additionally hunts for false accepts: any acceptance on a
//! path the adversary touched.

pub mod scenarios;

use thiserror::Error;

use crate::protocol::{
    enroll, run_injected_message, run_session_with, DriverError, Flow, NodeState, ProtocolConfig,
    RejectReason, ServerState, SessionOutcome, SessionReport, SessionScene, SessionStatus,
};
use crate::puf::PufDevice;
use crate::rng::derive_rng;
use rand::Rng;

pub use scenarios::builtin_scenarios;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("episode {episode}: message {index} emitted beyond the script")]
    ScriptExhausted { episode: usize, index: usize },
    #[error("episode {episode}: replay index {index} outside recorded wire log ({available} entries)")]
    BadReplayIndex {
        episode: usize,
        index: usize,
        available: usize,
    },
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error("scenario file: {0}")]
    Parse(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
}

/// What the channel does with one message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Deliver,
    /// Silence the channel; both waiting parties time out.
    Drop,
    /// Substitute the message recorded at this index of the scenario-wide
    /// wire log (counting every transmission of every earlier episode).
    Replay(usize),
    /// Substitute fabricated bytes.
    Inject(Vec<u8>),
    /// Deliver with the given bit positions flipped (positions wrap at the
    /// message length).
    Modify(Vec<usize>),
}

impl Action {
    fn tag(&self) -> String {
        match self {
            Action::Deliver => "deliver".into(),
            Action::Drop => "drop".into(),
            Action::Replay(i) => format!("replay:{i}"),
            Action::Inject(bytes) => format!("inject:{}", hex(bytes)),
            Action::Modify(bits) => format!(
                "modify:{}",
                bits.iter().map(|b| b.to_string()).collect::<Vec<_>>().join("+")
            ),
        }
    }

    fn is_substitution(&self) -> bool {
        matches!(self, Action::Replay(_) | Action::Inject(_) | Action::Modify(_))
    }
}

/// Who initiates a session episode.
#[derive(Debug, Clone)]
pub enum Actor {
    /// The enrolled node itself.
    Node,
    /// An attacker holding a byte-exact copy of the node's stored secrets
    /// but a different physical chip.
    Clone { chip_seed: u64 },
}

/// What one party must have concluded once an episode ends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expectation {
    /// The party never reached a verdict (e.g. a server nobody contacted).
    Absent,
    Status(SessionStatus),
    AnyOf(Vec<SessionStatus>),
}

impl Expectation {
    pub fn reject(reason: RejectReason) -> Self {
        Expectation::Status(SessionStatus::Rejected(reason))
    }

    fn matches(&self, outcome: &Option<SessionOutcome>) -> bool {
        match self {
            Expectation::Absent => outcome.is_none(),
            Expectation::Status(status) => outcome.as_ref().map(|o| &o.status) == Some(status),
            Expectation::AnyOf(set) => outcome
                .as_ref()
                .map(|o| set.contains(&o.status))
                .unwrap_or(false),
        }
    }

    fn render(&self) -> String {
        match self {
            Expectation::Absent => "none".into(),
            Expectation::Status(status) => status.render(),
            Expectation::AnyOf(set) => set
                .iter()
                .map(|s| s.render())
                .collect::<Vec<_>>()
                .join("|"),
        }
    }
}

/// One protocol session under a scripted channel.
#[derive(Debug, Clone)]
pub struct SessionEpisode {
    pub label: String,
    pub flow: Flow,
    pub actor: Actor,
    /// `None` runs at the expected distance with the configured crossover.
    pub scene: Option<SessionScene>,
    /// One action per message, in emission order. Emitting more messages
    /// than scripted is a scenario bug and aborts the run.
    pub script: Vec<Action>,
    pub expect_node: Expectation,
    pub expect_server: Expectation,
}

/// One step of a scenario.
#[derive(Debug, Clone)]
pub enum Episode {
    Session(SessionEpisode),
    /// Open a fresh server session with a single adversary-chosen message:
    /// either a recorded transmission or fabricated bytes.
    Inject {
        label: String,
        source: InjectSource,
        scene: Option<SessionScene>,
        expect_server: Expectation,
    },
    /// Physically disturb the node's PUF.
    Tamper { seed: u64 },
}

#[derive(Debug, Clone)]
pub enum InjectSource {
    Transcript(usize),
    Raw(Vec<u8>),
}

/// A named, self-contained attack story.
#[derive(Debug, Clone)]
pub struct AttackScenario {
    pub name: String,
    pub description: String,
    pub config: ProtocolConfig,
    pub seed: u64,
    pub episodes: Vec<Episode>,
}

/// The outcome of one episode, with its expectation check.
pub struct EpisodeResult {
    pub label: String,
    pub node_rendered: String,
    pub server_rendered: String,
    pub node_expected: String,
    pub server_expected: String,
    pub passed: bool,
    pub false_accepts: usize,
    pub report: Option<SessionReport>,
}

/// Everything a scenario run produced.
pub struct ScenarioReport {
    pub name: String,
    pub description: String,
    pub episodes: Vec<EpisodeResult>,
    pub passed: bool,
    pub false_accepts: usize,
}

impl std::fmt::Debug for ScenarioReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScenarioReport")
            .field("name", &self.name)
            .field("passed", &self.passed)
            .field("false_accepts", &self.false_accepts)
            .field("episodes", &self.episodes.len())
            .finish_non_exhaustive()
    }
}

impl ScenarioReport {
    /// Human-readable summary; line-for-line deterministic so re-runs can
    /// be compared byte-wise. Ends with a machine-readable RESULT line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("scenario {} - {}\n", self.name, self.description));
        for (i, ep) in self.episodes.iter().enumerate() {
            out.push_str(&format!(
                "  episode {i} [{}]: node={} (want {}) server={} (want {}) {}\n",
                ep.label,
                ep.node_rendered,
                ep.node_expected,
                ep.server_rendered,
                ep.server_expected,
                if ep.passed { "ok" } else { "MISMATCH" },
            ));
            if let Some(report) = &ep.report {
                for entry in &report.transcript {
                    out.push_str(&format!(
                        "    wire {} {} ({} bytes) [{}]\n",
                        entry.direction.as_str(),
                        entry.phase,
                        entry.bytes.len(),
                        entry.action,
                    ));
                }
            }
        }
        out.push_str(&format!(
            "RESULT scenario={} pass={} false_accepts={}\n",
            self.name, self.passed, self.false_accepts
        ));
        out
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn render_outcome(outcome: &Option<SessionOutcome>) -> String {
    match outcome {
        None => "none".into(),
        Some(o) => o.status.render(),
    }
}

fn accepted(outcome: &Option<SessionOutcome>) -> bool {
    outcome.as_ref().map(|o| o.status.is_accepting()).unwrap_or(false)
}

/// Runs one scenario from a fresh enrollment. Deterministic in
/// `scenario.seed`.
pub fn run_scenario(scenario: &AttackScenario) -> Result<ScenarioReport, HarnessError> {
    let config = &scenario.config;
    let mut seed_rng = derive_rng(scenario.seed, "attack-scenario", &[]);
    let device_seed: u64 = seed_rng.gen();
    let enroll_seed: u64 = seed_rng.gen();

    let mut server = ServerState::new(0x5E21);
    let device = PufDevice::new("scenario-device", device_seed, config.p_intra, config.fe.n());
    let mut node = enroll(&mut server, device, 0xA11CE, config, enroll_seed)
        .map_err(DriverError::from)?;

    let mut wire_log: Vec<Vec<u8>> = Vec::new();
    let mut tampered_device = false;
    let mut results: Vec<EpisodeResult> = Vec::new();

    for (episode_index, episode) in scenario.episodes.iter().enumerate() {
        let session_seed: u64 = seed_rng.gen();
        match episode {
            Episode::Tamper { seed } => {
                node.tamper(*seed);
                tampered_device = true;
                results.push(EpisodeResult {
                    label: "tamper".into(),
                    node_rendered: "-".into(),
                    server_rendered: "-".into(),
                    node_expected: "-".into(),
                    server_expected: "-".into(),
                    passed: true,
                    false_accepts: 0,
                    report: None,
                });
            }
            Episode::Inject {
                label,
                source,
                scene,
                expect_server,
            } => {
                let bytes = match source {
                    InjectSource::Raw(bytes) => bytes.clone(),
                    InjectSource::Transcript(index) => wire_log
                        .get(*index)
                        .cloned()
                        .ok_or(HarnessError::BadReplayIndex {
                            episode: episode_index,
                            index: *index,
                            available: wire_log.len(),
                        })?,
                };
                let scene = scene.unwrap_or_else(|| SessionScene::honest(config));
                let report = run_injected_message(&mut server, config, &scene, &bytes, session_seed)?;
                let passed = expect_server.matches(&report.server_outcome);
                // Anything the server accepts here was adversary-originated.
                let false_accepts = usize::from(accepted(&report.server_outcome));
                for entry in &report.transcript {
                    wire_log.push(entry.bytes.clone());
                }
                results.push(EpisodeResult {
                    label: label.clone(),
                    node_rendered: "-".into(),
                    server_rendered: render_outcome(&report.server_outcome),
                    node_expected: "-".into(),
                    server_expected: expect_server.render(),
                    passed,
                    false_accepts,
                    report: Some(report),
                });
            }
            Episode::Session(ep) => {
                let scene = ep.scene.unwrap_or_else(|| SessionScene::honest(config));
                let mut actor_state;
                let actor: &mut NodeState = match ep.actor {
                    Actor::Node => &mut node,
                    Actor::Clone { chip_seed } => {
                        let chip =
                            PufDevice::new("clone-chip", chip_seed, config.p_intra, config.fe.n());
                        actor_state = node.with_device(chip);
                        &mut actor_state
                    }
                };

                let starting_log_len = wire_log.len();
                let mut exhausted_at: Option<usize> = None;
                let mut bad_replay: Option<usize> = None;
                let script = &ep.script;
                let report = {
                    let wire_log_snapshot = &wire_log[..starting_log_len];
                    run_session_with(
                        actor,
                        &mut server,
                        config,
                        &scene,
                        ep.flow.clone(),
                        session_seed,
                        |index, bytes| {
                            let Some(action) = script.get(index) else {
                                exhausted_at = exhausted_at.or(Some(index));
                                return (None, "script-exhausted".into());
                            };
                            let delivered = match action {
                                Action::Deliver => Some(bytes.to_vec()),
                                Action::Drop => None,
                                Action::Inject(fake) => Some(fake.clone()),
                                Action::Replay(i) => match wire_log_snapshot.get(*i) {
                                    Some(old) => Some(old.clone()),
                                    None => {
                                        bad_replay = bad_replay.or(Some(*i));
                                        None
                                    }
                                },
                                Action::Modify(bits) => {
                                    let mut copy = bytes.to_vec();
                                    for b in bits {
                                        let pos = b % (copy.len() * 8);
                                        copy[pos / 8] ^= 1 << (pos % 8);
                                    }
                                    Some(copy)
                                }
                            };
                            (delivered, action.tag())
                        },
                    )?
                };
                if let Some(index) = exhausted_at {
                    return Err(HarnessError::ScriptExhausted {
                        episode: episode_index,
                        index,
                    });
                }
                if let Some(index) = bad_replay {
                    return Err(HarnessError::BadReplayIndex {
                        episode: episode_index,
                        index,
                        available: starting_log_len,
                    });
                }

                // Acceptance is a false accept when the adversary shaped the
                // accepted party's inbound evidence: substituted messages in
                // that direction, a cloned or tampered device, or a peer
                // standing somewhere other than the expected distance.
                let dishonest_distance = ep.scene
                    .map(|s| s.true_distance_m != config.expected_distance_m)
                    .unwrap_or(false);
                let toward_server = script
                    .iter()
                    .step_by(2)
                    .any(Action::is_substitution)
                    || matches!(ep.actor, Actor::Clone { .. })
                    || tampered_device
                    || dishonest_distance;
                let toward_node = script
                    .iter()
                    .skip(1)
                    .step_by(2)
                    .any(Action::is_substitution)
                    || dishonest_distance;
                let false_accepts = usize::from(accepted(&report.server_outcome) && toward_server)
                    + usize::from(accepted(&report.node_outcome) && toward_node);

                let passed = ep.expect_node.matches(&report.node_outcome)
                    && ep.expect_server.matches(&report.server_outcome);
                for entry in &report.transcript {
                    wire_log.push(entry.bytes.clone());
                }
                results.push(EpisodeResult {
                    label: ep.label.clone(),
                    node_rendered: render_outcome(&report.node_outcome),
                    server_rendered: render_outcome(&report.server_outcome),
                    node_expected: ep.expect_node.render(),
                    server_expected: ep.expect_server.render(),
                    passed,
                    false_accepts,
                    report: Some(report),
                });
            }
        }
    }

    let false_accepts = results.iter().map(|r| r.false_accepts).sum();
    let passed = results.iter().all(|r| r.passed) && false_accepts == 0;
    Ok(ScenarioReport {
        name: scenario.name.clone(),
        description: scenario.description.clone(),
        episodes: results,
        passed,
        false_accepts,
    })
}

/// Runs every scenario in order and returns the reports.
pub fn run_suite(scenarios: &[AttackScenario]) -> Result<Vec<ScenarioReport>, HarnessError> {
    scenarios.iter().map(run_scenario).collect()
}

fn parse_status(token: &str) -> Result<SessionStatus, HarnessError> {
    match token {
        "success" => Ok(SessionStatus::Success),
        "desync-recovered" => Ok(SessionStatus::DesyncRecovered),
        other => match other
            .strip_prefix("reject-")
            .and_then(RejectReason::from_str)
        {
            Some(reason) => Ok(SessionStatus::Rejected(reason)),
            None => Err(HarnessError::Parse(format!("unknown status `{token}`"))),
        },
    }
}

fn parse_expectation(token: &str) -> Result<Expectation, HarnessError> {
    if token == "none" {
        return Ok(Expectation::Absent);
    }
    let statuses = token
        .split('|')
        .map(parse_status)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(if statuses.len() == 1 {
        Expectation::Status(statuses.into_iter().next().expect("one element"))
    } else {
        Expectation::AnyOf(statuses)
    })
}

fn parse_actions(token: &str) -> Result<Vec<Action>, HarnessError> {
    token
        .split(',')
        .map(|item| {
            Ok(match item.split_once(':') {
                None => match item {
                    "deliver" => Action::Deliver,
                    "drop" => Action::Drop,
                    other => {
                        return Err(HarnessError::Parse(format!("unknown action `{other}`")))
                    }
                },
                Some(("replay", index)) => Action::Replay(
                    index
                        .parse()
                        .map_err(|_| HarnessError::Parse(format!("bad replay index `{index}`")))?,
                ),
                Some(("inject", hex_bytes)) => Action::Inject(parse_hex(hex_bytes)?),
                Some(("modify", bits)) => Action::Modify(
                    bits.split('+')
                        .map(|b| {
                            b.parse().map_err(|_| {
                                HarnessError::Parse(format!("bad bit position `{b}`"))
                            })
                        })
                        .collect::<Result<Vec<_>, _>>()?,
                ),
                Some((other, _)) => {
                    return Err(HarnessError::Parse(format!("unknown action `{other}`")))
                }
            })
        })
        .collect()
}

fn parse_hex(s: &str) -> Result<Vec<u8>, HarnessError> {
    if s.len() % 2 != 0 || s.is_empty() {
        return Err(HarnessError::Parse(format!("bad hex string `{s}`")));
    }
    (0..s.len())
        .step_by(2)
        .map(|i| {
            u8::from_str_radix(&s[i..i + 2], 16)
                .map_err(|_| HarnessError::Parse(format!("bad hex string `{s}`")))
        })
        .collect()
}

struct EpisodeTokens<'a> {
    tokens: Vec<&'a str>,
    cursor: usize,
}

impl<'a> EpisodeTokens<'a> {
    fn next(&mut self) -> Option<&'a str> {
        let token = self.tokens.get(self.cursor).copied();
        self.cursor += 1;
        token
    }

    fn peek(&self) -> Option<&'a str> {
        self.tokens.get(self.cursor).copied()
    }

    fn expect_next(&mut self, what: &str) -> Result<&'a str, HarnessError> {
        self.next()
            .ok_or_else(|| HarnessError::Parse(format!("episode line ends where {what} expected")))
    }
}

fn parse_scene(tokens: &mut EpisodeTokens, config: &ProtocolConfig) -> Result<Option<SessionScene>, HarnessError> {
    if tokens.peek() != Some("at") {
        return Ok(None);
    }
    tokens.next();
    let distance = tokens.expect_next("a distance")?;
    let true_distance_m: f64 = distance
        .parse()
        .map_err(|_| HarnessError::Parse(format!("bad distance `{distance}`")))?;
    Ok(Some(SessionScene {
        true_distance_m,
        crossover: config.crossover,
    }))
}

fn parse_expect(
    tokens: &mut EpisodeTokens,
    want_node: bool,
) -> Result<(Expectation, Expectation), HarnessError> {
    if tokens.next() != Some("expect") {
        return Err(HarnessError::Parse("missing `expect` clause".into()));
    }
    let mut node = Expectation::Absent;
    let mut server = Expectation::Absent;
    let mut saw_node = false;
    let mut saw_server = false;
    while let Some(token) = tokens.next() {
        if let Some(value) = token.strip_prefix("node=") {
            node = parse_expectation(value)?;
            saw_node = true;
        } else if let Some(value) = token.strip_prefix("server=") {
            server = parse_expectation(value)?;
            saw_server = true;
        } else {
            return Err(HarnessError::Parse(format!("unexpected token `{token}`")));
        }
    }
    if want_node && !saw_node {
        return Err(HarnessError::Parse("missing node= expectation".into()));
    }
    if !saw_server {
        return Err(HarnessError::Parse("missing server= expectation".into()));
    }
    Ok((node, server))
}

fn parse_episode(line: &str, index: usize, config: &ProtocolConfig) -> Result<Episode, HarnessError> {
    let mut tokens = EpisodeTokens {
        tokens: line.split_whitespace().collect(),
        cursor: 0,
    };
    let kind = tokens.expect_next("an episode kind")?;
    let episode = match kind {
        "auth" | "resume" | "clone-auth" => {
            let actor = if kind == "clone-auth" {
                let seed = tokens.expect_next("a chip seed")?;
                Actor::Clone {
                    chip_seed: seed
                        .parse()
                        .map_err(|_| HarnessError::Parse(format!("bad chip seed `{seed}`")))?,
                }
            } else {
                Actor::Node
            };
            let flow = if kind == "resume" {
                Flow::Resume {
                    early_data: format!("early-{index}").into_bytes(),
                }
            } else {
                Flow::Authenticate
            };
            let scene = parse_scene(&mut tokens, config)?;
            let actions_token = tokens.expect_next("an action list")?;
            let script = if actions_token == "silent" {
                Vec::new()
            } else {
                parse_actions(actions_token)?
            };
            let (expect_node, expect_server) = parse_expect(&mut tokens, true)?;
            Episode::Session(SessionEpisode {
                label: format!("{kind}-{index}"),
                flow,
                actor,
                scene,
                script,
                expect_node,
                expect_server,
            })
        }
        "tamper" => {
            let seed = tokens.expect_next("a seed")?;
            Episode::Tamper {
                seed: seed
                    .parse()
                    .map_err(|_| HarnessError::Parse(format!("bad tamper seed `{seed}`")))?,
            }
        }
        "inject-transcript" | "inject-raw" => {
            let argument = tokens.expect_next("an argument")?;
            let source = if kind == "inject-transcript" {
                InjectSource::Transcript(argument.parse().map_err(|_| {
                    HarnessError::Parse(format!("bad transcript index `{argument}`"))
                })?)
            } else {
                InjectSource::Raw(parse_hex(argument)?)
            };
            let scene = parse_scene(&mut tokens, config)?;
            let (_, expect_server) = parse_expect(&mut tokens, false)?;
            Episode::Inject {
                label: format!("{kind}-{index}"),
                source,
                scene,
                expect_server,
            }
        }
        other => return Err(HarnessError::Parse(format!("unknown episode kind `{other}`"))),
    };
    Ok(episode)
}

/// Parses the plain-text scenario format:
///
/// ```text
/// # comment
/// name: my-attack
/// description: what it shows
/// config: toy            # or `deployed`
/// seed: 7
/// episode: auth deliver,deliver,deliver,deliver expect node=success server=success
/// episode: auth at 25 silent expect node=reject-proximity server=none
/// episode: inject-transcript 0 expect server=reject-replay
/// ```
pub fn parse_scenario(text: &str) -> Result<AttackScenario, HarnessError> {
    let mut name = None;
    let mut description = String::new();
    let mut config = ProtocolConfig::default().without_shadowing();
    let mut seed = 0u64;
    let mut episode_lines: Vec<String> = Vec::new();

    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| HarnessError::Parse(format!("not a key: value line: `{line}`")))?;
        let value = value.trim();
        match key.trim() {
            "name" => name = Some(value.to_string()),
            "description" => description = value.to_string(),
            "config" => {
                config = match value {
                    "toy" => ProtocolConfig::toy(),
                    "deployed" => ProtocolConfig::default().without_shadowing(),
                    other => {
                        return Err(HarnessError::Parse(format!("unknown config `{other}`")))
                    }
                }
            }
            "seed" => {
                seed = value
                    .parse()
                    .map_err(|_| HarnessError::Parse(format!("bad seed `{value}`")))?
            }
            "episode" => episode_lines.push(value.to_string()),
            other => return Err(HarnessError::Parse(format!("unknown key `{other}`"))),
        }
    }

    let episodes = episode_lines
        .iter()
        .enumerate()
        .map(|(i, line)| parse_episode(line, i, &config))
        .collect::<Result<Vec<_>, _>>()?;
    if episodes.is_empty() {
        return Err(HarnessError::Parse("scenario has no episodes".into()));
    }
    Ok(AttackScenario {
        name: name.ok_or_else(|| HarnessError::Parse("missing `name:`".into()))?,
        description,
        config,
        seed,
        episodes,
    })
}
