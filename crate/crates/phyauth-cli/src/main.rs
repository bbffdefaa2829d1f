//! `phyauth` - operator entry point for the authentication simulation.
//!
//! Subcommands run frame-error-rate sweeps, proximity classification
//! experiments, protocol sessions, and attack suites, emitting CSV files
//! and transcripts for plotting and regression. Every command is
//! deterministic given its seed: re-runs produce byte-identical output.
//!
//! Exit codes: 0 success, 1 expectation failure (rejected session, failed
//! scenario), 2 usage or configuration error.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use phyauth::coding::fixture::{by_name, BUILTIN_NAMES};
use phyauth::coding::{CodeFamily, DecoderParams};
use phyauth::harness::{
    builtin_scenarios, parse_scenario, run_scenario, scenarios::builtin_scenario, AttackScenario,
};
use phyauth::protocol::{
    enroll, run_honest_session, run_lifecycle, Flow, ProtocolConfig, ServerState, SessionOutcome,
    SessionReport, SessionScene,
};
use phyauth::proximity::{
    proximity_csv, run_proximity_trials, PathLossParams, Region, REFERENCE_DISTANCES,
};
use phyauth::puf::PufDevice;
use phyauth::skg::{parse_fer_config_curves, run_fer_sweep, sweep_rows, SWEEP_CSV_HEADER};

#[derive(Parser)]
#[command(
    name = "phyauth",
    version,
    about = "Multi-factor physical-layer authentication experiments"
)]
struct Cli {
    /// Suppress stdout; files named by --out are still written.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Frame-error-rate sweep driven by a key-value config file.
    Fer {
        /// Config naming code, decoder label(s), p-grid, trials, and seed.
        #[arg(long)]
        config: PathBuf,
        /// Write the CSV here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distance-classification experiment over a path-loss scenario.
    Proximity {
        /// Path-loss fixture: auditorium or library.
        #[arg(long, default_value = "auditorium")]
        scenario: String,
        /// Classification trials per reference distance.
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run protocol sessions and dump the transcript.
    Session {
        #[arg(long, value_enum, default_value_t = Mode::Full)]
        mode: Mode,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Resumption rounds after the initial authentication (full mode).
        #[arg(long, default_value_t = 3)]
        resumptions: usize,
        /// Override the measurement-channel crossover probability.
        #[arg(long)]
        crossover: Option<f64>,
        /// Reconciliation code fixture (see `phyauth fixture`).
        #[arg(long)]
        code: Option<String>,
        /// Decoder label, e.g. L32, bp, osd2, t1.
        #[arg(long)]
        decoder: Option<String>,
        /// Enable log-normal shadow fading on the proximity channel.
        #[arg(long)]
        shadowing: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run attack scenarios and report expected-versus-actual outcomes.
    Attack {
        /// Run every builtin scenario.
        #[arg(long)]
        suite: bool,
        /// Run one builtin scenario by name.
        #[arg(long)]
        scenario: Option<String>,
        /// Run a scenario parsed from a file.
        #[arg(long)]
        scenario_file: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List builtin code fixtures or describe one.
    Fixture {
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Enroll,
    Auth,
    Resume,
    Full,
}

impl Mode {
    fn as_str(self) -> &'static str {
        match self {
            Mode::Enroll => "enroll",
            Mode::Auth => "auth",
            Mode::Resume => "resume",
            Mode::Full => "full",
        }
    }
}

/// A command failure and which exit class it belongs to.
struct Failure {
    exit: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            exit: 2,
            message: message.into(),
        }
    }

    fn expectation(message: impl Into<String>) -> Self {
        Failure {
            exit: 1,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.exit)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Fer { config, out } => cmd_fer(&config, out.as_deref(), quiet),
        Command::Proximity {
            scenario,
            trials,
            seed,
            out,
        } => cmd_proximity(&scenario, trials, seed, out.as_deref(), quiet),
        Command::Session {
            mode,
            seed,
            resumptions,
            crossover,
            code,
            decoder,
            shadowing,
            out,
        } => cmd_session(
            mode,
            seed,
            resumptions,
            crossover,
            code.as_deref(),
            decoder.as_deref(),
            shadowing,
            out.as_deref(),
            quiet,
        ),
        Command::Attack {
            suite,
            scenario,
            scenario_file,
            out,
        } => cmd_attack(
            suite,
            scenario.as_deref(),
            scenario_file.as_deref(),
            out.as_deref(),
            quiet,
        ),
        Command::Fixture { name, out } => cmd_fixture(name.as_deref(), out.as_deref(), quiet),
    }
}

/// Prints to stdout (unless quiet) and writes `--out` when given.
fn emit(text: &str, out: Option<&std::path::Path>, quiet: bool) -> Result<(), Failure> {
    if let Some(path) = out {
        fs::write(path, text)
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
    }
    if !quiet {
        print!("{text}");
    }
    Ok(())
}

fn cmd_fer(config: &std::path::Path, out: Option<&std::path::Path>, quiet: bool) -> Result<(), Failure> {
    let text = fs::read_to_string(config)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", config.display())))?;
    let curves = parse_fer_config_curves(&text).map_err(|e| Failure::usage(e.to_string()))?;
    let mut output = String::from("# fer-csv v1\n");
    output.push_str(SWEEP_CSV_HEADER);
    output.push('\n');
    for experiment in &curves {
        let points = run_fer_sweep(experiment).map_err(|e| Failure::usage(e.to_string()))?;
        output.push_str(&sweep_rows(experiment, &points));
    }
    emit(&output, out, quiet)
}

fn cmd_proximity(
    scenario: &str,
    trials: usize,
    seed: u64,
    out: Option<&std::path::Path>,
    quiet: bool,
) -> Result<(), Failure> {
    let params = PathLossParams::by_name(scenario).ok_or_else(|| {
        Failure::usage(format!(
            "unknown scenario `{scenario}` (available: auditorium, library)"
        ))
    })?;
    // The trial rows carry a 'static scenario tag; map through the builtins.
    let tag: &'static str = match scenario {
        "auditorium" => "auditorium",
        _ => "library",
    };
    if trials == 0 {
        return Err(Failure::usage("trials must be positive"));
    }
    let rows = run_proximity_trials(tag, &params, trials, seed)
        .map_err(|e| Failure::usage(e.to_string()))?;

    let mut output = String::from("# proximity-csv v1\n");
    writeln!(
        output,
        "# scenario={tag} p0={} d0={} n_exp={} sigma_x={} seed={seed}",
        params.p0, params.d0, params.n_exp, params.sigma_x
    )
    .unwrap();
    output.push_str(&proximity_csv(&rows));
    writeln!(output, "# confusion trials-per-distance={trials}").unwrap();
    for &distance in &REFERENCE_DISTANCES {
        let mut counts = [0usize; 3];
        let mut accepted = 0usize;
        for row in rows.iter().filter(|r| r.true_distance == distance) {
            counts[row.region.index()] += 1;
            accepted += usize::from(row.accepted);
        }
        let diagonal = counts[Region::expected_at(distance).index()] as f64 / trials as f64;
        writeln!(
            output,
            "# true={distance}m immediate={} near={} far={} diagonal={diagonal:.4} accepted={accepted}",
            counts[0], counts[1], counts[2]
        )
        .unwrap();
    }
    emit(&output, out, quiet)
}

fn default_decoder(family: CodeFamily) -> DecoderParams {
    match family {
        CodeFamily::Polar => DecoderParams::PolarList { list_size: 128 },
        CodeFamily::Ldpc => DecoderParams::LdpcBp {
            max_iter: 50,
            osd_order: Some(1),
        },
        CodeFamily::Bch => DecoderParams::BchList { flip_order: 1 },
    }
}

fn session_config(
    crossover: Option<f64>,
    code: Option<&str>,
    decoder: Option<&str>,
    shadowing: bool,
) -> Result<ProtocolConfig, Failure> {
    let mut config = ProtocolConfig::default();
    if !shadowing {
        config = config.without_shadowing();
    }
    if let Some(p) = crossover {
        if !(0.0..=0.5).contains(&p) {
            return Err(Failure::usage(format!("crossover {p} not in [0, 0.5]")));
        }
        config.crossover = p;
    }
    if let Some(name) = code {
        let code = by_name(name).ok_or_else(|| {
            Failure::usage(format!(
                "unknown code fixture `{name}` (available: {})",
                BUILTIN_NAMES.join(", ")
            ))
        })?;
        config.decoder = default_decoder(code.family());
        config.code = code;
    }
    if let Some(label) = decoder {
        let params = DecoderParams::from_label(label, 50)
            .ok_or_else(|| Failure::usage(format!("unknown decoder label `{label}`")))?;
        if params.family() != config.code.family() {
            return Err(Failure::usage(format!(
                "decoder {} does not drive a {} code",
                params.label(),
                config.code.family().as_str()
            )));
        }
        config.decoder = params;
    }
    Ok(config)
}

fn render_outcome(outcome: &Option<SessionOutcome>) -> String {
    match outcome {
        None => "none".into(),
        Some(o) => o.status.render(),
    }
}

fn render_session(index: usize, flow: &str, report: &SessionReport, out: &mut String) {
    writeln!(out, "session {index} {flow}").unwrap();
    for (i, entry) in report.transcript.iter().enumerate() {
        writeln!(
            out,
            "  {i} {} {} {}B {}",
            entry.direction.as_str(),
            entry.phase,
            entry.bytes.len(),
            entry.action
        )
        .unwrap();
    }
    let key16 = report
        .node_outcome
        .as_ref()
        .and_then(|o| o.session_key.as_ref())
        .map(|k| k.bits().to_hex()[..16].to_string())
        .unwrap_or_else(|| "-".into());
    writeln!(
        out,
        "  outcome node={} server={} key16={key16}",
        render_outcome(&report.node_outcome),
        render_outcome(&report.server_outcome)
    )
    .unwrap();
}

fn accepting(report: &SessionReport) -> bool {
    report
        .node_outcome
        .as_ref()
        .zip(report.server_outcome.as_ref())
        .is_some_and(|(n, s)| n.status.is_accepting() && s.status.is_accepting())
}

#[allow(clippy::too_many_arguments)]
fn cmd_session(
    mode: Mode,
    seed: u64,
    resumptions: usize,
    crossover: Option<f64>,
    code: Option<&str>,
    decoder: Option<&str>,
    shadowing: bool,
    out: Option<&std::path::Path>,
    quiet: bool,
) -> Result<(), Failure> {
    if mode == Mode::Resume {
        return Err(Failure::usage(
            "resume needs a synchronized secret from an earlier authentication in the same run; use --mode full",
        ));
    }
    let config = session_config(crossover, code, decoder, shadowing)?;
    let mut output = format!("# transcript v1 mode={} seed={seed}\n", mode.as_str());

    let mut server = ServerState::new(0xACCE55);
    let device = PufDevice::new("cli-device", seed, config.p_intra, config.fe.n());
    let mut ok = true;

    match mode {
        Mode::Enroll | Mode::Auth => {
            let node = enroll(&mut server, device, 0xB0A, &config, seed.wrapping_add(1))
                .map_err(|e| Failure::usage(e.to_string()))?;
            writeln!(
                output,
                "enrollment alias={} emergencies={}",
                node.current_alias().to_hex(),
                node.emergency_remaining()
            )
            .unwrap();
            if mode == Mode::Auth {
                let mut node = node;
                let scene = SessionScene::honest(&config);
                let report = run_honest_session(
                    &mut node,
                    &mut server,
                    &config,
                    &scene,
                    Flow::Authenticate,
                    seed.wrapping_add(2),
                )
                .map_err(|e| Failure::usage(e.to_string()))?;
                render_session(0, "auth", &report, &mut output);
                ok = accepting(&report);
            }
        }
        Mode::Full => {
            let (_, reports) = run_lifecycle(
                &mut server,
                device,
                0xB0A,
                &config,
                resumptions,
                seed.wrapping_add(1),
            )
            .map_err(|e| Failure::usage(e.to_string()))?;
            for (index, report) in reports.iter().enumerate() {
                let flow = if index == 0 { "auth" } else { "resume" };
                render_session(index, flow, report, &mut output);
                ok &= accepting(report);
            }
        }
        Mode::Resume => unreachable!("handled above"),
    }

    emit(&output, out, quiet)?;
    if ok {
        Ok(())
    } else {
        Err(Failure::expectation("a session was rejected; see transcript"))
    }
}

fn cmd_attack(
    suite: bool,
    scenario: Option<&str>,
    scenario_file: Option<&std::path::Path>,
    out: Option<&std::path::Path>,
    quiet: bool,
) -> Result<(), Failure> {
    let selectors = usize::from(suite) + usize::from(scenario.is_some()) + usize::from(scenario_file.is_some());
    if selectors != 1 {
        return Err(Failure::usage(
            "pass exactly one of --suite, --scenario NAME, --scenario-file PATH",
        ));
    }
    let scenarios: Vec<AttackScenario> = if suite {
        builtin_scenarios()
    } else if let Some(name) = scenario {
        let found = builtin_scenario(name).ok_or_else(|| {
            let names: Vec<String> = builtin_scenarios().iter().map(|s| s.name.clone()).collect();
            Failure::usage(format!(
                "unknown scenario `{name}` (available: {})",
                names.join(", ")
            ))
        })?;
        vec![found]
    } else {
        let path = scenario_file.expect("selector checked");
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
        vec![parse_scenario(&text).map_err(|e| Failure::usage(e.to_string()))?]
    };

    let mut output = String::from("# attack-report v1\n");
    let mut failed = 0usize;
    for scenario in &scenarios {
        let report = run_scenario(scenario).map_err(|e| Failure::usage(e.to_string()))?;
        failed += usize::from(!report.passed);
        output.push_str(&report.render());
    }
    writeln!(output, "SUITE scenarios={} failed={failed}", scenarios.len()).unwrap();
    emit(&output, out, quiet)?;
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::expectation(format!("{failed} scenario(s) failed")))
    }
}

fn describe(name: &str) -> Option<String> {
    let code = by_name(name)?;
    Some(format!(
        "{name} family={} n={} syndrome_bits={} effective_rate={:.4}\n",
        code.family().as_str(),
        code.n(),
        code.syndrome_len(),
        code.effective_rate()
    ))
}

fn cmd_fixture(
    name: Option<&str>,
    out: Option<&std::path::Path>,
    quiet: bool,
) -> Result<(), Failure> {
    let mut output = String::from("# fixtures v1\n");
    match name {
        Some(name) => {
            let line = describe(name).ok_or_else(|| {
                Failure::usage(format!(
                    "unknown code fixture `{name}` (available: {})",
                    BUILTIN_NAMES.join(", ")
                ))
            })?;
            output.push_str(&line);
        }
        None => {
            for builtin in BUILTIN_NAMES {
                output.push_str(&describe(builtin).expect("builtin fixtures resolve"));
            }
        }
    }
    emit(&output, out, quiet)
}
