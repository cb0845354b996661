//! The `protocol` subcommand: one randomized-OT run, in process or across a socket.

use std::fs::File;
use std::io::BufReader;
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::Serialize;

use cvot::config::ConfigFile;
use cvot::experiment::Link;
use cvot::gauss::{read_records, write_records, QuadratureRecord};
use cvot::hashing::Bits;
use cvot::protocol::transport::{Direction, Recording, StreamTransport, Transcript};
use cvot::protocol::{
    run_alice, run_bob, run_in_process, split_records, AliceOutput, BobOutput, BobStrategy,
    ProtocolError, RunConfig, SharedConfig,
};
use cvot::rate::{secure_length, RateError};
use cvot::recon::{leakage_rate, DecoderConfig, LdpcCode};
use cvot::rng::streams;
use cvot::{Encoding, SeededRng};

use crate::output::OutputDir;
use crate::{settings, CliError};

/// Which parties this process plays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Role {
    Both,
    /// Alice, accepting one connection on the address.
    Alice(String),
    /// Bob, connecting to the address.
    Bob(String),
}

impl Role {
    pub fn name(&self) -> &'static str {
        match self {
            Role::Both => "both",
            Role::Alice(_) => "alice",
            Role::Bob(_) => "bob",
        }
    }
}

struct Setup {
    link: Link,
    run: RunConfig,
    signals: usize,
    seed: u64,
}

/// Secure length for `2·per_set` signals with the code's actual leakage.
fn secure_ell(
    cfg: &ConfigFile,
    link_mu: f64,
    per_set: usize,
    code: &LdpcCode,
) -> Result<usize, CliError> {
    let nu: f64 = cfg.require("nu")?;
    let scheme = settings::scheme(cfg, "")?;
    let encoding: Encoding = settings::encoding(&cfg.require::<String>("encoding")?)?;
    let mut inputs = settings::rate_at(
        cfg,
        link_mu,
        nu,
        2.0 * per_set as f64,
        scheme,
        cfg.require("beta")?,
        encoding,
    )?;
    inputs.r_ec = leakage_rate(code);
    match secure_length(&inputs) {
        Ok(r) => Ok(r.ell as usize),
        Err(RateError::InfeasibleBudget { .. }) => Ok(0),
        Err(e) => Err(CliError::Config(e.to_string())),
    }
}

fn setup(cfg: &ConfigFile) -> Result<Setup, CliError> {
    let mu: f64 = cfg.require("mu")?;
    let per_set: usize = cfg.require("per_set")?;
    let code_rate: f64 = cfg.require("code_rate")?;
    let code_seed: u64 = cfg.require("code_seed")?;
    let choice: u8 = cfg.require("choice")?;
    if choice > 1 {
        return Err(CliError::Config(format!(
            "choice must be 0 or 1, got {choice}"
        )));
    }
    let link = settings::link(cfg, mu)?;
    let build = |seed| {
        LdpcCode::build(per_set, code_rate, seed).map_err(|e| CliError::Config(e.to_string()))
    };
    let code = Arc::new(build(code_seed)?);
    let bob_code = match cfg.get::<u64>("bob_code_seed")? {
        Some(s) if s != code_seed => Some(Arc::new(build(s)?)),
        _ => None,
    };
    let ell = match cfg.get::<usize>("ell")? {
        Some(l) => l,
        None => secure_ell(cfg, mu, per_set, &code)?,
    };
    let seed: u64 = cfg.require("seed")?;
    let ot_inputs = settings::flag(cfg, "ot")?.then(|| {
        let mut rng = SeededRng::new(seed, streams::OT_INPUTS);
        [0, 1].map(|_| Bits::from_bools((0..ell).map(|_| rng.bit())))
    });
    let shared = SharedConfig {
        scheme: settings::scheme(cfg, "")?,
        code,
        per_set,
        ell,
    };
    if ell > 0 {
        shared
            .check()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(Setup {
        link,
        run: RunConfig {
            shared,
            bob_code,
            noise: link.noise_model(),
            choice,
            strategy: BobStrategy::Honest,
            decoder: DecoderConfig {
                max_iterations: cfg.require("max_iterations")?,
                damping: cfg.require("damping")?,
            },
            ot_inputs,
        },
        signals: cfg.require("n")?,
        seed,
    })
}

fn hex(bits: &Bits) -> String {
    bits.to_bytes_le()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Serialize)]
struct PartyReport {
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    strings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    string: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    decode_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ot_output: Option<String>,
}

impl PartyReport {
    fn failed(e: &ProtocolError) -> Self {
        Self {
            status: "aborted",
            error: Some(e.to_string()),
            strings: Vec::new(),
            string: None,
            decode_iterations: None,
            ot_output: None,
        }
    }

    fn alice(r: &Result<AliceOutput, ProtocolError>) -> Self {
        match r {
            Ok(a) => Self {
                strings: a.strings.iter().map(hex).collect(),
                ..Self::done()
            },
            Err(e) => Self::failed(e),
        }
    }

    fn bob(r: &Result<BobOutput, ProtocolError>) -> Self {
        match r {
            Ok(b) => Self {
                string: b.string.as_ref().map(hex),
                decode_iterations: b.decode_iterations,
                ot_output: b.ot_output.as_ref().map(hex),
                ..Self::done()
            },
            Err(e) => Self::failed(e),
        }
    }

    fn done() -> Self {
        Self {
            status: "done",
            error: None,
            strings: Vec::new(),
            string: None,
            decode_iterations: None,
            ot_output: None,
        }
    }
}

#[derive(Serialize)]
struct Report {
    role: &'static str,
    status: &'static str,
    ell: usize,
    choice: u8,
    frames: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    correct: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alice: Option<PartyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bob: Option<PartyReport>,
}

fn load_records(cfg: &ConfigFile, s: &Setup) -> Result<Vec<QuadratureRecord>, CliError> {
    match cfg.get_str("inject_records") {
        Some(path) => {
            let file = File::open(path).map_err(|e| CliError::Config(format!("{path}: {e}")))?;
            read_records(BufReader::new(file)).map_err(|e| CliError::Config(format!("{path}: {e}")))
        }
        None => Ok(s.link.sample(s.signals, s.seed)),
    }
}

fn connect(addr: &str) -> Result<TcpStream, CliError> {
    // Alice may still be starting up.
    let mut last = None;
    for _ in 0..100 {
        match TcpStream::connect(addr) {
            Ok(s) => return Ok(s),
            Err(e) => last = Some(e),
        }
        std::thread::sleep(Duration::from_millis(100));
    }
    Err(CliError::Io(last.unwrap()))
}

/// Runs the protocol and writes `outcome.json` plus any requested dumps.
/// Returns the exit status implied by the outcome.
pub fn run(cfg: &ConfigFile, role: &Role, out: &mut OutputDir) -> Result<ProtocolStatus, CliError> {
    let s = setup(cfg)?;
    let ell = s.run.shared.ell;
    println!(
        "secure length l = {ell} bits (per_set = {}, code rate = {:.4})",
        s.run.shared.per_set,
        s.run.shared.code.rate()
    );
    if ell == 0 {
        eprintln!("error: {}", ProtocolError::InfeasibleRate);
        return Ok(ProtocolStatus::Infeasible);
    }
    let records = load_records(cfg, &s)?;
    if let Some(name) = cfg.get_str("dump_records") {
        let mut buf = Vec::new();
        write_records(&mut buf, &records)?;
        out.write(name, &buf)?;
    }
    let delay = Duration::from_secs_f64(cfg.require::<f64>("delay")?.max(0.0));
    let started = Instant::now();
    let (alice_data, bob_data) = split_records(&records);
    let (alice, bob, transcript): (Option<_>, Option<_>, Transcript) = match role {
        Role::Both => {
            let o = run_in_process(&s.run, &records, s.seed);
            (Some(o.alice), Some(o.bob), o.transcript)
        }
        Role::Alice(addr) => {
            let listener = TcpListener::bind(addr)?;
            println!("listening on {}", listener.local_addr()?);
            let (stream, peer) = listener.accept()?;
            println!("connected to {peer}");
            let (mut t, log) =
                Recording::new(StreamTransport::tcp(stream, delay)?, Direction::AliceToBob);
            let mut rng = SeededRng::new(s.seed, streams::ALICE);
            let r = run_alice(
                &s.run.shared,
                &alice_data,
                &mut t,
                &mut rng,
                s.run.ot_inputs.as_ref(),
            );
            drop(t);
            let transcript = log.lock().unwrap().clone();
            (Some(r), None, transcript)
        }
        Role::Bob(addr) => {
            let stream = connect(addr)?;
            let (mut t, log) =
                Recording::new(StreamTransport::tcp(stream, delay)?, Direction::BobToAlice);
            let r = run_bob(&s.run.bob(), &bob_data, &mut t, s.run.ot_inputs.is_some());
            drop(t);
            let transcript = log.lock().unwrap().clone();
            (None, Some(r), transcript)
        }
    };
    let elapsed = started.elapsed();

    let errors: Vec<&ProtocolError> = alice
        .iter()
        .filter_map(|r| r.as_ref().err())
        .chain(bob.iter().filter_map(|r| r.as_ref().err()))
        .collect();
    let status = if errors
        .iter()
        .any(|e| matches!(e, ProtocolError::InfeasibleRate))
    {
        ProtocolStatus::Infeasible
    } else if errors.is_empty() {
        ProtocolStatus::Done
    } else {
        ProtocolStatus::Aborted
    };
    let correct = match (&alice, &bob) {
        (Some(Ok(a)), Some(Ok(b))) => {
            Some(b.string.as_ref() == Some(&a.strings[b.choice as usize]))
        }
        _ => None,
    };
    let report = Report {
        role: role.name(),
        status: status.name(),
        ell,
        choice: s.run.choice,
        frames: transcript.entries.len(),
        correct,
        alice: alice.as_ref().map(PartyReport::alice),
        bob: bob.as_ref().map(PartyReport::bob),
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    out.write("outcome.json", json.as_bytes())?;
    if let Some(name) = cfg.get_str("transcript") {
        out.write(name, &transcript.to_bytes())?;
    }

    for e in &errors {
        eprintln!("error: {e}");
    }
    let verdict = match correct {
        Some(true) => ", strings agree",
        Some(false) => ", Bob's string is invalid",
        None => "",
    };
    println!(
        "status = {}{verdict}; {} frames in {:.3} s",
        status.name(),
        transcript.entries.len(),
        elapsed.as_secs_f64()
    );
    Ok(status)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolStatus {
    Done,
    Aborted,
    Infeasible,
}

impl ProtocolStatus {
    fn name(self) -> &'static str {
        match self {
            ProtocolStatus::Done => "done",
            ProtocolStatus::Aborted => "aborted",
            ProtocolStatus::Infeasible => "infeasible",
        }
    }
}
