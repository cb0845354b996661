//! The 1-2 randomized OT protocol between Alice (sender) and Bob (receiver).
//!
//! Message order: BASES (A→B), INDEX_SETS (B→A), SYNDROMES (A→B),
//! HASH_DESC (A→B) and, for OT on chosen inputs, MASKED_STRINGS (A→B). No
//! message ever tells Alice whether Bob's reconciliation succeeded.

pub mod privacy;
pub mod transport;
pub mod wire;

use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use crate::gauss::{discretize, QuadratureRecord};
use crate::hashing::{apply_hash, sample_hash, symbols_to_bits, Bits, HashError};
use crate::params::DiscretizationScheme;
use crate::recon::{
    decode_frame, encode_frame, DecoderConfig, LdpcCode, NoiseModel, ReconError, SideInfo,
};
use crate::rng::{streams, SeededRng};

use transport::{channel_pair, Direction, Recording, StreamTransport, Transcript, Transport};
use wire::{AbortCode, Message, SyndromeBlock, Tag, WireError};

pub use privacy::{receiver_privacy_check, AliceView, PrivacyReport};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("secure length is zero: refusing to run")]
    InfeasibleRate,
    #[error("index sets too small: |I0| = {set0}, |I1| = {set1}, need {needed} each")]
    AbortShortSets {
        set0: usize,
        set1: usize,
        needed: usize,
    },
    #[error("code mismatch: ours {ours:016x}, peer's {theirs:016x}")]
    CodeMismatch { ours: u64, theirs: u64 },
    #[error("peer aborted ({code:?}): {reason}")]
    PeerAborted { code: AbortCode, reason: String },
    #[error("expected {expected:?}, received {got:?}")]
    UnexpectedMessage { expected: Tag, got: Tag },
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Recon(#[from] ReconError),
    #[error(transparent)]
    Hash(#[from] HashError),
}

impl ProtocolError {
    /// The abort code to send the peer when this error ends a run locally.
    fn abort_code(&self) -> Option<AbortCode> {
        match self {
            ProtocolError::AbortShortSets { .. } => Some(AbortCode::ShortSets),
            ProtocolError::CodeMismatch { .. } => Some(AbortCode::CodeMismatch),
            ProtocolError::Malformed(_) | ProtocolError::LengthMismatch(_) => {
                Some(AbortCode::Malformed)
            }
            ProtocolError::UnexpectedMessage { .. } => Some(AbortCode::Unexpected),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Setup,
    Measure,
    Wait,
    BasisReveal,
    Sift,
    Reconcile,
    Amplify,
    Done,
    Aborted,
}

/// Enforces the phase order of one party.
#[derive(Debug, Clone)]
pub struct PartyState {
    phase: Phase,
}

impl PartyState {
    pub fn new() -> Self {
        Self {
            phase: Phase::Setup,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Moves to `next`, which must come later in the order; anything else aborts.
    pub fn advance(&mut self, next: Phase) -> Result<(), ProtocolError> {
        if self.phase == Phase::Aborted || next <= self.phase {
            self.phase = Phase::Aborted;
            return Err(ProtocolError::Config(format!(
                "illegal phase transition to {next:?}"
            )));
        }
        self.phase = next;
        Ok(())
    }

    pub fn abort(&mut self) {
        self.phase = Phase::Aborted;
    }
}

impl Default for PartyState {
    fn default() -> Self {
        Self::new()
    }
}

/// Sifting: `I_t` holds the rounds with equal bases, `I_{1−t}` the rest,
/// both ascending and 0-based. Returns `(I₀, I₁)`.
pub fn sift(
    bases_a: &[u8],
    bases_b: &[u8],
    t: u8,
) -> Result<(Vec<usize>, Vec<usize>), ProtocolError> {
    if bases_a.len() != bases_b.len() {
        return Err(ProtocolError::LengthMismatch(format!(
            "{} bases against {}",
            bases_a.len(),
            bases_b.len()
        )));
    }
    let (matched, other): (Vec<usize>, Vec<usize>) =
        (0..bases_a.len()).partition(|&i| bases_a[i] == bases_b[i]);
    Ok(if t == 0 {
        (matched, other)
    } else {
        (other, matched)
    })
}

/// Protocol parameters both parties agree on beforehand.
#[derive(Debug, Clone)]
pub struct SharedConfig {
    pub scheme: DiscretizationScheme,
    pub code: Arc<LdpcCode>,
    /// Symbols taken from the front of each index set.
    pub per_set: usize,
    /// Output length in bits.
    pub ell: usize,
}

impl SharedConfig {
    pub fn check(&self) -> Result<(), ProtocolError> {
        if self.ell == 0 {
            return Err(ProtocolError::InfeasibleRate);
        }
        if self.per_set == 0 || self.per_set > self.code.n() {
            return Err(ProtocolError::Config(format!(
                "per-set size {} must lie in 1..={} (code length)",
                self.per_set,
                self.code.n()
            )));
        }
        if self.ell > 10 * self.per_set {
            return Err(ProtocolError::Config(format!(
                "output length {} exceeds the {} input bits",
                self.ell,
                10 * self.per_set
            )));
        }
        Ok(())
    }
}

/// One party's measurement results: bases (0 = X, 1 = P) and values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Measurements {
    pub bases: Vec<u8>,
    pub values: Vec<f64>,
}

pub fn split_records(records: &[QuadratureRecord]) -> (Measurements, Measurements) {
    let alice = Measurements {
        bases: records.iter().map(|r| r.basis_a).collect(),
        values: records.iter().map(|r| r.value_a).collect(),
    };
    let bob = Measurements {
        bases: records.iter().map(|r| r.basis_b).collect(),
        values: records.iter().map(|r| r.value_b_rescaled).collect(),
    };
    (alice, bob)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BobStrategy {
    #[default]
    Honest,
    /// Announces `I_t = {i : θ_A[i] = X}`, which reveals `t` to Alice.
    /// Used only as a negative control for the privacy test.
    LeakyChoice,
}

#[derive(Debug, Clone)]
pub struct BobConfig {
    pub shared: SharedConfig,
    pub noise: NoiseModel,
    pub choice: u8,
    pub strategy: BobStrategy,
    pub decoder: DecoderConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AliceOutput {
    pub strings: [Bits; 2],
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BobOutput {
    pub choice: u8,
    /// `None` when reconciliation failed; Bob's output is then invalid.
    pub string: Option<Bits>,
    pub decode_iterations: Option<usize>,
    /// `x_t` when Alice also sent masked inputs.
    pub ot_output: Option<Bits>,
    pub phase: Phase,
}

fn recv_message<T: Transport>(t: &mut T, expected: Tag) -> Result<Message, ProtocolError> {
    let frame = t.recv()?;
    let msg = Message::from_frame(&frame).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    match msg {
        Message::Abort { code, reason } => Err(ProtocolError::PeerAborted { code, reason }),
        m if m.tag() == expected => Ok(m),
        m => Err(ProtocolError::UnexpectedMessage {
            expected,
            got: m.tag(),
        }),
    }
}

fn send_abort<T: Transport>(t: &mut T, err: &ProtocolError) {
    if let Some(code) = err.abort_code() {
        // Best effort: the peer may already be gone.
        let _ = t.send(
            &Message::Abort {
                code,
                reason: err.to_string(),
            }
            .to_frame(),
        );
    }
}

fn bits_of(bases: &[u8]) -> Bits {
    Bits::from_bools(bases.iter().map(|&b| b == 1))
}

/// `x_k ⊕ s_k` for both k.
pub fn mask_inputs(inputs: &[Bits; 2], strings: &[Bits; 2]) -> [Bits; 2] {
    [inputs[0].xor(&strings[0]), inputs[1].xor(&strings[1])]
}

/// Bob's OT output `(x_t ⊕ s_t) ⊕ s̃`.
pub fn unmask(masked: &[Bits; 2], choice: u8, string: &Bits) -> Bits {
    masked[choice as usize].xor(string)
}

/// Alice's side of one run. `ot_inputs` turns the randomized OT into OT on
/// the given strings.
pub fn run_alice<T: Transport>(
    cfg: &SharedConfig,
    data: &Measurements,
    transport: &mut T,
    rng: &mut SeededRng,
    ot_inputs: Option<&[Bits; 2]>,
) -> Result<AliceOutput, ProtocolError> {
    let mut state = PartyState::new();
    let result = alice_steps(cfg, data, transport, rng, ot_inputs, &mut state);
    if let Err(e) = &result {
        state.abort();
        send_abort(transport, e);
    }
    result
}

fn alice_steps<T: Transport>(
    cfg: &SharedConfig,
    data: &Measurements,
    transport: &mut T,
    rng: &mut SeededRng,
    ot_inputs: Option<&[Bits; 2]>,
    state: &mut PartyState,
) -> Result<AliceOutput, ProtocolError> {
    cfg.check()?;
    state.advance(Phase::Measure)?;
    let n = data.bases.len();
    state.advance(Phase::Wait)?;
    transport.wait()?;
    state.advance(Phase::BasisReveal)?;
    transport.send(&Message::Bases(bits_of(&data.bases)).to_frame())?;

    state.advance(Phase::Sift)?;
    let Message::IndexSets { code_id, mask } = recv_message(transport, Tag::IndexSets)? else {
        unreachable!()
    };
    if code_id != cfg.code.id() {
        return Err(ProtocolError::CodeMismatch {
            ours: cfg.code.id(),
            theirs: code_id,
        });
    }
    if mask.len() != n {
        return Err(ProtocolError::Malformed(format!(
            "index mask covers {} rounds, expected {n}",
            mask.len()
        )));
    }
    let (set0, set1): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| mask.get(i));
    if set0.len() < cfg.per_set || set1.len() < cfg.per_set {
        return Err(ProtocolError::AbortShortSets {
            set0: set0.len(),
            set1: set1.len(),
            needed: cfg.per_set,
        });
    }
    let substrings: Vec<Vec<u32>> = [set0, set1]
        .iter()
        .map(|set| {
            set[..cfg.per_set]
                .iter()
                .map(|&i| discretize(data.values[i], &cfg.scheme))
                .collect()
        })
        .collect();

    state.advance(Phase::Reconcile)?;
    let mut blocks = Vec::with_capacity(2);
    for z in &substrings {
        let (low, syndrome) = encode_frame(&cfg.code, z)?;
        blocks.push(SyndromeBlock { low, syndrome });
    }
    let blocks: [SyndromeBlock; 2] = blocks.try_into().unwrap();
    transport.send(&Message::Syndromes(blocks).to_frame())?;

    state.advance(Phase::Amplify)?;
    let m = 10 * cfg.per_set;
    let hashes = [sample_hash(rng, m, cfg.ell)?, sample_hash(rng, m, cfg.ell)?];
    let strings = [
        apply_hash(&hashes[0], &symbols_to_bits(&substrings[0]))?,
        apply_hash(&hashes[1], &symbols_to_bits(&substrings[1]))?,
    ];
    transport.send(&Message::HashDesc(hashes).to_frame())?;
    if let Some(inputs) = ot_inputs {
        if inputs.iter().any(|x| x.len() != cfg.ell) {
            return Err(ProtocolError::Config(format!(
                "OT inputs must have {} bits",
                cfg.ell
            )));
        }
        transport.send(&Message::MaskedStrings(mask_inputs(inputs, &strings)).to_frame())?;
    }
    state.advance(Phase::Done)?;
    Ok(AliceOutput {
        strings,
        phase: state.phase(),
    })
}

/// Bob's side of one run. `expect_ot` waits for Alice's masked inputs.
pub fn run_bob<T: Transport>(
    cfg: &BobConfig,
    data: &Measurements,
    transport: &mut T,
    expect_ot: bool,
) -> Result<BobOutput, ProtocolError> {
    let mut state = PartyState::new();
    let result = bob_steps(cfg, data, transport, expect_ot, &mut state);
    if let Err(e) = &result {
        state.abort();
        // Short sets are detected by both sides; Alice sends that abort.
        if !matches!(
            e,
            ProtocolError::AbortShortSets { .. } | ProtocolError::PeerAborted { .. }
        ) {
            send_abort(transport, e);
        }
    }
    result
}

fn bob_steps<T: Transport>(
    cfg: &BobConfig,
    data: &Measurements,
    transport: &mut T,
    expect_ot: bool,
    state: &mut PartyState,
) -> Result<BobOutput, ProtocolError> {
    let shared = &cfg.shared;
    shared.check()?;
    if cfg.choice > 1 {
        return Err(ProtocolError::Config(format!(
            "choice bit {} is not 0 or 1",
            cfg.choice
        )));
    }
    state.advance(Phase::Measure)?;
    let n = data.bases.len();
    state.advance(Phase::Wait)?;
    transport.wait()?;
    state.advance(Phase::BasisReveal)?;
    let Message::Bases(theta_a) = recv_message(transport, Tag::Bases)? else {
        unreachable!()
    };
    if theta_a.len() != n {
        return Err(ProtocolError::Malformed(format!(
            "received {} bases for {n} rounds",
            theta_a.len()
        )));
    }
    let theta_a: Vec<u8> = theta_a.iter().map(u8::from).collect();

    state.advance(Phase::Sift)?;
    let t = cfg.choice;
    let (set0, set1) = match cfg.strategy {
        BobStrategy::Honest => sift(&theta_a, &data.bases, t)?,
        BobStrategy::LeakyChoice => {
            let x_rounds = vec![0u8; n];
            sift(&theta_a, &x_rounds, t)?
        }
    };
    let mut mask = Bits::zeros(n);
    for &i in &set0 {
        mask.set(i, true);
    }
    transport.send(
        &Message::IndexSets {
            code_id: shared.code.id(),
            mask,
        }
        .to_frame(),
    )?;
    if set0.len() < shared.per_set || set1.len() < shared.per_set {
        // Alice reaches the same verdict and aborts; consume her message.
        return match recv_message(transport, Tag::Syndromes) {
            Err(ProtocolError::PeerAborted { .. }) | Err(ProtocolError::Wire(_)) => {
                Err(ProtocolError::AbortShortSets {
                    set0: set0.len(),
                    set1: set1.len(),
                    needed: shared.per_set,
                })
            }
            Err(e) => Err(e),
            Ok(_) => Err(ProtocolError::Malformed(
                "syndromes sent despite short sets".into(),
            )),
        };
    }
    let chosen = if t == 0 { &set0 } else { &set1 };
    let y: Vec<f64> = chosen[..shared.per_set]
        .iter()
        .map(|&i| data.values[i])
        .collect();

    state.advance(Phase::Reconcile)?;
    let Message::Syndromes(blocks) = recv_message(transport, Tag::Syndromes)? else {
        unreachable!()
    };
    let block = &blocks[t as usize];
    if block.low.len() != shared.per_set || block.syndrome.len() != shared.code.m() {
        return Err(ProtocolError::Malformed(format!(
            "syndrome block of {} symbols / {} checks",
            block.low.len(),
            block.syndrome.len()
        )));
    }
    let decoded = decode_frame(
        &shared.code,
        &shared.scheme,
        &cfg.noise,
        SideInfo::Continuous(&y),
        &block.low,
        &block.syndrome,
        &cfg.decoder,
    );

    state.advance(Phase::Amplify)?;
    let Message::HashDesc(hashes) = recv_message(transport, Tag::HashDesc)? else {
        unreachable!()
    };
    let (string, iterations) = match decoded {
        Ok((z, it)) => (
            Some(apply_hash(&hashes[t as usize], &symbols_to_bits(&z))?),
            Some(it),
        ),
        Err(ReconError::DecodeFailure { .. }) => (None, None),
        Err(e) => return Err(e.into()),
    };
    let ot_output = if expect_ot {
        let Message::MaskedStrings(masked) = recv_message(transport, Tag::MaskedStrings)? else {
            unreachable!()
        };
        string.as_ref().map(|s| unmask(&masked, t, s))
    } else {
        None
    };
    state.advance(Phase::Done)?;
    Ok(BobOutput {
        choice: t,
        string,
        decode_iterations: iterations,
        ot_output,
        phase: state.phase(),
    })
}

/// Parameters of a complete two-party run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub shared: SharedConfig,
    /// Bob's code; normally the shared one.
    pub bob_code: Option<Arc<LdpcCode>>,
    pub noise: NoiseModel,
    pub choice: u8,
    pub strategy: BobStrategy,
    pub decoder: DecoderConfig,
    pub ot_inputs: Option<[Bits; 2]>,
}

impl RunConfig {
    pub fn bob(&self) -> BobConfig {
        let mut shared = self.shared.clone();
        if let Some(code) = &self.bob_code {
            shared.code = code.clone();
        }
        BobConfig {
            shared,
            noise: self.noise,
            choice: self.choice,
            strategy: self.strategy,
            decoder: self.decoder,
        }
    }
}

#[derive(Debug)]
pub struct RotOutcome {
    pub alice: Result<AliceOutput, ProtocolError>,
    pub bob: Result<BobOutput, ProtocolError>,
    /// Every frame in the order Alice's endpoint saw it.
    pub transcript: Transcript,
}

impl RotOutcome {
    pub fn is_done(&self) -> bool {
        self.alice.is_ok() && self.bob.is_ok()
    }

    /// Bob's string equals Alice's string for his choice.
    pub fn correct(&self) -> bool {
        match (&self.alice, &self.bob) {
            (Ok(a), Ok(b)) => b.string.as_ref() == Some(&a.strings[b.choice as usize]),
            _ => false,
        }
    }
}

/// Runs both parties on their own threads over the given endpoints.
pub fn run_pair<A: Transport, B: Transport>(
    cfg: &RunConfig,
    records: &[QuadratureRecord],
    seed: u64,
    alice_end: A,
    mut bob_end: B,
) -> RotOutcome {
    let (alice_data, bob_data) = split_records(records);
    let (mut alice_end, log) = Recording::new(alice_end, Direction::AliceToBob);
    let bob_cfg = cfg.bob();
    let (alice, bob) = std::thread::scope(|s| {
        let alice = s.spawn(|| {
            let mut rng = SeededRng::new(seed, streams::ALICE);
            let out = run_alice(
                &cfg.shared,
                &alice_data,
                &mut alice_end,
                &mut rng,
                cfg.ot_inputs.as_ref(),
            );
            drop(alice_end);
            out
        });
        let bob = s.spawn(|| {
            let out = run_bob(&bob_cfg, &bob_data, &mut bob_end, cfg.ot_inputs.is_some());
            drop(bob_end);
            out
        });
        (
            alice.join().expect("alice thread"),
            bob.join().expect("bob thread"),
        )
    });
    let transcript = log.lock().unwrap().clone();
    RotOutcome {
        alice,
        bob,
        transcript,
    }
}

/// Both parties in this process, connected by channels.
pub fn run_in_process(cfg: &RunConfig, records: &[QuadratureRecord], seed: u64) -> RotOutcome {
    if cfg.shared.ell == 0 {
        return refused();
    }
    let (a, b) = channel_pair();
    run_pair(cfg, records, seed, a, b)
}

/// Both parties in this process, connected through a loopback TCP socket.
pub fn run_loopback_tcp(
    cfg: &RunConfig,
    records: &[QuadratureRecord],
    seed: u64,
) -> std::io::Result<RotOutcome> {
    if cfg.shared.ell == 0 {
        return Ok(refused());
    }
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let connector = std::thread::spawn(move || TcpStream::connect(addr));
    let (server, _) = listener.accept()?;
    let client = connector.join().expect("connect thread")?;
    let a = StreamTransport::tcp(server, Duration::ZERO)?;
    let b = StreamTransport::tcp(client, Duration::ZERO)?;
    Ok(run_pair(cfg, records, seed, a, b))
}

fn refused() -> RotOutcome {
    RotOutcome {
        alice: Err(ProtocolError::InfeasibleRate),
        bob: Err(ProtocolError::InfeasibleRate),
        transcript: Transcript::default(),
    }
}

#[cfg(test)]
mod tests;
