//! Two-party sessions over `N` pre-shared `Ψ+` pairs.
//!
//! Block `k` (1-based) uses pairs `2k-1` and `2k`. Each party applies its
//! operation to its photon of pair `2k`, Bell-measures its two photons of the
//! block, and announces the label. With an odd `N` the last pair stays idle.
//!
//! # Outcome sampling
//!
//! Every block draws one uniform number from a stream derived from
//! `(seed, block)` and picks a joint outcome from the distribution of an
//! untouched block, `Ψ+⊗Ψ+`. Each party then relabels its own half through
//! its local operation (see [`local_relabel`]). A local operation on one photon
//! of a measured pair permutes that pair's Bell labels, so the result has
//! exactly the distribution of measuring the operated block, and each side
//! can compute its half without seeing the partner's operation. That is what
//! lets the two parties run in separate processes.

use std::sync::OnceLock;
use std::thread;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{memory_pair, Announcement, AnnouncementKind, ChannelError, Endpoint, Side, DEFAULT_TIMEOUT};
use crate::message::{decode_ops, encode_bits, MessageBits, MessageError};
use crate::quantum::{BellLabel, PauliCode};
use crate::swap::{decode_table, local_relabel, swap_decompose, OutcomeDistribution, SwapOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Bidirectional,
    #[serde(rename = "a-to-b")]
    AliceToBob,
    #[serde(rename = "b-to-a")]
    BobToAlice,
}

/// What a party without a message does in a unilateral session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fallback {
    /// Apply uniformly random operations and announce normally.
    #[serde(rename = "random")]
    RandomOps,
    /// Declare silence, apply nothing, announce nothing.
    #[serde(rename = "silent")]
    AnnouncedSilence,
}

/// Behaviour of one party, fixed by mode and fallback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Messenger,
    RandomOps,
    Silent,
}

impl Role {
    pub fn announces(self) -> bool {
        self != Role::Silent
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub n_pairs: usize,
    pub mode: Mode,
    pub fallback: Fallback,
    pub seed: u64,
    pub alice_message: MessageBits,
    pub bob_message: MessageBits,
}

impl SessionConfig {
    pub fn bidirectional(n_pairs: usize, seed: u64, alice: MessageBits, bob: MessageBits) -> Self {
        Self {
            n_pairs,
            mode: Mode::Bidirectional,
            fallback: Fallback::RandomOps,
            seed,
            alice_message: alice,
            bob_message: bob,
        }
    }

    pub fn usable_blocks(&self) -> usize {
        self.n_pairs / 2
    }

    pub fn role(&self, side: Side) -> Role {
        let sender = match (self.mode, side) {
            (Mode::Bidirectional, _) => true,
            (Mode::AliceToBob, s) => s == Side::Alice,
            (Mode::BobToAlice, s) => s == Side::Bob,
        };
        match (sender, self.fallback) {
            (true, _) => Role::Messenger,
            (false, Fallback::RandomOps) => Role::RandomOps,
            (false, Fallback::AnnouncedSilence) => Role::Silent,
        }
    }

    pub fn message(&self, side: Side) -> &MessageBits {
        match side {
            Side::Alice => &self.alice_message,
            Side::Bob => &self.bob_message,
        }
    }

    /// Public session identifier, derived from the seed so that separately
    /// started parties agree on it.
    pub fn session_id(&self) -> String {
        format!("{:016x}", splitmix64(self.seed))
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        let capacity = 2 * self.usable_blocks();
        for side in [Side::Alice, Side::Bob] {
            let message = self.message(side);
            if self.role(side) != Role::Messenger && !message.is_empty() {
                return Err(SessionError::Config(format!(
                    "{side} has a message but mode {:?} gives {side} nothing to send",
                    self.mode
                )));
            }
            if message.declared_length() > capacity {
                return Err(SessionError::Capacity {
                    side,
                    bits: message.declared_length(),
                    required_pairs: required_pairs(message.declared_length()),
                    n_pairs: self.n_pairs,
                });
            }
        }
        Ok(())
    }
}

/// Pairs needed to carry `bits` bits in one direction.
pub fn required_pairs(bits: usize) -> usize {
    2 * bits.div_ceil(2)
}

fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy)]
enum Stream {
    Nature = 0,
    AliceOps = 1,
    BobOps = 2,
}

/// Independent random stream for one `(seed, block, purpose)`.
fn block_rng(seed: u64, block: u32, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((u64::from(block) << 2) | stream as u64);
    rng
}

fn reference_distribution() -> &'static OutcomeDistribution {
    static REFERENCE: OnceLock<OutcomeDistribution> = OnceLock::new();
    REFERENCE.get_or_init(|| swap_decompose(BellLabel::PsiPlus, BellLabel::PsiPlus))
}

/// Joint outcome of block `block` before either party's operation.
pub fn reference_outcome(seed: u64, block: u32) -> SwapOutcome {
    let draw: f64 = block_rng(seed, block, Stream::Nature).random();
    reference_distribution().sample(draw)
}

fn relabel(op: PauliCode, label: BellLabel) -> BellLabel {
    static TABLE: OnceLock<[[BellLabel; 4]; 4]> = OnceLock::new();
    TABLE.get_or_init(|| {
        PauliCode::ALL.map(|op| BellLabel::ALL.map(|label| local_relabel(op, label)))
    })[op.index()][label.index()]
}

/// Label `side` measures in `block` after applying `op` (or nothing).
pub fn measured_label(seed: u64, block: u32, side: Side, op: Option<PauliCode>) -> BellLabel {
    let reference = reference_outcome(seed, block);
    let own = match side {
        Side::Alice => reference.a_side,
        Side::Bob => reference.b_side,
    };
    relabel(op.unwrap_or(PauliCode::U0), own)
}

/// Both labels of block `block` under the given operations.
pub fn block_outcome(seed: u64, block: u32, op_a: Option<PauliCode>, op_b: Option<PauliCode>) -> SwapOutcome {
    let reference = reference_outcome(seed, block);
    SwapOutcome::new(
        relabel(op_a.unwrap_or(PauliCode::U0), reference.a_side),
        relabel(op_b.unwrap_or(PauliCode::U0), reference.b_side),
    )
}

/// Operation a party applies in `block` (1-based).
fn planned_op(config: &SessionConfig, side: Side, ops: &[PauliCode], block: u32) -> Option<PauliCode> {
    match config.role(side) {
        Role::Messenger => Some(ops.get(block as usize - 1).copied().unwrap_or(PauliCode::U0)),
        Role::RandomOps => {
            let stream = match side {
                Side::Alice => Stream::AliceOps,
                Side::Bob => Stream::BobOps,
            };
            PauliCode::from_index(block_rng(config.seed, block, stream).random_range(0..4))
        }
        Role::Silent => None,
    }
}

/// Public metadata plus announcements, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub session_id: String,
    pub mode: Mode,
    pub n_pairs: usize,
    pub announcements: Vec<Announcement>,
}

impl Transcript {
    pub fn new(config: &SessionConfig, mut announcements: Vec<Announcement>) -> Self {
        normalize(&mut announcements);
        Self {
            session_id: config.session_id(),
            mode: config.mode,
            n_pairs: config.n_pairs,
            announcements,
        }
    }

    pub fn empty(config: &SessionConfig) -> Self {
        Self::new(config, Vec::new())
    }

    pub fn usable_blocks(&self) -> usize {
        self.n_pairs / 2
    }

    /// Length `side` declared in its `SessionStart`.
    pub fn declared_length(&self, side: Side) -> Option<usize> {
        self.announcements
            .iter()
            .find(|a| a.side == side && a.kind == AnnouncementKind::SessionStart)
            .and_then(|a| a.declared_length)
    }

    pub fn declared_silence(&self, side: Side) -> bool {
        self.announcements
            .iter()
            .any(|a| a.side == side && a.kind == AnnouncementKind::NoMessageDeclaration)
    }

    pub fn measurement(&self, block: u32, side: Side) -> Option<BellLabel> {
        self.announcements
            .iter()
            .find(|a| a.kind == AnnouncementKind::Measurement && a.block == block && a.side == side)
            .and_then(|a| a.label)
    }

    pub fn measurements(&self) -> impl Iterator<Item = &Announcement> {
        self.announcements
            .iter()
            .filter(|a| a.kind == AnnouncementKind::Measurement)
    }

    /// The announcements as wire lines, concatenated.
    pub fn to_wire(&self) -> String {
        self.announcements.iter().map(Announcement::to_line).collect()
    }
}

/// Canonical order: starts, silence declarations, measurements by block,
/// ends; Alice before Bob within each slot.
fn normalize(announcements: &mut [Announcement]) {
    let phase = |k: AnnouncementKind| match k {
        AnnouncementKind::SessionStart => 0,
        AnnouncementKind::NoMessageDeclaration => 1,
        AnnouncementKind::Measurement => 2,
        AnnouncementKind::SessionEnd => 3,
    };
    announcements.sort_by_key(|a| (phase(a.kind), a.block, a.side));
}

/// One party's private view of one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivateEntry {
    pub block: u32,
    pub op: Option<PauliCode>,
    pub outcome: BellLabel,
}

/// Everything a party knows that never goes on the channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyLog {
    pub side: Side,
    pub role: Role,
    pub declared_length: usize,
    pub entries: Vec<PrivateEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub index: u32,
    pub op_a: Option<PauliCode>,
    pub op_b: Option<PauliCode>,
    pub outcome: SwapOutcome,
    pub announced_a: bool,
    pub announced_b: bool,
}

impl BlockRecord {
    /// Second-pair label the two operations produce.
    pub fn composite(&self) -> BellLabel {
        decode_table().composite(
            self.op_a.unwrap_or(PauliCode::U0),
            self.op_b.unwrap_or(PauliCode::U0),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivateRecords {
    pub alice: PartyLog,
    pub bob: PartyLog,
}

impl PrivateRecords {
    pub fn get(&self, side: Side) -> &PartyLog {
        match side {
            Side::Alice => &self.alice,
            Side::Bob => &self.bob,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionResult {
    pub decoded_by_alice: Option<MessageBits>,
    pub decoded_by_bob: Option<MessageBits>,
    pub blocks: Vec<BlockRecord>,
    pub transcript: Transcript,
    pub private: PrivateRecords,
}

/// What one party ends a session with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyReport {
    pub log: PartyLog,
    /// Partner's message, when the partner was sending one.
    pub decoded: Option<MessageBits>,
    pub transcript: Transcript,
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("{side}'s message of {bits} bits needs {required_pairs} pairs but the session has {n_pairs}")]
    Capacity {
        side: Side,
        bits: usize,
        required_pairs: usize,
        n_pairs: usize,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("channel failure after {} announcements: {source}", partial.announcements.len())]
    Channel {
        #[source]
        source: ChannelError,
        partial: Transcript,
    },
    #[error("inconsistent record at block {block}: {reason}")]
    Inconsistent { block: u32, reason: String },
    #[error(transparent)]
    Message(#[from] MessageError),
}

impl SessionError {
    pub fn partial_transcript(&self) -> Option<&Transcript> {
        match self {
            SessionError::Channel { partial, .. } => Some(partial),
            _ => None,
        }
    }
}

/// Runs one party's half of a session over `endpoint`.
pub fn run_party<E: Endpoint + ?Sized>(
    config: &SessionConfig,
    side: Side,
    endpoint: &mut E,
) -> Result<PartyReport, SessionError> {
    config.validate()?;
    let mut seen = Vec::new();
    let outcome = party_exchange(config, side, endpoint, &mut seen);
    match outcome {
        Ok((log, partner_length)) => {
            let transcript = Transcript::new(config, seen);
            let partner = side.partner();
            let decoded = match config.role(partner) {
                Role::Messenger => {
                    let announced: Vec<_> = (1..=config.usable_blocks() as u32)
                        .map(|k| transcript.measurement(k, partner))
                        .collect();
                    Some(decode_from_view(&log, &announced, partner_length)?)
                }
                _ => None,
            };
            Ok(PartyReport { log, decoded, transcript })
        }
        Err(source) => Err(SessionError::Channel {
            source,
            partial: Transcript::new(config, seen),
        }),
    }
}

fn party_exchange<E: Endpoint + ?Sized>(
    config: &SessionConfig,
    side: Side,
    endpoint: &mut E,
    seen: &mut Vec<Announcement>,
) -> Result<(PartyLog, usize), ChannelError> {
    let sid = config.session_id();
    let role = config.role(side);
    let partner = side.partner();
    let partner_role = config.role(partner);
    let message = config.message(side);
    let ops = encode_bits(message);
    let blocks = config.usable_blocks() as u32;

    let send = |endpoint: &mut E, a: Announcement, seen: &mut Vec<Announcement>| {
        endpoint.send(&a)?;
        seen.push(a);
        Ok::<_, ChannelError>(())
    };
    let receive = |endpoint: &mut E, seen: &mut Vec<Announcement>, kind: AnnouncementKind, block: u32| {
        let a = endpoint.receive()?;
        if a.session_id != sid {
            return Err(ChannelError::Protocol(format!(
                "session id {} does not match {sid}",
                a.session_id
            )));
        }
        if a.kind != kind || a.block != block {
            return Err(ChannelError::Protocol(format!(
                "expected {kind:?} for block {block} from {partner}, got {:?} for block {}",
                a.kind, a.block
            )));
        }
        seen.push(a.clone());
        Ok(a)
    };

    send(endpoint, Announcement::start(&sid, side, message.declared_length()), seen)?;
    if role == Role::Silent {
        send(endpoint, Announcement::no_message(&sid, side), seen)?;
    }
    let partner_start = receive(endpoint, seen, AnnouncementKind::SessionStart, 0)?;
    let partner_length = partner_start.declared_length.unwrap_or(0);
    if partner_length > 2 * blocks as usize {
        return Err(ChannelError::Protocol(format!(
            "{partner} declared {partner_length} bits, more than {blocks} blocks carry"
        )));
    }
    if partner_role == Role::Silent {
        receive(endpoint, seen, AnnouncementKind::NoMessageDeclaration, 0)?;
    }

    let mut entries = Vec::with_capacity(blocks as usize);
    for block in 1..=blocks {
        let op = planned_op(config, side, &ops, block);
        let outcome = measured_label(config.seed, block, side, op);
        entries.push(PrivateEntry { block, op, outcome });
        if role.announces() {
            send(endpoint, Announcement::measurement(&sid, block, side, outcome), seen)?;
        }
        if partner_role.announces() {
            receive(endpoint, seen, AnnouncementKind::Measurement, block)?;
        }
    }

    send(endpoint, Announcement::end(&sid, blocks, side), seen)?;
    receive(endpoint, seen, AnnouncementKind::SessionEnd, blocks)?;

    let log = PartyLog {
        side,
        role,
        declared_length: message.declared_length(),
        entries,
    };
    Ok((log, partner_length))
}

/// Recovers the partner's message from a party's private log and the
/// partner's announced labels (one per block).
fn decode_from_view(
    log: &PartyLog,
    partner_labels: &[Option<BellLabel>],
    partner_length: usize,
) -> Result<MessageBits, SessionError> {
    let table = decode_table();
    let mut partner_ops = Vec::with_capacity(log.entries.len());
    for (entry, announced) in log.entries.iter().zip(partner_labels) {
        let partner_label = announced.ok_or_else(|| SessionError::Inconsistent {
            block: entry.block,
            reason: format!("no announcement from {}", log.side.partner()),
        })?;
        let outcome = match log.side {
            Side::Alice => SwapOutcome::new(entry.outcome, partner_label),
            Side::Bob => SwapOutcome::new(partner_label, entry.outcome),
        };
        let own = entry.op.unwrap_or(PauliCode::U0);
        partner_ops.push(table.partner(own, table.infer(outcome)));
    }
    Ok(decode_ops(&partner_ops, partner_length)?)
}

fn assemble(config: &SessionConfig, alice: PartyReport, bob: PartyReport) -> Result<SessionResult, SessionError> {
    if alice.transcript != bob.transcript {
        return Err(SessionError::Inconsistent {
            block: 0,
            reason: "the two parties recorded different transcripts".into(),
        });
    }
    let private = PrivateRecords {
        alice: alice.log,
        bob: bob.log,
    };
    let blocks = block_records(config.role(Side::Alice), config.role(Side::Bob), &private)?;
    Ok(SessionResult {
        decoded_by_alice: alice.decoded,
        decoded_by_bob: bob.decoded,
        blocks,
        transcript: alice.transcript,
        private,
    })
}

fn block_records(alice_role: Role, bob_role: Role, private: &PrivateRecords) -> Result<Vec<BlockRecord>, SessionError> {
    let table = decode_table();
    if private.alice.entries.len() != private.bob.entries.len() {
        return Err(SessionError::Inconsistent {
            block: 0,
            reason: format!(
                "Alice logged {} blocks, Bob {}",
                private.alice.entries.len(),
                private.bob.entries.len()
            ),
        });
    }
    private
        .alice
        .entries
        .iter()
        .zip(&private.bob.entries)
        .map(|(a, b)| {
            if a.block != b.block {
                return Err(SessionError::Inconsistent {
                    block: a.block,
                    reason: format!("Bob's entry is for block {}", b.block),
                });
            }
            let record = BlockRecord {
                index: a.block,
                op_a: a.op,
                op_b: b.op,
                outcome: SwapOutcome::new(a.outcome, b.outcome),
                announced_a: alice_role.announces(),
                announced_b: bob_role.announces(),
            };
            if table.infer(record.outcome) != record.composite() {
                return Err(SessionError::Inconsistent {
                    block: a.block,
                    reason: format!(
                        "outcome {} is impossible for operations {:?}/{:?}",
                        record.outcome, a.op, b.op
                    ),
                });
            }
            Ok(record)
        })
        .collect()
}

/// Runs both parties in process over the in-memory channel.
pub fn run_session(config: &SessionConfig) -> Result<SessionResult, SessionError> {
    let (alice, bob, _tap) = memory_pair(DEFAULT_TIMEOUT);
    run_session_over(config, alice, bob)
}

/// Runs both parties, each on its own thread, over the given endpoints.
pub fn run_session_over<A, B>(config: &SessionConfig, mut alice: A, mut bob: B) -> Result<SessionResult, SessionError>
where
    A: Endpoint + Send,
    B: Endpoint + Send,
{
    config.validate()?;
    let (alice_report, bob_report) = thread::scope(|scope| {
        let a = scope.spawn(move || run_party(config, Side::Alice, &mut alice));
        let b = scope.spawn(move || run_party(config, Side::Bob, &mut bob));
        (
            a.join().expect("Alice's party thread panicked"),
            b.join().expect("Bob's party thread panicked"),
        )
    });
    // Prefer the error that caused the failure over the partner's
    // resulting "channel closed".
    match (alice_report, bob_report) {
        (Ok(a), Ok(b)) => assemble(config, a, b),
        (Err(e), Ok(_)) | (Ok(_), Err(e)) => Err(e),
        (Err(a), Err(b)) => Err(pick_root_cause(a, b)),
    }
}

fn pick_root_cause(a: SessionError, b: SessionError) -> SessionError {
    let closed = |e: &SessionError| {
        matches!(
            e,
            SessionError::Channel {
                source: ChannelError::Closed,
                ..
            }
        )
    };
    if closed(&a) && !closed(&b) {
        b
    } else {
        a
    }
}

/// Re-derives a session result from a transcript and both private logs,
/// without drawing any randomness.
pub fn replay(transcript: &Transcript, private: &PrivateRecords) -> Result<SessionResult, SessionError> {
    let blocks = transcript.usable_blocks() as u32;
    for log in [&private.alice, &private.bob] {
        if log.entries.len() != blocks as usize {
            return Err(SessionError::Inconsistent {
                block: log.entries.len() as u32 + 1,
                reason: format!("{} logged {} of {blocks} blocks", log.side, log.entries.len()),
            });
        }
        if log.role == Role::Messenger && transcript.declared_length(log.side) != Some(log.declared_length) {
            return Err(SessionError::Inconsistent {
                block: 0,
                reason: format!("{}'s declared length does not match the transcript", log.side),
            });
        }
        for entry in &log.entries {
            let announced = transcript.measurement(entry.block, log.side);
            match (log.role.announces(), announced) {
                (true, Some(label)) if label == entry.outcome => {}
                (true, Some(label)) => {
                    return Err(SessionError::Inconsistent {
                        block: entry.block,
                        reason: format!(
                            "{} announced {} but measured {}",
                            log.side,
                            label.name(),
                            entry.outcome.name()
                        ),
                    })
                }
                (true, None) => {
                    return Err(SessionError::Inconsistent {
                        block: entry.block,
                        reason: format!("{}'s announcement is missing", log.side),
                    })
                }
                (false, Some(_)) => {
                    return Err(SessionError::Inconsistent {
                        block: entry.block,
                        reason: format!("{} was silent but an announcement exists", log.side),
                    })
                }
                (false, None) => {}
            }
        }
    }

    let result_blocks = block_records(private.alice.role, private.bob.role, private)?;
    let decode = |side: Side| -> Result<Option<MessageBits>, SessionError> {
        let partner = side.partner();
        if private.get(partner).role != Role::Messenger {
            return Ok(None);
        }
        let labels: Vec<_> = (1..=blocks).map(|k| transcript.measurement(k, partner)).collect();
        let length = transcript.declared_length(partner).unwrap_or(0);
        decode_from_view(private.get(side), &labels, length).map(Some)
    };
    Ok(SessionResult {
        decoded_by_alice: decode(Side::Alice)?,
        decoded_by_bob: decode(Side::Bob)?,
        blocks: result_blocks,
        transcript: transcript.clone(),
        private: private.clone(),
    })
}

/// Default per-party receive timeout for networked sessions.
pub const NETWORK_TIMEOUT: Duration = Duration::from_secs(30);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{apply_local, bell_measure, block};
    use crate::stats::chi_square;
    use crate::swap::{block_state, decompose_block};

    fn msg(s: &str) -> MessageBits {
        s.parse().unwrap()
    }

    fn unilateral(mode: Mode, fallback: Fallback, n: usize, alice: &str, bob: &str) -> SessionConfig {
        SessionConfig {
            n_pairs: n,
            mode,
            fallback,
            seed: 99,
            alice_message: msg(alice),
            bob_message: msg(bob),
        }
    }

    #[test]
    fn block_outcome_agrees_with_each_side() {
        for k in 1..50 {
            for (a, b) in [(Some(PauliCode::U1), Some(PauliCode::U2)), (None, Some(PauliCode::U3)), (None, None)] {
                let o = block_outcome(11, k, a, b);
                assert_eq!(o.a_side, measured_label(11, k, Side::Alice, a));
                assert_eq!(o.b_side, measured_label(11, k, Side::Bob, b));
            }
        }
    }

    #[test]
    fn worked_example_decodes() {
        let config = SessionConfig::bidirectional(6, 7, msg("011110"), msg("101100"));
        let result = run_session(&config).unwrap();
        assert_eq!(result.decoded_by_bob.unwrap().to_string(), "011110");
        assert_eq!(result.decoded_by_alice.unwrap().to_string(), "101100");
        assert_eq!(result.blocks.len(), 3);
        let ops: Vec<_> = result.blocks.iter().map(|b| b.op_a.unwrap()).collect();
        assert_eq!(ops, vec![PauliCode::U1, PauliCode::U3, PauliCode::U2]);
        assert_eq!(result.transcript.measurements().count(), 6);
    }

    #[test]
    fn announced_silence_unilateral() {
        let config = unilateral(Mode::AliceToBob, Fallback::AnnouncedSilence, 8, "10011100", "");
        let result = run_session(&config).unwrap();
        assert_eq!(result.decoded_by_bob.unwrap().to_string(), "10011100");
        assert_eq!(result.decoded_by_alice, None);
        assert!(result.transcript.measurements().all(|a| a.side == Side::Alice));
        assert!(result.transcript.declared_silence(Side::Bob));
        assert!(result.blocks.iter().all(|b| b.op_b.is_none() && !b.announced_b));
    }

    #[test]
    fn random_ops_fallback_announces_both() {
        let config = unilateral(Mode::BobToAlice, Fallback::RandomOps, 10, "", "0110111");
        let result = run_session(&config).unwrap();
        assert_eq!(result.decoded_by_alice.unwrap().to_string(), "0110111");
        assert_eq!(result.decoded_by_bob, None);
        assert_eq!(result.transcript.measurements().count(), 10);
        assert!(result.blocks.iter().all(|b| b.op_a.is_some()));
    }

    #[test]
    fn empty_messages_all_modes() {
        for mode in [Mode::Bidirectional, Mode::AliceToBob, Mode::BobToAlice] {
            for fallback in [Fallback::RandomOps, Fallback::AnnouncedSilence] {
                let config = unilateral(mode, fallback, 4, "", "");
                let result = run_session(&config).unwrap();
                for decoded in [&result.decoded_by_alice, &result.decoded_by_bob].into_iter().flatten() {
                    assert!(decoded.is_empty());
                }
                let kinds: Vec<_> = result.transcript.announcements.iter().map(|a| a.kind).collect();
                assert_eq!(kinds.first(), Some(&AnnouncementKind::SessionStart));
                assert_eq!(kinds.last(), Some(&AnnouncementKind::SessionEnd));
            }
        }
        let zero = SessionConfig::bidirectional(0, 1, MessageBits::empty(), MessageBits::empty());
        let result = run_session(&zero).unwrap();
        assert!(result.blocks.is_empty());
        assert_eq!(result.transcript.announcements.len(), 4);
    }

    #[test]
    fn capacity_checked_before_any_announcement() {
        let config = SessionConfig::bidirectional(5, 1, msg("01101"), MessageBits::empty());
        match run_session(&config) {
            Err(SessionError::Capacity { required_pairs, n_pairs, .. }) => {
                assert_eq!((required_pairs, n_pairs), (6, 5));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn silent_party_with_message_rejected() {
        let config = unilateral(Mode::AliceToBob, Fallback::AnnouncedSilence, 4, "01", "1");
        assert!(matches!(run_session(&config), Err(SessionError::Config(_))));
    }

    #[test]
    fn odd_pair_count_leaves_last_pair_idle() {
        let config = SessionConfig::bidirectional(5, 3, msg("0111"), MessageBits::empty());
        let result = run_session(&config).unwrap();
        assert_eq!(result.blocks.len(), 2);
        assert!(result.transcript.announcements.iter().all(|a| a.block <= 2));
        assert_eq!(result.decoded_by_bob.unwrap().to_string(), "0111");
    }

    #[test]
    fn sessions_are_deterministic() {
        let config = SessionConfig::bidirectional(20, 1234, msg("0110100111"), msg("111"));
        assert_eq!(run_session(&config).unwrap(), run_session(&config).unwrap());
        let other = SessionConfig { seed: 1235, ..config.clone() };
        assert_ne!(
            run_session(&config).unwrap().transcript,
            run_session(&other).unwrap().transcript
        );
    }

    #[test]
    fn replay_reproduces_and_detects_tampering() {
        let config = SessionConfig::bidirectional(12, 5, msg("110001"), msg("0101010"));
        let result = run_session(&config).unwrap();
        let replayed = replay(&result.transcript, &result.private).unwrap();
        assert_eq!(replayed, result);

        let mut tampered = result.transcript.clone();
        let target = tampered
            .announcements
            .iter_mut()
            .find(|a| a.kind == AnnouncementKind::Measurement && a.block == 4 && a.side == Side::Bob)
            .unwrap();
        let old = target.label.unwrap();
        target.label = BellLabel::ALL.into_iter().find(|&l| l != old);
        match replay(&tampered, &result.private) {
            Err(SessionError::Inconsistent { block, .. }) => assert_eq!(block, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn replay_of_empty_session() {
        let config = SessionConfig::bidirectional(0, 9, MessageBits::empty(), MessageBits::empty());
        let result = run_session(&config).unwrap();
        let replayed = replay(&result.transcript, &result.private).unwrap();
        assert!(replayed.blocks.is_empty());
        assert_eq!(replayed.decoded_by_bob, Some(MessageBits::empty()));
    }

    #[test]
    fn channel_failure_keeps_partial_transcript() {
        struct FailAfter<E> {
            inner: E,
            sends_left: usize,
        }
        impl<E: Endpoint> Endpoint for FailAfter<E> {
            fn side(&self) -> Side {
                self.inner.side()
            }
            fn send(&mut self, a: &Announcement) -> Result<(), ChannelError> {
                if self.sends_left == 0 {
                    return Err(ChannelError::Transport(std::io::Error::other("link down")));
                }
                self.sends_left -= 1;
                self.inner.send(a)
            }
            fn receive(&mut self) -> Result<Announcement, ChannelError> {
                self.inner.receive()
            }
        }
        let config = SessionConfig::bidirectional(10, 2, msg("0101"), msg("11"));
        let (a, b, _) = memory_pair(Duration::from_secs(2));
        let err = run_session_over(&config, FailAfter { inner: a, sends_left: 3 }, b).unwrap_err();
        match &err {
            SessionError::Channel { source: ChannelError::Transport(_), partial } => {
                assert!(!partial.announcements.is_empty());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn block_outcomes_follow_operated_state() {
        // Relabeled reference draws land in the support of the real operated block.
        for seed in 0..20u64 {
            for op_a in PauliCode::ALL {
                for op_b in PauliCode::ALL {
                    let mut s = block_state(BellLabel::PsiPlus, BellLabel::PsiPlus);
                    s = apply_local(op_a, block::A2, &s).unwrap();
                    s = apply_local(op_b, block::B2, &s).unwrap();
                    let d = decompose_block(&s).unwrap();
                    let o = SwapOutcome::new(
                        measured_label(seed, 1, Side::Alice, Some(op_a)),
                        measured_label(seed, 1, Side::Bob, Some(op_b)),
                    );
                    assert!((d.probability(o) - 0.25).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn engine_sampling_matches_sequential_measurement() {
        // Same fixed operations, 10^4 blocks through each route; the two
        // empirical distributions must agree (chi-square on 4 outcomes).
        let (op_a, op_b) = (PauliCode::U3, PauliCode::U1);
        let mut s = block_state(BellLabel::PsiPlus, BellLabel::PsiPlus);
        s = apply_local(op_a, block::A2, &s).unwrap();
        s = apply_local(op_b, block::B2, &s).unwrap();
        let column = decode_table().column(decode_table().composite(op_a, op_b));
        let mut engine = [0u64; 4];
        let mut sequential = [0u64; 4];
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for k in 1..=10_000u32 {
            let o = SwapOutcome::new(
                measured_label(4242, k, Side::Alice, Some(op_a)),
                measured_label(4242, k, Side::Bob, Some(op_b)),
            );
            engine[column.iter().position(|&c| c == o).unwrap()] += 1;
            let (a, residual) = bell_measure(&s, block::ALICE_PAIR, &mut rng).unwrap();
            let (b, _) = bell_measure(&residual, block::BOB_PAIR, &mut rng).unwrap();
            sequential[column.iter().position(|&c| c == SwapOutcome::new(a, b)).unwrap()] += 1;
        }
        assert!(chi_square(&engine, &[0.25; 4]).passes(0.001), "{engine:?}");
        assert!(chi_square(&sequential, &[0.25; 4]).passes(0.001), "{sequential:?}");
        // Homogeneity of the two samples, 3 degrees of freedom.
        let mut statistic = 0.0;
        for i in 0..4 {
            let expected = (engine[i] + sequential[i]) as f64 / 2.0;
            statistic += (engine[i] as f64 - expected).powi(2) / expected
                + (sequential[i] as f64 - expected).powi(2) / expected;
        }
        assert!(statistic < 16.266, "homogeneity statistic {statistic}");
    }

    #[test]
    fn session_id_is_stable() {
        let config = SessionConfig::bidirectional(2, 0, MessageBits::empty(), MessageBits::empty());
        assert_eq!(config.session_id(), format!("{:016x}", splitmix64(0)));
        assert_eq!(config.session_id().len(), 16);
    }
}
