//! Persisted documents and their renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use swapcomm_core::adversary::{InformationSummary, PosteriorReport};
use swapcomm_core::channel::Side;
use swapcomm_core::protocol::{
    BlockRecord, PartyLog, PrivateRecords, SessionConfig, SessionResult, Transcript,
};
use swapcomm_core::MessageBits;

pub const TOOL: &str = "swapcomm";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoded {
    /// Bob's message as recovered by Alice.
    pub by_alice: Option<MessageBits>,
    /// Alice's message as recovered by Bob.
    pub by_bob: Option<MessageBits>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n_pairs: usize,
    pub usable_blocks: usize,
    pub idle_pairs: Vec<usize>,
    pub announcements: usize,
    pub alice_bits: usize,
    pub bob_bits: usize,
    pub bit_errors: usize,
}

/// Everything only the parties themselves know. An eavesdropper's view is
/// the `transcript` alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivateSection {
    pub alice: PartyLog,
    pub bob: PartyLog,
    pub blocks: Vec<BlockRecord>,
}

impl PrivateSection {
    pub fn records(&self) -> PrivateRecords {
        PrivateRecords {
            alice: self.alice.clone(),
            bob: self.bob.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDocument {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: SessionConfig,
    pub transcript: Transcript,
    pub decoded: Decoded,
    pub summary: Summary,
    pub private: PrivateSection,
}

fn bit_errors(sent: &MessageBits, got: Option<&MessageBits>) -> usize {
    match got {
        None => 0,
        Some(got) => {
            let mismatched = sent.bits().iter().zip(got.bits()).filter(|(a, b)| a != b).count();
            mismatched + sent.bits().len().abs_diff(got.bits().len())
        }
    }
}

impl RunDocument {
    pub fn new(config: &SessionConfig, result: SessionResult) -> Self {
        let usable_blocks = config.usable_blocks();
        let summary = Summary {
            n_pairs: config.n_pairs,
            usable_blocks,
            idle_pairs: (2 * usable_blocks + 1..=config.n_pairs).collect(),
            announcements: result.transcript.announcements.len(),
            alice_bits: config.alice_message.declared_length(),
            bob_bits: config.bob_message.declared_length(),
            bit_errors: bit_errors(&config.alice_message, result.decoded_by_bob.as_ref())
                + bit_errors(&config.bob_message, result.decoded_by_alice.as_ref()),
        };
        RunDocument {
            tool: TOOL.into(),
            version: VERSION.into(),
            seed: config.seed,
            config: config.clone(),
            transcript: result.transcript,
            decoded: Decoded {
                by_alice: result.decoded_by_alice,
                by_bob: result.decoded_by_bob,
            },
            summary,
            private: PrivateSection {
                alice: result.private.alice,
                bob: result.private.bob,
                blocks: result.blocks,
            },
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("run document serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        #[derive(Serialize)]
        struct Row {
            block: u32,
            first_pair: u32,
            second_pair: u32,
            op_a: String,
            op_b: String,
            alice_outcome: String,
            bob_outcome: String,
            announced_a: bool,
            announced_b: bool,
        }
        let op = |o: Option<swapcomm_core::PauliCode>| o.map_or_else(|| "none".into(), |o| o.to_string());
        let mut w = csv::Writer::from_writer(Vec::new());
        for b in &self.private.blocks {
            w.serialize(Row {
                block: b.index,
                first_pair: 2 * b.index - 1,
                second_pair: 2 * b.index,
                op_a: op(b.op_a),
                op_b: op(b.op_b),
                alice_outcome: b.outcome.a_side.name().into(),
                bob_outcome: b.outcome.b_side.name().into(),
                announced_a: b.announced_a,
                announced_b: b.announced_b,
            })
            .expect("csv row");
        }
        String::from_utf8(w.into_inner().expect("csv flush")).expect("csv is utf-8")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let c = &self.config;
        let _ = writeln!(
            out,
            "session {}  {} pairs  {} blocks  seed {}",
            self.transcript.session_id, c.n_pairs, self.summary.usable_blocks, c.seed
        );
        let _ = writeln!(out, "Alice sends {}  Bob sends {}", shown(&c.alice_message), shown(&c.bob_message));
        for b in &self.private.blocks {
            let party = |op: Option<swapcomm_core::PauliCode>, label: swapcomm_core::BellLabel, announced: bool| {
                let op = op.map_or_else(|| "--".to_string(), |o| format!("{o}({})", o.code()));
                let label = if announced {
                    format!("announces {}", label.symbol())
                } else {
                    format!("keeps {}", label.symbol())
                };
                format!("{op} {label}")
            };
            let _ = writeln!(
                out,
                "block {:>3}  pairs {},{}  A: {}  B: {}",
                b.index,
                2 * b.index - 1,
                2 * b.index,
                party(b.op_a, b.outcome.a_side, b.announced_a),
                party(b.op_b, b.outcome.b_side, b.announced_b),
            );
        }
        for p in &self.summary.idle_pairs {
            let _ = writeln!(out, "pair {p} idle");
        }
        if let Some(m) = &self.decoded.by_bob {
            let _ = writeln!(out, "Bob decodes Alice's message: {}", shown(m));
        }
        if let Some(m) = &self.decoded.by_alice {
            let _ = writeln!(out, "Alice decodes Bob's message: {}", shown(m));
        }
        let _ = writeln!(out, "bit errors: {}", self.summary.bit_errors);
        out
    }
}

fn shown(m: &MessageBits) -> String {
    if m.is_empty() {
        "(nothing)".into()
    } else {
        m.to_string()
    }
}

/// One party's output from a networked session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartyDocument {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub side: Side,
    pub config: SessionConfig,
    pub transcript: Transcript,
    pub decoded: Option<MessageBits>,
    pub private: PartyLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisDocument {
    pub tool: String,
    pub version: String,
    pub prior_source: String,
    pub summary: InformationSummary,
    pub report: PosteriorReport,
}
