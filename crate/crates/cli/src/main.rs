//! `swapcomm`: run, verify, analyze and network entanglement-swapping
//! sessions.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 verification
//! failure, 3 transport failure.

mod document;
mod net;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use swapcomm_core::adversary::{
    analytic_leakage, eve_posterior, information_summary, monte_carlo_leakage, EveView, JointPrior, Leakage,
    Pattern,
};
use swapcomm_core::audit::audit_printed_table;
use swapcomm_core::channel::Side;
use swapcomm_core::protocol::{replay, run_session, Fallback, Mode, SessionConfig, SessionError, Transcript};
use swapcomm_core::swap::decode_table;
use swapcomm_core::verify::verify_all;
use swapcomm_core::MessageBits;

use document::{AnalysisDocument, RunDocument, TOOL, VERSION};

/// Environment variable naming the directory documents go to when `--out`
/// is absent. Without it documents go to stdout.
pub const OUT_DIR_ENV: &str = "SWAPCOMM_OUT_DIR";

#[derive(Parser)]
#[command(name = "swapcomm", version, about = "Bidirectional communication over entanglement swapping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a two-party session in process and write its document.
    Simulate(SimulateArgs),
    /// Emit the derived decode table and the printed-table audit.
    Table(OutArgs),
    /// Check every swapping identity and decode invariant.
    Verify {
        #[arg(long, value_enum, default_value_t = VerifyFormat::Text)]
        format: VerifyFormat,
    },
    /// Eavesdropper posterior over the operations behind a transcript.
    Analyze(AnalyzeArgs),
    /// Re-derive decoded messages from a run document.
    Replay {
        document: PathBuf,
    },
    /// Accept one peer and run this side of a networked session.
    Serve(PartyArgs),
    /// Connect to a serving peer and run this side of a networked session.
    Connect(PartyArgs),
    /// Many random sessions plus Monte Carlo leakage estimates.
    Montecarlo(MonteCarloArgs),
}

#[derive(Args, Clone)]
struct SessionArgs {
    /// Total number of shared Bell pairs.
    #[arg(long)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Bidirectional)]
    mode: ModeArg,
    /// What the non-sending party does in a unilateral session.
    #[arg(long, value_enum, default_value_t = FallbackArg::Random)]
    fallback: FallbackArg,
}

#[derive(Args)]
struct OutArgs {
    /// Output file; defaults to $SWAPCOMM_OUT_DIR or stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    session: SessionArgs,
    /// Alice's message: bits, 0x-prefixed hex, or @file.
    #[arg(long, default_value = "")]
    alice_msg: String,
    /// Bob's message: bits, 0x-prefixed hex, or @file.
    #[arg(long, default_value = "")]
    bob_msg: String,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Run document, party document, or bare transcript (JSON).
    input: PathBuf,
    /// `transcript` (uniform, silent sides fixed to u0), `uniform`, or a
    /// JSON file holding a 4x4 joint prior.
    #[arg(long, default_value = "transcript")]
    prior: String,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
pub(crate) struct PartyArgs {
    #[command(flatten)]
    session: SessionArgs,
    /// Address to listen on (serve).
    #[arg(long)]
    listen: Option<String>,
    /// Address of the serving peer (connect).
    #[arg(long)]
    peer: Option<String>,
    /// Which party this process plays; serve defaults to Alice, connect to Bob.
    #[arg(long, value_enum)]
    side: Option<SideArg>,
    /// This party's message: bits, 0x-prefixed hex, or @file.
    #[arg(long, default_value = "")]
    msg: String,
    /// Seconds to wait for each peer message.
    #[arg(long, default_value_t = 30)]
    timeout: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct MonteCarloArgs {
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 40)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Blocks per announcement pattern for the leakage estimate; 0 skips it.
    #[arg(long, default_value_t = 100_000)]
    blocks: u32,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Bidirectional,
    AToB,
    BToA,
}

#[derive(Clone, Copy, ValueEnum)]
enum FallbackArg {
    Random,
    Silent,
}

#[derive(Clone, Copy, ValueEnum)]
pub(crate) enum SideArg {
    #[value(alias = "a")]
    Alice,
    #[value(alias = "b")]
    Bob,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VerifyFormat {
    Text,
    Json,
}

impl SideArg {
    pub(crate) fn side(self) -> Side {
        match self {
            SideArg::Alice => Side::Alice,
            SideArg::Bob => Side::Bob,
        }
    }
}

impl SessionArgs {
    pub(crate) fn config(&self, alice: MessageBits, bob: MessageBits) -> SessionConfig {
        SessionConfig {
            n_pairs: self.pairs,
            mode: match self.mode {
                ModeArg::Bidirectional => Mode::Bidirectional,
                ModeArg::AToB => Mode::AliceToBob,
                ModeArg::BToA => Mode::BobToAlice,
            },
            fallback: match self.fallback {
                FallbackArg::Random => Fallback::RandomOps,
                FallbackArg::Silent => Fallback::AnnouncedSilence,
            },
            seed: self.seed,
            alice_message: alice,
            bob_message: bob,
        }
    }
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub(crate) enum Failure {
    Usage(String),
    Verification(String),
    Transport(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Verification(_) => 2,
            Failure::Transport(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Verification(m) | Failure::Transport(m) => m,
        }
    }
}

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Channel { .. } => Failure::Transport(e.to_string()),
            SessionError::Inconsistent { .. } => Failure::Verification(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

pub(crate) fn read_message(arg: &str) -> Result<MessageBits, Failure> {
    let text = match arg.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {path}: {e}")))?,
        None => arg.to_string(),
    };
    MessageBits::parse(&text).map_err(|e| Failure::Usage(format!("bad message {arg:?}: {e}")))
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{} is not JSON: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("document serializes");
    s.push('\n');
    s
}

/// Writes `content` to `--out`, else into `$SWAPCOMM_OUT_DIR/default_name`,
/// else to stdout.
pub(crate) fn emit(content: &str, out: &OutArgs, default_name: &str) -> CmdResult {
    let path = match (&out.out, std::env::var_os(OUT_DIR_ENV)) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(dir)) if !dir.is_empty() => Some(PathBuf::from(dir).join(default_name)),
        _ => None,
    };
    match path {
        Some(p) => fs::write(&p, content).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn simulate(args: SimulateArgs) -> CmdResult {
    let config = args.session.config(read_message(&args.alice_msg)?, read_message(&args.bob_msg)?);
    config.validate()?;
    let result = run_session(&config)?;
    let doc = RunDocument::new(&config, result);
    let (content, ext) = match args.format {
        Format::Json => (doc.to_json(), "json"),
        Format::Csv => (doc.to_csv(), "csv"),
        Format::Text => (doc.to_text(), "txt"),
    };
    emit(&content, &args.out, &format!("run-{}.{ext}", doc.transcript.session_id))
}

fn table(out: OutArgs) -> CmdResult {
    #[derive(Serialize)]
    struct TableDocument<'a> {
        tool: &'a str,
        version: &'a str,
        decode_table: &'a swapcomm_core::DecodeTable,
        audit: swapcomm_core::audit::AuditReport,
    }
    let doc = TableDocument {
        tool: TOOL,
        version: VERSION,
        decode_table: decode_table(),
        audit: audit_printed_table(),
    };
    emit(&to_json(&doc), &out, "table.json")
}

fn verify(format: VerifyFormat) -> CmdResult {
    let report = verify_all();
    match format {
        VerifyFormat::Text => println!("{}", report.headline()),
        VerifyFormat::Json => print!("{}", to_json(&report)),
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Verification(report.failures.join("\n")))
    }
}

fn transcript_of(value: Value) -> Result<Transcript, Failure> {
    let inner = match value {
        Value::Object(mut map) if map.contains_key("transcript") => map.remove("transcript").unwrap_or_default(),
        other => other,
    };
    serde_json::from_value(inner).map_err(|e| Failure::Usage(format!("no transcript in input: {e}")))
}

fn analyze(args: AnalyzeArgs) -> CmdResult {
    let transcript = transcript_of(read_json(&args.input)?)?;
    let prior = match args.prior.as_str() {
        "transcript" => JointPrior::for_transcript(&transcript),
        "uniform" => JointPrior::uniform(),
        path => {
            let value = read_json(Path::new(path))?;
            let value = match value {
                Value::Object(mut map) if map.contains_key("p") => map.remove("p").unwrap_or_default(),
                other => other,
            };
            let p: [[f64; 4]; 4] =
                serde_json::from_value(value).map_err(|e| Failure::Usage(format!("prior must be a 4x4 table: {e}")))?;
            JointPrior::new(p).map_err(|e| Failure::Usage(e.to_string()))?
        }
    };
    let name = format!("analysis-{}.json", transcript.session_id);
    let report = eve_posterior(&EveView::new(transcript), &prior).map_err(|e| Failure::Usage(e.to_string()))?;
    let doc = AnalysisDocument {
        tool: TOOL.into(),
        version: VERSION.into(),
        prior_source: args.prior,
        summary: information_summary(&report, &prior),
        report,
    };
    emit(&to_json(&doc), &args.out, &name)
}

fn replay_document(path: PathBuf) -> CmdResult {
    let doc: RunDocument = serde_json::from_value(read_json(&path)?)
        .map_err(|e| Failure::Usage(format!("{} is not a run document: {e}", path.display())))?;
    let replayed = replay(&doc.transcript, &doc.private.records())?;
    let same = replayed.decoded_by_alice == doc.decoded.by_alice
        && replayed.decoded_by_bob == doc.decoded.by_bob
        && replayed.blocks == doc.private.blocks;
    let rerun = RunDocument::new(&doc.config, run_session(&doc.config)?);
    let show = |m: &Option<MessageBits>| m.as_ref().map_or_else(|| "-".to_string(), |m| m.to_string());
    println!(
        "replayed {} blocks: Bob decodes {}, Alice decodes {}",
        replayed.blocks.len(),
        show(&replayed.decoded_by_bob),
        show(&replayed.decoded_by_alice)
    );
    if !same {
        return Err(Failure::Verification("replayed decodes differ from the document".into()));
    }
    if rerun != doc {
        return Err(Failure::Verification(
            "re-running the embedded configuration does not reproduce the document".into(),
        ));
    }
    Ok(())
}

/// Seed and message pair for trial `i`, derived from the master seed.
fn trial(master: u64, i: usize, pairs: usize) -> SessionConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(i as u64);
    let capacity = 2 * (pairs / 2);
    let mut bits = |n: usize| MessageBits::new((0..n).map(|_| rng.random()).collect());
    let seed = rng_seed(master, i);
    let alice = bits(capacity);
    let bob = bits(capacity);
    SessionConfig::bidirectional(pairs, seed, alice, bob)
}

fn rng_seed(master: u64, i: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master ^ 0x5eed);
    rng.set_stream(i as u64);
    rng.random()
}

fn montecarlo(args: MonteCarloArgs) -> CmdResult {
    #[derive(Serialize)]
    struct PatternLeakage {
        pattern: Pattern,
        analytic: Leakage,
        monte_carlo: Leakage,
    }
    #[derive(Serialize)]
    struct MonteCarloDocument {
        tool: &'static str,
        version: &'static str,
        seed: u64,
        trials: usize,
        pairs: usize,
        bits_sent: usize,
        bit_errors: usize,
        failed_seeds: Vec<u64>,
        seconds: f64,
        leakage_blocks: u32,
        leakage: Vec<PatternLeakage>,
    }
    let started = Instant::now();
    let outcomes: Vec<(u64, usize, usize)> = (0..args.trials)
        .into_par_iter()
        .map(|i| {
            let config = trial(args.seed, i, args.pairs);
            let sent = config.alice_message.declared_length() + config.bob_message.declared_length();
            let errors = match run_session(&config) {
                Ok(r) => RunDocument::new(&config, r).summary.bit_errors,
                Err(_) => sent.max(1),
            };
            (config.seed, sent, errors)
        })
        .collect();
    let seconds = started.elapsed().as_secs_f64();
    let prior = JointPrior::uniform();
    let leakage = if args.blocks == 0 {
        Vec::new()
    } else {
        [Pattern::Both, Pattern::AliceOnly, Pattern::BobOnly, Pattern::Neither]
            .into_par_iter()
            .enumerate()
            .map(|(k, pattern)| PatternLeakage {
                pattern,
                analytic: analytic_leakage(&prior, pattern),
                monte_carlo: monte_carlo_leakage(&prior, pattern, args.blocks, rng_seed(args.seed, usize::MAX - k)),
            })
            .collect()
    };
    let doc = MonteCarloDocument {
        tool: TOOL,
        version: VERSION,
        seed: args.seed,
        trials: args.trials,
        pairs: args.pairs,
        bits_sent: outcomes.iter().map(|o| o.1).sum(),
        bit_errors: outcomes.iter().map(|o| o.2).sum(),
        failed_seeds: outcomes.iter().filter(|o| o.2 > 0).map(|o| o.0).collect(),
        seconds,
        leakage_blocks: args.blocks,
        leakage,
    };
    emit(&to_json(&doc), &args.out, "montecarlo.json")?;
    if doc.bit_errors > 0 {
        return Err(Failure::Verification(format!(
            "{} bit errors over {} sessions",
            doc.bit_errors, doc.trials
        )));
    }
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Table(out) => table(out),
        Command::Verify { format } => verify(format),
        Command::Analyze(a) => analyze(a),
        Command::Replay { document } => replay_document(document),
        Command::Serve(a) => net::serve(a),
        Command::Connect(a) => net::connect(a),
        Command::Montecarlo(a) => montecarlo(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("swapcomm: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
