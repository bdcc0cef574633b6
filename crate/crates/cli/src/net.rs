//! Two-process sessions over TCP. Each process plays one side and knows
//! only its own message; the partner's declared length arrives on the wire.

use std::net::TcpListener;
use std::time::Duration;

use swapcomm_core::channel::{Side, TcpEndpoint};
use swapcomm_core::protocol::{run_party, SessionConfig};
use swapcomm_core::MessageBits;

use crate::document::{PartyDocument, TOOL, VERSION};
use crate::{emit, read_message, Failure, PartyArgs};

fn party_config(args: &PartyArgs, side: Side) -> Result<SessionConfig, Failure> {
    let own = read_message(&args.msg)?;
    let (alice, bob) = match side {
        Side::Alice => (own, MessageBits::empty()),
        Side::Bob => (MessageBits::empty(), own),
    };
    let config = args.session.config(alice, bob);
    config.validate()?;
    Ok(config)
}

fn finish(args: &PartyArgs, config: &SessionConfig, side: Side, mut endpoint: TcpEndpoint) -> Result<(), Failure> {
    let report = run_party(config, side, &mut endpoint)?;
    let doc = PartyDocument {
        tool: TOOL.into(),
        version: VERSION.into(),
        seed: config.seed,
        side,
        config: config.clone(),
        transcript: report.transcript,
        decoded: report.decoded,
        private: report.log,
    };
    let name = format!("party-{}-{}.json", doc.transcript.session_id, side);
    emit(&crate::to_json(&doc), &args.out, &name.to_lowercase())
}

pub(crate) fn serve(args: PartyArgs) -> Result<(), Failure> {
    let side = args.side.map_or(Side::Alice, |s| s.side());
    let config = party_config(&args, side)?;
    let addr = args
        .listen
        .as_deref()
        .ok_or_else(|| Failure::Usage("serve needs --listen HOST:PORT".into()))?;
    let listener = TcpListener::bind(addr).map_err(|e| Failure::Transport(format!("cannot listen on {addr}: {e}")))?;
    let bound = listener.local_addr().map_err(|e| Failure::Transport(e.to_string()))?;
    eprintln!("listening on {bound}");
    let endpoint = TcpEndpoint::accept(&listener, side, Duration::from_secs(args.timeout))
        .map_err(|e| Failure::Transport(e.to_string()))?;
    finish(&args, &config, side, endpoint)
}

pub(crate) fn connect(args: PartyArgs) -> Result<(), Failure> {
    let side = args.side.map_or(Side::Bob, |s| s.side());
    let config = party_config(&args, side)?;
    let addr = args
        .peer
        .as_deref()
        .ok_or_else(|| Failure::Usage("connect needs --peer HOST:PORT".into()))?;
    let endpoint = TcpEndpoint::connect(addr, side, Duration::from_secs(args.timeout))
        .map_err(|e| Failure::Transport(format!("cannot reach {addr}: {e}")))?;
    finish(&args, &config, side, endpoint)
}
