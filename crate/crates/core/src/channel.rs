//! Public classical announcement channel.
//!
//! # Wire format
//!
//! One announcement per line, UTF-8 JSON, newline terminated:
//!
//! ```text
//! {"v":1,"sid":"9e3779b97f4a7c15","blk":3,"side":"A","kind":"Measurement","label":"PsiMinus"}
//! ```
//!
//! `label` appears only on `Measurement`. `SessionStart` also carries `len`,
//! the sender's public declared message length. No other field is accepted,
//! so operations and private outcomes cannot travel on this channel.
//!
//! The channel is unauthenticated. Anyone on the path can inject or alter
//! announcements; authenticating the classical layer is left to the deployment.

use std::fmt;
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantum::BellLabel;

pub const WIRE_VERSION: u8 = 1;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "A")]
    Alice,
    #[serde(rename = "B")]
    Bob,
}

impl Side {
    pub fn partner(self) -> Side {
        match self {
            Side::Alice => Side::Bob,
            Side::Bob => Side::Alice,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Alice => "Alice",
            Side::Bob => "Bob",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnnouncementKind {
    SessionStart,
    NoMessageDeclaration,
    Measurement,
    SessionEnd,
}

/// One public announcement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Announcement {
    #[serde(rename = "v")]
    pub version: u8,
    #[serde(rename = "sid")]
    pub session_id: String,
    #[serde(rename = "blk")]
    pub block: u32,
    pub side: Side,
    pub kind: AnnouncementKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<BellLabel>,
    #[serde(rename = "len", default, skip_serializing_if = "Option::is_none")]
    pub declared_length: Option<usize>,
}

impl Announcement {
    fn control(session_id: &str, block: u32, side: Side, kind: AnnouncementKind) -> Self {
        Self {
            version: WIRE_VERSION,
            session_id: session_id.to_string(),
            block,
            side,
            kind,
            label: None,
            declared_length: None,
        }
    }

    pub fn start(session_id: &str, side: Side, declared_length: usize) -> Self {
        Self {
            declared_length: Some(declared_length),
            ..Self::control(session_id, 0, side, AnnouncementKind::SessionStart)
        }
    }

    pub fn no_message(session_id: &str, side: Side) -> Self {
        Self::control(session_id, 0, side, AnnouncementKind::NoMessageDeclaration)
    }

    pub fn measurement(session_id: &str, block: u32, side: Side, label: BellLabel) -> Self {
        Self {
            label: Some(label),
            ..Self::control(session_id, block, side, AnnouncementKind::Measurement)
        }
    }

    pub fn end(session_id: &str, block: u32, side: Side) -> Self {
        Self::control(session_id, block, side, AnnouncementKind::SessionEnd)
    }

    /// Field rules that serde alone does not express.
    pub fn validate(&self) -> Result<(), String> {
        if self.version != WIRE_VERSION {
            return Err(format!("unsupported version {}", self.version));
        }
        match (self.kind, self.label) {
            (AnnouncementKind::Measurement, None) => return Err("measurement without label".into()),
            (AnnouncementKind::Measurement, Some(_)) => {}
            (kind, Some(_)) => return Err(format!("{kind:?} must not carry a label")),
            _ => {}
        }
        match (self.kind, self.declared_length) {
            (AnnouncementKind::SessionStart, None) => Err("session start without len".into()),
            (AnnouncementKind::SessionStart, Some(_)) | (_, None) => Ok(()),
            (kind, Some(_)) => Err(format!("{kind:?} must not carry len")),
        }
    }

    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("announcement serializes");
        line.push('\n');
        line
    }

    /// Parses one frame. `offset` is the stream position of the frame's first
    /// byte and is used to report where a malformed frame went wrong.
    pub fn from_line(frame: &[u8], offset: u64) -> Result<Self, ChannelError> {
        let body = frame.strip_suffix(b"\n").ok_or(ChannelError::Malformed {
            offset: offset + frame.len() as u64,
            reason: "frame not newline-terminated".into(),
        })?;
        let text = std::str::from_utf8(body).map_err(|e| ChannelError::Malformed {
            offset: offset + e.valid_up_to() as u64,
            reason: "invalid UTF-8".into(),
        })?;
        let announcement: Announcement = serde_json::from_str(text).map_err(|e| {
            // serde_json reports 1-based line/column within this single line.
            let column = e.column().saturating_sub(1).min(body.len()) as u64;
            ChannelError::Malformed {
                offset: offset + column,
                reason: e.to_string(),
            }
        })?;
        announcement
            .validate()
            .map_err(|reason| ChannelError::Malformed { offset, reason })?;
        Ok(announcement)
    }
}

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("transport failure: {0}")]
    Transport(#[from] std::io::Error),
    #[error("malformed frame at byte {offset}: {reason}")]
    Malformed { offset: u64, reason: String },
    #[error("{side} sent block {block} after block {last}")]
    OutOfOrder { side: Side, block: u32, last: u32 },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("peer closed the channel")]
    Closed,
    #[error("timed out waiting for the peer")]
    Timeout,
}

impl ChannelError {
    pub fn is_transport(&self) -> bool {
        matches!(self, ChannelError::Transport(_) | ChannelError::Closed | ChannelError::Timeout)
    }
}

/// Read-only observer of every announcement that crosses the channel.
#[derive(Debug, Clone, Default)]
pub struct Tap {
    log: Arc<Mutex<Vec<Announcement>>>,
}

impl Tap {
    pub fn new() -> Self {
        Self::default()
    }

    fn record(&self, a: &Announcement) {
        self.log.lock().expect("tap lock").push(a.clone());
    }

    /// Everything observed so far, in delivery order.
    pub fn snapshot(&self) -> Vec<Announcement> {
        self.log.lock().expect("tap lock").clone()
    }
}

/// Per-sender ordering contract, enforced on receipt.
#[derive(Debug, Clone)]
pub struct OrderGuard {
    expected_sender: Side,
    started: bool,
    last_block: u32,
    last_measurement: Option<u32>,
}

impl OrderGuard {
    pub fn new(expected_sender: Side) -> Self {
        Self {
            expected_sender,
            started: false,
            last_block: 0,
            last_measurement: None,
        }
    }

    pub fn check(&mut self, a: &Announcement) -> Result<(), ChannelError> {
        if a.side != self.expected_sender {
            return Err(ChannelError::Protocol(format!(
                "expected announcements from {}, got one from {}",
                self.expected_sender, a.side
            )));
        }
        match (self.started, a.kind) {
            (false, AnnouncementKind::SessionStart) => self.started = true,
            (false, kind) => {
                return Err(ChannelError::Protocol(format!("{kind:?} before SessionStart")));
            }
            (true, AnnouncementKind::SessionStart) => {
                return Err(ChannelError::Protocol("duplicate SessionStart".into()));
            }
            _ => {}
        }
        let behind = a.block < self.last_block
            || (a.kind == AnnouncementKind::Measurement
                && self.last_measurement.is_some_and(|m| a.block <= m));
        if behind {
            return Err(ChannelError::OutOfOrder {
                side: a.side,
                block: a.block,
                last: self.last_measurement.unwrap_or(self.last_block).max(self.last_block),
            });
        }
        self.last_block = a.block;
        if a.kind == AnnouncementKind::Measurement {
            self.last_measurement = Some(a.block);
        }
        Ok(())
    }
}

/// One party's end of the announcement channel.
pub trait Endpoint {
    fn side(&self) -> Side;
    fn send(&mut self, announcement: &Announcement) -> Result<(), ChannelError>;
    /// Next announcement from the partner, after ordering checks.
    fn receive(&mut self) -> Result<Announcement, ChannelError>;
}

impl<E: Endpoint + ?Sized> Endpoint for Box<E> {
    fn side(&self) -> Side {
        (**self).side()
    }
    fn send(&mut self, announcement: &Announcement) -> Result<(), ChannelError> {
        (**self).send(announcement)
    }
    fn receive(&mut self) -> Result<Announcement, ChannelError> {
        (**self).receive()
    }
}

/// In-process endpoint. Frames travel as encoded lines so both transports
/// share the same codec.
pub struct MemoryEndpoint {
    side: Side,
    outbound: Sender<String>,
    inbound: Receiver<String>,
    received_bytes: u64,
    guard: OrderGuard,
    tap: Tap,
    timeout: Duration,
}

/// Connected Alice/Bob endpoints plus a tap on both directions.
pub fn memory_pair(timeout: Duration) -> (MemoryEndpoint, MemoryEndpoint, Tap) {
    let tap = Tap::new();
    let (to_bob, from_alice) = mpsc::channel();
    let (to_alice, from_bob) = mpsc::channel();
    let make = |side: Side, outbound, inbound| MemoryEndpoint {
        side,
        outbound,
        inbound,
        received_bytes: 0,
        guard: OrderGuard::new(side.partner()),
        tap: tap.clone(),
        timeout,
    };
    let alice = make(Side::Alice, to_bob, from_bob);
    let bob = make(Side::Bob, to_alice, from_alice);
    (alice, bob, tap)
}

impl MemoryEndpoint {
    /// Pushes a raw frame to the partner, bypassing encoding. Test hook for
    /// malformed traffic.
    pub fn send_raw(&mut self, frame: &str) -> Result<(), ChannelError> {
        self.outbound.send(frame.to_string()).map_err(|_| ChannelError::Closed)
    }
}

impl Endpoint for MemoryEndpoint {
    fn side(&self) -> Side {
        self.side
    }

    fn send(&mut self, announcement: &Announcement) -> Result<(), ChannelError> {
        self.tap.record(announcement);
        self.outbound
            .send(announcement.to_line())
            .map_err(|_| ChannelError::Closed)
    }

    fn receive(&mut self) -> Result<Announcement, ChannelError> {
        let frame = self.inbound.recv_timeout(self.timeout).map_err(|e| match e {
            RecvTimeoutError::Timeout => ChannelError::Timeout,
            RecvTimeoutError::Disconnected => ChannelError::Closed,
        })?;
        let offset = self.received_bytes;
        self.received_bytes += frame.len() as u64;
        let announcement = Announcement::from_line(frame.as_bytes(), offset)?;
        self.guard.check(&announcement)?;
        Ok(announcement)
    }
}

/// Line-oriented TCP endpoint.
pub struct TcpEndpoint {
    side: Side,
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    received_bytes: u64,
    guard: OrderGuard,
    tap: Tap,
}

impl TcpEndpoint {
    pub fn new(stream: TcpStream, side: Side, timeout: Duration) -> Result<Self, ChannelError> {
        stream.set_read_timeout(Some(timeout))?;
        stream.set_write_timeout(Some(timeout))?;
        stream.set_nodelay(true)?;
        Ok(Self {
            side,
            reader: BufReader::new(stream.try_clone()?),
            writer: stream,
            received_bytes: 0,
            guard: OrderGuard::new(side.partner()),
            tap: Tap::new(),
        })
    }

    /// Dials `addr`, trying each resolved address until `timeout`.
    pub fn connect(addr: impl ToSocketAddrs, side: Side, timeout: Duration) -> Result<Self, ChannelError> {
        let mut last = None;
        for candidate in addr.to_socket_addrs()? {
            match TcpStream::connect_timeout(&candidate, timeout) {
                Ok(stream) => return Self::new(stream, side, timeout),
                Err(e) => last = Some(e),
            }
        }
        Err(ChannelError::Transport(last.unwrap_or_else(|| {
            std::io::Error::new(ErrorKind::NotFound, "address resolved to nothing")
        })))
    }

    /// Accepts exactly one peer on `listener`.
    pub fn accept(listener: &TcpListener, side: Side, timeout: Duration) -> Result<Self, ChannelError> {
        let (stream, _) = listener.accept()?;
        Self::new(stream, side, timeout)
    }

    pub fn tap(&self) -> Tap {
        self.tap.clone()
    }

    pub fn send_raw(&mut self, frame: &[u8]) -> Result<(), ChannelError> {
        self.writer.write_all(frame)?;
        self.writer.flush()?;
        Ok(())
    }
}

impl Endpoint for TcpEndpoint {
    fn side(&self) -> Side {
        self.side
    }

    fn send(&mut self, announcement: &Announcement) -> Result<(), ChannelError> {
        self.send_raw(announcement.to_line().as_bytes())?;
        self.tap.record(announcement);
        Ok(())
    }

    fn receive(&mut self) -> Result<Announcement, ChannelError> {
        let mut frame = Vec::new();
        let read = self.reader.read_until(b'\n', &mut frame).map_err(|e| match e.kind() {
            ErrorKind::WouldBlock | ErrorKind::TimedOut => ChannelError::Timeout,
            _ => ChannelError::Transport(e),
        })?;
        if read == 0 {
            return Err(ChannelError::Closed);
        }
        let offset = self.received_bytes;
        self.received_bytes += read as u64;
        let announcement = Announcement::from_line(&frame, offset)?;
        self.guard.check(&announcement)?;
        self.tap.record(&announcement);
        Ok(announcement)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SID: &str = "00000000000000ab";

    #[test]
    fn line_format_is_exact() {
        let m = Announcement::measurement(SID, 3, Side::Alice, BellLabel::PsiMinus);
        assert_eq!(
            m.to_line(),
            "{\"v\":1,\"sid\":\"00000000000000ab\",\"blk\":3,\"side\":\"A\",\"kind\":\"Measurement\",\"label\":\"PsiMinus\"}\n"
        );
        let s = Announcement::start(SID, Side::Bob, 6);
        assert_eq!(
            s.to_line(),
            "{\"v\":1,\"sid\":\"00000000000000ab\",\"blk\":0,\"side\":\"B\",\"kind\":\"SessionStart\",\"len\":6}\n"
        );
    }

    #[test]
    fn round_trip_through_memory() {
        let (mut a, mut b, tap) = memory_pair(Duration::from_secs(1));
        let start = Announcement::start(SID, Side::Alice, 4);
        let m = Announcement::measurement(SID, 1, Side::Alice, BellLabel::PhiMinus);
        a.send(&start).unwrap();
        a.send(&m).unwrap();
        assert_eq!(b.receive().unwrap(), start);
        assert_eq!(b.receive().unwrap(), m);
        assert_eq!(tap.snapshot(), vec![start, m]);
    }

    #[test]
    fn malformed_frame_reports_offset() {
        let (mut a, mut b, _) = memory_pair(Duration::from_secs(1));
        let start = Announcement::start(SID, Side::Alice, 0);
        let first = start.to_line();
        a.send(&start).unwrap();
        a.send_raw("{\"v\":1,\"sid\":\"x\",\"blk\":1,\"side\":\"A\",\"kind\":\"Measurement\",\"label\":\"Chi\"}\n")
            .unwrap();
        b.receive().unwrap();
        match b.receive() {
            Err(ChannelError::Malformed { offset, .. }) => {
                assert!(offset > first.len() as u64, "offset {offset}");
            }
            other => panic!("expected malformed, got {other:?}"),
        }
    }

    #[test]
    fn unknown_and_private_fields_rejected() {
        let line = b"{\"v\":1,\"sid\":\"x\",\"blk\":1,\"side\":\"A\",\"kind\":\"Measurement\",\"label\":\"PsiPlus\",\"op\":\"U1\"}\n";
        assert!(matches!(
            Announcement::from_line(line, 0),
            Err(ChannelError::Malformed { .. })
        ));
    }

    #[test]
    fn field_rules() {
        let no_label = b"{\"v\":1,\"sid\":\"x\",\"blk\":1,\"side\":\"A\",\"kind\":\"Measurement\"}\n";
        assert!(Announcement::from_line(no_label, 7).is_err());
        let labelled_end = b"{\"v\":1,\"sid\":\"x\",\"blk\":1,\"side\":\"A\",\"kind\":\"SessionEnd\",\"label\":\"PsiPlus\"}\n";
        assert!(Announcement::from_line(labelled_end, 0).is_err());
        let v2 = b"{\"v\":2,\"sid\":\"x\",\"blk\":0,\"side\":\"A\",\"kind\":\"SessionEnd\"}\n";
        assert!(Announcement::from_line(v2, 0).is_err());
        let unterminated = b"{\"v\":1,\"sid\":\"x\",\"blk\":0,\"side\":\"A\",\"kind\":\"SessionEnd\"}";
        match Announcement::from_line(unterminated, 100) {
            Err(ChannelError::Malformed { offset, .. }) => assert_eq!(offset, 100 + unterminated.len() as u64),
            other => panic!("{other:?}"),
        }
        let bad_utf8 = b"{\"v\":1,\xff}\n";
        match Announcement::from_line(bad_utf8, 10) {
            Err(ChannelError::Malformed { offset, .. }) => assert_eq!(offset, 17),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn out_of_order_blocks_rejected() {
        let mut guard = OrderGuard::new(Side::Alice);
        guard.check(&Announcement::start(SID, Side::Alice, 0)).unwrap();
        guard
            .check(&Announcement::measurement(SID, 2, Side::Alice, BellLabel::PsiPlus))
            .unwrap();
        let err = guard
            .check(&Announcement::measurement(SID, 1, Side::Alice, BellLabel::PsiPlus))
            .unwrap_err();
        assert!(matches!(err, ChannelError::OutOfOrder { block: 1, last: 2, .. }));
        let dup = guard.check(&Announcement::measurement(SID, 2, Side::Alice, BellLabel::PsiPlus));
        assert!(matches!(dup, Err(ChannelError::OutOfOrder { .. })));
    }

    #[test]
    fn guard_requires_start_and_partner_side() {
        let mut guard = OrderGuard::new(Side::Bob);
        assert!(guard
            .check(&Announcement::measurement(SID, 1, Side::Bob, BellLabel::PsiPlus))
            .is_err());
        assert!(guard.check(&Announcement::start(SID, Side::Alice, 0)).is_err());
    }

    #[test]
    fn dropped_partner_closes_channel() {
        let (a, mut b, _) = memory_pair(Duration::from_secs(1));
        drop(a);
        assert!(matches!(b.receive(), Err(ChannelError::Closed)));
    }

    #[test]
    fn tcp_round_trip() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let mut server = TcpEndpoint::accept(&listener, Side::Alice, Duration::from_secs(5)).unwrap();
            server.send(&Announcement::start(SID, Side::Alice, 2)).unwrap();
            server.receive().unwrap()
        });
        let mut client = TcpEndpoint::connect(addr, Side::Bob, Duration::from_secs(5)).unwrap();
        let got = client.receive().unwrap();
        assert_eq!(got, Announcement::start(SID, Side::Alice, 2));
        client.send(&Announcement::start(SID, Side::Bob, 0)).unwrap();
        assert_eq!(handle.join().unwrap(), Announcement::start(SID, Side::Bob, 0));
        assert_eq!(client.tap().snapshot().len(), 2);
    }

    #[test]
    fn tcp_malformed_offset_counts_stream_bytes() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let start = Announcement::start(SID, Side::Alice, 0).to_line();
        let sent = start.clone();
        let handle = std::thread::spawn(move || {
            let mut server = TcpEndpoint::accept(&listener, Side::Alice, Duration::from_secs(5)).unwrap();
            server.send_raw(sent.as_bytes()).unwrap();
            server.send_raw(b"not json\n").unwrap();
        });
        let mut client = TcpEndpoint::connect(addr, Side::Bob, Duration::from_secs(5)).unwrap();
        client.receive().unwrap();
        match client.receive() {
            Err(ChannelError::Malformed { offset, .. }) => {
                let base = start.len() as u64;
                assert!((base..base + 9).contains(&offset), "offset {offset}");
            }
            other => panic!("{other:?}"),
        }
        handle.join().unwrap();
    }
}
