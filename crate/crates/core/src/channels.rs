//! Ideal classical anonymity primitives and authenticated quantum channels.
//!
//! Every transmission is appended to a [`ChannelLog`] together with its
//! god-view details (true sender, receiver, payload). What a participant can
//! see of an entry is decided by [`ChannelLog::view_for`]:
//!
//! | kind        | everyone sees                  | receiver also sees | nobody sees |
//! |-------------|--------------------------------|--------------------|-------------|
//! | MTAR        | step, tag, payload length class| payload, receiver  | sender      |
//! | BROADCAST   | step, tag, payload             | –                  | sender      |
//! | QUANTUM     | step, tag, from, to            | –                  | amplitudes  |

use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParticipantId(pub usize);

impl fmt::Display for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

/// Opaque reference to one simulated qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QubitHandle(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MessageKind {
    Mtar,
    Broadcast,
    QuantumMetadata,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Visibility {
    /// Occurrence and length class public; payload to the receiver only.
    ReceiverOnly,
    /// Payload public; sender hidden.
    Public,
    /// Endpoints and step public; quantum content never exposed.
    Metadata,
}

impl MessageKind {
    pub fn visibility(self) -> Visibility {
        match self {
            MessageKind::Mtar => Visibility::ReceiverOnly,
            MessageKind::Broadcast => Visibility::Public,
            MessageKind::QuantumMetadata => Visibility::Metadata,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChannelError {
    #[error("no live participant {0}")]
    Routing(ParticipantId),
    #[error("{holder} does not hold qubit {handle:?}")]
    Ownership { holder: ParticipantId, handle: QubitHandle },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub step: u64,
}

/// One transmission with full god-view detail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: u64,
    pub kind: MessageKind,
    pub tag: String,
    pub sender: ParticipantId,
    pub receiver: Option<ParticipantId>,
    pub payload: Vec<u8>,
}

/// What one set of observers can see of a [`LogEntry`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntryView {
    pub step: u64,
    pub kind: MessageKind,
    pub tag: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length_class: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub from: Option<ParticipantId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub to: Option<ParticipantId>,
    /// `None` means redacted.
    pub payload: Option<String>,
}

pub const REDACTED: &str = "⟨redacted⟩";

/// Smallest power of two ≥ len, at least 8.
pub fn length_class(len: usize) -> usize {
    len.max(8).next_power_of_two()
}

fn render_payload(bytes: &[u8]) -> String {
    match std::str::from_utf8(bytes) {
        Ok(s) => s.to_string(),
        Err(_) => {
            let hex: String = bytes.iter().map(|b| format!("{b:02x}")).collect();
            format!("0x{hex}")
        }
    }
}

/// Append-only record of every transmission in a run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelLog {
    entries: Vec<LogEntry>,
}

impl ChannelLog {
    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends a later phase's log, renumbering its steps to follow this one.
    pub fn append(&mut self, other: ChannelLog) {
        let offset = self.entries.last().map_or(0, |e| e.step + 1);
        self.entries.extend(other.entries.into_iter().map(|mut e| {
            e.step += offset;
            e
        }));
    }

    fn view_entry(entry: &LogEntry, viewers: &BTreeSet<ParticipantId>) -> EntryView {
        let mut view = EntryView {
            step: entry.step,
            kind: entry.kind,
            tag: entry.tag.clone(),
            length_class: None,
            from: None,
            to: None,
            payload: None,
        };
        match entry.kind {
            MessageKind::Mtar => {
                view.length_class = Some(length_class(entry.payload.len()));
                if let Some(r) = entry.receiver.filter(|r| viewers.contains(r)) {
                    view.to = Some(r);
                    view.payload = Some(render_payload(&entry.payload));
                }
            }
            MessageKind::Broadcast => view.payload = Some(render_payload(&entry.payload)),
            MessageKind::QuantumMetadata => {
                view.from = Some(entry.sender);
                view.to = entry.receiver;
            }
        }
        view
    }

    /// Entries as seen jointly by `viewers`. An empty viewer set sees nothing.
    pub fn view_for(&self, viewers: &BTreeSet<ParticipantId>) -> Vec<EntryView> {
        if viewers.is_empty() {
            return Vec::new();
        }
        self.entries.iter().map(|e| Self::view_entry(e, viewers)).collect()
    }

    /// The log as seen by a participant who receives none of the MTAR
    /// messages: every entry, payloads redacted per their visibility rule.
    pub fn public_view(&self) -> Vec<EntryView> {
        self.entries
            .iter()
            .map(|e| Self::view_entry(e, &BTreeSet::new()))
            .collect()
    }

    /// JSON-lines rendering of the public view, one entry per line.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for (entry, view) in self.entries.iter().zip(self.public_view()) {
            let line = JsonLine {
                step: view.step,
                kind: view.kind,
                tag: &view.tag,
                visibility: entry.kind.visibility(),
                length_class: view.length_class,
                from: view.from,
                to: view.to,
                payload: view.payload.as_deref().unwrap_or(REDACTED),
            };
            out.push_str(&serde_json::to_string(&line).expect("log line serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Serialize)]
struct JsonLine<'a> {
    step: u64,
    kind: MessageKind,
    tag: &'a str,
    visibility: Visibility,
    #[serde(skip_serializing_if = "Option::is_none")]
    length_class: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    from: Option<ParticipantId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    to: Option<ParticipantId>,
    payload: &'a str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InboxItem {
    pub step: u64,
    pub kind: MessageKind,
    pub tag: String,
    pub payload: Vec<u8>,
}

/// Lock-step network of `n` participants with ideal anonymous primitives.
#[derive(Debug, Clone)]
pub struct Network {
    participants: usize,
    step: u64,
    log: ChannelLog,
    inboxes: Vec<Vec<InboxItem>>,
    holders: HashMap<QubitHandle, ParticipantId>,
    next_handle: u64,
}

impl Network {
    pub fn new(participants: usize) -> Self {
        Self {
            participants,
            step: 0,
            log: ChannelLog::default(),
            inboxes: vec![Vec::new(); participants],
            holders: HashMap::new(),
            next_handle: 0,
        }
    }

    pub fn participants(&self) -> usize {
        self.participants
    }

    fn check(&self, p: ParticipantId) -> Result<(), ChannelError> {
        if p.0 >= self.participants {
            return Err(ChannelError::Routing(p));
        }
        Ok(())
    }

    fn record(&mut self, kind: MessageKind, tag: &str, sender: ParticipantId, receiver: Option<ParticipantId>, payload: Vec<u8>) -> Receipt {
        let step = self.step;
        self.step += 1;
        self.log.entries.push(LogEntry {
            step,
            kind,
            tag: tag.to_string(),
            sender,
            receiver,
            payload,
        });
        Receipt { step }
    }

    /// Message transfer with anonymous receiver. Only `receiver`'s inbox gets
    /// the payload; sender identity is revealed to no one.
    pub fn mtar_send(&mut self, sender: ParticipantId, receiver: ParticipantId, tag: &str, payload: Vec<u8>) -> Result<Receipt, ChannelError> {
        self.check(sender)?;
        self.check(receiver)?;
        let receipt = self.record(MessageKind::Mtar, tag, sender, Some(receiver), payload.clone());
        self.inboxes[receiver.0].push(InboxItem {
            step: receipt.step,
            kind: MessageKind::Mtar,
            tag: tag.to_string(),
            payload,
        });
        Ok(receipt)
    }

    /// Anonymous broadcast: every participant receives the payload.
    pub fn broadcast_anonymous(&mut self, sender: ParticipantId, tag: &str, payload: Vec<u8>) -> Result<Receipt, ChannelError> {
        self.check(sender)?;
        let receipt = self.record(MessageKind::Broadcast, tag, sender, None, payload.clone());
        for inbox in &mut self.inboxes {
            inbox.push(InboxItem {
                step: receipt.step,
                kind: MessageKind::Broadcast,
                tag: tag.to_string(),
                payload: payload.clone(),
            });
        }
        Ok(receipt)
    }

    /// Creates a fresh qubit handle held by `owner`.
    pub fn mint(&mut self, owner: ParticipantId) -> Result<QubitHandle, ChannelError> {
        self.check(owner)?;
        let handle = QubitHandle(self.next_handle);
        self.next_handle += 1;
        self.holders.insert(handle, owner);
        Ok(handle)
    }

    pub fn holder(&self, handle: QubitHandle) -> Option<ParticipantId> {
        self.holders.get(&handle).copied()
    }

    /// Moves a qubit over the authenticated channel `from → to`.
    pub fn qsend(&mut self, from: ParticipantId, to: ParticipantId, handle: QubitHandle, tag: &str) -> Result<Receipt, ChannelError> {
        self.check(from)?;
        self.check(to)?;
        if self.holder(handle) != Some(from) {
            return Err(ChannelError::Ownership { holder: from, handle });
        }
        self.holders.insert(handle, to);
        Ok(self.record(MessageKind::QuantumMetadata, tag, from, Some(to), Vec::new()))
    }

    /// Destroys a qubit (measured or discarded) held by `holder`.
    pub fn consume(&mut self, holder: ParticipantId, handle: QubitHandle) -> Result<(), ChannelError> {
        if self.holder(handle) != Some(holder) {
            return Err(ChannelError::Ownership { holder, handle });
        }
        self.holders.remove(&handle);
        Ok(())
    }

    pub fn held_by(&self, p: ParticipantId) -> Vec<QubitHandle> {
        let mut held: Vec<QubitHandle> = self
            .holders
            .iter()
            .filter(|(_, h)| **h == p)
            .map(|(q, _)| *q)
            .collect();
        held.sort();
        held
    }

    pub fn inbox(&self, p: ParticipantId) -> &[InboxItem] {
        &self.inboxes[p.0]
    }

    pub fn log(&self) -> &ChannelLog {
        &self.log
    }

    pub fn into_log(self) -> ChannelLog {
        self.log
    }
}
