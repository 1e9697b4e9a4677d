//! Payload encodings. Messages carried by MTAR name their author inside the
//! payload, since the primitive itself hides the sender from everyone,
//! receiver included. Reports use one fixed-width slot per distributor so all
//! of them (and the sender's dummy) have the same length.

use crate::channels::ParticipantId;
use crate::qsim::DualOutcome;

use super::Mode;

pub const MODE_REPORT: &str = "mode-report";
pub const OUTCOME_REPORT: &str = "outcome-report";
pub const TRAP_LIST: &str = "trap-list";
pub const DISAGREEMENTS: &str = "disagreements";
pub const DISTRIBUTE: &str = "distribute";
pub const TELEPORT_BITS: &str = "teleport-bits";

const DUMMY_AUTHOR: &str = "~~";

fn slot(outcome: Option<DualOutcome>) -> char {
    match outcome {
        Some(DualOutcome::Plus) => '+',
        Some(DualOutcome::Minus) => '-',
        None => '.',
    }
}

fn unslot(c: char) -> Option<DualOutcome> {
    match c {
        '+' => Some(DualOutcome::Plus),
        '-' => Some(DualOutcome::Minus),
        _ => None,
    }
}

fn split_author(payload: &[u8]) -> Option<(&str, &str)> {
    let text = std::str::from_utf8(payload).ok()?;
    text.split_once(':')
}

pub fn encode_mode(author: ParticipantId, mode: Mode) -> Vec<u8> {
    let m = match mode {
        Mode::Actual => 'A',
        Mode::Trap => 'T',
    };
    format!("{:02}:{m}", author.0).into_bytes()
}

pub fn decode_mode(payload: &[u8]) -> Option<(ParticipantId, Mode)> {
    let (author, body) = split_author(payload)?;
    let mode = match body {
        "A" => Mode::Actual,
        "T" => Mode::Trap,
        _ => return None,
    };
    Some((ParticipantId(author.parse().ok()?), mode))
}

/// `slots[i]` is the outcome on the system from distributor `i`.
pub fn encode_outcomes(author: ParticipantId, slots: &[Option<DualOutcome>]) -> Vec<u8> {
    let body: String = slots.iter().map(|o| slot(*o)).collect();
    format!("{:02}:{body}", author.0).into_bytes()
}

/// Dummy report of the same length as a real one with `width` slots.
pub fn encode_dummy(bit: bool, width: usize) -> Vec<u8> {
    let mut body = String::with_capacity(width);
    body.push(if bit { '1' } else { '0' });
    body.extend(std::iter::repeat_n('.', width.saturating_sub(1)));
    format!("{DUMMY_AUTHOR}:{body}").into_bytes()
}

/// `None` for a dummy or malformed payload.
pub fn decode_outcomes(payload: &[u8]) -> Option<(ParticipantId, Vec<Option<DualOutcome>>)> {
    let (author, body) = split_author(payload)?;
    if author == DUMMY_AUTHOR {
        return None;
    }
    Some((ParticipantId(author.parse().ok()?), body.chars().map(unslot).collect()))
}

pub fn encode_trap_list(author: ParticipantId, slots: &[Option<DualOutcome>]) -> Vec<u8> {
    encode_outcomes(author, slots)
}

pub fn decode_trap_list(payload: &[u8]) -> Option<(ParticipantId, Vec<Option<DualOutcome>>)> {
    decode_outcomes(payload)
}

pub fn encode_disagreements(list: &[(ParticipantId, ParticipantId)]) -> Vec<u8> {
    list.iter()
        .map(|(d, m)| format!("{}>{}", d.0, m.0))
        .collect::<Vec<_>>()
        .join(";")
        .into_bytes()
}

pub fn decode_disagreements(payload: &[u8]) -> Option<Vec<(ParticipantId, ParticipantId)>> {
    let text = std::str::from_utf8(payload).ok()?;
    if text.is_empty() {
        return Some(Vec::new());
    }
    text.split(';')
        .map(|pair| {
            let (d, m) = pair.split_once('>')?;
            Some((ParticipantId(d.parse().ok()?), ParticipantId(m.parse().ok()?)))
        })
        .collect()
}

pub fn encode_bits(bx: u8, bz: u8) -> Vec<u8> {
    format!("{bx}{bz}").into_bytes()
}

pub fn decode_bits(payload: &[u8]) -> Option<(u8, u8)> {
    match payload {
        [x @ (b'0' | b'1'), z @ (b'0' | b'1')] => Some((x - b'0', z - b'0')),
        _ => None,
    }
}
