//! Slot-level event labels such as `A1!B2` (user A decoded in round 1, user
//! B has not decoded by round 2).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::PacketOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UserEvent {
    /// Decoded in the given round.
    Decoded(u32),
    /// Still undecoded at the end of the given round.
    Pending(u32),
}

/// One user event per user, in user order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventLabel(pub Vec<UserEvent>);

const MAX_LABEL_USERS: usize = 8;
const MAX_LABEL_ROUND: u32 = 127;

impl EventLabel {
    /// State of every user at the end of `slot` (1-based) of a packet.
    pub fn at_slot(outcome: &PacketOutcome, slot: u32) -> Self {
        EventLabel(
            outcome
                .decode_round
                .iter()
                .map(|d| match d {
                    Some(r) if *r <= slot => UserEvent::Decoded(*r),
                    _ => UserEvent::Pending(slot),
                })
                .collect(),
        )
    }

    /// Same as `at_slot(outcome, slot).code()` without building the label.
    pub fn code_at_slot(outcome: &PacketOutcome, slot: u32) -> u64 {
        outcome.decode_round.iter().enumerate().fold(0u64, |acc, (i, d)| {
            let byte = match d {
                Some(r) if *r <= slot => 0x80 | u64::from((*r).min(MAX_LABEL_ROUND)),
                _ => u64::from(slot.min(MAX_LABEL_ROUND)),
            };
            acc | (byte << (8 * i))
        })
    }

    /// State at the last slot of the packet.
    pub fn terminal(outcome: &PacketOutcome) -> Self {
        Self::at_slot(outcome, outcome.slots_consumed)
    }

    /// One label per slot the packet occupied.
    pub fn slot_events(outcome: &PacketOutcome) -> impl Iterator<Item = EventLabel> + '_ {
        (1..=outcome.slots_consumed).map(move |s| Self::at_slot(outcome, s))
    }

    pub fn users(&self) -> usize {
        self.0.len()
    }

    /// Dense integer key, valid for up to 8 users and 127 rounds.
    pub fn code(&self) -> u64 {
        debug_assert!(self.0.len() <= MAX_LABEL_USERS);
        self.0.iter().enumerate().fold(0u64, |acc, (i, e)| {
            let byte = match *e {
                UserEvent::Decoded(r) => 0x80 | u64::from(r.min(MAX_LABEL_ROUND)),
                UserEvent::Pending(r) => u64::from(r.min(MAX_LABEL_ROUND)),
            };
            acc | (byte << (8 * i))
        })
    }

    pub fn from_code(code: u64, users: usize) -> Self {
        EventLabel(
            (0..users)
                .map(|i| {
                    let byte = (code >> (8 * i)) & 0xff;
                    let round = (byte & 0x7f) as u32;
                    if byte & 0x80 != 0 {
                        UserEvent::Decoded(round)
                    } else {
                        UserEvent::Pending(round)
                    }
                })
                .collect(),
        )
    }

    /// Slot at which this event happens: the largest round mentioned.
    pub fn slot(&self) -> u32 {
        self.0
            .iter()
            .map(|e| match *e {
                UserEvent::Decoded(r) | UserEvent::Pending(r) => r,
            })
            .max()
            .unwrap_or(0)
    }

    /// True when the packet necessarily ends at this event.
    pub fn is_terminal(&self, max_rounds: u32) -> bool {
        self.0.iter().all(|e| match *e {
            UserEvent::Decoded(_) => true,
            UserEvent::Pending(r) => r == max_rounds,
        })
    }
}

pub(crate) fn user_letter(user: usize) -> char {
    (b'A' + (user % 26) as u8) as char
}

impl fmt::Display for EventLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            match *e {
                UserEvent::Decoded(r) => write!(f, "{}{r}", user_letter(i))?,
                UserEvent::Pending(r) => write!(f, "!{}{r}", user_letter(i))?,
            }
        }
        Ok(())
    }
}

impl FromStr for EventLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config(format!("malformed event label `{s}`"));
        let mut events = Vec::new();
        let mut chars = s.chars().peekable();
        while chars.peek().is_some() {
            let pending = chars.next_if_eq(&'!').is_some();
            let letter = chars.next().ok_or_else(bad)?;
            if letter != user_letter(events.len()) {
                return Err(bad());
            }
            let mut digits = String::new();
            while let Some(d) = chars.next_if(|c| c.is_ascii_digit()) {
                digits.push(d);
            }
            let round: u32 = digits.parse().map_err(|_| bad())?;
            if round == 0 {
                return Err(bad());
            }
            events.push(if pending {
                UserEvent::Pending(round)
            } else {
                UserEvent::Decoded(round)
            });
        }
        if events.is_empty() {
            return Err(bad());
        }
        Ok(EventLabel(events))
    }
}
