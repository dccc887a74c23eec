use std::io::Write;

use crate::error::Result;
use crate::rates::Scheme;

/// One band of one slot. Users and bands are written 1-based; an idle band
/// has user `-`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub trial: u64,
    pub slot: u32,
    pub band: usize,
    pub user: Option<usize>,
    pub scheme: Scheme,
    /// Users that have decoded by the end of the slot.
    pub decoded_users: Vec<usize>,
    /// Users that have not (still retransmitting, or in outage).
    pub failed_users: Vec<usize>,
}

pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub const HEADER: &'static str = "trial,slot,band,user,scheme,decoded_users,failed_users";

    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{}", Self::HEADER)?;
        Ok(Self { out })
    }

    pub fn write(&mut self, r: &TraceRecord) -> Result<()> {
        let user = r.user.map_or_else(|| "-".to_string(), |u| (u + 1).to_string());
        writeln!(
            self.out,
            "{},{},{},{},{},{},{}",
            r.trial,
            r.slot,
            r.band + 1,
            user,
            r.scheme,
            join(&r.decoded_users),
            join(&r.failed_users)
        )?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

fn join(users: &[usize]) -> String {
    users
        .iter()
        .map(|u| (u + 1).to_string())
        .collect::<Vec<_>>()
        .join(";")
}
