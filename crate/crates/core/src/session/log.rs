//! Input logs and scenario files.
//!
//! JSON lines: a header, one line per inbound message with the tick it was
//! ingested before, and an end marker with the total tick count.
//!
//! ```text
//! {"format":"uvms-input-log","v":1}
//! {"tick":0,"msg":{"v":1,"type":"mode_query"}}
//! {"end_tick":500}
//! ```

use std::io::Write;

use serde_json::{json, Value};
use thiserror::Error;

use super::protocol::InboundMessage;

pub const LOG_FORMAT: &str = "uvms-input-log";
pub const LOG_VERSION: u64 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogError {
    #[error("corrupt log at line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },
    #[error("log version {found} is not supported (expected {LOG_VERSION})")]
    VersionMismatch { found: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogEntry {
    pub tick: u64,
    pub msg: InboundMessage,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InputLog {
    /// Non-decreasing in tick.
    pub entries: Vec<LogEntry>,
    /// Ticks the recorded session ran for.
    pub end_tick: u64,
}

fn header_line() -> String {
    json!({"format": LOG_FORMAT, "v": LOG_VERSION}).to_string()
}

fn entry_line(tick: u64, msg: &InboundMessage) -> String {
    json!({"tick": tick, "msg": msg.to_value()}).to_string()
}

fn end_line(end_tick: u64) -> String {
    json!({ "end_tick": end_tick }).to_string()
}

impl InputLog {
    pub fn parse(text: &str) -> Result<Self, LogError> {
        let corrupt = |line: usize, reason: &str| LogError::CorruptLog {
            line,
            reason: reason.to_string(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

        let (n, first) = lines.next().ok_or_else(|| corrupt(1, "empty file"))?;
        let head: Value = serde_json::from_str(first).map_err(|e| corrupt(n, &e.to_string()))?;
        if head.get("format").and_then(Value::as_str) != Some(LOG_FORMAT) {
            return Err(corrupt(n, "missing log header"));
        }
        let found = head
            .get("v")
            .and_then(Value::as_u64)
            .ok_or_else(|| corrupt(n, "header has no version"))?;
        if found != LOG_VERSION {
            return Err(LogError::VersionMismatch { found });
        }

        let mut entries = Vec::new();
        let mut last_line = n;
        for (n, line) in lines {
            last_line = n;
            let v: Value = serde_json::from_str(line).map_err(|e| corrupt(n, &e.to_string()))?;
            if let Some(end) = v.get("end_tick") {
                let end_tick = end.as_u64().ok_or_else(|| corrupt(n, "bad end_tick"))?;
                if entries.last().is_some_and(|e: &LogEntry| e.tick >= end_tick) {
                    return Err(corrupt(n, "entries after the end tick"));
                }
                if n != text.lines().count() {
                    return Err(corrupt(n + 1, "content after the end marker"));
                }
                return Ok(Self { entries, end_tick });
            }
            let tick = v
                .get("tick")
                .and_then(Value::as_u64)
                .ok_or_else(|| corrupt(n, "missing tick"))?;
            if entries.last().is_some_and(|e: &LogEntry| e.tick > tick) {
                return Err(corrupt(n, "tick went backwards"));
            }
            let msg = v.get("msg").ok_or_else(|| corrupt(n, "missing msg"))?;
            let msg = InboundMessage::parse(&msg.to_string()).map_err(|e| corrupt(n, &e.to_string()))?;
            entries.push(LogEntry { tick, msg });
        }
        Err(corrupt(last_line + 1, "missing end marker (truncated log)"))
    }

    pub fn to_text(&self) -> String {
        let mut out = header_line();
        out.push('\n');
        for e in &self.entries {
            out.push_str(&entry_line(e.tick, &e.msg));
            out.push('\n');
        }
        out.push_str(&end_line(self.end_tick));
        out.push('\n');
        out
    }

    /// Entries grouped by tick, in order.
    pub fn at_tick(&self, tick: u64) -> impl Iterator<Item = &InboundMessage> {
        let start = self.entries.partition_point(|e| e.tick < tick);
        self.entries[start..]
            .iter()
            .take_while(move |e| e.tick == tick)
            .map(|e| &e.msg)
    }
}

/// Streams a log to disk while a session runs.
pub struct LogWriter<W: Write> {
    sink: W,
}

impl<W: Write> LogWriter<W> {
    pub fn new(mut sink: W) -> std::io::Result<Self> {
        writeln!(sink, "{}", header_line())?;
        Ok(Self { sink })
    }

    pub fn entry(&mut self, tick: u64, msg: &InboundMessage) -> std::io::Result<()> {
        writeln!(self.sink, "{}", entry_line(tick, msg))
    }

    pub fn finish(mut self, end_tick: u64) -> std::io::Result<W> {
        writeln!(self.sink, "{}", end_line(end_tick))?;
        self.sink.flush()?;
        Ok(self.sink)
    }
}
