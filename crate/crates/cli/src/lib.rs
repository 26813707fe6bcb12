//! Entry points for the `uvms` binary: headless scenario runs, log replay,
//! telemetry analysis, and the WebSocket session server.

pub mod commands;
pub mod server;

use std::fmt;

/// Exit status for a bad config, log, or telemetry file.
pub const EXIT_BAD_INPUT: u8 = 2;
/// Exit status when a scenario step raised a flag.
pub const EXIT_FLAGGED: u8 = 3;

#[derive(Debug)]
pub enum Failure {
    BadInput(anyhow::Error),
    Flagged(String),
    Internal(anyhow::Error),
}

impl Failure {
    pub fn bad_input<E: std::error::Error + Send + Sync + 'static>(e: E) -> Self {
        Failure::BadInput(e.into())
    }

    pub fn internal<E: std::error::Error + Send + Sync + 'static>(e: E) -> Self {
        Failure::Internal(e.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::BadInput(_) => EXIT_BAD_INPUT,
            Failure::Flagged(_) => EXIT_FLAGGED,
            Failure::Internal(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::BadInput(e) | Failure::Internal(e) => write!(f, "{e:#}"),
            Failure::Flagged(m) => f.write_str(m),
        }
    }
}
