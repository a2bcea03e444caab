use std::fmt;

use serde_json::json;

/// Exit code for malformed input or configuration.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for numeric, range and data-quality failures.
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    pub code: i32,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { kind: "config", message: message.into(), code: EXIT_CONFIG }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self { kind: "io", message: message.into(), code: EXIT_CONFIG }
    }

    pub fn to_json(&self) -> String {
        json!({ "schema": "1", "error": { "kind": self.kind, "message": self.message }, "exit_code": self.code })
            .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl From<cramer_core::Error> for CliError {
    fn from(e: cramer_core::Error) -> Self {
        use cramer_core::Error::*;
        let (kind, code) = match &e {
            Input(_) => ("input", EXIT_CONFIG),
            Capability(_) => ("capability", EXIT_CONFIG),
            Numeric(_) => ("numeric", EXIT_NUMERIC),
            DataQuality(_) => ("data_quality", EXIT_NUMERIC),
            Range(_) => ("range", EXIT_NUMERIC),
        };
        let message = match e {
            Input(m) | Capability(m) | Numeric(m) | DataQuality(m) | Range(m) => m,
        };
        Self { kind, message, code }
    }
}
