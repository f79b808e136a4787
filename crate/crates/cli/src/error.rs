use std::fmt;
use std::path::Path;

use qmem_core::ErrorKind;
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MODEL: i32 = 3;
pub const EXIT_OPTIMIZER: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Core(qmem_core::Error),
}

impl CliError {
    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Input => EXIT_CONFIG,
                ErrorKind::Model => EXIT_MODEL,
                ErrorKind::Optimizer => EXIT_OPTIMIZER,
            },
        }
    }

    fn category(&self) -> &'static str {
        match self.exit_code() {
            EXIT_MODEL => "model",
            EXIT_OPTIMIZER => "optimizer",
            _ => "config",
        }
    }

    /// `{"error": {"kind", "exit_code", "message", "details"}}`.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            exit_code: i32,
            message: String,
            details: Vec<String>,
        }
        #[derive(Serialize)]
        struct Wrapper<'a> {
            error: Body<'a>,
        }
        let details = match self {
            CliError::Core(qmem_core::Error::InvalidSchedule(v)) => v.clone(),
            _ => Vec::new(),
        };
        let body = Body { kind: self.category(), exit_code: self.exit_code(), message: self.to_string(), details };
        serde_json::to_string(&Wrapper { error: body }).unwrap_or_else(|_| "{\"error\":{}}".into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<qmem_core::Error> for CliError {
    fn from(e: qmem_core::Error) -> Self {
        CliError::Core(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Core(qmem_core::Error::Infeasible("x".into())).exit_code(), 3);
        assert_eq!(CliError::Core(qmem_core::Error::Optimizer("x".into())).exit_code(), 4);
        let json: serde_json::Value = serde_json::from_str(&CliError::Config("bad".into()).to_json()).unwrap();
        assert_eq!(json["error"]["exit_code"], 2);
    }
}
