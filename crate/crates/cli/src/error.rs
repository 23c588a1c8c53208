use serde_json::json;

/// Exit status plus a machine-readable error line for stderr.
#[derive(Debug)]
pub struct CliError {
    pub exit: u8,
    pub code: &'static str,
    pub message: String,
}

pub const EXIT_DOMAIN: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

impl CliError {
    pub fn domain(code: &'static str, message: impl Into<String>) -> CliError {
        CliError { exit: EXIT_DOMAIN, code, message: message.into() }
    }

    pub fn usage(code: &'static str, message: impl Into<String>) -> CliError {
        CliError { exit: EXIT_USAGE, code, message: message.into() }
    }

    pub fn json_line(&self) -> String {
        json!({ "error": { "code": self.code, "message": self.message } }).to_string()
    }
}

impl From<lessonforge_core::store::StoreError> for CliError {
    fn from(e: lessonforge_core::store::StoreError) -> CliError {
        use lessonforge_core::store::StoreError::*;
        let code = match &e {
            NotFound { .. } => "not_found",
            InvalidId(_) => "invalid_id",
            Locked(_) => "run_in_flight",
            _ => "store_error",
        };
        let exit = if matches!(e, InvalidId(_)) { EXIT_USAGE } else { EXIT_DOMAIN };
        CliError { exit, code, message: e.to_string() }
    }
}
