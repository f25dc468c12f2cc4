use std::process::ExitCode;

use polarq_core::Error;

/// Why a command stopped, which also fixes its exit status.
#[derive(Debug)]
pub enum Failure {
    /// An invariant did not hold; the instance is printed as JSON.
    Violation {
        message: String,
        instance: serde_json::Value,
    },
    /// Bad flags, channel specs or configurations.
    Usage(anyhow::Error),
    /// The request is valid but beyond the scale this tool will run.
    Refused(anyhow::Error),
    /// Anything else, typically I/O.
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn refused(err: anyhow::Error) -> Self {
        Failure::Refused(err)
    }

    pub fn violation(message: impl Into<String>, instance: serde_json::Value) -> Self {
        Failure::Violation {
            message: message.into(),
            instance,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Violation { .. } | Failure::Runtime(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Refused(_) => 3,
        }
    }

    pub fn report(self) -> ExitCode {
        let code = self.exit_code();
        match self {
            Failure::Violation { message, instance } => {
                eprintln!("violation: {message}");
                println!(
                    "{}",
                    serde_json::to_string_pretty(&instance)
                        .unwrap_or_else(|_| instance.to_string())
                );
            }
            Failure::Usage(err) | Failure::Refused(err) | Failure::Runtime(err) => {
                eprintln!("error: {err:#}");
            }
        }
        ExitCode::from(code)
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        match err {
            Error::AlphabetOverflow { .. }
            | Error::BlowupRefused { .. }
            | Error::DepthRefused { .. } => Failure::Refused(err.into()),
            _ => Failure::Usage(err.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        Failure::Runtime(err)
    }
}
