use genfrac::Error;

/// Exit status 2 for bad input, 3 for numerical failure.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical { kind: &'static str, message: String },
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError::Validation(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical { .. } => 3,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            CliError::Validation(message) => serde_json::json!({
                "error": "validation",
                "message": message,
            }),
            CliError::Numerical { kind, message } => serde_json::json!({
                "error": "numerical",
                "kind": kind,
                "message": message,
            }),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        let kind = match &e {
            Error::Domain(_) | Error::Precondition(_) | Error::GridMismatch(_) => return CliError::Validation(message),
            Error::KernelEvaluation { .. } => "kernel_evaluation",
            Error::NonFinite { .. } => "non_finite",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::NonConvergence { .. } => "non_convergence",
            Error::SingularJacobian(_) => "singular_jacobian",
        };
        CliError::Numerical { kind, message }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("cannot write output: {e}"))
    }
}
