use serde::Serialize;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Bad flags, config values or missing input paths.
    Validation,
    /// A required artifact is missing or was changed after it was produced.
    StaleInput,
    /// Another process holds the output directory.
    Locked,
    /// The stage itself failed.
    Stage,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Validation => 1,
            ErrorKind::StaleInput | ErrorKind::Locked | ErrorKind::Stage => 2,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub stage: Option<String>,
    pub source: anyhow::Error,
}

impl CliError {
    pub fn new(kind: ErrorKind, stage: Option<&str>, source: impl Into<anyhow::Error>) -> Self {
        CliError { kind, stage: stage.map(str::to_string), source: source.into() }
    }

    pub fn validation(msg: impl fmt::Display) -> Self {
        CliError::new(ErrorKind::Validation, None, anyhow::anyhow!("{msg}"))
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    /// One-line JSON record for stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            kind: ErrorKind,
            stage: Option<&'a str>,
            message: String,
            exit_code: i32,
        }
        let record = Record {
            kind: self.kind,
            stage: self.stage.as_deref(),
            message: format!("{:#}", self.source),
            exit_code: self.exit_code(),
        };
        serde_json::to_string(&serde_json::json!({ "error": record })).expect("error record serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.stage {
            Some(s) => write!(f, "{s}: {:#}", self.source),
            None => write!(f, "{:#}", self.source),
        }
    }
}

impl std::error::Error for CliError {}
