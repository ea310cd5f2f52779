use std::path::PathBuf;

use thiserror::Error;
use weilkit_core::smooth_expr::parse;

/// Failures of the command-line layer.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed JSON in {path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    /// An expression failed to parse; `source_text` is kept for the caret display.
    #[error("{}", render_expr_error(.source_text, .error))]
    Expr { source_text: String, error: weilkit_core::Error },
    #[error(transparent)]
    Core(#[from] weilkit_core::Error),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io_error",
            CliError::Json { .. } => "json_error",
            CliError::Usage(_) => "usage_error",
            CliError::Input(_) => "invalid_input",
            CliError::Expr { error, .. } | CliError::Core(error) => error.code(),
            CliError::Invariant(_) => "invariant_violation",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invariant(_) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Parses an expression, keeping the text for error display.
pub fn parse_expr(src: &str) -> CliResult<weilkit_core::Expr> {
    parse(src).map_err(|error| CliError::Expr { source_text: src.to_string(), error })
}

fn render_expr_error(src: &str, err: &weilkit_core::Error) -> String {
    let position = match err {
        weilkit_core::Error::Syntax { position, .. } | weilkit_core::Error::UnknownFunction { position, .. } => {
            Some(*position)
        }
        _ => None,
    };
    match position {
        Some(p) => {
            let col = src.get(..p.min(src.len())).map_or(p, |s| s.chars().count());
            format!("{err}\n  {src}\n  {}^", " ".repeat(col))
        }
        None => format!("{err} in `{src}`"),
    }
}
