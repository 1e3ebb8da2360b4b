use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error("response column `{0}` not found in header")]
    MissingColumn(String),
    #[error("missing value at row {row}, column {column}")]
    MissingValue { row: usize, column: String },
    #[error("non-numeric value `{value}` at row {row}, column {column}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("invalid argument: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] addsel::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
