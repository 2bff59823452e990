use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no entities in input")]
    NoEntities,

    #[error("region needs at least 2 entities, found {0}")]
    TooFewEntities(usize),

    #[error("time axis needs at least 3 points, found {0}")]
    TooFewTimePoints(usize),

    #[error("time axis must be strictly increasing (at index {index})")]
    UnorderedTime { index: usize },

    #[error("missing observations: {}", format_cells(.0))]
    MissingCells(Vec<(String, String)>),

    #[error("duplicate observation for entity `{entity}` at time `{time}`")]
    DuplicateCell { entity: String, time: String },

    #[error("entity `{entity}`: {message}")]
    Entity { entity: String, message: String },

    #[error("built-up area of entity `{entity}` must be positive, got {value}")]
    NonPositiveBuiltArea { entity: String, value: f64 },

    #[error("series `{entity}` has {found} values but the time axis has {expected}")]
    LengthMismatch {
        entity: String,
        expected: usize,
        found: usize,
    },

    #[error("cannot parse time value `{0}` as a date or a number")]
    BadTime(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("no curve family could be fitted for entity `{0}`")]
    NoFit(String),

    #[error("non-finite curve value at t = {0}")]
    NonFinite(f64),

    #[error("split time {split} lies outside the open interval ({start}, {end})")]
    SplitOutOfDomain { split: f64, start: f64, end: f64 },

    #[error("profile is infeasible ({0}) and cannot be classified")]
    InfeasibleProfile(String),

    #[error("{0}")]
    InsufficientData(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("required file `{0}` does not exist")]
    MissingFile(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_cells(cells: &[(String, String)]) -> String {
    const SHOWN: usize = 10;
    let mut out = cells
        .iter()
        .take(SHOWN)
        .map(|(e, t)| format!("({e}, {t})"))
        .collect::<Vec<_>>()
        .join(", ");
    if cells.len() > SHOWN {
        out.push_str(&format!(" and {} more", cells.len() - SHOWN));
    }
    out
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
