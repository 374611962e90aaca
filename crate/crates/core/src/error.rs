use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("non-physical state (rho = {rho:e}, p = {p:e}){}", location_suffix(.location))]
    NonPhysicalState {
        rho: f64,
        p: f64,
        location: Option<String>,
    },

    #[error("level mismatch: have level {have}, need {need}")]
    LevelMismatch { have: u32, need: u32 },

    #[error("bad domain for case {case}: {reason}")]
    BadDomain { case: String, reason: String },

    #[error("proper nesting violated at level {level}")]
    NestingViolation { level: usize },

    #[error("no bracketing coarse states for time {t} on level {level}")]
    MissingBracketingStates { level: usize, t: f64 },

    #[error("level time mismatch: fine at {fine}, coarse at {coarse}")]
    TimeMismatch { fine: f64, coarse: f64 },

    #[error("flux register on level {level} has no matching coarse face for cell {cell:?}")]
    RegisterMismatch { level: usize, cell: [i64; 3] },

    #[error("division by zero in rate computation: {0}")]
    DivisionDomain(&'static str),

    #[error("timer for group {0} stopped without being started")]
    UnbalancedTimer(&'static str),

    #[error("reference cache corrupt: {0}")]
    CacheCorrupt(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("snapshot format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

fn location_suffix(location: &Option<String>) -> String {
    match location {
        Some(l) => format!(" at {l}"),
        None => String::new(),
    }
}

impl SolverError {
    /// Prefix the location of a `NonPhysicalState` with more context; other
    /// variants pass through.
    pub fn at(self, where_: impl FnOnce() -> String) -> Self {
        match self {
            SolverError::NonPhysicalState { rho, p, location } => {
                let outer = where_();
                let location = Some(match location {
                    Some(inner) => format!("{outer}, {inner}"),
                    None => outer,
                });
                SolverError::NonPhysicalState { rho, p, location }
            }
            other => other,
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, SolverError::NonPhysicalState { .. })
    }
}

impl From<std::io::Error> for SolverError {
    fn from(e: std::io::Error) -> Self {
        SolverError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SolverError>;
