use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("satellite and user positions coincide")]
    CoincidentPositions,

    #[error("satellite {sat} is not visible from user {user} at t = {time} s")]
    NotVisible { user: usize, sat: usize, time: f64 },

    #[error("satellite {0} is not a member of the serving cluster")]
    NotAMember(usize),

    #[error("user {0} has no visible satellite willing to serve it")]
    NoCoverage(usize),

    #[error("user {0} already holds a pilot")]
    PilotAlreadyAssigned(usize),

    #[error("user {0} has no pilot assigned")]
    NoPilot(usize),

    #[error("estimator covariance is singular")]
    SingularCovariance,

    #[error("empty sample set")]
    EmptySamples,

    #[error("configuration error:\n{0}")]
    Config(ConfigErrors),

    #[error("malformed result file, line {line}: {message}")]
    ResultFormat { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One validation failure, tied to a dotted config path such as `radio.rician_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigErrors(pub Vec<FieldError>);

impl ConfigErrors {
    pub fn push(&mut self, field: &str, message: impl Into<String>) {
        self.0.push(FieldError {
            field: field.to_string(),
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn fields(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|e| e.field.as_str())
    }
}

impl std::fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for e in &self.0 {
            writeln!(f, "  {}: {}", e.field, e.message)?;
        }
        Ok(())
    }
}
