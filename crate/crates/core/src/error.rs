use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no quotients")]
    NoQuotients,
    #[error("invalid quotient at index {0}: partial quotients past a_0 must be positive")]
    InvalidQuotient(usize),
    #[error("schedule overflow: last valid level is {last_valid}")]
    ScheduleOverflow { last_valid: usize },
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("exact level required: level {0} is not available exactly")]
    ExactLevelRequired(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("insufficient span: N = {n} but at least {required} sites are needed")]
    InsufficientSpan { n: usize, required: usize },
    #[error("singular small divisor at nu = {0}")]
    SingularDivisor(i64),
    #[error("small divisor vanishes at order {order}, nu = {nu}")]
    DivisorVanishes { order: usize, nu: i64 },
    #[error("resonance factor singular at the localization point")]
    SingularLocalization,
    #[error("resonance family beyond the desk budget: k_V = {k}, l_V = {l} (limits 4 and 2)")]
    FamilyBudget { k: usize, l: usize },
    #[error("minimizer did not converge: {0}")]
    NotConverged(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
