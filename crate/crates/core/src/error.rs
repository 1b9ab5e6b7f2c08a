use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time {t} outside [0, {horizon}]")]
    Domain { t: f64, horizon: f64 },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid path: {0}")]
    Path(String),

    #[error("path mode: {0}")]
    Mode(String),

    #[error("dimension mismatch: {0}")]
    Dim(String),

    #[error("invalid measure: {0}")]
    Measure(String),

    #[error("frozen key: {0}")]
    Key(String),

    #[error("CFL bound violated: dt = {dt:.3e} exceeds {limit:.3e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("monotonicity: {0}")]
    Monotonicity(String),

    #[error("policy iteration did not converge after {0} sweeps")]
    PolicyIteration(usize),

    #[error("grid level with {n} slabs is too deep for the nested recursion (max {max})")]
    LevelTooDeep { n: usize, max: usize },

    #[error("summary structure: {0}")]
    Summary(String),

    #[error("rank-deficient regression at step {step}: {detail}")]
    RankDeficient { step: usize, detail: String },

    #[error("{assignments} control assignments exceed the budget {budget}; diffusion is controlled, use the slab PDE backend")]
    ControlBudget { assignments: usize, budget: usize },

    #[error("missing metadata: {0}")]
    Metadata(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("backend: {0}")]
    Backend(String),

    #[error("config field `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }
}
