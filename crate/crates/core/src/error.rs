use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("a typology needs at least 2 categories, got {0}")]
    TooFewCategories(usize),

    #[error("a model needs at least 2 classes, got {0}")]
    TooFewClasses(usize),

    #[error("empty label")]
    EmptyLabel,

    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("concentration parameter {index} must be finite and > 0, got {value}")]
    NonPositiveConcentration { index: usize, value: f64 },

    #[error("vector is not on the probability simplex (sum = {sum}, tolerance 1e-12)")]
    NotInSimplex { sum: f64 },

    #[error("component {index} is not a probability: {value}")]
    InvalidProbability { index: usize, value: f64 },

    #[error("density is infinite at the boundary: theta[{index}] = 0 with alpha = {alpha} < 1")]
    InfiniteDensity { index: usize, alpha: f64 },

    #[error("category index {index} out of range for {len} categories")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("model has no classes")]
    EmptyModel,

    #[error("query has zero total count: no evidence to classify")]
    NoEvidence,

    #[error("every class has prior probability 0")]
    AllPriorsZero,

    #[error("class prior must sum to 1 (sum = {0})")]
    PriorNotNormalized(f64),

    #[error("unknown class `{0}`")]
    UnknownClass(String),

    #[error("empty label list")]
    EmptyLabelList,

    #[error("the {family} prior has no proper Dirichlet form for class `{class}`, category `{category}` (zero count)")]
    ImproperPosterior {
        family: &'static str,
        class: String,
        category: String,
    },

    #[error("the {0} prior is improper and cannot be used as a Dirichlet")]
    ImproperPrior(&'static str),

    #[error("count underflow: cannot remove {removed} from {available} in category {index}")]
    CountUnderflow {
        index: usize,
        available: u64,
        removed: u64,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported model format version `{0}`")]
    UnsupportedVersion(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
