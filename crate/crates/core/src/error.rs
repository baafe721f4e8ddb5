use crate::series::YearMonth;

/// Errors returned by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A month is missing from an otherwise contiguous dataset.
    #[error("missing month {missing} in input data")]
    Gap { missing: YearMonth },

    /// The same month appears more than once in the input.
    #[error("duplicate month {date} in input data")]
    Duplicate { date: YearMonth },

    /// A cell could not be parsed as a finite number (or a malformed date).
    #[error("cannot parse {content:?} at data row {row}, column {column:?}")]
    Parse {
        row: usize,
        column: String,
        content: String,
    },

    /// Fewer observations than the operation requires.
    #[error("insufficient data: {actual} rows, need at least {required}")]
    InsufficientData { actual: usize, required: usize },

    /// A requested month range falls outside the available data.
    #[error("range {from}..={to} outside available {start}..={end}")]
    Range {
        from: YearMonth,
        to: YearMonth,
        start: YearMonth,
        end: YearMonth,
    },

    /// Series that must share start and length do not.
    #[error("misaligned series: {details}")]
    Alignment { details: String },

    /// Input with no usable variation (constant series, all-zero differences).
    #[error("degenerate input: {details}")]
    DegenerateInput { details: String },

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },

    /// Invalid configuration or arguments.
    #[error("invalid configuration: {details}")]
    Config { details: String },

    /// A prediction row lacks a feature the model requires.
    #[error("missing feature {name:?} in prediction input")]
    MissingFeature { name: String },

    /// A metric denominator is zero.
    #[error("division by zero at index {index}")]
    DivisionByZero { index: usize },

    /// A pipeline stage failed; wraps the underlying error with the stage name.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(details: impl Into<String>) -> Self {
        Error::Config {
            details: details.into(),
        }
    }

    pub(crate) fn alignment(details: impl Into<String>) -> Self {
        Error::Alignment {
            details: details.into(),
        }
    }

    pub(crate) fn degenerate(details: impl Into<String>) -> Self {
        Error::DegenerateInput {
            details: details.into(),
        }
    }

    pub(crate) fn in_stage(stage: &'static str) -> impl Fn(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }
}
