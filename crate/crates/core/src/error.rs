use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("rank-deficient design; offending columns: {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("parse error at data row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("empty dataset: all {dropped} rows were dropped")]
    EmptyDataset { dropped: usize },

    #[error("degenerate treatment `{0}`: column is constant")]
    DegenerateTreatment(String),

    #[error("degenerate outcome: outcome is constant")]
    DegenerateOutcome,

    #[error("weak instrument: treatment is explained by the controls (mean instrument square {mean_z2:e})")]
    WeakInstrument { mean_z2: f64 },

    #[error("degenerate moment: score denominator vanished")]
    DegenerateMoment,

    #[error("treatment `{treatment}`: {source}")]
    Treatment {
        treatment: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("structured text error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("structured text serialization error: {0}")]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Rewrites positional column labels (`col 3`) of a rank error using `names`.
    pub(crate) fn rename_rank_columns(self, names: &[String]) -> Self {
        match self {
            Error::RankDeficient { columns } => Error::RankDeficient {
                columns: columns
                    .into_iter()
                    .map(|c| {
                        c.strip_prefix("col ")
                            .and_then(|i| i.parse::<usize>().ok())
                            .and_then(|i| names.get(i).cloned())
                            .unwrap_or(c)
                    })
                    .collect(),
            },
            other => other,
        }
    }
}
