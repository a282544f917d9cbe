use thiserror::Error;

/// Command failure mapped onto the stable exit statuses.
#[derive(Debug, Error)]
pub enum Failure {
    /// Bad input, spec or selector.
    #[error("{0}")]
    Input(String),
    /// Estimation failed in fail-fast mode.
    #[error("{0}")]
    Estimation(String),
    /// A study breached its failure-rate ceiling or coverage band.
    #[error("{0}")]
    Quality(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 2,
            Failure::Estimation(_) => 3,
            Failure::Quality(_) => 4,
        }
    }
}

impl From<doublelasso::Error> for Failure {
    fn from(e: doublelasso::Error) -> Self {
        match e {
            e @ doublelasso::Error::Treatment { .. } => Failure::Estimation(e.to_string()),
            e => Failure::Input(e.to_string()),
        }
    }
}

pub fn io_error(path: &std::path::Path, e: std::io::Error) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}
