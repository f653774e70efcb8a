use std::path::PathBuf;

use thiserror::Error;

use crate::lattice::Site;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("walker at {0:?} has no open edge")]
    IsolatedSite(Site),

    #[error("site {0:?} is not on the stretched lattice")]
    OffLattice(Site),

    #[error("boundary policy proposed {target:?} from {from:?}, outside the admissible set")]
    InadmissibleTarget { from: Site, target: Site },

    #[error("auxiliary probe walk from {from:?} exceeded {cap} steps on {retries} attempts")]
    ProbeCapExhausted { from: Site, cap: u64, retries: u32 },

    #[error("domain is unbounded; {0} needs a finite domain")]
    UnboundedDomain(&'static str),

    #[error("start site is not connected to any absorbing site")]
    Disconnected,

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record in {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
