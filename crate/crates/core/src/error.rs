use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration value; `key` names the offending config key.
    #[error("invalid config `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("no T=1 samples: the cold rung was never visited")]
    NoColdSamples,

    #[error("variant `{variant}` replicate {replicate}: {source}")]
    Replicate {
        variant: String,
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("failed to parse config: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// True for errors caused by bad user input (config or parse errors).
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config { .. } | Error::Toml(_) => true,
            Error::Replicate { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
