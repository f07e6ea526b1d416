use scanclass::Error;

/// Process exit codes. Zero means success; 1 is reserved for internal
/// failures and clap uses 2 for usage errors as well.
pub mod exit {
    pub const NOT_FOUND: u8 = 2;
    pub const UNLABELED: u8 = 3;
    pub const IMAGE: u8 = 4;
    pub const SCHEMA: u8 = 5;
    pub const SEGMENTATION: u8 = 6;
    pub const MODEL: u8 = 7;
    pub const TEXT: u8 = 8;
    pub const CONFIG: u8 = 9;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("config: {0}")]
    Config(String),
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("{0}")]
    Server(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => core_exit_code(e),
            CliError::Config(_) | CliError::PortInUse(_) | CliError::Server(_) => exit::CONFIG,
        }
    }
}

pub fn core_exit_code(e: &Error) -> u8 {
    match e {
        Error::FileNotFound(_) | Error::Io { .. } => exit::NOT_FOUND,
        Error::UnlabeledBlob(_) => exit::UNLABELED,
        Error::UnsupportedFormat(_) | Error::CorruptImage(_) => exit::IMAGE,
        Error::Schema(_) | Error::Format { .. } => exit::SCHEMA,
        Error::GridMismatch { .. } | Error::UnknownBlobId(_) | Error::OutOfBounds { .. } => exit::SEGMENTATION,
        Error::DimensionMismatch { .. } | Error::EmptyClass(_) => exit::MODEL,
        Error::EmptyOriginal
        | Error::SingleClass
        | Error::EmptyCorpus
        | Error::EmptyTestSet
        | Error::MissingLabel(_)
        | Error::UnknownClass(_) => exit::TEXT,
        Error::InvalidArgument(_) => exit::CONFIG,
    }
}
