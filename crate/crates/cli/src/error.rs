use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] mapcalc::Error),

    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    /// 2 for configuration problems, 3 for everything else.
    pub fn exit_code(&self) -> i32 {
        use mapcalc::Error as E;
        match self {
            Self::Config(_) => 2,
            Self::Core(
                E::InvalidParameter(_)
                | E::Margin { .. }
                | E::BallOutsideBox { .. }
                | E::OutsideDomain { .. }
                | E::Dimension { .. }
                | E::UnsupportedLagrangian(_)
                | E::Checkpoint(_),
            ) => 2,
            Self::Core(_) | Self::Io(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}
