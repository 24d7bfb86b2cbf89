use thiserror::Error;

/// Errors produced by the simulator and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// The channel varies faster than one symbol or one subcarrier.
    #[error("profile '{profile}' unsupportable by numerology: {axis} spacing floors to 0")]
    UnsupportableProfile { profile: String, axis: &'static str },

    /// A pilot pattern would leave no resource element for data.
    #[error("no data room: pattern needs {pilots} of {res} resource elements")]
    NoDataRoom { pilots: usize, res: usize },

    /// No registry pattern satisfies the spacing limits of a profile.
    #[error("registry infeasible for profile '{0}'")]
    RegistryInfeasible(String),

    /// A channel vector has zero norm.
    #[error("degenerate channel: zero-norm vector for user index {0}")]
    DegenerateChannel(usize),

    /// The exact scheduler would exceed its subset-state budget.
    #[error(
        "instance too large for exact search ({users} users, {states} states > budget {budget}); use the greedy scheduler"
    )]
    ExactSearchTooLarge {
        users: usize,
        states: u128,
        budget: u128,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::UnsupportableProfile { .. } => "unsupportable_profile",
            Error::NoDataRoom { .. } => "no_data_room",
            Error::RegistryInfeasible(_) => "registry_infeasible",
            Error::DegenerateChannel(_) => "degenerate_channel",
            Error::ExactSearchTooLarge { .. } => "exact_search_too_large",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Toml(_) => "toml",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
