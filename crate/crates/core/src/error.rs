use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhotonicError {
    #[error("subsystem is not a set of polarization qubits: {0}")]
    NonQubitSubsystem(String),

    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NonUnitary(f64),

    #[error("routing collision on path {path} at bin {bin}")]
    RoutingCollision { path: String, bin: u32 },

    #[error("probe {0} has not interacted with the state")]
    ProbeNotInteracted(String),

    #[error("invalid probe: {0}")]
    InvalidProbe(String),

    #[error("feed-forward rule targets element {target} (slot {target_slot}) which runs no later than slot {current_slot}")]
    ScheduleViolation { target: String, target_slot: u32, current_slot: u32 },

    #[error("no branch matches the selection")]
    EmptySelection,

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("unknown element id {0}")]
    UnknownElement(String),

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("correction rules are not mutually exclusive for record {0}")]
    AmbiguousRules(String),
}

pub type Result<T> = std::result::Result<T, PhotonicError>;
