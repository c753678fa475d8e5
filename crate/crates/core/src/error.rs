//! Error type shared by all simulator layers.

use alloc::string::String;
use core::fmt;

/// Errors raised by state construction, dynamics, the trap model, the
/// protocol engine and the measurement campaign layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A register label was not found (or a basis label left one uncovered).
    UnknownRegister(String),
    /// A basis index is outside the register dimension.
    IndexOutOfRange { register: String, index: usize, dim: usize },
    /// Two registers with the same label were combined.
    DuplicateLabel(String),
    /// An operation was applied to a register of the wrong kind.
    WrongRegisterKind { register: String, expected: &'static str },
    /// Two states (or two mode registers) do not share the same shape.
    ShapeMismatch,
    /// Two mode registers of different dimension were coupled.
    DimMismatch { left: usize, right: usize },
    /// Population beyond the Fock cutoff exceeded the hard guard.
    TruncationError { leaked: f64 },
    /// Magnetic field must be positive.
    NonPositiveField,
    /// Trap eigenfrequencies out of order (f+ >= fz >= f- >= 0, f+ > 0).
    OrderingViolation,
    /// Axial frequency too large for the cyclotron frequency (fc^2 <= 2 fz^2).
    UnstableTrap,
    /// Well separation must be positive.
    NonPositiveDistance,
    /// A frequency that must be positive was not.
    NonPositiveFrequency,
    /// A sequence step was executed in a world that violates its zone rule.
    PreconditionViolated { step: usize, message: String },
    /// The least-squares fit failed irrecoverably.
    FitDiverged(String),
    /// Fit input carries no usable information (e.g. all fractions equal).
    DegenerateData,
    /// An invalid scan or experiment configuration value.
    ConfigError(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::UnknownRegister(label) => write!(f, "unknown register `{label}`"),
            Error::IndexOutOfRange { register, index, dim } => {
                write!(f, "index {index} out of range for register `{register}` (dim {dim})")
            }
            Error::DuplicateLabel(label) => write!(f, "duplicate register label `{label}`"),
            Error::WrongRegisterKind { register, expected } => {
                write!(f, "register `{register}` is not a {expected} register")
            }
            Error::ShapeMismatch => write!(f, "states do not share the same register layout"),
            Error::DimMismatch { left, right } => {
                write!(f, "mode dimensions differ: {left} vs {right}")
            }
            Error::TruncationError { leaked } => {
                write!(f, "population {leaked:.3e} leaked past the Fock cutoff (guard 1e-9)")
            }
            Error::NonPositiveField => write!(f, "magnetic field must be positive"),
            Error::OrderingViolation => {
                write!(f, "eigenfrequencies must satisfy f+ >= fz >= f- >= 0 with f+ > 0")
            }
            Error::UnstableTrap => write!(f, "unstable trap: fc^2 <= 2 fz^2"),
            Error::NonPositiveDistance => write!(f, "well separation must be positive"),
            Error::NonPositiveFrequency => write!(f, "frequency must be positive"),
            Error::PreconditionViolated { step, message } => {
                write!(f, "precondition violated at step {step}: {message}")
            }
            Error::FitDiverged(why) => write!(f, "fit diverged: {why}"),
            Error::DegenerateData => write!(f, "degenerate fit data: no usable variation"),
            Error::ConfigError(why) => write!(f, "invalid configuration: {why}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
