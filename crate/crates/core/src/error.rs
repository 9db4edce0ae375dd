use thiserror::Error;

use crate::model::Variant;
use crate::time::Nanos;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "duty-cycle {eta} is infeasible for {variant}: eta_max = {limit_name} = {:.1}%",
        .limit * 100.0
    )]
    InfeasibleEta {
        variant: Variant,
        eta: f64,
        limit: f64,
        limit_name: &'static str,
    },

    #[error("no integer parameter satisfies every constraint of {variant} at duty-cycle {eta}")]
    RangesEmpty { variant: Variant, eta: f64 },

    #[error("configuration is not an order-{expected} process: {reason}")]
    OrderViolation { expected: u8, reason: String },

    #[error("configuration has a {actual} neighborhood, expected {expected}")]
    WrongDirection {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("skew guard {eps_ta} reaches the usable scan window {window}")]
    GuardExceedsWindow { eps_ta: Nanos, window: Nanos },

    #[error("slot length {d_sl} is shorter than three beacons ({min})")]
    SlotTooShort { d_sl: Nanos, min: Nanos },

    #[error("duty-cycle {0} is outside (0, 1)")]
    EtaOutOfRange(f64),

    #[error("offset {offset} is outside [0, {period})")]
    InvalidOffset { offset: Nanos, period: Nanos },

    #[error("sweep step {step} exceeds the beacon duration {d_a}")]
    StepTooCoarse { step: Nanos, d_a: Nanos },

    #[error("offset {offset} never discovered within {horizon}")]
    Undiscovered { offset: Nanos, horizon: Nanos },
}
