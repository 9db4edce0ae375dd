//! Parameter derivation, worst-case latency bounds and a brute-force
//! simulator for slotless periodic-interval neighbor discovery.

pub mod baselines;
pub mod error;
pub mod latency;
pub mod model;
pub mod optimizer;
pub mod simulator;
pub mod time;

pub use error::{Error, Result};
pub use latency::{BoundSource, Direction, LatencyBound};
pub use model::{
    duty_cycle, gamma, CdfCurve, CdfPoint, Constraint, Interval, PiConfig, RadioParams,
    SlottedProtocol, SlottedSpec, Variant, VariantSolution,
};
pub use optimizer::{EtaLimits, OptimizerRequest, VariantChoice};
pub use simulator::{SimOptions, SimOutcome, Timeline};
pub use time::Nanos;
