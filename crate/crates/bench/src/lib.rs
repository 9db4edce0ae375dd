//! Fixed inputs shared by the benchmarks.

use slotless::optimizer::{derive, OptimizerRequest, VariantChoice};
use slotless::VariantSolution;

/// Duty-cycles the benchmarks run at: one low, one mid-range.
pub const ETAS: [f64; 2] = [0.01, 0.1];

pub fn best(eta: f64) -> VariantSolution {
    derive(&OptimizerRequest::new(eta, VariantChoice::Best)).expect("feasible duty-cycle")
}
