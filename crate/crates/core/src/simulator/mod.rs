//! Continuous-time brute-force reference for two devices: exact event
//! timelines, first-reception detection, exhaustive offset sweeps and
//! Monte-Carlo trials with collisions and clock skew.

mod monte_carlo;
mod pair;
mod sweep;
mod timeline;

pub use monte_carlo::{collision_fraction, monte_carlo, MonteCarloOptions};
pub use pair::{default_horizon, simulate_pair, simulate_pair_at, SimOptions, SimOutcome};
pub use sweep::{sweep_offsets, sweep_pair, SweepOptions, SweepResult};
pub use timeline::{build_timeline, Timeline, MAX_SKEW_PPM};
