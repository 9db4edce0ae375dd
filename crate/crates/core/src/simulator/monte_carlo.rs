use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pair::{default_horizon, simulate_pair_at, SimOptions, SimOutcome};
use super::timeline::check_skew;
use crate::error::{Error, Result};
use crate::model::PiConfig;
use crate::time::Nanos;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MonteCarloOptions {
    pub collisions: bool,
    /// Each device draws its skew uniformly from `±skew_ppm_range`.
    pub skew_ppm_range: f64,
    #[serde(rename = "horizon_ns")]
    pub horizon: Option<Nanos>,
}

/// Random trials of a symmetric pair. Both devices switch on uniformly in
/// `[0, T_s)`; trial `i` draws from its own ChaCha stream so the outcome
/// list does not depend on the thread count.
pub fn monte_carlo(cfg: &PiConfig, trials: usize, seed: u64, opts: &MonteCarloOptions) -> Result<Vec<SimOutcome>> {
    cfg.validate()?;
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    check_skew(opts.skew_ppm_range)?;
    let period = cfg
        .t_s
        .finite()
        .ok_or_else(|| Error::InvalidConfig("Monte-Carlo needs a scanning configuration".into()))?;
    let horizon = opts.horizon.unwrap_or_else(|| default_horizon(cfg, cfg));
    let range = opts.skew_ppm_range.abs();
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let o_a = Nanos(rng.random_range(0..period.get()));
            let o_b = Nanos(rng.random_range(0..period.get()));
            let mut skew = || if range > 0.0 { rng.random_range(-range..=range) } else { 0.0 };
            let sim = SimOptions {
                skew_a: skew(),
                skew_b: skew(),
                collisions: opts.collisions,
                horizon: Some(horizon),
            };
            simulate_pair_at(cfg, cfg, o_a, o_b, &sim)
        })
        .collect()
}

/// Fraction of outcomes with at least one collision before discovery.
pub fn collision_fraction(outcomes: &[SimOutcome]) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    outcomes.iter().filter(|o| o.collisions > 0).count() as f64 / outcomes.len() as f64
}
