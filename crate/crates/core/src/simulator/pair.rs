use serde::{Deserialize, Serialize};

use super::timeline::{check_skew, Device};
use crate::error::{Error, Result};
use crate::latency::closed_form_bound;
use crate::model::{Interval, PiConfig};
use crate::time::Nanos;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimOptions {
    pub skew_a: f64,
    pub skew_b: f64,
    /// Overlapping transmissions destroy each other.
    pub collisions: bool,
    /// Search window after both devices are active; `None` picks
    /// [`default_horizon`].
    #[serde(rename = "horizon_ns")]
    pub horizon: Option<Nanos>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    /// A's beacon received by B, `None` on timeout or when B never scans.
    #[serde(rename = "latency_ab_ns")]
    pub latency_ab: Option<Nanos>,
    #[serde(rename = "latency_ba_ns")]
    pub latency_ba: Option<Nanos>,
    /// Time until every possible direction succeeded.
    #[serde(rename = "latency_ns")]
    pub latency: Option<Nanos>,
    /// Overlapping pairs of A and B transmissions before discovery completed.
    pub collisions: u32,
    #[serde(rename = "offset_a_ns")]
    pub offset_a: Nanos,
    #[serde(rename = "offset_b_ns")]
    pub offset_b: Nanos,
    pub skew_a: f64,
    pub skew_b: f64,
    /// Instant both devices are on; all latencies count from here.
    #[serde(rename = "both_active_ns")]
    pub both_active: Nanos,
    /// Instant the first device switched on.
    #[serde(rename = "first_active_ns")]
    pub first_active: Nanos,
}

impl SimOutcome {
    pub fn timed_out(&self) -> bool {
        self.latency.is_none()
    }
}

fn can_reach(tx: &PiConfig, rx: &PiConfig) -> bool {
    tx.advertises() && rx.scans()
}

/// Longest finite interval across both devices.
pub(crate) fn pair_period(a: &PiConfig, b: &PiConfig) -> Nanos {
    [a.t_a, a.t_s, b.t_a, b.t_s]
        .into_iter()
        .filter_map(Interval::finite)
        .max()
        .unwrap()
}

/// Longest scan interval across both devices; offsets are drawn below it.
pub(crate) fn offset_period(a: &PiConfig, b: &PiConfig) -> Nanos {
    match (a.t_s.finite(), b.t_s.finite()) {
        (Some(x), Some(y)) => x.max(y),
        (Some(x), None) | (None, Some(x)) => x,
        (None, None) => pair_period(a, b),
    }
}

/// The schedule the pair forms when one side's beacons meet the other
/// side's windows, used to pick a closed-form bound.
fn combined(a: &PiConfig, b: &PiConfig) -> Option<PiConfig> {
    let (tx, rx) = if can_reach(a, b) {
        (a, b)
    } else if can_reach(b, a) {
        (b, a)
    } else {
        return None;
    };
    PiConfig::symmetric(tx.t_a.finite()?, rx.t_s.finite()?, rx.d_s, tx.d_a).ok()
}

/// `2·d_m + T_s` from the closed form of the pair; configurations no closed
/// form covers get a thousand of their longest interval.
pub fn default_horizon(a: &PiConfig, b: &PiConfig) -> Nanos {
    let period = offset_period(a, b);
    match combined(a, b).and_then(|c| closed_form_bound(&c).ok()) {
        Some(bound) => bound.d_m * 2 + period,
        None => pair_period(a, b) * 1000,
    }
}

/// Start of the first beacon of `tx` that `rx` receives within `[from, until]`.
#[inline]
pub(crate) fn first_reception(tx: &Device, rx: &Device, from: i64, until: i64, collisions: bool) -> Option<i64> {
    let beacons = tx.beacons?;
    rx.windows?;
    let mut k = beacons.first_at_or_after(from);
    loop {
        let t = beacons.at(k);
        if t > until {
            return None;
        }
        if rx.window_contains(t, tx.d_a) && !(collisions && rx.beacons_overlapping(t, t + tx.d_a) > 0) {
            return Some(t);
        }
        k += 1;
    }
}

fn count_collisions(a: &Device, b: &Device, until: i64) -> u32 {
    let Some(train) = a.beacons else { return 0 };
    if b.beacons.is_none() {
        return 0;
    }
    let mut k = train.first_at_or_after(b.start - a.d_a);
    let mut n = 0;
    loop {
        let t = train.at(k);
        if t > until {
            return n;
        }
        n += b.beacons_overlapping(t, t + a.d_a);
        k += 1;
    }
}

pub(crate) struct PairRun {
    pub ab: Option<i64>,
    pub ba: Option<i64>,
    pub mutual: Option<i64>,
}

/// Core of [`simulate_pair_at`] without validation or collision counting.
#[inline]
pub(crate) fn run_pair(
    a: &PiConfig,
    b: &PiConfig,
    da: &Device,
    db: &Device,
    horizon: i64,
    collisions: bool,
) -> PairRun {
    let from = da.start.max(db.start);
    let until = from + horizon;
    let lat = |tx: &Device, rx: &Device| first_reception(tx, rx, from, until, collisions).map(|t| t + tx.d_a - from);
    let ab = if can_reach(a, b) { lat(da, db) } else { None };
    let ba = if can_reach(b, a) { lat(db, da) } else { None };
    let needed = [(can_reach(a, b), ab), (can_reach(b, a), ba)];
    let mutual = needed
        .iter()
        .filter(|(applies, _)| *applies)
        .try_fold(0i64, |acc, (_, l)| l.map(|l| acc.max(l)));
    let mutual = if needed.iter().any(|(applies, _)| *applies) { mutual } else { None };
    PairRun { ab, ba, mutual }
}

/// Places A at `offset_a` and B at `offset_b` and looks for the first
/// successful reception in each direction.
pub fn simulate_pair_at(
    cfg_a: &PiConfig,
    cfg_b: &PiConfig,
    offset_a: Nanos,
    offset_b: Nanos,
    opts: &SimOptions,
) -> Result<SimOutcome> {
    cfg_a.validate()?;
    cfg_b.validate()?;
    check_skew(opts.skew_a)?;
    check_skew(opts.skew_b)?;
    for offset in [offset_a, offset_b] {
        if offset < Nanos::ZERO {
            return Err(Error::InvalidOffset {
                offset,
                period: offset_period(cfg_a, cfg_b),
            });
        }
    }
    let horizon = opts.horizon.unwrap_or_else(|| default_horizon(cfg_a, cfg_b));
    if horizon <= Nanos::ZERO {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    let da = Device::new(cfg_a, offset_a, opts.skew_a);
    let db = Device::new(cfg_b, offset_b, opts.skew_b);
    let run = run_pair(cfg_a, cfg_b, &da, &db, horizon.get(), opts.collisions);
    let both = offset_a.max(offset_b);
    let stop = both.get() + run.mutual.unwrap_or(horizon.get());
    Ok(SimOutcome {
        latency_ab: run.ab.map(Nanos),
        latency_ba: run.ba.map(Nanos),
        latency: run.mutual.map(Nanos),
        collisions: count_collisions(&da, &db, stop),
        offset_a,
        offset_b,
        skew_a: opts.skew_a,
        skew_b: opts.skew_b,
        both_active: both,
        first_active: offset_a.min(offset_b),
    })
}

/// A starts at zero, B `offset_b` later.
pub fn simulate_pair(cfg_a: &PiConfig, cfg_b: &PiConfig, offset_b: Nanos, opts: &SimOptions) -> Result<SimOutcome> {
    let period = offset_period(cfg_a, cfg_b);
    if offset_b < Nanos::ZERO || offset_b >= period {
        return Err(Error::InvalidOffset { offset: offset_b, period });
    }
    simulate_pair_at(cfg_a, cfg_b, Nanos::ZERO, offset_b, opts)
}
