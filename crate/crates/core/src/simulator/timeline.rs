use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PiConfig;
use crate::time::Nanos;

pub const MAX_SKEW_PPM: f64 = 500.0;

/// Periodic event train; event `k` starts at `offset + round(k·period·scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Train {
    offset: i64,
    period: i64,
    scale: f64,
}

impl Train {
    pub(crate) fn new(offset: i64, period: Nanos, skew_ppm: f64) -> Self {
        Train {
            offset,
            period: period.get(),
            scale: 1.0 + skew_ppm * 1e-6,
        }
    }

    #[inline]
    pub(crate) fn at(&self, k: i64) -> i64 {
        if self.scale == 1.0 {
            self.offset + k * self.period
        } else {
            self.offset + (k as f64 * self.period as f64 * self.scale).round() as i64
        }
    }

    /// Index of the last event starting at or before `t`.
    #[inline]
    pub(crate) fn last_at_or_before(&self, t: i64) -> Option<i64> {
        if t < self.offset {
            return None;
        }
        let mut k = if self.scale == 1.0 {
            (t - self.offset) / self.period
        } else {
            ((t - self.offset) as f64 / (self.period as f64 * self.scale)).floor() as i64
        };
        while k > 0 && self.at(k) > t {
            k -= 1;
        }
        while self.at(k + 1) <= t {
            k += 1;
        }
        Some(k)
    }

    /// Index of the first event starting at or after `t`.
    #[inline]
    pub(crate) fn first_at_or_after(&self, t: i64) -> i64 {
        match self.last_at_or_before(t) {
            None => 0,
            Some(k) if self.at(k) == t => k,
            Some(k) => k + 1,
        }
    }
}

/// One device placed on the time axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Device {
    pub(crate) start: i64,
    pub(crate) beacons: Option<Train>,
    pub(crate) windows: Option<Train>,
    pub(crate) d_s: i64,
    pub(crate) d_a: i64,
}

impl Device {
    pub(crate) fn new(cfg: &PiConfig, offset: Nanos, skew_ppm: f64) -> Self {
        Device {
            start: offset.get(),
            beacons: cfg.t_a.finite().map(|t| Train::new(offset.get(), t, skew_ppm)),
            windows: cfg.t_s.finite().map(|t| Train::new(offset.get(), t, skew_ppm)),
            d_s: cfg.d_s.get(),
            d_a: cfg.d_a.get(),
        }
    }

    /// Number of own beacons overlapping the open span `(s, e)`.
    #[inline]
    pub(crate) fn beacons_overlapping(&self, s: i64, e: i64) -> u32 {
        let Some(train) = self.beacons else { return 0 };
        let Some(mut k) = train.last_at_or_before(e - 1) else { return 0 };
        let mut n = 0;
        loop {
            let b = train.at(k);
            if b + self.d_a <= s {
                break;
            }
            n += 1;
            if k == 0 {
                break;
            }
            k -= 1;
        }
        n
    }

    /// Whether a beacon starting at `t` lies inside one of the windows.
    #[inline]
    pub(crate) fn window_contains(&self, t: i64, d_a: i64) -> bool {
        let Some(train) = self.windows else { return false };
        match train.last_at_or_before(t) {
            Some(j) => t + d_a <= train.at(j) + self.d_s,
            None => false,
        }
    }
}

/// Explicit event lists of one device up to a horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    #[serde(rename = "beacons_ns")]
    pub beacons: Vec<Nanos>,
    /// `(start, end)` of every scan window.
    #[serde(rename = "windows_ns")]
    pub windows: Vec<(Nanos, Nanos)>,
    pub skew_ppm: f64,
    #[serde(rename = "d_a_ns")]
    pub d_a: Nanos,
}

impl Timeline {
    /// Windows with the device's own transmissions cut out. The window keeps
    /// its original end, so a beacon never extends it.
    pub fn listen_spans(&self) -> Vec<(Nanos, Nanos)> {
        let mut spans = Vec::new();
        let mut bi = 0;
        for &(ws, we) in &self.windows {
            let mut cur = ws;
            while bi < self.beacons.len() && self.beacons[bi] + self.d_a <= ws {
                bi += 1;
            }
            let mut bj = bi;
            while bj < self.beacons.len() && self.beacons[bj] < we {
                let b = self.beacons[bj];
                if b > cur {
                    spans.push((cur, b));
                }
                cur = cur.max(b + self.d_a);
                bj += 1;
            }
            if cur < we {
                spans.push((cur, we));
            }
        }
        spans
    }
}

pub(crate) fn check_skew(ppm: f64) -> Result<()> {
    if ppm.is_finite() && ppm.abs() <= MAX_SKEW_PPM {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "clock skew {ppm} ppm exceeds {MAX_SKEW_PPM} ppm"
        )))
    }
}

/// Every beacon and window of `cfg` starting at or before `horizon`.
pub fn build_timeline(cfg: &PiConfig, offset: Nanos, skew_ppm: f64, horizon: Nanos) -> Result<Timeline> {
    cfg.validate()?;
    check_skew(skew_ppm)?;
    if horizon <= Nanos::ZERO {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    let period = cfg.t_s.finite().or(cfg.t_a.finite()).unwrap();
    if offset < Nanos::ZERO || offset >= period {
        return Err(Error::InvalidOffset { offset, period });
    }
    let dev = Device::new(cfg, offset, skew_ppm);
    let collect = |train: Option<Train>| -> Vec<i64> {
        let Some(train) = train else { return Vec::new() };
        (0..).map(|k| train.at(k)).take_while(|&t| t <= horizon.get()).collect()
    };
    Ok(Timeline {
        beacons: collect(dev.beacons).into_iter().map(Nanos).collect(),
        windows: collect(dev.windows)
            .into_iter()
            .map(|w| (Nanos(w), Nanos(w) + cfg.d_s))
            .collect(),
        skew_ppm,
        d_a: cfg.d_a,
    })
}
