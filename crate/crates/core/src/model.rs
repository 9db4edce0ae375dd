//! Domain types shared by every module and the duty-cycle / γ primitives.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::time::Nanos;

/// One sleep-clock tick of a 32768 Hz crystal, floored to whole nanoseconds.
pub const CRYSTAL_TICK: Nanos = Nanos(30_518);

/// A repetition interval, or the sentinel for a role the device never performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Interval {
    Finite(Nanos),
    Infinite,
}

impl Interval {
    pub fn finite(self) -> Option<Nanos> {
        match self {
            Interval::Finite(n) => Some(n),
            Interval::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Interval::Infinite)
    }
}

impl From<Nanos> for Interval {
    fn from(n: Nanos) -> Self {
        Interval::Finite(n)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Interval::Finite(n) => n.fmt(f),
            Interval::Infinite => f.write_str("inf"),
        }
    }
}

// INFINITE travels as JSON null.
impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.finite().map(Nanos::get).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(match Option::<i64>::deserialize(d)? {
            Some(ns) => Interval::Finite(Nanos(ns)),
            None => Interval::Infinite,
        })
    }
}

/// Hardware description of the radio both devices use. Missing JSON keys
/// fall back to the default profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioParams {
    /// Airtime of one beacon.
    #[serde(rename = "d_a_ns")]
    pub d_a: Nanos,
    /// Shortest scan window the hardware is allowed to use.
    #[serde(rename = "d_s_min_ns")]
    pub d_s_min: Nanos,
    /// Sleep-clock granularity; also the default ceiling guard ε.
    #[serde(rename = "tick_ns")]
    pub tick: Nanos,
    /// Maximum clock deviation of one device, in parts per million.
    pub skew_ppm: f64,
    pub n_bytes: u32,
    /// Over-the-air rate in bit/s.
    pub bitrate: u64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            d_a: Nanos::from_micros(368),
            d_s_min: Nanos::from_millis(10),
            tick: CRYSTAL_TICK,
            skew_ppm: 20.0,
            n_bytes: 46,
            bitrate: 1_000_000,
        }
    }
}

impl RadioParams {
    /// Derives the beacon duration from payload size and bitrate,
    /// rounding up to the next nanosecond.
    pub fn from_payload(n_bytes: u32, bitrate: u64) -> Result<Self> {
        if bitrate == 0 || n_bytes == 0 {
            return Err(Error::InvalidParameter(
                "payload size and bitrate must be positive".into(),
            ));
        }
        let bits = 8 * n_bytes as u128 * 1_000_000_000;
        let d_a = bits.div_ceil(bitrate as u128) as i64;
        let radio = RadioParams {
            d_a: Nanos(d_a),
            n_bytes,
            bitrate,
            ..RadioParams::default()
        };
        radio.validate()?;
        Ok(radio)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_a <= Nanos::ZERO {
            return Err(Error::InvalidConfig("beacon duration must be positive".into()));
        }
        if self.d_s_min <= self.d_a {
            return Err(Error::InvalidConfig(format!(
                "minimum scan window {} must exceed the beacon duration {}",
                self.d_s_min, self.d_a
            )));
        }
        if self.tick <= Nanos::ZERO {
            return Err(Error::InvalidConfig("tick must be positive".into()));
        }
        if !(self.skew_ppm >= 0.0 && self.skew_ppm.is_finite()) {
            return Err(Error::InvalidConfig("skew must be a non-negative ppm value".into()));
        }
        Ok(())
    }
}

/// One device's slotless schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PiConfig {
    #[serde(rename = "t_a_ns")]
    pub t_a: Interval,
    #[serde(rename = "t_s_ns")]
    pub t_s: Interval,
    #[serde(rename = "d_s_ns")]
    pub d_s: Nanos,
    #[serde(rename = "d_a_ns")]
    pub d_a: Nanos,
}

impl PiConfig {
    pub fn new(t_a: Interval, t_s: Interval, d_s: Nanos, d_a: Nanos) -> Result<Self> {
        let cfg = PiConfig { t_a, t_s, d_s, d_a };
        cfg.validate()?;
        Ok(cfg)
    }

    /// A device that both advertises and scans.
    pub fn symmetric(t_a: Nanos, t_s: Nanos, d_s: Nanos, d_a: Nanos) -> Result<Self> {
        Self::new(t_a.into(), t_s.into(), d_s, d_a)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.d_a <= Nanos::ZERO {
            return bad(format!("beacon duration {} must be positive", self.d_a));
        }
        if self.d_s <= self.d_a {
            return bad(format!(
                "scan window {} must exceed the beacon duration {}",
                self.d_s, self.d_a
            ));
        }
        match (self.t_a, self.t_s) {
            (Interval::Infinite, Interval::Infinite) => {
                return bad("advertising and scan interval cannot both be infinite".into())
            }
            (t_a, t_s) => {
                if let Some(t_a) = t_a.finite() {
                    if t_a <= self.d_a {
                        return bad(format!(
                            "advertising interval {t_a} must exceed the beacon duration {}",
                            self.d_a
                        ));
                    }
                }
                if let Some(t_s) = t_s.finite() {
                    if t_s < self.d_s {
                        return bad(format!(
                            "scan interval {t_s} is shorter than the scan window {}",
                            self.d_s
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Usable part of the scan window: the latest beacon start still received
    /// is `d_s - d_a` after the window opens.
    pub fn usable_window(&self) -> Nanos {
        self.d_s - self.d_a
    }

    pub fn advertises(&self) -> bool {
        !self.t_a.is_infinite()
    }

    pub fn scans(&self) -> bool {
        !self.t_s.is_infinite()
    }

    /// Both intervals, or an error naming the infinite one.
    pub fn finite_intervals(&self) -> Result<(Nanos, Nanos)> {
        match (self.t_a, self.t_s) {
            (Interval::Finite(a), Interval::Finite(s)) => Ok((a, s)),
            _ => Err(Error::InvalidConfig(
                "operation needs finite advertising and scan intervals".into(),
            )),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: PiConfig =
            serde_json::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Duty-cycle `(T_a d_s + T_s d_a) / (T_a T_s)` as a reduced fraction.
pub fn duty_cycle_exact(cfg: &PiConfig) -> Result<Ratio<i128>> {
    cfg.validate()?;
    let d_s = cfg.d_s.get() as i128;
    let d_a = cfg.d_a.get() as i128;
    let eta = match (cfg.t_a.finite(), cfg.t_s.finite()) {
        (Some(t_a), Some(t_s)) => {
            let (t_a, t_s) = (t_a.get() as i128, t_s.get() as i128);
            Ratio::new(t_a * d_s + t_s * d_a, t_a * t_s)
        }
        (Some(t_a), None) => Ratio::new(d_a, t_a.get() as i128),
        (None, Some(t_s)) => Ratio::new(d_s, t_s.get() as i128),
        (None, None) => unreachable!("rejected by validate"),
    };
    if eta > Ratio::from_integer(1) {
        return Err(Error::InvalidConfig(format!(
            "radio would be active {:.3} of the time",
            ratio_to_f64(&eta)
        )));
    }
    Ok(eta)
}

/// Fraction of time the radio of a device running `cfg` is on.
pub fn duty_cycle(cfg: &PiConfig) -> Result<f64> {
    duty_cycle_exact(cfg).map(|r| ratio_to_f64(&r))
}

pub(crate) fn ratio_to_f64(r: &Ratio<i128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Per-period offset change `⌈T_s/T_a⌉ T_a − T_s` of an order-1 process.
pub fn gamma(t_a: Nanos, t_s: Nanos) -> Result<Nanos> {
    if t_a <= Nanos::ZERO || t_a > t_s {
        return Err(Error::InvalidParameter(format!(
            "gamma needs 0 < T_a <= T_s, got T_a = {t_a}, T_s = {t_s}"
        )));
    }
    Ok(t_a * t_s.div_ceil(t_a) - t_s)
}

/// The three constructed slotless families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "PI0M")]
    Pi0m,
    #[serde(rename = "PIK1P")]
    Pik1p,
    #[serde(rename = "PIK2P")]
    Pik2p,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Pi0m, Variant::Pik1p, Variant::Pik2p];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Pi0m => "PI0M",
            Variant::Pik1p => "PIK1P",
            Variant::Pik2p => "PIK2P",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Constraint that moved an integer parameter away from its unconstrained optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    #[serde(rename = "M_max")]
    MMax,
    #[serde(rename = "M_min")]
    MMin,
    #[serde(rename = "k_min")]
    KMin,
    #[serde(rename = "k_max")]
    KMax,
    #[serde(rename = "k_l")]
    KLimit,
    #[serde(rename = "d_s_min")]
    DsMin,
}

impl Constraint {
    pub fn name(self) -> &'static str {
        match self {
            Constraint::MMax => "M_max",
            Constraint::MMin => "M_min",
            Constraint::KMin => "k_min",
            Constraint::KMax => "k_max",
            Constraint::KLimit => "k_l",
            Constraint::DsMin => "d_s_min",
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Output of the optimizer for one variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSolution {
    pub variant: Variant,
    pub k: u32,
    #[serde(rename = "M")]
    pub m: u32,
    pub config: PiConfig,
    /// Decrement that keeps `T_s` below the next ceiling flip.
    #[serde(rename = "eps_ns")]
    pub eps: Nanos,
    /// Extra shortening applied against clock skew; zero when unguarded.
    #[serde(rename = "eps_ta_ns")]
    pub eps_ta: Nanos,
    pub eta_target: f64,
    pub eta_achieved: f64,
    #[serde(rename = "d_m_ns")]
    pub d_m: Nanos,
    pub clamped: Vec<Constraint>,
    /// PI-0M beyond the point where the hardware clamp starts to cost latency.
    #[serde(default)]
    pub beyond_eta_adj: bool,
}

/// Time-slotted baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlottedProtocol {
    #[serde(rename = "DISCO")]
    Disco,
    #[serde(rename = "UCONNECT")]
    UConnect,
    #[serde(rename = "SEARCHLIGHT_S")]
    SearchlightS,
    #[serde(rename = "OPT_DIFFCODES")]
    OptDiffCodes,
    #[serde(rename = "LIGHTNING")]
    Lightning,
    #[serde(rename = "G_NIHAO")]
    GNihao,
}

impl SlottedProtocol {
    pub const ALL: [SlottedProtocol; 6] = [
        SlottedProtocol::Disco,
        SlottedProtocol::UConnect,
        SlottedProtocol::SearchlightS,
        SlottedProtocol::OptDiffCodes,
        SlottedProtocol::Lightning,
        SlottedProtocol::GNihao,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SlottedProtocol::Disco => "Disco",
            SlottedProtocol::UConnect => "U-Connect",
            SlottedProtocol::SearchlightS => "Searchlight-S",
            SlottedProtocol::OptDiffCodes => "OptDiffCodes",
            SlottedProtocol::Lightning => "Lightning",
            SlottedProtocol::GNihao => "G-Nihao",
        }
    }
}

impl fmt::Display for SlottedProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A slotted baseline and its free parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlottedSpec {
    pub protocol: SlottedProtocol,
    #[serde(rename = "d_sl_ns")]
    pub d_sl: Nanos,
    /// Lightning β.
    #[serde(default = "default_lightning_param")]
    pub beta: f64,
    /// Lightning δ.
    #[serde(default = "default_lightning_param")]
    pub delta: f64,
    /// G-Nihao beacons per listen slot, n/m.
    #[serde(default = "default_gamma_ratio")]
    pub gamma_ratio: f64,
    /// Evaluate Searchlight with the literal `⌈⌊1/η⌋/2⌉` table entry.
    #[serde(default)]
    pub searchlight_table_form: bool,
}

fn default_lightning_param() -> f64 {
    0.1
}

fn default_gamma_ratio() -> f64 {
    2.0
}

impl SlottedSpec {
    pub fn new(protocol: SlottedProtocol, d_sl: Nanos) -> Self {
        SlottedSpec {
            protocol,
            d_sl,
            beta: default_lightning_param(),
            delta: default_lightning_param(),
            gamma_ratio: default_gamma_ratio(),
            searchlight_table_form: false,
        }
    }

    /// Every slot holds two beacons and at least one beacon of listening.
    pub fn validate(&self, d_a: Nanos) -> Result<()> {
        let min = d_a * 3;
        if self.d_sl < min {
            return Err(Error::SlotTooShort { d_sl: self.d_sl, min });
        }
        if self.gamma_ratio.is_nan() || self.gamma_ratio <= 0.0 || !(0.0..1.0).contains(&self.beta) || !(0.0..1.0).contains(&self.delta) {
            return Err(Error::InvalidParameter(
                "baseline parameters out of range".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    #[serde(rename = "latency_ns")]
    pub latency: Nanos,
    pub cum_prob: f64,
}

/// Empirical latency distribution over initial offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfCurve {
    pub points: Vec<CdfPoint>,
    #[serde(rename = "worst_case_ns")]
    pub worst_case: Nanos,
    #[serde(rename = "mean_ns")]
    pub mean: f64,
}

impl CdfCurve {
    /// Builds the curve from `(latency, weight)` samples. Weights need not be
    /// normalized; samples with equal latency are merged.
    pub fn from_weighted(mut samples: Vec<(Nanos, f64)>) -> Result<Self> {
        samples.retain(|&(_, w)| w > 0.0);
        if samples.is_empty() {
            return Err(Error::InvalidParameter("no samples with positive weight".into()));
        }
        samples.sort_by_key(|&(l, _)| l);
        let total: f64 = samples.iter().map(|&(_, w)| w).sum();
        let mean = samples.iter().map(|&(l, w)| l.as_f64() * w).sum::<f64>() / total;
        let mut points: Vec<CdfPoint> = Vec::new();
        let mut acc = 0.0;
        for (latency, w) in samples {
            acc += w;
            match points.last_mut() {
                Some(p) if p.latency == latency => p.cum_prob = acc / total,
                _ => points.push(CdfPoint {
                    latency,
                    cum_prob: acc / total,
                }),
            }
        }
        let last = points.last_mut().unwrap();
        last.cum_prob = 1.0;
        let worst_case = last.latency;
        Ok(CdfCurve {
            points,
            worst_case,
            mean,
        })
    }

    /// Largest vertical distance between the curve and the straight line from
    /// `(0, 0)` to `(reference, 1)`, evaluated on both sides of every step.
    pub fn max_line_deviation(&self, reference: Nanos) -> f64 {
        let line = |l: Nanos| (l.as_f64() / reference.as_f64()).clamp(0.0, 1.0);
        let mut prev = 0.0;
        let mut worst: f64 = 0.0;
        for p in &self.points {
            let y = line(p.latency);
            worst = worst.max((prev - y).abs()).max((p.cum_prob - y).abs());
            prev = p.cum_prob;
        }
        worst
    }
}
