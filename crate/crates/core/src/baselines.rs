//! Worst-case latencies, collision probability and channel utilization of
//! the slotted baselines, and their comparison against PI-kMOpt.

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PiConfig, RadioParams, SlottedProtocol, SlottedSpec};
use crate::optimizer::{apply_skew_guards, derive_best, OptimizerRequest, VariantChoice};
use crate::time::Nanos;

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta < 1.0 {
        Ok(())
    } else {
        Err(Error::EtaOutOfRange(eta))
    }
}

/// Lightning's fitted hyper-period parameter `n`.
fn lightning_n(eta: f64) -> f64 {
    (0.0021 * (25600.0 * eta + 2109.0).sqrt() + 0.095) / eta
}

fn lightning_slots(eta: f64, beta: f64, delta: f64, n: f64) -> Result<f64> {
    let (b, d) = (beta, delta);
    let num = n * (1.0 + d) + (n - 1.0) * d * b + 1.0 + 2.0 * d;
    let den = eta - ((1.0 - d) * b + d) / (2.0 * n * (n + 1.0)) - (d + b * (1.0 - d)) / (2.0 * (n + 1.0));
    if den <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "Lightning has no schedule for duty-cycle {eta}"
        )));
    }
    Ok(num / den)
}

/// Number of G-Nihao slots per listen slot, `2X` before rounding.
fn nihao_x(eta: f64, gamma: f64, d_a: f64, d_sl: f64) -> f64 {
    (d_sl + d_a * gamma) / (2.0 * gamma * eta * d_sl)
}

/// Searchlight period `t` for two active slots per period.
fn searchlight_period(eta: f64) -> f64 {
    // the nudge keeps exact quotients such as 2/0.02 from flooring to 99
    (2.0 / eta * (1.0 + 1e-12)).floor().max(1.0)
}

/// Worst-case latency in slots.
pub fn slotted_slots(spec: &SlottedSpec, eta: f64, d_a: Nanos) -> Result<f64> {
    check_eta(eta)?;
    spec.validate(d_a)?;
    let slots = match spec.protocol {
        SlottedProtocol::Disco => 4.0 / (eta * eta),
        SlottedProtocol::UConnect => {
            let a = (1.0 / (2.0 * eta) + 9.0 / (16.0 * eta * eta)).sqrt();
            (a + 3.0 / (4.0 * eta)).powi(2)
        }
        SlottedProtocol::SearchlightS => {
            if spec.searchlight_table_form {
                ((1.0 / eta * (1.0 + 1e-12)).floor() / 2.0).ceil()
            } else {
                let t = searchlight_period(eta);
                t * (t / 4.0).ceil()
            }
        }
        SlottedProtocol::OptDiffCodes => 1.0 / (2.0 * eta * eta),
        SlottedProtocol::Lightning => {
            let n = lightning_n(eta).round().max(1.0);
            lightning_slots(eta, spec.beta, spec.delta, n)?
        }
        SlottedProtocol::GNihao => {
            let gamma = spec.gamma_ratio;
            let (d_a, d_sl) = (d_a.as_f64(), spec.d_sl.as_f64());
            let x = nihao_x(eta, gamma, d_a, d_sl);
            let inner = x - d_a / d_sl;
            if inner < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "G-Nihao has no schedule for duty-cycle {eta}"
                )));
            }
            (x + inner.sqrt()).powi(2) * gamma
        }
    };
    Ok(slots)
}

pub fn slotted_latency(spec: &SlottedSpec, eta: f64, radio: &RadioParams) -> Result<Nanos> {
    let slots = slotted_slots(spec, eta, radio.d_a)?;
    Ok(Nanos::from_f64_ceil(slots * spec.d_sl.as_f64()))
}

/// Probability that a beacon lands on the beacon of a third device sharing
/// the slot: `3d_a / (3d_a + d_sl − 2d_a)`.
pub fn slotted_collision_probability(d_a: Nanos, d_sl: Nanos) -> Result<Ratio<i64>> {
    let min = d_a * 3;
    if d_a <= Nanos::ZERO || d_sl < min {
        return Err(Error::SlotTooShort { d_sl, min });
    }
    let listen = d_sl - d_a * 2;
    Ok(Ratio::new(3 * d_a.get(), 3 * d_a.get() + listen.get()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UtilizationInput {
    /// Symmetric slotless schedule.
    PiSymmetric { config: PiConfig },
    /// `active` slots with two beacons each in every hyper-period of
    /// `period` slots.
    Slotted {
        active: f64,
        period: f64,
        d_a: Nanos,
        d_sl: Nanos,
    },
    /// One beacon every `m` slots.
    GNihao { m: f64, d_a: Nanos, d_sl: Nanos },
}

/// Fraction of time one device occupies the channel with its own beacons.
pub fn channel_utilization(input: &UtilizationInput) -> Result<f64> {
    match *input {
        UtilizationInput::PiSymmetric { config } => match config.t_a.finite() {
            Some(t_a) => Ok(config.d_a.as_f64() / t_a.as_f64()),
            None => Ok(0.0),
        },
        UtilizationInput::Slotted {
            active,
            period,
            d_a,
            d_sl,
        } => {
            if !(period > 0.0 && active >= 0.0 && active <= period) {
                return Err(Error::InvalidParameter("inconsistent slotted schedule".into()));
            }
            Ok(2.0 * active * d_a.as_f64() / (period * d_sl.as_f64()))
        }
        UtilizationInput::GNihao { m, d_a, d_sl } => {
            if !(1.0..).contains(&m) {
                return Err(Error::InvalidParameter("G-Nihao needs m >= 1".into()));
            }
            Ok(d_a.as_f64() / (m * d_sl.as_f64()))
        }
    }
}

/// G-Nihao beacon spacing `m` for a target duty-cycle, rounded to an integer.
pub fn nihao_m(eta: f64, gamma: f64, d_a: Nanos, d_sl: Nanos) -> f64 {
    (2.0 * nihao_x(eta, gamma, d_a.as_f64(), d_sl.as_f64())).round().max(1.0)
}

/// Duty-cycle G-Nihao actually runs at for an integer `m`.
pub fn nihao_eta(m: f64, gamma: f64, d_a: Nanos, d_sl: Nanos) -> f64 {
    let (d_a, d_sl) = (d_a.as_f64(), d_sl.as_f64());
    (d_sl + gamma * d_a) / (gamma * m * d_sl)
}

/// Utilization of a baseline at duty-cycle `eta`, from its schedule shape.
pub fn baseline_utilization(spec: &SlottedSpec, eta: f64, radio: &RadioParams) -> Result<f64> {
    check_eta(eta)?;
    spec.validate(radio.d_a)?;
    let (d_a, d_sl) = (radio.d_a, spec.d_sl);
    let slotted = |active: f64, period: f64| {
        channel_utilization(&UtilizationInput::Slotted {
            active,
            period,
            d_a,
            d_sl,
        })
    };
    match spec.protocol {
        SlottedProtocol::SearchlightS => slotted(2.0, searchlight_period(eta)),
        SlottedProtocol::Disco => slotted(2.0, (2.0 / eta).round().max(2.0)),
        SlottedProtocol::UConnect => {
            let p = ((3.0 + (9.0 + 8.0 * eta).sqrt()) / (4.0 * eta)).round().max(1.0);
            slotted((3.0 * p + 1.0) / 2.0, p * p)
        }
        SlottedProtocol::OptDiffCodes => {
            let a = (1.0 / eta).round().max(1.0);
            slotted(a, a * a)
        }
        SlottedProtocol::GNihao => channel_utilization(&UtilizationInput::GNihao {
            m: nihao_m(eta, spec.gamma_ratio, d_a, d_sl),
            d_a,
            d_sl,
        }),
        SlottedProtocol::Lightning => Err(Error::InvalidParameter(
            "utilization is not modeled for Lightning".into(),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    pub eta: f64,
    pub protocol: SlottedProtocol,
    #[serde(rename = "d_m_slotted_ns")]
    pub d_m_slotted: Nanos,
    #[serde(rename = "d_m_pikm_ns")]
    pub d_m_pikm: Nanos,
    pub gain: f64,
    #[serde(rename = "d_m_pikm_guarded_ns")]
    pub d_m_pikm_guarded: Nanos,
    pub gain_guarded: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSummary {
    pub protocol: SlottedProtocol,
    pub mean_gain: f64,
    pub max_gain: f64,
    pub min_gain: f64,
    pub mean_gain_guarded: f64,
    pub max_gain_guarded: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainTable {
    /// Grid-major: all protocols of the first η, then the next η.
    pub rows: Vec<GainRow>,
    pub summary: Vec<GainSummary>,
}

impl GainTable {
    pub fn summary_for(&self, protocol: SlottedProtocol) -> Option<&GainSummary> {
        self.summary.iter().find(|s| s.protocol == protocol)
    }
}

/// Evenly spaced grid from `lo` to `hi` inclusive, tolerant to float drift.
pub fn eta_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi < 1.0 && lo <= hi && step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bad duty-cycle grid {lo}..{hi} step {step}"
        )));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}

fn pikm_opt(eta: f64, radio: &RadioParams) -> Result<crate::VariantSolution> {
    derive_best(&OptimizerRequest::new(eta, VariantChoice::Best).with_radio(*radio))
}

/// Gain of every baseline over PI-kMOpt at every grid point, plus the same
/// with PI-kMOpt hardened against `radio.skew_ppm`.
pub fn gain_table(eta_grid: &[f64], radio: &RadioParams, d_sl: Nanos) -> Result<GainTable> {
    if eta_grid.is_empty() {
        return Err(Error::InvalidParameter("empty duty-cycle grid".into()));
    }
    let per_eta: Vec<Vec<GainRow>> = eta_grid
        .par_iter()
        .map(|&eta| {
            let sol = pikm_opt(eta, radio)?;
            let guarded = apply_skew_guards(&sol, radio)?;
            SlottedProtocol::ALL
                .iter()
                .map(|&protocol| {
                    let d = slotted_latency(&SlottedSpec::new(protocol, d_sl), eta, radio)?;
                    Ok(GainRow {
                        eta,
                        protocol,
                        d_m_slotted: d,
                        d_m_pikm: sol.d_m,
                        gain: d.as_f64() / sol.d_m.as_f64(),
                        d_m_pikm_guarded: guarded.d_m,
                        gain_guarded: d.as_f64() / guarded.d_m.as_f64(),
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<GainRow> = per_eta.into_iter().flatten().collect();
    let summary = SlottedProtocol::ALL
        .iter()
        .map(|&protocol| {
            let mine: Vec<&GainRow> = rows.iter().filter(|r| r.protocol == protocol).collect();
            let n = mine.len() as f64;
            let fold_max = |f: fn(&GainRow) -> f64| mine.iter().map(|r| f(r)).fold(f64::MIN, f64::max);
            GainSummary {
                protocol,
                mean_gain: mine.iter().map(|r| r.gain).sum::<f64>() / n,
                max_gain: fold_max(|r| r.gain),
                min_gain: mine.iter().map(|r| r.gain).fold(f64::MAX, f64::min),
                mean_gain_guarded: mine.iter().map(|r| r.gain_guarded).sum::<f64>() / n,
                max_gain_guarded: fold_max(|r| r.gain_guarded),
            }
        })
        .collect();
    Ok(GainTable { rows, summary })
}

/// Gain of an arbitrary latency curve over PI-kMOpt along the grid.
pub fn gains_against<F>(eta_grid: &[f64], radio: &RadioParams, reference: F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<Nanos> + Sync,
{
    eta_grid
        .par_iter()
        .map(|&eta| {
            let sol = pikm_opt(eta, radio)?;
            Ok(reference(eta)?.as_f64() / sol.d_m.as_f64())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Granularity {
    pub targets: Vec<f64>,
    /// Duty-cycle PI-kMOpt realizes for each target.
    pub pikm_achieved: Vec<f64>,
    /// Distinct duty-cycles G-Nihao can realize over the range, ascending.
    pub nihao_realizable: Vec<f64>,
}

pub fn granularity_study(
    eta_min: f64,
    eta_max: f64,
    step: f64,
    radio: &RadioParams,
    d_sl: Nanos,
) -> Result<Granularity> {
    let targets = eta_grid(eta_min, eta_max, step)?;
    let pikm_achieved = targets
        .par_iter()
        .map(|&eta| pikm_opt(eta, radio).map(|s| s.eta_achieved))
        .collect::<Result<Vec<f64>>>()?;
    let gamma = SlottedSpec::new(SlottedProtocol::GNihao, d_sl).gamma_ratio;
    let mut ms: Vec<i64> = targets
        .iter()
        .map(|&eta| nihao_m(eta, gamma, radio.d_a, d_sl) as i64)
        .collect();
    ms.sort_unstable();
    ms.dedup();
    let mut nihao_realizable: Vec<f64> = ms
        .into_iter()
        .map(|m| nihao_eta(m as f64, gamma, radio.d_a, d_sl))
        .collect();
    nihao_realizable.reverse();
    Ok(Granularity {
        targets,
        pikm_achieved,
        nihao_realizable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn radio() -> RadioParams {
        RadioParams::default()
    }

    fn spec(p: SlottedProtocol) -> SlottedSpec {
        SlottedSpec::new(p, Nanos::from_millis(10))
    }

    fn secs(p: SlottedProtocol, eta: f64) -> f64 {
        slotted_latency(&spec(p), eta, &radio()).unwrap().as_secs_f64()
    }

    #[test]
    fn table_entries_at_one_percent() {
        assert!((secs(SlottedProtocol::Disco, 0.01) - 400.0).abs() < 1e-6);
        assert!((secs(SlottedProtocol::OptDiffCodes, 0.01) - 50.0).abs() < 1e-6);
        let uc = ((50.0f64 + 5625.0).sqrt() + 75.0).powi(2) * 0.01;
        assert!((secs(SlottedProtocol::UConnect, 0.01) - uc).abs() < 1e-6);
        assert!((uc - 226.0).abs() < 1.0);
        // t = 200, 200·50 slots
        assert!((secs(SlottedProtocol::SearchlightS, 0.01) - 100.0).abs() < 1e-6);
        assert!((secs(SlottedProtocol::Lightning, 0.01) - 44.55).abs() < 0.01);
    }

    #[test]
    fn searchlight_table_form_is_available() {
        let mut s = spec(SlottedProtocol::SearchlightS);
        s.searchlight_table_form = true;
        let d = slotted_latency(&s, 0.01, &radio()).unwrap();
        assert_eq!(d, Nanos::from_millis(500));
    }

    #[test]
    fn nihao_matches_closed_expression() {
        let (d_a, d_sl, eta): (f64, f64, f64) = (0.368e-3, 10e-3, 0.05);
        let x = (d_sl + 2.0 * d_a) / (4.0 * eta * d_sl);
        let expected = (x + (x - d_a / d_sl).sqrt()).powi(2) * 2.0 * d_sl;
        assert!((secs(SlottedProtocol::GNihao, eta) - expected).abs() < 1e-8);
    }

    #[test]
    fn slotted_latency_scales_with_slot_length() {
        for p in SlottedProtocol::ALL {
            let a = slotted_latency(&SlottedSpec::new(p, Nanos::from_millis(10)), 0.05, &radio()).unwrap();
            let b = slotted_latency(&SlottedSpec::new(p, Nanos::from_millis(20)), 0.05, &radio()).unwrap();
            if p == SlottedProtocol::GNihao {
                assert!(b > a);
            } else {
                assert!((b - a * 2).abs() <= Nanos(1), "{p}");
            }
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(
            slotted_latency(&spec(SlottedProtocol::Disco), 0.0, &radio()),
            Err(Error::EtaOutOfRange(_))
        ));
        let short = SlottedSpec::new(SlottedProtocol::Disco, Nanos::from_micros(1000));
        assert!(matches!(
            slotted_latency(&short, 0.1, &radio()),
            Err(Error::SlotTooShort { .. })
        ));
    }

    #[test]
    fn collision_probability_landmarks() {
        let d_a = Nanos::from_micros(368);
        // a listen phase of 27 beacons
        let p = slotted_collision_probability(d_a, d_a * 29).unwrap();
        assert_eq!(p, Ratio::new(1, 10));
        let def = slotted_collision_probability(d_a, Nanos::from_millis(10)).unwrap();
        let v = *def.numer() as f64 / *def.denom() as f64;
        assert!((v - 0.1065).abs() < 1e-4);
        let huge = slotted_collision_probability(d_a, Nanos::from_secs(1000)).unwrap();
        assert!(*huge.numer() as f64 / (*huge.denom() as f64) < 1e-5);
        assert!(slotted_collision_probability(d_a, d_a * 2).is_err());
    }

    #[test]
    fn pi_utilization_is_a_ratio() {
        let cfg = PiConfig::symmetric(
            Nanos::from_millis(10),
            Nanos::from_millis(100),
            Nanos::from_millis(11),
            Nanos::from_micros(368),
        )
        .unwrap();
        let u = channel_utilization(&UtilizationInput::PiSymmetric { config: cfg }).unwrap();
        assert!((u - 0.0368).abs() < 1e-12);
    }

    // Enumerates a Searchlight-S period: anchor in slot 0 and a probe
    // elsewhere, each active slot opening and closing with a beacon.
    fn searchlight_enumerated(t: usize, d_a: f64, d_sl: f64) -> f64 {
        let mut busy = 0.0;
        for slot in 0..t {
            if slot == 0 || slot == t / 2 {
                busy += 2.0 * d_a;
            }
        }
        busy / (t as f64 * d_sl)
    }

    #[test]
    fn searchlight_utilization_matches_schedule() {
        let r = radio();
        for eta in [0.01, 0.05, 0.1, 0.2] {
            let u = baseline_utilization(&spec(SlottedProtocol::SearchlightS), eta, &r).unwrap();
            let t = searchlight_period(eta) as usize;
            let e = searchlight_enumerated(t, r.d_a.as_f64(), 10e6);
            assert!((u - e).abs() < 1e-12);
        }
    }

    #[test]
    fn pi_utilizes_more_than_searchlight_yet_below_four_percent() {
        let r = radio();
        for eta in eta_grid(0.01, 0.2, 0.01).unwrap() {
            let sol = pikm_opt(eta, &r).unwrap();
            let pi = channel_utilization(&UtilizationInput::PiSymmetric { config: sol.config }).unwrap();
            let sl = baseline_utilization(&spec(SlottedProtocol::SearchlightS), eta, &r).unwrap();
            assert!(pi > sl, "eta={eta}");
            assert!(pi < 0.04, "eta={eta}");
        }
    }

    #[test]
    fn single_point_gain_table() {
        let t = gain_table(&[0.05], &radio(), Nanos::from_millis(10)).unwrap();
        assert_eq!(t.rows.len(), SlottedProtocol::ALL.len());
        for row in &t.rows {
            assert!(row.gain > 1.0, "{:?}", row.protocol);
        }
    }

    #[test]
    fn self_gain_is_one() {
        let r = radio();
        let grid = eta_grid(0.01, 0.2, 0.01).unwrap();
        let gains = gains_against(&grid, &r, |eta| Ok(pikm_opt(eta, &r)?.d_m)).unwrap();
        assert!(gains.iter().all(|&g| g == 1.0));
    }

    #[test]
    fn grid_endpoints_are_inclusive() {
        let g = eta_grid(0.01, 0.2, 0.001).unwrap();
        assert_eq!(g.len(), 191);
        assert!((g[190] - 0.2).abs() < 1e-12);
        assert_eq!(eta_grid(0.05, 0.05, 0.01).unwrap(), vec![0.05]);
    }

    #[test]
    fn granularity_degenerate_and_finite() {
        let r = radio();
        let one = granularity_study(0.05, 0.05, 0.001, &r, Nanos::from_millis(10)).unwrap();
        assert_eq!(one.targets.len(), 1);
        assert_eq!(one.pikm_achieved.len(), 1);
        assert_eq!(one.nihao_realizable.len(), 1);
        let full = granularity_study(0.001, 0.2, 0.0005, &r, Nanos::from_millis(10)).unwrap();
        assert!(full.nihao_realizable.len() < full.targets.len());
        assert!(full.nihao_realizable.windows(2).all(|w| w[0] < w[1]));
    }

    proptest! {
        #[test]
        fn table_formulas_decrease_in_eta(a in 0.005f64..0.2, b in 0.005f64..0.2) {
            prop_assume!((a - b).abs() > 1e-6);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let r = radio();
            for p in [SlottedProtocol::Disco, SlottedProtocol::UConnect, SlottedProtocol::OptDiffCodes, SlottedProtocol::GNihao] {
                prop_assert!(slotted_slots(&spec(p), lo, r.d_a).unwrap() > slotted_slots(&spec(p), hi, r.d_a).unwrap());
            }
            let light = |e: f64| lightning_slots(e, 0.1, 0.1, lightning_n(e)).unwrap();
            prop_assert!(light(lo) > light(hi));
            let sl = SlottedProtocol::SearchlightS;
            prop_assert!(slotted_slots(&spec(sl), lo, r.d_a).unwrap() >= slotted_slots(&spec(sl), hi, r.d_a).unwrap());
        }
    }
}
