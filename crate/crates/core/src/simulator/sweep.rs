use rayon::prelude::*;

use super::pair::{default_horizon, offset_period, run_pair};
use super::timeline::Device;
use crate::error::{Error, Result};
use crate::model::{CdfCurve, PiConfig};
use crate::time::Nanos;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub step: Nanos,
    pub horizon: Option<Nanos>,
    /// Also evaluate every offset at which some reception starts or stops
    /// being possible.
    pub breakpoints: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            step: Nanos::from_micros(1),
            horizon: None,
            breakpoints: true,
        }
    }
}

impl SweepOptions {
    pub fn with_step(step: Nanos) -> Self {
        SweepOptions {
            step,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub curve: CdfCurve,
    /// Offset of B relative to A with the largest latency.
    pub worst_offset: Nanos,
    pub samples: usize,
}

/// Relative offsets where latency may change: beacon `i` of one device
/// touching a window edge of the other.
fn breakpoints(a: &PiConfig, b: &PiConfig, period: Nanos, horizon: Nanos) -> Vec<i64> {
    let mut out = Vec::new();
    let p = period.get();
    for (tx, rx) in [(a, b), (b, a)] {
        let (Some(t_a), Some(_)) = (tx.t_a.finite(), rx.t_s.finite()) else { continue };
        let g = (rx.d_s - tx.d_a).get();
        let n = (horizon + period).div_floor(t_a) + 2;
        for i in 0..=n {
            let base = i * t_a.get();
            for d in [-g - 1, -g, -g + 1, -1, 0, 1, g - 1, g, g + 1] {
                out.push((base + d).rem_euclid(p));
                out.push((-base + d).rem_euclid(p));
            }
        }
    }
    out
}

/// Exhaustive latency over initial offsets of B relative to A, drawn from
/// `[0, T_s)`. Different configurations are also evaluated with the roles
/// swapped; each placement then carries half the weight.
pub fn sweep_pair(a: &PiConfig, b: &PiConfig, opts: &SweepOptions) -> Result<SweepResult> {
    a.validate()?;
    b.validate()?;
    let d_a = a.d_a.min(b.d_a);
    if opts.step < Nanos(1) || opts.step > d_a {
        return Err(Error::StepTooCoarse { step: opts.step, d_a });
    }
    let period = offset_period(a, b);
    let horizon = opts.horizon.unwrap_or_else(|| default_horizon(a, b));
    let mut offsets: Vec<i64> = (0..period.get()).step_by(opts.step.get() as usize).collect();
    if opts.breakpoints {
        offsets.extend(breakpoints(a, b, period, horizon));
        offsets.sort_unstable();
        offsets.dedup();
    }
    let symmetric = a == b;
    let placements: &[bool] = if symmetric { &[false] } else { &[false, true] };
    let evaluated: Vec<(i64, Vec<i64>)> = offsets
        .par_iter()
        .map(|&o| {
            let lats = placements
                .iter()
                .map(|&swap| {
                    let (oa, ob) = if swap { (o, 0) } else { (0, o) };
                    let da = Device::new(a, Nanos(oa), 0.0);
                    let db = Device::new(b, Nanos(ob), 0.0);
                    run_pair(a, b, &da, &db, horizon.get(), false)
                        .mutual
                        .ok_or(Error::Undiscovered { offset: Nanos(o), horizon })
                })
                .collect::<Result<Vec<i64>>>()?;
            Ok((o, lats))
        })
        .collect::<Result<_>>()?;
    let mut samples = Vec::with_capacity(evaluated.len() * placements.len());
    let mut worst = (i64::MIN, 0);
    for (i, (o, lats)) in evaluated.iter().enumerate() {
        let next = evaluated.get(i + 1).map_or(period.get(), |(n, _)| *n);
        let w = (next - o) as f64 / lats.len() as f64;
        for &l in lats {
            if l > worst.0 {
                worst = (l, *o);
            }
            samples.push((Nanos(l), w));
        }
    }
    Ok(SweepResult {
        curve: CdfCurve::from_weighted(samples)?,
        worst_offset: Nanos(worst.1),
        samples: evaluated.len(),
    })
}

/// Symmetric sweep of `cfg` against itself without collisions.
pub fn sweep_offsets(cfg: &PiConfig, step: Nanos) -> Result<CdfCurve> {
    sweep_pair(cfg, cfg, &SweepOptions::with_step(step)).map(|r| r.curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::{derive, one_way_split, OptimizerRequest, VariantChoice};
    use crate::Variant;

    fn solution(eta: f64, v: VariantChoice) -> crate::VariantSolution {
        derive(&OptimizerRequest::new(eta, v)).unwrap()
    }

    #[test]
    fn step_must_not_skip_a_beacon() {
        let s = solution(0.05, VariantChoice::Pi0m);
        assert!(matches!(
            sweep_offsets(&s.config, Nanos(368_001)),
            Err(Error::StepTooCoarse { .. })
        ));
        assert!(sweep_offsets(&s.config, Nanos::ZERO).is_err());
    }

    #[test]
    fn sweep_is_dominated_by_closed_form() {
        for eta in [0.02, 0.05, 0.1, 0.2] {
            for v in Variant::ALL {
                let Ok(s) = derive(&OptimizerRequest::new(eta, v.into())) else { continue };
                let curve = sweep_offsets(&s.config, Nanos(100_000)).unwrap();
                let t_a = s.config.t_a.finite().unwrap();
                assert!(curve.worst_case <= s.d_m, "{v} eta={eta}");
                assert!(s.d_m - curve.worst_case <= t_a + s.eps, "{v} eta={eta}");
            }
        }
    }

    #[test]
    fn pi0m_cdf_is_a_straight_line() {
        let s = solution(0.05, VariantChoice::Pi0m);
        let curve = sweep_offsets(&s.config, Nanos(50_000)).unwrap();
        let mean = curve.mean / s.d_m.as_f64();
        assert!((0.47..=0.53).contains(&mean), "{mean}");
        assert!(curve.max_line_deviation(s.d_m) <= 0.05);
        assert!(curve.points.windows(2).all(|w| w[0].cum_prob <= w[1].cum_prob));
    }

    #[test]
    fn one_way_matches_one_direction_of_the_symmetric_pair() {
        let s = solution(0.04, VariantChoice::Pik1p);
        let (adv, scan) = one_way_split(&s).unwrap();
        let opts = SweepOptions::with_step(Nanos(200_000));
        let one_way = sweep_pair(&adv, &scan, &opts).unwrap();
        let both = sweep_pair(&s.config, &s.config, &opts).unwrap();
        assert_eq!(one_way.curve.worst_case, both.curve.worst_case);
        assert!(one_way.curve.worst_case <= s.d_m);
    }

    #[test]
    fn finer_steps_barely_move_the_maximum() {
        let s = solution(0.15, VariantChoice::Pi0m);
        let coarse = sweep_pair(
            &s.config,
            &s.config,
            &SweepOptions { step: Nanos(1000), breakpoints: false, horizon: None },
        )
        .unwrap();
        let fine = sweep_pair(
            &s.config,
            &s.config,
            &SweepOptions { step: Nanos(100), breakpoints: false, horizon: None },
        )
        .unwrap();
        assert!(fine.curve.worst_case <= coarse.curve.worst_case + Nanos(1000) + s.config.d_a);
    }

    #[test]
    fn breakpoints_find_the_exact_maximum_on_a_coarse_grid() {
        let s = solution(0.1, VariantChoice::Pi0m);
        let exact = sweep_pair(&s.config, &s.config, &SweepOptions::with_step(Nanos(368_000))).unwrap();
        let dense = sweep_pair(
            &s.config,
            &s.config,
            &SweepOptions { step: Nanos(500), breakpoints: false, horizon: None },
        )
        .unwrap();
        assert!(exact.curve.worst_case >= dense.curve.worst_case);
    }
}
