//! Closed-form worst-case discovery latencies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{gamma, PiConfig, RadioParams, Variant, VariantSolution};
use crate::time::Nanos;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Direction {
    Shrink,
    Grow,
    None,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Shrink => "shrinking",
            Direction::Grow => "growing",
            Direction::None => "no",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BoundSource {
    ClosedForm,
    SweepOracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyBound {
    #[serde(rename = "d_m_ns")]
    pub d_m: Nanos,
    pub order: u8,
    pub direction: Direction,
    pub source: BoundSource,
}

impl LatencyBound {
    fn closed(d_m: Nanos, order: u8, direction: Direction) -> Self {
        LatencyBound {
            d_m,
            order,
            direction,
            source: BoundSource::ClosedForm,
        }
    }
}

/// `⌈(T_s − d_s + d_a)/T_a⌉·T_a + d_a`, valid while every scan window is
/// wide enough to catch a beacon whatever the offset.
pub fn worst_case_order0(cfg: &PiConfig) -> Result<LatencyBound> {
    let (t_a, t_s) = cfg.finite_intervals()?;
    let g = cfg.usable_window();
    if t_a > g {
        return Err(Error::OrderViolation {
            expected: 0,
            reason: format!("T_a = {t_a} exceeds d_s - d_a = {g}"),
        });
    }
    let d_m = t_a * (t_s - g).div_ceil(t_a) + cfg.d_a;
    Ok(LatencyBound::closed(d_m, 0, Direction::None))
}

/// Neighborhood type of an order-1 process: shrinking when the
/// `⌊T_s/T_a⌋` neighbor moves by less than the `⌈T_s/T_a⌉` one.
pub fn classify_direction(cfg: &PiConfig) -> Result<Direction> {
    let (t_a, t_s) = cfg.finite_intervals()?;
    if t_a > t_s {
        return Err(Error::OrderViolation {
            expected: 1,
            reason: format!("T_a = {t_a} exceeds T_s = {t_s}"),
        });
    }
    let rho = t_s.rem_euclid(t_a);
    let gam = gamma(t_a, t_s)?;
    Ok(if rho <= gam {
        Direction::Shrink
    } else {
        Direction::Grow
    })
}

struct Order1 {
    t_a: Nanos,
    t_s: Nanos,
    g: Nanos,
    gamma: Nanos,
}

fn order1_parts(cfg: &PiConfig, wanted: Direction) -> Result<Order1> {
    let (t_a, t_s) = cfg.finite_intervals()?;
    let g = cfg.usable_window();
    let violation = |reason: String| Err(Error::OrderViolation { expected: 1, reason });
    if t_a <= g {
        return violation(format!("T_a = {t_a} fits into d_s - d_a = {g}"));
    }
    if t_a > t_s {
        return violation(format!("T_a = {t_a} exceeds T_s = {t_s}"));
    }
    let gam = gamma(t_a, t_s)?;
    if gam == Nanos::ZERO {
        return violation("T_s is a multiple of T_a, the offset never moves".into());
    }
    if gam > g {
        return violation(format!("gamma = {gam} exceeds d_s - d_a = {g}"));
    }
    let actual = classify_direction(cfg)?;
    if actual != wanted {
        return Err(Error::WrongDirection {
            expected: wanted.name(),
            actual: actual.name(),
        });
    }
    Ok(Order1 {
        t_a,
        t_s,
        g,
        gamma: gam,
    })
}

/// `⌈(T_a − d_s + d_a)/γ⌉`, the number of γ steps needed to cross the gap
/// between two beacons.
pub fn gamma_steps(t_a: Nanos, g: Nanos, gam: Nanos) -> i64 {
    (t_a - g).div_ceil(gam)
}

pub fn worst_case_order1_shrink(cfg: &PiConfig) -> Result<LatencyBound> {
    let p = order1_parts(cfg, Direction::Shrink)?;
    let lead = p.t_a * (p.t_s - p.t_a).div_ceil(p.t_a);
    let steps = gamma_steps(p.t_a, p.g, p.gamma);
    let d_m = lead + p.t_a * (steps * p.t_s.div_floor(p.t_a)) + cfg.d_a;
    Ok(LatencyBound::closed(d_m, 1, Direction::Shrink))
}

pub fn worst_case_order1_grow(cfg: &PiConfig) -> Result<LatencyBound> {
    let p = order1_parts(cfg, Direction::Grow)?;
    // ⌈(T_s + g)/T_a − 1⌉ = ⌈(T_s + g)/T_a⌉ − 1
    let lead = p.t_a * ((p.t_s + p.g).div_ceil(p.t_a) - 1);
    let steps = gamma_steps(p.t_a, p.g, p.gamma);
    let d_m = lead + p.t_a * (steps * p.t_s.div_ceil(p.t_a)) + cfg.d_a;
    Ok(LatencyBound::closed(d_m, 1, Direction::Grow))
}

/// Best applicable closed form for an arbitrary configuration.
pub fn closed_form_bound(cfg: &PiConfig) -> Result<LatencyBound> {
    let (t_a, _) = cfg.finite_intervals()?;
    if t_a <= cfg.usable_window() {
        return worst_case_order0(cfg);
    }
    match classify_direction(cfg)? {
        Direction::Shrink => worst_case_order1_shrink(cfg),
        _ => worst_case_order1_grow(cfg),
    }
}

fn check_family_params(k: u32, m: u32, d_s: Nanos, d_a: Nanos) -> Result<()> {
    if k == 0 || m == 0 {
        return Err(Error::InvalidParameter(format!(
            "k and M must be positive, got k = {k}, M = {m}"
        )));
    }
    if d_s <= d_a {
        return Err(Error::InvalidParameter(format!(
            "scan window {d_s} must exceed the beacon duration {d_a}"
        )));
    }
    Ok(())
}

/// Worst-case latency of the PI-kM construction with `T_s` placed `eps` below
/// its ceiling flip. Rounded up to the next nanosecond.
pub fn pi_km_closed_form(
    k: u32,
    m: u32,
    d_s: Nanos,
    radio: &RadioParams,
    eps: Nanos,
) -> Result<Nanos> {
    check_family_params(k, m, d_s, radio.d_a)?;
    let g = (d_s - radio.d_a).get() as i128;
    let (k, m, eps) = (k as i128, m as i128, eps.get() as i128);
    let body = if k == 1 {
        (m - 1) * ((m + 1) * g - eps)
    } else {
        let num = (k * (m + 1) * g - eps) * (k * (m + 1) - 2);
        num.div_euclid(k) + i128::from(num.rem_euclid(k) != 0)
    };
    let d_m = body + radio.d_a.get() as i128;
    i64::try_from(d_m)
        .map(Nanos)
        .map_err(|_| Error::InvalidParameter("latency overflows".into()))
}

/// `M·(d_s − d_a) + d_a`, the order-0 bound of the PI-0M construction.
pub fn pi0m_closed_form(m: u32, d_s: Nanos, radio: &RadioParams) -> Result<Nanos> {
    check_family_params(1, m, d_s, radio.d_a)?;
    Ok((d_s - radio.d_a) * m as i64 + radio.d_a)
}

pub fn worst_case_closed_form(
    variant: Variant,
    k: u32,
    m: u32,
    d_s: Nanos,
    radio: &RadioParams,
    eps: Nanos,
) -> Result<Nanos> {
    match variant {
        Variant::Pi0m => pi0m_closed_form(m, d_s, radio),
        Variant::Pik1p | Variant::Pik2p => pi_km_closed_form(k, m, d_s, radio, eps),
    }
}

/// Closed form for a stored solution. A skew guard shortens the effective
/// window by `eps_ta`, so the formula is evaluated at `d_s − eps_ta`.
pub fn solution_closed_form(sol: &VariantSolution) -> Result<Nanos> {
    let radio = RadioParams {
        d_a: sol.config.d_a,
        ..RadioParams::default()
    };
    worst_case_closed_form(
        sol.variant,
        sol.k,
        sol.m,
        sol.config.d_s - sol.eps_ta,
        &radio,
        sol.eps,
    )
}
