//! Latency-optimal parameters for a target duty-cycle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latency::{pi0m_closed_form, pi_km_closed_form, solution_closed_form};
use crate::model::{duty_cycle, Constraint, Interval, PiConfig, RadioParams, Variant, VariantSolution};
use crate::time::Nanos;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VariantChoice {
    #[serde(rename = "PI0M")]
    Pi0m,
    #[serde(rename = "PIK1P")]
    Pik1p,
    #[serde(rename = "PIK2P")]
    Pik2p,
    #[serde(rename = "BEST")]
    Best,
}

impl From<Variant> for VariantChoice {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Pi0m => VariantChoice::Pi0m,
            Variant::Pik1p => VariantChoice::Pik1p,
            Variant::Pik2p => VariantChoice::Pik2p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerRequest {
    pub eta_target: f64,
    pub radio: RadioParams,
    #[serde(rename = "eps_ns")]
    pub eps: Nanos,
    pub variant: VariantChoice,
}

impl OptimizerRequest {
    /// Request with the default radio and ε of one crystal tick.
    pub fn new(eta_target: f64, variant: VariantChoice) -> Self {
        let radio = RadioParams::default();
        OptimizerRequest {
            eta_target,
            radio,
            eps: radio.tick,
            variant,
        }
    }

    pub fn with_radio(mut self, radio: RadioParams) -> Self {
        self.radio = radio;
        self.eps = radio.tick;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta_target > 0.0 && self.eta_target < 1.0) {
            return Err(Error::EtaOutOfRange(self.eta_target));
        }
        self.radio.validate()?;
        if self.eps <= Nanos::ZERO {
            return Err(Error::InvalidParameter("eps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaLimits {
    pub eta_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_adj: Option<f64>,
}

pub fn derive(req: &OptimizerRequest) -> Result<VariantSolution> {
    match req.variant {
        VariantChoice::Pi0m => derive_pi0m(req),
        VariantChoice::Pik1p => derive_pik1(req),
        VariantChoice::Pik2p => derive_pik2(req),
        VariantChoice::Best => derive_best(req),
    }
}

fn ns(radio: &RadioParams) -> (f64, f64) {
    (radio.d_a.as_f64(), radio.d_s_min.as_f64())
}

fn pi0m_eta_max(d_a: f64, d_sl: f64) -> f64 {
    (d_a + (d_a * d_sl).sqrt()) / (d_sl - d_a)
}

fn pik_eta_max(m: u32, d_a: f64, d_sl: f64) -> f64 {
    let num = 3.0 * d_a + (d_a * (d_a + 8.0 * d_sl)).sqrt();
    num / (4.0 * (m as f64 + 1.0) * (d_sl - d_a))
}

fn m_opt(eta: f64) -> f64 {
    ((1.0 - eta * eta).sqrt() + 1.0) / eta - 1.0
}

/// Upper bound on M imposed by `d_s ≥ d_s_min`, present only once the
/// duty-cycle is high enough for the bound to bind.
fn m_max(eta: f64, d_a: f64, d_sl: f64) -> Option<f64> {
    if eta <= d_a / (d_sl - d_a) {
        return None;
    }
    Some((d_sl * (eta - 1.0) - d_a * (eta + 1.0)) / (d_a * (eta + 1.0) - eta * d_sl))
}

/// Duty-cycle above which the `M_max` clamp pushes M a full step below its
/// optimum, found by bisection.
fn pi0m_eta_adj(d_a: f64, d_sl: f64) -> f64 {
    let gap = |eta: f64| m_opt(eta) - m_max(eta, d_a, d_sl).unwrap_or(f64::INFINITY) - 1.0;
    let mut lo = d_a / (d_sl - d_a) * (1.0 + 1e-9);
    let mut hi = pi0m_eta_max(d_a, d_sl);
    if gap(hi) < 0.0 {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

pub fn eta_limits(variant: Variant, radio: &RadioParams) -> EtaLimits {
    let (d_a, d_sl) = ns(radio);
    match variant {
        Variant::Pi0m => EtaLimits {
            eta_max: pi0m_eta_max(d_a, d_sl),
            eta_adj: Some(pi0m_eta_adj(d_a, d_sl)),
        },
        Variant::Pik1p => EtaLimits {
            eta_max: pik_eta_max(1, d_a, d_sl),
            eta_adj: None,
        },
        Variant::Pik2p => EtaLimits {
            eta_max: pik_eta_max(2, d_a, d_sl),
            eta_adj: None,
        },
    }
}

fn limit_formula(variant: Variant) -> &'static str {
    match variant {
        Variant::Pi0m => "(d_a + sqrt(d_a*d_s_min)) / (d_s_min - d_a)",
        Variant::Pik1p => "(3d_a + sqrt(d_a*(d_a + 8d_s_min))) / (8(d_s_min - d_a))",
        Variant::Pik2p => "(3d_a + sqrt(d_a*(d_a + 8d_s_min))) / (12(d_s_min - d_a))",
    }
}

fn check_eta_limit(variant: Variant, req: &OptimizerRequest) -> Result<EtaLimits> {
    req.validate()?;
    let limits = eta_limits(variant, &req.radio);
    if req.eta_target > limits.eta_max {
        return Err(Error::InfeasibleEta {
            variant,
            eta: req.eta_target,
            limit: limits.eta_max,
            limit_name: limit_formula(variant),
        });
    }
    Ok(limits)
}

fn pi0m_window(eta: f64, m: u32, d_a: f64) -> Option<Nanos> {
    let den = eta * (m as f64 + 1.0) - 1.0;
    if den <= 0.0 {
        return None;
    }
    Some(Nanos::from_f64_ceil(d_a + d_a * (m as f64 + 2.0) / den))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    variant: Variant,
    k: u32,
    m: u32,
    config: PiConfig,
    req: &OptimizerRequest,
    d_m: Nanos,
    clamped: Vec<Constraint>,
    beyond_eta_adj: bool,
) -> Result<VariantSolution> {
    Ok(VariantSolution {
        variant,
        k,
        m,
        eta_achieved: duty_cycle(&config)?,
        config,
        eps: req.eps,
        eps_ta: Nanos::ZERO,
        eta_target: req.eta_target,
        d_m,
        clamped,
        beyond_eta_adj,
    })
}

pub fn derive_pi0m(req: &OptimizerRequest) -> Result<VariantSolution> {
    let limits = check_eta_limit(Variant::Pi0m, req)?;
    let eta = req.eta_target;
    let (d_a, d_sl) = ns(&req.radio);
    let m_min = 1.0 / eta - 1.0;
    let m_max = m_max(eta, d_a, d_sl);
    let opt = m_opt(eta);
    let mut clamped = Vec::new();
    let mut m = match m_max {
        Some(hi) if opt > hi => {
            clamped.push(Constraint::MMax);
            hi.floor()
        }
        _ => opt.round(),
    };
    if m <= m_min {
        clamped.push(Constraint::MMin);
        m = m_min.floor() + 1.0;
    }
    if m_max.is_some_and(|hi| m > hi) {
        return Err(Error::RangesEmpty { variant: Variant::Pi0m, eta });
    }
    let mut m = m as u32;
    let mut d_s = pi0m_window(eta, m, d_a);
    // d_s falls with M; float error at the M_max edge is repaired by stepping down
    while d_s.is_none_or(|d| d < req.radio.d_s_min) {
        if (m as f64 - 1.0) <= m_min {
            return Err(Error::RangesEmpty { variant: Variant::Pi0m, eta });
        }
        m -= 1;
        if !clamped.contains(&Constraint::DsMin) {
            clamped.push(Constraint::DsMin);
        }
        d_s = pi0m_window(eta, m, d_a);
    }
    let d_s = d_s.unwrap();
    let g = d_s - req.radio.d_a;
    let t_s = g * (m as i64 + 1) - req.eps;
    let config = PiConfig::symmetric(g, t_s, d_s, req.radio.d_a)?;
    let d_m = pi0m_closed_form(m, d_s, &req.radio)?;
    let beyond = limits.eta_adj.is_some_and(|adj| eta > adj);
    finish(Variant::Pi0m, 1, m, config, req, d_m, clamped, beyond)
}

/// Scan window realizing duty-cycle `eta` with the PI-kM construction,
/// `d_a·K·(1 + η(M+1)) / ((M+1)(ηK − 1))` with `K = k(M+1) − 1`.
fn pik_window(eta: f64, k: u32, m: u32, d_a: f64) -> Option<Nanos> {
    let mp1 = m as f64 + 1.0;
    let big_k = k as f64 * mp1 - 1.0;
    let den = mp1 * (eta * big_k - 1.0);
    if den <= 0.0 {
        return None;
    }
    Some(Nanos::from_f64_ceil(d_a * big_k * (1.0 + eta * mp1) / den))
}

fn k_opt(eta: f64, m: u32) -> f64 {
    if m == 1 {
        (1.0 + ((1.0 - eta) * (1.0 + 2.0 * eta)).sqrt()) / (2.0 * eta) + 0.5
    } else {
        let mp1 = m as f64 + 1.0;
        1.0 / mp1 + (((1.0 - eta) * (eta * mp1 + 1.0)).sqrt() + 1.0) / (eta * mp1)
    }
}

/// Smallest k for which the construction reaches a positive window.
fn k_min(eta: f64, m: u32) -> f64 {
    (1.0 + eta) / ((m as f64 + 1.0) * eta)
}

/// Largest k whose window still reaches `d_s_min`; unbounded when the
/// coefficient changes sign.
fn k_max(eta: f64, m: u32, d_a: f64, d_sl: f64) -> Option<f64> {
    let mp1 = m as f64 + 1.0;
    let c = mp1 * eta * d_sl - (1.0 + mp1 * eta) * d_a;
    if c <= 0.0 {
        return None;
    }
    Some(d_sl / c + 1.0 / mp1)
}

fn derive_pik(variant: Variant, m: u32, req: &OptimizerRequest) -> Result<VariantSolution> {
    check_eta_limit(variant, req)?;
    let eta = req.eta_target;
    let (d_a, d_sl) = ns(&req.radio);
    let lo = k_min(eta, m);
    let hi = k_max(eta, m, d_a, d_sl);
    if hi.is_some_and(|hi| lo + 1.0 >= hi - 1.0) {
        return Err(Error::RangesEmpty { variant, eta });
    }
    let feasible = |k: i64| -> Option<Nanos> {
        if k < 1 || (k as f64) <= lo || hi.is_some_and(|hi| k as f64 > hi) {
            return None;
        }
        pik_window(eta, k as u32, m, d_a).filter(|&d| d >= req.radio.d_s_min)
    };
    let opt = k_opt(eta, m);
    let k0 = opt.round() as i64;
    let search_limit = hi.map_or(k0 + 2, |h| h.ceil() as i64 + 2).max(k0 + 2);
    let found = (0..=search_limit).find_map(|step| {
        // ties go to the candidate closer to k_opt
        let (first, second) = if opt >= k0 as f64 { (k0 + step, k0 - step) } else { (k0 - step, k0 + step) };
        feasible(first)
            .map(|d| (first, d))
            .or_else(|| feasible(second).map(|d| (second, d)))
    });
    let Some((k, d_s)) = found else {
        return Err(Error::RangesEmpty { variant, eta });
    };
    let mut clamped = Vec::new();
    if k != k0 {
        clamped.push(if (k0 as f64) <= lo {
            Constraint::KMin
        } else if hi.is_some_and(|hi| k0 as f64 > hi) {
            if m == 1 {
                Constraint::KLimit
            } else {
                Constraint::KMax
            }
        } else {
            Constraint::DsMin
        });
    }
    let k = k as u32;
    let (config, d_m) = pik_config(k, m, d_s, Nanos::ZERO, req.eps, &req.radio)?;
    finish(variant, k, m, config, req, d_m, clamped, false)
}

/// Builds the PI-kM schedule on an effective window shortened by `eps_ta`.
fn pik_config(
    k: u32,
    m: u32,
    d_s: Nanos,
    eps_ta: Nanos,
    eps: Nanos,
    radio: &RadioParams,
) -> Result<(PiConfig, Nanos)> {
    let g = d_s - radio.d_a - eps_ta;
    let t_s = g * (k as i64 * (m as i64 + 1) - 1) - eps;
    let t_a = Nanos((t_s + g).div_floor(Nanos(k as i64)));
    let config = PiConfig::symmetric(t_a, t_s, d_s, radio.d_a)?;
    let d_m = pi_km_closed_form(k, m, d_s - eps_ta, radio, eps)?;
    Ok((config, d_m))
}

pub fn derive_pik1(req: &OptimizerRequest) -> Result<VariantSolution> {
    derive_pik(Variant::Pik1p, 1, req)
}

pub fn derive_pik2(req: &OptimizerRequest) -> Result<VariantSolution> {
    derive_pik(Variant::Pik2p, 2, req)
}

/// Lowest-latency variant; ties keep the earlier of PI0M, PIK1P, PIK2P.
pub fn derive_best(req: &OptimizerRequest) -> Result<VariantSolution> {
    req.validate()?;
    let mut best: Option<VariantSolution> = None;
    for variant in Variant::ALL {
        let sub = OptimizerRequest {
            variant: variant.into(),
            ..*req
        };
        match derive(&sub) {
            Ok(sol) => {
                if best.as_ref().is_none_or(|b| sol.d_m < b.d_m) {
                    best = Some(sol);
                }
            }
            Err(Error::InfeasibleEta { .. } | Error::RangesEmpty { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| Error::InfeasibleEta {
        variant: Variant::Pi0m,
        eta: req.eta_target,
        limit: eta_limits(Variant::Pi0m, &req.radio).eta_max,
        limit_name: limit_formula(Variant::Pi0m),
    })
}

/// Hardens a solution against clock drift of `radio.skew_ppm` per device.
///
/// Both clocks may drift in opposite directions, so the guard is
/// `2·ψ·T_s`. `ε` grows to the guard and the usable window shrinks by it, so
/// beacons stay dense enough to land in every window.
pub fn apply_skew_guards(sol: &VariantSolution, radio: &RadioParams) -> Result<VariantSolution> {
    radio.validate()?;
    let (_, t_s) = sol.config.finite_intervals()?;
    let guard = Nanos::from_f64_ceil(2.0 * radio.skew_ppm * 1e-6 * t_s.as_f64());
    let eps = guard.max(sol.eps);
    let eps_ta = guard;
    let d_s = sol.config.d_s;
    let d_a = sol.config.d_a;
    let window = d_s - d_a;
    if eps_ta >= window {
        return Err(Error::GuardExceedsWindow { eps_ta, window });
    }
    let radio = RadioParams { d_a, ..*radio };
    let config = match sol.variant {
        Variant::Pi0m => {
            let g = window - eps_ta;
            PiConfig::symmetric(g, g * (sol.m as i64 + 1) - eps, d_s, d_a)?
        }
        _ => pik_config(sol.k, sol.m, d_s, eps_ta, eps, &radio)?.0,
    };
    let mut out = VariantSolution {
        config,
        eps,
        eps_ta,
        eta_achieved: duty_cycle(&config)?,
        ..sol.clone()
    };
    out.d_m = solution_closed_form(&out)?;
    Ok(out)
}

/// Splits a symmetric schedule into a pure advertiser and a pure scanner
/// whose duty-cycles add up to the symmetric one.
pub fn one_way_split(sol: &VariantSolution) -> Result<(PiConfig, PiConfig)> {
    let c = sol.config;
    let advertiser = PiConfig::new(c.t_a, Interval::Infinite, c.d_s, c.d_a)?;
    let scanner = PiConfig::new(Interval::Infinite, c.t_s, c.d_s, c.d_a)?;
    Ok((advertiser, scanner))
}
