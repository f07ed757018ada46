//! Explicit constants and the (η, K, T) planner.
//!
//! Everything here is a pure function of a [`PotentialSpec`]'s declared
//! constants. Conventions shared by every formula:
//!
//! - `N` is the number of Hölder terms, `L = 1 ∨ maxᵢ Lᵢ`
//! - `α = α₁` is the smallest exponent and `α_N` the largest
//! - `ln π` inside d̃ is the natural log of the circle constant
//!
//! Several constants exist in two forms that differ by constant factors. The
//! [`Variant`] toggle selects between them; [`Variant::Statement`] is the
//! default everywhere.

use std::fmt::Write as _;

use crate::pgauss::{smoothing_scale, SmoothingConfig};
use crate::potential::{Dissipativity, PlannerHypotheses, PotentialSpec};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Variant {
    /// The constants as displayed in the bound statements.
    #[default]
    Statement,
    /// The forms that appear inside the derivations (D₁ with L⁴, D₂ as
    /// `NL²Σᵢ(2A₂ᵢ + 4d^{αᵢ})`, A with exponents 1/(1−δ₁), δ₂/(1−δ₁),
    /// δ₁/(1−δ₁)).
    Proof,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Statement => "statement",
            Variant::Proof => "proof",
        }
    }
}

/// δ₁ of the planner.
pub const DELTA1: f64 = 0.75;

struct Consts {
    n: f64,
    l: f64,
    d: f64,
    dissip: Dissipativity,
}

fn consts(spec: &PotentialSpec) -> Consts {
    Consts {
        n: spec.n_terms() as f64,
        l: spec.l_max(),
        d: spec.dim() as f64,
        dissip: spec.dissip,
    }
}

fn check_dissip(spec: &PotentialSpec) -> Result<()> {
    let Dissipativity { a, beta, .. } = spec.dissip;
    if !(a > 0.0) || !(beta > 0.0) {
        return Err(Error::param("dissip", "a and beta must be > 0"));
    }
    Ok(())
}

/// Errors unless `β ≥ 2α_N`, the hypothesis under which the descent constants
/// and the planner apply.
pub fn check_eligible(spec: &PotentialSpec) -> Result<PlannerHypotheses> {
    let h = spec.hypotheses();
    if !h.beta_ge_two_alpha_n() {
        return Err(Error::Ineligible(format!(
            "beta >= 2*alpha_N fails: beta = {}, 2*alpha_N = {} (beta >= 2*alpha_N^2: {})",
            spec.dissip.beta,
            2.0 * spec.alpha_n(),
            h.beta_ge_two_alpha_n_sq()
        )));
    }
    Ok(h)
}

/// `d̃ = (d/β)[(β/2) ln π + ln(4β/a) + (1 − β/2) ln(d/(2e))]`.
pub fn tilde_d(spec: &PotentialSpec) -> Result<f64> {
    check_dissip(spec)?;
    let Consts { d, dissip, .. } = consts(spec);
    let Dissipativity { a, beta, .. } = dissip;
    Ok(d / beta
        * (beta / 2.0 * std::f64::consts::PI.ln()
            + (4.0 * beta / a).ln()
            + (1.0 - beta / 2.0) * (d / (2.0 * std::f64::consts::E)).ln()))
}

/// `c̃ = ½ ln(2/β) + Σᵢ Lᵢ/(αᵢ+1)·(2b/a)^{(αᵢ+1)/β} + b/β + |U(0)|`.
pub fn tilde_c(spec: &PotentialSpec) -> Result<f64> {
    check_dissip(spec)?;
    let Dissipativity { a, b, beta } = spec.dissip;
    let sum: f64 = spec
        .smooth_terms
        .iter()
        .map(|t| t.l / (t.alpha + 1.0) * (2.0 * b / a).powf((t.alpha + 1.0) / beta))
        .sum();
    Ok(0.5 * (2.0 / beta).ln() + sum + b / beta + spec.value_at_origin().abs())
}

/// `c̃_μ = c̃ + NLμ^{1+α}/(1+α)·d^{2/(2∧p)}`.
pub fn tilde_c_mu(spec: &PotentialSpec, mu: f64, p: f64) -> Result<f64> {
    Ok(tilde_c(spec)? + crate::pgauss::value_gap_bound(spec, mu, p))
}

/// `(c̃ or c̃_μ, d̃)`; the smoothed `c̃_μ` is returned when `smoothing` is set.
pub fn tilde_constants(
    spec: &PotentialSpec,
    smoothing: Option<&SmoothingConfig>,
) -> Result<(f64, f64)> {
    let c = match smoothing {
        Some(cfg) => tilde_c_mu(spec, cfg.mu, cfg.p)?,
        None => tilde_c(spec)?,
    };
    Ok((c, tilde_d(spec)?))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DescentConstants {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

/// Descent constants (D₁, D₂, D₃ = 4D₁H₀ + D₂), or their smoothed analogues
/// (D_{μ1}, D_{μ2}, D_{μ3}) when `smoothing` is given. `p` is the exponent
/// parameter entering `d^{3αᵢ/p}`; the smoothed form uses `smoothing.p`.
pub fn descent_constants(
    spec: &PotentialSpec,
    p: f64,
    h0: f64,
    smoothing: Option<&SmoothingConfig>,
    variant: Variant,
) -> Result<DescentConstants> {
    check_eligible(spec)?;
    if !(h0 >= 0.0) {
        return Err(Error::param("H0", "must be >= 0"));
    }
    let (d1, d2) = match smoothing {
        None => plain_d12(spec, p, variant)?,
        Some(cfg) => smoothed_d12(spec, cfg, variant)?,
    };
    Ok(DescentConstants {
        d1,
        d2,
        d3: 4.0 * d1 * h0 + d2,
    })
}

fn plain_d12(spec: &PotentialSpec, p: f64, variant: Variant) -> Result<(f64, f64)> {
    let Consts { n, l, d, dissip } = consts(spec);
    let Dissipativity { a, beta, .. } = dissip;
    let core = 1.5 + tilde_d(spec)? + tilde_c(spec)?;
    let alphas = spec.smooth_terms.iter().map(|t| t.alpha);
    Ok(match variant {
        Variant::Statement => {
            let d1 = 16.0 * a / beta * n.powi(4) * l.powi(6) * core;
            let d2 = n * alphas
                .map(|ai| {
                    16.0 * a / beta * n * n * l.powf(2.0 + 4.0 * ai) * core
                        + 4.0 * n * n * l.powf(2.0 + 4.0 * ai)
                        + 8.0 * n.powf(2.0 * ai) * l.powf(2.0 + 2.0 * ai) * d.powf(3.0 * ai / p)
                        + 4.0 * l * l * d.powf(ai)
                })
                .sum::<f64>();
            (d1, d2)
        }
        Variant::Proof => {
            let d1 = 16.0 * a / beta * n.powi(4) * l.powi(4) * core;
            let d2 = n * l * l
                * alphas
                    .map(|ai| {
                        let a2i = 2.0
                            * n
                            * n
                            * l
                            * l
                            * (2.0 * d.powf(3.0 * ai / p) + 1.0 + 4.0 * a / beta * core);
                        2.0 * a2i + 4.0 * d.powf(ai)
                    })
                    .sum::<f64>();
            (d1, d2)
        }
    })
}

fn smoothed_d12(spec: &PotentialSpec, cfg: &SmoothingConfig, variant: Variant) -> Result<(f64, f64)> {
    let Consts { n, l, d, dissip } = consts(spec);
    let Dissipativity { a, beta, .. } = dissip;
    let (mu, p) = (cfg.mu, cfg.p);
    if !(mu > 0.0) {
        return Err(Error::param("mu", "smoothed constants need mu > 0"));
    }
    let alpha = spec.alpha();
    let core = 1.5 + tilde_d(spec)? + tilde_c_mu(spec, mu, p)?;
    let a_mu1 = 8.0 * a / beta * n * n * l * l * core;
    let gap = smoothing_scale(spec, mu) * d.powf(2.0 / p.min(2.0));
    let lip_part = 2.0 * n * l / mu.powf(1.0 - alpha) * d.powf(4.0 / p) + 2.0 * gap * gap;
    let a_mu2_sum: f64 = spec
        .smooth_terms
        .iter()
        .map(|t| {
            2.0 * n * n * l * l
                + 2.0 * n * n * l * l * (4.0 * a / beta) * core
                + 2.0 * lip_part.powf(t.alpha)
        })
        .sum();
    let e = (3.0 / p).max(2.5);
    let first_order = n * l * mu / (1.0 + alpha) * d.powf(e);
    let var_term = 8.0 * n * n * l * l * d.powf(2.0 * alpha / p);
    let bias = smoothing_scale(spec, mu) * d.powf(e);
    let tail: f64 = spec
        .smooth_terms
        .iter()
        .map(|t| {
            6.0 * (bias.powf(2.0 * t.alpha) + var_term.powf(t.alpha)) + 4.0 * d.powf(t.alpha)
        })
        .sum();
    let dmu1 = 36.0 * n * n * l * l * a_mu1;
    let (c_sum, c_sq) = match variant {
        Variant::Statement => (18.0, 6.0),
        Variant::Proof => (36.0, 12.0),
    };
    let dmu2 = c_sum * n * l * l * a_mu2_sum
        + c_sq * first_order * first_order
        + var_term
        + 6.0 * n * l * l * tail;
    Ok((dmu1, dmu2))
}

/// `η ≤ min{(1/(2TD₁))^{1/(2α)}, (H₀/(2TD₂))^{1/α}}`, the step-size condition
/// under which the KL stays below 4H₀ up to time T.
pub fn descent_eta_threshold(dc: &DescentConstants, h0: f64, t: f64, alpha: f64) -> f64 {
    (1.0 / (2.0 * t * dc.d1))
        .powf(1.0 / (2.0 * alpha))
        .min((h0 / (2.0 * t * dc.d2)).powf(1.0 / alpha))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentGrowth {
    /// `C_s = ((3a+2b+3)/(1∧a))^{(s−2)/β+1} s^s d^{(s−2)/β+1}`
    pub c_s: f64,
    /// Bound on `M_s(p₀+π)` for the N(0, I/L) start:
    /// `2((3a+b+3)/a)^{s/β} s^{s/β} d^{s/β}`
    pub init_bound: f64,
    /// Largest η for which the linear growth holds: `½(1 ∧ a/(2N²L²))`.
    pub eta_threshold: f64,
}

pub fn moment_growth_cs(spec: &PotentialSpec, s: u32) -> Result<MomentGrowth> {
    if s < 2 || s % 2 != 0 {
        return Err(Error::param("s", format!("{s} must be an even integer >= 2")));
    }
    check_dissip(spec)?;
    let Consts { n, l, d, dissip } = consts(spec);
    let Dissipativity { a, b, beta } = dissip;
    let s = s as f64;
    let e = (s - 2.0) / beta + 1.0;
    Ok(MomentGrowth {
        c_s: ((3.0 * a + 2.0 * b + 3.0) / a.min(1.0)).powf(e) * s.powf(s) * d.powf(e),
        init_bound: 2.0
            * ((3.0 * a + b + 3.0) / a).powf(s / beta)
            * s.powf(s / beta)
            * d.powf(s / beta),
        eta_threshold: 0.5 * (1f64).min(a / (2.0 * n * n * l * l)),
    })
}

/// `λ = 6NLγ^{−1/4}`.
pub fn lambda(spec: &PotentialSpec, gamma: f64) -> f64 {
    6.0 * spec.n_terms() as f64 * spec.l_max() * gamma.powf(-0.25)
}

/// `√2 + 2(NLμ^{1+α}/(1+α))·d^{2/p ∨ 2}·√(1/γ₁)`, the λ used for smoothed
/// plans.
pub fn lambda_smoothed(spec: &PotentialSpec, cfg: &SmoothingConfig, gamma1: f64) -> f64 {
    let d = spec.dim() as f64;
    2f64.sqrt()
        + 2.0 * smoothing_scale(spec, cfg.mu) * d.powf((2.0 / cfg.p).max(2.0)) * (1.0 / gamma1).sqrt()
}

/// Initial-KL surrogate for the N(0, I/L) start:
/// `U(0) + NLμ^{1+α}d^{2/(2∧p)}/(1+α) − (d/2) ln(2πe/L) + Nd/(1+α)`.
/// Pass μ = 0 for unsmoothed runs.
///
/// This is an upper-bound template, not a KL value: it can be negative.
pub fn h0_surrogate(spec: &PotentialSpec, mu: f64, p: f64) -> f64 {
    let Consts { n, l, d, .. } = consts(spec);
    let alpha = spec.alpha();
    spec.value_at_origin() + crate::pgauss::value_gap_bound(spec, mu, p)
        - d / 2.0 * (2.0 * std::f64::consts::PI * std::f64::consts::E / l).ln()
        + n * d / (1.0 + alpha)
}

/// Picks η as the minimum of the five admissibility terms.
pub fn select_eta(terms: &[f64; 5]) -> f64 {
    terms.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// `[1, (1/(2TD₁))^{1/(2α)}, (H₀/(2TD₂))^{1/α}, (Aε/(2D₃))^{1/α}, (ε/(2TD₃))^{1/α}]`
pub fn eta_terms(
    dc: &DescentConstants,
    h0: f64,
    a_contraction: f64,
    eps: f64,
    t: f64,
    alpha: f64,
) -> [f64; 5] {
    [
        1.0,
        (1.0 / (2.0 * t * dc.d1)).powf(1.0 / (2.0 * alpha)),
        (h0 / (2.0 * t * dc.d2)).powf(1.0 / alpha),
        (a_contraction * eps / (2.0 * dc.d3)).powf(1.0 / alpha),
        (eps / (2.0 * t * dc.d3)).powf(1.0 / alpha),
    ]
}

/// Contraction factor A given `M = M_s(p₀+π) ∨ C_sT`.
pub fn contraction_a(lambda: f64, m: f64, s: u32, eps: f64, variant: Variant) -> f64 {
    let s = s as f64;
    match variant {
        Variant::Statement => {
            0.375 * lambda.powi(-2) / (2f64.powf(4.0 / s) * m.powf(4.0 / s)) * (eps / 2.0)
        }
        Variant::Proof => {
            let inv = 1.0 / (1.0 - DELTA1);
            let d2 = 2.0 / s;
            0.375 * lambda.powf(-inv) / (2f64.powf(d2 * inv) * m.powf(d2 * inv))
                * (eps / 2.0).powf(DELTA1 * inv)
        }
    }
}

/// `T = ln(H₀/ε) / [(3/8)λ^{−1/(1−δ₁)} (2M)^{−δ₂/(1−δ₁)} (ε/2)^{δ₁/(1−δ₁)}]`.
pub fn horizon(lambda: f64, m: f64, s: u32, eps: f64, h0: f64) -> f64 {
    (h0 / eps).ln() / contraction_a(lambda, m, s, eps, Variant::Proof)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanRequest {
    pub eps: f64,
    /// Initial KL; `None` uses [`h0_surrogate`].
    pub h0: Option<f64>,
    /// Poincaré constant; `None` falls back to `spec.poincare_gamma`.
    pub gamma: Option<f64>,
    /// Even moment order, > 8.
    pub s: u32,
    /// Exponent parameter of the unsmoothed constants.
    pub p: f64,
    pub t_hint: Option<f64>,
    /// `M_s(p₀+π)`; `None` uses the bound for the N(0, I/L) start.
    pub ms0: Option<f64>,
    pub smoothing: Option<SmoothingConfig>,
    pub e2: Option<f64>,
    pub variant: Variant,
}

impl PlanRequest {
    pub fn new(eps: f64, s: u32) -> Self {
        Self {
            eps,
            h0: None,
            gamma: None,
            s,
            p: 2.0,
            t_hint: None,
            ms0: None,
            smoothing: None,
            e2: None,
            variant: Variant::Statement,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundSet {
    pub dim: usize,
    pub variant: Variant,
    pub a: f64,
    pub b: f64,
    pub beta: f64,
    pub n_terms: usize,
    pub l: f64,
    pub alpha: f64,
    pub alpha_n: f64,
    pub hypotheses: PlannerHypotheses,
    pub tilde_c: f64,
    pub tilde_d: f64,
    pub tilde_c_mu: Option<f64>,
    pub s: u32,
    pub c_s: f64,
    pub ms0: f64,
    pub moment_eta_threshold: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub dmu1: Option<f64>,
    pub dmu2: Option<f64>,
    pub dmu3: Option<f64>,
    pub gamma: f64,
    pub gamma1: Option<f64>,
    pub mu: Option<f64>,
    pub lambda: f64,
    pub a_contraction: f64,
    pub eps: f64,
    pub h0: f64,
    pub eta_terms: [f64; 5],
    pub eta: f64,
    /// Iteration count. Realistic plans exceed u64 by dozens of orders of
    /// magnitude, so K is kept as an integral-valued f64.
    pub k: f64,
    pub t: f64,
    pub e2: Option<f64>,
    pub degenerate: bool,
    pub warnings: Vec<String>,
}

impl BoundSet {
    /// Every field as `(name, value)` in a fixed order.
    pub fn to_kv(&self) -> Vec<(String, String)> {
        fn f(v: f64) -> String {
            format!("{v:.16e}")
        }
        fn of(v: Option<f64>) -> String {
            v.map(f).unwrap_or_else(|| "none".into())
        }
        let mut kv: Vec<(&str, String)> = vec![
            ("dim", self.dim.to_string()),
            ("variant", self.variant.as_str().into()),
            ("a", f(self.a)),
            ("b", f(self.b)),
            ("beta", f(self.beta)),
            ("N", self.n_terms.to_string()),
            ("L", f(self.l)),
            ("alpha", f(self.alpha)),
            ("alpha_N", f(self.alpha_n)),
            ("beta_ge_2alpha_N", self.hypotheses.beta_ge_two_alpha_n().to_string()),
            (
                "beta_ge_2alpha_N_sq",
                self.hypotheses.beta_ge_two_alpha_n_sq().to_string(),
            ),
            ("tilde_c", f(self.tilde_c)),
            ("tilde_d", f(self.tilde_d)),
            ("tilde_c_mu", of(self.tilde_c_mu)),
            ("s", self.s.to_string()),
            ("C_s", f(self.c_s)),
            ("Ms0", f(self.ms0)),
            ("moment_eta_threshold", f(self.moment_eta_threshold)),
            ("D1", f(self.d1)),
            ("D2", f(self.d2)),
            ("D3", f(self.d3)),
            ("Dmu1", of(self.dmu1)),
            ("Dmu2", of(self.dmu2)),
            ("Dmu3", of(self.dmu3)),
            ("gamma", f(self.gamma)),
            ("gamma1", of(self.gamma1)),
            ("mu", of(self.mu)),
            ("lambda", f(self.lambda)),
            ("A", f(self.a_contraction)),
            ("eps", f(self.eps)),
            ("H0", f(self.h0)),
        ];
        let terms: Vec<(String, String)> = self
            .eta_terms
            .iter()
            .enumerate()
            .map(|(i, v)| (format!("eta_term_{}", i + 1), f(*v)))
            .collect();
        let tail = vec![
            ("eta", f(self.eta)),
            ("K", f(self.k)),
            ("T", f(self.t)),
            ("E2", of(self.e2)),
            ("degenerate", self.degenerate.to_string()),
        ];
        let mut out: Vec<(String, String)> =
            kv.drain(..).map(|(k, v)| (k.to_string(), v)).collect();
        out.extend(terms);
        out.extend(tail.into_iter().map(|(k, v)| (k.to_string(), v)));
        out
    }

    /// `name=value` lines, then one `warning=…` line per warning.
    pub fn to_kv_document(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.to_kv() {
            let _ = writeln!(s, "{k}={v}");
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning={w}");
        }
        s
    }

    /// The descent constants driving η: the smoothed ones when present.
    pub fn active_descent(&self) -> DescentConstants {
        match (self.dmu1, self.dmu2, self.dmu3) {
            (Some(d1), Some(d2), Some(d3)) => DescentConstants { d1, d2, d3 },
            _ => DescentConstants {
                d1: self.d1,
                d2: self.d2,
                d3: self.d3,
            },
        }
    }
}

/// Builds the full plan.
///
/// T comes from the explicit prescription with `M = M_s(p₀+π)`, then is
/// recomputed once with `M ∨ C_sT₀` (skipped when `t_hint` is given). η is the
/// minimum of the five admissibility terms, `K = ⌈T/η⌉`, and T is reset to
/// `Kη`; since the terms shrink as T grows, η is re-selected until it is
/// admissible at the final T.
pub fn plan_step_size(spec: &PotentialSpec, req: &PlanRequest) -> Result<BoundSet> {
    let hypotheses = check_eligible(spec)?;
    if !(req.eps > 0.0 && req.eps.is_finite()) {
        return Err(Error::param("eps", "must be finite and > 0"));
    }
    if req.s <= 8 || req.s % 2 != 0 {
        return Err(Error::param("s", "must be an even integer > 8"));
    }
    if !(req.p > 1.0) {
        return Err(Error::param("p", "must be > 1"));
    }
    if let Some(cfg) = &req.smoothing {
        cfg.validate()?;
        if !(cfg.mu > 0.0) {
            return Err(Error::param("mu", "smoothed plans need mu > 0"));
        }
    }
    let gamma = req
        .gamma
        .or(spec.poincare_gamma)
        .ok_or_else(|| Error::Missing("Poincaré constant gamma".into()))?;
    if !(gamma > 0.0) {
        return Err(Error::param("gamma", "must be > 0"));
    }
    let mut warnings = Vec::new();
    let smoothing = req.smoothing.as_ref();
    let mu = smoothing.map(|c| c.mu);
    let h0 = req
        .h0
        .unwrap_or_else(|| h0_surrogate(spec, mu.unwrap_or(0.0), smoothing.map_or(req.p, |c| c.p)));

    let tc = tilde_c(spec)?;
    let td = tilde_d(spec)?;
    let tc_mu = match smoothing {
        Some(c) => Some(tilde_c_mu(spec, c.mu, c.p)?),
        None => None,
    };
    let mg = moment_growth_cs(spec, req.s)?;
    let ms0 = req.ms0.unwrap_or(mg.init_bound);
    // Descent constants need H0 ≥ 0; the degenerate branch below covers H0 < ε.
    let h0_eff = h0.max(0.0);
    let plain = descent_constants(spec, req.p, h0_eff, None, req.variant)?;
    let smoothed = match smoothing {
        Some(c) => Some(descent_constants(spec, c.p, h0_eff, Some(c), req.variant)?),
        None => None,
    };
    let dc = smoothed.unwrap_or(plain);
    let (gamma1, lam) = match smoothing {
        Some(c) => {
            let g1 = smoothed_sampler_constants(spec, c, gamma, req.e2.unwrap_or(0.0))?.gamma1;
            (Some(g1), lambda_smoothed(spec, c, g1))
        }
        None => (None, lambda(spec, gamma)),
    };
    let alpha = spec.alpha();

    let degenerate = req.eps >= h0;
    let (t_plan, m) = if degenerate {
        warnings.push(format!(
            "eps = {} >= H0 = {h0}: plan degenerate, K = 0",
            req.eps
        ));
        (0.0, ms0)
    } else if let Some(t) = req.t_hint {
        if !(t > 0.0) {
            return Err(Error::param("T_hint", "must be > 0"));
        }
        (t, ms0.max(mg.c_s * t))
    } else {
        let t0 = horizon(lam, ms0, req.s, req.eps, h0);
        let m1 = ms0.max(mg.c_s * t0);
        (horizon(lam, m1, req.s, req.eps, h0), m1)
    };
    let a_contraction = contraction_a(lam, m, req.s, req.eps, req.variant);

    let (terms, eta, k, t) = if degenerate {
        let terms = eta_terms(&dc, h0_eff, a_contraction, req.eps, f64::INFINITY, alpha);
        // Only the T-free terms constrain a zero-length plan.
        let eta = terms[0].min(terms[3]);
        (terms, eta, 0.0, 0.0)
    } else {
        let mut t_cur = t_plan;
        let mut out = None;
        for _ in 0..64 {
            let terms = eta_terms(&dc, h0, a_contraction, req.eps, t_cur, alpha);
            let eta = select_eta(&terms);
            let k = (t_plan / eta).ceil().max(1.0);
            let t = k * eta;
            let final_terms = eta_terms(&dc, h0, a_contraction, req.eps, t, alpha);
            if final_terms.iter().all(|&v| eta <= v) {
                out = Some((final_terms, eta, k, t));
                break;
            }
            t_cur = t;
        }
        out.ok_or_else(|| Error::Ineligible("step-size selection did not settle".into()))?
    };
    if !(eta > 0.0) || !eta.is_finite() {
        warnings.push(format!("eta = {eta} underflowed"));
    }

    let Dissipativity { a, b, beta } = spec.dissip;
    Ok(BoundSet {
        dim: spec.dim(),
        variant: req.variant,
        a,
        b,
        beta,
        n_terms: spec.n_terms(),
        l: spec.l_max(),
        alpha,
        alpha_n: spec.alpha_n(),
        hypotheses,
        tilde_c: tc,
        tilde_d: td,
        tilde_c_mu: tc_mu,
        s: req.s,
        c_s: mg.c_s,
        ms0,
        moment_eta_threshold: mg.eta_threshold,
        d1: plain.d1,
        d2: plain.d2,
        d3: plain.d3,
        dmu1: smoothed.map(|d| d.d1),
        dmu2: smoothed.map(|d| d.d2),
        dmu3: smoothed.map(|d| d.d3),
        gamma,
        gamma1,
        mu,
        lambda: lam,
        a_contraction,
        eps: req.eps,
        h0,
        eta_terms: terms,
        eta,
        k,
        t,
        e2: req.e2,
        degenerate,
        warnings,
    })
}

/// `2[(a/(4β))(1.5 + d̃ + c̃)]^{1/β}(H^{1/β} + H^{1/(2β)})`, a W_β bound from
/// a KL value H. Uses `c̃_μ` when the set carries it.
pub fn wasserstein_budget(bounds: &BoundSet, h: f64, beta: f64) -> f64 {
    let c = bounds.tilde_c_mu.unwrap_or(bounds.tilde_c);
    let h = h.max(0.0);
    2.0 * (bounds.a / (4.0 * beta) * (1.5 + bounds.tilde_d + c)).powf(1.0 / beta)
        * (h.powf(1.0 / beta) + h.powf(1.0 / (2.0 * beta)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothedSamplerConstants {
    /// `γ₁ = γ exp(−4Lμ^{1+α}d^{(1+α)/(2∧p)})`
    pub gamma1: f64,
    /// `(a/2, b + (L/2)μ^α d^e (Lμ^α d^e / a)^{1/(β−1)}, β)` with
    /// `e = 5/2 ∨ 3/p`; `None` when β ≤ 1.
    pub dissip_mu: Option<Dissipativity>,
    /// Bound on `W₂²(π, π_μ)`: `8.24 NLμ^{1+α}d^{2/p}E₂`.
    pub w2_gap: f64,
    /// Largest μ for which the gap bound applies:
    /// `(0.05/(NLd^{2/p}))^{1/(1+α)}`.
    pub mu_threshold: f64,
    pub w2_gap_applicable: bool,
}

pub fn smoothed_sampler_constants(
    spec: &PotentialSpec,
    cfg: &SmoothingConfig,
    gamma: f64,
    e2: f64,
) -> Result<SmoothedSamplerConstants> {
    cfg.validate()?;
    if !(e2 >= 0.0) {
        return Err(Error::param("E2", "must be >= 0"));
    }
    let Consts { n, l, d, dissip } = consts(spec);
    let Dissipativity { a, b, beta } = dissip;
    let (mu, p) = (cfg.mu, cfg.p);
    let alpha = spec.alpha();
    let gamma1 = gamma * (-4.0 * l * mu.powf(1.0 + alpha) * d.powf((1.0 + alpha) / p.min(2.0))).exp();
    let dissip_mu = if beta > 1.0 {
        let e = 2.5f64.max(3.0 / p);
        let s = l * mu.powf(alpha) * d.powf(e);
        Some(Dissipativity {
            a: a / 2.0,
            b: b + 0.5 * s * (s / a).powf(1.0 / (beta - 1.0)),
            beta,
        })
    } else {
        None
    };
    let dp = d.powf(2.0 / p);
    let mu_threshold = (0.05 / (n * l * dp)).powf(1.0 / (1.0 + alpha));
    Ok(SmoothedSamplerConstants {
        gamma1,
        dissip_mu,
        w2_gap: 8.24 * n * l * mu.powf(1.0 + alpha) * dp * e2,
        mu_threshold,
        w2_gap_applicable: mu <= mu_threshold,
    })
}

/// `γ_lb = exp(−8Σᵢ LᵢR^{1+αᵢ}) / (32 C_K² d (a + b + 2aR² + 3)/a)`, a
/// Poincaré constant from the convexity radius R. C_K is a universal constant
/// left unspecified, so the result is a template in C_K.
pub fn poincare_lower_bound(spec: &PotentialSpec, c_k: f64) -> Result<f64> {
    let r = spec
        .convexity_radius
        .ok_or_else(|| Error::Missing("convexity radius R".into()))?;
    if !(c_k > 0.0) {
        return Err(Error::param("C_K", "must be > 0"));
    }
    check_dissip(spec)?;
    let Consts { d, dissip, .. } = consts(spec);
    let Dissipativity { a, b, .. } = dissip;
    let pert: f64 = spec
        .smooth_terms
        .iter()
        .map(|t| t.l * r.powf(1.0 + t.alpha))
        .sum();
    Ok((-8.0 * pert).exp() / (32.0 * c_k * c_k * d * (a + b + 2.0 * a * r * r + 3.0) / a))
}

/// `E‖∇U‖^{2α_N} ≤ (8L²a/β)(1.5+d̃+c̃)H + (16L²a/β)(1.5+d̃+c̃) + 4L²`.
pub fn grad_moment_bound(spec: &PotentialSpec, h: f64) -> Result<f64> {
    let core = 1.5 + tilde_d(spec)? + tilde_c(spec)?;
    let Dissipativity { a, beta, .. } = spec.dissip;
    let l2 = spec.l_max().powi(2);
    Ok(8.0 * l2 * a / beta * core * h + 16.0 * l2 * a / beta * core + 4.0 * l2)
}

/// `E_π‖∇U‖² ≤ 2NL²d^{3/p}`.
pub fn stationary_grad_moment(spec: &PotentialSpec, p: f64) -> f64 {
    2.0 * spec.n_terms() as f64 * spec.l_max().powi(2) * (spec.dim() as f64).powf(3.0 / p)
}
