//! Potentials U (with π ∝ e^{−U}), their declared structural constants, and
//! sampling-based validators for those constants.
//!
//! A [`PotentialSpec`] bundles the value and gradient evaluators with the
//! constants the planner consumes:
//!
//! - mixture weak smoothness `‖∇U(x) − ∇U(y)‖ ≤ Σᵢ Lᵢ‖x − y‖^αᵢ`
//! - dissipativity `⟨∇U(x), x⟩ ≥ a‖x‖^β − b`
//! - an optional Poincaré constant γ and convexity radius R
//!
//! Validators sample points with a recorded seed. They can refute a claimed
//! constant but never prove it, so every [`CheckReport`] carries the worst
//! observed ratio.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Writes ∇U(x) into the output slice.
pub type GradFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Slack used when turning a worst ratio into a verdict. Equality cases
/// (e.g. the Gaussian with its exact constants) land on 1 up to rounding.
pub const RATIO_TOLERANCE: f64 = 1e-9;

/// Tolerance for ‖∇U(0)‖ when a spec claims a stationary origin.
pub const ORIGIN_GRAD_TOLERANCE: f64 = 1e-9;

/// One Hölder piece `L‖x − y‖^α` of the mixture bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolderTerm {
    pub l: f64,
    pub alpha: f64,
}

impl HolderTerm {
    pub fn new(l: f64, alpha: f64) -> Self {
        Self { l, alpha }
    }
}

/// Constants of `⟨∇U(x), x⟩ ≥ a‖x‖^β − b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dissipativity {
    pub a: f64,
    pub b: f64,
    pub beta: f64,
}

#[derive(Clone)]
pub struct PotentialSpec {
    name: String,
    dim: usize,
    value: ValueFn,
    grad: GradFn,
    /// Sorted ascending in α.
    pub smooth_terms: Vec<HolderTerm>,
    pub dissip: Dissipativity,
    pub poincare_gamma: Option<f64>,
    pub convexity_radius: Option<f64>,
    pub origin_stationary: bool,
}

impl fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("smooth_terms", &self.smooth_terms)
            .field("dissip", &self.dissip)
            .field("poincare_gamma", &self.poincare_gamma)
            .field("convexity_radius", &self.convexity_radius)
            .field("origin_stationary", &self.origin_stationary)
            .finish()
    }
}

impl PotentialSpec {
    /// Builds and validates a spec. `smooth_terms` are sorted by α here.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        value: ValueFn,
        grad: GradFn,
        mut smooth_terms: Vec<HolderTerm>,
        dissip: Dissipativity,
        poincare_gamma: Option<f64>,
        convexity_radius: Option<f64>,
        origin_stationary: bool,
    ) -> Result<Self> {
        smooth_terms.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
        let spec = Self {
            name: name.into(),
            dim,
            value,
            grad,
            smooth_terms,
            dissip,
            poincare_gamma,
            convexity_radius,
            origin_stationary,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Diagonal quadratic `U(x) = ½ Σⱼ qⱼ xⱼ²`, i.e. π = N(0, Q⁻¹).
    pub fn quadratic(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::param("q", "must be nonempty"));
        }
        if q.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::param("q", "entries must be positive and finite"));
        }
        let q_max = q.iter().cloned().fold(f64::MIN, f64::max);
        let q_min = q.iter().cloned().fold(f64::MAX, f64::min);
        let dim = q.len();
        let qv = Arc::new(q);
        let qg = qv.clone();
        Self::new(
            "quadratic",
            dim,
            Arc::new(move |x: &[f64]| {
                0.5 * x.iter().zip(qv.iter()).map(|(xi, qi)| qi * xi * xi).sum::<f64>()
            }),
            Arc::new(move |x: &[f64], out: &mut [f64]| {
                for ((o, xi), qi) in out.iter_mut().zip(x).zip(qg.iter()) {
                    *o = qi * xi;
                }
            }),
            vec![HolderTerm::new(q_max, 1.0)],
            Dissipativity {
                a: q_min,
                b: 0.0,
                beta: 2.0,
            },
            Some(q_min),
            Some(0.0),
            true,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        (self.grad)(x, out)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        (self.grad)(x, &mut out);
        out
    }

    /// Number of mixture terms N.
    pub fn n_terms(&self) -> usize {
        self.smooth_terms.len()
    }

    /// `L = 1 ∨ maxᵢ Lᵢ`, the convention every bound formula uses.
    pub fn l_max(&self) -> f64 {
        self.smooth_terms.iter().map(|t| t.l).fold(1.0, f64::max)
    }

    /// Smallest exponent α = α₁.
    pub fn alpha(&self) -> f64 {
        self.smooth_terms[0].alpha
    }

    /// Largest exponent α_N.
    pub fn alpha_n(&self) -> f64 {
        self.smooth_terms[self.smooth_terms.len() - 1].alpha
    }

    pub fn value_at_origin(&self) -> f64 {
        self.value(&vec![0.0; self.dim])
    }

    /// Replaces the evaluators while keeping the declared constants. Used to
    /// wrap a potential with instrumentation (e.g. call counters).
    pub fn with_evaluators(&self, value: ValueFn, grad: GradFn) -> Self {
        Self {
            value,
            grad,
            ..self.clone()
        }
    }

    pub fn with_convexity_radius(mut self, r: Option<f64>) -> Self {
        self.convexity_radius = r;
        self
    }

    pub fn with_dissip(mut self, dissip: Dissipativity) -> Self {
        self.dissip = dissip;
        self
    }

    pub fn with_smooth_terms(mut self, mut terms: Vec<HolderTerm>) -> Self {
        terms.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
        self.smooth_terms = terms;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidSpec("dim must be positive".into()));
        }
        if self.smooth_terms.is_empty() {
            return Err(Error::InvalidSpec("smooth_terms must be nonempty".into()));
        }
        for t in &self.smooth_terms {
            if !(t.l > 0.0 && t.l.is_finite()) {
                return Err(Error::InvalidSpec(format!("L = {} must be positive", t.l)));
            }
            if !(t.alpha > 0.0 && t.alpha <= 1.0) {
                return Err(Error::InvalidSpec(format!(
                    "alpha = {} outside (0, 1]",
                    t.alpha
                )));
            }
        }
        let Dissipativity { a, b, beta } = self.dissip;
        if !(a > 0.0) || !(b >= 0.0) || !(beta > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "dissipativity constants (a={a}, b={b}, beta={beta}) out of range"
            )));
        }
        if let Some(g) = self.poincare_gamma {
            if !(g > 0.0) {
                return Err(Error::InvalidSpec("poincare gamma must be positive".into()));
            }
        }
        if let Some(r) = self.convexity_radius {
            if !(r >= 0.0) {
                return Err(Error::InvalidSpec("convexity radius must be >= 0".into()));
            }
        }
        if self.origin_stationary {
            let g = self.grad(&vec![0.0; self.dim]);
            let n = norm(&g);
            if !(n <= ORIGIN_GRAD_TOLERANCE) {
                return Err(Error::InvalidSpec(format!(
                    "origin_stationary claimed but ‖∇U(0)‖ = {n:e}"
                )));
            }
        }
        Ok(())
    }

    /// Both candidate planner hypotheses, `β ≥ 2α_N` and `β ≥ 2α_N²`.
    pub fn hypotheses(&self) -> PlannerHypotheses {
        let an = self.alpha_n();
        let beta = self.dissip.beta;
        PlannerHypotheses {
            two_alpha_n_ratio: 2.0 * an / beta,
            two_alpha_n_sq_ratio: 2.0 * an * an / beta,
        }
    }
}

/// Ratios `2α_N/β` and `2α_N²/β`; each hypothesis holds iff its ratio ≤ 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlannerHypotheses {
    pub two_alpha_n_ratio: f64,
    pub two_alpha_n_sq_ratio: f64,
}

impl PlannerHypotheses {
    pub fn beta_ge_two_alpha_n(&self) -> bool {
        self.two_alpha_n_ratio <= 1.0
    }

    pub fn beta_ge_two_alpha_n_sq(&self) -> bool {
        self.two_alpha_n_sq_ratio <= 1.0
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: &[&str] = &[
    "gaussian",
    "power",
    "gauss_plus_power",
    "gaussian_mixture_2",
    "pseudo_huber",
];

fn take_param(
    params: &BTreeMap<String, f64>,
    allowed: &[&str],
    key: &str,
    default: f64,
) -> Result<f64> {
    if let Some(bad) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::param(bad, "not recognized for this potential"));
    }
    let v = params.get(key).copied().unwrap_or(default);
    if !v.is_finite() {
        return Err(Error::param(key, "must be finite"));
    }
    Ok(v)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::param("alpha", format!("{alpha} outside (0, 1]")))
    }
}

/// `‖x‖^{α−1} x`, with the sub-gradient 0 at the origin.
fn power_grad(alpha: f64, x: &[f64], out: &mut [f64]) {
    let r = norm(x);
    if r == 0.0 {
        out.iter_mut().for_each(|o| *o = 0.0);
        return;
    }
    let s = r.powf(alpha - 1.0);
    for (o, xi) in out.iter_mut().zip(x) {
        *o = s * xi;
    }
}

/// Looks up a built-in potential by name.
///
/// | name | U(x) | params |
/// |------|------|--------|
/// | `gaussian` | ‖x‖²/2 | – |
/// | `power` | ‖x‖^{1+α}/(1+α) | `alpha` ∈ (0,1], default 0.5 |
/// | `gauss_plus_power` | ‖x‖²/2 + ‖x‖^{1+α}/(1+α) | `alpha`, default 0.5 |
/// | `gaussian_mixture_2` | −log(e^{−‖x−m e₁‖²/2} + e^{−‖x+m e₁‖²/2}) | `m` ≥ 0, default 2 |
/// | `pseudo_huber` | √(1+‖x‖²) | – |
pub fn builtin(name: &str, dim: usize, params: &BTreeMap<String, f64>) -> Result<PotentialSpec> {
    if dim == 0 {
        return Err(Error::param("dim", "must be positive"));
    }
    match name {
        "gaussian" => {
            take_param(params, &[], "", 0.0)?;
            PotentialSpec::new(
                "gaussian",
                dim,
                Arc::new(|x: &[f64]| 0.5 * dot(x, x)),
                Arc::new(|x: &[f64], out: &mut [f64]| out.copy_from_slice(x)),
                vec![HolderTerm::new(1.0, 1.0)],
                Dissipativity {
                    a: 1.0,
                    b: 0.0,
                    beta: 2.0,
                },
                Some(1.0),
                Some(0.0),
                true,
            )
        }
        "power" => {
            let alpha = take_param(params, &["alpha"], "alpha", 0.5)?;
            check_alpha(alpha)?;
            PotentialSpec::new(
                "power",
                dim,
                Arc::new(move |x: &[f64]| norm(x).powf(1.0 + alpha) / (1.0 + alpha)),
                Arc::new(move |x: &[f64], out: &mut [f64]| power_grad(alpha, x, out)),
                vec![HolderTerm::new(2f64.powf(1.0 - alpha), alpha)],
                Dissipativity {
                    a: 1.0,
                    b: 0.0,
                    beta: 1.0 + alpha,
                },
                if alpha == 1.0 { Some(1.0) } else { None },
                Some(0.0),
                true,
            )
        }
        "gauss_plus_power" => {
            let alpha = take_param(params, &["alpha"], "alpha", 0.5)?;
            check_alpha(alpha)?;
            PotentialSpec::new(
                "gauss_plus_power",
                dim,
                Arc::new(move |x: &[f64]| {
                    let r = norm(x);
                    0.5 * r * r + r.powf(1.0 + alpha) / (1.0 + alpha)
                }),
                Arc::new(move |x: &[f64], out: &mut [f64]| {
                    power_grad(alpha, x, out);
                    for (o, xi) in out.iter_mut().zip(x) {
                        *o += xi;
                    }
                }),
                vec![
                    HolderTerm::new(2f64.powf(1.0 - alpha), alpha),
                    HolderTerm::new(1.0, 1.0),
                ],
                Dissipativity {
                    a: 1.0,
                    b: 0.0,
                    beta: 2.0,
                },
                // ∇²U ⪰ I, so π satisfies PI(1).
                Some(1.0),
                Some(0.0),
                true,
            )
        }
        "gaussian_mixture_2" => {
            let m = take_param(params, &["m"], "m", 2.0)?;
            if m < 0.0 {
                return Err(Error::param("m", "must be nonnegative"));
            }
            // U(x) = ‖x‖²/2 + m²/2 − log(2 cosh(m x₁)),  ∇U = x − m tanh(m x₁) e₁
            let value = move |x: &[f64]| {
                let r2 = dot(x, x);
                let u = m * x[0];
                // log(2cosh u) = |u| + log(1 + e^{−2|u|})
                let log2cosh = u.abs() + (-2.0 * u.abs()).exp().ln_1p();
                0.5 * r2 + 0.5 * m * m - log2cosh
            };
            let grad = move |x: &[f64], out: &mut [f64]| {
                out.copy_from_slice(x);
                out[0] -= m * (m * x[0]).tanh();
            };
            // Convex where m² sech²(m x₁) ≤ 1.
            let radius = if m > 1.0 { m.acosh() / m } else { 0.0 };
            PotentialSpec::new(
                "gaussian_mixture_2",
                dim,
                Arc::new(value),
                Arc::new(grad),
                vec![HolderTerm::new(1.0 + m * m, 1.0)],
                Dissipativity {
                    a: 0.5,
                    b: 2.0 * m * m,
                    beta: 2.0,
                },
                None,
                Some(radius),
                true,
            )
        }
        "pseudo_huber" => {
            take_param(params, &[], "", 0.0)?;
            PotentialSpec::new(
                "pseudo_huber",
                dim,
                Arc::new(|x: &[f64]| (1.0 + dot(x, x)).sqrt()),
                Arc::new(|x: &[f64], out: &mut [f64]| {
                    let s = 1.0 / (1.0 + dot(x, x)).sqrt();
                    for (o, xi) in out.iter_mut().zip(x) {
                        *o = s * xi;
                    }
                }),
                vec![HolderTerm::new(1.0, 1.0)],
                Dissipativity {
                    a: 0.5,
                    b: 1.0,
                    beta: 1.0,
                },
                None,
                Some(0.0),
                true,
            )
        }
        other => Err(Error::UnknownPotential(other.to_string())),
    }
}

// ---------------------------------------------------------------------------
// Validators
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AssumptionId {
    MixtureSmooth,
    Dissipative,
    LowerEnvelope,
    OriginStationary,
}

impl AssumptionId {
    pub fn as_str(&self) -> &'static str {
        match self {
            AssumptionId::MixtureSmooth => "MixtureSmooth",
            AssumptionId::Dissipative => "Dissipative",
            AssumptionId::LowerEnvelope => "LowerEnvelope",
            AssumptionId::OriginStationary => "OriginStationary",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub assumption_id: AssumptionId,
    pub passed: bool,
    /// Max over samples of LHS/RHS for the inequality `LHS ≤ RHS`.
    pub worst_ratio: f64,
    /// Worst pair for pairwise checks; `(x, x)` for pointwise ones. Only set
    /// on failure.
    pub witness: Option<(Vec<f64>, Vec<f64>)>,
}

impl CheckReport {
    fn from_worst(
        id: AssumptionId,
        worst_ratio: f64,
        worst: Option<(Vec<f64>, Vec<f64>)>,
    ) -> Self {
        let passed = worst_ratio <= 1.0 + RATIO_TOLERANCE;
        Self {
            assumption_id: id,
            passed,
            worst_ratio,
            witness: if passed { None } else { worst },
        }
    }
}

/// Ratio for `lhs ≤ rhs` with `lhs ≥ 0`.
fn ineq_ratio(lhs: f64, rhs: f64) -> f64 {
    if !(lhs.is_finite() && rhs.is_finite()) {
        return f64::INFINITY;
    }
    if lhs <= 0.0 {
        0.0
    } else if rhs <= 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

/// Uniform draw from the d-dimensional ball of the given radius.
pub(crate) fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let n = norm(&v);
    let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    let s = if n > 0.0 { r / n } else { 0.0 };
    v.iter_mut().for_each(|x| *x *= s);
    v
}

/// Refutes Assumption "mixture weakly smooth" on `n_pairs` uniform pairs in
/// the ball of radius `radius`.
pub fn check_mixture_smooth(
    spec: &PotentialSpec,
    n_pairs: usize,
    radius: f64,
    seed: u64,
) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.dim();
    let mut gx = vec![0.0; d];
    let mut gy = vec![0.0; d];
    let mut worst = (f64::NEG_INFINITY, None);
    for _ in 0..n_pairs.max(1) {
        let x = uniform_in_ball(&mut rng, d, radius);
        let y = uniform_in_ball(&mut rng, d, radius);
        spec.grad_into(&x, &mut gx);
        spec.grad_into(&y, &mut gy);
        let r = dist(&x, &y);
        let lhs = dist(&gx, &gy);
        let rhs: f64 = spec
            .smooth_terms
            .iter()
            .map(|t| t.l * r.powf(t.alpha))
            .sum();
        let ratio = ineq_ratio(lhs, rhs);
        if ratio > worst.0 || worst.1.is_none() {
            worst = (ratio, Some((x, y)));
        }
    }
    CheckReport::from_worst(AssumptionId::MixtureSmooth, worst.0, worst.1)
}

/// Refutes `⟨∇U(x),x⟩ ≥ a‖x‖^β − b` on `n_points` uniform points in the ball.
pub fn check_dissipative(
    spec: &PotentialSpec,
    n_points: usize,
    radius: f64,
    seed: u64,
) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.dim();
    let Dissipativity { a, b, beta } = spec.dissip;
    let mut g = vec![0.0; d];
    let mut worst = (f64::NEG_INFINITY, None);
    for _ in 0..n_points.max(1) {
        let x = uniform_in_ball(&mut rng, d, radius);
        spec.grad_into(&x, &mut g);
        let lhs = a * norm(&x).powf(beta);
        let rhs = dot(&g, &x) + b;
        let ratio = ineq_ratio(lhs, rhs);
        if ratio > worst.0 || worst.1.is_none() {
            worst = (ratio, Some((x.clone(), x)));
        }
    }
    CheckReport::from_worst(AssumptionId::Dissipative, worst.0, worst.1)
}

/// Lower envelope of U implied by smoothness and dissipativity:
///
/// ```text
/// U(x) ≥ a/(2β)‖x‖^β + U(0) − Σᵢ Lᵢ/(αᵢ+1) R^{αᵢ+1} − b/β,   R = (2b/a)^{1/β}
/// ```
pub fn lower_envelope(spec: &PotentialSpec, x: &[f64]) -> f64 {
    let Dissipativity { a, beta, .. } = spec.dissip;
    a / (2.0 * beta) * norm(x).powf(beta) + envelope_offset(spec)
}

/// The x-independent part of [`lower_envelope`].
pub(crate) fn envelope_offset(spec: &PotentialSpec) -> f64 {
    let Dissipativity { a, b, beta } = spec.dissip;
    let r = (2.0 * b / a).powf(1.0 / beta);
    let sum: f64 = spec
        .smooth_terms
        .iter()
        .map(|t| t.l / (t.alpha + 1.0) * r.powf(t.alpha + 1.0))
        .sum();
    spec.value_at_origin() - sum - b / beta
}

/// Validator mode of [`lower_envelope`]: checks `U(x) ≥ envelope(x)`.
pub fn check_lower_envelope(
    spec: &PotentialSpec,
    n_points: usize,
    radius: f64,
    seed: u64,
) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let Dissipativity { a, beta, .. } = spec.dissip;
    let offset = envelope_offset(spec);
    let mut worst = (f64::NEG_INFINITY, None);
    for _ in 0..n_points.max(1) {
        let x = uniform_in_ball(&mut rng, spec.dim(), radius);
        // a/(2β)‖x‖^β ≤ U(x) − offset
        let lhs = a / (2.0 * beta) * norm(&x).powf(beta);
        let rhs = spec.value(&x) - offset;
        let ratio = ineq_ratio(lhs, rhs);
        if ratio > worst.0 || worst.1.is_none() {
            worst = (ratio, Some((x.clone(), x)));
        }
    }
    CheckReport::from_worst(AssumptionId::LowerEnvelope, worst.0, worst.1)
}

/// Checks `‖∇U(0)‖ ≤ 1e-9`; the ratio is `‖∇U(0)‖ / 1e-9`.
pub fn check_origin_stationary(spec: &PotentialSpec) -> CheckReport {
    let zero = vec![0.0; spec.dim()];
    let g = norm(&spec.grad(&zero));
    let ratio = if g.is_finite() {
        g / ORIGIN_GRAD_TOLERANCE
    } else {
        f64::INFINITY
    };
    CheckReport::from_worst(
        AssumptionId::OriginStationary,
        ratio,
        Some((zero.clone(), zero)),
    )
}

/// Runs every validator with a shared sample budget.
pub fn check_all(spec: &PotentialSpec, n: usize, radius: f64, seed: u64) -> Vec<CheckReport> {
    vec![
        check_mixture_smooth(spec, n, radius, seed),
        check_dissipative(spec, n, radius, seed.wrapping_add(1)),
        check_lower_envelope(spec, n, radius, seed.wrapping_add(2)),
        check_origin_stationary(spec),
    ]
}
