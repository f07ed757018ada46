//! The p-generalized Gaussian N_p(0, I_d) and the smoothing estimators built
//! on it.
//!
//! Coordinates of ξ ~ N_p are i.i.d. with density ∝ exp(−|t|^p / p). They are
//! drawn with the Gamma transform `u ~ Gamma(1/p, 1)`, `|t| = (p·u)^{1/p}`,
//! followed by a fair sign.
//!
//! The smoothed potential is `U_μ(x) = E_ξ[U(x + μξ)]` and the single-draw
//! stochastic gradient is `g_μ(x) = ∇U(x + μξ)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use crate::potential::PotentialSpec;
use crate::{Error, Result};

/// Sampler for one N_p(0, I) coordinate, reusable across draws.
#[derive(Clone, Debug)]
pub struct NpSampler {
    p: f64,
    inv_p: f64,
    gamma: Gamma<f64>,
}

impl NpSampler {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::param("p", format!("{p} must be finite and > 1")));
        }
        let gamma = Gamma::new(1.0 / p, 1.0).map_err(|e| Error::param("p", e.to_string()))?;
        Ok(Self {
            p,
            inv_p: 1.0 / p,
            gamma,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn sample_coord<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = self.gamma.sample(rng);
        let mag = (self.p * u).powf(self.inv_p);
        if rng.random::<bool>() {
            mag
        } else {
            -mag
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for o in out.iter_mut() {
            *o = self.sample_coord(rng);
        }
    }
}

/// One draw ξ ~ N_p(0, I_d).
pub fn sample_np<R: Rng + ?Sized>(d: usize, p: f64, rng: &mut R) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::param("d", "must be positive"));
    }
    let s = NpSampler::new(p)?;
    let mut out = vec![0.0; d];
    s.sample_into(rng, &mut out);
    Ok(out)
}

/// `log κ` where `κ = 2^d Γ(1/p)^d / p^{d − d/p}` normalizes exp(−‖ξ‖_p^p/p).
pub fn kappa_log(d: usize, p: f64) -> f64 {
    let d = d as f64;
    d * std::f64::consts::LN_2 + d * ln_gamma(1.0 / p) - (d - d / p) * p.ln()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothingConfig {
    pub mu: f64,
    pub p: f64,
    pub mc_batch: usize,
    pub seed: u64,
}

impl SmoothingConfig {
    pub fn new(mu: f64, p: f64, mc_batch: usize, seed: u64) -> Result<Self> {
        let cfg = Self {
            mu,
            p,
            mc_batch,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::param("mu", "must be finite and >= 0"));
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::param("p", "must be finite and > 1"));
        }
        if self.mc_batch == 0 {
            return Err(Error::param("mc_batch", "must be >= 1"));
        }
        Ok(())
    }
}

/// Monte-Carlo estimate with its standard error. For vectors `stderr` is the
/// largest per-component standard error.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothedEstimate<T> {
    pub mean: T,
    pub stderr: f64,
    pub n: usize,
}

/// Running mean/variance (Welford) over vectors of fixed length.
#[derive(Clone, Debug)]
pub(crate) struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    pub(crate) fn new(d: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; d],
            m2: vec![0.0; d],
        }
    }

    pub(crate) fn push(&mut self, v: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(v) {
            let delta = x - *m;
            *m += delta / n;
            *s += delta * (x - *m);
        }
    }

    pub(crate) fn variance(&self) -> Vec<f64> {
        let denom = (self.n.max(2) - 1) as f64;
        self.m2.iter().map(|s| s / denom).collect()
    }

    pub(crate) fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub(crate) fn max_stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        self.variance()
            .iter()
            .map(|v| (v / n).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Estimate of `U_μ(x)` from `cfg.mc_batch` draws seeded by `cfg.seed`.
/// Exact (stderr 0) when μ = 0.
pub fn smoothed_value(
    spec: &PotentialSpec,
    x: &[f64],
    cfg: &SmoothingConfig,
) -> Result<SmoothedEstimate<f64>> {
    cfg.validate()?;
    check_dim(spec, x)?;
    if cfg.mu == 0.0 {
        return Ok(SmoothedEstimate {
            mean: spec.value(x),
            stderr: 0.0,
            n: 1,
        });
    }
    let sampler = NpSampler::new(cfg.p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut y = vec![0.0; x.len()];
    let mut acc = Welford::new(1);
    for _ in 0..cfg.mc_batch {
        sampler.sample_into(&mut rng, &mut y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = xi + cfg.mu * *yi;
        }
        acc.push(&[spec.value(&y)]);
    }
    Ok(SmoothedEstimate {
        mean: acc.mean()[0],
        stderr: acc.max_stderr(),
        n: cfg.mc_batch,
    })
}

/// One draw of `g_μ(x) = ∇U(x + μξ)`, written into `out`. `scratch` holds ξ.
pub fn grad_estimate_into<R: Rng + ?Sized>(
    spec: &PotentialSpec,
    x: &[f64],
    mu: f64,
    sampler: &NpSampler,
    rng: &mut R,
    scratch: &mut [f64],
    out: &mut [f64],
) {
    sampler.sample_into(rng, scratch);
    for (s, xi) in scratch.iter_mut().zip(x) {
        *s = xi + mu * *s;
    }
    spec.grad_into(scratch, out);
}

/// One draw of `g_μ(x) = ∇U(x + μξ)`.
pub fn grad_estimate<R: Rng + ?Sized>(
    spec: &PotentialSpec,
    x: &[f64],
    cfg: &SmoothingConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    check_dim(spec, x)?;
    if cfg.mu <= 0.0 {
        return Err(Error::param("mu", "must be > 0 for the stochastic gradient"));
    }
    let sampler = NpSampler::new(cfg.p)?;
    let mut scratch = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    grad_estimate_into(spec, x, cfg.mu, &sampler, rng, &mut scratch, &mut out);
    Ok(out)
}

/// Monte-Carlo reference value of `∇U_μ(x)`: the mean of `cfg.mc_batch`
/// draws of `g_μ(x)`.
pub fn smoothed_grad_oracle(
    spec: &PotentialSpec,
    x: &[f64],
    cfg: &SmoothingConfig,
) -> Result<SmoothedEstimate<Vec<f64>>> {
    cfg.validate()?;
    check_dim(spec, x)?;
    if cfg.mu <= 0.0 {
        return Err(Error::param("mu", "must be > 0"));
    }
    let sampler = NpSampler::new(cfg.p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = x.len();
    let mut scratch = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut acc = Welford::new(d);
    for _ in 0..cfg.mc_batch {
        grad_estimate_into(spec, x, cfg.mu, &sampler, &mut rng, &mut scratch, &mut g);
        acc.push(&g);
    }
    Ok(SmoothedEstimate {
        mean: acc.mean().to_vec(),
        stderr: acc.max_stderr(),
        n: cfg.mc_batch,
    })
}

fn check_dim(spec: &PotentialSpec, x: &[f64]) -> Result<()> {
    if x.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

/// `NLμ^{1+α}/(1+α)`, the recurring smoothing perturbation scale.
pub(crate) fn smoothing_scale(spec: &PotentialSpec, mu: f64) -> f64 {
    let a = spec.alpha();
    spec.n_terms() as f64 * spec.l_max() * mu.powf(1.0 + a) / (1.0 + a)
}

/// Bound on `|U_μ(x) − U(x)|`: `NLμ^{1+α}/(1+α) · d^{2/(2∧p)}`.
pub fn value_gap_bound(spec: &PotentialSpec, mu: f64, p: f64) -> f64 {
    smoothing_scale(spec, mu) * (spec.dim() as f64).powf(2.0 / p.min(2.0))
}

/// Bound on `‖∇U_μ(x) − ∇U(x)‖`: `NLμ^{1+α}/(1+α) · d^{3/p}` for p ≤ 2 and
/// `d^{5/2}` for p > 2.
pub fn grad_bias_bound(spec: &PotentialSpec, mu: f64, p: f64) -> f64 {
    let d = spec.dim() as f64;
    let e = if p <= 2.0 { 3.0 / p } else { 2.5 };
    smoothing_scale(spec, mu) * d.powf(e)
}

/// Lipschitz constant of `∇U_μ`: `NL/μ^{1−α} · d^{2/p}` for p ≤ 2 and `d²`
/// for p > 2.
pub fn smoothed_lipschitz_bound(spec: &PotentialSpec, mu: f64, p: f64) -> f64 {
    let d = spec.dim() as f64;
    let e = if p <= 2.0 { 2.0 / p } else { 2.0 };
    spec.n_terms() as f64 * spec.l_max() / mu.powf(1.0 - spec.alpha()) * d.powf(e)
}

/// Bound on `E‖g_μ(x) − ∇U_μ(x)‖²`: `4N²L²μ^{2α}d^{2α/p}`.
pub fn estimator_variance_bound(spec: &PotentialSpec, mu: f64, p: f64) -> f64 {
    let n = spec.n_terms() as f64;
    let l = spec.l_max();
    let a = spec.alpha();
    4.0 * n * n * l * l * mu.powf(2.0 * a) * (spec.dim() as f64).powf(2.0 * a / p)
}
