//! The ULA kernel, its smoothed stochastic-gradient variant, Gaussian
//! initialization, and a reproducible multi-chain runner.
//!
//! One step of the plain kernel is
//!
//! ```text
//! x' = x − η∇U(x) + √(2η) z,     z ~ N(0, I_d)
//! ```
//!
//! and the smoothed kernel replaces ∇U(x) by a single draw of
//! `g_μ(x) = ∇U(x + μξ)`, ξ ~ N_p(0, I_d).
//!
//! Every chain owns a `ChaCha8Rng` seeded from the run seed, with its stream
//! selected by the chain index, so results do not depend on thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::bounds::BoundSet;
use crate::pgauss::{NpSampler, SmoothingConfig};
use crate::potential::{dot, norm, PotentialSpec};
use crate::{Error, Result};

/// A chain whose norm exceeds this is frozen and flagged as diverged.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub x: Vec<f64>,
    pub k: u64,
    // Neumaier-compensated running sum of step sizes.
    t_sum: f64,
    t_comp: f64,
}

impl ChainState {
    pub fn new(x: Vec<f64>) -> Self {
        Self {
            x,
            k: 0,
            t_sum: 0.0,
            t_comp: 0.0,
        }
    }

    /// Elapsed diffusion time, the sum of all step sizes applied so far.
    pub fn t(&self) -> f64 {
        self.t_sum + self.t_comp
    }

    fn advance(&mut self, eta: f64) {
        let s = self.t_sum + eta;
        if self.t_sum.abs() >= eta.abs() {
            self.t_comp += (self.t_sum - s) + eta;
        } else {
            self.t_comp += (eta - s) + self.t_sum;
        }
        self.t_sum = s;
        self.k += 1;
    }

    fn is_diverged(&self) -> bool {
        let n = norm(&self.x);
        !(n.is_finite() && n <= DIVERGENCE_NORM)
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::param("eta", format!("{eta} must be finite and > 0")))
    }
}

fn check_grad(g: &[f64], x: &[f64], k: u64) -> Result<()> {
    if g.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteGradient {
            step: k,
            detail: format!("∇U({x:?}) = {g:?}"),
        })
    }
}

/// `x ← x − η g + √(2η) z` in place, with z drawn from `rng`.
fn langevin_update<R: Rng + ?Sized>(x: &mut [f64], g: &[f64], eta: f64, rng: &mut R) {
    let s = (2.0 * eta).sqrt();
    for (xi, gi) in x.iter_mut().zip(g) {
        let z: f64 = rng.sample(StandardNormal);
        *xi += -eta * gi + s * z;
    }
}

fn step_mut<R: Rng + ?Sized>(
    state: &mut ChainState,
    spec: &PotentialSpec,
    eta: f64,
    rng: &mut R,
    g: &mut [f64],
) -> Result<()> {
    spec.grad_into(&state.x, g);
    check_grad(g, &state.x, state.k)?;
    langevin_update(&mut state.x, g, eta, rng);
    state.advance(eta);
    Ok(())
}

fn smoothed_step_mut<R: Rng + ?Sized>(
    state: &mut ChainState,
    spec: &PotentialSpec,
    mu: f64,
    sampler: &NpSampler,
    eta: f64,
    rng: &mut R,
    scratch: &mut [f64],
    g: &mut [f64],
) -> Result<()> {
    crate::pgauss::grad_estimate_into(spec, &state.x, mu, sampler, rng, scratch, g);
    check_grad(g, scratch, state.k)?;
    langevin_update(&mut state.x, g, eta, rng);
    state.advance(eta);
    Ok(())
}

/// One ULA step with fresh Gaussian noise.
pub fn ula_step<R: Rng + ?Sized>(
    state: &ChainState,
    spec: &PotentialSpec,
    eta: f64,
    rng: &mut R,
) -> Result<ChainState> {
    check_eta(eta)?;
    check_dim(spec, &state.x)?;
    let mut next = state.clone();
    let mut g = vec![0.0; state.x.len()];
    step_mut(&mut next, spec, eta, rng, &mut g)?;
    Ok(next)
}

/// One ULA step with caller-supplied noise `z`.
pub fn ula_step_with_noise(
    state: &ChainState,
    spec: &PotentialSpec,
    eta: f64,
    z: &[f64],
) -> Result<ChainState> {
    check_eta(eta)?;
    check_dim(spec, &state.x)?;
    check_dim(spec, z)?;
    let g = spec.grad(&state.x);
    check_grad(&g, &state.x, state.k)?;
    let s = (2.0 * eta).sqrt();
    let mut next = state.clone();
    for ((xi, gi), zi) in next.x.iter_mut().zip(&g).zip(z) {
        *xi += -eta * gi + s * zi;
    }
    next.advance(eta);
    Ok(next)
}

/// One step driven by the stochastic gradient `g_μ(x) = ∇U(x + μξ)`.
/// The ξ draw precedes the Gaussian noise in `rng`.
pub fn ula_smoothed_step<R: Rng + ?Sized>(
    state: &ChainState,
    spec: &PotentialSpec,
    cfg: &SmoothingConfig,
    eta: f64,
    rng: &mut R,
) -> Result<ChainState> {
    check_eta(eta)?;
    check_dim(spec, &state.x)?;
    cfg.validate()?;
    if cfg.mu <= 0.0 {
        return Err(Error::param("mu", "must be > 0 for the smoothed kernel"));
    }
    let sampler = NpSampler::new(cfg.p)?;
    let d = state.x.len();
    let (mut scratch, mut g) = (vec![0.0; d], vec![0.0; d]);
    let mut next = state.clone();
    smoothed_step_mut(&mut next, spec, cfg.mu, &sampler, eta, rng, &mut scratch, &mut g)?;
    Ok(next)
}

/// Smoothed step with caller-supplied ξ and z.
pub fn ula_smoothed_step_with_noise(
    state: &ChainState,
    spec: &PotentialSpec,
    mu: f64,
    eta: f64,
    xi: &[f64],
    z: &[f64],
) -> Result<ChainState> {
    check_eta(eta)?;
    check_dim(spec, xi)?;
    let y: Vec<f64> = state.x.iter().zip(xi).map(|(x, e)| x + mu * e).collect();
    let g = spec.grad(&y);
    check_grad(&g, &y, state.k)?;
    let s = (2.0 * eta).sqrt();
    let mut next = state.clone();
    for ((xv, gi), zi) in next.x.iter_mut().zip(&g).zip(z) {
        *xv += -eta * gi + s * zi;
    }
    next.advance(eta);
    Ok(next)
}

/// `n` independent draws from N(0, I_d / L), all at k = 0, t = 0.
pub fn init_gaussian<R: Rng + ?Sized>(d: usize, l: f64, n: usize, rng: &mut R) -> Vec<ChainState> {
    let sd = (1.0 / l).sqrt();
    (0..n)
        .map(|_| {
            let x = (0..d)
                .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                .collect();
            ChainState::new(x)
        })
        .collect()
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

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EtaSetting {
    Fixed(f64),
    /// Take η from a planner [`BoundSet`].
    Plan,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MuSetting {
    Value(f64),
    SqrtEta,
}

impl MuSetting {
    pub fn resolve(&self, eta: f64) -> f64 {
        match self {
            MuSetting::Value(m) => *m,
            MuSetting::SqrtEta => eta.sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplerSmoothing {
    pub mu: MuSetting,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitSetting {
    /// N(0, I/L) with L = 1 ∨ max Lᵢ.
    ScaledGaussian,
    /// Independent coordinates N(meanⱼ, varⱼ).
    Gaussian { mean: Vec<f64>, var: Vec<f64> },
    Point(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub n_chains: usize,
    pub n_steps: u64,
    pub eta: EtaSetting,
    pub smoothing: Option<SamplerSmoothing>,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
    pub init: InitSetting,
    /// Extra steps (k = 0 allowed) at which every chain is recorded,
    /// regardless of burn-in and thinning.
    pub checkpoints: Vec<u64>,
}

impl RunConfig {
    pub fn new(n_chains: usize, n_steps: u64, eta: f64, seed: u64) -> Self {
        Self {
            n_chains,
            n_steps,
            eta: EtaSetting::Fixed(eta),
            smoothing: None,
            burn_in: 0,
            thin: 1,
            seed,
            init: InitSetting::ScaledGaussian,
            checkpoints: Vec::new(),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.n_chains == 0 {
            return Err(Error::param("n_chains", "must be >= 1"));
        }
        if self.n_steps == 0 {
            return Err(Error::param("n_steps", "must be >= 1"));
        }
        if self.thin == 0 {
            return Err(Error::param("thin", "must be >= 1"));
        }
        if self.burn_in >= self.n_steps {
            return Err(Error::param("burn_in", "must be < n_steps"));
        }
        if let EtaSetting::Fixed(e) = self.eta {
            check_eta(e)?;
        }
        if let Some(s) = &self.smoothing {
            if !(s.p > 1.0) {
                return Err(Error::param("p", "must be > 1"));
            }
            if let MuSetting::Value(m) = s.mu {
                if !(m > 0.0 && m.is_finite()) {
                    return Err(Error::param("mu", "must be > 0 when smoothing is on"));
                }
            }
        }
        match &self.init {
            InitSetting::Gaussian { mean, var } => {
                if mean.len() != dim || var.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: if mean.len() != dim { mean.len() } else { var.len() },
                    });
                }
                if var.iter().any(|v| !(*v >= 0.0)) {
                    return Err(Error::param("init.var", "must be >= 0"));
                }
            }
            InitSetting::Point(x) if x.len() != dim => {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: x.len(),
                })
            }
            _ => {}
        }
        Ok(())
    }

    fn is_recorded(&self, k: u64) -> bool {
        (k > self.burn_in && (k - self.burn_in) % self.thin == 0) || self.checkpoints.contains(&k)
    }
}

/// Scalars recorded alongside every sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SummaryRecord {
    pub chain_id: u32,
    pub k: u64,
    pub t: f64,
    pub norm: f64,
    pub u: f64,
    /// ⟨∇U(x), x⟩
    pub dissip_inner: f64,
}

/// Recorded points, stored flat and ordered by (chain_id, k).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleSet {
    pub dim: usize,
    pub chain_ids: Vec<u32>,
    pub ks: Vec<u64>,
    pub xs: Vec<f64>,
}

impl SampleSet {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.ks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ks.is_empty()
    }

    pub fn push(&mut self, chain_id: u32, k: u64, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        self.chain_ids.push(chain_id);
        self.ks.push(k);
        self.xs.extend_from_slice(x);
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    /// Flat coordinates of every record with step index `k`.
    pub fn ensemble_at(&self, k: u64) -> Vec<f64> {
        let mut out = Vec::new();
        for (i, &ki) in self.ks.iter().enumerate() {
            if ki == k {
                out.extend_from_slice(self.point(i));
            }
        }
        out
    }

    /// Flat coordinates of every record with `k > after`.
    pub fn pooled_after(&self, after: u64) -> Vec<f64> {
        let mut out = Vec::new();
        for (i, &ki) in self.ks.iter().enumerate() {
            if ki > after {
                out.extend_from_slice(self.point(i));
            }
        }
        out
    }

    /// Distinct step indices in ascending order.
    pub fn distinct_ks(&self) -> Vec<u64> {
        let mut ks = self.ks.clone();
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub eta: f64,
    /// μ actually used, when smoothing was on.
    pub mu: Option<f64>,
    pub samples: SampleSet,
    pub summaries: Vec<SummaryRecord>,
    /// Step at which each chain diverged, if it did.
    pub diverged: Vec<Option<u64>>,
    pub final_states: Vec<ChainState>,
}

impl RunOutput {
    pub fn n_diverged(&self) -> usize {
        self.diverged.iter().filter(|d| d.is_some()).count()
    }
}

struct ChainOutput {
    ks: Vec<u64>,
    xs: Vec<f64>,
    summaries: Vec<SummaryRecord>,
    diverged: Option<u64>,
    state: ChainState,
}

/// RNG for chain `index`: seeded from `seed`, stream set to the index.
pub fn chain_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn initial_state(spec: &PotentialSpec, init: &InitSetting, rng: &mut ChaCha8Rng) -> ChainState {
    let d = spec.dim();
    match init {
        InitSetting::ScaledGaussian => init_gaussian(d, spec.l_max(), 1, rng).remove(0),
        InitSetting::Gaussian { mean, var } => ChainState::new(
            mean.iter()
                .zip(var)
                .map(|(m, v)| m + v.sqrt() * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        ),
        InitSetting::Point(x) => ChainState::new(x.clone()),
    }
}

/// Runs `config.n_chains` independent chains in parallel.
///
/// Chains that leave the ball of radius 10¹², or hit a non-finite state or
/// gradient, are frozen and flagged in [`RunOutput::diverged`]; the others
/// continue.
pub fn run(config: &RunConfig, spec: &PotentialSpec, plan: Option<&BoundSet>) -> Result<RunOutput> {
    config.validate(spec.dim())?;
    let eta = match config.eta {
        EtaSetting::Fixed(e) => e,
        EtaSetting::Plan => {
            let plan = plan.ok_or_else(|| Error::Missing("eta = plan but no plan given".into()))?;
            check_eta(plan.eta)?;
            plan.eta
        }
    };
    let smoothing = match &config.smoothing {
        Some(s) => {
            let mu = s.mu.resolve(eta);
            if !(mu > 0.0) {
                return Err(Error::param("mu", "resolved to a non-positive value"));
            }
            Some((mu, NpSampler::new(s.p)?))
        }
        None => None,
    };

    let outputs: Vec<ChainOutput> = (0..config.n_chains)
        .into_par_iter()
        .map(|c| run_chain(config, spec, eta, smoothing.as_ref(), c))
        .collect();

    let mut samples = SampleSet::new(spec.dim());
    let mut summaries = Vec::new();
    let mut diverged = Vec::with_capacity(outputs.len());
    let mut final_states = Vec::with_capacity(outputs.len());
    for (c, o) in outputs.into_iter().enumerate() {
        samples.chain_ids.extend(std::iter::repeat_n(c as u32, o.ks.len()));
        samples.ks.extend(o.ks);
        samples.xs.extend(o.xs);
        summaries.extend(o.summaries);
        diverged.push(o.diverged);
        final_states.push(o.state);
    }
    Ok(RunOutput {
        eta,
        mu: smoothing.map(|(m, _)| m),
        samples,
        summaries,
        diverged,
        final_states,
    })
}

fn run_chain(
    config: &RunConfig,
    spec: &PotentialSpec,
    eta: f64,
    smoothing: Option<&(f64, NpSampler)>,
    c: usize,
) -> ChainOutput {
    let d = spec.dim();
    let mut rng = chain_rng(config.seed, c as u64);
    let mut state = initial_state(spec, &config.init, &mut rng);
    let mut g = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    let mut out = ChainOutput {
        ks: Vec::new(),
        xs: Vec::new(),
        summaries: Vec::new(),
        diverged: None,
        state: ChainState::new(Vec::new()),
    };
    let record = |state: &ChainState, out: &mut ChainOutput, g: &mut [f64]| {
        spec.grad_into(&state.x, g);
        out.ks.push(state.k);
        out.xs.extend_from_slice(&state.x);
        out.summaries.push(SummaryRecord {
            chain_id: c as u32,
            k: state.k,
            t: state.t(),
            norm: norm(&state.x),
            u: spec.value(&state.x),
            dissip_inner: dot(g, &state.x),
        });
    };
    if config.is_recorded(0) {
        record(&state, &mut out, &mut g);
    }
    for _ in 0..config.n_steps {
        let stepped = match smoothing {
            None => step_mut(&mut state, spec, eta, &mut rng, &mut g),
            Some((mu, sampler)) => smoothed_step_mut(
                &mut state,
                spec,
                *mu,
                sampler,
                eta,
                &mut rng,
                &mut scratch,
                &mut g,
            ),
        };
        if stepped.is_err() || state.is_diverged() {
            out.diverged = Some(state.k);
            break;
        }
        if config.is_recorded(state.k) {
            record(&state, &mut out, &mut g);
        }
    }
    out.state = state;
    out
}
