//! Convergence diagnostics.
//!
//! - exact KL for Gaussian laws and the exact law of ULA on diagonal
//!   quadratic targets
//! - histogram KL and TV against a quadrature-normalized target, d ≤ 2
//! - empirical W₂ (sorting in 1D, optimal assignment in d ≥ 2)
//! - quadrature W₂ between π and its smoothed version π_μ in 1D
//! - M_s moments and the Pinsker / W_β conversions

use std::collections::BTreeMap;

use crate::bounds::{tilde_c, tilde_d};
use crate::pgauss::kappa_log;
use crate::potential::{envelope_offset, PotentialSpec};
use crate::quadrature::{simpson, simpson2};
use crate::sampler::SampleSet;
use crate::{Error, Result};

/// Minimum sample count for histogram estimates unless explicitly bypassed.
pub const MIN_HIST_SAMPLES: usize = 10_000;

/// Target tail mass outside the histogram box.
pub const TAIL_MASS: f64 = 1e-8;

// ---------------------------------------------------------------------------
// Gaussian oracles
// ---------------------------------------------------------------------------

/// `KL(N(m, diag(cov)) ‖ N(0, diag(1/Q)))
///   = ½ Σⱼ [Qⱼcovⱼ + Qⱼmⱼ² − 1 − ln(Qⱼcovⱼ)]`.
pub fn kl_gaussian_exact(mean: &[f64], cov: &[f64], q: &[f64]) -> Result<f64> {
    if mean.len() != q.len() || cov.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            got: if mean.len() != q.len() { mean.len() } else { cov.len() },
        });
    }
    if cov.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::param("cov", "entries must be > 0"));
    }
    if q.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::param("Q", "entries must be > 0"));
    }
    Ok(0.5
        * mean
            .iter()
            .zip(cov)
            .zip(q)
            .map(|((m, c), qj)| {
                let r = qj * c;
                // r − 1 − ln r loses everything to cancellation near r = 1.
                let x = r - 1.0;
                let lin = if x.abs() < 1e-3 {
                    x * x / 2.0 - x * x * x / 3.0 + x.powi(4) / 4.0 - x.powi(5) / 5.0
                } else {
                    x - r.ln()
                };
                lin + qj * m * m
            })
            .sum::<f64>())
}

fn check_stable(q: &[f64], eta: f64) -> Result<()> {
    for (i, qi) in q.iter().enumerate() {
        let prod = eta * qi;
        if !(prod < 2.0) {
            return Err(Error::Unstable {
                index: i,
                product: prod,
            });
        }
    }
    Ok(())
}

/// Exact law after `k` ULA steps on `U = ½ xᵀ diag(Q) x`:
/// `m ← (I−ηQ)m`, `Σ ← (I−ηQ)Σ(I−ηQ) + 2ηI`.
pub fn propagate_gaussian_chain(
    q: &[f64],
    eta: f64,
    k: u64,
    mean0: &[f64],
    cov0: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_stable(q, eta)?;
    if mean0.len() != q.len() || cov0.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            got: mean0.len(),
        });
    }
    let mut m = mean0.to_vec();
    let mut c = cov0.to_vec();
    for (j, qj) in q.iter().enumerate() {
        let r = 1.0 - eta * qj;
        for _ in 0..k {
            m[j] *= r;
            c[j] = r * r * c[j] + 2.0 * eta;
        }
    }
    Ok((m, c))
}

/// KL of the exact law at each step 0..=k_max.
pub fn gaussian_kl_trajectory(
    q: &[f64],
    eta: f64,
    k_max: u64,
    mean0: &[f64],
    cov0: &[f64],
) -> Result<Vec<f64>> {
    check_stable(q, eta)?;
    let mut m = mean0.to_vec();
    let mut c = cov0.to_vec();
    let mut out = Vec::with_capacity(k_max as usize + 1);
    out.push(kl_gaussian_exact(&m, &c, q)?);
    for _ in 0..k_max {
        for j in 0..q.len() {
            let r = 1.0 - eta * q[j];
            m[j] *= r;
            c[j] = r * r * c[j] + 2.0 * eta;
        }
        out.push(kl_gaussian_exact(&m, &c, q)?);
    }
    Ok(out)
}

/// Stationary law of the recursion: mean 0, `cov = 2η/(1 − (1−ηQ)²)`.
pub fn gaussian_stationary_cov(q: &[f64], eta: f64) -> Result<Vec<f64>> {
    check_stable(q, eta)?;
    Ok(q.iter()
        .map(|qi| {
            let r = 1.0 - eta * qi;
            2.0 * eta / (1.0 - r * r)
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Histogram KL / TV
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistogramGrid {
    /// Bins per axis.
    pub bins: usize,
    /// Box `[−B, B]^d`; `None` picks B from the lower envelope of U so the
    /// target mass outside is below 1e−8.
    pub half_width: Option<f64>,
    /// Accept fewer than [`MIN_HIST_SAMPLES`] samples.
    pub allow_few_samples: bool,
}

impl HistogramGrid {
    pub fn new(bins: usize) -> Self {
        Self {
            bins,
            half_width: None,
            allow_few_samples: false,
        }
    }

    pub fn with_half_width(mut self, b: f64) -> Self {
        self.half_width = Some(b);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistogramDivergence {
    pub kl: f64,
    pub tv: f64,
    pub half_width: f64,
    pub bins: usize,
    pub log_z: f64,
    pub n: usize,
    /// Fraction of samples outside the box (they share one overflow cell).
    pub outside_fraction: f64,
    /// Target mass assigned to the overflow cell.
    pub tail_mass: f64,
}

/// Envelope-based upper bound on `∫_{‖x‖>B} e^{−U}`.
fn envelope_tail(spec: &PotentialSpec, b: f64) -> f64 {
    let a = spec.dissip.a;
    let beta = spec.dissip.beta;
    let c = a / (2.0 * beta);
    let off = envelope_offset(spec);
    let d = spec.dim() as f64;
    // surface area of the unit sphere in R^d
    let area = 2.0 * std::f64::consts::PI.powf(d / 2.0) / statrs::function::gamma::gamma(d / 2.0);
    let r_max = ((c * b.powf(beta) + 60.0) / c).powf(1.0 / beta);
    area * (-off).exp()
        * simpson(|r| r.powf(d - 1.0) * (-c * r.powf(beta)).exp(), b, r_max, 1e-14)
}

/// Box half-width from the envelope: the smallest B (on a doubling/bisection
/// search) with envelope tail ≤ 1e−8 · Z.
pub fn envelope_half_width(spec: &PotentialSpec, log_z: f64) -> f64 {
    let z = log_z.exp();
    let ok = |b: f64| envelope_tail(spec, b) <= TAIL_MASS * z;
    let mut hi = 1.0;
    while !ok(hi) {
        hi *= 2.0;
        if hi > 1e6 {
            return hi;
        }
    }
    let mut lo = 0.0;
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `log Z` with `Z = ∫ e^{−U}`, integrated over a box on which the lower
/// envelope has decayed by e^{−60}. d ≤ 2.
pub fn log_partition(spec: &PotentialSpec) -> Result<f64> {
    let d = spec.dim();
    if d > 2 {
        return Err(Error::Unsupported(format!("quadrature needs d <= 2, got {d}")));
    }
    let b0 = envelope_half_width_prior(spec);
    let shift = coarse_min(spec, b0);
    let z_box = box_integral(spec, b0, shift);
    Ok(z_box.ln() - shift)
}

/// Minimum of U over a coarse grid on the box, so the shifted integrand
/// peaks near 1 and absolute quadrature tolerances are meaningful.
fn coarse_min(spec: &PotentialSpec, b: f64) -> f64 {
    let n = 400;
    let h = 2.0 * b / n as f64;
    let mut m = spec.value_at_origin();
    match spec.dim() {
        1 => {
            for i in 0..=n {
                m = m.min(spec.value(&[-b + h * i as f64]));
            }
        }
        _ => {
            for i in 0..=n {
                for j in 0..=n {
                    m = m.min(spec.value(&[-b + h * i as f64, -b + h * j as f64]));
                }
            }
        }
    }
    m
}

fn envelope_half_width_prior(spec: &PotentialSpec) -> f64 {
    // B where the envelope exponent exceeds its offset by 60.
    let c = spec.dissip.a / (2.0 * spec.dissip.beta);
    let off = envelope_offset(spec);
    let u0 = spec.value_at_origin();
    ((60.0 + (u0 - off).max(0.0)) / c).powf(1.0 / spec.dissip.beta)
}

fn box_integral(spec: &PotentialSpec, b: f64, shift: f64) -> f64 {
    match spec.dim() {
        1 => {
            let f = |x: f64| (-(spec.value(&[x]) - shift)).exp();
            simpson(&f, -b, 0.0, 1e-13) + simpson(&f, 0.0, b, 1e-13)
        }
        _ => simpson2(
            |x, y| (-(spec.value(&[x, y]) - shift)).exp(),
            (-b, b),
            (-b, b),
            1e-11,
        ),
    }
}

/// Composite Simpson in 1D with `2n` intervals.
fn composite1<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> f64 {
    let m = 2 * n;
    let h = (hi - lo) / m as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + h * i as f64);
    }
    s * h / 3.0
}

/// Histogram estimate of KL(p̂ ‖ π) and TV(p̂, π) from flat samples.
///
/// Target cell masses come from quadrature of e^{−U} over each cell,
/// normalized by Z. Samples outside the box go to an overflow cell whose
/// target mass is the envelope tail bound.
pub fn kl_quadrature(
    samples: &[f64],
    spec: &PotentialSpec,
    grid: &HistogramGrid,
) -> Result<HistogramDivergence> {
    let d = spec.dim();
    if d > 2 {
        return Err(Error::Unsupported(format!(
            "histogram KL needs d <= 2, got {d}"
        )));
    }
    if samples.len() % d != 0 {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: samples.len() % d,
        });
    }
    let n = samples.len() / d;
    if n < MIN_HIST_SAMPLES && !grid.allow_few_samples {
        return Err(Error::TooFewSamples {
            got: n,
            min: MIN_HIST_SAMPLES,
        });
    }
    if n == 0 || grid.bins == 0 {
        return Err(Error::param("samples", "need at least one sample and one bin"));
    }
    let log_z = log_partition(spec)?;
    let b = match grid.half_width {
        Some(b) if b > 0.0 => b,
        Some(_) => return Err(Error::param("half_width", "must be > 0")),
        None => envelope_half_width(spec, log_z),
    };
    let nb = grid.bins;
    let h = 2.0 * b / nb as f64;
    let n_cells = nb.pow(d as u32);

    let mut counts = vec![0u64; n_cells];
    let mut outside = 0u64;
    for pt in samples.chunks_exact(d) {
        let mut idx = 0usize;
        let mut inside = true;
        for &c in pt {
            if !(c >= -b && c < b) {
                inside = false;
                break;
            }
            let i = (((c + b) / h) as usize).min(nb - 1);
            idx = idx * nb + i;
        }
        if inside {
            counts[idx] += 1;
        } else {
            outside += 1;
        }
    }

    let shift = log_z;
    let mut target = vec![0.0; n_cells];
    match d {
        1 => {
            for (i, t) in target.iter_mut().enumerate() {
                let lo = -b + h * i as f64;
                *t = simpson(|x| (-(spec.value(&[x]) + shift)).exp(), lo, lo + h, 1e-14);
            }
        }
        _ => {
            for i in 0..nb {
                let xlo = -b + h * i as f64;
                for j in 0..nb {
                    let ylo = -b + h * j as f64;
                    target[i * nb + j] = composite1(
                        |x| {
                            composite1(|y| (-(spec.value(&[x, y]) + shift)).exp(), ylo, ylo + h, 4)
                        },
                        xlo,
                        xlo + h,
                        4,
                    );
                }
            }
        }
    }
    // Mass outside the box is tiny by construction; bound it by the envelope.
    let tail = (envelope_tail(spec, b) * (-log_z).exp()).min(1.0).max(1e-300);

    let nf = n as f64;
    let mut kl = 0.0;
    let mut tv = 0.0;
    for (c, t) in counts.iter().zip(&target) {
        let p = *c as f64 / nf;
        if p > 0.0 {
            kl += p * (p / t).ln();
        }
        tv += (p - t).abs();
    }
    let p_out = outside as f64 / nf;
    if p_out > 0.0 {
        kl += p_out * (p_out / tail).ln();
    }
    tv += (p_out - tail).abs();
    Ok(HistogramDivergence {
        kl: kl.max(0.0),
        tv: (0.5 * tv).min(1.0),
        half_width: b,
        bins: nb,
        log_z,
        n,
        outside_fraction: p_out,
        tail_mass: tail,
    })
}

// ---------------------------------------------------------------------------
// Wasserstein
// ---------------------------------------------------------------------------

/// Largest point count for exact assignment in d ≥ 2.
pub const MAX_ASSIGNMENT_POINTS: usize = 512;

/// Empirical W₂ between two uniform point clouds of equal size, given as flat
/// coordinate arrays of dimension `dim`.
pub fn w2_empirical(xs: &[f64], ys: &[f64], dim: usize) -> Result<f64> {
    if dim == 0 || xs.len() % dim != 0 || ys.len() % dim != 0 {
        return Err(Error::param("dim", "does not divide the input length"));
    }
    let n = xs.len() / dim;
    if ys.len() / dim != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: ys.len() / dim,
        });
    }
    if n == 0 {
        return Ok(0.0);
    }
    if dim == 1 {
        let mut a = xs.to_vec();
        let mut b = ys.to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let s: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        return Ok((s / n as f64).sqrt());
    }
    if n > MAX_ASSIGNMENT_POINTS {
        return Err(Error::Unsupported(format!(
            "exact assignment limited to {MAX_ASSIGNMENT_POINTS} points, got {n}"
        )));
    }
    let cost: Vec<f64> = (0..n)
        .flat_map(|i| {
            let x = &xs[i * dim..(i + 1) * dim];
            (0..n).map(move |j| {
                let y = &ys[j * dim..(j + 1) * dim];
                x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            })
        })
        .collect();
    let (total, _) = hungarian(&cost, n);
    Ok((total.max(0.0) / n as f64).sqrt())
}

/// Minimum-cost perfect matching on an n×n row-major cost matrix
/// (shortest augmenting path with potentials, O(n³)). Returns the total cost
/// and `assign[row] = col`.
pub fn hungarian(cost: &[f64], n: usize) -> (f64, Vec<usize>) {
    let inf = f64::INFINITY;
    // 1-based arrays; index 0 is the virtual column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    let total = (0..n).map(|i| cost[i * n + assign[i]]).sum();
    (total, assign)
}

/// 1D W₂ between a sample set and π, using π's quantiles at the plotting
/// positions (i − ½)/n.
pub fn w2_to_target_1d(samples: &[f64], spec: &PotentialSpec) -> Result<f64> {
    if spec.dim() != 1 {
        return Err(Error::Unsupported("W2 to target is 1D only".into()));
    }
    if samples.is_empty() {
        return Err(Error::param("samples", "empty"));
    }
    let grid = Cdf1d::from_log_density(|x| -spec.value(&[x]), target_half_width(spec), 200_000);
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut acc = 0.0;
    for (i, x) in s.iter().enumerate() {
        let q = grid.quantile((i as f64 + 0.5) / n);
        acc += (x - q) * (x - q);
    }
    Ok((acc / n).sqrt())
}

fn target_half_width(spec: &PotentialSpec) -> f64 {
    envelope_half_width_prior(spec)
}

/// Piecewise-linear CDF on a uniform grid built from a log-density.
#[derive(Clone, Debug)]
pub struct Cdf1d {
    lo: f64,
    h: f64,
    cdf: Vec<f64>,
}

impl Cdf1d {
    /// Trapezoid-integrated CDF of `exp(log_f)` on `[−b, b]` with `n` cells.
    pub fn from_log_density<F: Fn(f64) -> f64>(log_f: F, b: f64, n: usize) -> Self {
        let h = 2.0 * b / n as f64;
        let lf: Vec<f64> = (0..=n).map(|i| log_f(-b + h * i as f64)).collect();
        let m = lf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let f: Vec<f64> = lf.iter().map(|v| (v - m).exp()).collect();
        let mut cdf = Vec::with_capacity(n + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for i in 0..n {
            acc += 0.5 * h * (f[i] + f[i + 1]);
            cdf.push(acc);
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        Self { lo: -b, h, cdf }
    }

    /// F⁻¹(u) by bisection on the node values and linear interpolation.
    pub fn quantile(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c < u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.lo + self.h * ((i - 1) as f64 + frac)
    }
}

/// `U_μ(x) = ∫ U(x + μt) e^{−|t|^p/p} dt / κ` in 1D by adaptive quadrature,
/// split at the origin of U's argument so a kink there is resolved.
pub fn smoothed_value_quadrature_1d(spec: &PotentialSpec, x: f64, mu: f64, p: f64) -> f64 {
    if mu == 0.0 {
        return spec.value(&[x]);
    }
    let log_k = kappa_log(1, p);
    let tmax = (p * 50.0).powf(1.0 / p);
    let f = |t: f64| spec.value(&[x + mu * t]) * (-t.abs().powf(p) / p - log_k).exp();
    let kink = -x / mu;
    let mut cuts = vec![-tmax, 0.0, tmax];
    if kink.abs() < tmax {
        cuts.push(kink);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2).map(|w| simpson(f, w[0], w[1], 1e-13)).sum()
}

/// CDF and normalized density at the nodes of a uniform grid.
struct NodeCdf {
    cdf: Vec<f64>,
    dens: Vec<f64>,
}

impl NodeCdf {
    fn from_masses(masses: &[f64], dens: Vec<f64>) -> Self {
        let z: f64 = masses.iter().sum();
        let mut cdf = Vec::with_capacity(masses.len() + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for m in masses {
            acc += m;
            cdf.push(acc / z);
        }
        Self {
            cdf,
            dens: dens.into_iter().map(|v| v / z).collect(),
        }
    }

    /// Cell masses by adaptive Simpson; for densities that are cheap but
    /// may have kinks at nodes.
    fn adaptive<F: Fn(f64) -> f64>(log_f: F, lo: f64, h: f64, n: usize) -> Self {
        let lf: Vec<f64> = (0..=n).map(|i| log_f(lo + h * i as f64)).collect();
        let shift = lf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let masses: Vec<f64> = (0..n)
            .map(|i| {
                let a = lo + h * i as f64;
                simpson(|x| (log_f(x) - shift).exp(), a, a + h, 1e-15)
            })
            .collect();
        Self::from_masses(&masses, lf.iter().map(|v| (v - shift).exp()).collect())
    }

    /// Cell masses by three-point Simpson; for smooth densities that are
    /// expensive to evaluate.
    fn three_point<F: Fn(f64) -> f64>(log_f: F, lo: f64, h: f64, n: usize) -> Self {
        let lf: Vec<f64> = (0..=2 * n).map(|i| log_f(lo + 0.5 * h * i as f64)).collect();
        let shift = lf.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let f: Vec<f64> = lf.iter().map(|v| (v - shift).exp()).collect();
        let masses: Vec<f64> = (0..n)
            .map(|i| h / 6.0 * (f[2 * i] + 4.0 * f[2 * i + 1] + f[2 * i + 2]))
            .collect();
        Self::from_masses(&masses, f.iter().step_by(2).cloned().collect())
    }

    /// Solves G(t) = u on the cubic Hermite interpolant of the CDF.
    fn inverse(&self, lo: f64, h: f64, u: f64) -> f64 {
        let n = self.cdf.len() - 1;
        let j = self.cdf.partition_point(|&c| c < u).clamp(1, n) - 1;
        let (c0, c1) = (self.cdf[j], self.cdf[j + 1]);
        let (d0, d1) = (self.dens[j] * h, self.dens[j + 1] * h);
        let herm = |s: f64| {
            let s2 = s * s;
            let s3 = s2 * s;
            (2.0 * s3 - 3.0 * s2 + 1.0) * c0
                + (s3 - 2.0 * s2 + s) * d0
                + (-2.0 * s3 + 3.0 * s2) * c1
                + (s3 - s2) * d1
        };
        let (mut a, mut b) = (0.0, 1.0);
        for _ in 0..64 {
            let m = 0.5 * (a + b);
            if herm(m) < u {
                a = m;
            } else {
                b = m;
            }
        }
        lo + h * (j as f64 + 0.5 * (a + b))
    }
}

/// `∫ (T(x) − x)² f(x) dx` with the monotone map `T = G⁻¹ ∘ F`, by Simpson
/// over the nodes (`n` even).
fn transport_w2_sq(f: &NodeCdf, g: &NodeCdf, lo: f64, h: f64) -> f64 {
    let n = f.cdf.len() - 1;
    let v: Vec<f64> = (0..=n)
        .map(|i| {
            let x = lo + h * i as f64;
            let t = g.inverse(lo, h, f.cdf[i]);
            (t - x) * (t - x) * f.dens[i]
        })
        .collect();
    (0..n / 2)
        .map(|i| h / 3.0 * (v[2 * i] + 4.0 * v[2 * i + 1] + v[2 * i + 2]))
        .sum()
}

/// `W₂²(π, π_μ)` in 1D, with `π_μ ∝ e^{−U_μ}` and U_μ evaluated by
/// quadrature. `n` cells on the envelope-derived box (rounded up to a
/// multiple of 4 so the origin is a Simpson panel boundary).
///
/// The displacement `T(x) − x` is far smaller than any practical cell, so
/// the coupling is computed as a transport map from accurate node CDFs
/// rather than by differencing two interpolated quantile functions.
pub fn w2_sq_smoothing_gap_1d(spec: &PotentialSpec, mu: f64, p: f64, n: usize) -> Result<f64> {
    if spec.dim() != 1 {
        return Err(Error::Unsupported("smoothing gap quadrature is 1D only".into()));
    }
    let n = n.max(4).div_ceil(4) * 4;
    let b = target_half_width(spec);
    let h = 2.0 * b / n as f64;
    let f = NodeCdf::adaptive(|x| -spec.value(&[x]), -b, h, n);
    let g = NodeCdf::three_point(|x| -smoothed_value_quadrature_1d(spec, x, mu, p), -b, h, n);
    Ok(transport_w2_sq(&f, &g, -b, h))
}

// ---------------------------------------------------------------------------
// Moments
// ---------------------------------------------------------------------------

fn check_s(s: u32) -> Result<()> {
    if s < 2 || s % 2 != 0 {
        return Err(Error::param("s", format!("{s} must be an even integer >= 2")));
    }
    Ok(())
}

/// Sample mean of `(1 + ‖x‖²)^{s/2}` and its standard error.
pub fn moment_ms_with_stderr(samples: &[f64], dim: usize, s: u32) -> Result<(f64, f64)> {
    check_s(s)?;
    if dim == 0 || samples.len() % dim != 0 || samples.is_empty() {
        return Err(Error::param("samples", "empty or not a multiple of dim"));
    }
    let mut w = crate::pgauss::Welford::new(1);
    for pt in samples.chunks_exact(dim) {
        let r2: f64 = pt.iter().map(|v| v * v).sum();
        w.push(&[(1.0 + r2).powi(s as i32 / 2)]);
    }
    Ok((w.mean()[0], w.max_stderr()))
}

/// `M_s = mean of (1 + ‖x‖²)^{s/2}` over the samples.
pub fn moment_ms(samples: &[f64], dim: usize, s: u32) -> Result<f64> {
    moment_ms_with_stderr(samples, dim, s).map(|(m, _)| m)
}

/// `E_π f(x)` by quadrature, d ≤ 2.
pub fn expect_quadrature<F: Fn(&[f64]) -> f64>(spec: &PotentialSpec, f: F) -> Result<f64> {
    let log_z = log_partition(spec)?;
    let b = envelope_half_width_prior(spec);
    Ok(match spec.dim() {
        1 => {
            let g = |x: f64| f(&[x]) * (-(spec.value(&[x]) + log_z)).exp();
            simpson(&g, -b, 0.0, 1e-13) + simpson(&g, 0.0, b, 1e-13)
        }
        _ => simpson2(
            |x, y| f(&[x, y]) * (-(spec.value(&[x, y]) + log_z)).exp(),
            (-b, b),
            (-b, b),
            1e-11,
        ),
    })
}

/// `M_s(π)` by quadrature.
pub fn moment_ms_quadrature(spec: &PotentialSpec, s: u32) -> Result<f64> {
    check_s(s)?;
    expect_quadrature(spec, |x| {
        (1.0 + x.iter().map(|v| v * v).sum::<f64>()).powi(s as i32 / 2)
    })
}

/// `E₂ = E_π‖x‖²` by quadrature.
pub fn second_moment_quadrature(spec: &PotentialSpec) -> Result<f64> {
    expect_quadrature(spec, |x| x.iter().map(|v| v * v).sum())
}

// ---------------------------------------------------------------------------
// Conversions and report
// ---------------------------------------------------------------------------

/// `2[(a/(4β))(1.5 + d̃ + c̃)]^{1/β}(H^{1/β} + H^{1/(2β)})` from raw constants.
pub fn wasserstein_budget_raw(a: f64, tilde_d: f64, tilde_c: f64, h: f64, beta: f64) -> f64 {
    let h = h.max(0.0);
    2.0 * (a / (4.0 * beta) * (1.5 + tilde_d + tilde_c)).powf(1.0 / beta)
        * (h.powf(1.0 / beta) + h.powf(1.0 / (2.0 * beta)))
}

/// `(TV bound, W_β bound)` from a KL value: Pinsker `√(KL/2)` and the W_β
/// budget.
pub fn conversions(kl: f64, bounds: &crate::bounds::BoundSet, beta: f64) -> Result<(f64, f64)> {
    if !(kl >= 0.0) {
        return Err(Error::param("kl", "must be >= 0"));
    }
    Ok(((kl / 2.0).sqrt(), crate::bounds::wasserstein_budget(bounds, kl, beta)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KlMethod {
    GaussianExact,
    Quadrature,
    None,
}

impl KlMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            KlMethod::GaussianExact => "gaussian_exact",
            KlMethod::Quadrature => "quadrature",
            KlMethod::None => "none",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointRecord {
    pub k: u64,
    pub t: f64,
    pub n: usize,
    pub kl: Option<f64>,
    pub kl_method: KlMethod,
    pub tv: Option<f64>,
    pub w2: Option<f64>,
    pub m_s: BTreeMap<u32, f64>,
    pub tv_from_kl: Option<f64>,
    pub wbeta_from_kl: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiagnosticsReport {
    pub records: Vec<CheckpointRecord>,
}

/// Exact law of a Gaussian ensemble on a diagonal quadratic target.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianOracle {
    pub q: Vec<f64>,
    pub mean0: Vec<f64>,
    pub cov0: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnoseOptions {
    pub eta: f64,
    pub grid: HistogramGrid,
    pub oracle: Option<GaussianOracle>,
    /// Only these k are reported; `None` reports every recorded k.
    pub checkpoints: Option<Vec<u64>>,
    pub moments: Vec<u32>,
}

impl DiagnoseOptions {
    pub fn new(eta: f64) -> Self {
        Self {
            eta,
            grid: HistogramGrid::new(128),
            oracle: None,
            checkpoints: None,
            moments: vec![2, 4],
        }
    }
}

/// k = 0, 1, 2, 4, …, and `n_steps`.
pub fn geometric_checkpoints(n_steps: u64) -> Vec<u64> {
    let mut ks = vec![0];
    let mut k = 1;
    while k < n_steps {
        ks.push(k);
        k *= 2;
    }
    ks.push(n_steps);
    ks
}

/// Builds one record per checkpoint from the ensemble recorded at that k.
///
/// KL comes from the Gaussian oracle when one is given, otherwise from the
/// histogram estimator when d ≤ 2 and enough samples are present. TV is
/// always the histogram estimate when available. W₂ is reported in 1D only
/// (sorted samples against target quantiles).
pub fn diagnose(
    samples: &SampleSet,
    spec: &PotentialSpec,
    opts: &DiagnoseOptions,
) -> Result<DiagnosticsReport> {
    if samples.dim != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: samples.dim,
        });
    }
    let d = spec.dim();
    let ks = match &opts.checkpoints {
        Some(ks) => ks.clone(),
        None => samples.distinct_ks(),
    };
    let tc = tilde_c(spec)?;
    let td = tilde_d(spec)?;
    let mut records = Vec::new();
    for k in ks {
        let ens = samples.ensemble_at(k);
        let n = ens.len() / d.max(1);
        if n == 0 {
            continue;
        }
        let hist = if d <= 2 && (n >= MIN_HIST_SAMPLES || opts.grid.allow_few_samples) {
            Some(kl_quadrature(&ens, spec, &opts.grid)?)
        } else {
            None
        };
        let (kl, kl_method) = match (&opts.oracle, &hist) {
            (Some(o), _) => {
                let (m, c) = propagate_gaussian_chain(&o.q, opts.eta, k, &o.mean0, &o.cov0)?;
                (Some(kl_gaussian_exact(&m, &c, &o.q)?), KlMethod::GaussianExact)
            }
            (None, Some(h)) => (Some(h.kl), KlMethod::Quadrature),
            (None, None) => (None, KlMethod::None),
        };
        let w2 = if d == 1 {
            Some(w2_to_target_1d(&ens, spec)?)
        } else {
            None
        };
        let mut m_s = BTreeMap::new();
        for &s in &opts.moments {
            m_s.insert(s, moment_ms(&ens, d, s)?);
        }
        let beta = spec.dissip.beta;
        records.push(CheckpointRecord {
            k,
            t: k as f64 * opts.eta,
            n,
            kl,
            kl_method,
            tv: hist.as_ref().map(|h| h.tv),
            w2,
            m_s,
            tv_from_kl: kl.map(|v| (v / 2.0).sqrt()),
            wbeta_from_kl: kl.map(|v| wasserstein_budget_raw(spec.dissip.a, td, tc, v, beta)),
        });
    }
    Ok(DiagnosticsReport { records })
}
