//! Batch front-end: a JSON config document drives the `plan`, `check`,
//! `sample` and `diagnose` pipelines.
//!
//! ```json
//! {
//!   "potential": { "name": "gaussian", "dim": 1, "params": {} },
//!   "run": { "n_chains": 4, "n_steps": 10000, "eta": 0.01,
//!            "burn_in": 1000, "thin": 10, "seed": 7 },
//!   "smoothing": { "enabled": false, "mu": "sqrt_eta", "p": 2.0, "mc_batch": 1000 },
//!   "plan": { "eps": 0.1, "s": 10, "gamma": "from_spec", "C_K": 1.0, "H0": "gaussian_init" },
//!   "output": { "dir": "out", "checkpoints": "geometric" }
//! }
//! ```
//!
//! Exit codes: 0 ok, 1 other error, 2 plan ineligibility, 3 every chain
//! diverged, 4 data mismatch.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Deserialize;

use crate::bounds::{plan_step_size, poincare_lower_bound, BoundSet, PlanRequest, Variant};
use crate::diagnostics::{
    diagnose, geometric_checkpoints, DiagnoseOptions, DiagnosticsReport, GaussianOracle,
    HistogramGrid,
};
use crate::pgauss::SmoothingConfig;
use crate::potential::{builtin, check_all, CheckReport, PotentialSpec};
use crate::sampler::{
    run, EtaSetting, InitSetting, MuSetting, RunConfig, RunOutput, SampleSet, SamplerSmoothing,
};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Config document
// ---------------------------------------------------------------------------

/// A number or a keyword string.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum NumOr {
    Num(f64),
    Word(String),
}

impl NumOr {
    fn word(&self, field: &str, allowed: &[&str]) -> Result<Option<String>> {
        match self {
            NumOr::Num(_) => Ok(None),
            NumOr::Word(w) if allowed.contains(&w.as_str()) => Ok(Some(w.clone())),
            NumOr::Word(w) => Err(Error::Config(format!(
                "{field} = \"{w}\"; expected a number or one of {allowed:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PotentialDoc {
    pub name: String,
    pub dim: usize,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum InitDoc {
    Word(String),
    Gaussian { mean: Vec<f64>, var: Vec<f64> },
    Point { point: Vec<f64> },
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunDoc {
    pub n_chains: usize,
    pub n_steps: u64,
    pub eta: NumOr,
    #[serde(default)]
    pub burn_in: u64,
    #[serde(default = "one")]
    pub thin: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub init: Option<InitDoc>,
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SmoothingDoc {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "sqrt_eta")]
    pub mu: NumOr,
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default = "thousand")]
    pub mc_batch: usize,
}

fn sqrt_eta() -> NumOr {
    NumOr::Word("sqrt_eta".into())
}

fn two() -> f64 {
    2.0
}

fn thousand() -> usize {
    1000
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PlanDoc {
    pub eps: f64,
    #[serde(default = "ten")]
    pub s: u32,
    #[serde(default = "from_spec")]
    pub gamma: NumOr,
    #[serde(rename = "C_K", default = "unit")]
    pub c_k: f64,
    #[serde(rename = "H0", default = "gaussian_init")]
    pub h0: NumOr,
    #[serde(default = "two")]
    pub p: f64,
    #[serde(rename = "T_hint", default)]
    pub t_hint: Option<f64>,
    #[serde(rename = "Ms0", default)]
    pub ms0: Option<f64>,
    #[serde(rename = "E2", default)]
    pub e2: Option<f64>,
    #[serde(default)]
    pub variant: Option<String>,
}

fn ten() -> u32 {
    10
}

fn unit() -> f64 {
    1.0
}

fn from_spec() -> NumOr {
    NumOr::Word("from_spec".into())
}

fn gaussian_init() -> NumOr {
    NumOr::Word(GAUSSIAN_INIT[0].into())
}

/// Keywords for the N(0, I/L) start and its initial-KL surrogate. The second
/// spelling is kept for older config files.
pub const GAUSSIAN_INIT: [&str; 2] = ["gaussian_init", "lemma35"];

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum CheckpointsDoc {
    Word(String),
    List(Vec<u64>),
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputDoc {
    #[serde(default)]
    pub dir: Option<String>,
    #[serde(default)]
    pub checkpoints: Option<CheckpointsDoc>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CheckDoc {
    #[serde(default = "ten_thousand")]
    pub n: usize,
    #[serde(default = "radius")]
    pub radius: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for CheckDoc {
    fn default() -> Self {
        Self {
            n: ten_thousand(),
            radius: radius(),
            seed: 0,
        }
    }
}

fn ten_thousand() -> usize {
    10_000
}

fn radius() -> f64 {
    10.0
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseDoc {
    #[serde(default)]
    pub bins: Option<usize>,
    #[serde(default)]
    pub half_width: Option<f64>,
    #[serde(default)]
    pub allow_few_samples: bool,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    pub potential: PotentialDoc,
    #[serde(default)]
    pub run: Option<RunDoc>,
    #[serde(default)]
    pub smoothing: Option<SmoothingDoc>,
    #[serde(default)]
    pub plan: Option<PlanDoc>,
    #[serde(default)]
    pub output: OutputDoc,
    #[serde(default)]
    pub check: CheckDoc,
    #[serde(default)]
    pub diagnose: DiagnoseDoc,
}

impl ConfigDoc {
    pub fn parse(text: &str) -> Result<Self> {
        let doc: ConfigDoc = serde_json::from_str(text)?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(run) = &self.run {
            run.eta.word("run.eta", &["plan"])?;
            if run.eta == NumOr::Word("plan".into()) && self.plan.is_none() {
                return Err(Error::Config("run.eta = \"plan\" needs a plan block".into()));
            }
        }
        if let Some(s) = &self.smoothing {
            s.mu.word("smoothing.mu", &["sqrt_eta"])?;
        }
        if let Some(p) = &self.plan {
            p.gamma.word("plan.gamma", &["from_spec", "poincare_lb"])?;
            p.h0.word("plan.H0", &GAUSSIAN_INIT)?;
            if let Some(v) = &p.variant {
                if v != "statement" && v != "proof" {
                    return Err(Error::Config(format!("plan.variant = \"{v}\"")));
                }
            }
        }
        if let Some(CheckpointsDoc::Word(w)) = &self.output.checkpoints {
            if w != "geometric" {
                return Err(Error::Config(format!("output.checkpoints = \"{w}\"")));
            }
        }
        Ok(())
    }

    fn run_doc(&self) -> Result<&RunDoc> {
        self.run
            .as_ref()
            .ok_or_else(|| Error::Config("missing run block".into()))
    }

    fn smoothing_on(&self) -> Option<&SmoothingDoc> {
        self.smoothing.as_ref().filter(|s| s.enabled)
    }
}

pub fn build_spec(cfg: &ConfigDoc) -> Result<PotentialSpec> {
    builtin(&cfg.potential.name, cfg.potential.dim, &cfg.potential.params)
}

/// Builds the planner request and runs it.
pub fn build_plan(cfg: &ConfigDoc, spec: &PotentialSpec) -> Result<BoundSet> {
    let p = cfg
        .plan
        .as_ref()
        .ok_or_else(|| Error::Config("missing plan block".into()))?;
    let gamma = match &p.gamma {
        NumOr::Num(g) => Some(*g),
        NumOr::Word(w) if w == "poincare_lb" => Some(poincare_lower_bound(spec, p.c_k)?),
        NumOr::Word(_) => spec.poincare_gamma,
    };
    let smoothing = match cfg.smoothing_on() {
        Some(s) => {
            let mu = match s.mu {
                NumOr::Num(m) => m,
                // Without a sampler η, √η has nothing to resolve against; use
                // the fixed run η when one is given.
                NumOr::Word(_) => match cfg.run.as_ref().map(|r| &r.eta) {
                    Some(NumOr::Num(e)) => e.sqrt(),
                    _ => {
                        return Err(Error::Config(
                            "smoothing.mu = \"sqrt_eta\" needs a numeric run.eta for planning"
                                .into(),
                        ))
                    }
                },
            };
            Some(SmoothingConfig::new(mu, s.p, s.mc_batch, 0)?)
        }
        None => None,
    };
    let req = PlanRequest {
        eps: p.eps,
        h0: match p.h0 {
            NumOr::Num(h) => Some(h),
            NumOr::Word(_) => None,
        },
        gamma,
        s: p.s,
        p: p.p,
        t_hint: p.t_hint,
        ms0: p.ms0,
        smoothing,
        e2: p.e2,
        variant: match p.variant.as_deref() {
            Some("proof") => Variant::Proof,
            _ => Variant::Statement,
        },
    };
    plan_step_size(spec, &req)
}

pub fn build_run_config(
    cfg: &ConfigDoc,
    spec: &PotentialSpec,
    seed: Option<u64>,
) -> Result<RunConfig> {
    let r = cfg.run_doc()?;
    let init = match &r.init {
        None => InitSetting::ScaledGaussian,
        Some(InitDoc::Word(w)) if GAUSSIAN_INIT.contains(&w.as_str()) => InitSetting::ScaledGaussian,
        Some(InitDoc::Word(w)) => return Err(Error::Config(format!("run.init = \"{w}\""))),
        Some(InitDoc::Gaussian { mean, var }) => InitSetting::Gaussian {
            mean: mean.clone(),
            var: var.clone(),
        },
        Some(InitDoc::Point { point }) => InitSetting::Point(point.clone()),
    };
    let checkpoints = match &cfg.output.checkpoints {
        None => Vec::new(),
        Some(CheckpointsDoc::Word(_)) => geometric_checkpoints(r.n_steps),
        Some(CheckpointsDoc::List(ks)) => ks.clone(),
    };
    let rc = RunConfig {
        n_chains: r.n_chains,
        n_steps: r.n_steps,
        eta: match r.eta {
            NumOr::Num(e) => EtaSetting::Fixed(e),
            NumOr::Word(_) => EtaSetting::Plan,
        },
        smoothing: cfg.smoothing_on().map(|s| SamplerSmoothing {
            mu: match s.mu {
                NumOr::Num(m) => MuSetting::Value(m),
                NumOr::Word(_) => MuSetting::SqrtEta,
            },
            p: s.p,
        }),
        burn_in: r.burn_in,
        thin: r.thin,
        seed: seed.unwrap_or(r.seed),
        init,
        checkpoints,
    };
    rc.validate(spec.dim())?;
    Ok(rc)
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

/// Floats are written with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn out_dir(cfg: &ConfigDoc, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn fmt_point(x: &[f64]) -> String {
    x.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(" ")
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// The plan as a `name=value` document.
pub fn cmd_plan(cfg: &ConfigDoc) -> Result<String> {
    let spec = build_spec(cfg)?;
    Ok(build_plan(cfg, &spec)?.to_kv_document())
}

/// Runs every validator and writes `check.csv`
/// (`id,passed,worst_ratio,witness_x,witness_y`). The two β hypotheses are
/// appended as extra rows.
pub fn cmd_check(cfg: &ConfigDoc, out: Option<&Path>) -> Result<Vec<CheckReport>> {
    let spec = build_spec(cfg)?;
    let c = &cfg.check;
    let reports = check_all(&spec, c.n, c.radius, c.seed);
    let dir = out_dir(cfg, out);
    fs::create_dir_all(&dir)?;
    let mut w = csv::Writer::from_path(dir.join("check.csv"))?;
    w.write_record(["id", "passed", "worst_ratio", "witness_x", "witness_y"])?;
    for r in &reports {
        let (wx, wy) = match &r.witness {
            Some((x, y)) => (fmt_point(x), fmt_point(y)),
            None => (String::new(), String::new()),
        };
        w.write_record([
            r.assumption_id.as_str().to_string(),
            r.passed.to_string(),
            fmt_f64(r.worst_ratio),
            wx,
            wy,
        ])?;
    }
    let h = spec.hypotheses();
    for (id, ratio) in [
        ("BetaGe2AlphaN", h.two_alpha_n_ratio),
        ("BetaGe2AlphaNSq", h.two_alpha_n_sq_ratio),
    ] {
        w.write_record([
            id.to_string(),
            (ratio <= 1.0).to_string(),
            fmt_f64(ratio),
            String::new(),
            String::new(),
        ])?;
    }
    w.flush()?;
    Ok(reports)
}

/// Runs the sampler and writes `samples.csv`, `summary.csv` and `run.kv`.
/// Fails with [`Error::AllDiverged`] when no chain survives.
pub fn cmd_sample(cfg: &ConfigDoc, out: Option<&Path>, seed: Option<u64>) -> Result<RunOutput> {
    let spec = build_spec(cfg)?;
    let rc = build_run_config(cfg, &spec, seed)?;
    let plan = match rc.eta {
        EtaSetting::Plan => Some(build_plan(cfg, &spec)?),
        EtaSetting::Fixed(_) => None,
    };
    let output = run(&rc, &spec, plan.as_ref())?;
    let dir = out_dir(cfg, out);
    fs::create_dir_all(&dir)?;
    write_samples(&dir.join("samples.csv"), &output.samples)?;

    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record(["chain_id", "k", "t", "norm", "U", "dissip_inner"])?;
    for s in &output.summaries {
        w.write_record([
            s.chain_id.to_string(),
            s.k.to_string(),
            fmt_f64(s.t),
            fmt_f64(s.norm),
            fmt_f64(s.u),
            fmt_f64(s.dissip_inner),
        ])?;
    }
    w.flush()?;

    let mut kv = String::new();
    let _ = writeln!(kv, "potential={}", spec.name());
    let _ = writeln!(kv, "dim={}", spec.dim());
    let _ = writeln!(kv, "eta={}", fmt_f64(output.eta));
    let _ = writeln!(kv, "mu={}", output.mu.map(fmt_f64).unwrap_or_else(|| "none".into()));
    let _ = writeln!(kv, "n_chains={}", rc.n_chains);
    let _ = writeln!(kv, "n_steps={}", rc.n_steps);
    let _ = writeln!(kv, "seed={}", rc.seed);
    let _ = writeln!(kv, "n_diverged={}", output.n_diverged());
    fs::write(dir.join("run.kv"), kv)?;

    if output.n_diverged() == rc.n_chains {
        return Err(Error::AllDiverged(rc.n_chains));
    }
    Ok(output)
}

pub fn write_samples(path: &Path, samples: &SampleSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["chain_id".to_string(), "k".to_string()];
    header.extend((1..=samples.dim).map(|j| format!("x_{j}")));
    w.write_record(&header)?;
    for i in 0..samples.len() {
        let mut row = vec![samples.chain_ids[i].to_string(), samples.ks[i].to_string()];
        row.extend(samples.point(i).iter().map(|v| fmt_f64(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `samples.csv`; the dimension is the number of `x_` columns.
pub fn read_samples(path: &Path) -> Result<SampleSet> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.len() < 3 || &headers[0] != "chain_id" || &headers[1] != "k" {
        return Err(Error::Config(format!(
            "{} is not a samples file",
            path.display()
        )));
    }
    let dim = headers.len() - 2;
    let mut set = SampleSet::new(dim);
    let parse = |s: &str| -> Result<f64> {
        s.trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad number `{s}`")))
    };
    for rec in r.records() {
        let rec = rec?;
        let cid: u32 = rec[0]
            .parse()
            .map_err(|_| Error::Config(format!("bad chain id `{}`", &rec[0])))?;
        let k: u64 = rec[1]
            .parse()
            .map_err(|_| Error::Config(format!("bad step `{}`", &rec[1])))?;
        let x: Vec<f64> = (2..rec.len()).map(|j| parse(&rec[j])).collect::<Result<_>>()?;
        set.push(cid, k, &x);
    }
    Ok(set)
}

/// Reads `key=value` lines.
pub fn read_kv(path: &Path) -> Result<BTreeMap<String, String>> {
    Ok(fs::read_to_string(path)?
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect())
}

/// The exact-law oracle applies to the unsmoothed Gaussian target started
/// from a Gaussian.
fn gaussian_oracle(cfg: &ConfigDoc, spec: &PotentialSpec) -> Option<GaussianOracle> {
    if spec.name() != "gaussian" || cfg.smoothing_on().is_some() {
        return None;
    }
    let d = spec.dim();
    let (mean0, cov0) = match cfg.run.as_ref()?.init.as_ref() {
        None => (vec![0.0; d], vec![1.0 / spec.l_max(); d]),
        Some(InitDoc::Word(w)) if GAUSSIAN_INIT.contains(&w.as_str()) => {
            (vec![0.0; d], vec![1.0 / spec.l_max(); d])
        }
        Some(InitDoc::Gaussian { mean, var }) if var.iter().all(|v| *v > 0.0) => {
            (mean.clone(), var.clone())
        }
        _ => return None,
    };
    Some(GaussianOracle {
        q: vec![1.0; d],
        mean0,
        cov0,
    })
}

/// Reads samples, computes per-checkpoint diagnostics and writes
/// `diagnostics.csv`.
pub fn cmd_diagnose(
    cfg: &ConfigDoc,
    samples_path: &Path,
    out: Option<&Path>,
) -> Result<DiagnosticsReport> {
    let spec = build_spec(cfg)?;
    let samples = read_samples(samples_path)?;
    if samples.dim != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: samples.dim,
        });
    }
    let kv_path = samples_path.with_file_name("run.kv");
    let eta = match read_kv(&kv_path).ok().and_then(|kv| kv.get("eta").cloned()) {
        Some(e) => e
            .parse()
            .map_err(|_| Error::Config(format!("bad eta in {}", kv_path.display())))?,
        None => match cfg.run_doc()?.eta {
            NumOr::Num(e) => e,
            NumOr::Word(_) => build_plan(cfg, &spec)?.eta,
        },
    };
    let mut opts = DiagnoseOptions::new(eta);
    let dg = &cfg.diagnose;
    opts.grid = HistogramGrid {
        bins: dg.bins.unwrap_or(if spec.dim() == 1 { 128 } else { 64 }),
        half_width: dg.half_width,
        allow_few_samples: dg.allow_few_samples,
    };
    opts.oracle = gaussian_oracle(cfg, &spec);
    let report = diagnose(&samples, &spec, &opts)?;

    let dir = out_dir(cfg, out);
    fs::create_dir_all(&dir)?;
    let mut w = csv::Writer::from_path(dir.join("diagnostics.csv"))?;
    w.write_record([
        "k",
        "t",
        "kl",
        "kl_method",
        "tv",
        "w2",
        "m_2",
        "m_4",
        "tv_from_kl",
        "wbeta_from_kl",
    ])?;
    for r in &report.records {
        w.write_record([
            r.k.to_string(),
            fmt_f64(r.t),
            fmt_opt(r.kl),
            r.kl_method.as_str().to_string(),
            fmt_opt(r.tv),
            fmt_opt(r.w2),
            fmt_opt(r.m_s.get(&2).copied()),
            fmt_opt(r.m_s.get(&4).copied()),
            fmt_opt(r.tv_from_kl),
            fmt_opt(r.wbeta_from_kl),
        ])?;
    }
    w.flush()?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Argument parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(name = "ula", version, about = "Unadjusted Langevin sampling toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Config document (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides output.dir.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides run.seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the chain pool.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the step-size plan as name=value lines.
    Plan,
    /// Validate the declared constants; writes check.csv.
    Check,
    /// Run the sampler; writes samples.csv, summary.csv, run.kv.
    Sample,
    /// Diagnose a samples file; writes diagnostics.csv.
    Diagnose {
        /// Defaults to <out>/samples.csv.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Ineligible(_) => 2,
        Error::AllDiverged(_) => 3,
        Error::DimensionMismatch { .. } => 4,
        _ => 1,
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        // Ignored if a global pool already exists (e.g. repeated calls in tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let cfg = ConfigDoc::load(path)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Plan => {
            let doc = cmd_plan(&cfg)?;
            print!("{doc}");
            for line in doc.lines().filter(|l| l.starts_with("warning=")) {
                eprintln!("{line}");
            }
        }
        Command::Check => {
            let reports = cmd_check(&cfg, out)?;
            for r in reports {
                println!(
                    "{}: {} (worst ratio {})",
                    r.assumption_id.as_str(),
                    if r.passed { "pass" } else { "FAIL" },
                    fmt_f64(r.worst_ratio)
                );
            }
        }
        Command::Sample => {
            let o = cmd_sample(&cfg, out, cli.seed)?;
            println!(
                "{} records, {} diverged chains",
                o.samples.len(),
                o.n_diverged()
            );
        }
        Command::Diagnose { samples } => {
            let sp = samples
                .clone()
                .unwrap_or_else(|| out_dir(&cfg, out).join("samples.csv"));
            let rep = cmd_diagnose(&cfg, &sp, out)?;
            println!("{} checkpoints", rep.records.len());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "potential": {"name": "gaussian", "dim": 2},
        "run": {"n_chains": 2, "n_steps": 100, "eta": 0.01, "seed": 3},
        "plan": {"eps": 0.1, "s": 10, "gamma": 1.0, "H0": 1.0}
    }"#;

    #[test]
    fn parses_numbers_and_keywords() {
        let c = ConfigDoc::parse(BASE).unwrap();
        assert_eq!(c.run.as_ref().unwrap().eta, NumOr::Num(0.01));
        assert_eq!(c.plan.as_ref().unwrap().h0, NumOr::Num(1.0));
        let p = ConfigDoc::parse(&BASE.replace("\"eta\": 0.01", "\"eta\": \"plan\"")).unwrap();
        assert_eq!(p.run.unwrap().eta, NumOr::Word("plan".into()));
        for w in GAUSSIAN_INIT {
            let c = ConfigDoc::parse(&BASE.replace("\"H0\": 1.0", &format!("\"H0\": \"{w}\""))).unwrap();
            assert!(build_plan(&c, &build_spec(&c).unwrap()).unwrap().h0.is_finite());
        }
    }

    #[test]
    fn rejects_bad_keywords_and_fields() {
        assert!(ConfigDoc::parse(&BASE.replace("\"eta\": 0.01", "\"eta\": \"fast\"")).is_err());
        assert!(ConfigDoc::parse(&BASE.replace("\"seed\": 3", "\"seed\": 3, \"bogus\": 1")).is_err());
        let no_plan = r#"{"potential": {"name": "gaussian", "dim": 1},
            "run": {"n_chains": 1, "n_steps": 10, "eta": "plan"}}"#;
        assert!(ConfigDoc::parse(no_plan).is_err());
    }

    #[test]
    fn plan_document_is_deterministic() {
        let c = ConfigDoc::parse(BASE).unwrap();
        let a = cmd_plan(&c).unwrap();
        assert_eq!(a, cmd_plan(&c).unwrap());
        assert!(a.contains("lambda=6.0000000000000000e0\n"));
    }

    #[test]
    fn gamma_keywords() {
        let lb = BASE.replace("\"gamma\": 1.0", "\"gamma\": \"poincare_lb\"");
        let c = ConfigDoc::parse(&lb).unwrap();
        let b = build_plan(&c, &build_spec(&c).unwrap()).unwrap();
        assert!((b.gamma - 1.0 / (32.0 * 2.0 * 4.0)).abs() < 1e-15);
        let fs = BASE.replace("\"gamma\": 1.0", "\"gamma\": \"from_spec\"");
        let c = ConfigDoc::parse(&fs).unwrap();
        assert_eq!(build_plan(&c, &build_spec(&c).unwrap()).unwrap().gamma, 1.0);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Ineligible("x".into())), 2);
        assert_eq!(exit_code(&Error::AllDiverged(1)), 3);
        assert_eq!(exit_code(&Error::DimensionMismatch { expected: 1, got: 2 }), 4);
        assert_eq!(exit_code(&Error::Config("x".into())), 1);
    }

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
