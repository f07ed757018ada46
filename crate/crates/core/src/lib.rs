//! # ula
//!
//! Unadjusted Langevin sampling for potentials whose gradients are a mixture of
//! Hölder-continuous pieces:
//!
//! ```text
//! ‖∇U(x) − ∇U(y)‖ ≤ Σᵢ Lᵢ‖x − y‖^αᵢ,     ⟨∇U(x), x⟩ ≥ a‖x‖^β − b
//! ```
//!
//! The crate is split by concern:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`potential`] | potential abstraction, built-in test potentials, assumption validators |
//! | [`pgauss`] | p-generalized Gaussian draws, smoothing estimators U_μ and g_μ |
//! | [`sampler`] | the ULA kernel, its smoothed-gradient variant, multi-chain runner |
//! | [`bounds`] | explicit constants and the (η, K, T) step-size planner |
//! | [`diagnostics`] | KL / TV / W₂ estimators, moment tracking, Gaussian oracles |
//! | [`cli`] | config documents and the `plan` / `check` / `sample` / `diagnose` pipelines |
//!
//! ## Quick start
//!
//! ```rust
//! use std::collections::BTreeMap;
//! use rand::SeedableRng;
//! use rand_chacha::ChaCha8Rng;
//! use ula::potential::builtin;
//! use ula::sampler::{ula_step, ChainState};
//!
//! let spec = builtin("gaussian", 2, &BTreeMap::new()).unwrap();
//! let mut rng = ChaCha8Rng::seed_from_u64(7);
//! let mut state = ChainState::new(vec![1.0, 0.0]);
//! for _ in 0..100 {
//!     state = ula_step(&state, &spec, 0.01, &mut rng).unwrap();
//! }
//! assert_eq!(state.k, 100);
//! ```

pub mod bounds;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod pgauss;
pub mod potential;
pub mod quadrature;
pub mod sampler;

pub use error::{Error, Result};
