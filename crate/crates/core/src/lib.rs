//! # kplab
//!
//! A desk-scale laboratory for Kneser–Poulsen phenomena in information theory.
//!
//! A weighted point configuration `X` and its image `T(X)` under a
//! pairwise-distance-nonincreasing map are both smoothed by Gaussian noise;
//! the crate computes and compares their Rényi entropies of every order, and
//! checks the surrounding machinery numerically:
//!
//! | Module | What it covers |
//! |--------|----------------|
//! | [`configspace`] | point configurations, certified contraction pairs, random 1-Lipschitz maps |
//! | [`gaussmix`] | mixture densities; `h_α` by closed form, quadrature, Monte Carlo, mode search |
//! | [`kpverify`] | entropy and mutual-information comparisons across orders and noise levels |
//! | [`flow`] | continuous contractions, smoothed velocity fields and their divergence |
//! | [`minty`] | single-point monotone extension by linear feasibility |
//! | [`costa`] | concavity of entropy power, `A(β)` series, the Lipschitz-weighted inequality |
//! | [`capacity`] | Blahut–Arimoto for finite-alphabet AWGN channels |
//! | [`geovol`] | Monte Carlo volume of unions of equal balls |
//! | [`cli`] | experiment configs, CSV reports, the `kplab` binary |
//!
//! All logarithms are natural; entropies are in nats.

pub mod capacity;
pub mod cli;
pub mod configspace;
pub mod costa;
pub mod error;
pub mod flow;
pub mod gaussmix;
pub mod geovol;
pub mod kpverify;
pub mod minty;
pub mod report;
pub mod rng;
pub mod suite;

pub use configspace::{
    make_contraction_pair, random_contraction, validate_configuration, Contraction,
    ContractionMethod, ContractionPair, PointConfiguration,
};
pub use error::{Error, Result};
pub use gaussmix::{EntropyEstimate, EstimatorPolicy, GaussianMixture, Method, PolicyMode};
