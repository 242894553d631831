//! Solicit-then-suggest: Bayesian preference solicitation followed by
//! assortment construction.
//!
//! An agent asks `m` noisy directional questions about a customer's ideal
//! point `θ ∈ R^d`, updates a Gaussian belief, then recommends `k` products;
//! the customer picks the nearest one. This crate provides the belief
//! update, solicitation plans (rank-capped water-filling and its
//! realization as unit queries), Gaussian quantizers for assortments, a grid
//! posterior for non-Gaussian priors, and a seeded simulation harness.

pub mod assortment;
pub mod belief;
pub mod error;
pub mod generalprior;
pub mod harness;
pub mod linalg;
pub mod normal;
pub mod quantize;
pub mod rng;
pub mod solicitation;

pub use assortment::{best_k, best_pair, best_single, customer_choice, hedging_gap, Choice, HedgingPair};
pub use belief::{cov_from_information, simulate_response, GaussianBelief, Query, Response};
pub use error::{Error, Result};
pub use quantize::{
    distortion_mc, lloyd_kd, lloyd_max_normal, product_quantizer, quantization_efficiency, Assortment, ScalarQuantizer,
};
pub use solicitation::{greedy_direction, realize_queries, waterfill, SolicitationPlan};
