//! Personalised ride-pooling discounts.
//!
//! The pipeline runs in three stages:
//!
//! 1. [`shareability`] enumerates every pooled ride a pooling-friendly traveller
//!    would consider, using deterministic quantiles of the behavioural
//!    [`population`];
//! 2. [`acceptance`] turns the latent trait distribution into per-traveller
//!    step functions from discount to acceptance probability, and [`pricing`]
//!    picks, per ride, the discount vector with the highest expected
//!    profitability (expected revenue over expected vehicle distance);
//! 3. [`matching`] partitions travellers into priced rides with an exact
//!    set-partitioning solver.
//!
//! [`experiment`] wires the stages into a reproducible study comparing
//! personalised, flat and private-only strategies.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod demand;
pub mod error;
pub mod experiment;
pub mod matching;
pub mod population;
pub mod pricing;
pub mod shareability;

pub use error::{Error, Result};
