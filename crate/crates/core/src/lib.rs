//! Expert elicitation of continuous, symmetric, unimodal distributions.
//!
//! An expert states percentile judgements `P(X < x) = p`. This crate fits
//! normal, Student-t and Cauchy location-scale families to them, asks
//! whether each family can thread the imprecision box around every
//! judgement, and produces the feedback (tertiles, tail probabilities,
//! inter-family divergence, plots) that drives the revise-or-accept loop.

pub mod cli;
pub mod distributions;
pub mod feedback;
pub mod fitting;
pub mod judgements;
mod optim;
pub mod service;
pub mod session;
mod special;

pub use distributions::{DomainError, FamilyKind, LocationScaleDistribution};
