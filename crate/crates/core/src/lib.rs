//! Limited-data robust design optimization with polynomial dimensional
//! decomposition (PDD) surrogates trained by sparsity-promoting D-MORPH
//! regression.
//!
//! The pipeline: sample inputs ([`measures`]), build measure-consistent
//! orthonormal bases ([`orthopoly`]) and the truncated PDD basis ([`pdd`]),
//! fit coefficients from few samples ([`regression`]), extract moments and
//! retrain at new designs without new model runs ([`surrogate`]), and
//! optimize a weighted mean / standard deviation objective ([`rdo`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod measures;
pub mod orthopoly;
pub mod pdd;
pub mod qoi;
pub mod quadrature;
pub mod rdo;
pub mod regression;
pub mod surrogate;

pub use error::{Error, Result};
pub use measures::{InputLaw, Marginal};
pub use orthopoly::OrthoBasis1D;
