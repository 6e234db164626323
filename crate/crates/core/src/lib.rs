//! Reserves for life-insurance contracts driven by phase-type, inhomogeneous
//! and fractional (Mittag-Leffler) absorption laws.

// `!(x > 0.0)` is the idiom for rejecting NaN along with the bound.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod matrix;
pub mod mittag_leffler;
pub mod quadrature;
pub mod reserve;
pub mod rng;
pub mod simulation;
