//! Independent oracles and fixtures used to check `diffdesc`.
//!
//! Nothing here is needed to compute descriptors; the crate exists so that
//! the acceptance tests and the `verify-identities` command share one set of
//! quadrature oracles, glyph fixtures and reference densities.

pub mod comb_smoothing;
pub mod glyph;
pub mod identities;
pub mod quadrature;
