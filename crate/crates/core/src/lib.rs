//! Exact computation with finitely generated extended Choquet cones.
//!
//! A cone is given by a finite presentation ([`cone`]): a distributive
//! lattice of idempotents, generators with their supports, and the rays of
//! each stratum. On top of it the crate provides
//!
//! * arithmetic in `[0, ∞]` and its powers ([`xreal`]),
//! * continuous and lower semicontinuous linear functions ([`afun`]),
//! * the ordered vector space of Riesz vectors and its pairing with the
//!   cone ([`riesz`]),
//! * factorizations through powers of `[0, ∞]` ([`ehs`]), and
//! * systems of such powers, their duals and Bratteli diagrams ([`limits`]).
//!
//! All arithmetic is exact over arbitrary-precision rationals.

pub mod afun;
pub mod cone;
pub mod ehs;
pub mod error;
pub mod feasibility;
pub mod fixtures;
pub mod io;
pub mod limits;
pub mod riesz;
pub mod sample;
pub mod selftest;
pub mod xreal;

pub use error::{Error, Result};
