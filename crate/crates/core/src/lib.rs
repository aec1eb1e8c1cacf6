#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Numerical laboratory for Ginzburg–Landau (Allen–Cahn) minimizers whose
//! zero level sets are asymptotically flat.

pub mod acf1;
pub mod barriers;
pub mod contact;
pub mod elliptic;
pub mod error;
pub mod levelset;
pub mod potential;
pub mod profile1d;
pub mod quad;
pub mod speed;

pub use error::{Error, Result};
pub use potential::{DoubleWellPotential, Well};
pub use profile1d::Profile1D;
