#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;

pub mod constructions;
pub mod consts;
pub mod error;
pub mod experiments;
pub mod fft;
pub mod grass;
pub mod highlow;
pub mod incidence;
pub mod linalg;
pub mod rng;

pub use error::{Error, Result};
pub mod nets;
pub mod par;
pub mod spatial;
