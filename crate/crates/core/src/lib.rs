//! Afterpulsing-aware waiting-time analysis for single-photon detectors.
//!
//! The detector is modelled in discrete time slots. Each slot receives
//! Poissonian source and dark counts with means `mu_s` and `mu_d`, plus an
//! afterpulse with probability `P_a(i)` that depends on the number of slots
//! since the previous detection. The crate provides:
//!
//! - exact waiting-time distributions and their bounds ([`waiting`], [`bounds`])
//! - afterpulse models with dead-time scaling ([`models`])
//! - an exact event-stream simulator ([`sim`])
//! - histogramming and estimation from measured data ([`histogram`], [`estimation`])
//! - time-tag, histogram and report file formats ([`io`])

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod estimation;
pub mod histogram;
pub mod io;
pub mod models;
pub mod params;
pub mod sim;
pub mod stream;
pub mod waiting;

pub use error::{Error, FormatError, Result};
pub use histogram::InterArrivalHistogram;
pub use models::AfterpulseModel;
pub use params::{DeadTime, SlotParams, SlotWidth};
pub use stream::TimeTagStream;
