//! Estimation from measured inter-arrival histograms.
//!
//! The usual pipeline: fit a straight line to the log histogram where
//! afterpulsing has died out ([`fit_tail`]), turn the intercept into bounds
//! ([`bound_afterpulsing`]), check how the bound moves with the window
//! start ([`sweep_tau`]) and, if a parametric model is wanted, fit the
//! early part of the curve ([`fit_exponential`]).

mod expfit;
mod optim;
mod rates;
mod tail;

pub use expfit::{fit_exponential, ExpFitOptions, ExpFitResult, AMPLITUDE_RANGE, MAX_TAU0_PS};
pub use rates::{
    efficiency_from_rates, estimate_efficiency, rates_from_mu, separate_rates, EfficiencyEstimate, RateSeparation,
};
pub use tail::{
    afterpulse_excess, bound_afterpulsing, fit_tail, sweep_tau, ExcessBin, SlotOrigin, TailFitOptions, TailFitResult,
    TauSweepEntry, TauSweepResult, PLATEAU_ABS_TOL, PLATEAU_REL_TOL, PLATEAU_RUN,
};
